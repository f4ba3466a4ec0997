//! Open, close and swap moves on the scaled cost `λ·f(S) + cc(σ)`, and the
//! deterministic converge loop built on them.
//!
//! An operation is φ-efficient when it lowers the scaled cost by more than
//! `φ` per reconnected client.

use crate::error::SearchError;
use crate::model::{ClientId, FacilityId, Instance, Solution, COST_TOL, LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Open,
    Close,
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reconnection {
    pub client: ClientId,
    pub from: FacilityId,
    pub to: FacilityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOp {
    pub kind: OpKind,
    pub open_id: Option<FacilityId>,
    pub close_id: Option<FacilityId>,
    pub reconnections: Vec<Reconnection>,
    /// Change in scaled cost; negative is an improvement.
    pub scaled_delta: f64,
    opens_new: bool,
    served_by_closed: usize,
}

impl LocalOp {
    /// Number of facilities whose open status the operation flips.
    pub fn facility_changes(&self) -> usize {
        usize::from(self.opens_new) + usize::from(self.close_id.is_some())
    }
}

/// Client and facility recourse incurred by applied operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Recourse {
    pub clients: usize,
    pub facilities: usize,
}

impl std::ops::AddAssign for Recourse {
    fn add_assign(&mut self, rhs: Self) {
        self.clients += rhs.clients;
        self.facilities += rhs.facilities;
    }
}

fn efficient(delta: f64, phi: f64, k: usize) -> bool {
    delta < -phi * k as f64 - COST_TOL
}

/// Snapshot of the solution shape reused across many candidate evaluations.
struct View {
    open: Vec<FacilityId>,
    active: Vec<(ClientId, FacilityId)>,
    served: Vec<Vec<ClientId>>,
}

impl View {
    fn new(solution: &Solution) -> Self {
        let mut served = vec![Vec::new(); solution.num_facilities()];
        let active: Vec<_> = solution.assignments().collect();
        for &(j, i) in &active {
            served[i].push(j);
        }
        Self { open: solution.open_facilities().collect(), active, served }
    }

    /// Nearest facility to `j` among open facilities other than `skip`,
    /// optionally also considering `extra`.
    fn nearest_excluding(
        &self,
        instance: &Instance,
        j: ClientId,
        skip: FacilityId,
        extra: Option<FacilityId>,
    ) -> Option<(FacilityId, u64)> {
        self.open
            .iter()
            .copied()
            .filter(|&i| i != skip)
            .chain(extra)
            .map(|i| (instance.dist(j, i), i))
            .min()
            .map(|(d, i)| (i, d))
    }
}

fn open_op(instance: &Instance, solution: &Solution, view: &View, i: FacilityId, phi: f64) -> Option<LocalOp> {
    let opens_new = !solution.is_open(i);
    let mut delta = if opens_new { LAMBDA * instance.facility_cost(i) } else { 0.0 };
    let mut reconnections = Vec::new();
    for &(j, s) in &view.active {
        let (dn, ds) = (instance.dist(j, i), instance.dist(j, s));
        if (dn as f64) + phi < ds as f64 {
            delta -= (ds - dn) as f64;
            reconnections.push(Reconnection { client: j, from: s, to: i });
        }
    }
    efficient(delta, phi, reconnections.len()).then_some(LocalOp {
        kind: OpKind::Open,
        open_id: Some(i),
        close_id: None,
        reconnections,
        scaled_delta: delta,
        opens_new,
        served_by_closed: 0,
    })
}

fn close_op(
    instance: &Instance,
    solution: &Solution,
    view: &View,
    i2: FacilityId,
    phi: f64,
) -> Result<Option<LocalOp>, SearchError> {
    if !solution.is_open(i2) {
        return Err(SearchError::NotOpen(i2));
    }
    let mut delta = -LAMBDA * instance.facility_cost(i2);
    let mut reconnections = Vec::with_capacity(view.served[i2].len());
    for &j in &view.served[i2] {
        let (to, d) = view.nearest_excluding(instance, j, i2, None).ok_or(SearchError::NoAlternative(i2))?;
        delta += d as f64 - instance.dist(j, i2) as f64;
        reconnections.push(Reconnection { client: j, from: i2, to });
    }
    Ok(efficient(delta, phi, reconnections.len()).then_some(LocalOp {
        kind: OpKind::Close,
        open_id: None,
        close_id: Some(i2),
        served_by_closed: reconnections.len(),
        reconnections,
        scaled_delta: delta,
        opens_new: false,
    }))
}

fn swap_op(
    instance: &Instance,
    solution: &Solution,
    view: &View,
    i: FacilityId,
    i2: FacilityId,
    phi: f64,
) -> Result<Option<LocalOp>, SearchError> {
    if solution.is_open(i) {
        return Err(SearchError::AlreadyOpen(i));
    }
    if !solution.is_open(i2) {
        return Err(SearchError::NotOpen(i2));
    }
    let mut delta = LAMBDA * (instance.facility_cost(i) - instance.facility_cost(i2));
    let mut reconnections = Vec::new();
    for &(j, s) in &view.active {
        if s == i2 {
            // Always succeeds: `i` itself is a candidate.
            let (to, d) = view.nearest_excluding(instance, j, i2, Some(i)).expect("swap target is a candidate");
            delta += d as f64 - instance.dist(j, i2) as f64;
            reconnections.push(Reconnection { client: j, from: i2, to });
        } else {
            let (dn, ds) = (instance.dist(j, i), instance.dist(j, s));
            if (dn as f64) + phi < ds as f64 {
                delta -= (ds - dn) as f64;
                reconnections.push(Reconnection { client: j, from: s, to: i });
            }
        }
    }
    let served_by_closed = view.served[i2].len();
    Ok(efficient(delta, phi, reconnections.len()).then_some(LocalOp {
        kind: OpKind::Swap,
        open_id: Some(i),
        close_id: Some(i2),
        reconnections,
        scaled_delta: delta,
        opens_new: true,
        served_by_closed,
    }))
}

/// The open-`i` operation if it is φ-efficient. For `i ∈ S` it only moves
/// clients that gain more than `φ`.
pub fn find_efficient_open(instance: &Instance, solution: &Solution, i: FacilityId, phi: f64) -> Option<LocalOp> {
    open_op(instance, solution, &View::new(solution), i, phi)
}

pub fn find_efficient_close(
    instance: &Instance,
    solution: &Solution,
    i2: FacilityId,
    phi: f64,
) -> Result<Option<LocalOp>, SearchError> {
    close_op(instance, solution, &View::new(solution), i2, phi)
}

pub fn find_efficient_swap(
    instance: &Instance,
    solution: &Solution,
    i: FacilityId,
    i2: FacilityId,
    phi: f64,
) -> Result<Option<LocalOp>, SearchError> {
    swap_op(instance, solution, &View::new(solution), i, i2, phi)
}

/// First φ-efficient operation in the fixed order: opens, closes, swaps, each
/// by ascending facility id.
pub fn find_any_efficient_op(instance: &Instance, solution: &Solution, phi: f64) -> Option<LocalOp> {
    if solution.num_active() == 0 {
        // With no clients the only improving moves are closes of idle
        // facilities; they are still worth finding.
        let view = View::new(solution);
        return view.open.iter().find_map(|&i2| close_op(instance, solution, &view, i2, phi).ok().flatten());
    }
    let view = View::new(solution);
    let n = instance.num_facilities();
    if let Some(op) = (0..n).find_map(|i| open_op(instance, solution, &view, i, phi)) {
        return Some(op);
    }
    if let Some(op) = view.open.iter().find_map(|&i2| close_op(instance, solution, &view, i2, phi).ok().flatten()) {
        return Some(op);
    }
    for i in solution.closed_facilities() {
        for &i2 in &view.open {
            if let Ok(Some(op)) = swap_op(instance, solution, &view, i, i2, phi) {
                return Some(op);
            }
        }
    }
    None
}

/// Applies `op`, rejecting it if the solution no longer matches the state it
/// was computed against.
pub fn apply_op(solution: &mut Solution, op: &LocalOp) -> Result<Recourse, SearchError> {
    if let Some(i) = op.open_id {
        if op.opens_new == solution.is_open(i) {
            return Err(SearchError::StaleOperation);
        }
    }
    if let Some(i2) = op.close_id {
        if !solution.is_open(i2) || solution.served_by(i2).len() != op.served_by_closed {
            return Err(SearchError::StaleOperation);
        }
    }
    for r in &op.reconnections {
        let target_ok = Some(r.to) == op.open_id || (solution.is_open(r.to) && Some(r.to) != op.close_id);
        if solution.assignment(r.client) != Some(r.from) || !target_ok {
            return Err(SearchError::StaleOperation);
        }
    }
    if let Some(i) = op.open_id {
        solution.open(i);
    }
    if let Some(i2) = op.close_id {
        solution.close(i2);
    }
    for r in &op.reconnections {
        solution.assign(r.client, r.to);
    }
    Ok(Recourse { clients: op.reconnections.len(), facilities: op.facility_changes() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvergeStats {
    pub operations: usize,
    pub recourse: Recourse,
    /// Closes that reconnected no client.
    pub empty_closes: usize,
    pub swaps: usize,
}

/// Applies efficient operations until none is left, asking `phi` for the
/// threshold before every search.
pub fn converge_with<P>(instance: &Instance, solution: &mut Solution, mut phi: P) -> ConvergeStats
where
    P: FnMut(&Instance, &Solution) -> f64,
{
    let mut stats = ConvergeStats::default();
    loop {
        let p = phi(instance, solution);
        let Some(op) = find_any_efficient_op(instance, solution, p) else {
            return stats;
        };
        let r = apply_op(solution, &op).expect("freshly computed operation applies");
        stats.operations += 1;
        stats.recourse += r;
        stats.empty_closes += usize::from(op.kind == OpKind::Close && op.reconnections.is_empty());
        stats.swaps += usize::from(op.kind == OpKind::Swap);
    }
}

pub fn converge(instance: &Instance, solution: &mut Solution, phi: f64) -> ConvergeStats {
    converge_with(instance, solution, |_, _| phi)
}
