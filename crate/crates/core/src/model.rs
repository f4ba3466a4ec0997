//! Instances, solutions and the cost functions shared by every algorithm.
//!
//! Facilities are dense ids `0..|F|`. Clients are registered on arrival and
//! receive dense [`ClientId`]s in arrival order; the opaque string name used on
//! the wire is kept alongside for reporting.

use std::collections::HashMap;

use crate::error::ModelError;

pub type FacilityId = usize;
pub type ClientId = usize;

/// Facility-cost scaling used by the local search.
pub const LAMBDA: f64 = std::f64::consts::SQRT_2;
/// Approximation factor of local search on the scaled cost, `1 + √2`.
pub const ALPHA_FL: f64 = 1.0 + std::f64::consts::SQRT_2;
/// Absolute tolerance for every floating-point cost comparison.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Client {
    pub name: String,
    /// Distance to every facility, indexed by [`FacilityId`].
    pub dist: Vec<u64>,
}

/// Facility set, facility metric and the clients registered so far.
#[derive(Debug, Clone)]
pub struct Instance {
    costs: Vec<f64>,
    fdist: Vec<Vec<u64>>,
    clients: Vec<Client>,
    by_name: HashMap<String, ClientId>,
    diameter: u64,
}

impl Instance {
    pub fn new(costs: Vec<f64>, fdist: Vec<Vec<u64>>) -> Result<Self, ModelError> {
        let n = costs.len();
        for (i, &c) in costs.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(ModelError::InvalidCost { facility: i, cost: c });
            }
        }
        if fdist.len() != n {
            return Err(ModelError::DistanceLength { expected: n, got: fdist.len() });
        }
        let mut diameter = 0;
        for (a, row) in fdist.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::DistanceLength { expected: n, got: row.len() });
            }
            if row[a] != 0 {
                return Err(ModelError::NonzeroDiagonal(a));
            }
            for (b, &d) in row.iter().enumerate() {
                if fdist[b][a] != d {
                    return Err(ModelError::Asymmetric { a, b });
                }
                diameter = diameter.max(d);
            }
        }
        Ok(Self { costs, fdist, clients: Vec::new(), by_name: HashMap::new(), diameter })
    }

    pub fn num_facilities(&self) -> usize {
        self.costs.len()
    }

    pub fn facility_cost(&self, i: FacilityId) -> f64 {
        self.costs[i]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn facility_distances(&self) -> &[Vec<u64>] {
        &self.fdist
    }

    pub fn facility_distance(&self, a: FacilityId, b: FacilityId) -> u64 {
        self.fdist[a][b]
    }

    /// Registers an arriving client and returns its dense id.
    pub fn add_client(&mut self, name: impl Into<String>, dist: Vec<u64>) -> Result<ClientId, ModelError> {
        if dist.len() != self.num_facilities() {
            return Err(ModelError::DistanceLength { expected: self.num_facilities(), got: dist.len() });
        }
        let id = self.clients.len();
        let name = name.into();
        self.diameter = self.diameter.max(dist.iter().copied().max().unwrap_or(0));
        self.by_name.insert(name.clone(), id);
        self.clients.push(Client { name, dist });
        Ok(id)
    }

    /// Registers a client collocated with facility `at`.
    pub fn add_client_at(&mut self, name: impl Into<String>, at: FacilityId) -> Result<ClientId, ModelError> {
        if at >= self.num_facilities() {
            return Err(ModelError::UnknownFacility(at));
        }
        let row = self.fdist[at].clone();
        self.add_client(name, row)
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn client(&self, j: ClientId) -> &Client {
        &self.clients[j]
    }

    pub fn clients(&self) -> &[Client] {
        &self.clients
    }

    /// Most recent client registered under `name`.
    pub fn client_id(&self, name: &str) -> Option<ClientId> {
        self.by_name.get(name).copied()
    }

    #[inline]
    pub fn dist(&self, j: ClientId, i: FacilityId) -> u64 {
        self.clients[j].dist[i]
    }

    /// Largest distance observed so far over facilities and arrived clients.
    pub fn diameter(&self) -> u64 {
        self.diameter
    }

    /// Checks the triangle inequality over `F ∪ C`. Client–client distances
    /// are never materialized, so only triangles with at most one client
    /// corner are checked.
    pub fn validate_triangle(&self) -> Result<(), ModelError> {
        let n = self.num_facilities();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.fdist[a][c] > self.fdist[a][b] + self.fdist[b][c] {
                        return Err(ModelError::TriangleViolation(format!("facilities {a},{b},{c}")));
                    }
                }
            }
        }
        for cl in &self.clients {
            for a in 0..n {
                for b in 0..n {
                    if cl.dist[a] > cl.dist[b] + self.fdist[b][a] {
                        return Err(ModelError::TriangleViolation(format!(
                            "client {} via facilities {b},{a}",
                            cl.name
                        )));
                    }
                    if self.fdist[a][b] > cl.dist[a] + cl.dist[b] {
                        return Err(ModelError::TriangleViolation(format!(
                            "facilities {a},{b} via client {}",
                            cl.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nearest candidate to a client given its distance vector. Ties go to the
/// smallest facility id regardless of iteration order.
pub fn nearest_facility<I>(dist: &[u64], candidates: I) -> Result<(FacilityId, u64), ModelError>
where
    I: IntoIterator<Item = FacilityId>,
{
    candidates.into_iter().map(|i| (dist[i], i)).min().map(|(d, i)| (i, d)).ok_or(ModelError::EmptyCandidates)
}

/// A client connection archived when a stage is frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenConnection {
    pub client: ClientId,
    pub facility: FacilityId,
    pub distance: u64,
}

/// Open set `S`, assignment `σ` of active clients, and the frozen archive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Solution {
    open: Vec<bool>,
    assignment: Vec<Option<FacilityId>>,
    retired: Vec<bool>,
    active: usize,
    frozen: Vec<FrozenConnection>,
    frozen_facilities: Vec<FacilityId>,
    frozen_facility_cost: f64,
}

impl Solution {
    pub fn new(num_facilities: usize) -> Self {
        Self { open: vec![false; num_facilities], ..Self::default() }
    }

    pub fn num_facilities(&self) -> usize {
        self.open.len()
    }

    #[inline]
    pub fn is_open(&self, i: FacilityId) -> bool {
        self.open[i]
    }

    pub fn open(&mut self, i: FacilityId) {
        self.open[i] = true;
    }

    pub fn close(&mut self, i: FacilityId) {
        self.open[i] = false;
    }

    pub fn open_facilities(&self) -> impl Iterator<Item = FacilityId> + '_ {
        self.open.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i)
    }

    pub fn closed_facilities(&self) -> impl Iterator<Item = FacilityId> + '_ {
        self.open.iter().enumerate().filter(|(_, &o)| !o).map(|(i, _)| i)
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn assign(&mut self, j: ClientId, i: FacilityId) {
        if j >= self.assignment.len() {
            self.assignment.resize(j + 1, None);
            self.retired.resize(j + 1, false);
        }
        debug_assert!(!self.retired[j], "frozen client {j} reassigned");
        if self.assignment[j].replace(i).is_none() {
            self.active += 1;
        }
    }

    pub fn unassign(&mut self, j: ClientId) -> Option<FacilityId> {
        let prev = self.assignment.get_mut(j).and_then(Option::take);
        if prev.is_some() {
            self.active -= 1;
        }
        prev
    }

    #[inline]
    pub fn assignment(&self, j: ClientId) -> Option<FacilityId> {
        self.assignment.get(j).copied().flatten()
    }

    /// Active clients with their facility, in ascending client id.
    pub fn assignments(&self) -> impl Iterator<Item = (ClientId, FacilityId)> + '_ {
        self.assignment.iter().enumerate().filter_map(|(j, a)| a.map(|i| (j, i)))
    }

    pub fn active_clients(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.assignments().map(|(j, _)| j)
    }

    pub fn num_active(&self) -> usize {
        self.active
    }

    pub fn served_by(&self, i: FacilityId) -> Vec<ClientId> {
        self.assignments().filter(|&(_, f)| f == i).map(|(j, _)| j).collect()
    }

    pub fn is_retired(&self, j: ClientId) -> bool {
        self.retired.get(j).copied().unwrap_or(false)
    }

    pub fn frozen(&self) -> &[FrozenConnection] {
        &self.frozen
    }

    pub fn frozen_facilities(&self) -> &[FacilityId] {
        &self.frozen_facilities
    }

    pub fn frozen_facility_cost(&self) -> f64 {
        self.frozen_facility_cost
    }

    /// Permanently opens a copy of every facility in `open` and archives the
    /// listed connections at their current distances. Archived clients leave
    /// the active set for good.
    pub fn freeze(&mut self, instance: &Instance, open: &[FacilityId], connections: &[(ClientId, FacilityId)]) {
        for &i in open {
            self.frozen_facilities.push(i);
            self.frozen_facility_cost += instance.facility_cost(i);
        }
        for &(j, i) in connections {
            self.frozen.push(FrozenConnection { client: j, facility: i, distance: instance.dist(j, i) });
            self.unassign(j);
            if j >= self.retired.len() {
                self.retired.resize(j + 1, false);
                self.assignment.resize(j + 1, None);
            }
            self.retired[j] = true;
        }
    }

    /// `f(S)` of the active solution.
    pub fn facility_cost(&self, instance: &Instance) -> f64 {
        self.open_facilities().map(|i| instance.facility_cost(i)).sum()
    }

    /// `cc(σ)` of the active solution.
    pub fn connection_cost(&self, instance: &Instance) -> u64 {
        self.assignments().map(|(j, i)| instance.dist(j, i)).sum()
    }

    /// `f(S) + cc(σ)` without validating the assignment.
    pub fn total_cost(&self, instance: &Instance) -> f64 {
        self.facility_cost(instance) + self.connection_cost(instance) as f64
    }

    /// `λ·f(S) + cc(σ)` without validating the assignment.
    pub fn scaled_total(&self, instance: &Instance) -> f64 {
        LAMBDA * self.facility_cost(instance) + self.connection_cost(instance) as f64
    }

    pub fn frozen_cost(&self) -> f64 {
        self.frozen_facility_cost + self.frozen.iter().map(|c| c.distance).sum::<u64>() as f64
    }
}

/// Cost decomposition of a solution, active part plus frozen archive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostReport {
    pub facility_cost: f64,
    pub connection_cost: f64,
    pub total: f64,
    pub scaled: f64,
    pub frozen_cost: f64,
    pub grand_total: f64,
}

fn check_assignment(solution: &Solution) -> Result<(), ModelError> {
    for (j, i) in solution.assignments() {
        if i >= solution.num_facilities() || !solution.is_open(i) {
            return Err(ModelError::ClosedFacility { client: j, facility: i });
        }
    }
    Ok(())
}

pub fn cost(solution: &Solution, instance: &Instance) -> Result<CostReport, ModelError> {
    check_assignment(solution)?;
    let facility_cost = solution.facility_cost(instance);
    let connection_cost = solution.connection_cost(instance) as f64;
    let total = facility_cost + connection_cost;
    let frozen_cost = solution.frozen_cost();
    Ok(CostReport {
        facility_cost,
        connection_cost,
        total,
        scaled: LAMBDA * facility_cost + connection_cost,
        frozen_cost,
        grand_total: total + frozen_cost,
    })
}

pub fn scaled_cost(solution: &Solution, instance: &Instance) -> Result<f64, ModelError> {
    check_assignment(solution)?;
    Ok(solution.scaled_total(instance))
}

/// Grand total where every physical facility is paid for once, no matter how
/// many frozen copies of it exist.
pub fn physical_grand_total(solution: &Solution, instance: &Instance) -> f64 {
    let mut paid = vec![false; instance.num_facilities()];
    for i in solution.open_facilities().chain(solution.frozen_facilities().iter().copied()) {
        paid[i] = true;
    }
    let f: f64 = paid.iter().enumerate().filter(|(_, &p)| p).map(|(i, _)| instance.facility_cost(i)).sum();
    let frozen_cc: u64 = solution.frozen().iter().map(|c| c.distance).sum();
    f + solution.connection_cost(instance) as f64 + frozen_cc as f64
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two facilities `a`, `b` of cost 4 at distance 10 on a line, and four
    /// clients at positions 0, 1, 9, 10.
    pub fn inst_a() -> Instance {
        let mut inst = Instance::new(vec![4.0, 4.0], vec![vec![0, 10], vec![10, 0]]).unwrap();
        for (k, p) in [0u64, 1, 9, 10].into_iter().enumerate() {
            inst.add_client(format!("c{}", k + 1), vec![p, 10 - p]).unwrap();
        }
        inst
    }
}
