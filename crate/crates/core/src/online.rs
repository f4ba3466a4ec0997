//! Online facility location with arrivals only: greedy connection of each new
//! client followed by efficient local operations, split into stages whose
//! starting solutions are frozen once the cost has grown by a factor `1/ε′`.

use crate::error::ModelError;
use crate::io::{Event, EventStream};
use crate::local_search::{converge_with, Recourse};
use crate::model::{cost, physical_grand_total, ClientId, CostReport, FacilityId, Instance, Solution, ALPHA_FL};

/// Internal accuracy parameter derived from the user-facing `ε`.
pub fn epsilon_prime(epsilon: f64) -> f64 {
    epsilon / 6.0
}

/// Connects a newly arrived client, opening the facility minimizing
/// `f_i + d(i, j)` over closed facilities when that is cheaper than the
/// nearest open one. Returns the cost increase.
pub fn initial_connect(instance: &Instance, solution: &mut Solution, j: ClientId) -> f64 {
    let best_closed = solution
        .closed_facilities()
        .map(|i| (instance.facility_cost(i) + instance.dist(j, i) as f64, i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest_open = solution.open_facilities().map(|i| (instance.dist(j, i), i)).min();
    match (best_closed, nearest_open) {
        (Some((c, i)), Some((d, _))) if c < d as f64 => {
            solution.open(i);
            solution.assign(j, i);
            c
        }
        (_, Some((d, i))) => {
            solution.assign(j, i);
            d as f64
        }
        (Some((c, i)), None) => {
            solution.open(i);
            solution.assign(j, i);
            c
        }
        (None, None) => panic!("instance has no facilities"),
    }
}

/// Cumulative recourse of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RecourseLedger {
    /// Reconnections performed by local operations.
    pub client_reconnections: usize,
    /// Facility open/close events performed by local operations.
    pub facility_changes: usize,
    /// Facilities opened when connecting an arriving client.
    pub arrival_opens: usize,
    pub empty_closes: usize,
    pub swaps: usize,
    pub operations: usize,
    pub stages: usize,
}

impl RecourseLedger {
    pub fn recourse(&self) -> Recourse {
        Recourse { clients: self.client_reconnections, facilities: self.facility_changes }
    }
}

/// Stage bookkeeping: the starting cost and the snapshot frozen when the
/// stage ends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageState {
    pub init: f64,
    pub start_open: Vec<FacilityId>,
    pub start_connections: Vec<(ClientId, FacilityId)>,
    /// Arrivals handled in this stage.
    pub t: usize,
}

impl StageState {
    fn capture(instance: &Instance, solution: &Solution) -> Self {
        Self {
            init: solution.total_cost(instance),
            start_open: solution.open_facilities().collect(),
            start_connections: solution.assignments().collect(),
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    /// Global arrival index, starting at 1.
    pub t: usize,
    pub client: ClientId,
    /// Cost increase caused by connecting the arrival.
    pub delta: f64,
    pub cost: CostReport,
    /// Grand total with each physical facility paid once.
    pub physical_total: f64,
    pub ledger: RecourseLedger,
    pub stage_ended: bool,
}

/// Incremental driver; feed it arrivals one at a time.
#[derive(Debug, Clone)]
pub struct OnlineState {
    instance: Instance,
    solution: Solution,
    eps_prime: f64,
    stage: StageState,
    ledger: RecourseLedger,
    t: usize,
}

impl OnlineState {
    /// `instance` provides the facilities; clients already registered in it
    /// are ignored.
    pub fn new(instance: Instance, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        let solution = Solution::new(instance.num_facilities());
        let stage = StageState::capture(&instance, &solution);
        Self {
            instance,
            solution,
            eps_prime: epsilon_prime(epsilon),
            stage,
            ledger: RecourseLedger { stages: 1, ..Default::default() },
            t: 0,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    pub fn ledger(&self) -> &RecourseLedger {
        &self.ledger
    }

    pub fn stage(&self) -> &StageState {
        &self.stage
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.eps_prime
    }

    /// Threshold φ for the current solution.
    pub fn phi(&self) -> f64 {
        phi_for(self.eps_prime, &self.instance, &self.solution)
    }

    pub fn arrive(&mut self, name: &str, dist: Vec<u64>) -> Result<OnlineStep, ModelError> {
        let j = self.instance.add_client(name, dist)?;
        self.t += 1;
        self.stage.t += 1;
        let was_open = self.solution.open_count();
        let delta = initial_connect(&self.instance, &mut self.solution, j);
        self.ledger.arrival_opens += self.solution.open_count() - was_open;

        let eps = self.eps_prime;
        let stats = converge_with(&self.instance, &mut self.solution, |inst, sol| phi_for(eps, inst, sol));
        self.ledger.client_reconnections += stats.recourse.clients;
        self.ledger.facility_changes += stats.recourse.facilities;
        self.ledger.empty_closes += stats.empty_closes;
        self.ledger.swaps += stats.swaps;
        self.ledger.operations += stats.operations;

        let stage_ended = self.solution.total_cost(&self.instance) > self.stage.init / self.eps_prime;
        if stage_ended {
            self.solution.freeze(&self.instance, &self.stage.start_open, &self.stage.start_connections);
            self.stage = StageState::capture(&self.instance, &self.solution);
            self.ledger.stages += 1;
        }
        Ok(OnlineStep {
            t: self.t,
            client: j,
            delta,
            cost: cost(&self.solution, &self.instance).expect("algorithm keeps assignments open"),
            physical_total: physical_grand_total(&self.solution, &self.instance),
            ledger: self.ledger,
            stage_ended,
        })
    }
}

fn phi_for(eps_prime: f64, instance: &Instance, solution: &Solution) -> f64 {
    let c = solution.num_active();
    if c == 0 {
        0.0
    } else {
        eps_prime * solution.total_cost(instance) / (ALPHA_FL * c as f64)
    }
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub steps: Vec<OnlineStep>,
    pub state: OnlineState,
}

/// Runs the whole stream. Departures are not supported in this regime.
pub fn run_online(instance: &Instance, stream: &EventStream, epsilon: f64) -> Result<OnlineRun, ModelError> {
    let mut state = OnlineState::new(instance.clone(), epsilon);
    let mut steps = Vec::with_capacity(stream.len());
    for e in stream.events() {
        match e {
            Event::Arrive { client, location } => {
                let d = EventStream::distances(instance, location)?;
                steps.push(state.arrive(client, d)?);
            }
            Event::Depart { client } => return Err(ModelError::UnsupportedDeparture(client.clone())),
        }
    }
    Ok(OnlineRun { steps, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::inst_a;

    #[test]
    fn initial_connect_branches() {
        let inst = inst_a();
        let mut sol = Solution::new(2);
        assert_eq!(initial_connect(&inst, &mut sol, 0), 4.0);
        assert!(sol.is_open(0));
        assert_eq!(initial_connect(&inst, &mut sol, 1), 1.0);
        assert_eq!(sol.assignment(1), Some(0));
        assert_eq!(initial_connect(&inst, &mut sol, 3), 4.0);
        assert_eq!(sol.assignment(3), Some(1));
    }

    fn skeleton() -> Instance {
        Instance::new(vec![4.0, 4.0], vec![vec![0, 10], vec![10, 0]]).unwrap()
    }

    #[test]
    fn single_client_stage() {
        let mut st = OnlineState::new(skeleton(), 0.3);
        let step = st.arrive("c", vec![3, 8]).unwrap();
        assert_eq!(step.cost.total, 7.0);
        assert_eq!(step.ledger.operations, 0);
    }

    #[test]
    fn full_line_stream_reaches_optimum() {
        let mut st = OnlineState::new(skeleton(), 0.3);
        for (k, p) in [0u64, 1, 9, 10].into_iter().enumerate() {
            st.arrive(&format!("c{k}"), vec![p, 10 - p]).unwrap();
        }
        assert_eq!(st.solution().open_facilities().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(cost(st.solution(), st.instance()).unwrap().total, 10.0);
        // The empty opening stage ends at the first arrival.
        assert_eq!(st.ledger().stages, 2);
    }

    #[test]
    fn zero_cost_stage_ends_at_first_positive_cost() {
        let mut st = OnlineState::new(skeleton(), 0.3);
        let s = st.arrive("a", vec![0, 10]).unwrap();
        assert!(s.stage_ended);
        assert_eq!(s.cost.frozen_cost, 0.0);
        assert_eq!(st.stage().init, 4.0);
    }
}
