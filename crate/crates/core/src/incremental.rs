//! Incremental facility location: cheap greedy opens on every arrival and a
//! full randomized search only once the cost has grown by a factor `1 + ε′`.
//! Stages and freezing work as in the online algorithm.

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::io::{Event, EventStream};
use crate::model::{cost, physical_grand_total, ClientId, CostReport, FacilityId, Instance, Solution};
use crate::online::epsilon_prime;
use crate::randomized::{iteration_budget, HeapSearch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementalConfig {
    pub epsilon: f64,
    /// Confidence parameter; `None` means `n³` for the stream being run.
    pub gamma: Option<f64>,
    /// Multiplier in the iteration budget of each randomized search.
    pub multiplier: f64,
    pub seed: u64,
}

impl IncrementalConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self { epsilon, gamma: None, multiplier: 3.0, seed }
    }
}

/// Exponents `q` for the cost thresholds `2^q` tried on each arrival.
pub fn q_range(last: f64, num_facilities: usize, eps_prime: f64) -> RangeInclusive<i32> {
    let lo = (last / num_facilities as f64).log2().ceil() as i32;
    let hi = (last / eps_prime).log2().ceil() as i32;
    lo..=hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalStep {
    pub t: usize,
    pub client: ClientId,
    /// Cost increase of connecting the arrival, after the threshold opens.
    pub delta: f64,
    /// `min_i (f_i + d(i, j))` for the arrival.
    pub connect_bound: f64,
    pub cost: CostReport,
    pub physical_total: f64,
    /// Watermark after this step.
    pub last: f64,
    pub fl_iterate_calls: usize,
    pub sampled_iterations: usize,
    pub stage_ended: bool,
}

#[derive(Debug, Clone)]
pub struct IncrementalState {
    instance: Instance,
    search: HeapSearch,
    rng: ChaCha8Rng,
    eps_prime: f64,
    budget: usize,
    init: f64,
    last: f64,
    start_open: Vec<FacilityId>,
    start_connections: Vec<(ClientId, FacilityId)>,
    t: usize,
    stages: usize,
    fl_iterate_calls: usize,
    sampled_iterations: usize,
}

impl IncrementalState {
    pub fn new(instance: Instance, epsilon: f64, gamma: f64, multiplier: f64, seed: u64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        let eps_prime = epsilon_prime(epsilon);
        let budget = iteration_budget(instance.num_facilities(), eps_prime, gamma, multiplier);
        let search = HeapSearch::new(&instance, Solution::new(instance.num_facilities()));
        let mut s = Self {
            instance,
            search,
            rng: ChaCha8Rng::seed_from_u64(seed),
            eps_prime,
            budget,
            init: 0.0,
            last: 0.0,
            start_open: Vec::new(),
            start_connections: Vec::new(),
            t: 0,
            stages: 0,
            fl_iterate_calls: 0,
            sampled_iterations: 0,
        };
        s.begin_stage();
        s
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn solution(&self) -> &Solution {
        self.search.solution()
    }

    pub fn search(&self) -> &HeapSearch {
        &self.search
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn last(&self) -> f64 {
        self.last
    }

    pub fn init(&self) -> f64 {
        self.init
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn fl_iterate_calls(&self) -> usize {
        self.fl_iterate_calls
    }

    fn fl_iterate(&mut self) {
        self.search.fl_iterate(&self.instance, self.budget, &mut self.rng);
        self.fl_iterate_calls += 1;
        self.sampled_iterations += self.budget;
    }

    fn begin_stage(&mut self) {
        let sol = self.search.solution();
        self.start_open = sol.open_facilities().collect();
        self.start_connections = sol.assignments().collect();
        self.fl_iterate();
        self.init = self.search.cost(&self.instance);
        self.last = self.init;
        self.stages += 1;
    }

    pub fn arrive(&mut self, name: &str, dist: Vec<u64>) -> Result<IncrementalStep, ModelError> {
        let j = self.instance.add_client(name, dist)?;
        self.t += 1;
        let inst = &self.instance;
        let nf = inst.num_facilities();
        if self.last > 0.0 {
            for q in q_range(self.last, nf, self.eps_prime) {
                let cap = 2f64.powi(q);
                let pick = self
                    .search
                    .solution()
                    .closed_facilities()
                    .filter(|&i| inst.facility_cost(i) <= cap)
                    .map(|i| (inst.dist(j, i), i))
                    .min();
                if let Some((_, i)) = pick {
                    self.search.try_open_unscaled(inst, i);
                }
            }
        }

        let before = self.search.cost(inst);
        let cheapest = |sol: &Solution| {
            sol.closed_facilities()
                .map(|i| (inst.facility_cost(i) + inst.dist(j, i) as f64, i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        };
        if self.search.solution().open_count() == 0 {
            let (_, i) = cheapest(self.search.solution()).expect("instance has facilities");
            self.search.open_facility(inst, i);
        }
        self.search.add_client(inst, j);
        if let Some((_, i)) = cheapest(self.search.solution()) {
            self.search.try_open_unscaled(inst, i);
        }
        let delta = self.search.cost(inst) - before;
        let connect_bound =
            (0..nf).map(|i| inst.facility_cost(i) + inst.dist(j, i) as f64).fold(f64::INFINITY, f64::min);

        let mut stage_ended = false;
        if self.search.cost(&self.instance) > (1.0 + self.eps_prime) * self.last {
            self.fl_iterate();
            self.last = self.last.max(self.search.cost(&self.instance));
            if self.last > self.init / self.eps_prime {
                let open = std::mem::take(&mut self.start_open);
                let conns = std::mem::take(&mut self.start_connections);
                self.search.freeze(&self.instance, &open, &conns);
                stage_ended = true;
            }
        }
        let step = IncrementalStep {
            t: self.t,
            client: j,
            delta,
            connect_bound,
            cost: cost(self.search.solution(), &self.instance).expect("search keeps assignments open"),
            physical_total: physical_grand_total(self.search.solution(), &self.instance),
            last: self.last,
            fl_iterate_calls: self.fl_iterate_calls,
            sampled_iterations: self.sampled_iterations,
            stage_ended,
        };
        if stage_ended {
            self.begin_stage();
        }
        Ok(step)
    }
}

#[derive(Debug, Clone)]
pub struct IncrementalRun {
    pub steps: Vec<IncrementalStep>,
    pub state: IncrementalState,
}

pub fn run_incremental(
    instance: &Instance,
    stream: &EventStream,
    config: &IncrementalConfig,
) -> Result<IncrementalRun, ModelError> {
    let gamma = config.gamma.unwrap_or_else(|| (stream.n(instance) as f64).powi(3));
    let mut state = IncrementalState::new(instance.clone(), config.epsilon, gamma, config.multiplier, config.seed);
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
    Ok(IncrementalRun { steps, state })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_exponents() {
        assert_eq!(q_range(16.0, 4, 0.5), 2..=5);
    }

    fn skeleton() -> Instance {
        Instance::new(vec![4.0, 4.0], vec![vec![0, 10], vec![10, 0]]).unwrap()
    }

    #[test]
    fn first_arrival_pays_cheapest_connection() {
        let mut st = IncrementalState::new(skeleton(), 0.3, 64.0, 3.0, 1);
        let s = st.arrive("a", vec![3, 8]).unwrap();
        assert_eq!(s.delta, 7.0);
        assert_eq!(s.connect_bound, 7.0);
    }

    #[test]
    fn line_stream_reaches_optimum() {
        let mut st = IncrementalState::new(skeleton(), 0.3, 64.0, 3.0, 1);
        for (k, p) in [0u64, 1, 9, 10].into_iter().enumerate() {
            let s = st.arrive(&format!("c{k}"), vec![p, 10 - p]).unwrap();
            assert!(s.delta <= s.connect_bound + 1e-9);
        }
        assert_eq!(cost(st.solution(), st.instance()).unwrap().total, 10.0);
    }

    #[test]
    fn try_open_unscaled_on_line() {
        let mut inst = skeleton();
        for (k, p) in [0u64, 1, 9, 10].into_iter().enumerate() {
            inst.add_client(format!("c{k}"), vec![p, 10 - p]).unwrap();
        }
        let mut sol = Solution::new(2);
        sol.open(0);
        for j in 0..4 {
            sol.assign(j, 0);
        }
        let mut hs = HeapSearch::new(&inst, sol);
        assert!(hs.try_open_unscaled(&inst, 1));
        assert!(!hs.try_open_unscaled(&inst, 1));
        assert_eq!(hs.cost(&inst), 10.0);
    }
}
