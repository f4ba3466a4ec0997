//! Randomized local search with per-client heaps of the open facilities other
//! than the one serving the client. Every client is kept on its nearest open
//! facility, so the heap top is its second-nearest.

use rand::Rng;

use crate::error::SearchError;
use crate::heaps::IndexedMinHeap;
use crate::local_search::Recourse;
use crate::model::{ClientId, FacilityId, Instance, Solution, COST_TOL, LAMBDA};

/// An operation applied by [`HeapSearch::sampled_local_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Open(FacilityId),
    Close(FacilityId),
    Swap { open: FacilityId, close: FacilityId },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlIterateStats {
    pub iterations: usize,
    pub applied: usize,
    /// Original cost of the installed solution.
    pub cost: f64,
}

/// Iteration budget `⌈mult · (|F|/ε′) · ln max(Γ, 2)⌉`.
pub fn iteration_budget(num_facilities: usize, eps_prime: f64, gamma: f64, multiplier: f64) -> usize {
    (multiplier * (num_facilities as f64 / eps_prime) * gamma.max(2.0).ln()).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct HeapSearch {
    solution: Solution,
    heaps: Vec<IndexedMinHeap>,
    recourse: Recourse,
}

fn key(instance: &Instance, j: ClientId, i: FacilityId) -> (u64, FacilityId) {
    (instance.dist(j, i), i)
}

impl HeapSearch {
    /// Takes over `solution`, moving every active client to its nearest open
    /// facility.
    pub fn new(instance: &Instance, solution: Solution) -> Self {
        let mut s = Self { solution, heaps: Vec::new(), recourse: Recourse::default() };
        s.rebuild(instance);
        s
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    pub fn into_solution(self) -> Solution {
        self.solution
    }

    /// Reconnections and facility changes performed so far.
    pub fn recourse(&self) -> Recourse {
        self.recourse
    }

    pub fn cost(&self, instance: &Instance) -> f64 {
        self.solution.total_cost(instance)
    }

    pub fn scaled_cost(&self, instance: &Instance) -> f64 {
        self.solution.scaled_total(instance)
    }

    /// Recomputes nearest assignments and all heaps from scratch.
    pub fn rebuild(&mut self, instance: &Instance) {
        let nf = instance.num_facilities();
        let open: Vec<_> = self.solution.open_facilities().collect();
        let active: Vec<_> = self.solution.active_clients().collect();
        for h in &mut self.heaps {
            h.clear();
        }
        for j in active {
            let best = open.iter().map(|&i| key(instance, j, i)).min().expect("active clients need an open facility");
            self.solution.assign(j, best.1);
            let h = self.heap_mut(j, nf);
            for &i in &open {
                if i != best.1 {
                    h.insert(instance.dist(j, i), i);
                }
            }
        }
    }

    fn heap_mut(&mut self, j: ClientId, nf: usize) -> &mut IndexedMinHeap {
        if j >= self.heaps.len() {
            self.heaps.resize_with(j + 1, || IndexedMinHeap::new(nf));
        }
        &mut self.heaps[j]
    }

    /// Second-nearest open facility of `j`.
    pub fn heap_top(&self, j: ClientId) -> Result<(FacilityId, u64), SearchError> {
        self.heaps.get(j).and_then(IndexedMinHeap::peek).map(|(d, i)| (i, d)).ok_or(SearchError::TooFewOpen)
    }

    /// Facilities in `j`'s heap, ascending.
    pub fn heap_members(&self, j: ClientId) -> Vec<FacilityId> {
        let mut v: Vec<_> = self.heaps.get(j).map(|h| h.ids().collect()).unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// Adds an arrived client on its nearest open facility.
    ///
    /// # Panics
    /// If no facility is open.
    pub fn add_client(&mut self, instance: &Instance, j: ClientId) {
        let nf = instance.num_facilities();
        let open: Vec<_> = self.solution.open_facilities().collect();
        let best = open.iter().map(|&i| key(instance, j, i)).min().expect("no open facility");
        self.solution.assign(j, best.1);
        let h = self.heap_mut(j, nf);
        h.clear();
        for &i in &open {
            if i != best.1 {
                h.insert(instance.dist(j, i), i);
            }
        }
    }

    /// Freezes a stage snapshot and drops the frozen clients' heaps.
    pub fn freeze(&mut self, instance: &Instance, open: &[FacilityId], connections: &[(ClientId, FacilityId)]) {
        self.solution.freeze(instance, open, connections);
        for &(j, _) in connections {
            if let Some(h) = self.heaps.get_mut(j) {
                h.clear();
            }
        }
    }

    /// Opens `i` and moves every client that is now nearer to it.
    pub fn open_facility(&mut self, instance: &Instance, i: FacilityId) {
        if self.solution.is_open(i) {
            return;
        }
        self.solution.open(i);
        self.recourse.facilities += 1;
        let nf = instance.num_facilities();
        let active: Vec<_> = self.solution.assignments().collect();
        for (j, s) in active {
            if key(instance, j, i) < key(instance, j, s) {
                self.solution.assign(j, i);
                self.heap_mut(j, nf).insert(instance.dist(j, s), s);
                self.recourse.clients += 1;
            } else {
                self.heap_mut(j, nf).insert(instance.dist(j, i), i);
            }
        }
    }

    /// Closes `i`, moving its clients to their heap tops.
    pub fn close_facility(&mut self, instance: &Instance, i: FacilityId) -> Result<(), SearchError> {
        if !self.solution.is_open(i) {
            return Err(SearchError::NotOpen(i));
        }
        let active: Vec<_> = self.solution.assignments().collect();
        if active.iter().any(|&(j, s)| s == i && self.heaps[j].is_empty()) {
            return Err(SearchError::NoAlternative(i));
        }
        self.solution.close(i);
        self.recourse.facilities += 1;
        let nf = instance.num_facilities();
        for (j, s) in active {
            let h = self.heap_mut(j, nf);
            if s == i {
                let (_, t) = h.pop().expect("checked above");
                self.solution.assign(j, t);
                self.recourse.clients += 1;
            } else {
                h.remove(i);
            }
        }
        Ok(())
    }

    /// Scaled-cost change of opening `i` and moving every client that gains.
    /// Zero for facilities that are already open.
    pub fn delta_open(&self, instance: &Instance, i: FacilityId) -> f64 {
        self.delta_open_with(instance, i, LAMBDA)
    }

    fn delta_open_with(&self, instance: &Instance, i: FacilityId, facility_weight: f64) -> f64 {
        if self.solution.is_open(i) {
            return 0.0;
        }
        let gain: u64 =
            self.solution.assignments().map(|(j, s)| instance.dist(j, s).saturating_sub(instance.dist(j, i))).sum();
        facility_weight * instance.facility_cost(i) - gain as f64
    }

    /// Opens `i` if that lowers the scaled cost.
    pub fn try_open(&mut self, instance: &Instance, i: FacilityId) -> bool {
        self.try_open_weighted(instance, i, LAMBDA)
    }

    /// Opens `i` if that lowers the original (unscaled) cost.
    pub fn try_open_unscaled(&mut self, instance: &Instance, i: FacilityId) -> bool {
        self.try_open_weighted(instance, i, 1.0)
    }

    fn try_open_weighted(&mut self, instance: &Instance, i: FacilityId, w: f64) -> bool {
        if self.delta_open_with(instance, i, w) < -COST_TOL {
            self.open_facility(instance, i);
            true
        } else {
            false
        }
    }

    /// Best scaled-cost change of opening `i` while closing some open
    /// facility, with the facility to close. Ties go to the smallest id.
    pub fn delta_swap_in(&self, instance: &Instance, i: FacilityId) -> Result<(f64, FacilityId), SearchError> {
        if self.solution.is_open(i) {
            return Err(SearchError::AlreadyOpen(i));
        }
        let nf = instance.num_facilities();
        let mut psi = LAMBDA * instance.facility_cost(i);
        let mut per_close = vec![0.0f64; nf];
        for (j, s) in self.solution.assignments() {
            let (di, ds) = (instance.dist(j, i), instance.dist(j, s));
            if di < ds {
                psi -= (ds - di) as f64;
            } else {
                let alt = match self.heaps[j].peek() {
                    Some((dt, _)) => di.min(dt),
                    None => di,
                };
                per_close[s] += alt as f64 - ds as f64;
            }
        }
        self.solution
            .open_facilities()
            .map(|i2| (psi + per_close[i2] - LAMBDA * instance.facility_cost(i2), i2))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .ok_or(SearchError::NothingOpen)
    }

    /// Best scaled-cost change of closing one open facility. Facilities whose
    /// clients have nowhere else to go are not candidates.
    pub fn delta_close(&self, instance: &Instance) -> Result<(f64, FacilityId), SearchError> {
        let nf = instance.num_facilities();
        let mut per_close = vec![0.0f64; nf];
        let mut blocked = vec![false; nf];
        for (j, s) in self.solution.assignments() {
            match self.heaps[j].peek() {
                Some((dt, _)) => per_close[s] += dt as f64 - instance.dist(j, s) as f64,
                None => blocked[s] = true,
            }
        }
        self.solution
            .open_facilities()
            .filter(|&i2| !blocked[i2])
            .map(|i2| (per_close[i2] - LAMBDA * instance.facility_cost(i2), i2))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .ok_or(SearchError::NothingToClose)
    }

    /// One randomized step: with probability 1/3 the best close, otherwise a
    /// uniformly random closed facility is opened or swapped in.
    pub fn sampled_local_search<R: Rng + ?Sized>(&mut self, instance: &Instance, rng: &mut R) -> Option<Applied> {
        if rng.gen::<f64>() < 1.0 / 3.0 {
            let (d, i2) = self.delta_close(instance).ok()?;
            if d < -COST_TOL {
                self.close_facility(instance, i2).expect("candidate is closable");
                return Some(Applied::Close(i2));
            }
            return None;
        }
        let closed: Vec<_> = self.solution.closed_facilities().collect();
        if closed.is_empty() {
            return None;
        }
        let i = closed[rng.gen_range(0..closed.len())];
        let d_open = self.delta_open(instance, i);
        let (d_swap, i2) = self.delta_swap_in(instance, i).unwrap_or((f64::INFINITY, usize::MAX));
        if d_open <= d_swap && d_open < -COST_TOL {
            self.open_facility(instance, i);
            Some(Applied::Open(i))
        } else if d_swap < -COST_TOL {
            self.open_facility(instance, i);
            self.close_facility(instance, i2).expect("swap target has an alternative");
            Some(Applied::Swap { open: i, close: i2 })
        } else {
            None
        }
    }

    /// Runs `m` sampled steps and installs the cheapest solution seen, by
    /// original cost.
    pub fn fl_iterate<R: Rng + ?Sized>(&mut self, instance: &Instance, m: usize, rng: &mut R) -> FlIterateStats {
        let mut best_cost = self.cost(instance);
        let mut best = self.solution.clone();
        let mut at_best = true;
        let mut applied = 0;
        for _ in 0..m {
            if self.sampled_local_search(instance, rng).is_none() {
                continue;
            }
            applied += 1;
            let c = self.cost(instance);
            if c < best_cost - COST_TOL {
                best_cost = c;
                best.clone_from(&self.solution);
                at_best = true;
            } else {
                at_best = false;
            }
        }
        if !at_best {
            for (j, i) in best.assignments() {
                if self.solution.assignment(j) != Some(i) {
                    self.recourse.clients += 1;
                }
            }
            self.recourse.facilities +=
                (0..instance.num_facilities()).filter(|&i| best.is_open(i) != self.solution.is_open(i)).count();
            self.solution = best;
            self.rebuild(instance);
        }
        FlIterateStats { iterations: m, applied, cost: best_cost }
    }
}
