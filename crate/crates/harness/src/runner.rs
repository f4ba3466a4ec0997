//! Oracle-verified runs of the three algorithms, producing ledgers.

use std::collections::HashMap;
use std::time::Instant;

use facloc_core::frt::{sample_hst, snap_clients};
use facloc_core::hst::Hst;
use facloc_core::hst_dynamic::{brute_force_nearest, HstState};
use facloc_core::incremental::{IncrementalConfig, IncrementalState};
use facloc_core::io::{Event, EventStream, Location};
use facloc_core::model::ALPHA_FL;
use facloc_core::online::{epsilon_prime, OnlineState};
use facloc_core::oracle::{brute_force_opt, MAX_ORACLE_FACILITIES};
use facloc_core::{nearest_facility, Instance, ModelError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ledger::{HstRecord, IncrementalRecord, LedgerLine, OnlineRecord, RunMeta};

const RATIO_TOL: f64 = 1e-6;

/// Oracle cadence: steps `t` with `t % every == 0` plus the final step.
/// Zero disables the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verify {
    pub every: usize,
}

impl Default for Verify {
    fn default() -> Self {
        Verify { every: 10 }
    }
}

impl Verify {
    fn due(&self, t: usize, last: usize, instance: &Instance) -> bool {
        self.every > 0
            && instance.num_facilities() <= MAX_ORACLE_FACILITIES
            && (t.is_multiple_of(self.every) || t == last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub events: usize,
    pub verified: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    pub final_cost: f64,
    pub reconnections: usize,
    /// Reconnections per event.
    pub amortized_recourse: f64,
    pub ms_per_event: f64,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub lines: Vec<LedgerLine>,
    pub violations: Vec<String>,
    pub summary: Summary,
}

fn ratio(total: f64, opt: f64) -> Option<f64> {
    if opt > 0.0 {
        Some(total / opt)
    } else if total <= RATIO_TOL {
        Some(1.0)
    } else {
        None
    }
}

fn arrival_distances(instance: &Instance, e: &Event) -> Result<(String, Vec<u64>), ModelError> {
    match e {
        Event::Arrive { client, location } => Ok((client.clone(), EventStream::distances(instance, location)?)),
        Event::Depart { client } => Err(ModelError::UnsupportedDeparture(client.clone())),
    }
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Online local search with recourse, checked against
/// `(1+√2+ε)·opt` at verified steps.
pub fn run_online_verified(
    instance: &Instance,
    stream: &EventStream,
    epsilon: f64,
    verify: Verify,
) -> Result<RunReport, ModelError> {
    let meta = RunMeta { algorithm: "online".into(), epsilon: Some(epsilon), gamma: None, seed: 0, input: None };
    let mut state = OnlineState::new(instance.clone(), epsilon);
    let mut lines = vec![LedgerLine::Meta(meta)];
    let mut violations = Vec::new();
    let mut verified = 0;
    let mut max_ratio = None;
    let mut final_cost = 0.0;
    let total = stream.len();
    let started = Instant::now();
    for e in stream.events() {
        let (name, dist) = arrival_distances(instance, e)?;
        let bound = (0..instance.num_facilities())
            .map(|i| instance.facility_cost(i) + dist[i] as f64)
            .fold(f64::INFINITY, f64::min);
        let clock = Instant::now();
        let step = state.arrive(&name, dist)?;
        let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
        if step.delta > bound + RATIO_TOL {
            violations.push(format!("t={}: cost increase {} above {}", step.t, step.delta, bound));
        }
        let l = step.ledger;
        if l.facility_changes > l.client_reconnections + l.empty_closes + l.swaps {
            violations.push(format!("t={}: facility recourse exceeds client recourse", step.t));
        }
        let (mut opt, mut r) = (None, None);
        if verify.due(step.t, total, instance) {
            let o = brute_force_opt(state.instance(), &(0..step.t).collect::<Vec<_>>()).cost;
            verified += 1;
            opt = Some(o);
            r = ratio(step.cost.grand_total, o);
            if step.cost.grand_total > (ALPHA_FL + epsilon) * o + RATIO_TOL {
                violations.push(format!("t={}: grand total {} vs opt {}", step.t, step.cost.grand_total, o));
            }
            max_ratio = max_opt(max_ratio, r);
        }
        final_cost = step.cost.grand_total;
        lines.push(LedgerLine::Online(OnlineRecord {
            t: step.t,
            cost: step.cost.total,
            frozen_cost: step.cost.frozen_cost,
            grand_total: step.cost.grand_total,
            physical_total: step.physical_total,
            opt,
            ratio: r,
            delta_t: step.delta,
            client_recourse_cum: l.client_reconnections,
            facility_recourse_cum: l.facility_changes,
            stage: l.stages,
            wall_ms,
        }));
    }
    let reconnections = state.ledger().client_reconnections;
    let summary = Summary {
        algorithm: "online".into(),
        input: None,
        seed: 0,
        epsilon: Some(epsilon),
        events: total,
        verified,
        max_ratio,
        final_cost,
        reconnections,
        amortized_recourse: per_event(reconnections as f64, total),
        ms_per_event: per_event(started.elapsed().as_secs_f64() * 1e3, total),
        violations: violations.len(),
    };
    Ok(RunReport { lines, violations, summary })
}

fn per_event(x: f64, events: usize) -> f64 {
    if events == 0 {
        0.0
    } else {
        x / events as f64
    }
}

/// Incremental algorithm, checked against `(1+ε′)(1+√2+ε′)·opt` at verified
/// steps and against the per-arrival cost-increase bound at every step.
pub fn run_incremental_verified(
    instance: &Instance,
    stream: &EventStream,
    config: &IncrementalConfig,
    verify: Verify,
) -> Result<RunReport, ModelError> {
    let gamma = config.gamma.unwrap_or_else(|| (stream.n(instance) as f64).powi(3));
    let meta = RunMeta {
        algorithm: "incremental".into(),
        epsilon: Some(config.epsilon),
        gamma: Some(gamma),
        seed: config.seed,
        input: None,
    };
    let eps_p = epsilon_prime(config.epsilon);
    let mut state = IncrementalState::new(instance.clone(), config.epsilon, gamma, config.multiplier, config.seed);
    let mut lines = vec![LedgerLine::Meta(meta)];
    let mut violations = Vec::new();
    let mut verified = 0;
    let mut max_ratio = None;
    let mut final_cost = 0.0;
    let total = stream.len();
    let started = Instant::now();
    for e in stream.events() {
        let (name, dist) = arrival_distances(instance, e)?;
        let clock = Instant::now();
        let step = state.arrive(&name, dist)?;
        let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
        if step.delta > step.connect_bound + 1e-9 {
            violations.push(format!("t={}: delta {} above {}", step.t, step.delta, step.connect_bound));
        }
        let (mut opt, mut r) = (None, None);
        if verify.due(step.t, total, instance) {
            let o = brute_force_opt(state.instance(), &(0..step.t).collect::<Vec<_>>()).cost;
            verified += 1;
            opt = Some(o);
            r = ratio(step.cost.grand_total, o);
            if step.cost.grand_total > (1.0 + eps_p) * (ALPHA_FL + eps_p) * o + RATIO_TOL {
                violations.push(format!("t={}: grand total {} vs opt {}", step.t, step.cost.grand_total, o));
            }
            max_ratio = max_opt(max_ratio, r);
        }
        final_cost = step.cost.grand_total;
        lines.push(LedgerLine::Incremental(IncrementalRecord {
            t: step.t,
            cost: step.cost.total,
            frozen_cost: step.cost.frozen_cost,
            grand_total: step.cost.grand_total,
            opt,
            ratio: r,
            delta_t: step.delta,
            connect_bound: step.connect_bound,
            last: step.last,
            fl_iterate_calls: step.fl_iterate_calls,
            sampled_iterations: step.sampled_iterations,
            wall_ms,
        }));
    }
    let reconnections = state.search().recourse().clients;
    let summary = Summary {
        algorithm: "incremental".into(),
        input: None,
        seed: config.seed,
        epsilon: Some(config.epsilon),
        events: total,
        verified,
        max_ratio,
        final_cost,
        reconnections,
        amortized_recourse: per_event(reconnections as f64, total),
        ms_per_event: per_event(started.elapsed().as_secs_f64() * 1e3, total),
        violations: violations.len(),
    };
    Ok(RunReport { lines, violations, summary })
}

/// Fully dynamic tree algorithm. Arrivals name a facility (or carry
/// distances, in which case the client snaps to its nearest facility).
/// With `metric` given, connection costs are also priced in that metric.
///
/// Verified events check the maintained state against recomputation, the
/// `12·ΣLB` certificate and brute-force nearest assignment.
pub fn run_hst_verified(
    hst: &Hst,
    events: &[Event],
    metric: Option<&Instance>,
    verify: Verify,
) -> Result<RunReport, ModelError> {
    let meta = RunMeta { algorithm: "hst".into(), epsilon: None, gamma: None, seed: 0, input: None };
    let mut state = HstState::new(hst.clone());
    let mut live: HashMap<String, (facloc_core::hst_dynamic::ClientHandle, usize)> = HashMap::new();
    let mut lines = vec![LedgerLine::Meta(meta)];
    let mut violations = Vec::new();
    let mut verified = 0;
    let mut max_ratio: Option<f64> = None;
    let started = Instant::now();
    for (k, e) in events.iter().enumerate() {
        let clock = Instant::now();
        let kind = match e {
            Event::Arrive { client, location } => {
                let at = match location {
                    Location::At(i) if *i < hst.num_facilities() => *i,
                    Location::At(i) => return Err(ModelError::UnknownFacility(*i)),
                    Location::Distances(d) => nearest_facility(d, 0..hst.num_facilities())?.0,
                };
                if live.contains_key(client) {
                    return Err(ModelError::DuplicateClient(client.clone()));
                }
                let r = state.insert_client(hst.leaf_of(at)).map_err(|_| ModelError::UnknownFacility(at))?;
                live.insert(client.clone(), (r.client, at));
                "arrive"
            }
            Event::Depart { client } => {
                let (h, _) = live.remove(client).ok_or_else(|| ModelError::UnknownClient(client.clone()))?;
                state.delete_client(h).map_err(|_| ModelError::UnknownClient(client.clone()))?;
                "depart"
            }
        };
        let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
        let c = state.cost();
        let cert = state.lb_certificate();
        if verify.every > 0 && ((k + 1) % verify.every == 0 || k + 1 == events.len()) {
            verified += 1;
            if let Err(m) = state.check_consistency() {
                violations.push(format!("event {k}: {m}"));
            }
            let open = state.status().open;
            for (h, leaf, fac) in state.clients() {
                if brute_force_nearest(hst, &open, leaf) != Some(fac) {
                    violations.push(format!("event {k}: client {h} not at nearest open vertex"));
                }
            }
            if c.vertex_total() > 12.0 * cert + RATIO_TOL {
                violations.push(format!("event {k}: cost {} above 12 x certificate {cert}", c.vertex_total()));
            }
            max_ratio = max_opt(max_ratio, ratio(c.vertex_total(), cert));
        }
        let metric_cost = metric.map(|inst| {
            let conn: u64 = live
                .values()
                .map(|(h, at)| {
                    let v = state.client_facility(*h).expect("live client is served");
                    let i = hst.facility(hst.cheapest_leaf(v)).expect("leaf carries a facility");
                    inst.facility_distance(*at, i)
                })
                .sum();
            c.facility_cost + conn as f64
        });
        lines.push(LedgerLine::Hst(HstRecord {
            event: k,
            kind: kind.into(),
            reconnections_cum: state.total_reconnections(),
            cost: c.vertex_total(),
            leaf_cost: c.leaf_total(),
            lb_certificate: cert,
            marked_count: state.marked_count(),
            open_count: state.open_count(),
            metric_cost,
            wall_ms,
        }));
    }
    let reconnections = state.total_reconnections();
    let summary = Summary {
        algorithm: "hst".into(),
        input: None,
        seed: 0,
        epsilon: None,
        events: events.len(),
        verified,
        max_ratio,
        final_cost: state.cost().vertex_total(),
        reconnections,
        amortized_recourse: per_event(reconnections as f64, events.len()),
        ms_per_event: per_event(started.elapsed().as_secs_f64() * 1e3, events.len()),
        violations: violations.len(),
    };
    Ok(RunReport { lines, violations, summary })
}

/// Samples one tree over the facility metric (before reading any event) and
/// runs the tree algorithm on the snapped stream.
pub fn run_general_verified(
    instance: &Instance,
    stream: &EventStream,
    seed: u64,
    verify: Verify,
) -> Result<RunReport, ModelError> {
    let sample = sample_hst(instance, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut report = run_hst_verified(&sample.hst, stream.events(), Some(instance), verify)?;
    report.summary.seed = seed;
    if let Some(LedgerLine::Meta(m)) = report.lines.first_mut() {
        m.seed = seed;
    }
    Ok(report)
}

/// Optimal cost of the snapped instance evaluated on the original clients.
pub fn snapped_opt_on_original(instance: &Instance) -> f64 {
    let clients: Vec<_> = (0..instance.num_clients()).collect();
    let (snapped, _) = snap_clients(instance);
    let sopt = brute_force_opt(&snapped, &clients);
    if clients.is_empty() {
        return 0.0;
    }
    let f: f64 = sopt.open.iter().map(|&i| instance.facility_cost(i)).sum();
    let cc: u64 = clients.iter().map(|&j| sopt.open.iter().map(|&i| instance.dist(j, i)).min().unwrap_or(0)).sum();
    f + cc as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{line, random_tree_stream, TreeParams};
    use facloc_core::io::load_instance;

    fn inst_a() -> (Instance, EventStream) {
        let (h, e) = line(&[0, 10], &[4.0, 4.0], &[0, 1, 9, 10]).unwrap();
        load_instance(h, e).unwrap()
    }

    #[test]
    fn online_on_line_reaches_ratio_one() {
        let (inst, stream) = inst_a();
        let r = run_online_verified(&inst, &stream, 0.3, Verify::default()).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.summary.verified, 1);
        assert_eq!(r.summary.max_ratio, Some(1.0));
        assert_eq!(r.lines.len(), 5);
    }

    #[test]
    fn incremental_on_line_is_clean() {
        let (inst, stream) = inst_a();
        let cfg = IncrementalConfig { gamma: Some(64.0), ..IncrementalConfig::new(0.3, 4) };
        let r = run_incremental_verified(&inst, &stream, &cfg, Verify { every: 1 }).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!(r.summary.verified, 4);
    }

    #[test]
    fn hst_stream_is_clean() {
        let p = TreeParams { leaves: 10, depth: 4, max_cost: 50, events: 300, depart_prob: 0.3 };
        let (tree, _, events) = random_tree_stream(&p, 9).unwrap();
        let hst = Hst::from_file(&tree).unwrap();
        let r = run_hst_verified(&hst, &events, None, Verify { every: 1 }).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!(r.summary.verified, 300);
    }

    #[test]
    fn snapping_never_beats_the_optimum() {
        let (mut inst, stream) = inst_a();
        for e in stream.events() {
            let (n, d) = arrival_distances(&inst, e).unwrap();
            inst.add_client(n, d).unwrap();
        }
        assert_eq!(snapped_opt_on_original(&inst), 10.0);
    }
}
