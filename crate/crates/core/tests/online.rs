mod common;

use common::grid_instance;
use facloc_core::incremental::{run_incremental, IncrementalConfig, IncrementalState};
use facloc_core::io::parse;
use facloc_core::local_search::find_any_efficient_op;
use facloc_core::model::ALPHA_FL;
use facloc_core::online::{epsilon_prime, run_online, OnlineState};
use facloc_core::oracle::brute_force_opt;
use facloc_core::ModelError;
use proptest::prelude::*;

const INST_A: &str = r#"{"type":"header","facilities":[{"id":0,"cost":4.0},{"id":1,"cost":4.0}],"fdist":[[0,10],[10,0]]}
{"type":"arrive","client":"c1","dist":[0,10]}
{"type":"arrive","client":"c2","dist":[1,9]}
{"type":"arrive","client":"c3","dist":[9,1]}
{"type":"arrive","client":"c4","dist":[10,0]}
"#;

fn arb_stream() -> impl Strategy<Value = (Vec<((u64, u64), u32)>, Vec<(u64, u64)>)> {
    (
        proptest::collection::vec(((0u64..=60, 0u64..=60), 1u32..40), 1..=6),
        proptest::collection::vec((0u64..=60, 0u64..=60), 1..=14),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn online_steps_respect_invariants((fac, cli) in arb_stream(), eps in prop_oneof![Just(0.3), Just(1.0)]) {
        let full = grid_instance(&fac, &cli);
        let skeleton = grid_instance(&fac, &[]);
        let mut st = OnlineState::new(skeleton, eps);
        for j in 0..full.num_clients() {
            let dist = full.client(j).dist.clone();
            let bound = (0..full.num_facilities()).map(|i| full.facility_cost(i) + dist[i] as f64).fold(f64::INFINITY, f64::min);
            let step = st.arrive(&format!("c{j}"), dist).unwrap();
            prop_assert!(step.delta <= bound + 1e-9);
            let l = step.ledger;
            prop_assert!(l.facility_changes <= l.client_reconnections + l.empty_closes + l.swaps);
            if !step.stage_ended {
                prop_assert!(find_any_efficient_op(st.instance(), st.solution(), st.phi()).is_none());
            }
            let opt = brute_force_opt(&full, &(0..=j).collect::<Vec<_>>()).cost;
            prop_assert!(step.cost.grand_total <= (ALPHA_FL + eps) * opt + 1e-6,
                "t={} grand total {} vs opt {}", step.t, step.cost.grand_total, opt);
            prop_assert!(step.physical_total <= step.cost.grand_total + 1e-9);
        }
    }

    #[test]
    fn incremental_steps_respect_invariants((fac, cli) in arb_stream(), seed in any::<u64>()) {
        let full = grid_instance(&fac, &cli);
        let skeleton = grid_instance(&fac, &[]);
        let eps = 0.3;
        let eps_p = epsilon_prime(eps);
        let mut st = IncrementalState::new(skeleton, eps, 1e4, 3.0, seed);
        let mut calls = st.fl_iterate_calls();
        for j in 0..full.num_clients() {
            let step = st.arrive(&format!("c{j}"), full.client(j).dist.clone()).unwrap();
            prop_assert!(step.delta <= step.connect_bound + 1e-9);
            if !step.stage_ended {
                prop_assert!(step.cost.total <= (1.0 + eps_p) * step.last + 1e-9);
            }
            prop_assert!(step.fl_iterate_calls >= calls);
            calls = step.fl_iterate_calls;
        }
    }
}

#[test]
fn online_line_stream() {
    let (inst, stream) = parse(INST_A.as_bytes()).unwrap();
    let run = run_online(&inst, &stream, 0.3).unwrap();
    let last = run.steps.last().unwrap();
    assert_eq!(last.cost.total, 10.0);
    let opt = brute_force_opt(run.state.instance(), &[0, 1, 2, 3]).cost;
    assert_eq!(last.cost.grand_total / opt, 1.0);
}

#[test]
fn incremental_line_stream() {
    let (inst, stream) = parse(INST_A.as_bytes()).unwrap();
    let cfg = IncrementalConfig { gamma: Some(64.0), ..IncrementalConfig::new(0.3, 1) };
    let run = run_incremental(&inst, &stream, &cfg).unwrap();
    let eps_p = epsilon_prime(0.3);
    for (k, s) in run.steps.iter().enumerate() {
        let opt = brute_force_opt(run.state.instance(), &(0..=k).collect::<Vec<_>>()).cost;
        assert!(s.cost.grand_total <= (1.0 + eps_p) * (ALPHA_FL + eps_p) * opt + 1e-6);
    }
}

#[test]
fn departures_are_rejected() {
    let text = format!("{INST_A}{{\"type\":\"depart\",\"client\":\"c1\"}}\n");
    let (inst, stream) = parse(text.as_bytes()).unwrap();
    assert!(matches!(run_online(&inst, &stream, 0.3), Err(ModelError::UnsupportedDeparture(_))));
    let cfg = IncrementalConfig::new(0.3, 1);
    assert!(matches!(run_incremental(&inst, &stream, &cfg), Err(ModelError::UnsupportedDeparture(_))));
}

#[test]
fn small_epsilon_freezes_stages_and_stays_within_ratio() {
    let fac = [((0, 0), 30), ((50, 0), 30), ((0, 50), 30), ((50, 50), 30)];
    let cli: Vec<_> = (0..40u64).map(|k| ((k * 7) % 51, (k * 13) % 51)).collect();
    let full = grid_instance(&fac, &cli);
    let mut st = OnlineState::new(grid_instance(&fac, &[]), 0.3);
    for j in 0..full.num_clients() {
        let s = st.arrive(&format!("c{j}"), full.client(j).dist.clone()).unwrap();
        let opt = brute_force_opt(&full, &(0..=j).collect::<Vec<_>>()).cost;
        assert!(s.cost.grand_total <= (ALPHA_FL + 0.3) * opt + 1e-6);
    }
    assert!(st.ledger().stages >= 2);
}
