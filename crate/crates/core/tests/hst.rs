mod common;

use common::random_tree;
use facloc_core::frt::{sample_hst, snap_clients};
use facloc_core::hst::{lb_certificate, offline_mark_and_open, Hst};
use facloc_core::hst_dynamic::{brute_force_nearest, HstState};
use facloc_core::oracle::brute_force_opt;
use facloc_core::Instance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Optimum on the tree metric for the clients currently in `state`.
fn tree_opt(state: &HstState) -> f64 {
    let hst = state.hst();
    let mut inst = hst.to_instance();
    let ids: Vec<_> = state
        .clients()
        .map(|(h, leaf, _)| inst.add_client_at(h.to_string(), hst.facility(leaf).unwrap()).unwrap())
        .collect();
    brute_force_opt(&inst, &ids).cost
}

fn random_events(state: &mut HstState, rng: &mut ChaCha8Rng, events: usize, mut check: impl FnMut(&HstState)) {
    let leaves = state.hst().leaves().to_vec();
    for _ in 0..events {
        if state.num_clients() > 0 && rng.gen_bool(0.4) {
            let hs: Vec<_> = state.clients().map(|(h, _, _)| h).collect();
            state.delete_client(hs[rng.gen_range(0..hs.len())]).unwrap();
        } else {
            state.insert_client(leaves[rng.gen_range(0..leaves.len())]).unwrap();
        }
        check(state);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dynamic_state_matches_recomputation(seed in any::<u64>(), leaves in 1usize..=12, depth in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hst = random_tree(&mut rng, leaves, depth, 40);
        let mut state = HstState::new(hst);
        random_events(&mut state, &mut rng, 60, |s| {
            s.check_consistency().unwrap();
            let open = s.status().open;
            for (_, leaf, fac) in s.clients() {
                assert_eq!(Some(fac), brute_force_nearest(s.hst(), &open, leaf));
            }
            let off = offline_mark_and_open(s.hst(), &s.counts(), &s.alphas(), &s.betas());
            assert_eq!(lb_certificate(s.hst(), &s.counts(), &off.marked), s.lb_certificate());
            let c = s.cost();
            assert!(c.vertex_total() <= 12.0 * s.lb_certificate() + 1e-6);
            assert!(c.leaf_total() <= 2.0 * c.vertex_total() + 1e-9);
        });
    }

    #[test]
    fn certificate_is_a_lower_bound(seed in any::<u64>(), leaves in 1usize..=8, depth in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hst = random_tree(&mut rng, leaves, depth, 30);
        let mut state = HstState::new(hst);
        random_events(&mut state, &mut rng, 25, |s| {
            assert!(s.lb_certificate() <= tree_opt(s) + 1e-6);
        });
    }

    #[test]
    fn embeddings_dominate(seed in any::<u64>(), pts in proptest::collection::vec((0u64..40, 0u64..40), 1..=12)) {
        let fdist: Vec<Vec<u64>> = pts.iter().map(|a| pts.iter().map(|b| a.0.abs_diff(b.0) + a.1.abs_diff(b.1)).collect()).collect();
        let inst = Instance::new(vec![1.0; pts.len()], fdist.clone()).unwrap();
        let s = sample_hst(&inst, &mut ChaCha8Rng::seed_from_u64(seed));
        let t = &s.hst;
        prop_assert_eq!(t.num_facilities(), pts.len());
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                prop_assert!(t.facility_distance(a, b) >= fdist[a][b]);
            }
        }
        let back = Hst::from_file(&t.to_file()).unwrap();
        prop_assert_eq!(back.len(), t.len());
        let again = sample_hst(&inst, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&again, &s);
    }

    #[test]
    fn snapped_optimum_is_three_approximate(inst in common::arb_instance(6, 10, 50)) {
        let clients: Vec<_> = (0..inst.num_clients()).collect();
        let opt = brute_force_opt(&inst, &clients);
        let (snapped, _) = snap_clients(&inst);
        let sopt = brute_force_opt(&snapped, &clients);
        if !clients.is_empty() {
            let f: f64 = sopt.open.iter().map(|&i| inst.facility_cost(i)).sum();
            let cc: u64 = clients.iter().map(|&j| sopt.open.iter().map(|&i| inst.dist(j, i)).min().unwrap()).sum();
            prop_assert!(f + cc as f64 <= 3.0 * opt.cost + 1e-6);
        }
    }
}

#[test]
fn ten_thousand_events_on_a_deep_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hst = random_tree(&mut rng, 32, 6, 200);
    let mut state = HstState::new(hst);
    random_events(&mut state, &mut rng, 10_000, |s| s.check_consistency().unwrap());
}
