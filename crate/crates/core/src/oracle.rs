//! Exhaustive optimum for small instances, used to check approximation ratios.

use crate::model::{ClientId, FacilityId, Instance};

/// Largest facility count [`brute_force_opt`] accepts.
pub const MAX_ORACLE_FACILITIES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OptSolution {
    pub cost: f64,
    pub open: Vec<FacilityId>,
    /// Nearest open facility for each requested client, in input order.
    pub assignment: Vec<(ClientId, FacilityId)>,
}

/// Minimum of `f(S) + Σ_j d(j, S)` over nonempty `S ⊆ F` for the given
/// clients. With no clients the optimum is the empty solution.
///
/// # Panics
/// If the instance has more than [`MAX_ORACLE_FACILITIES`] facilities.
pub fn brute_force_opt(instance: &Instance, clients: &[ClientId]) -> OptSolution {
    let nf = instance.num_facilities();
    assert!(nf <= MAX_ORACLE_FACILITIES, "oracle limited to {MAX_ORACLE_FACILITIES} facilities, got {nf}");
    if clients.is_empty() || nf == 0 {
        return OptSolution { cost: 0.0, open: Vec::new(), assignment: Vec::new() };
    }
    // Per-client facility order by (distance, id): the first open facility in
    // that order is the nearest one under the tie rule.
    let orders: Vec<Vec<FacilityId>> = clients
        .iter()
        .map(|&j| {
            let mut o: Vec<_> = (0..nf).collect();
            o.sort_by_key(|&i| (instance.dist(j, i), i));
            o
        })
        .collect();
    let mut best_cost = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 1u32..(1 << nf) {
        let mut c: f64 = (0..nf).filter(|&i| mask >> i & 1 == 1).map(|i| instance.facility_cost(i)).sum();
        if c >= best_cost {
            continue;
        }
        for (k, &j) in clients.iter().enumerate() {
            let i = *orders[k].iter().find(|&&i| mask >> i & 1 == 1).expect("mask is nonempty");
            c += instance.dist(j, i) as f64;
            if c >= best_cost {
                break;
            }
        }
        if c < best_cost {
            best_cost = c;
            best_mask = mask;
        }
    }
    let open: Vec<_> = (0..nf).filter(|&i| best_mask >> i & 1 == 1).collect();
    let assignment = clients
        .iter()
        .enumerate()
        .map(|(k, &j)| (j, *orders[k].iter().find(|&&i| best_mask >> i & 1 == 1).unwrap()))
        .collect();
    OptSolution { cost: best_cost, open, assignment }
}
