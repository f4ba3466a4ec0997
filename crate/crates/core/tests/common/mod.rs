#![allow(dead_code)]

use facloc_core::hst::{Hst, LeafSpec};
use facloc_core::{Instance, Solution};
use proptest::prelude::*;
use rand::Rng;

fn l1(a: (u64, u64), b: (u64, u64)) -> u64 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Facilities and clients on an integer grid under the L1 metric.
pub fn grid_instance(fac: &[((u64, u64), u32)], cli: &[(u64, u64)]) -> Instance {
    let fdist = fac.iter().map(|a| fac.iter().map(|b| l1(a.0, b.0)).collect()).collect();
    let mut inst = Instance::new(fac.iter().map(|f| f.1 as f64).collect(), fdist).unwrap();
    for (k, &c) in cli.iter().enumerate() {
        inst.add_client(format!("c{k}"), fac.iter().map(|f| l1(c, f.0)).collect()).unwrap();
    }
    inst
}

pub fn arb_instance(max_f: usize, max_c: usize, grid: u64) -> impl Strategy<Value = Instance> {
    (
        proptest::collection::vec(((0..=grid, 0..=grid), 0u32..60), 1..=max_f),
        proptest::collection::vec((0..=grid, 0..=grid), 0..=max_c),
    )
        .prop_map(|(f, c)| grid_instance(&f, &c))
}

/// Nearest-assigned solution opening the facilities whose bit is set
/// (falling back to facility 0).
pub fn nearest_solution(inst: &Instance, mask: u32) -> Solution {
    let nf = inst.num_facilities();
    let mut sol = Solution::new(nf);
    let mut any = false;
    for i in 0..nf {
        if mask >> i & 1 == 1 {
            sol.open(i);
            any = true;
        }
    }
    if !any {
        sol.open(0);
    }
    for j in 0..inst.num_clients() {
        let (i, _) = facloc_core::nearest_facility(&inst.client(j).dist, sol.open_facilities()).unwrap();
        sol.assign(j, i);
    }
    sol
}

/// Random uniform-depth tree: leaves are grouped bottom-up into parents of
/// 1–3 children until a single root remains at the requested depth.
pub fn random_tree<R: Rng>(rng: &mut R, leaves: usize, depth: usize, max_cost: u32) -> Hst {
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut layer: Vec<usize> = (0..leaves).collect();
    let mut next_id = leaves;
    let mut specs = Vec::new();
    for (k, &v) in layer.iter().enumerate() {
        specs.push((v, k, rng.gen_range(0..=max_cost) as f64));
    }
    let mut edges: Vec<(usize, Vec<usize>)> = Vec::new();
    for level in 0..depth {
        let mut parents = Vec::new();
        let mut rest = layer.as_slice();
        while !rest.is_empty() {
            let take = if level + 1 == depth { rest.len() } else { rng.gen_range(1..=3).min(rest.len()) };
            edges.push((next_id, rest[..take].to_vec()));
            parents.push(next_id);
            next_id += 1;
            rest = &rest[take..];
        }
        layer = parents;
    }
    // Renumber so that the root becomes node 0.
    let root = *layer.last().unwrap();
    let map = |v: usize| {
        if v == root {
            0
        } else if v == 0 {
            root
        } else {
            v
        }
    };
    children.resize(next_id, Vec::new());
    for (p, cs) in edges {
        children[map(p)] = cs.into_iter().map(map).collect();
    }
    let specs: Vec<LeafSpec> =
        specs.into_iter().map(|(v, facility, cost)| LeafSpec { node: map(v), facility, cost }).collect();
    Hst::new(children, &specs).unwrap()
}
