//! Random tree embeddings of the facility metric, snapping clients onto
//! facilities, and the fully dynamic pipeline for general metrics that
//! combines both with the HST algorithm.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::hst::{Hst, LeafSpec, NodeId};
use crate::hst_dynamic::{ClientHandle, HstState, TreeCost};
use crate::io::{Event, EventStream, Location};
use crate::model::{nearest_facility, FacilityId, Instance};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSample {
    pub hst: Hst,
    /// Center priority order over facilities.
    pub permutation: Vec<FacilityId>,
    /// Radius scale in `[1, 2)`.
    pub beta: f64,
}

/// Samples a dominating HST over the facilities of `instance`.
///
/// A cluster at tree level `ℓ` holds the points whose first center in
/// permutation order lies within `β·2^(ℓ−2)`. Level 0 is all singletons and
/// the top level `⌈log₂ D⌉ + 2` is a single cluster, so two points first
/// separated below level `ℓ` are within `β·2^(ℓ−1) < 2^ℓ` of each other while
/// their tree distance is `2^(ℓ+1) − 2`.
pub fn sample_hst<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> EmbeddingSample {
    let m = instance.num_facilities();
    assert!(m > 0, "cannot embed an empty metric");
    let d = instance.facility_distances();
    let diameter = d.iter().flatten().copied().max().unwrap_or(0).max(1);
    let top = diameter.next_power_of_two().trailing_zeros() + 2;

    let mut permutation: Vec<FacilityId> = (0..m).collect();
    permutation.shuffle(rng);
    let beta = 2f64.powf(rng.gen::<f64>());

    // children[k] lists the clusters refining cluster k one level down.
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new()];
    let mut members: Vec<Vec<FacilityId>> = vec![(0..m).collect()];
    let mut frontier = vec![0usize];
    for level in (0..top).rev() {
        let radius = beta * 2f64.powi(level as i32 - 2);
        let mut next = Vec::new();
        for &k in &frontier {
            let mut groups: Vec<(usize, Vec<FacilityId>)> = Vec::new();
            for &x in &members[k] {
                let rank = if level == 0 {
                    x
                } else {
                    permutation.iter().position(|&c| d[x][c] as f64 <= radius).expect("a point centers itself")
                };
                match groups.iter_mut().find(|(r, _)| *r == rank) {
                    Some((_, g)) => g.push(x),
                    None => groups.push((rank, vec![x])),
                }
            }
            groups.sort_by_key(|(r, _)| *r);
            for (_, g) in groups {
                let id = children.len();
                children.push(Vec::new());
                members.push(g);
                children[k].push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    let leaves: Vec<LeafSpec> = frontier
        .iter()
        .map(|&k| {
            let i = members[k][0];
            LeafSpec { node: k, facility: i, cost: instance.facility_cost(i) }
        })
        .collect();
    let hst = Hst::new(children, &leaves).expect("construction yields a valid tree");
    EmbeddingSample { hst, permutation, beta }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StretchStats {
    pub samples: usize,
    pub pairs: usize,
    /// Mean over pairs of the average stretch across samples.
    pub mean_stretch: f64,
    /// Largest single-sample stretch of any pair.
    pub max_stretch: f64,
    pub dominance_violations: usize,
    pub preprocessing_ms: f64,
}

/// Draws `samples` trees and summarizes their distortion over all pairs at
/// positive distance.
pub fn stretch_stats(instance: &Instance, samples: usize, seed: u64) -> StretchStats {
    let m = instance.num_facilities();
    let d = instance.facility_distances();
    let pairs: Vec<(usize, usize)> =
        (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).filter(|&(a, b)| d[a][b] > 0).collect();
    let mut sum = vec![0.0; pairs.len()];
    let mut max_stretch: f64 = 0.0;
    let mut violations = 0;
    let mut elapsed = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let start = Instant::now();
        let s = sample_hst(instance, &mut rng);
        elapsed += start.elapsed().as_secs_f64() * 1e3;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let dt = s.hst.facility_distance(a, b);
            if dt < d[a][b] {
                violations += 1;
            }
            let r = dt as f64 / d[a][b] as f64;
            sum[k] += r;
            max_stretch = max_stretch.max(r);
        }
    }
    let mean_stretch =
        if pairs.is_empty() || samples == 0 { 1.0 } else { sum.iter().sum::<f64>() / (pairs.len() * samples) as f64 };
    StretchStats {
        samples,
        pairs: pairs.len(),
        mean_stretch,
        max_stretch,
        dominance_violations: violations,
        preprocessing_ms: if samples == 0 { 0.0 } else { elapsed / samples as f64 },
    }
}

/// Moves every client onto its nearest facility (smallest id on ties).
/// Returns the snapped instance and, per client, the facility it moved to.
pub fn snap_clients(instance: &Instance) -> (Instance, Vec<FacilityId>) {
    let mut snapped = Instance::new(instance.costs().to_vec(), instance.facility_distances().to_vec())
        .expect("facility part already validated");
    let mut map = Vec::with_capacity(instance.num_clients());
    for c in instance.clients() {
        let (i, _) = nearest_facility(&c.dist, 0..instance.num_facilities()).expect("instance has facilities");
        snapped.add_client_at(c.name.clone(), i).expect("facility exists");
        map.push(i);
    }
    (snapped, map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralStep {
    pub event: usize,
    pub tree_cost: TreeCost,
    /// Facility cost plus connections priced in the original metric.
    pub metric_cost: f64,
    pub reconnections_cum: usize,
    pub lb_certificate: f64,
}

#[derive(Debug, Clone)]
pub struct GeneralRun {
    pub sample: EmbeddingSample,
    pub steps: Vec<GeneralStep>,
    pub state: HstState,
}

/// Fully dynamic facility location on a general metric: one tree is sampled
/// before any event is read, clients are snapped to their nearest facility
/// and handled by the tree algorithm.
pub fn run_fully_dynamic_general(
    instance: &Instance,
    stream: &EventStream,
    seed: u64,
) -> Result<GeneralRun, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = sample_hst(instance, &mut rng);
    let mut state = HstState::new(sample.hst.clone());
    let mut live: HashMap<String, (ClientHandle, Vec<u64>)> = HashMap::new();
    let mut steps = Vec::with_capacity(stream.len());
    for (k, e) in stream.events().iter().enumerate() {
        match e {
            Event::Arrive { client, location } => {
                let dist = EventStream::distances(instance, location)?;
                let at = match location {
                    Location::At(i) => *i,
                    Location::Distances(d) => nearest_facility(d, 0..instance.num_facilities())?.0,
                };
                let r = state.insert_client(sample.hst.leaf_of(at)).expect("leaf exists");
                live.insert(client.clone(), (r.client, dist));
            }
            Event::Depart { client } => {
                let (h, _) = live.remove(client).ok_or_else(|| ModelError::UnknownClient(client.clone()))?;
                state.delete_client(h).expect("client is live");
            }
        }
        let hst = state.hst();
        let connection: u64 = live
            .values()
            .map(|(h, dist)| {
                let v = state.client_facility(*h).expect("settled client");
                dist[hst.facility(hst.cheapest_leaf(v)).expect("leaf carries a facility")]
            })
            .sum();
        let tree_cost = state.cost();
        steps.push(GeneralStep {
            event: k,
            tree_cost,
            metric_cost: tree_cost.facility_cost + connection as f64,
            reconnections_cum: state.total_reconnections(),
            lb_certificate: state.lb_certificate(),
        });
    }
    Ok(GeneralRun { sample, steps, state })
}
