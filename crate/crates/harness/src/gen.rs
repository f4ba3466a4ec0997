//! Instance and stream generators.

use facloc_core::hst::{Hst, LeafSpec, TreeFile};
use facloc_core::io::{Event, Header, Location};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenError {
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> GenError {
    GenError::Invalid(msg.into())
}

/// Facilities and clients at integer positions on a line.
pub fn line(positions: &[u64], costs: &[f64], arrivals: &[u64]) -> Result<(Header, Vec<Event>), GenError> {
    if positions.is_empty() || positions.len() != costs.len() {
        return Err(invalid("line needs one cost per facility position"));
    }
    let fdist = positions.iter().map(|a| positions.iter().map(|b| a.abs_diff(*b)).collect()).collect();
    let events = arrivals
        .iter()
        .enumerate()
        .map(|(k, p)| Event::Arrive {
            client: format!("c{}", k + 1),
            location: Location::Distances(positions.iter().map(|q| p.abs_diff(*q)).collect()),
        })
        .collect();
    Ok((Header { costs: costs.to_vec(), fdist }, events))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricParams {
    pub facilities: usize,
    pub clients: usize,
    /// Points are drawn from `{0..=grid}²`.
    pub grid: u64,
    pub min_cost: u32,
    pub max_cost: u32,
}

fn l1(a: (u64, u64), b: (u64, u64)) -> u64 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Facilities at distinct grid points and clients anywhere on the grid, with
/// L1 distances; arrivals only.
pub fn random_metric(p: &MetricParams, seed: u64) -> Result<(Header, Vec<Event>), GenError> {
    if p.facilities == 0 {
        return Err(invalid("need at least one facility"));
    }
    if ((p.grid + 1) * (p.grid + 1)) < p.facilities as u64 {
        return Err(invalid("grid too small for distinct facility points"));
    }
    if p.min_cost > p.max_cost {
        return Err(invalid("min_cost exceeds max_cost"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fac: Vec<(u64, u64)> = Vec::with_capacity(p.facilities);
    while fac.len() < p.facilities {
        let pt = (rng.gen_range(0..=p.grid), rng.gen_range(0..=p.grid));
        if !fac.contains(&pt) {
            fac.push(pt);
        }
    }
    let costs = (0..p.facilities).map(|_| f64::from(rng.gen_range(p.min_cost..=p.max_cost))).collect();
    let fdist = fac.iter().map(|&a| fac.iter().map(|&b| l1(a, b)).collect()).collect();
    let events = (0..p.clients)
        .map(|k| {
            let c = (rng.gen_range(0..=p.grid), rng.gen_range(0..=p.grid));
            Event::Arrive {
                client: format!("c{}", k + 1),
                location: Location::Distances(fac.iter().map(|&f| l1(c, f)).collect()),
            }
        })
        .collect();
    Ok((Header { costs, fdist }, events))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeParams {
    pub leaves: usize,
    pub depth: usize,
    pub max_cost: u32,
    pub events: usize,
    /// Chance that an event is a departure when clients are present.
    pub depart_prob: f64,
}

/// Random tree of the given depth: vertices of each layer are grouped into
/// parents of one to three children, and the last layer hangs off the root.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, leaves: usize, depth: usize, max_cost: u32) -> Result<Hst, GenError> {
    if leaves == 0 || depth == 0 {
        return Err(invalid("tree needs at least one leaf and depth one"));
    }
    let mut edges: Vec<(usize, Vec<usize>)> = Vec::new();
    // Node 0 is reserved for the root.
    let mut next = 1;
    let mut layer: Vec<usize> = (0..leaves).map(|k| k + next).collect();
    next += leaves;
    let leaf_nodes = layer.clone();
    for level in 0..depth {
        let mut parents = Vec::new();
        let mut rest = layer.as_slice();
        if level + 1 == depth {
            edges.push((0, rest.to_vec()));
            break;
        }
        while !rest.is_empty() {
            let take = rng.gen_range(1..=3usize).min(rest.len());
            edges.push((next, rest[..take].to_vec()));
            parents.push(next);
            next += 1;
            rest = &rest[take..];
        }
        layer = parents;
    }
    let mut children = vec![Vec::new(); next];
    for (p, cs) in edges {
        children[p] = cs;
    }
    let specs: Vec<LeafSpec> = leaf_nodes
        .iter()
        .enumerate()
        .map(|(facility, &node)| LeafSpec { node, facility, cost: f64::from(rng.gen_range(1..=max_cost.max(1))) })
        .collect();
    Hst::new(children, &specs).map_err(|e| invalid(e.to_string()))
}

/// Tree plus a stream of leaf arrivals and departures over its facilities.
pub fn random_tree_stream(p: &TreeParams, seed: u64) -> Result<(TreeFile, Header, Vec<Event>), GenError> {
    if !(0.0..=1.0).contains(&p.depart_prob) {
        return Err(invalid("depart_prob must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hst = random_tree(&mut rng, p.leaves, p.depth, p.max_cost)?;
    let header = tree_header(&hst);
    let mut live: Vec<String> = Vec::new();
    let mut events = Vec::with_capacity(p.events);
    let mut counter = 0;
    for _ in 0..p.events {
        if !live.is_empty() && rng.gen_bool(p.depart_prob) {
            let k = rng.gen_range(0..live.len());
            events.push(Event::Depart { client: live.swap_remove(k) });
        } else {
            counter += 1;
            let name = format!("c{counter}");
            live.push(name.clone());
            events.push(Event::Arrive { client: name, location: Location::At(rng.gen_range(0..p.leaves)) });
        }
    }
    Ok((hst.to_file(), header, events))
}

/// Header describing the tree metric over the leaves of `hst`.
pub fn tree_header(hst: &Hst) -> Header {
    let n = hst.num_facilities();
    Header {
        costs: hst.facility_costs(),
        fdist: (0..n).map(|a| (0..n).map(|b| hst.facility_distance(a, b)).collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use facloc_core::io::{load_instance, write_stream};

    #[test]
    fn line_reproduces_two_facility_example() {
        let (h, e) = line(&[0, 10], &[4.0, 4.0], &[0, 1, 9, 10]).unwrap();
        let mut a = Vec::new();
        write_stream(&mut a, &h, &e).unwrap();
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(
            r#"{"type":"header","facilities":[{"id":0,"cost":4.0},{"id":1,"cost":4.0}],"fdist":[[0,10],[10,0]]}"#
        ));
        assert!(text.contains(r#"{"type":"arrive","client":"c2","dist":[1,9]}"#));
        let (inst, stream) = load_instance(h, e).unwrap();
        assert_eq!(stream.n(&inst), 6);
    }

    #[test]
    fn random_metric_is_a_metric() {
        let p = MetricParams { facilities: 32, clients: 20, grid: 50, min_cost: 1, max_cost: 30 };
        let (h, e) = random_metric(&p, 3).unwrap();
        let (mut inst, stream) = load_instance(h.clone(), e.clone()).unwrap();
        for ev in stream.events() {
            if let Event::Arrive { client, location: Location::Distances(d) } = ev {
                inst.add_client(client.clone(), d.clone()).unwrap();
            }
        }
        inst.validate_triangle().unwrap();
        assert_eq!(random_metric(&p, 3).unwrap(), (h, e));
    }

    #[test]
    fn tree_kind_is_valid() {
        let p = TreeParams { leaves: 8, depth: 3, max_cost: 20, events: 50, depart_prob: 0.3 };
        let (tree, header, events) = random_tree_stream(&p, 1).unwrap();
        let hst = Hst::from_file(&tree).unwrap();
        assert_eq!(hst.num_facilities(), 8);
        assert!(hst.level(hst.root()) >= 3);
        load_instance(header, events).unwrap();
    }

    #[test]
    fn parameter_validation() {
        assert!(line(&[0], &[], &[]).is_err());
        let p = MetricParams { facilities: 10, clients: 0, grid: 1, min_cost: 1, max_cost: 2 };
        assert!(random_metric(&p, 0).is_err());
        let t = TreeParams { leaves: 0, depth: 2, max_cost: 1, events: 0, depart_prob: 0.0 };
        assert!(random_tree_stream(&t, 0).is_err());
    }
}
