//! Hierarchically well-separated trees: every leaf is a facility, the edge
//! from a vertex to its parent weighs `2^level`, and leaves sit at level 0.
//! Internal vertices act as facilities too, priced at their cheapest leaf.

use serde::{Deserialize, Serialize};

use crate::error::TreeError;
use crate::model::{FacilityId, Instance};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSpec {
    pub node: NodeId,
    pub facility: FacilityId,
    pub cost: f64,
}

/// On-disk tree layout. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub children: Vec<Vec<NodeId>>,
    pub leaves: Vec<LeafSpec>,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    level: u32,
    f: f64,
    cheapest_leaf: NodeId,
    facility: Option<FacilityId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hst {
    nodes: Vec<Node>,
    root: NodeId,
    leaf_of: Vec<NodeId>,
}

impl Hst {
    /// Builds a tree rooted at node 0. Leaves are exactly the nodes without
    /// children and must all be listed in `leaves` with dense facility ids.
    /// A unary chain is added above the root until `f_root < 2^level(root)`.
    pub fn new(children: Vec<Vec<NodeId>>, leaves: &[LeafSpec]) -> Result<Self, TreeError> {
        let n = children.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let mut parent = vec![None; n];
        for (p, cs) in children.iter().enumerate() {
            for &c in cs {
                if c >= n {
                    return Err(TreeError::UnknownNode(c));
                }
                if c == 0 || parent[c].is_some() {
                    return Err(TreeError::NotATree(c));
                }
                parent[c] = Some(p);
            }
        }
        // Depth by BFS from the root also detects unreachable nodes.
        let mut depth = vec![usize::MAX; n];
        let mut order = vec![0];
        depth[0] = 0;
        let mut k = 0;
        while k < order.len() {
            let v = order[k];
            k += 1;
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                order.push(c);
            }
        }
        if let Some(v) = (0..n).find(|&v| depth[v] == usize::MAX) {
            return Err(TreeError::NotATree(v));
        }
        let height = (0..n).filter(|&v| children[v].is_empty()).map(|v| depth[v]).max().unwrap_or(0);
        for v in 0..n {
            if children[v].is_empty() && depth[v] != height {
                return Err(TreeError::UnevenDepth { node: v, depth: depth[v], expected: height });
            }
        }

        let mut cost = vec![None; n];
        let mut facility = vec![None; n];
        let num_leaves = (0..n).filter(|&v| children[v].is_empty()).count();
        let mut leaf_of = vec![usize::MAX; num_leaves];
        for l in leaves {
            if l.node >= n {
                return Err(TreeError::UnknownNode(l.node));
            }
            if !children[l.node].is_empty() {
                return Err(TreeError::NotALeaf(l.node));
            }
            if !l.cost.is_finite() || l.cost < 0.0 {
                return Err(TreeError::InvalidCost { node: l.node, cost: l.cost });
            }
            if l.facility >= num_leaves || leaf_of[l.facility] != usize::MAX || cost[l.node].is_some() {
                return Err(TreeError::NotATree(l.node));
            }
            cost[l.node] = Some(l.cost);
            facility[l.node] = Some(l.facility);
            leaf_of[l.facility] = l.node;
        }
        if let Some(v) = (0..n).find(|&v| children[v].is_empty() && cost[v].is_none()) {
            return Err(TreeError::NotALeaf(v));
        }

        let mut nodes: Vec<Node> = (0..n)
            .map(|v| Node {
                parent: parent[v],
                children: children[v].clone(),
                level: (height - depth[v]) as u32,
                f: cost[v].unwrap_or(f64::INFINITY),
                cheapest_leaf: v,
                facility: facility[v],
            })
            .collect();
        for &v in order.iter().rev() {
            if nodes[v].children.is_empty() {
                continue;
            }
            let (f, leaf) = nodes[v]
                .children
                .iter()
                .map(|&c| (nodes[c].f, nodes[c].cheapest_leaf))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("internal node has children");
            nodes[v].f = f;
            nodes[v].cheapest_leaf = leaf;
        }
        let mut root = 0;
        while nodes[root].f >= 2f64.powi(nodes[root].level as i32) {
            let id = nodes.len();
            nodes.push(Node {
                parent: None,
                children: vec![root],
                level: nodes[root].level + 1,
                f: nodes[root].f,
                cheapest_leaf: nodes[root].cheapest_leaf,
                facility: None,
            });
            nodes[root].parent = Some(id);
            root = id;
        }
        Ok(Self { nodes, root, leaf_of })
    }

    pub fn from_file(file: &TreeFile) -> Result<Self, TreeError> {
        Self::new(file.children.clone(), &file.leaves)
    }

    /// Layout with the current root renumbered to 0.
    pub fn to_file(&self) -> TreeFile {
        let mut order = vec![self.root];
        let mut k = 0;
        while k < order.len() {
            order.extend(self.nodes[order[k]].children.iter().copied());
            k += 1;
        }
        let mut new_id = vec![0; self.nodes.len()];
        for (k, &v) in order.iter().enumerate() {
            new_id[v] = k;
        }
        let children = order.iter().map(|&v| self.nodes[v].children.iter().map(|&c| new_id[c]).collect()).collect();
        let leaves = order
            .iter()
            .filter_map(|&v| {
                self.nodes[v].facility.map(|facility| LeafSpec { node: new_id[v], facility, cost: self.nodes[v].f })
            })
            .collect();
        TreeFile { children, leaves }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn level(&self, v: NodeId) -> u32 {
        self.nodes[v].level
    }

    /// Weight of the edge from `v` to its parent.
    pub fn edge_weight(&self, v: NodeId) -> u64 {
        1u64 << self.nodes[v].level
    }

    pub fn f(&self, v: NodeId) -> f64 {
        self.nodes[v].f
    }

    /// Leaf whose facility realizes `f(v)`, smallest node id among ties.
    pub fn cheapest_leaf(&self, v: NodeId) -> NodeId {
        self.nodes[v].cheapest_leaf
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v].children.is_empty()
    }

    pub fn facility(&self, v: NodeId) -> Option<FacilityId> {
        self.nodes[v].facility
    }

    pub fn num_facilities(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn leaf_of(&self, i: FacilityId) -> NodeId {
        self.leaf_of[i]
    }

    /// Leaves in facility-id order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaf_of
    }

    /// `v` followed by its ancestors up to the root.
    pub fn path_to_root(&self, v: NodeId) -> Vec<NodeId> {
        let mut p = vec![v];
        let mut u = v;
        while let Some(w) = self.nodes[u].parent {
            p.push(w);
            u = w;
        }
        p
    }

    /// Whether `a` is `v` or an ancestor of it.
    pub fn is_ancestor(&self, a: NodeId, v: NodeId) -> bool {
        let mut u = v;
        loop {
            if u == a {
                return true;
            }
            if self.nodes[u].level >= self.nodes[a].level {
                return false;
            }
            match self.nodes[u].parent {
                Some(w) => u = w,
                None => return false,
            }
        }
    }

    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        while self.nodes[a].level < self.nodes[b].level {
            a = self.nodes[a].parent.expect("levels are consistent");
        }
        while self.nodes[b].level < self.nodes[a].level {
            b = self.nodes[b].parent.expect("levels are consistent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("common root");
            b = self.nodes[b].parent.expect("common root");
        }
        a
    }

    /// Tree distance between any two vertices.
    pub fn distance(&self, a: NodeId, b: NodeId) -> u64 {
        let l = self.nodes[self.lca(a, b)].level;
        // Distance from a level-x vertex up to a level-l ancestor is 2^l − 2^x.
        let up = |x: u32| (1u64 << l) - (1u64 << x);
        up(self.nodes[a].level) + up(self.nodes[b].level)
    }

    /// Distance between the facilities at two leaves.
    pub fn facility_distance(&self, i: FacilityId, k: FacilityId) -> u64 {
        self.distance(self.leaf_of[i], self.leaf_of[k])
    }

    /// Leaf costs in facility-id order.
    pub fn facility_costs(&self) -> Vec<f64> {
        self.leaf_of.iter().map(|&v| self.nodes[v].f).collect()
    }

    /// The tree metric over the leaves as a flat instance.
    pub fn to_instance(&self) -> Instance {
        let n = self.num_facilities();
        let fdist = (0..n).map(|a| (0..n).map(|b| self.facility_distance(a, b)).collect()).collect();
        Instance::new(self.facility_costs(), fdist).expect("tree metric is valid")
    }
}

/// Marking threshold: `α·N·2^level > f`.
pub fn marking_predicate(hst: &Hst, v: NodeId, n: f64, alpha: f64) -> bool {
    alpha * n * (1u64 << hst.level(v)) as f64 > hst.f(v)
}

/// Opening threshold for a marked internal vertex: `α·β·N′·2^level > f`.
pub fn opening_predicate(hst: &Hst, v: NodeId, n_prime: f64, alpha: f64, beta: f64) -> bool {
    alpha * beta * n_prime * (1u64 << hst.level(v)) as f64 > hst.f(v)
}

/// `LB(v) = min(N_v·2^level(v), f_v)`.
pub fn lb(hst: &Hst, v: NodeId, n: f64) -> f64 {
    (n * (1u64 << hst.level(v)) as f64).min(hst.f(v))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Status {
    pub marked: Vec<bool>,
    pub open: Vec<bool>,
}

/// Marked and open vertices for client counts `n` and factors `alpha`,
/// `beta`, all indexed by node.
pub fn offline_mark_and_open(hst: &Hst, n: &[f64], alpha: &[f64], beta: &[f64]) -> Status {
    let len = hst.len();
    let marked: Vec<bool> = (0..len).map(|v| marking_predicate(hst, v, n[v], alpha[v])).collect();
    let open = (0..len)
        .map(|v| {
            if !marked[v] {
                return false;
            }
            if hst.is_leaf(v) {
                return true;
            }
            let np: f64 = hst.children(v).iter().filter(|&&c| !marked[c]).map(|&c| n[c]).sum();
            opening_predicate(hst, v, np, alpha[v], beta[v])
        })
        .collect();
    Status { marked, open }
}

/// Highest unmarked vertices together with the marked leaves.
pub fn certificate_set(hst: &Hst, marked: &[bool]) -> Vec<NodeId> {
    (0..hst.len())
        .filter(|&v| if marked[v] { hst.is_leaf(v) } else { hst.parent(v).is_none_or(|p| marked[p]) })
        .collect()
}

/// `Σ_{u∈U} LB(u)` over [`certificate_set`].
pub fn lb_certificate(hst: &Hst, n: &[f64], marked: &[bool]) -> f64 {
    certificate_set(hst, marked).into_iter().map(|v| lb(hst, v, n[v])).sum()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Root 0 over level-1 vertices 1 = {x1, x2} and 2 = {x3}; leaves
    /// x1 = 3 (f = 1), x2 = 4 (f = 8), x3 = 5 (f = 2).
    pub fn three_leaf() -> Hst {
        let children = vec![vec![1, 2], vec![3, 4], vec![5], vec![], vec![], vec![]];
        let leaves = [
            LeafSpec { node: 3, facility: 0, cost: 1.0 },
            LeafSpec { node: 4, facility: 1, cost: 8.0 },
            LeafSpec { node: 5, facility: 2, cost: 2.0 },
        ];
        Hst::new(children, &leaves).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::three_leaf;
    use super::*;

    #[test]
    fn three_leaf_shape() {
        let t = three_leaf();
        assert_eq!(t.root(), 0);
        assert_eq!(t.level(0), 2);
        assert_eq!(t.f(1), 1.0);
        assert_eq!(t.f(2), 2.0);
        assert_eq!(t.cheapest_leaf(0), 3);
        assert_eq!(t.distance(5, 1), 5);
        assert_eq!(t.distance(5, t.cheapest_leaf(1)), 6);
        assert_eq!(t.facility_distance(0, 1), 2);
        assert_eq!(t.facility_distance(0, 2), 6);
    }

    #[test]
    fn root_is_extended_until_cheap() {
        let t = Hst::new(vec![vec![]], &[LeafSpec { node: 0, facility: 0, cost: 5.0 }]).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.level(t.root()), 3);
        assert!(t.f(t.root()) < 2f64.powi(t.level(t.root()) as i32));
        let back = Hst::from_file(&t.to_file()).unwrap();
        assert_eq!(back.len(), 4);
    }

    #[test]
    fn malformed_trees() {
        assert_eq!(Hst::new(vec![], &[]), Err(TreeError::Empty));
        let uneven = Hst::new(
            vec![vec![1, 2], vec![3], vec![], vec![]],
            &[LeafSpec { node: 2, facility: 0, cost: 1.0 }, LeafSpec { node: 3, facility: 1, cost: 1.0 }],
        );
        assert!(matches!(uneven, Err(TreeError::UnevenDepth { .. })));
        let shared = Hst::new(vec![vec![1, 1], vec![]], &[LeafSpec { node: 1, facility: 0, cost: 1.0 }]);
        assert!(matches!(shared, Err(TreeError::NotATree(1))));
        let missing = Hst::new(vec![vec![1], vec![]], &[]);
        assert!(matches!(missing, Err(TreeError::NotALeaf(1))));
    }

    #[test]
    fn offline_single_client_at_cheapest_leaf() {
        let t = three_leaf();
        let mut n = vec![0.0; t.len()];
        for v in t.path_to_root(3) {
            n[v] = 1.0;
        }
        let ones = vec![1.0; t.len()];
        let s = offline_mark_and_open(&t, &n, &ones, &ones);
        assert!(!s.marked[3]);
        assert!(s.marked[1] && s.open[1]);
        assert!(s.marked[0] && !s.open[0]);
        assert_eq!(certificate_set(&t, &s.marked), vec![2, 3, 4]);
        let empty = offline_mark_and_open(&t, &vec![0.0; t.len()], &ones, &ones);
        assert!(!empty.marked.iter().any(|&m| m));
    }

    #[test]
    fn lb_values() {
        let t = three_leaf();
        assert_eq!(lb(&t, 3, 0.0), 0.0);
        assert_eq!(lb(&t, 3, 5.0), 1.0);
        assert_eq!(lb(&t, 1, 1.0), 1.0);
    }
}
