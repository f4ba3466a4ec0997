//! Fully dynamic facility location on an HST with clients at the leaves.
//!
//! A vertex is marked when `α·N·2^level > f` and a marked vertex is open when
//! its unmarked children carry enough clients. The factors `α` and `β` switch
//! between 1 and 2 on every status change, which keeps statuses from
//! flickering when a count hovers around a threshold.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use crate::error::TreeError;
use crate::hst::{certificate_set, lb, marking_predicate, opening_predicate, Hst, NodeId, Status};

pub type ClientHandle = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusEvent {
    Mark(NodeId),
    Unmark(NodeId),
    Open(NodeId),
    Close(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateReport {
    pub client: ClientHandle,
    pub events: Vec<StatusEvent>,
    /// Existing clients whose facility changed.
    pub reconnections: usize,
    /// Facility of the inserted client; `None` for deletions.
    pub connected_to: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeCost {
    pub facility_cost: f64,
    /// Connections measured to the serving vertex.
    pub vertex_connection: u64,
    /// Connections measured to the cheapest leaf below the serving vertex.
    pub leaf_connection: u64,
}

impl TreeCost {
    pub fn vertex_total(&self) -> f64 {
        self.facility_cost + self.vertex_connection as f64
    }

    pub fn leaf_total(&self) -> f64 {
        self.facility_cost + self.leaf_connection as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ClientRec {
    leaf: NodeId,
    sigma: Option<NodeId>,
    /// Position in the per-leaf list.
    at_leaf: usize,
    /// Position in the per-facility list.
    at_facility: usize,
}

type PsiKey = (Reverse<u32>, NodeId);

#[derive(Debug, Clone)]
pub struct HstState {
    hst: Hst,
    n: Vec<u64>,
    alpha: Vec<u8>,
    beta: Vec<u8>,
    marked: Vec<bool>,
    open: Vec<bool>,
    n_prime: Vec<u64>,
    psi: Vec<Option<NodeId>>,
    psi_candidates: Vec<BTreeSet<PsiKey>>,
    // Intrusive lists of unmarked children with N ≥ 1.
    head: Vec<Option<NodeId>>,
    prev: Vec<Option<NodeId>>,
    next: Vec<Option<NodeId>>,
    listed: Vec<bool>,
    clients: Vec<Option<ClientRec>>,
    free: Vec<ClientHandle>,
    at_leaf: Vec<Vec<ClientHandle>>,
    assigned: Vec<Vec<ClientHandle>>,
    facility_cost: f64,
    vertex_connection: u64,
    leaf_connection: u64,
    total_reconnections: usize,
    events: usize,
}

impl HstState {
    pub fn new(hst: Hst) -> Self {
        let len = hst.len();
        Self {
            hst,
            n: vec![0; len],
            alpha: vec![1; len],
            beta: vec![1; len],
            marked: vec![false; len],
            open: vec![false; len],
            n_prime: vec![0; len],
            psi: vec![None; len],
            psi_candidates: vec![BTreeSet::new(); len],
            head: vec![None; len],
            prev: vec![None; len],
            next: vec![None; len],
            listed: vec![false; len],
            clients: Vec::new(),
            free: Vec::new(),
            at_leaf: vec![Vec::new(); len],
            assigned: vec![Vec::new(); len],
            facility_cost: 0.0,
            vertex_connection: 0,
            leaf_connection: 0,
            total_reconnections: 0,
            events: 0,
        }
    }

    pub fn hst(&self) -> &Hst {
        &self.hst
    }

    pub fn n(&self, v: NodeId) -> u64 {
        self.n[v]
    }

    pub fn alpha(&self, v: NodeId) -> u8 {
        self.alpha[v]
    }

    pub fn beta(&self, v: NodeId) -> u8 {
        self.beta[v]
    }

    pub fn is_marked(&self, v: NodeId) -> bool {
        self.marked[v]
    }

    pub fn is_open(&self, v: NodeId) -> bool {
        self.open[v]
    }

    pub fn n_prime(&self, v: NodeId) -> u64 {
        self.n_prime[v]
    }

    /// Nearest open vertex in `T_v ∖ {v}` as seen from `v`.
    pub fn psi(&self, v: NodeId) -> Option<NodeId> {
        self.psi[v]
    }

    pub fn status(&self) -> Status {
        Status { marked: self.marked.clone(), open: self.open.clone() }
    }

    pub fn counts(&self) -> Vec<f64> {
        self.n.iter().map(|&x| x as f64).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.iter().map(|&x| f64::from(x)).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.beta.iter().map(|&x| f64::from(x)).collect()
    }

    pub fn marked_count(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn open_vertices(&self) -> Vec<NodeId> {
        (0..self.hst.len()).filter(|&v| self.open[v]).collect()
    }

    /// Children of `v` on its unmarked-with-clients list, in list order.
    pub fn listed_children(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut c = self.head[v];
        while let Some(x) = c {
            out.push(x);
            c = self.next[x];
        }
        out
    }

    pub fn num_clients(&self) -> usize {
        self.clients.iter().flatten().count()
    }

    /// Active clients as `(handle, leaf, facility)`.
    pub fn clients(&self) -> impl Iterator<Item = (ClientHandle, NodeId, NodeId)> + '_ {
        self.clients.iter().enumerate().filter_map(|(h, c)| c.map(|c| (h, c.leaf, c.sigma.expect("settled client"))))
    }

    pub fn client_facility(&self, h: ClientHandle) -> Option<NodeId> {
        self.clients.get(h).copied().flatten().and_then(|c| c.sigma)
    }

    pub fn total_reconnections(&self) -> usize {
        self.total_reconnections
    }

    pub fn events_processed(&self) -> usize {
        self.events
    }

    pub fn cost(&self) -> TreeCost {
        TreeCost {
            facility_cost: self.facility_cost,
            vertex_connection: self.vertex_connection,
            leaf_connection: self.leaf_connection,
        }
    }

    /// `LB(v)` for the current client counts.
    pub fn lb(&self, v: NodeId) -> f64 {
        lb(&self.hst, v, self.n[v] as f64)
    }

    /// Lower-bound certificate `Σ_{u∈U} LB(u)` for the current state.
    pub fn lb_certificate(&self) -> f64 {
        certificate_set(&self.hst, &self.marked).into_iter().map(|v| self.lb(v)).sum()
    }

    /// Nearest open vertex to `leaf`, ties by smallest node id.
    pub fn nearest_open(&self, leaf: NodeId) -> Option<NodeId> {
        let mut a = leaf;
        loop {
            if self.open[a] {
                return Some(a);
            }
            if let Some(p) = self.psi[a] {
                return Some(p);
            }
            a = self.hst.parent(a)?;
        }
    }

    // ---- status predicates ----

    fn mark_pred(&self, v: NodeId) -> bool {
        marking_predicate(&self.hst, v, self.n[v] as f64, f64::from(self.alpha[v]))
    }

    fn open_pred(&self, v: NodeId) -> bool {
        self.marked[v]
            && (self.hst.is_leaf(v)
                || opening_predicate(
                    &self.hst,
                    v,
                    self.n_prime[v] as f64,
                    f64::from(self.alpha[v]),
                    f64::from(self.beta[v]),
                ))
    }

    // ---- unmarked-children lists ----

    fn sync_listing(&mut self, c: NodeId) {
        let Some(p) = self.hst.parent(c) else { return };
        let want = !self.marked[c] && self.n[c] >= 1;
        if want == self.listed[c] {
            return;
        }
        if want {
            self.prev[c] = None;
            self.next[c] = self.head[p];
            if let Some(h) = self.head[p] {
                self.prev[h] = Some(c);
            }
            self.head[p] = Some(c);
        } else {
            match self.prev[c] {
                Some(x) => self.next[x] = self.next[c],
                None => self.head[p] = self.next[c],
            }
            if let Some(x) = self.next[c] {
                self.prev[x] = self.prev[c];
            }
            self.prev[c] = None;
            self.next[c] = None;
        }
        self.listed[c] = want;
    }

    // ---- ψ maintenance ----

    fn candidate(&self, c: NodeId) -> Option<PsiKey> {
        let u = if self.open[c] { Some(c) } else { self.psi[c] };
        u.map(|u| (Reverse(self.hst.level(u)), u))
    }

    /// Re-derives ψ upward after the candidate of `c` changed from `old`.
    fn propagate_psi(&mut self, mut c: NodeId, mut old: Option<PsiKey>) {
        while let Some(p) = self.hst.parent(c) {
            let new = self.candidate(c);
            if new == old {
                return;
            }
            let before = self.candidate(p);
            if let Some(k) = old {
                self.psi_candidates[p].remove(&k);
            }
            if let Some(k) = new {
                self.psi_candidates[p].insert(k);
            }
            self.psi[p] = self.psi_candidates[p].first().map(|&(_, u)| u);
            old = before;
            c = p;
        }
    }

    fn set_open(&mut self, v: NodeId, open: bool) {
        let old = self.candidate(v);
        self.open[v] = open;
        if open {
            self.facility_cost += self.hst.f(v);
            self.beta[v] = 2;
        } else {
            self.facility_cost -= self.hst.f(v);
            self.beta[v] = 1;
        }
        self.propagate_psi(v, old);
    }

    fn set_marked(&mut self, v: NodeId, marked: bool) {
        self.marked[v] = marked;
        if let Some(p) = self.hst.parent(v) {
            if marked {
                self.n_prime[p] -= self.n[v];
            } else {
                self.n_prime[p] += self.n[v];
            }
        }
        self.sync_listing(v);
    }

    // ---- update processing ----

    fn adjust_counts(&mut self, leaf: NodeId, up: bool) -> Vec<NodeId> {
        let path = self.hst.path_to_root(leaf);
        for &v in &path {
            if up {
                self.n[v] += 1;
            } else {
                self.n[v] -= 1;
            }
            if let Some(p) = self.hst.parent(v) {
                if !self.marked[v] {
                    if up {
                        self.n_prime[p] += 1;
                    } else {
                        self.n_prime[p] -= 1;
                    }
                }
            }
            self.sync_listing(v);
        }
        path
    }

    /// Fires marking, unmarking, opening and closing events on `path`
    /// (leaf first) until every vertex agrees with its predicates.
    fn cascade(&mut self, path: &[NodeId]) -> Vec<StatusEvent> {
        let mut events = Vec::new();
        let limit = 4 * path.len() + 4;
        loop {
            assert!(events.len() <= limit, "status cascade did not settle");
            if let Some(&v) = path.iter().rev().find(|&&v| !self.marked[v] && self.mark_pred(v)) {
                self.alpha[v] = 2;
                self.beta[v] = 1;
                self.set_marked(v, true);
                events.push(StatusEvent::Mark(v));
                continue;
            }
            if let Some(&v) = path.iter().find(|&&v| self.marked[v] && !self.mark_pred(v)) {
                if self.open[v] {
                    self.set_open(v, false);
                    events.push(StatusEvent::Close(v));
                }
                self.alpha[v] = 1;
                self.set_marked(v, false);
                events.push(StatusEvent::Unmark(v));
                continue;
            }
            if let Some(&v) = path.iter().find(|&&v| self.marked[v] && self.open[v] != self.open_pred(v)) {
                let open = !self.open[v];
                self.set_open(v, open);
                events.push(if open { StatusEvent::Open(v) } else { StatusEvent::Close(v) });
                continue;
            }
            return events;
        }
    }

    fn link(&mut self, h: ClientHandle, facility: NodeId) {
        let rec = self.clients[h].as_mut().expect("live client");
        rec.sigma = Some(facility);
        rec.at_facility = self.assigned[facility].len();
        let leaf = rec.leaf;
        self.assigned[facility].push(h);
        self.vertex_connection += self.hst.distance(leaf, facility);
        self.leaf_connection += self.hst.distance(leaf, self.hst.cheapest_leaf(facility));
    }

    fn unlink(&mut self, h: ClientHandle) {
        let rec = self.clients[h].expect("live client");
        let Some(facility) = rec.sigma else { return };
        let list = &mut self.assigned[facility];
        list.swap_remove(rec.at_facility);
        if let Some(&moved) = list.get(rec.at_facility) {
            self.clients[moved].as_mut().unwrap().at_facility = rec.at_facility;
        }
        self.vertex_connection -= self.hst.distance(rec.leaf, facility);
        self.leaf_connection -= self.hst.distance(rec.leaf, self.hst.cheapest_leaf(facility));
        self.clients[h].as_mut().unwrap().sigma = None;
    }

    /// Clients at leaves below `c`, found through the unmarked lists.
    fn collect_subtree(&self, c: NodeId, out: &mut Vec<ClientHandle>) {
        if self.hst.is_leaf(c) {
            out.extend(self.at_leaf[c].iter().copied());
            return;
        }
        for x in self.listed_children(c) {
            self.collect_subtree(x, out);
        }
    }

    /// Clients whose nearest open vertex may have changed because the
    /// open status of the vertices in `changed` flipped.
    fn affected_clients(&self, changed: &[NodeId]) -> Vec<ClientHandle> {
        let mut out = Vec::new();
        for &u in changed {
            if !self.open[u] {
                out.extend(self.assigned[u].iter().copied());
                continue;
            }
            self.collect_subtree(u, &mut out);
            let mut w = u;
            while let Some(p) = self.hst.parent(w) {
                if self.open[p] || self.psi[p] != Some(u) {
                    break;
                }
                for c in self.listed_children(p) {
                    self.collect_subtree(c, &mut out);
                }
                w = p;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn reconnect(&mut self, before: &[bool]) -> usize {
        let changed: Vec<NodeId> = (0..self.hst.len()).filter(|&v| self.open[v] != before[v]).collect();
        if changed.is_empty() {
            return 0;
        }
        let mut count = 0;
        for h in self.affected_clients(&changed) {
            let rec = self.clients[h].expect("live client");
            let Some(old) = rec.sigma else { continue };
            let new = self.nearest_open(rec.leaf).expect("a client keeps some vertex open");
            if new != old {
                self.unlink(h);
                self.link(h, new);
                count += 1;
            }
        }
        count
    }

    pub fn insert_client(&mut self, leaf: NodeId) -> Result<UpdateReport, TreeError> {
        if leaf >= self.hst.len() {
            return Err(TreeError::UnknownNode(leaf));
        }
        if !self.hst.is_leaf(leaf) {
            return Err(TreeError::NotALeaf(leaf));
        }
        let h = self.free.pop().unwrap_or_else(|| {
            self.clients.push(None);
            self.clients.len() - 1
        });
        self.clients[h] = Some(ClientRec { leaf, sigma: None, at_leaf: self.at_leaf[leaf].len(), at_facility: 0 });
        self.at_leaf[leaf].push(h);
        let before = self.open.clone();
        let path = self.adjust_counts(leaf, true);
        let events = self.cascade(&path);
        let reconnections = self.reconnect(&before);
        let facility = self.nearest_open(leaf).expect("a client keeps some vertex open");
        self.link(h, facility);
        self.total_reconnections += reconnections;
        self.events += 1;
        Ok(UpdateReport { client: h, events, reconnections, connected_to: Some(facility) })
    }

    pub fn delete_client(&mut self, h: ClientHandle) -> Result<UpdateReport, TreeError> {
        let rec = self.clients.get(h).copied().flatten().ok_or(TreeError::UnknownHandle(h))?;
        self.unlink(h);
        let list = &mut self.at_leaf[rec.leaf];
        list.swap_remove(rec.at_leaf);
        if let Some(&moved) = list.get(rec.at_leaf) {
            self.clients[moved].as_mut().unwrap().at_leaf = rec.at_leaf;
        }
        self.clients[h] = None;
        self.free.push(h);
        let before = self.open.clone();
        let path = self.adjust_counts(rec.leaf, false);
        let events = self.cascade(&path);
        let reconnections = self.reconnect(&before);
        self.total_reconnections += reconnections;
        self.events += 1;
        Ok(UpdateReport { client: h, events, reconnections, connected_to: None })
    }

    /// Deletes the most recently inserted client still at `leaf`.
    pub fn delete_client_at(&mut self, leaf: NodeId) -> Result<UpdateReport, TreeError> {
        if leaf >= self.hst.len() {
            return Err(TreeError::UnknownNode(leaf));
        }
        let h = *self.at_leaf[leaf].iter().max().ok_or(TreeError::EmptyLeaf(leaf))?;
        self.delete_client(h)
    }

    /// Checks every maintained quantity against recomputation from scratch.
    /// Returns a description of the first mismatch.
    pub fn check_consistency(&self) -> Result<(), String> {
        let hst = &self.hst;
        let off = crate::hst::offline_mark_and_open(hst, &self.counts(), &self.alphas(), &self.betas());
        if off.marked != self.marked || off.open != self.open {
            return Err("status differs from offline recomputation".into());
        }
        for v in 0..hst.len() {
            if let Some(p) = hst.parent(v) {
                if self.marked[v] && !self.marked[p] {
                    return Err(format!("marked {v} under unmarked {p}"));
                }
            }
            if self.marked[v] && hst.children(v).iter().all(|&c| !self.marked[c]) && !self.open[v] {
                return Err(format!("lowest marked {v} is closed"));
            }
            let np: u64 = hst.children(v).iter().filter(|&&c| !self.marked[c]).map(|&c| self.n[c]).sum();
            if np != self.n_prime[v] {
                return Err(format!("N' of {v} is {}, expected {np}", self.n_prime[v]));
            }
            let mut listed = self.listed_children(v);
            listed.sort_unstable();
            let expect: Vec<_> =
                hst.children(v).iter().copied().filter(|&c| !self.marked[c] && self.n[c] >= 1).collect();
            let mut expect = expect;
            expect.sort_unstable();
            if listed != expect {
                return Err(format!("unmarked list of {v} is {listed:?}, expected {expect:?}"));
            }
            let best = (0..hst.len())
                .filter(|&u| u != v && self.open[u] && hst.is_ancestor(v, u))
                .min_by_key(|&u| (Reverse(hst.level(u)), u));
            if best != self.psi[v] {
                return Err(format!("psi of {v} is {:?}, expected {best:?}", self.psi[v]));
            }
        }
        let f: f64 = (0..hst.len()).filter(|&v| self.open[v]).map(|v| hst.f(v)).sum();
        if (f - self.facility_cost).abs() > 1e-6 {
            return Err("facility cost drifted".into());
        }
        Ok(())
    }
}

/// Nearest open vertex by linear scan: smallest tree distance, then node id.
pub fn brute_force_nearest(hst: &Hst, open: &[bool], leaf: NodeId) -> Option<NodeId> {
    (0..hst.len()).filter(|&v| open[v]).min_by_key(|&v| (hst.distance(leaf, v), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hst::fixtures::three_leaf;

    #[test]
    fn fresh_state_is_empty() {
        let s = HstState::new(three_leaf());
        assert_eq!(s.marked_count(), 0);
        assert_eq!(s.open_count(), 0);
        assert!(s.psi(0).is_none());
        assert!(s.check_consistency().is_ok());
    }

    #[test]
    fn first_client_opens_its_parent() {
        let mut s = HstState::new(three_leaf());
        let r = s.insert_client(3).unwrap();
        assert!(s.is_marked(1) && s.is_open(1));
        assert_eq!((s.alpha(1), s.beta(1)), (2, 2));
        assert!(s.is_marked(0) && !s.is_open(0));
        assert!(!s.is_marked(3));
        assert_eq!(r.connected_to, Some(1));
        assert_eq!(r.reconnections, 0);
        assert_eq!(s.cost().leaf_connection, 0);
        assert_eq!(s.nearest_open(5), Some(1));
        assert_eq!(s.hst().distance(5, s.hst().cheapest_leaf(1)), 6);
        s.check_consistency().unwrap();
    }

    #[test]
    fn insert_then_delete_stays_consistent() {
        let mut s = HstState::new(three_leaf());
        let r = s.insert_client(5).unwrap();
        s.check_consistency().unwrap();
        s.delete_client(r.client).unwrap();
        s.check_consistency().unwrap();
        assert_eq!(s.num_clients(), 0);
        assert_eq!(s.delete_client_at(5), Err(TreeError::EmptyLeaf(5)));
        assert_eq!(s.insert_client(1), Err(TreeError::NotALeaf(1)));
    }

    #[test]
    fn many_clients_keep_nearest() {
        let mut s = HstState::new(three_leaf());
        for leaf in [3, 5, 5, 4, 5, 5, 3, 4, 4] {
            s.insert_client(leaf).unwrap();
            s.check_consistency().unwrap();
            for (_, leaf, fac) in s.clients() {
                assert_eq!(Some(fac), brute_force_nearest(s.hst(), &s.status().open, leaf));
            }
        }
        for leaf in [5, 5, 3, 4] {
            s.delete_client_at(leaf).unwrap();
            s.check_consistency().unwrap();
            for (_, leaf, fac) in s.clients() {
                assert_eq!(Some(fac), brute_force_nearest(s.hst(), &s.status().open, leaf));
            }
        }
    }
}
