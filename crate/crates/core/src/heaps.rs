//! Binary min-heap over facility ids with a position index, so arbitrary
//! members can be removed in `O(log n)`.

use crate::model::FacilityId;

const ABSENT: usize = usize::MAX;

/// Min-heap of `(key, facility)` pairs ordered lexicographically, so equal
/// keys come out by ascending facility id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexedMinHeap {
    items: Vec<(u64, FacilityId)>,
    pos: Vec<usize>,
}

impl IndexedMinHeap {
    pub fn new(capacity: usize) -> Self {
        Self { items: Vec::new(), pos: vec![ABSENT; capacity] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: FacilityId) -> bool {
        self.pos.get(id).is_some_and(|&p| p != ABSENT)
    }

    pub fn peek(&self) -> Option<(u64, FacilityId)> {
        self.items.first().copied()
    }

    pub fn clear(&mut self) {
        for &(_, id) in &self.items {
            self.pos[id] = ABSENT;
        }
        self.items.clear();
    }

    /// Inserts `id`; a no-op when it is already present.
    pub fn insert(&mut self, key: u64, id: FacilityId) {
        if id >= self.pos.len() {
            self.pos.resize(id + 1, ABSENT);
        }
        if self.pos[id] != ABSENT {
            return;
        }
        self.items.push((key, id));
        let k = self.items.len() - 1;
        self.pos[id] = k;
        self.sift_up(k);
    }

    pub fn pop(&mut self) -> Option<(u64, FacilityId)> {
        let top = self.peek()?;
        self.remove(top.1);
        Some(top)
    }

    pub fn remove(&mut self, id: FacilityId) -> bool {
        if !self.contains(id) {
            return false;
        }
        let k = self.pos[id];
        let last = self.items.len() - 1;
        self.swap(k, last);
        self.items.pop();
        self.pos[id] = ABSENT;
        if k < self.items.len() {
            self.sift_down(k);
            self.sift_up(k);
        }
        true
    }

    /// Members in heap order (not sorted).
    pub fn ids(&self) -> impl Iterator<Item = FacilityId> + '_ {
        self.items.iter().map(|&(_, id)| id)
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.items.swap(a, b);
        self.pos[self.items[a].1] = a;
        self.pos[self.items[b].1] = b;
    }

    fn sift_up(&mut self, mut k: usize) {
        while k > 0 {
            let p = (k - 1) / 2;
            if self.items[k] >= self.items[p] {
                break;
            }
            self.swap(k, p);
            k = p;
        }
    }

    fn sift_down(&mut self, mut k: usize) {
        let n = self.items.len();
        loop {
            let (l, r) = (2 * k + 1, 2 * k + 2);
            let mut m = k;
            if l < n && self.items[l] < self.items[m] {
                m = l;
            }
            if r < n && self.items[r] < self.items[m] {
                m = r;
            }
            if m == k {
                break;
            }
            self.swap(k, m);
            k = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn ties_pop_by_id() {
        let mut h = IndexedMinHeap::new(4);
        h.insert(5, 3);
        h.insert(5, 1);
        h.insert(7, 0);
        assert_eq!(h.pop(), Some((5, 1)));
        assert_eq!(h.pop(), Some((5, 3)));
        assert_eq!(h.pop(), Some((7, 0)));
        assert_eq!(h.pop(), None);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(u64, usize),
        Remove(usize),
        Pop,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u64..20, 0usize..12).prop_map(|(k, i)| Op::Insert(k, i)),
            (0usize..12).prop_map(Op::Remove),
            Just(Op::Pop),
        ]
    }

    proptest! {
        #[test]
        fn behaves_like_ordered_set(ops in proptest::collection::vec(op(), 0..200)) {
            let mut h = IndexedMinHeap::new(12);
            let mut model: BTreeSet<(u64, usize)> = BTreeSet::new();
            let mut key = [0u64; 12];
            for o in ops {
                match o {
                    Op::Insert(k, i) => {
                        if !h.contains(i) {
                            key[i] = k;
                            model.insert((k, i));
                        }
                        h.insert(k, i);
                    }
                    Op::Remove(i) => {
                        let had = model.remove(&(key[i], i));
                        prop_assert_eq!(h.remove(i), had);
                    }
                    Op::Pop => {
                        let m = model.iter().next().copied();
                        if let Some(x) = m { model.remove(&x); }
                        prop_assert_eq!(h.pop(), m);
                    }
                }
                prop_assert_eq!(h.peek(), model.iter().next().copied());
                prop_assert_eq!(h.len(), model.len());
            }
        }
    }
}
