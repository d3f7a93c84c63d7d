//! Mixed-radix indexing of joint state configurations.
//!
//! The first entry of a scope is the most significant digit, so the last
//! node varies fastest. This is also the layout of every CPT row block and
//! every cluster's moment vector.

use crate::diagram::NodeId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIndexer {
    scope: Vec<NodeId>,
    radices: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl ConfigIndexer {
    /// Builds an indexer over `scope` with the given per-node state counts.
    ///
    /// Panics if the lengths differ or a radix is zero.
    pub fn new(scope: Vec<NodeId>, radices: Vec<usize>) -> Self {
        assert_eq!(scope.len(), radices.len(), "scope/radix length mismatch");
        assert!(radices.iter().all(|&r| r > 0), "zero radix");
        let mut strides = vec![1; radices.len()];
        for i in (0..radices.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * radices[i + 1];
        }
        let total = radices.iter().product();
        Self {
            scope,
            radices,
            strides,
            total,
        }
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.scope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scope.is_empty()
    }

    /// Position of `node` inside the scope.
    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.scope.iter().position(|&n| n == node)
    }

    pub fn index(&self, states: &[usize]) -> Result<usize> {
        if states.len() != self.radices.len()
            || states.iter().zip(&self.radices).any(|(s, r)| s >= r)
        {
            return Err(Error::StateOutOfRange {
                tuple: states.to_vec(),
                radices: self.radices.clone(),
            });
        }
        Ok(self.index_unchecked(states))
    }

    #[inline]
    pub fn index_unchecked(&self, states: &[usize]) -> usize {
        states
            .iter()
            .zip(&self.strides)
            .map(|(s, stride)| s * stride)
            .sum()
    }

    pub fn states(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total {
            return Err(Error::IndexOutOfRange {
                index,
                total: self.total,
            });
        }
        let mut out = vec![0; self.radices.len()];
        self.states_into(index, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn states_into(&self, mut index: usize, out: &mut [usize]) {
        for (i, stride) in self.strides.iter().enumerate() {
            out[i] = index / stride;
            index %= stride;
        }
    }

    /// Index distance between configurations differing by one in position `pos`.
    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    /// State of the node at scope position `pos` within configuration `index`.
    #[inline]
    pub fn digit(&self, index: usize, pos: usize) -> usize {
        (index / self.strides[pos]) % self.radices[pos]
    }

    /// Flat index of the sub-configuration obtained by projecting a
    /// configuration of `self` onto `other`, whose scope must be a subset.
    pub fn project(&self, index: usize, other: &ConfigIndexer) -> usize {
        other
            .scope
            .iter()
            .zip(&other.strides)
            .map(|(node, stride)| {
                let pos = self.position(*node).expect("projection onto a non-subset scope");
                self.digit(index, pos) * stride
            })
            .sum()
    }

    /// Precomputes the projection map `self index -> other index`.
    pub fn projection_table(&self, other: &ConfigIndexer) -> Vec<usize> {
        let positions: Vec<usize> = other
            .scope
            .iter()
            .map(|n| self.position(*n).expect("projection onto a non-subset scope"))
            .collect();
        (0..self.total)
            .map(|i| {
                positions
                    .iter()
                    .zip(&other.strides)
                    .map(|(&p, stride)| self.digit(i, p) * stride)
                    .sum()
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.total).map(move |i| {
            let mut out = vec![0; self.radices.len()];
            self.states_into(i, &mut out);
            out
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<NodeId> {
        (0..n).map(NodeId::from_index).collect()
    }

    #[test]
    fn two_by_three() {
        let ix = ConfigIndexer::new(ids(2), vec![2, 3]);
        assert_eq!(ix.total(), 6);
        assert_eq!(ix.index(&[1, 2]).unwrap(), 5);
        assert_eq!(ix.states(0).unwrap(), vec![0, 0]);
        for i in 0..6 {
            assert_eq!(ix.index(&ix.states(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn out_of_range() {
        let ix = ConfigIndexer::new(ids(2), vec![2, 3]);
        assert!(ix.index(&[2, 0]).is_err());
        assert!(ix.index(&[0]).is_err());
        assert!(ix.states(6).is_err());
    }

    #[test]
    fn empty_scope_has_one_config() {
        let ix = ConfigIndexer::new(vec![], vec![]);
        assert_eq!(ix.total(), 1);
        assert_eq!(ix.index(&[]).unwrap(), 0);
    }

    #[test]
    fn projection_keeps_digits() {
        let big = ConfigIndexer::new(ids(3), vec![2, 3, 2]);
        let small = ConfigIndexer::new(vec![NodeId::from_index(2), NodeId::from_index(0)], vec![2, 2]);
        let table = big.projection_table(&small);
        assert_eq!(table.len(), big.total());
        for (i, &t) in table.iter().enumerate() {
            let s = big.states(i).unwrap();
            assert_eq!(t, small.index(&[s[2], s[0]]).unwrap());
            assert_eq!(big.project(i, &small), t);
        }
    }

    proptest! {
        #[test]
        fn round_trip(radices in proptest::collection::vec(1usize..5, 0..6)) {
            let ix = ConfigIndexer::new(ids(radices.len()), radices);
            for i in 0..ix.total() {
                let s = ix.states(i).unwrap();
                prop_assert_eq!(ix.index(&s).unwrap(), i);
            }
        }
    }
}
