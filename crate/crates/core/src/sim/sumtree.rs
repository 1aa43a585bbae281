/// Complete binary tree of partial sums over non-negative leaf rates.
///
/// Internal nodes are always recomputed from their two children, never
/// updated by deltas, so the root equals the sum of the leaves (in tree
/// order) no matter how many updates have been applied.
#[derive(Clone, Debug)]
pub struct SumTree {
    size: usize,
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: usize) -> Self {
        let size = leaves.max(1).next_power_of_two();
        Self { size, leaves, nodes: vec![0.0; 2 * size] }
    }

    pub fn len(&self) -> usize {
        self.leaves
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, rate: f64) {
        debug_assert!(i < self.leaves);
        debug_assert!(rate >= 0.0 && rate.is_finite(), "leaf rate {rate}");
        let mut p = self.size + i;
        if self.nodes[p] == rate {
            return;
        }
        self.nodes[p] = rate;
        while p > 1 {
            p >>= 1;
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
        }
    }

    /// Sets all leaves at once and rebuilds the internal nodes.
    pub fn fill(&mut self, rates: impl IntoIterator<Item = f64>) {
        self.nodes.iter_mut().for_each(|v| *v = 0.0);
        for (i, r) in rates.into_iter().enumerate() {
            self.nodes[self.size + i] = r;
        }
        for p in (1..self.size).rev() {
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Leaf whose cumulative interval contains `u ∈ [0, total)`. Zero-rate
    /// leaves are never returned while the total is positive.
    pub fn find(&self, mut u: f64) -> usize {
        let mut p = 1;
        while p < self.size {
            let left = self.nodes[2 * p];
            let right = self.nodes[2 * p + 1];
            if (u < left && left > 0.0) || right <= 0.0 {
                p *= 2;
            } else {
                u -= left;
                p = 2 * p + 1;
            }
        }
        p - self.size
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes[self.size..self.size + self.leaves].iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_proportional_leaf() {
        let mut t = SumTree::new(5);
        t.fill([1.0, 0.0, 2.0, 0.0, 1.0]);
        assert_eq!(t.total(), 4.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.99), 2);
        assert_eq!(t.find(3.5), 4);
        // rounding past the total still lands on a live leaf
        assert_eq!(t.find(4.0 + 1e-12), 4);
    }

    #[test]
    fn zero_leaves_are_skipped() {
        let mut t = SumTree::new(4);
        t.set(3, 1.0);
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(t.find(u), 3);
        }
    }

    proptest! {
        #[test]
        fn total_tracks_leaf_sum(
            n in 1usize..200,
            updates in proptest::collection::vec((0usize..200, 0.0f64..1e3), 1..500),
        ) {
            let mut t = SumTree::new(n);
            for (i, r) in updates {
                t.set(i % n, r);
                let naive: f64 = t.leaves().sum();
                prop_assert!((t.total() - naive).abs() <= 1e-9 * naive.max(1e-300));
            }
        }
    }
}
