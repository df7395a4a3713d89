//! Index arithmetic for complete `b`-ary trees of depth `k`.
//!
//! A node at depth `d` is numbered `0..b^d` in lexicographic order of its
//! path, so the parent of node `i` is `i / b` and leaf `i` has path digits
//! given by its base-`b` expansion (first level most significant).

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub b: usize,
    pub k: usize,
}

impl TreeShape {
    pub fn new(b: usize, k: usize) -> Self {
        TreeShape { b, k }
    }

    pub fn nodes_at(&self, depth: usize) -> usize {
        self.b.pow(depth as u32)
    }

    pub fn leaves(&self) -> usize {
        self.nodes_at(self.k)
    }

    /// Index of the depth-`depth` ancestor of the depth-`from` node `node`.
    #[inline]
    pub fn ancestor(&self, node: usize, from: usize, depth: usize) -> usize {
        node / self.nodes_at(from - depth)
    }

    /// Digits `(n_1, ..., n_d)` of a depth-`depth` node, zero based.
    pub fn path(&self, node: usize, depth: usize) -> Vec<u32> {
        let mut digits = vec![0u32; depth];
        let mut x = node;
        for d in (0..depth).rev() {
            digits[d] = (x % self.b) as u32;
            x /= self.b;
        }
        digits
    }

    pub fn node_from_path(&self, path: &[u32]) -> usize {
        path.iter().fold(0, |acc, &d| acc * self.b + d as usize)
    }

    /// First level (1-based) at which two leaf paths differ; `k + 1` when equal.
    pub fn wedge(&self, a: usize, b: usize) -> usize {
        if a == b {
            return self.k + 1;
        }
        (1..=self.k)
            .find(|&l| self.ancestor(a, self.k, l) != self.ancestor(b, self.k, l))
            .expect("distinct leaves differ at some level")
    }

    /// Per-depth subtree sums of leaf values, with `remainder` (one value per
    /// depth-`k-1` node) added to its depth-`k-1` owner. Entry `d` has
    /// `b^d` values.
    pub fn level_sums(&self, leaf: &[f64], remainder: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(leaf.len(), self.leaves());
        let mut levels = vec![Vec::new(); self.k + 1];
        levels[self.k] = leaf.to_vec();
        for d in (0..self.k).rev() {
            let mut sums: Vec<f64> = levels[d + 1].chunks(self.b).map(|c| c.iter().sum()).collect();
            if d + 1 == self.k {
                for (s, r) in sums.iter_mut().zip(remainder) {
                    *s += r;
                }
            }
            levels[d] = sums;
        }
        levels
    }

    /// `S_r = sum_{alpha ^ beta = r} a_alpha b_beta` for `r = 1..=k+1`
    /// (entry `r - 1`), from per-depth sums.
    ///
    /// Remainder mass is diffuse: pairs inside one remainder count as
    /// distinct leaves under the same parent, i.e. `alpha ^ beta = k`.
    pub fn pair_sums_from_levels(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let mut out = Vec::with_capacity(self.k + 1);
        for r in 1..=self.k {
            out.push(dot(&a[r - 1], &b[r - 1]) - dot(&a[r], &b[r]));
        }
        out.push(dot(&a[self.k], &b[self.k]));
        out
    }

    pub fn pair_sums(&self, a_leaf: &[f64], a_rem: &[f64], b_leaf: &[f64], b_rem: &[f64]) -> Vec<f64> {
        let a = self.level_sums(a_leaf, a_rem);
        let b = self.level_sums(b_leaf, b_rem);
        self.pair_sums_from_levels(&a, &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_and_wedge() {
        let t = TreeShape::new(3, 3);
        assert_eq!(t.leaves(), 27);
        assert_eq!(t.path(14, 3), vec![1, 1, 2]);
        assert_eq!(t.node_from_path(&[1, 1, 2]), 14);
        assert_eq!(t.wedge(14, 14), 4);
        assert_eq!(t.wedge(14, 13), 3);
        assert_eq!(t.wedge(14, 10), 2);
        assert_eq!(t.wedge(14, 0), 1);
        assert_eq!(t.ancestor(14, 3, 1), 1);
    }

    #[test]
    fn pair_sums_match_brute_force() {
        let t = TreeShape::new(3, 2);
        let a: Vec<f64> = (0..9).map(|i| 0.1 + i as f64 * 0.07).collect();
        let b: Vec<f64> = (0..9).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let zero = vec![0.0; 3];
        let s = t.pair_sums(&a, &zero, &b, &zero);
        let mut brute = [0.0; 3];
        for i in 0..9 {
            for j in 0..9 {
                brute[t.wedge(i, j) - 1] += a[i] * b[j];
            }
        }
        for r in 0..3 {
            assert!((s[r] - brute[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn remainder_pairs_count_at_level_k() {
        let t = TreeShape::new(2, 1);
        // one real leaf pair plus remainder mass 0.5 at the root
        let s = t.pair_sums(&[0.25, 0.25], &[0.5], &[0.25, 0.25], &[0.5]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((s[1] - 0.125).abs() < 1e-15);
        assert!((s[0] - 0.875).abs() < 1e-15);
    }
}
