//! Fast plug-in entropies over integer-coded columns.
//!
//! Surrogate loops evaluate the same conditional mutual information
//! thousands of times on one fixed set of rows. Instead of rebuilding a
//! [`ContingencyTable`](super::ContingencyTable), context tuples are ranked
//! once into dense ids and joint counts are accumulated in flat buffers.

use std::collections::HashMap;

/// Dense ranking of row keys in order of first appearance.
pub(crate) fn dense_rank<I: IntoIterator<Item = u64>>(keys: I) -> (Vec<u32>, usize) {
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let codes = keys
        .into_iter()
        .map(|k| {
            let next = ids.len() as u32;
            *ids.entry(k).or_insert(next)
        })
        .collect();
    (codes, ids.len())
}

/// `c log2 c` lookup table for counts up to the row count.
#[derive(Debug, Clone)]
pub(crate) struct CountEntropy {
    xlogx: Vec<f64>,
    n: usize,
}

impl CountEntropy {
    pub(crate) fn new(n: usize) -> Self {
        let xlogx = (0..=n)
            .map(|c| if c < 2 { 0.0 } else { c as f64 * (c as f64).log2() })
            .collect();
        Self { xlogx, n }
    }

    /// Plug-in entropy of counts summing to `n`.
    pub(crate) fn entropy(&self, counts: &[u32]) -> f64 {
        let s: f64 = counts.iter().map(|&c| self.xlogx[c as usize]).sum();
        let n = self.n as f64;
        (n.log2() - s / n).max(0.0)
    }

    /// Entropy of the joint `(target, context)` where `target < alphabet`
    /// and `context < n_ctx`, reusing `buf` for counts.
    pub(crate) fn joint_entropy(
        &self,
        target: &[u32],
        context: &[u32],
        alphabet: usize,
        n_ctx: usize,
        buf: &mut Vec<u32>,
    ) -> f64 {
        buf.clear();
        buf.resize(alphabet * n_ctx, 0);
        for (&t, &c) in target.iter().zip(context) {
            buf[c as usize * alphabet + t as usize] += 1;
        }
        self.entropy(buf)
    }

    pub(crate) fn column_entropy(&self, column: &[u32], n_values: usize, buf: &mut Vec<u32>) -> f64 {
        buf.clear();
        buf.resize(n_values, 0);
        for &v in column {
            buf[v as usize] += 1;
        }
        self.entropy(buf)
    }
}
