use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Empirical joint counts over symbol tuples.
///
/// Only occupied cells are stored. Keys are kept in a `BTreeMap` so every
/// sum over cells runs in the same order, which keeps floating-point
/// results reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    dims: Vec<usize>,
    cells: BTreeMap<Vec<u32>, u64>,
    total: u64,
}

impl ContingencyTable {
    /// Tally `samples`, each of which must have one coordinate per axis with
    /// coordinate `i` in `0..dims[i]`.
    pub fn from_samples<S: AsRef<[u32]>>(samples: &[S], dims: &[usize]) -> Result<Self> {
        Self::from_iter_samples(samples.iter().map(AsRef::as_ref), dims)
    }

    pub(crate) fn from_iter_samples<'a, I>(samples: I, dims: &[usize]) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        if dims.contains(&0) {
            return Err(Error::EmptyAlphabet);
        }
        let mut cells = BTreeMap::new();
        let mut total = 0u64;
        for (index, sample) in samples.into_iter().enumerate() {
            if sample.len() != dims.len() {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dims.len(),
                    got: sample.len(),
                });
            }
            for (axis, (&s, &d)) in sample.iter().zip(dims).enumerate() {
                if s as usize >= d {
                    return Err(Error::SymbolOutOfRange {
                        symbol: s,
                        position: axis,
                        alphabet_size: d,
                    });
                }
            }
            *cells.entry(sample.to_vec()).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::NoSamples);
        }
        Ok(Self {
            dims: dims.to_vec(),
            cells,
            total,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_axes(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count in one cell; unobserved cells are zero.
    pub fn count(&self, cell: &[u32]) -> u64 {
        self.cells.get(cell).copied().unwrap_or(0)
    }

    /// Occupied cells in key order.
    pub fn cells(&self) -> impl Iterator<Item = (&[u32], u64)> {
        self.cells.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Counts of the marginal over `axes`, keyed by the coordinates of those
    /// axes in ascending axis order. An empty axis set yields the single
    /// empty key holding the total.
    pub fn marginal(&self, axes: &[usize]) -> Result<BTreeMap<Vec<u32>, u64>> {
        let axes = self.canonical_axes(axes)?;
        let mut out = BTreeMap::new();
        for (key, &count) in &self.cells {
            let projected: Vec<u32> = axes.iter().map(|&a| key[a]).collect();
            *out.entry(projected).or_insert(0) += count;
        }
        Ok(out)
    }

    /// Number of occupied cells of the marginal over `axes`.
    pub fn occupied(&self, axes: &[usize]) -> Result<usize> {
        Ok(self.marginal(axes)?.len())
    }

    /// Number of possible cells of the marginal over `axes`.
    pub fn cardinality(&self, axes: &[usize]) -> Result<f64> {
        let axes = self.canonical_axes(axes)?;
        Ok(axes.iter().map(|&a| self.dims[a] as f64).product())
    }

    fn canonical_axes(&self, axes: &[usize]) -> Result<Vec<usize>> {
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::OverlappingAxes { axis: w[0] });
            }
        }
        if let Some(&axis) = sorted.iter().find(|&&a| a >= self.dims.len()) {
            return Err(Error::AxisOutOfRange {
                axis,
                n_axes: self.dims.len(),
            });
        }
        Ok(sorted)
    }
}

/// Build the contingency table of `samples` over the given per-axis
/// cardinalities.
pub fn empirical_distribution<S: AsRef<[u32]>>(
    samples: &[S],
    dims: &[usize],
) -> Result<ContingencyTable> {
    ContingencyTable::from_samples(samples, dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_observation() {
        let t = empirical_distribution(&[[0u32, 1]], &[2, 2]).unwrap();
        assert_eq!(t.count(&[0, 1]), 1);
        assert_eq!(t.count(&[1, 1]), 0);
        assert_eq!(t.total(), 1);
    }

    #[test]
    fn direct_tally() {
        let t = empirical_distribution(&[[0u32], [0], [1]], &[2]).unwrap();
        assert_eq!(t.count(&[0]), 2);
        assert_eq!(t.count(&[1]), 1);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn uniform_tally() {
        let samples: Vec<[u32; 2]> = (0..8).map(|i| [(i & 1) as u32, ((i >> 1) & 1) as u32]).collect();
        let t = empirical_distribution(&samples, &[2, 2]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(t.count(&[a, b]), 2);
            }
        }
        assert_eq!(t.total(), 8);
    }

    #[test]
    fn errors() {
        let empty: [[u32; 1]; 0] = [];
        assert_eq!(empirical_distribution(&empty, &[2]), Err(Error::NoSamples));
        assert!(matches!(
            empirical_distribution(&[[2u32]], &[2]),
            Err(Error::SymbolOutOfRange { .. })
        ));
        assert!(matches!(
            empirical_distribution(&[vec![0u32, 0]], &[2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn marginal_sums_to_total() {
        let samples = [[0u32, 1, 1], [1, 1, 0], [0, 0, 1], [0, 1, 1]];
        let t = empirical_distribution(&samples, &[2, 2, 2]).unwrap();
        let m = t.marginal(&[2, 0]).unwrap();
        assert_eq!(m.values().sum::<u64>(), 4);
        assert_eq!(m[&vec![0, 1]], 3);
        assert_eq!(t.marginal(&[]).unwrap()[&vec![]], 4);
        assert!(t.marginal(&[3]).is_err());
    }
}
