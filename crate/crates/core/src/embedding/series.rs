use super::PastState;
use crate::error::{Error, Result};
use crate::info::ContingencyTable;
use crate::sequence::SymbolSequence;

/// Rows `(x_t, (x_{t-l})_{l in lags})` of an embedded sequence.
///
/// Row `i` corresponds to `t = offset + i` (0-based), so every series built
/// from the same sequence and offset covers exactly the same targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVectorSeries {
    targets: Vec<u32>,
    past: Vec<u32>,
    lags: Vec<usize>,
    offset: usize,
    source_length: usize,
    alphabet_size: usize,
}

impl StateVectorSeries {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    /// Past vector of row `i`, one entry per lag in ascending lag order.
    pub fn past(&self, i: usize) -> &[u32] {
        let w = self.lags.len();
        &self.past[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        (0..self.len()).map(move |i| (self.targets[i], self.past(i)))
    }

    /// Column of `x_{t-lag}` values, if `lag` is part of this series.
    pub fn past_column(&self, lag: usize) -> Option<Vec<u32>> {
        let j = self.lags.iter().position(|&l| l == lag)?;
        let w = self.lags.len();
        Some((0..self.len()).map(|i| self.past[i * w + j]).collect())
    }

    /// Joint table with the target on axis 0 and lag `lags[j]` on axis `j + 1`.
    pub fn table(&self) -> Result<ContingencyTable> {
        let w = self.lags.len() + 1;
        let mut flat = Vec::with_capacity(self.len() * w);
        for (t, p) in self.rows() {
            flat.push(t);
            flat.extend_from_slice(p);
        }
        let dims = vec![self.alphabet_size; w];
        ContingencyTable::from_iter_samples(flat.chunks(w), &dims)
    }
}

/// Embed `seq` with the given past state, dropping the first `offset`
/// symbols as targets.
pub fn embed(seq: &SymbolSequence, lags: &PastState, offset: usize) -> Result<StateVectorSeries> {
    let n = seq.len();
    if n <= offset {
        return Err(Error::SequenceTooShort {
            length: n,
            required: offset + 1,
        });
    }
    if let Some(&lag) = lags.lags().iter().find(|&&l| l > offset) {
        return Err(Error::InvalidLag { lag, k_max: offset });
    }
    let x = seq.symbols();
    let rows = n - offset;
    let mut past = Vec::with_capacity(rows * lags.len());
    for t in offset..n {
        past.extend(lags.lags().iter().map(|&l| x[t - l]));
    }
    Ok(StateVectorSeries {
        targets: x[offset..].to_vec(),
        past,
        lags: lags.lags().to_vec(),
        offset,
        source_length: n,
        alphabet_size: seq.alphabet_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[u32], m: usize) -> SymbolSequence {
        SymbolSequence::new(v.to_vec(), m).unwrap()
    }

    #[test]
    fn lag_one() {
        let s = embed(&seq(&[0, 1, 2, 3, 0], 4), &PastState::new(vec![1], 1).unwrap(), 1).unwrap();
        let rows: Vec<(u32, Vec<u32>)> = s.rows().map(|(t, p)| (t, p.to_vec())).collect();
        assert_eq!(rows, vec![(1, vec![0]), (2, vec![1]), (3, vec![2]), (0, vec![3])]);
    }

    #[test]
    fn lags_one_two() {
        let s = embed(&seq(&[0, 1, 2, 3, 0], 4), &PastState::new(vec![1, 2], 2).unwrap(), 2).unwrap();
        let rows: Vec<(u32, Vec<u32>)> = s.rows().map(|(t, p)| (t, p.to_vec())).collect();
        assert_eq!(rows, vec![(2, vec![1, 0]), (3, vec![2, 1]), (0, vec![3, 2])]);
    }

    #[test]
    fn fixed_offset_row_count() {
        let x = seq(&[0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0], 2);
        let a = embed(&x, &PastState::new(vec![1], 5).unwrap(), 5).unwrap();
        let b = embed(&x, &PastState::full(5), 5).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), 7);
        assert_eq!(a.targets(), b.targets());
    }

    #[test]
    fn too_short() {
        let x = seq(&[0, 1], 2);
        assert!(matches!(
            embed(&x, &PastState::empty(2), 2),
            Err(Error::SequenceTooShort { .. })
        ));
        assert!(matches!(
            embed(&x, &PastState::new(vec![2], 2).unwrap(), 1),
            Err(Error::InvalidLag { .. })
        ));
    }
}
