//! Active information storage and gaze transition entropy of a sequence.

use std::collections::HashMap;

use super::estimate::{Estimator, InfoEstimate};
use crate::embedding::{embed, PastState};
use crate::error::{Error, Result};
use crate::sequence::SymbolSequence;

/// `I(X_t ; X^-_{t-1})` with the past state given by `lags`, over the rows
/// of the embedding at `offset`.
pub fn active_information_storage(
    seq: &SymbolSequence,
    lags: &PastState,
    offset: usize,
) -> Result<InfoEstimate> {
    Estimator::default().active_information_storage(seq, lags, offset)
}

/// `H(X_t)` over the embedded target rows at `offset`.
pub fn next_symbol_entropy(seq: &SymbolSequence, offset: usize) -> Result<InfoEstimate> {
    Estimator::default().next_symbol_entropy(seq, offset)
}

/// `H(X_t | X_{t-1})`.
pub fn gaze_transition_entropy(seq: &SymbolSequence) -> Result<InfoEstimate> {
    Estimator::default().gaze_transition_entropy(seq)
}

impl Estimator {
    pub fn active_information_storage(
        &self,
        seq: &SymbolSequence,
        lags: &PastState,
        offset: usize,
    ) -> Result<InfoEstimate> {
        if lags.is_empty() {
            return Err(Error::EmptyPastState);
        }
        let series = embed(seq, lags, offset)?;
        let table = series.table()?;
        let past: Vec<usize> = (1..=lags.len()).collect();
        self.mutual_information(&table, &[0], &past)
    }

    pub fn next_symbol_entropy(&self, seq: &SymbolSequence, offset: usize) -> Result<InfoEstimate> {
        let series = embed(seq, &PastState::empty(offset.max(1)), offset)?;
        self.entropy(&series.table()?, &[0])
    }

    pub fn gaze_transition_entropy(&self, seq: &SymbolSequence) -> Result<InfoEstimate> {
        if seq.len() < 2 {
            return Err(Error::SequenceTooShort {
                length: seq.len(),
                required: 2,
            });
        }
        let series = embed(seq, &PastState::full(1), 1)?;
        self.conditional_entropy(&series.table()?, &[0], &[1])
    }
}

/// Pointwise AIS `log2(p(x_t | past) / p(x_t))` for every embedded row.
/// The mean over rows is the plug-in AIS.
pub fn local_ais(seq: &SymbolSequence, lags: &PastState, offset: usize) -> Result<Vec<f64>> {
    if lags.is_empty() {
        return Err(Error::EmptyPastState);
    }
    let series = embed(seq, lags, offset)?;
    let n = series.len() as f64;
    let mut joint: HashMap<(u32, &[u32]), u64> = HashMap::new();
    let mut past: HashMap<&[u32], u64> = HashMap::new();
    let mut target = vec![0u64; seq.alphabet_size()];
    for (t, p) in series.rows() {
        *joint.entry((t, p)).or_insert(0) += 1;
        *past.entry(p).or_insert(0) += 1;
        target[t as usize] += 1;
    }
    Ok(series
        .rows()
        .map(|(t, p)| {
            let c_joint = joint[&(t, p)] as f64;
            let c_past = past[p] as f64;
            let c_target = target[t as usize] as f64;
            (c_joint * n / (c_past * c_target)).log2()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: Vec<u32>, m: usize) -> SymbolSequence {
        SymbolSequence::new(v, m).unwrap()
    }

    fn lag1() -> PastState {
        PastState::full(1)
    }

    #[test]
    fn cycle_ais_is_two_bits() {
        let s = seq((0..401).map(|i| i % 4).collect(), 4);
        let ais = active_information_storage(&s, &lag1(), 1).unwrap();
        assert!((ais.plugin_value - 2.0).abs() < 1e-12);
        let h = next_symbol_entropy(&s, 1).unwrap();
        assert!((ais.plugin_value / h.plugin_value - 1.0).abs() < 1e-12);
        for v in local_ais(&s, &lag1(), 1).unwrap() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        assert!(gaze_transition_entropy(&s).unwrap().plugin_value.abs() < 1e-12);
    }

    #[test]
    fn constant_sequence_has_no_storage() {
        let s = seq(vec![0; 50], 3);
        let ais = active_information_storage(&s, &lag1(), 1).unwrap();
        assert_eq!(ais.plugin_value, 0.0);
    }

    #[test]
    fn local_value_zero_when_transition_matches_marginal() {
        // Rows (target|past): (0|0),(1|0),(0|1),(1|1): p(x|past) = p(x) = 1/2.
        let s = seq(vec![0, 0, 1, 1, 0], 2);
        let local = local_ais(&s, &lag1(), 1).unwrap();
        assert_eq!(local.len(), 4);
        for v in local {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let s = seq(vec![0, 1, 0], 2);
        assert_eq!(
            active_information_storage(&s, &PastState::empty(1), 1),
            Err(Error::EmptyPastState)
        );
        assert!(gaze_transition_entropy(&seq(vec![1], 2)).is_err());
        assert!(active_information_storage(&s, &PastState::full(3), 3).is_err());
    }
}
