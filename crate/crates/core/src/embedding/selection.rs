//! Greedy forward selection of past variables.
//!
//! At every step each remaining lag is scored by its conditional mutual
//! information with the target given the lags already chosen. The best
//! score is tested against the distribution of the *maximum* score over all
//! remaining candidates under target-column permutation, which controls the
//! family-wise error across candidates. The search stops at the first
//! candidate that is not significant.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{embed, EmbeddingConfig, PastState, StateVectorSeries};
use crate::error::{Error, Result};
use crate::info::coded::{dense_rank, CountEntropy};
use crate::seed::{derive_seed, rng};
use crate::sequence::SymbolSequence;

/// Surrogate statistics within this distance of the observed value count as
/// ties.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

struct Candidate {
    lag: usize,
    /// Dense id of the (selected, candidate) context per row.
    context: Vec<u32>,
    n_context: usize,
    h_context: f64,
}

/// Precomputed columns for scoring candidates against one selected set.
pub struct SelectionContext {
    target: Vec<u32>,
    alphabet: usize,
    selected: Vec<u32>,
    n_selected: usize,
    h_selected: f64,
    candidates: Vec<Candidate>,
    kernel: CountEntropy,
}

impl SelectionContext {
    /// `series` must contain every lag in `selected` and `candidates`.
    pub fn new(series: &StateVectorSeries, selected: &[usize], candidates: &[usize]) -> Result<Self> {
        let n = series.len();
        let m = series.alphabet_size() as u64;
        let kernel = CountEntropy::new(n);
        let column = |lag: usize| {
            series.past_column(lag).ok_or(Error::InvalidLag {
                lag,
                k_max: series.offset(),
            })
        };

        let mut sel_codes = vec![0u32; n];
        let mut n_sel = 1usize;
        for &lag in selected {
            let col = column(lag)?;
            let (codes, k) = dense_rank(sel_codes.iter().zip(&col).map(|(&s, &x)| s as u64 * m + x as u64));
            sel_codes = codes;
            n_sel = k;
        }
        let mut buf = Vec::new();
        let h_selected = kernel.column_entropy(&sel_codes, n_sel, &mut buf);

        let candidates = candidates
            .iter()
            .map(|&lag| {
                let col = column(lag)?;
                let (context, n_context) =
                    dense_rank(sel_codes.iter().zip(&col).map(|(&s, &x)| s as u64 * m + x as u64));
                let h_context = kernel.column_entropy(&context, n_context, &mut buf);
                Ok(Candidate {
                    lag,
                    context,
                    n_context,
                    h_context,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            target: series.targets().to_vec(),
            alphabet: series.alphabet_size(),
            selected: sel_codes,
            n_selected: n_sel,
            h_selected,
            candidates,
            kernel,
        })
    }

    pub fn candidate_lags(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.lag).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.target.len()
    }

    /// Plug-in `I(target; x_{t-lag} | selected)` for each candidate.
    pub fn cmi_values(&self) -> Vec<f64> {
        let mut buf = Vec::new();
        self.scores(&self.target, &mut buf)
    }

    fn scores(&self, target: &[u32], buf: &mut Vec<u32>) -> Vec<f64> {
        let m = self.alphabet;
        let h_ts = self
            .kernel
            .joint_entropy(target, &self.selected, m, self.n_selected, buf);
        self.candidates
            .iter()
            .map(|c| {
                let h_tcs = self.kernel.joint_entropy(target, &c.context, m, c.n_context, buf);
                h_ts + c.h_context - h_tcs - self.h_selected
            })
            .collect()
    }

    /// Maximum candidate score for each of `n_perm` target permutations.
    /// Surrogate `i` is seeded from `(seed, i)`, so the result does not
    /// depend on how the loop is scheduled.
    pub fn surrogate_maxima(&self, n_perm: usize, seed: u64) -> Vec<f64> {
        (0..n_perm)
            .into_par_iter()
            .map_init(
                || (Vec::new(), self.target.clone()),
                |(buf, shuffled), i| {
                    shuffled.copy_from_slice(&self.target);
                    shuffled.shuffle(&mut rng(derive_seed(seed, i as u64)));
                    self.scores(shuffled, buf)
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max)
                },
            )
            .collect()
    }
}

/// Permutation p-value of `observed_max_cmi` against the surrogate maximum
/// over all candidates in `context`: `(1 + #{max >= observed}) / (n_perm + 1)`.
pub fn max_statistic_test(
    observed_max_cmi: f64,
    context: &SelectionContext,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if n_perm == 0 {
        return Err(Error::InvalidConfig("n_perm must be at least 1".into()));
    }
    let exceed = context
        .surrogate_maxima(n_perm, seed)
        .into_iter()
        .filter(|&s| s >= observed_max_cmi - TIE_TOLERANCE)
        .count();
    Ok((exceed + 1) as f64 / (n_perm + 1) as f64)
}

/// One greedy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    /// Lags selected before this step.
    pub conditioning: Vec<usize>,
    /// `(lag, cmi)` for every remaining candidate, in lag order.
    pub candidates: Vec<(usize, f64)>,
    pub best_lag: usize,
    pub best_cmi: f64,
    pub p_value: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    /// Embedded rows used by every test in this run.
    pub sample_count: usize,
}

/// Greedy forward selection of a past state for `seq`.
///
/// All candidates are scored on the embedding at offset `k_max`, so every
/// test uses the same rows.
pub fn optimize_past_state(
    seq: &SymbolSequence,
    cfg: &EmbeddingConfig,
) -> Result<(PastState, SelectionTrace)> {
    cfg.validate()?;
    if seq.len() < cfg.min_sequence_length() {
        return Err(Error::SequenceTooShort {
            length: seq.len(),
            required: cfg.min_sequence_length(),
        });
    }
    let series = embed(seq, &PastState::full(cfg.k_max), cfg.k_max)?;
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (1..=cfg.k_max).collect();
    let mut steps = Vec::new();

    while !remaining.is_empty() {
        let context = SelectionContext::new(&series, &selected, &remaining)?;
        let scores = context.cmi_values();
        let (best_idx, best_cmi) = scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        let best_lag = remaining[best_idx];
        let step_seed = derive_seed(cfg.seed, steps.len() as u64);
        let p_value = max_statistic_test(best_cmi, &context, cfg.n_perm, step_seed)?;
        let accepted = p_value <= cfg.alpha && best_cmi > 0.0;
        steps.push(SelectionStep {
            conditioning: selected.clone(),
            candidates: remaining.iter().copied().zip(scores).collect(),
            best_lag,
            best_cmi,
            p_value,
            accepted,
        });
        if !accepted {
            break;
        }
        selected.push(best_lag);
        remaining.remove(best_idx);
    }

    let past = PastState::new(selected, cfg.k_max)?;
    Ok((
        past,
        SelectionTrace {
            steps,
            sample_count: series.len(),
        },
    ))
}
