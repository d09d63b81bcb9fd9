//! Non-uniform embedding: choosing which past symbols form the past state.

mod selection;
mod series;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use selection::{
    max_statistic_test, optimize_past_state, SelectionContext, SelectionStep, SelectionTrace,
};
pub use series::{embed, StateVectorSeries};

/// A set of lags in `[1, k_max]`, kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPastState")]
pub struct PastState {
    lags: Vec<usize>,
    k_max: usize,
}

#[derive(Deserialize)]
struct RawPastState {
    lags: Vec<usize>,
    k_max: usize,
}

impl TryFrom<RawPastState> for PastState {
    type Error = Error;

    fn try_from(raw: RawPastState) -> Result<Self> {
        PastState::new(raw.lags, raw.k_max)
    }
}

impl PastState {
    /// Sorts and deduplicates `lags`; every lag must be in `[1, k_max]`.
    pub fn new(mut lags: Vec<usize>, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be positive".into()));
        }
        if let Some(&lag) = lags.iter().find(|&&l| l == 0 || l > k_max) {
            return Err(Error::InvalidLag { lag, k_max });
        }
        lags.sort_unstable();
        lags.dedup();
        Ok(Self { lags, k_max })
    }

    pub fn empty(k_max: usize) -> Self {
        Self {
            lags: Vec::new(),
            k_max,
        }
    }

    /// All lags `1..=k_max`.
    pub fn full(k_max: usize) -> Self {
        Self {
            lags: (1..=k_max).collect(),
            k_max,
        }
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.lags.binary_search(&lag).is_ok()
    }

    pub fn max_lag(&self) -> Option<usize> {
        self.lags.last().copied()
    }

    /// Set union; the result uses the larger `k_max`.
    pub fn union(&self, other: &PastState) -> PastState {
        let mut lags = self.lags.clone();
        lags.extend_from_slice(&other.lags);
        lags.sort_unstable();
        lags.dedup();
        PastState {
            lags,
            k_max: self.k_max.max(other.k_max),
        }
    }
}

/// Parameters of the greedy past-state search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub k_max: usize,
    pub alpha: f64,
    /// Surrogates per selection test.
    pub n_perm: usize,
    pub seed: u64,
    /// Trials with fewer embedded rows are rejected.
    pub min_rows: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            k_max: 5,
            alpha: 0.05,
            n_perm: 200,
            seed: 0,
            min_rows: 10,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        // The smallest attainable p-value is 1 / (n_perm + 1).
        if (self.n_perm as f64) + 1e-9 < 1.0 / self.alpha - 1.0 {
            return Err(Error::InvalidConfig(format!(
                "n_perm = {} cannot reach alpha = {}; need at least {}",
                self.n_perm,
                self.alpha,
                (1.0 / self.alpha - 1.0).ceil()
            )));
        }
        Ok(())
    }

    /// Shortest sequence the search accepts.
    pub fn min_sequence_length(&self) -> usize {
        self.k_max + self.min_rows.max(1)
    }
}
