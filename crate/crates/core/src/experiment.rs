//! Per-trial AIS analysis and per-participant condition comparisons.
//!
//! A comparison re-estimates every trial with the participant's union past
//! state on scanpaths truncated to a common length, so all trials share the
//! same sample count and past-state dimensionality before the groups are
//! tested against each other.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed, optimize_past_state, EmbeddingConfig, PastState, SelectionTrace};
use crate::error::{Error, Result};
use crate::gaze::Scanpath;
use crate::info::{active_information_storage, next_symbol_entropy, InfoEstimate, QuantityKind};
use crate::seed::derive_seed;
use crate::sequence::SymbolSequence;
use crate::stats::{independent_samples_permutation_test, mean_sem, PermutationTestResult, Tail};

const FINAL_TEST_STREAM: u64 = 0xA15_0000;
const CONTRAST_STREAM: u64 = 0xC0_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: String,
    pub participant_id: String,
    pub condition: String,
    pub selected_lags: PastState,
    pub ais: InfoEstimate,
    /// `H(X_t)` over the embedded target rows.
    pub entropy_next: InfoEstimate,
    /// Corrected AIS over corrected `H(X_t)`, clamped to `[0, 1]`; `None`
    /// when `H(X_t) = 0`.
    pub normalized_ais: Option<f64>,
    pub normalized_clamped: bool,
    pub ais_p_value: f64,
    pub sample_count: usize,
    pub trace: SelectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Analyzed(Box<TrialResult>),
    Skipped {
        trial_id: String,
        participant_id: String,
        condition: String,
        length: usize,
        required: usize,
    },
}

impl TrialOutcome {
    pub fn result(&self) -> Option<&TrialResult> {
        match self {
            TrialOutcome::Analyzed(r) => Some(r),
            TrialOutcome::Skipped { .. } => None,
        }
    }

    pub fn trial_id(&self) -> &str {
        match self {
            TrialOutcome::Analyzed(r) => &r.trial_id,
            TrialOutcome::Skipped { trial_id, .. } => trial_id,
        }
    }
}

/// Normalized AIS and whether it had to be clamped.
fn normalize(ais: &InfoEstimate, entropy: &InfoEstimate) -> (Option<f64>, bool) {
    if entropy.plugin_value <= 0.0 || entropy.corrected_value <= 0.0 {
        return (None, false);
    }
    let raw = ais.corrected_value / entropy.corrected_value;
    let clamped = raw.clamp(0.0, 1.0);
    (Some(clamped), clamped != raw)
}

/// Optimize the past state of one scanpath, then estimate its
/// bias-corrected AIS, `H(X_t)` and the significance of the AIS.
///
/// Scanpaths too short for the embedding come back as
/// [`TrialOutcome::Skipped`].
pub fn analyze_trial(scanpath: &Scanpath, cfg: &EmbeddingConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let seq = &scanpath.sequence;
    if seq.len() < cfg.min_sequence_length() {
        return Ok(TrialOutcome::Skipped {
            trial_id: scanpath.trial_id.clone(),
            participant_id: scanpath.participant_id.clone(),
            condition: scanpath.condition.clone(),
            length: seq.len(),
            required: cfg.min_sequence_length(),
        });
    }
    let (lags, trace) = optimize_past_state(seq, cfg)?;
    let entropy_next = next_symbol_entropy(seq, cfg.k_max)?;
    let n = entropy_next.sample_count;
    let (ais, ais_p_value) = if lags.is_empty() {
        (InfoEstimate::zero(QuantityKind::MutualInformation, n), 1.0)
    } else {
        let ais = active_information_storage(seq, &lags, cfg.k_max)?;
        let series = embed(seq, &lags, cfg.k_max)?;
        let test = crate::stats::test_final_ais(
            &series,
            cfg.n_perm,
            derive_seed(cfg.seed, FINAL_TEST_STREAM),
        )?;
        (ais, test.p_value)
    };
    let (normalized_ais, normalized_clamped) = normalize(&ais, &entropy_next);
    Ok(TrialOutcome::Analyzed(Box::new(TrialResult {
        trial_id: scanpath.trial_id.clone(),
        participant_id: scanpath.participant_id.clone(),
        condition: scanpath.condition.clone(),
        selected_lags: lags,
        ais,
        entropy_next,
        normalized_ais,
        normalized_clamped,
        ais_p_value,
        sample_count: n as usize,
        trace,
    })))
}

fn canonical_order(scanpaths: &[Scanpath]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scanpaths.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&scanpaths[a], &scanpaths[b]);
        (&x.participant_id, &x.condition, &x.trial_id).cmp(&(&y.participant_id, &y.condition, &y.trial_id))
    });
    order
}

/// Analyze many trials, in parallel, returning outcomes sorted by
/// `(participant, condition, trial)`. Trial `i` of the sorted order uses
/// seed `derive_seed(cfg.seed, i)`.
pub fn analyze_trials(scanpaths: &[Scanpath], cfg: &EmbeddingConfig) -> Result<Vec<TrialOutcome>> {
    canonical_order(scanpaths)
        .into_par_iter()
        .enumerate()
        .map(|(rank, idx)| {
            let trial_cfg = EmbeddingConfig {
                seed: derive_seed(cfg.seed, rank as u64),
                ..*cfg
            };
            analyze_trial(&scanpaths[idx], &trial_cfg)
        })
        .collect()
}

/// Union of the selected lag sets.
pub fn union_past_state(results: &[TrialResult]) -> Result<PastState> {
    let first = results.first().ok_or(Error::NoSamples)?;
    Ok(results
        .iter()
        .fold(PastState::empty(first.selected_lags.k_max()), |acc, r| acc.union(&r.selected_lags)))
}

/// Truncate every sequence to the shortest length by dropping symbols from
/// the beginning.
pub fn equalize_samples(scanpaths: &[SymbolSequence]) -> Vec<SymbolSequence> {
    let Some(min) = scanpaths.iter().map(SymbolSequence::len).min() else {
        return Vec::new();
    };
    scanpaths.iter().map(|s| s.suffix(min)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

impl MeanSem {
    fn of(values: &[f64]) -> Option<Self> {
        mean_sem(values).map(|(mean, sem)| Self {
            mean,
            sem,
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub n_trials: usize,
    pub ais: Option<MeanSem>,
    pub entropy: Option<MeanSem>,
    pub normalized_ais: Option<MeanSem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AGreater,
    BGreater,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub measure: String,
    /// `mean(a) - mean(b)`.
    pub observed_difference: f64,
    pub direction: Direction,
    pub test: PermutationTestResult,
}

/// One trial re-estimated with the union past state on the equalized
/// scanpath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizedTrial {
    pub trial_id: String,
    pub condition: String,
    pub ais: InfoEstimate,
    pub entropy_next: InfoEstimate,
    pub normalized_ais: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantComparison {
    pub participant_id: String,
    pub condition_a: String,
    pub condition_b: String,
    pub union_lags: PastState,
    /// Symbols kept per trial after equalization.
    pub equalized_length: usize,
    /// Embedded rows per trial after equalization.
    pub equalized_sample_count: usize,
    pub summary_a: ConditionSummary,
    pub summary_b: ConditionSummary,
    pub ais: Contrast,
    pub entropy: Contrast,
    /// `None` if a condition has no trial with defined normalized AIS.
    pub normalized_ais: Option<Contrast>,
    pub trials: Vec<EqualizedTrial>,
    /// Trial ids excluded from the comparison, with the reason.
    pub excluded: Vec<(String, String)>,
    pub per_trial: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub n_perm: usize,
    pub tail: Tail,
    /// Labels of the two conditions, as `(a, b)`. When absent the two labels
    /// present in the data are used in sorted order.
    pub conditions: Option<(String, String)>,
    pub min_trials: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            n_perm: 5000,
            tail: Tail::TwoSided,
            conditions: None,
            min_trials: 2,
        }
    }
}

fn resolve_conditions(trials: &[Scanpath], cmp: &CompareConfig) -> Result<(String, String)> {
    if let Some((a, b)) = &cmp.conditions {
        return Ok((a.clone(), b.clone()));
    }
    let labels: BTreeSet<&str> = trials.iter().map(|t| t.condition.as_str()).collect();
    let labels: Vec<&str> = labels.into_iter().collect();
    match labels.as_slice() {
        [a, b] => Ok((a.to_string(), b.to_string())),
        _ => Err(Error::InvalidConfig(format!(
            "expected exactly two conditions, found {labels:?}"
        ))),
    }
}

fn contrast(measure: &str, a: &[f64], b: &[f64], cmp: &CompareConfig, seed: u64) -> Result<Contrast> {
    let test = independent_samples_permutation_test(a, b, cmp.n_perm, cmp.tail, seed)?;
    let d = test.observed_statistic;
    let direction = if d > 0.0 {
        Direction::AGreater
    } else if d < 0.0 {
        Direction::BGreater
    } else {
        Direction::Equal
    };
    Ok(Contrast {
        measure: measure.to_string(),
        observed_difference: d,
        direction,
        test,
    })
}

/// Compare the two conditions of one participant's trials.
pub fn compare_conditions(
    trials: &[Scanpath],
    cfg: &EmbeddingConfig,
    cmp: &CompareConfig,
) -> Result<ParticipantComparison> {
    cfg.validate()?;
    let participant_id = trials.first().ok_or(Error::NoSamples)?.participant_id.clone();
    if let Some(other) = trials.iter().find(|t| t.participant_id != participant_id) {
        return Err(Error::InvalidConfig(format!(
            "trials of several participants ('{participant_id}', '{}') passed to one comparison",
            other.participant_id
        )));
    }
    let (cond_a, cond_b) = resolve_conditions(trials, cmp)?;
    let relevant: Vec<Scanpath> = trials
        .iter()
        .filter(|t| t.condition == cond_a || t.condition == cond_b)
        .cloned()
        .collect();

    let per_trial = analyze_trials(&relevant, cfg)?;
    let mut excluded: Vec<(String, String)> = per_trial
        .iter()
        .filter_map(|o| match o {
            TrialOutcome::Skipped { trial_id, length, required, .. } => Some((
                trial_id.clone(),
                format!("scanpath length {length} below minimum {required}"),
            )),
            TrialOutcome::Analyzed(_) => None,
        })
        .collect();
    let analyzed: Vec<&TrialResult> = per_trial.iter().filter_map(TrialOutcome::result).collect();

    for cond in [&cond_a, &cond_b] {
        let got = analyzed.iter().filter(|r| &r.condition == cond).count();
        if got < cmp.min_trials.max(1) {
            return Err(Error::InsufficientTrials {
                condition: cond.clone(),
                got,
                required: cmp.min_trials.max(1),
            });
        }
    }

    let union_lags = analyzed
        .iter()
        .fold(PastState::empty(cfg.k_max), |acc, r| acc.union(&r.selected_lags));

    let by_id = |r: &TrialResult| {
        relevant
            .iter()
            .find(|s| s.trial_id == r.trial_id && s.condition == r.condition)
            .map(|s| s.sequence.clone())
            .expect("analysis results come from the relevant trials")
    };
    let sequences: Vec<SymbolSequence> = analyzed.iter().map(|r| by_id(r)).collect();
    let equalized = equalize_samples(&sequences);
    let equalized_length = equalized.first().map_or(0, SymbolSequence::len);

    let mut kept = Vec::new();
    for (r, seq) in analyzed.iter().zip(equalized) {
        if seq.len() < cfg.min_sequence_length() {
            excluded.push((
                r.trial_id.clone(),
                format!("equalized length {} below minimum {}", seq.len(), cfg.min_sequence_length()),
            ));
            continue;
        }
        let entropy_next = next_symbol_entropy(&seq, cfg.k_max)?;
        let ais = if union_lags.is_empty() {
            InfoEstimate::zero(QuantityKind::MutualInformation, entropy_next.sample_count)
        } else {
            active_information_storage(&seq, &union_lags, cfg.k_max)?
        };
        let (normalized_ais, _) = normalize(&ais, &entropy_next);
        kept.push(EqualizedTrial {
            trial_id: r.trial_id.clone(),
            condition: r.condition.clone(),
            ais,
            entropy_next,
            normalized_ais,
        });
    }
    for cond in [&cond_a, &cond_b] {
        let got = kept.iter().filter(|t| &t.condition == cond).count();
        if got < cmp.min_trials.max(1) {
            return Err(Error::InsufficientTrials {
                condition: cond.clone(),
                got,
                required: cmp.min_trials.max(1),
            });
        }
    }

    let values = |cond: &str, f: fn(&EqualizedTrial) -> Option<f64>| -> Vec<f64> {
        kept.iter().filter(|t| t.condition == cond).filter_map(f).collect()
    };
    let ais_of: fn(&EqualizedTrial) -> Option<f64> = |t| Some(t.ais.corrected_value);
    let h_of: fn(&EqualizedTrial) -> Option<f64> = |t| Some(t.entropy_next.corrected_value);
    let norm_of: fn(&EqualizedTrial) -> Option<f64> = |t| t.normalized_ais;

    let summary = |cond: &str| ConditionSummary {
        condition: cond.to_string(),
        n_trials: kept.iter().filter(|t| t.condition == cond).count(),
        ais: MeanSem::of(&values(cond, ais_of)),
        entropy: MeanSem::of(&values(cond, h_of)),
        normalized_ais: MeanSem::of(&values(cond, norm_of)),
    };

    let seed = |i: u64| derive_seed(cfg.seed, CONTRAST_STREAM + i);
    let ais = contrast("ais", &values(&cond_a, ais_of), &values(&cond_b, ais_of), cmp, seed(0))?;
    let entropy = contrast("entropy", &values(&cond_a, h_of), &values(&cond_b, h_of), cmp, seed(1))?;
    let (na, nb) = (values(&cond_a, norm_of), values(&cond_b, norm_of));
    let normalized_ais = if na.is_empty() || nb.is_empty() {
        None
    } else {
        Some(contrast("normalized_ais", &na, &nb, cmp, seed(2))?)
    };

    Ok(ParticipantComparison {
        participant_id,
        summary_a: summary(&cond_a),
        summary_b: summary(&cond_b),
        condition_a: cond_a,
        condition_b: cond_b,
        union_lags,
        equalized_length,
        equalized_sample_count: equalized_length.saturating_sub(cfg.k_max),
        ais,
        entropy,
        normalized_ais,
        trials: kept,
        excluded,
        per_trial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagHistogram {
    /// `counts[l - 1]` trials selected lag `l`.
    pub counts: Vec<usize>,
    pub n_trials: usize,
    pub n_nonempty: usize,
    pub n_with_lag_above_one: usize,
    /// Share of all trials with some selected lag above 1.
    pub fraction_above_one_all: Option<f64>,
    /// Share of trials with a nonempty selection that include a lag above 1.
    pub fraction_above_one_nonempty: Option<f64>,
}

pub fn lag_histogram(results: &[TrialResult], k_max: usize) -> LagHistogram {
    let mut counts = vec![0usize; k_max];
    let mut n_nonempty = 0;
    let mut n_above = 0;
    for r in results {
        for &l in r.selected_lags.lags() {
            if l >= 1 && l <= k_max {
                counts[l - 1] += 1;
            }
        }
        if !r.selected_lags.is_empty() {
            n_nonempty += 1;
        }
        if r.selected_lags.lags().iter().any(|&l| l >= 2) {
            n_above += 1;
        }
    }
    let frac = |den: usize| (den > 0).then(|| n_above as f64 / den as f64);
    LagHistogram {
        counts,
        n_trials: results.len(),
        n_nonempty,
        n_with_lag_above_one: n_above,
        fraction_above_one_all: frac(results.len()),
        fraction_above_one_nonempty: frac(n_nonempty),
    }
}
