//! Permutation tests.
//!
//! All p-values use `(1 + exceedances) / (n_perm + 1)`, so they are never
//! zero. Surrogate `i` shuffles with a generator seeded from `(seed, i)` and
//! results are identical under any rayon thread count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::StateVectorSeries;
use crate::error::{Error, Result};
use crate::info::coded::{dense_rank, CountEntropy};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Greater,
    Less,
    #[default]
    TwoSided,
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Tail::Greater),
            "less" => Ok(Tail::Less),
            "two_sided" | "two-sided" => Ok(Tail::TwoSided),
            other => Err(Error::InvalidConfig(format!(
                "unknown tail '{other}' (expected greater, less or two_sided)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub observed_statistic: f64,
    pub p_value: f64,
    pub n_perm: usize,
    pub tail: Tail,
    pub seed: u64,
}

fn p_value(hits: usize, n_perm: usize) -> f64 {
    (hits + 1) as f64 / (n_perm + 1) as f64
}

fn is_extreme(surrogate: f64, observed: f64, tail: Tail, tol: f64) -> bool {
    match tail {
        Tail::Greater => surrogate >= observed - tol,
        Tail::Less => surrogate <= observed + tol,
        Tail::TwoSided => surrogate.abs() >= observed.abs() - tol,
    }
}

fn check_n_perm(n_perm: usize) -> Result<()> {
    if n_perm == 0 {
        Err(Error::InvalidConfig("n_perm must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Test the plug-in AIS of `series` (MI between target and past vector)
/// against target-column permutations. One-sided, upper tail.
pub fn test_final_ais(series: &StateVectorSeries, n_perm: usize, seed: u64) -> Result<PermutationTestResult> {
    check_n_perm(n_perm)?;
    if series.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = series.len();
    let m = series.alphabet_size();
    let kernel = CountEntropy::new(n);

    let mut past = vec![0u32; n];
    let mut n_past = 1usize;
    for (j, _) in series.lags().iter().enumerate() {
        let (codes, k) = dense_rank(
            past.iter()
                .enumerate()
                .map(|(i, &c)| c as u64 * m as u64 + series.past(i)[j] as u64),
        );
        past = codes;
        n_past = k;
    }
    let mut buf = Vec::new();
    let h_target = kernel.column_entropy(series.targets(), m, &mut buf);
    let h_past = kernel.column_entropy(&past, n_past, &mut buf);
    let mi = |target: &[u32], buf: &mut Vec<u32>| {
        h_target + h_past - kernel.joint_entropy(target, &past, m, n_past, buf)
    };

    let observed = mi(series.targets(), &mut buf);
    let targets = series.targets();
    let hits = (0..n_perm)
        .into_par_iter()
        .map_init(
            || (Vec::new(), targets.to_vec()),
            |(buf, shuffled), i| {
                shuffled.copy_from_slice(targets);
                shuffled.shuffle(&mut rng(derive_seed(seed, i as u64)));
                mi(shuffled, buf)
            },
        )
        .filter(|&s| is_extreme(s, observed, Tail::Greater, 1e-12))
        .count();

    Ok(PermutationTestResult {
        observed_statistic: observed,
        p_value: p_value(hits, n_perm),
        n_perm,
        tail: Tail::Greater,
        seed,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Permutation test for a difference in means, `mean(a) - mean(b)`.
/// Surrogates reshuffle the pooled values into groups of the original
/// sizes.
pub fn independent_samples_permutation_test(
    group_a: &[f64],
    group_b: &[f64],
    n_perm: usize,
    tail: Tail,
    seed: u64,
) -> Result<PermutationTestResult> {
    check_n_perm(n_perm)?;
    if group_a.is_empty() {
        return Err(Error::EmptyGroup("a".into()));
    }
    if group_b.is_empty() {
        return Err(Error::EmptyGroup("b".into()));
    }
    let na = group_a.len();
    let pooled: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let observed = mean(group_a) - mean(group_b);
    let scale = pooled.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-12 * scale;

    let hits = (0..n_perm)
        .into_par_iter()
        .map_init(
            || pooled.clone(),
            |shuffled, i| {
                shuffled.copy_from_slice(&pooled);
                shuffled.shuffle(&mut rng(derive_seed(seed, i as u64)));
                mean(&shuffled[..na]) - mean(&shuffled[na..])
            },
        )
        .filter(|&s| is_extreme(s, observed, tail, tol))
        .count();

    Ok(PermutationTestResult {
        observed_statistic: observed,
        p_value: p_value(hits, n_perm),
        n_perm,
        tail,
        seed,
    })
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`; zero for a single value).
pub fn mean_sem(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mu = mean(values);
    let n = values.len() as f64;
    if values.len() < 2 {
        return Some((mu, 0.0));
    }
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mu, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed, PastState};
    use crate::sequence::SymbolSequence;

    #[test]
    fn identical_groups() {
        let a = [1.0, 2.5, 3.0];
        let r = independent_samples_permutation_test(&a, &a, 500, Tail::TwoSided, 1).unwrap();
        assert_eq!(r.observed_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_group() {
        assert!(matches!(
            independent_samples_permutation_test(&[], &[1.0], 10, Tail::TwoSided, 0),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn seeded_rerun_is_identical() {
        let a = [0.3, 0.9, 0.4, 0.7];
        let b = [0.1, 0.5, 0.2];
        let r1 = independent_samples_permutation_test(&a, &b, 999, Tail::Greater, 42).unwrap();
        let r2 = independent_samples_permutation_test(&a, &b, 999, Tail::Greater, 42).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.p_value >= 1.0 / 1000.0 && r1.p_value <= 1.0);
    }

    #[test]
    fn relabeling_flips_sign_keeps_two_sided_p() {
        let a = [0.3, 0.9, 0.4, 0.7];
        let b = [0.1, 0.5, 0.2];
        let ab = independent_samples_permutation_test(&a, &b, 2000, Tail::TwoSided, 9).unwrap();
        let ba = independent_samples_permutation_test(&b, &a, 2000, Tail::TwoSided, 9).unwrap();
        assert_eq!(ab.observed_statistic, -ba.observed_statistic);
        // Both use the same permutations of differently ordered pools, so the
        // p-values agree only in distribution; they must be close.
        assert!((ab.p_value - ba.p_value).abs() < 0.05);
    }

    #[test]
    fn final_ais_cycle_and_constant() {
        let cyc = SymbolSequence::new((0..201).map(|i| i % 4).collect(), 4).unwrap();
        let s = embed(&cyc, &PastState::full(1), 1).unwrap();
        let r = test_final_ais(&s, 199, 3).unwrap();
        assert!((r.observed_statistic - 2.0).abs() < 1e-12);
        assert_eq!(r.p_value, 1.0 / 200.0);

        let flat = SymbolSequence::new(vec![2; 100], 4).unwrap();
        let s = embed(&flat, &PastState::full(2), 2).unwrap();
        let r = test_final_ais(&s, 199, 3).unwrap();
        assert!(r.observed_statistic.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn sem() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sem(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_sem(&[]), None);
    }
}
