//! Plug-in estimators over a [`ContingencyTable`].
//!
//! Each quantity is a signed sum of marginal entropies of one shared table,
//! so identities such as `H(X|Y) = H(X,Y) - H(Y)` hold to rounding. The
//! small-sample correction is the same signed sum of per-term
//! Miller-Madow corrections `(R - 1) / (2 N ln 2)`.

use serde::{Deserialize, Serialize};

use super::table::ContingencyTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Entropy,
    ConditionalEntropy,
    MutualInformation,
    ConditionalMutualInformation,
}

/// An estimated information quantity in bits.
///
/// `corrected_value` is always `plugin_value + bias_correction`. For
/// entropies the correction is positive; for mutual information it is the
/// negated MI bias term and usually negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoEstimate {
    pub kind: QuantityKind,
    pub plugin_value: f64,
    pub bias_correction: f64,
    pub corrected_value: f64,
    pub sample_count: u64,
}

impl InfoEstimate {
    pub(crate) fn new(kind: QuantityKind, plugin_value: f64, bias_correction: f64, n: u64) -> Self {
        Self {
            kind,
            plugin_value,
            bias_correction,
            corrected_value: plugin_value + bias_correction,
            sample_count: n,
        }
    }

    /// The estimate of a quantity that is zero by definition (AIS without a
    /// past state).
    pub fn zero(kind: QuantityKind, n: u64) -> Self {
        Self::new(kind, 0.0, 0.0, n)
    }
}

/// How the number of relevant bins `R` in the bias correction is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCount {
    /// Number of occupied bins.
    #[default]
    Observed,
    /// Occupied bins plus the expected number of relevant bins that were
    /// missed: the Good-Turing missing mass `f1 / N` is spread evenly over the
    /// `k` empty bins and each counts with its probability of appearing in `N`
    /// draws, `R = R_obs + k (1 - (1 - f1 / (N k))^N)`.
    Bayesian,
}

/// Which quantity a bias correction is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity<'a> {
    /// Joint entropy over the given axes.
    Entropy(&'a [usize]),
    /// Mutual information between two axis sets.
    MutualInformation(&'a [usize], &'a [usize]),
}

/// Plug-in estimator with a configurable bias-correction baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Estimator {
    pub bin_count: BinCount,
}

fn check_nonempty(axes: &[usize]) -> Result<()> {
    if axes.is_empty() {
        Err(Error::EmptyAxisSet)
    } else {
        Ok(())
    }
}

fn check_disjoint(sets: &[&[usize]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(&axis) = a.iter().find(|x| b.contains(x)) {
                return Err(Error::OverlappingAxes { axis });
            }
        }
    }
    Ok(())
}

fn union(sets: &[&[usize]]) -> Vec<usize> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}

/// Plug-in entropy in bits from raw counts summing to `total`.
pub(crate) fn entropy_from_counts<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let n = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

impl Estimator {
    pub fn new(bin_count: BinCount) -> Self {
        Self { bin_count }
    }

    fn plugin_entropy(table: &ContingencyTable, axes: &[usize]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        let marginal = table.marginal(axes)?;
        Ok(entropy_from_counts(marginal.into_values(), table.total()))
    }

    /// Estimated number of relevant bins of the marginal over `axes`.
    pub fn relevant_bins(&self, table: &ContingencyTable, axes: &[usize]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(1.0);
        }
        let marginal = table.marginal(axes)?;
        let observed = marginal.len() as f64;
        match self.bin_count {
            BinCount::Observed => Ok(observed),
            BinCount::Bayesian => {
                let possible = table.cardinality(axes)?;
                let empty = possible - observed;
                let n = table.total() as f64;
                let singletons = marginal.values().filter(|&&c| c == 1).count() as f64;
                if empty <= 0.0 || singletons == 0.0 {
                    return Ok(observed);
                }
                let q = singletons / (n * empty);
                Ok(observed + empty * (1.0 - (1.0 - q).powf(n)))
            }
        }
    }

    fn entropy_correction(&self, table: &ContingencyTable, axes: &[usize]) -> Result<f64> {
        let r = self.relevant_bins(table, axes)?;
        Ok((r - 1.0) / (2.0 * table.total() as f64 * std::f64::consts::LN_2))
    }

    /// Signed sum of entropy terms: returns (plug-in value, correction).
    fn combine(&self, table: &ContingencyTable, terms: &[(f64, &[usize])]) -> Result<(f64, f64)> {
        let mut plugin = 0.0;
        let mut correction = 0.0;
        for &(sign, axes) in terms {
            plugin += sign * Self::plugin_entropy(table, axes)?;
            correction += sign * self.entropy_correction(table, axes)?;
        }
        Ok((plugin, correction))
    }

    pub fn entropy(&self, table: &ContingencyTable, axes: &[usize]) -> Result<InfoEstimate> {
        check_nonempty(axes)?;
        let (h, c) = self.combine(table, &[(1.0, axes)])?;
        Ok(InfoEstimate::new(QuantityKind::Entropy, h, c, table.total()))
    }

    pub fn conditional_entropy(
        &self,
        table: &ContingencyTable,
        target: &[usize],
        conditioning: &[usize],
    ) -> Result<InfoEstimate> {
        check_nonempty(target)?;
        check_disjoint(&[target, conditioning])?;
        let joint = union(&[target, conditioning]);
        let (h, c) = self.combine(table, &[(1.0, &joint), (-1.0, conditioning)])?;
        Ok(InfoEstimate::new(
            QuantityKind::ConditionalEntropy,
            h,
            c,
            table.total(),
        ))
    }

    pub fn mutual_information(
        &self,
        table: &ContingencyTable,
        a: &[usize],
        b: &[usize],
    ) -> Result<InfoEstimate> {
        check_nonempty(a)?;
        check_nonempty(b)?;
        check_disjoint(&[a, b])?;
        let joint = union(&[a, b]);
        let (i, c) = self.combine(table, &[(1.0, a), (1.0, b), (-1.0, &joint)])?;
        Ok(InfoEstimate::new(
            QuantityKind::MutualInformation,
            i,
            c,
            table.total(),
        ))
    }

    pub fn conditional_mutual_information(
        &self,
        table: &ContingencyTable,
        a: &[usize],
        b: &[usize],
        conditioning: &[usize],
    ) -> Result<InfoEstimate> {
        if conditioning.is_empty() {
            let mut est = self.mutual_information(table, a, b)?;
            est.kind = QuantityKind::ConditionalMutualInformation;
            return Ok(est);
        }
        check_nonempty(a)?;
        check_nonempty(b)?;
        check_disjoint(&[a, b, conditioning])?;
        let ac = union(&[a, conditioning]);
        let bc = union(&[b, conditioning]);
        let abc = union(&[a, b, conditioning]);
        let (i, c) = self.combine(
            table,
            &[(1.0, &ac), (1.0, &bc), (-1.0, &abc), (-1.0, conditioning)],
        )?;
        Ok(InfoEstimate::new(
            QuantityKind::ConditionalMutualInformation,
            i,
            c,
            table.total(),
        ))
    }

    /// Additive small-sample correction in bits for `quantity`.
    pub fn bias_correction(&self, table: &ContingencyTable, quantity: Quantity<'_>) -> Result<f64> {
        match quantity {
            Quantity::Entropy(axes) => {
                check_nonempty(axes)?;
                self.entropy_correction(table, axes)
            }
            Quantity::MutualInformation(a, b) => {
                check_nonempty(a)?;
                check_nonempty(b)?;
                check_disjoint(&[a, b])?;
                Ok(self.combine(table, &[(1.0, a), (1.0, b), (-1.0, &union(&[a, b]))])?.1)
            }
        }
    }
}

pub fn entropy(table: &ContingencyTable, axes: &[usize]) -> Result<InfoEstimate> {
    Estimator::default().entropy(table, axes)
}

pub fn conditional_entropy(
    table: &ContingencyTable,
    target: &[usize],
    conditioning: &[usize],
) -> Result<InfoEstimate> {
    Estimator::default().conditional_entropy(table, target, conditioning)
}

pub fn mutual_information(table: &ContingencyTable, a: &[usize], b: &[usize]) -> Result<InfoEstimate> {
    Estimator::default().mutual_information(table, a, b)
}

pub fn conditional_mutual_information(
    table: &ContingencyTable,
    a: &[usize],
    b: &[usize],
    conditioning: &[usize],
) -> Result<InfoEstimate> {
    Estimator::default().conditional_mutual_information(table, a, b, conditioning)
}

pub fn bias_correction(table: &ContingencyTable, quantity: Quantity<'_>) -> Result<f64> {
    Estimator::default().bias_correction(table, quantity)
}
