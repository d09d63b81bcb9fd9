//! Order-k Markov chains with exactly computable AIS and GTE.
//!
//! Histories are written oldest symbol first. A history code is the base-`m`
//! number formed by its symbols, so for order 2 the history `(x_{t-2}, x_{t-1})`
//! has code `x_{t-2} * m + x_{t-1}`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::PastState;
use crate::error::{Error, Result};
use crate::seed::rng;
use crate::sequence::SymbolSequence;

pub const DEFAULT_BURN_IN: usize = 1000;
const RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// Order-k transition model over `alphabet_size` symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct MarkovSpec {
    order: usize,
    alphabet_size: usize,
    /// One probability vector per history code.
    transition: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    order: usize,
    alphabet_size: usize,
    transition: BTreeMap<String, Vec<f64>>,
}

impl TryFrom<RawSpec> for MarkovSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let m = raw.alphabet_size;
        if m == 0 {
            return Err(Error::InvalidMarkovSpec("alphabet_size must be at least 1".into()));
        }
        let n_hist = checked_pow(m, raw.order)?;
        let mut transition = vec![None; n_hist];
        for (key, probs) in raw.transition {
            let code = parse_history(&key, raw.order, m)?;
            if transition[code].replace(probs).is_some() {
                return Err(Error::InvalidMarkovSpec(format!("history '{key}' listed twice")));
            }
        }
        let transition = transition
            .into_iter()
            .enumerate()
            .map(|(code, p)| {
                p.ok_or_else(|| {
                    Error::InvalidMarkovSpec(format!(
                        "missing history '{}'",
                        history_key(code, raw.order, m)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MarkovSpec::new(raw.order, m, transition)
    }
}

impl From<MarkovSpec> for RawSpec {
    fn from(spec: MarkovSpec) -> Self {
        let transition = spec
            .transition
            .iter()
            .enumerate()
            .map(|(code, p)| (history_key(code, spec.order, spec.alphabet_size), p.clone()))
            .collect();
        RawSpec {
            order: spec.order,
            alphabet_size: spec.alphabet_size,
            transition,
        }
    }
}

fn checked_pow(m: usize, k: usize) -> Result<usize> {
    u32::try_from(k)
        .ok()
        .and_then(|k| m.checked_pow(k))
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::InvalidMarkovSpec(format!("{m}^{k} histories is too many")))
}

/// Comma-separated history key, oldest symbol first (`""` for order 0).
pub fn history_key(code: usize, order: usize, m: usize) -> String {
    let mut digits = vec![0usize; order];
    let mut c = code;
    for d in digits.iter_mut().rev() {
        *d = c % m;
        c /= m;
    }
    digits
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses `"0,1,3"`, or `"013"` when the alphabet has at most 10 symbols.
fn parse_history(key: &str, order: usize, m: usize) -> Result<usize> {
    let bad = || Error::InvalidMarkovSpec(format!("bad history key '{key}' for order {order}"));
    let symbols: Vec<usize> = if order == 0 {
        if !key.trim().is_empty() {
            return Err(bad());
        }
        Vec::new()
    } else if key.contains(',') || order == 1 || m > 10 {
        key.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    } else {
        key.chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad))
            .collect::<Result<_>>()?
    };
    if symbols.len() != order || symbols.iter().any(|&s| s >= m) {
        return Err(bad());
    }
    Ok(symbols.iter().fold(0, |acc, &s| acc * m + s))
}

impl MarkovSpec {
    pub fn new(order: usize, alphabet_size: usize, transition: Vec<Vec<f64>>) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::InvalidMarkovSpec("alphabet_size must be at least 1".into()));
        }
        let n_hist = checked_pow(alphabet_size, order)?;
        if transition.len() != n_hist {
            return Err(Error::InvalidMarkovSpec(format!(
                "expected {n_hist} histories, got {}",
                transition.len()
            )));
        }
        for (code, probs) in transition.iter().enumerate() {
            let key = history_key(code, order, alphabet_size);
            if probs.len() != alphabet_size {
                return Err(Error::InvalidMarkovSpec(format!(
                    "history '{key}' has {} probabilities, expected {alphabet_size}",
                    probs.len()
                )));
            }
            if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidMarkovSpec(format!(
                    "history '{key}' has a negative or non-finite probability"
                )));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMarkovSpec(format!(
                    "probabilities of history '{key}' sum to {sum}"
                )));
            }
        }
        Ok(Self {
            order,
            alphabet_size,
            transition,
        })
    }

    /// Independent draws from `probs`.
    pub fn iid(probs: Vec<f64>) -> Result<Self> {
        let m = probs.len();
        Self::new(0, m, vec![probs])
    }

    /// Order-1 chain that always moves from `s` to `s + 1 mod m`.
    pub fn cycle(m: usize) -> Result<Self> {
        let rows = (0..m)
            .map(|s| (0..m).map(|x| if x == (s + 1) % m { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(1, m, rows)
    }

    /// Order-`order` chain where `x_t` copies `x_{t-order}` with probability
    /// `p_copy` and is otherwise uniform over the remaining `m - 1` symbols.
    pub fn copy_lag(m: usize, order: usize, p_copy: f64) -> Result<Self> {
        if m < 2 || order == 0 {
            return Err(Error::InvalidMarkovSpec("copy_lag needs m >= 2 and order >= 1".into()));
        }
        let n_hist = checked_pow(m, order)?;
        let rest = (1.0 - p_copy) / (m - 1) as f64;
        let rows = (0..n_hist)
            .map(|code| {
                let oldest = code / checked_pow(m, order - 1).unwrap_or(1);
                (0..m).map(|x| if x == oldest { p_copy } else { rest }).collect()
            })
            .collect();
        Self::new(order, m, rows)
    }

    /// Order-`order` chain where `x_t = x_{t-order}` with probability `p_copy`
    /// and is otherwise drawn uniformly from all `m` symbols.
    pub fn copy_or_uniform(m: usize, order: usize, p_copy: f64) -> Result<Self> {
        let base = Self::copy_lag(m, order, 1.0)?;
        let rows = base
            .transition
            .iter()
            .map(|r| r.iter().map(|&p| p_copy * p + (1.0 - p_copy) / m as f64).collect())
            .collect();
        Self::new(order, m, rows)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Next-symbol distribution after the history with `code`.
    pub fn probabilities(&self, code: usize) -> &[f64] {
        &self.transition[code]
    }

    fn history_span(&self) -> usize {
        self.order.max(1)
    }
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Sample `length` symbols after discarding `burn_in`, starting from a
/// uniformly drawn history.
pub fn generate(spec: &MarkovSpec, length: usize, seed: u64, burn_in: usize) -> Result<SymbolSequence> {
    if length == 0 {
        return Err(Error::InvalidConfig("length must be at least 1".into()));
    }
    let m = spec.alphabet_size;
    let n_hist = spec.transition.len();
    let mut rng = rng(seed);
    let mut history = rng.gen_range(0..n_hist);
    let mut out = Vec::with_capacity(length);
    for step in 0..burn_in + length {
        let x = sample_index(&spec.transition[history], &mut rng);
        history = (history * m + x) % n_hist;
        if step >= burn_in {
            out.push(x as u32);
        }
    }
    SymbolSequence::new(out, m)
}

/// Successor states of `state` over windows of `span` symbols, with their
/// probabilities.
fn successors(spec: &MarkovSpec, state: usize, n_states: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let m = spec.alphabet_size;
    let history = state % spec.transition.len();
    spec.transition[history]
        .iter()
        .enumerate()
        .map(move |(x, &p)| ((state * m + x) % n_states, p))
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Stationary distribution over windows of `max(order, 1)` consecutive
/// symbols, indexed by history code.
///
/// The chain must be irreducible on its history graph. Periodic chains are
/// accepted: the iteration runs on the lazy operator `(I + P) / 2`, which
/// has the same fixed point and always converges.
pub fn stationary_distribution(spec: &MarkovSpec) -> Result<Vec<f64>> {
    let span = spec.history_span();
    let n = checked_pow(spec.alphabet_size, span)?;
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for (s, out) in forward.iter_mut().enumerate() {
        for (t, p) in successors(spec, s, n) {
            if p > 0.0 {
                out.push(t);
                backward[t].push(s);
            }
        }
    }
    if !reaches_all(&forward) || !reaches_all(&backward) {
        return Err(Error::Reducible(history_key(0, span, spec.alphabet_size)));
    }

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (s, &mass) in pi.iter().enumerate() {
            if mass > 0.0 {
                for (t, p) in successors(spec, s, n) {
                    next[t] += mass * p;
                }
            }
        }
        let residual: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        if residual < RESIDUAL_TOLERANCE {
            let total: f64 = next.iter().sum();
            return Ok(next.into_iter().map(|v| v / total).collect());
        }
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + q);
        }
    }
    let residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Stationary joint over `width` consecutive symbols, indexed by the
/// base-`m` code of the window (oldest first).
fn window_joint(spec: &MarkovSpec, width: usize) -> Result<Vec<f64>> {
    let m = spec.alphabet_size;
    let span = spec.history_span();
    let mut joint = stationary_distribution(spec)?;
    let n_hist = spec.transition.len();
    if width < span {
        // Marginalize the oldest symbols away.
        let keep = checked_pow(m, width)?;
        let mut out = vec![0.0; keep];
        for (code, p) in joint.iter().enumerate() {
            out[code % keep] += p;
        }
        return Ok(out);
    }
    for _ in span..width {
        let mut extended = vec![0.0; joint.len() * m];
        for (code, &p) in joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let probs = &spec.transition[code % n_hist];
            for (x, &q) in probs.iter().enumerate() {
                extended[code * m + x] += p * q;
            }
        }
        joint = extended;
    }
    Ok(joint)
}

fn plugin_entropy(probs: impl Iterator<Item = f64>) -> f64 {
    probs.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// Exact `I(X_t ; {X_{t-l}}_{l in lags})` of the stationary chain.
pub fn analytic_ais(spec: &MarkovSpec, lags: &PastState) -> Result<f64> {
    let Some(max_lag) = lags.max_lag() else {
        return Ok(0.0);
    };
    let (h_x, h_past, h_joint) = lag_entropies(spec, lags.lags(), max_lag)?;
    Ok((h_x + h_past - h_joint).max(0.0))
}

/// Exact `H(X_t | X_{t-1})` of the stationary chain.
pub fn analytic_gte(spec: &MarkovSpec) -> Result<f64> {
    let (_, h_past, h_joint) = lag_entropies(spec, &[1], 1)?;
    Ok((h_joint - h_past).max(0.0))
}

/// Entropy of the stationary single-symbol distribution.
pub fn analytic_entropy(spec: &MarkovSpec) -> Result<f64> {
    let marginal = window_joint(spec, 1)?;
    Ok(plugin_entropy(marginal.into_iter()))
}

/// `(H(X_t), H(past), H(X_t, past))` from the window `[t - max_lag, t]`.
fn lag_entropies(spec: &MarkovSpec, lags: &[usize], max_lag: usize) -> Result<(f64, f64, f64)> {
    let m = spec.alphabet_size;
    let joint = window_joint(spec, max_lag + 1)?;
    let n_past = checked_pow(m, lags.len())?;
    let mut target = vec![0.0; m];
    let mut past = vec![0.0; n_past];
    let mut both = vec![0.0; n_past * m];
    let powers: Vec<usize> = lags.iter().map(|&l| m.pow(l as u32)).collect();
    for (code, &p) in joint.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let x = code % m;
        let pc = powers.iter().fold(0, |acc, &mp| acc * m + (code / mp) % m);
        target[x] += p;
        past[pc] += p;
        both[pc * m + x] += p;
    }
    Ok((
        plugin_entropy(target.into_iter()),
        plugin_entropy(past.into_iter()),
        plugin_entropy(both.into_iter()),
    ))
}
