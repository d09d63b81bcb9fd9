//! Oracle checks behind the `validate` command.
//!
//! Each check builds data with a known answer (closed forms, exact Markov
//! values, planted fixations, exhaustive enumeration) and compares the
//! estimators against it. [`Scale::full`] runs every check at its reference
//! size; [`Scale::quick`] shrinks the Monte Carlo loops for a fast smoke run.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{embed, optimize_past_state, EmbeddingConfig, PastState};
use crate::error::Result;
use crate::experiment::{analyze_trials, compare_conditions, CompareConfig, Direction};
use crate::gaze::{detect_fixations_idt, filter_fixations, GazeSample, Scanpath};
use crate::info::{
    active_information_storage, conditional_entropy, conditional_mutual_information, entropy,
    gaze_transition_entropy, local_ais, mutual_information, next_symbol_entropy, ContingencyTable,
};
use crate::markov::{analytic_ais, generate, MarkovSpec, DEFAULT_BURN_IN};
use crate::seed::{derive_seed, rng};
use crate::sequence::SymbolSequence;
use crate::stats::{independent_samples_permutation_test, test_final_ais, Tail};

/// Run counts for the Monte Carlo checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scale {
    pub identity_cases: usize,
    pub convergence_seeds: usize,
    pub recovery_runs: usize,
    pub iid_runs: usize,
    pub iid_length: usize,
    pub pipeline_runs: usize,
    pub bias_draws: usize,
    pub exact_n_perm: usize,
}

impl Scale {
    pub fn full() -> Self {
        Self {
            identity_cases: 1000,
            convergence_seeds: 20,
            recovery_runs: 20,
            iid_runs: 100,
            iid_length: 10_000,
            pipeline_runs: 100,
            bias_draws: 1000,
            exact_n_perm: 10_000,
        }
    }

    pub fn quick() -> Self {
        Self {
            identity_cases: 200,
            convergence_seeds: 5,
            recovery_runs: 10,
            iid_runs: 20,
            iid_length: 2000,
            pipeline_runs: 10,
            bias_draws: 1000,
            exact_n_perm: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Run every check in order.
pub fn run_all(scale: &Scale, seed: u64) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        identities(scale, derive_seed(seed, 1))?,
        convergence(scale, derive_seed(seed, 2))?,
        recovery(scale, derive_seed(seed, 3))?,
        pipeline(scale, derive_seed(seed, 4))?,
        bias(scale, derive_seed(seed, 5))?,
        idt(),
        determinism(derive_seed(seed, 7))?,
        exact_permutation(scale, derive_seed(seed, 8))?,
    ])
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

fn random_sequence<R: Rng>(r: &mut R, len: usize, m: usize) -> SymbolSequence {
    SymbolSequence::new((0..len).map(|_| r.gen_range(0..m as u32)).collect(), m)
        .expect("symbols drawn below alphabet size")
}

/// Entropy and information identities on random tables and sequences.
pub fn identities(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let mut worst = 0.0f64;
    let mut r = rng(seed);
    for _ in 0..scale.identity_cases {
        let dims: Vec<usize> = (0..3).map(|_| r.gen_range(1..=4)).collect();
        let n = r.gen_range(1..=60);
        let samples: Vec<Vec<u32>> = (0..n)
            .map(|_| dims.iter().map(|&d| r.gen_range(0..d as u32)).collect())
            .collect();
        let t = ContingencyTable::from_samples(&samples, &dims)?;
        let h_xy = entropy(&t, &[0, 1])?.plugin_value;
        let h_x = entropy(&t, &[0])?.plugin_value;
        let h_y = entropy(&t, &[1])?.plugin_value;
        worst = worst.max((conditional_entropy(&t, &[0], &[1])?.plugin_value - (h_xy - h_y)).abs());
        worst = worst.max((mutual_information(&t, &[0], &[1])?.plugin_value - (h_x + h_y - h_xy)).abs());
        let mi = mutual_information(&t, &[0], &[1, 2])?;
        let cmi = conditional_mutual_information(&t, &[0], &[1, 2], &[])?;
        worst = worst.max((mi.plugin_value - cmi.plugin_value).abs());
        worst = worst.max((mi.corrected_value - cmi.corrected_value).abs());

        let m = r.gen_range(2..=4);
        let len = r.gen_range(20..=80);
        let seq = random_sequence(&mut r, len, m);
        let lag1 = PastState::full(1);
        let h = next_symbol_entropy(&seq, 1)?.plugin_value;
        let ais = active_information_storage(&seq, &lag1, 1)?.plugin_value;
        let gte = gaze_transition_entropy(&seq)?.plugin_value;
        worst = worst.max((h - ais - gte).abs());

        let k_max = r.gen_range(1..=3);
        let lags: Vec<usize> = (1..=k_max).filter(|_| r.gen_bool(0.6)).collect();
        let lags = if lags.is_empty() { vec![k_max] } else { lags };
        let state = PastState::new(lags, k_max)?;
        let local = local_ais(&seq, &state, k_max)?;
        let mean = local.iter().sum::<f64>() / local.len() as f64;
        let ais = active_information_storage(&seq, &state, k_max)?.plugin_value;
        worst = worst.max((mean - ais).abs());
    }
    Ok(CriterionOutcome::new(
        1,
        "algebraic identities",
        worst <= 1e-12,
        format!("{} cases, max deviation {worst:.3e}", scale.identity_cases),
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Plug-in AIS of the binary stay-0.9 chain against `1 - h(0.9)`.
pub fn convergence(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let spec = MarkovSpec::copy_lag(2, 1, 0.9)?;
    let truth = 1.0 - binary_entropy(0.9);
    let lag1 = PastState::full(1);
    let lengths = [1_000usize, 10_000, 100_000];
    let mut medians = Vec::new();
    let mut first_at_largest = 0.0;
    for (li, &n) in lengths.iter().enumerate() {
        let errors = (0..scale.convergence_seeds)
            .into_par_iter()
            .map(|s| {
                let seq = generate(&spec, n, derive_seed(seed, (li * 1000 + s) as u64), DEFAULT_BURN_IN)?;
                Ok((active_information_storage(&seq, &lag1, 1)?.plugin_value - truth).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        first_at_largest = errors[0];
        medians.push(median(errors));
    }
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);
    let close = first_at_largest <= 0.005;
    Ok(CriterionOutcome::new(
        2,
        "oracle convergence",
        monotone && close,
        format!(
            "|error| at N=1e5 {first_at_largest:.5}; median errors {:.5} {:.5} {:.5}",
            medians[0], medians[1], medians[2]
        ),
    ))
}

fn select(seq: &SymbolSequence, seed: u64) -> Result<PastState> {
    let cfg = EmbeddingConfig {
        seed,
        ..EmbeddingConfig::default()
    };
    Ok(optimize_past_state(seq, &cfg)?.0)
}

/// Lag recovery on planted chains and false selections on i.i.d. data.
pub fn recovery(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let order1 = MarkovSpec::copy_lag(2, 1, 0.9)?;
    let order2 = MarkovSpec::copy_or_uniform(4, 2, 0.9)?;
    let iid = MarkovSpec::iid(vec![0.25; 4])?;
    let run = |spec: &MarkovSpec, len: usize, runs: usize, stream: u64| -> Result<Vec<PastState>> {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let s = derive_seed(derive_seed(seed, stream), i as u64);
                let seq = generate(spec, len, s, DEFAULT_BURN_IN)?;
                select(&seq, derive_seed(s, 1))
            })
            .collect()
    };
    let r1 = run(&order1, 1000, scale.recovery_runs, 1)?;
    let exact1 = r1.iter().filter(|p| p.lags() == [1]).count();
    let r2 = run(&order2, 1000, scale.recovery_runs, 2)?;
    let has2 = r2.iter().filter(|p| p.contains(2)).count();
    let r0 = run(&iid, scale.iid_length, scale.iid_runs, 3)?;
    let false_pos = r0.iter().filter(|p| !p.is_empty()).count();
    let passed = exact1 * 10 >= scale.recovery_runs * 9
        && has2 * 10 >= scale.recovery_runs * 9
        && false_pos * 10 <= scale.iid_runs;
    Ok(CriterionOutcome::new(
        3,
        "embedding recovery",
        passed,
        format!(
            "order-1 exact {exact1}/{n}; order-2 lag 2 {has2}/{n}; i.i.d. nonempty {false_pos}/{m}",
            n = scale.recovery_runs,
            m = scale.iid_runs
        ),
    ))
}

fn synthetic_trials(spec_a: &MarkovSpec, spec_b: &MarkovSpec, seed: u64) -> Result<Vec<Scanpath>> {
    let mut out = Vec::new();
    for (label, spec) in [("a", spec_a), ("b", spec_b)] {
        for i in 0..22 {
            let s = derive_seed(seed, out.len() as u64);
            out.push(Scanpath {
                trial_id: format!("{label}{i:02}"),
                participant_id: "p".into(),
                condition: label.into(),
                sequence: generate(spec, 200, s, DEFAULT_BURN_IN)?,
                dropped_fixations: 0,
            });
        }
    }
    Ok(out)
}

/// Condition contrasts on synthetic participants.
pub fn pipeline(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let strong = MarkovSpec::copy_or_uniform(4, 1, 0.9)?;
    let weak = MarkovSpec::copy_or_uniform(4, 1, 0.4)?;
    let gap = analytic_ais(&strong, &PastState::full(1))? - analytic_ais(&weak, &PastState::full(1))?;
    let cfg = EmbeddingConfig::default();
    let cmp = CompareConfig::default();
    let run = |a: &MarkovSpec, b: &MarkovSpec, i: usize, stream: u64| {
        let s = derive_seed(derive_seed(seed, stream), i as u64);
        let trials = synthetic_trials(a, b, s)?;
        compare_conditions(&trials, &EmbeddingConfig { seed: derive_seed(s, 1), ..cfg }, &cmp)
    };
    let detected = (0..scale.pipeline_runs)
        .into_par_iter()
        .map(|i| {
            let c = run(&strong, &weak, i, 1)?;
            Ok(c.ais.direction == Direction::AGreater && c.ais.test.p_value <= 0.01)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&d| d)
        .count();
    let rejected = (0..scale.pipeline_runs)
        .into_par_iter()
        .map(|i| Ok(run(&weak, &weak, i, 2)?.ais.test.p_value <= 0.05))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&d| d)
        .count();
    let n = scale.pipeline_runs;
    Ok(CriterionOutcome::new(
        4,
        "synthetic condition contrast",
        gap >= 0.3 && detected * 100 >= n * 95 && rejected * 100 <= n * 7,
        format!("analytic gap {gap:.3} bits; detected {detected}/{n}; null rejections {rejected}/{n}"),
    ))
}

/// Bias-corrected against plug-in entropy on small uniform samples.
pub fn bias(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let mut r = rng(seed);
    let (mut plug, mut corr) = (0.0, 0.0);
    for _ in 0..scale.bias_draws {
        let samples: Vec<[u32; 1]> = (0..50).map(|_| [r.gen_range(0..4)]).collect();
        let h = entropy(&ContingencyTable::from_samples(&samples, &[4])?, &[0])?;
        plug += (h.plugin_value - 2.0).abs();
        corr += (h.corrected_value - 2.0).abs();
    }
    let n = scale.bias_draws as f64;
    Ok(CriterionOutcome::new(
        5,
        "bias correction",
        corr < plug,
        format!("mean |error| plug-in {:.4}, corrected {:.4}", plug / n, corr / n),
    ))
}

fn hold(t0: f64, count: usize, dt: f64, x: f64, y: f64) -> Vec<GazeSample> {
    (0..count)
        .map(|i| GazeSample {
            timestamp: t0 + i as f64 * dt,
            x,
            y,
            confidence: 1.0,
        })
        .collect()
}

/// Planted fixation traces and threshold edge cases.
pub fn idt() -> CriterionOutcome {
    let dt = 1.0 / 120.0;
    let centres = [(300.0, 300.0), (900.0, 350.0), (500.0, 800.0), (1500.0, 600.0)];
    let lengths = [30usize, 45, 24, 60];
    let mut samples = Vec::new();
    let mut expected = Vec::new();
    for (k, (&(cx, cy), &len)) in centres.iter().zip(&lengths).enumerate() {
        let t0 = samples.len() as f64 * dt;
        let cluster: Vec<GazeSample> = (0..len)
            .map(|i| {
                let jitter = [(-4.0, 3.0), (2.0, -5.0), (5.0, 4.0), (-3.0, -2.0)][i % 4];
                GazeSample {
                    timestamp: t0 + i as f64 * dt,
                    x: cx + jitter.0,
                    y: cy + jitter.1,
                    confidence: 1.0,
                }
            })
            .collect();
        let n = len as f64;
        expected.push((
            cluster.iter().map(|s| s.x).sum::<f64>() / n,
            cluster.iter().map(|s| s.y).sum::<f64>() / n,
        ));
        samples.extend(cluster);
        if let Some(&(nx, ny)) = centres.get(k + 1) {
            for j in 1..=3 {
                let f = j as f64 / 4.0;
                samples.push(GazeSample {
                    timestamp: samples.len() as f64 * dt,
                    x: cx + f * (nx - cx),
                    y: cy + f * (ny - cy),
                    confidence: 1.0,
                });
            }
        }
    }
    let found = detect_fixations_idt(&samples, 50.0, 100.0);
    let planted_ok = found.len() == expected.len()
        && found
            .iter()
            .zip(&expected)
            .all(|(f, &(x, y))| (f.centroid_x - x).abs() <= 1.0 && (f.centroid_y - y).abs() <= 1.0);

    let edge: Vec<GazeSample> = (0..20)
        .map(|i| GazeSample {
            timestamp: i as f64 * dt,
            x: if i % 2 == 0 { 100.0 } else { 130.0 },
            y: if i % 2 == 0 { 100.0 } else { 120.0 },
            confidence: 1.0,
        })
        .collect();
    let dispersion_ok = detect_fixations_idt(&edge, 50.0, 100.0).len() == 1;
    let span = hold(0.0, 11, 0.01, 5.0, 5.0);
    let min_ok = detect_fixations_idt(&span, 50.0, 100.0).len() == 1
        && detect_fixations_idt(&span[..10], 50.0, 100.0).is_empty();
    let long = hold(0.0, 151, 0.01, 5.0, 5.0);
    let longer = hold(0.0, 152, 0.01, 5.0, 5.0);
    let max_ok = filter_fixations(&detect_fixations_idt(&long, 50.0, 100.0), 1500.0).len() == 1
        && filter_fixations(&detect_fixations_idt(&longer, 50.0, 100.0), 1500.0).is_empty();

    CriterionOutcome::new(
        6,
        "IDT fixation detection",
        planted_ok && dispersion_ok && min_ok && max_ok,
        format!(
            "planted {}/{} fixations; dispersion 50 px {}; duration 100 ms {}; duration 1500 ms {}",
            found.len(),
            expected.len(),
            ok(dispersion_ok),
            ok(min_ok),
            ok(max_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "wrong"
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Seeded operations under one and eight worker threads.
pub fn determinism(seed: u64) -> Result<CriterionOutcome> {
    let spec = MarkovSpec::copy_or_uniform(4, 2, 0.7)?;
    let trials = synthetic_trials(&spec, &MarkovSpec::copy_or_uniform(4, 1, 0.4)?, seed)?;
    let cfg = EmbeddingConfig {
        seed,
        ..EmbeddingConfig::default()
    };
    let work = || -> Result<_> {
        let analyses = analyze_trials(&trials, &cfg)?;
        let comparison = compare_conditions(&trials, &cfg, &CompareConfig::default())?;
        let series = embed(&trials[0].sequence, &PastState::full(3), 3)?;
        let final_test = test_final_ais(&series, 999, seed)?;
        let groups = independent_samples_permutation_test(&[0.1, 0.4, 0.3], &[0.2, 0.9, 0.5], 999, Tail::TwoSided, seed)?;
        Ok((analyses, comparison, final_test, groups))
    };
    let one = in_pool(1, work)?;
    let eight = in_pool(8, work)?;
    let again = in_pool(8, work)?;
    let passed = one == eight && eight == again;
    Ok(CriterionOutcome::new(
        7,
        "determinism across thread counts",
        passed,
        format!("1 vs 8 threads {}", if passed { "identical" } else { "differ" }),
    ))
}

fn exhaustive_p(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let observed = a.iter().sum::<f64>() / 3.0 - b.iter().sum::<f64>() / 3.0;
    let mut hits = 0;
    let mut splits = 0;
    for i in 0..6 {
        for j in i + 1..6 {
            for k in j + 1..6 {
                let s = pooled[i] + pooled[j] + pooled[k];
                let d = s / 3.0 - (total - s) / 3.0;
                splits += 1;
                if d.abs() >= observed.abs() - 1e-12 {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / splits as f64
}

/// Sampled against exhaustively enumerated two-sided p-values for 3 vs 3.
pub fn exact_permutation(scale: &Scale, seed: u64) -> Result<CriterionOutcome> {
    let mut r = rng(seed);
    let mut cases = vec![([10.0, 10.0, 10.0], [0.0, 0.0, 0.0]), ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])];
    for _ in 0..8 {
        let mut g = || [r.gen::<f64>(), r.gen(), r.gen()];
        cases.push((g(), g()));
    }
    let mut worst = 0.0f64;
    for (i, (a, b)) in cases.iter().enumerate() {
        let sampled = independent_samples_permutation_test(a, b, scale.exact_n_perm, Tail::TwoSided, derive_seed(seed, i as u64))?;
        worst = worst.max((sampled.p_value - exhaustive_p(a, b)).abs());
    }
    Ok(CriterionOutcome::new(
        8,
        "small-group permutation p-values",
        worst <= 0.02,
        format!("{} cases, max |p - exact| {worst:.4}", cases.len()),
    ))
}
