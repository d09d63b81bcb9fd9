//! End-to-end oracle checks at reference scale. Every test prints one
//! `PASS`/`FAIL` line before asserting.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scanpath_ais::embedding::{embed, optimize_past_state};
use scanpath_ais::experiment::{analyze_trials, compare_conditions, CompareConfig, Direction};
use scanpath_ais::gaze::{detect_fixations_idt, filter_fixations, GazeSample, Scanpath};
use scanpath_ais::info::{
    active_information_storage, conditional_entropy, conditional_mutual_information, entropy,
    gaze_transition_entropy, local_ais, mutual_information, next_symbol_entropy,
};
use scanpath_ais::markov::{generate, MarkovSpec, DEFAULT_BURN_IN};
use scanpath_ais::seed::derive_seed;
use scanpath_ais::stats::{independent_samples_permutation_test, test_final_ais, Tail};
use scanpath_ais::{ContingencyTable, EmbeddingConfig, PastState, SymbolSequence};

fn report(name: &str, passed: bool, detail: String) {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "{name}: {detail}");
}

fn h(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Plug-in entropy of the given key projection, from raw counts.
fn tally_entropy(rows: &[Vec<u32>], axes: &[usize]) -> f64 {
    let mut counts: HashMap<Vec<u32>, f64> = HashMap::new();
    for r in rows {
        *counts.entry(axes.iter().map(|&a| r[a]).collect()).or_insert(0.0) += 1.0;
    }
    let n = rows.len() as f64;
    h(&counts.values().map(|c| c / n).collect::<Vec<_>>())
}

#[test]
fn algebraic_identities() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dims: Vec<usize> = (0..3).map(|_| r.gen_range(1..=4)).collect();
        let n = r.gen_range(1..=60);
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| dims.iter().map(|&d| r.gen_range(0..d as u32)).collect())
            .collect();
        let t = ContingencyTable::from_samples(&rows, &dims).unwrap();
        let h_xy = entropy(&t, &[0, 1]).unwrap().plugin_value;
        let h_x = entropy(&t, &[0]).unwrap().plugin_value;
        let h_y = entropy(&t, &[1]).unwrap().plugin_value;
        worst = worst.max((h_xy - tally_entropy(&rows, &[0, 1])).abs());
        worst = worst.max((conditional_entropy(&t, &[0], &[1]).unwrap().plugin_value - (h_xy - h_y)).abs());
        worst = worst.max((mutual_information(&t, &[0], &[1]).unwrap().plugin_value - (h_x + h_y - h_xy)).abs());
        let mi = mutual_information(&t, &[0], &[1, 2]).unwrap();
        let cmi = conditional_mutual_information(&t, &[0], &[1, 2], &[]).unwrap();
        worst = worst.max((mi.plugin_value - cmi.plugin_value).abs());
        worst = worst.max((mi.corrected_value - cmi.corrected_value).abs());

        let m = r.gen_range(2..=4);
        let len = r.gen_range(20..=80);
        let seq = SymbolSequence::new((0..len).map(|_| r.gen_range(0..m as u32)).collect(), m).unwrap();
        let lag1 = PastState::full(1);
        let h_next = next_symbol_entropy(&seq, 1).unwrap().plugin_value;
        let ais = active_information_storage(&seq, &lag1, 1).unwrap().plugin_value;
        let gte = gaze_transition_entropy(&seq).unwrap().plugin_value;
        worst = worst.max((h_next - ais - gte).abs());

        let k = r.gen_range(1..=3);
        let mut lags: Vec<usize> = (1..=k).filter(|_| r.gen_bool(0.6)).collect();
        if lags.is_empty() {
            lags.push(k);
        }
        let state = PastState::new(lags, k).unwrap();
        let local = local_ais(&seq, &state, k).unwrap();
        let mean = local.iter().sum::<f64>() / local.len() as f64;
        let ais = active_information_storage(&seq, &state, k).unwrap().plugin_value;
        worst = worst.max((mean - ais).abs());
    }
    report(
        "algebraic identities",
        worst <= 1e-12,
        format!("1000 cases, max deviation {worst:.3e} (tolerance 1e-12)"),
    );
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

#[test]
fn oracle_convergence() {
    // Binary chain that stays with probability 0.9.
    let spec = MarkovSpec::new(1, 2, vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let truth = 1.0 - h(&[0.9, 0.1]);
    let lag1 = PastState::full(1);
    let mut medians = Vec::new();
    let mut single = 0.0;
    for (li, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let errors: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|s| {
                let seq = generate(&spec, n, 1000 * li as u64 + s, DEFAULT_BURN_IN).unwrap();
                (active_information_storage(&seq, &lag1, 1).unwrap().plugin_value - truth).abs()
            })
            .collect();
        single = errors[0];
        medians.push(median(errors));
    }
    let monotone = medians[1] < medians[0] && medians[2] < medians[1];
    report(
        "oracle convergence",
        single <= 0.005 && monotone,
        format!(
            "target {truth:.6}; |error| at N=1e5 {single:.5}; median |error| over 20 seeds {:.5} > {:.5} > {:.5}",
            medians[0], medians[1], medians[2]
        ),
    );
}

fn selections(spec: &MarkovSpec, len: usize, runs: u64, stream: u64) -> Vec<PastState> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(stream, i);
            let seq = generate(spec, len, s, DEFAULT_BURN_IN).unwrap();
            let cfg = EmbeddingConfig {
                k_max: 5,
                alpha: 0.05,
                seed: derive_seed(s, 1),
                ..EmbeddingConfig::default()
            };
            optimize_past_state(&seq, &cfg).unwrap().0
        })
        .collect()
}

#[test]
fn embedding_recovery() {
    let order1 = MarkovSpec::new(1, 2, vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    // x_t repeats x_{t-2} with probability 0.9, else uniform over 4 symbols.
    let rows: Vec<Vec<f64>> = (0..16)
        .map(|code| (0..4).map(|x| if x == code / 4 { 0.925 } else { 0.025 }).collect())
        .collect();
    let order2 = MarkovSpec::new(2, 4, rows).unwrap();
    let iid = MarkovSpec::new(0, 4, vec![vec![0.25; 4]]).unwrap();

    let exact1 = selections(&order1, 1000, 20, 11).iter().filter(|p| p.lags() == [1]).count();
    let has2 = selections(&order2, 1000, 20, 12).iter().filter(|p| p.contains(2)).count();
    let nonempty = selections(&iid, 10_000, 100, 13).iter().filter(|p| !p.is_empty()).count();
    report(
        "embedding recovery",
        exact1 >= 18 && has2 >= 18 && nonempty <= 10,
        format!(
            "order-1 chain selected {{1}} in {exact1}/20; order-2 chain recovered lag 2 in {has2}/20; \
             i.i.d. nonempty selection in {nonempty}/100"
        ),
    );
}

/// `x_t = x_{t-1}` with probability `p`, otherwise uniform over 4 symbols.
fn sticky(p: f64) -> (MarkovSpec, f64) {
    let stay = p + (1.0 - p) / 4.0;
    let other = (1.0 - p) / 4.0;
    let rows = (0..4)
        .map(|s| (0..4).map(|x| if x == s { stay } else { other }).collect())
        .collect();
    (MarkovSpec::new(1, 4, rows).unwrap(), 2.0 - h(&[stay, other, other, other]))
}

fn participant(a: &MarkovSpec, b: &MarkovSpec, seed: u64) -> Vec<Scanpath> {
    let mut out = Vec::new();
    for (label, spec) in [("a", a), ("b", b)] {
        for i in 0..22 {
            let s = derive_seed(seed, out.len() as u64);
            out.push(Scanpath {
                trial_id: format!("{label}{i:02}"),
                participant_id: "p".into(),
                condition: label.into(),
                sequence: generate(spec, 200, s, DEFAULT_BURN_IN).unwrap(),
                dropped_fixations: 0,
            });
        }
    }
    out
}

fn contrast_runs(a: &MarkovSpec, b: &MarkovSpec, stream: u64) -> Vec<(Direction, f64)> {
    let cmp = CompareConfig {
        n_perm: 5000,
        tail: Tail::TwoSided,
        ..CompareConfig::default()
    };
    (0..100u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(stream, i);
            let cfg = EmbeddingConfig {
                k_max: 5,
                seed: derive_seed(s, 1),
                ..EmbeddingConfig::default()
            };
            let c = compare_conditions(&participant(a, b, s), &cfg, &cmp).unwrap();
            (c.ais.direction, c.ais.test.p_value)
        })
        .collect()
}

#[test]
fn synthetic_condition_contrast() {
    let (strong, ais_strong) = sticky(0.9);
    let (weak, ais_weak) = sticky(0.4);
    let gap = ais_strong - ais_weak;
    let detected = contrast_runs(&strong, &weak, 21)
        .into_iter()
        .filter(|&(d, p)| d == Direction::AGreater && p <= 0.01)
        .count();
    let rejected = contrast_runs(&weak, &weak, 22).into_iter().filter(|&(_, p)| p <= 0.05).count();
    report(
        "synthetic condition contrast",
        gap >= 0.3 && detected >= 95 && rejected <= 7,
        format!(
            "analytic AIS gap {gap:.3} bits; correct direction with p <= 0.01 in {detected}/100; \
             identical conditions rejected at 0.05 in {rejected}/100"
        ),
    );
}

#[test]
fn bias_correction() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let (mut plug, mut corr) = (0.0, 0.0);
    for _ in 0..1000 {
        let rows: Vec<[u32; 1]> = (0..50).map(|_| [r.gen_range(0..4)]).collect();
        let e = entropy(&ContingencyTable::from_samples(&rows, &[4]).unwrap(), &[0]).unwrap();
        plug += (e.plugin_value - 2.0).abs() / 1000.0;
        corr += (e.corrected_value - 2.0).abs() / 1000.0;
    }
    report(
        "bias correction",
        corr < plug,
        format!("mean |error| over 1000 draws: plug-in {plug:.4}, corrected {corr:.4}"),
    );
}

fn sample(t: f64, x: f64, y: f64) -> GazeSample {
    GazeSample {
        timestamp: t,
        x,
        y,
        confidence: 1.0,
    }
}

#[test]
fn idt_fixation_detection() {
    let dt = 1.0 / 120.0;
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let mut all_ok = true;
    let mut planted = 0;
    for _ in 0..50 {
        let n_fix = r.gen_range(2..=6);
        let mut samples: Vec<GazeSample> = Vec::new();
        let mut expected = Vec::new();
        let mut centre: (f64, f64) = (r.gen_range(100.0..1800.0), r.gen_range(100.0..1000.0));
        for k in 0..n_fix {
            let len = r.gen_range(15..=100);
            let mut sx = 0.0;
            let mut sy = 0.0;
            for _ in 0..len {
                let x = centre.0 + r.gen_range(-8.0..8.0);
                let y = centre.1 + r.gen_range(-8.0..8.0);
                sx += x;
                sy += y;
                samples.push(sample(samples.len() as f64 * dt, x, y));
            }
            expected.push((sx / len as f64, sy / len as f64));
            if k + 1 < n_fix {
                // Next centre at least 400 px away; the transit passes through
                // three samples spaced a quarter of the way.
                let next = loop {
                    let c = (r.gen_range(100.0..1800.0), r.gen_range(100.0..1000.0));
                    if (c.0 - centre.0).abs() + (c.1 - centre.1).abs() >= 400.0 {
                        break c;
                    }
                };
                for j in 1..=3 {
                    let f = j as f64 / 4.0;
                    samples.push(sample(
                        samples.len() as f64 * dt,
                        centre.0 + f * (next.0 - centre.0),
                        centre.1 + f * (next.1 - centre.1),
                    ));
                }
                centre = next;
            }
        }
        planted += n_fix;
        let found = detect_fixations_idt(&samples, 50.0, 100.0);
        all_ok &= found.len() == expected.len()
            && found
                .iter()
                .zip(&expected)
                .all(|(f, &(x, y))| (f.centroid_x - x).abs() <= 1.0 && (f.centroid_y - y).abs() <= 1.0);
    }

    // Two points 30 px apart in x and 20 px in y: dispersion exactly 50.
    let edge: Vec<GazeSample> = (0..20)
        .map(|i| {
            let odd = i % 2 == 1;
            sample(i as f64 * dt, if odd { 130.0 } else { 100.0 }, if odd { 120.0 } else { 100.0 })
        })
        .collect();
    let dispersion_ok = detect_fixations_idt(&edge, 50.0, 100.0).len() == 1
        && detect_fixations_idt(&edge, 49.0, 100.0).is_empty();
    let still = |n: usize| -> Vec<GazeSample> { (0..n).map(|i| sample(i as f64 * 0.01, 5.0, 5.0)).collect() };
    let min_ok = detect_fixations_idt(&still(11), 50.0, 100.0).len() == 1
        && detect_fixations_idt(&still(10), 50.0, 100.0).is_empty();
    let at_max = filter_fixations(&detect_fixations_idt(&still(151), 50.0, 100.0), 1500.0);
    let over_max = filter_fixations(&detect_fixations_idt(&still(152), 50.0, 100.0), 1500.0);
    let max_ok = at_max.len() == 1 && (at_max[0].duration_ms - 1500.0).abs() < 1e-6 && over_max.is_empty();

    report(
        "IDT fixation detection",
        all_ok && dispersion_ok && min_ok && max_ok,
        format!(
            "50 planted traces ({planted} fixations) {}; dispersion 50 px kept {dispersion_ok}; \
             100 ms kept {min_ok}; 1500 ms kept and longer dropped {max_ok}",
            if all_ok { "recovered" } else { "mismatched" }
        ),
    );
}

fn pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn determinism_across_threads() {
    let (a, _) = sticky(0.7);
    let b = MarkovSpec::copy_or_uniform(4, 2, 0.6).unwrap();
    let trials = participant(&a, &b, 7);
    let cfg = EmbeddingConfig {
        seed: 70,
        ..EmbeddingConfig::default()
    };
    let run = || {
        let per_trial = analyze_trials(&trials, &cfg).unwrap();
        let cmp = compare_conditions(&trials, &cfg, &CompareConfig::default()).unwrap();
        let series = embed(&trials[30].sequence, &PastState::full(2), 2).unwrap();
        let fin = test_final_ais(&series, 2000, 71).unwrap();
        let groups =
            independent_samples_permutation_test(&[1.0, 2.0, 0.5, 3.0], &[0.0, 1.5, 0.2], 3000, Tail::TwoSided, 72)
                .unwrap();
        let seqs: Vec<SymbolSequence> = (0..4).map(|s| generate(&b, 500, s, DEFAULT_BURN_IN).unwrap()).collect();
        (per_trial, cmp, fin, groups, seqs)
    };
    let one = pool(1, run);
    let eight = pool(8, run);
    let bits = |v: &(
        Vec<scanpath_ais::experiment::TrialOutcome>,
        scanpath_ais::experiment::ParticipantComparison,
        scanpath_ais::stats::PermutationTestResult,
        scanpath_ais::stats::PermutationTestResult,
        Vec<SymbolSequence>,
    )| format!("{v:?}");
    let same = one == eight && bits(&one) == bits(&eight);
    report(
        "determinism across thread counts",
        same,
        format!(
            "trial analyses, comparison, final AIS test, group test and chain sampling at 1 vs 8 threads: {}",
            if same { "bit-identical" } else { "different" }
        ),
    );
}

fn exhaustive_two_sided(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let diff = |mask: u32| {
        let (mut sa, mut sb) = (0.0, 0.0);
        for (i, v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sa += v;
            } else {
                sb += v;
            }
        }
        sa / a.len() as f64 - sb / b.len() as f64
    };
    let observed = diff((1 << a.len()) - 1);
    let masks: Vec<u32> = (0u32..1 << pooled.len()).filter(|m| m.count_ones() as usize == a.len()).collect();
    let hits = masks.iter().filter(|&&m| diff(m).abs() >= observed.abs() - 1e-12).count();
    hits as f64 / masks.len() as f64
}

#[test]
fn small_group_permutation_p_values() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let mut cases: Vec<([f64; 3], [f64; 3])> =
        vec![([10.0, 10.0, 10.0], [0.0, 0.0, 0.0]), ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]), ([1.0, 5.0, 2.0], [2.0, 4.0, 1.0])];
    for _ in 0..17 {
        cases.push(([r.gen(), r.gen(), r.gen()], [r.gen(), r.gen(), r.gen()]));
    }
    assert!((exhaustive_two_sided(&cases[0].0, &cases[0].1) - 0.1).abs() < 1e-15);
    let mut worst = 0.0f64;
    for (i, (a, b)) in cases.iter().enumerate() {
        let p = independent_samples_permutation_test(a, b, 10_000, Tail::TwoSided, 80 + i as u64)
            .unwrap()
            .p_value;
        worst = worst.max((p - exhaustive_two_sided(a, b)).abs());
    }
    report(
        "small-group permutation p-values",
        worst <= 0.02,
        format!("{} cases of 3 vs 3, max |sampled - exhaustive| {worst:.4} at n_perm 10000", cases.len()),
    );
}
