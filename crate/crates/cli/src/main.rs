use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use scanpath_ais::experiment::{
    analyze_trials, compare_conditions, lag_histogram, CompareConfig, LagHistogram, ParticipantComparison,
    TrialOutcome, TrialResult,
};
use scanpath_ais::gaze::{build_scanpath, scanpath_from_fixations, trial_fixations, AoiLayout, AoiRegion, Scanpath};
use scanpath_ais::markov::{analytic_ais, analytic_entropy, analytic_gte, generate, MarkovSpec, DEFAULT_BURN_IN};
use scanpath_ais::seed::derive_seed;
use scanpath_ais::stats::Tail;
use scanpath_ais::validation::{self, CriterionOutcome, Scale};
use scanpath_ais::{EmbeddingConfig, PastState};

mod config;
mod io;

use config::{FileConfig, Overrides, Settings};
use io::{emit, fmt_num, to_json};

#[derive(Parser)]
#[command(name = "scanpath-ais", version, about = "Active information storage of eye-movement scanpaths")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration (TOML key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file, or output directory for `compare`. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Merge consecutive fixations on the same AOI.
    #[arg(long, global = true)]
    collapse_repeats: bool,
    /// Largest lag considered for the past state.
    #[arg(long, global = true)]
    kmax: Option<usize>,
    /// Significance level of the selection tests.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Surrogates per selection and final AIS test.
    #[arg(long, global = true)]
    nperm: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect fixations in a gaze CSV.
    Fixations { input: PathBuf },
    /// Map fixations to AOI symbol sequences.
    Scanpath {
        /// Gaze CSV, or a fixation CSV as written by `fixations`.
        input: PathBuf,
        /// AOI definitions (JSON).
        #[arg(long)]
        aoi: PathBuf,
    },
    /// Optimize the past state and estimate AIS per trial.
    Ais {
        /// Scanpath JSON files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare two conditions within each participant.
    Compare {
        /// Scanpath or results JSON files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Surrogates per condition contrast.
        #[arg(long)]
        nperm_comparison: Option<usize>,
        /// greater, less or two_sided.
        #[arg(long)]
        tail: Option<Tail>,
    },
    /// Sample scanpaths from a Markov chain and report its exact AIS.
    Simulate {
        /// Markov chain specification (JSON).
        spec: PathBuf,
        #[arg(long, default_value_t = 200)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value = "sim")]
        participant: String,
        #[arg(long, default_value = "sim")]
        condition: String,
    },
    /// Run the oracle checks and print one line per check.
    Validate {
        /// Smaller Monte Carlo loops.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.global.jobs {
        Some(0) => Err(anyhow::anyhow!("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| run(&cli))),
        None => run(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn require_exists(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            bail!("input not found: {}", p.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if let Some(c) = &g.config {
        require_exists(&[c])?;
    }
    let file = g.config.as_deref().map(FileConfig::load).transpose()?.unwrap_or_default();
    let overrides = Overrides {
        seed: g.seed,
        k_max: g.kmax,
        alpha: g.alpha,
        n_perm: g.nperm,
        collapse_repeats: g.collapse_repeats,
    };
    let mut settings = Settings::resolve(&file, &overrides)?;
    let out = g.out.as_deref();
    match &cli.command {
        Command::Fixations { input } => {
            require_exists(&[input])?;
            cmd_fixations(input, &settings, out)?;
        }
        Command::Scanpath { input, aoi } => {
            require_exists(&[input, aoi])?;
            cmd_scanpath(input, aoi, &settings, out)?;
        }
        Command::Ais { inputs } => {
            require_exists(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
            cmd_ais(inputs, &settings, out)?;
        }
        Command::Compare {
            inputs,
            nperm_comparison,
            tail,
        } => {
            require_exists(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
            if let Some(n) = nperm_comparison {
                settings.compare.n_perm = *n;
            }
            if let Some(t) = tail {
                settings.compare.tail = *t;
            }
            cmd_compare(inputs, &settings, out)?;
        }
        Command::Simulate {
            spec,
            length,
            trials,
            participant,
            condition,
        } => {
            require_exists(&[spec])?;
            let sim = Simulation {
                length: *length,
                trials: *trials,
                participant,
                condition,
            };
            cmd_simulate(spec, &sim, &settings, out)?;
        }
        Command::Validate { quick } => {
            let scale = if *quick { Scale::quick() } else { Scale::full() };
            return cmd_validate(&scale, settings.embedding.seed, out);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fixations(input: &Path, settings: &Settings, out: Option<&Path>) -> Result<()> {
    let trials = io::read_gaze_csv(input)?;
    let fixations: Vec<_> = trials
        .par_iter()
        .map(|t| trial_fixations(t, &settings.pipeline))
        .collect();
    let mut w = io::csv_writer(out)?;
    w.write_record(io::FIXATION_COLUMNS)?;
    for (trial, fixes) in trials.iter().zip(fixations) {
        for f in fixes {
            w.write_record([
                trial.trial_id.clone(),
                fmt_num(f.start_time),
                fmt_num(f.duration_ms),
                fmt_num(f.centroid_x),
                fmt_num(f.centroid_y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum AoiFile {
    List(Vec<AoiRegion>),
    Wrapped { aois: Vec<AoiRegion> },
}

fn load_layout(path: &Path) -> Result<AoiLayout> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read AOI file {}", path.display()))?;
    let regions = match serde_json::from_str::<AoiFile>(&text)
        .with_context(|| format!("{} is not a valid AOI list", path.display()))?
    {
        AoiFile::List(r) | AoiFile::Wrapped { aois: r } => r,
    };
    AoiLayout::new(regions).with_context(|| format!("invalid AOI layout in {}", path.display()))
}

#[derive(Serialize)]
struct ScanpathDoc<'a> {
    scanpaths: &'a [Scanpath],
}

fn cmd_scanpath(input: &Path, aoi: &Path, settings: &Settings, out: Option<&Path>) -> Result<()> {
    let layout = load_layout(aoi)?;
    let collapse = settings.pipeline.collapse_repeats;
    let scanpaths: Vec<Scanpath> = if io::is_fixation_csv(input)? {
        io::read_fixation_csv(input)?
            .iter()
            .map(|((p, c, t), fixes)| Ok(scanpath_from_fixations((p, c, t), fixes, &layout, collapse)?))
            .collect::<Result<_>>()?
    } else {
        io::read_gaze_csv(input)?
            .par_iter()
            .map(|t| Ok(build_scanpath(t, &layout, &settings.pipeline)?))
            .collect::<Result<_>>()?
    };
    emit(out, &to_json(&ScanpathDoc { scanpaths: &scanpaths })?)
}

fn key_of(s: &Scanpath) -> io::TrialKey {
    (s.participant_id.clone(), s.condition.clone(), s.trial_id.clone())
}

/// Scanpaths from scanpath, simulation or results documents, in canonical
/// order. Repeated trial keys are an error.
fn load_scanpaths(paths: &[PathBuf], collapse: bool) -> Result<Vec<Scanpath>> {
    let mut all: BTreeMap<io::TrialKey, Scanpath> = BTreeMap::new();
    for path in paths {
        let doc = io::read_json(path)?;
        let items: Vec<Value> = if let Some(v) = doc.get("scanpaths") {
            serde_json::from_value(v.clone())?
        } else if let Some(Value::Array(trials)) = doc.get("trials") {
            trials
                .iter()
                .map(|t| t.get("scanpath").cloned().context("results entry without scanpath"))
                .collect::<Result<_>>()?
        } else {
            bail!("{}: expected a 'scanpaths' or 'trials' array", path.display());
        };
        for item in items {
            let mut s: Scanpath =
                serde_json::from_value(item).with_context(|| format!("{}: invalid scanpath", path.display()))?;
            if collapse {
                s.sequence = s.sequence.collapse_repeats();
            }
            let key = key_of(&s);
            if all.insert(key.clone(), s).is_some() {
                bail!(
                    "{}: duplicate trial (participant '{}', condition '{}', trial '{}')",
                    path.display(),
                    key.0,
                    key.1,
                    key.2
                );
            }
        }
    }
    Ok(all.into_values().collect())
}

fn by_participant(scanpaths: Vec<Scanpath>) -> BTreeMap<String, Vec<Scanpath>> {
    let mut groups: BTreeMap<String, Vec<Scanpath>> = BTreeMap::new();
    for s in scanpaths {
        groups.entry(s.participant_id.clone()).or_default().push(s);
    }
    groups
}

#[derive(Serialize)]
struct TrialRecord {
    scanpath: Scanpath,
    outcome: TrialOutcome,
}

#[derive(Serialize)]
struct ResultsDoc {
    config: EmbeddingConfig,
    trials: Vec<TrialRecord>,
    lag_histogram: LagHistogram,
}

fn analyzed(outcomes: &[TrialOutcome]) -> Vec<TrialResult> {
    outcomes.iter().filter_map(TrialOutcome::result).cloned().collect()
}

fn cmd_ais(inputs: &[PathBuf], settings: &Settings, out: Option<&Path>) -> Result<()> {
    let cfg = settings.embedding;
    let mut trials = Vec::new();
    // Trial seeds are ranked within each participant, matching `compare`.
    for (_, group) in by_participant(load_scanpaths(inputs, settings.pipeline.collapse_repeats)?) {
        let outcomes = analyze_trials(&group, &cfg)?;
        let mut group = group;
        group.sort_by_key(key_of);
        for (scanpath, outcome) in group.into_iter().zip(outcomes) {
            trials.push(TrialRecord { scanpath, outcome });
        }
    }
    let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.outcome.clone()).collect();
    let doc = ResultsDoc {
        config: cfg,
        lag_histogram: lag_histogram(&analyzed(&outcomes), cfg.k_max),
        trials,
    };
    emit(out, &to_json(&doc)?)
}

#[derive(Serialize)]
struct ComparisonDoc<'a> {
    embedding: EmbeddingConfig,
    comparison: &'a CompareConfig,
    participants: &'a [ParticipantComparison],
}

fn cmd_compare(inputs: &[PathBuf], settings: &Settings, out: Option<&Path>) -> Result<()> {
    let scanpaths = load_scanpaths(inputs, settings.pipeline.collapse_repeats)?;
    let mut results = Vec::new();
    for (participant, group) in by_participant(scanpaths) {
        let c = compare_conditions(&group, &settings.embedding, &settings.compare)
            .with_context(|| format!("participant '{participant}'"))?;
        results.push(c);
    }
    let doc = ComparisonDoc {
        embedding: settings.embedding,
        comparison: &settings.compare,
        participants: &results,
    };
    let json = to_json(&doc)?;
    match out {
        None => emit(None, &json),
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            emit(Some(&dir.join("comparison.json")), &json)?;
            write_summary_csv(&dir.join("summary.csv"), &results)?;
            write_contrast_csv(&dir.join("contrasts.csv"), &results)?;
            write_histogram_csv(&dir.join("lag_histogram.csv"), &results, settings.embedding.k_max)
        }
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn write_summary_csv(path: &Path, results: &[ParticipantComparison]) -> Result<()> {
    let mut w = io::csv_writer(Some(path))?;
    w.write_record([
        "participant_id",
        "condition",
        "n_trials",
        "ais_mean",
        "ais_sem",
        "entropy_mean",
        "entropy_sem",
        "normalized_ais_mean",
        "normalized_ais_sem",
    ])?;
    for c in results {
        for s in [&c.summary_a, &c.summary_b] {
            w.write_record([
                c.participant_id.clone(),
                s.condition.clone(),
                s.n_trials.to_string(),
                opt_num(s.ais.map(|m| m.mean)),
                opt_num(s.ais.map(|m| m.sem)),
                opt_num(s.entropy.map(|m| m.mean)),
                opt_num(s.entropy.map(|m| m.sem)),
                opt_num(s.normalized_ais.map(|m| m.mean)),
                opt_num(s.normalized_ais.map(|m| m.sem)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_contrast_csv(path: &Path, results: &[ParticipantComparison]) -> Result<()> {
    let mut w = io::csv_writer(Some(path))?;
    w.write_record([
        "participant_id",
        "condition_a",
        "condition_b",
        "measure",
        "difference",
        "direction",
        "p_value",
        "n_perm",
    ])?;
    for c in results {
        for k in [Some(&c.ais), Some(&c.entropy), c.normalized_ais.as_ref()].into_iter().flatten() {
            let direction = serde_json::to_value(k.direction)?;
            w.write_record([
                c.participant_id.clone(),
                c.condition_a.clone(),
                c.condition_b.clone(),
                k.measure.clone(),
                fmt_num(k.observed_difference),
                direction.as_str().unwrap_or_default().to_string(),
                fmt_num(k.test.p_value),
                k.test.n_perm.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_histogram_csv(path: &Path, results: &[ParticipantComparison], k_max: usize) -> Result<()> {
    let mut w = io::csv_writer(Some(path))?;
    w.write_record(["participant_id", "lag", "count", "n_trials"])?;
    let mut pooled = Vec::new();
    for c in results {
        let trials = analyzed(&c.per_trial);
        let h = lag_histogram(&trials, k_max);
        for (i, n) in h.counts.iter().enumerate() {
            w.write_record([c.participant_id.clone(), (i + 1).to_string(), n.to_string(), h.n_trials.to_string()])?;
        }
        pooled.extend(trials);
    }
    let h = lag_histogram(&pooled, k_max);
    for (i, n) in h.counts.iter().enumerate() {
        w.write_record(["all".to_string(), (i + 1).to_string(), n.to_string(), h.n_trials.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

struct Simulation<'a> {
    length: usize,
    trials: usize,
    participant: &'a str,
    condition: &'a str,
}

#[derive(Serialize)]
struct Analytic {
    /// Past state of the full chain order (lag 1 for order 0).
    lags: PastState,
    ais: f64,
    gte: f64,
    entropy: f64,
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    spec: &'a MarkovSpec,
    seed: u64,
    length: usize,
    analytic: Analytic,
    scanpaths: &'a [Scanpath],
}

fn cmd_simulate(spec_path: &Path, sim: &Simulation<'_>, settings: &Settings, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("cannot read {}", spec_path.display()))?;
    let spec: MarkovSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid Markov spec {}", spec_path.display()))?;
    let lags = PastState::full(spec.order().max(1));
    let analytic = Analytic {
        ais: analytic_ais(&spec, &lags)?,
        gte: analytic_gte(&spec)?,
        entropy: analytic_entropy(&spec)?,
        lags,
    };
    let seed = settings.embedding.seed;
    let width = sim.trials.saturating_sub(1).to_string().len();
    let scanpaths: Vec<Scanpath> = (0..sim.trials)
        .into_par_iter()
        .map(|i| {
            let mut sequence = generate(&spec, sim.length, derive_seed(seed, i as u64), DEFAULT_BURN_IN)?;
            if settings.pipeline.collapse_repeats {
                sequence = sequence.collapse_repeats();
            }
            Ok(Scanpath {
                trial_id: format!("t{i:0width$}"),
                participant_id: sim.participant.to_string(),
                condition: sim.condition.to_string(),
                sequence,
                dropped_fixations: 0,
            })
        })
        .collect::<Result<_>>()?;
    let doc = SimulationDoc {
        spec: &spec,
        seed,
        length: sim.length,
        analytic,
        scanpaths: &scanpaths,
    };
    emit(out, &to_json(&doc)?)
}

#[derive(Serialize)]
struct ValidationDoc<'a> {
    seed: u64,
    scale: &'a Scale,
    passed: bool,
    criteria: &'a [CriterionOutcome],
}

fn cmd_validate(scale: &Scale, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let outcomes = validation::run_all(scale, seed)?;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    if let Some(path) = out {
        emit(
            Some(path),
            &to_json(&ValidationDoc {
                seed,
                scale,
                passed,
                criteria: &outcomes,
            })?,
        )?;
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
