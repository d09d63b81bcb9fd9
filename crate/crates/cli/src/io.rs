use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{Number, Value};

use scanpath_ais::gaze::{Fixation, GazeSample, Trial};

pub const SCHEMA_VERSION: u32 = 1;

/// `(participant_id, condition, trial_id)`; sorting by it gives the canonical
/// output order.
pub type TrialKey = (String, String, String);

/// Round to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    format!("{}", round12(x))
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serialize `body` with a `schema_version` field and 12-digit numbers.
pub fn to_json<T: Serialize>(body: &T) -> Result<String> {
    let mut value = serde_json::to_value(body)?;
    round_value(&mut value);
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    match value {
        Value::Object(map) => out.extend(map),
        other => {
            out.insert("data".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(out))?;
    text.push('\n');
    Ok(text)
}

/// Write to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
            Ok(())
        }
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(Box::new(file) as Box<dyn Read>))
}

struct Columns {
    index: BTreeMap<&'static str, usize>,
}

impl Columns {
    fn find(headers: &csv::StringRecord, required: &[&'static str], optional: &[&'static str]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for &name in required.iter().chain(optional) {
            match headers.iter().position(|h| h == name) {
                Some(i) => {
                    index.insert(name, i);
                }
                None if required.contains(&name) => bail!("missing column '{name}'"),
                None => {}
            }
        }
        Ok(Self { index })
    }

    fn text<'r>(&self, row: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&i| row.get(i))
    }

    fn number(&self, row: &csv::StringRecord, name: &str, line: u64) -> Result<f64> {
        let raw = self.text(row, name).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| anyhow!("line {line}: column '{name}' has invalid number '{raw}'"))?;
        if !v.is_finite() {
            bail!("line {line}: column '{name}' is not finite");
        }
        Ok(v)
    }
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

fn csv_error(path: &Path, e: csv::Error) -> anyhow::Error {
    match e.position() {
        Some(p) => anyhow!("{}: line {}: {e}", path.display(), p.line()),
        None => anyhow!("{}: {e}", path.display()),
    }
}

pub const GAZE_COLUMNS: [&str; 7] = ["trial_id", "participant_id", "condition", "timestamp", "x", "y", "confidence"];

/// Read a gaze sample CSV as trials in canonical order.
pub fn read_gaze_csv(path: &Path) -> Result<Vec<Trial>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = Columns::find(&headers, &GAZE_COLUMNS, &[]).with_context(|| path.display().to_string())?;
    let mut trials: BTreeMap<TrialKey, Vec<GazeSample>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = line_of(&row);
        let key = (
            cols.text(&row, "participant_id").unwrap_or("").to_string(),
            cols.text(&row, "condition").unwrap_or("").to_string(),
            cols.text(&row, "trial_id").unwrap_or("").to_string(),
        );
        if key.2.is_empty() {
            bail!("{}: line {line}: empty trial_id", path.display());
        }
        let num = |name| cols.number(&row, name, line).with_context(|| path.display().to_string());
        let sample = GazeSample {
            timestamp: num("timestamp")?,
            x: num("x")?,
            y: num("y")?,
            confidence: num("confidence")?,
        };
        trials.entry(key).or_default().push(sample);
    }
    Ok(trials
        .into_iter()
        .map(|((p, c, t), samples)| Trial::new(&p, &c, &t, samples))
        .collect())
}

pub const FIXATION_COLUMNS: [&str; 5] = ["trial_id", "start_time", "duration_ms", "centroid_x", "centroid_y"];

/// True when the CSV header looks like fixation output rather than gaze samples.
pub fn is_fixation_csv(path: &Path) -> Result<bool> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    Ok(headers.iter().any(|h| h == "duration_ms"))
}

/// Read fixation rows grouped by trial. `participant_id` and `condition`
/// columns are optional and default to empty labels.
pub fn read_fixation_csv(path: &Path) -> Result<Vec<(TrialKey, Vec<Fixation>)>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = Columns::find(&headers, &FIXATION_COLUMNS, &["participant_id", "condition", "sample_count"])
        .with_context(|| path.display().to_string())?;
    let mut trials: BTreeMap<TrialKey, Vec<Fixation>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = line_of(&row);
        let key = (
            cols.text(&row, "participant_id").unwrap_or("").to_string(),
            cols.text(&row, "condition").unwrap_or("").to_string(),
            cols.text(&row, "trial_id").unwrap_or("").to_string(),
        );
        let num = |name| cols.number(&row, name, line).with_context(|| path.display().to_string());
        let sample_count = match cols.text(&row, "sample_count") {
            Some(_) => num("sample_count")? as usize,
            None => 0,
        };
        trials.entry(key).or_default().push(Fixation {
            start_time: num("start_time")?,
            duration_ms: num("duration_ms")?,
            centroid_x: num("centroid_x")?,
            centroid_y: num("centroid_y")?,
            sample_count,
        });
    }
    for fixations in trials.values_mut() {
        fixations.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    }
    Ok(trials.into_iter().collect())
}

/// CSV writer over a file or stdout.
pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}
