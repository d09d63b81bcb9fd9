//! Raw gaze samples to AOI scanpaths.
//!
//! The pipeline is confidence filter, IDT fixation detection, long-fixation
//! filter, then AOI lookup on fixation centroids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::SymbolSequence;

/// Slack for inclusive comparisons on values derived from floating-point
/// timestamps and coordinates (milliseconds or pixels).
const BOUNDARY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Seconds.
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    /// Seconds, timestamp of the first member sample.
    pub start_time: f64,
    /// Milliseconds from the first to the last member sample.
    pub duration_ms: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub sample_count: usize,
}

/// A rectangular area of interest. Membership is half-open:
/// `x_min <= x < x_max` and `y_min <= y < y_max`, so regions that share an
/// edge do not overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRegion {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub rect: [f64; 4],
    /// Higher wins where regions overlap.
    #[serde(default)]
    pub priority: Option<i32>,
}

impl AoiRegion {
    pub fn new(id: u32, name: &str, rect: [f64; 4], priority: i32) -> Self {
        Self {
            id,
            name: name.to_string(),
            rect,
            priority: Some(priority),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.rect;
        x >= x0 && x < x1 && y >= y0 && y < y1
    }

    fn overlaps(&self, other: &AoiRegion) -> bool {
        let [ax0, ay0, ax1, ay1] = self.rect;
        let [bx0, by0, bx1, by1] = other.rect;
        ax0.max(bx0) < ax1.min(bx1) && ay0.max(by0) < ay1.min(by1)
    }
}

/// A validated set of AOIs whose ids are exactly `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiLayout {
    regions: Vec<AoiRegion>,
}

impl AoiLayout {
    /// Overlapping regions must carry distinct explicit priorities.
    pub fn new(mut regions: Vec<AoiRegion>) -> Result<Self> {
        let n = regions.len();
        let mut seen = vec![false; n];
        for r in &regions {
            let idx = r.id as usize;
            if idx >= n {
                // A duplicate can push another id out of range; report it as such.
                if regions.iter().filter(|o| o.id == r.id).count() > 1 {
                    return Err(Error::DuplicateAoi(r.id));
                }
                return Err(Error::AoiIdOutOfRange { id: r.id, n });
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::DuplicateAoi(r.id));
            }
            let [x0, y0, x1, y1] = r.rect;
            if !(x0 < x1 && y0 < y1) {
                return Err(Error::DegenerateAoi { id: r.id });
            }
        }
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if a.overlaps(b) {
                    match (a.priority, b.priority) {
                        (Some(pa), Some(pb)) if pa != pb => {}
                        _ => {
                            return Err(Error::AmbiguousOverlap {
                                a: a.id.min(b.id),
                                b: a.id.max(b.id),
                            })
                        }
                    }
                }
            }
        }
        regions.sort_by_key(|r| r.id);
        Ok(Self { regions })
    }

    /// Two screen halves (ids 0 and 1) plus a target box in each image
    /// (ids 2 and 3), each target expanded by `margin` pixels on every side.
    pub fn split_screen(
        width: f64,
        height: f64,
        left_target: [f64; 4],
        right_target: [f64; 4],
        margin: f64,
    ) -> Result<Self> {
        let grow = |[x0, y0, x1, y1]: [f64; 4]| [x0 - margin, y0 - margin, x1 + margin, y1 + margin];
        let half = width / 2.0;
        Self::new(vec![
            AoiRegion::new(0, "left_half", [0.0, 0.0, half, height], 0),
            AoiRegion::new(1, "right_half", [half, 0.0, width, height], 0),
            AoiRegion::new(2, "left_target", grow(left_target), 1),
            AoiRegion::new(3, "right_target", grow(right_target), 1),
        ])
    }

    pub fn regions(&self) -> &[AoiRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Id of the highest-priority region containing the fixation centroid.
    pub fn lookup(&self, fix: &Fixation) -> Option<u32> {
        self.regions
            .iter()
            .filter(|r| r.contains(fix.centroid_x, fix.centroid_y))
            .max_by_key(|r| r.priority.unwrap_or(0))
            .map(|r| r.id)
    }
}

/// Validate `aois` and look up `fix` in them.
pub fn map_to_aoi(fix: &Fixation, aois: &[AoiRegion]) -> Result<Option<u32>> {
    Ok(AoiLayout::new(aois.to_vec())?.lookup(fix))
}

/// Keep samples with `confidence >= min_confidence`.
pub fn filter_gaze(samples: &[GazeSample], min_confidence: f64) -> Vec<GazeSample> {
    samples
        .iter()
        .filter(|s| s.confidence >= min_confidence)
        .copied()
        .collect()
}

fn duration_ms(samples: &[GazeSample], first: usize, last: usize) -> f64 {
    (samples[last].timestamp - samples[first].timestamp) * 1000.0
}

#[derive(Clone, Copy)]
struct Bounds {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Bounds {
    fn of(s: &GazeSample) -> Self {
        Self {
            x0: s.x,
            x1: s.x,
            y0: s.y,
            y1: s.y,
        }
    }

    fn with(self, s: &GazeSample) -> Self {
        Self {
            x0: self.x0.min(s.x),
            x1: self.x1.max(s.x),
            y0: self.y0.min(s.y),
            y1: self.y1.max(s.y),
        }
    }

    fn dispersion(&self) -> f64 {
        (self.x1 - self.x0) + (self.y1 - self.y0)
    }
}

fn make_fixation(window: &[GazeSample]) -> Fixation {
    let n = window.len() as f64;
    let cx = window.iter().map(|s| s.x).sum::<f64>() / n;
    let cy = window.iter().map(|s| s.y).sum::<f64>() / n;
    Fixation {
        start_time: window[0].timestamp,
        duration_ms: (window[window.len() - 1].timestamp - window[0].timestamp) * 1000.0,
        centroid_x: cx,
        centroid_y: cy,
        sample_count: window.len(),
    }
}

/// Dispersion-threshold fixation identification.
///
/// A window starting at the first unconsumed sample is grown until it spans
/// `min_duration_ms`. If its dispersion `(max x - min x) + (max y - min y)`
/// is at most `dispersion_threshold`, it is extended while the next sample
/// keeps it within the threshold, emitted as a fixation and consumed.
/// Otherwise the window start advances by one sample. Both thresholds are
/// inclusive.
pub fn detect_fixations_idt(
    samples: &[GazeSample],
    dispersion_threshold: f64,
    min_duration_ms: f64,
) -> Vec<Fixation> {
    let n = samples.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && duration_ms(samples, start, end) < min_duration_ms - BOUNDARY_SLACK {
            end += 1;
        }
        if end == n {
            break;
        }
        let mut bounds = samples[start..=end]
            .iter()
            .skip(1)
            .fold(Bounds::of(&samples[start]), Bounds::with);
        if bounds.dispersion() <= dispersion_threshold + BOUNDARY_SLACK {
            while end + 1 < n {
                let grown = bounds.with(&samples[end + 1]);
                if grown.dispersion() > dispersion_threshold + BOUNDARY_SLACK {
                    break;
                }
                bounds = grown;
                end += 1;
            }
            out.push(make_fixation(&samples[start..=end]));
            start = end + 1;
        } else {
            start += 1;
        }
    }
    out
}

/// Drop fixations longer than `max_duration_ms`; exactly the maximum is kept.
pub fn filter_fixations(fixations: &[Fixation], max_duration_ms: f64) -> Vec<Fixation> {
    fixations
        .iter()
        .filter(|f| f.duration_ms <= max_duration_ms + BOUNDARY_SLACK)
        .copied()
        .collect()
}

/// Gaze samples of one trial, ordered by timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub participant_id: String,
    pub condition: String,
    pub trial_id: String,
    pub samples: Vec<GazeSample>,
}

impl Trial {
    /// Sorts `samples` by timestamp.
    pub fn new(participant_id: &str, condition: &str, trial_id: &str, mut samples: Vec<GazeSample>) -> Self {
        samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Self {
            participant_id: participant_id.to_string(),
            condition: condition.to_string(),
            trial_id: trial_id.to_string(),
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub min_confidence: f64,
    /// Pixels.
    pub dispersion_threshold: f64,
    pub min_duration_ms: f64,
    pub max_duration_ms: f64,
    pub collapse_repeats: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            min_confidence: 0.9,
            dispersion_threshold: 50.0,
            min_duration_ms: 100.0,
            max_duration_ms: 1500.0,
            collapse_repeats: false,
        }
    }
}

/// One trial's scanpath with its identifying labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub trial_id: String,
    pub participant_id: String,
    pub condition: String,
    /// Serialized inline as `symbols` and `alphabet_size`.
    #[serde(flatten)]
    pub sequence: SymbolSequence,
    /// Fixations whose centroid fell outside every AOI.
    pub dropped_fixations: usize,
}

/// Confidence-filtered fixations of a trial that pass the duration limits.
pub fn trial_fixations(trial: &Trial, params: &PipelineParams) -> Vec<Fixation> {
    let kept = filter_gaze(&trial.samples, params.min_confidence);
    let fixations = detect_fixations_idt(&kept, params.dispersion_threshold, params.min_duration_ms);
    filter_fixations(&fixations, params.max_duration_ms)
}

/// Map already detected fixations to a scanpath.
pub fn scanpath_from_fixations(
    labels: (&str, &str, &str),
    fixations: &[Fixation],
    aois: &AoiLayout,
    collapse_repeats: bool,
) -> Result<Scanpath> {
    let (participant_id, condition, trial_id) = labels;
    let mut symbols = Vec::with_capacity(fixations.len());
    let mut dropped = 0;
    for f in fixations {
        match aois.lookup(f) {
            Some(id) => symbols.push(id),
            None => dropped += 1,
        }
    }
    let mut sequence = SymbolSequence::new(symbols, aois.len().max(1))?;
    if collapse_repeats {
        sequence = sequence.collapse_repeats();
    }
    Ok(Scanpath {
        trial_id: trial_id.to_string(),
        participant_id: participant_id.to_string(),
        condition: condition.to_string(),
        sequence,
        dropped_fixations: dropped,
    })
}

/// Full pipeline for one trial.
pub fn build_scanpath(trial: &Trial, aois: &AoiLayout, params: &PipelineParams) -> Result<Scanpath> {
    let fixations = trial_fixations(trial, params);
    scanpath_from_fixations(
        (&trial.participant_id, &trial.condition, &trial.trial_id),
        &fixations,
        aois,
        params.collapse_repeats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 120.0;

    fn stationary(t0: f64, count: usize, x: f64, y: f64) -> Vec<GazeSample> {
        (0..count)
            .map(|i| GazeSample {
                timestamp: t0 + i as f64 * DT,
                x,
                y,
                confidence: 1.0,
            })
            .collect()
    }

    fn fix_at(x: f64, y: f64) -> Fixation {
        Fixation {
            start_time: 0.0,
            duration_ms: 200.0,
            centroid_x: x,
            centroid_y: y,
            sample_count: 10,
        }
    }

    #[test]
    fn confidence_boundaries() {
        let mut s = stationary(0.0, 5, 1.0, 1.0);
        assert_eq!(filter_gaze(&s, 0.9), s);
        s.iter_mut().for_each(|g| g.confidence = 0.0);
        assert!(filter_gaze(&s, 0.9).is_empty());
        s[2].confidence = 0.9;
        assert_eq!(filter_gaze(&s, 0.9).len(), 1);
    }

    #[test]
    fn single_stationary_fixation() {
        let samples: Vec<GazeSample> = (0..30)
            .map(|i| GazeSample {
                timestamp: i as f64 * 250.0 / 29.0 / 1000.0,
                x: 300.0,
                y: 200.0,
                confidence: 1.0,
            })
            .collect();
        let f = detect_fixations_idt(&samples, 50.0, 100.0);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].sample_count, 30);
        assert!((f[0].centroid_x - 300.0).abs() < 1e-9);
        assert!((f[0].duration_ms - 250.0).abs() < 1e-9);
    }

    #[test]
    fn dispersion_boundary_inclusive() {
        // Alternate between two points 30 px apart in x and 20 px in y: D = 50.
        let samples: Vec<GazeSample> = (0..20)
            .map(|i| GazeSample {
                timestamp: i as f64 * DT,
                x: if i % 2 == 0 { 100.0 } else { 130.0 },
                y: if i % 2 == 0 { 100.0 } else { 120.0 },
                confidence: 1.0,
            })
            .collect();
        assert_eq!(detect_fixations_idt(&samples, 50.0, 100.0).len(), 1);
        assert!(detect_fixations_idt(&samples, 49.9, 100.0).is_empty());
    }

    #[test]
    fn duration_boundary_inclusive() {
        // 11 samples at 10 ms spacing span exactly 100 ms.
        let samples: Vec<GazeSample> = (0..11)
            .map(|i| GazeSample {
                timestamp: i as f64 * 0.01,
                x: 5.0,
                y: 5.0,
                confidence: 1.0,
            })
            .collect();
        assert_eq!(detect_fixations_idt(&samples, 50.0, 100.0).len(), 1);
        assert!(detect_fixations_idt(&samples[..10], 50.0, 100.0).is_empty());
    }

    #[test]
    fn max_duration_filter() {
        let mut a = fix_at(0.0, 0.0);
        a.duration_ms = 1500.0;
        let mut b = a;
        b.duration_ms = 1501.0;
        assert_eq!(filter_fixations(&[a, b], 1500.0), vec![a]);
        assert!(filter_fixations(&[], 1500.0).is_empty());
    }

    fn four_aoi_layout() -> AoiLayout {
        AoiLayout::split_screen(
            1920.0,
            1080.0,
            [300.0, 400.0, 400.0, 500.0],
            [1260.0, 400.0, 1360.0, 500.0],
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn aoi_priority() {
        let layout = four_aoi_layout();
        assert_eq!(layout.lookup(&fix_at(320.0, 420.0)), Some(2));
        // Inside the 50 px frame of the target.
        assert_eq!(layout.lookup(&fix_at(260.0, 380.0)), Some(2));
        assert_eq!(layout.lookup(&fix_at(100.0, 100.0)), Some(0));
        assert_eq!(layout.lookup(&fix_at(1300.0, 450.0)), Some(3));
        assert_eq!(layout.lookup(&fix_at(1500.0, 50.0)), Some(1));
        assert_eq!(layout.lookup(&fix_at(-10.0, 50.0)), None);
        assert_eq!(layout.lookup(&fix_at(100.0, 2000.0)), None);
    }

    #[test]
    fn aoi_validation() {
        let r = |id, rect, p| AoiRegion {
            id,
            name: String::new(),
            rect,
            priority: p,
        };
        assert_eq!(
            map_to_aoi(&fix_at(1.0, 1.0), &[r(0, [0.0, 0.0, 5.0, 5.0], Some(0)), r(0, [5.0, 0.0, 9.0, 5.0], Some(0))]),
            Err(Error::DuplicateAoi(0))
        );
        assert_eq!(
            AoiLayout::new(vec![r(0, [0.0, 0.0, 5.0, 5.0], None), r(1, [1.0, 1.0, 2.0, 2.0], None)]),
            Err(Error::AmbiguousOverlap { a: 0, b: 1 })
        );
        assert_eq!(
            AoiLayout::new(vec![r(0, [0.0, 0.0, 5.0, 5.0], Some(1)), r(1, [1.0, 1.0, 2.0, 2.0], Some(1))]),
            Err(Error::AmbiguousOverlap { a: 0, b: 1 })
        );
        assert!(AoiLayout::new(vec![r(0, [0.0, 0.0, 5.0, 5.0], None), r(1, [5.0, 0.0, 9.0, 5.0], None)]).is_ok());
        assert!(matches!(
            AoiLayout::new(vec![r(0, [0.0, 0.0, 0.0, 5.0], None)]),
            Err(Error::DegenerateAoi { id: 0 })
        ));
        assert!(matches!(
            AoiLayout::new(vec![r(2, [0.0, 0.0, 1.0, 5.0], None)]),
            Err(Error::AoiIdOutOfRange { id: 2, .. })
        ));
    }

    fn planted_trial(targets: &[(f64, f64)]) -> Trial {
        let mut samples = Vec::new();
        let mut t = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for &(x, y) in targets {
            if let Some((px, py)) = prev {
                for k in 1..=3 {
                    let a = k as f64 / 4.0;
                    samples.push(GazeSample {
                        timestamp: t,
                        x: px + a * (x - px),
                        y: py + a * (y - py),
                        confidence: 1.0,
                    });
                    t += DT;
                }
            }
            let cluster = stationary(t, 25, x, y);
            t += 25.0 * DT;
            samples.extend(cluster);
            prev = Some((x, y));
        }
        Trial::new("p1", "TC", "t1", samples)
    }

    #[test]
    fn planted_scanpath() {
        let layout = four_aoi_layout();
        let trial = planted_trial(&[(350.0, 450.0), (100.0, 900.0), (350.0, 450.0), (1600.0, 200.0)]);
        let sp = build_scanpath(&trial, &layout, &PipelineParams::default()).unwrap();
        assert_eq!(sp.sequence.symbols(), &[2, 0, 2, 1]);
        assert_eq!(sp.sequence.alphabet_size(), 4);
        assert_eq!(sp.dropped_fixations, 0);
    }

    #[test]
    fn low_confidence_trial_is_empty() {
        let mut trial = planted_trial(&[(350.0, 450.0), (100.0, 900.0)]);
        trial.samples.iter_mut().for_each(|s| s.confidence = 0.5);
        let sp = build_scanpath(&trial, &four_aoi_layout(), &PipelineParams::default()).unwrap();
        assert!(sp.sequence.is_empty());
    }

    #[test]
    fn collapse_flag() {
        let layout = four_aoi_layout();
        let trial = planted_trial(&[
            (100.0, 100.0),
            (100.0, 700.0),
            (1500.0, 100.0),
            (1500.0, 700.0),
            (1310.0, 450.0),
        ]);
        let params = PipelineParams::default();
        let plain = build_scanpath(&trial, &layout, &params).unwrap();
        assert_eq!(plain.sequence.symbols(), &[0, 0, 1, 1, 3]);
        let collapsed = build_scanpath(
            &trial,
            &layout,
            &PipelineParams {
                collapse_repeats: true,
                ..params
            },
        )
        .unwrap();
        assert_eq!(collapsed.sequence.symbols(), &[0, 1, 3]);
    }

    #[test]
    fn off_screen_fixation_dropped() {
        let layout = four_aoi_layout();
        let trial = planted_trial(&[(100.0, 100.0), (2500.0, 100.0), (1500.0, 100.0)]);
        let sp = build_scanpath(&trial, &layout, &PipelineParams::default()).unwrap();
        assert_eq!(sp.sequence.symbols(), &[0, 1]);
        assert_eq!(sp.dropped_fixations, 1);
    }

    #[test]
    fn scanpath_json_is_flat() {
        let sp = Scanpath {
            trial_id: "t".into(),
            participant_id: "p".into(),
            condition: "c".into(),
            sequence: SymbolSequence::new(vec![0, 2, 1], 3).unwrap(),
            dropped_fixations: 1,
        };
        let v = serde_json::to_value(&sp).unwrap();
        assert_eq!(v["symbols"], serde_json::json!([0, 2, 1]));
        assert_eq!(v["alphabet_size"], 3);
        assert_eq!(serde_json::from_value::<Scanpath>(v).unwrap(), sp);
        let bad = serde_json::json!({
            "trial_id": "t", "participant_id": "p", "condition": "c",
            "symbols": [0, 5], "alphabet_size": 3, "dropped_fixations": 0
        });
        assert!(serde_json::from_value::<Scanpath>(bad).is_err());
    }
}
