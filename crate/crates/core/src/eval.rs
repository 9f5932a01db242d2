//! Scoring detections against ground truth, the corpus benchmark, and the
//! shroud depth sweep.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::audio_io::read_wav;
use crate::error::{Error, Result};
use crate::signature::{DetectionEvent, Detector};
use crate::soundscape::{
    apply_shroud, pink_noise, read_manifest, CorpusSpec, GroundTruth, ShroudModel, SimConfig, INCH_M,
};
use crate::spectral::{band_powers, third_octave_bands, Band};

pub const DEFAULT_TOLERANCE_S: f64 = 0.25;

/// Truth time and the detection onset it was matched to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedEvent {
    pub truth_s: f64,
    pub detection_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_event: Vec<MatchedEvent>,
}

impl EvalReport {
    /// Metrics from counts. Empty denominators give precision and recall of
    /// 1, accuracy of 1 when all counts are zero, and F1 of 0 when precision
    /// and recall are both 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
            accuracy: ratio(tp, tp + fp + fn_),
            per_event: Vec::new(),
        }
    }

    /// Counts summed with `other`; per-event detail is dropped.
    pub fn combined(&self, other: &EvalReport) -> Self {
        Self::from_counts(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )
    }
}

/// Greedy chronological matching. Each truth, in order, takes the nearest
/// still-unmatched `connection_click` detection within `tolerance_s` (the
/// earlier one on a tie). `other_transient` detections are ignored.
pub fn match_detections(
    detections: &[DetectionEvent],
    truth: &GroundTruth,
    tolerance_s: f64,
) -> Result<EvalReport> {
    if !(tolerance_s > 0.0 && tolerance_s.is_finite()) {
        return Err(Error::precondition(format!(
            "tolerance {tolerance_s} s must be positive"
        )));
    }
    let times = truth.times();
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::precondition("truth times must be sorted ascending"));
    }
    let mut onsets: Vec<f64> = detections
        .iter()
        .filter(|d| d.is_click())
        .map(|d| d.onset_s)
        .collect();
    onsets.sort_by(f64::total_cmp);

    let mut used = vec![false; onsets.len()];
    let mut per_event = Vec::with_capacity(times.len());
    for &t in &times {
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in onsets.iter().enumerate() {
            let gap = (d - t).abs();
            if used[i] || gap > tolerance_s {
                continue;
            }
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((i, gap));
            }
        }
        if let Some((i, _)) = best {
            used[i] = true;
        }
        per_event.push(MatchedEvent {
            truth_s: t,
            detection_s: best.map(|(i, _)| onsets[i]),
        });
    }
    let tp = per_event.iter().filter(|m| m.detection_s.is_some()).count();
    let mut report = EvalReport::from_counts(tp, onsets.len() - tp, times.len() - tp);
    report.per_event = per_event;
    Ok(report)
}

/// Detections and truth for one benchmark clip.
#[derive(Debug, Clone)]
pub struct ClipOutcome {
    pub name: String,
    pub snr_db: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrBucket {
    pub snr_db: f64,
    pub clips: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub corpus: String,
    pub clips: usize,
    pub tolerance_s: f64,
    pub overall: EvalReport,
    pub by_snr: Vec<SnrBucket>,
}

impl BenchmarkReport {
    /// Aggregates clip outcomes in the order given.
    pub fn aggregate(corpus: impl Into<String>, tolerance_s: f64, clips: &[ClipOutcome]) -> Self {
        let mut overall = EvalReport::from_counts(0, 0, 0);
        let mut by_snr: Vec<SnrBucket> = Vec::new();
        for c in clips {
            overall = overall.combined(&c.report);
            match by_snr.iter_mut().find(|b| b.snr_db == c.snr_db) {
                Some(b) => {
                    b.clips += 1;
                    b.report = b.report.combined(&c.report);
                }
                None => by_snr.push(SnrBucket {
                    snr_db: c.snr_db,
                    clips: 1,
                    report: EvalReport::from_counts(
                        c.report.true_positives,
                        c.report.false_positives,
                        c.report.false_negatives,
                    ),
                }),
            }
        }
        by_snr.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        Self {
            corpus: corpus.into(),
            clips: clips.len(),
            tolerance_s,
            overall,
            by_snr,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.corpus);
        let _ = writeln!(s, "# {} clips, match tolerance {} s", self.clips, self.tolerance_s);
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>5} {:>5} {:>5} {:>9} {:>9} {:>9} {:>9}",
            "snr_db", "clips", "tp", "fp", "fn", "precision", "recall", "f1", "accuracy"
        );
        let mut row = |label: String, clips: usize, r: &EvalReport| {
            let _ = writeln!(
                s,
                "{:>8} {:>6} {:>5} {:>5} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                label,
                clips,
                r.true_positives,
                r.false_positives,
                r.false_negatives,
                r.precision,
                r.recall,
                r.f1,
                r.accuracy
            );
        };
        for b in &self.by_snr {
            row(format!("{:+}", b.snr_db), b.clips, &b.report);
        }
        row("all".into(), self.clips, &self.overall);
        s
    }
}

/// Runs `clip(i)` for `i in 0..n` on at most `jobs` threads and returns the
/// outcomes in index order. The first failing clip (by index) aborts.
pub fn evaluate_clips<F>(n: usize, jobs: usize, clip: F) -> Result<Vec<ClipOutcome>>
where
    F: Fn(usize) -> Result<ClipOutcome> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let results: Vec<Result<ClipOutcome>> = pool.install(|| (0..n).into_par_iter().map(&clip).collect());
    results.into_iter().collect()
}

/// Detects on every clip listed in a manifest and scores it against its
/// truth file.
pub fn run_benchmark(manifest: impl AsRef<Path>, detector: &Detector, jobs: usize) -> Result<BenchmarkReport> {
    let manifest = manifest.as_ref();
    let entries = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let outcomes = evaluate_clips(entries.len(), jobs, |i| {
        let e = &entries[i];
        let wav = base.join(&e.wav_path);
        let buffer = read_wav(&wav)?;
        let truth = GroundTruth::read_csv(base.join(&e.truth_path))?;
        let events = detector.detect_buffer(&buffer).map_err(|err| match err {
            Error::Precondition(m) | Error::Config(m) => Error::Format {
                path: wav.clone(),
                message: m,
            },
            other => other,
        })?;
        Ok(ClipOutcome {
            name: wav.display().to_string(),
            snr_db: e.snr_db,
            report: match_detections(&events, &truth, DEFAULT_TOLERANCE_S)?,
        })
    })?;
    Ok(BenchmarkReport::aggregate(
        format!("synthetic corpus from {}", manifest.display()),
        DEFAULT_TOLERANCE_S,
        &outcomes,
    ))
}

/// The benchmark over a generated corpus, synthesized in memory. Each clip
/// goes through 16-bit quantization, as it would on disk.
pub fn run_synthetic_benchmark(spec: &CorpusSpec, detector: &Detector, jobs: usize) -> Result<BenchmarkReport> {
    let outcomes = evaluate_clips(spec.len(), jobs, |i| {
        let clip = spec.clip(i)?;
        let pcm = crate::audio_io::decode_wav(&crate::audio_io::encode_wav(&clip.buffer))
            .expect("16-bit encoding decodes");
        let events = detector.detect_buffer(&pcm)?;
        Ok(ClipOutcome {
            name: format!("clip {i} (seed {})", clip.seed),
            snr_db: clip.snr_db,
            report: match_detections(&events, &clip.truth, DEFAULT_TOLERANCE_S)?,
        })
    })?;
    Ok(BenchmarkReport::aggregate(
        format!(
            "synthetic corpus: {} clips x {} s factory noise, seeds from {}",
            spec.len(),
            spec.duration_s,
            spec.base_seed
        ),
        DEFAULT_TOLERANCE_S,
        &outcomes,
    ))
}

/// Inset depths from flush to 24 in, in 3 in steps.
pub fn default_depths() -> Vec<f64> {
    (0..=8).map(|k| 3.0 * k as f64 * INCH_M).collect()
}

pub const SWEEP_DURATION_S: f64 = 16.0;

/// Third-octave profiles of off-axis pink noise through the shroud at each
/// depth. Every depth filters the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSweep {
    pub depths_m: Vec<f64>,
    pub bands: Vec<Band>,
    /// `power_db[d][b]`: depth `d`, band `b`.
    pub power_db: Vec<Vec<f64>>,
}

impl DepthSweep {
    /// One row per band, one column per depth.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("center_hz");
        for d in &self.depths_m {
            let _ = write!(s, ",depth_{d:.4}_m");
        }
        s.push('\n');
        for (b, band) in self.bands.iter().enumerate() {
            let _ = write!(s, "{:.3}", band.center_hz);
            for col in &self.power_db {
                let _ = write!(s, ",{:.3}", col[b]);
            }
            s.push('\n');
        }
        s
    }

    /// True when, for every band centred above `min_hz`, power strictly
    /// falls as depth increases (columns taken in ascending depth order).
    pub fn strictly_ordered_above(&self, min_hz: f64) -> bool {
        let mut order: Vec<usize> = (0..self.depths_m.len()).collect();
        order.sort_by(|&a, &b| self.depths_m[a].total_cmp(&self.depths_m[b]));
        self.bands
            .iter()
            .enumerate()
            .filter(|(_, band)| band.center_hz > min_hz)
            .all(|(b, _)| {
                order
                    .windows(2)
                    .all(|w| self.power_db[w[1]][b] < self.power_db[w[0]][b])
            })
    }
}

pub fn depth_sweep(model: &ShroudModel, depths_m: &[f64], cfg: &SimConfig) -> Result<DepthSweep> {
    if depths_m.is_empty() {
        return Err(Error::precondition("depth sweep needs at least one depth"));
    }
    let pink = pink_noise(cfg)?;
    let nyquist = cfg.sample_rate_hz as f64 / 2.0;
    let bands = third_octave_bands(20.0, nyquist.min(20_000.0))?;
    let mut power_db = Vec::with_capacity(depths_m.len());
    let mut present = Vec::new();
    for &d in depths_m {
        let shrouded = apply_shroud(&pink, &model.with_depth(d), false)?;
        let profile = band_powers(&shrouded, &bands)?;
        present = profile.bands;
        power_db.push(profile.power_db);
    }
    Ok(DepthSweep {
        depths_m: depths_m.to_vec(),
        bands: present,
        power_db,
    })
}
