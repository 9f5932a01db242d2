//! Click detection: a short broadband burst above `burst_low_hz` that stands
//! out from a rolling median background, followed by a tail in the 1-8 kHz
//! region.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::audio_io::SampleBuffer;
use crate::config::Entry;
use crate::error::{Error, Result};
use crate::spectral::{self, Band, BandMap, Spectrogram};

pub const DEFAULT_BACKGROUND_WINDOW_S: f64 = 2.0;
/// Detections with onsets closer than this are merged.
pub const MERGE_WINDOW_S: f64 = 0.5;
/// Burst SNR at which the burst half of the score saturates.
pub const FULL_SCORE_SNR_DB: f64 = 20.0;
/// Tail duration at which the tail half of the score saturates.
pub const FULL_SCORE_TAIL_S: f64 = 0.3;
pub const MIN_SCORE: f64 = 0.5;
/// Background in each band is floored this far below the band's running peak.
pub const BACKGROUND_RANGE_DB: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLabel {
    ConnectionClick,
    OtherTransient,
}

impl EventLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::ConnectionClick => "connection_click",
            EventLabel::OtherTransient => "other_transient",
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "connection_click" => Ok(EventLabel::ConnectionClick),
            "other_transient" => Ok(EventLabel::OtherTransient),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

/// Gating parameters for the two-part click signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickSignature {
    pub burst_min_s: f64,
    pub burst_max_s: f64,
    pub burst_low_hz: f64,
    pub tail_band_hz: (f64, f64),
    pub tail_min_s: f64,
    pub tail_max_s: f64,
    pub onset_threshold_db: f64,
    pub tail_threshold_db: f64,
}

impl Default for ClickSignature {
    fn default() -> Self {
        Self {
            burst_min_s: 0.02,
            burst_max_s: 0.10,
            burst_low_hz: 8000.0,
            tail_band_hz: (1000.0, 8000.0),
            tail_min_s: 0.10,
            tail_max_s: 0.50,
            onset_threshold_db: 12.0,
            tail_threshold_db: 6.0,
        }
    }
}

impl ClickSignature {
    pub const KEYS: [&'static str; 9] = [
        "burst_min_s",
        "burst_max_s",
        "burst_low_hz",
        "tail_low_hz",
        "tail_high_hz",
        "tail_min_s",
        "tail_max_s",
        "onset_threshold_db",
        "tail_threshold_db",
    ];

    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let (lo, hi) = self.tail_band_hz;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.burst_min_s >= 0.0 && self.burst_min_s < self.burst_max_s) {
            return bad(format!(
                "burst_min_s ({}) must be >= 0 and below burst_max_s ({})",
                self.burst_min_s, self.burst_max_s
            ));
        }
        if !(self.tail_min_s >= 0.0 && self.tail_min_s < self.tail_max_s) {
            return bad(format!(
                "tail_min_s ({}) must be >= 0 and below tail_max_s ({})",
                self.tail_min_s, self.tail_max_s
            ));
        }
        if !(self.onset_threshold_db > 0.0 && self.tail_threshold_db > 0.0) {
            return bad("onset and tail thresholds must be positive".into());
        }
        if !(lo > 0.0 && lo < hi && hi <= nyquist) {
            return bad(format!(
                "tail band ({lo}, {hi}) Hz must be increasing and within Nyquist ({nyquist} Hz)"
            ));
        }
        if !(self.burst_low_hz > 0.0 && self.burst_low_hz < nyquist) {
            return bad(format!(
                "burst_low_hz ({}) must lie below Nyquist ({nyquist} Hz)",
                self.burst_low_hz
            ));
        }
        Ok(())
    }

    /// Applies one config entry. Returns `Ok(false)` for keys that belong to
    /// someone else.
    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        let slot = match entry.key.as_str() {
            "burst_min_s" => &mut self.burst_min_s,
            "burst_max_s" => &mut self.burst_max_s,
            "burst_low_hz" => &mut self.burst_low_hz,
            "tail_low_hz" => &mut self.tail_band_hz.0,
            "tail_high_hz" => &mut self.tail_band_hz.1,
            "tail_min_s" => &mut self.tail_min_s,
            "tail_max_s" => &mut self.tail_max_s,
            "onset_threshold_db" => &mut self.onset_threshold_db,
            "tail_threshold_db" => &mut self.tail_threshold_db,
            _ => return Ok(false),
        };
        *slot = entry.number()?;
        Ok(true)
    }

    /// Bands spanning both signature regions up to Nyquist.
    pub fn analysis_bands(&self, sample_rate_hz: u32) -> Result<Vec<Band>> {
        let lo = self.tail_band_hz.0.min(self.burst_low_hz);
        spectral::third_octave_bands(lo, sample_rate_hz as f64 / 2.0)
    }

    fn regions(&self, map: &BandMap) -> Regions {
        let (lo, hi) = self.tail_band_hz;
        let pick = |f: &dyn Fn(&Band) -> bool| {
            map.bands()
                .iter()
                .enumerate()
                .filter(|(_, b)| f(b))
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        Regions {
            burst: pick(&|b| b.lower_hz >= self.burst_low_hz),
            tail: pick(&|b| b.center_hz >= lo && b.center_hz <= hi),
        }
    }

    fn onset_ratio(&self) -> f64 {
        db_to_power(self.onset_threshold_db)
    }
}

/// Band indices (into a [`BandMap`]) of the burst and tail regions.
struct Regions {
    burst: Vec<usize>,
    tail: Vec<usize>,
}

fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn sum_at(row: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| row[i]).sum()
}

/// Per-band background power for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub background_power: Vec<f64>,
    pub window_s: f64,
}

impl NoiseEstimate {
    pub fn total(&self) -> f64 {
        self.background_power.iter().sum()
    }
}

/// Causal rolling per-band median over the last `window_frames` admitted
/// frames, floored at [`BACKGROUND_RANGE_DB`] below each band's running peak.
///
/// Each band's median is multiplied by a fixed calibration factor (1 by
/// default; see [`median_calibration`]).
pub struct BackgroundTracker {
    window_frames: usize,
    history: VecDeque<(usize, Vec<f64>)>,
    sorted: Vec<Vec<f64>>,
    peak: Vec<f64>,
    calibration: Vec<f64>,
    floor_ratio: f64,
}

impl BackgroundTracker {
    pub fn new(n_bands: usize, window_frames: usize) -> Self {
        Self {
            window_frames: window_frames.max(1),
            history: VecDeque::new(),
            sorted: vec![Vec::new(); n_bands],
            peak: vec![0.0; n_bands],
            calibration: vec![1.0; n_bands],
            floor_ratio: 1.0 / db_to_power(BACKGROUND_RANGE_DB),
        }
    }

    pub fn with_calibration(mut self, calibration: Vec<f64>) -> Self {
        assert_eq!(calibration.len(), self.sorted.len(), "one factor per band");
        self.calibration = calibration;
        self
    }

    /// Background for `frame`, from admitted frames in
    /// `[frame - window_frames, frame)`. `None` before anything is admitted.
    pub fn estimate(&mut self, frame: usize) -> Option<Vec<f64>> {
        while let Some((t, _)) = self.history.front() {
            if *t + self.window_frames >= frame {
                break;
            }
            let (_, row) = self.history.pop_front().expect("front checked");
            for (s, v) in self.sorted.iter_mut().zip(row) {
                let at = s.partition_point(|x| x.total_cmp(&v).is_lt());
                s.remove(at);
            }
        }
        if self.history.is_empty() {
            return None;
        }
        Some(
            self.sorted
                .iter()
                .zip(&self.peak)
                .zip(&self.calibration)
                .map(|((s, &p), &c)| (c * median(s)).max(p * self.floor_ratio))
                .collect(),
        )
    }

    /// Adds a frame to the median window.
    pub fn admit(&mut self, frame: usize, row: &[f64]) {
        for (s, &v) in self.sorted.iter_mut().zip(row) {
            let at = s.partition_point(|x| x.total_cmp(&v).is_lt());
            s.insert(at, v);
        }
        self.history.push_back((frame, row.to_vec()));
    }

    /// Updates the running peaks; every frame counts, admitted or not.
    pub fn observe(&mut self, row: &[f64]) {
        for (p, &v) in self.peak.iter_mut().zip(row) {
            *p = p.max(v);
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-band factors turning the median of stationary Gaussian noise power
/// into its mean.
///
/// A band summing `K` adjacent bins has `nu = 2 K^2 / sum_ij |r(i - j)|^2`
/// equivalent degrees of freedom, where `r` is the normalized DFT of the
/// squared window. The median of a scaled chi-square with `nu` degrees of
/// freedom is about `(1 - 2 / (9 nu))^3` of its mean (Wilson-Hilferty).
pub fn median_calibration(map: &BandMap, window_len: usize) -> Vec<f64> {
    let w2: Vec<f64> = spectral::hann(window_len).iter().map(|w| w * w).collect();
    let total: f64 = w2.iter().sum();
    let k_max = map.bin_ranges().iter().map(|r| r.len()).max().unwrap_or(0);
    let rho2: Vec<f64> = (0..k_max)
        .map(|m| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in w2.iter().enumerate() {
                let phase = 2.0 * std::f64::consts::PI * (m * n % window_len) as f64 / window_len as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            (re * re + im * im) / (total * total)
        })
        .collect();
    map.bin_ranges()
        .iter()
        .map(|r| {
            let k = r.len();
            if k == 0 {
                return 1.0;
            }
            let cov: f64 = (0..k)
                .map(|i| (0..k).map(|j| rho2[i.abs_diff(j)]).sum::<f64>())
                .sum();
            let nu = 2.0 * (k * k) as f64 / cov;
            (1.0 - 2.0 / (9.0 * nu)).powi(3).recip()
        })
        .collect()
}

/// Per-frame band sums, row-major `n_frames x map.len()`.
fn band_rows(spec: &Spectrogram, map: &BandMap) -> Vec<f64> {
    let nb = map.len();
    let mut rows = vec![0.0; spec.n_frames() * nb];
    for (frame, out) in spec.frames().zip(rows.chunks_exact_mut(nb.max(1))) {
        map.sum_into(frame, out);
    }
    rows
}

struct Track {
    background: Vec<Option<Vec<f64>>>,
    candidate: Vec<bool>,
}

fn track(
    rows: &[f64],
    calibration: Vec<f64>,
    window_frames: usize,
    burst: &[usize],
    ratio: f64,
) -> Track {
    let nb = calibration.len();
    let n = if nb == 0 { 0 } else { rows.len() / nb };
    let mut tracker = BackgroundTracker::new(nb, window_frames).with_calibration(calibration);
    let mut background = Vec::with_capacity(n);
    let mut candidate = Vec::with_capacity(n);
    for (t, row) in rows.chunks_exact(nb.max(1)).enumerate().take(n) {
        let bg = tracker.estimate(t);
        let is_candidate = match (&bg, burst.is_empty()) {
            (Some(bg), false) => {
                let p = sum_at(row, burst);
                p > 0.0 && p >= sum_at(bg, burst) * ratio
            }
            _ => false,
        };
        tracker.observe(row);
        if !is_candidate {
            tracker.admit(t, row);
        }
        background.push(bg);
        candidate.push(is_candidate);
    }
    Track {
        background,
        candidate,
    }
}

fn window_frames(spec: &Spectrogram, window_s: f64) -> usize {
    (window_s / spec.frame_hop_s()).round().max(1.0) as usize
}

/// Rolling background per frame. Frame 0 has no history and gets `None`.
///
/// Frames that would qualify as onsets under the default signature are kept
/// out of the median.
pub fn estimate_background(
    spec: &Spectrogram,
    bands: &[Band],
    window_s: f64,
) -> Result<Vec<Option<NoiseEstimate>>> {
    if !(window_s >= 1.0) {
        return Err(Error::precondition(format!(
            "background window {window_s} s must be at least 1 s"
        )));
    }
    if spec.n_frames() < 2 {
        return Err(Error::precondition(format!(
            "background needs at least 2 frames, spectrogram has {}",
            spec.n_frames()
        )));
    }
    let sig = ClickSignature::default();
    let map = BandMap::for_spectrogram(bands, spec);
    let regions = sig.regions(&map);
    let rows = band_rows(spec, &map);
    let cal = median_calibration(&map, spec.window_len());
    let tr = track(&rows, cal, window_frames(spec, window_s), &regions.burst, sig.onset_ratio());
    Ok(tr
        .background
        .into_iter()
        .map(|bg| {
            bg.map(|background_power| NoiseEstimate {
                background_power,
                window_s,
            })
        })
        .collect())
}

/// `10 log10(peak frame sum / background sum)`. Each event frame holds band
/// powers over the same bands as `background`. A zero background gives
/// `+inf`, which JSON output writes as `null`.
pub fn snr_db(event_frames: &[Vec<f64>], background: &NoiseEstimate) -> Result<f64> {
    if event_frames.is_empty() {
        return Err(Error::precondition("snr_db needs at least one event frame"));
    }
    let peak = event_frames
        .iter()
        .map(|f| f.iter().sum::<f64>())
        .fold(0.0, f64::max);
    Ok(power_ratio_db(peak, background.total()))
}

fn power_ratio_db(signal: f64, background: f64) -> f64 {
    if background > 0.0 {
        10.0 * (signal / background).log10()
    } else if signal > 0.0 {
        f64::INFINITY
    } else {
        // 0/0: nothing above nothing.
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub onset_s: f64,
    #[serde(rename = "burst_s")]
    pub burst_duration_s: f64,
    #[serde(rename = "tail_s")]
    pub tail_duration_s: f64,
    #[serde(rename = "snr_db", serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub peak_snr_db: f64,
    pub score: f64,
    pub label: EventLabel,
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl DetectionEvent {
    pub fn is_click(&self) -> bool {
        self.label == EventLabel::ConnectionClick
    }
}

/// One JSON object per line, each line newline-terminated.
pub fn to_jsonl(events: &[DetectionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> std::result::Result<Vec<DetectionEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Signature plus the background window; the unit the CLI configures.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub signature: ClickSignature,
    pub background_window_s: f64,
}

impl Default for Detector {
    fn default() -> Self {
        Self {
            signature: ClickSignature::default(),
            background_window_s: DEFAULT_BACKGROUND_WINDOW_S,
        }
    }
}

impl Detector {
    pub fn new(signature: ClickSignature) -> Self {
        Self {
            signature,
            ..Self::default()
        }
    }

    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        if entry.key == "background_window_s" {
            self.background_window_s = entry.number()?;
            return Ok(true);
        }
        self.signature.apply(entry)
    }

    fn check(&self, spec: &Spectrogram) -> Result<()> {
        self.signature.validate(spec.sample_rate_hz())?;
        if !(self.background_window_s >= 1.0) {
            return Err(Error::Config(format!(
                "background_window_s ({}) must be at least 1 s",
                self.background_window_s
            )));
        }
        if spec.frame_hop_s() > self.signature.burst_min_s / 2.0 {
            return Err(Error::precondition(format!(
                "frame hop {:.4} s is too coarse to gate bursts of {} s",
                spec.frame_hop_s(),
                self.signature.burst_min_s
            )));
        }
        Ok(())
    }

    fn prepare(&self, spec: &Spectrogram, bands: &[Band]) -> Result<(BandMap, Regions, Vec<f64>)> {
        self.check(spec)?;
        let map = BandMap::for_spectrogram(bands, spec);
        let regions = self.signature.regions(&map);
        if regions.burst.is_empty() {
            return Err(Error::precondition(format!(
                "no analysis band lies above {} Hz below Nyquist",
                self.signature.burst_low_hz
            )));
        }
        if regions.tail.is_empty() {
            return Err(Error::precondition(format!(
                "no analysis band is centred in the tail band {:?} Hz",
                self.signature.tail_band_hz
            )));
        }
        let rows = band_rows(spec, &map);
        Ok((map, regions, rows))
    }

    /// How much audio after an onset can still change that event: its burst
    /// run, the tail scan, and any later event in the merge window that
    /// could replace it. Events with onsets earlier than the end of the
    /// input minus this are final.
    pub fn horizon_s(&self, spec: &Spectrogram) -> f64 {
        MERGE_WINDOW_S
            + self.signature.burst_max_s
            + self.signature.tail_max_s
            + 1.5 * spec.window_s()
            + spec.frame_hop_s()
    }

    /// Per-frame onset-candidate flags.
    pub fn onset_candidates(&self, spec: &Spectrogram, bands: &[Band]) -> Result<Vec<bool>> {
        let (map, regions, rows) = self.prepare(spec, bands)?;
        let wf = window_frames(spec, self.background_window_s);
        let cal = median_calibration(&map, spec.window_len());
        Ok(track(&rows, cal, wf, &regions.burst, self.signature.onset_ratio()).candidate)
    }

    pub fn detect(&self, spec: &Spectrogram, bands: &[Band]) -> Result<Vec<DetectionEvent>> {
        let (map, regions, rows) = self.prepare(spec, bands)?;
        let nb = map.len();
        let sig = &self.signature;
        let wf = window_frames(spec, self.background_window_s);
        let cal = median_calibration(&map, spec.window_len());
        let tr = track(&rows, cal, wf, &regions.burst, sig.onset_ratio());
        let row = |t: usize| &rows[t * nb..(t + 1) * nb];

        let hop_s = spec.frame_hop_s();
        let smear_s = spec.window_s() - hop_s;
        let max_tail_frames = (sig.tail_max_s / hop_s).ceil() as usize + 1;
        let tail_ratio = db_to_power(sig.tail_threshold_db);
        let n = spec.n_frames();

        let mut raw = Vec::new();
        let mut t = 0;
        while t < n {
            if !tr.candidate[t] {
                t += 1;
                continue;
            }
            let start = t;
            while t < n && tr.candidate[t] {
                t += 1;
            }
            let end = t;

            let burst_s = ((end - start) as f64 * hop_s - smear_s).max(0.0);
            if burst_s < sig.burst_min_s || burst_s > sig.burst_max_s {
                continue;
            }
            let bg = tr.background[start].as_ref().expect("candidates have history");

            let mut u = end;
            while u < n && u - end <= max_tail_frames && !tr.candidate[u] {
                let r = row(u);
                let mean = regions
                    .tail
                    .iter()
                    .map(|&b| match (r[b], bg[b]) {
                        (p, q) if q > 0.0 => p / q,
                        (p, _) if p > 0.0 => f64::INFINITY,
                        _ => 0.0,
                    })
                    .sum::<f64>()
                    / regions.tail.len() as f64;
                if mean < tail_ratio {
                    break;
                }
                u += 1;
            }
            let tail_s = (u - end) as f64 * hop_s;
            let tail_ok = tail_s >= sig.tail_min_s && tail_s <= sig.tail_max_s;

            let noise = NoiseEstimate {
                background_power: regions.burst.iter().map(|&b| bg[b]).collect(),
                window_s: self.background_window_s,
            };
            let frames: Vec<Vec<f64>> = (start..end)
                .map(|k| regions.burst.iter().map(|&b| row(k)[b]).collect())
                .collect();
            let snr = snr_db(&frames, &noise)?;

            let score = 0.5 * (snr / FULL_SCORE_SNR_DB).clamp(0.0, 1.0)
                + 0.5 * (tail_s / FULL_SCORE_TAIL_S).clamp(0.0, 1.0);
            let label = if tail_ok && score >= MIN_SCORE {
                EventLabel::ConnectionClick
            } else {
                EventLabel::OtherTransient
            };
            raw.push(DetectionEvent {
                onset_s: spec.frame_start_s(start) + spec.window_s() / 2.0,
                burst_duration_s: burst_s,
                tail_duration_s: tail_s,
                peak_snr_db: snr,
                score,
                label,
            });
        }
        Ok(merge(raw))
    }

    /// Default-resolution STFT and analysis bands, then [`Detector::detect`].
    pub fn detect_buffer(&self, buffer: &SampleBuffer) -> Result<Vec<DetectionEvent>> {
        let (window, hop) = analysis_resolution(buffer.sample_rate_hz());
        let spec = spectral::stft(buffer, window, hop)?;
        let bands = self.signature.analysis_bands(buffer.sample_rate_hz())?;
        self.detect(&spec, &bands)
    }
}

/// STFT window and hop giving about the default 21 ms / 5.3 ms frames at
/// any sample rate.
pub fn analysis_resolution(sample_rate_hz: u32) -> (usize, usize) {
    let ideal = spectral::DEFAULT_WINDOW_LEN as f64 * sample_rate_hz as f64
        / crate::audio_io::DEFAULT_SAMPLE_RATE_HZ as f64;
    let window = 1usize << ideal.log2().round().max(4.0) as u32;
    (window, window / 4)
}

/// Chronological merge against the last kept event; the higher score wins and
/// ties keep the earlier event.
fn merge(events: Vec<DetectionEvent>) -> Vec<DetectionEvent> {
    let mut out: Vec<DetectionEvent> = Vec::with_capacity(events.len());
    for e in events {
        match out.last_mut() {
            Some(last) if e.onset_s - last.onset_s < MERGE_WINDOW_S => {
                if e.score > last.score {
                    *last = e;
                }
            }
            _ => out.push(e),
        }
    }
    out
}

pub fn detect_events(
    spec: &Spectrogram,
    sig: &ClickSignature,
    bands: &[Band],
) -> Result<Vec<DetectionEvent>> {
    Detector::new(sig.clone()).detect(spec, bands)
}
