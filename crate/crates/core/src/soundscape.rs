//! Seeded test material: pink noise, factory noise with broadband transients,
//! connector clicks, SNR-controlled mixes, and a parametric dish/shroud
//! transfer model.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio_io::{SampleBuffer, DEFAULT_SAMPLE_RATE_HZ};
use crate::config::{assign, Entry};
use crate::error::{Error, Result};
use crate::fft::filter_real;
use crate::signature::EventLabel;
use crate::spectral::{self, DEFAULT_HOP, DEFAULT_WINDOW_LEN};

pub const PINK_RMS: f64 = 0.1;
pub const PINK_LOW_HZ: f64 = 20.0;
/// Frequencies above this make up the burst band used for mix SNR.
pub const BURST_BAND_HZ: f64 = 8000.0;
/// Soft clipping starts here.
pub const SOFT_CLIP_KNEE: f64 = 0.9;
pub const MIN_CLICK_RATE_HZ: u32 = 16_000;

// Independent RNG streams per generator so that changing one component (say,
// the transient rate) leaves the others' samples unchanged.
const STREAM_PINK: u64 = 1;
const STREAM_FLOOR: u64 = 2;
const STREAM_TRANSIENTS: u64 = 3;
const STREAM_BURST: u64 = 4;
const STREAM_TAIL: u64 = 5;
const STREAM_PLACEMENT: u64 = 6;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let r = rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub transient_rate_hz: f64,
    pub click_times_s: Vec<f64>,
    pub target_snr_db: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed: 0,
            duration_s: 60.0,
            transient_rate_hz: 0.5,
            click_times_s: Vec::new(),
            target_snr_db: 12.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz < crate::audio_io::MIN_SAMPLE_RATE_HZ {
            return Err(Error::Config(format!(
                "sample rate {} Hz is below {} Hz",
                self.sample_rate_hz,
                crate::audio_io::MIN_SAMPLE_RATE_HZ
            )));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config(format!(
                "duration {} s must be positive",
                self.duration_s
            )));
        }
        if !(self.transient_rate_hz >= 0.0 && self.transient_rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "transient rate {} /s must be >= 0",
                self.transient_rate_hz
            )));
        }
        if !self.target_snr_db.is_finite() {
            return Err(Error::Config("target SNR must be finite".into()));
        }
        if let Some(t) = self
            .click_times_s
            .iter()
            .find(|t| !(**t >= 0.0 && **t < self.duration_s))
        {
            return Err(Error::Config(format!(
                "click time {t} s is outside [0, {}) s",
                self.duration_s
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz as f64).round() as usize
    }

    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        match entry.key.as_str() {
            "sample_rate_hz" => {
                self.sample_rate_hz = u32::try_from(entry.integer()?)
                    .map_err(|_| entry.invalid("a sample rate"))?
            }
            "seed" => self.seed = entry.integer()?,
            "duration_s" => self.duration_s = entry.number()?,
            "transient_rate_hz" => self.transient_rate_hz = entry.number()?,
            "target_snr_db" => self.target_snr_db = entry.number()?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Seeded pink noise: white Gaussian noise shaped by `1/sqrt(f)` above 20 Hz
/// (nothing below) and scaled to 0.1 RMS.
pub fn pink_noise(cfg: &SimConfig) -> Result<SampleBuffer> {
    cfg.validate()?;
    let mut r = rng(cfg.seed, STREAM_PINK);
    let white = gaussian(&mut r, cfg.n_samples());
    let mut x = filter_real(&white, cfg.sample_rate_hz, |f| {
        if f < PINK_LOW_HZ {
            0.0
        } else {
            f.sqrt().recip()
        }
    });
    normalize_rms(&mut x, PINK_RMS);
    SampleBuffer::from_clamped(x, cfg.sample_rate_hz)
}

/// Parameters of the factory soundscape beyond [`SimConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoryModel {
    pub floor_rms: f64,
    pub floor_cutoff_hz: f64,
    /// Butterworth order of the floor's low-pass magnitude.
    pub floor_order: u32,
    pub transient_min_s: f64,
    pub transient_max_s: f64,
    /// Transient RMS relative to the floor RMS.
    pub transient_min_db: f64,
    pub transient_max_db: f64,
    pub transient_ramp_s: f64,
}

impl Default for FactoryModel {
    fn default() -> Self {
        Self {
            floor_rms: 0.02,
            floor_cutoff_hz: 5000.0,
            floor_order: 8,
            transient_min_s: 0.03,
            transient_max_s: 0.15,
            transient_min_db: 6.0,
            transient_max_db: 15.0,
            transient_ramp_s: 0.002,
        }
    }
}

impl FactoryModel {
    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        if entry.key == "floor_order" {
            self.floor_order = u32::try_from(entry.integer()?)
                .map_err(|_| entry.invalid("a filter order"))?;
            return Ok(true);
        }
        assign(
            entry,
            &mut [
                ("floor_rms", &mut self.floor_rms),
                ("floor_cutoff_hz", &mut self.floor_cutoff_hz),
                ("transient_min_s", &mut self.transient_min_s),
                ("transient_max_s", &mut self.transient_max_s),
                ("transient_min_db", &mut self.transient_min_db),
                ("transient_max_db", &mut self.transient_max_db),
                ("transient_ramp_s", &mut self.transient_ramp_s),
            ],
        )
    }

    pub fn floor_gain(&self, f: f64) -> f64 {
        (1.0 + (f / self.floor_cutoff_hz).powi(2 * self.floor_order as i32))
            .sqrt()
            .recip()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.floor_rms > 0.0
            && self.floor_cutoff_hz > 0.0
            && self.floor_order > 0
            && self.transient_min_s > 0.0
            && self.transient_min_s <= self.transient_max_s
            && self.transient_min_db <= self.transient_max_db
            && self.transient_ramp_s >= 0.0
            && 2.0 * self.transient_ramp_s <= self.transient_min_s;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid factory model {self:?}")))
        }
    }
}

/// One broadband transient laid into factory noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transient {
    pub start_s: f64,
    pub duration_s: f64,
    pub level_db: f64,
}

pub fn factory_noise(cfg: &SimConfig) -> Result<SampleBuffer> {
    factory_noise_with(cfg, &FactoryModel::default()).map(|(b, _)| b)
}

/// Factory noise plus the list of transients it contains. Transients arrive
/// as a Poisson process; one that would run past the end is cut short.
pub fn factory_noise_with(cfg: &SimConfig, model: &FactoryModel) -> Result<(SampleBuffer, Vec<Transient>)> {
    cfg.validate()?;
    model.validate()?;
    let rate = cfg.sample_rate_hz as f64;
    let n = cfg.n_samples();

    let mut r = rng(cfg.seed, STREAM_FLOOR);
    let white = gaussian(&mut r, n);
    let mut x = filter_real(&white, cfg.sample_rate_hz, |f| model.floor_gain(f));
    normalize_rms(&mut x, model.floor_rms);

    let mut transients = Vec::new();
    if cfg.transient_rate_hz > 0.0 {
        let mut r = rng(cfg.seed, STREAM_TRANSIENTS);
        let gap = Exp::new(cfg.transient_rate_hz).expect("rate checked positive");
        let mut t: f64 = gap.sample(&mut r);
        while t < cfg.duration_s {
            let duration_s = r.random_range(model.transient_min_s..=model.transient_max_s);
            let level_db = r.random_range(model.transient_min_db..=model.transient_max_db);
            let start = (t * rate).round() as usize;
            let len = (duration_s * rate).round() as usize;
            let ramp = (model.transient_ramp_s * rate).round() as usize;
            let amp = model.floor_rms * 10f64.powf(level_db / 20.0);
            let noise = gaussian(&mut r, len);
            for (i, v) in noise.into_iter().enumerate() {
                let Some(s) = x.get_mut(start + i) else { break };
                *s += amp * v * ramp_gain(i, len, ramp);
            }
            transients.push(Transient {
                start_s: start as f64 / rate,
                duration_s,
                level_db,
            });
            t += gap.sample(&mut r);
        }
    }
    Ok((SampleBuffer::from_clamped(x, cfg.sample_rate_hz)?, transients))
}

/// Raised-cosine fade in and out over `ramp` samples at each end.
fn ramp_gain(i: usize, len: usize, ramp: usize) -> f64 {
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        (0.5 * PI * (edge as f64 + 0.5) / ramp as f64).sin().powi(2)
    }
}

/// Shape of the synthetic connector click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickModel {
    pub length_s: f64,
    pub burst_s: f64,
    pub attack_s: f64,
    /// Amplitude decay constant of the burst after the attack.
    pub release_tau_s: f64,
    pub burst_fade_s: f64,
    /// Tail starts this long before the burst ends.
    pub tail_overlap_s: f64,
    pub tail_tau_s: f64,
    pub tail_fade_in_s: f64,
    pub tail_fade_out_s: f64,
    pub tail_band_hz: (f64, f64),
    /// Tail level relative to the burst, applied to unit-RMS sources.
    pub tail_level_db: f64,
    pub with_tail: bool,
    pub peak: f64,
}

impl Default for ClickModel {
    fn default() -> Self {
        Self {
            length_s: 0.40,
            burst_s: 0.05,
            attack_s: 0.003,
            release_tau_s: 0.1,
            burst_fade_s: 0.001,
            tail_overlap_s: 0.005,
            tail_tau_s: 0.25,
            tail_fade_in_s: 0.005,
            tail_fade_out_s: 0.01,
            tail_band_hz: (1000.0, 8000.0),
            tail_level_db: -10.0,
            with_tail: true,
            peak: 0.5,
        }
    }
}

impl ClickModel {
    /// The same click with the tail removed: a bare broadband impulse.
    pub fn burst_only() -> Self {
        Self {
            with_tail: false,
            ..Self::default()
        }
    }

    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        assign(
            entry,
            &mut [
                ("click_length_s", &mut self.length_s),
                ("click_burst_s", &mut self.burst_s),
                ("click_attack_s", &mut self.attack_s),
                ("click_release_tau_s", &mut self.release_tau_s),
                ("click_burst_fade_s", &mut self.burst_fade_s),
                ("click_tail_overlap_s", &mut self.tail_overlap_s),
                ("click_tail_tau_s", &mut self.tail_tau_s),
                ("click_tail_fade_in_s", &mut self.tail_fade_in_s),
                ("click_tail_fade_out_s", &mut self.tail_fade_out_s),
                ("click_tail_low_hz", &mut self.tail_band_hz.0),
                ("click_tail_high_hz", &mut self.tail_band_hz.1),
                ("click_tail_level_db", &mut self.tail_level_db),
                ("click_peak", &mut self.peak),
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let times = [
            self.attack_s,
            self.release_tau_s,
            self.burst_fade_s,
            self.tail_overlap_s,
            self.tail_tau_s,
            self.tail_fade_in_s,
            self.tail_fade_out_s,
        ];
        let ok = self.length_s > 0.0
            && self.burst_s > 0.0
            && self.burst_s <= self.length_s
            && times.iter().all(|t| *t >= 0.0 && t.is_finite())
            && self.release_tau_s > 0.0
            && self.tail_tau_s > 0.0
            && self.tail_band_hz.0 < self.tail_band_hz.1
            && self.tail_level_db.is_finite()
            && self.peak > 0.0
            && self.peak <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid click model {self:?}")))
        }
    }

    pub fn synthesize(&self, sample_rate_hz: u32, seed: u64) -> Result<SampleBuffer> {
        self.validate()?;
        if sample_rate_hz < MIN_CLICK_RATE_HZ {
            return Err(Error::precondition(format!(
                "click synthesis needs at least {MIN_CLICK_RATE_HZ} Hz, got {sample_rate_hz}"
            )));
        }
        let rate = sample_rate_hz as f64;
        let at = |s: f64| (s * rate).round() as usize;
        let n = at(self.length_s);
        let nb = at(self.burst_s).min(n);
        let attack = at(self.attack_s).min(nb);
        let fade = at(self.burst_fade_s).min(nb);

        let mut r = rng(seed, STREAM_BURST);
        let mut y = gaussian(&mut r, n);
        for (i, v) in y.iter_mut().enumerate() {
            let mut env = if i >= nb {
                0.0
            } else if i < attack {
                (0.5 * PI * i as f64 / attack as f64).sin().powi(2)
            } else {
                (-((i - attack) as f64 / rate) / self.release_tau_s).exp()
            };
            if i < nb && i + fade >= nb {
                env *= (0.5 * PI * (i + fade + 1 - nb) as f64 / fade as f64).cos().powi(2);
            }
            *v *= env;
        }

        if self.with_tail {
            let mut r = rng(seed, STREAM_TAIL);
            let white = gaussian(&mut r, n);
            let (lo, hi) = self.tail_band_hz;
            let mut tail = filter_real(&white, sample_rate_hz, |f| {
                if (lo..=hi).contains(&f) {
                    1.0
                } else {
                    0.0
                }
            });
            normalize_rms(&mut tail, 1.0);
            let level = 10f64.powf(self.tail_level_db / 20.0);
            let start = nb.saturating_sub(at(self.tail_overlap_s));
            let fade_in = at(self.tail_fade_in_s);
            let fade_out = at(self.tail_fade_out_s);
            for i in start..n {
                let k = i - start;
                let mut env = (-(k as f64 / rate) / self.tail_tau_s).exp();
                if k < fade_in {
                    env *= (0.5 * PI * k as f64 / fade_in as f64).sin().powi(2);
                }
                let left = n - 1 - i;
                if left < fade_out {
                    env *= (0.5 * PI * left as f64 / fade_out as f64).sin().powi(2);
                }
                y[i] += level * env * tail[i];
            }
        }

        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            y.iter_mut().for_each(|v| *v *= self.peak / peak);
        }
        SampleBuffer::new(y, sample_rate_hz)
    }
}

/// A 0.4 s click: a 50 ms broadband burst then a decaying 1-8 kHz tail.
pub fn synth_click(sample_rate_hz: u32, seed: u64) -> Result<SampleBuffer> {
    ClickModel::default().synthesize(sample_rate_hz, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub time_s: f64,
    pub label: EventLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<TruthEvent>,
}

impl GroundTruth {
    /// Truth events at `times`, all labelled as clicks.
    pub fn clicks(times: &[f64]) -> Result<Self> {
        let t = Self {
            events: times
                .iter()
                .map(|&time_s| TruthEvent {
                    time_s,
                    label: EventLabel::ConnectionClick,
                })
                .collect(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.events.iter().find(|e| e.label != EventLabel::ConnectionClick) {
            return Err(Error::precondition(format!(
                "truth label at {} s must be connection_click",
                e.time_s
            )));
        }
        if let Some(e) = self.events.iter().find(|e| !(e.time_s >= 0.0 && e.time_s.is_finite())) {
            return Err(Error::precondition(format!("truth time {} s is invalid", e.time_s)));
        }
        for w in self.events.windows(2) {
            if w[1].time_s - w[0].time_s < crate::signature::MERGE_WINDOW_S {
                return Err(Error::precondition(format!(
                    "truth times must ascend at least {} s apart: {} then {}",
                    crate::signature::MERGE_WINDOW_S,
                    w[0].time_s,
                    w[1].time_s
                )));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time_s).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// CSV with header `time_s,label`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time_s", "label"]).expect("write to memory");
        for e in &self.events {
            w.write_record([format!("{}", e.time_s), e.label.to_string()])
                .expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let fmt = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| fmt(e.to_string()))?;
        if header != vec!["time_s", "label"] {
            return Err(fmt(format!("expected header time_s,label, got {header:?}")));
        }
        let events = r
            .deserialize::<TruthEvent>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| fmt(e.to_string()))?;
        let truth = Self { events };
        truth.validate().map_err(|e| fmt(e.to_string()))?;
        Ok(truth)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Output of [`mix_at_snr`].
#[derive(Debug, Clone)]
pub struct Mix {
    pub buffer: SampleBuffer,
    pub truth: GroundTruth,
    /// Injection times whose window had to be soft-clipped.
    pub clipped: Vec<f64>,
    /// Linear gain applied to the click (1 when nothing was injected).
    pub click_gain: f64,
}

/// Per-frame power above [`BURST_BAND_HZ`] at the default STFT resolution.
pub fn burst_band_frame_power(buffer: &SampleBuffer) -> Result<Vec<f64>> {
    let spec = spectral::stft(buffer, DEFAULT_WINDOW_LEN, DEFAULT_HOP)?;
    let first = (BURST_BAND_HZ / spec.bin_hz()).floor() as usize + 1;
    Ok(spec.frames().map(|f| f[first.min(f.len())..].iter().sum()).collect())
}

/// Adds `click` to `noise` at each of `cfg.click_times_s`, scaled so that
/// the click's loudest frame carries `target_snr_db` more power above 8 kHz
/// than the noise's average frame.
pub fn mix_at_snr(click: &SampleBuffer, noise: &SampleBuffer, cfg: &SimConfig) -> Result<Mix> {
    if click.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::precondition(format!(
            "click rate {} Hz differs from noise rate {} Hz",
            click.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    if !cfg.target_snr_db.is_finite() {
        return Err(Error::Config("target SNR must be finite".into()));
    }
    let rate = noise.sample_rate_hz() as f64;
    let mut sorted = cfg.click_times_s.clone();
    sorted.sort_by(f64::total_cmp);
    let truth = GroundTruth::clicks(&sorted)?;
    let starts: Vec<usize> = sorted.iter().map(|t| (t * rate).round() as usize).collect();
    for (t, &s) in sorted.iter().zip(&starts) {
        if s + click.len() > noise.len() {
            return Err(Error::precondition(format!(
                "click at {t} s overruns the {:.3} s noise buffer",
                noise.duration_s()
            )));
        }
    }
    if sorted.is_empty() {
        return Ok(Mix {
            buffer: noise.clone(),
            truth,
            clipped: Vec::new(),
            click_gain: 1.0,
        });
    }

    let click_peak = burst_band_frame_power(click)?.into_iter().fold(0.0, f64::max);
    let noise_frames = burst_band_frame_power(noise)?;
    let noise_mean = noise_frames.iter().sum::<f64>() / noise_frames.len() as f64;
    if !(click_peak > 0.0 && noise_mean > 0.0) {
        return Err(Error::precondition(
            "burst-band SNR is undefined: click or noise has no power above 8 kHz",
        ));
    }
    let gain = (noise_mean * 10f64.powf(cfg.target_snr_db / 10.0) / click_peak).sqrt();

    let mut y = noise.samples().to_vec();
    for &s in &starts {
        for (o, c) in y[s..s + click.len()].iter_mut().zip(click.samples()) {
            *o += gain * c;
        }
    }
    let mut clipped = Vec::new();
    for (t, &s) in sorted.iter().zip(&starts) {
        let window = &mut y[s..s + click.len()];
        if window.iter().any(|v| v.abs() > 1.0) {
            window.iter_mut().for_each(|v| *v = soft_clip(*v));
            clipped.push(*t);
        }
    }
    Ok(Mix {
        buffer: SampleBuffer::new(y, noise.sample_rate_hz())?,
        truth,
        clipped,
        click_gain: gain,
    })
}

/// Identity up to the knee, then a tanh shoulder approaching +-1 (reaching
/// it only where tanh rounds to 1).
pub fn soft_clip(x: f64) -> f64 {
    let a = x.abs();
    if a <= SOFT_CLIP_KNEE {
        x
    } else {
        let room = 1.0 - SOFT_CLIP_KNEE;
        x.signum() * (SOFT_CLIP_KNEE + room * ((a - SOFT_CLIP_KNEE) / room).tanh())
    }
}

/// Parametric dish-and-shroud response. On axis the dish adds aperture gain;
/// off axis the shroud shadows high frequencies in proportion to inset depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShroudModel {
    pub dish_diameter_m: f64,
    pub inset_depth_m: f64,
    pub speed_of_sound_m_s: f64,
    pub on_axis_cap_db: f64,
    /// Attenuation per octave above `shadow_corner_hz` at `reference_depth_m`.
    pub shadow_db_per_octave: f64,
    pub reference_depth_m: f64,
    pub shadow_corner_hz: f64,
    pub off_axis_cap_db: f64,
}

pub const INCH_M: f64 = 0.0254;

impl Default for ShroudModel {
    fn default() -> Self {
        Self {
            dish_diameter_m: 24.0 * INCH_M,
            inset_depth_m: 24.0 * INCH_M,
            speed_of_sound_m_s: 343.0,
            on_axis_cap_db: 20.0,
            shadow_db_per_octave: 8.0,
            reference_depth_m: 24.0 * INCH_M,
            shadow_corner_hz: 500.0,
            off_axis_cap_db: 40.0,
        }
    }
}

impl ShroudModel {
    pub fn apply(&mut self, entry: &Entry) -> Result<bool> {
        assign(
            entry,
            &mut [
                ("dish_diameter_m", &mut self.dish_diameter_m),
                ("inset_depth_m", &mut self.inset_depth_m),
                ("speed_of_sound_m_s", &mut self.speed_of_sound_m_s),
                ("on_axis_cap_db", &mut self.on_axis_cap_db),
                ("shadow_db_per_octave", &mut self.shadow_db_per_octave),
                ("reference_depth_m", &mut self.reference_depth_m),
                ("shadow_corner_hz", &mut self.shadow_corner_hz),
                ("off_axis_cap_db", &mut self.off_axis_cap_db),
            ],
        )
    }

    pub fn with_depth(&self, inset_depth_m: f64) -> Self {
        Self {
            inset_depth_m,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dish_diameter_m > 0.0
            && self.inset_depth_m >= 0.0
            && self.inset_depth_m.is_finite()
            && self.speed_of_sound_m_s > 0.0
            && self.on_axis_cap_db >= 0.0
            && self.on_axis_cap_db.is_finite()
            && self.shadow_db_per_octave >= 0.0
            && self.shadow_db_per_octave.is_finite()
            && self.reference_depth_m > 0.0
            && self.shadow_corner_hz > 0.0
            && self.off_axis_cap_db >= 0.0
            && self.off_axis_cap_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid shroud model {self:?}")))
        }
    }

    /// Frequency above which the dish has positive gain.
    pub fn dish_cutoff_hz(&self) -> f64 {
        self.speed_of_sound_m_s / (PI * self.dish_diameter_m)
    }

    pub fn on_axis_gain_db(&self, f: f64) -> f64 {
        let ka = PI * self.dish_diameter_m * f / self.speed_of_sound_m_s;
        (20.0 * ka.max(1.0).log10()).min(self.on_axis_cap_db)
    }

    pub fn off_axis_attenuation_db(&self, f: f64) -> f64 {
        self.off_axis_attenuation_at(f, self.inset_depth_m)
    }

    pub fn off_axis_attenuation_at(&self, f: f64, depth_m: f64) -> f64 {
        let octaves = (f / self.shadow_corner_hz).max(1.0).log2();
        (self.shadow_db_per_octave * (depth_m / self.reference_depth_m) * octaves)
            .min(self.off_axis_cap_db)
    }

    /// Linear amplitude gain at `f`.
    pub fn gain(&self, f: f64, on_axis: bool) -> f64 {
        let db = if on_axis {
            self.on_axis_gain_db(f)
        } else {
            -self.off_axis_attenuation_db(f)
        };
        10f64.powf(db / 20.0)
    }

    /// Zero-phase filtering of raw samples; linear in the input.
    pub fn filter(&self, samples: &[f64], sample_rate_hz: u32, on_axis: bool) -> Vec<f64> {
        filter_real(samples, sample_rate_hz, |f| self.gain(f, on_axis))
    }
}

/// Filters a buffer through the shroud model. On-axis gain can push samples
/// past full scale; those are clamped.
pub fn apply_shroud(buffer: &SampleBuffer, model: &ShroudModel, on_axis: bool) -> Result<SampleBuffer> {
    model.validate()?;
    let y = model.filter(buffer.samples(), buffer.sample_rate_hz(), on_axis);
    SampleBuffer::from_clamped(y, buffer.sample_rate_hz())
}

/// `n` sorted times in `[start_s, end_s]` at least `min_gap_s` apart, uniform
/// over all such configurations, on the sample grid of `sample_rate_hz`.
pub fn place_clicks(
    n: usize,
    start_s: f64,
    end_s: f64,
    min_gap_s: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let slack = end_s - start_s - (n - 1) as f64 * min_gap_s;
    if !(slack >= 0.0 && min_gap_s >= 0.0) {
        return Err(Error::precondition(format!(
            "{n} clicks {min_gap_s} s apart do not fit in [{start_s}, {end_s}] s"
        )));
    }
    let rate = sample_rate_hz as f64;
    let mut r = rng(seed, STREAM_PLACEMENT);
    let mut u: Vec<f64> = (0..n).map(|_| r.random::<f64>() * slack).collect();
    u.sort_by(f64::total_cmp);
    // Snap to the sample grid without eroding the gap: round the gap up.
    let gap = (min_gap_s * rate).ceil();
    let first = (start_s * rate).ceil();
    let last = (end_s * rate).floor();
    Ok(u.iter()
        .enumerate()
        .map(|(i, v)| ((first + (v * rate).floor() + i as f64 * gap).min(last)) / rate)
        .collect())
}

/// Layout of the default benchmark corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub sample_rate_hz: u32,
    pub base_seed: u64,
    pub snrs_db: Vec<f64>,
    pub clips_per_snr: usize,
    pub duration_s: f64,
    pub clicks_per_clip: usize,
    pub min_spacing_s: f64,
    /// No click starts before this, giving the background time to settle.
    pub lead_in_s: f64,
    /// Room left after the last click ends.
    pub lead_out_s: f64,
    pub transient_rate_hz: f64,
    pub factory: FactoryModel,
    pub click: ClickModel,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            base_seed: 1000,
            snrs_db: vec![6.0, 9.0, 12.0, 15.0, 18.0],
            clips_per_snr: 20,
            duration_s: 60.0,
            clicks_per_clip: 10,
            min_spacing_s: 2.0,
            lead_in_s: 1.0,
            lead_out_s: 1.0,
            transient_rate_hz: 0.5,
            factory: FactoryModel::default(),
            click: ClickModel::default(),
        }
    }
}

/// One synthesized clip with its truth.
#[derive(Debug, Clone)]
pub struct Clip {
    pub buffer: SampleBuffer,
    pub truth: GroundTruth,
    pub snr_db: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn len(&self) -> usize {
        self.snrs_db.len() * self.clips_per_snr
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// SNR and seed of clip `index`; SNRs are assigned in consecutive blocks.
    pub fn clip_params(&self, index: usize) -> (f64, u64) {
        let snr = self.snrs_db[index / self.clips_per_snr.max(1)];
        (snr, self.base_seed + index as u64)
    }

    pub fn clip(&self, index: usize) -> Result<Clip> {
        if index >= self.len() {
            return Err(Error::precondition(format!(
                "clip {index} out of range for a {}-clip corpus",
                self.len()
            )));
        }
        let (snr_db, seed) = self.clip_params(index);
        synthesize_mix(&MixSpec {
            sample_rate_hz: self.sample_rate_hz,
            seed,
            duration_s: self.duration_s,
            clicks: self.clicks_per_clip,
            min_spacing_s: self.min_spacing_s,
            lead_in_s: self.lead_in_s,
            lead_out_s: self.lead_out_s,
            transient_rate_hz: self.transient_rate_hz,
            snr_db,
            factory: self.factory.clone(),
            click: self.click.clone(),
        })
    }
}

/// Everything needed to synthesize one factory-noise clip with clicks.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub clicks: usize,
    pub min_spacing_s: f64,
    pub lead_in_s: f64,
    pub lead_out_s: f64,
    pub transient_rate_hz: f64,
    pub snr_db: f64,
    pub factory: FactoryModel,
    pub click: ClickModel,
}

impl Default for MixSpec {
    fn default() -> Self {
        let c = CorpusSpec::default();
        Self {
            sample_rate_hz: c.sample_rate_hz,
            seed: 0,
            duration_s: c.duration_s,
            clicks: c.clicks_per_clip,
            min_spacing_s: c.min_spacing_s,
            lead_in_s: c.lead_in_s,
            lead_out_s: c.lead_out_s,
            transient_rate_hz: c.transient_rate_hz,
            snr_db: 12.0,
            factory: c.factory,
            click: c.click,
        }
    }
}

/// Factory noise with `clicks` randomly placed clicks at `snr_db`.
pub fn synthesize_mix(spec: &MixSpec) -> Result<Clip> {
    let click = spec.click.synthesize(spec.sample_rate_hz, spec.seed)?;
    let latest = spec.duration_s - click.duration_s() - spec.lead_out_s;
    let times = place_clicks(
        spec.clicks,
        spec.lead_in_s,
        latest,
        spec.min_spacing_s,
        spec.sample_rate_hz,
        spec.seed,
    )?;
    let cfg = SimConfig {
        sample_rate_hz: spec.sample_rate_hz,
        seed: spec.seed,
        duration_s: spec.duration_s,
        transient_rate_hz: spec.transient_rate_hz,
        click_times_s: times,
        target_snr_db: spec.snr_db,
    };
    let (noise, _) = factory_noise_with(&cfg, &spec.factory)?;
    let mix = mix_at_snr(&click, &noise, &cfg)?;
    Ok(Clip {
        buffer: mix.buffer,
        truth: mix.truth,
        snr_db: spec.snr_db,
        seed: spec.seed,
    })
}

/// One corpus clip on disk. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub wav_path: PathBuf,
    pub truth_path: PathBuf,
    pub snr_db: f64,
    pub seed: u64,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(entries).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `clip_NNN.wav` / `clip_NNN.csv` pairs and `manifest.json` into
/// `dir`, returning the manifest path.
pub fn write_corpus(spec: &CorpusSpec, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(spec.len());
    for i in 0..spec.len() {
        let clip = spec.clip(i)?;
        let wav = PathBuf::from(format!("clip_{i:03}.wav"));
        let csv = PathBuf::from(format!("clip_{i:03}.csv"));
        crate::audio_io::write_wav(&clip.buffer, dir.join(&wav))?;
        clip.truth.write_csv(dir.join(&csv))?;
        entries.push(ManifestEntry {
            wav_path: wav,
            truth_path: csv,
            snr_db: clip.snr_db,
            seed: clip.seed,
        });
    }
    let manifest = dir.join("manifest.json");
    write_manifest(&entries, &manifest)?;
    Ok(manifest)
}
