//! Spectrograms and base-2 third-octave band power.
//!
//! Power is normalized so that the bins of one frame sum to the
//! window-weighted mean square of that frame. A full-scale sinusoid therefore
//! reads 0.5 (-3 dB) and all dB values are relative to a digital power of 1.0.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::SampleBuffer;
use crate::error::{Error, Result};
use crate::fft::FramePower;

pub const DEFAULT_WINDOW_LEN: usize = 1024;
pub const DEFAULT_HOP: usize = 256;

/// Reference center of the band grid.
pub const REFERENCE_HZ: f64 = 1000.0;

/// Periodic Hann window. With a hop of `len / 4` the squared window
/// overlap-adds to a constant, which keeps energy accounting exact.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Time x frequency power matrix, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    power: Vec<f64>,
    n_frames: usize,
    window_len: usize,
    hop: usize,
    sample_rate_hz: u32,
}

impl Spectrogram {
    /// Wraps an existing frame-major power matrix of `n_frames` rows and
    /// `window_len / 2 + 1` columns.
    pub fn from_power(
        power: Vec<f64>,
        n_frames: usize,
        window_len: usize,
        hop: usize,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        let n_bins = window_len / 2 + 1;
        if power.len() != n_frames * n_bins {
            return Err(Error::precondition(format!(
                "power matrix has {} cells, expected {n_frames} x {n_bins}",
                power.len()
            )));
        }
        if power.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::precondition("power entries must be finite and >= 0"));
        }
        if hop == 0 || window_len == 0 {
            return Err(Error::precondition("window and hop must be positive"));
        }
        Ok(Self {
            power,
            n_frames,
            window_len,
            hop,
            sample_rate_hz,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate_hz as f64
    }

    pub fn window_s(&self) -> f64 {
        self.window_len as f64 / self.sample_rate_hz as f64
    }

    /// Frequency spacing between bins.
    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / self.window_len as f64
    }

    pub fn frame_start_s(&self, frame: usize) -> f64 {
        (frame * self.hop) as f64 / self.sample_rate_hz as f64
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let n = self.n_bins();
        &self.power[frame * n..(frame + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.power.chunks_exact(self.n_bins())
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Hann-windowed short-time power spectrum.
///
/// `n_frames = (len - window_len) / hop + 1`; trailing samples that do not
/// fill a whole frame are dropped.
pub fn stft(buffer: &SampleBuffer, window_len: usize, hop: usize) -> Result<Spectrogram> {
    if window_len < 64 || !window_len.is_power_of_two() {
        return Err(Error::precondition(format!(
            "window length {window_len} must be a power of two >= 64"
        )));
    }
    if hop == 0 || hop > window_len {
        return Err(Error::precondition(format!(
            "hop {hop} must be in 1..={window_len}"
        )));
    }
    let x = buffer.samples();
    if x.len() < window_len {
        return Err(Error::precondition(format!(
            "buffer of {} samples is shorter than one {window_len}-sample window",
            x.len()
        )));
    }

    let window = hann(window_len);
    let norm = 1.0 / (window_len as f64 * window.iter().map(|w| w * w).sum::<f64>());
    let n_frames = (x.len() - window_len) / hop + 1;
    let n_bins = window_len / 2 + 1;
    let mut power = vec![0.0; n_frames * n_bins];
    let mut fft = FramePower::new(window_len);

    for (k, row) in power.chunks_exact_mut(n_bins).enumerate() {
        let start = k * hop;
        fft.power(&x[start..start + window_len], &window, row);
        let last = n_bins - 1;
        for (b, p) in row.iter_mut().enumerate() {
            let one_sided = if b == 0 || b == last { 1.0 } else { 2.0 };
            *p *= one_sided * norm;
        }
    }

    Ok(Spectrogram {
        power,
        n_frames,
        window_len,
        hop,
        sample_rate_hz: buffer.sample_rate_hz(),
    })
}

/// Averaged periodogram (Welch) of a buffer; returns per-bin power and the
/// bin spacing in Hz.
pub fn welch_psd(buffer: &SampleBuffer, window_len: usize, hop: usize) -> Result<(Vec<f64>, f64)> {
    let spec = stft(buffer, window_len, hop)?;
    let mut psd = vec![0.0; spec.n_bins()];
    for frame in spec.frames() {
        for (acc, p) in psd.iter_mut().zip(frame) {
            *acc += p;
        }
    }
    let n = spec.n_frames() as f64;
    psd.iter_mut().for_each(|p| *p /= n);
    Ok((psd, spec.bin_hz()))
}

/// One base-2 third-octave band: center `1000 * 2^(index/3)` Hz, edges a
/// sixth of an octave either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub index: i32,
    pub center_hz: f64,
    pub lower_hz: f64,
    pub upper_hz: f64,
}

impl Band {
    pub fn new(index: i32) -> Self {
        // Edges share one expression so neighbouring bands meet exactly.
        let edge = |k: i32| REFERENCE_HZ * 2f64.powf((2 * k - 1) as f64 / 6.0);
        Self {
            index,
            center_hz: REFERENCE_HZ * 2f64.powf(index as f64 / 3.0),
            lower_hz: edge(index),
            upper_hz: edge(index + 1),
        }
    }

    pub fn contains(&self, hz: f64) -> bool {
        hz >= self.lower_hz && hz < self.upper_hz
    }
}

/// Every band whose extent overlaps `[min_hz, max_hz]`, ascending.
///
/// `(900, 1100)` yields only the 1 kHz band; `(20, 20000)` yields the 30
/// bands from 19.7 Hz to 20.2 kHz.
pub fn third_octave_bands(min_hz: f64, max_hz: f64) -> Result<Vec<Band>> {
    if !(min_hz > 0.0 && min_hz < max_hz && max_hz.is_finite()) {
        return Err(Error::precondition(format!(
            "band range ({min_hz}, {max_hz}) must satisfy 0 < min < max"
        )));
    }
    let lo = (3.0 * (min_hz / REFERENCE_HZ).log2()).floor() as i32 - 1;
    let hi = (3.0 * (max_hz / REFERENCE_HZ).log2()).ceil() as i32 + 1;
    let bands: Vec<Band> = (lo..=hi)
        .map(Band::new)
        .filter(|b| b.upper_hz > min_hz && b.lower_hz < max_hz)
        .collect();
    if bands.is_empty() {
        return Err(Error::precondition(format!(
            "no third-octave band falls in ({min_hz}, {max_hz})"
        )));
    }
    Ok(bands)
}

/// Assignment of FFT bins to bands by bin center frequency over half-open
/// intervals. Bands reaching past Nyquist are set aside as absent.
#[derive(Debug, Clone)]
pub struct BandMap {
    bands: Vec<Band>,
    bins: Vec<Range<usize>>,
    absent: Vec<Band>,
}

impl BandMap {
    pub fn new(bands: &[Band], bin_hz: f64, n_bins: usize, sample_rate_hz: u32) -> Self {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let (present, absent): (Vec<Band>, Vec<Band>) =
            bands.iter().partition(|b| b.upper_hz <= nyquist);
        let first_bin_at = |hz: f64| ((hz / bin_hz).ceil() as usize).min(n_bins);
        let bins = present
            .iter()
            .map(|b| {
                let mut start = first_bin_at(b.lower_hz);
                let mut end = first_bin_at(b.upper_hz);
                // ceil() can land one bin off when an edge sits on a bin
                // center after rounding; settle it with the exact predicate.
                while start > 0 && b.contains((start - 1) as f64 * bin_hz) {
                    start -= 1;
                }
                while start < end && !b.contains(start as f64 * bin_hz) {
                    start += 1;
                }
                while end > start && !b.contains((end - 1) as f64 * bin_hz) {
                    end -= 1;
                }
                while end < n_bins && b.contains(end as f64 * bin_hz) {
                    end += 1;
                }
                start..end
            })
            .collect();
        Self {
            bands: present,
            bins,
            absent,
        }
    }

    pub fn for_spectrogram(bands: &[Band], spec: &Spectrogram) -> Self {
        Self::new(bands, spec.bin_hz(), spec.n_bins(), spec.sample_rate_hz())
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn absent(&self) -> &[Band] {
        &self.absent
    }

    pub fn bin_ranges(&self) -> &[Range<usize>] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Sums a power spectrum into the present bands.
    pub fn sum_into(&self, spectrum: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.bins) {
            *o = spectrum[r.clone()].iter().sum();
        }
    }

    pub fn sums(&self, spectrum: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bands.len()];
        self.sum_into(spectrum, &mut out);
        out
    }
}

/// Third-octave band powers in dB re full-scale power 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPowerProfile {
    pub bands: Vec<Band>,
    pub power_db: Vec<f64>,
    /// Requested bands lying above Nyquist, for which no power is reported.
    pub absent: Vec<Band>,
}

impl BandPowerProfile {
    pub fn power_linear(&self) -> Vec<f64> {
        self.power_db.iter().map(|db| 10f64.powf(db / 10.0)).collect()
    }

    pub fn get(&self, index: i32) -> Option<f64> {
        self.bands
            .iter()
            .position(|b| b.index == index)
            .map(|i| self.power_db[i])
    }

    /// `center_hz,power_db` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("center_hz,power_db\n");
        for (b, db) in self.bands.iter().zip(&self.power_db) {
            let _ = writeln!(out, "{:.3},{:.3}", b.center_hz, db);
        }
        out
    }
}

/// Welch window length for band analysis: bins no wider than about 3 Hz so
/// even the narrow low-frequency bands receive several bins.
pub fn band_analysis_window(sample_rate_hz: u32) -> usize {
    ((sample_rate_hz as f64 / 3.0).ceil() as usize).next_power_of_two()
}

/// Sums the averaged periodogram of `buffer` into each band and converts to
/// dB. Bands above Nyquist are reported in [`BandPowerProfile::absent`].
pub fn band_powers(buffer: &SampleBuffer, bands: &[Band]) -> Result<BandPowerProfile> {
    if buffer.duration_s() < 1.0 {
        return Err(Error::precondition(format!(
            "band analysis needs at least 1 s of audio, got {:.3} s",
            buffer.duration_s()
        )));
    }
    let window = band_analysis_window(buffer.sample_rate_hz());
    let (psd, bin_hz) = welch_psd(buffer, window, window / 2)?;
    let map = BandMap::new(bands, bin_hz, psd.len(), buffer.sample_rate_hz());
    let power_db = map.sums(&psd).into_iter().map(|p| 10.0 * p.log10()).collect();
    Ok(BandPowerProfile {
        bands: map.bands,
        power_db,
        absent: map.absent,
    })
}

/// Encodes a spectrogram as a binary PGM (P5, maxval 255): one column per
/// frame, one row per bin with the lowest frequency at the bottom, and
/// `db_floor..0 dB` mapped linearly onto `0..255`.
pub fn encode_pgm(spec: &Spectrogram, db_floor: f64) -> Result<Vec<u8>> {
    if !(db_floor < 0.0) {
        return Err(Error::precondition(format!(
            "dB floor {db_floor} must be negative"
        )));
    }
    let (w, h) = (spec.n_frames(), spec.n_bins());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for bin in (0..h).rev() {
        for frame in 0..w {
            let p = spec.frame(frame)[bin];
            let level = if p > 0.0 {
                ((10.0 * p.log10() - db_floor) / -db_floor).clamp(0.0, 1.0)
            } else {
                0.0
            };
            out.push((level * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn spectrogram_image(spec: &Spectrogram, path: impl AsRef<Path>, db_floor: f64) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(spec, db_floor)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(freq: f64, amp: f64, secs: f64, rate: u32) -> SampleBuffer {
        let n = (secs * rate as f64) as usize;
        let s = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        SampleBuffer::new(s, rate).unwrap()
    }

    fn white(sigma: f64, secs: f64, rate: u32, seed: u64) -> SampleBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (secs * rate as f64) as usize;
        let s = (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                sigma * v
            })
            .collect();
        SampleBuffer::from_clamped(s, rate).unwrap()
    }

    /// Direct O(N^2) DFT power of one windowed frame; independent of rustfft.
    fn direct_dft_power(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let w = hann(n);
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, (&x, &wt)) in frame.iter().zip(&w).enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += x * wt * ph.cos();
                    im += x * wt * ph.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn sinusoid_peak_bin_matches_direct_dft() {
        let buf = sine(1000.0, 1.0, 0.2, 48000);
        let oracle = direct_dft_power(&buf.samples()[..1024]);
        assert_eq!(argmax(&oracle), 21);
        let spec = stft(&buf, 1024, 256).unwrap();
        for frame in spec.frames() {
            assert_eq!(argmax(frame), 21);
        }
        // Shape agrees with the oracle up to the normalization constant.
        let ratio = spec.frame(0)[21] / oracle[21];
        for k in 1..512 {
            let expected = oracle[k] * ratio;
            assert!((spec.frame(0)[k] - expected).abs() <= 1e-9 * oracle[21] * ratio);
        }
    }

    #[test]
    fn zero_buffer_gives_zero_power() {
        let buf = SampleBuffer::silence(4096, 48000).unwrap();
        let spec = stft(&buf, 1024, 256).unwrap();
        assert_eq!(spec.n_frames(), 13);
        assert_eq!(spec.n_bins(), 513);
        assert!(spec.power().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn stft_preconditions() {
        let buf = SampleBuffer::silence(1000, 48000).unwrap();
        assert!(stft(&buf, 1024, 256).is_err());
        let buf = SampleBuffer::silence(4096, 48000).unwrap();
        assert!(stft(&buf, 1000, 256).is_err());
        assert!(stft(&buf, 32, 16).is_err());
        assert!(stft(&buf, 1024, 0).is_err());
        assert!(stft(&buf, 1024, 2048).is_err());
    }

    #[test]
    fn unit_sinusoid_frame_power_is_one_half() {
        let spec = stft(&sine(1000.0, 1.0, 0.1, 48000), 1024, 256).unwrap();
        let total: f64 = spec.frame(2).iter().sum();
        assert!((total - 0.5).abs() < 0.01, "{total}");
    }

    #[test]
    fn parseval_with_overlap_correction() {
        let buf = white(0.1, 2.0, 48000, 7);
        let spec = stft(&buf, 1024, 256).unwrap();
        // Time-domain oracle: each sample weighted by how much squared
        // window covers it, relative to the full-overlap level.
        let w = hann(1024);
        let level = w.iter().map(|v| v * v).sum::<f64>() / 256.0;
        let mut weight = vec![0.0; buf.len()];
        for k in 0..spec.n_frames() {
            for (i, wi) in w.iter().enumerate() {
                weight[k * 256 + i] += wi * wi / level;
            }
        }
        let oracle: f64 = buf.samples().iter().zip(&weight).map(|(x, c)| x * x * c).sum();
        let measured = spec.total_power() * 256.0;
        assert!((measured / oracle - 1.0).abs() < 1e-9);
    }

    #[test]
    fn band_table_examples() {
        let one = third_octave_bands(900.0, 1100.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].center_hz, 1000.0);
        assert!((one[0].lower_hz - 890.899).abs() < 1e-3);
        assert!((one[0].upper_hz - 1122.462).abs() < 1e-3);

        // Oracle: enumerate the 2^(n/3) grid directly.
        let grid: Vec<f64> = (-30..30)
            .map(|n| 1000.0 * 2f64.powf(n as f64 / 3.0))
            .filter(|c| c * 2f64.powf(1.0 / 6.0) > 20.0 && c * 2f64.powf(-1.0 / 6.0) < 20000.0)
            .collect();
        let audio = third_octave_bands(20.0, 20000.0).unwrap();
        assert_eq!(audio.len(), 31);
        assert_eq!(grid.len(), 31);
        for (b, c) in audio.iter().zip(&grid) {
            assert!((b.center_hz - c).abs() < 1e-9 * c);
        }
        assert!((audio[0].center_hz - 19.686).abs() < 1e-3);
        assert!((audio[30].center_hz - 20158.737).abs() < 1e-3);
        assert!(audio.iter().any(|b| b.center_hz == 1000.0));

        assert!(third_octave_bands(0.0, 10.0).is_err());
        assert!(third_octave_bands(100.0, 50.0).is_err());
    }

    #[test]
    fn bands_are_contiguous_and_bins_disjoint() {
        let bands = third_octave_bands(20.0, 24000.0).unwrap();
        for pair in bands.windows(2) {
            assert_eq!(pair[0].upper_hz, pair[1].lower_hz);
        }
        let map = BandMap::new(&bands, 48000.0 / 1024.0, 513, 48000);
        let mut seen = vec![false; 513];
        for (band, r) in map.bands().iter().zip(map.bin_ranges()) {
            for k in r.clone() {
                assert!(!seen[k], "bin {k} counted twice");
                seen[k] = true;
                assert!(band.contains(k as f64 * 48000.0 / 1024.0));
            }
        }
        // Every bin inside the covered range is assigned.
        let lo = map.bands()[0].lower_hz;
        let hi = map.bands().last().unwrap().upper_hz;
        for (k, s) in seen.iter().enumerate() {
            let f = k as f64 * 48000.0 / 1024.0;
            assert_eq!(*s, f >= lo && f < hi, "bin {k} at {f} Hz");
        }
        assert_eq!(map.absent().len(), 1);
    }

    #[test]
    fn sinusoid_power_lands_in_one_band() {
        let bands = third_octave_bands(100.0, 10000.0).unwrap();
        let profile = band_powers(&sine(1000.0, 1.0, 2.0, 48000), &bands).unwrap();
        let at = profile.get(0).unwrap();
        // Analytic: mean square of a unit sinusoid is 1/2.
        assert!((at - 10.0 * 0.5f64.log10()).abs() < 0.05, "{at}");
        assert!(profile.get(-1).unwrap() <= at - 40.0);
        assert!(profile.get(1).unwrap() <= at - 40.0);
    }

    #[test]
    fn white_noise_band_slope() {
        let bands = third_octave_bands(100.0, 10000.0).unwrap();
        let profile = band_powers(&white(0.1, 20.0, 48000, 3), &bands).unwrap();
        let xs: Vec<f64> = profile.bands.iter().map(|b| b.index as f64).collect();
        let slope = fit_slope(&xs, &profile.power_db);
        let expected = 10.0 * 2f64.log10() / 3.0;
        assert!((slope - expected).abs() <= 0.5, "slope {slope}");
    }

    pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    #[test]
    fn band_powers_scale_covariant() {
        let bands = third_octave_bands(50.0, 20000.0).unwrap();
        let buf = white(0.1, 1.5, 48000, 11);
        let a = band_powers(&buf, &bands).unwrap();
        let b = band_powers(&buf.scaled(0.25).unwrap(), &bands).unwrap();
        let shift = 20.0 * 0.25f64.log10();
        for (x, y) in a.power_db.iter().zip(&b.power_db) {
            assert!((y - x - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn band_powers_needs_one_second_and_reports_absent_bands() {
        let bands = third_octave_bands(100.0, 20000.0).unwrap();
        assert!(band_powers(&white(0.1, 0.5, 48000, 1), &bands).is_err());
        let p = band_powers(&white(0.1, 1.0, 16000, 1), &bands).unwrap();
        assert!(p.bands.iter().all(|b| b.upper_hz <= 8000.0));
        assert!(!p.absent.is_empty());
        assert!(p.absent.iter().all(|b| b.upper_hz > 8000.0));
    }

    #[test]
    fn stft_is_deterministic() {
        let buf = white(0.2, 0.5, 48000, 5);
        let a = stft(&buf, 1024, 256).unwrap();
        let b = stft(&buf, 1024, 256).unwrap();
        assert!(a.power().iter().zip(b.power()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn pgm_layout() {
        let (frames, window) = (6, 16);
        let bins = window / 2 + 1;
        let mut power = vec![0.0; frames * bins];
        power[3 * bins + 5] = 1.0;
        let spec = Spectrogram::from_power(power, frames, window, 4, 48000).unwrap();
        let img = encode_pgm(&spec, -80.0).unwrap();
        let header = format!("P5\n{frames} {bins}\n255\n");
        assert!(img.starts_with(header.as_bytes()));
        let pixels = &img[header.len()..];
        assert_eq!(pixels.len(), frames * bins);
        for (i, &p) in pixels.iter().enumerate() {
            let (row, col) = (i / frames, i % frames);
            let bright = row == bins - 1 - 5 && col == 3;
            assert_eq!(p, if bright { 255 } else { 0 }, "row {row} col {col}");
        }
        assert!(encode_pgm(&spec, 0.0).is_err());
    }

    #[test]
    fn pgm_level_mapping() {
        let power = vec![1e-4; 9];
        let spec = Spectrogram::from_power(power, 1, 16, 4, 48000).unwrap();
        let img = encode_pgm(&spec, -80.0).unwrap();
        // -40 dB sits halfway between -80 and 0.
        assert!(img[img.len() - 9..].iter().all(|&p| p == 128));
    }
}
