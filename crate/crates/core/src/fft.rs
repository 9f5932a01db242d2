//! Thin wrappers over rustfft for the two FFT shapes the crate needs: short
//! frame power spectra and whole-buffer zero-phase filtering.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Power spectrum of real frames of a fixed length.
pub(crate) struct FramePower {
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl FramePower {
    pub(crate) fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            fft,
            buf: vec![Complex::default(); len],
            scratch,
        }
    }

    /// Writes `|X_k|^2` for `k = 0..=len/2` of `frame * window` into `out`.
    pub(crate) fn power(&mut self, frame: &[f64], window: &[f64], out: &mut [f64]) {
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.norm_sqr();
        }
    }
}

/// Applies a real, zero-phase magnitude response to a whole buffer via one
/// forward and one inverse FFT (circular).
///
/// `gain` maps a non-negative frequency in Hz to a linear amplitude gain.
pub(crate) fn filter_real(samples: &[f64], sample_rate_hz: u32, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    forward.process(&mut buf);

    let df = sample_rate_hz as f64 / n as f64;
    for k in 0..=n / 2 {
        let g = gain(k as f64 * df);
        buf[k] *= g;
        if k != 0 && k != n - k {
            buf[n - k] *= g;
        }
    }

    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}
