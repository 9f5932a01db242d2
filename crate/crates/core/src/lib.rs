//! Detection and classification of electrical-connector click events in
//! noisy industrial audio.
//!
//! A click has a two-part signature: a short broadband burst (about 50 ms,
//! energy up to the top of the audible band) followed by a longer decaying
//! tail confined to roughly 1-8 kHz. [`signature::detect_events`] finds
//! bursts above a rolling median background in the region above 8 kHz, where
//! factory noise is weak, and then confirms the tail.
//!
//! The crate also synthesizes the material needed to exercise the detector
//! without field recordings: pink noise, a factory soundscape with broadband
//! transients, clicks, SNR-controlled mixes and a parametric dish/shroud
//! transfer model ([`soundscape`]). [`eval`] scores detections against
//! ground truth and runs the benchmark and shroud depth sweep.

pub mod audio_io;
pub mod config;
pub mod error;
pub mod eval;
pub mod signature;
pub mod soundscape;
pub mod spectral;

mod fft;

pub use audio_io::{read_wav, write_wav, SampleBuffer};
pub use error::{Error, Result};
pub use eval::{match_detections, EvalReport};
pub use signature::{detect_events, ClickSignature, DetectionEvent, EventLabel};
pub use soundscape::{GroundTruth, ShroudModel, SimConfig};
pub use spectral::{band_powers, stft, third_octave_bands, Band, BandPowerProfile, Spectrogram};
