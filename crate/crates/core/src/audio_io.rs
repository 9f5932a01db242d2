//! Canonical mono sample buffers and RIFF/WAVE reading and writing.
//!
//! Every other module works on [`SampleBuffer`]: mono, `f64` samples in
//! `[-1, 1]`, integer sample rate of at least 8 kHz. Stereo input is averaged
//! to mono on read; there is no resampling.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};

/// Lowest sample rate accepted anywhere in the crate.
pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

/// Default rate used by the synthesizers and the CLI.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 48_000;

/// Mono PCM audio, normalized to `[-1, 1]`.
///
/// Immutable once built; all transformations return a new buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl SampleBuffer {
    /// Builds a buffer, rejecting non-finite or out-of-range samples.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::precondition(format!(
                "sample {i} is {s}, outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Builds a buffer, clamping every sample into `[-1, 1]`. NaN becomes 0.
    pub fn from_clamped(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Samples `[floor(start_s * rate), floor(end_s * rate))`.
    pub fn slice(&self, start_s: f64, end_s: f64) -> Result<Self> {
        let duration = self.duration_s();
        if !(start_s >= 0.0 && start_s < end_s && end_s <= duration) {
            return Err(Error::precondition(format!(
                "slice bounds [{start_s}, {end_s}) not within [0, {duration}] or empty"
            )));
        }
        let rate = self.sample_rate_hz as f64;
        let start = (start_s * rate).floor() as usize;
        let end = ((end_s * rate).floor() as usize).min(self.samples.len());
        Ok(Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    /// Multiplies every sample by `gain`; fails if the result leaves `[-1, 1]`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
        )
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

fn check_rate(sample_rate_hz: u32) -> Result<()> {
    if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
        return Err(Error::precondition(format!(
            "sample rate {sample_rate_hz} Hz is below the {MIN_SAMPLE_RATE_HZ} Hz minimum"
        )));
    }
    Ok(())
}

/// Averages interleaved frames of `channels` samples to mono.
pub fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    assert!(channels > 0, "channel count must be positive");
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

/// Reasons a byte stream is not a WAV file this crate can read. Each variant
/// names the header field at fault.
#[derive(Debug, Error, PartialEq)]
pub enum WavError {
    #[error("not a RIFF/WAVE file: {field} is {found:?}")]
    NotRiff { field: &'static str, found: String },
    #[error("missing {0:?} chunk")]
    MissingChunk(&'static str),
    #[error("fmt chunk is {0} bytes, need at least 16")]
    ShortFmt(u32),
    #[error("audio_format {0:#06x} is not PCM (1) or IEEE float (3)")]
    UnsupportedCodec(u16),
    #[error("bits_per_sample {bits} is unsupported for audio_format {format}")]
    UnsupportedBitDepth { format: u16, bits: u16 },
    #[error("num_channels {0} is unsupported (expected 1 or 2)")]
    UnsupportedChannels(u16),
    #[error("sample_rate {0} is below {MIN_SAMPLE_RATE_HZ} Hz")]
    UnsupportedSampleRate(u32),
    #[error("block_align {found} does not match channels * bytes per sample = {expected}")]
    BlockAlign { found: u16, expected: u16 },
    #[error("data chunk declares {declared} bytes but only {available} are present")]
    TruncatedData { declared: u32, available: usize },
    #[error("{chunk:?} chunk header truncated at byte {offset}")]
    TruncatedChunk { chunk: String, offset: usize },
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Fmt {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Fmt, WavError> {
    if body.len() < 16 {
        return Err(WavError::ShortFmt(body.len() as u32));
    }
    let mut format = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    // WAVE_FORMAT_EXTENSIBLE carries the real codec in the first two bytes
    // of the sub-format GUID.
    if format == FORMAT_EXTENSIBLE && body.len() >= 26 {
        format = u16_at(body, 24);
    }
    Ok(Fmt {
        format,
        channels,
        sample_rate,
        block_align,
        bits,
    })
}

/// Decodes a RIFF/WAVE byte stream into a mono buffer.
///
/// Accepts 16- and 24-bit integer PCM and 32-bit float, mono or stereo.
/// Integers are scaled by 2^15 or 2^23; floats are clamped to `[-1, 1]`.
pub fn decode_wav(bytes: &[u8]) -> Result<SampleBuffer, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::NotRiff {
            field: "header",
            found: format!("{} bytes", bytes.len()),
        });
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(WavError::NotRiff {
            field: "chunk_id",
            found: String::from_utf8_lossy(&bytes[0..4]).into_owned(),
        });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotRiff {
            field: "format",
            found: String::from_utf8_lossy(&bytes[8..12]).into_owned(),
        });
    }

    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(WavError::TruncatedChunk {
                chunk: String::from_utf8_lossy(&bytes[pos..]).into_owned(),
                offset: pos,
            });
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4);
        let body_start = pos + 8;
        let available = bytes.len() - body_start;
        match id {
            b"fmt " => {
                if (size as usize) > available {
                    return Err(WavError::TruncatedChunk {
                        chunk: "fmt ".into(),
                        offset: pos,
                    });
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_start + size as usize])?);
            }
            b"data" => {
                if (size as usize) > available {
                    return Err(WavError::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                data = Some(&bytes[body_start..body_start + size as usize]);
                // Anything after the data chunk is ignored.
                break;
            }
            _ => {}
        }
        // Chunks are padded to even length.
        pos = body_start + size as usize + (size as usize & 1);
    }

    let fmt = fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let data = data.ok_or(WavError::MissingChunk("data"))?;

    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_FLOAT, 32) => 4,
        (FORMAT_PCM, bits) | (FORMAT_FLOAT, bits) => {
            return Err(WavError::UnsupportedBitDepth {
                format: fmt.format,
                bits,
            })
        }
        (other, _) => return Err(WavError::UnsupportedCodec(other)),
    };
    if !(1..=2).contains(&fmt.channels) {
        return Err(WavError::UnsupportedChannels(fmt.channels));
    }
    if fmt.sample_rate < MIN_SAMPLE_RATE_HZ {
        return Err(WavError::UnsupportedSampleRate(fmt.sample_rate));
    }
    let expected_align = fmt.channels * bytes_per_sample as u16;
    if fmt.block_align != expected_align {
        return Err(WavError::BlockAlign {
            found: fmt.block_align,
            expected: expected_align,
        });
    }

    let interleaved: Vec<f64> = data
        .chunks_exact(bytes_per_sample)
        .map(|b| match bytes_per_sample {
            2 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            3 => {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            _ => {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(-1.0, 1.0)
                }
            }
        })
        .collect();
    let mono = downmix(&interleaved, fmt.channels as usize);
    Ok(SampleBuffer {
        samples: mono,
        sample_rate_hz: fmt.sample_rate,
    })
}

/// Encodes a buffer as a 16-bit mono PCM WAV file image.
pub fn encode_wav(buffer: &SampleBuffer) -> Vec<u8> {
    let data_len = buffer.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buffer.samples() {
        out.extend_from_slice(&quantize_i16(s).to_le_bytes());
    }
    out
}

/// Rounds to the nearest 16-bit code; +1.0 saturates at 32767.
pub fn quantize_i16(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_wav(buffer: &SampleBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(buffer)).map_err(|e| Error::io(path, e))
}
