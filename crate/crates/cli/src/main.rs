//! `clickscope`: detect connector clicks, synthesize test soundscapes, and
//! run the benchmark and shroud depth sweep from the command line.
//!
//! Exit codes: 0 success, 2 I/O, 3 config, 4 precondition.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clickscope::config::{self, Entry};
use clickscope::eval::{self, depth_sweep, run_benchmark};
use clickscope::signature::{to_jsonl, Detector};
use clickscope::soundscape::{
    self, write_corpus, write_manifest, ClickModel, CorpusSpec, FactoryModel, ManifestEntry, MixSpec,
    ShroudModel, SimConfig,
};
use clickscope::spectral::{self, band_powers, spectrogram_image, third_octave_bands};
use clickscope::{read_wav, write_wav, Error, Result};

#[derive(Parser)]
#[command(name = "clickscope", version, about = "Connector click detection and soundscape synthesis")]
struct Cli {
    /// Plain-text `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect click events in a WAV file and write them as JSON lines.
    Detect {
        input: PathBuf,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize factory noise with clicks: mix.wav, truth.csv, manifest.json.
    Simulate {
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 3)]
        clicks: usize,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write the spectrogram of a WAV file as a binary PGM image.
    Spectrogram {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Level mapped to black, in dB relative to full scale.
        #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
        floor_db: f64,
    },
    /// Third-octave band profile of a WAV file as CSV.
    Bands {
        input: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        min_hz: f64,
        #[arg(long, default_value_t = 20_000.0)]
        max_hz: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Band profiles of off-axis pink noise through the shroud at several
    /// inset depths, as CSV (rows are bands, columns are depths).
    DepthSweep {
        /// Comma-separated depths in metres (default: 0 to 24 in, 3 in steps).
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = eval::SWEEP_DURATION_S)]
        duration: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run detection over a corpus manifest and report against its truth.
    Evaluate {
        manifest: PathBuf,
        #[command(flatten)]
        jobs: Jobs,
        /// Write the report as JSON here as well as printing the table.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the benchmark corpus (WAV, truth CSV, manifest) to a directory.
    Corpus {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        clips_per_snr: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
    },
}

#[derive(Args)]
struct Jobs {
    /// Worker threads (default: number of processors).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Jobs {
    fn get(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

/// Defaults, then the config file, then command-line flags.
#[derive(Debug, Clone, Default)]
struct CliConfig {
    detector: Detector,
    sim: SimConfig,
    factory: FactoryModel,
    click: ClickModel,
    shroud: ShroudModel,
    corpus: CorpusSpec,
}

impl CliConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            for entry in config::parse(&text)? {
                cfg.apply(&entry)?;
            }
        }
        Ok(cfg)
    }

    fn apply(&mut self, entry: &Entry) -> Result<()> {
        let placement = config::assign(
            entry,
            &mut [
                ("min_spacing_s", &mut self.corpus.min_spacing_s),
                ("lead_in_s", &mut self.corpus.lead_in_s),
                ("lead_out_s", &mut self.corpus.lead_out_s),
            ],
        )?;
        let hit = placement
            || self.detector.apply(entry)?
            || self.sim.apply(entry)?
            || self.factory.apply(entry)?
            || self.click.apply(entry)?
            || self.shroud.apply(entry)?;
        if hit {
            Ok(())
        } else {
            Err(entry.unknown())
        }
    }

    fn corpus(&self) -> CorpusSpec {
        CorpusSpec {
            sample_rate_hz: self.sim.sample_rate_hz,
            transient_rate_hz: self.sim.transient_rate_hz,
            factory: self.factory.clone(),
            click: self.click.clone(),
            ..self.corpus.clone()
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = CliConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Detect { input, out } => {
            let buffer = read_wav(&input)?;
            let events = cfg.detector.detect_buffer(&buffer)?;
            write_out(out.as_deref(), &to_jsonl(&events))
        }
        Command::Simulate {
            snr_db,
            clicks,
            duration,
            seed,
            out_dir,
        } => {
            if let Some(v) = snr_db {
                cfg.sim.target_snr_db = v;
            }
            if let Some(v) = duration {
                cfg.sim.duration_s = v;
            }
            if let Some(v) = seed {
                cfg.sim.seed = v;
            }
            cfg.sim.validate()?;
            let corpus = cfg.corpus();
            let clip = soundscape::synthesize_mix(&MixSpec {
                sample_rate_hz: cfg.sim.sample_rate_hz,
                seed: cfg.sim.seed,
                duration_s: cfg.sim.duration_s,
                clicks,
                min_spacing_s: corpus.min_spacing_s,
                lead_in_s: corpus.lead_in_s,
                lead_out_s: corpus.lead_out_s,
                transient_rate_hz: cfg.sim.transient_rate_hz,
                snr_db: cfg.sim.target_snr_db,
                factory: cfg.factory.clone(),
                click: cfg.click.clone(),
            })?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            write_wav(&clip.buffer, out_dir.join("mix.wav"))?;
            clip.truth.write_csv(out_dir.join("truth.csv"))?;
            write_manifest(
                &[ManifestEntry {
                    wav_path: "mix.wav".into(),
                    truth_path: "truth.csv".into(),
                    snr_db: clip.snr_db,
                    seed: clip.seed,
                }],
                out_dir.join("manifest.json"),
            )
        }
        Command::Spectrogram { input, out, floor_db } => {
            let buffer = read_wav(&input)?;
            let spec = spectral::stft(&buffer, spectral::DEFAULT_WINDOW_LEN, spectral::DEFAULT_HOP)?;
            spectrogram_image(&spec, &out, floor_db)
        }
        Command::Bands {
            input,
            min_hz,
            max_hz,
            out,
        } => {
            let buffer = read_wav(&input)?;
            let profile = band_powers(&buffer, &third_octave_bands(min_hz, max_hz)?)?;
            write_out(out.as_deref(), &profile.to_csv())
        }
        Command::DepthSweep {
            depths,
            seed,
            duration,
            out,
        } => {
            if let Some(v) = seed {
                cfg.sim.seed = v;
            }
            cfg.sim.duration_s = duration;
            let depths = depths.unwrap_or_else(eval::default_depths);
            let sweep = depth_sweep(&cfg.shroud, &depths, &cfg.sim)?;
            write_out(out.as_deref(), &sweep.to_csv())
        }
        Command::Evaluate { manifest, jobs, json } => {
            let report = run_benchmark(&manifest, &cfg.detector, jobs.get())?;
            if let Some(path) = json {
                write_out(Some(&path), &(report.to_json() + "\n"))?;
            }
            write_out(None, &report.to_table())
        }
        Command::Corpus {
            out_dir,
            clips_per_snr,
            base_seed,
        } => {
            let mut spec = cfg.corpus();
            if let Some(v) = clips_per_snr {
                spec.clips_per_snr = v;
            }
            if let Some(v) = base_seed {
                spec.base_seed = v;
            }
            let manifest = write_corpus(&spec, &out_dir)?;
            write_out(None, &format!("{}\n", manifest.display()))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Wav { .. } | Error::Format { .. } => 2,
        Error::Config(_) => 3,
        Error::Precondition(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clickscope: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
