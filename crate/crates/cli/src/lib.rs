//! Command-line front end for `pitchstyle`.
//!
//! Every subcommand reads and writes plain files (WAV, contour JSON/CSV,
//! band JSON, model checkpoints, corpus manifests), so stages compose
//! through the filesystem. [`run`] is the whole program minus process
//! exit, which keeps it testable in-process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pitchstyle::converter_model::{self, ConverterModel};
use pitchstyle::corpus::{self, LabeledContour};
use pitchstyle::evaluation;
use pitchstyle::pitch_tracker::extract_f0;
use pitchstyle::signal_io::{self, ContourFormat};
use pitchstyle::style_engine::{self, ScalingSpec, StyleBands};
use pitchstyle::synth;
use pitchstyle::vibrato_analysis;
use pitchstyle::{
    CorpusSpec, Error, F0Contour, ModelConfig, Style, TrackerConfig, TrainConfig, VibratoParams, DEFAULT_LEVELS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROCESSING: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pitchstyle", version, about = "Vibrato analysis and pitch-style conversion for singing F0 contours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; the extension picks JSON or CSV. Defaults to stdout (JSON).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Levels {
    /// Wavelet decomposition depth.
    #[arg(short = 'L', long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track F0 in a WAV file.
    Extract {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 60.0)]
        f0_floor: f64,
        #[arg(long, default_value_t = 1000.0)]
        f0_ceil: f64,
        /// Hop size in samples.
        #[arg(long, default_value_t = 256)]
        hop: usize,
        /// Maximum interval-estimate spread for a frame to count as voiced.
        #[arg(long, default_value_t = 0.15)]
        threshold: f64,
    },
    /// Split a contour into low and high log-F0 bands.
    Decompose {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Convert a contour to another singing style with a trained model.
    Convert {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        style: Style,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Scale the high band (vibrato) of a contour or band file.
    Scale {
        input: PathBuf,
        /// Factor for the whole contour, or for ranges given without one.
        #[arg(long, allow_negative_numbers = true)]
        factor: Option<f64>,
        /// start:end[:factor]; frames outside every range keep factor 1.
        #[arg(long = "frames", value_name = "START:END[:FACTOR]")]
        frames: Vec<FrameRange>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Estimate vibrato rate and extent and classify the style.
    Detect {
        input: PathBuf,
        /// Analysis window start:end; picked automatically when omitted.
        #[arg(long = "frames", value_name = "START:END")]
        frames: Option<FrameRange>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Drop the high band, keeping melody and note transitions.
    RemoveVibrato {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Add sinusoidal vibrato to voiced frames.
    AddVibrato {
        input: PathBuf,
        /// Hz.
        #[arg(long)]
        rate: f64,
        /// Peak deviation in cents.
        #[arg(long)]
        extent: f64,
        /// Seconds of linear fade-in from the segment start.
        #[arg(long, default_value_t = 0.0)]
        onset_delay: f64,
        /// Radians.
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        /// Segment start:end; every voiced run when omitted.
        #[arg(long = "frames", value_name = "START:END")]
        frames: Option<FrameRange>,
        #[command(flatten)]
        out: Output,
    },
    /// Transpose a contour so its mean F0 moves to a target.
    ShiftRange {
        input: PathBuf,
        /// Target mean F0 in Hz.
        #[arg(long)]
        target_mean: f64,
        /// Source mean F0 in Hz; measured from the contour when omitted.
        #[arg(long)]
        source_mean: Option<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Write a synthetic labelled corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Default)]
        preset: Preset,
        /// JSON corpus spec; overrides the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        vibrato_fraction: Option<f64>,
    },
    /// Train a converter model on a corpus directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint path.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the loss history (one value per line).
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        levels: Levels,
    },
    /// Detector accuracy, accuracy under vibrato scaling, and level capture.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,1.0,2.0")]
        alphas: Vec<f64>,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        levels: Levels,
    },
    /// Render a contour as a harmonic tone (24 kHz WAV).
    Synth {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_PARTIALS)]
        partials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Default,
    /// Fixed-rate, phase-locked vibrato for converter training.
    Converter,
}

/// `start:end[:factor]`, end exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRange {
    pub frames: Range<usize>,
    pub factor: Option<f64>,
}

impl FromStr for FrameRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("expected START:END[:FACTOR], got '{s}'"));
        }
        let num = |p: &str, what: &str| p.trim().parse::<usize>().map_err(|_| format!("bad {what} '{p}' in '{s}'"));
        let start = num(parts[0], "start")?;
        let end = num(parts[1], "end")?;
        if start >= end {
            return Err(format!("empty frame range '{s}'"));
        }
        let factor = match parts.get(2) {
            Some(f) => Some(f.trim().parse::<f64>().map_err(|_| format!("bad factor '{f}' in '{s}'"))?),
            None => None,
        };
        Ok(FrameRange {
            frames: start..end,
            factor,
        })
    }
}

/// Runs the program on `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PROCESSING
        }
    }
}

type CliResult = Result<(), Error>;

fn emit(out: &Output, text: &str) -> CliResult {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn emit_json<T: serde::Serialize>(out: &Output, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn emit_contour(out: &Output, contour: &F0Contour) -> CliResult {
    match &out.output {
        Some(path) => signal_io::write_contour(path, contour, ContourFormat::from_path(path)),
        None => emit(out, &signal_io::contour_to_json(contour)?),
    }
}

fn is_csv(out: &Output) -> bool {
    out.output
        .as_deref()
        .is_some_and(|p| ContourFormat::from_path(p) == ContourFormat::Csv)
}

fn bands_to_csv(bands: &StyleBands) -> String {
    let mut s = format!("# frame_rate={} levels={}\nindex,low,high,voiced\n", bands.frame_rate, bands.levels);
    for i in 0..bands.len() {
        let _ = writeln!(s, "{i},{},{},{}", bands.low[i], bands.high[i], u8::from(bands.voiced[i]));
    }
    s
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Band files are JSON objects with a `low` field; anything else is read
/// as a contour.
fn read_bands_or_contour(path: &Path, levels: usize) -> Result<StyleBands, Error> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("low").is_some() {
            return serde_json::from_value(value).map_err(|e| Error::Schema(format!("bad band file: {e}")));
        }
    }
    style_engine::decompose(&signal_io::parse_contour(&text)?, levels)
}

fn scaling_spec(len: usize, factor: Option<f64>, frames: &[FrameRange]) -> Result<ScalingSpec, Error> {
    if frames.is_empty() {
        return Ok(ScalingSpec::global(factor.unwrap_or(1.0)));
    }
    let ranges: Vec<(Range<usize>, f64)> = frames
        .iter()
        .map(|r| {
            r.factor
                .or(factor)
                .map(|f| (r.frames.clone(), f))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "frame range {}:{} has no factor and --factor is not set",
                        r.frames.start, r.frames.end
                    ))
                })
        })
        .collect::<Result<_, _>>()?;
    ScalingSpec::with_ranges(len, 1.0, &ranges)
}

fn labeled_corpus(dir: &Path) -> Result<Vec<LabeledContour>, Error> {
    let (_, items) = corpus::load_corpus(dir)?;
    Ok(items.iter().map(|i| i.labeled()).collect())
}

fn execute(command: Command) -> CliResult {
    match command {
        Command::Extract {
            input,
            out,
            f0_floor,
            f0_ceil,
            hop,
            threshold,
        } => {
            let audio = signal_io::read_wav(&input)?;
            let config = TrackerConfig {
                f0_floor,
                f0_ceil,
                hop,
                voicing_reliability_threshold: threshold,
                ..TrackerConfig::default()
            };
            emit_contour(&out, &extract_f0(&audio, &config)?)
        }
        Command::Decompose { input, out, levels } => {
            let bands = style_engine::decompose(&signal_io::read_contour(&input)?, levels.levels)?;
            if is_csv(&out) {
                emit(&out, &bands_to_csv(&bands))
            } else {
                emit_json(&out, &bands)
            }
        }
        Command::Convert {
            input,
            model,
            style,
            out,
            levels,
        } => {
            let model = ConverterModel::load(&model)?;
            let contour = signal_io::read_contour(&input)?;
            emit_contour(&out, &converter_model::convert_style(&model, &contour, style, levels.levels)?)
        }
        Command::Scale {
            input,
            factor,
            frames,
            out,
            levels,
        } => {
            let bands = read_bands_or_contour(&input, levels.levels)?;
            let spec = scaling_spec(bands.len(), factor, &frames)?;
            emit_contour(&out, &style_engine::recompose(&bands, &spec)?)
        }
        Command::Detect {
            input,
            frames,
            out,
            levels,
        } => {
            let contour = signal_io::read_contour(&input)?;
            let estimate = match frames {
                Some(r) => vibrato_analysis::estimate(&contour, levels.levels, r.frames)?,
                None => vibrato_analysis::detect(&contour, levels.levels)?,
            };
            emit_json(&out, &estimate)
        }
        Command::RemoveVibrato { input, out, levels } => {
            let contour = signal_io::read_contour(&input)?;
            emit_contour(&out, &style_engine::remove_vibrato(&contour, levels.levels)?)
        }
        Command::AddVibrato {
            input,
            rate,
            extent,
            onset_delay,
            phase,
            frames,
            out,
        } => {
            let mut contour = signal_io::read_contour(&input)?;
            let params = VibratoParams {
                onset_delay,
                phase,
                ..VibratoParams::new(rate, extent)
            };
            let segments = match frames {
                Some(r) => vec![r.frames],
                None => contour.voiced_runs(),
            };
            if segments.is_empty() {
                return Err(Error::NoVoicedFrames);
            }
            for seg in segments {
                contour = style_engine::synth_vibrato(&contour, &params, seg)?;
            }
            emit_contour(&out, &contour)
        }
        Command::ShiftRange {
            input,
            target_mean,
            source_mean,
            out,
        } => {
            let contour = signal_io::read_contour(&input)?;
            let src = match source_mean {
                Some(m) => m,
                None => style_engine::mean_f0(&contour)?,
            };
            emit_contour(&out, &style_engine::shift_pitch_range(&contour, src, target_mean)?)
        }
        Command::GenCorpus {
            out,
            preset,
            spec,
            items,
            seed,
            vibrato_fraction,
        } => {
            let mut corpus_spec = match (spec, preset) {
                (Some(path), _) => serde_json::from_str(&read_text(&path)?)?,
                (None, Preset::Default) => CorpusSpec::default(),
                (None, Preset::Converter) => CorpusSpec::converter_training(),
            };
            if let Some(n) = items {
                corpus_spec.items = n;
            }
            if let Some(s) = seed {
                corpus_spec.seed = s;
            }
            if let Some(f) = vibrato_fraction {
                corpus_spec.vibrato_fraction = f;
            }
            let manifest = corpus::gen_corpus(&corpus_spec, &out)?;
            eprintln!("wrote {} items to {}", manifest.items.len(), out.display());
            Ok(())
        }
        Command::Train {
            corpus,
            output,
            history,
            steps,
            learning_rate,
            batch,
            seed,
            levels,
        } => {
            let data = labeled_corpus(&corpus)?;
            let config = TrainConfig {
                learning_rate,
                steps,
                batch,
                seed,
                levels: levels.levels,
                ..TrainConfig::default()
            };
            let initial = ConverterModel::new(ModelConfig {
                seed,
                ..ModelConfig::default()
            })?;
            let (model, losses) = converter_model::train(&initial, &data, &config)?;
            model.save(&output)?;
            if let Some(path) = history {
                let text: String = losses.iter().map(|l| format!("{l}\n")).collect();
                fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
            }
            if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
                eprintln!("loss {first:.4e} -> {last:.4e} over {steps} steps");
            }
            Ok(())
        }
        Command::Eval {
            corpus,
            alphas,
            out,
            levels,
        } => {
            let data = labeled_corpus(&corpus)?;
            emit_json(&out, &evaluation::evaluate(&data, &alphas, levels.levels)?)
        }
        Command::Synth {
            input,
            output,
            partials,
        } => synth::synth_demo(&signal_io::read_contour(&input)?, &output, partials),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_range_parsing() {
        assert_eq!(
            "10:20".parse::<FrameRange>().unwrap(),
            FrameRange {
                frames: 10..20,
                factor: None
            }
        );
        assert_eq!("0:5:1.5".parse::<FrameRange>().unwrap().factor, Some(1.5));
        for bad in ["", "5", "5:5", "7:3", "a:4", "1:2:x", "1:2:3:4"] {
            assert!(bad.parse::<FrameRange>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ranges_fall_back_to_global_factor() {
        let r = |s: &str| s.parse::<FrameRange>().unwrap();
        let spec = scaling_spec(6, Some(3.0), &[r("1:3"), r("2:4:0")]).unwrap();
        assert_eq!(spec.frame_factors.unwrap(), vec![1.0, 3.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(scaling_spec(4, Some(0.5), &[]).unwrap(), ScalingSpec::global(0.5));
        assert!(scaling_spec(4, None, &[r("0:2")]).is_err());
    }

    #[test]
    fn band_csv_layout() {
        let bands = StyleBands {
            low: vec![1.0, 2.0],
            high: vec![0.5, -0.5],
            voiced: vec![true, false],
            frame_rate: 93.75,
            levels: 1,
        };
        assert_eq!(
            bands_to_csv(&bands),
            "# frame_rate=93.75 levels=1\nindex,low,high,voiced\n0,1,0.5,1\n1,2,-0.5,0\n"
        );
    }
}
