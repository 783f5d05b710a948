use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pitchstyle::corpus::MANIFEST_FILE;
use pitchstyle::evaluation::EvalReport;
use pitchstyle::pitch_tracker::extract_f0;
use pitchstyle::signal_io::{read_contour, write_contour, write_wav, ContourFormat};
use pitchstyle::style_engine::{decompose, recompose};
use pitchstyle::{
    AudioBuffer, F0Contour, ScalingSpec, Style, StyleBands, TrackerConfig, VibratoEstimate, VibratoParams,
};
use pitchstyle_cli::{run, EXIT_OK, EXIT_PROCESSING, EXIT_USAGE};
use tempfile::TempDir;

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("pitchstyle").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A 2 s sung phrase: two notes with vibrato on the second.
fn phrase_contour() -> F0Contour {
    let n = 188;
    let f0: Vec<f64> = (0..n).map(|i| if i < 90 { 220.0 } else { 247.0 }).collect();
    let c = F0Contour::from_voiced_hz(f0, 93.75).unwrap();
    pitchstyle::style_engine::synth_vibrato(&c, &VibratoParams::new(6.0, 60.0), 90..n).unwrap()
}

fn tone_wav(dir: &Path) -> PathBuf {
    let sr = 24_000;
    let samples = (0..sr)
        .map(|i| 0.5 * (2.0 * PI * 220.0 * i as f64 / sr as f64).sin())
        .collect();
    let path = dir.join("tone.wav");
    write_wav(&path, &AudioBuffer::new(samples, sr as u32).unwrap()).unwrap();
    path
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| if *y == 0.0 { x.abs() } else { ((x - y) / y).abs() })
        .fold(0.0, f64::max)
}

#[test]
fn extract_writes_contour_at_default_frame_rate() {
    let dir = TempDir::new().unwrap();
    let wav = tone_wav(dir.path());
    let out = dir.path().join("f0.json");
    assert_eq!(cli(&["extract", p(&wav), "-o", p(&out)]), EXIT_OK);
    let c = read_contour(&out).unwrap();
    assert_eq!(c.frame_rate(), 93.75);
    assert_eq!(c.len(), 24_000 / 256);
    let mid = c.len() / 2;
    assert!(c.voiced()[mid]);
    assert!((1200.0 * (c.f0_hz()[mid] / 220.0).log2()).abs() < 10.0);
}

#[test]
fn scale_by_zero_yields_low_band() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("out.json");
    let c = phrase_contour();
    write_contour(&input, &c, ContourFormat::Json).unwrap();
    assert_eq!(cli(&["scale", p(&input), "--factor", "0", "-o", p(&out)]), EXIT_OK);
    let bands = decompose(&c, 4).unwrap();
    let scaled = read_contour(&out).unwrap();
    let low: Vec<f64> = bands.low.iter().map(|l| l.exp()).collect();
    assert!(max_rel(scaled.f0_hz(), &low) < 1e-12);
}

#[test]
fn file_pipeline_matches_in_process_composition() {
    let dir = TempDir::new().unwrap();
    let wav = tone_wav(dir.path());
    let f0 = dir.path().join("f0.json");
    let bands = dir.path().join("bands.json");
    let scaled = dir.path().join("scaled.csv");
    assert_eq!(cli(&["extract", p(&wav), "-o", p(&f0)]), EXIT_OK);
    assert_eq!(cli(&["decompose", p(&f0), "-o", p(&bands)]), EXIT_OK);
    assert_eq!(cli(&["scale", p(&bands), "--factor", "1.7", "-o", p(&scaled)]), EXIT_OK);

    let audio = pitchstyle::signal_io::read_wav(&wav).unwrap();
    let direct = extract_f0(&audio, &TrackerConfig::default()).unwrap();
    let direct = recompose(&decompose(&direct, 4).unwrap(), &ScalingSpec::global(1.7)).unwrap();
    let via_files = read_contour(&scaled).unwrap();
    assert_eq!(via_files.voiced(), direct.voiced());
    assert!(max_rel(via_files.f0_hz(), direct.f0_hz()) < 1e-9);

    let parsed: StyleBands = serde_json::from_str(&fs::read_to_string(&bands).unwrap()).unwrap();
    assert_eq!(parsed.levels, 4);
}

#[test]
fn scale_frame_ranges() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("out.json");
    let c = phrase_contour();
    write_contour(&input, &c, ContourFormat::Json).unwrap();
    let args = ["scale", p(&input), "--frames", "100:140:0", "--frames", "150:160", "--factor", "2", "-o", p(&out)];
    assert_eq!(cli(&args), EXIT_OK);
    let mut factors = vec![1.0; c.len()];
    factors[100..140].fill(0.0);
    factors[150..160].fill(2.0);
    let expected = recompose(&decompose(&c, 4).unwrap(), &ScalingSpec::per_frame(factors)).unwrap();
    assert!(max_rel(read_contour(&out).unwrap().f0_hz(), expected.f0_hz()) < 1e-12);

    // A range without a factor needs --factor.
    assert_eq!(cli(&["scale", p(&input), "--frames", "0:10", "-o", p(&out)]), EXIT_PROCESSING);
    // Out-of-range frames are a processing error, malformed ones a usage error.
    assert_eq!(cli(&["scale", p(&input), "--frames", "0:9999:1", "-o", p(&out)]), EXIT_PROCESSING);
    assert_eq!(cli(&["scale", p(&input), "--frames", "9:3", "-o", p(&out)]), EXIT_USAGE);
    assert_eq!(cli(&["scale", p(&input), "--factor", "-1", "-o", p(&out)]), EXIT_PROCESSING);
}

#[test]
fn detect_add_and_remove_vibrato() {
    let dir = TempDir::new().unwrap();
    let flat = dir.path().join("flat.json");
    let vib = dir.path().join("vib.json");
    let est = dir.path().join("est.json");
    let removed = dir.path().join("removed.json");
    write_contour(&flat, &F0Contour::from_voiced_hz(vec![300.0; 200], 93.75).unwrap(), ContourFormat::Json).unwrap();
    assert_eq!(cli(&["add-vibrato", p(&flat), "--rate", "6", "--extent", "50", "-o", p(&vib)]), EXIT_OK);
    assert_eq!(cli(&["detect", p(&vib), "-o", p(&est)]), EXIT_OK);
    let e: VibratoEstimate = serde_json::from_str(&fs::read_to_string(&est).unwrap()).unwrap();
    assert_eq!(e.label, Style::Vibrato);
    assert!((e.rate - 6.0).abs() < 0.5);

    assert_eq!(cli(&["remove-vibrato", p(&vib), "-o", p(&removed)]), EXIT_OK);
    assert_eq!(cli(&["detect", p(&removed), "--frames", "0:200", "-o", p(&est)]), EXIT_OK);
    let e: VibratoEstimate = serde_json::from_str(&fs::read_to_string(&est).unwrap()).unwrap();
    assert_eq!(e.label, Style::Straight);
    assert!(e.extent_cents < 1e-6);
}

#[test]
fn shift_range_moves_mean() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.csv");
    let out = dir.path().join("out.csv");
    write_contour(&input, &phrase_contour(), ContourFormat::Csv).unwrap();
    assert_eq!(cli(&["shift-range", p(&input), "--target-mean", "440", "-o", p(&out)]), EXIT_OK);
    let shifted = read_contour(&out).unwrap();
    let mean = pitchstyle::style_engine::mean_f0(&shifted).unwrap();
    let expected_ratio = 440.0 / pitchstyle::style_engine::mean_f0(&phrase_contour()).unwrap();
    assert!((shifted.f0_hz()[0] / phrase_contour().f0_hz()[0] - expected_ratio).abs() < 1e-12);
    assert!((mean - 440.0).abs() < 1e-9);
}

#[test]
fn corpus_eval_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert_eq!(cli(&["gen-corpus", "--out", p(d), "--items", "30", "--seed", "7"]), EXIT_OK);
    }
    assert_eq!(
        fs::read(a.join(MANIFEST_FILE)).unwrap(),
        fs::read(b.join(MANIFEST_FILE)).unwrap()
    );
    let report = dir.path().join("eval.json");
    let args = ["eval", "--corpus", p(&a), "--alphas", "0.1,0.3,0.5,0.7,1.0,2.0", "-o", p(&report)];
    assert_eq!(cli(&args), EXIT_OK);
    let first = fs::read(&report).unwrap();
    let r: EvalReport = serde_json::from_slice(&first).unwrap();
    assert_eq!(r.per_alpha_accuracy.len(), 6);
    for w in r.per_alpha_accuracy.windows(2) {
        assert!(w[1].accuracy >= w[0].accuracy);
    }
    assert_eq!(r.level_capture.len(), 3);
    assert_eq!(cli(&args), EXIT_OK);
    assert_eq!(fs::read(&report).unwrap(), first);
}

#[test]
fn train_and_convert() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    let model = dir.path().join("model.json");
    let history = dir.path().join("loss.txt");
    let args = ["gen-corpus", "--out", p(&corpus), "--preset", "converter", "--items", "6"];
    assert_eq!(cli(&args), EXIT_OK);
    let args = [
        "train", "--corpus", p(&corpus), "-o", p(&model), "--steps", "250", "--batch", "8", "--history", p(&history),
    ];
    assert_eq!(cli(&args), EXIT_OK);
    assert_eq!(fs::read_to_string(&history).unwrap().lines().count(), 3);

    let input = corpus.join("items").join("item_0000.json");
    let out = dir.path().join("converted.json");
    let args = ["convert", p(&input), "--model", p(&model), "--style", "vibrato", "-o", p(&out)];
    assert_eq!(cli(&args), EXIT_OK);
    let original = read_contour(&input).unwrap();
    let converted = read_contour(&out).unwrap();
    assert_eq!(converted.voiced(), original.voiced());

    let out2 = dir.path().join("converted2.json");
    let args = ["convert", p(&input), "--model", p(&model), "--style", "vibrato", "-o", p(&out2)];
    assert_eq!(cli(&args), EXIT_OK);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());

    let args = ["convert", p(&input), "--model", p(&input), "--style", "vibrato", "-o", p(&out2)];
    assert_eq!(cli(&args), EXIT_PROCESSING);
}

#[test]
fn synth_renders_wav() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    let wav = dir.path().join("out.wav");
    write_contour(&input, &phrase_contour(), ContourFormat::Json).unwrap();
    assert_eq!(cli(&["synth", p(&input), "-o", p(&wav), "--partials", "4"]), EXIT_OK);
    let audio = pitchstyle::signal_io::read_wav(&wav).unwrap();
    assert_eq!(audio.sample_rate(), 24_000);
    assert_eq!(audio.len(), 188 * 256);
}

#[test]
fn usage_and_processing_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(&[]), EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["detect", "x.json", "--bogus"]), EXIT_USAGE);
    assert_eq!(cli(&["convert", "x.json", "--model", "m.json", "--style", "opera"]), EXIT_USAGE);
    assert_eq!(cli(&["detect", p(&dir.path().join("missing.json"))]), EXIT_PROCESSING);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "index,f0,voiced\n0,abc,1\n").unwrap();
    assert_eq!(cli(&["detect", p(&bad)]), EXIT_PROCESSING);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn binary_reports_usage_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_pitchstyle"))
        .args(["scale", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "{stderr}");
    assert!(out.stdout.is_empty());

    let out = Command::new(env!("CARGO_BIN_EXE_pitchstyle"))
        .args(["detect", "/nonexistent/contour.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PROCESSING));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
