//! Cross-module behaviour through the public API.

use approx::assert_relative_eq;
use pitchstyle::converter_model::{convert_style, predict_high, train, ConverterModel};
use pitchstyle::corpus::{gen_corpus, generate, load_corpus};
use pitchstyle::pitch_tracker::extract_f0;
use pitchstyle::signal_io::{read_contour, read_wav, write_contour, write_wav};
use pitchstyle::style_engine::{decompose, recompose, remove_vibrato, shift_pitch_range, synth_vibrato};
use pitchstyle::synth::{render, DEFAULT_PARTIALS};
use pitchstyle::vibrato_analysis::{detect, style_accuracy};
use pitchstyle::{
    ContourFormat, CorpusSpec, F0Contour, ModelConfig, ScalingSpec, Style, TrackerConfig, TrainConfig,
    VibratoParams,
};
use proptest::prelude::*;

fn contour_strategy() -> impl Strategy<Value = F0Contour> {
    (16usize..400, any::<u64>()).prop_flat_map(|(n, _)| {
        (
            prop::collection::vec(80.0f64..900.0, n),
            prop::collection::vec(prop::bool::weighted(0.85), n),
        )
            .prop_filter_map("needs a voiced frame", |(f0, mut voiced)| {
                if !voiced.iter().any(|&v| v) {
                    voiced[0] = true;
                }
                let f0 = f0.iter().zip(&voiced).map(|(&f, &v)| if v { f } else { 0.0 }).collect();
                F0Contour::new(f0, voiced, 93.75).ok()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_scaling_is_identity(c in contour_strategy(), levels in 1usize..5) {
        let out = recompose(&decompose(&c, levels).unwrap(), &ScalingSpec::global(1.0)).unwrap();
        prop_assert_eq!(out.voiced(), c.voiced());
        for (a, b) in out.f0_hz().iter().zip(c.f0_hz()) {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn scaling_is_log_linear(c in contour_strategy(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        // log f(a) - log f(0) is proportional to a on every voiced frame.
        let bands = decompose(&c, 4).unwrap();
        let fa = recompose(&bands, &ScalingSpec::global(a)).unwrap();
        let fb = recompose(&bands, &ScalingSpec::global(b)).unwrap();
        let f0 = recompose(&bands, &ScalingSpec::global(0.0)).unwrap();
        for i in 0..c.len() {
            if c.voiced()[i] {
                let da = (fa.f0_hz()[i] / f0.f0_hz()[i]).ln();
                let db = (fb.f0_hz()[i] / f0.f0_hz()[i]).ln();
                prop_assert!((da * b - db * a).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn contour_files_roundtrip(c in contour_strategy(), csv in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let (path, format) = if csv {
            (dir.path().join("c.csv"), ContourFormat::Csv)
        } else {
            (dir.path().join("c.json"), ContourFormat::Json)
        };
        write_contour(&path, &c, format).unwrap();
        prop_assert_eq!(read_contour(&path).unwrap(), c);
    }

    #[test]
    fn shift_preserves_intervals(c in contour_strategy(), target in 100.0f64..600.0) {
        let mean = pitchstyle::style_engine::mean_f0(&c).unwrap();
        let s = shift_pitch_range(&c, mean, target).unwrap();
        let ratio = target / mean;
        for (a, b) in s.f0_hz().iter().zip(c.f0_hz()) {
            prop_assert!((a - b * ratio).abs() <= 1e-9 * a.max(1.0));
        }
    }
}

#[test]
fn synthesized_audio_survives_wav_and_tracking() {
    let n = 180;
    let flat = F0Contour::from_voiced_hz(vec![260.0; n], 93.75).unwrap();
    let c = synth_vibrato(&flat, &VibratoParams::new(5.5, 40.0), 0..n).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("v.wav");
    write_wav(&wav, &render(&c, DEFAULT_PARTIALS).unwrap()).unwrap();
    let tracked = extract_f0(&read_wav(&wav).unwrap(), &TrackerConfig::default()).unwrap();
    assert_eq!(tracked.len(), n);
    for i in 4..n - 4 {
        assert!(tracked.voiced()[i]);
        let cents = 1200.0 * (tracked.f0_hz()[i] / c.f0_hz()[i]).log2();
        assert!(cents.abs() < 15.0, "frame {i}: {cents}");
    }
    let est = detect(&tracked, 4).unwrap();
    assert_eq!(est.label, Style::Vibrato);
    assert!((est.rate - 5.5).abs() < 0.5, "{est:?}");
    assert!((est.extent_cents - 40.0).abs() < 8.0, "{est:?}");
}

#[test]
fn removing_vibrato_flips_detection_on_a_corpus() {
    let items = generate(&CorpusSpec {
        items: 40,
        seed: 21,
        ..CorpusSpec::default()
    })
    .unwrap();
    let labeled: Vec<_> = items.iter().map(|i| i.labeled()).collect();
    assert!(style_accuracy(&labeled, 4).unwrap() >= 0.9);
    for item in items.iter().filter(|i| i.label == Style::Vibrato) {
        let cleaned = remove_vibrato(&item.contour, 4).unwrap();
        assert_eq!(detect(&cleaned, 4).unwrap().label, Style::Straight, "item {}", item.id);
    }
}

#[test]
fn corpus_directory_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        items: 10,
        seed: 8,
        ..CorpusSpec::default()
    };
    let manifest = gen_corpus(&spec, dir.path()).unwrap();
    let (loaded_manifest, items) = load_corpus(dir.path()).unwrap();
    assert_eq!(loaded_manifest, manifest);
    assert_eq!(items, generate(&spec).unwrap());
    for (entry, item) in manifest.items.iter().zip(&items) {
        assert_eq!(entry.label, item.label);
        assert_eq!(entry.rate.is_some(), item.label == Style::Vibrato);
    }
}

#[test]
fn short_training_run_converts_without_touching_low_band() {
    let corpus: Vec<_> = generate(&CorpusSpec {
        items: 8,
        ..CorpusSpec::converter_training()
    })
    .unwrap()
    .iter()
    .map(|i| i.labeled())
    .collect();
    let model = ConverterModel::new(ModelConfig::default()).unwrap();
    let cfg = TrainConfig {
        steps: 300,
        ..TrainConfig::default()
    };
    let (trained, history) = train(&model, &corpus, &cfg).unwrap();
    assert_eq!(history.len(), 3);
    assert!(history.iter().all(|l| l.is_finite()));

    let source = &corpus[0].contour;
    let out = convert_style(&trained, source, Style::Vibrato, 4).unwrap();
    assert_eq!(out.voiced(), source.voiced());
    let bands = decompose(source, 4).unwrap();
    let high = predict_high(&trained, &bands, Style::Vibrato).unwrap();
    for i in 0..source.len() {
        if source.voiced()[i] {
            assert_relative_eq!(out.f0_hz()[i].ln(), bands.low[i] + high[i], epsilon = 1e-9);
        }
    }
}
