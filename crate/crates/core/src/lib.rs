//! Pitch-contour style processing for singing voice.
//!
//! F0 contours are split into a low band (melody) and a high band
//! (vibrato and other fast fluctuations) with a multilevel Haar wavelet
//! transform applied in the log-frequency domain. On top of that split the
//! crate provides vibrato scaling and removal, parametric vibrato
//! synthesis, a rule-based vibrato detector, pitch-range shifting and a
//! small trainable high-band predictor that converts between straight and
//! vibrato singing styles.
//!
//! ```
//! use pitchstyle::{style_engine, F0Contour, ScalingSpec};
//!
//! let contour = F0Contour::from_voiced_hz(vec![220.0; 64], 93.75).unwrap();
//! let bands = style_engine::decompose(&contour, 4).unwrap();
//! let flat = style_engine::recompose(&bands, &ScalingSpec::global(0.0)).unwrap();
//! assert!((flat.f0_hz()[10] - 220.0).abs() < 1e-9);
//! ```

pub mod contour;
pub mod converter_model;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod pitch_tracker;
pub mod signal_io;
pub mod style_engine;
pub mod synth;
pub mod vibrato_analysis;
pub mod wavelet;

pub use contour::{F0Contour, Style};
pub use converter_model::{ConverterModel, ModelConfig, TrainConfig};
pub use corpus::{CorpusSpec, LabeledContour};
pub use error::{Error, Result};
pub use pitch_tracker::TrackerConfig;
pub use signal_io::{AudioBuffer, ContourFile, ContourFormat};
pub use style_engine::{ScalingSpec, StyleBands, VibratoParams};
pub use vibrato_analysis::{DetectorConfig, VibratoEstimate};
pub use wavelet::{Band, WaveletDecomposition};

/// Sample rate used throughout the pipeline unless stated otherwise.
pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;
/// Analysis hop in samples at [`DEFAULT_SAMPLE_RATE`].
pub const DEFAULT_HOP: usize = 256;
/// Contour frame rate implied by the defaults above (93.75 Hz).
pub const DEFAULT_FRAME_RATE: f64 = DEFAULT_SAMPLE_RATE as f64 / DEFAULT_HOP as f64;
/// Default wavelet decomposition depth.
pub const DEFAULT_LEVELS: usize = 4;

pub(crate) const CENTS_PER_OCTAVE: f64 = 1200.0;

/// Converts a natural-log frequency ratio to cents.
pub fn ln_to_cents(x: f64) -> f64 {
    x * CENTS_PER_OCTAVE / std::f64::consts::LN_2
}

/// Converts cents to a natural-log frequency ratio.
pub fn cents_to_ln(cents: f64) -> f64 {
    cents * std::f64::consts::LN_2 / CENTS_PER_OCTAVE
}
