//! Corpus-level evaluation: detector accuracy, accuracy under vibrato
//! scaling, per-level energy capture, and converter style separation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::Style;
use crate::converter_model::{ConverterModel, Sample};
use crate::corpus::{modulation_probe, LabeledContour};
use crate::error::{Error, Result};
use crate::style_engine::decompose;
use crate::vibrato_analysis::{classification_window, estimate_bands, style_accuracy_with, DetectorConfig};
use crate::{ln_to_cents, DEFAULT_FRAME_RATE};

/// Rate of the sinusoidal probe used for level capture.
pub const CAPTURE_PROBE_RATE: f64 = 5.0;
const CAPTURE_PROBE_FRAMES: usize = 1024;
const CAPTURE_PROBE_EXTENT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaAccuracy {
    pub alpha: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCapture {
    pub levels: usize,
    pub capture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub items: usize,
    pub style_accuracy: f64,
    pub per_alpha_accuracy: Vec<AlphaAccuracy>,
    pub level_capture: Vec<LevelCapture>,
}

/// For every `alpha`, the fraction of vibrato-labelled items still
/// detected as vibrato after their high band is scaled by `alpha`.
///
/// The analysis window is chosen once from the unscaled contour so that
/// every alpha is judged on the same frames. Items whose window cannot be
/// chosen count as misses.
pub fn per_alpha_accuracy(
    corpus: &[LabeledContour],
    alphas: &[f64],
    levels: usize,
    config: &DetectorConfig,
) -> Result<Vec<AlphaAccuracy>> {
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::invalid(format!("scale factor {a} must be finite and >= 0")));
    }
    let vibrato: Vec<&LabeledContour> = corpus.iter().filter(|c| c.label == Style::Vibrato).collect();
    if vibrato.is_empty() {
        return Err(Error::invalid("corpus has no vibrato items"));
    }
    let hits: Vec<Vec<bool>> = vibrato
        .par_iter()
        .map(|item| {
            let bands = match decompose(&item.contour, levels) {
                Ok(b) => b,
                Err(_) => return vec![false; alphas.len()],
            };
            let window = match classification_window(&bands, config) {
                Ok(w) => w,
                Err(_) => return vec![false; alphas.len()],
            };
            alphas
                .iter()
                .map(|&alpha| {
                    let mut scaled = bands.clone();
                    scaled.high.iter_mut().for_each(|h| *h *= alpha);
                    estimate_bands(&scaled, window.clone(), config)
                        .map(|e| e.label == Style::Vibrato)
                        .unwrap_or(false)
                })
                .collect()
        })
        .collect();
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| AlphaAccuracy {
            alpha,
            accuracy: hits.iter().filter(|h| h[k]).count() as f64 / hits.len() as f64,
        })
        .collect())
}

/// High-band energy capture of a 5 Hz probe at each decomposition depth.
pub fn level_captures(levels: &[usize]) -> Result<Vec<LevelCapture>> {
    let (contour, modulation) = modulation_probe(
        CAPTURE_PROBE_FRAMES,
        DEFAULT_FRAME_RATE,
        CAPTURE_PROBE_RATE,
        CAPTURE_PROBE_EXTENT,
    )?;
    levels
        .iter()
        .map(|&l| {
            Ok(LevelCapture {
                levels: l,
                capture: crate::vibrato_analysis::level_energy_capture(&contour, &modulation, l)?,
            })
        })
        .collect()
}

pub fn evaluate(corpus: &[LabeledContour], alphas: &[f64], levels: usize) -> Result<EvalReport> {
    let config = DetectorConfig::default();
    Ok(EvalReport {
        items: corpus.len(),
        style_accuracy: style_accuracy_with(corpus, levels, &config)?,
        per_alpha_accuracy: per_alpha_accuracy(corpus, alphas, levels, &config)?,
        level_capture: level_captures(&[3, 4, 5])?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSeparation {
    /// Mean RMS of the predicted high band, in cents, with vibrato style.
    pub vibrato_rms_cents: f64,
    /// Same with straight style.
    pub straight_rms_cents: f64,
    pub ratio: f64,
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Runs every window through the model under both styles and compares the
/// size of the predicted high bands.
pub fn style_separation(model: &ConverterModel, windows: &[Sample]) -> Result<StyleSeparation> {
    if windows.is_empty() {
        return Err(Error::invalid("no windows to evaluate"));
    }
    let mean_rms = |style: Style| -> Result<f64> {
        let total = windows
            .iter()
            .map(|w| Ok(rms(&model.forward(&w.low, &w.flags, style)?)))
            .sum::<Result<f64>>()?;
        Ok(ln_to_cents(total / windows.len() as f64))
    };
    let vibrato = mean_rms(Style::Vibrato)?;
    let straight = mean_rms(Style::Straight)?;
    Ok(StyleSeparation {
        vibrato_rms_cents: vibrato,
        straight_rms_cents: straight,
        ratio: if straight > 0.0 {
            vibrato / straight
        } else if vibrato > 0.0 {
            f64::INFINITY
        } else {
            1.0
        },
    })
}
