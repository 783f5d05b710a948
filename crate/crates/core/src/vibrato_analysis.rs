//! Rule-based vibrato detection on the high band.
//!
//! Rate comes from the normalized autocorrelation of the high band, extent
//! from its RMS under a sinusoidal assumption, and the band energy fraction
//! from its periodogram. A window is labelled vibrato when all three clear
//! their thresholds.

use std::f64::consts::SQRT_2;
use std::ops::Range;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::contour::{F0Contour, Style};
use crate::corpus::LabeledContour;
use crate::error::{Error, Result};
use crate::style_engine::{decompose, StyleBands};
use crate::{cents_to_ln, ln_to_cents};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub extent_threshold_cents: f64,
    /// Rates accepted for a vibrato label, Hz.
    pub rate_range: (f64, f64),
    pub min_band_fraction: f64,
    /// Lag range searched by the autocorrelation, expressed in Hz.
    pub search_range: (f64, f64),
    /// Band whose energy share is reported, Hz.
    pub vibrato_band: (f64, f64),
    pub min_window_secs: f64,
    /// Low-band jump that separates two notes when picking a window.
    pub note_step_cents: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            extent_threshold_cents: 20.0,
            rate_range: (4.0, 9.0),
            min_band_fraction: 0.5,
            search_range: (3.0, 10.0),
            vibrato_band: (5.0, 8.0),
            min_window_secs: 0.5,
            note_step_cents: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibratoEstimate {
    /// Dominant modulation rate in Hz (0 when no periodicity is found).
    pub rate: f64,
    /// Peak deviation in cents.
    pub extent_cents: f64,
    pub band_energy_fraction: f64,
    pub label: Style,
}

pub fn estimate(contour: &F0Contour, levels: usize, window: Range<usize>) -> Result<VibratoEstimate> {
    estimate_with(contour, levels, window, &DetectorConfig::default())
}

pub fn estimate_with(
    contour: &F0Contour,
    levels: usize,
    window: Range<usize>,
    config: &DetectorConfig,
) -> Result<VibratoEstimate> {
    let bands = decompose(contour, levels)?;
    estimate_bands(&bands, window, config)
}

/// Estimates on already-decomposed bands.
pub fn estimate_bands(bands: &StyleBands, window: Range<usize>, config: &DetectorConfig) -> Result<VibratoEstimate> {
    check_window(bands, &window, config)?;
    let fr = bands.frame_rate;
    let high = &bands.high[window];

    let rms = (high.iter().map(|h| h * h).sum::<f64>() / high.len() as f64).sqrt();
    let extent_cents = ln_to_cents(SQRT_2 * rms);

    let mean = high.iter().sum::<f64>() / high.len() as f64;
    let centered: Vec<f64> = high.iter().map(|h| h - mean).collect();
    let rate = acf_rate(&centered, fr, config.search_range);
    let band_energy_fraction = band_fraction(&centered, fr, config.vibrato_band);

    let is_vibrato = extent_cents >= config.extent_threshold_cents
        && rate >= config.rate_range.0
        && rate <= config.rate_range.1
        && band_energy_fraction >= config.min_band_fraction;
    Ok(VibratoEstimate {
        rate,
        extent_cents,
        band_energy_fraction,
        label: if is_vibrato { Style::Vibrato } else { Style::Straight },
    })
}

fn check_window(bands: &StyleBands, window: &Range<usize>, config: &DetectorConfig) -> Result<()> {
    if window.start >= window.end || window.end > bands.len() {
        return Err(Error::BadWindow(format!(
            "window {}..{} in contour of {} frames",
            window.start,
            window.end,
            bands.len()
        )));
    }
    let secs = window.len() as f64 / bands.frame_rate;
    if secs + 1e-9 < config.min_window_secs {
        return Err(Error::BadWindow(format!(
            "window spans {secs:.3} s, need {} s",
            config.min_window_secs
        )));
    }
    if let Some(i) = window.clone().find(|&i| !bands.voiced[i]) {
        return Err(Error::BadWindow(format!("frame {i} in window is unvoiced")));
    }
    Ok(())
}

/// Normalized autocorrelation over the overlapping part of the signal.
fn normalized_acf(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let ea: f64 = a.iter().map(|p| p * p).sum();
    let eb: f64 = b.iter().map(|q| q * q).sum();
    if ea <= 0.0 || eb <= 0.0 {
        0.0
    } else {
        dot / (ea * eb).sqrt()
    }
}

/// Rate of the shortest-lag autocorrelation peak that reaches 90% of the
/// strongest peak inside the search range, refined by parabolic
/// interpolation.
fn acf_rate(x: &[f64], frame_rate: f64, search: (f64, f64)) -> f64 {
    let min_lag = ((frame_rate / search.1).floor() as usize).max(1);
    let max_lag = (frame_rate / search.0).ceil() as usize;
    if x.len() < max_lag + 3 {
        return 0.0;
    }
    let r: Vec<f64> = (0..=max_lag + 1).map(|k| normalized_acf(x, k)).collect();
    let peaks: Vec<usize> = (min_lag.max(1)..=max_lag)
        .filter(|&k| r[k] > r[k - 1] && r[k] >= r[k + 1] && r[k] > 0.0)
        .collect();
    let Some(best) = peaks.iter().map(|&k| r[k]).reduce(f64::max) else {
        return 0.0;
    };
    let k = *peaks
        .iter()
        .find(|&&k| r[k] >= 0.9 * best)
        .expect("best peak is in the list");
    let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 1e-15 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    frame_rate / (k as f64 + delta)
}

/// Share of periodogram energy in bins whose resolution cell overlaps
/// `band`.
fn band_fraction(x: &[f64], frame_rate: f64, band: (f64, f64)) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = frame_rate / n as f64;
    let (lo, hi) = (band.0 - 0.5 * df, band.1 + 0.5 * df);
    let mut total = 0.0;
    let mut inside = 0.0;
    for (k, c) in buf.iter().enumerate().skip(1) {
        let p = c.norm_sqr();
        let f = k.min(n - k) as f64 * df;
        total += p;
        if f >= lo && f <= hi {
            inside += p;
        }
    }
    if total > 0.0 {
        (inside / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Picks the analysis window: the longest sustained note inside the
/// longest voiced run.
///
/// Notes are separated where the low band jumps by more than
/// `note_step_cents`; one wavelet block (2^levels frames) is trimmed on
/// each side of such a split because a transition smears across the block
/// that contains it. If no note is long enough the whole voiced run is
/// used.
pub fn classification_window(bands: &StyleBands, config: &DetectorConfig) -> Result<Range<usize>> {
    let run = longest_run(&bands.voiced).ok_or(Error::NoVoicedFrames)?;
    let min_len = (config.min_window_secs * bands.frame_rate - 1e-9).ceil() as usize;
    if run.len() < min_len {
        return Err(Error::BadWindow(format!(
            "longest voiced run is {} frames, need {min_len}",
            run.len()
        )));
    }
    let step = cents_to_ln(config.note_step_cents);
    let block = 1usize << bands.levels;
    let mut splits = vec![run.start];
    for i in run.start + 1..run.end {
        if (bands.low[i] - bands.low[i - 1]).abs() > step {
            splits.push(i);
        }
    }
    splits.push(run.end);
    let mut best: Option<Range<usize>> = None;
    for w in splits.windows(2) {
        let start = if w[0] == run.start { w[0] } else { w[0] + block };
        let end = if w[1] == run.end { w[1] } else { w[1].saturating_sub(block) };
        if end > start && best.as_ref().is_none_or(|b| end - start > b.len()) {
            best = Some(start..end);
        }
    }
    Ok(match best {
        Some(b) if b.len() >= min_len => b,
        _ => run,
    })
}

fn longest_run(voiced: &[bool]) -> Option<Range<usize>> {
    let mut best: Option<Range<usize>> = None;
    let mut start = None;
    for i in 0..=voiced.len() {
        let v = i < voiced.len() && voiced[i];
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.as_ref().is_none_or(|b| i - s > b.len()) {
                    best = Some(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Window selection plus estimation with default thresholds.
pub fn detect(contour: &F0Contour, levels: usize) -> Result<VibratoEstimate> {
    detect_with(contour, levels, &DetectorConfig::default())
}

pub fn detect_with(contour: &F0Contour, levels: usize, config: &DetectorConfig) -> Result<VibratoEstimate> {
    let bands = decompose(contour, levels)?;
    let window = classification_window(&bands, config)?;
    estimate_bands(&bands, window, config)
}

/// Fraction of a known log-domain modulation's energy recovered by the
/// high band: `|proj_m(high)|^2 / |m|^2`.
pub fn level_energy_capture(contour: &F0Contour, modulation: &[f64], levels: usize) -> Result<f64> {
    if modulation.len() != contour.len() {
        return Err(Error::LengthMismatch {
            expected: contour.len(),
            actual: modulation.len(),
        });
    }
    let energy: f64 = modulation.iter().map(|m| m * m).sum();
    if !(energy > 0.0) {
        return Err(Error::invalid("modulation has no energy"));
    }
    let bands = decompose(contour, levels)?;
    let dot: f64 = bands.high.iter().zip(modulation).map(|(h, m)| h * m).sum();
    Ok((dot * dot / (energy * energy)).clamp(0.0, 1.0))
}

/// Fraction of corpus items whose detected label matches the ground truth.
/// Items the detector cannot analyse count as misses.
pub fn style_accuracy(corpus: &[LabeledContour], levels: usize) -> Result<f64> {
    style_accuracy_with(corpus, levels, &DetectorConfig::default())
}

pub fn style_accuracy_with(corpus: &[LabeledContour], levels: usize, config: &DetectorConfig) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let hits = corpus
        .par_iter()
        .filter(|item| {
            detect_with(&item.contour, levels, config)
                .map(|e| e.label == item.label)
                .unwrap_or(false)
        })
        .count();
    Ok(hits as f64 / corpus.len() as f64)
}
