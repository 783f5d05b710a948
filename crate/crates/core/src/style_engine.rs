//! Style operations on F0 contours.
//!
//! Contours are log-normalized, split into a low band (the approximation,
//! carrying melody and note transitions) and a high band (the details,
//! carrying vibrato), and recombined as `f0 = exp(low + alpha * high)`.

use std::f64::consts::{LN_2, PI};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::contour::F0Contour;
use crate::error::{Error, Result};
use crate::pitch_tracker::fill_unvoiced;
use crate::wavelet::{self, Band};

/// Aligned low- and high-band log-F0 contours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleBands {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_rate: f64,
    pub levels: usize,
}

impl StyleBands {
    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.low.len();
        for len in [self.high.len(), self.voiced.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::invalid("bands need a positive frame rate"));
        }
        Ok(())
    }
}

/// Log transform of the gap-filled contour followed by a level-`levels`
/// Haar split.
pub fn decompose(contour: &F0Contour, levels: usize) -> Result<StyleBands> {
    let filled = fill_unvoiced(contour.f0_hz(), contour.voiced())?;
    let log_f0: Vec<f64> = filled.iter().map(|f| f.ln()).collect();
    let dec = wavelet::dwt(&log_f0, levels)?;
    Ok(StyleBands {
        low: wavelet::reconstruct_band(&dec, Band::Low)?,
        high: wavelet::reconstruct_band(&dec, Band::High)?,
        voiced: contour.voiced().to_vec(),
        frame_rate: contour.frame_rate(),
        levels,
    })
}

/// High-band scaling factors: one global factor, optionally overridden per
/// frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub global_factor: f64,
    pub frame_factors: Option<Vec<f64>>,
}

impl ScalingSpec {
    pub fn global(factor: f64) -> Self {
        ScalingSpec {
            global_factor: factor,
            frame_factors: None,
        }
    }

    pub fn per_frame(factors: Vec<f64>) -> Self {
        ScalingSpec {
            global_factor: 1.0,
            frame_factors: Some(factors),
        }
    }

    /// Frame-level spec of length `len`: frames inside a range take its
    /// factor, all others `outside`. Later ranges win on overlap.
    pub fn with_ranges(len: usize, outside: f64, ranges: &[(Range<usize>, f64)]) -> Result<Self> {
        let mut factors = vec![outside; len];
        for (range, factor) in ranges {
            if range.start > range.end || range.end > len {
                return Err(Error::invalid(format!(
                    "frame range {}..{} outside contour of {len} frames",
                    range.start, range.end
                )));
            }
            factors[range.clone()].fill(*factor);
        }
        Ok(ScalingSpec {
            global_factor: outside,
            frame_factors: Some(factors),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a.is_finite() && a >= 0.0;
        if !ok(self.global_factor) {
            return Err(Error::invalid(format!(
                "scaling factor must be finite and >= 0, got {}",
                self.global_factor
            )));
        }
        if let Some(f) = &self.frame_factors {
            if let Some(i) = f.iter().position(|&a| !ok(a)) {
                return Err(Error::invalid(format!(
                    "frame {i} scaling factor must be finite and >= 0, got {}",
                    f[i]
                )));
            }
        }
        Ok(())
    }

    fn factor(&self, i: usize) -> f64 {
        match &self.frame_factors {
            Some(f) => f[i],
            None => self.global_factor,
        }
    }
}

/// `f0[i] = exp(low[i] + alpha_i * high[i])`; originally unvoiced frames
/// come back unvoiced with `f0 = 0`.
pub fn recompose(bands: &StyleBands, spec: &ScalingSpec) -> Result<F0Contour> {
    bands.check()?;
    spec.validate()?;
    if let Some(f) = &spec.frame_factors {
        if f.len() != bands.len() {
            return Err(Error::LengthMismatch {
                expected: bands.len(),
                actual: f.len(),
            });
        }
    }
    let log_f0: Vec<f64> = (0..bands.len())
        .map(|i| bands.low[i] + spec.factor(i) * bands.high[i])
        .collect();
    F0Contour::from_log_hz(&log_f0, &bands.voiced, bands.frame_rate)
}

/// Replaces the high band and recomposes at unit scale.
pub fn recompose_with_high(bands: &StyleBands, high: &[f64]) -> Result<F0Contour> {
    if high.len() != bands.len() {
        return Err(Error::LengthMismatch {
            expected: bands.len(),
            actual: high.len(),
        });
    }
    let replaced = StyleBands {
        high: high.to_vec(),
        ..bands.clone()
    };
    recompose(&replaced, &ScalingSpec::global(1.0))
}

/// Arithmetic mean of the voiced F0 values.
pub fn mean_f0(contour: &F0Contour) -> Result<f64> {
    let (sum, n) = contour
        .f0_hz()
        .iter()
        .zip(contour.voiced())
        .filter(|(_, &v)| v)
        .fold((0.0, 0usize), |(s, n), (&f, _)| (s + f, n + 1));
    if n == 0 {
        return Err(Error::NoVoicedFrames);
    }
    Ok(sum / n as f64)
}

/// Multiplies voiced F0 by `tgt_mean / src_mean`.
pub fn shift_pitch_range(contour: &F0Contour, src_mean: f64, tgt_mean: f64) -> Result<F0Contour> {
    if !(src_mean > 0.0 && tgt_mean > 0.0 && src_mean.is_finite() && tgt_mean.is_finite()) {
        return Err(Error::invalid(format!(
            "mean F0 values must be positive, got {src_mean} and {tgt_mean}"
        )));
    }
    let ratio = tgt_mean / src_mean;
    let f0 = contour.f0_hz().iter().map(|f| f * ratio).collect();
    F0Contour::new(f0, contour.voiced().to_vec(), contour.frame_rate())
}

/// Sinusoidal log-domain vibrato parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibratoParams {
    /// Modulation rate in Hz.
    pub rate: f64,
    /// Peak deviation in cents.
    pub extent_cents: f64,
    /// Seconds over which the extent ramps linearly from zero.
    pub onset_delay: f64,
    /// Phase in radians at the segment start.
    pub phase: f64,
}

impl VibratoParams {
    pub fn new(rate: f64, extent_cents: f64) -> Self {
        VibratoParams {
            rate,
            extent_cents,
            onset_delay: 0.0,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::invalid(format!("vibrato rate must be positive, got {}", self.rate)));
        }
        if !(self.extent_cents.is_finite() && self.extent_cents >= 0.0) {
            return Err(Error::invalid(format!(
                "vibrato extent must be >= 0 cents, got {}",
                self.extent_cents
            )));
        }
        if !(self.onset_delay.is_finite() && self.onset_delay >= 0.0) {
            return Err(Error::invalid("onset delay must be >= 0"));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("vibrato phase must be finite"));
        }
        Ok(())
    }

    /// Log-F0 offset `t` seconds into the segment.
    pub fn log_offset(&self, t: f64) -> f64 {
        let ramp = if self.onset_delay > 0.0 {
            (t / self.onset_delay).min(1.0)
        } else {
            1.0
        };
        self.extent_cents / 1200.0 * LN_2 * ramp * (2.0 * PI * self.rate * t + self.phase).sin()
    }
}

/// Adds log-domain sinusoidal vibrato to the frames in `segment`.
pub fn synth_vibrato(contour: &F0Contour, params: &VibratoParams, segment: Range<usize>) -> Result<F0Contour> {
    params.validate()?;
    if segment.start > segment.end || segment.end > contour.len() {
        return Err(Error::invalid(format!(
            "segment {}..{} outside contour of {} frames",
            segment.start,
            segment.end,
            contour.len()
        )));
    }
    if let Some(i) = segment.clone().find(|&i| !contour.voiced()[i]) {
        return Err(Error::invalid(format!("segment frame {i} is unvoiced")));
    }
    let fr = contour.frame_rate();
    let mut f0 = contour.f0_hz().to_vec();
    for i in segment.clone() {
        let t = (i - segment.start) as f64 / fr;
        f0[i] *= params.log_offset(t).exp();
    }
    F0Contour::new(f0, contour.voiced().to_vec(), fr)
}

/// Drops the high band entirely.
pub fn remove_vibrato(contour: &F0Contour, levels: usize) -> Result<F0Contour> {
    recompose(&decompose(contour, levels)?, &ScalingSpec::global(0.0))
}
