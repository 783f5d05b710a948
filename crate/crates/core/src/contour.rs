//! The frame-rate F0 contour shared by every stage of the pipeline.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-frame F0 values in Hz with voiced flags.
///
/// Unvoiced frames always carry `f0 = 0`; voiced frames carry a finite,
/// strictly positive value.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    f0_hz: Vec<f64>,
    voiced: Vec<bool>,
    frame_rate: f64,
}

impl F0Contour {
    pub fn new(f0_hz: Vec<f64>, voiced: Vec<bool>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
        }
        if f0_hz.len() != voiced.len() {
            return Err(Error::LengthMismatch {
                expected: f0_hz.len(),
                actual: voiced.len(),
            });
        }
        for (i, (&f, &v)) in f0_hz.iter().zip(&voiced).enumerate() {
            if !f.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if v && f <= 0.0 {
                return Err(Error::invalid(format!("voiced frame {i} has f0 {f} <= 0")));
            }
            if !v && f != 0.0 {
                return Err(Error::invalid(format!("unvoiced frame {i} has nonzero f0 {f}")));
            }
        }
        Ok(F0Contour {
            f0_hz,
            voiced,
            frame_rate,
        })
    }

    /// Builds a contour where every frame is voiced.
    pub fn from_voiced_hz(f0_hz: Vec<f64>, frame_rate: f64) -> Result<Self> {
        let voiced = vec![true; f0_hz.len()];
        Self::new(f0_hz, voiced, frame_rate)
    }

    /// Builds a contour from raw values, treating `f0 <= 0` as unvoiced.
    pub fn from_hz_with_zeros(f0_hz: Vec<f64>, frame_rate: f64) -> Result<Self> {
        let voiced: Vec<bool> = f0_hz.iter().map(|&f| f > 0.0).collect();
        let f0_hz = f0_hz
            .into_iter()
            .map(|f| if f > 0.0 { f } else { 0.0 })
            .collect();
        Self::new(f0_hz, voiced, frame_rate)
    }

    /// Builds a contour from log-Hz values, zeroing frames whose flag is false.
    pub(crate) fn from_log_hz(log_f0: &[f64], voiced: &[bool], frame_rate: f64) -> Result<Self> {
        let f0 = log_f0
            .iter()
            .zip(voiced)
            .map(|(&l, &v)| if v { l.exp() } else { 0.0 })
            .collect();
        Self::new(f0, voiced.to_vec(), frame_rate)
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.frame_rate
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// Maximal runs of consecutive voiced frames, in order.
    pub fn voiced_runs(&self) -> Vec<Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &v) in self.voiced.iter().enumerate() {
            match (v, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.len());
        }
        runs
    }

    /// The longest voiced run; ties go to the earliest.
    pub fn longest_voiced_run(&self) -> Option<Range<usize>> {
        self.voiced_runs()
            .into_iter()
            .fold(None, |best: Option<Range<usize>>, r| match best {
                Some(b) if b.len() >= r.len() => Some(b),
                _ => Some(r),
            })
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<bool>, f64) {
        (self.f0_hz, self.voiced, self.frame_rate)
    }
}

/// Singing style label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Straight,
    Vibrato,
}

impl Style {
    pub const ALL: [Style; 2] = [Style::Straight, Style::Vibrato];

    pub fn index(self) -> usize {
        match self {
            Style::Straight => 0,
            Style::Vibrato => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Style::Straight => "straight",
            Style::Vibrato => "vibrato",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "straight" => Ok(Style::Straight),
            "vibrato" => Ok(Style::Vibrato),
            other => Err(Error::invalid(format!("unknown style '{other}'"))),
        }
    }
}
