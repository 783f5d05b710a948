//! Multilevel orthonormal Haar (db1) wavelet transform.
//!
//! Analysis at each level maps pairs `(x[2k], x[2k+1])` to
//! `a[k] = (x[2k] + x[2k+1]) / sqrt(2)` and `d[k] = (x[2k] - x[2k+1]) / sqrt(2)`.
//! An odd-length stage is padded by repeating its last sample; the padding is
//! recorded so that synthesis truncates back to the exact input length.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Approximation and detail coefficients of a multilevel Haar analysis.
///
/// `details[0]` holds the finest level `D_1`, `details[levels - 1]` the
/// coarsest `D_L`. `padding[j]` is the number of samples (0 or 1) appended
/// to the input of level `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub levels: usize,
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub original_length: usize,
    pub padding: Vec<usize>,
}

impl WaveletDecomposition {
    /// Energy of all coefficients: `|A_L|^2 + sum_j |D_j|^2`.
    pub fn energy(&self) -> f64 {
        sum_sq(&self.approx) + self.details.iter().map(|d| sum_sq(d)).sum::<f64>()
    }

    /// Length of the signal entering each level, finest first.
    fn stage_lengths(&self) -> Vec<usize> {
        let mut lens = Vec::with_capacity(self.levels);
        let mut n = self.original_length;
        for _ in 0..self.levels {
            lens.push(n);
            n = n.div_ceil(2);
        }
        lens
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InconsistentCoefficients(msg));
        if self.levels == 0 {
            return bad("zero levels".into());
        }
        if self.details.len() != self.levels || self.padding.len() != self.levels {
            return bad(format!(
                "{} levels but {} detail bands and {} padding entries",
                self.levels,
                self.details.len(),
                self.padding.len()
            ));
        }
        for (j, n) in self.stage_lengths().into_iter().enumerate() {
            let expected = n.div_ceil(2);
            if self.details[j].len() != expected {
                return bad(format!(
                    "level {} detail has {} coefficients, expected {expected}",
                    j + 1,
                    self.details[j].len()
                ));
            }
            if self.padding[j] != n % 2 {
                return bad(format!("level {} padding {} for stage length {n}", j + 1, self.padding[j]));
            }
        }
        let coarsest = self.details[self.levels - 1].len();
        if self.approx.len() != coarsest {
            return bad(format!(
                "approximation has {} coefficients, coarsest detail has {coarsest}",
                self.approx.len()
            ));
        }
        Ok(())
    }
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Multilevel Haar analysis of `x` down to `levels`.
pub fn dwt(x: &[f64], levels: usize) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::invalid("wavelet level count must be at least 1"));
    }
    let needed = 1usize
        .checked_shl(levels as u32)
        .filter(|&n| n > 0)
        .unwrap_or(usize::MAX);
    if x.len() < needed {
        return Err(Error::LevelTooLarge {
            levels,
            len: x.len(),
            needed,
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }

    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut padding = Vec::with_capacity(levels);
    for _ in 0..levels {
        let pad = current.len() % 2;
        if pad == 1 {
            current.push(*current.last().expect("stage is non-empty"));
        }
        let half = current.len() / 2;
        let mut approx = Vec::with_capacity(half);
        let mut detail = Vec::with_capacity(half);
        for pair in current.chunks_exact(2) {
            approx.push((pair[0] + pair[1]) * FRAC_1_SQRT_2);
            detail.push((pair[0] - pair[1]) * FRAC_1_SQRT_2);
        }
        details.push(detail);
        padding.push(pad);
        current = approx;
    }
    Ok(WaveletDecomposition {
        levels,
        approx: current,
        details,
        original_length: x.len(),
        padding,
    })
}

/// Inverse of [`dwt`]; the result has `original_length` samples.
pub fn idwt(dec: &WaveletDecomposition) -> Result<Vec<f64>> {
    dec.validate()?;
    let mut current = dec.approx.clone();
    for j in (0..dec.levels).rev() {
        let detail = &dec.details[j];
        let mut next = Vec::with_capacity(2 * detail.len());
        for (&a, &d) in current.iter().zip(detail) {
            next.push((a + d) * FRAC_1_SQRT_2);
            next.push((a - d) * FRAC_1_SQRT_2);
        }
        next.truncate(next.len() - dec.padding[j]);
        current = next;
    }
    Ok(current)
}

/// Which part of a decomposition to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Approximation only (details zeroed).
    Low,
    /// All detail levels (approximation zeroed).
    High,
}

/// Synthesizes one band. `Low + High` equals `idwt` of the full decomposition.
pub fn reconstruct_band(dec: &WaveletDecomposition, band: Band) -> Result<Vec<f64>> {
    let mut masked = dec.clone();
    match band {
        Band::Low => masked.details.iter_mut().for_each(|d| d.fill(0.0)),
        Band::High => masked.approx.fill(0.0),
    }
    idwt(&masked)
}

/// Nominal frequency coverage of each band, in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEdges {
    pub approx: (f64, f64),
    /// `details[j]` covers level `j + 1`.
    pub details: Vec<(f64, f64)>,
}

pub fn band_edges(frame_rate: f64, levels: usize) -> BandEdges {
    let details = (1..=levels)
        .map(|j| {
            (
                frame_rate / 2f64.powi(j as i32 + 1),
                frame_rate / 2f64.powi(j as i32),
            )
        })
        .collect();
    BandEdges {
        approx: (0.0, frame_rate / 2f64.powi(levels as i32 + 1)),
        details,
    }
}
