//! DIO-style F0 and voicing extraction.
//!
//! The signal is passed through a bank of zero-phase Nuttall low-pass
//! filters whose cutoffs are spaced `channels_per_octave` per octave
//! between `f0_floor` and `f0_ceil`. When the true F0 sits just below a
//! filter's cutoff the filtered output is close to a pure sinusoid, so its
//! four event intervals (rising and falling zero crossings, peaks, dips)
//! agree. Each band therefore yields an F0 candidate (the mean of the four
//! interval estimates) and a score (their coefficient of variation); the
//! lowest-scoring candidate wins each frame.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::contour::F0Contour;
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub f0_floor: f64,
    pub f0_ceil: f64,
    /// Frame advance in samples.
    pub hop: usize,
    pub channels_per_octave: f64,
    /// Frames whose best score exceeds this are unvoiced.
    pub voicing_reliability_threshold: f64,
    /// Frames whose local RMS falls below this are unvoiced.
    pub noise_floor_rms: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            f0_floor: 60.0,
            f0_ceil: 1000.0,
            hop: crate::DEFAULT_HOP,
            channels_per_octave: 2.0,
            voicing_reliability_threshold: 0.15,
            noise_floor_rms: 1e-4,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f0_floor > 0.0 && self.f0_floor < self.f0_ceil && self.f0_ceil < nyquist) {
            return Err(Error::invalid(format!(
                "need 0 < f0_floor ({}) < f0_ceil ({}) < sample_rate/2 ({nyquist})",
                self.f0_floor, self.f0_ceil
            )));
        }
        if self.hop == 0 {
            return Err(Error::invalid("hop must be at least 1 sample"));
        }
        if !(self.channels_per_octave > 0.0) {
            return Err(Error::invalid("channels_per_octave must be positive"));
        }
        if !(self.voicing_reliability_threshold >= 0.0 && self.noise_floor_rms >= 0.0) {
            return Err(Error::invalid("thresholds must be nonnegative"));
        }
        Ok(())
    }

    pub fn frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop as f64
    }

    /// Filter cutoffs, lowest first.
    fn boundary_f0s(&self) -> Vec<f64> {
        let octaves = (self.f0_ceil / self.f0_floor).log2();
        let bands = 1 + (octaves * self.channels_per_octave).floor() as usize;
        (0..bands)
            .map(|i| self.f0_floor * 2f64.powf((i + 1) as f64 / self.channels_per_octave))
            .collect()
    }
}

/// Estimates F0 and voicing for frames at sample positions `i * hop`.
/// The output has `floor(len / hop)` frames.
pub fn extract_f0(audio: &AudioBuffer, config: &TrackerConfig) -> Result<F0Contour> {
    let fs = audio.sample_rate();
    config.validate(fs)?;
    let hop = config.hop;
    if audio.len() < 2 * hop {
        return Err(Error::invalid(format!(
            "buffer of {} samples is shorter than two hops ({})",
            audio.len(),
            2 * hop
        )));
    }
    let fs = fs as f64;
    let n_frames = audio.len() / hop;
    let positions: Vec<f64> = (0..n_frames).map(|i| (i * hop) as f64).collect();

    let mean = audio.samples().iter().sum::<f64>() / audio.len() as f64;
    let x: Vec<f64> = audio.samples().iter().map(|s| s - mean).collect();
    let loud = frame_loudness(&x, hop, n_frames, config.noise_floor_rms);

    let bank = FilterBank::new(&x, fs, config);
    let mut best_f0 = vec![0.0; n_frames];
    let mut best_score = vec![f64::INFINITY; n_frames];
    for &boundary in &bank.boundaries {
        let y = bank.filter(boundary);
        let estimates = IntervalEstimates::from_signal(&y, fs);
        for (i, &t) in positions.iter().enumerate() {
            let Some((f0, score)) = estimates.candidate(t) else {
                continue;
            };
            let in_band = f0 <= boundary && f0 >= boundary / 2.0;
            let in_range = f0 >= config.f0_floor && f0 <= config.f0_ceil;
            if in_band && in_range && score < best_score[i] {
                best_score[i] = score;
                best_f0[i] = f0;
            }
        }
    }

    let mut f0 = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let v = loud[i] && best_score[i] <= config.voicing_reliability_threshold;
        voiced.push(v);
        f0.push(if v { best_f0[i] } else { 0.0 });
    }
    F0Contour::new(f0, voiced, fs / hop as f64)
}

/// Whether the RMS over `[t - hop, t + hop)` reaches the noise floor.
fn frame_loudness(x: &[f64], hop: usize, n_frames: usize, floor: f64) -> Vec<bool> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        prefix.push(acc);
    }
    (0..n_frames)
        .map(|i| {
            let t = i * hop;
            let lo = t.saturating_sub(hop);
            let hi = (t + hop).min(x.len());
            let rms = ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0).sqrt();
            rms >= floor && rms > 0.0
        })
        .collect()
}

fn nuttall(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = i as f64 / denom;
            0.355768 - 0.487396 * (2.0 * PI * x).cos() + 0.144232 * (4.0 * PI * x).cos()
                - 0.012604 * (6.0 * PI * x).cos()
        })
        .collect()
}

struct FilterBank {
    boundaries: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    fs: f64,
    len: usize,
}

impl FilterBank {
    fn new(x: &[f64], fs: f64, config: &TrackerConfig) -> Self {
        let boundaries = config.boundary_f0s();
        let longest = kernel_len(fs, boundaries[0]);
        let size = (x.len() + longest).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let ifft = planner.plan_fft_inverse(size);
        let mut spectrum: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        spectrum.resize(size, Complex::new(0.0, 0.0));
        fft.process(&mut spectrum);
        FilterBank {
            boundaries,
            spectrum,
            fft,
            ifft,
            fs,
            len: x.len(),
        }
    }

    /// Zero-phase low-pass filtering with a unit-DC-gain Nuttall kernel
    /// spanning two periods of `boundary`.
    fn filter(&self, boundary: f64) -> Vec<f64> {
        let size = self.spectrum.len();
        let n = kernel_len(self.fs, boundary);
        let w = nuttall(n);
        let gain: f64 = w.iter().sum();
        let center = n / 2;
        let mut h = vec![Complex::new(0.0, 0.0); size];
        for (m, &v) in w.iter().enumerate() {
            let idx = (m + size - center) % size;
            h[idx] = Complex::new(v / gain, 0.0);
        }
        self.fft.process(&mut h);
        for (hk, xk) in h.iter_mut().zip(&self.spectrum) {
            *hk *= xk;
        }
        self.ifft.process(&mut h);
        let scale = 1.0 / size as f64;
        h[..self.len].iter().map(|c| c.re * scale).collect()
    }
}

fn kernel_len(fs: f64, boundary: f64) -> usize {
    let half = (fs / boundary / 2.0).round().max(1.0) as usize;
    4 * half + 1
}

/// Interval-based frequency estimates located at interval midpoints.
struct IntervalSeries {
    locations: Vec<f64>,
    freqs: Vec<f64>,
}

impl IntervalSeries {
    fn from_events(events: &[f64], fs: f64) -> Self {
        let mut locations = Vec::with_capacity(events.len());
        let mut freqs = Vec::with_capacity(events.len());
        for w in events.windows(2) {
            let interval = w[1] - w[0];
            if interval > 0.0 {
                locations.push(0.5 * (w[0] + w[1]));
                freqs.push(fs / interval);
            }
        }
        IntervalSeries { locations, freqs }
    }

    fn at(&self, t: f64) -> Option<f64> {
        let locs = &self.locations;
        if locs.len() < 2 || t < locs[0] || t > locs[locs.len() - 1] {
            return None;
        }
        let j = locs.partition_point(|&l| l <= t).clamp(1, locs.len() - 1);
        let (l0, l1) = (locs[j - 1], locs[j]);
        let frac = (t - l0) / (l1 - l0);
        Some(self.freqs[j - 1] + frac * (self.freqs[j] - self.freqs[j - 1]))
    }
}

struct IntervalEstimates {
    series: [IntervalSeries; 4],
}

impl IntervalEstimates {
    fn from_signal(y: &[f64], fs: f64) -> Self {
        let diff: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let (falling, rising) = zero_crossings(y, 0.0);
        // diff[i] sits between samples i and i + 1.
        let (peaks, dips) = zero_crossings(&diff, 0.5);
        IntervalEstimates {
            series: [
                IntervalSeries::from_events(&falling, fs),
                IntervalSeries::from_events(&rising, fs),
                IntervalSeries::from_events(&peaks, fs),
                IntervalSeries::from_events(&dips, fs),
            ],
        }
    }

    /// Mean of the four estimates and their coefficient of variation.
    fn candidate(&self, t: f64) -> Option<(f64, f64)> {
        let mut vals = [0.0; 4];
        for (v, s) in vals.iter_mut().zip(&self.series) {
            *v = s.at(t)?;
        }
        let mean = vals.iter().sum::<f64>() / 4.0;
        if !(mean > 0.0) {
            return None;
        }
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        Some((mean, var.sqrt() / mean))
    }
}

/// Linearly interpolated positions of falling (+ to -) and rising (- to +)
/// zero crossings.
fn zero_crossings(y: &[f64], offset: f64) -> (Vec<f64>, Vec<f64>) {
    let mut falling = Vec::new();
    let mut rising = Vec::new();
    for (i, w) in y.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if a > 0.0 && b <= 0.0 {
            falling.push(i as f64 + offset + a / (a - b));
        } else if a < 0.0 && b >= 0.0 {
            rising.push(i as f64 + offset + a / (a - b));
        }
    }
    (falling, rising)
}

/// Fills unvoiced frames by log-linear interpolation between the flanking
/// voiced frames; leading and trailing gaps hold the nearest voiced value.
///
/// Values at unvoiced indices of `f0_hz` are ignored, so applying this to
/// its own output is the identity.
pub fn fill_unvoiced(f0_hz: &[f64], voiced: &[bool]) -> Result<Vec<f64>> {
    if f0_hz.len() != voiced.len() {
        return Err(Error::LengthMismatch {
            expected: f0_hz.len(),
            actual: voiced.len(),
        });
    }
    let anchors: Vec<usize> = (0..voiced.len()).filter(|&i| voiced[i]).collect();
    let (&first, &last) = match (anchors.first(), anchors.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::NoVoicedFrames),
    };
    let mut out = f0_hz.to_vec();
    out[..first].fill(f0_hz[first]);
    out[last + 1..].fill(f0_hz[last]);
    for pair in anchors.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (la, lb) = (f0_hz[a].ln(), f0_hz[b].ln());
        let span = (b - a) as f64;
        for (k, slot) in out[a + 1..b].iter_mut().enumerate() {
            let frac = (k + 1) as f64 / span;
            *slot = (la + frac * (lb - la)).exp();
        }
    }
    Ok(out)
}

/// A gap-free contour: every frame carries a positive F0, while the
/// original voiced flags are kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedContour {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_rate: f64,
}

pub fn interpolate_unvoiced(contour: &F0Contour) -> Result<InterpolatedContour> {
    Ok(InterpolatedContour {
        f0_hz: fill_unvoiced(contour.f0_hz(), contour.voiced())?,
        voiced: contour.voiced().to_vec(),
        frame_rate: contour.frame_rate(),
    })
}
