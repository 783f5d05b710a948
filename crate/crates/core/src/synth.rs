//! Additive resynthesis of a contour for listening checks.

use std::f64::consts::PI;
use std::path::Path;

use crate::contour::F0Contour;
use crate::error::{Error, Result};
use crate::signal_io::{write_wav, AudioBuffer};
use crate::DEFAULT_SAMPLE_RATE;

pub const DEFAULT_PARTIALS: usize = 8;
const FADE_SECS: f64 = 0.01;
const GAIN: f64 = 0.25;

/// Renders `contour` at 24 kHz as a harmonic tone with `partials` partials
/// at `1/k` amplitude (partials at or above Nyquist are dropped). F0 is
/// linearly interpolated between frame centres and the phase is
/// accumulated so it stays continuous. Unvoiced frames are silent, with
/// 10 ms fades at voicing boundaries.
pub fn render(contour: &F0Contour, partials: usize) -> Result<AudioBuffer> {
    render_at(contour, partials, DEFAULT_SAMPLE_RATE)
}

pub fn render_at(contour: &F0Contour, partials: usize, sample_rate: u32) -> Result<AudioBuffer> {
    if sample_rate == 0 || partials == 0 {
        return Err(Error::invalid("sample rate and partial count must be positive"));
    }
    let n_frames = contour.len();
    let f0 = contour.f0_hz();
    let voiced = contour.voiced();
    let fs = sample_rate as f64;
    let samples_per_frame = fs / contour.frame_rate();
    let nyquist = fs / 2.0;
    let norm = GAIN / (1..=partials).map(|k| 1.0 / k as f64).sum::<f64>();
    let fade_step = 1.0 / (FADE_SECS * fs).max(1.0);

    // Hz at a voiced frame, otherwise the nearest voiced neighbour's value
    // so a fade-out keeps its pitch.
    let held: Vec<f64> = {
        let mut h = f0.to_vec();
        let mut last = None;
        for i in 0..n_frames {
            if voiced[i] {
                last = Some(f0[i]);
            } else if let Some(v) = last {
                h[i] = v;
            }
        }
        let mut next = None;
        for i in (0..n_frames).rev() {
            if voiced[i] {
                next = Some(f0[i]);
            } else if h[i] == 0.0 {
                h[i] = next.unwrap_or(0.0);
            }
        }
        h
    };

    let total = (n_frames as f64 * samples_per_frame).round() as usize;
    let mut out = Vec::with_capacity(total);
    let mut phase = 0.0;
    let mut amp = 0.0;
    for n in 0..total {
        let pos = n as f64 / samples_per_frame;
        let i = (pos.floor() as usize).min(n_frames - 1);
        let frac = pos - i as f64;
        let j = (i + 1).min(n_frames - 1);
        let f = held[i] + frac * (held[j] - held[i]);
        let target = if voiced[i] { 1.0 } else { 0.0 };
        if amp < target {
            amp = (amp + fade_step).min(target);
        } else if amp > target {
            amp = (amp - fade_step).max(target);
        }
        let mut s = 0.0;
        if amp > 0.0 && f > 0.0 {
            for k in 1..=partials {
                if k as f64 * f >= nyquist {
                    break;
                }
                s += (k as f64 * phase).sin() / k as f64;
            }
        }
        out.push(norm * amp * s);
        phase += 2.0 * PI * f / fs;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    AudioBuffer::new(out, sample_rate)
}

/// Renders `contour` and writes it as a 16-bit WAV file.
pub fn synth_demo(contour: &F0Contour, out_wav: impl AsRef<Path>, partials: usize) -> Result<()> {
    write_wav(out_wav, &render(contour, partials)?)
}
