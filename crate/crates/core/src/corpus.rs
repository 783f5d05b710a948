//! Deterministic synthetic corpus of straight and vibrato melodies.
//!
//! Each item is a note melody in log-Hz with short glides between notes,
//! optional vibrato on every sustained note, and white log-domain jitter.
//! Items draw from independent ChaCha streams keyed by item id, so
//! generation order does not affect the output.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{F0Contour, Style};
use crate::error::{Error, Result};
use crate::signal_io::{read_contour, write_contour, ContourFormat};
use crate::style_engine::{synth_vibrato, VibratoParams};
use crate::{cents_to_ln, DEFAULT_FRAME_RATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub items: usize,
    /// Hz.
    pub base_pitch_range: (f64, f64),
    pub note_count_range: (usize, usize),
    pub vibrato_fraction: f64,
    /// Hz.
    pub rate_range: (f64, f64),
    /// Cents.
    pub extent_range: (f64, f64),
    pub jitter_cents_rms: f64,
    pub seed: u64,
    /// Seconds per note, glide included.
    pub note_duration_range: (f64, f64),
    pub glide_secs: f64,
    pub onset_delay_range: (f64, f64),
    /// Unvoiced lead-in and tail, seconds.
    pub edge_silence_secs: f64,
    pub frame_rate: f64,
    /// When set, vibrato phase follows absolute time (`sin(2 pi rate t)`
    /// measured from frame 0) instead of restarting at each note.
    pub phase_locked: bool,
    /// When non-zero, note lengths and the lead-in are rounded to multiples
    /// of this many frames.
    pub note_grid_frames: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            items: 200,
            base_pitch_range: (110.0, 440.0),
            note_count_range: (3, 6),
            vibrato_fraction: 0.5,
            rate_range: (5.0, 8.0),
            extent_range: (30.0, 120.0),
            jitter_cents_rms: 3.0,
            seed: 0,
            note_duration_range: (0.9, 1.6),
            glide_secs: 0.1,
            onset_delay_range: (0.0, 0.15),
            edge_silence_secs: 0.1,
            frame_rate: DEFAULT_FRAME_RATE,
            phase_locked: false,
            note_grid_frames: 0,
        }
    }
}

impl CorpusSpec {
    /// Corpus used to fit the converter model.
    ///
    /// A deterministic regressor trained with an L1 loss predicts the
    /// conditional median of its target. With random vibrato phase, rate
    /// and extent that median is a flat line, so the training set fixes
    /// all three: the rate is `frame_rate / 16` (one period per level-4
    /// Haar block), the extent is constant and phase is locked to absolute
    /// time. The converter's hop of 32 frames is then a whole number of
    /// vibrato periods, and overlapping windows stay in phase.
    ///
    /// Notes change instantly on the 16-frame block grid. A glide or an
    /// off-grid step leaves a ramp residue in the high band that the
    /// block-averaged low band cannot pin down, and that residue would
    /// otherwise dominate the training loss of straight items.
    pub fn converter_training() -> Self {
        let rate = DEFAULT_FRAME_RATE / 16.0;
        CorpusSpec {
            items: 120,
            rate_range: (rate, rate),
            extent_range: (60.0, 60.0),
            jitter_cents_rms: 1.0,
            onset_delay_range: (0.0, 0.0),
            phase_locked: true,
            glide_secs: 0.0,
            note_grid_frames: 16,
            seed: 0x5EED,
            ..CorpusSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, (a, b): (f64, f64), min: f64| {
            if a.is_finite() && b.is_finite() && a >= min && a <= b {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} range ({a}, {b}) is empty or out of bounds")))
            }
        };
        if self.items == 0 {
            return Err(Error::invalid("corpus needs at least one item"));
        }
        ordered("base pitch", self.base_pitch_range, f64::MIN_POSITIVE)?;
        ordered("rate", self.rate_range, f64::MIN_POSITIVE)?;
        ordered("extent", self.extent_range, 0.0)?;
        ordered("note duration", self.note_duration_range, f64::MIN_POSITIVE)?;
        ordered("onset delay", self.onset_delay_range, 0.0)?;
        let (n0, n1) = self.note_count_range;
        if n0 == 0 || n0 > n1 {
            return Err(Error::invalid(format!("note count range ({n0}, {n1}) is empty")));
        }
        if !(0.0..=1.0).contains(&self.vibrato_fraction) {
            return Err(Error::invalid("vibrato fraction must lie in [0, 1]"));
        }
        if !(self.jitter_cents_rms >= 0.0 && self.glide_secs >= 0.0 && self.edge_silence_secs >= 0.0) {
            return Err(Error::invalid("jitter, glide and edge silence must be >= 0"));
        }
        if self.glide_secs >= self.note_duration_range.0 {
            return Err(Error::invalid("glide must be shorter than the shortest note"));
        }
        if !(self.frame_rate > 0.0) {
            return Err(Error::invalid("frame rate must be positive"));
        }
        Ok(())
    }

    pub fn vibrato_count(&self) -> usize {
        (self.items as f64 * self.vibrato_fraction).round() as usize
    }
}

/// A contour with its ground-truth style.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledContour {
    pub id: usize,
    pub contour: F0Contour,
    pub label: Style,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Relative to the corpus directory.
    pub path: PathBuf,
    pub label: Style,
    pub rate: Option<f64>,
    pub extent_cents: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: CorpusSpec,
    pub items: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: usize,
    pub contour: F0Contour,
    pub label: Style,
    pub rate: Option<f64>,
    pub extent_cents: Option<f64>,
}

impl CorpusItem {
    pub fn labeled(&self) -> LabeledContour {
        LabeledContour {
            id: self.id,
            contour: self.contour.clone(),
            label: self.label,
        }
    }
}

/// Generates all items in memory, sorted by id.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<CorpusItem>> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..spec.items).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut labels = vec![Style::Straight; spec.items];
    for &i in &order[..spec.vibrato_count()] {
        labels[i] = Style::Vibrato;
    }
    labels
        .into_par_iter()
        .enumerate()
        .map(|(id, label)| generate_item(spec, id, label))
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn generate_item(spec: &CorpusSpec, id: usize, label: Style) -> Result<CorpusItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(id as u64 + 1);
    let fr = spec.frame_rate;

    let base = uniform(&mut rng, (spec.base_pitch_range.0.ln(), spec.base_pitch_range.1.ln()));
    let n_notes = rng.gen_range(spec.note_count_range.0..=spec.note_count_range.1);
    let mut semis = vec![0i32];
    for _ in 1..n_notes {
        let prev = *semis.last().unwrap();
        let step = rng.gen_range(2..=5);
        let up = if prev.abs() > 5 { prev < 0 } else { rng.gen_bool(0.5) };
        semis.push(if up { prev + step } else { prev - step });
    }
    let note_logs: Vec<f64> = semis.iter().map(|&s| base + s as f64 / 12.0 * std::f64::consts::LN_2).collect();

    let snap = |frames: usize| match spec.note_grid_frames {
        0 => frames,
        g => ((frames + g / 2) / g).max(1) * g,
    };
    let edge = snap((spec.edge_silence_secs * fr).round() as usize);
    let glide = (spec.glide_secs * fr).round() as usize;
    let mut log_f0 = vec![0.0; edge];
    let mut voiced = vec![false; edge];
    let mut sustained = Vec::with_capacity(n_notes);
    for (k, &note) in note_logs.iter().enumerate() {
        let frames = snap(((uniform(&mut rng, spec.note_duration_range) * fr).round() as usize).max(glide + 1));
        let start = log_f0.len();
        let g = if k == 0 { 0 } else { glide };
        let prev = if k == 0 { note } else { note_logs[k - 1] };
        for j in 0..frames {
            let l = if j < g {
                prev + (note - prev) * (j + 1) as f64 / g as f64
            } else {
                note
            };
            log_f0.push(l);
            voiced.push(true);
        }
        sustained.push(start + g..start + frames);
    }
    log_f0.extend(std::iter::repeat_n(0.0, edge));
    voiced.extend(std::iter::repeat_n(false, edge));
    let mut contour = F0Contour::from_log_hz(&log_f0, &voiced, fr)?;

    let (mut rate, mut extent) = (None, None);
    if label == Style::Vibrato {
        let r = uniform(&mut rng, spec.rate_range);
        let e = uniform(&mut rng, spec.extent_range);
        let delay = uniform(&mut rng, spec.onset_delay_range);
        for seg in &sustained {
            let phase = if spec.phase_locked {
                (TAU * r * seg.start as f64 / fr).rem_euclid(TAU)
            } else {
                0.0
            };
            let p = VibratoParams {
                rate: r,
                extent_cents: e,
                onset_delay: delay,
                phase,
            };
            contour = synth_vibrato(&contour, &p, seg.clone())?;
        }
        rate = Some(r);
        extent = Some(e);
    }

    if spec.jitter_cents_rms > 0.0 {
        let (f0, v, _) = contour.into_parts();
        let jittered = f0
            .iter()
            .zip(&v)
            .map(|(&f, &on)| {
                let z: f64 = rng.sample(StandardNormal);
                if on {
                    f * cents_to_ln(spec.jitter_cents_rms * z).exp()
                } else {
                    0.0
                }
            })
            .collect();
        contour = F0Contour::new(jittered, v, fr)?;
    }

    Ok(CorpusItem {
        id,
        contour,
        label,
        rate,
        extent_cents: extent,
    })
}

fn item_path(id: usize) -> PathBuf {
    PathBuf::from("items").join(format!("item_{id:04}.json"))
}

/// Generates the corpus and writes per-item contour files plus
/// `manifest.json` into `out_dir`.
pub fn gen_corpus(spec: &CorpusSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let items = generate(spec)?;
    let item_dir = out_dir.join("items");
    fs::create_dir_all(&item_dir).map_err(|e| Error::io(&item_dir, e))?;
    items
        .par_iter()
        .try_for_each(|it| write_contour(out_dir.join(item_path(it.id)), &it.contour, ContourFormat::Json))?;
    let manifest = Manifest {
        spec: spec.clone(),
        items: items
            .iter()
            .map(|it| ManifestEntry {
                id: it.id,
                path: item_path(it.id),
                label: it.label,
                rate: it.rate,
                extent_cents: it.extent_cents,
            })
            .collect(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads a corpus directory written by [`gen_corpus`].
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<(Manifest, Vec<CorpusItem>)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text)?;
    manifest.items.sort_by_key(|e| e.id);
    let items = manifest
        .items
        .par_iter()
        .map(|e| {
            Ok(CorpusItem {
                id: e.id,
                contour: read_contour(dir.join(&e.path))?,
                label: e.label,
                rate: e.rate,
                extent_cents: e.extent_cents,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, items))
}

/// A flat contour carrying a known sinusoidal log modulation, with the
/// modulation itself. Used for level-capture probes.
pub fn modulation_probe(frames: usize, frame_rate: f64, rate: f64, extent_cents: f64) -> Result<(F0Contour, Vec<f64>)> {
    let m: Vec<f64> = (0..frames)
        .map(|i| cents_to_ln(extent_cents) * (2.0 * PI * rate * i as f64 / frame_rate).sin())
        .collect();
    let c = F0Contour::from_voiced_hz(m.iter().map(|v| 220.0 * v.exp()).collect(), frame_rate)?;
    Ok((c, m))
}
