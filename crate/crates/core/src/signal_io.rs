//! WAV and contour file IO.
//!
//! WAV reading accepts RIFF/WAVE with 16-bit PCM or 32-bit IEEE float
//! samples in one or two channels; stereo is averaged to mono. Writing
//! always produces 16-bit PCM mono.
//!
//! Contours are stored either as JSON (`{"frame_rate", "frames": [{"f0",
//! "voiced"}]}`) or as CSV with an `index,f0,voiced` header. Since CSV has
//! no natural place for the frame rate it is carried on a leading
//! `# frame_rate=<hz>` comment line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::F0Contour;
use crate::error::{Error, Result};

const WAVE_FORMAT_PCM: u16 = 0x0001;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 0x0003;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

/// Parses an in-memory RIFF/WAVE file.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(Error::MalformedHeader(format!(
            "file is {} bytes, shorter than a RIFF header",
            bytes.len()
        )));
    }
    match &bytes[0..4] {
        b"RIFF" => {}
        b"RIFX" => {
            return Err(Error::UnsupportedFormat(
                "big-endian RIFX files are not supported".into(),
            ))
        }
        b"RF64" => return Err(Error::UnsupportedFormat("RF64 files are not supported".into())),
        other => {
            return Err(Error::MalformedHeader(format!(
                "expected RIFF magic, found {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedHeader("RIFF form type is not WAVE".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body_start + size > bytes.len() {
                    return Err(Error::MalformedHeader(format!("fmt chunk of size {size}")));
                }
                fmt = Some(FmtChunk::parse(&bytes[body_start..body_start + size])?);
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| {
                    Error::MalformedHeader("data chunk precedes fmt chunk".into())
                })?;
                let available = bytes.len() - body_start;
                if size > available {
                    return Err(Error::TruncatedData(format!(
                        "data chunk declares {size} bytes but only {available} remain"
                    )));
                }
                return fmt.decode(&bytes[body_start..body_start + size]);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_start + size + (size & 1);
    }
    match fmt {
        None => Err(Error::MalformedHeader("missing fmt chunk".into())),
        Some(_) => Err(Error::TruncatedData("missing data chunk".into())),
    }
}

#[derive(Debug, Clone, Copy)]
enum SampleCodec {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    codec: SampleCodec,
    channels: u16,
    sample_rate: u32,
    block_align: usize,
}

impl FmtChunk {
    fn parse(body: &[u8]) -> Result<Self> {
        let mut format_tag = u16_le(&body[0..2]);
        let channels = u16_le(&body[2..4]);
        let sample_rate = u32_le(&body[4..8]);
        let block_align = u16_le(&body[12..14]) as usize;
        let bits = u16_le(&body[14..16]);

        if format_tag == WAVE_FORMAT_EXTENSIBLE {
            if body.len() < 40 {
                return Err(Error::MalformedHeader("short WAVE_FORMAT_EXTENSIBLE fmt chunk".into()));
            }
            // The first two bytes of the subformat GUID carry the format tag.
            format_tag = u16_le(&body[24..26]);
        }

        let codec = match (format_tag, bits) {
            (WAVE_FORMAT_PCM, 16) => SampleCodec::Pcm16,
            (WAVE_FORMAT_IEEE_FLOAT, 32) => SampleCodec::Float32,
            (tag, bits) => {
                return Err(Error::UnsupportedFormat(format!(
                    "format tag {tag:#06x} with {bits} bits per sample"
                )))
            }
        };
        if !(1..=2).contains(&channels) {
            return Err(Error::UnsupportedFormat(format!("{channels} channels")));
        }
        if sample_rate == 0 {
            return Err(Error::MalformedHeader("sample rate is zero".into()));
        }
        let bytes_per_sample = match codec {
            SampleCodec::Pcm16 => 2,
            SampleCodec::Float32 => 4,
        };
        if block_align != bytes_per_sample * channels as usize {
            return Err(Error::MalformedHeader(format!(
                "block align {block_align} does not match {channels} x {bits}-bit samples"
            )));
        }
        Ok(FmtChunk {
            codec,
            channels,
            sample_rate,
            block_align,
        })
    }

    fn decode(&self, data: &[u8]) -> Result<AudioBuffer> {
        if !data.len().is_multiple_of(self.block_align) {
            return Err(Error::TruncatedData(format!(
                "data length {} is not a multiple of the {}-byte frame",
                data.len(),
                self.block_align
            )));
        }
        let channels = self.channels as usize;
        let mut samples = Vec::with_capacity(data.len() / self.block_align);
        for (i, frame) in data.chunks_exact(self.block_align).enumerate() {
            let mut acc = 0.0;
            for ch in 0..channels {
                let v = match self.codec {
                    SampleCodec::Pcm16 => {
                        let o = ch * 2;
                        i16::from_le_bytes([frame[o], frame[o + 1]]) as f64 / 32768.0
                    }
                    SampleCodec::Float32 => {
                        let o = ch * 4;
                        let v = f32::from_le_bytes([
                            frame[o],
                            frame[o + 1],
                            frame[o + 2],
                            frame[o + 3],
                        ]);
                        if !v.is_finite() {
                            return Err(Error::NonFinite(i));
                        }
                        v as f64
                    }
                };
                acc += v;
            }
            samples.push(acc / channels as f64);
        }
        AudioBuffer::new(samples, self.sample_rate)
    }
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Quantizes one sample to 16-bit PCM: clamp to [-1, 1], scale by 32768,
/// round, saturate at 32767.
pub fn quantize_pcm16(sample: f64) -> i16 {
    let scaled = (sample.clamp(-1.0, 1.0) * 32768.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Serializes a buffer as a 16-bit PCM mono WAV file image.
pub fn encode_wav(buffer: &AudioBuffer) -> Vec<u8> {
    let data_len = buffer.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buffer.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(buffer)).map_err(|e| Error::io(path, e))
}

/// One serialized contour frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourFrame {
    pub f0: f64,
    pub voiced: bool,
}

/// On-disk contour representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourFile {
    pub frame_rate: f64,
    pub frames: Vec<ContourFrame>,
}

impl ContourFile {
    /// Checks the schema invariants and converts to an [`F0Contour`].
    pub fn into_contour(self) -> Result<F0Contour> {
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::Schema(format!(
                "frame_rate must be positive, got {}",
                self.frame_rate
            )));
        }
        let mut f0 = Vec::with_capacity(self.frames.len());
        let mut voiced = Vec::with_capacity(self.frames.len());
        for (i, fr) in self.frames.iter().enumerate() {
            if !fr.f0.is_finite() || fr.f0 < 0.0 {
                return Err(Error::Schema(format!("frame {i}: invalid f0 {}", fr.f0)));
            }
            if fr.voiced && fr.f0 == 0.0 {
                return Err(Error::Schema(format!("frame {i}: voiced frame with f0 = 0")));
            }
            if !fr.voiced && fr.f0 != 0.0 {
                return Err(Error::Schema(format!(
                    "frame {i}: unvoiced frame with f0 = {}",
                    fr.f0
                )));
            }
            f0.push(fr.f0);
            voiced.push(fr.voiced);
        }
        F0Contour::new(f0, voiced, self.frame_rate).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<&F0Contour> for ContourFile {
    fn from(c: &F0Contour) -> Self {
        ContourFile {
            frame_rate: c.frame_rate(),
            frames: c
                .f0_hz()
                .iter()
                .zip(c.voiced())
                .map(|(&f0, &voiced)| ContourFrame { f0, voiced })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourFormat {
    Json,
    Csv,
}

impl ContourFormat {
    /// Picks the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ContourFormat::Csv,
            _ => ContourFormat::Json,
        }
    }
}

pub fn contour_to_json(contour: &F0Contour) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ContourFile::from(contour))?;
    s.push('\n');
    Ok(s)
}

pub fn contour_to_csv(contour: &F0Contour) -> String {
    let mut s = String::new();
    // `{}` on f64 prints the shortest string that round-trips exactly.
    let _ = writeln!(s, "# frame_rate={}", contour.frame_rate());
    s.push_str("index,f0,voiced\n");
    for (i, (&f0, &v)) in contour.f0_hz().iter().zip(contour.voiced()).enumerate() {
        let _ = writeln!(s, "{i},{f0},{}", u8::from(v));
    }
    s
}

pub fn write_contour(path: impl AsRef<Path>, contour: &F0Contour, format: ContourFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ContourFormat::Json => contour_to_json(contour)?,
        ContourFormat::Csv => contour_to_csv(contour),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a contour, sniffing JSON vs CSV from the content.
pub fn read_contour(path: impl AsRef<Path>) -> Result<F0Contour> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_contour(&text)
}

pub fn parse_contour(text: &str) -> Result<F0Contour> {
    if text.trim_start().starts_with('{') {
        parse_contour_json(text)
    } else {
        parse_contour_csv(text)
    }
}

pub fn parse_contour_json(text: &str) -> Result<F0Contour> {
    let file: ContourFile =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("JSON contour: {e}")))?;
    file.into_contour()
}

pub fn parse_contour_csv(text: &str) -> Result<F0Contour> {
    let mut frame_rate = None;
    let mut header_seen = false;
    let mut frames = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("frame_rate=") {
                let fr: f64 = v.trim().parse().map_err(|_| {
                    Error::Schema(format!("row {row}: frame_rate '{}' is not a number", v.trim()))
                })?;
                frame_rate = Some(fr);
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["index", "f0", "voiced"] {
                return Err(Error::Schema(format!(
                    "row {row}: expected header 'index,f0,voiced', found '{line}'"
                )));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::Schema(format!("row {row}: expected 3 columns, found {}", cols.len())));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::Schema(format!("row {row}: index '{}' is not an integer", cols[0])))?;
        if index != frames.len() {
            return Err(Error::Schema(format!(
                "row {row}: expected index {}, found {index}",
                frames.len()
            )));
        }
        let f0: f64 = cols[1]
            .parse()
            .map_err(|_| Error::Schema(format!("row {row}: f0 '{}' is not a number", cols[1])))?;
        let voiced = match cols[2] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Schema(format!("row {row}: voiced flag '{other}' is not 0/1")))
            }
        };
        frames.push(ContourFrame { f0, voiced });
    }
    if !header_seen {
        return Err(Error::Schema("missing 'index,f0,voiced' header".into()));
    }
    let frame_rate =
        frame_rate.ok_or_else(|| Error::Schema("missing '# frame_rate=' line".into()))?;
    ContourFile { frame_rate, frames }.into_contour()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(tag: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&24000u32.to_le_bytes());
        out.extend_from_slice(&(24000 * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn pcm16_mono_length_matches_frame_count() {
        let data: Vec<u8> = (0..100i16).flat_map(|v| v.to_le_bytes()).collect();
        let buf = parse_wav(&wav_bytes(1, 1, 16, &data)).unwrap();
        assert_eq!(buf.len(), 100);
        assert_eq!(buf.sample_rate(), 24000);
        assert_eq!(buf.samples()[3], 3.0 / 32768.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let mut data = Vec::new();
        data.extend_from_slice(&16384i16.to_le_bytes());
        data.extend_from_slice(&(-16384i16).to_le_bytes());
        let buf = parse_wav(&wav_bytes(1, 2, 16, &data)).unwrap();
        assert_eq!(buf.samples(), &[0.0]);

        let mut data = Vec::new();
        data.extend_from_slice(&0.5f32.to_le_bytes());
        data.extend_from_slice(&(-0.5f32).to_le_bytes());
        let buf = parse_wav(&wav_bytes(3, 2, 32, &data)).unwrap();
        assert_eq!(buf.samples(), &[0.0]);
    }

    #[test]
    fn distinct_diagnostics() {
        let mut rifx = wav_bytes(1, 1, 16, &[0, 0]);
        rifx[0..4].copy_from_slice(b"RIFX");
        assert!(matches!(parse_wav(&rifx), Err(Error::UnsupportedFormat(_))));

        let mut junk = wav_bytes(1, 1, 16, &[0, 0]);
        junk[0..4].copy_from_slice(b"JUNK");
        assert!(matches!(parse_wav(&junk), Err(Error::MalformedHeader(_))));

        assert!(matches!(
            parse_wav(&wav_bytes(1, 1, 24, &[0, 0, 0])),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            parse_wav(&wav_bytes(1, 3, 16, &[0; 6])),
            Err(Error::UnsupportedFormat(_))
        ));

        let mut short = wav_bytes(1, 1, 16, &[0; 8]);
        short.truncate(short.len() - 4);
        assert!(matches!(parse_wav(&short), Err(Error::TruncatedData(_))));

        assert!(matches!(parse_wav(b"RIFF"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn float_nan_rejected() {
        let data = f32::NAN.to_le_bytes();
        assert!(matches!(parse_wav(&wav_bytes(3, 1, 32, &data)), Err(Error::NonFinite(0))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = wav_bytes(1, 1, 16, &[1, 0]);
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), b"abc\0"].concat();
        bytes.splice(36..36, list);
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.samples(), &[1.0 / 32768.0]);
    }

    #[test]
    fn quantization_rules() {
        assert_eq!(quantize_pcm16(1.0), 32767);
        assert_eq!(quantize_pcm16(-1.0), -32768);
        assert_eq!(quantize_pcm16(2.5), 32767);
        assert_eq!(quantize_pcm16(0.0), 0);
    }

    #[test]
    fn zeros_encode_to_zero_words() {
        let buf = AudioBuffer::new(vec![0.0; 10], 24000).unwrap();
        let bytes = encode_wav(&buf);
        assert_eq!(bytes.len(), 44 + 20);
        assert!(bytes[44..].iter().all(|&b| b == 0));
    }

    #[test]
    fn empty_contour_serializes_empty_frames() {
        let c = F0Contour::new(vec![], vec![], 93.75).unwrap();
        let json = contour_to_json(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["frames"], serde_json::json!([]));
        assert_eq!(parse_contour(&json).unwrap(), c);
        assert_eq!(parse_contour(&contour_to_csv(&c)).unwrap(), c);
    }

    #[test]
    fn csv_non_numeric_names_row() {
        let text = "# frame_rate=100\nindex,f0,voiced\n0,220,1\n1,abc,1\n";
        let err = parse_contour(text).unwrap_err().to_string();
        assert!(err.contains("row 4"), "{err}");
        assert!(err.contains("abc"), "{err}");
    }

    #[test]
    fn json_schema_violations() {
        assert!(matches!(
            parse_contour(r#"{"frame_rate": 100, "frames": [{"f0": 0, "voiced": true}]}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_contour(r#"{"frame_rate": -1, "frames": []}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(parse_contour(r#"{"frames": []}"#), Err(Error::Schema(_))));
    }
}
