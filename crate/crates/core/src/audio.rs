//! Mono audio buffers and the PCM16 WAV codec used for corpus files.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
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

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

const PCM_FORMAT: u16 = 1;

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a RIFF/WAVE byte stream holding mono 16-bit PCM.
///
/// Samples are mapped to [-1, 1) by dividing by 32768. Unknown chunks are
/// skipped; the `fmt ` chunk must precede `data`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    let malformed = |msg: &str| Error::MalformedWav(msg.to_string());
    if bytes.len() < 12 {
        return Err(malformed("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }

    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| malformed("chunk extends past end of file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                let tag = le_u16(bytes, body);
                let channels = le_u16(bytes, body + 2);
                let rate = le_u32(bytes, body + 4);
                let bits = le_u16(bytes, body + 14);
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| malformed("data chunk before fmt chunk"))?;
                if channels != 1 {
                    return Err(Error::MonoRequired(channels));
                }
                if tag != PCM_FORMAT || bits != 16 {
                    return Err(Error::UnsupportedEncoding { format: tag, bits });
                }
                if rate == 0 {
                    return Err(malformed("zero sample rate"));
                }
                if !size.is_multiple_of(2) {
                    return Err(malformed("odd data chunk size for 16-bit samples"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                    .collect();
                return AudioSignal::new(samples, rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }
    Err(malformed("no data chunk"))
}

/// Encodes a signal as mono PCM16, clipping to the representable range.
pub fn encode_wav(signal: &AudioSignal) -> Vec<u8> {
    let n = signal.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&data_len.saturating_add(36).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate().to_le_bytes());
    out.extend_from_slice(&signal.sample_rate().saturating_mul(2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in signal.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    std::fs::write(path, encode_wav(signal)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(channels: u16, tag: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVEfmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&tag.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&8000u32.to_le_bytes());
        v.extend_from_slice(&(8000u32 * u32::from(channels) * 2).to_le_bytes());
        v.extend_from_slice(&(channels * 2).to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(data.len() as u32).to_le_bytes());
        v.extend_from_slice(data);
        v
    }

    #[test]
    fn pcm16_scaling() {
        let data: Vec<u8> = [i16::MIN, 0, 16384, i16::MAX]
            .iter()
            .flat_map(|s| s.to_le_bytes())
            .collect();
        let sig = decode_wav(&header(1, 1, 16, &data)).unwrap();
        assert_eq!(sig.sample_rate(), 8000);
        assert_eq!(sig.samples(), &[-1.0, 0.0, 0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn stereo_rejected() {
        let err = decode_wav(&header(2, 1, 16, &[0; 8])).unwrap_err();
        assert!(matches!(err, Error::MonoRequired(2)));
        assert!(err.to_string().contains("mono required"));
    }

    #[test]
    fn non_pcm16_rejected() {
        assert!(matches!(
            decode_wav(&header(1, 6, 8, &[0; 4])),
            Err(Error::UnsupportedEncoding { format: 6, bits: 8 })
        ));
    }

    #[test]
    fn truncated_file_is_malformed() {
        let mut bytes = header(1, 1, 16, &[0; 64]);
        bytes.truncate(60);
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("malformed WAV"), "{err}");
        assert!(matches!(decode_wav(&bytes[..20]), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn unknown_chunks_skipped() {
        let base = header(1, 1, 16, &[1, 0]);
        let mut bytes = base[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[9, 9, 9, 0]);
        bytes.extend_from_slice(&base[36..]);
        let sig = decode_wav(&bytes).unwrap();
        assert_eq!(sig.len(), 1);
    }

    #[test]
    fn encode_decode_is_quantization_exact() {
        let samples: Vec<f64> = (0..100).map(|i| ((i as f64) * 0.37).sin() * 0.8).collect();
        let sig = AudioSignal::new(samples.clone(), 16000).unwrap();
        let back = decode_wav(&encode_wav(&sig)).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(AudioSignal::new(vec![0.0, f64::NAN], 8000).is_err());
        assert!(AudioSignal::new(vec![0.0], 0).is_err());
    }
}
