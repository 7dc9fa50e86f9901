//! Mono 24-bit PCM WAV files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const FULL_SCALE: f64 = 8_388_608.0;
const MAX_CODE: i32 = 8_388_607;
const MIN_CODE: i32 = -8_388_608;

pub fn quantize(x: f64) -> i32 {
    ((x * FULL_SCALE).round() as i32).clamp(MIN_CODE, MAX_CODE)
}

pub fn encode_24bit(audio: &[f64], sample_rate: u32) -> Result<Vec<u8>> {
    if let Some(index) = audio.iter().position(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Clipping {
            index,
            value: audio[index],
        });
    }
    let data_len = u32::try_from(audio.len() * 3)
        .ok()
        .filter(|n| *n <= u32::MAX - 36)
        .ok_or_else(|| Error::Wav("audio too long for a RIFF file".into()))?;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 3).to_le_bytes());
    out.extend_from_slice(&3u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in audio {
        out.extend_from_slice(&quantize(x).to_le_bytes()[..3]);
    }
    Ok(out)
}

pub fn write_wav_24bit(audio: &[f64], sample_rate: u32, path: &Path) -> Result<()> {
    let bytes = encode_24bit(audio, sample_rate)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Decoded mono 24-bit file.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn decode_24bit(bytes: &[u8]) -> Result<WavData> {
    let bad = |m: &str| Error::Wav(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut format = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated chunk"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("short fmt chunk"));
                }
                let f = &bytes[body..end];
                let tag = u16::from_le_bytes([f[0], f[1]]);
                let channels = u16::from_le_bytes([f[2], f[3]]);
                let rate = u32::from_le_bytes(f[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes([f[14], f[15]]);
                if tag != 1 || channels != 1 || bits != 24 {
                    return Err(Error::Wav(format!(
                        "expected mono 24-bit PCM, got format {tag}, {channels} channels, {bits} bits"
                    )));
                }
                format = Some(rate);
            }
            b"data" => {
                let rate = format.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                if size % 3 != 0 {
                    return Err(bad("data size is not a whole number of frames"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(3)
                    .map(|b| (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64 / FULL_SCALE)
                    .collect();
                return Ok(WavData {
                    samples,
                    sample_rate: rate,
                });
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(bad("no data chunk"))
}

pub fn read_wav_24bit(path: &Path) -> Result<WavData> {
    decode_24bit(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_of_silence() {
        let bytes = encode_24bit(&vec![0.0; 44100], 44100).unwrap();
        assert_eq!(bytes.len(), 44 + 132_300);
        assert_eq!(u32::from_le_bytes(bytes[40..44].try_into().unwrap()), 132_300);
        assert_eq!(decode_24bit(&bytes).unwrap().samples.len(), 44100);
    }

    #[test]
    fn half_scale_code() {
        assert_eq!(quantize(0.5), 4_194_304);
        assert_eq!(quantize(-0.5), -4_194_304);
        assert_eq!(quantize(1.0), MAX_CODE);
        assert_eq!(quantize(-1.0), MIN_CODE);
    }

    #[test]
    fn clipping_reports_first_index() {
        match encode_24bit(&[0.0, 0.9, 1.5, -2.0], 44100) {
            Err(Error::Clipping { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(encode_24bit(&[f64::NAN], 44100), Err(Error::Clipping { index: 0, .. })));
    }

    #[test]
    fn round_trip_within_one_step() {
        let x: Vec<f64> = (0..5000).map(|i| 0.99 * ((i as f64) * 0.0137).sin()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        write_wav_24bit(&x, 44100, &path).unwrap();
        let back = read_wav_24bit(&path).unwrap();
        assert_eq!(back.sample_rate, 44100);
        let err = x.iter().zip(&back.samples).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        assert!(err < 1.0 / FULL_SCALE, "{err}");
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = encode_24bit(&[0.25, -0.25], 44100).unwrap();
        let extra = b"LIST\x03\x00\x00\x00abc\x00";
        bytes.splice(36..36, extra.iter().copied());
        let riff = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff.to_le_bytes());
        assert_eq!(decode_24bit(&bytes).unwrap().samples, vec![0.25, -0.25]);
    }
}
