//! PCM WAV parsing and silence padding.
//!
//! Some vendors reject very short uploads, so audio below a configured
//! duration is padded with trailing silence before upload. Padding never
//! touches existing samples: the output is the input byte-for-byte up to the
//! end of the original data chunk, with zero-amplitude frames appended and
//! the RIFF/data sizes rewritten.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavError {
    #[error("truncated WAV: need {needed} bytes at offset {offset}, have {have}")]
    Truncated {
        offset: usize,
        needed: usize,
        have: usize,
    },
    #[error("not a RIFF/WAVE file")]
    NotRiff,
    #[error("unsupported WAV codec {format} (only PCM format 1 is supported)")]
    NotPcm { format: u16 },
    #[error("unsupported bit depth {0} (supported: 8, 16, 24, 32)")]
    UnsupportedBits(u16),
    #[error("missing required chunk {0:?}")]
    MissingChunk(&'static str),
    #[error("inconsistent header: {0}")]
    Inconsistent(String),
}

/// Parsed layout of a PCM WAV byte buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavLayout {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    /// Bytes per frame (all channels of one sample instant).
    pub block_align: u16,
    /// Offset of the first byte of data-chunk content.
    pub data_offset: usize,
    /// Length in bytes of the data-chunk content.
    pub data_len: usize,
}

impl WavLayout {
    pub fn frames(&self) -> usize {
        self.data_len / self.block_align as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}

fn read_bytes(bytes: &[u8], offset: usize, needed: usize) -> Result<&[u8], WavError> {
    bytes
        .get(offset..offset + needed)
        .ok_or(WavError::Truncated {
            offset,
            needed,
            have: bytes.len().saturating_sub(offset),
        })
}

fn read_u16(bytes: &[u8], offset: usize) -> Result<u16, WavError> {
    let b = read_bytes(bytes, offset, 2)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, WavError> {
    let b = read_bytes(bytes, offset, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses the header of a PCM WAV buffer (8/16/24/32-bit, any sample rate,
/// mono or stereo and beyond).
pub fn parse_wav(bytes: &[u8]) -> Result<WavLayout, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotRiff);
    }
    let mut fmt: Option<(u32, u16, u16, u16)> = None;
    let mut data: Option<(usize, usize)> = None;
    let mut offset = 12;
    while offset + 8 <= bytes.len() {
        let id = read_bytes(bytes, offset, 4)?;
        let size = read_u32(bytes, offset + 4)? as usize;
        let content = offset + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::Inconsistent(format!(
                        "fmt chunk too small ({size} bytes)"
                    )));
                }
                read_bytes(bytes, content, 16)?;
                let format = read_u16(bytes, content)?;
                if format != 1 {
                    return Err(WavError::NotPcm { format });
                }
                let channels = read_u16(bytes, content + 2)?;
                let sample_rate = read_u32(bytes, content + 4)?;
                let block_align = read_u16(bytes, content + 12)?;
                let bits = read_u16(bytes, content + 14)?;
                if !matches!(bits, 8 | 16 | 24 | 32) {
                    return Err(WavError::UnsupportedBits(bits));
                }
                if channels == 0 || sample_rate == 0 {
                    return Err(WavError::Inconsistent(format!(
                        "channels {channels}, sample rate {sample_rate}"
                    )));
                }
                let expected_align = channels * (bits / 8);
                if block_align != expected_align {
                    return Err(WavError::Inconsistent(format!(
                        "block align {block_align} does not match channels x depth {expected_align}"
                    )));
                }
                fmt = Some((sample_rate, channels, bits, block_align));
            }
            b"data" => {
                read_bytes(bytes, content, size)?;
                data = Some((content, size));
            }
            _ => {
                read_bytes(bytes, content, size)?;
            }
        }
        // Chunks are word-aligned: odd sizes carry one pad byte.
        offset = content + size + (size % 2);
    }
    let (sample_rate, channels, bits_per_sample, block_align) =
        fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let (data_offset, data_len) = data.ok_or(WavError::MissingChunk("data"))?;
    Ok(WavLayout {
        sample_rate,
        channels,
        bits_per_sample,
        block_align,
        data_offset,
        data_len,
    })
}

/// Duration in seconds of a PCM WAV buffer.
pub fn wav_duration(bytes: &[u8]) -> Result<f64, WavError> {
    Ok(parse_wav(bytes)?.duration_s())
}

/// Pads a PCM WAV with trailing silence up to `target_seconds`.
///
/// Input at or above the target is returned as a bit-identical copy.
/// Otherwise zero-amplitude frames (0x80 bytes for unsigned 8-bit, zero
/// bytes for deeper formats) are appended so the output holds exactly
/// `ceil(target_seconds * sample_rate)` frames, and the RIFF and data chunk
/// sizes are rewritten to match. Existing samples are preserved
/// byte-for-byte, as are any chunks after the data chunk.
pub fn pad_audio(wav_in: &[u8], target_seconds: f64) -> Result<Vec<u8>, WavError> {
    let layout = parse_wav(wav_in)?;
    let target_frames = (target_seconds * layout.sample_rate as f64).ceil() as usize;
    let current_frames = layout.frames();
    if current_frames >= target_frames {
        return Ok(wav_in.to_vec());
    }

    let silence_byte = if layout.bits_per_sample == 8 {
        0x80u8
    } else {
        0x00u8
    };
    let added_bytes = (target_frames - current_frames) * layout.block_align as usize;
    let new_data_len = layout.data_len + added_bytes;

    let data_end = layout.data_offset + layout.data_len;
    // The original data chunk may carry a pad byte we must not duplicate.
    let old_pad = layout.data_len % 2;
    let trailing_start = (data_end + old_pad).min(wav_in.len());

    let new_pad = new_data_len % 2;
    let mut out = Vec::with_capacity(wav_in.len() + added_bytes + new_pad);
    out.extend_from_slice(&wav_in[..data_end]);
    out.resize(out.len() + added_bytes, silence_byte);
    if new_pad == 1 {
        out.push(0);
    }
    out.extend_from_slice(&wav_in[trailing_start..]);

    let riff_size = (out.len() - 8) as u32;
    out[4..8].copy_from_slice(&riff_size.to_le_bytes());
    let size_offset = layout.data_offset - 4;
    out[size_offset..size_offset + 4].copy_from_slice(&(new_data_len as u32).to_le_bytes());
    Ok(out)
}

/// Builds a minimal PCM WAV from raw frame bytes. Intended for fixtures and
/// tests; `frames.len()` must be a multiple of the frame size.
pub fn build_wav(sample_rate: u32, channels: u16, bits_per_sample: u16, frames: &[u8]) -> Vec<u8> {
    let block_align = channels * (bits_per_sample / 8);
    let byte_rate = sample_rate * block_align as u32;
    let data_len = frames.len() as u32;
    let pad = (frames.len() % 2) as u32;
    let riff_size = 36 + data_len + pad;
    let mut out = Vec::with_capacity(44 + frames.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits_per_sample.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(frames);
    if pad == 1 {
        out.push(0);
    }
    out
}
