//! Binary mask-exchange files, so externally estimated masks (e.g. from a
//! trained model) can drive the pipeline in place of the oracle.
//!
//! Layout (little-endian): magic `CSSM`, version u32, chunks u32, frames u32
//! (the chunk window length), bins u32, masks_per_chunk u32 (always 3), then
//! float32 values in `(chunk, mask, frame, bin)` order with mask order
//! `[speech0, speech1, noise]`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pipeline::MaskSet;

pub const MASK_MAGIC: &[u8; 4] = b"CSSM";
pub const MASK_VERSION: u32 = 1;
/// Same container, used for beamformer weight dumps.
pub const WEIGHTS_MAGIC: &[u8; 4] = b"CSSW";

/// What a mask-file load had to fix up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskFileReport {
    /// Values outside [0, 1] clamped during load.
    pub clamped_values: u64,
}

/// Write per-chunk mask sets; all chunks must share one window shape.
pub fn save_masks(path: impl AsRef<Path>, chunks: &[MaskSet]) -> Result<()> {
    let first = chunks
        .first()
        .ok_or_else(|| Error::InvalidInput("no mask chunks to save".into()))?;
    let (frames, bins) = (first.frames(), first.bins());
    for (i, c) in chunks.iter().enumerate() {
        if c.frames() != frames || c.bins() != bins {
            return Err(Error::ShapeMismatch {
                expected: format!("({frames}, {bins})"),
                actual: format!("chunk {i}: ({}, {})", c.frames(), c.bins()),
            });
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MASK_MAGIC)?;
    for v in [MASK_VERSION, chunks.len() as u32, frames as u32, bins as u32, 3u32] {
        f.write_all(&v.to_le_bytes())?;
    }
    for c in chunks {
        for plane in [&c.speech[0], &c.speech[1], &c.noise] {
            for v in plane.iter() {
                f.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

/// Load per-chunk mask sets, checking the dimensions against the chunk plan
/// and clamping stray values into [0, 1].
pub fn load_external_masks(
    path: impl AsRef<Path>,
    expected_chunks: usize,
    expected_frames: usize,
    expected_bins: usize,
) -> Result<(Vec<MaskSet>, MaskFileReport)> {
    let path = path.as_ref();
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MASK_MAGIC {
        return Err(Error::Malformed(format!(
            "{}: bad magic {:?}, expected {:?}",
            path.display(),
            magic,
            MASK_MAGIC
        )));
    }
    let mut u32_buf = [0u8; 4];
    let mut read_u32 = |f: &mut dyn Read| -> Result<u32> {
        f.read_exact(&mut u32_buf)?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    let version = read_u32(&mut f)?;
    if version != MASK_VERSION {
        return Err(Error::Unsupported(format!(
            "{}: mask file version {version}, supported {MASK_VERSION}",
            path.display()
        )));
    }
    let chunks = read_u32(&mut f)? as usize;
    let frames = read_u32(&mut f)? as usize;
    let bins = read_u32(&mut f)? as usize;
    let masks_per_chunk = read_u32(&mut f)? as usize;
    if (chunks, frames, bins, masks_per_chunk)
        != (expected_chunks, expected_frames, expected_bins, 3)
    {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "chunks={expected_chunks} frames={expected_frames} bins={expected_bins} masks=3"
            ),
            actual: format!("chunks={chunks} frames={frames} bins={bins} masks={masks_per_chunk}"),
        });
    }

    let mut report = MaskFileReport::default();
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;
    let expected_len = chunks * 3 * frames * bins * 4;
    if payload.len() != expected_len {
        return Err(Error::Malformed(format!(
            "{}: payload is {} bytes, expected {expected_len}",
            path.display(),
            payload.len()
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
    let mut next_plane = |report: &mut MaskFileReport| -> Array2<f64> {
        Array2::from_shape_fn((frames, bins), |_| {
            let v = values.next().expect("length checked");
            if !(0.0..=1.0).contains(&v) {
                report.clamped_values += 1;
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        })
    };
    let mut out = Vec::with_capacity(chunks);
    for _ in 0..chunks {
        let s0 = next_plane(&mut report);
        let s1 = next_plane(&mut report);
        let noise = next_plane(&mut report);
        out.push(MaskSet { speech: [s0, s1], noise });
    }
    Ok((out, report))
}

/// A [`super::MaskEstimator`] that replays a mask file chunk by chunk.
pub struct FileMaskEstimator {
    masks: Vec<MaskSet>,
    pub report: MaskFileReport,
}

impl FileMaskEstimator {
    pub fn load(
        path: impl AsRef<Path>,
        expected_chunks: usize,
        expected_frames: usize,
        expected_bins: usize,
    ) -> Result<Self> {
        let (masks, report) =
            load_external_masks(path, expected_chunks, expected_frames, expected_bins)?;
        Ok(Self { masks, report })
    }
}

impl super::MaskEstimator for FileMaskEstimator {
    fn estimate(
        &self,
        _mix_window: ndarray::ArrayView3<'_, num_complex::Complex64>,
        chunk: &super::Chunk,
        _total_frames: usize,
    ) -> Result<MaskSet> {
        self.masks
            .get(chunk.index)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no masks for chunk {}", chunk.index)))
    }
}
