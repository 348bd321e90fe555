//! Render a planned session through room acoustics plus isotropic noise.

use rayon::prelude::*;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::room::{
    add_image, image_method_rir, isotropic_noise, render_image, snr_gain, ArrayGeometry, RoomSpec,
};
use crate::signal::Waveform;
use crate::sim::{SegmentationTruth, SessionPlan, TruthUtterance, UtteranceRecord, UtteranceSource};

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    /// Reference-channel SNR for the added isotropic noise; `None` renders
    /// without noise.
    pub noise_snr_db: Option<f64>,
    pub ref_channel: usize,
    /// Forwarded to the image method; `None` selects automatic truncation.
    pub rir_max_order: Option<u32>,
    pub sample_rate: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            noise_snr_db: Some(10.0),
            ref_channel: 0,
            rir_max_order: None,
            sample_rate: crate::signal::DEFAULT_SAMPLE_RATE,
        }
    }
}

/// One placement's reverberant multichannel image, aligned to the session.
#[derive(Debug, Clone)]
pub struct UtteranceImage {
    pub placement_index: usize,
    pub utterance_id: String,
    pub start_sample: usize,
    /// Length of the dry utterance; `image` is longer by the RIR tail.
    pub source_len: usize,
    pub image: Waveform,
}

/// Everything a rendered session produces: the recording, the truth, the
/// per-utterance reverberant references, and the scaled noise that was added.
#[derive(Debug, Clone)]
pub struct RenderedSession {
    pub mixture: Waveform,
    pub truth: SegmentationTruth,
    pub references: Vec<UtteranceImage>,
    /// The noise exactly as added (post-gain), or `None` when rendered dry.
    pub noise: Option<Waveform>,
}

impl RenderedSession {
    /// Restrict the session to the sample range `[start, end)`: the mixture,
    /// noise, references, and truth are all cropped and rebased, which is
    /// what utterance-wise (batch) separation operates on.
    pub fn slice(&self, start: usize, end: usize) -> RenderedSession {
        let end = end.min(self.mixture.len());
        let start = start.min(end);
        let fs = self.mixture.sample_rate() as f64;
        let references = self
            .references
            .iter()
            .filter(|img| img.start_sample < end && img.start_sample + img.image.len() > start)
            .map(|img| {
                let abs_start = img.start_sample.max(start);
                let abs_end = (img.start_sample + img.image.len()).min(end);
                let local = (abs_start - img.start_sample, abs_end - img.start_sample);
                let speech_end = img.start_sample + img.source_len;
                UtteranceImage {
                    placement_index: img.placement_index,
                    utterance_id: img.utterance_id.clone(),
                    start_sample: abs_start - start,
                    source_len: speech_end.clamp(abs_start, abs_end) - abs_start,
                    image: img.image.slice_range(local.0, local.1),
                }
            })
            .collect();
        let truth = SegmentationTruth {
            utterances: self
                .truth
                .utterances
                .iter()
                .filter(|u| u.start_secs * fs < end as f64 && u.end_secs * fs > start as f64)
                .map(|u| crate::sim::TruthUtterance {
                    utterance_id: u.utterance_id.clone(),
                    speaker_id: u.speaker_id.clone(),
                    start_secs: (u.start_secs - start as f64 / fs).max(0.0),
                    end_secs: (u.end_secs - start as f64 / fs).min((end - start) as f64 / fs),
                    transcript: u.transcript.clone(),
                })
                .collect(),
            session_duration_secs: (end - start) as f64 / fs,
        };
        RenderedSession {
            mixture: self.mixture.slice_range(start, end),
            truth,
            references,
            noise: self.noise.as_ref().map(|n| n.slice_range(start, end)),
        }
    }

    /// Keep only the listed channels (mixture, references, noise alike).
    pub fn select_channels(&self, idx: &[usize]) -> crate::error::Result<RenderedSession> {
        let references = self
            .references
            .iter()
            .map(|img| {
                Ok(UtteranceImage {
                    placement_index: img.placement_index,
                    utterance_id: img.utterance_id.clone(),
                    start_sample: img.start_sample,
                    source_len: img.source_len,
                    image: img.image.select_channels(idx)?,
                })
            })
            .collect::<crate::error::Result<_>>()?;
        Ok(RenderedSession {
            mixture: self.mixture.select_channels(idx)?,
            truth: self.truth.clone(),
            references,
            noise: match &self.noise {
                None => None,
                Some(n) => Some(n.select_channels(idx)?),
            },
        })
    }
}

/// Render `plan` through the room: every placement is convolved with the RIR
/// of its loudspeaker, images are summed onto the canvas, and isotropic
/// noise is added at the requested reference-channel SNR. Deterministic for
/// a fixed `(plan, seed)`.
pub fn render_session(
    plan: &SessionPlan,
    pool: &[UtteranceRecord],
    audio: &dyn UtteranceSource,
    room: &RoomSpec,
    geometry: &ArrayGeometry,
    positions: &[[f64; 3]],
    opts: &RenderOptions,
    seed: u64,
) -> Result<RenderedSession> {
    plan.validate()?;
    geometry.validate_inside(room)?;
    let records: HashMap<&str, &UtteranceRecord> =
        pool.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
    let fs = opts.sample_rate;
    for p in &plan.placements {
        if p.position_index >= positions.len() {
            return Err(Error::InvalidInput(format!(
                "placement of {} uses position {} but only {} loudspeakers are defined",
                p.utterance_id,
                p.position_index,
                positions.len()
            )));
        }
        if !records.contains_key(p.utterance_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "placement references unknown utterance {:?}",
                p.utterance_id
            )));
        }
    }

    // One RIR per loudspeaker actually used.
    let mut used: Vec<usize> = plan.placements.iter().map(|p| p.position_index).collect();
    used.sort_unstable();
    used.dedup();
    let rirs: HashMap<usize, _> = used
        .par_iter()
        .map(|&pi| {
            image_method_rir(room, positions[pi], geometry, opts.rir_max_order, fs)
                .map(|r| (pi, r))
        })
        .collect::<Result<_>>()?;

    // Reverberant image per placement.
    let mut references: Vec<UtteranceImage> = plan
        .placements
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let utt = audio.fetch(&p.utterance_id)?;
            if utt.channels() != 1 {
                return Err(Error::InvalidInput(format!("utterance {} is not mono", p.utterance_id)));
            }
            if utt.sample_rate() != fs {
                return Err(Error::InvalidInput(format!(
                    "utterance {} is {} Hz, expected {fs}",
                    p.utterance_id,
                    utt.sample_rate()
                )));
            }
            let source_len = utt.len();
            let image = render_image(&utt, &rirs[&p.position_index])?;
            Ok(UtteranceImage {
                placement_index: i,
                utterance_id: p.utterance_id.clone(),
                start_sample: (p.start_secs * fs as f64).round() as usize,
                source_len,
                image,
            })
        })
        .collect::<Result<_>>()?;
    references.sort_by_key(|r| r.placement_index);

    let canvas_len = references
        .iter()
        .map(|r| r.start_sample + r.image.len())
        .max()
        .unwrap_or(0)
        .max((plan.duration_secs * fs as f64).ceil() as usize);
    let mut mixture = Waveform::zeros(geometry.len(), canvas_len, fs);
    for r in &references {
        add_image(&r.image, r.start_sample, &mut mixture);
    }

    let noise = match opts.noise_snr_db {
        None => None,
        Some(snr) => {
            let raw =
                isotropic_noise(geometry, canvas_len as f64 / fs as f64, fs, seed)?;
            let gain = snr_gain(&mixture, &raw, snr, opts.ref_channel)?;
            let scaled = Waveform::new(raw.samples() * gain, fs)?;
            let sum = Waveform::new(mixture.samples() + scaled.samples(), fs)?;
            mixture = sum;
            Some(scaled)
        }
    };

    // Ground truth carries speech boundaries; the reverb tail belongs to the
    // reference image, not to the segmentation.
    let truth = SegmentationTruth {
        utterances: plan
            .placements
            .iter()
            .zip(&references)
            .map(|(p, r)| TruthUtterance {
                utterance_id: p.utterance_id.clone(),
                speaker_id: p.speaker_id.clone(),
                start_secs: r.start_sample as f64 / fs as f64,
                end_secs: (r.start_sample + r.source_len) as f64 / fs as f64,
                transcript: records[p.utterance_id.as_str()].transcript.clone(),
            })
            .collect(),
        session_duration_secs: canvas_len as f64 / fs as f64,
    };

    Ok(RenderedSession { mixture, truth, references, noise })
}

/// Draw loudspeaker coordinates: uniform in the room, at a horizontal
/// distance between `min_dist` and `max_dist` from the array centroid, kept
/// clear of the walls. Fixed per session, one per speaker slot.
pub fn draw_loudspeaker_positions(
    room: &RoomSpec,
    geometry: &ArrayGeometry,
    count: usize,
    dist_range: (f64, f64),
    seed: u64,
) -> Result<Vec<[f64; 3]>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5EED_F00D);
    let center = geometry.centroid();
    let margin = 0.3;
    let (lo, hi) = dist_range;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut placed = false;
        for _ in 0..10_000 {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let d = rng.random_range(lo..hi);
            let p = [
                center[0] + d * theta.cos(),
                center[1] + d * theta.sin(),
                rng.random_range(1.0..1.8f64).min(room.dimensions[2] - margin),
            ];
            let inside = p
                .iter()
                .zip(&room.dimensions)
                .all(|(&x, &l)| x > margin && x < l - margin);
            if inside {
                out.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Infeasible(format!(
                "could not place loudspeaker {i} at {lo}-{hi} m from the array in this room"
            )));
        }
    }
    Ok(out)
}
