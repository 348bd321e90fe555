//! Oracle ideal-ratio-mask estimator: the stand-in for a trained separation
//! model. Masks come from the rendered session's per-utterance reverberant
//! references and the added noise, on the reference channel.
//!
//! Speaker-to-slot assignment is chunk-local, in order of first activity
//! inside the window, with non-overlapping speakers sharing a slot — so the
//! chunk output order is arbitrary across chunks and stitching is genuinely
//! exercised, like with a real model.

use ndarray::{Array2, ArrayView3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::pipeline::{Chunk, MaskEstimator, MaskSet};
use crate::signal::StftConfig;
use crate::sim::RenderedSession;

/// Magnitude plane of one utterance, placed on the global frame axis.
/// `first_frame..first_frame+mag.nrows()` spans the reverberant image;
/// `speech_start..speech_end` spans the dry utterance only and is what slot
/// assignment reasons about (the plan guarantees no triple overlap of
/// speech, but reverb tails may pile up arbitrarily).
struct ReferenceTrack {
    speaker_id: String,
    first_frame: usize,
    speech_start: usize,
    speech_end: usize,
    mag: Array2<f64>,
}

impl ReferenceTrack {
    fn frame_mag(&self, g: usize, bin: usize) -> f64 {
        if g < self.first_frame {
            return 0.0;
        }
        let j = g - self.first_frame;
        if j >= self.mag.nrows() {
            return 0.0;
        }
        self.mag[[j, bin]]
    }

    fn active_in(&self, g0: usize, g1: usize) -> bool {
        self.first_frame < g1 && g0 < self.first_frame + self.mag.nrows()
    }
}

/// Oracle ratio masks `|S_i| / (sum_j |S_j| + |N| + eps)` on the reference
/// channel.
pub struct OracleIrm {
    tracks: Vec<ReferenceTrack>,
    noise_mag: Option<Array2<f64>>,
    epsilon: f64,
    bins: usize,
}

impl OracleIrm {
    /// Build the oracle from a rendered session: per-utterance reference
    /// magnitudes are computed frame-aligned with the mixture's STFT grid.
    pub fn from_rendered(
        rendered: &RenderedSession,
        stft: &StftConfig,
        ref_channel: usize,
    ) -> Result<Self> {
        stft.validate()?;
        let total_frames = stft.frame_count(rendered.mixture.len());
        let mut tracks = Vec::with_capacity(rendered.references.len());
        let speakers: std::collections::HashMap<&str, &str> = rendered
            .truth
            .utterances
            .iter()
            .map(|u| (u.utterance_id.as_str(), u.speaker_id.as_str()))
            .collect();
        for img in &rendered.references {
            let speaker = speakers.get(img.utterance_id.as_str()).ok_or_else(|| {
                Error::InvalidInput(format!("no truth entry for {}", img.utterance_id))
            })?;
            let (first_frame, mag) = aligned_magnitude(
                img.image.channel(ref_channel).as_slice().expect("contiguous"),
                img.start_sample,
                total_frames,
                stft,
            );
            // Inward frame rounding: utterances that merely touch in time
            // must not collide on the frame grid.
            let speech_start = img.start_sample.div_ceil(stft.hop_length);
            let speech_end = ((img.start_sample + img.source_len) / stft.hop_length).max(speech_start);
            tracks.push(ReferenceTrack {
                speaker_id: speaker.to_string(),
                first_frame,
                speech_start,
                speech_end,
                mag,
            });
        }
        let noise_mag = match &rendered.noise {
            None => None,
            Some(n) => {
                let (_, mag) = aligned_magnitude(
                    n.channel(ref_channel).as_slice().expect("contiguous"),
                    0,
                    total_frames,
                    stft,
                );
                Some(mag)
            }
        };
        Ok(Self { tracks, noise_mag, epsilon: 1e-8, bins: stft.bins() })
    }
}

/// STFT magnitudes of a signal placed at `start_sample` on the session's
/// frame grid (frames outside the signal are zero; session-edge reflection
/// is not replicated, which only perturbs the outermost frames).
fn aligned_magnitude(
    samples: &[f64],
    start_sample: usize,
    total_frames: usize,
    cfg: &StftConfig,
) -> (usize, Array2<f64>) {
    let w = cfg.window_length;
    let hop = cfg.hop_length;
    let half = (w / 2) as isize;
    let s0 = start_sample as isize;
    let s1 = s0 + samples.len() as isize;
    // Frames whose window [t*hop - w/2, t*hop + w/2) touches [s0, s1).
    let t_first = ((s0 - half + hop as isize) as f64 / hop as f64).floor().max(0.0) as usize;
    let t_first = t_first.min(total_frames.saturating_sub(1));
    let t_last = (((s1 + half) as f64 / hop as f64).ceil() as usize).min(total_frames);
    if t_last <= t_first {
        return (0, Array2::zeros((0, cfg.bins())));
    }
    let taper: Vec<f64> = {
        let hann = |n: usize| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / w as f64).cos())
        };
        match cfg.window {
            crate::signal::WindowKind::SqrtHann => (0..w).map(|n| hann(n).sqrt()).collect(),
            crate::signal::WindowKind::Hann => (0..w).map(hann).collect(),
        }
    };
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(w);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); w];
    let mut mag = Array2::zeros((t_last - t_first, cfg.bins()));
    for t in t_first..t_last {
        let frame_start = t as isize * hop as isize - half;
        for (j, b) in buf.iter_mut().enumerate() {
            let g = frame_start + j as isize;
            let v = if g >= s0 && g < s1 { samples[(g - s0) as usize] } else { 0.0 };
            *b = Complex64::new(v * taper[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..cfg.bins() {
            mag[[t - t_first, k]] = buf[k].norm();
        }
    }
    (t_first, mag)
}

impl MaskEstimator for OracleIrm {
    fn estimate(
        &self,
        mix_window: ArrayView3<'_, Complex64>,
        chunk: &Chunk,
        total_frames: usize,
    ) -> Result<MaskSet> {
        let (_, frames, bins) = mix_window.dim();
        if bins != self.bins {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bins", self.bins),
                actual: format!("{bins}"),
            });
        }
        let g0 = chunk.frame_at(0, total_frames);
        let g1 = chunk.frame_at(frames - 1, total_frames) + 1;

        // Utterances whose image reaches into this window, in order of first
        // activity (tails count as activity for ordering, speech intervals
        // decide the slots).
        let mut active: Vec<&ReferenceTrack> =
            self.tracks.iter().filter(|t| t.active_in(g0, g1)).collect();
        active.sort_by_key(|t| (t.first_frame, t.speech_start));

        // First-fit interval coloring of the speech intervals over the two
        // slots, preferring the slot the speaker already holds in this
        // chunk. Speech never has three-way overlap in a valid plan, so two
        // slots suffice; anything else is refused.
        let mut slot_of: Vec<usize> = Vec::with_capacity(active.len());
        let mut speaker_slot: std::collections::HashMap<&str, usize> = Default::default();
        let mut slot_end = [0usize; 2];
        for t in &active {
            let preferred = speaker_slot.get(t.speaker_id.as_str()).copied().unwrap_or(0);
            let order = [preferred, 1 - preferred];
            let s = order
                .into_iter()
                .find(|&s| slot_end[s] <= t.speech_start)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "more than two simultaneously active speakers in chunk {}",
                        chunk.index
                    ))
                })?;
            slot_of.push(s);
            speaker_slot.insert(&t.speaker_id, s);
            slot_end[s] = slot_end[s].max(t.speech_end);
        }

        let mut masks = MaskSet::zeros(frames, bins);
        for j in 0..frames {
            let g = chunk.frame_at(j, total_frames);
            for b in 0..bins {
                let mut slot_mag = [0.0f64; 2];
                for (t, &s) in active.iter().zip(&slot_of) {
                    slot_mag[s] += t.frame_mag(g, b);
                }
                let n = self.noise_mag.as_ref().map(|m| m[[g, b]]).unwrap_or(0.0);
                let denom = slot_mag[0] + slot_mag[1] + n + self.epsilon;
                masks.speech[0][[j, b]] = (slot_mag[0] / denom).clamp(0.0, 1.0);
                masks.speech[1][[j, b]] = (slot_mag[1] / denom).clamp(0.0, 1.0);
                masks.noise[[j, b]] = (n / denom).clamp(0.0, 1.0);
            }
        }
        Ok(masks)
    }
}
