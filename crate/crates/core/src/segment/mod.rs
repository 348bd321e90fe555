//! Energy-based voice activity detection (tuned permissive) and the
//! long-segment cutter that prepares continuous evaluation.

use crate::error::{Error, Result};
use crate::signal::Waveform;
use crate::sim::SegmentationTruth;

/// Energy VAD parameters. The defaults favor recall over precision: the
/// threshold sits a few dB above a low percentile of the frame-energy
/// distribution, and, when the signal has little dynamic range, falls back
/// below the loudest frames so steady signals still count as speech.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    pub frame_ms: u32,
    /// Percentile (0..1) of frame energies treated as the noise floor.
    pub floor_percentile: f64,
    /// Activation threshold in dB above the floor.
    pub activation_db: f64,
    /// Gaps shorter than this many frames merge into speech.
    pub hangover_frames: usize,
    /// Absolute silence floor in dBFS; signals entirely below it yield no
    /// speech at all.
    pub silence_floor_dbfs: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            frame_ms: 30,
            floor_percentile: 0.1,
            activation_db: 6.0,
            hangover_frames: 10,
            silence_floor_dbfs: -80.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if ![10, 20, 30].contains(&self.frame_ms) {
            return Err(Error::InvalidConfig(format!(
                "frame_ms {} not one of 10/20/30",
                self.frame_ms
            )));
        }
        if !(0.0..=1.0).contains(&self.floor_percentile) {
            return Err(Error::InvalidConfig("floor percentile outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Non-overlapping, sorted speech regions in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeechRegions {
    pub regions: Vec<(f64, f64)>,
}

impl SpeechRegions {
    pub fn total_secs(&self) -> f64 {
        self.regions.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.regions.iter().any(|&(a, b)| a <= t && t < b)
    }
}

/// Frame-energy VAD with hangover smoothing.
///
/// Frames above `floor + activation_db` are speech; the floor is the
/// configured percentile of frame energies, and the threshold never exceeds
/// `max_energy - 3 dB`, so constant signals stay detectable. Gaps shorter
/// than the hangover merge.
pub fn energy_vad(x: &Waveform, cfg: &VadConfig) -> Result<SpeechRegions> {
    cfg.validate()?;
    if x.channels() != 1 {
        return Err(Error::InvalidInput("energy_vad expects a single channel".into()));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("energy_vad input is empty".into()));
    }
    let fs = x.sample_rate() as f64;
    let frame_len = ((cfg.frame_ms as f64 / 1000.0) * fs).round() as usize;
    let samples = x.channel(0);
    let n_frames = x.len().div_ceil(frame_len);
    let mut energy_db = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let a = t * frame_len;
        let b = (a + frame_len).min(x.len());
        let e: f64 = samples.slice(ndarray::s![a..b]).iter().map(|v| v * v).sum::<f64>()
            / (b - a) as f64;
        energy_db.push(10.0 * e.max(1e-30).log10());
    }

    let mut sorted = energy_db.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let max_db = *sorted.last().unwrap();
    if max_db <= cfg.silence_floor_dbfs {
        return Ok(SpeechRegions::default());
    }
    let floor = sorted[((sorted.len() - 1) as f64 * cfg.floor_percentile).round() as usize];
    let threshold = (floor + cfg.activation_db).min(max_db - 3.0).max(cfg.silence_floor_dbfs);

    let mut speech: Vec<bool> = energy_db.iter().map(|&e| e > threshold).collect();

    // Hangover: close gaps shorter than the configured number of frames.
    if cfg.hangover_frames > 0 {
        let mut gap_start: Option<usize> = None;
        let mut seen_speech = false;
        for t in 0..speech.len() {
            if speech[t] {
                if let Some(g) = gap_start {
                    if seen_speech && t - g < cfg.hangover_frames {
                        speech[g..t].iter_mut().for_each(|v| *v = true);
                    }
                }
                gap_start = None;
                seen_speech = true;
            } else if gap_start.is_none() {
                gap_start = Some(t);
            }
        }
    }

    let mut regions = Vec::new();
    let mut start: Option<usize> = None;
    for (t, &s) in speech.iter().enumerate() {
        match (s, start) {
            (true, None) => start = Some(t),
            (false, Some(a)) => {
                regions.push((a as f64 * frame_len as f64 / fs, t as f64 * frame_len as f64 / fs));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        regions.push((a as f64 * frame_len as f64 / fs, x.len() as f64 / fs));
    }
    Ok(SpeechRegions { regions })
}

/// Where a long segment came from; boundaries land in truth silences.
#[derive(Debug, Clone, PartialEq)]
pub struct LongSegments {
    /// Interior boundaries in seconds, strictly increasing.
    pub boundaries: Vec<f64>,
    /// Boundaries that had to be placed outside the [min, max] window
    /// because no silence was available there.
    pub flagged: Vec<f64>,
    pub session_secs: f64,
}

impl LongSegments {
    /// Segment ranges including session start and end.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.boundaries.len() + 1);
        let mut prev = 0.0;
        for &b in &self.boundaries {
            out.push((prev, b));
            prev = b;
        }
        out.push((prev, self.session_secs));
        out
    }
}

/// Cut the session into segments of `min_s..=max_s` seconds whose boundaries
/// fall inside zero-active-speaker intervals (greedy earliest-feasible
/// placement; deterministic). The final segment may be shorter than `min_s`.
///
/// If a stretch has no silence inside the feasible window, the boundary goes
/// to the midpoint of the first silence after it and is flagged.
pub fn cut_long_segments(truth: &SegmentationTruth, min_s: f64, max_s: f64) -> Result<LongSegments> {
    if !(0.0 < min_s && min_s <= max_s) {
        return Err(Error::InvalidConfig(format!("bad segment bounds [{min_s}, {max_s}]")));
    }
    let session = truth.session_duration_secs;
    let silences = truth.silence_intervals();
    let mut boundaries = Vec::new();
    let mut flagged = Vec::new();
    let mut seg_start = 0.0;
    loop {
        if session - seg_start <= max_s {
            break;
        }
        let lo = seg_start + min_s;
        let hi = seg_start + max_s;
        // Earliest silence intersecting [lo, hi].
        let mut placed = false;
        for &(a, b) in &silences {
            if b <= lo {
                continue;
            }
            if a > hi {
                break;
            }
            let (wa, wb) = (a.max(lo), b.min(hi));
            if wa < wb {
                boundaries.push((wa + wb) / 2.0);
                placed = true;
                break;
            }
        }
        if !placed {
            // No silence in the window: fall back to the first silence after
            // lo (flagged), or give up and finish with an oversized segment.
            if let Some(&(a, b)) = silences.iter().find(|&&(a, _)| a > lo) {
                let mid = (a + b) / 2.0;
                if mid <= seg_start {
                    break;
                }
                boundaries.push(mid);
                flagged.push(mid);
            } else {
                break;
            }
        }
        seg_start = *boundaries.last().unwrap();
    }
    Ok(LongSegments { boundaries, flagged, session_secs: session })
}
