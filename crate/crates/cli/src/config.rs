//! The session-config document: every numeric knob of the benchmark in one
//! JSON file. Command-line flags override individual fields.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub sample_rate: u32,
    /// Room dimensions in meters.
    pub room_dimensions: [f64; 3],
    pub t60_secs: f64,
    pub array_center: [f64; 3],
    pub array_radius_m: f64,
    /// Loudspeaker distance range from the array center, meters.
    pub speaker_distance_range: [f64; 2],
    /// Reference-channel SNR of the added isotropic noise; `null` = dry.
    pub noise_snr_db: Option<f64>,
    pub session_secs: f64,
    pub n_speakers: usize,
    pub utterance_count_range: [usize; 2],
    /// Condition labels to simulate (subset of 0S, 0L, 10, 20, 30, 40).
    pub conditions: Vec<String>,
    /// Sliding-window shape in seconds: past, current, future.
    pub chunk_secs: [f64; 3],
    pub mode: String,
    /// Microphone subset (indices into the 7-channel array); `null` = all.
    pub channels: Option<Vec<usize>>,
    pub estimator: String,
    pub segment_min_secs: f64,
    pub segment_max_secs: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: 16_000,
            room_dimensions: [7.0, 6.0, 3.0],
            t60_secs: 0.3,
            array_center: [3.5, 3.0, 1.2],
            array_radius_m: 0.0425,
            speaker_distance_range: [0.33, 4.09],
            noise_snr_db: Some(10.0),
            session_secs: 600.0,
            n_speakers: 8,
            utterance_count_range: [52, 125],
            conditions: vec![
                "0S".into(),
                "0L".into(),
                "10".into(),
                "20".into(),
                "30".into(),
                "40".into(),
            ],
            chunk_secs: [1.2, 0.8, 0.4],
            mode: "masking".into(),
            channels: None,
            estimator: "oracle".into(),
            segment_min_secs: 60.0,
            segment_max_secs: 120.0,
        }
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: BenchConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

/// Parse "1.2,0.8,0.4" into a seconds triple.
pub fn parse_chunk_triple(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    anyhow::ensure!(parts.len() == 3, "chunk triple must be three comma-separated seconds values");
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse::<f64>().with_context(|| format!("bad chunk value {p:?}"))?;
    }
    Ok(out)
}

/// Parse "1,0,4" into channel indices.
pub fn parse_channel_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad channel index {p:?}")))
        .collect()
}
