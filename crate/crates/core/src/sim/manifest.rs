//! The session manifest document: one JSON file per rendered session carrying
//! the plan, the room, the truth segmentation, and content checksums for
//! every artifact written next to it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::room::RoomSpec;
use crate::sim::{Placement, SegmentationTruth, SessionPlan, TruthUtterance};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestPlacement {
    pub utt: String,
    pub spk: String,
    pub pos: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestTruth {
    pub utt: String,
    pub spk: String,
    pub start: f64,
    pub end: f64,
    pub transcript: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionManifest {
    pub session_id: String,
    pub condition: String,
    pub seed: u64,
    pub sample_rate: u32,
    pub room: RoomSpec,
    pub geometry: Vec<[f64; 3]>,
    pub loudspeakers: Vec<[f64; 3]>,
    pub noise_snr_db: Option<f64>,
    pub placements: Vec<ManifestPlacement>,
    pub truth: Vec<ManifestTruth>,
    /// Speech regions from the VAD, filled in by later stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_regions: Option<Vec<(f64, f64)>>,
    /// Long-segment boundaries for continuous evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_boundaries: Option<Vec<f64>>,
    /// Artifact file name -> SHA-256 of its contents.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

impl SessionManifest {
    pub fn new(
        session_id: impl Into<String>,
        condition: impl Into<String>,
        seed: u64,
        sample_rate: u32,
        room: RoomSpec,
        geometry: Vec<[f64; 3]>,
        loudspeakers: Vec<[f64; 3]>,
        noise_snr_db: Option<f64>,
        plan: &SessionPlan,
        truth: &SegmentationTruth,
    ) -> Self {
        Self {
            session_id: session_id.into(),
            condition: condition.into(),
            seed,
            sample_rate,
            room,
            geometry,
            loudspeakers,
            noise_snr_db,
            placements: plan
                .placements
                .iter()
                .map(|p| ManifestPlacement {
                    utt: p.utterance_id.clone(),
                    spk: p.speaker_id.clone(),
                    pos: p.position_index,
                    start: p.start_secs,
                    end: p.end_secs(),
                })
                .collect(),
            truth: truth
                .utterances
                .iter()
                .map(|u| ManifestTruth {
                    utt: u.utterance_id.clone(),
                    spk: u.speaker_id.clone(),
                    start: u.start_secs,
                    end: u.end_secs,
                    transcript: u.transcript.join(" "),
                })
                .collect(),
            speech_regions: None,
            segment_boundaries: None,
            files: BTreeMap::new(),
        }
    }

    /// Rebuild the truth segmentation carried by this manifest.
    pub fn to_truth(&self) -> SegmentationTruth {
        let session_duration_secs =
            self.truth.iter().map(|t| t.end).fold(0.0, f64::max);
        SegmentationTruth {
            utterances: self
                .truth
                .iter()
                .map(|t| TruthUtterance {
                    utterance_id: t.utt.clone(),
                    speaker_id: t.spk.clone(),
                    start_secs: t.start,
                    end_secs: t.end,
                    transcript: t.transcript.split_whitespace().map(str::to_string).collect(),
                })
                .collect(),
            session_duration_secs,
        }
    }

    /// Rebuild the plan carried by this manifest (for deterministic re-render).
    pub fn to_plan(&self) -> SessionPlan {
        SessionPlan {
            placements: self
                .placements
                .iter()
                .map(|p| Placement {
                    utterance_id: p.utt.clone(),
                    speaker_id: p.spk.clone(),
                    position_index: p.pos,
                    start_secs: p.start,
                    duration_secs: p.end - p.start,
                })
                .collect(),
            duration_secs: self.placements.iter().map(|p| p.end).fold(0.0, f64::max),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
