//! `separate`: run the sliding-window pipeline on a simulated session.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use css_core::pipeline::{
    plan_chunks, run_css, save_masks, ChunkConfig, CssOptions, FileMaskEstimator, MaskEstimator,
    OracleIrm, OutputMode,
};
use css_core::segment::cut_long_segments;
use css_core::signal::{wav, StftConfig};

use crate::config::{parse_channel_list, parse_chunk_triple, BenchConfig};
use crate::sessionio;

#[derive(Args)]
pub struct SeparateArgs {
    /// A simulated session directory (holding manifest.json).
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sliding-window shape in seconds, e.g. "1.2,0.8,0.4".
    #[arg(long)]
    chunk: Option<String>,
    /// Output mode: masking or mvdr.
    #[arg(long)]
    mode: Option<String>,
    /// Mask source: "oracle" or "file:<path>".
    #[arg(long)]
    estimator: Option<String>,
    /// Microphone subset, e.g. "1,0,4"; the first listed channel becomes the
    /// reference.
    #[arg(long)]
    channels: Option<String>,
    /// Separate each truth utterance independently with batch statistics
    /// instead of processing the continuous recording.
    #[arg(long, default_value_t = false)]
    utterance_wise: bool,
    /// Exclude the competing speaker's mask from the MVDR noise statistics.
    #[arg(long, default_value_t = false)]
    noise_without_other: bool,
}

/// What one separation run wrote, alongside the streams.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub session_id: String,
    pub condition: String,
    pub mode: String,
    pub estimator: String,
    pub chunk_secs: [f64; 3],
    pub latency_secs: f64,
    pub channels: Option<Vec<usize>>,
    pub utterance_wise: bool,
    pub segment_boundaries: Vec<f64>,
    pub flagged_boundaries: Vec<f64>,
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading run manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn run(args: SeparateArgs) -> Result<()> {
    let mut cfg = BenchConfig::load_or_default(args.config.as_deref())?;
    if let Some(c) = &args.chunk {
        cfg.chunk_secs = parse_chunk_triple(c)?;
    }
    if let Some(m) = &args.mode {
        cfg.mode = m.clone();
    }
    if let Some(e) = &args.estimator {
        cfg.estimator = e.clone();
    }
    if let Some(ch) = &args.channels {
        cfg.channels = Some(parse_channel_list(ch)?);
    }
    let mode: OutputMode = cfg.mode.parse()?;

    let (manifest, rendered) = sessionio::load_session(&args.session)?;
    let rendered = match &cfg.channels {
        None => rendered,
        Some(idx) => rendered.select_channels(idx)?,
    };

    let stft_cfg = StftConfig::default();
    let chunk = ChunkConfig::from_seconds(
        cfg.chunk_secs[0],
        cfg.chunk_secs[1],
        cfg.chunk_secs[2],
        &stft_cfg,
        manifest.sample_rate,
    )?;

    let mut css = CssOptions::new(chunk, mode);
    css.stft = stft_cfg;
    css.mvdr.include_other_speaker_in_noise = !args.noise_without_other;

    std::fs::create_dir_all(&args.out)?;
    let mut files = BTreeMap::new();
    let mut boundaries = Vec::new();
    let mut flagged = Vec::new();

    if args.utterance_wise {
        // Batch separation per truth utterance, statistics per utterance.
        let utt_dir = args.out.join("utt");
        std::fs::create_dir_all(&utt_dir)?;
        for img in &rendered.references {
            let end = (img.start_sample + img.image.len()).min(rendered.mixture.len());
            let slice = rendered.slice(img.start_sample, end);
            let total = css.stft.frame_count(slice.mixture.len());
            let mut opts = css.clone();
            opts.chunk = ChunkConfig::batch(total);
            let estimator = build_estimator(&cfg.estimator, &slice, &opts, total)?;
            let out = run_css(&slice.mixture, estimator.as_ref(), &opts)?;
            for (s, stream) in out.streams.iter().enumerate() {
                let name = format!("utt/{:03}_s{s}.wav", img.placement_index);
                let path = args.out.join(&name);
                wav::write_wav(&path, stream)?;
                files.insert(name, sessionio::sha256_file(&path)?);
            }
        }
    } else {
        let segments = cut_long_segments(
            &rendered.truth,
            cfg.segment_min_secs,
            cfg.segment_max_secs,
        )?;
        boundaries = segments.boundaries.clone();
        flagged = segments.flagged.clone();
        if mode == OutputMode::Mvdr {
            css.segment_boundaries = Some(segments.boundaries.clone());
        }
        let total = css.stft.frame_count(rendered.mixture.len());
        let plan = plan_chunks(total, &chunk)?;
        let estimator = build_estimator(&cfg.estimator, &rendered, &css, total)?;
        let out = run_css(&rendered.mixture, estimator.as_ref(), &css)?;

        for (s, stream) in out.streams.iter().enumerate() {
            let name = format!("stream{s}.wav");
            let path = args.out.join(&name);
            wav::write_wav(&path, stream)?;
            files.insert(name, sessionio::sha256_file(&path)?);
        }
        let masks_path = args.out.join("masks.cssm");
        save_masks(&masks_path, &out.chunk_masks)?;
        files.insert("masks.cssm".into(), sessionio::sha256_file(&masks_path)?);
        debug_assert_eq!(plan.len(), out.chunk_plan.len());
    }

    let latency = chunk.latency_secs(&stft_cfg, manifest.sample_rate);
    let run = RunManifest {
        session_id: manifest.session_id.clone(),
        condition: manifest.condition.clone(),
        mode: cfg.mode.clone(),
        estimator: cfg.estimator.clone(),
        chunk_secs: cfg.chunk_secs,
        latency_secs: latency,
        channels: cfg.channels.clone(),
        utterance_wise: args.utterance_wise,
        segment_boundaries: boundaries,
        flagged_boundaries: flagged,
        files,
    };
    std::fs::write(args.out.join("run.json"), serde_json::to_string_pretty(&run)?)?;
    println!(
        "{}: {} mode, chunk {:?} s, inherent latency {:.3} s",
        manifest.session_id, cfg.mode, cfg.chunk_secs, latency
    );
    Ok(())
}

fn build_estimator(
    spec: &str,
    rendered: &css_core::sim::RenderedSession,
    css: &CssOptions,
    total_frames: usize,
) -> Result<Box<dyn MaskEstimator>> {
    if spec == "oracle" {
        let oracle = OracleIrm::from_rendered(rendered, &css.stft, css.ref_channel)?;
        return Ok(Box::new(oracle));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let plan = plan_chunks(total_frames, &css.chunk)?;
        let est = FileMaskEstimator::load(
            path,
            plan.len(),
            css.chunk.window_len(),
            css.stft.bins(),
        )?;
        if est.report.clamped_values > 0 {
            eprintln!(
                "warning: {} mask values outside [0,1] were clamped",
                est.report.clamped_values
            );
        }
        return Ok(Box::new(est));
    }
    bail!("unknown estimator {spec:?} (expected \"oracle\" or \"file:<path>\")");
}
