//! `simulate`: plan and render the mini-session suite.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use css_core::room::{ArrayGeometry, RoomSpec};
use css_core::sim::{
    self, manifest::SessionManifest, plan_suite, render::draw_loudspeaker_positions, Condition,
    RenderOptions, SuiteConfig,
};

use crate::config::BenchConfig;
use crate::pool::DirPool;
use crate::sessionio;

#[derive(Args)]
pub struct SimulateArgs {
    /// Utterance pool: 16 kHz mono WAVs plus transcripts.tsv.
    #[arg(long)]
    pool: PathBuf,
    /// Output root; one subdirectory per mini session.
    #[arg(long)]
    out: PathBuf,
    /// Session-config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Conditions to render, e.g. "0S,0L,10,20,30,40".
    #[arg(long)]
    conditions: Option<String>,
    /// Mini-session length in seconds.
    #[arg(long)]
    duration_secs: Option<f64>,
    #[arg(long)]
    n_speakers: Option<usize>,
    /// Per-session utterance count bounds, e.g. "52,125".
    #[arg(long)]
    utterances: Option<String>,
    #[arg(long)]
    noise_snr_db: Option<f64>,
    /// Render without noise.
    #[arg(long, default_value_t = false)]
    no_noise: bool,
    #[arg(long)]
    t60: Option<f64>,
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let mut cfg = BenchConfig::load_or_default(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = &args.conditions {
        cfg.conditions = c.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(d) = args.duration_secs {
        cfg.session_secs = d;
    }
    if let Some(n) = args.n_speakers {
        cfg.n_speakers = n;
    }
    if let Some(u) = &args.utterances {
        let parts: Vec<usize> = u
            .split(',')
            .map(|p| p.trim().parse().context("bad utterance count bound"))
            .collect::<Result<_>>()?;
        anyhow::ensure!(parts.len() == 2, "--utterances takes MIN,MAX");
        cfg.utterance_count_range = [parts[0], parts[1]];
    }
    if let Some(snr) = args.noise_snr_db {
        cfg.noise_snr_db = Some(snr);
    }
    if args.no_noise {
        cfg.noise_snr_db = None;
    }
    if let Some(t) = args.t60 {
        cfg.t60_secs = t;
    }

    let conditions: Vec<Condition> = cfg
        .conditions
        .iter()
        .map(|s| Condition::from_label(s))
        .collect::<css_core::Result<_>>()?;

    let (records, pool) = DirPool::load(&args.pool, cfg.sample_rate)?;
    let room = RoomSpec::new(cfg.room_dimensions, cfg.t60_secs)?;
    let geometry = ArrayGeometry::circular_seven(cfg.array_center, cfg.array_radius_m);
    geometry.validate_inside(&room)?;

    let suite_cfg = SuiteConfig {
        session_secs: cfg.session_secs,
        n_speakers: cfg.n_speakers,
        utterance_count_range: (cfg.utterance_count_range[0], cfg.utterance_count_range[1]),
        max_retries: 40,
    };
    let all_plans = plan_suite(&records, cfg.seed, &suite_cfg)?;

    std::fs::create_dir_all(&args.out)?;
    for (cond, plan) in all_plans.into_iter().filter(|(c, _)| conditions.contains(c)) {
        let session_id = format!("mini_{}", cond.label());
        let session_seed = cfg.seed ^ (cond as u64 + 1).wrapping_mul(0x517C_C1B7_2722_0A95);
        let positions = draw_loudspeaker_positions(
            &room,
            &geometry,
            cfg.n_speakers,
            (cfg.speaker_distance_range[0], cfg.speaker_distance_range[1]),
            session_seed,
        )?;
        let opts = RenderOptions {
            noise_snr_db: cfg.noise_snr_db,
            ref_channel: 0,
            rir_max_order: None,
            sample_rate: cfg.sample_rate,
        };
        let rendered = sim::render_session(
            &plan,
            &records,
            &pool,
            &room,
            &geometry,
            &positions,
            &opts,
            session_seed,
        )?;
        let measured = sim::measure_overlap(&plan);
        let mut manifest = SessionManifest::new(
            session_id.clone(),
            cond.label(),
            session_seed,
            cfg.sample_rate,
            room,
            geometry.mic_positions.clone(),
            positions,
            cfg.noise_snr_db,
            &plan,
            &rendered.truth,
        );
        let dir = args.out.join(&session_id);
        sessionio::write_session(&dir, &rendered, &mut manifest)?;
        println!(
            "{session_id}: {} utterances, {:.1} s, measured overlap {:.3}",
            plan.placements.len(),
            plan.duration_secs,
            measured
        );
    }
    Ok(())
}
