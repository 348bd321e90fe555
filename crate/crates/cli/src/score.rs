//! `score`: SI-SNR tables and WER protocols over separated outputs, bucketed
//! by overlap condition.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;

use css_core::eval::{
    continuous_eval, parse_transcripts, report, signal_eval, utterance_eval, ConditionResult,
    ReferenceUtterance, SiSnrTable, Transcript, UtteranceSiSnr, WerReport,
};
use css_core::segment::LongSegments;
use css_core::signal::{si_snr, wav, Waveform};
use css_core::sim::Condition;

use crate::separate::RunManifest;
use crate::sessionio;

#[derive(Args)]
pub struct ScoreArgs {
    /// One simulated session directory, or a suite root containing several.
    #[arg(long)]
    session: PathBuf,
    /// Matching separated output directory (or root mirroring session ids).
    #[arg(long)]
    separated: PathBuf,
    /// Where report.tsv / report.json go (default: the separated root).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score signal metrics only (no transcripts required).
    #[arg(long, default_value_t = false)]
    signal_only: bool,
    /// Directory holding <session_id>.tsv hypothesis transcripts.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

pub fn run(args: ScoreArgs) -> Result<()> {
    if !args.signal_only && args.transcripts.is_none() {
        bail!("score needs --transcripts <dir> unless --signal-only is set");
    }
    let sessions = sessionio::discover_sessions(&args.session)?;
    let multi = sessions.len() > 1;
    let mut results: BTreeMap<Condition, ConditionResult> = BTreeMap::new();

    for session_dir in &sessions {
        let (manifest, rendered) = sessionio::load_session(session_dir)?;
        let sep_dir = if multi {
            args.separated.join(&manifest.session_id)
        } else if args.separated.join("run.json").exists() {
            args.separated.clone()
        } else {
            args.separated.join(&manifest.session_id)
        };
        let run = RunManifest::load(&sep_dir.join("run.json"))?;
        if run.session_id != manifest.session_id {
            bail!(
                "session id mismatch: audio is {} but separated output is {}",
                manifest.session_id,
                run.session_id
            );
        }
        let condition = Condition::from_label(&manifest.condition)?;
        let entry = results.entry(condition).or_default();
        let ref_ch = run.channels.as_ref().map(|c| c[0]).unwrap_or(0);

        if args.signal_only {
            let table = if run.utterance_wise {
                utterance_wise_signal_table(&sep_dir, &rendered, ref_ch)?
            } else {
                let streams = [
                    wav::read_wav(sep_dir.join("stream0.wav"))?,
                    wav::read_wav(sep_dir.join("stream1.wav"))?,
                ];
                SiSnrTable { rows: signal_eval(&streams, &rendered, ref_ch)? }
            };
            match &mut entry.si_snr {
                Some(t) => t.rows.extend(table.rows),
                None => entry.si_snr = Some(table),
            }
        } else {
            let tdir = args.transcripts.as_ref().unwrap();
            let tpath = tdir.join(format!("{}.tsv", manifest.session_id));
            if !tpath.exists() {
                bail!(
                    "no transcripts for session {} (expected {})",
                    manifest.session_id,
                    tpath.display()
                );
            }
            let transcripts = parse_transcripts(&std::fs::read_to_string(&tpath)?)?;
            if transcripts.len() != 2 {
                bail!(
                    "{}: expected exactly 2 hypothesis streams, found {}",
                    tpath.display(),
                    transcripts.len()
                );
            }
            let wer_report = if run.utterance_wise {
                utterance_protocol(&rendered.truth, &transcripts)?
            } else {
                continuous_protocol(&rendered.truth, &transcripts, &run)?
            };
            match &mut entry.wer {
                Some(w) => w.accumulate(&wer_report),
                None => entry.wer = Some(wer_report),
            }
        }
    }

    let rep = report(&results);
    let out_dir = args.out.clone().unwrap_or_else(|| args.separated.clone());
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("report.tsv"), rep.to_tsv())?;
    std::fs::write(out_dir.join("report.json"), rep.to_json()?)?;
    print!("{}", rep.to_tsv());
    Ok(())
}

fn utterance_wise_signal_table(
    sep_dir: &Path,
    rendered: &css_core::sim::RenderedSession,
    ref_ch: usize,
) -> Result<SiSnrTable> {
    let mut rows = Vec::new();
    for img in &rendered.references {
        let mut per_stream = [0.0f64; 2];
        let mut any = false;
        for (s, v) in per_stream.iter_mut().enumerate() {
            let path = sep_dir.join(format!("utt/{:03}_s{s}.wav", img.placement_index));
            if !path.exists() {
                continue;
            }
            any = true;
            let est = wav::read_wav(&path)?;
            let n = est.len().min(img.image.len());
            let reference =
                Waveform::from_mono(img.image.channel(ref_ch).to_vec()[..n].to_vec(), 16_000)?;
            *v = si_snr(&est.slice_range(0, n).mono(0), &reference)?;
        }
        if !any {
            bail!("no utterance outputs for placement {} in {}", img.placement_index, sep_dir.display());
        }
        let best_stream = if per_stream[1] > per_stream[0] { 1 } else { 0 };
        rows.push(UtteranceSiSnr {
            utterance_id: img.utterance_id.clone(),
            per_stream_db: per_stream,
            best_db: per_stream[best_stream],
            best_stream,
        });
    }
    Ok(SiSnrTable { rows })
}

/// Utterance-wise protocol: per truth utterance, take the hypothesis words
/// each stream produced over the utterance span, keep the lower-WER stream.
fn utterance_protocol(
    truth: &css_core::sim::SegmentationTruth,
    transcripts: &[Transcript],
) -> Result<WerReport> {
    let mut total = WerReport::default();
    for u in &truth.utterances {
        let reference = css_core::eval::normalize_words(&u.transcript.join(" "));
        let h1 = transcripts[0].words_in_span(u.start_secs, u.end_secs);
        let h2 = transcripts[1].words_in_span(u.start_secs, u.end_secs);
        let (chosen, _) = utterance_eval(&h1, &h2, &reference);
        total.accumulate(&chosen);
    }
    Ok(total)
}

/// Continuous protocol: per long segment, optimally assign the segment's
/// reference utterances to the two streams and accumulate the error counts.
fn continuous_protocol(
    truth: &css_core::sim::SegmentationTruth,
    transcripts: &[Transcript],
    run: &RunManifest,
) -> Result<WerReport> {
    let segments = LongSegments {
        boundaries: run.segment_boundaries.clone(),
        flagged: run.flagged_boundaries.clone(),
        session_secs: truth.session_duration_secs,
    };
    let refs = ReferenceUtterance::from_truth(truth);
    let mut total = WerReport::default();
    for (t0, t1) in segments.ranges() {
        let seg_refs: Vec<ReferenceUtterance> = refs
            .iter()
            .filter(|r| {
                let mid = 0.5 * (r.start_secs + r.end_secs);
                t0 <= mid && mid < t1
            })
            .cloned()
            .collect();
        if seg_refs.is_empty() {
            continue;
        }
        let hyps = [
            Transcript {
                stream_id: transcripts[0].stream_id.clone(),
                entries: transcripts[0]
                    .entries
                    .iter()
                    .filter(|e| e.start_secs < t1 && e.end_secs > t0)
                    .cloned()
                    .collect(),
            },
            Transcript {
                stream_id: transcripts[1].stream_id.clone(),
                entries: transcripts[1]
                    .entries
                    .iter()
                    .filter(|e| e.start_secs < t1 && e.end_secs > t0)
                    .cloned()
                    .collect(),
            },
        ];
        let aligned = continuous_eval(&hyps, &seg_refs)?;
        total.accumulate(&aligned.total);
    }
    Ok(total)
}
