//! Scoring: word error rate, the two-hypothesis utterance protocol, the
//! speaker-agnostic continuous protocol (optimal assignment of reference
//! utterances to hypothesis streams), SI-SNR tables, and report generation.

pub mod report;

pub use report::{report, BenchReport, ConditionResult, SiSnrTable};

use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{si_snr, Waveform};
use crate::sim::{RenderedSession, SegmentationTruth};

/// Uppercase, strip punctuation (apostrophes survive inside words), split on
/// whitespace. LibriSpeech-style transcripts are already close to this form.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '\'' {
                c.to_ascii_uppercase()
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .map(|w| w.trim_matches('\'').to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

/// One hypothesis stream: time-stamped word sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub stream_id: String,
    pub entries: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub start_secs: f64,
    pub end_secs: f64,
    pub words: Vec<String>,
}

impl Transcript {
    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].start_secs < w[0].start_secs {
                return Err(Error::InvalidInput(format!(
                    "transcript {} entries not time-sorted",
                    self.stream_id
                )));
            }
        }
        if self.entries.iter().any(|e| e.words.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "transcript {} has an empty entry",
                self.stream_id
            )));
        }
        Ok(())
    }

    /// All words in time order.
    pub fn words(&self) -> Vec<String> {
        self.entries.iter().flat_map(|e| e.words.iter().cloned()).collect()
    }

    /// Words of entries overlapping `[t0, t1)`.
    pub fn words_in_span(&self, t0: f64, t1: f64) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.start_secs < t1 && e.end_secs > t0)
            .flat_map(|e| e.words.iter().cloned())
            .collect()
    }
}

/// Parse the transcript exchange format: one entry per line,
/// `stream_id<TAB>start_sec<TAB>end_sec<TAB>word word word...`.
/// Streams come back in order of first appearance; words are normalized.
pub fn parse_transcripts(text: &str) -> Result<Vec<Transcript>> {
    let mut order: Vec<String> = Vec::new();
    let mut map: std::collections::HashMap<String, Vec<TranscriptEntry>> = Default::default();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(4, '\t');
        let (id, start, end, words) =
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => {
                    return Err(Error::Malformed(format!(
                        "transcript line {}: expected 4 tab-separated fields",
                        ln + 1
                    )))
                }
            };
        let parse_time = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Malformed(format!("transcript line {}: bad time {s:?}", ln + 1)))
        };
        let entry = TranscriptEntry {
            start_secs: parse_time(start)?,
            end_secs: parse_time(end)?,
            words: normalize_words(words),
        };
        if entry.words.is_empty() {
            continue;
        }
        if !map.contains_key(id) {
            order.push(id.to_string());
        }
        map.entry(id.to_string()).or_default().push(entry);
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut entries = map.remove(&id).unwrap();
        entries.sort_by(|a, b| a.start_secs.total_cmp(&b.start_secs));
        let t = Transcript { stream_id: id, entries };
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_transcripts(path: impl AsRef<Path>, transcripts: &[Transcript]) -> Result<()> {
    let mut out = String::new();
    for t in transcripts {
        for e in &t.entries {
            out.push_str(&format!(
                "{}\t{:.3}\t{:.3}\t{}\n",
                t.stream_id,
                e.start_secs,
                e.end_secs,
                e.words.join(" ")
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Substitution/deletion/insertion counts against a reference of `ref_words`
/// words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_words: usize,
}

impl WerReport {
    pub fn total_errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`; may exceed 1. Zero references with zero errors is
    /// 0, with errors is infinite.
    pub fn wer(&self) -> f64 {
        if self.ref_words == 0 {
            return if self.total_errors() == 0 { 0.0 } else { f64::INFINITY };
        }
        self.total_errors() as f64 / self.ref_words as f64
    }

    pub fn accumulate(&mut self, other: &WerReport) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.ref_words += other.ref_words;
    }
}

/// Minimum-edit-distance WER with S/D/I counts. Ties in the backtrace prefer
/// substitutions over insertion+deletion pairs (diagonal first).
pub fn wer(hyp: &[String], reference: &[String]) -> WerReport {
    let n = reference.len();
    let m = hyp.len();
    let mut dist = vec![vec![0u32; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i as u32;
    }
    for j in 0..=m {
        dist[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = u32::from(reference[i - 1] != hyp[j - 1]);
            dist[i][j] = (dist[i - 1][j - 1] + cost)
                .min(dist[i - 1][j] + 1)
                .min(dist[i][j - 1] + 1);
        }
    }
    // Backtrace, diagonal preferred on ties.
    let (mut i, mut j) = (n, m);
    let mut report = WerReport { ref_words: n, ..Default::default() };
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = u32::from(reference[i - 1] != hyp[j - 1]);
            if dist[i][j] == dist[i - 1][j - 1] + cost {
                if cost == 1 {
                    report.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            report.deletions += 1;
            i -= 1;
        } else {
            report.insertions += 1;
            j -= 1;
        }
    }
    report
}

/// The two-hypothesis rule of utterance-wise evaluation: score both streams,
/// keep the lower-WER report (ties pick the first stream).
pub fn utterance_eval(
    hyp1: &[String],
    hyp2: &[String],
    reference: &[String],
) -> (WerReport, usize) {
    let r1 = wer(hyp1, reference);
    let r2 = wer(hyp2, reference);
    if r2.wer() < r1.wer() {
        (r2, 1)
    } else {
        (r1, 0)
    }
}

/// One reference utterance prepared for continuous scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUtterance {
    pub utterance_id: String,
    pub start_secs: f64,
    pub end_secs: f64,
    pub words: Vec<String>,
}

impl ReferenceUtterance {
    pub fn from_truth(truth: &SegmentationTruth) -> Vec<ReferenceUtterance> {
        let mut refs: Vec<ReferenceUtterance> = truth
            .utterances
            .iter()
            .map(|u| ReferenceUtterance {
                utterance_id: u.utterance_id.clone(),
                start_secs: u.start_secs,
                end_secs: u.end_secs,
                words: normalize_words(&u.transcript.join(" ")),
            })
            .collect();
        refs.sort_by(|a, b| a.start_secs.total_cmp(&b.start_secs));
        refs
    }
}

/// Outcome of the speaker-agnostic continuous protocol: which stream each
/// reference utterance was scored against, and the per-stream and total
/// error counts under the optimal assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Stream index per reference utterance, in time order.
    pub assignment: Vec<usize>,
    pub per_stream: [WerReport; 2],
    pub total: WerReport,
}

/// Levenshtein frontier: edit distances from the reference prefix consumed
/// so far to every prefix of one hypothesis stream.
fn frontier_init(m: usize) -> Vec<u32> {
    (0..=m as u32).collect()
}

fn frontier_append(frontier: &[u32], hyp: &[String], words: &[String]) -> Vec<u32> {
    let mut cur = frontier.to_vec();
    for w in words {
        let mut next = vec![0u32; cur.len()];
        next[0] = cur[0] + 1;
        for j in 1..cur.len() {
            let cost = u32::from(hyp[j - 1] != *w);
            next[j] = (cur[j] + 1).min(next[j - 1] + 1).min(cur[j - 1] + cost);
        }
        cur = next;
    }
    cur
}

/// Exact search over stream assignments. DFS over references in time order
/// carrying both frontiers; subtrees are pruned when the sum of frontier
/// minima (a lower bound that never decreases as more references append)
/// already reaches the incumbent. `prune = false` is the exhaustive
/// fallback used for small cases.
fn best_assignment(
    refs: &[ReferenceUtterance],
    hyps: [&[String]; 2],
    prune: bool,
) -> (Vec<usize>, u32) {
    struct Dfs<'a> {
        refs: &'a [ReferenceUtterance],
        hyps: [&'a [String]; 2],
        prune: bool,
        best_cost: u32,
        best_assign: Vec<usize>,
        current: Vec<usize>,
    }
    impl Dfs<'_> {
        fn go(&mut self, i: usize, f0: &[u32], f1: &[u32]) {
            if i == self.refs.len() {
                let cost = f0[f0.len() - 1] + f1[f1.len() - 1];
                if cost < self.best_cost {
                    self.best_cost = cost;
                    self.best_assign = self.current.clone();
                }
                return;
            }
            if self.prune {
                let bound = f0.iter().min().unwrap() + f1.iter().min().unwrap();
                if bound >= self.best_cost {
                    return;
                }
            }
            let words = &self.refs[i].words;
            let n0 = frontier_append(f0, self.hyps[0], words);
            self.current.push(0);
            self.go(i + 1, &n0, f1);
            self.current.pop();
            let n1 = frontier_append(f1, self.hyps[1], words);
            self.current.push(1);
            self.go(i + 1, f0, &n1);
            self.current.pop();
        }
    }
    let mut dfs = Dfs {
        refs,
        hyps,
        prune,
        best_cost: u32::MAX,
        best_assign: vec![0; refs.len()],
        current: Vec::with_capacity(refs.len()),
    };
    let f0 = frontier_init(hyps[0].len());
    let f1 = frontier_init(hyps[1].len());
    dfs.go(0, &f0, &f1);
    (dfs.best_assign, dfs.best_cost)
}

const EXHAUSTIVE_LIMIT: usize = 12;

/// Align two hypothesis streams against the reference utterances: every
/// reference is assigned to exactly one stream (references no stream ever
/// covered still count, as deletions); the assignment minimizing the total
/// error count wins; per-stream WER is computed on the concatenation of each
/// stream's references in time order.
pub fn continuous_eval(
    hyps: &[Transcript; 2],
    refs: &[ReferenceUtterance],
) -> Result<AlignmentResult> {
    hyps[0].validate()?;
    hyps[1].validate()?;
    for w in refs.windows(2) {
        if w[1].start_secs < w[0].start_secs {
            return Err(Error::InvalidInput("reference utterances not time-sorted".into()));
        }
    }
    let h0 = hyps[0].words();
    let h1 = hyps[1].words();
    let (assignment, _) =
        best_assignment(refs, [&h0, &h1], refs.len() > EXHAUSTIVE_LIMIT);

    let mut per_stream_refs: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for (r, &s) in refs.iter().zip(&assignment) {
        per_stream_refs[s].extend(r.words.iter().cloned());
    }
    let per_stream = [wer(&h0, &per_stream_refs[0]), wer(&h1, &per_stream_refs[1])];
    let mut total = WerReport::default();
    total.accumulate(&per_stream[0]);
    total.accumulate(&per_stream[1]);
    Ok(AlignmentResult { assignment, per_stream, total })
}

/// Per-utterance best-stream SI-SNR of two separated outputs against each
/// utterance's reverberant reference span — the signal-metric mirror of the
/// two-hypothesis rule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UtteranceSiSnr {
    pub utterance_id: String,
    pub per_stream_db: [f64; 2],
    pub best_db: f64,
    pub best_stream: usize,
}

pub fn signal_eval(
    outputs: &[Waveform; 2],
    rendered: &RenderedSession,
    ref_channel: usize,
) -> Result<Vec<UtteranceSiSnr>> {
    let mut rows = Vec::with_capacity(rendered.references.len());
    for img in &rendered.references {
        let start = img.start_sample;
        let end = start + img.image.len();
        if start >= outputs[0].len() || start >= outputs[1].len() {
            return Err(Error::InvalidInput(format!(
                "utterance {} span starts at sample {start}, beyond the output length",
                img.utterance_id
            )));
        }
        let end = end.min(outputs[0].len()).min(outputs[1].len());
        let reference =
            Waveform::from_mono(img.image.channel(ref_channel).to_vec()[..end - start].to_vec(), img.image.sample_rate())?;
        let mut per_stream = [0.0f64; 2];
        for (s, out) in outputs.iter().enumerate() {
            let est = out.slice_range(start, end);
            per_stream[s] = si_snr(&est.mono(0), &reference)?;
        }
        let best_stream = if per_stream[1] > per_stream[0] { 1 } else { 0 };
        rows.push(UtteranceSiSnr {
            utterance_id: img.utterance_id.clone(),
            per_stream_db: per_stream,
            best_db: per_stream[best_stream],
            best_stream,
        });
    }
    Ok(rows)
}

/// Median of a slice (empty slices return NaN).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
