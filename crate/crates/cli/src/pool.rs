//! Utterance pool loading: a directory of 16 kHz mono WAV files plus a
//! `transcripts.tsv` mapping `utt_id<TAB>speaker_id<TAB>transcript`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use css_core::signal::{wav, Waveform};
use css_core::sim::{UtteranceRecord, UtteranceSource};

pub struct DirPool {
    paths: HashMap<String, PathBuf>,
    sample_rate: u32,
}

impl DirPool {
    /// Scan the pool directory; durations come from the WAV headers, the
    /// sample rate is enforced at this boundary.
    pub fn load(dir: &Path, sample_rate: u32) -> Result<(Vec<UtteranceRecord>, DirPool)> {
        let transcripts_path = dir.join("transcripts.tsv");
        let text = std::fs::read_to_string(&transcripts_path)
            .with_context(|| format!("reading {}", transcripts_path.display()))?;
        let mut meta: HashMap<String, (String, Vec<String>)> = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(utt), Some(spk), Some(words)) => {
                    let words: Vec<String> =
                        words.split_whitespace().map(str::to_string).collect();
                    if words.is_empty() {
                        bail!("transcripts.tsv line {}: empty transcript", ln + 1);
                    }
                    meta.insert(utt.to_string(), (spk.to_string(), words));
                }
                _ => bail!(
                    "transcripts.tsv line {}: expected utt_id<TAB>speaker_id<TAB>transcript",
                    ln + 1
                ),
            }
        }

        let mut records = Vec::new();
        let mut paths = HashMap::new();
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading pool dir {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        entries.sort();
        for path in entries {
            let utt_id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
                .context("non-utf8 wav file name")?;
            let Some((speaker, words)) = meta.get(&utt_id) else {
                bail!("{}: no transcript entry for {utt_id:?}", dir.display());
            };
            let reader = hound::WavReader::open(&path)
                .with_context(|| format!("opening {}", path.display()))?;
            let spec = reader.spec();
            if spec.sample_rate != sample_rate {
                bail!(
                    "{}: {} Hz audio; the toolkit ingests {sample_rate} Hz only",
                    path.display(),
                    spec.sample_rate
                );
            }
            if spec.channels != 1 {
                bail!("{}: pool utterances must be mono", path.display());
            }
            let duration = reader.duration() as f64 / sample_rate as f64;
            records.push(UtteranceRecord::new(utt_id.clone(), speaker, duration, words.clone())?);
            paths.insert(utt_id, path);
        }
        if records.is_empty() {
            bail!("{}: no wav files found", dir.display());
        }
        records.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        Ok((records, DirPool { paths, sample_rate }))
    }
}

impl UtteranceSource for DirPool {
    fn fetch(&self, utterance_id: &str) -> css_core::Result<Waveform> {
        let path = self.paths.get(utterance_id).ok_or_else(|| {
            css_core::Error::InvalidInput(format!("unknown utterance {utterance_id:?}"))
        })?;
        let x = wav::read_wav(path)?;
        if x.sample_rate() != self.sample_rate {
            return Err(css_core::Error::Unsupported(format!(
                "{}: expected {} Hz",
                path.display(),
                self.sample_rate
            )));
        }
        Ok(x)
    }
}
