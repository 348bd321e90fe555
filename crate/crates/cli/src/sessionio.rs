//! On-disk layout of a simulated session and checksummed artifact writing.
//!
//! ```text
//! <dir>/
//!   manifest.json     session manifest (plan, truth, room, checksums)
//!   mixture.wav       float32, one channel per microphone
//!   noise.wav         float32, the scaled noise actually added (if any)
//!   refs/NNN_<utt>.wav  per-placement reverberant images
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use css_core::signal::wav;
use css_core::sim::{manifest::SessionManifest, RenderedSession, UtteranceImage};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn ref_file_name(index: usize, utterance_id: &str) -> String {
    format!("{index:03}_{utterance_id}.wav")
}

/// Write a rendered session; returns the artifact checksums that went into
/// the manifest.
pub fn write_session(
    dir: &Path,
    rendered: &RenderedSession,
    manifest: &mut SessionManifest,
) -> Result<BTreeMap<String, String>> {
    std::fs::create_dir_all(dir.join("refs"))?;
    let mut files = BTreeMap::new();

    let mixture_path = dir.join("mixture.wav");
    wav::write_wav(&mixture_path, &rendered.mixture)?;
    files.insert("mixture.wav".to_string(), sha256_file(&mixture_path)?);

    if let Some(noise) = &rendered.noise {
        let noise_path = dir.join("noise.wav");
        wav::write_wav(&noise_path, noise)?;
        files.insert("noise.wav".to_string(), sha256_file(&noise_path)?);
    }

    for img in &rendered.references {
        let name = format!("refs/{}", ref_file_name(img.placement_index, &img.utterance_id));
        let path = dir.join(&name);
        wav::write_wav(&path, &img.image)?;
        files.insert(name, sha256_file(&path)?);
    }

    manifest.files = files.clone();
    manifest.save(dir.join("manifest.json"))?;
    Ok(files)
}

/// Load a session directory back into memory, verifying checksums.
pub fn load_session(dir: &Path) -> Result<(SessionManifest, RenderedSession)> {
    let manifest = SessionManifest::load(dir.join("manifest.json"))
        .with_context(|| format!("loading manifest in {}", dir.display()))?;
    for (name, want) in &manifest.files {
        let got = sha256_file(&dir.join(name))?;
        if got != *want {
            bail!("{}: checksum mismatch for {name} (corrupted or edited?)", dir.display());
        }
    }
    let mixture = wav::read_wav(dir.join("mixture.wav"))?;
    let noise = if manifest.files.contains_key("noise.wav") {
        Some(wav::read_wav(dir.join("noise.wav"))?)
    } else {
        None
    };
    let truth = manifest.to_truth();
    let fs = manifest.sample_rate;
    let mut references = Vec::with_capacity(manifest.placements.len());
    for (i, (p, t)) in manifest.placements.iter().zip(&manifest.truth).enumerate() {
        let name = format!("refs/{}", ref_file_name(i, &p.utt));
        let image = wav::read_wav(dir.join(&name))
            .with_context(|| format!("missing reference {name}"))?;
        references.push(UtteranceImage {
            placement_index: i,
            utterance_id: p.utt.clone(),
            start_sample: (t.start * fs as f64).round() as usize,
            source_len: ((t.end - t.start) * fs as f64).round() as usize,
            image,
        });
    }
    Ok((manifest, RenderedSession { mixture, truth, references, noise }))
}

/// Session subdirectories of a suite root (anything holding a manifest).
pub fn discover_sessions(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if root.join("manifest.json").exists() {
        out.push(root.to_path_buf());
        return Ok(out);
    }
    for entry in std::fs::read_dir(root)
        .with_context(|| format!("reading suite root {}", root.display()))?
    {
        let path = entry?.path();
        if path.is_dir() && path.join("manifest.json").exists() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("{}: no session manifests found", root.display());
    }
    Ok(out)
}
