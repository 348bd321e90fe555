//! Mask-based adaptive MVDR beamforming: per-frequency spatial covariance
//! estimation from masked spectrograms, steering-vector extraction via power
//! iteration, weight computation with diagonal loading, and filtering.

use ndarray::{Array1, Array2, ArrayView2, ArrayView3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{istft, Spectrogram, Waveform};

/// Knobs for the MVDR recipe. Defaults follow common mask-based practice:
/// noise statistics include the competing speaker's mask, reference channel
/// is the center mic, diagonal loading starts at 1e-6 of the average
/// eigenvalue and escalates tenfold up to 1e-2 if the solve stays singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvdrConfig {
    pub diagonal_loading: f64,
    pub max_loading: f64,
    /// Add the other speech mask into each stream's noise statistics.
    pub include_other_speaker_in_noise: bool,
    pub ref_channel: usize,
}

impl Default for MvdrConfig {
    fn default() -> Self {
        Self {
            diagonal_loading: 1e-6,
            max_loading: 1e-2,
            include_other_speaker_in_noise: true,
            ref_channel: 0,
        }
    }
}

/// Per-frequency Hermitian spatial covariance matrices with their
/// accumulated mask weight. Frequencies whose mask weight was (numerically)
/// zero are flagged and filled with the identity.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    pub mats: Vec<Array2<Complex64>>,
    pub mask_weight: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl SpatialCovariance {
    pub fn bins(&self) -> usize {
        self.mats.len()
    }

    pub fn mics(&self) -> usize {
        self.mats.first().map(|m| m.nrows()).unwrap_or(0)
    }
}

/// Mask-weighted spatial covariance over the given frames:
/// `Phi(f) = sum_t m(t,f) x(t,f) x(t,f)^H / sum_t m(t,f)`.
///
/// `mix` is a `(channels, frames, bins)` view and `mask` `(frames, bins)`.
pub fn accumulate_scm(
    mix: ArrayView3<'_, Complex64>,
    mask: ArrayView2<'_, f64>,
) -> Result<SpatialCovariance> {
    let (m, frames, bins) = mix.dim();
    if mask.dim() != (frames, bins) {
        return Err(Error::ShapeMismatch {
            expected: format!("mask ({frames}, {bins})"),
            actual: format!("{:?}", mask.dim()),
        });
    }
    if mask.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidInput("mask values outside [0, 1]".into()));
    }
    let results: Vec<(Array2<Complex64>, f64, bool)> = (0..bins)
        .into_par_iter()
        .map(|f| {
            let mut acc = Array2::<Complex64>::zeros((m, m));
            let mut weight = 0.0f64;
            let mut x = vec![Complex64::default(); m];
            for t in 0..frames {
                let w = mask[[t, f]];
                if w == 0.0 {
                    continue;
                }
                for (c, xv) in x.iter_mut().enumerate() {
                    *xv = mix[[c, t, f]];
                }
                weight += w;
                for i in 0..m {
                    let xi = x[i] * w;
                    for j in i..m {
                        acc[[i, j]] += xi * x[j].conj();
                    }
                }
            }
            if weight <= 1e-12 {
                return (Array2::eye(m), 0.0, true);
            }
            let inv = 1.0 / weight;
            for i in 0..m {
                for j in i..m {
                    let v = acc[[i, j]] * inv;
                    acc[[i, j]] = v;
                    if i != j {
                        acc[[j, i]] = v.conj();
                    } else {
                        acc[[i, j]] = Complex64::new(v.re, 0.0);
                    }
                }
            }
            (acc, weight, false)
        })
        .collect();
    let mut mats = Vec::with_capacity(bins);
    let mut mask_weight = Vec::with_capacity(bins);
    let mut flagged = Vec::with_capacity(bins);
    for (a, w, fl) in results {
        mats.push(a);
        mask_weight.push(w);
        flagged.push(fl);
    }
    Ok(SpatialCovariance { mats, mask_weight, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringFlag {
    Converged,
    /// No dominant direction (eigenvalue spread ~ 1); vector is arbitrary.
    Isotropic,
    /// Power iteration did not converge; largest-column heuristic used.
    Fallback,
}

/// Per-frequency unit steering vectors, phase-normalized so the reference
/// channel component is real and non-negative.
#[derive(Debug, Clone)]
pub struct SteeringVectors {
    pub vectors: Vec<Array1<Complex64>>,
    pub flags: Vec<SteeringFlag>,
    pub ref_channel: usize,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200;

/// Principal eigenvector of each frequency's SCM by power iteration.
pub fn steering_vector(scm: &SpatialCovariance, ref_channel: usize) -> Result<SteeringVectors> {
    let m = scm.mics();
    if ref_channel >= m {
        return Err(Error::InvalidInput(format!("reference channel {ref_channel} out of range")));
    }
    let per_bin: Vec<(Array1<Complex64>, SteeringFlag)> = scm
        .mats
        .par_iter()
        .map(|phi| {
            let (v, flag) = principal_eigenvector(phi);
            (phase_normalize(v, ref_channel), flag)
        })
        .collect();
    let mut vectors = Vec::with_capacity(per_bin.len());
    let mut flags = Vec::with_capacity(per_bin.len());
    for (v, f) in per_bin {
        vectors.push(v);
        flags.push(f);
    }
    Ok(SteeringVectors { vectors, flags, ref_channel })
}

fn matvec(a: &Array2<Complex64>, v: &Array1<Complex64>) -> Array1<Complex64> {
    let m = a.nrows();
    let mut out = Array1::zeros(m);
    for i in 0..m {
        let mut acc = Complex64::default();
        for j in 0..m {
            acc += a[[i, j]] * v[j];
        }
        out[i] = acc;
    }
    out
}

fn norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn principal_eigenvector(phi: &Array2<Complex64>) -> (Array1<Complex64>, SteeringFlag) {
    let m = phi.nrows();
    // Deterministic start: the column with the largest norm.
    let col_norms: Vec<f64> = (0..m).map(|j| phi.column(j).iter().map(|x| x.norm_sqr()).sum()).collect();
    let start_col =
        col_norms.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap_or(0);
    let fallback = || {
        let mut v: Array1<Complex64> = phi.column(start_col).to_owned();
        let n = norm(&v);
        if n > 0.0 {
            v.mapv_inplace(|x| x / n);
        } else {
            v[0] = Complex64::new(1.0, 0.0);
        }
        v
    };
    let trace: f64 = (0..m).map(|i| phi[[i, i]].re).sum();
    if trace <= 0.0 {
        return (fallback(), SteeringFlag::Fallback);
    }

    let mut v = fallback();
    for _ in 0..POWER_MAX_ITERS {
        let mut av = matvec(phi, &v);
        let n = norm(&av);
        if n <= 1e-300 {
            return (fallback(), SteeringFlag::Fallback);
        }
        av.mapv_inplace(|x| x / n);
        // Align phases before comparing iterates.
        let dot: Complex64 = v.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum();
        let phase = if dot.norm() > 0.0 { dot / dot.norm() } else { Complex64::new(1.0, 0.0) };
        let diff: f64 = v
            .iter()
            .zip(av.iter())
            .map(|(a, b)| (b - a * phase).norm_sqr())
            .sum::<f64>()
            .sqrt();
        v = av;
        if diff < POWER_TOL {
            // Rayleigh quotient against the mean eigenvalue detects the
            // no-dominant-direction case.
            let av = matvec(phi, &v);
            let lambda: Complex64 = v.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum();
            let mean_eig = trace / m as f64;
            let flag = if (lambda.re - mean_eig).abs() <= 1e-9 * trace.max(1e-300) {
                SteeringFlag::Isotropic
            } else {
                SteeringFlag::Converged
            };
            return (v, flag);
        }
    }
    (fallback(), SteeringFlag::Fallback)
}

fn phase_normalize(mut v: Array1<Complex64>, ref_channel: usize) -> Array1<Complex64> {
    let r = v[ref_channel];
    if r.norm() > 1e-12 {
        let rot = r.conj() / r.norm();
        v.mapv_inplace(|x| x * rot);
        v[ref_channel] = Complex64::new(v[ref_channel].re, 0.0);
    }
    v
}

/// Per-frequency MVDR weights. `weights` satisfy the distortionless
/// constraint `w^H h = 1` against the stored steering vectors; `ref_gains`
/// rescale the output to the reference channel's image when filtering.
#[derive(Debug, Clone)]
pub struct MvdrWeights {
    pub weights: Vec<Array1<Complex64>>,
    pub steering: Vec<Array1<Complex64>>,
    pub ref_gains: Vec<f64>,
    pub ref_channel: usize,
    /// Diagonal loading actually used per frequency.
    pub loading_used: Vec<f64>,
    /// Frequencies where loading escalation hit its cap.
    pub flagged: Vec<bool>,
}

impl MvdrWeights {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }
}

/// `w(f) = Phi_n(f)^{-1} h(f) / (h(f)^H Phi_n(f)^{-1} h(f))` with diagonal
/// loading `delta * trace(Phi)/M`, escalated tenfold (up to `max_loading`)
/// when the solve is singular or the constraint comes out off.
pub fn mvdr_weights(
    noise_scm: &SpatialCovariance,
    steering: &SteeringVectors,
    cfg: &MvdrConfig,
) -> Result<MvdrWeights> {
    let m = noise_scm.mics();
    if steering.vectors.len() != noise_scm.bins() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} steering vectors", noise_scm.bins()),
            actual: format!("{}", steering.vectors.len()),
        });
    }
    if cfg.ref_channel >= m {
        return Err(Error::InvalidInput(format!("reference channel {} out of range", cfg.ref_channel)));
    }
    let per_bin: Vec<(Array1<Complex64>, f64, bool)> = noise_scm
        .mats
        .par_iter()
        .zip(steering.vectors.par_iter())
        .map(|(phi, h)| solve_one_bin(phi, h, cfg))
        .collect();

    let mut weights = Vec::with_capacity(per_bin.len());
    let mut loading_used = Vec::with_capacity(per_bin.len());
    let mut flagged = Vec::with_capacity(per_bin.len());
    for (w, l, fl) in per_bin {
        weights.push(w);
        loading_used.push(l);
        flagged.push(fl);
    }
    let ref_gains = steering.vectors.iter().map(|h| h[cfg.ref_channel].re).collect();
    Ok(MvdrWeights {
        weights,
        steering: steering.vectors.clone(),
        ref_gains,
        ref_channel: cfg.ref_channel,
        loading_used,
        flagged,
    })
}

fn solve_one_bin(
    phi: &Array2<Complex64>,
    h: &Array1<Complex64>,
    cfg: &MvdrConfig,
) -> (Array1<Complex64>, f64, bool) {
    let m = phi.nrows();
    let trace: f64 = (0..m).map(|i| phi[[i, i]].re).sum();
    let base = (trace / m as f64).max(1e-300);
    let mut delta = cfg.diagonal_loading;
    loop {
        let mut loaded = phi.clone();
        for i in 0..m {
            loaded[[i, i]] += Complex64::new(delta * base, 0.0);
        }
        if let Some(x) = solve_linear(&loaded, h) {
            let denom: Complex64 = h.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
            if denom.norm() > 1e-30 {
                let w = x.mapv(|v| v / denom);
                let constraint: Complex64 =
                    w.iter().zip(h.iter()).map(|(a, b)| a.conj() * b).sum();
                if w.iter().all(|v| v.is_finite()) && (constraint - 1.0).norm() <= 1e-6 {
                    return (w, delta, false);
                }
            }
        }
        if delta >= cfg.max_loading {
            // Give up: distortionless fallback w = h / ||h||^2.
            let hn: f64 = h.iter().map(|v| v.norm_sqr()).sum();
            let w = h.mapv(|v| v / hn.max(1e-300));
            return (w, delta, true);
        }
        delta *= 10.0;
    }
}

/// Gaussian elimination with partial pivoting for small complex systems.
fn solve_linear(a: &Array2<Complex64>, b: &Array1<Complex64>) -> Option<Array1<Complex64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, m[[r, col]].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_mag < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m[[col, j]];
                m[[col, j]] = m[[pivot_row, j]];
                m[[pivot_row, j]] = tmp;
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[[col, col]];
        for r in col + 1..n {
            let factor = m[[r, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m[[col, j]];
                m[[r, j]] -= factor * v;
            }
            let v = rhs[col];
            rhs[r] -= factor * v;
        }
    }
    let mut x = Array1::<Complex64>::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc -= m[[row, j]] * x[j];
        }
        x[row] = acc / m[[row, row]];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Filter a multichannel spectrogram: `y(t,f) = g(f) * w(f)^H x(t,f)`,
/// written into `out` for frames `[t0, t1)`.
pub(crate) fn beamform_frames(
    mix: &Spectrogram,
    w: &MvdrWeights,
    t0: usize,
    t1: usize,
    out: &mut Array2<Complex64>,
) {
    let m = mix.channels();
    let bins = mix.bin_count();
    for t in t0..t1 {
        for f in 0..bins {
            let mut acc = Complex64::default();
            let wf = &w.weights[f];
            for c in 0..m {
                acc += wf[c].conj() * mix.bins()[[c, t, f]];
            }
            out[[t, f]] = acc * w.ref_gains[f];
        }
    }
}

/// Apply MVDR weights to the whole spectrogram and reconstruct the waveform.
pub fn apply_beamformer(mix: &Spectrogram, w: &MvdrWeights) -> Result<Waveform> {
    if w.bins() != mix.bin_count() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", mix.bin_count()),
            actual: format!("{}", w.bins()),
        });
    }
    if w.weights.first().map(|v| v.len()) != Some(mix.channels()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} channels", mix.channels()),
            actual: format!("{:?}", w.weights.first().map(|v| v.len())),
        });
    }
    let mut plane = Array2::zeros((mix.frames(), mix.bin_count()));
    beamform_frames(mix, w, 0, mix.frames(), &mut plane);
    let spec = Spectrogram::from_parts(
        plane.insert_axis(ndarray::Axis(0)),
        mix.config(),
        mix.sample_rate(),
        mix.source_len(),
    )?;
    istft(&spec)
}
