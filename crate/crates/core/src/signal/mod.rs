//! Sampled-audio containers, STFT/iSTFT with perfect-reconstruction windows,
//! and basic signal metrics.
//!
//! Everything in the toolkit runs at 16 kHz; the types carry the rate
//! explicitly so file I/O can verify it at ingestion.

pub mod wav;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Native rate of the toolkit. Pools and session audio are rejected at
/// ingestion if they differ.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Ceiling (and symmetric floor) for SI-SNR when the residual is numerically
/// zero (or the projection is).
pub const SI_SNR_CAP_DB: f64 = 60.0;

/// Multichannel sampled audio. Channels are rows; all channels share one
/// length and sample rate, and every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("waveform contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Self {
        Self { samples: Array2::zeros((channels, len)), sample_rate }
    }

    pub fn from_mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let n = samples.len();
        Self::new(Array2::from_shape_vec((1, n), samples).expect("shape"), sample_rate)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0 || self.samples.nrows() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    /// Mutable access for in-place mixing; callers keep values finite.
    pub fn samples_mut(&mut self) -> &mut Array2<f64> {
        &mut self.samples
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, f64> {
        self.samples.row(c)
    }

    /// Copy of one channel as a mono waveform.
    pub fn mono(&self, c: usize) -> Waveform {
        Waveform {
            samples: self.samples.row(c).to_owned().insert_axis(ndarray::Axis(0)),
            sample_rate: self.sample_rate,
        }
    }

    /// Copy of a sample range across all channels. The range is clamped to
    /// the waveform length.
    pub fn slice_range(&self, start: usize, end: usize) -> Waveform {
        let end = end.min(self.len());
        let start = start.min(end);
        Waveform {
            samples: self.samples.slice(ndarray::s![.., start..end]).to_owned(),
            sample_rate: self.sample_rate,
        }
    }

    /// Keep only the listed channels, in the listed order.
    pub fn select_channels(&self, idx: &[usize]) -> Result<Waveform> {
        for &c in idx {
            if c >= self.channels() {
                return Err(Error::InvalidInput(format!(
                    "channel {} out of range (have {})",
                    c,
                    self.channels()
                )));
            }
        }
        let mut out = Array2::zeros((idx.len(), self.len()));
        for (r, &c) in idx.iter().enumerate() {
            out.row_mut(r).assign(&self.samples.row(c));
        }
        Ok(Waveform { samples: out, sample_rate: self.sample_rate })
    }
}

/// Analysis/synthesis taper identifiers. Both choices form a
/// constant-overlap-add pair with themselves at any hop that divides the
/// window length (reconstruction divides by the accumulated window product,
/// so COLA holds numerically rather than by closed form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowKind {
    /// Square-root of the periodic Hann window; the usual choice for
    /// mask-based pipelines (identical analysis and synthesis tapers).
    SqrtHann,
    /// Periodic Hann window.
    Hann,
}

/// STFT frame layout: `window_length` samples per frame, advancing by
/// `hop_length`. Signals are reflect-padded by half a window at both ends so
/// every sample is covered by a full complement of frames.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop_length: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 32 ms window, 16 ms hop at 16 kHz, square-root-Hann tapers.
    fn default() -> Self {
        Self { window_length: 512, hop_length: 256, window: WindowKind::SqrtHann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.hop_length == 0 {
            return Err(Error::InvalidConfig("window and hop must be positive".into()));
        }
        if self.window_length % 2 != 0 {
            return Err(Error::InvalidConfig("window_length must be even".into()));
        }
        if self.hop_length > self.window_length {
            return Err(Error::InvalidConfig(format!(
                "hop {} exceeds window {}",
                self.hop_length, self.window_length
            )));
        }
        if self.window_length % self.hop_length != 0 {
            return Err(Error::InvalidConfig(format!(
                "hop {} must divide window {}",
                self.hop_length, self.window_length
            )));
        }
        Ok(())
    }

    /// One-sided bin count.
    pub fn bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop_length) + 1
    }

    /// Start of frame `t` in original-signal coordinates (may be negative
    /// inside the left pad).
    pub fn frame_start(&self, t: usize) -> isize {
        t as isize * self.hop_length as isize - (self.window_length / 2) as isize
    }

    /// Frame index whose window is centered nearest to sample `n`.
    pub fn frame_at_sample(&self, n: usize) -> usize {
        n / self.hop_length
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize, sample_rate: u32) -> f64 {
        k as f64 * sample_rate as f64 / self.window_length as f64
    }

    fn taper(&self) -> Vec<f64> {
        let w = self.window_length;
        let hann =
            |n: usize| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / w as f64).cos());
        match self.window {
            WindowKind::SqrtHann => (0..w).map(|n| hann(n).sqrt()).collect(),
            WindowKind::Hann => (0..w).map(hann).collect(),
        }
    }
}

/// Complex one-sided time-frequency tensor, `(channels, frames, bins)`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    bins: Array3<Complex64>,
    config: StftConfig,
    sample_rate: u32,
    source_len: usize,
}

impl Spectrogram {
    /// Assemble from raw parts, checking shape consistency.
    pub fn from_parts(
        bins: Array3<Complex64>,
        config: StftConfig,
        sample_rate: u32,
        source_len: usize,
    ) -> Result<Self> {
        config.validate()?;
        let (_, frames, nb) = bins.dim();
        if nb != config.bins() || frames != config.frame_count(source_len) {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "frames={} bins={}",
                    config.frame_count(source_len),
                    config.bins()
                ),
                actual: format!("frames={frames} bins={nb}"),
            });
        }
        Ok(Self { bins, config, sample_rate, source_len })
    }

    pub fn bins(&self) -> &Array3<Complex64> {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.bins
    }

    pub fn channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn bin_count(&self) -> usize {
        self.bins.dim().2
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// One channel's `(frames, bins)` plane.
    pub fn channel(&self, c: usize) -> ArrayView2<'_, Complex64> {
        self.bins.index_axis(ndarray::Axis(0), c)
    }

    /// New single-channel spectrogram from `channel(c)` scaled bin-wise by a
    /// real mask.
    pub fn masked_channel(&self, c: usize, mask: ArrayView2<'_, f64>) -> Result<Spectrogram> {
        let plane = self.channel(c);
        if mask.dim() != plane.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", plane.dim()),
                actual: format!("{:?}", mask.dim()),
            });
        }
        let mut out = Array3::zeros((1, self.frames(), self.bin_count()));
        {
            let mut p = out.index_axis_mut(ndarray::Axis(0), 0);
            ndarray::Zip::from(&mut p).and(&plane).and(&mask).for_each(|o, &x, &m| *o = x * m);
        }
        Spectrogram::from_parts(out, self.config, self.sample_rate, self.source_len)
    }
}

/// Reflect (mirror-without-edge-repeat) index for padding; bounces for pads
/// longer than the signal.
fn mirror_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Short-time Fourier transform with half-window reflect padding.
///
/// Returns the one-sided spectrum per frame; every input sample is covered by
/// a full set of overlapping frames, so [`istft`] reconstructs the original
/// length exactly.
pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidInput("stft input is empty".into()));
    }
    let w = cfg.window_length;
    let n = x.len();
    let frames = cfg.frame_count(n);
    let taper = cfg.taper();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(w);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    let mut out = Array3::zeros((x.channels(), frames, cfg.bins()));
    let mut buf = vec![Complex64::default(); w];
    for c in 0..x.channels() {
        let ch = x.channel(c);
        let ch = ch.as_slice().expect("contiguous channel");
        for t in 0..frames {
            let start = cfg.frame_start(t);
            for (j, b) in buf.iter_mut().enumerate() {
                let idx = mirror_index(start + j as isize, n);
                *b = Complex64::new(ch[idx] * taper[j], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, v) in out.slice_mut(ndarray::s![c, t, ..]).iter_mut().enumerate() {
                *v = buf[k];
            }
        }
    }
    Spectrogram::from_parts(out, *cfg, x.sample_rate(), n)
}

/// Inverse STFT by windowed overlap-add, normalized by the accumulated
/// analysis-times-synthesis window so the round trip is exact up to rounding.
pub fn istft(s: &Spectrogram) -> Result<Waveform> {
    let cfg = s.config();
    cfg.validate()?;
    let w = cfg.window_length;
    let hop = cfg.hop_length;
    let n = s.source_len();
    let frames = s.frames();
    if s.bin_count() != cfg.bins() || frames != cfg.frame_count(n) {
        return Err(Error::ShapeMismatch {
            expected: format!("frames={} bins={}", cfg.frame_count(n), cfg.bins()),
            actual: format!("frames={} bins={}", frames, s.bin_count()),
        });
    }
    let taper = cfg.taper();
    let padded_len = (frames - 1) * hop + w;
    let pad_left = w / 2;

    // Window-product normalization, shared by all channels.
    let mut wsum = vec![0.0f64; padded_len];
    for t in 0..frames {
        let off = t * hop;
        for j in 0..w {
            wsum[off + j] += taper[j] * taper[j];
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(w);
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];

    let mut out = Array2::zeros((s.channels(), n));
    let mut buf = vec![Complex64::default(); w];
    let inv_w = 1.0 / w as f64;
    for c in 0..s.channels() {
        let mut acc = vec![0.0f64; padded_len];
        for t in 0..frames {
            let plane = s.bins().slice(ndarray::s![c, t, ..]);
            buf[0] = plane[0];
            buf[w / 2] = plane[w / 2];
            for k in 1..w / 2 {
                buf[k] = plane[k];
                buf[w - k] = plane[k].conj();
            }
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let off = t * hop;
            for j in 0..w {
                acc[off + j] += buf[j].re * inv_w * taper[j];
            }
        }
        for (i, o) in out.row_mut(c).iter_mut().enumerate() {
            let d = wsum[pad_left + i];
            *o = if d > 1e-12 { acc[pad_left + i] / d } else { 0.0 };
        }
    }
    Waveform::new(out, s.sample_rate())
}

/// Scale-invariant signal-to-noise ratio in dB, capped to
/// `±`[`SI_SNR_CAP_DB`] at the degenerate ends.
///
/// Both inputs are mean-removed, the estimate is projected onto the
/// reference, and the ratio of projection to residual energy is returned.
pub fn si_snr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    if estimate.channels() != 1 || reference.channels() != 1 {
        return Err(Error::InvalidInput("si_snr expects single-channel inputs".into()));
    }
    if estimate.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("len={}", reference.len()),
            actual: format!("len={}", estimate.len()),
        });
    }
    if reference.len() == 0 {
        return Err(Error::InvalidInput("si_snr inputs are empty".into()));
    }
    let e_mean = estimate.channel(0).mean().unwrap();
    let r_mean = reference.channel(0).mean().unwrap();
    let mut dot = 0.0;
    let mut r_energy = 0.0;
    for (&e, &r) in estimate.channel(0).iter().zip(reference.channel(0).iter()) {
        let (e, r) = (e - e_mean, r - r_mean);
        dot += e * r;
        r_energy += r * r;
    }
    if r_energy == 0.0 {
        return Err(Error::InvalidInput("si_snr reference is all zero".into()));
    }
    let alpha = dot / r_energy;
    let mut target_energy = 0.0;
    let mut resid_energy = 0.0;
    for (&e, &r) in estimate.channel(0).iter().zip(reference.channel(0).iter()) {
        let (e, r) = (e - e_mean, r - r_mean);
        let t = alpha * r;
        target_energy += t * t;
        resid_energy += (e - t) * (e - t);
    }
    if target_energy == 0.0 {
        return Ok(-SI_SNR_CAP_DB);
    }
    if resid_energy == 0.0 {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (target_energy / resid_energy).log10()).clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn rand_wave(rng: &mut SmallRng, channels: usize, len: usize) -> Waveform {
        let data: Vec<f64> = (0..channels * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Waveform::new(Array2::from_shape_vec((channels, len), data).unwrap(), 16_000).unwrap()
    }

    fn rel_rms(a: &Waveform, b: &Waveform) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in a.samples().iter().zip(b.samples().iter()) {
            num += (x - y) * (x - y);
            den += y * y;
        }
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn zero_input_gives_zero_spectrogram() {
        let x = Waveform::zeros(1, 16_000, 16_000);
        let s = stft(&x, &StftConfig::default()).unwrap();
        assert!(s.bins().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sine_peaks_at_expected_bin_and_matches_direct_dft() {
        // 1 kHz at 16 kHz with a 512 window puts the peak at bin 32.
        let n = 16_000;
        let x: Vec<f64> =
            (0..n).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin()).collect();
        let wave = Waveform::from_mono(x.clone(), 16_000).unwrap();
        let cfg = StftConfig::default();
        let s = stft(&wave, &cfg).unwrap();

        // Direct DFT oracle on one interior tapered frame.
        let t = 4;
        let start = cfg.frame_start(t);
        assert!(start >= 0);
        let taper = cfg.taper();
        let mut direct = vec![Complex64::default(); cfg.bins()];
        for (k, d) in direct.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for j in 0..cfg.window_length {
                let phase = -2.0 * std::f64::consts::PI * (k * j) as f64 / cfg.window_length as f64;
                acc += Complex64::from_polar(x[start as usize + j] * taper[j], phase);
            }
            *d = acc;
        }
        let frame = s.bins().slice(ndarray::s![0, t, ..]);
        let scale: f64 = direct.iter().map(|v| v.norm()).sum();
        let err: f64 = frame.iter().zip(&direct).map(|(a, b)| (a - b).norm()).sum();
        assert!(err / scale < 1e-9, "fft/direct mismatch {err}");

        for t in 2..s.frames() - 2 {
            let frame = s.bins().slice(ndarray::s![0, t, ..]);
            let peak = frame.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
            assert_eq!(peak, 32, "frame {t}");
        }
    }

    #[test]
    fn round_trip_is_near_exact() {
        let mut rng = SmallRng::seed_from_u64(7);
        for len in [16_000usize, 12_345, 777, 40_000] {
            let x = rand_wave(&mut rng, 2, len);
            let y = istft(&stft(&x, &StftConfig::default()).unwrap()).unwrap();
            assert_eq!(y.len(), x.len());
            assert!(rel_rms(&y, &x) <= 1e-6, "len {len}: {}", rel_rms(&y, &x));
        }
    }

    #[test]
    fn round_trip_hann_window_and_other_hops() {
        let mut rng = SmallRng::seed_from_u64(8);
        let x = rand_wave(&mut rng, 1, 10_000);
        for cfg in [
            StftConfig { window_length: 512, hop_length: 128, window: WindowKind::SqrtHann },
            StftConfig { window_length: 512, hop_length: 256, window: WindowKind::Hann },
            StftConfig { window_length: 1024, hop_length: 256, window: WindowKind::SqrtHann },
            StftConfig { window_length: 320, hop_length: 160, window: WindowKind::SqrtHann },
        ] {
            let y = istft(&stft(&x, &cfg).unwrap()).unwrap();
            assert!(rel_rms(&y, &x) <= 1e-6, "{cfg:?}");
        }
    }

    #[test]
    fn stft_is_linear() {
        let mut rng = SmallRng::seed_from_u64(9);
        let x = rand_wave(&mut rng, 1, 5000);
        let y = rand_wave(&mut rng, 1, 5000);
        let (a, b) = (0.7, -1.3);
        let mixed = Waveform::new(a * x.samples() + b * y.samples(), 16_000).unwrap();
        let cfg = StftConfig::default();
        let sm = stft(&mixed, &cfg).unwrap();
        let sx = stft(&x, &cfg).unwrap();
        let sy = stft(&y, &cfg).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for ((m, x), y) in sm.bins().iter().zip(sx.bins().iter()).zip(sy.bins().iter()) {
            num += (m - (a * x + b * y)).norm_sqr();
            den += m.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-9);
    }

    #[test]
    fn masked_round_trip_with_ones_equals_unmasked() {
        let mut rng = SmallRng::seed_from_u64(10);
        let x = rand_wave(&mut rng, 1, 8000);
        let s = stft(&x, &StftConfig::default()).unwrap();
        let ones = Array2::from_elem((s.frames(), s.bin_count()), 1.0);
        let masked = s.masked_channel(0, ones.view()).unwrap();
        let y0 = istft(&s).unwrap();
        let y1 = istft(&masked).unwrap();
        assert!(rel_rms(&y1, &y0) < 1e-12);
    }

    #[test]
    fn istft_zero_spectrogram_is_zero() {
        let cfg = StftConfig::default();
        let frames = cfg.frame_count(1000);
        let s = Spectrogram::from_parts(
            ndarray::Array3::zeros((1, frames, cfg.bins())),
            cfg,
            16_000,
            1000,
        )
        .unwrap();
        let y = istft(&s).unwrap();
        assert!(y.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn istft_rejects_inconsistent_shape() {
        let cfg = StftConfig::default();
        let err = Spectrogram::from_parts(ndarray::Array3::zeros((1, 10, 100)), cfg, 16_000, 1000);
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn stft_rejects_bad_config_and_empty_input() {
        let bad = StftConfig { window_length: 256, hop_length: 512, window: WindowKind::SqrtHann };
        let x = Waveform::zeros(1, 100, 16_000);
        assert!(matches!(stft(&x, &bad), Err(Error::InvalidConfig(_))));
        let empty = Waveform::zeros(1, 0, 16_000);
        assert!(matches!(stft(&empty, &StftConfig::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn si_snr_identity_hits_cap() {
        let mut rng = SmallRng::seed_from_u64(11);
        let x = rand_wave(&mut rng, 1, 4000);
        assert_eq!(si_snr(&x, &x).unwrap(), SI_SNR_CAP_DB);
    }

    #[test]
    fn si_snr_is_scale_invariant() {
        let mut rng = SmallRng::seed_from_u64(12);
        let x = rand_wave(&mut rng, 1, 4000);
        let mut noisy = x.clone();
        for (i, v) in noisy.samples_mut().iter_mut().enumerate() {
            *v += 0.05 * ((i as f64 * 0.37).sin());
        }
        let base = si_snr(&noisy, &x).unwrap();
        for c in [2.0, -0.5, 1e3] {
            let scaled = Waveform::new(noisy.samples() * c, 16_000).unwrap();
            assert!((si_snr(&scaled, &x).unwrap() - base).abs() < 1e-9, "c={c}");
        }
    }

    #[test]
    fn si_snr_orthogonal_noise_at_one_tenth_energy_is_ten_db() {
        // Build s and n zero-mean and exactly orthogonal, with
        // ||n||^2 = ||s||^2 / 10, so the ratio is exactly 10 dB.
        let mut rng = SmallRng::seed_from_u64(13);
        let n_samps = 4096;
        let mut s: Vec<f64> = (0..n_samps).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = s.iter().sum::<f64>() / n_samps as f64;
        s.iter_mut().for_each(|v| *v -= mean);
        let mut n: Vec<f64> = (0..n_samps).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = n.iter().sum::<f64>() / n_samps as f64;
        n.iter_mut().for_each(|v| *v -= mean);
        // Gram-Schmidt against s, then rescale.
        let se: f64 = s.iter().map(|v| v * v).sum();
        let dot: f64 = s.iter().zip(&n).map(|(a, b)| a * b).sum();
        n.iter_mut().zip(&s).for_each(|(v, &sv)| *v -= dot / se * sv);
        let ne: f64 = n.iter().map(|v| v * v).sum();
        let scale = (se / (10.0 * ne)).sqrt();
        n.iter_mut().for_each(|v| *v *= scale);

        let est: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + b).collect();
        let got = si_snr(
            &Waveform::from_mono(est, 16_000).unwrap(),
            &Waveform::from_mono(s, 16_000).unwrap(),
        )
        .unwrap();
        assert!((got - 10.0).abs() < 1e-6, "{got}");
    }

    #[test]
    fn si_snr_rejects_zero_reference_and_length_mismatch() {
        let x = Waveform::zeros(1, 100, 16_000);
        let mut y = Waveform::zeros(1, 100, 16_000);
        y.samples_mut()[[0, 3]] = 1.0;
        assert!(si_snr(&y, &x).is_err());
        let z = Waveform::zeros(1, 99, 16_000);
        assert!(si_snr(&z, &y).is_err());
    }

    #[test]
    fn mirror_index_bounces() {
        let n = 5;
        let seq: Vec<usize> = (-6..12).map(|i| mirror_index(i, n)).collect();
        assert_eq!(seq, vec![2, 3, 4, 3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0, 1, 2, 3]);
        assert_eq!(mirror_index(-1, 1), 0);
    }
}
