//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers once its assertions hold.
//!
//! Criteria 7 and 8 share one desk-scale suite evaluation (five rendered
//! ten-minute mini sessions), built lazily behind a lock.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use css_core::beamform::{
    accumulate_scm, mvdr_weights, steering_vector, MvdrConfig, SpatialCovariance, SteeringVectors,
    SteeringFlag,
};
use css_core::eval::{median, signal_eval, utterance_eval, wer};
use css_core::pipeline::{
    align_permutation, plan_chunks, run_css, stitch, ChunkConfig, CssOptions, MaskSet, OracleIrm,
    OutputMode, IDENTITY, SWAP,
};
use css_core::room::{image_method_rir, isotropic_noise, ArrayGeometry, RoomSpec};
use css_core::signal::{istft, si_snr, stft, StftConfig, Waveform};
use css_core::sim::{
    measure_overlap, plan_session, plan_suite, render::draw_loudspeaker_positions, render_session,
    synthetic_pool, Condition, OverlapSpec, RenderOptions, RenderedSession, SuiteConfig,
};

fn pass(criterion: u32, details: &str) {
    println!("ACCEPTANCE C{criterion} PASS - {details}");
}

// ---------------------------------------------------------------------------
// C1: STFT round-trip accuracy and speed.
// ---------------------------------------------------------------------------
#[test]
fn c01_stft_round_trip() {
    let mut rng = SmallRng::seed_from_u64(101);
    let cfg = StftConfig::default();
    let mut worst = 0.0f64;
    let start = Instant::now();
    for _ in 0..100 {
        let len = rng.random_range(16_000..80_000);
        let x = Waveform::from_mono(
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            16_000,
        )
        .unwrap();
        let y = istft(&stft(&x, &cfg).unwrap()).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in y.samples().iter().zip(x.samples().iter()) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        worst = worst.max((num / den).sqrt());
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst <= 1e-6, "worst relative RMS {worst:e}");
    assert!(elapsed < 1.0, "round-trip batch took {elapsed:.2} s");
    pass(1, &format!("100 signals, worst relative RMS {worst:.2e}, {elapsed:.2} s total"));
}

// ---------------------------------------------------------------------------
// C2: image method direct-path delay and Schroeder-fitted T60.
// ---------------------------------------------------------------------------

/// Schroeder backward integration with a -5..-25 dB linear fit.
fn schroeder_t60(h: &[f64], fs: f64) -> f64 {
    let mut edc: Vec<f64> = h
        .iter()
        .rev()
        .scan(0.0, |acc, &v| {
            *acc += v * v;
            Some(*acc)
        })
        .collect();
    edc.reverse();
    let total = edc[0];
    let pts: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .map(|(i, &e)| (i as f64 / fs, 10.0 * (e / total).max(1e-30).log10()))
        .filter(|&(_, db)| (-25.0..=-5.0).contains(&db))
        .collect();
    assert!(pts.len() > 10, "decay fit needs more points");
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    -60.0 / slope
}

#[test]
fn c02_image_method_delay_and_t60() {
    let mut rng = SmallRng::seed_from_u64(202);
    let dims = [7.0f64, 6.0, 3.0];
    let mut checked = 0;
    while checked < 50 {
        let p = |l: f64, rng: &mut SmallRng| rng.random_range(0.4..l - 0.4);
        let src = [p(dims[0], &mut rng), p(dims[1], &mut rng), p(dims[2], &mut rng)];
        let mic = [p(dims[0], &mut rng), p(dims[1], &mut rng), p(dims[2], &mut rng)];
        let dist = src.iter().zip(&mic).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist < 0.25 {
            continue;
        }
        let room = RoomSpec::new(dims, 0.0).unwrap();
        let geom = ArrayGeometry::new(vec![mic]).unwrap();
        let rir = image_method_rir(&room, src, &geom, None, 16_000).unwrap();
        let h = rir.taps().row(0);
        let peak = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0 as i64;
        let expected = (dist / 343.0 * 16_000.0).round() as i64;
        assert!((peak - expected).abs() <= 1, "peak {peak} vs analytic {expected}");
        checked += 1;
    }

    let mut fits = Vec::new();
    for t60 in [0.15, 0.3, 0.6] {
        let room = RoomSpec::new(dims, t60).unwrap();
        let geom = ArrayGeometry::new(vec![[2.0, 2.5, 1.4]]).unwrap();
        let rir = image_method_rir(&room, [5.0, 3.6, 1.7], &geom, None, 16_000).unwrap();
        let fit = schroeder_t60(rir.taps().row(0).as_slice().unwrap(), 16_000.0);
        assert!(
            (fit - t60).abs() <= 0.2 * t60,
            "t60 {t60}: Schroeder fit {fit:.3} outside 20%"
        );
        fits.push(format!("{t60}->{fit:.3}"));
    }
    pass(2, &format!("50 direct-path peaks within +/-1 sample; T60 fits {}", fits.join(", ")));
}

// ---------------------------------------------------------------------------
// C3: diffuse-field coherence of the isotropic noise generator.
// ---------------------------------------------------------------------------

fn welch_msc(x: &Waveform, win: usize, hop: usize) -> Vec<(f64, f64)> {
    let n = x.len();
    let bins = win / 2 + 1;
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos()))
        .collect();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(win);
    let mut sxx = vec![0.0; bins];
    let mut syy = vec![0.0; bins];
    let mut sxy = vec![Complex64::default(); bins];
    let mut t = 0;
    while t + win <= n {
        let mut bufs = [vec![Complex64::default(); win], vec![Complex64::default(); win]];
        for (c, buf) in bufs.iter_mut().enumerate() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(x.samples()[[c, t + j]] * hann[j], 0.0);
            }
            fft.process(buf);
        }
        for k in 0..bins {
            sxx[k] += bufs[0][k].norm_sqr();
            syy[k] += bufs[1][k].norm_sqr();
            sxy[k] += bufs[0][k] * bufs[1][k].conj();
        }
        t += hop;
    }
    (0..bins)
        .map(|k| {
            let f = k as f64 * x.sample_rate() as f64 / win as f64;
            (f, sxy[k].norm_sqr() / (sxx[k] * syy[k]).max(1e-300))
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

#[test]
fn c03_isotropic_noise_coherence() {
    let mut summary = Vec::new();
    for (i, d) in [0.02f64, 0.05, 0.10].into_iter().enumerate() {
        let geom = ArrayGeometry::new(vec![[0.0, 0.0, 0.0], [d, 0.0, 0.0]]).unwrap();
        let x = isotropic_noise(&geom, 30.0, 16_000, 300 + i as u64).unwrap();
        let msc = welch_msc(&x, 512, 256);
        let mut sum = 0.0;
        let mut count = 0;
        for &(f, got) in &msc {
            if f >= 4000.0 {
                continue;
            }
            let want = sinc(2.0 * std::f64::consts::PI * f * d / 343.0).powi(2);
            sum += (got - want).abs();
            count += 1;
        }
        let mad = sum / count as f64;
        assert!(mad < 0.1, "spacing {d} m: MAD {mad:.4}");
        summary.push(format!("{:.0}cm->{mad:.3}", d * 100.0));
    }
    pass(3, &format!("coherence MAD below 4 kHz: {}", summary.join(", ")));
}

// ---------------------------------------------------------------------------
// C4: planner accuracy, silence ranges, suite structure.
// ---------------------------------------------------------------------------
#[test]
fn c04_session_planner() {
    let (pool, _) = synthetic_pool(10, 40, (5.0, 10.0), 16_000, 404);
    let mut worst = 0.0f64;
    for target in [0.1, 0.2, 0.3, 0.4] {
        for seed in 0..20 {
            let spec = OverlapSpec::new(target, (0.1, 0.5)).unwrap();
            let plan = plan_session(&pool, &spec, 8, 600.0, 1000 * seed + 7).unwrap();
            plan.validate().unwrap();
            let err = (measure_overlap(&plan) - target).abs();
            assert!(err <= 0.02, "target {target} seed {seed}: off by {err:.4}");
            worst = worst.max(err);
        }
    }

    // Exact silence ranges for the two zero-overlap conditions.
    for (range, label) in [((0.1, 0.5), "0S"), ((2.9, 3.0), "0L")] {
        let spec = OverlapSpec::new(0.0, range).unwrap();
        let plan = plan_session(&pool, &spec, 8, 600.0, 11).unwrap();
        assert_eq!(measure_overlap(&plan), 0.0, "{label}");
        for g in plan.gaps() {
            assert!(g >= range.0 && g < range.1, "{label} gap {g}");
        }
    }

    // Suite structure across several seeds.
    for seed in [1u64, 77, 4242] {
        let suite = plan_suite(&pool, seed, &SuiteConfig::default()).unwrap();
        assert_eq!(suite.len(), 6);
        let labels: Vec<&str> = suite.iter().map(|(c, _)| c.label()).collect();
        assert_eq!(labels, vec!["0S", "0L", "10", "20", "30", "40"]);
        for (cond, plan) in &suite {
            let speakers: std::collections::BTreeSet<&str> =
                plan.placements.iter().map(|p| p.speaker_id.as_str()).collect();
            assert_eq!(speakers.len(), 8, "{}", cond.label());
            assert!(
                (52..=125).contains(&plan.placements.len()),
                "{}: {} utterances",
                cond.label(),
                plan.placements.len()
            );
        }
    }
    pass(4, &format!("20 seeds x 4 targets within +/-0.02 (worst {worst:.4}); gap ranges exact; suite structure holds"));
}

// ---------------------------------------------------------------------------
// C5: planted-permutation stitching recovery.
// ---------------------------------------------------------------------------
#[test]
fn c05_stitching_recovery() {
    let mut rng = SmallRng::seed_from_u64(505);
    let cfg = ChunkConfig::new(6, 10, 4).unwrap();
    let bins = 5;
    let n_chunks = 10;
    let total = n_chunks * cfg.n_center;
    let mut recovered = 0;
    for _ in 0..1000 {
        let plan = plan_chunks(total, &cfg).unwrap();
        // Distinct smooth global masks, random per-chunk swaps.
        let phase: f64 = rng.random_range(0.0..6.28);
        let g0 = Array2::from_shape_fn((total, bins), |(t, b)| {
            0.5 + 0.45 * ((t as f64 * 0.13 + b as f64 * 0.71 + phase).sin())
        });
        let g1 = Array2::from_shape_fn((total, bins), |(t, b)| {
            0.5 + 0.45 * ((t as f64 * 0.29 + b as f64 * 1.37 - phase).cos())
        });
        let mut chunks = Vec::new();
        let mut flips = Vec::new();
        for c in &plan {
            let flip = rng.random_bool(0.5);
            flips.push(flip);
            let mut m = MaskSet::zeros(c.window_len, bins);
            for j in 0..c.window_len {
                let g = c.frame_at(j, total);
                for b in 0..bins {
                    let (a, bb) = (g0[[g, b]], g1[[g, b]]);
                    let (x, y) = if flip { (bb, a) } else { (a, bb) };
                    m.speech[0][[j, b]] = x;
                    m.speech[1][[j, b]] = y;
                }
            }
            chunks.push(m);
        }
        let stitched = stitch(&chunks, &plan, total).unwrap();
        let ok = stitched
            .permutations
            .iter()
            .zip(&flips)
            .all(|(p, &f)| (*p == SWAP) == (f != flips[0]));
        let global_ok = (stitched.speech[0] == g0 && stitched.speech[1] == g1)
            || (stitched.speech[0] == g1 && stitched.speech[1] == g0);
        if ok && global_ok {
            recovered += 1;
        }
    }
    assert_eq!(recovered, 1000, "only {recovered}/1000 sequences recovered");

    // Documented tie behavior: identical speech masks resolve to identity.
    let mut amb = MaskSet::zeros(20, bins);
    amb.speech[0].mapv_inplace(|_| 0.4);
    amb.speech[1].mapv_inplace(|_| 0.4);
    assert_eq!(align_permutation(&amb, &amb, 10).unwrap(), IDENTITY);
    pass(5, "1000/1000 planted permutation sequences recovered; ambiguous ties resolve to identity");
}

// ---------------------------------------------------------------------------
// C6: MVDR distortionless constraint and steering oracle match.
// ---------------------------------------------------------------------------

fn random_psd(rng: &mut SmallRng, m: usize) -> Array2<Complex64> {
    let mut g = Array2::zeros((m, m));
    for v in g.iter_mut() {
        *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let mut phi = Array2::<Complex64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let mut acc = Complex64::default();
            for k in 0..m {
                acc += g[[i, k]] * g[[j, k]].conj();
            }
            phi[[i, j]] = acc;
        }
    }
    phi
}

fn dense_principal(phi: &Array2<Complex64>) -> (Array1<Complex64>, f64, f64) {
    let m = phi.nrows();
    let na = nalgebra::DMatrix::from_fn(m, m, |i, j| phi[[i, j]]);
    let eig = na.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let v = eig.eigenvectors.column(order[0]);
    (
        Array1::from_iter(v.iter().copied()),
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
    )
}

#[test]
fn c06_mvdr_distortionless_and_steering() {
    let mut rng = SmallRng::seed_from_u64(606);
    let m = 6;

    // Distortionless constraint on 200 random PSD noise covariances.
    let mut worst_constraint = 0.0f64;
    for _ in 0..200 {
        let phi = random_psd(&mut rng, m);
        let mut h: Array1<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        h.mapv_inplace(|v| v / norm);
        let scm = SpatialCovariance {
            mats: vec![phi],
            mask_weight: vec![1.0],
            flagged: vec![false],
        };
        let sv = SteeringVectors {
            vectors: vec![h.clone()],
            flags: vec![SteeringFlag::Converged],
            ref_channel: 0,
        };
        let w = mvdr_weights(&scm, &sv, &MvdrConfig::default()).unwrap();
        let c: Complex64 = w.weights[0].iter().zip(h.iter()).map(|(a, b)| a.conj() * b).sum();
        worst_constraint = worst_constraint.max((c - 1.0).norm());
    }
    assert!(worst_constraint <= 1e-6, "worst |w^H h - 1| = {worst_constraint:e}");

    // Steering against the dense oracle on 200 well-posed PSD draws (a
    // dominant eigenvalue: within the 200-iteration budget, the principal
    // direction is only defined when the top eigengap is real).
    let mut worst_angle = 0.0f64;
    let mut trials = 0;
    while trials < 200 {
        let phi = random_psd(&mut rng, m);
        let (want, l1, l2) = dense_principal(&phi);
        if l2 / l1 > 0.9 {
            continue;
        }
        trials += 1;
        let scm = SpatialCovariance {
            mats: vec![phi],
            mask_weight: vec![1.0],
            flagged: vec![false],
        };
        let sv = steering_vector(&scm, 0).unwrap();
        assert_eq!(sv.flags[0], SteeringFlag::Converged);
        let got = &sv.vectors[0];
        let dot: Complex64 = got.iter().zip(want.iter()).map(|(a, b)| a.conj() * b).sum();
        let sin_angle: f64 = want
            .iter()
            .zip(got.iter())
            .map(|(wv, gv)| (wv - gv * dot).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(sin_angle <= 1e-8, "sin(angle) {sin_angle:e}");
        worst_angle = worst_angle.max(sin_angle);
    }
    pass(6, &format!("|w^H h - 1| <= {worst_constraint:.1e} on 200 PSD draws; steering within {worst_angle:.1e} of the dense oracle"));
}

// ---------------------------------------------------------------------------
// C7 + C8: desk-scale suite evaluation with oracle masks.
// ---------------------------------------------------------------------------

struct CondMetrics {
    mixture_median: f64,
    masking_median: f64,
    mvdr_median: f64,
    utterances: usize,
    elapsed_secs: f64,
}

fn suite_metrics() -> &'static BTreeMap<Condition, CondMetrics> {
    static SUITE: OnceLock<BTreeMap<Condition, CondMetrics>> = OnceLock::new();
    SUITE.get_or_init(|| {
        let seed = 777_001u64;
        let (pool, audio) = synthetic_pool(10, 40, (5.0, 10.0), 16_000, seed);
        let suite = plan_suite(&pool, seed, &SuiteConfig::default()).unwrap();
        let room = RoomSpec::new([7.0, 6.0, 3.0], 0.3).unwrap();
        let geometry = ArrayGeometry::circular_seven([3.5, 3.0, 1.2], 0.0425);
        let stft_cfg = StftConfig::default();

        let conditions = [
            Condition::ZeroShort,
            Condition::Ovl10,
            Condition::Ovl20,
            Condition::Ovl30,
            Condition::Ovl40,
        ];
        let mut out = BTreeMap::new();
        for (cond, plan) in suite.into_iter().filter(|(c, _)| conditions.contains(c)) {
            let t0 = Instant::now();
            let session_seed = seed ^ (cond as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let positions = draw_loudspeaker_positions(
                &room,
                &geometry,
                8,
                (0.33, 4.09),
                session_seed,
            )
            .unwrap();
            let opts = RenderOptions {
                noise_snr_db: Some(10.0),
                ref_channel: 0,
                rir_max_order: None,
                sample_rate: 16_000,
            };
            let rendered = render_session(
                &plan, &pool, &audio, &room, &geometry, &positions, &opts, session_seed,
            )
            .unwrap();

            // Unprocessed mixture on both streams.
            let mix_streams = [rendered.mixture.mono(0), rendered.mixture.mono(0)];
            let mix_rows = signal_eval(&mix_streams, &rendered, 0).unwrap();

            // Utterance-wise batch separation, masking and MVDR.
            let (mask_best, mvdr_best) = utterance_wise_best(&rendered, &stft_cfg);

            let metrics = CondMetrics {
                mixture_median: median(&mix_rows.iter().map(|r| r.best_db).collect::<Vec<_>>()),
                masking_median: median(&mask_best),
                mvdr_median: median(&mvdr_best),
                utterances: mix_rows.len(),
                elapsed_secs: t0.elapsed().as_secs_f64(),
            };
            println!(
                "suite {}: {} utterances, mixture {:.2} dB, masking {:.2} dB, mvdr {:.2} dB ({:.0} s)",
                cond.label(),
                metrics.utterances,
                metrics.mixture_median,
                metrics.masking_median,
                metrics.mvdr_median,
                metrics.elapsed_secs
            );
            out.insert(cond, metrics);
        }
        out
    })
}

/// Per-utterance best-stream SI-SNR under batch (utterance-wise) separation,
/// for spectral masking and MVDR.
fn utterance_wise_best(rendered: &RenderedSession, stft_cfg: &StftConfig) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let results: Vec<(f64, f64)> = rendered
        .references
        .par_iter()
        .map(|img| {
            let end = (img.start_sample + img.image.len()).min(rendered.mixture.len());
            let slice = rendered.slice(img.start_sample, end);
            let total = stft_cfg.frame_count(slice.mixture.len());
            let oracle = OracleIrm::from_rendered(&slice, stft_cfg, 0).unwrap();
            let reference =
                Waveform::from_mono(img.image.channel(0).to_vec()[..end - img.start_sample].to_vec(), 16_000)
                    .unwrap();

            let mut best = [f64::NEG_INFINITY; 2];
            for (mode_i, mode) in [OutputMode::Masking, OutputMode::Mvdr].into_iter().enumerate() {
                let opts = CssOptions::new(ChunkConfig::batch(total), mode);
                let out = run_css(&slice.mixture, &oracle, &opts).unwrap();
                for stream in &out.streams {
                    let v = si_snr(&stream.mono(0), &reference).unwrap();
                    best[mode_i] = best[mode_i].max(v);
                }
            }
            (best[0], best[1])
        })
        .collect();
    (results.iter().map(|r| r.0).collect(), results.iter().map(|r| r.1).collect())
}

#[test]
fn c07_end_to_end_separation_quality() {
    let suite = suite_metrics();
    let overlapped = [Condition::Ovl10, Condition::Ovl20, Condition::Ovl30, Condition::Ovl40];
    let mut lines = Vec::new();
    for cond in overlapped {
        let m = &suite[&cond];
        assert!(
            m.mvdr_median >= m.masking_median,
            "{}: mvdr {:.2} dB < masking {:.2} dB",
            cond.label(),
            m.mvdr_median,
            m.masking_median
        );
        assert!(
            m.masking_median > m.mixture_median,
            "{}: masking {:.2} dB <= mixture {:.2} dB",
            cond.label(),
            m.masking_median,
            m.mixture_median
        );
        assert!(
            m.mvdr_median > m.mixture_median,
            "{}: mvdr {:.2} dB <= mixture {:.2} dB",
            cond.label(),
            m.mvdr_median,
            m.mixture_median
        );
        assert!(
            m.elapsed_secs <= 600.0,
            "{}: condition took {:.0} s (> 10 min)",
            cond.label(),
            m.elapsed_secs
        );
        lines.push(format!(
            "{}: mix {:.1} / mask {:.1} / mvdr {:.1} dB in {:.0}s",
            cond.label(),
            m.mixture_median,
            m.masking_median,
            m.mvdr_median,
            m.elapsed_secs
        ));
    }
    pass(7, &lines.join("; "));
}

#[test]
fn c08_mixture_si_snr_monotonicity() {
    let suite = suite_metrics();
    let order = [
        Condition::ZeroShort,
        Condition::Ovl10,
        Condition::Ovl20,
        Condition::Ovl30,
        Condition::Ovl40,
    ];
    let medians: Vec<f64> = order.iter().map(|c| suite[c].mixture_median).collect();
    for w in medians.windows(2) {
        assert!(
            w[1] < w[0],
            "mixture SI-SNR not strictly decreasing: {medians:?}"
        );
    }
    pass(8, &format!(
        "unprocessed mixture medians strictly decrease across OVR 0..40%: {}",
        medians.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" > ")
    ));
}

// ---------------------------------------------------------------------------
// C9: scoring oracles.
// ---------------------------------------------------------------------------

fn brute_distance(hyp: &[String], reference: &[String]) -> usize {
    fn go(h: &[String], r: &[String]) -> usize {
        match (h.is_empty(), r.is_empty()) {
            (true, _) => r.len(),
            (_, true) => h.len(),
            _ => {
                let cost = usize::from(h[0] != r[0]);
                (go(&h[1..], &r[1..]) + cost).min(go(&h[1..], r) + 1).min(go(h, &r[1..]) + 1)
            }
        }
    }
    go(hyp, reference)
}

#[test]
fn c09_scoring_oracles() {
    let mut rng = SmallRng::seed_from_u64(909);
    let vocab = ["a", "b", "c", "d", "e"];
    let mut mk = |max_len: usize, rng: &mut SmallRng| -> Vec<String> {
        let len = rng.random_range(0..=max_len);
        (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
    };

    // 1000 random short pairs against brute-force edit distance.
    for _ in 0..1000 {
        let h = mk(8, &mut rng);
        let r = mk(8, &mut rng);
        assert_eq!(wer(&h, &r).total_errors(), brute_distance(&h, &r), "h={h:?} r={r:?}");
    }

    // Continuous assignment equals exhaustive search on 100 random cases.
    for case in 0..100 {
        let n_refs = rng.random_range(1..=6);
        let refs: Vec<css_core::eval::ReferenceUtterance> = (0..n_refs)
            .map(|i| css_core::eval::ReferenceUtterance {
                utterance_id: format!("u{i}"),
                start_secs: i as f64,
                end_secs: i as f64 + 0.9,
                words: {
                    let len = rng.random_range(1..5);
                    (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
                },
            })
            .collect();
        let h0 = mk(10, &mut rng);
        let h1 = mk(10, &mut rng);
        let entry = |words: &Vec<String>| -> Vec<css_core::eval::TranscriptEntry> {
            if words.is_empty() {
                vec![]
            } else {
                vec![css_core::eval::TranscriptEntry {
                    start_secs: 0.0,
                    end_secs: 100.0,
                    words: words.clone(),
                }]
            }
        };
        let hyps = [
            css_core::eval::Transcript { stream_id: "s0".into(), entries: entry(&h0) },
            css_core::eval::Transcript { stream_id: "s1".into(), entries: entry(&h1) },
        ];
        let got = css_core::eval::continuous_eval(&hyps, &refs).unwrap();
        // Exhaustive oracle over every assignment.
        let mut best = usize::MAX;
        for bits in 0..(1u32 << n_refs) {
            let mut r0 = Vec::new();
            let mut r1 = Vec::new();
            for (i, r) in refs.iter().enumerate() {
                if bits >> i & 1 == 0 {
                    r0.extend(r.words.iter().cloned());
                } else {
                    r1.extend(r.words.iter().cloned());
                }
            }
            best = best.min(wer(&h0, &r0).total_errors() + wer(&h1, &r1).total_errors());
        }
        assert_eq!(got.total.total_errors(), best, "case {case}");
    }

    // The two-hypothesis rule picks the min-WER stream.
    let reference: Vec<String> = ["the", "cat", "sat"].map(String::from).to_vec();
    let good = reference.clone();
    let bad: Vec<String> = ["dog", "stood"].map(String::from).to_vec();
    let (rep, chosen) = utterance_eval(&good, &bad, &reference);
    assert_eq!((rep.wer(), chosen), (0.0, 0));
    let (rep, chosen) = utterance_eval(&bad, &good, &reference);
    assert_eq!((rep.wer(), chosen), (0.0, 1));
    let (rep, _) = utterance_eval(&bad, &bad, &reference);
    assert!(rep.wer() > 0.0);
    pass(9, "WER DP == brute force (1000 pairs); continuous assignment == exhaustive (100 cases); two-hypothesis rule picks min-WER");
}

// ---------------------------------------------------------------------------
// C10: inherent latency accounting for the published configurations.
// ---------------------------------------------------------------------------
#[test]
fn c10_latency_accounting() {
    let stft_cfg = StftConfig::default();
    let cases = [((1.2, 0.8, 0.4), 1.2), ((1.6, 0.8, 0.0), 0.8), ((0.8, 0.4, 0.4), 0.8)];
    let mut shown = Vec::new();
    for ((l, c, r), want) in cases {
        let cfg = ChunkConfig::from_seconds(l, c, r, &stft_cfg, 16_000).unwrap();
        let got = cfg.latency_secs(&stft_cfg, 16_000);
        assert_eq!(got, want, "{l}-{c}-{r}");
        shown.push(format!("{l}-{c}-{r} -> {got} s"));
    }
    pass(10, &shown.join("; "));
}
