use hal_analysis::{
    correlation_series, fit_leakage, fit_resonator, forward_jacobian, leakage_model, nlls_curve, readout_metrics,
    CorrelationSeries, LmOptions, ResonatorParams,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn central_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64]) -> Vec<Vec<f64>> {
    let m = f(p).len();
    let mut out = vec![vec![0.0; p.len()]; m];
    for k in 0..p.len() {
        let h = 1e-7 * p[k].abs().max(1.0);
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[k] += h;
        lo[k] -= h;
        let (rh, rl) = (f(&hi), f(&lo));
        for i in 0..m {
            out[i][k] = (rh[i] - rl[i]) / (2.0 * h);
        }
    }
    out
}

fn assert_gradient_matches<F: Fn(&[f64]) -> Vec<f64>>(f: F, p: &[f64]) {
    let r0 = f(p);
    let fwd = forward_jacobian(&f, p, &r0).unwrap();
    let cen = central_jacobian(&f, p);
    for k in 0..p.len() {
        let scale = cen.iter().map(|row| row[k].abs()).fold(0.0, f64::max);
        assert!(scale > 0.0);
        for (i, row) in cen.iter().enumerate() {
            let rel = (fwd[(i, k)] - row[k]).abs() / scale;
            assert!(rel < 1e-5, "entry ({i},{k}): forward {} central {} rel {rel}", fwd[(i, k)], row[k]);
        }
    }
}

#[test]
fn jacobian_matches_central_differences_on_decay() {
    let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
    let f = |p: &[f64]| x.iter().map(|&t| p[0] * (-p[1] * t).exp() + p[2]).collect::<Vec<_>>();
    assert_gradient_matches(f, &[1.3, 0.4, -0.2]);
}

#[test]
fn jacobian_matches_central_differences_on_leakage_model() {
    let f = |p: &[f64]| (1..=40).map(|j| leakage_model(p, j as f64)).collect::<Vec<_>>();
    assert_gradient_matches(f, &[0.98, 0.85, 0.124]);
}

#[test]
fn jacobian_matches_central_differences_on_resonator_model() {
    let freq: Vec<f64> = (0..201).map(|i| 5e9 + (i as f64 - 100.0) * 1e6).collect();
    let f = |p: &[f64]| {
        let params = ResonatorParams {
            f_r: p[0],
            q_i: p[1],
            q_c: p[2],
            phi: p[3],
            a: p[4],
            alpha: p[5],
        };
        let mut out = Vec::new();
        for &fr in &freq {
            let z = params.s21(fr);
            out.push(z.re);
            out.push(z.im);
        }
        out
    };
    assert_gradient_matches(f, &[5e9, 1e4, 150.0, 0.1, 0.9, 0.3]);
}

fn trace(p: &ResonatorParams, span_lw: f64, points: usize) -> (Vec<f64>, Vec<Complex64>) {
    let width = p.f_r * (1.0 / p.q_i + 1.0 / p.q_c);
    let freq: Vec<f64> = (0..points)
        .map(|i| p.f_r + span_lw * width * (2.0 * i as f64 / (points - 1) as f64 - 1.0))
        .collect();
    let s21 = freq.iter().map(|&f| p.s21(f)).collect();
    (freq, s21)
}

fn split(z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_resonator_round_trip(
        f_r in 3e9f64..8e9,
        q_i in 5e4f64..5e5,
        q_c in 5e3f64..5e4,
        phi in -0.4f64..0.4,
        a in 0.3f64..1.5,
        alpha in -3.0f64..3.0,
    ) {
        let truth = ResonatorParams { f_r, q_i, q_c, phi, a, alpha };
        let (freq, z) = trace(&truth, 10.0, 401);
        let (re, im) = split(&z);
        let fit = fit_resonator(&freq, &re, &im, None).unwrap();
        prop_assert!(rel(fit.f_r, f_r) < 1e-6);
        prop_assert!(rel(fit.q_i, q_i) < 1e-6, "Q_i {} vs {}", fit.q_i, q_i);
        prop_assert!(rel(fit.q_c, q_c) < 1e-6, "Q_c {} vs {}", fit.q_c, q_c);
        prop_assert!(rel(fit.a, a) < 1e-6);
        prop_assert!((fit.phi - phi).abs() < 1e-6);
        let d_alpha = (fit.alpha - alpha + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        prop_assert!(d_alpha.abs() < 1e-6);
        prop_assert!(fit.residual_rms >= 0.0);
        prop_assert!(fit.sigma.values().all(|s| *s >= 0.0));
    }

    #[test]
    fn noiseless_leakage_round_trip(
        a in 0.8f64..1.05,
        b in 0.3f64..1.0,
        l in 0.02f64..0.4,
    ) {
        let j: Vec<usize> = (1..=40).collect();
        let c_avg = j.iter().map(|&j| leakage_model(&[a, b, l], j as f64)).collect();
        let series = CorrelationSeries { j, c_avg, n_samples: vec![1000; 40], cov: vec![] };
        let fit = fit_leakage(&series).unwrap();
        prop_assert!((fit.l - l).abs() < 1e-8, "L {} vs {}", fit.l, l);
        prop_assert!((fit.a - a).abs() < 1e-8);
        prop_assert!((fit.b - b).abs() < 1e-8);
    }
}

#[test]
fn noisy_resonator_recovery_over_seeds() {
    let truth = ResonatorParams {
        f_r: 5.5e9,
        q_i: 2e5,
        q_c: 2.5e4,
        phi: 0.08,
        a: 1.0,
        alpha: 0.0,
    };
    let sigma = 0.003 / 10f64.sqrt();
    let (freq, clean) = trace(&truth, 10.0, 401);
    let mut passes = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let re: Vec<f64> = clean.iter().map(|z| z.re + noise.sample(&mut rng)).collect();
        let im: Vec<f64> = clean.iter().map(|z| z.im + noise.sample(&mut rng)).collect();
        let fit = fit_resonator(&freq, &re, &im, None).unwrap();
        let ok = rel(fit.f_r, truth.f_r) < 1e-6
            && rel(fit.q_i, truth.q_i) < 0.05
            && rel(fit.q_c, truth.q_c) < 0.05
            && rel(fit.a, truth.a) < 0.05;
        passes += usize::from(ok);
    }
    assert_eq!(passes, 20);
}

#[test]
fn impedance_mismatch_angle_is_recovered() {
    let truth = ResonatorParams {
        f_r: 6.1e9,
        q_i: 1.5e5,
        q_c: 2e4,
        phi: 0.3,
        a: 0.9,
        alpha: 0.5,
    };
    let (freq, clean) = trace(&truth, 10.0, 401);
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.003).unwrap();
        let re: Vec<f64> = clean.iter().map(|z| z.re + noise.sample(&mut rng)).collect();
        let im: Vec<f64> = clean.iter().map(|z| z.im + noise.sample(&mut rng)).collect();
        let fit = fit_resonator(&freq, &re, &im, None).unwrap();
        assert!((fit.phi - 0.3).abs() < 0.05, "seed {seed}: phi {}", fit.phi);
    }
}

fn brute_force(flags: &[Vec<bool>], bits: &[Vec<Vec<u8>>]) -> Vec<f64> {
    let n = flags[0].len();
    let mut sums = vec![0u64; n];
    let mut counts = vec![0u64; n];
    for (r, f) in flags.iter().enumerate() {
        for shot in &bits[r] {
            for j in 1..=n {
                let alternated = shot[j] != shot[j - 1];
                sums[j - 1] += u64::from(alternated == f[j - 1]);
                counts[j - 1] += 1;
            }
        }
    }
    sums.iter().zip(&counts).map(|(s, c)| *s as f64 / *c as f64).collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<bool>>, Vec<Vec<Vec<u8>>>) {
    let n = rng.random_range(1..7);
    let randomizations = rng.random_range(1..4);
    let shots = rng.random_range(1..6);
    let flags: Vec<Vec<bool>> = (0..randomizations)
        .map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let bits = (0..randomizations)
        .map(|_| {
            (0..shots)
                .map(|_| (0..=n).map(|_| u8::from(rng.random_bool(0.5))).collect())
                .collect()
        })
        .collect();
    (flags, bits)
}

#[test]
fn correlation_series_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let (flags, bits) = random_instance(&mut rng);
        let series = correlation_series(&flags, &bits).unwrap();
        let expected = brute_force(&flags, &bits);
        assert_eq!(series.c_avg, expected);
        assert_eq!(series.j, (1..=flags[0].len()).collect::<Vec<_>>());
        assert!(series.c_avg.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn correlation_series_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (mut flags, mut bits) = random_instance(&mut rng);
        let before = correlation_series(&flags, &bits).unwrap();
        for shots in bits.iter_mut() {
            shots.shuffle(&mut rng);
        }
        let mut order: Vec<usize> = (0..flags.len()).collect();
        order.shuffle(&mut rng);
        flags = order.iter().map(|&i| flags[i].clone()).collect();
        bits = order.iter().map(|&i| bits[i].clone()).collect();
        let after = correlation_series(&flags, &bits).unwrap();
        for (a, b) in before.c_avg.iter().zip(&after.c_avg) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(before.n_samples, after.n_samples);
    }
}

#[test]
fn correlation_series_rejects_shape_mismatch() {
    let flags = vec![vec![true, false]];
    let bits = vec![vec![vec![0, 1]]];
    assert!(correlation_series(&flags, &bits).is_err());
    assert!(correlation_series(&flags, &[]).is_err());
}

#[test]
fn independent_bits_give_half_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 4;
    let flags = vec![(0..n).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>()];
    let shots = 10_000;
    let bits = vec![(0..shots)
        .map(|_| (0..=n).map(|_| u8::from(rng.random_bool(0.5))).collect())
        .collect()];
    let series = correlation_series(&flags, &bits).unwrap();
    let sd = (0.25 / shots as f64).sqrt();
    assert!(series.c_avg.iter().all(|c| (c - 0.5).abs() < 3.0 * sd));
}

#[test]
fn leakage_refit_is_argmin_invariant() {
    let j: Vec<usize> = (1..=40).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let c_avg = j
        .iter()
        .map(|&j| leakage_model(&[0.97, 0.8, 0.15], j as f64) + noise.sample(&mut rng))
        .collect();
    let first = fit_leakage(&CorrelationSeries {
        j: j.clone(),
        c_avg,
        n_samples: vec![100; 40],
        cov: vec![],
    })
    .unwrap();
    let regenerated = j.iter().map(|&j| leakage_model(&[first.a, first.b, first.l], j as f64)).collect();
    let second = fit_leakage(&CorrelationSeries {
        j,
        c_avg: regenerated,
        n_samples: vec![100; 40],
        cov: vec![],
    })
    .unwrap();
    assert!((first.l - second.l).abs() < 1e-9);
    assert!((first.a - second.a).abs() < 1e-9);
    assert!((first.b - second.b).abs() < 1e-9);
}

#[test]
fn exponential_rate_from_generic_curve_fit() {
    let x: Vec<f64> = (0..51).map(|i| i as f64 * 0.2).collect();
    let y: Vec<f64> = x.iter().map(|t| (-0.3 * t).exp()).collect();
    let fit = nlls_curve(|p, t| (-p[0] * t).exp(), &[0.1], &x, &y, &LmOptions::default()).unwrap();
    assert!((fit.params[0] - 0.3).abs() < 1e-8);
}

#[test]
fn coin_flip_readout_has_no_visibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let p0: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let p1: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let pairs: Vec<(u8, u8)> = (0..n)
        .map(|_| (u8::from(rng.random_bool(0.5)), u8::from(rng.random_bool(0.5))))
        .collect();
    let m = readout_metrics(&p0, &p1, &pairs).unwrap();
    let sd = (0.5 / n as f64).sqrt();
    assert!(m.visibility.abs() < 3.0 * sd, "visibility {}", m.visibility);
    assert!((m.repeatability - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
}

fn shot_indicators(flags: &[Vec<bool>], bits: &[Vec<Vec<u8>>]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for (r, f) in flags.iter().enumerate() {
        for shot in &bits[r] {
            rows.push((1..=f.len()).map(|j| f64::from(u8::from((shot[j] != shot[j - 1]) == f[j - 1]))).collect());
        }
    }
    rows
}

#[test]
fn series_covariance_is_the_sample_covariance_of_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let (flags, bits) = random_instance(&mut rng);
        let series = correlation_series(&flags, &bits).unwrap();
        let rows = shot_indicators(&flags, &bits);
        let (shots, n) = (rows.len() as f64, flags[0].len());
        if rows.len() < 2 {
            assert!(series.cov.is_empty());
            continue;
        }
        let mean: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / shots).collect();
        for a in 0..n {
            for b in 0..n {
                let s: f64 = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum();
                let expected = s / (shots - 1.0) / shots;
                assert!((series.cov[a * n + b] - expected).abs() < 1e-12);
            }
        }
    }
}

/// Shots whose leakage persists to the end of the chain.
fn leaky_bits(flags: &[bool], shots: usize, l: f64, eps: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    (0..shots)
        .map(|_| {
            let (mut excited, mut leaked) = (false, false);
            let read = |excited: bool, leaked: &mut bool, rng: &mut ChaCha8Rng| {
                let bit = if *leaked { rng.random_bool(0.5) } else { excited ^ rng.random_bool(eps) };
                if !*leaked && rng.random_bool(l) {
                    *leaked = true;
                }
                u8::from(bit)
            };
            let mut row = vec![read(excited, &mut leaked, rng)];
            for &f in flags {
                excited ^= f;
                row.push(read(excited, &mut leaked, rng));
            }
            row
        })
        .collect()
}

#[test]
fn leakage_uncertainty_matches_replicate_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut ls, mut sigmas) = (Vec::new(), Vec::new());
    for _ in 0..150 {
        let flags: Vec<Vec<bool>> = (0..8).map(|_| (0..30).map(|_| rng.random_bool(0.5)).collect()).collect();
        let bits: Vec<_> = flags.iter().map(|f| leaky_bits(f, 400, 0.12, 0.02, &mut rng)).collect();
        let fit = fit_leakage(&correlation_series(&flags, &bits).unwrap()).unwrap();
        ls.push(fit.l);
        sigmas.push(fit.sigma_l);
    }
    let n = ls.len() as f64;
    let mean = ls.iter().sum::<f64>() / n;
    let spread = (ls.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sigma = sigmas.iter().sum::<f64>() / n;
    assert!((mean - 0.12).abs() < 3.0 * spread / n.sqrt(), "mean {mean}");
    assert!((spread / sigma - 1.0).abs() < 0.2, "spread {spread} vs sigma {sigma}");
}
