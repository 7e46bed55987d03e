use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use esln::kernels::{eval_kernels, BathSpec, KernelTable, QuadratureSpec, TimeGrid};
use esln::noise::{
    build_filters, rescale, sample_white, synthesize, FilterSet, NoiseComponents, NoiseSynthesizer, ScalingSpec,
    WhiteStreams,
};
use esln::seed::trajectory_rng;

fn setup(alpha: f64, t_max: f64, dt: f64, dtau: f64) -> (TimeGrid, KernelTable, FilterSet) {
    let bath = BathSpec::new(alpha, 20.0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, t_max, dt, 1.0, dtau).unwrap();
    let kernels = eval_kernels(&bath, &grid, &QuadratureSpec::default()).unwrap();
    let filters = build_filters(&kernels, &grid).unwrap();
    (grid, kernels, filters)
}

#[test]
fn filters_reproduce_kernels_in_the_lag_domain() {
    // Direct circular lag sums, no transforms: dt·Σ_s G(l−s)G(−s) = K(l).
    let (grid, kernels, f) = setup(0.05, 0.2, 1e-3, 1e-2);
    let p = f.conv_len() as isize;
    let k0 = kernels.k_eta_eta(0);
    for l in [0isize, 1, 5, 40, 200] {
        let s: f64 = (0..p).map(|s| f.g_eta_eta(l - s) * f.g_eta_eta(-s)).sum::<f64>() * grid.dt;
        assert!((s - kernels.k_eta_eta(l)).abs() < 1e-10 * k0, "lag {l}");
    }
    // 2i·dt·Σ_s G_ην(h−s)G_νη(−s) = K_ην(h), including the causal zero for h ≤ 0.
    for h in [-30isize, -1, 0, 1, 3, 50, 150] {
        let s: Complex64 = (0..p).map(|s| f.g_eta_nu(h - s) * f.g_nu_eta(-s)).sum::<Complex64>()
            * Complex64::new(0.0, 2.0 * grid.dt);
        assert!((s - kernels.k_eta_nu(h)).norm() < 1e-10 * k0, "lag {h}: {s}");
    }
    let m = grid.m_steps as isize;
    for l in 0..m {
        let s: f64 = (0..m).map(|s| f.g_mu_mu(l - s) * f.g_mu_mu(-s)).sum::<f64>() * grid.dtau;
        assert!((s - kernels.k_mu_mu(l as usize)).abs() < 1e-10 * k0, "tau lag {l}");
    }
    // The η_μ filter is the shifted kernel scaled by −i/2.
    for (n, mm) in [(0, 0), (3, 7), (100, 50), (150, 100)] {
        let g = f.g_eta_mu(n, mm);
        assert!((g - Complex64::new(0.0, -0.5) * kernels.k_eta_mu(n, mm)).norm() < 1e-14 * k0);
    }
    assert!(f.mu_eta_is_white());
    assert_relative_eq!(f.g_mu_eta_amplitude(), 100.0, max_relative = 1e-12);
}

#[test]
fn fourier_invariants_hold() {
    let (grid, kernels, f) = setup(0.05, 0.2, 1e-3, 1e-2);
    let p = f.conv_len();
    // Independent naive DFT of the circularly placed kernels at a few bins.
    let k_eta_eta = |bin: usize| -> f64 {
        (0..p)
            .map(|l| {
                let lag = if l <= p / 2 { l as isize } else { l as isize - p as isize };
                kernels.k_eta_eta(lag) * (2.0 * std::f64::consts::PI * (bin * l) as f64 / p as f64).cos()
            })
            .sum::<f64>()
            * grid.dt
    };
    let k_eta_nu = |bin: usize| -> Complex64 {
        (1..p / 2)
            .map(|l| kernels.k_eta_nu(l as isize) * Complex64::cis(-2.0 * std::f64::consts::PI * ((bin * l) % p) as f64 / p as f64))
            .sum::<Complex64>()
            * grid.dt
    };
    let scale = k_eta_eta(0);
    for bin in [0usize, 1, 17, 300, p / 4, p / 2] {
        let g = f.spectrum_eta_eta()[bin];
        assert!((g * g - k_eta_eta(bin)).abs() < 1e-9 * scale, "bin {bin}");
        let prod = f.spectrum_eta_nu()[bin] * f.spectrum_nu_eta()[(p - bin) % p];
        assert!((prod - Complex64::new(0.0, -0.5) * k_eta_nu(bin)).norm() < 1e-9 * scale, "bin {bin}");
        // Principal branch.
        assert!(f.spectrum_eta_nu()[bin].re >= 0.0);
    }
}

#[test]
fn zero_kernels_give_zero_filters_and_noise() {
    let (grid, _, f) = setup(0.0, 0.1, 1e-3, 1e-2);
    assert!((0..f.conv_len() as isize).all(|l| f.g_eta_eta(l) == 0.0));
    assert_eq!(f.strat_sum_eta_eta(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let real = synthesize(&f, &mut rng, &grid, &ScalingSpec::default()).unwrap();
    assert!(real.components.eta_eta.iter().all(|&x| x == 0.0));
    assert!(real.eta.iter().all(|z| z.norm() == 0.0));
    assert!(real.rescale.skipped_any());
}

#[test]
fn zero_white_streams_give_zero_noise() {
    let (grid, _, f) = setup(0.05, 0.1, 1e-3, 1e-2);
    let p = f.conv_len();
    let zeros = WhiteStreams {
        x1: vec![0.0; p],
        x2: vec![0.0; p],
        x3: vec![0.0; p],
        xb1: vec![0.0; grid.m_steps],
        xb2: vec![0.0; grid.m_steps + 1],
        xb3: vec![0.0; grid.m_steps + 1],
    };
    let mut synth = NoiseSynthesizer::new(&f);
    let real = synth.synthesize_batch(&[zeros], &ScalingSpec::default()).pop().unwrap();
    assert!(real.eta.iter().chain(&real.nu).chain(&real.mu).all(|z| z.norm() == 0.0));
    assert_eq!(real.rescale.a_mu_eta, None);
    assert_eq!(real.rescale.b_nu_eta, None);
}

#[test]
fn grid_mismatch_is_rejected() {
    let (_, kernels, f) = setup(0.05, 0.1, 1e-3, 1e-2);
    let other = TimeGrid::new(0.0, 0.2, 1e-3, 1.0, 1e-2).unwrap();
    assert!(build_filters(&kernels, &other).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(synthesize(&f, &mut rng, &other, &ScalingSpec::default()).is_err());
}

#[test]
fn white_noise_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000;
    let x = sample_white(&mut rng, n, 1e-3);
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 3.0 * 1000f64.sqrt() / 1000.0);
    assert!((var - 1000.0).abs() < 10.0, "variance {var}");

    let y = sample_white(&mut rng, n, 1e-3);
    for lag in [0usize, 1, 7, 100] {
        let terms: Vec<f64> = (0..n - lag).map(|i| x[i + lag] * y[i]).collect();
        let m = terms.iter().sum::<f64>() / terms.len() as f64;
        let sd = (terms.iter().map(|t| (t - m).powi(2)).sum::<f64>() / terms.len() as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (terms.len() as f64).sqrt(), "lag {lag}");
    }
}

#[test]
fn rescale_matches_the_defining_ratios() {
    // Σ|ν_η| = 4, Σ|η_ν| = 1, r = 1 → b = √(4/1) = 2.
    let mut c = NoiseComponents {
        eta_nu: vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5)],
        nu_eta: vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, -2.0)],
        eta_mu: vec![Complex64::new(0.0, 2.0), Complex64::new(1.0, 0.0)],
        mu_eta: vec![Complex64::new(1.0, 0.0); 3],
        ..Default::default()
    };
    let scaling = ScalingSpec::new(1.0, 2.0).unwrap();
    let report = rescale(&mut c, &scaling);
    assert_relative_eq!(report.b_nu_eta.unwrap(), 2.0, max_relative = 1e-15);
    // a = √2·√((3/2)/2) with M = 2 intervals over three imaginary nodes.
    assert_relative_eq!(report.a_mu_eta.unwrap(), (2.0f64 * 0.75).sqrt(), max_relative = 1e-15);
    let again = rescale(&mut c, &ScalingSpec::new(1.0, 1.0).unwrap());
    assert_relative_eq!(again.b_nu_eta.unwrap(), 1.0, max_relative = 1e-15);
}

proptest! {
    #[test]
    fn rescale_preserves_cross_products(
        eta in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4),
        nu in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4),
        r in 0.01f64..10.0,
    ) {
        let to_c = |v: &Vec<(f64, f64)>| v.iter().map(|&(a, b)| Complex64::new(a, b)).collect::<Vec<_>>();
        let mut c = NoiseComponents { eta_nu: to_c(&eta), nu_eta: to_c(&nu), ..Default::default() };
        let before = c.clone();
        let report = rescale(&mut c, &ScalingSpec::new(r, 1.0).unwrap());
        prop_assume!(report.b_nu_eta.is_some());
        for i in 0..4 {
            for j in 0..4 {
                let a = before.eta_nu[i] * before.nu_eta[j];
                let b = c.eta_nu[i] * c.nu_eta[j];
                prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
            }
        }
        // r = 1 applied twice is the identity.
        let mut d = before.clone();
        rescale(&mut d, &ScalingSpec::new(1.0, 1.0).unwrap());
        let second = rescale(&mut d, &ScalingSpec::new(1.0, 1.0).unwrap());
        prop_assert!((second.b_nu_eta.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn synthesis_is_deterministic_and_decomposes() {
    let (grid, _, f) = setup(0.05, 0.2, 1e-3, 1e-2);
    let a = synthesize(&f, &mut trajectory_rng(5, 9), &grid, &ScalingSpec::default()).unwrap();
    let b = synthesize(&f, &mut trajectory_rng(5, 9), &grid, &ScalingSpec::default()).unwrap();
    assert_eq!(a, b);
    let c = &a.components;
    for n in 0..=grid.n_steps {
        assert_eq!(a.eta[n], c.eta_eta[n] + c.eta_nu[n] + c.eta_mu[n]);
        assert_eq!(a.nu[n], c.nu_eta[n]);
    }
    for m in 0..=grid.m_steps {
        assert_eq!(a.mu[m], c.mu_mu[m] + c.mu_eta[m]);
    }
    assert_eq!(c.mu_mu[0], c.mu_mu[grid.m_steps]);
}

#[test]
fn batched_synthesis_matches_single() {
    let (_, _, f) = setup(0.05, 0.2, 1e-3, 1e-2);
    let mut synth = NoiseSynthesizer::new(&f);
    let streams: Vec<WhiteStreams> = (0..5).map(|i| synth.draw(&mut trajectory_rng(1, i), i != 2)).collect();
    let batch = synth.synthesize_batch(&streams, &ScalingSpec::default());
    for (s, r) in streams.iter().zip(&batch) {
        let single = synth.synthesize_batch(std::slice::from_ref(s), &ScalingSpec::default()).pop().unwrap();
        for (x, y) in single.eta.iter().zip(&r.eta) {
            assert!((x - y).norm() <= 1e-13 * (1.0 + x.norm()));
        }
    }
    assert!(!batch[2].is_thermal());
    assert!(batch[2].components.eta_mu.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn eta_mu_equals_the_direct_sum_over_imaginary_nodes() {
    let (grid, kernels, f) = setup(0.05, 1.0, 1e-3, 1e-3);
    assert!(f.eta_mu_rank().is_some(), "a smooth cross kernel should compress");
    let mut synth = NoiseSynthesizer::new(&f);
    let streams = synth.draw(&mut trajectory_rng(11, 3), true);
    let c = synth.components_batch(std::slice::from_ref(&streams)).pop().unwrap();
    let dtau = grid.dtau;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for n in (0..=grid.n_steps).step_by(37) {
        let direct: Complex64 = (0..=grid.m_steps)
            .map(|m| {
                Complex64::new(0.0, -0.5) * kernels.k_eta_mu(n, m) * Complex64::new(streams.xb2[m], streams.xb3[m]) * dtau
            })
            .sum();
        worst = worst.max((direct - c.eta_mu[n]).norm());
        scale = scale.max(direct.norm());
    }
    assert!(worst <= 1e-10 * scale, "{worst:e} vs {scale:e}");
}

#[test]
fn scaling_leaves_pair_products_unchanged() {
    let (_, _, f) = setup(0.05, 0.2, 1e-3, 1e-2);
    let mut synth = NoiseSynthesizer::new(&f);
    let streams = synth.draw(&mut trajectory_rng(2, 0), true);
    let a = synth.synthesize_batch(std::slice::from_ref(&streams), &ScalingSpec::new(0.1, 0.3).unwrap()).pop().unwrap();
    let b = synth.synthesize_batch(std::slice::from_ref(&streams), &ScalingSpec::new(5.0, 2.0).unwrap()).pop().unwrap();
    for n in (0..a.eta.len()).step_by(17) {
        for k in (0..a.nu.len()).step_by(13) {
            let pa = a.components.eta_nu[n] * a.components.nu_eta[k];
            let pb = b.components.eta_nu[n] * b.components.nu_eta[k];
            assert!((pa - pb).norm() <= 1e-12 * (1.0 + pa.norm()));
        }
        for m in (0..a.mu.len()).step_by(11) {
            let pa = a.components.eta_mu[n] * a.components.mu_eta[m];
            let pb = b.components.eta_mu[n] * b.components.mu_eta[m];
            assert!((pa - pb).norm() <= 1e-12 * (1.0 + pa.norm()));
        }
    }
}

#[test]
fn eta_eta_round_trip_at_lag_zero() {
    // Coarse grid so 10⁵ draws stay cheap; the estimator variance is 2K(0)².
    let bath = BathSpec::new(0.05, 20.0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 0.05, 1e-2, 1.0, 1e-1).unwrap();
    let kernels = eval_kernels(&bath, &grid, &QuadratureSpec::default()).unwrap();
    let f = build_filters(&kernels, &grid).unwrap();
    let mut synth = NoiseSynthesizer::new(&f);
    let s = 100_000;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for i in 0..s {
        let streams = synth.draw(&mut trajectory_rng(77, i), false);
        let c = synth.components_batch(std::slice::from_ref(&streams)).pop().unwrap();
        let v = c.eta_eta[0] * c.eta_eta[0];
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / s as f64;
    let se = ((sum2 / s as f64 - mean * mean) / s as f64).sqrt();
    let target = kernels.k_eta_eta(0);
    assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} ± {se}");
}
