//! Empirical two-point correlations of synthesised noise against the kernels.
//!
//! Products are unconjugated, ⟨a(t)b(t′)⟩. Stationary pairs are averaged over
//! up to [`ORIGINS`] origins inside each realisation before averaging over
//! realisations, so the per-realisation values stay independent and the
//! standard error is the plain sample one.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use num_complex::Complex64;

use crate::ensemble::{Compensated, Simulator, BLOCK_LEN};
use crate::error::{EslnError, Result};
use crate::kernels::{KernelTable, TimeGrid};
use crate::noise::{NoiseRealisation, NoiseSynthesizer, ScalingSpec};
use crate::seed::trajectory_rng;

type C = Complex64;

pub const ORIGINS: usize = 16;

/// One sampled correlation. Real-time indices count steps of dt from the
/// start of the grid, imaginary-time ones steps of dτ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Probe {
    EtaEta { lag: usize },
    /// ⟨η(t + lag)ν(t)⟩; negative lags probe the causal zero.
    EtaNu { lag: isize },
    NuNu { lag: usize },
    EtaMu { n: usize, m: usize },
    MuMu { lag: usize },
    NuMu { n: usize, m: usize },
}

impl Probe {
    pub fn label(&self) -> &'static str {
        match self {
            Probe::EtaEta { .. } => "eta_eta",
            Probe::EtaNu { .. } => "eta_nu",
            Probe::NuNu { .. } => "nu_nu",
            Probe::EtaMu { .. } => "eta_mu",
            Probe::MuMu { .. } => "mu_mu",
            Probe::NuMu { .. } => "nu_mu",
        }
    }

    /// The pairs that must vanish identically.
    pub fn is_null(&self) -> bool {
        matches!(self, Probe::NuNu { .. } | Probe::NuMu { .. })
    }

    /// (real-time index or lag, imaginary-time index or lag).
    pub fn coordinates(&self) -> (isize, usize) {
        match *self {
            Probe::EtaEta { lag } | Probe::NuNu { lag } => (lag as isize, 0),
            Probe::EtaNu { lag } => (lag, 0),
            Probe::EtaMu { n, m } | Probe::NuMu { n, m } => (n as isize, m),
            Probe::MuMu { lag } => (0, lag),
        }
    }

    pub fn target(&self, kernels: &KernelTable) -> C {
        match *self {
            Probe::EtaEta { lag } => C::new(kernels.k_eta_eta(lag as isize), 0.0),
            Probe::EtaNu { lag } => kernels.k_eta_nu(lag),
            Probe::EtaMu { n, m } => kernels.k_eta_mu(n, m),
            Probe::MuMu { lag } => C::new(kernels.k_mu_mu(lag), 0.0),
            Probe::NuNu { .. } | Probe::NuMu { .. } => C::new(0.0, 0.0),
        }
    }

    fn check(&self, grid: &TimeGrid) -> Result<()> {
        let (n_max, m_max) = (grid.n_steps, grid.m_steps.saturating_sub(1));
        let ok = match *self {
            Probe::EtaEta { lag } | Probe::NuNu { lag } => lag <= n_max,
            Probe::EtaNu { lag } => lag.unsigned_abs() <= n_max,
            Probe::EtaMu { n, m } | Probe::NuMu { n, m } => n <= n_max && m <= m_max,
            Probe::MuMu { lag } => lag <= m_max,
        };
        if ok {
            Ok(())
        } else {
            Err(EslnError::config("probe", format!("{self:?} lies outside the grid")))
        }
    }

    fn estimate(&self, r: &NoiseRealisation) -> C {
        match *self {
            Probe::EtaEta { lag } => origin_mean(r.eta.len(), lag, |o| r.eta[o + lag] * r.eta[o]),
            Probe::NuNu { lag } => origin_mean(r.nu.len(), lag, |o| r.nu[o + lag] * r.nu[o]),
            Probe::EtaNu { lag } => {
                let span = lag.unsigned_abs();
                if lag >= 0 {
                    origin_mean(r.eta.len(), span, |o| r.eta[o + span] * r.nu[o])
                } else {
                    origin_mean(r.eta.len(), span, |o| r.eta[o] * r.nu[o + span])
                }
            }
            // τ ≥ τ′ within one period.
            Probe::MuMu { lag } => origin_mean(r.mu.len(), lag, |o| r.mu[o + lag] * r.mu[o]),
            Probe::EtaMu { n, m } => r.eta[n] * r.mu[m],
            Probe::NuMu { n, m } => r.nu[n] * r.mu[m],
        }
    }
}

/// Mean of f over up to [`ORIGINS`] evenly spread origins o with o + span < len.
fn origin_mean(len: usize, span: usize, f: impl Fn(usize) -> C) -> C {
    let last = len - 1 - span;
    let k = ORIGINS.min(last + 1);
    let sum: C = (0..k).map(|j| f(if k == 1 { 0 } else { j * last / (k - 1) })).sum();
    sum / k as f64
}

/// `per_family` distinct random lags for each correlation family; η_μ is
/// probed along τ = 0 and along t = 0 separately.
pub fn sample_probes(grid: &TimeGrid, per_family: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_steps + 1;
    let m = grid.m_steps;
    let mut pick = |len: usize| {
        let mut v = sample(&mut rng, len, per_family.min(len)).into_vec();
        v.sort_unstable();
        v
    };
    let mut out = Vec::new();
    out.extend(pick(n).into_iter().map(|lag| Probe::EtaEta { lag }));
    out.extend(pick(2 * n - 1).into_iter().map(|k| Probe::EtaNu { lag: k as isize - (n as isize - 1) }));
    out.extend(pick(n).into_iter().map(|lag| Probe::NuNu { lag }));
    out.extend(pick(n).into_iter().map(|n| Probe::EtaMu { n, m: 0 }));
    out.extend(pick(m).into_iter().map(|m| Probe::EtaMu { n: 0, m }));
    out.extend(pick(m).into_iter().map(|lag| Probe::MuMu { lag }));
    let ns = pick(n);
    let ms = pick(m);
    out.extend(ns.into_iter().zip(ms).map(|(n, m)| Probe::NuMu { n, m }));
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationSpec {
    pub n_samples: usize,
    pub master_seed: u64,
    /// 0 lets rayon pick.
    pub n_workers: usize,
    pub scaling: ScalingSpec,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub probe: Probe,
    pub target: C,
    pub mean: C,
    /// Standard error of the complex mean, √(var Re + var Im)/√S.
    pub stderr: f64,
}

impl ProbeEstimate {
    pub fn deviation(&self) -> f64 {
        (self.mean - self.target).norm()
    }

    /// Deviation in standard errors; infinite when a nonzero deviation has no spread.
    pub fn z_score(&self) -> f64 {
        let d = self.deviation();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub n_samples: usize,
    pub estimates: Vec<ProbeEstimate>,
}

impl CorrelationReport {
    pub fn required(&self) -> impl Iterator<Item = &ProbeEstimate> {
        self.estimates.iter().filter(|e| !e.probe.is_null())
    }

    pub fn nulls(&self) -> impl Iterator<Item = &ProbeEstimate> {
        self.estimates.iter().filter(|e| e.probe.is_null())
    }

    pub fn worst_required_z(&self) -> f64 {
        self.required().map(ProbeEstimate::z_score).fold(0.0, f64::max)
    }

    pub fn max_null(&self) -> f64 {
        self.nulls().map(|e| e.mean.norm()).fold(0.0, f64::max)
    }
}

/// Estimates every probe over `spec.n_samples` thermal realisations. Sample i
/// uses the same white streams as trajectory i of an ensemble with the same
/// master seed.
pub fn measure_correlations(sim: &Simulator, probes: &[Probe], spec: &CorrelationSpec) -> Result<CorrelationReport> {
    spec.scaling.validate()?;
    if spec.n_samples < 2 {
        return Err(EslnError::config("samples", "need at least 2 realisations for an error bar"));
    }
    for p in probes {
        p.check(sim.grid())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.n_workers)
        .build()
        .map_err(|e| EslnError::config("workers", e.to_string()))?;
    let filters = sim.filters();
    let slots = 4 * probes.len();
    let block = |lo: usize, hi: usize| {
        let mut synth = NoiseSynthesizer::new(filters);
        let streams: Vec<_> = (lo..hi)
            .map(|i| synth.draw(&mut trajectory_rng(spec.master_seed, i as u64), true))
            .collect();
        let mut acc = Compensated::zeros(slots);
        for r in synth.synthesize_batch(&streams, &spec.scaling) {
            for (k, p) in probes.iter().enumerate() {
                let z = p.estimate(&r);
                acc.add(4 * k, z.re);
                acc.add(4 * k + 1, z.im);
                acc.add(4 * k + 2, z.re * z.re);
                acc.add(4 * k + 3, z.im * z.im);
            }
        }
        acc
    };

    let blocks: Vec<(usize, usize)> = (0..spec.n_samples)
        .step_by(BLOCK_LEN)
        .map(|lo| (lo, (lo + BLOCK_LEN).min(spec.n_samples)))
        .collect();
    let mut total = Compensated::zeros(slots);
    for wave in blocks.chunks(4 * pool.current_num_threads()) {
        let parts: Vec<Compensated> = pool.install(|| wave.par_iter().map(|&(lo, hi)| block(lo, hi)).collect());
        parts.iter().for_each(|p| total.merge(p));
    }

    let s = spec.n_samples as f64;
    let estimates = probes
        .iter()
        .enumerate()
        .map(|(k, &probe)| {
            let mean = C::new(total.get(4 * k), total.get(4 * k + 1)) / s;
            let var_re = (total.get(4 * k + 2) / s - mean.re * mean.re).max(0.0);
            let var_im = (total.get(4 * k + 3) / s - mean.im * mean.im).max(0.0);
            let stderr = ((var_re + var_im) / (s - 1.0)).sqrt();
            ProbeEstimate {
                probe,
                target: probe.target(sim.kernels()),
                mean,
                stderr,
            }
        })
        .collect();
    Ok(CorrelationReport {
        n_samples: spec.n_samples,
        estimates,
    })
}
