//! Monte-Carlo ensembles over independent trajectories.
//!
//! Trajectory i belongs to batch ⌊i·B/S⌋. Each batch is cut into blocks of at
//! most [`BLOCK_LEN`] trajectories; blocks are computed in parallel but folded
//! into their batch strictly in index order with compensated sums, so results
//! do not depend on the worker count.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EslnError, Result};
use crate::kernels::{eval_kernels, BathSpec, KernelTable, QuadratureSpec, TimeGrid};
use crate::noise::{build_filters, FilterSet, NoiseRealisation, NoiseSynthesizer, ScalingSpec};
use crate::propagate::{
    propagate_trajectory, strat_prefactor_imag, strat_prefactor_real, thermalise, DensityMatrix, Exclusion, Readout,
    SchemeSpec, SpinBosonDrive, StepContext, Stepper, Variant,
};
use crate::seed::trajectory_rng;

type C = Complex64;

/// Trajectories per block; one η_μ matrix product covers a block.
pub const BLOCK_LEN: usize = 16;
/// Exclusion fraction above which a result is flagged unreliable.
pub const EXCLUSION_BUDGET: f64 = 0.01;
pub const MIN_BATCHES: usize = 6;
/// |σ_z/Tr ρ| above this counts as a spike.
pub const SPIKE_THRESHOLD: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// Imaginary-time preparation at ε(t0) from ρ̄(0) = I, with η_μ coupling.
    Thermal,
    /// A fixed factorised state; no imaginary-time noise is drawn.
    Pure(DensityMatrix),
}

impl InitialState {
    pub fn is_thermal(&self) -> bool {
        matches!(self, Self::Thermal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingSpec {
    pub n_samples: usize,
    pub master_seed: u64,
    pub n_batches: usize,
    /// 0 lets rayon pick.
    pub n_workers: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            master_seed: 0,
            n_batches: 12,
            n_workers: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(EslnError::config("samples", "must be at least 1"));
        }
        if self.n_batches < MIN_BATCHES {
            return Err(EslnError::config("batches", format!("must be at least {MIN_BATCHES}")));
        }
        Ok(())
    }

    fn batch_of(&self, i: usize) -> usize {
        (i as u128 * self.n_batches as u128 / self.n_samples as u128) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub drive: SpinBosonDrive,
    pub scheme: SchemeSpec,
    pub scaling: ScalingSpec,
    pub init: InitialState,
    pub sampling: SamplingSpec,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.scaling.validate()?;
        self.sampling.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub bath: BathSpec,
    pub grid: TimeGrid,
    pub quadrature: QuadratureSpec,
    pub spec: EnsembleSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExclusionRecord {
    /// Seed index of the failed trajectory; retries use index + S.
    pub seed_index: u64,
    pub reason: Exclusion,
}

/// Batch-mean standard errors per node.
#[derive(Clone, Debug, PartialEq)]
pub struct StdErrors {
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    /// |δ(Tr ρ)| from the spread of the real and imaginary parts together.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub trace: Vec<C>,
    /// Absent when fewer trajectories than batches contributed.
    pub stderr: Option<StdErrors>,
    pub n_batches: usize,
    /// Trajectories that entered the averages.
    pub n_samples: usize,
    /// Slots whose first trajectory was excluded.
    pub n_excluded: usize,
    /// Slots whose retry was excluded as well; these are missing from the averages.
    pub n_dropped: usize,
    pub exclusions: Vec<ExclusionRecord>,
    /// 1/Tr⟨ρ(t0)⟩.
    pub normalisation: C,
    /// Realisations where a rescaling pair was skipped (a component vanished).
    pub rescale_skipped: usize,
    /// Largest |Tr ρ(t) − Tr ρ(t0)| over contributing trajectories.
    pub max_trace_drift: f64,
    /// Per node, the largest |σ_z/Tr ρ| over contributing trajectories.
    pub spin_peak: Vec<f64>,
    pub unreliable: bool,
}

impl EnsembleResult {
    pub fn exclusion_fraction(&self) -> f64 {
        self.n_excluded as f64 / (self.n_samples + self.n_dropped).max(1) as f64
    }

    /// First node whose spin peak exceeds [`SPIKE_THRESHOLD`].
    pub fn first_spike(&self) -> Option<f64> {
        self.spin_peak.iter().position(|&p| !(p <= SPIKE_THRESHOLD)).map(|n| self.times[n])
    }
}

/// Neumaier-compensated sums over a fixed number of slots.
#[derive(Clone, Debug)]
pub(crate) struct Compensated {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl Compensated {
    pub(crate) fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, k: usize, x: f64) {
        let s = self.sum[k];
        let t = s + x;
        self.comp[k] += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        self.sum[k] = t;
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        for k in 0..self.sum.len() {
            self.add(k, other.sum[k]);
            self.add(k, other.comp[k]);
        }
    }

    pub(crate) fn get(&self, k: usize) -> f64 {
        self.sum[k] + self.comp[k]
    }
}

/// Per-batch accumulator: 8 reals per node (σ_x, σ_y, σ_z, Tr ρ as re/im)
/// followed by Tr ρ(t0).
#[derive(Clone, Debug)]
struct Partial {
    acc: Compensated,
    count: usize,
    excluded: usize,
    dropped: usize,
    exclusions: Vec<ExclusionRecord>,
    rescale_skipped: usize,
    max_trace_drift: f64,
    spin_peak: Vec<f64>,
}

impl Partial {
    fn new(nodes: usize) -> Self {
        Self {
            acc: Compensated::zeros(8 * nodes + 2),
            count: 0,
            excluded: 0,
            dropped: 0,
            exclusions: Vec::new(),
            rescale_skipped: 0,
            max_trace_drift: 0.0,
            spin_peak: vec![0.0; nodes],
        }
    }

    fn push(&mut self, t0_trace: C, readout: &[Readout], normalised: bool) {
        for (n, r) in readout.iter().enumerate() {
            for (j, z) in r.iter().enumerate() {
                self.acc.add(8 * n + 2 * j, z.re);
                self.acc.add(8 * n + 2 * j + 1, z.im);
            }
            let ratio = if normalised { r[2] / t0_trace } else { r[2] / r[3] };
            let drift = (r[3] - t0_trace).norm();
            // NaN-propagating maxima, so a non-finite value is never hidden.
            self.spin_peak[n] = nan_max(self.spin_peak[n], ratio.norm());
            self.max_trace_drift = nan_max(self.max_trace_drift, drift);
        }
        let k = self.acc.sum.len() - 2;
        self.acc.add(k, t0_trace.re);
        self.acc.add(k + 1, t0_trace.im);
        self.count += 1;
    }

    fn merge(&mut self, other: Partial) {
        self.acc.merge(&other.acc);
        self.count += other.count;
        self.excluded += other.excluded;
        self.dropped += other.dropped;
        self.exclusions.extend(other.exclusions);
        self.rescale_skipped += other.rescale_skipped;
        self.max_trace_drift = nan_max(self.max_trace_drift, other.max_trace_drift);
        for (a, b) in self.spin_peak.iter_mut().zip(other.spin_peak) {
            *a = nan_max(*a, b);
        }
    }

    fn node(&self, n: usize, j: usize) -> C {
        C::new(self.acc.get(8 * n + 2 * j), self.acc.get(8 * n + 2 * j + 1))
    }

    fn t0_trace(&self) -> C {
        let k = self.acc.sum.len() - 2;
        C::new(self.acc.get(k), self.acc.get(k + 1))
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Kernel tables and filters for one bath and grid, shared by every run on them.
pub struct Simulator {
    kernels: KernelTable,
    filters: FilterSet,
}

impl Simulator {
    pub fn new(bath: &BathSpec, grid: &TimeGrid, quadrature: &QuadratureSpec) -> Result<Self> {
        let kernels = eval_kernels(bath, grid, quadrature)?;
        let filters = build_filters(&kernels, grid)?;
        Ok(Self { kernels, filters })
    }

    pub fn kernels(&self) -> &KernelTable {
        &self.kernels
    }

    pub fn filters(&self) -> &FilterSet {
        &self.filters
    }

    pub fn grid(&self) -> &TimeGrid {
        self.kernels.grid()
    }

    pub fn bath(&self) -> &BathSpec {
        self.kernels.bath()
    }

    pub fn run(&self, spec: &EnsembleSpec) -> Result<EnsembleResult> {
        spec.validate()?;
        let sampling = spec.sampling;
        let grid = *self.grid();
        let nodes = grid.n_steps + 1;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(sampling.n_workers)
            .build()
            .map_err(|e| EslnError::config("workers", e.to_string()))?;

        let blocks = block_ranges(&sampling);
        let runner = TrajectoryRunner::new(self, spec);
        let mut batches: Vec<Partial> = (0..sampling.n_batches).map(|_| Partial::new(nodes)).collect();
        let wave_len = 4 * pool.current_num_threads();
        for wave in blocks.chunks(wave_len) {
            let partials: Vec<Partial> =
                pool.install(|| wave.par_iter().map(|&(lo, hi)| runner.block(lo, hi)).collect());
            for (&(lo, _), p) in wave.iter().zip(partials) {
                batches[sampling.batch_of(lo)].merge(p);
            }
        }
        Ok(reduce(&grid, spec, batches))
    }
}

/// Contiguous index ranges of at most [`BLOCK_LEN`], never straddling a batch.
fn block_ranges(s: &SamplingSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut lo = 0;
    while lo < s.n_samples {
        let b = s.batch_of(lo);
        let mut hi = (lo + BLOCK_LEN).min(s.n_samples);
        while s.batch_of(hi - 1) != b {
            hi -= 1;
        }
        out.push((lo, hi));
        lo = hi;
    }
    out
}

struct TrajectoryRunner<'s> {
    sim: &'s Simulator,
    spec: EnsembleSpec,
    ctx: StepContext,
    strat_imag: f64,
}

impl<'s> TrajectoryRunner<'s> {
    fn new(sim: &'s Simulator, spec: &EnsembleSpec) -> Self {
        let grid = sim.grid();
        let heun = spec.scheme.stepper == Stepper::Heun;
        let ctx = StepContext {
            drive: spec.drive,
            dt: grid.dt,
            stepper: spec.scheme.stepper,
            strat_real: if heun { strat_prefactor_real(sim.filters.strat_sum_eta_eta(), grid.dt) } else { 0.0 },
        };
        let strat_imag = if heun { strat_prefactor_imag(sim.filters.strat_sum_mu_mu(), grid.dtau) } else { 0.0 };
        Self {
            sim,
            spec: *spec,
            ctx,
            strat_imag,
        }
    }

    fn block(&self, lo: usize, hi: usize) -> Partial {
        let grid = self.sim.grid();
        let thermal = self.spec.init.is_thermal();
        let normalised = self.spec.scheme.variant == Variant::Normalised;
        let seed = self.spec.sampling.master_seed;
        let n = self.spec.sampling.n_samples as u64;
        let mut synth = NoiseSynthesizer::new(&self.sim.filters);
        let streams: Vec<_> = (lo..hi)
            .map(|i| synth.draw(&mut trajectory_rng(seed, i as u64), thermal))
            .collect();
        let noises = synth.synthesize_batch(&streams, &self.spec.scaling);
        drop(streams);

        let mut part = Partial::new(grid.n_steps + 1);
        let mut out = Vec::with_capacity(grid.n_steps + 1);
        for (i, noise) in (lo..hi).zip(noises) {
            part.rescale_skipped += usize::from(thermal && noise.rescale.skipped_any());
            match self.trajectory(&noise, &mut out) {
                Ok(t0) => part.push(t0, &out, normalised),
                Err(reason) => {
                    part.excluded += 1;
                    part.exclusions.push(ExclusionRecord {
                        seed_index: i as u64,
                        reason,
                    });
                    let retry_index = i as u64 + n;
                    let retry = synth.synthesize(&mut trajectory_rng(seed, retry_index), &self.spec.scaling, thermal);
                    part.rescale_skipped += usize::from(thermal && retry.rescale.skipped_any());
                    match self.trajectory(&retry, &mut out) {
                        Ok(t0) => part.push(t0, &out, normalised),
                        Err(reason) => {
                            part.dropped += 1;
                            part.exclusions.push(ExclusionRecord {
                                seed_index: retry_index,
                                reason,
                            });
                        }
                    }
                }
            }
        }
        part
    }

    fn trajectory(&self, noise: &NoiseRealisation, out: &mut Vec<Readout>) -> Result<C, Exclusion> {
        let grid = self.sim.grid();
        let rho0 = match self.spec.init {
            InitialState::Thermal => thermalise(
                &self.spec.drive,
                grid.t0,
                &noise.mu,
                grid.dtau,
                self.spec.scheme.stepper,
                self.strat_imag,
            )?,
            InitialState::Pure(rho) => rho,
        };
        propagate_trajectory(
            rho0,
            &noise.eta,
            &noise.nu,
            grid.t0,
            &self.ctx,
            &self.spec.scheme,
            self.sim.kernels.k_eta_nu_lags(),
            out,
        )?;
        Ok(rho0.trace())
    }
}

fn reduce(grid: &TimeGrid, spec: &EnsembleSpec, batches: Vec<Partial>) -> EnsembleResult {
    let nodes = grid.n_steps + 1;
    let mut total = Partial::new(nodes);
    for b in &batches {
        total.merge(b.clone());
    }
    let count = total.count.max(1) as f64;
    let norm = count / total.t0_trace();
    let mean = |n: usize, j: usize| norm * total.node(n, j) / count;

    let sx = (0..nodes).map(|n| mean(n, 0).re).collect();
    let sy = (0..nodes).map(|n| mean(n, 1).re).collect();
    let sz = (0..nodes).map(|n| mean(n, 2).re).collect();
    let trace = (0..nodes).map(|n| mean(n, 3)).collect();

    // Each batch is its own ratio estimate Σσ/ΣTr ρ(t0), so the spread also
    // carries the fluctuation of the normalisation.
    let usable = batches.iter().all(|b| b.count > 0) && total.count >= spec.sampling.n_batches;
    let stderr = usable.then(|| {
        let ratio = |b: &Partial, n: usize, j: usize| b.node(n, j) / b.t0_trace();
        let spread = |n: usize, j: usize, part: fn(C) -> f64| {
            std_error(batches.iter().map(|b| part(ratio(b, n, j))))
        };
        StdErrors {
            sx: (0..nodes).map(|n| spread(n, 0, |z| z.re)).collect(),
            sy: (0..nodes).map(|n| spread(n, 1, |z| z.re)).collect(),
            sz: (0..nodes).map(|n| spread(n, 2, |z| z.re)).collect(),
            trace: (0..nodes)
                .map(|n| spread(n, 3, |z| z.re).hypot(spread(n, 3, |z| z.im)))
                .collect(),
        }
    });

    let mut exclusions = total.exclusions;
    exclusions.sort_by_key(|e| e.seed_index);
    let requested = spec.sampling.n_samples;
    EnsembleResult {
        times: (0..nodes).map(|n| grid.time(n)).collect(),
        sx,
        sy,
        sz,
        trace,
        stderr,
        n_batches: spec.sampling.n_batches,
        n_samples: total.count,
        n_excluded: total.excluded,
        n_dropped: total.dropped,
        exclusions,
        normalisation: norm,
        rescale_skipped: total.rescale_skipped,
        max_trace_drift: total.max_trace_drift,
        spin_peak: total.spin_peak,
        unreliable: total.excluded as f64 > EXCLUSION_BUDGET * requested as f64,
    }
}

/// Standard error of the mean of independent estimates.
pub fn std_error(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    Simulator::new(&config.bath, &config.grid, &config.quadrature)?.run(&config.spec)
}

/// Asymptotic ⟨σ_z⟩ of an isolated spin swept through the crossing from the
/// infinite past: 2e^{−πΔ²/2κ} − 1.
pub fn lz_limit(delta: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(EslnError::domain(format!("sweep rate must be positive, got {kappa}")));
    }
    Ok(2.0 * (-PI * delta * delta / (2.0 * kappa)).exp() - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Time-average of σ_z over the window.
    pub value: f64,
    pub window: (f64, f64),
    pub times: Vec<f64>,
    pub sz: Vec<f64>,
}

/// Late-time ⟨σ_z⟩ of the isolated spin started in σ_z = 1 at t0 < 0 and
/// swept with ε = κt up to `t_max`, averaged from the first maximum after the
/// global minimum to the end.
///
/// The isolated spin is integrated with an exactly unitary fourth-order Magnus
/// step: at |ε|·dt ≳ 0.1 the stochastic Heun scheme is no longer accurate
/// enough for a calibration, and it is unstable beyond |ε|·dt ≈ 0.3.
pub fn modified_lz_limit(delta: f64, kappa: f64, t0: f64, t_max: f64, dt: f64) -> Result<Calibration> {
    if !(t0 < 0.0) {
        return Err(EslnError::domain(format!("preparation time must be negative, got {t0}")));
    }
    lz_limit(delta, kappa)?;
    if !(dt > 0.0) {
        return Err(EslnError::domain(format!("time step must be positive, got {dt}")));
    }
    let n = ((t_max - t0) / dt).round() as usize;
    if n < 3 {
        return Err(EslnError::Window("sweep shorter than three steps".into()));
    }
    let times: Vec<f64> = (0..=n).map(|h| t0 + h as f64 * dt).collect();
    let mut psi = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
    let mut sz = Vec::with_capacity(n + 1);
    sz.push(1.0);
    for &t in &times[..n] {
        psi = magnus4_sweep_step(psi, delta, kappa, t, dt);
        sz.push(psi[0].norm_sqr() - psi[1].norm_sqr());
    }

    let min = (0..=n).min_by(|&a, &b| sz[a].total_cmp(&sz[b])).expect("nonempty");
    let start = (min + 1..n)
        .find(|&h| sz[h] >= sz[h - 1] && sz[h] > sz[h + 1])
        .ok_or_else(|| EslnError::Window("no maximum after the minimum".into()))?;
    let value = sz[start..].iter().sum::<f64>() / (n + 1 - start) as f64;
    Ok(Calibration {
        value,
        window: (times[start], times[n]),
        times,
        sz,
    })
}

/// ψ(t + dt) for H = (Δσ_x + κtσ_z)/2 with the two-point Gauss–Legendre Magnus
/// expansion, exp(−i a·σ) with a_y from the commutator [H(t₂), H(t₁)].
fn magnus4_sweep_step(psi: [C; 2], delta: f64, kappa: f64, t: f64, dt: f64) -> [C; 2] {
    let c = 3f64.sqrt() / 6.0;
    let (e1, e2) = (kappa * (t + (0.5 - c) * dt), kappa * (t + (0.5 + c) * dt));
    let ax = 0.5 * delta * dt;
    let ay = 3f64.sqrt() / 24.0 * delta * (e2 - e1) * dt * dt;
    let az = 0.25 * (e1 + e2) * dt;
    let norm = (ax * ax + ay * ay + az * az).sqrt();
    let (cs, sn) = (norm.cos(), if norm > 0.0 { norm.sin() / norm } else { 1.0 });
    // exp(−i a·σ) = cos|a| − i sin|a|·(a·σ)/|a|
    let mi = C::new(0.0, -sn);
    let u11 = cs + mi * az;
    let u22 = cs - mi * az;
    let u12 = mi * C::new(ax, -ay);
    let u21 = mi * C::new(ax, ay);
    [u11 * psi[0] + u12 * psi[1], u21 * psi[0] + u22 * psi[1]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Asymptote {
    pub mean: f64,
    pub stderr: f64,
    pub n_nodes: usize,
}

/// Mean of `values` over the nodes with t in `window`, with the error from
/// `n_batches` contiguous, equally long stretches of the window.
pub fn boxed_mean(times: &[f64], values: &[f64], window: (f64, f64), n_batches: usize) -> Result<Asymptote> {
    let (ta, tb) = window;
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(EslnError::Window("empty time axis".into())),
    };
    let slack = 1e-9 * (last - first).abs().max(1.0);
    if !(ta < tb) || ta < first - slack || tb > last + slack {
        return Err(EslnError::Window(format!("[{ta}, {tb}] not inside [{first}, {last}]")));
    }
    if n_batches < MIN_BATCHES {
        return Err(EslnError::config("batches", format!("must be at least {MIN_BATCHES}")));
    }
    let idx: Vec<usize> = (0..times.len())
        .filter(|&n| times[n] >= ta - slack && times[n] <= tb + slack)
        .collect();
    let len = idx.len();
    if len < n_batches {
        return Err(EslnError::Window(format!("{len} nodes cannot form {n_batches} batches")));
    }
    let means: Vec<f64> = (0..n_batches)
        .map(|b| {
            let (lo, hi) = (b * len / n_batches, (b + 1) * len / n_batches);
            idx[lo..hi].iter().map(|&n| values[n]).sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    Ok(Asymptote {
        mean: idx.iter().map(|&n| values[n]).sum::<f64>() / len as f64,
        stderr: std_error(means),
        n_nodes: len,
    })
}

pub fn asymptote_estimate(result: &EnsembleResult, window: (f64, f64), n_batches: usize) -> Result<Asymptote> {
    boxed_mean(&result.times, &result.sz, window, n_batches)
}

/// Default boxed region [0.35·t_max, t_max].
pub fn default_window(grid: &TimeGrid) -> (f64, f64) {
    (0.35 * grid.t_max(), grid.t_max())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// Renormalised tunnelling Δ(Δ/ω_c)^{α/(1−α)}.
    pub delta_r: f64,
    /// Thermal over bias energy at the end of the run, (1/β)/ε(t_max).
    pub q: f64,
}

pub fn diagnostics(bath: &BathSpec, drive: &SpinBosonDrive, grid: &TimeGrid) -> Result<Diagnostics> {
    if !(bath.alpha < 1.0) {
        return Err(EslnError::domain(format!("renormalised tunnelling needs alpha < 1, got {}", bath.alpha)));
    }
    let d = drive.delta;
    Ok(Diagnostics {
        delta_r: d * (d / bath.omega_c).powf(bath.alpha / (1.0 - bath.alpha)),
        q: (1.0 / bath.beta_hbar) / drive.epsilon_at(grid.t_max()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub r_nu_eta: f64,
    /// Standard error of Tr⟨ρ(t_max)⟩; absent without enough samples.
    pub stderr: Option<f64>,
    pub n_excluded: usize,
}

/// Final-time trace error against r_νη for the unbiased (ε = Δ = 0) spin,
/// reusing one set of kernels and filters.
pub fn variance_scan(config: &EnsembleConfig, r_values: &[f64]) -> Result<Vec<ScanPoint>> {
    let sim = Simulator::new(&config.bath, &config.grid, &config.quadrature)?;
    r_values
        .iter()
        .map(|&r| {
            let mut spec = config.spec;
            spec.drive = SpinBosonDrive::constant(0.0, 0.0);
            spec.scaling = ScalingSpec::new(r, config.spec.scaling.r_mu_eta)?;
            let res = sim.run(&spec)?;
            Ok(ScanPoint {
                r_nu_eta: r,
                stderr: res.stderr.as_ref().map(|e| e.trace[e.trace.len() - 1]),
                n_excluded: res.n_excluded,
            })
        })
        .collect()
}
