//! Coloured noise synthesis by filtering white noise.
//!
//! Spectra carry the factor dt (or dτ): K̃[k] = dt·Σ_l K(l)e^{−2πikl/P}, so a
//! convolution dt·Σ_s G(n−s)x(s) is IDFT(G̃·X)/P with X the unscaled DFT of x.
//! All stationary real-time components live on a circular grid of P nodes
//! with white noise at every node, so their discrete correlations equal the
//! circularly placed kernel exactly. The imaginary-time kernel K_μμ is
//! β-periodic and is synthesised on its natural period of M nodes.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{EslnError, Result};
use crate::kernels::{KernelTable, TimeGrid};
use crate::lowrank::{cross_approximation, LowRank};

const NEGATIVE_SPECTRUM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingSpec {
    pub r_nu_eta: f64,
    pub r_mu_eta: f64,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            r_nu_eta: 0.5,
            r_mu_eta: 1.0,
        }
    }
}

impl ScalingSpec {
    pub fn new(r_nu_eta: f64, r_mu_eta: f64) -> Result<Self> {
        let s = Self { r_nu_eta, r_mu_eta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_nu_eta > 0.0 && self.r_nu_eta.is_finite()) {
            return Err(EslnError::config("r_nu_eta", "must be finite and > 0"));
        }
        if !(self.r_mu_eta > 0.0 && self.r_mu_eta.is_finite()) {
            return Err(EslnError::config("r_mu_eta", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Filtering kernels. Real-time lag filters are stored circularly on P nodes
/// (index l is lag l for l < P/2 and lag l − P above); G_μμ on its period M.
#[derive(Clone, Debug)]
pub struct FilterSet {
    grid: TimeGrid,
    conv_len: usize,
    g_eta_eta: Vec<f64>,
    g_eta_nu: Vec<Complex64>,
    g_nu_eta: Vec<Complex64>,
    g_mu_mu: Vec<f64>,
    /// G̃_ηη on the P/2 + 1 non-negative bins.
    spec_eta_eta: Vec<f64>,
    spec_eta_nu: Vec<Complex64>,
    spec_nu_eta: Vec<Complex64>,
    /// G̃_μμ on the M/2 + 1 non-negative bins.
    spec_mu_mu: Vec<f64>,
    eta_mu: EtaMuOperator,
    eta_mu_rows: usize,
    strat_eta_eta: f64,
    strat_mu_mu: f64,
}

impl FilterSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn conv_len(&self) -> usize {
        self.conv_len
    }

    fn circ(&self, lag: isize) -> usize {
        lag.rem_euclid(self.conv_len as isize) as usize
    }

    pub fn g_eta_eta(&self, lag: isize) -> f64 {
        self.g_eta_eta[self.circ(lag)]
    }

    pub fn g_eta_nu(&self, lag: isize) -> Complex64 {
        self.g_eta_nu[self.circ(lag)]
    }

    pub fn g_nu_eta(&self, lag: isize) -> Complex64 {
        self.g_nu_eta[self.circ(lag)]
    }

    pub fn g_mu_mu(&self, lag: isize) -> f64 {
        self.g_mu_mu[lag.rem_euclid(self.grid.m_steps as isize) as usize]
    }

    /// G_ημ(t_n, τ_m) = −(i/2)K_ημ(t_n, τ_m); zero past the retained rows.
    pub fn g_eta_mu(&self, n: usize, m: usize) -> Complex64 {
        if n >= self.eta_mu_rows {
            return Complex64::new(0.0, 0.0);
        }
        let s = 1.0 / self.grid.dtau;
        match &self.eta_mu {
            EtaMuOperator::Dense(rhs) => {
                let cols = self.grid.m_steps + 1;
                Complex64::new(rhs[[m, n]] * s, rhs[[cols + m, n]] * s)
            }
            EtaMuOperator::Factored { exact, .. } => exact.get(n, m) * s,
        }
    }

    /// Rank of the factorised η_μ operator; `None` when it is applied densely.
    pub fn eta_mu_rank(&self) -> Option<usize> {
        match &self.eta_mu {
            EtaMuOperator::Dense(_) => None,
            EtaMuOperator::Factored { exact, .. } => Some(exact.rank()),
        }
    }

    pub fn eta_mu_rows(&self) -> usize {
        self.eta_mu_rows
    }

    /// G_μη(τ) = δ(τ), realised as amplitude 1/dτ at lag zero.
    pub fn mu_eta_is_white(&self) -> bool {
        true
    }

    pub fn g_mu_eta_amplitude(&self) -> f64 {
        1.0 / self.grid.dtau
    }

    pub fn spectrum_eta_eta(&self) -> &[f64] {
        &self.spec_eta_eta
    }

    pub fn spectrum_eta_nu(&self) -> &[Complex64] {
        &self.spec_eta_nu
    }

    pub fn spectrum_nu_eta(&self) -> &[Complex64] {
        &self.spec_nu_eta
    }

    pub fn spectrum_mu_mu(&self) -> &[f64] {
        &self.spec_mu_mu
    }

    /// Σ over all lags of G_ηη², the scalar in the real-time Stratonovich correction.
    pub fn strat_sum_eta_eta(&self) -> f64 {
        self.strat_eta_eta
    }

    /// Σ over one period of G_μμ², the scalar in the imaginary-time correction.
    pub fn strat_sum_mu_mu(&self) -> f64 {
        self.strat_mu_mu
    }
}

fn check_spectrum(filter: &'static str, spec: &[f64]) -> Result<()> {
    let max = spec.iter().copied().fold(0.0, f64::max);
    if let Some((bin, &value)) = spec
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -NEGATIVE_SPECTRUM_TOL * max || v.is_nan())
    {
        return Err(EslnError::NegativeSpectrum {
            filter,
            bin,
            value,
            max,
        });
    }
    Ok(())
}

pub fn build_filters(kernels: &KernelTable, grid: &TimeGrid) -> Result<FilterSet> {
    if kernels.grid() != grid {
        return Err(EslnError::GridMismatch(
            "kernel table was evaluated on a different grid".into(),
        ));
    }
    let p = grid.conv_len(kernels.bath());
    let half = p / 2;
    if kernels.max_lag() < half {
        return Err(EslnError::GridMismatch(format!(
            "kernel table holds {} lags, filters need {half}",
            kernels.max_lag()
        )));
    }
    let (dt, dtau, m) = (grid.dt, grid.dtau, grid.m_steps);
    let mut real_planner = RealFftPlanner::<f64>::new();
    let mut planner = FftPlanner::<f64>::new();

    // G_ηη: even real kernel, real nonnegative spectrum.
    let mut buf = vec![0.0; p];
    for l in 0..=half {
        let k = kernels.k_eta_eta(l as isize);
        buf[l] = k;
        if l > 0 && l < half {
            buf[p - l] = k;
        }
    }
    let k_eta_eta_spec = real_spectrum(&mut real_planner, &mut buf, dt);
    check_spectrum("G_eta_eta", &k_eta_eta_spec)?;
    let spec_eta_eta: Vec<f64> = k_eta_eta_spec.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let g_eta_eta = real_lag_filter(&mut real_planner, &spec_eta_eta, p, dt);

    // G_ην, G_νη: G̃_ην(k) = √(−(i/2)K̃_ην(k)), G̃_νη(k) = G̃_ην(−k).
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let mut cbuf = vec![Complex64::new(0.0, 0.0); p];
    for (l, z) in cbuf.iter_mut().enumerate().take(half).skip(1) {
        *z = kernels.k_eta_nu(l as isize);
    }
    fwd.process(&mut cbuf);
    let spec_eta_nu: Vec<Complex64> = cbuf
        .iter()
        .map(|&k| (Complex64::new(0.0, -0.5) * k * dt).sqrt())
        .collect();
    let spec_nu_eta: Vec<Complex64> = (0..p).map(|k| spec_eta_nu[(p - k) % p]).collect();
    let g_eta_nu = complex_lag_filter(inv.as_ref(), &spec_eta_nu, dt);
    let g_nu_eta = complex_lag_filter(inv.as_ref(), &spec_nu_eta, dt);

    // G_μμ on the period: K_μμ(τ) = K_μμ(β − τ) makes the circular sequence even.
    let mut mbuf: Vec<f64> = kernels.k_mu_mu_lags()[..m].to_vec();
    let k_mu_mu_spec = real_spectrum(&mut real_planner, &mut mbuf, dtau);
    check_spectrum("G_mu_mu", &k_mu_mu_spec)?;
    let spec_mu_mu: Vec<f64> = k_mu_mu_spec.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let g_mu_mu = real_lag_filter(&mut real_planner, &spec_mu_mu, m, dtau);

    let table = kernels.eta_mu();
    let rows = table.rows().min(grid.n_steps + 1);
    let eta_mu = EtaMuOperator::new(table.row_block(rows), dtau);

    let strat_eta_eta = g_eta_eta.iter().map(|g| g * g).sum();
    let strat_mu_mu = g_mu_mu.iter().map(|g| g * g).sum();

    Ok(FilterSet {
        grid: *grid,
        conv_len: p,
        g_eta_eta,
        g_eta_nu,
        g_nu_eta,
        g_mu_mu,
        spec_eta_eta,
        spec_eta_nu,
        spec_nu_eta,
        spec_mu_mu,
        eta_mu,
        eta_mu_rows: rows,
        strat_eta_eta,
        strat_mu_mu,
    })
}

/// Largest deviation of the factorised η_μ operator from the dense one,
/// relative to max|G_ημ|.
pub const ETA_MU_COMPRESSION_TOL: f64 = 1e-13;

/// dτ·G_ημ as a linear map from the complex white stream x̄₂ + i x̄₃ on the
/// M + 1 imaginary nodes to the retained real-time rows.
#[derive(Clone, Debug)]
enum EtaMuOperator {
    /// Embedded (Re over Im) transpose, shape (2(M + 1), rows).
    Dense(Array2<f64>),
    /// dτ·G_ημ = U·V to within [`ETA_MU_COMPRESSION_TOL`]; the white stream is
    /// first projected on the rows of V, then expanded with U.
    Factored {
        exact: LowRank,
        v_rhs: Array2<f64>,
        u_rhs: Array2<f64>,
    },
}

impl EtaMuOperator {
    fn new(k: ArrayView2<Complex64>, dtau: f64) -> Self {
        let g = k.mapv(|z| Complex64::new(0.0, -0.5) * z * dtau);
        let (rows, cols) = g.dim();
        // Beyond about half the columns the two products cost more than one.
        match cross_approximation(g.view(), ETA_MU_COMPRESSION_TOL, cols / 2) {
            Some(lr) => Self::Factored {
                v_rhs: embed_rhs(lr.v.t()),
                u_rhs: embed_rhs(lr.u.t()),
                exact: lr,
            },
            None if rows == 0 => Self::Dense(Array2::zeros((2 * cols, 0))),
            None => Self::Dense(embed_rhs(g.t())),
        }
    }

    /// One row of η_μ per row of `x`.
    fn apply(&self, x: ArrayView2<Complex64>) -> Array2<Complex64> {
        match self {
            Self::Dense(rhs) => complex_product(x, rhs),
            Self::Factored { v_rhs, u_rhs, .. } => complex_product(complex_product(x, v_rhs).view(), u_rhs),
        }
    }
}

/// [Re B; Im B] for a complex B of shape (k, n).
fn embed_rhs(b: ArrayView2<Complex64>) -> Array2<f64> {
    let (k, n) = b.dim();
    Array2::from_shape_fn((2 * k, n), |(i, j)| if i < k { b[[i, j]].re } else { b[[i - k, j]].im })
}

/// X·B for complex X given B embedded by [`embed_rhs`], as one real product
/// with [Re x, −Im x] and [Im x, Re x] rows per row x of X.
fn complex_product(x: ArrayView2<Complex64>, rhs: &Array2<f64>) -> Array2<Complex64> {
    let (b, k) = x.dim();
    let mut lhs = Array2::<f64>::zeros((2 * b, 2 * k));
    for (j, row) in x.rows().into_iter().enumerate() {
        for (m, z) in row.iter().enumerate() {
            lhs[[2 * j, m]] = z.re;
            lhs[[2 * j, k + m]] = -z.im;
            lhs[[2 * j + 1, m]] = z.im;
            lhs[[2 * j + 1, k + m]] = z.re;
        }
    }
    let prod = lhs.dot(rhs);
    Array2::from_shape_fn((b, rhs.ncols()), |(j, n)| Complex64::new(prod[[2 * j, n]], prod[[2 * j + 1, n]]))
}

/// step·DFT of an even real sequence; the imaginary parts vanish to round-off.
fn real_spectrum(planner: &mut RealFftPlanner<f64>, buf: &mut [f64], step: f64) -> Vec<f64> {
    let r2c = planner.plan_fft_forward(buf.len());
    let mut out = r2c.make_output_vec();
    r2c.process(buf, &mut out).expect("buffer sizes match the plan");
    out.iter().map(|z| z.re * step).collect()
}

fn real_lag_filter(planner: &mut RealFftPlanner<f64>, spec: &[f64], len: usize, step: f64) -> Vec<f64> {
    let c2r = planner.plan_fft_inverse(len);
    let mut input: Vec<Complex64> = spec.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = c2r.make_output_vec();
    c2r.process(&mut input, &mut out).expect("buffer sizes match the plan");
    let scale = 1.0 / (len as f64 * step);
    out.iter().map(|v| v * scale).collect()
}

fn complex_lag_filter(inv: &dyn Fft<f64>, spec: &[Complex64], step: f64) -> Vec<Complex64> {
    let mut buf = spec.to_vec();
    inv.process(&mut buf);
    let scale = 1.0 / (spec.len() as f64 * step);
    buf.iter().map(|z| z * scale).collect()
}

/// i.i.d. N(0, 1/step) samples, so the discrete correlation approximates δ(t − t′).
pub fn sample_white<R: Rng + ?Sized>(rng: &mut R, count: usize, step: f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    fill_white(rng, &mut out, step);
    out
}

pub fn fill_white<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64], step: f64) {
    let s = 1.0 / step.sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z * s;
    }
}

/// The white inputs of one realisation. The imaginary-time streams are empty
/// when the realisation has no thermal part.
#[derive(Clone, Debug, PartialEq)]
pub struct WhiteStreams {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub xb1: Vec<f64>,
    pub xb2: Vec<f64>,
    pub xb3: Vec<f64>,
}

impl WhiteStreams {
    pub fn is_thermal(&self) -> bool {
        !self.xb1.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseComponents {
    pub eta_eta: Vec<f64>,
    pub eta_nu: Vec<Complex64>,
    pub eta_mu: Vec<Complex64>,
    pub nu_eta: Vec<Complex64>,
    pub mu_mu: Vec<f64>,
    pub mu_eta: Vec<Complex64>,
}

/// Scale factors actually applied; `None` marks a pair skipped because one of
/// its components vanished identically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaleReport {
    pub a_mu_eta: Option<f64>,
    pub b_nu_eta: Option<f64>,
}

impl RescaleReport {
    pub fn skipped_any(&self) -> bool {
        self.a_mu_eta.is_none() || self.b_nu_eta.is_none()
    }
}

pub fn rescale(c: &mut NoiseComponents, scaling: &ScalingSpec) -> RescaleReport {
    let big_m = c.mu_eta.len().saturating_sub(1).max(1) as f64;
    let mu_mean = c.mu_eta.iter().map(|z| z.norm()).sum::<f64>() / big_m;
    let eta_max = c.eta_mu.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a = ratio_factor(scaling.r_mu_eta, mu_mean, eta_max);
    if let Some(a) = a {
        c.eta_mu.iter_mut().for_each(|z| *z *= a);
        c.mu_eta.iter_mut().for_each(|z| *z /= a);
    }

    let nu_sum: f64 = c.nu_eta.iter().map(|z| z.norm()).sum();
    let eta_sum: f64 = c.eta_nu.iter().map(|z| z.norm()).sum();
    let b = ratio_factor(scaling.r_nu_eta, nu_sum, eta_sum);
    if let Some(b) = b {
        c.eta_nu.iter_mut().for_each(|z| *z *= b);
        c.nu_eta.iter_mut().for_each(|z| *z /= b);
    }
    RescaleReport {
        a_mu_eta: a,
        b_nu_eta: b,
    }
}

fn ratio_factor(r: f64, num: f64, den: f64) -> Option<f64> {
    let f = (r * num / den).sqrt();
    (num > 0.0 && den > 0.0 && f.is_finite()).then_some(f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealisation {
    pub eta: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    pub mu: Vec<Complex64>,
    pub components: NoiseComponents,
    pub rescale: RescaleReport,
}

impl NoiseRealisation {
    pub fn assemble(components: NoiseComponents, rescale: RescaleReport) -> Self {
        let eta = components
            .eta_eta
            .iter()
            .zip(&components.eta_nu)
            .zip(&components.eta_mu)
            .map(|((&a, &b), &c)| a + b + c)
            .collect();
        let nu = components.nu_eta.clone();
        let mu = components
            .mu_mu
            .iter()
            .zip(&components.mu_eta)
            .map(|(&a, &b)| a + b)
            .collect();
        Self {
            eta,
            nu,
            mu,
            components,
            rescale,
        }
    }

    pub fn is_thermal(&self) -> bool {
        !self.mu.is_empty()
    }
}

/// Per-worker synthesis engine: FFT plans and scratch for one FilterSet.
pub struct NoiseSynthesizer<'f> {
    filters: &'f FilterSet,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    mu_r2c: Arc<dyn RealToComplex<f64>>,
    mu_c2r: Arc<dyn ComplexToReal<f64>>,
    rbuf: Vec<f64>,
    half_spec: Vec<Complex64>,
    wbuf: Vec<Complex64>,
    abuf: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl<'f> NoiseSynthesizer<'f> {
    pub fn new(filters: &'f FilterSet) -> Self {
        let p = filters.conv_len;
        let m = filters.grid.m_steps;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let fwd = cp.plan_fft_forward(p);
        let inv = cp.plan_fft_inverse(p);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let r2c = rp.plan_fft_forward(p);
        Self {
            filters,
            half_spec: r2c.make_output_vec(),
            r2c,
            c2r: rp.plan_fft_inverse(p),
            fwd,
            inv,
            mu_r2c: rp.plan_fft_forward(m),
            mu_c2r: rp.plan_fft_inverse(m),
            rbuf: vec![0.0; p],
            wbuf: vec![Complex64::new(0.0, 0.0); p],
            abuf: vec![Complex64::new(0.0, 0.0); p],
            fft_scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn filters(&self) -> &FilterSet {
        self.filters
    }

    /// Draws one realisation's white inputs in a fixed order: x₁, x₂, x₃ on the
    /// circular real grid, then x̄₁ (one period), x̄₂, x̄₃ (M + 1 nodes).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, thermal: bool) -> WhiteStreams {
        let g = &self.filters.grid;
        let p = self.filters.conv_len;
        let x1 = sample_white(rng, p, g.dt);
        let x2 = sample_white(rng, p, g.dt);
        let x3 = sample_white(rng, p, g.dt);
        let (xb1, xb2, xb3) = if thermal {
            (
                sample_white(rng, g.m_steps, g.dtau),
                sample_white(rng, g.m_steps + 1, g.dtau),
                sample_white(rng, g.m_steps + 1, g.dtau),
            )
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        WhiteStreams {
            x1,
            x2,
            x3,
            xb1,
            xb2,
            xb3,
        }
    }

    pub fn synthesize<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        scaling: &ScalingSpec,
        thermal: bool,
    ) -> NoiseRealisation {
        let streams = self.draw(rng, thermal);
        self.synthesize_batch(std::slice::from_ref(&streams), scaling)
            .pop()
            .expect("one realisation per stream set")
    }

    /// Unscaled components for each stream set; η_μ for the whole batch comes
    /// from one matrix product.
    pub fn components_batch(&mut self, streams: &[WhiteStreams]) -> Vec<NoiseComponents> {
        let eta_mu = self.eta_mu_batch(streams);
        streams
            .iter()
            .zip(eta_mu)
            .map(|(s, eta_mu)| {
                let mut c = self.stationary_components(s);
                c.eta_mu = eta_mu;
                c
            })
            .collect()
    }

    pub fn synthesize_batch(&mut self, streams: &[WhiteStreams], scaling: &ScalingSpec) -> Vec<NoiseRealisation> {
        self.components_batch(streams)
            .into_iter()
            .map(|mut c| {
                let report = rescale(&mut c, scaling);
                NoiseRealisation::assemble(c, report)
            })
            .collect()
    }

    fn stationary_components(&mut self, s: &WhiteStreams) -> NoiseComponents {
        let f = self.filters;
        let p = f.conv_len;
        let nodes = f.grid.n_steps + 1;
        let inv_p = 1.0 / p as f64;

        self.rbuf.copy_from_slice(&s.x1);
        self.r2c
            .process(&mut self.rbuf, &mut self.half_spec)
            .expect("buffer sizes match the plan");
        for (z, &g) in self.half_spec.iter_mut().zip(&f.spec_eta_eta) {
            *z *= g;
        }
        let last = self.half_spec.len() - 1;
        self.half_spec[0].im = 0.0;
        self.half_spec[last].im = 0.0;
        self.c2r
            .process(&mut self.half_spec, &mut self.rbuf)
            .expect("buffer sizes match the plan");
        let eta_eta: Vec<f64> = self.rbuf[..nodes].iter().map(|v| v * inv_p).collect();

        // w = x₂ + i x₃ drives η_ν; ν_η is driven by x₃ + i x₂ = i·conj(w).
        for ((z, &a), &b) in self.wbuf.iter_mut().zip(&s.x2).zip(&s.x3) {
            *z = Complex64::new(a, b);
        }
        self.fwd
            .process_with_scratch(&mut self.wbuf, &mut self.fft_scratch);
        for k in 0..p {
            self.abuf[k] = f.spec_nu_eta[k] * self.wbuf[(p - k) % p].conj();
        }
        for (z, &g) in self.wbuf.iter_mut().zip(&f.spec_eta_nu) {
            *z *= g;
        }
        self.inv
            .process_with_scratch(&mut self.wbuf, &mut self.fft_scratch);
        self.inv
            .process_with_scratch(&mut self.abuf, &mut self.fft_scratch);
        let eta_nu: Vec<Complex64> = self.wbuf[..nodes].iter().map(|z| z * inv_p).collect();
        let i_over_p = Complex64::new(0.0, inv_p);
        let nu_eta: Vec<Complex64> = self.abuf[..nodes].iter().map(|z| z * i_over_p).collect();

        let (mu_mu, mu_eta) = if s.is_thermal() {
            (self.mu_mu(&s.xb1), mu_eta(&s.xb2, &s.xb3))
        } else {
            (Vec::new(), Vec::new())
        };

        NoiseComponents {
            eta_eta,
            eta_nu,
            eta_mu: Vec::new(),
            nu_eta,
            mu_mu,
            mu_eta,
        }
    }

    fn mu_mu(&self, xb1: &[f64]) -> Vec<f64> {
        let f = self.filters;
        let m = f.grid.m_steps;
        let mut buf = xb1.to_vec();
        let mut spec = self.mu_r2c.make_output_vec();
        self.mu_r2c
            .process(&mut buf, &mut spec)
            .expect("buffer sizes match the plan");
        for (z, &g) in spec.iter_mut().zip(&f.spec_mu_mu) {
            *z *= g;
        }
        let last = spec.len() - 1;
        spec[0].im = 0.0;
        if m.is_multiple_of(2) {
            spec[last].im = 0.0;
        }
        self.mu_c2r
            .process(&mut spec, &mut buf)
            .expect("buffer sizes match the plan");
        let inv_m = 1.0 / m as f64;
        let mut out: Vec<f64> = buf.iter().map(|v| v * inv_m).collect();
        out.push(out[0]);
        out
    }

    /// η_μ(t_n) = dτ·Σ_m G_ημ(t_n, τ_m)(x̄₂ + i x̄₃)(τ_m) for every thermal
    /// stream set, as one batched product.
    fn eta_mu_batch(&self, streams: &[WhiteStreams]) -> Vec<Vec<Complex64>> {
        let f = self.filters;
        let nodes = f.grid.n_steps + 1;
        let cols = f.grid.m_steps + 1;
        let rows = f.eta_mu_rows;
        let thermal: Vec<usize> = streams
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_thermal())
            .map(|(i, _)| i)
            .collect();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); nodes]; streams.len()];
        if thermal.is_empty() {
            return out;
        }
        let x = Array2::from_shape_fn((thermal.len(), cols), |(j, m)| {
            let s = &streams[thermal[j]];
            Complex64::new(s.xb2[m], s.xb3[m])
        });
        let prod = f.eta_mu.apply(x.view());
        for (j, &i) in thermal.iter().enumerate() {
            out[i][..rows].copy_from_slice(prod.row(j).as_slice().expect("standard layout"));
        }
        out
    }
}

fn mu_eta(xb2: &[f64], xb3: &[f64]) -> Vec<Complex64> {
    xb3.iter()
        .zip(xb2)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect()
}

/// One rescaled realisation on `grid`, which must be the grid the filters were built on.
pub fn synthesize<R: Rng + ?Sized>(
    filters: &FilterSet,
    rng: &mut R,
    grid: &TimeGrid,
    scaling: &ScalingSpec,
) -> Result<NoiseRealisation> {
    if filters.grid() != grid {
        return Err(EslnError::GridMismatch(
            "filters were built on a different grid".into(),
        ));
    }
    scaling.validate()?;
    Ok(NoiseSynthesizer::new(filters).synthesize(rng, scaling, true))
}
