//! Drude bath correlation kernels on the simulation grids.
//!
//! Every kernel is a one-sided frequency integral of an integrand that is even
//! in ω and analytic in a strip around the real axis, so the composite
//! trapezoid rule with a half weight at ω = 0 converges geometrically in the
//! node spacing. Real-time lags are evaluated for all lags at once by folding
//! the nodes onto FFT bins: with dω = 2π/(P·dt), e^{iω_k t_n} = e^{2πikn/P}.

use ndarray::ArrayView2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{EslnError, Result};

/// Below this fraction of ω_c the removable ω → 0 singularities use their series.
const SERIES_THRESHOLD: f64 = 1e-6;
/// e^{-45} is below double round-off relative to any kernel value we keep.
const EXP_CUTOFF: f64 = 45.0;
/// Decay lengths (in units of 1/strip width) kept clear of periodic images.
const IMAGE_CLEARANCE: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathSpec {
    pub alpha: f64,
    pub omega_c: f64,
    pub beta_hbar: f64,
}

impl BathSpec {
    pub fn new(alpha: f64, omega_c: f64, beta_hbar: f64) -> Result<Self> {
        let bath = Self {
            alpha,
            omega_c,
            beta_hbar,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(EslnError::config("alpha", "must be finite and >= 0"));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(EslnError::config("omega_c", "must be finite and > 0"));
        }
        if !(self.beta_hbar > 0.0 && self.beta_hbar.is_finite()) {
            return Err(EslnError::config("beta_hbar", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Width of the analytic strip of the thermal integrands: the nearer of the
    /// Drude pole and the first Matsubara frequency.
    pub fn strip_width(&self) -> f64 {
        self.omega_c.min(2.0 * PI / self.beta_hbar)
    }

    fn drude(&self, omega: f64) -> f64 {
        let x = omega / self.omega_c;
        let d = 1.0 + x * x;
        self.alpha * omega / (d * d)
    }

    /// J(ω)·coth(βω/2), finite at ω = 0 where it tends to 2α/β.
    fn j_coth(&self, omega: f64) -> f64 {
        let x = self.beta_hbar * omega;
        if omega < SERIES_THRESHOLD * self.omega_c {
            let y = omega / self.omega_c;
            let d = 1.0 + y * y;
            2.0 * self.alpha / self.beta_hbar * (1.0 + x * x / 12.0) / (d * d)
        } else {
            self.drude(omega) / (0.5 * x).tanh()
        }
    }

    /// J(ω)/(1 − e^{−βω}), finite at ω = 0 where it tends to α/β.
    fn j_bose(&self, omega: f64) -> f64 {
        let x = self.beta_hbar * omega;
        if omega < SERIES_THRESHOLD * self.omega_c {
            let y = omega / self.omega_c;
            let d = 1.0 + y * y;
            self.alpha / self.beta_hbar * (1.0 + 0.5 * x + x * x / 12.0) / (d * d)
        } else {
            self.drude(omega) / -(-x).exp_m1()
        }
    }
}

/// Drude spectral density J(ω) = αω[1 + (ω/ω_c)²]⁻².
pub fn spectral_density(omega: f64, bath: &BathSpec) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(EslnError::domain(format!(
            "spectral density needs omega >= 0, got {omega}"
        )));
    }
    if omega.is_infinite() {
        return Ok(0.0);
    }
    Ok(bath.drude(omega))
}

/// Real time runs over t0 + n·dt for n = 0..=n_steps; imaginary time over
/// m·dtau for m = 0..=m_steps with m_steps·dtau = βħ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub dtau: f64,
    pub m_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_max: f64, dt: f64, beta_hbar: f64, dtau: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EslnError::config("dt", "must be finite and > 0"));
        }
        if !(dtau > 0.0 && dtau.is_finite()) {
            return Err(EslnError::config("dtau", "must be finite and > 0"));
        }
        if !(t0.is_finite() && t_max.is_finite() && t_max >= t0) {
            return Err(EslnError::config("t_max", "must be finite and >= t0"));
        }
        let n = ((t_max - t0) / dt).round();
        if ((t0 + n * dt) - t_max).abs() > 1e-9 * dt.max(t_max.abs()) {
            return Err(EslnError::config(
                "t_max",
                format!("t_max - t0 = {} is not a multiple of dt = {dt}", t_max - t0),
            ));
        }
        let m = (beta_hbar / dtau).round();
        if m < 1.0 || (m * dtau - beta_hbar).abs() > 1e-9 * beta_hbar {
            return Err(EslnError::config(
                "dtau",
                format!("dtau = {dtau} does not tile beta_hbar = {beta_hbar}"),
            ));
        }
        Ok(Self {
            t0,
            dt,
            n_steps: n as usize,
            dtau,
            m_steps: m as usize,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn beta_hbar(&self) -> f64 {
        self.m_steps as f64 * self.dtau
    }

    /// Circular grid for the stationary real-time convolutions: a power of two
    /// no shorter than 2(2N+1), so lags up to ±(2N+1) never wrap, and long
    /// enough that the bath kernels have decayed at half its length (a kernel
    /// truncated early has a spectrum that dips negative).
    pub fn conv_len(&self, bath: &BathSpec) -> usize {
        let decay = (2.0 * IMAGE_CLEARANCE / bath.strip_width() / self.dt).ceil() as usize;
        (2 * (2 * self.n_steps + 1)).max(decay).next_power_of_two()
    }

    pub fn check_bath(&self, bath: &BathSpec) -> Result<()> {
        let beta = self.beta_hbar();
        if (beta - bath.beta_hbar).abs() > 1e-9 * bath.beta_hbar {
            return Err(EslnError::GridMismatch(format!(
                "imaginary grid spans {beta}, bath has beta_hbar = {}",
                bath.beta_hbar
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Upper integration limit in units of ω_c.
    pub omega_max_factor: f64,
    /// Largest tolerated relative change of a table under node doubling.
    pub rel_tol: f64,
    pub max_refinements: usize,
    /// K_ημ rows whose magnitude stays below this fraction of the kernel scale
    /// are dropped and treated as zero.
    pub row_cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            omega_max_factor: 5000.0,
            rel_tol: 1e-8,
            max_refinements: 4,
            row_cutoff: 1e-15,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max_factor >= 20.0) {
            return Err(EslnError::config(
                "omega_max_factor",
                "upper quadrature frequency must be at least 20 omega_c",
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(EslnError::config("quad_tol", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.row_cutoff) {
            return Err(EslnError::config("row_cutoff", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Trapezoid nodes ω_k = k·dω, k = 0..=last, with half weights at both ends.
#[derive(Clone, Copy, Debug)]
pub struct FrequencyQuadrature {
    pub bath: BathSpec,
    pub d_omega: f64,
    pub last: usize,
}

impl FrequencyQuadrature {
    pub fn new(bath: BathSpec, d_omega: f64, omega_max: f64) -> Self {
        let last = (omega_max / d_omega).ceil() as usize;
        Self {
            bath,
            d_omega,
            last,
        }
    }

    fn omega(&self, k: usize) -> f64 {
        k as f64 * self.d_omega
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.last {
            0.5 * self.d_omega
        } else {
            self.d_omega
        }
    }

    /// Index of the last node at which e^{−ω·s} still matters.
    fn decay_limit(&self, s: f64) -> usize {
        if s <= 0.0 {
            self.last
        } else {
            ((EXP_CUTOFF / s / self.d_omega).ceil() as usize).min(self.last)
        }
    }

    pub fn k_eta_eta(&self, t: f64) -> f64 {
        let s: f64 = (0..=self.last)
            .map(|k| {
                let w = self.omega(k);
                self.weight(k) * self.bath.j_coth(w) * (w * t).cos()
            })
            .sum();
        s / PI
    }

    pub fn k_eta_nu(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s: f64 = (0..=self.last)
            .map(|k| {
                let w = self.omega(k);
                self.weight(k) * self.bath.drude(w) * (w * t).sin()
            })
            .sum();
        Complex64::new(0.0, -2.0 * s / PI)
    }

    /// K_ημ(t, τ) for 0 ≤ τ ≤ βħ, in the overflow-free form
    /// −(1/π)∫ J/(1−e^{−βω}) [e^{−ω(β−τ)} e^{iωt} + e^{−ωτ} e^{−iωt}].
    pub fn k_eta_mu(&self, t: f64, tau: f64) -> Complex64 {
        let beta = self.bath.beta_hbar;
        let mut s = Complex64::new(0.0, 0.0);
        let (k_fwd, k_bwd) = (self.decay_limit(tau), self.decay_limit(beta - tau));
        for k in 0..=k_fwd.max(k_bwd) {
            let w = self.omega(k);
            let a = self.weight(k) * self.bath.j_bose(w);
            if k <= k_bwd {
                s += a * (-w * (beta - tau)).exp() * Complex64::cis(w * t);
            }
            if k <= k_fwd {
                s += a * (-w * tau).exp() * Complex64::cis(-w * t);
            }
        }
        -s / PI
    }

    /// K_μμ(τ) for 0 ≤ τ ≤ βħ.
    pub fn k_mu_mu(&self, tau: f64) -> f64 {
        self.k_mu_mu_split(tau, self.bath.beta_hbar - tau)
    }

    fn k_mu_mu_split(&self, tau: f64, rest: f64) -> f64 {
        let (k_fwd, k_bwd) = (self.decay_limit(tau), self.decay_limit(rest));
        let mut s = 0.0;
        for k in 0..=k_fwd.max(k_bwd) {
            let w = self.omega(k);
            let a = self.weight(k) * self.bath.j_bose(w);
            if k <= k_fwd {
                s += a * (-w * tau).exp();
            }
            if k <= k_bwd {
                s += a * (-w * rest).exp();
            }
        }
        s / PI
    }
}

/// K_ημ over (t_n, τ_m), n < rows, m = 0..=M; rows past `rows` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaMuTable {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl EtaMuTable {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        if n < self.rows {
            self.data[n * self.cols + m]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn row(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    /// The first `rows` rows as a matrix view.
    pub fn row_block(&self, rows: usize) -> ArrayView2<'_, Complex64> {
        let rows = rows.min(self.rows);
        ArrayView2::from_shape((rows, self.cols), &self.data[..rows * self.cols]).expect("row-major table")
    }
}

#[derive(Clone, Debug)]
pub struct KernelTable {
    grid: TimeGrid,
    bath: BathSpec,
    k_eta_eta: Vec<f64>,
    k_eta_nu: Vec<Complex64>,
    k_mu_mu: Vec<f64>,
    k_eta_mu: EtaMuTable,
    residual: f64,
}

impl KernelTable {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    /// Largest real-time lag held in the stationary tables.
    pub fn max_lag(&self) -> usize {
        self.k_eta_eta.len() - 1
    }

    pub fn k_eta_eta(&self, lag: isize) -> f64 {
        self.k_eta_eta[lag.unsigned_abs()]
    }

    /// Causal with Θ(0) = 0.
    pub fn k_eta_nu(&self, lag: isize) -> Complex64 {
        if lag <= 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.k_eta_nu[lag as usize]
        }
    }

    pub fn k_eta_eta_lags(&self) -> &[f64] {
        &self.k_eta_eta
    }

    pub fn k_eta_nu_lags(&self) -> &[Complex64] {
        &self.k_eta_nu
    }

    pub fn k_mu_mu(&self, m: usize) -> f64 {
        self.k_mu_mu[m]
    }

    pub fn k_mu_mu_lags(&self) -> &[f64] {
        &self.k_mu_mu
    }

    pub fn k_eta_mu(&self, n: usize, m: usize) -> Complex64 {
        self.k_eta_mu.get(n, m)
    }

    pub fn eta_mu(&self) -> &EtaMuTable {
        &self.k_eta_mu
    }

    /// Largest relative change observed at the final node doubling.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

struct RawTables {
    k_eta_eta: Vec<f64>,
    k_eta_nu: Vec<Complex64>,
    k_mu_mu: Vec<f64>,
    k_eta_mu: EtaMuTable,
}

pub fn eval_kernels(bath: &BathSpec, grid: &TimeGrid, quad: &QuadratureSpec) -> Result<KernelTable> {
    bath.validate()?;
    quad.validate()?;
    grid.check_bath(bath)?;

    let lags = grid.conv_len(bath) / 2;
    let clearance = IMAGE_CLEARANCE / bath.strip_width();
    let stationary_len = fft_len(lags as f64 * grid.dt + clearance, grid.dt);
    let eta_mu_len = fft_len(grid.n_steps as f64 * grid.dt + clearance, grid.dt);

    let mut planner = FftPlanner::new();
    let mut coarse = raw_tables(bath, grid, quad, stationary_len, eta_mu_len, lags, &mut planner);
    let mut residual = f64::INFINITY;
    for level in 1..=quad.max_refinements {
        let fine = raw_tables(
            bath,
            grid,
            quad,
            stationary_len << level,
            eta_mu_len << level,
            lags,
            &mut planner,
        );
        let changes = [
            ("K_eta_eta", rel_change(&coarse.k_eta_eta, &fine.k_eta_eta, |x| x.abs())),
            ("K_eta_nu", rel_change(&coarse.k_eta_nu, &fine.k_eta_nu, |x| x.norm())),
            ("K_mu_mu", rel_change(&coarse.k_mu_mu, &fine.k_mu_mu, |x| x.abs())),
            ("K_eta_mu", eta_mu_change(&coarse.k_eta_mu, &fine.k_eta_mu)),
        ];
        let (table, worst) = changes
            .iter()
            .copied()
            .fold(("", 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        residual = worst;
        coarse = fine;
        if worst <= quad.rel_tol {
            break;
        }
        if level == quad.max_refinements {
            return Err(EslnError::QuadratureNotConverged {
                table,
                residual: worst,
                tolerance: quad.rel_tol,
                refinements: level,
            });
        }
    }
    if quad.max_refinements == 0 {
        residual = f64::NAN;
    }
    Ok(KernelTable {
        grid: *grid,
        bath: *bath,
        k_eta_eta: coarse.k_eta_eta,
        k_eta_nu: coarse.k_eta_nu,
        k_mu_mu: coarse.k_mu_mu,
        k_eta_mu: coarse.k_eta_mu,
        residual,
    })
}

fn fft_len(span: f64, dt: f64) -> usize {
    ((span / dt).ceil() as usize).max(2).next_power_of_two()
}

fn rel_change<T: Copy + std::ops::Sub<Output = T>>(a: &[T], b: &[T], norm: impl Fn(T) -> f64) -> f64 {
    let scale = b.iter().map(|&x| norm(x)).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| norm(x - y))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn eta_mu_change(a: &EtaMuTable, b: &EtaMuTable) -> f64 {
    let rows = a.rows.max(b.rows);
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for n in 0..rows {
        for m in 0..b.cols {
            let y = b.get(n, m);
            scale = scale.max(y.norm());
            diff = diff.max((a.get(n, m) - y).norm());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn raw_tables(
    bath: &BathSpec,
    grid: &TimeGrid,
    quad: &QuadratureSpec,
    stationary_len: usize,
    eta_mu_len: usize,
    lags: usize,
    planner: &mut FftPlanner<f64>,
) -> RawTables {
    let omega_max = quad.omega_max_factor * bath.omega_c;

    let q = FrequencyQuadrature::new(*bath, 2.0 * PI / (stationary_len as f64 * grid.dt), omega_max);
    let fft = planner.plan_fft_forward(stationary_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); stationary_len];

    // Forward DFT bin n of the folded nodes is Σ_k f_k e^{−iω_k t_n}.
    for k in 0..=q.last {
        let w = q.omega(k);
        buf[k % stationary_len].re += q.weight(k) * bath.j_coth(w);
    }
    fft.process(&mut buf);
    let k_eta_eta: Vec<f64> = buf[..=lags].iter().map(|z| z.re / PI).collect();

    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for k in 0..=q.last {
        let w = q.omega(k);
        buf[k % stationary_len].re += q.weight(k) * bath.drude(w);
    }
    fft.process(&mut buf);
    // Σ J sin(ω t_n) = −Im(bin n); K_ην = −(2i/π)·that.
    let mut k_eta_nu: Vec<Complex64> = buf[..=lags]
        .iter()
        .map(|z| Complex64::new(0.0, 2.0 * z.im / PI))
        .collect();
    k_eta_nu[0] = Complex64::new(0.0, 0.0);

    let m_steps = grid.m_steps;
    let qmu = FrequencyQuadrature::new(*bath, 2.0 * PI / (eta_mu_len as f64 * grid.dt), omega_max);
    let k_mu_mu: Vec<f64> = (0..=m_steps)
        .map(|m| {
            qmu.k_mu_mu_split(m as f64 * grid.dtau, (m_steps - m) as f64 * grid.dtau)
        })
        .collect();

    let scale = k_eta_eta[0]
        .abs()
        .max(k_eta_nu.iter().map(|z| 0.5 * z.norm()).fold(0.0, f64::max));
    let threshold = quad.row_cutoff * scale;
    let k_eta_mu = eta_mu_table(&qmu, grid, eta_mu_len, threshold, planner);

    RawTables {
        k_eta_eta,
        k_eta_nu,
        k_mu_mu,
        k_eta_mu,
    }
}

fn eta_mu_table(
    q: &FrequencyQuadrature,
    grid: &TimeGrid,
    len: usize,
    threshold: f64,
    planner: &mut FftPlanner<f64>,
) -> EtaMuTable {
    let fft = planner.plan_fft_forward(len);
    let bath = &q.bath;
    let cols = grid.m_steps + 1;
    let n_rows = grid.n_steps + 1;
    let weights: Vec<f64> = (0..=q.last).map(|k| q.weight(k) * bath.j_bose(q.omega(k))).collect();

    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(cols);
    let mut rows = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for m in 0..cols {
        let tau = m as f64 * grid.dtau;
        let rest = (grid.m_steps - m) as f64 * grid.dtau;
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        // e^{−iωt} terms land on bin k, e^{+iωt} terms on bin −k.
        for (k, &a) in weights.iter().enumerate().take(q.decay_limit(tau) + 1) {
            buf[k % len].re += a * (-q.omega(k) * tau).exp();
        }
        for (k, &a) in weights.iter().enumerate().take(q.decay_limit(rest) + 1) {
            buf[(len - k % len) % len].re += a * (-q.omega(k) * rest).exp();
        }
        fft.process(&mut buf);
        let col: Vec<Complex64> = buf[..n_rows.min(len)].iter().map(|z| -z / PI).collect();
        let significant = col
            .iter()
            .rposition(|z| z.norm() >= threshold && z.norm() > 0.0)
            .map_or(0, |i| i + 1);
        rows = rows.max(significant);
        columns.push(col);
    }

    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for (m, col) in columns.iter().enumerate() {
        for n in 0..rows.min(col.len()) {
            data[n * cols + m] = col[n];
        }
    }
    EtaMuTable { rows, cols, data }
}

/// Drude closed form K_ην(t) = −2i(αω_c³t/4)e^{−ω_c t} for t > 0.
pub fn k_eta_nu_closed_form(bath: &BathSpec, t: f64) -> Complex64 {
    if t <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let wc = bath.omega_c;
    Complex64::new(0.0, -2.0 * bath.alpha * wc.powi(3) * t / 4.0 * (-wc * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bath() -> BathSpec {
        BathSpec::new(0.05, 20.0, 1.0).unwrap()
    }

    #[test]
    fn spectral_density_values() {
        let b = bath();
        assert_eq!(spectral_density(0.0, &b).unwrap(), 0.0);
        assert_relative_eq!(spectral_density(20.0, &b).unwrap(), 0.25, max_relative = 1e-15);
        assert!(spectral_density(-1.0, &b).is_err());
        assert_eq!(spectral_density(f64::INFINITY, &b).unwrap(), 0.0);
    }

    #[test]
    fn spectral_density_argmax() {
        // dJ/dω ∝ (1 + x²) − 4x² = 0 at x = 1/√3; golden-section search confirms.
        let b = bath();
        let j = |w: f64| spectral_density(w, &b).unwrap();
        let (mut lo, mut hi) = (0.0, 100.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let c = lo + g * (hi - lo);
            if j(a) > j(c) {
                hi = c;
            } else {
                lo = a;
            }
        }
        assert_relative_eq!(0.5 * (lo + hi), 20.0 / 3f64.sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn zero_frequency_limits_are_finite() {
        let b = bath();
        assert_relative_eq!(b.j_coth(0.0), 2.0 * 0.05, max_relative = 1e-15);
        assert_relative_eq!(b.j_bose(0.0), 0.05, max_relative = 1e-15);
        // Series and direct branches meet continuously at the switch point.
        let w = SERIES_THRESHOLD * b.omega_c;
        assert_relative_eq!(b.j_coth(w * 0.999_999), b.j_coth(w * 1.000_001), max_relative = 1e-9);
        assert_relative_eq!(b.j_bose(w * 0.999_999), b.j_bose(w * 1.000_001), max_relative = 1e-9);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 6.0, 1e-3, 1.0, 1e-3).is_ok());
        assert!(TimeGrid::new(0.0, 6.0, 1e-3, 1.0, 0.3).is_err());
        assert!(TimeGrid::new(0.0, 6.00031, 1e-3, 1.0, 1e-3).is_err());
        let g = TimeGrid::new(-10.0, 10.0, 1e-3, 1.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 20_000);
        assert_eq!(g.m_steps, 1000);
        assert_relative_eq!(g.t_max(), 10.0, max_relative = 1e-12);
        assert_eq!(g.conv_len(&bath()), 131_072);
        let short = TimeGrid::new(0.0, 0.1, 1e-3, 1.0, 1e-3).unwrap();
        assert_eq!(short.conv_len(&bath()), 16_384);
    }

    #[test]
    fn quadrature_upper_limit_precondition() {
        let g = TimeGrid::new(0.0, 0.1, 1e-3, 1.0, 1e-3).unwrap();
        let quad = QuadratureSpec {
            omega_max_factor: 10.0,
            ..Default::default()
        };
        assert!(eval_kernels(&bath(), &g, &quad).is_err());
    }

    #[test]
    fn table_matches_direct_summation() {
        let b = bath();
        let g = TimeGrid::new(0.0, 0.5, 1e-3, 1.0, 1e-2).unwrap();
        let quad = QuadratureSpec::default();
        let table = eval_kernels(&b, &g, &quad).unwrap();
        assert!(table.residual() <= 1e-8);
        let q = FrequencyQuadrature::new(b, 0.2, quad.omega_max_factor * b.omega_c);
        let scale = table.k_eta_eta(0);
        for n in [0usize, 1, 7, 50, 333, 500] {
            let t = n as f64 * g.dt;
            assert!((table.k_eta_eta(n as isize) - q.k_eta_eta(t)).abs() < 1e-9 * scale);
            assert!((table.k_eta_nu(n as isize) - q.k_eta_nu(t)).norm() < 1e-9 * scale);
            for m in [0usize, 3, 50, 99, 100] {
                let tau = m as f64 * g.dtau;
                assert!((table.k_eta_mu(n, m) - q.k_eta_mu(t, tau)).norm() < 1e-9 * scale);
            }
        }
        for m in 0..=100 {
            let d = (table.k_mu_mu(m) - q.k_mu_mu(m as f64 * g.dtau)).abs();
            assert!(d < 1e-9 * scale, "m = {m}: {d}");
        }
    }

    #[test]
    fn kernel_identities() {
        let b = bath();
        let g = TimeGrid::new(0.0, 1.0, 1e-3, 1.0, 1e-3).unwrap();
        let table = eval_kernels(&b, &g, &QuadratureSpec::default()).unwrap();
        let k0 = table.k_eta_eta(0);
        let kmu = table.k_mu_mu_lags();
        let big_m = g.m_steps;
        assert!((kmu[0] - k0).abs() < 1e-8 * k0);
        for m in 0..=big_m {
            assert!((kmu[m] - kmu[big_m - m]).abs() < 1e-8 * kmu[0]);
            // K_ημ(0, τ) = −K_μμ(τ)
            assert!((table.k_eta_mu(0, m) + kmu[m]).norm() < 1e-8 * k0);
        }
        assert!((table.k_eta_mu(0, 0) + k0).norm() < 1e-8 * k0);
        for n in 0..=g.n_steps {
            // K_ημ(t, 0) = −K_ηη(t) − K_ην(t)/2
            let expect = -table.k_eta_eta(n as isize) - 0.5 * table.k_eta_nu(n as isize);
            assert!((table.k_eta_mu(n, 0) - expect).norm() < 1e-8 * k0);
        }
        for lag in -5isize..=0 {
            assert_eq!(table.k_eta_nu(lag), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn zero_coupling_gives_zero_tables() {
        let b = BathSpec::new(0.0, 20.0, 1.0).unwrap();
        let g = TimeGrid::new(0.0, 0.1, 1e-3, 1.0, 1e-2).unwrap();
        let table = eval_kernels(&b, &g, &QuadratureSpec::default()).unwrap();
        assert!(table.k_eta_eta_lags().iter().all(|&x| x == 0.0));
        assert!(table.k_mu_mu_lags().iter().all(|&x| x == 0.0));
        assert_eq!(table.eta_mu().rows(), 0);
    }
}
