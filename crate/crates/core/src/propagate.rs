//! Single-trajectory propagation in imaginary and real time.
//!
//! Real time, ħ = 1, with H = (Δ/2)σ_x + (ε(t)/2)σ_z:
//!   dρ/dt = −i[H, ρ] + iη[σ_z, ρ] + (i/2)ν{σ_z − g, ρ}
//! where g = 0 for the original and normalised forms and g = σ_z/Tr ρ for the
//! guided form. The guided and normalised forms use the shifted noise
//! η̂(t_h) = η(t_h) + i·dt·Σ_{j<h} K_ην(t_h − t_j)·σ(t_j).

use num_complex::Complex64;
use thiserror::Error;

use crate::error::{EslnError, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);
/// Larger state components are treated as overflow.
pub const OVERFLOW_NORM: f64 = 1e300;
/// Below this |Tr ρ| the guide spin σ_z/Tr ρ is undefined.
pub const TRACE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bias {
    Constant(f64),
    /// ε(t) = κ·t.
    Linear { kappa: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinBosonDrive {
    pub delta: f64,
    pub bias: Bias,
}

impl SpinBosonDrive {
    pub fn constant(delta: f64, epsilon: f64) -> Self {
        Self {
            delta,
            bias: Bias::Constant(epsilon),
        }
    }

    pub fn sweep(delta: f64, kappa: f64) -> Self {
        Self {
            delta,
            bias: Bias::Linear { kappa },
        }
    }

    pub fn epsilon_at(&self, t: f64) -> f64 {
        match self.bias {
            Bias::Constant(e) => e,
            Bias::Linear { kappa } => kappa * t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(EslnError::config("delta", "must be finite"));
        }
        match self.bias {
            Bias::Constant(e) if !e.is_finite() => Err(EslnError::config("epsilon", "must be finite")),
            Bias::Linear { kappa } if !kappa.is_finite() => Err(EslnError::config("kappa", "must be finite")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    pub r11: C,
    pub r12: C,
    pub r21: C,
    pub r22: C,
}

impl DensityMatrix {
    pub fn identity() -> Self {
        Self::diag(C::new(1.0, 0.0), C::new(1.0, 0.0))
    }

    pub fn diag(a: C, d: C) -> Self {
        Self {
            r11: a,
            r12: ZERO,
            r21: ZERO,
            r22: d,
        }
    }

    /// |↑⟩⟨↑|, the σ_z = 1 eigenstate.
    pub fn spin_up() -> Self {
        Self::diag(C::new(1.0, 0.0), ZERO)
    }

    pub fn spin_down() -> Self {
        Self::diag(ZERO, C::new(1.0, 0.0))
    }

    pub fn trace(&self) -> C {
        self.r11 + self.r22
    }

    pub fn spins(&self) -> SpinVector {
        SpinVector {
            sx: self.r12 + self.r21,
            sy: I * (self.r12 - self.r21),
            sz: self.r11 - self.r22,
            tr: self.r11 + self.r22,
        }
    }

    fn to_array(self) -> [C; 4] {
        [self.r11, self.r12, self.r21, self.r22]
    }

    fn from_array(v: [C; 4]) -> Self {
        Self {
            r11: v[0],
            r12: v[1],
            r21: v[2],
            r22: v[3],
        }
    }
}

/// σ_i = Tr(σ_i ρ) and Tr ρ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinVector {
    pub sx: C,
    pub sy: C,
    pub sz: C,
    pub tr: C,
}

impl SpinVector {
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            r11: 0.5 * (self.tr + self.sz),
            r22: 0.5 * (self.tr - self.sz),
            r12: 0.5 * (self.sx - I * self.sy),
            r21: 0.5 * (self.sx + I * self.sy),
        }
    }

    pub fn to_array(self) -> [C; 4] {
        [self.sx, self.sy, self.sz, self.tr]
    }

    pub fn from_array(v: [C; 4]) -> Self {
        Self {
            sx: v[0],
            sy: v[1],
            sz: v[2],
            tr: v[3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stepper {
    EulerMaruyama,
    Heun,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Original,
    Guided,
    Normalised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Density,
    Spins,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeSpec {
    pub stepper: Stepper,
    pub variant: Variant,
    pub representation: Representation,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            stepper: Stepper::Heun,
            variant: Variant::Original,
            representation: Representation::Density,
        }
    }
}

/// One trajectory's state: (ρ¹¹, ρ¹², ρ²¹, ρ²²) or (σ_x, σ_y, σ_z, Tr ρ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StochasticState {
    repr: Representation,
    v: [C; 4],
}

impl StochasticState {
    pub fn new(rho: DensityMatrix, repr: Representation) -> Self {
        let v = match repr {
            Representation::Density => rho.to_array(),
            Representation::Spins => rho.spins().to_array(),
        };
        Self { repr, v }
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn spins(&self) -> SpinVector {
        match self.repr {
            Representation::Density => DensityMatrix::from_array(self.v).spins(),
            Representation::Spins => SpinVector::from_array(self.v),
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self.repr {
            Representation::Density => DensityMatrix::from_array(self.v),
            Representation::Spins => SpinVector::from_array(self.v).density(),
        }
    }

    pub fn trace(&self) -> C {
        match self.repr {
            Representation::Density => self.v[0] + self.v[3],
            Representation::Spins => self.v[3],
        }
    }

    fn sz(&self) -> C {
        match self.repr {
            Representation::Density => self.v[0] - self.v[3],
            Representation::Spins => self.v[2],
        }
    }

    pub fn is_overflowing(&self) -> bool {
        self.v
            .iter()
            .any(|z| !(z.re.abs() <= OVERFLOW_NORM && z.im.abs() <= OVERFLOW_NORM))
    }

    fn with(&self, v: [C; 4]) -> Self {
        Self { repr: self.repr, v }
    }
}

/// The guide spin σ_z/Tr ρ was requested while |Tr ρ| < [`TRACE_FLOOR`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("trace vanished; guide spin undefined")]
pub struct TraceVanished;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum Exclusion {
    #[error("state overflowed or became non-finite at step {step}")]
    Divergent { step: usize },
    #[error("|Tr rho| fell below the guide floor at step {step}")]
    Pathological { step: usize },
}

/// Noise values at one real-time grid node; Heun uses them in both stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepNoise {
    pub eta: C,
    pub nu: C,
}

/// Everything besides the state that the right-hand side needs for one step.
#[derive(Clone, Copy, Debug)]
pub struct StepContext {
    pub drive: SpinBosonDrive,
    pub dt: f64,
    pub stepper: Stepper,
    /// 2dt²·Σ G_ηη², applied to the off-diagonal elements under Heun only.
    pub strat_real: f64,
}

/// Real-time Stratonovich prefactor 2dt²·Σ_l G_ηη(l)².
pub fn strat_prefactor_real(strat_sum_eta_eta: f64, dt: f64) -> f64 {
    2.0 * dt * dt * strat_sum_eta_eta
}

/// Imaginary-time Stratonovich shift ½dτ²·Σ_m G_μμ(m)², subtracted as a scalar.
pub fn strat_prefactor_imag(strat_sum_mu_mu: f64, dtau: f64) -> f64 {
    0.5 * dtau * dtau * strat_sum_mu_mu
}

/// Drift correction c·(0 ρ¹²; ρ²¹ 0); in spin form c·(σ_x, σ_y, 0, 0).
pub fn stratonovich_drift_real(state: &StochasticState, prefactor: f64) -> [C; 4] {
    let v = &state.v;
    match state.repr {
        Representation::Density => [ZERO, prefactor * v[1], prefactor * v[2], ZERO],
        Representation::Spins => [prefactor * v[0], prefactor * v[1], ZERO, ZERO],
    }
}

/// dρ/dt of the given form; `guided` switches the anticommutator to {σ_z − g, ρ}.
fn rhs(state: &StochasticState, delta: f64, eps: f64, noise: StepNoise, guided: bool, strat: f64) -> Result<[C; 4], TraceVanished> {
    let v = &state.v;
    let (eta, nu) = (noise.eta, noise.nu);
    let g = if guided {
        let tr = state.trace();
        if tr.norm() < TRACE_FLOOR {
            return Err(TraceVanished);
        }
        state.sz() / tr
    } else {
        ZERO
    };
    let half_delta = 0.5 * delta;
    Ok(match state.repr {
        Representation::Density => {
            let [a, b, c, d] = *v;
            let inu = I * nu;
            [
                -I * half_delta * (c - b) + inu * (1.0 - g) * a,
                -I * (half_delta * (d - a) + eps * b) + 2.0 * I * eta * b - inu * g * b + strat * b,
                -I * (half_delta * (a - d) - eps * c) - 2.0 * I * eta * c - inu * g * c + strat * c,
                -I * half_delta * (b - c) - inu * (1.0 + g) * d,
            ]
        }
        Representation::Spins => {
            let [sx, sy, sz, tr] = *v;
            let e = eps - 2.0 * eta;
            let inu = I * nu;
            let dtr = if guided { ZERO } else { inu * sz };
            [
                -e * sy - inu * g * sx + strat * sx,
                -delta * sz + e * sx - inu * g * sy + strat * sy,
                delta * sy + inu * tr - inu * g * sz,
                dtr,
            ]
        }
    })
}

fn axpy(x: &[C; 4], a: f64, y: &[C; 4]) -> [C; 4] {
    [x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2], x[3] + a * y[3]]
}

fn step(state: &StochasticState, t: f64, noise: StepNoise, ctx: &StepContext, guided: bool) -> Result<StochasticState, TraceVanished> {
    let delta = ctx.drive.delta;
    let dt = ctx.dt;
    match ctx.stepper {
        Stepper::EulerMaruyama => {
            let k1 = rhs(state, delta, ctx.drive.epsilon_at(t), noise, guided, 0.0)?;
            Ok(state.with(axpy(&state.v, dt, &k1)))
        }
        Stepper::Heun => {
            let k1 = rhs(state, delta, ctx.drive.epsilon_at(t), noise, guided, ctx.strat_real)?;
            let support = state.with(axpy(&state.v, dt, &k1));
            let k2 = rhs(&support, delta, ctx.drive.epsilon_at(t + dt), noise, guided, ctx.strat_real)?;
            let avg = [
                0.5 * (k1[0] + k2[0]),
                0.5 * (k1[1] + k2[1]),
                0.5 * (k1[2] + k2[2]),
                0.5 * (k1[3] + k2[3]),
            ];
            Ok(state.with(axpy(&state.v, dt, &avg)))
        }
    }
}

/// One step of the original form from t to t + dt.
pub fn step_original(state: &StochasticState, t: f64, noise: StepNoise, ctx: &StepContext) -> StochasticState {
    step(state, t, noise, ctx, false).expect("the original form never divides by the trace")
}

/// One step of the guided form; `shift` is the memory term added to η.
pub fn step_guided(
    state: &StochasticState,
    t: f64,
    noise: StepNoise,
    ctx: &StepContext,
    shift: C,
) -> Result<StochasticState, TraceVanished> {
    let shifted = StepNoise {
        eta: noise.eta + shift,
        nu: noise.nu,
    };
    step(state, t, shifted, ctx, true)
}

/// One step of the normalised form: shifted η, plain anticommutator.
pub fn step_normalised(state: &StochasticState, t: f64, noise: StepNoise, ctx: &StepContext, shift: C) -> StochasticState {
    let shifted = StepNoise {
        eta: noise.eta + shift,
        nu: noise.nu,
    };
    step(state, t, shifted, ctx, false).expect("the normalised form never divides by the trace")
}

/// Heun step of a generic right-hand side f(t, x), same noise in both stages.
pub fn heun_step<const D: usize>(x: &[C; D], t: f64, dt: f64, f: impl Fn(f64, &[C; D]) -> [C; D]) -> [C; D] {
    let k1 = f(t, x);
    let mut support = *x;
    for i in 0..D {
        support[i] += dt * k1[i];
    }
    let k2 = f(t + dt, &support);
    let mut out = *x;
    for i in 0..D {
        out[i] += 0.5 * dt * (k1[i] + k2[i]);
    }
    out
}

/// Left-rectangle memory of the guide spin: i·dt·Σ_{j<h} K_ην((h−j)dt)·σ_j.
#[derive(Clone, Debug)]
pub struct GuideMemory<'k> {
    k_eta_nu: &'k [C],
    dt: f64,
    history: Vec<C>,
}

impl<'k> GuideMemory<'k> {
    /// `k_eta_nu[l]` is K_ην at lag l·dt; lag 0 is never used (Θ(0) = 0).
    pub fn new(k_eta_nu: &'k [C], dt: f64, capacity: usize) -> Self {
        Self {
            k_eta_nu,
            dt,
            history: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, sigma: C) {
        self.history.push(sigma);
    }

    /// Shift at the node of the last pushed value.
    pub fn shift(&self) -> C {
        let Some(h) = self.history.len().checked_sub(1) else {
            return ZERO;
        };
        let mut s = ZERO;
        for (j, &sigma) in self.history.iter().enumerate() {
            if let Some(&k) = self.k_eta_nu.get(h - j) {
                s += k * sigma;
            }
        }
        I * self.dt * s
    }
}

/// Imaginary-time evolution −dρ̄/dτ = (H(t0) + μ(τ)σ_z)ρ̄ from ρ̄(0) = I over
/// the steps between consecutive `mu` nodes. Heun uses the drift shifted by
/// −`strat_imag`·ρ̄; Euler–Maruyama the plain drift.
pub fn thermalise(
    drive: &SpinBosonDrive,
    t0: f64,
    mu: &[C],
    dtau: f64,
    stepper: Stepper,
    strat_imag: f64,
) -> Result<DensityMatrix, Exclusion> {
    let half_delta = 0.5 * drive.delta;
    let half_eps = 0.5 * drive.epsilon_at(t0);
    let drift = |mu: C, shift: f64, x: &[C; 4]| -> [C; 4] {
        let [a, b, c, d] = *x;
        let ez = half_eps + mu;
        [
            -(ez * a + half_delta * c) - shift * a,
            -(ez * b + half_delta * d) - shift * b,
            -(half_delta * a - ez * c) - shift * c,
            -(half_delta * b - ez * d) - shift * d,
        ]
    };
    let mut x = DensityMatrix::identity().to_array();
    for (h, &m) in mu.iter().enumerate().take(mu.len().saturating_sub(1)) {
        x = match stepper {
            Stepper::EulerMaruyama => axpy(&x, dtau, &drift(m, 0.0, &x)),
            Stepper::Heun => heun_step(&x, 0.0, dtau, |_, y| drift(m, strat_imag, y)),
        };
        if x.iter().any(|z| !(z.re.abs() <= OVERFLOW_NORM && z.im.abs() <= OVERFLOW_NORM)) {
            return Err(Exclusion::Divergent { step: h });
        }
    }
    Ok(DensityMatrix::from_array(x))
}

/// Per-node readout written by [`propagate_trajectory`]: (σ_x, σ_y, σ_z, Tr ρ)
/// for the original and guided forms, and (T₀σ_x/Tr ρ, T₀σ_y/Tr ρ, T₀σ_z/Tr ρ,
/// Tr ρ) with T₀ = Tr ρ(t0) for the normalised form.
pub type Readout = [C; 4];

/// Real-time propagation from `rho0` at t0 over every node of `eta`/`nu`.
/// `k_eta_nu` is only read by the guided and normalised forms.
#[allow(clippy::too_many_arguments)]
pub fn propagate_trajectory(
    rho0: DensityMatrix,
    eta: &[C],
    nu: &[C],
    t0: f64,
    ctx: &StepContext,
    scheme: &SchemeSpec,
    k_eta_nu: &[C],
    out: &mut Vec<Readout>,
) -> Result<(), Exclusion> {
    out.clear();
    let nodes = eta.len();
    let mut state = StochasticState::new(rho0, scheme.representation);
    let tr0 = state.trace();
    let mut memory = GuideMemory::new(k_eta_nu, ctx.dt, nodes);
    let readout = |s: &StochasticState, step: usize| -> Result<Readout, Exclusion> {
        let sp = s.spins();
        if scheme.variant == Variant::Normalised {
            if sp.tr.norm() < TRACE_FLOOR {
                return Err(Exclusion::Pathological { step });
            }
            let w = tr0 / sp.tr;
            Ok([w * sp.sx, w * sp.sy, w * sp.sz, sp.tr])
        } else {
            Ok(sp.to_array())
        }
    };
    out.push(readout(&state, 0)?);
    for h in 0..nodes.saturating_sub(1) {
        let t = t0 + h as f64 * ctx.dt;
        let noise = StepNoise { eta: eta[h], nu: nu[h] };
        state = match scheme.variant {
            Variant::Original => step_original(&state, t, noise, ctx),
            Variant::Guided | Variant::Normalised => {
                let tr = state.trace();
                if tr.norm() < TRACE_FLOOR {
                    return Err(Exclusion::Pathological { step: h });
                }
                memory.push(state.sz() / tr);
                let shift = memory.shift();
                if scheme.variant == Variant::Guided {
                    step_guided(&state, t, noise, ctx, shift).map_err(|_| Exclusion::Pathological { step: h })?
                } else {
                    step_normalised(&state, t, noise, ctx, shift)
                }
            }
        };
        if state.is_overflowing() {
            return Err(Exclusion::Divergent { step: h + 1 });
        }
        out.push(readout(&state, h + 1)?);
    }
    Ok(())
}
