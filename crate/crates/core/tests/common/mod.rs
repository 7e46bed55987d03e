//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use num_complex::Complex64 as C;

/// ⟨σ_z⟩ of e^{−βH}/Tr e^{−βH} for H = (Δσ_x + εσ_z)/2, from the closed-form
/// exponential cosh(βr)·1 − sinh(βr)·H/r with r = √(Δ² + ε²)/2.
pub fn gibbs_sz(delta: f64, eps: f64, beta: f64) -> f64 {
    let r = 0.5 * (delta * delta + eps * eps).sqrt();
    -(beta * r).tanh() * eps / (2.0 * r)
}

/// e^{−βH} as (ρ¹¹, ρ¹², ρ²¹, ρ²²).
pub fn gibbs_matrix(delta: f64, eps: f64, beta: f64) -> [f64; 4] {
    let r = 0.5 * (delta * delta + eps * eps).sqrt();
    let (c, s) = ((beta * r).cosh(), (beta * r).sinh() / r);
    [c - s * eps / 2.0, -s * delta / 2.0, -s * delta / 2.0, c + s * eps / 2.0]
}

/// A 2×2 operator acting on density matrices, stored as a 4×4 matrix on
/// (ρ¹¹, ρ¹², ρ²¹, ρ²²).
pub type SuperOp = [[C; 4]; 4];

fn mat(rho: [C; 4]) -> [[C; 2]; 2] {
    [[rho[0], rho[1]], [rho[2], rho[3]]]
}

fn mul(a: [[C; 2]; 2], b: [[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut o = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                o[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    o
}

fn sigma_z() -> [[C; 2]; 2] {
    [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(-1.0, 0.0)]]
}

/// Builds the superoperator of a linear map by applying it to basis matrices.
pub fn superop(f: impl Fn([[C; 2]; 2]) -> [[C; 2]; 2]) -> SuperOp {
    let mut op = [[C::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        let mut e = [C::new(0.0, 0.0); 4];
        e[col] = C::new(1.0, 0.0);
        let y = f(mat(e));
        let flat = [y[0][0], y[0][1], y[1][0], y[1][1]];
        for row in 0..4 {
            op[row][col] = flat[row];
        }
    }
    op
}

/// L_η ρ = i[σ_z, ρ], the coefficient of η in dρ/dt.
pub fn l_eta() -> SuperOp {
    superop(|r| {
        let a = mul(sigma_z(), r);
        let b = mul(r, sigma_z());
        let i = C::new(0.0, 1.0);
        [[i * (a[0][0] - b[0][0]), i * (a[0][1] - b[0][1])], [i * (a[1][0] - b[1][0]), i * (a[1][1] - b[1][1])]]
    })
}

/// L_ν ρ = (i/2){σ_z, ρ}, the coefficient of ν in dρ/dt.
pub fn l_nu() -> SuperOp {
    superop(|r| {
        let a = mul(sigma_z(), r);
        let b = mul(r, sigma_z());
        let h = C::new(0.0, 0.5);
        [[h * (a[0][0] + b[0][0]), h * (a[0][1] + b[0][1])], [h * (a[1][0] + b[1][0]), h * (a[1][1] + b[1][1])]]
    })
}

pub fn apply(op: &SuperOp, v: [C; 4]) -> [C; 4] {
    let mut o = [C::new(0.0, 0.0); 4];
    for r in 0..4 {
        for c in 0..4 {
            o[r] += op[r][c] * v[c];
        }
    }
    o
}

pub fn combine(terms: &[(C, &SuperOp)]) -> SuperOp {
    let mut o = [[C::new(0.0, 0.0); 4]; 4];
    for (w, op) in terms {
        for r in 0..4 {
            for c in 0..4 {
                o[r][c] += *w * op[r][c];
            }
        }
    }
    o
}

/// One column of the diffusion matrix: the operator multiplying a Wiener
/// increment and that increment's variance.
pub struct DiffusionColumn {
    pub op: SuperOp,
    pub variance: f64,
}

/// Itô-to-Stratonovich drift shift −(1/2dt)·Σ_j Var(dW_j)·B_j(B_j ρ) for linear
/// diffusion columns B_j.
pub fn brute_force_strat(columns: &[DiffusionColumn], rho: [C; 4], dt: f64) -> [C; 4] {
    let mut o = [C::new(0.0, 0.0); 4];
    for col in columns {
        let bb = apply(&col.op, apply(&col.op, rho));
        for k in 0..4 {
            o[k] -= 0.5 * col.variance / dt * bb[k];
        }
    }
    o
}

/// σ_z(t) of the isolated spin from ψ(t0) = |↑⟩ under H = (Δσ_x + κtσ_z)/2,
/// classical RK4 on the Schrödinger equation; samples every `stride` steps.
pub fn rk4_sweep_sz(delta: f64, kappa: f64, t0: f64, t_max: f64, dt: f64, stride: usize) -> Vec<(f64, f64)> {
    let n = ((t_max - t0) / dt).round() as usize;
    let f = |t: f64, p: [C; 2]| -> [C; 2] {
        let e = kappa * t;
        let mi = C::new(0.0, -0.5);
        [mi * (e * p[0] + delta * p[1]), mi * (delta * p[0] - e * p[1])]
    };
    let add = |p: [C; 2], k: [C; 2], s: f64| [p[0] + k[0] * s, p[1] + k[1] * s];
    let mut psi = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
    let mut out = vec![(t0, 1.0)];
    for h in 0..n {
        let t = t0 + h as f64 * dt;
        let k1 = f(t, psi);
        let k2 = f(t + dt / 2.0, add(psi, k1, dt / 2.0));
        let k3 = f(t + dt / 2.0, add(psi, k2, dt / 2.0));
        let k4 = f(t + dt, add(psi, k3, dt));
        for i in 0..2 {
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (h + 1) % stride == 0 {
            out.push((t + dt, psi[0].norm_sqr() - psi[1].norm_sqr()));
        }
    }
    out
}
