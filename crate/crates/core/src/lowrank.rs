//! Adaptive cross approximation of smooth complex matrices.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

type C = Complex64;

/// A ≈ U·V with U of shape (rows, r) and V of shape (r, cols).
#[derive(Clone, Debug)]
pub(crate) struct LowRank {
    pub u: Array2<C>,
    pub v: Array2<C>,
}

impl LowRank {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn get(&self, n: usize, m: usize) -> C {
        self.u.row(n).iter().zip(self.v.column(m)).map(|(a, b)| a * b).sum()
    }
}

/// Partially pivoted cross approximation of `a`, accepted only once the
/// exact residual max|A − UV| is within `tol`·max|A|. `None` when that needs
/// more than `max_rank` terms.
pub(crate) fn cross_approximation(a: ArrayView2<C>, tol: f64, max_rank: usize) -> Option<LowRank> {
    let (rows, cols) = a.dim();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(LowRank {
            u: Array2::zeros((rows, 0)),
            v: Array2::zeros((0, cols)),
        });
    }
    let max_rank = max_rank.min(rows).min(cols);
    let mut us: Vec<Vec<C>> = Vec::new();
    let mut vs: Vec<Vec<C>> = Vec::new();
    let mut used_rows = vec![false; rows];
    let mut pivot_row = 0;
    // Stop adding crosses once they are this small; the residual check decides.
    let mut stop = 0.1 * tol * scale;
    loop {
        while us.len() < max_rank {
            used_rows[pivot_row] = true;
            let mut row: Vec<C> = a.row(pivot_row).to_vec();
            for (u, v) in us.iter().zip(&vs) {
                let w = u[pivot_row];
                row.iter_mut().zip(v).for_each(|(r, &x)| *r -= w * x);
            }
            let (pc, pv) = argmax(&row);
            if pv <= stop {
                match used_rows.iter().position(|&u| !u) {
                    // A (numerically) zero residual row; try the next unused one.
                    Some(next) if pv == 0.0 || us.is_empty() => {
                        pivot_row = next;
                        continue;
                    }
                    _ => break,
                }
            }
            let piv = row[pc];
            let v: Vec<C> = row.iter().map(|&x| x / piv).collect();
            let mut u: Vec<C> = a.column(pc).to_vec();
            for (uu, vv) in us.iter().zip(&vs) {
                let w = vv[pc];
                u.iter_mut().zip(uu).for_each(|(r, &x)| *r -= w * x);
            }
            let next = (0..rows)
                .filter(|&i| !used_rows[i])
                .max_by(|&i, &j| u[i].norm().total_cmp(&u[j].norm()));
            us.push(u);
            vs.push(v);
            match next {
                Some(n) => pivot_row = n,
                None => break,
            }
        }
        let lr = assemble(&us, &vs, rows, cols);
        let residuals = row_residuals(a, &lr);
        let residual = residuals.iter().copied().fold(0.0, f64::max);
        if residual <= tol * scale {
            return Some(lr);
        }
        if us.len() >= max_rank || stop < 1e-6 * tol * scale {
            return None;
        }
        // Partial pivoting missed part of the range; continue from the worst row.
        stop *= 0.01;
        pivot_row = (0..rows)
            .filter(|&i| !used_rows[i])
            .max_by(|&i, &j| residuals[i].total_cmp(&residuals[j]))?;
    }
}

fn argmax(x: &[C]) -> (usize, f64) {
    x.iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, -1.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

fn assemble(us: &[Vec<C>], vs: &[Vec<C>], rows: usize, cols: usize) -> LowRank {
    let r = us.len();
    let mut u = Array2::zeros((rows, r));
    let mut v = Array2::zeros((r, cols));
    for l in 0..r {
        u.column_mut(l).iter_mut().zip(&us[l]).for_each(|(d, &s)| *d = s);
        v.row_mut(l).iter_mut().zip(&vs[l]).for_each(|(d, &s)| *d = s);
    }
    LowRank { u, v }
}

/// max_m |A − UV| for every row, in row blocks through real matrix products.
fn row_residuals(a: ArrayView2<C>, lr: &LowRank) -> Vec<f64> {
    let (rows, cols) = a.dim();
    if lr.rank() == 0 {
        return a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).fold(0.0, f64::max)).collect();
    }
    let (vr, vi) = (lr.v.mapv(|z| z.re), lr.v.mapv(|z| z.im));
    let block = 2048;
    let mut out = Vec::with_capacity(rows);
    for lo in (0..rows).step_by(block) {
        let hi = (lo + block).min(rows);
        let u = lr.u.slice(s![lo..hi, ..]);
        let (ur, ui) = (u.mapv(|z| z.re), u.mapv(|z| z.im));
        let re = ur.dot(&vr) - ui.dot(&vi);
        let im = ur.dot(&vi) + ui.dot(&vr);
        for (k, row) in a.slice(s![lo..hi, ..]).rows().into_iter().enumerate() {
            let worst = (0..cols)
                .map(|m| (row[m] - C::new(re[[k, m]], im[[k, m]])).norm())
                .fold(0.0, f64::max);
            out.push(worst);
        }
    }
    out
}
