//! Closed-form solvers for the normal equations `A A^* y = R`.
//!
//! For the barycenter constraint matrix the system has the block form
//!
//! ```text
//! [ E1   E2      0   ] [y1]   [R1]
//! [ E2^* E3+E4   E5  ] [y2] = [R2]
//! [ 0    E5^*    m   ] [y3]   [R3]
//! ```
//!
//! with `E1 = diag(m I)`, `E2 = diag(1 1^T)`, `E3 = diag(m_t I)`,
//! `E4 = (1_T 1_T^T) (x) I` and `E5 = -1`. Eliminating `y1` and `y3` leaves a
//! system in `y2` whose matrix is a block-diagonal term plus a rank-`m-1`
//! Kronecker term; both factors invert in closed form because
//! `(I - 11^T/m)^{-1} = I + 11^T`. The resulting solve is
//!
//! ```text
//! yhat_t  = R2^t + (1^T R2^t - 1^T R1^t + R3) 1
//! yhat_a  = sum_t (mbar / m_t) yhat_t,        mbar = 1 / (1 + sum_t 1/m_t)
//! y2^t    = (yhat_t - yhat_a) / m_t
//! y1^t    = R1^t / m - (1^T y2^t / m) 1
//! y3      = (R3 + 1^T y2) / m
//! ```
//!
//! which costs `7Tm + 3 sum_t m_t + O(T)` flops and no matrix storage.

use std::io::Write;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::flops;
use crate::linalg::{dot, norm};
use crate::problem::{Layout, OtInstance, PrimalVector, WbpInstance};

/// Scratch state for [`solve_wbp_normal`], reusable across solves on the same
/// layout.
///
/// The per-sample `yhat_t` blocks are formed directly in the `y2` part of the
/// output, so the workspace only carries the aggregate `yhat_a` and the
/// per-sample reciprocals.
#[derive(Clone, Debug)]
pub struct NormalSolveWorkspace {
    m: usize,
    mt: Vec<usize>,
    inv_mt: Vec<f64>,
    mbar: f64,
    aggregate: Vec<f64>,
}

impl NormalSolveWorkspace {
    pub fn new(layout: &Layout) -> Self {
        let mt = layout.sample_sizes().to_vec();
        let inv_mt: Vec<f64> = mt.iter().map(|&n| 1.0 / n as f64).collect();
        let mbar = 1.0 / (1.0 + inv_mt.iter().sum::<f64>());
        Self {
            m: layout.m(),
            mt,
            inv_mt,
            mbar,
            aggregate: vec![0.0; layout.m() - 1],
        }
    }

    /// `mbar = (1 + sum_t 1/m_t)^{-1}`, always in `(0, 1)`.
    pub fn mbar(&self) -> f64 {
        self.mbar
    }

    fn matches(&self, layout: &Layout) -> bool {
        self.m == layout.m() && self.mt == layout.sample_sizes()
    }
}

/// Solves `A A^* y = r` for the barycenter constraint matrix, writing into
/// `y`. Allocation free.
pub fn solve_wbp_normal_into(
    layout: &Layout,
    r: &[f64],
    ws: &mut NormalSolveWorkspace,
    y: &mut [f64],
) -> Result<()> {
    check_len("normal-equation right-hand side", layout.dual_len(), r.len())?;
    check_len("normal-equation solution", layout.dual_len(), y.len())?;
    if !ws.matches(layout) {
        return Err(Error::DimensionMismatch {
            what: "normal-solve workspace",
            expected: layout.dual_len(),
            got: ws.mt.iter().sum::<usize>() + ws.mt.len() * (ws.m - 1) + 1,
        });
    }
    let m = layout.m();
    let t_count = layout.num_samples();
    let r3 = r[layout.y3_index()];
    let m1 = layout.total_mt();
    let (y1, rest) = y.split_at_mut(m1);
    let (y2, y3) = rest.split_at_mut(t_count * (m - 1));

    // yhat_t into the y2 blocks.
    for t in 0..t_count {
        let r1t = &r[layout.y1_range(t)];
        let r2t = &r[layout.y2_range(t)];
        let shift = r2t.iter().sum::<f64>() - r1t.iter().sum::<f64>() + r3;
        for (o, v) in y2[t * (m - 1)..(t + 1) * (m - 1)].iter_mut().zip(r2t) {
            *o = v + shift;
        }
        flops::add(2 * (m - 1) + r1t.len() + 2);
    }

    // yhat_a, accumulated sequentially in t.
    ws.aggregate.fill(0.0);
    for t in 0..t_count {
        let coef = ws.mbar * ws.inv_mt[t];
        for (a, v) in ws.aggregate.iter_mut().zip(&y2[t * (m - 1)..(t + 1) * (m - 1)]) {
            *a += coef * v;
        }
        flops::add(2 * (m - 1) + 1);
    }

    let inv_m = 1.0 / m as f64;
    let mut total = 0.0;
    for t in 0..t_count {
        let inv = ws.inv_mt[t];
        let block = &mut y2[t * (m - 1)..(t + 1) * (m - 1)];
        let mut sum = 0.0;
        for (o, a) in block.iter_mut().zip(&ws.aggregate) {
            *o = (*o - a) * inv;
            sum += *o;
        }
        let shift = sum * inv_m;
        for (o, v) in y1[layout.y1_range(t)].iter_mut().zip(&r[layout.y1_range(t)]) {
            *o = v * inv_m - shift;
        }
        total += sum;
        flops::add(3 * (m - 1) + 2 * ws.mt[t] + 2);
    }
    y3[0] = (r3 + total) * inv_m;
    flops::add(2);
    Ok(())
}

/// Allocating convenience wrapper around [`solve_wbp_normal_into`].
pub fn solve_wbp_normal(instance: &WbpInstance, r: &[f64]) -> Result<Vec<f64>> {
    let layout = instance.layout();
    let mut ws = NormalSolveWorkspace::new(layout);
    let mut y = vec![0.0; layout.dual_len()];
    solve_wbp_normal_into(layout, r, &mut ws, &mut y)?;
    Ok(y)
}

/// Solves `A A^* y = (r1; r2)` for the OT constraint matrix with
/// `r1 in R^{m_v}` (column sums) and `r2 in R^{m_u - 1}` (rows `2..m_u`).
pub fn solve_ot_normal_into(m_u: usize, m_v: usize, r1: &[f64], r2: &[f64], y1: &mut [f64], y2: &mut [f64]) -> Result<()> {
    if m_u < 2 || m_v < 1 {
        return Err(Error::InvalidInstance(format!(
            "OT normal equations need m_u >= 2 and m_v >= 1, got ({m_u}, {m_v})"
        )));
    }
    check_len("OT right-hand side r1", m_v, r1.len())?;
    check_len("OT right-hand side r2", m_u - 1, r2.len())?;
    check_len("OT solution y1", m_v, y1.len())?;
    check_len("OT solution y2", m_u - 1, y2.len())?;
    let (mu, mv) = (m_u as f64, m_v as f64);
    let s1: f64 = r1.iter().sum();
    let s2: f64 = r2.iter().sum();
    let shift1 = ((mu - 1.0) / mu * s1 - s2) / mv;
    let shift2 = (s2 - s1) / mv;
    for (o, v) in y1.iter_mut().zip(r1) {
        *o = v / mu + shift1;
    }
    for (o, v) in y2.iter_mut().zip(r2) {
        *o = v / mv + shift2;
    }
    flops::add(3 * (m_u + m_v) + 8);
    Ok(())
}

/// Allocating wrapper around [`solve_ot_normal_into`]; returns `(y1, y2)`.
pub fn solve_ot_normal(m_u: usize, m_v: usize, r1: &[f64], r2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut y1 = vec![0.0; m_v];
    let mut y2 = vec![0.0; m_u.saturating_sub(1)];
    solve_ot_normal_into(m_u, m_v, r1, r2, &mut y1, &mut y2)?;
    Ok((y1, y2))
}

/// Euclidean projection of `z` onto `{x : Ax = b}`:
/// `z - A^* (A A^*)^{-1} (A z - b)`.
pub fn project_affine(instance: &WbpInstance, z: &PrimalVector, ws: &mut NormalSolveWorkspace) -> Result<PrimalVector> {
    let layout = instance.layout();
    check_len("primal vector", layout.primal_len(), z.as_slice().len())?;
    let mut resid = vec![0.0; layout.dual_len()];
    layout.apply_a_into(z.as_slice(), &mut resid);
    for (r, b) in resid.iter_mut().zip(instance.b()) {
        *r -= b;
    }
    let mut y = vec![0.0; layout.dual_len()];
    solve_wbp_normal_into(layout, &resid, ws, &mut y)?;
    let mut correction = vec![0.0; layout.primal_len()];
    layout.apply_astar_into(&y, &mut correction);
    let mut out = z.clone();
    for (o, c) in out.as_mut_slice().iter_mut().zip(&correction) {
        *o -= c;
    }
    Ok(out)
}

/// Euclidean projection onto `{x : Ax = b}` for an OT instance.
pub fn project_affine_ot(ot: &OtInstance, z: &[f64]) -> Result<Vec<f64>> {
    check_len("OT primal vector", ot.primal_len(), z.len())?;
    let mut resid = vec![0.0; ot.dual_len()];
    ot.apply_a_into(z, &mut resid);
    for (r, b) in resid.iter_mut().zip(ot.b()) {
        *r -= b;
    }
    let (r1, r2) = resid.split_at(ot.m_v());
    let (y1, y2) = solve_ot_normal(ot.m_u(), ot.m_v(), r1, r2)?;
    let y: Vec<f64> = y1.into_iter().chain(y2).collect();
    let mut correction = vec![0.0; ot.primal_len()];
    ot.apply_astar_into(&y, &mut correction);
    Ok(z.iter().zip(&correction).map(|(a, c)| a - c).collect())
}

/// Densifies `A A^*` column by column through the matrix-free operators.
/// Debug aid for tiny dimensions only: `O(M^2)` memory.
pub fn dense_normal_matrix(layout: &Layout) -> Vec<Vec<f64>> {
    let dim = layout.dual_len();
    let mut e = vec![0.0; dim];
    let mut tmp = vec![0.0; layout.primal_len()];
    let mut cols = vec![vec![0.0; dim]; dim];
    for (j, col) in cols.iter_mut().enumerate() {
        e.fill(0.0);
        e[j] = 1.0;
        layout.apply_astar_into(&e, &mut tmp);
        layout.apply_a_into(&tmp, col);
    }
    // symmetric, so columns == rows
    cols
}

/// Writes the densified `A A^*` as CSV (one row per line).
pub fn dump_dense_normal_csv(layout: &Layout, path: &Path) -> Result<()> {
    let rows = dense_normal_matrix(layout);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Estimates the spectral condition number of `A A^*` by power iteration on
/// `A A^*` and on its inverse (applied through the closed-form solve).
pub fn condition_estimate(layout: &Layout, iterations: usize) -> Result<f64> {
    let dim = layout.dual_len();
    let mut ws = NormalSolveWorkspace::new(layout);
    let mut tmp = vec![0.0; layout.primal_len()];
    let start: Vec<f64> = (0..dim).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();

    let mut v = start.clone();
    let mut w = vec![0.0; dim];
    let mut lambda_max = 0.0;
    for _ in 0..iterations {
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        layout.apply_astar_into(&v, &mut tmp);
        layout.apply_a_into(&tmp, &mut w);
        lambda_max = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }

    let mut v = start;
    let mut inv_max = 0.0;
    for _ in 0..iterations {
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        solve_wbp_normal_into(layout, &v, &mut ws, &mut w)?;
        inv_max = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    Ok(lambda_max * inv_max)
}
