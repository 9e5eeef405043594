//! Iterative Bregman projections (IBP) for the entropy-regularized barycenter
//! problem, kept as a baseline for the LP solvers.
//!
//! Each plan is a diagonal scaling `X^t = diag(u_t) K_t diag(v_t)` of the Gibbs
//! kernel `K_t = exp(-G_t / epsilon)`, where `G_t` is the ground cost (the LP
//! cost `D^t` divided by `omega_t`). One sweep
//!
//! 1. sets the barycenter to the `omega`-weighted geometric mean of the
//!    current row marginals `u_t * (K_t v_t)` and rescales `u_t` so that every
//!    plan's row marginal equals it;
//! 2. rescales `v_t = a^t / (K_t^T u_t)`, so that every plan's column marginal
//!    equals `a^t` exactly.
//!
//! The barycenter is normalized to sum to one after the geometric mean; the
//! scale is absorbed by `v_t` in step 2, so the plans are unaffected.
//!
//! The plain variant underflows once `max G / epsilon` exceeds roughly 745;
//! `log_domain` runs the same sweep on `epsilon log u` and `epsilon log v`
//! with log-sum-exp reductions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::WbpInstance;
use crate::solvers::{ConvergenceRecord, Method, Metrics, SolveReport, Termination};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpOptions {
    pub epsilon: f64,
    /// Stop when the barycenter weight change (l1) and the row-marginal
    /// error both drop below this.
    pub tol: f64,
    pub max_iters: usize,
    pub log_domain: bool,
    pub time_limit_secs: Option<f64>,
}

impl Default for IbpOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            tol: 1e-6,
            max_iters: 10_000,
            log_domain: false,
            time_limit_secs: None,
        }
    }
}

impl IbpOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidOptions(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOptions(format!("IBP tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Ground cost of sample `t` (column-major `m x m_t`).
fn ground_cost(instance: &WbpInstance, t: usize) -> Vec<f64> {
    let w = instance.omega()[t];
    instance.cost(t).iter().map(|d| d / w).collect()
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Scaling state common to both variants, plus the final plans.
trait Scaling {
    /// Runs one sweep and returns the new barycenter.
    fn sweep(&mut self, sweep: usize) -> Result<Vec<f64>>;
    /// Plan `t` in column-major order.
    fn plan(&self, t: usize) -> Vec<f64>;
}

struct Plain {
    m: usize,
    mt: Vec<usize>,
    omega: Vec<f64>,
    targets: Vec<Vec<f64>>,
    kernels: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    kv: Vec<Vec<f64>>,
}

impl Plain {
    fn new(instance: &WbpInstance, epsilon: f64) -> Self {
        let m = instance.m();
        let mt: Vec<usize> = instance.samples().iter().map(|s| s.len()).collect();
        let kernels = (0..mt.len())
            .map(|t| ground_cost(instance, t).iter().map(|g| (-g / epsilon).exp()).collect())
            .collect();
        Self {
            m,
            omega: instance.omega().to_vec(),
            targets: instance.samples().iter().map(|s| s.weights().to_vec()).collect(),
            kernels,
            u: vec![vec![1.0; m]; mt.len()],
            v: mt.iter().map(|&n| vec![1.0; n]).collect(),
            kv: vec![vec![0.0; m]; mt.len()],
            mt,
        }
    }
}

impl Scaling for Plain {
    fn sweep(&mut self, sweep: usize) -> Result<Vec<f64>> {
        let m = self.m;
        let mut log_p = vec![0.0; m];
        for t in 0..self.mt.len() {
            let k = &self.kernels[t];
            let kv = &mut self.kv[t];
            kv.fill(0.0);
            for (j, vj) in self.v[t].iter().enumerate() {
                for (o, kij) in kv.iter_mut().zip(&k[j * m..(j + 1) * m]) {
                    *o += kij * vj;
                }
            }
            for i in 0..m {
                log_p[i] += self.omega[t] * (self.u[t][i] * kv[i]).ln();
            }
        }
        let mut p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
        let total: f64 = p.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Underflow {
                sweep,
                detail: "barycenter weights vanished".into(),
            });
        }
        p.iter_mut().for_each(|v| *v /= total);

        for t in 0..self.mt.len() {
            for i in 0..m {
                let kv = self.kv[t][i];
                if kv == 0.0 && p[i] > 0.0 {
                    return Err(Error::Underflow {
                        sweep,
                        detail: format!("K v vanished for sample {t}, atom {i}"),
                    });
                }
                self.u[t][i] = if p[i] == 0.0 { 0.0 } else { p[i] / kv };
            }
            let k = &self.kernels[t];
            for j in 0..self.mt[t] {
                let ktu: f64 = k[j * m..(j + 1) * m].iter().zip(&self.u[t]).map(|(a, b)| a * b).sum();
                let a = self.targets[t][j];
                if ktu == 0.0 && a > 0.0 {
                    return Err(Error::Underflow {
                        sweep,
                        detail: format!("K^T u vanished for sample {t}, atom {j}"),
                    });
                }
                self.v[t][j] = if a == 0.0 { 0.0 } else { a / ktu };
                if !self.v[t][j].is_finite() {
                    return Err(Error::Underflow {
                        sweep,
                        detail: format!("scaling overflow for sample {t}, atom {j}"),
                    });
                }
            }
        }
        Ok(p)
    }

    fn plan(&self, t: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = self.kernels[t].clone();
        for j in 0..self.mt[t] {
            for i in 0..m {
                out[j * m + i] *= self.u[t][i] * self.v[t][j];
            }
        }
        out
    }
}

/// Log-domain variant on the potentials `f = epsilon log u`, `g = epsilon log v`.
struct LogDomain {
    m: usize,
    mt: Vec<usize>,
    epsilon: f64,
    omega: Vec<f64>,
    log_targets: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    log_kv: Vec<Vec<f64>>,
}

impl LogDomain {
    fn new(instance: &WbpInstance, epsilon: f64) -> Self {
        let m = instance.m();
        let mt: Vec<usize> = instance.samples().iter().map(|s| s.len()).collect();
        Self {
            m,
            epsilon,
            omega: instance.omega().to_vec(),
            log_targets: instance
                .samples()
                .iter()
                .map(|s| s.weights().iter().map(|w| w.ln()).collect())
                .collect(),
            costs: (0..mt.len()).map(|t| ground_cost(instance, t)).collect(),
            f: vec![vec![0.0; m]; mt.len()],
            g: mt.iter().map(|&n| vec![0.0; n]).collect(),
            log_kv: vec![vec![0.0; m]; mt.len()],
            mt,
        }
    }
}

impl Scaling for LogDomain {
    fn sweep(&mut self, _sweep: usize) -> Result<Vec<f64>> {
        let (m, eps) = (self.m, self.epsilon);
        let mut log_p = vec![0.0; m];
        for t in 0..self.mt.len() {
            let cost = &self.costs[t];
            let g = &self.g[t];
            for i in 0..m {
                let lkv = logsumexp((0..self.mt[t]).map(|j| (g[j] - cost[j * m + i]) / eps));
                self.log_kv[t][i] = lkv;
                log_p[i] += self.omega[t] * (self.f[t][i] / eps + lkv);
            }
        }
        let norm = logsumexp(log_p.iter().copied());
        log_p.iter_mut().for_each(|l| *l -= norm);

        for t in 0..self.mt.len() {
            for i in 0..m {
                self.f[t][i] = if log_p[i] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    eps * (log_p[i] - self.log_kv[t][i])
                };
            }
            let cost = &self.costs[t];
            let f = &self.f[t];
            for j in 0..self.mt[t] {
                let col = &cost[j * m..(j + 1) * m];
                let lktu = logsumexp((0..m).map(|i| (f[i] - col[i]) / eps));
                let la = self.log_targets[t][j];
                self.g[t][j] = if la == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    eps * (la - lktu)
                };
            }
        }
        Ok(log_p.iter().map(|l| l.exp()).collect())
    }

    fn plan(&self, t: usize) -> Vec<f64> {
        let m = self.m;
        let eps = self.epsilon;
        let mut out = vec![0.0; m * self.mt[t]];
        for j in 0..self.mt[t] {
            for i in 0..m {
                let e = self.f[t][i] + self.g[t][j] - self.costs[t][j * m + i];
                out[j * m + i] = if e == f64::NEG_INFINITY { 0.0 } else { (e / eps).exp() };
            }
        }
        out
    }
}

/// `sum_t omega_t ||X^t 1 - p||_1`.
fn row_marginal_error(instance: &WbpInstance, plans: &[Vec<f64>], p: &[f64]) -> f64 {
    let m = instance.m();
    plans
        .iter()
        .zip(instance.omega())
        .map(|(plan, w)| {
            let mut rows = vec![0.0; m];
            for col in plan.chunks_exact(m) {
                for (r, v) in rows.iter_mut().zip(col) {
                    *r += v;
                }
            }
            w * rows.iter().zip(p).map(|(r, q)| (r - q).abs()).sum::<f64>()
        })
        .sum()
}

fn assemble_x(instance: &WbpInstance, plans: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(instance.layout().primal_len());
    for plan in plans {
        x.extend_from_slice(plan);
    }
    x.extend_from_slice(p);
    x
}

/// Runs IBP until both the barycenter weight change between sweeps (l1) and
/// the row-marginal error fall below `opts.tol`, or the budget runs out.
///
/// The weight change alone is not a safe test at small `epsilon`: the sweep
/// can stall for a while with the plans still far from the barycenter.
///
/// The report's `x` holds the final plans and barycenter; `y` and `s` are
/// empty, and every history record carries [`Metrics::Marginal`].
pub fn solve_ibp(instance: &WbpInstance, opts: &IbpOptions) -> Result<SolveReport> {
    opts.validate()?;
    for t in 0..instance.num_samples() {
        if instance.cost(t).iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance(format!("cost matrix {t} has non-finite entries")));
        }
    }
    let start = Instant::now();
    let mut state: Box<dyn Scaling> = if opts.log_domain {
        Box::new(LogDomain::new(instance, opts.epsilon))
    } else {
        Box::new(Plain::new(instance, opts.epsilon))
    };
    let t_count = instance.num_samples();
    // No change is measured on the first sweep: there is no previous barycenter.
    let mut p_prev: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    let mut last = Metrics::Marginal {
        marginal_err: f64::NAN,
        weight_change: f64::NAN,
    };
    let mut p = vec![1.0 / instance.m() as f64; instance.m()];

    for sweep in 1..=opts.max_iters {
        p = state.sweep(sweep)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "IBP barycenter",
                iteration: sweep,
            });
        }
        let change: f64 = match &p_prev {
            Some(prev) => p.iter().zip(prev).map(|(a, b)| (a - b).abs()).sum(),
            None => f64::INFINITY,
        };
        let plans: Vec<Vec<f64>> = (0..t_count).map(|t| state.plan(t)).collect();
        let marginal_err = row_marginal_error(instance, &plans, &p);
        let x = assemble_x(instance, &plans, &p);
        last = Metrics::Marginal {
            marginal_err,
            weight_change: change,
        };
        let elapsed = start.elapsed().as_secs_f64();
        history.push(ConvergenceRecord {
            iter: sweep,
            metrics: last,
            primal_obj: instance.primal_objective(&x),
            dual_obj: f64::NAN,
            elapsed_secs: elapsed,
            restarted: false,
            method: Method::Ibp,
        });
        iterations = sweep;
        p_prev = Some(p.clone());
        if change < opts.tol && marginal_err < opts.tol {
            termination = Termination::Tolerance;
            break;
        }
        if opts.time_limit_secs.is_some_and(|lim| elapsed >= lim) {
            termination = Termination::TimeLimit;
            break;
        }
    }
    let plans: Vec<Vec<f64>> = (0..t_count).map(|t| state.plan(t)).collect();
    let x = assemble_x(instance, &plans, &p);
    Ok(SolveReport {
        method: Method::Ibp,
        primal_obj: instance.primal_objective(&x),
        dual_obj: f64::NAN,
        x,
        y: Vec::new(),
        s: Vec::new(),
        iterations,
        termination,
        history,
        final_metrics: last,
        restarts: 0,
        switch_iteration: None,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
