//! Production solvers for the dual barycenter LP
//!
//! ```text
//! max <b, y>   s.t.  A^* y + s = c,  s >= 0
//! ```
//!
//! whose multiplier `x` is the primal transport/barycenter vector. Three
//! methods share one checkpoint loop:
//!
//! - [`HprWbpSolver`]: Halpern-Peaceman-Rachford with restarts;
//! - [`AdmmWbpSolver`]: ADMM with dual step size `gamma` ("fast-ADMM": the
//!   `y`-update is the closed-form normal solve);
//! - [`solve_hybrid`]: ADMM first, HPR once an iteration or accuracy
//!   threshold is crossed.
//!
//! Both iteration kernels are allocation free after construction.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::flops;
use crate::linalg::{all_finite, dot, norm};
use crate::normal::{solve_wbp_normal_into, NormalSolveWorkspace};
use crate::problem::{kkt_from_products, kkt_mapping_from_products, KktResidual, WbpInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hpr,
    Admm,
    Hybrid,
    Ibp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hpr, Method::Admm, Method::Hybrid, Method::Ibp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hpr => "hpr",
            Method::Admm => "admm",
            Method::Hybrid => "hybrid",
            Method::Ibp => "ibp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidOptions(format!("unknown method {s:?} (expected hpr, admm, hybrid or ibp)")))
    }
}

/// When to restart the Halpern sequence. Evaluated at checkpoints only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartPolicy {
    pub enabled: bool,
    /// Up to this iteration every checkpoint restarts.
    pub phase_boundary: usize,
    /// After the boundary, restart unconditionally when `k % forced_period == 0`.
    pub forced_period: usize,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            phase_boundary: 500,
            forced_period: 500,
        }
    }
}

impl RestartPolicy {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Restart decision at a checkpoint after `k` iterations.
///
/// For `k <= phase_boundary` every checkpoint restarts; afterwards a restart
/// happens when the KKT residual went down since the previous checkpoint
/// (`kkt_old > kkt_now`) or when `k` is a multiple of `forced_period`.
pub fn restart_controller(policy: &RestartPolicy, k: usize, kkt_old: Option<f64>, kkt_now: f64) -> bool {
    if !policy.enabled {
        return false;
    }
    if k <= policy.phase_boundary {
        return true;
    }
    let improved = kkt_old.is_some_and(|old| old > kkt_now);
    improved || (policy.forced_period > 0 && k.is_multiple_of(policy.forced_period))
}

/// ADMM-to-HPR switch for the hybrid method: ADMM runs while
/// `k <= switch_iteration` and `KKT >= switch_threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridPolicy {
    pub switch_iteration: usize,
    pub switch_threshold: f64,
}

impl Default for HybridPolicy {
    fn default() -> Self {
        Self {
            switch_iteration: 800,
            switch_threshold: 2e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub sigma: f64,
    /// ADMM dual step size in `(0, 2)`.
    pub gamma: f64,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub check_every: usize,
    pub time_limit_secs: Option<f64>,
    pub restart: RestartPolicy,
    pub hybrid: HybridPolicy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            gamma: 1.9,
            max_iters: 10_000,
            kkt_tol: 1e-5,
            check_every: 50,
            time_limit_secs: None,
            restart: RestartPolicy::default(),
            hybrid: HybridPolicy::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidOptions(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive and finite, got {}", self.sigma));
        }
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if !(self.kkt_tol > 0.0) {
            return bad(format!("kkt_tol must be positive, got {}", self.kkt_tol));
        }
        if self.check_every == 0 {
            return bad("check_every must be at least 1".into());
        }
        if let Some(t) = self.time_limit_secs {
            if !(t > 0.0) {
                return bad(format!("time limit must be positive, got {t}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIters,
    TimeLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIters => "max_iters",
            Termination::TimeLimit => "time_limit",
        }
    }
}

/// Per-checkpoint convergence measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Kkt(KktResidual),
    /// IBP: `marginal_err` is the l1 violation of the barycenter marginals,
    /// `weight_change` the l1 change of the barycenter weights in the sweep.
    Marginal { marginal_err: f64, weight_change: f64 },
}

impl Metrics {
    /// The scalar used for stopping and comparisons.
    pub fn headline(&self) -> f64 {
        match self {
            Metrics::Kkt(k) => k.max_relative,
            Metrics::Marginal { marginal_err, .. } => *marginal_err,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub metrics: Metrics,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub elapsed_secs: f64,
    pub restarted: bool,
    pub method: Method,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub method: Method,
    /// Primal vector `(vec(X^1); ...; vec(X^T); a^c)`.
    pub x: Vec<f64>,
    /// Dual vector; empty for IBP.
    pub y: Vec<f64>,
    /// Dual slack; empty for IBP.
    pub s: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<ConvergenceRecord>,
    pub final_metrics: Metrics,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub restarts: usize,
    /// Iteration after which the hybrid method handed over to HPR.
    pub switch_iteration: Option<usize>,
    pub elapsed_secs: f64,
}

impl SolveReport {
    /// Barycenter weights `a^c`.
    pub fn barycenter<'a>(&'a self, instance: &WbpInstance) -> &'a [f64] {
        &self.x[instance.layout().bary_range()]
    }

    pub fn kkt(&self) -> Option<&KktResidual> {
        match &self.final_metrics {
            Metrics::Kkt(k) => Some(k),
            Metrics::Marginal { .. } => None,
        }
    }
}

/// Common interface of the HPR and ADMM iteration states.
pub trait LpIteration {
    fn instance(&self) -> &WbpInstance;
    fn step(&mut self) -> Result<()>;
    fn iteration(&self) -> usize;
    fn x(&self) -> &[f64];
    fn y(&self) -> &[f64];
    fn s(&self) -> &[f64];
    /// `A^* y` for the current `y`.
    fn aty(&self) -> &[f64];
    /// Restarts the method's averaging, if it has any.
    fn restart(&mut self) {}

    /// Relative KKT residual of the current `(x, y, s)`, computed from the
    /// solver's own `A^* y` buffer.
    fn kkt(&self) -> KktResidual {
        let inst = self.instance();
        let mut ax = vec![0.0; inst.layout().dual_len()];
        inst.layout().apply_a_into(self.x(), &mut ax);
        kkt_from_products(inst.b(), inst.c(), self.x(), self.s(), &ax, self.aty())
    }

    /// `||(Ax - b, s - P_K(s - x), c - A^* y - s)||`.
    fn kkt_mapping_norm(&self) -> f64 {
        let inst = self.instance();
        let mut ax = vec![0.0; inst.layout().dual_len()];
        inst.layout().apply_a_into(self.x(), &mut ax);
        kkt_mapping_from_products(inst.b(), inst.c(), self.x(), self.s(), &ax, self.aty())
    }
}

fn validate_initial(instance: &WbpInstance, initial: Option<(&[f64], &[f64])>) -> Result<(Vec<f64>, Vec<f64>)> {
    let layout = instance.layout();
    match initial {
        None => Ok((vec![0.0; layout.dual_len()], vec![0.0; layout.primal_len()])),
        Some((y0, x0)) => {
            check_len("initial dual vector", layout.dual_len(), y0.len())?;
            check_len("initial primal vector", layout.primal_len(), x0.len())?;
            if !all_finite(y0) || !all_finite(x0) {
                return Err(Error::InvalidOptions("initial point has non-finite entries".into()));
            }
            Ok((y0.to_vec(), x0.to_vec()))
        }
    }
}

/// `r = b / sigma - A z`, with `A z` written into `r` first.
fn normal_rhs(instance: &WbpInstance, z: &[f64], inv_sigma: f64, r: &mut [f64]) {
    instance.layout().apply_a_into(z, r);
    for (r, b) in r.iter_mut().zip(instance.b()) {
        *r = b * inv_sigma - *r;
    }
    flops::add(z.len() + 2 * r.len());
}

/// HPR state for the dual barycenter LP. Each [`step`](Self::step) performs
///
/// ```text
/// s      = P_K(c - A^* y - x_hat / sigma)
/// x_half = x_hat + sigma (s + A^* y - c)
/// y      = (A A^*)^{-1} (b / sigma - A (x_half / sigma + s - c))
/// x      = x_half + sigma (s + A^* y - c)
/// x_hat  = (x_hat0 + (k+1) x + sigma [A^* y0 - A^* y]) / (k+2)
/// ```
///
/// where `(x_hat0, y0)` is the anchor set at construction and at every
/// [`restart`](LpIteration::restart), and `k` the Halpern index.
pub struct HprWbpSolver<'a> {
    instance: &'a WbpInstance,
    sigma: f64,
    x: Vec<f64>,
    x_hat: Vec<f64>,
    x_hat0: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    aty: Vec<f64>,
    aty0: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    ws: NormalSolveWorkspace,
    halpern_k: usize,
    iter: usize,
}

impl<'a> HprWbpSolver<'a> {
    /// Starts from `(y0, x0)`, zeros by default. `s` starts at
    /// `c - A^* y0`.
    pub fn new(instance: &'a WbpInstance, sigma: f64, initial: Option<(&[f64], &[f64])>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidOptions(format!("sigma must be positive and finite, got {sigma}")));
        }
        let (y, x) = validate_initial(instance, initial)?;
        let layout = instance.layout();
        let n = layout.primal_len();
        let mut aty = vec![0.0; n];
        layout.apply_astar_into(&y, &mut aty);
        let s: Vec<f64> = instance.c().iter().zip(&aty).map(|(c, a)| c - a).collect();
        Ok(Self {
            instance,
            sigma,
            x_hat: x.clone(),
            x_hat0: x.clone(),
            x,
            s,
            y,
            aty0: aty.clone(),
            aty,
            z: vec![0.0; n],
            r: vec![0.0; layout.dual_len()],
            ws: NormalSolveWorkspace::new(layout),
            halpern_k: 0,
            iter: 0,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn halpern_index(&self) -> usize {
        self.halpern_k
    }

    pub fn x_hat(&self) -> &[f64] {
        &self.x_hat
    }

    /// `eta = x_hat + sigma (A^* y - c)`, the underlying fixed-point variable.
    pub fn eta(&self) -> Vec<f64> {
        self.x_hat
            .iter()
            .zip(&self.aty)
            .zip(self.instance.c())
            .map(|((x, a), c)| x + self.sigma * (a - c))
            .collect()
    }

    /// `||v^{k+1} - eta^k|| = 2 sigma ||A^* y + s - c||` for the iterate just
    /// produced by [`step`](Self::step).
    pub fn fixed_point_residual(&self) -> f64 {
        let d: f64 = self
            .aty
            .iter()
            .zip(&self.s)
            .zip(self.instance.c())
            .map(|((a, s), c)| (a + s - c).powi(2))
            .sum();
        2.0 * self.sigma * d.sqrt()
    }

    /// The right-hand side of the last `y`-update, for residual checks.
    pub fn last_normal_rhs(&self) -> &[f64] {
        &self.r
    }
}

impl LpIteration for HprWbpSolver<'_> {
    fn instance(&self) -> &WbpInstance {
        self.instance
    }

    fn step(&mut self) -> Result<()> {
        let sigma = self.sigma;
        let inv_sigma = 1.0 / sigma;
        let c = self.instance.c();
        let n = self.x.len();

        // s-update, x_half (kept in x) and z = x_half / sigma + s - c.
        for i in 0..n {
            let s = (c[i] - self.aty[i] - self.x_hat[i] * inv_sigma).max(0.0);
            let xh = self.x_hat[i] + sigma * (s + self.aty[i] - c[i]);
            self.s[i] = s;
            self.x[i] = xh;
            self.z[i] = xh * inv_sigma + s - c[i];
        }
        flops::add(11 * n);

        normal_rhs(self.instance, &self.z, inv_sigma, &mut self.r);
        solve_wbp_normal_into(self.instance.layout(), &self.r, &mut self.ws, &mut self.y)?;
        self.instance.layout().apply_astar_into(&self.y, &mut self.aty);
        flops::add(n);

        let lambda = 1.0 / (self.halpern_k as f64 + 2.0);
        let keep = 1.0 - lambda;
        let sl = sigma * lambda;
        for i in 0..n {
            let x = self.x[i] + sigma * (self.s[i] + self.aty[i] - c[i]);
            self.x[i] = x;
            self.x_hat[i] = lambda * self.x_hat0[i] + keep * x + sl * (self.aty0[i] - self.aty[i]);
        }
        flops::add(10 * n + 4);

        self.halpern_k += 1;
        self.iter += 1;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iter
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn y(&self) -> &[f64] {
        &self.y
    }

    fn s(&self) -> &[f64] {
        &self.s
    }

    fn aty(&self) -> &[f64] {
        &self.aty
    }

    /// Re-anchors at the current iterate: `x_hat0 = x_hat = x`, `y0 = y`,
    /// Halpern index back to zero.
    fn restart(&mut self) {
        self.x_hat0.copy_from_slice(&self.x);
        self.x_hat.copy_from_slice(&self.x);
        self.aty0.copy_from_slice(&self.aty);
        self.halpern_k = 0;
    }
}

/// ADMM state for the dual barycenter LP:
///
/// ```text
/// s = P_K(c - A^* y - x / sigma)
/// y = (A A^*)^{-1} (b / sigma - A (x / sigma + s - c))
/// x = x + gamma sigma (A^* y + s - c)
/// ```
pub struct AdmmWbpSolver<'a> {
    instance: &'a WbpInstance,
    sigma: f64,
    gamma: f64,
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    aty: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    ws: NormalSolveWorkspace,
    iter: usize,
}

impl<'a> AdmmWbpSolver<'a> {
    pub fn new(instance: &'a WbpInstance, sigma: f64, gamma: f64, initial: Option<(&[f64], &[f64])>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidOptions(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidOptions(format!("gamma must lie in (0, 2), got {gamma}")));
        }
        let (y, x) = validate_initial(instance, initial)?;
        let layout = instance.layout();
        let n = layout.primal_len();
        let mut aty = vec![0.0; n];
        layout.apply_astar_into(&y, &mut aty);
        let s = instance.c().iter().zip(&aty).map(|(c, a)| c - a).collect();
        Ok(Self {
            instance,
            sigma,
            gamma,
            x,
            s,
            y,
            aty,
            z: vec![0.0; n],
            r: vec![0.0; layout.dual_len()],
            ws: NormalSolveWorkspace::new(layout),
            iter: 0,
        })
    }
}

impl LpIteration for AdmmWbpSolver<'_> {
    fn instance(&self) -> &WbpInstance {
        self.instance
    }

    fn step(&mut self) -> Result<()> {
        let sigma = self.sigma;
        let inv_sigma = 1.0 / sigma;
        let c = self.instance.c();
        let n = self.x.len();
        for i in 0..n {
            let xs = self.x[i] * inv_sigma;
            let s = (c[i] - self.aty[i] - xs).max(0.0);
            self.s[i] = s;
            self.z[i] = xs + s - c[i];
        }
        flops::add(6 * n);
        normal_rhs(self.instance, &self.z, inv_sigma, &mut self.r);
        solve_wbp_normal_into(self.instance.layout(), &self.r, &mut self.ws, &mut self.y)?;
        self.instance.layout().apply_astar_into(&self.y, &mut self.aty);
        let step = self.gamma * sigma;
        for i in 0..n {
            self.x[i] += step * (self.aty[i] + self.s[i] - c[i]);
        }
        flops::add(5 * n + 1);
        self.iter += 1;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iter
    }

    fn x(&self) -> &[f64] {
        &self.x
    }

    fn y(&self) -> &[f64] {
        &self.y
    }

    fn s(&self) -> &[f64] {
        &self.s
    }

    fn aty(&self) -> &[f64] {
        &self.aty
    }
}

/// Checkpoint loop shared by all LP methods.
struct Driver<'o> {
    opts: &'o SolverOptions,
    start: Instant,
    history: Vec<ConvergenceRecord>,
    last_kkt: Option<f64>,
    restarts: usize,
}

enum Checkpoint {
    Continue(KktResidual),
    Stop(Termination, KktResidual),
}

impl<'o> Driver<'o> {
    fn new(opts: &'o SolverOptions) -> Self {
        Self {
            opts,
            start: Instant::now(),
            history: Vec::new(),
            last_kkt: None,
            restarts: 0,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn is_checkpoint(&self, k: usize) -> bool {
        k.is_multiple_of(self.opts.check_every) || k >= self.opts.max_iters
    }

    /// Evaluates the iterate, records it, and applies the restart rule when
    /// `restartable`.
    fn checkpoint<S: LpIteration + ?Sized>(&mut self, solver: &mut S, method: Method, restartable: bool) -> Result<Checkpoint> {
        let k = solver.iteration();
        let kkt = solver.kkt();
        if !kkt.is_finite() || !all_finite(solver.x()) || !all_finite(solver.y()) {
            return Err(Error::NonFinite {
                what: "solver iterate",
                iteration: k,
            });
        }
        let inst = solver.instance();
        let mut record = ConvergenceRecord {
            iter: k,
            metrics: Metrics::Kkt(kkt),
            primal_obj: inst.primal_objective(solver.x()),
            dual_obj: inst.dual_objective(solver.y()),
            elapsed_secs: self.elapsed(),
            restarted: false,
            method,
        };
        let now = kkt.max_relative;
        let stop = if now <= self.opts.kkt_tol {
            Some(Termination::Tolerance)
        } else if k >= self.opts.max_iters {
            Some(Termination::MaxIters)
        } else if self.opts.time_limit_secs.is_some_and(|t| record.elapsed_secs >= t) {
            Some(Termination::TimeLimit)
        } else {
            None
        };
        if stop.is_none() && restartable && restart_controller(&self.opts.restart, k, self.last_kkt, now) {
            solver.restart();
            self.restarts += 1;
            record.restarted = true;
        }
        self.last_kkt = Some(now);
        self.history.push(record);
        Ok(match stop {
            Some(t) => Checkpoint::Stop(t, kkt),
            None => Checkpoint::Continue(kkt),
        })
    }

    fn finish<S: LpIteration + ?Sized>(
        self,
        solver: &S,
        method: Method,
        termination: Termination,
        kkt: KktResidual,
        switch_iteration: Option<usize>,
    ) -> SolveReport {
        let inst = solver.instance();
        SolveReport {
            method,
            x: solver.x().to_vec(),
            y: solver.y().to_vec(),
            s: solver.s().to_vec(),
            iterations: solver.iteration(),
            termination,
            final_metrics: Metrics::Kkt(kkt),
            primal_obj: inst.primal_objective(solver.x()),
            dual_obj: dot(inst.b(), solver.y()),
            restarts: self.restarts,
            switch_iteration,
            elapsed_secs: self.elapsed(),
            history: self.history,
        }
    }
}

fn run<S: LpIteration>(mut solver: S, opts: &SolverOptions, method: Method, restartable: bool) -> Result<SolveReport> {
    let mut driver = Driver::new(opts);
    if opts.max_iters == 0 {
        let kkt = solver.kkt();
        let term = if kkt.max_relative <= opts.kkt_tol {
            Termination::Tolerance
        } else {
            Termination::MaxIters
        };
        return Ok(driver.finish(&solver, method, term, kkt, None));
    }
    loop {
        solver.step()?;
        if driver.is_checkpoint(solver.iteration()) {
            if let Checkpoint::Stop(term, kkt) = driver.checkpoint(&mut solver, method, restartable)? {
                return Ok(driver.finish(&solver, method, term, kkt, None));
            }
        }
    }
}

/// HPR from `initial = (y0, x0)` (zeros by default).
pub fn solve_hpr(instance: &WbpInstance, opts: &SolverOptions, initial: Option<(&[f64], &[f64])>) -> Result<SolveReport> {
    opts.validate()?;
    let solver = HprWbpSolver::new(instance, opts.sigma, initial)?;
    run(solver, opts, Method::Hpr, true)
}

/// Fast-ADMM with step size `opts.gamma`.
pub fn solve_admm(instance: &WbpInstance, opts: &SolverOptions, initial: Option<(&[f64], &[f64])>) -> Result<SolveReport> {
    opts.validate()?;
    let solver = AdmmWbpSolver::new(instance, opts.sigma, opts.gamma, initial)?;
    run(solver, opts, Method::Admm, false)
}

/// ADMM until the first checkpoint with `k >= switch_iteration` or
/// `KKT < switch_threshold`, then HPR anchored at the ADMM iterate `(y, x)`.
/// Iteration numbering, the restart schedule and the history continue across
/// the switch; [`SolveReport::switch_iteration`] marks it.
pub fn solve_hybrid(instance: &WbpInstance, opts: &SolverOptions, initial: Option<(&[f64], &[f64])>) -> Result<SolveReport> {
    opts.validate()?;
    let mut admm = AdmmWbpSolver::new(instance, opts.sigma, opts.gamma, initial)?;
    let mut driver = Driver::new(opts);
    let policy = opts.hybrid;
    if opts.max_iters == 0 {
        let kkt = admm.kkt();
        let term = if kkt.max_relative <= opts.kkt_tol {
            Termination::Tolerance
        } else {
            Termination::MaxIters
        };
        return Ok(driver.finish(&admm, Method::Hybrid, term, kkt, None));
    }
    let switch_at = loop {
        admm.step()?;
        let k = admm.iteration();
        if driver.is_checkpoint(k) {
            match driver.checkpoint(&mut admm, Method::Admm, false)? {
                Checkpoint::Stop(term, kkt) => return Ok(driver.finish(&admm, Method::Hybrid, term, kkt, None)),
                Checkpoint::Continue(kkt) => {
                    if k >= policy.switch_iteration || kkt.max_relative < policy.switch_threshold {
                        break k;
                    }
                }
            }
        }
    };

    let mut hpr = HprWbpSolver::new(instance, opts.sigma, Some((admm.y(), admm.x())))?;
    hpr.iter = switch_at;
    drop(admm);
    loop {
        hpr.step()?;
        if driver.is_checkpoint(hpr.iteration()) {
            if let Checkpoint::Stop(term, kkt) = driver.checkpoint(&mut hpr, Method::Hpr, true)? {
                return Ok(driver.finish(&hpr, Method::Hybrid, term, kkt, Some(switch_at)));
            }
        }
    }
}

/// Dispatches to the LP method named by `method`; IBP is not an LP method
/// and is rejected here (see [`crate::ibp`]).
pub fn solve(instance: &WbpInstance, method: Method, opts: &SolverOptions) -> Result<SolveReport> {
    match method {
        Method::Hpr => solve_hpr(instance, opts, None),
        Method::Admm => solve_admm(instance, opts, None),
        Method::Hybrid => solve_hybrid(instance, opts, None),
        Method::Ibp => Err(Error::InvalidOptions(
            "IBP solves the entropic problem; use ibp::solve_ibp".into(),
        )),
    }
}

/// `||A A^* y - r|| / (1 + ||r||)` for a solution of the normal equations.
pub fn normal_solve_residual(instance: &WbpInstance, y: &[f64], r: &[f64]) -> f64 {
    let layout = instance.layout();
    let mut aty = vec![0.0; layout.primal_len()];
    let mut aaty = vec![0.0; layout.dual_len()];
    layout.apply_astar_into(y, &mut aty);
    layout.apply_a_into(&aty, &mut aaty);
    let diff: Vec<f64> = aaty.iter().zip(r).map(|(a, b)| a - b).collect();
    norm(&diff) / (1.0 + norm(r))
}
