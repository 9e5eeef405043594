//! Halpern-Peaceman-Rachford (HPR) machinery for two-block problems
//!
//! ```text
//! min f1(y) + f2(s)   s.t.  B1 y + B2 s = c
//! ```
//!
//! in three equivalent forms:
//!
//! - inclusion form ([`hpr_step_inclusion`]): Halpern iteration on the
//!   Peaceman-Rachford operator `R_{sM1} o R_{sM2}` given the two resolvents;
//! - optimization form with the fixed-point variable `eta` kept explicitly
//!   ([`EtaFormState`]);
//! - optimization form without `eta` ([`HprIterate`]), the memory-lean form
//!   the production solvers use.
//!
//! [`verify_equivalence`] runs all three side by side.

use crate::error::{check_len, Error, Result};
use crate::linalg::max_abs_diff;
use crate::normal::{solve_ot_normal_into, solve_wbp_normal_into, NormalSolveWorkspace};
use crate::problem::{OtInstance, WbpInstance};

/// Halpern weight `lambda_k = 1 / (k + 2)`.
#[inline]
pub fn halpern_weight(k: usize) -> f64 {
    1.0 / (k as f64 + 2.0)
}

/// Anchor `eta^0` and the current Halpern index `k`.
#[derive(Clone, Debug)]
pub struct HalpernSchedule {
    anchor: Vec<f64>,
    k: usize,
}

impl HalpernSchedule {
    pub fn new(anchor: Vec<f64>) -> Self {
        Self { anchor, k: 0 }
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn weight(&self) -> f64 {
        halpern_weight(self.k)
    }

    pub fn advance(&mut self) {
        self.k += 1;
    }

    /// New anchor, index back to zero.
    pub fn reset(&mut self, anchor: Vec<f64>) {
        self.anchor = anchor;
        self.k = 0;
    }
}

/// Resolvents `J_{sigma M2}` and `J_{sigma M1}` of the two maximal monotone
/// operators of an inclusion `0 in M1 w + M2 w`.
pub trait ResolventPair {
    fn dim(&self) -> usize;
    fn resolvent_m2(&mut self, eta: &[f64], out: &mut [f64]) -> Result<()>;
    fn resolvent_m1(&mut self, z: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Output of one inclusion-form step.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionStep {
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// One anchored Peaceman-Rachford step with an explicit weight:
///
/// ```text
/// w    = J_{sM2}(eta)
/// x    = J_{sM1}(2w - eta)
/// v    = 2x - (2w - eta)
/// eta+ = lambda eta0 + (1 - lambda) v
/// ```
///
/// `lambda = 0` is plain Peaceman-Rachford.
pub fn anchored_pr_step<R: ResolventPair + ?Sized>(
    resolvents: &mut R,
    anchor: &[f64],
    eta: &[f64],
    lambda: f64,
) -> Result<InclusionStep> {
    let n = resolvents.dim();
    check_len("eta", n, eta.len())?;
    check_len("Halpern anchor", n, anchor.len())?;
    let mut w = vec![0.0; n];
    resolvents.resolvent_m2(eta, &mut w)?;
    let reflected: Vec<f64> = w.iter().zip(eta).map(|(w, e)| 2.0 * w - e).collect();
    let mut x = vec![0.0; n];
    resolvents.resolvent_m1(&reflected, &mut x)?;
    let v: Vec<f64> = x.iter().zip(&reflected).map(|(x, r)| 2.0 * x - r).collect();
    let eta_next = anchor
        .iter()
        .zip(&v)
        .map(|(a, v)| lambda * a + (1.0 - lambda) * v)
        .collect();
    Ok(InclusionStep { eta: eta_next, w, x, v })
}

/// One HPR step in inclusion form using `lambda_k` from `schedule`, which is
/// then advanced.
pub fn hpr_step_inclusion<R: ResolventPair + ?Sized>(
    resolvents: &mut R,
    schedule: &mut HalpernSchedule,
    eta: &[f64],
) -> Result<InclusionStep> {
    let lambda = schedule.weight();
    let step = anchored_pr_step(resolvents, &schedule.anchor, eta, lambda)?;
    schedule.advance();
    Ok(step)
}

/// Two-block convex problem `min f1(y) + f2(s) s.t. B1 y + B2 s = c`, given
/// through its linear maps and exact subproblem oracles.
///
/// The spaces are `Y` (`dim_y`), `Z` (`dim_s`) and `X` (`dim_x`, where `c`
/// and the multiplier live).
pub trait TwoBlockProblem {
    fn sigma(&self) -> f64;
    fn dim_y(&self) -> usize;
    fn dim_s(&self) -> usize;
    fn dim_x(&self) -> usize;
    fn c(&self) -> &[f64];

    fn apply_b1(&self, y: &[f64], out: &mut [f64]);
    fn apply_b1_adjoint(&self, x: &[f64], out: &mut [f64]);
    fn apply_b2(&self, s: &[f64], out: &mut [f64]);
    fn apply_b2_adjoint(&self, x: &[f64], out: &mut [f64]);

    /// `argmin_y f1(y) + <u, B1 y> + sigma/2 ||B1 y - c||^2`.
    fn solve_y(&mut self, u: &[f64], out: &mut [f64]) -> Result<()>;
    /// `argmin_s f2(s) + <u, B2 s> + sigma/2 ||B2 s||^2`.
    fn solve_s(&mut self, u: &[f64], out: &mut [f64]) -> Result<()>;

    /// `Prox_{f1}(z) = argmin_y f1(y) + 1/2 ||y - z||^2`.
    fn prox_f1(&self, z: &[f64], out: &mut [f64]);
    /// `Prox_{f2}(z)`.
    fn prox_f2(&self, z: &[f64], out: &mut [f64]);

    fn f1(&self, y: &[f64]) -> f64;
    fn f2(&self, s: &[f64]) -> f64;
}

fn b1_minus_c<P: TwoBlockProblem + ?Sized>(p: &P, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.dim_x()];
    p.apply_b1(y, &mut out);
    for (o, c) in out.iter_mut().zip(p.c()) {
        *o -= c;
    }
    out
}

fn b2_of<P: TwoBlockProblem + ?Sized>(p: &P, s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.dim_x()];
    p.apply_b2(s, &mut out);
    out
}

/// Norm of the KKT residual mapping
/// `(y - Prox_f1(y - B1^* x), s - Prox_f2(s - B2^* x), c - B1 y - B2 s)`.
pub fn residual_mapping_norm<P: TwoBlockProblem + ?Sized>(p: &P, y: &[f64], s: &[f64], x: &[f64]) -> f64 {
    let mut b1x = vec![0.0; p.dim_y()];
    p.apply_b1_adjoint(x, &mut b1x);
    let arg: Vec<f64> = y.iter().zip(&b1x).map(|(y, v)| y - v).collect();
    let mut prox = vec![0.0; p.dim_y()];
    p.prox_f1(&arg, &mut prox);
    let ry: f64 = y.iter().zip(&prox).map(|(a, b)| (a - b).powi(2)).sum();

    let mut b2x = vec![0.0; p.dim_s()];
    p.apply_b2_adjoint(x, &mut b2x);
    let arg: Vec<f64> = s.iter().zip(&b2x).map(|(s, v)| s - v).collect();
    let mut prox = vec![0.0; p.dim_s()];
    p.prox_f2(&arg, &mut prox);
    let rs: f64 = s.iter().zip(&prox).map(|(a, b)| (a - b).powi(2)).sum();

    let r1 = b1_minus_c(p, y);
    let r2 = b2_of(p, s);
    let rx: f64 = r1.iter().zip(&r2).map(|(a, b)| (a + b).powi(2)).sum();
    (ry + rs + rx).sqrt()
}

/// The resolvents of `M1 = d(f1^* o -B1^*) + c` and `M2 = d(f2^* o -B2^*)`
/// realized through the subproblem oracles of a [`TwoBlockProblem`]:
///
/// ```text
/// J_{sM2}(eta) = eta + sigma B2 s,         s = argmin f2(s) + <eta, B2 s> + sigma/2 ||B2 s||^2
/// J_{sM1}(z)   = z + sigma (B1 y - c),     y = argmin f1(y) + <z, B1 y> + sigma/2 ||B1 y - c||^2
/// ```
pub struct SubproblemResolvents<'a, P: ?Sized> {
    pub problem: &'a mut P,
}

impl<P: TwoBlockProblem + ?Sized> ResolventPair for SubproblemResolvents<'_, P> {
    fn dim(&self) -> usize {
        self.problem.dim_x()
    }

    fn resolvent_m2(&mut self, eta: &[f64], out: &mut [f64]) -> Result<()> {
        let mut s = vec![0.0; self.problem.dim_s()];
        self.problem.solve_s(eta, &mut s)?;
        let sigma = self.problem.sigma();
        self.problem.apply_b2(&s, out);
        for (o, e) in out.iter_mut().zip(eta) {
            *o = e + sigma * *o;
        }
        Ok(())
    }

    fn resolvent_m1(&mut self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let mut y = vec![0.0; self.problem.dim_y()];
        self.problem.solve_y(z, &mut y)?;
        let sigma = self.problem.sigma();
        let r = b1_minus_c(&*self.problem, &y);
        for ((o, z), r) in out.iter_mut().zip(z).zip(&r) {
            *o = z + sigma * r;
        }
        Ok(())
    }
}

/// HPR in optimization form with the fixed-point variable kept explicitly.
#[derive(Clone, Debug)]
pub struct EtaFormState {
    pub eta0: Vec<f64>,
    pub eta: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub k: usize,
}

impl EtaFormState {
    /// `eta^0 = x^0 + sigma (B1 y^0 - c)`.
    pub fn start<P: TwoBlockProblem + ?Sized>(p: &P, y0: &[f64], x0: &[f64]) -> Self {
        let sigma = p.sigma();
        let r = b1_minus_c(p, y0);
        let eta0: Vec<f64> = x0.iter().zip(&r).map(|(x, r)| x + sigma * r).collect();
        Self {
            eta: eta0.clone(),
            eta0,
            y: y0.to_vec(),
            s: vec![0.0; p.dim_s()],
            w: vec![0.0; p.dim_x()],
            x: x0.to_vec(),
            v: vec![0.0; p.dim_x()],
            k: 0,
        }
    }

    pub fn step<P: TwoBlockProblem + ?Sized>(&mut self, p: &mut P) -> Result<()> {
        let sigma = p.sigma();
        p.solve_s(&self.eta, &mut self.s)?;
        let b2s = b2_of(p, &self.s);
        for ((w, e), b) in self.w.iter_mut().zip(&self.eta).zip(&b2s) {
            *w = e + sigma * b;
        }
        let u: Vec<f64> = self.eta.iter().zip(&b2s).map(|(e, b)| e + 2.0 * sigma * b).collect();
        p.solve_y(&u, &mut self.y)?;
        let r = b1_minus_c(p, &self.y);
        let lambda = halpern_weight(self.k);
        for i in 0..self.eta.len() {
            self.x[i] = self.eta[i] + sigma * r[i] + 2.0 * sigma * b2s[i];
            self.v[i] = self.eta[i] + 2.0 * sigma * (r[i] + b2s[i]);
            self.eta[i] = lambda * self.eta0[i] + (1.0 - lambda) * self.v[i];
        }
        self.k += 1;
        Ok(())
    }
}

/// HPR iterate in the memory-lean optimization form: `(y, s, x, x_hat)` plus
/// the Halpern anchors `x_hat^0` and `B1 y^0 - c`.
#[derive(Clone, Debug)]
pub struct HprIterate {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub x_half: Vec<f64>,
    pub k: usize,
    anchor_x_hat: Vec<f64>,
    anchor_b1y: Vec<f64>,
}

impl HprIterate {
    pub fn start<P: TwoBlockProblem + ?Sized>(p: &P, y0: &[f64], x0: &[f64]) -> Self {
        Self {
            y: y0.to_vec(),
            s: vec![0.0; p.dim_s()],
            x: x0.to_vec(),
            x_hat: x0.to_vec(),
            x_half: x0.to_vec(),
            k: 0,
            anchor_x_hat: x0.to_vec(),
            anchor_b1y: b1_minus_c(p, y0),
        }
    }

    /// Reconstructs `eta = x_hat + sigma (B1 y - c)`.
    pub fn eta<P: TwoBlockProblem + ?Sized>(&self, p: &P) -> Vec<f64> {
        let sigma = p.sigma();
        let r = b1_minus_c(p, &self.y);
        self.x_hat.iter().zip(&r).map(|(x, r)| x + sigma * r).collect()
    }

    /// Restarts the Halpern sequence from the current `(y, x)`.
    pub fn restart<P: TwoBlockProblem + ?Sized>(&mut self, p: &P) {
        self.anchor_x_hat.copy_from_slice(&self.x);
        self.x_hat.copy_from_slice(&self.x);
        self.anchor_b1y = b1_minus_c(p, &self.y);
        self.k = 0;
    }

    /// One iteration:
    ///
    /// ```text
    /// s+     = argmin_s L(y, s; x_hat)
    /// x_half = x_hat + sigma (B1 y + B2 s+ - c)
    /// y+     = argmin_y L(y, s+; x_half)
    /// x+     = x_half + sigma (B1 y+ + B2 s+ - c)
    /// x_hat+ = (x_hat0 + (k+1) x+ + sigma [(B1 y0 - c) - (B1 y+ - c)]) / (k+2)
    /// ```
    pub fn step<P: TwoBlockProblem + ?Sized>(&mut self, p: &mut P) -> Result<()> {
        let sigma = p.sigma();
        let r = b1_minus_c(p, &self.y);
        let u: Vec<f64> = self.x_hat.iter().zip(&r).map(|(x, r)| x + sigma * r).collect();
        p.solve_s(&u, &mut self.s)?;
        let b2s = b2_of(p, &self.s);
        for i in 0..self.x_half.len() {
            self.x_half[i] = self.x_hat[i] + sigma * (r[i] + b2s[i]);
        }
        let u: Vec<f64> = self.x_half.iter().zip(&b2s).map(|(x, b)| x + sigma * b).collect();
        p.solve_y(&u, &mut self.y)?;
        let r = b1_minus_c(p, &self.y);
        let lambda = halpern_weight(self.k);
        let keep = 1.0 - lambda;
        for i in 0..self.x.len() {
            self.x[i] = self.x_half[i] + sigma * (r[i] + b2s[i]);
            self.x_hat[i] = lambda * self.anchor_x_hat[i]
                + keep * self.x[i]
                + sigma * lambda * (self.anchor_b1y[i] - r[i]);
        }
        self.k += 1;
        Ok(())
    }
}

/// Returns the iterate after one optimization-form step.
pub fn hpr_step_optform<P: TwoBlockProblem + ?Sized>(p: &mut P, state: &HprIterate) -> Result<HprIterate> {
    let mut next = state.clone();
    next.step(p)?;
    Ok(next)
}

/// Side-by-side comparison of the three HPR forms.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub iterations: usize,
    /// Largest deviation between the inclusion form and the `eta` form over
    /// `(w, x, v, eta)`.
    pub inclusion_vs_eta_form: f64,
    /// Largest deviation between the `eta` form and the lean form over
    /// `(y, s, x)`, plus `eta` reconstructed from the lean form.
    pub eta_form_vs_lean_form: f64,
    pub max_deviation: f64,
    /// First iteration (1-based) at which some deviation exceeded `tol`.
    pub divergence_index: Option<usize>,
    /// Whether the inclusion form's `eta^0` equals `x^0 + sigma (B1 y^0 - c)`.
    pub initialization_consistent: bool,
    pub passed: bool,
}

/// Runs the inclusion form, the `eta` form and the lean form in lockstep from
/// `(y0, x0)` and reports the largest deviation between common iterates.
///
/// `eta0_override` replaces the inclusion form's starting point; any value
/// other than `x0 + sigma (B1 y0 - c)` breaks the correspondence.
pub fn verify_equivalence<P: TwoBlockProblem + ?Sized>(
    p: &mut P,
    y0: &[f64],
    x0: &[f64],
    iterations: usize,
    tol: f64,
    eta0_override: Option<Vec<f64>>,
) -> Result<EquivalenceReport> {
    check_len("y0", p.dim_y(), y0.len())?;
    check_len("x0", p.dim_x(), x0.len())?;
    let mut eta_form = EtaFormState::start(p, y0, x0);
    let mut lean = HprIterate::start(p, y0, x0);
    let eta0 = eta0_override.unwrap_or_else(|| eta_form.eta0.clone());
    check_len("eta0", p.dim_x(), eta0.len())?;
    let initialization_consistent = max_abs_diff(&eta0, &eta_form.eta0) == 0.0;
    let mut schedule = HalpernSchedule::new(eta0.clone());
    let mut eta = eta0;

    let mut dev_a = 0.0_f64;
    let mut dev_b = 0.0_f64;
    let mut divergence_index = None;
    for it in 1..=iterations {
        let inc = hpr_step_inclusion(&mut SubproblemResolvents { problem: &mut *p }, &mut schedule, &eta)?;
        eta_form.step(p)?;
        lean.step(p)?;
        eta = inc.eta.clone();

        let a = max_abs_diff(&inc.w, &eta_form.w)
            .max(max_abs_diff(&inc.x, &eta_form.x))
            .max(max_abs_diff(&inc.v, &eta_form.v))
            .max(max_abs_diff(&inc.eta, &eta_form.eta));
        let b = max_abs_diff(&lean.y, &eta_form.y)
            .max(max_abs_diff(&lean.s, &eta_form.s))
            .max(max_abs_diff(&lean.x, &eta_form.x))
            .max(max_abs_diff(&lean.eta(p), &eta_form.eta));
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite {
                what: "HPR equivalence iterates",
                iteration: it,
            });
        }
        dev_a = dev_a.max(a);
        dev_b = dev_b.max(b);
        if divergence_index.is_none() && a.max(b) > tol {
            divergence_index = Some(it);
        }
    }
    let max_deviation = dev_a.max(dev_b);
    Ok(EquivalenceReport {
        iterations,
        inclusion_vs_eta_form: dev_a,
        eta_form_vs_lean_form: dev_b,
        max_deviation,
        divergence_index,
        initialization_consistent,
        passed: max_deviation <= tol,
    })
}

/// The dual barycenter LP `min -<b,y> + delta_K(s) s.t. A^* y + s = c` as a
/// two-block problem: `B1 = A^*`, `B2 = I`.
pub struct WbpDualProblem<'a> {
    instance: &'a WbpInstance,
    sigma: f64,
    ws: NormalSolveWorkspace,
    scratch_n: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl<'a> WbpDualProblem<'a> {
    pub fn new(instance: &'a WbpInstance, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidOptions(format!("sigma must be positive, got {sigma}")));
        }
        let layout = instance.layout();
        Ok(Self {
            instance,
            sigma,
            ws: NormalSolveWorkspace::new(layout),
            scratch_n: vec![0.0; layout.primal_len()],
            scratch_m: vec![0.0; layout.dual_len()],
        })
    }

    pub fn instance(&self) -> &WbpInstance {
        self.instance
    }
}

impl TwoBlockProblem for WbpDualProblem<'_> {
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn dim_y(&self) -> usize {
        self.instance.layout().dual_len()
    }
    fn dim_s(&self) -> usize {
        self.instance.layout().primal_len()
    }
    fn dim_x(&self) -> usize {
        self.instance.layout().primal_len()
    }
    fn c(&self) -> &[f64] {
        self.instance.c()
    }
    fn apply_b1(&self, y: &[f64], out: &mut [f64]) {
        self.instance.layout().apply_astar_into(y, out);
    }
    fn apply_b1_adjoint(&self, x: &[f64], out: &mut [f64]) {
        self.instance.layout().apply_a_into(x, out);
    }
    fn apply_b2(&self, s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(s);
    }
    fn apply_b2_adjoint(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    /// `A A^* y = b / sigma - A (u / sigma - c)`.
    fn solve_y(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let inv = 1.0 / self.sigma;
        for ((z, u), c) in self.scratch_n.iter_mut().zip(u).zip(self.instance.c()) {
            *z = u * inv - c;
        }
        let layout = self.instance.layout();
        layout.apply_a_into(&self.scratch_n, &mut self.scratch_m);
        for (r, b) in self.scratch_m.iter_mut().zip(self.instance.b()) {
            *r = b * inv - *r;
        }
        solve_wbp_normal_into(layout, &self.scratch_m, &mut self.ws, out)
    }

    /// `s = max(0, -u / sigma)`.
    fn solve_s(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let inv = 1.0 / self.sigma;
        for (o, u) in out.iter_mut().zip(u) {
            *o = (-u * inv).max(0.0);
        }
        Ok(())
    }

    fn prox_f1(&self, z: &[f64], out: &mut [f64]) {
        for ((o, z), b) in out.iter_mut().zip(z).zip(self.instance.b()) {
            *o = z + b;
        }
    }

    fn prox_f2(&self, z: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().zip(z) {
            *o = z.max(0.0);
        }
    }

    fn f1(&self, y: &[f64]) -> f64 {
        -self.instance.dual_objective(y)
    }

    fn f2(&self, s: &[f64]) -> f64 {
        if s.iter().all(|v| *v >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// The dual OT LP as a two-block problem, using the closed-form OT normal
/// solve for the `y` subproblem.
pub struct OtDualProblem<'a> {
    instance: &'a OtInstance,
    sigma: f64,
    scratch_n: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl<'a> OtDualProblem<'a> {
    pub fn new(instance: &'a OtInstance, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidOptions(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            instance,
            sigma,
            scratch_n: vec![0.0; instance.primal_len()],
            scratch_m: vec![0.0; instance.dual_len()],
        })
    }
}

impl TwoBlockProblem for OtDualProblem<'_> {
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn dim_y(&self) -> usize {
        self.instance.dual_len()
    }
    fn dim_s(&self) -> usize {
        self.instance.primal_len()
    }
    fn dim_x(&self) -> usize {
        self.instance.primal_len()
    }
    fn c(&self) -> &[f64] {
        self.instance.c()
    }
    fn apply_b1(&self, y: &[f64], out: &mut [f64]) {
        self.instance.apply_astar_into(y, out);
    }
    fn apply_b1_adjoint(&self, x: &[f64], out: &mut [f64]) {
        self.instance.apply_a_into(x, out);
    }
    fn apply_b2(&self, s: &[f64], out: &mut [f64]) {
        out.copy_from_slice(s);
    }
    fn apply_b2_adjoint(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn solve_y(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let inv = 1.0 / self.sigma;
        for ((z, u), c) in self.scratch_n.iter_mut().zip(u).zip(self.instance.c()) {
            *z = u * inv - c;
        }
        self.instance.apply_a_into(&self.scratch_n, &mut self.scratch_m);
        for (r, b) in self.scratch_m.iter_mut().zip(self.instance.b()) {
            *r = b * inv - *r;
        }
        let m_v = self.instance.m_v();
        let (r1, r2) = self.scratch_m.split_at(m_v);
        let (y1, y2) = out.split_at_mut(m_v);
        solve_ot_normal_into(self.instance.m_u(), m_v, r1, r2, y1, y2)
    }
    fn solve_s(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let inv = 1.0 / self.sigma;
        for (o, u) in out.iter_mut().zip(u) {
            *o = (-u * inv).max(0.0);
        }
        Ok(())
    }
    fn prox_f1(&self, z: &[f64], out: &mut [f64]) {
        for ((o, z), b) in out.iter_mut().zip(z).zip(self.instance.b()) {
            *o = z + b;
        }
    }
    fn prox_f2(&self, z: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().zip(z) {
            *o = z.max(0.0);
        }
    }
    fn f1(&self, y: &[f64]) -> f64 {
        -crate::linalg::dot(self.instance.b(), y)
    }
    fn f2(&self, s: &[f64]) -> f64 {
        if s.iter().all(|v| *v >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}
