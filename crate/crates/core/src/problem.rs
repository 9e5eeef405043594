//! Problem instances, the flattened variable layout and the matrix-free
//! constraint operator.
//!
//! # Layout contract
//!
//! The primal vector `x` of length `N = m * sum_t m_t + m` stores
//! `(vec(X^1); ...; vec(X^T); a^c)` where `vec` stacks columns, so entry
//! `(i, j)` of plan `t` lives at `plan_offset(t) + j * m + i`.
//!
//! The dual vector `y` of length `M = sum_t m_t + T (m - 1) + 1` stores
//! `(y_1^1; ...; y_1^T; y_2^1; ...; y_2^T; y_3)`. Block `y_1^t` (length `m_t`)
//! multiplies the column-sum rows of plan `t`; block `y_2^t` (length `m - 1`)
//! multiplies rows `2..m` of `X^t 1 - a^c`. Row 1 of every such block is the
//! redundant row dropped to make `A` full row rank.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A discrete probability measure: support points with nonnegative weights
/// summing to one.
///
/// Support points may have dimension zero when the instance is defined by
/// precomputed cost matrices alone.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    supports: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(supports: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInstance("distribution has no atoms".into()));
        }
        if supports.len() != weights.len() {
            return Err(Error::InvalidInstance(format!(
                "distribution has {} support points but {} weights",
                supports.len(),
                weights.len()
            )));
        }
        let d = supports[0].len();
        if supports.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidInstance("support points have mixed dimensions".into()));
        }
        if supports.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("support point is not finite".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInstance(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInstance(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { supports, weights })
    }

    /// Distribution with the given weights and no support coordinates.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let supports = vec![Vec::new(); weights.len()];
        Self::new(supports, weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn supports(&self) -> &[Vec<f64>] {
        &self.supports
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Dimension of the support points (zero when none were given).
    pub fn dim(&self) -> usize {
        self.supports[0].len()
    }
}

/// Block sizes of a barycenter LP and the offsets of every block in the
/// flattened primal and dual vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    m: usize,
    mt: Vec<usize>,
    plan_offsets: Vec<usize>,
    y1_offsets: Vec<usize>,
}

impl Layout {
    /// `m >= 2` barycenter atoms and `m_t >= 1` atoms per sample.
    pub fn new(m: usize, mt: Vec<usize>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInstance(format!(
                "barycenter must have m >= 2 support points, got m = {m}"
            )));
        }
        if mt.is_empty() {
            return Err(Error::InvalidInstance("need at least one sample distribution".into()));
        }
        if mt.contains(&0) {
            return Err(Error::InvalidInstance("every sample needs m_t >= 1 atoms".into()));
        }
        let mut plan_offsets = Vec::with_capacity(mt.len() + 1);
        let mut y1_offsets = Vec::with_capacity(mt.len() + 1);
        let (mut p, mut q) = (0, 0);
        for &n in &mt {
            plan_offsets.push(p);
            y1_offsets.push(q);
            p += m * n;
            q += n;
        }
        plan_offsets.push(p);
        y1_offsets.push(q);
        Ok(Self {
            m,
            mt,
            plan_offsets,
            y1_offsets,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_samples(&self) -> usize {
        self.mt.len()
    }

    pub fn mt(&self, t: usize) -> usize {
        self.mt[t]
    }

    pub fn sample_sizes(&self) -> &[usize] {
        &self.mt
    }

    /// `M_1 = sum_t m_t`.
    pub fn total_mt(&self) -> usize {
        self.y1_offsets[self.mt.len()]
    }

    /// `N = m sum_t m_t + m`.
    pub fn primal_len(&self) -> usize {
        self.plan_offsets[self.mt.len()] + self.m
    }

    /// `M = sum_t m_t + T (m - 1) + 1`.
    pub fn dual_len(&self) -> usize {
        self.total_mt() + self.mt.len() * (self.m - 1) + 1
    }

    pub fn plan_range(&self, t: usize) -> Range<usize> {
        self.plan_offsets[t]..self.plan_offsets[t + 1]
    }

    pub fn plans_range(&self) -> Range<usize> {
        0..self.plan_offsets[self.mt.len()]
    }

    pub fn bary_range(&self) -> Range<usize> {
        let start = self.plan_offsets[self.mt.len()];
        start..start + self.m
    }

    pub fn y1_range(&self, t: usize) -> Range<usize> {
        self.y1_offsets[t]..self.y1_offsets[t + 1]
    }

    pub fn y1_all(&self) -> Range<usize> {
        0..self.total_mt()
    }

    pub fn y2_range(&self, t: usize) -> Range<usize> {
        let start = self.total_mt() + t * (self.m - 1);
        start..start + self.m - 1
    }

    pub fn y2_all(&self) -> Range<usize> {
        self.total_mt()..self.total_mt() + self.mt.len() * (self.m - 1)
    }

    pub fn y3_index(&self) -> usize {
        self.dual_len() - 1
    }

    /// `out = A x`, without materializing `A`.
    pub fn apply_a_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.primal_len());
        debug_assert_eq!(out.len(), self.dual_len());
        let m = self.m;
        let bary = &x[self.bary_range()];
        let (y1, rest) = out.split_at_mut(self.total_mt());
        let (y2, y3) = rest.split_at_mut(self.mt.len() * (m - 1));
        for (t, &n) in self.mt.iter().enumerate() {
            let plan = &x[self.plan_range(t)];
            let y1t = &mut y1[self.y1_range(t)];
            let y2t = &mut y2[t * (m - 1)..(t + 1) * (m - 1)];
            for (r, a) in y2t.iter_mut().zip(&bary[1..]) {
                *r = -a;
            }
            for j in 0..n {
                let col = &plan[j * m..(j + 1) * m];
                y1t[j] = col.iter().sum();
                for (r, v) in y2t.iter_mut().zip(&col[1..]) {
                    *r += v;
                }
            }
        }
        y3[0] = bary.iter().sum();
    }

    /// `out = A^* y`.
    pub fn apply_astar_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dual_len());
        debug_assert_eq!(out.len(), self.primal_len());
        let m = self.m;
        let y3 = y[self.y3_index()];
        for (t, &n) in self.mt.iter().enumerate() {
            let y1t = &y[self.y1_range(t)];
            let y2t = &y[self.y2_range(t)];
            let plan = &mut out[self.plan_range(t)];
            for j in 0..n {
                let col = &mut plan[j * m..(j + 1) * m];
                let v = y1t[j];
                col[0] = v;
                for (o, w) in col[1..].iter_mut().zip(y2t) {
                    *o = v + w;
                }
            }
        }
        let br = self.bary_range();
        let bary = &mut out[br];
        bary.fill(y3);
        for t in 0..self.mt.len() {
            for (o, w) in bary[1..].iter_mut().zip(&y[self.y2_range(t)]) {
                *o -= w;
            }
        }
    }
}

/// Flattened primal iterate `x = (vec(X^1); ...; vec(X^T); a^c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl PrimalVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.primal_len()];
        Self { layout, data }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        check_len("primal vector", layout.primal_len(), data.len())?;
        Ok(Self { layout, data })
    }

    /// Builds `x` from column-major `m x m_t` plans and the barycenter weights.
    pub fn from_parts(layout: Arc<Layout>, plans: &[Vec<f64>], bary: &[f64]) -> Result<Self> {
        check_len("number of plans", layout.num_samples(), plans.len())?;
        check_len("barycenter weights", layout.m(), bary.len())?;
        let mut data = Vec::with_capacity(layout.primal_len());
        for (t, p) in plans.iter().enumerate() {
            check_len("plan entries", layout.m() * layout.mt(t), p.len())?;
            data.extend_from_slice(p);
        }
        data.extend_from_slice(bary);
        Ok(Self { layout, data })
    }

    /// Splits back into column-major plans and barycenter weights.
    pub fn to_parts(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let plans = (0..self.layout.num_samples())
            .map(|t| self.plan(t).to_vec())
            .collect();
        (plans, self.bary().to_vec())
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Column-major `m x m_t` plan `X^t`.
    pub fn plan(&self, t: usize) -> &[f64] {
        &self.data[self.layout.plan_range(t)]
    }

    pub fn plan_mut(&mut self, t: usize) -> &mut [f64] {
        let r = self.layout.plan_range(t);
        &mut self.data[r]
    }

    /// Barycenter weights `a^c`.
    pub fn bary(&self) -> &[f64] {
        &self.data[self.layout.bary_range()]
    }

    pub fn bary_mut(&mut self) -> &mut [f64] {
        let r = self.layout.bary_range();
        &mut self.data[r]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Partitioned multiplier `y = (y_1; y_2; y_3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl DualVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.dual_len()];
        Self { layout, data }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        check_len("dual vector", layout.dual_len(), data.len())?;
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn y1(&self, t: usize) -> &[f64] {
        &self.data[self.layout.y1_range(t)]
    }

    pub fn y2(&self, t: usize) -> &[f64] {
        &self.data[self.layout.y2_range(t)]
    }

    pub fn y3(&self) -> f64 {
        self.data[self.layout.y3_index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Fixed-support Wasserstein barycenter instance.
///
/// Holds the LP data `b` and `c` explicitly (both are cheap); `A` is implied
/// by the [`Layout`].
#[derive(Clone, Debug)]
pub struct WbpInstance {
    layout: Arc<Layout>,
    samples: Vec<DiscreteDistribution>,
    barycenter_supports: Vec<Vec<f64>>,
    omega: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl WbpInstance {
    /// `costs[t]` is the column-major `m x m_t` LP cost `D^t` (already
    /// multiplied by `omega[t]`).
    pub fn new(
        samples: Vec<DiscreteDistribution>,
        barycenter_supports: Vec<Vec<f64>>,
        omega: Vec<f64>,
        costs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let t_count = samples.len();
        if t_count == 0 {
            return Err(Error::InvalidInstance("need at least one sample distribution".into()));
        }
        check_len("omega", t_count, omega.len())?;
        check_len("cost matrices", t_count, costs.len())?;
        if omega.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInstance("omega entries must be positive".into()));
        }
        let total: f64 = omega.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInstance(format!("omega sums to {total}, expected 1")));
        }
        let m = barycenter_supports.len();
        let layout = Layout::new(m, samples.iter().map(DiscreteDistribution::len).collect())?;
        if let Some(first) = barycenter_supports.first() {
            let d = first.len();
            if barycenter_supports.iter().any(|p| p.len() != d) {
                return Err(Error::InvalidInstance("barycenter supports have mixed dimensions".into()));
            }
        }

        let mut c = Vec::with_capacity(layout.primal_len());
        for (t, d) in costs.iter().enumerate() {
            if d.len() != m * layout.mt(t) {
                return Err(Error::InvalidInstance(format!(
                    "cost matrix {t} has {} entries, expected {m} x {}",
                    d.len(),
                    layout.mt(t)
                )));
            }
            if d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "cost matrix {t} has a negative or non-finite entry"
                )));
            }
            c.extend_from_slice(d);
        }
        c.extend(std::iter::repeat_n(0.0, m));

        let mut b = Vec::with_capacity(layout.dual_len());
        for s in &samples {
            b.extend_from_slice(s.weights());
        }
        b.extend(std::iter::repeat_n(0.0, t_count * (m - 1)));
        b.push(1.0);

        Ok(Self {
            layout: Arc::new(layout),
            samples,
            barycenter_supports,
            omega,
            b,
            c,
        })
    }

    /// Like [`WbpInstance::new`] but takes unweighted ground distances
    /// `D(P^c, P^t)` and forms `D^t = omega_t D(P^c, P^t)`.
    pub fn with_ground_costs(
        samples: Vec<DiscreteDistribution>,
        barycenter_supports: Vec<Vec<f64>>,
        omega: Vec<f64>,
        distances: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_len("omega", distances.len(), omega.len())?;
        let costs = distances
            .into_iter()
            .zip(&omega)
            .map(|(d, w)| d.into_iter().map(|v| v * w).collect())
            .collect();
        Self::new(samples, barycenter_supports, omega, costs)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn num_samples(&self) -> usize {
        self.layout.num_samples()
    }

    pub fn m(&self) -> usize {
        self.layout.m()
    }

    pub fn samples(&self) -> &[DiscreteDistribution] {
        &self.samples
    }

    pub fn barycenter_supports(&self) -> &[Vec<f64>] {
        &self.barycenter_supports
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Column-major `m x m_t` LP cost `D^t`.
    pub fn cost(&self, t: usize) -> &[f64] {
        &self.c[self.layout.plan_range(t)]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `(b, c)` of the reduced standard-form LP.
    pub fn lp_data(&self) -> (Vec<f64>, Vec<f64>) {
        (self.b.clone(), self.c.clone())
    }

    pub fn apply_a(&self, x: &PrimalVector) -> Result<DualVector> {
        check_len("primal vector", self.layout.primal_len(), x.as_slice().len())?;
        let mut out = DualVector::zeros(self.layout.clone());
        self.layout.apply_a_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn apply_astar(&self, y: &DualVector) -> Result<PrimalVector> {
        check_len("dual vector", self.layout.dual_len(), y.as_slice().len())?;
        let mut out = PrimalVector::zeros(self.layout.clone());
        self.layout.apply_astar_into(y.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// `sum_t <D^t, X^t>`.
    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// `<b, y>`.
    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        dot(&self.b, y)
    }

    /// Relative KKT residual of `(x, y, s)`; see [`KktResidual`].
    pub fn kkt_residual(&self, x: &[f64], y: &[f64], s: &[f64]) -> Result<KktResidual> {
        check_len("primal vector", self.layout.primal_len(), x.len())?;
        check_len("dual vector", self.layout.dual_len(), y.len())?;
        check_len("dual slack", self.layout.primal_len(), s.len())?;
        let mut ax = vec![0.0; self.layout.dual_len()];
        let mut aty = vec![0.0; self.layout.primal_len()];
        self.layout.apply_a_into(x, &mut ax);
        self.layout.apply_astar_into(y, &mut aty);
        Ok(kkt_from_products(&self.b, &self.c, x, s, &ax, &aty))
    }

    /// Norm of the residual mapping
    /// `R(y, s, x) = (Ax - b, s - P_K(s - x), c - A^* y - s)`.
    pub fn kkt_mapping_norm(&self, x: &[f64], y: &[f64], s: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.layout.dual_len()];
        let mut aty = vec![0.0; self.layout.primal_len()];
        self.layout.apply_a_into(x, &mut ax);
        self.layout.apply_astar_into(y, &mut aty);
        kkt_mapping_from_products(&self.b, &self.c, x, s, &ax, &aty)
    }
}

/// Relative KKT residuals of the LP pair, each measured in the Euclidean norm
/// of the flattened vector.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResidual {
    /// `||b - Ax|| / (1 + ||b||)`
    pub primal_infeas: f64,
    /// `||min(x, 0)|| / (1 + ||x||)`
    pub nonneg_violation: f64,
    /// `||A^* y + s - c|| / (1 + ||c|| + ||s||)`
    pub dual_infeas: f64,
    /// `||s - P_K(s - x)|| / (1 + ||x|| + ||s||)`
    pub complementarity: f64,
    pub max_relative: f64,
}

impl KktResidual {
    pub fn new(primal_infeas: f64, nonneg_violation: f64, dual_infeas: f64, complementarity: f64) -> Self {
        let max_relative = primal_infeas
            .max(nonneg_violation)
            .max(dual_infeas)
            .max(complementarity);
        Self {
            primal_infeas,
            nonneg_violation,
            dual_infeas,
            complementarity,
            max_relative,
        }
    }

    /// Relative primal feasibility error (first two terms only).
    pub fn primal_feasibility(&self) -> f64 {
        self.primal_infeas.max(self.nonneg_violation)
    }

    pub fn is_finite(&self) -> bool {
        self.max_relative.is_finite()
            && self.primal_infeas.is_finite()
            && self.dual_infeas.is_finite()
            && self.nonneg_violation.is_finite()
            && self.complementarity.is_finite()
    }
}

/// Evaluates the relative KKT terms given precomputed `Ax` and `A^* y`.
pub fn kkt_from_products(b: &[f64], c: &[f64], x: &[f64], s: &[f64], ax: &[f64], aty: &[f64]) -> KktResidual {
    let primal = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        .sqrt();
    let neg = x.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>().sqrt();
    let dual = aty
        .iter()
        .zip(s)
        .zip(c)
        .map(|((a, s), c)| (a + s - c).powi(2))
        .sum::<f64>()
        .sqrt();
    let compl = s
        .iter()
        .zip(x)
        .map(|(s, x)| (s - (s - x).max(0.0)).powi(2))
        .sum::<f64>()
        .sqrt();
    let (nb, nc, nx, ns) = (norm(b), norm(c), norm(x), norm(s));
    KktResidual::new(
        primal / (1.0 + nb),
        neg / (1.0 + nx),
        dual / (1.0 + nc + ns),
        compl / (1.0 + nx + ns),
    )
}

/// Absolute norm of the KKT residual mapping given `Ax` and `A^* y`.
pub fn kkt_mapping_from_products(b: &[f64], c: &[f64], x: &[f64], s: &[f64], ax: &[f64], aty: &[f64]) -> f64 {
    let p: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    let d: f64 = aty
        .iter()
        .zip(s)
        .zip(c)
        .map(|((a, s), c)| (c - a - s).powi(2))
        .sum();
    let k: f64 = s
        .iter()
        .zip(x)
        .map(|(s, x)| (s - (s - x).max(0.0)).powi(2))
        .sum();
    (p + d + k).sqrt()
}

/// Componentwise `max(0, v)`: the projection onto the nonnegative orthant.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// `|obj - obj_ref| / (|obj_ref| + 1)`.
pub fn relative_obj_gap(obj: f64, obj_ref: f64) -> f64 {
    (obj - obj_ref).abs() / (obj_ref.abs() + 1.0)
}

/// Optimal transport between `mu` (rows, `m_u` atoms) and `nu` (columns,
/// `m_v` atoms) with the row constraint for atom 1 of `mu` removed.
///
/// `x = vec(X)` column-major; `A x = (X^T 1; rows 2..m_u of X 1)` and
/// `b = (nu; mu[1..])`.
#[derive(Clone, Debug)]
pub struct OtInstance {
    mu: Vec<f64>,
    nu: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl OtInstance {
    /// `cost` is column-major `m_u x m_v`.
    pub fn new(mu: Vec<f64>, nu: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        if mu.len() < 2 || nu.is_empty() {
            return Err(Error::InvalidInstance(format!(
                "OT needs m_u >= 2 and m_v >= 1, got m_u = {}, m_v = {}",
                mu.len(),
                nu.len()
            )));
        }
        // Validates the marginals as probability vectors.
        DiscreteDistribution::from_weights(mu.clone())?;
        DiscreteDistribution::from_weights(nu.clone())?;
        check_len("OT cost", mu.len() * nu.len(), cost.len())?;
        let mut b = nu.clone();
        b.extend_from_slice(&mu[1..]);
        Ok(Self { mu, nu, b, c: cost })
    }

    pub fn m_u(&self) -> usize {
        self.mu.len()
    }

    pub fn m_v(&self) -> usize {
        self.nu.len()
    }

    pub fn primal_len(&self) -> usize {
        self.mu.len() * self.nu.len()
    }

    pub fn dual_len(&self) -> usize {
        self.nu.len() + self.mu.len() - 1
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn apply_a_into(&self, x: &[f64], out: &mut [f64]) {
        let (mu_n, nu_n) = (self.m_u(), self.m_v());
        let (cols, rows) = out.split_at_mut(nu_n);
        rows.fill(0.0);
        for j in 0..nu_n {
            let col = &x[j * mu_n..(j + 1) * mu_n];
            cols[j] = col.iter().sum();
            for (r, v) in rows.iter_mut().zip(&col[1..]) {
                *r += v;
            }
        }
    }

    pub fn apply_astar_into(&self, y: &[f64], out: &mut [f64]) {
        let (mu_n, nu_n) = (self.m_u(), self.m_v());
        let (y1, y2) = y.split_at(nu_n);
        for j in 0..nu_n {
            let col = &mut out[j * mu_n..(j + 1) * mu_n];
            col[0] = y1[j];
            for (o, w) in col[1..].iter_mut().zip(y2) {
                *o = y1[j] + w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> WbpInstance {
        // T = 1, m = 2, m_1 = 1
        let s = DiscreteDistribution::from_weights(vec![1.0]).unwrap();
        WbpInstance::new(vec![s], vec![vec![], vec![]], vec![1.0], vec![vec![0.5, 0.25]]).unwrap()
    }

    #[test]
    fn lp_data_tiny() {
        let inst = tiny();
        let (b, c) = inst.lp_data();
        assert_eq!(b, vec![1.0, 0.0, 1.0]);
        assert_eq!(c, vec![0.5, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn dims_match_formula() {
        let l = Layout::new(100, vec![100; 100]).unwrap();
        assert_eq!(l.dual_len(), 19901);
        assert_eq!(l.primal_len(), 1_000_100);
    }

    #[test]
    fn apply_a_tiny() {
        let inst = tiny();
        let x = PrimalVector::from_vec(inst.layout().clone(), vec![3.0, 4.0, 1.0, 2.0]).unwrap();
        assert_eq!(inst.apply_a(&x).unwrap().as_slice(), &[7.0, 2.0, 3.0]);
        let zero = PrimalVector::zeros(inst.layout().clone());
        assert!(inst.apply_a(&zero).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn apply_astar_tiny() {
        let inst = tiny();
        let y = DualVector::from_vec(inst.layout().clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let x = inst.apply_astar(&y).unwrap();
        assert_eq!(x.plan(0), &[1.0, 3.0]);
        assert_eq!(x.bary(), &[3.0, 1.0]);
        let zero = DualVector::zeros(inst.layout().clone());
        assert!(inst.apply_astar(&zero).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let inst = tiny();
        let other = Arc::new(Layout::new(3, vec![1]).unwrap());
        let x = PrimalVector::zeros(other);
        assert!(matches!(inst.apply_a(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn m_equal_one_rejected() {
        let s = DiscreteDistribution::from_weights(vec![1.0]).unwrap();
        let err = WbpInstance::new(vec![s], vec![vec![]], vec![1.0], vec![vec![0.0]]).unwrap_err();
        assert!(err.to_string().contains("m >= 2"));
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(DiscreteDistribution::from_weights(vec![]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![1.5, -0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::from_weights(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn invalid_omega_and_costs_rejected() {
        let s = || DiscreteDistribution::from_weights(vec![1.0]).unwrap();
        let sup = vec![vec![], vec![]];
        assert!(WbpInstance::new(vec![s(), s()], sup.clone(), vec![0.5, 0.6], vec![vec![0.0; 2]; 2]).is_err());
        assert!(WbpInstance::new(vec![s(), s()], sup.clone(), vec![1.0, 0.0], vec![vec![0.0; 2]; 2]).is_err());
        assert!(WbpInstance::new(vec![s()], sup.clone(), vec![1.0], vec![vec![-1.0, 0.0]]).is_err());
        assert!(WbpInstance::new(vec![s()], sup, vec![1.0], vec![vec![0.0; 3]]).is_err());
    }

    #[test]
    fn project_nonneg_examples() {
        assert_eq!(project_nonneg(&[-1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(project_nonneg(&[0.0]), vec![0.0]);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(relative_obj_gap(1.0, 1.0), 0.0);
        assert_eq!(relative_obj_gap(1.5, 1.0), 0.25);
    }

    #[test]
    fn kkt_zero_at_self_barycenter() {
        // T = 1 with matched supports: X = diag(a), a^c = a, y = 0, s = c.
        let a = vec![0.2, 0.3, 0.5];
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0]];
        let mut cost = vec![0.0; 9];
        for j in 0..3 {
            for i in 0..3 {
                cost[j * 3 + i] = (pts[i][0] - pts[j][0]).powi(2) / 9.0;
            }
        }
        let s = DiscreteDistribution::new(pts.clone(), a.clone()).unwrap();
        let inst = WbpInstance::new(vec![s], pts, vec![1.0], vec![cost]).unwrap();
        let mut plan = vec![0.0; 9];
        for i in 0..3 {
            plan[i * 3 + i] = a[i];
        }
        let x = PrimalVector::from_parts(inst.layout().clone(), &[plan], &a).unwrap();
        let y = vec![0.0; inst.layout().dual_len()];
        let r = inst.kkt_residual(x.as_slice(), &y, inst.c()).unwrap();
        assert_eq!(r.max_relative, 0.0);
        assert_eq!(inst.kkt_mapping_norm(x.as_slice(), &y, inst.c()), 0.0);
    }

    #[test]
    fn kkt_nonneg_term_matches_definition() {
        let inst = tiny();
        let delta = 0.125;
        let x = vec![1.0 + delta, -delta, 1.0, 0.0];
        let y = vec![0.0; 3];
        let s = vec![0.0; 4];
        let r = inst.kkt_residual(&x, &y, &s).unwrap();
        let nx = norm(&x);
        assert!((r.nonneg_violation - delta / (1.0 + nx)).abs() < 1e-15);
        assert!(r.max_relative >= r.nonneg_violation);
    }

    #[test]
    fn ot_operator_tiny() {
        // m_u = 2, m_v = 1: A = [1 1; 0 1]
        let ot = OtInstance::new(vec![0.5, 0.5], vec![1.0], vec![0.0, 1.0]).unwrap();
        let mut out = vec![0.0; 2];
        ot.apply_a_into(&[3.0, 4.0], &mut out);
        assert_eq!(out, vec![7.0, 4.0]);
        let mut back = vec![0.0; 2];
        ot.apply_astar_into(&[1.0, 2.0], &mut back);
        assert_eq!(back, vec![1.0, 3.0]);
        assert_eq!(ot.b(), &[1.0, 0.5]);
    }
}
