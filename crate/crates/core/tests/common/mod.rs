//! Independent oracles shared by the integration tests: dense constraint
//! matrices built from the LP definition, and an exact simplex solve.

#![allow(dead_code)]

use hpr_wbp::datagen::{generate_synthetic, SyntheticConfig};
use hpr_wbp::problem::Layout;
use hpr_wbp::{DiscreteDistribution, WbpInstance};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rand::Rng;

/// Dense `A` of the reduced barycenter LP, row by row from the constraint
/// definition (column sums; rows 2..m of `X^t 1 - a^c`; `sum a^c`).
pub fn dense_a(m: usize, mt: &[usize]) -> DMatrix<f64> {
    let t_count = mt.len();
    let rows = mt.iter().sum::<usize>() + t_count * (m - 1) + 1;
    let cols = m * mt.iter().sum::<usize>() + m;
    let mut a = DMatrix::zeros(rows, cols);
    let mut offsets = Vec::new();
    let mut off = 0;
    for &n in mt {
        offsets.push(off);
        off += m * n;
    }
    let bary = off;
    let mut r = 0;
    for t in 0..t_count {
        for j in 0..mt[t] {
            for i in 0..m {
                a[(r, offsets[t] + j * m + i)] = 1.0;
            }
            r += 1;
        }
    }
    for t in 0..t_count {
        for i in 1..m {
            for j in 0..mt[t] {
                a[(r, offsets[t] + j * m + i)] = 1.0;
            }
            a[(r, bary + i)] = -1.0;
            r += 1;
        }
    }
    for i in 0..m {
        a[(r, bary + i)] = 1.0;
    }
    a
}

pub fn dense_ot_a(m_u: usize, m_v: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m_v + m_u - 1, m_u * m_v);
    for j in 0..m_v {
        for i in 0..m_u {
            a[(j, j * m_u + i)] = 1.0;
            if i > 0 {
                a[(m_v + i - 1, j * m_u + i)] = 1.0;
            }
        }
    }
    a
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_layout<R: Rng>(rng: &mut R, max_t: usize, max_m: usize, max_mt: usize) -> Layout {
    let t = rng.gen_range(1..=max_t);
    let m = rng.gen_range(2..=max_m);
    let mt = (0..t).map(|_| rng.gen_range(1..=max_mt)).collect();
    Layout::new(m, mt).unwrap()
}

/// A random valid instance with costs in `[0, 1)` and positive weights.
pub fn random_instance<R: Rng>(rng: &mut R, m: usize, mt: &[usize]) -> WbpInstance {
    let simplex = |rng: &mut R, n: usize| {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let samples = mt
        .iter()
        .map(|&n| DiscreteDistribution::from_weights(simplex(rng, n)).unwrap())
        .collect();
    let omega = simplex(rng, mt.len());
    let costs = mt
        .iter()
        .map(|&n| (0..m * n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    WbpInstance::with_ground_costs(samples, vec![Vec::new(); m], omega, costs).unwrap()
}

/// Optimal value of the (unreduced) barycenter LP by the simplex method.
pub fn lp_oracle(instance: &WbpInstance) -> f64 {
    let m = instance.m();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut plans = Vec::new();
    for t in 0..instance.num_samples() {
        let cost = instance.cost(t);
        plans.push(cost.iter().map(|&c| p.add_var(c, (0.0, f64::INFINITY))).collect::<Vec<_>>());
    }
    let bary: Vec<_> = (0..m).map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for (t, vars) in plans.iter().enumerate() {
        let a = instance.samples()[t].weights();
        for (j, aj) in a.iter().enumerate() {
            let row: Vec<_> = (0..m).map(|i| (vars[j * m + i], 1.0)).collect();
            p.add_constraint(row.as_slice(), ComparisonOp::Eq, *aj);
        }
        for i in 1..m {
            let mut row: Vec<_> = (0..a.len()).map(|j| (vars[j * m + i], 1.0)).collect();
            row.push((bary[i], -1.0));
            p.add_constraint(row.as_slice(), ComparisonOp::Eq, 0.0);
        }
    }
    let row: Vec<_> = bary.iter().map(|&v| (v, 1.0)).collect();
    p.add_constraint(row.as_slice(), ComparisonOp::Eq, 1.0);
    p.solve().expect("LP oracle failed").objective()
}

/// The small seeded synthetic instance shared by the bound and IBP checks.
pub fn tiny_instance() -> WbpInstance {
    generate_synthetic(&SyntheticConfig::uniform(3, 5, 5, 2024)).unwrap()
}

/// T = 1 with barycenter supports equal to the sample's.
pub fn self_barycenter_instance(a: &[f64]) -> WbpInstance {
    let pts: Vec<Vec<f64>> = (0..a.len()).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let s = DiscreteDistribution::new(pts.clone(), a.to_vec()).unwrap();
    let costs = hpr_wbp::datagen::build_cost(&pts, &[&pts]).unwrap();
    WbpInstance::with_ground_costs(vec![s], pts, vec![1.0], costs).unwrap()
}

/// Limit point of HPR with restarts off after `iters` iterations from zero.
pub struct Reference {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub eta: Vec<f64>,
    pub mapping_norm: f64,
}

pub fn reference_run(instance: &WbpInstance, sigma: f64, iters: usize) -> Reference {
    use hpr_wbp::solvers::{HprWbpSolver, LpIteration};
    let mut solver = HprWbpSolver::new(instance, sigma, None).unwrap();
    for _ in 0..iters {
        solver.step().unwrap();
    }
    Reference {
        x: solver.x().to_vec(),
        y: solver.y().to_vec(),
        s: solver.s().to_vec(),
        eta: solver.eta(),
        mapping_norm: solver.kkt_mapping_norm(),
    }
}
