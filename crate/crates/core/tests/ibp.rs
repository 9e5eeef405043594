mod common;

use common::{lp_oracle, self_barycenter_instance, tiny_instance};
use hpr_wbp::ibp::{solve_ibp, IbpOptions};
use hpr_wbp::problem::relative_obj_gap;
use hpr_wbp::solvers::{Metrics, Termination};
use hpr_wbp::{DiscreteDistribution, WbpInstance};

#[test]
fn matched_supports_small_epsilon_recovers_sample() {
    let a = [0.1, 0.3, 0.2, 0.4];
    let inst = self_barycenter_instance(&a);
    let rep = solve_ibp(
        &inst,
        &IbpOptions {
            epsilon: 0.001,
            log_domain: true,
            ..IbpOptions::default()
        },
    )
    .unwrap();
    let l1: f64 = rep.barycenter(&inst).iter().zip(&a).map(|(u, v)| (u - v).abs()).sum();
    assert!(l1 <= 1e-3, "l1 distance {l1}");
}

#[test]
fn smaller_epsilon_has_smaller_bias() {
    let inst = tiny_instance();
    let opt = lp_oracle(&inst);
    let gap = |eps: f64| {
        let rep = solve_ibp(
            &inst,
            &IbpOptions {
                epsilon: eps,
                log_domain: true,
                max_iters: 100_000,
                ..IbpOptions::default()
            },
        )
        .unwrap();
        eprintln!("eps {eps}: obj {} opt {opt} iters {} {:?}", rep.primal_obj, rep.iterations, rep.termination);
        relative_obj_gap(rep.primal_obj, opt)
    };
    let (fine, coarse) = (gap(0.001), gap(0.01));
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn large_epsilon_approaches_product_coupling() {
    let s1 = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
    let s2 = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.6, 0.4]).unwrap();
    let pts = vec![vec![0.0], vec![1.0]];
    let cost = vec![0.0, 1.0, 1.0, 0.0];
    let inst = WbpInstance::with_ground_costs(vec![s1, s2], pts, vec![0.5, 0.5], vec![cost.clone(), cost]).unwrap();
    let rep = solve_ibp(
        &inst,
        &IbpOptions {
            epsilon: 1e4,
            tol: 1e-12,
            ..IbpOptions::default()
        },
    )
    .unwrap();
    let p = rep.barycenter(&inst).to_vec();
    for t in 0..2 {
        let a = inst.samples()[t].weights();
        let plan = &rep.x[inst.layout().plan_range(t)];
        for j in 0..2 {
            for i in 0..2 {
                assert!((plan[j * 2 + i] - p[i] * a[j]).abs() < 1e-3);
            }
        }
    }
}

#[test]
fn every_sweep_keeps_weights_on_simplex() {
    let inst = tiny_instance();
    let rep = solve_ibp(
        &inst,
        &IbpOptions {
            epsilon: 0.05,
            max_iters: 200,
            ..IbpOptions::default()
        },
    )
    .unwrap();
    assert!(matches!(rep.termination, Termination::Tolerance | Termination::MaxIters));
    let bary = rep.barycenter(&inst);
    assert!(bary.iter().all(|v| *v >= 0.0));
    assert!((bary.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    for t in 0..inst.num_samples() {
        let plan = &rep.x[inst.layout().plan_range(t)];
        for (j, col) in plan.chunks_exact(inst.m()).enumerate() {
            assert!((col.iter().sum::<f64>() - inst.samples()[t].weights()[j]).abs() <= 1e-12);
        }
    }
    assert!(rep.history.iter().all(|r| matches!(r.metrics, Metrics::Marginal { .. })));
    let last = rep.history.last().unwrap();
    if let Metrics::Marginal { marginal_err, .. } = last.metrics {
        assert!(marginal_err < 1e-2);
    }
}
