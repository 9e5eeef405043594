//! Empirical checks of the HPR convergence guarantees on small instances,
//! with reference points from long restart-free runs.

mod common;

use common::{reference_run, tiny_instance};
use hpr_wbp::hpr::{verify_equivalence, HprIterate, OtDualProblem, TwoBlockProblem, WbpDualProblem};
use hpr_wbp::linalg::{dist, max_abs_diff, norm};
use hpr_wbp::solvers::{HprWbpSolver, LpIteration};
use hpr_wbp::OtInstance;

const REFERENCE_ITERS: usize = 1_000_000;
const SLACK: f64 = 1.0 + 1e-6;

fn tiny_ot() -> OtInstance {
    let mu = vec![0.1, 0.2, 0.3, 0.4];
    let nu = vec![0.5, 0.25, 0.25];
    let cost: Vec<f64> = (0..12).map(|k| ((k * 7 % 5) as f64) / 4.0).collect();
    OtInstance::new(mu, nu, cost).unwrap()
}

#[test]
fn three_forms_coincide_on_ot() {
    let ot = tiny_ot();
    for sigma in [0.1, 1.0, 10.0] {
        let mut p = OtDualProblem::new(&ot, sigma).unwrap();
        let y0 = vec![0.0; p.dim_y()];
        let x0 = vec![0.0; p.dim_x()];
        let rep = verify_equivalence(&mut p, &y0, &x0, 200, 1e-9, None).unwrap();
        assert!(rep.passed, "sigma {sigma}: {rep:?}");
        assert!(rep.initialization_consistent);
        assert_eq!(rep.divergence_index, None);
    }
}

#[test]
fn three_forms_coincide_on_barycenter_lp() {
    let inst = tiny_instance();
    for sigma in [0.1, 1.0, 10.0] {
        let mut p = WbpDualProblem::new(&inst, sigma).unwrap();
        let y0: Vec<f64> = (0..p.dim_y()).map(|i| 0.01 * i as f64).collect();
        let x0 = vec![0.02; p.dim_x()];
        let rep = verify_equivalence(&mut p, &y0, &x0, 200, 1e-9, None).unwrap();
        assert!(rep.passed, "sigma {sigma}: {rep:?}");
    }
}

#[test]
fn production_solver_follows_generic_lean_form() {
    let inst = tiny_instance();
    let sigma = 0.7;
    let mut p = WbpDualProblem::new(&inst, sigma).unwrap();
    let mut generic = HprIterate::start(&p, &vec![0.0; p.dim_y()], &vec![0.0; p.dim_x()]);
    let mut fast = HprWbpSolver::new(&inst, sigma, None).unwrap();
    for k in 0..300 {
        generic.step(&mut p).unwrap();
        fast.step().unwrap();
        let dev = max_abs_diff(&generic.x, fast.x())
            .max(max_abs_diff(&generic.y, fast.y()))
            .max(max_abs_diff(&generic.s, fast.s()))
            .max(max_abs_diff(&generic.x_hat, fast.x_hat()));
        assert!(dev < 1e-10, "iteration {k}: {dev}");
        if k == 150 {
            generic.restart(&p);
            fast.restart();
        }
    }
}

#[test]
fn convergence_guarantees_hold() {
    let inst = tiny_instance();
    let sigma = 1.0;
    let reference = reference_run(&inst, sigma, REFERENCE_ITERS);
    assert!(reference.mapping_norm < 1e-5, "reference not converged: {}", reference.mapping_norm);

    let mut solver = HprWbpSolver::new(&inst, sigma, None).unwrap();
    let eta0 = solver.eta();
    let r0 = dist(&eta0, &reference.eta);

    // x0 = 0, y0 = 0, s0 = c - A^* y0 = c.
    let x_star_norm = norm(&reference.x);
    let d0 = norm(&reference.x) + sigma * dist(inst.c(), &reference.s);
    let dual_star = inst.dual_objective(&reference.y);

    let mut eta_prev = eta0.clone();
    for k in 0..=5000usize {
        solver.step().unwrap();
        let step_res = solver.fixed_point_residual();
        assert!(
            (k as f64 + 1.0) * step_res <= 2.0 * r0 * SLACK,
            "residual decay at k = {k}: {} > {}",
            (k as f64 + 1.0) * step_res,
            2.0 * r0
        );
        // v^{k+1} = eta^k + 2 sigma (A^* y + s - c)
        let v: Vec<f64> = eta_prev
            .iter()
            .zip(solver.aty())
            .zip(solver.s())
            .zip(inst.c())
            .map(|(((e, a), s), c)| e + 2.0 * sigma * (a + s - c))
            .collect();
        assert!(dist(&v, &reference.eta) <= r0 * SLACK, "anchored boundedness at k = {k}");
        eta_prev = solver.eta();

        if [10, 100, 1000].contains(&k) {
            let scale = 1.0 / (k as f64 + 1.0);
            let kkt = solver.kkt_mapping_norm();
            assert!(kkt <= scale * ((1.0 + sigma) / sigma) * d0 * SLACK, "KKT rate at k = {k}");
            let h = dual_star - inst.dual_objective(solver.y());
            let lower = -scale * x_star_norm / sigma * d0;
            let upper = scale * (d0 * d0 + x_star_norm * d0) / sigma;
            assert!(h >= lower * SLACK && h <= upper * SLACK, "objective sandwich at k = {k}: {lower} <= {h} <= {upper}");
        }
    }
}

#[test]
fn iteration_complexity_bound_holds() {
    let inst = tiny_instance();
    let reference = reference_run(&inst, 1.0, REFERENCE_ITERS);
    for sigma in [0.5, 1.0, 2.0] {
        let d0 = norm(&reference.x) + sigma * dist(inst.c(), &reference.s);
        let eps = 1e-3;
        let bound = ((1.0 + sigma) / sigma * d0 / eps).ceil() as usize;
        let mut solver = HprWbpSolver::new(&inst, sigma, None).unwrap();
        let mut k = 0;
        while solver.kkt_mapping_norm() > eps {
            solver.step().unwrap();
            k += 1;
            assert!(k <= bound, "sigma {sigma}: more than {bound} iterations");
        }
    }
}
