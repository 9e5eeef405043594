mod common;

use common::{dense_a, random_instance, random_layout, random_vec};
use hpr_wbp::linalg::dot;
use hpr_wbp::problem::{kkt_from_products, project_nonneg, Layout};
use hpr_wbp::{DualVector, PrimalVector};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn dense_mul(a: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(v)).iter().copied().collect()
}

#[test]
fn operator_and_adjoint_match_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let layout = random_layout(&mut rng, 4, 6, 6);
        let a = dense_a(layout.m(), layout.sample_sizes());
        let x = random_vec(&mut rng, layout.primal_len());
        let y = random_vec(&mut rng, layout.dual_len());
        let mut ax = vec![0.0; layout.dual_len()];
        let mut aty = vec![0.0; layout.primal_len()];
        layout.apply_a_into(&x, &mut ax);
        layout.apply_astar_into(&y, &mut aty);
        let ax_dense = dense_mul(&a, &x);
        let aty_dense = dense_mul(&a.transpose(), &y);
        for (u, v) in ax.iter().zip(&ax_dense).chain(aty.iter().zip(&aty_dense)) {
            assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
        }
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn reduced_constraint_matrix_has_full_row_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..60 {
        let layout = random_layout(&mut rng, 4, 6, 6);
        let a = dense_a(layout.m(), layout.sample_sizes());
        let rank = a.clone().svd(false, false).rank(1e-9);
        assert_eq!(rank, layout.dual_len(), "m = {}, mt = {:?}", layout.m(), layout.sample_sizes());
    }
}

#[test]
fn minimum_sizes_supported() {
    let layout = Layout::new(2, vec![1]).unwrap();
    assert_eq!((layout.dual_len(), layout.primal_len()), (3, 4));
    let a = dense_a(2, &[1]);
    assert_eq!(a.clone().svd(false, false).rank(1e-9), 3);
}

#[test]
fn linear_objective_is_sum_of_plan_inner_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let m = rng.gen_range(2..6);
        let mt: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(1..6)).collect();
        let inst = random_instance(&mut rng, m, &mt);
        let x = random_vec(&mut rng, inst.layout().primal_len());
        let pv = PrimalVector::from_vec(inst.layout().clone(), x.clone()).unwrap();
        let mut expected = 0.0;
        for (t, &n) in mt.iter().enumerate() {
            let plan = pv.plan(t);
            let d = inst.cost(t);
            for j in 0..n {
                for i in 0..m {
                    expected += d[j * m + i] * plan[j * m + i];
                }
            }
        }
        assert!((inst.primal_objective(&x) - expected).abs() < 1e-12);
    }
}

#[test]
fn kkt_residual_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let inst = random_instance(&mut rng, 4, &[3, 2]);
        let layout = inst.layout();
        let a = dense_a(layout.m(), layout.sample_sizes());
        let x = random_vec(&mut rng, layout.primal_len());
        let y = random_vec(&mut rng, layout.dual_len());
        let s = random_vec(&mut rng, layout.primal_len());
        let got = inst.kkt_residual(&x, &y, &s).unwrap();

        let b = DVector::from_column_slice(inst.b());
        let c = DVector::from_column_slice(inst.c());
        let xv = DVector::from_column_slice(&x);
        let sv = DVector::from_column_slice(&s);
        let yv = DVector::from_column_slice(&y);
        let primal = (&b - &a * &xv).norm() / (1.0 + b.norm());
        let neg = xv.map(|v| v.min(0.0)).norm() / (1.0 + xv.norm());
        let dual = (a.transpose() * &yv + &sv - &c).norm() / (1.0 + c.norm() + sv.norm());
        let proj = (&sv - &xv).map(|v| v.max(0.0));
        let compl = (&sv - proj).norm() / (1.0 + xv.norm() + sv.norm());
        for (u, v) in [
            (got.primal_infeas, primal),
            (got.nonneg_violation, neg),
            (got.dual_infeas, dual),
            (got.complementarity, compl),
        ] {
            assert!((u - v).abs() <= 1e-14, "{u} vs {v}");
        }
        assert!((got.max_relative - primal.max(neg).max(dual).max(compl)).abs() <= 1e-14);
    }
}

#[test]
fn kkt_from_products_uses_given_products() {
    let k = kkt_from_products(&[1.0], &[0.0], &[0.0], &[0.0], &[1.0], &[0.0]);
    assert_eq!(k.max_relative, 0.0);
}

proptest! {
    #[test]
    fn flattening_round_trips(m in 2usize..6, mt in proptest::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
        let layout = Arc::new(Layout::new(m, mt.clone()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vec(&mut rng, layout.primal_len());
        let pv = PrimalVector::from_vec(layout.clone(), x.clone()).unwrap();
        let (plans, bary) = pv.to_parts();
        let back = PrimalVector::from_parts(layout.clone(), &plans, &bary).unwrap();
        prop_assert_eq!(back.as_slice(), &x[..]);
        let y = random_vec(&mut rng, layout.dual_len());
        let dv = DualVector::from_vec(layout, y.clone()).unwrap();
        prop_assert_eq!(dv.into_vec(), y);
    }

    #[test]
    fn nonneg_projection_is_nearest_point(v in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
        let p = project_nonneg(&v);
        for (pi, vi) in p.iter().zip(&v) {
            prop_assert!(*pi >= 0.0);
            // Componentwise the closest nonnegative number to vi.
            prop_assert_eq!(*pi, if *vi > 0.0 { *vi } else { 0.0 });
        }
    }
}
