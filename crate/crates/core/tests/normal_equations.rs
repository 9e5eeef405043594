mod common;

use common::{dense_a, dense_ot_a, random_instance, random_layout, random_vec};
use hpr_wbp::linalg::norm;
use hpr_wbp::normal::{
    condition_estimate, dense_normal_matrix, dump_dense_normal_csv, project_affine, project_affine_ot,
    solve_ot_normal, solve_wbp_normal_into, NormalSolveWorkspace,
};
use hpr_wbp::{OtInstance, PrimalVector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn residual(aat: &DMatrix<f64>, y: &[f64], r: &[f64]) -> f64 {
    let res = aat * DVector::from_column_slice(y) - DVector::from_column_slice(r);
    res.norm()
}

#[test]
fn wbp_solution_satisfies_dense_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..300 {
        let layout = random_layout(&mut rng, 5, 8, 8);
        let a = dense_a(layout.m(), layout.sample_sizes());
        let aat = &a * a.transpose();
        let r: Vec<f64> = random_vec(&mut rng, layout.dual_len()).iter().map(|v| v * 10.0).collect();
        let mut ws = NormalSolveWorkspace::new(&layout);
        let mut y = vec![0.0; layout.dual_len()];
        solve_wbp_normal_into(&layout, &r, &mut ws, &mut y).unwrap();
        assert!(residual(&aat, &y, &r) <= 1e-10 * (1.0 + norm(&r)));
    }
}

#[test]
fn structured_normal_matrix_matches_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let layout = random_layout(&mut rng, 4, 6, 6);
        let a = dense_a(layout.m(), layout.sample_sizes());
        let aat = &a * a.transpose();
        let built = dense_normal_matrix(&layout);
        for (i, row) in built.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, aat[(i, j)]);
            }
        }
    }
}

#[test]
fn dumped_normal_matrix_parses_back() {
    let layout = hpr_wbp::problem::Layout::new(3, vec![2, 1]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aat.csv");
    dump_dense_normal_csv(&layout, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(parsed, dense_normal_matrix(&layout));
}

#[test]
fn ot_solution_satisfies_dense_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let (mu, mv) = (rng.gen_range(2..=12), rng.gen_range(1..=12));
        let a = dense_ot_a(mu, mv);
        let aat = &a * a.transpose();
        let r1 = random_vec(&mut rng, mv);
        let r2 = random_vec(&mut rng, mu - 1);
        let (y1, y2) = solve_ot_normal(mu, mv, &r1, &r2).unwrap();
        let y: Vec<f64> = y1.iter().chain(&y2).copied().collect();
        let r: Vec<f64> = r1.iter().chain(&r2).copied().collect();
        assert!(residual(&aat, &y, &r) <= 1e-10 * (1.0 + norm(&r)));
    }
}

#[test]
fn affine_projection_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let inst = random_instance(&mut rng, 4, &[3, 2, 2]);
        let layout = inst.layout();
        let a = dense_a(layout.m(), layout.sample_sizes());
        let z = random_vec(&mut rng, layout.primal_len());
        let zv = DVector::from_column_slice(&z);
        let b = DVector::from_column_slice(inst.b());
        let aat = &a * a.transpose();
        let corr = aat.lu().solve(&(&a * &zv - b)).unwrap();
        let expected = &zv - a.transpose() * corr;

        let mut ws = NormalSolveWorkspace::new(layout);
        let p = project_affine(&inst, &PrimalVector::from_vec(layout.clone(), z).unwrap(), &mut ws).unwrap();
        for (u, v) in p.as_slice().iter().zip(expected.iter()) {
            assert!((u - v).abs() < 1e-11);
        }
    }
}

#[test]
fn ot_affine_projection_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mu, mv) = (4, 3);
    let w = |rng: &mut ChaCha8Rng, n: usize| {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let ot = OtInstance::new(w(&mut rng, mu), w(&mut rng, mv), vec![1.0; mu * mv]).unwrap();
    let a = dense_ot_a(mu, mv);
    let z = random_vec(&mut rng, mu * mv);
    let zv = DVector::from_column_slice(&z);
    let b = DVector::from_column_slice(ot.b());
    let corr = (&a * a.transpose()).lu().solve(&(&a * &zv - b)).unwrap();
    let expected = &zv - a.transpose() * corr;
    let got = project_affine_ot(&ot, &z).unwrap();
    for (u, v) in got.iter().zip(expected.iter()) {
        assert!((u - v).abs() < 1e-12);
    }
}

#[test]
fn condition_estimate_matches_dense_eigenvalues() {
    let layout = hpr_wbp::problem::Layout::new(5, vec![4, 3, 6]).unwrap();
    let a = dense_a(layout.m(), layout.sample_sizes());
    let eig = (&a * a.transpose()).symmetric_eigen().eigenvalues;
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    let est = condition_estimate(&layout, 2000).unwrap();
    assert!((est - max / min).abs() / (max / min) < 1e-3, "{est} vs {}", max / min);
}
