use hpr_wbp::datagen::{
    build_cost, generate_synthetic, kmeans_select, random_simplex_weights, sample_mixture, squared_distances, wcss,
    MixtureParams, SyntheticConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fixed_seed_is_bitwise_reproducible() {
    let cfg = SyntheticConfig::uniform(4, 6, 7, 99);
    let a = generate_synthetic(&cfg).unwrap();
    let b = generate_synthetic(&cfg).unwrap();
    assert_eq!(a.c(), b.c());
    assert_eq!(a.b(), b.b());
    assert_eq!(a.omega(), b.omega());
    assert_eq!(a.barycenter_supports(), b.barycenter_supports());
    let c = generate_synthetic(&SyntheticConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.c(), c.c());
}

#[test]
fn generated_weights_are_normalized_and_costs_scaled() {
    let inst = generate_synthetic(&SyntheticConfig::uniform(5, 8, 9, 4)).unwrap();
    for s in inst.samples() {
        assert!(s.weights().iter().all(|w| *w > 0.0));
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(s.dim(), 3);
    }
    assert!((inst.omega().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    let inst = &inst;
    let max_ground = (0..5)
        .flat_map(|t| inst.cost(t).iter().map(move |d| d / inst.omega()[t]))
        .fold(0.0_f64, f64::max);
    assert!((max_ground - 1.0).abs() < 1e-12);
}

#[test]
fn pooled_mean_is_near_mixture_center() {
    let params = MixtureParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let comp = random_simplex_weights(&mut rng, params.means.len());
    let n = 20_000;
    let pts = sample_mixture(&mut rng, &params, &comp, n, 1).unwrap();
    let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let expected: f64 = comp.iter().zip(&params.means).map(|(w, m)| w * m).sum();
    let var: f64 = comp.iter().zip(&params.means).map(|(w, m)| w * (m * m + params.variance)).sum::<f64>() - expected * expected;
    assert!((mean - expected).abs() <= 6.0 * (var / n as f64).sqrt(), "{mean} vs {expected}");
    assert!(mean > -20.0 && mean < 20.0);
}

#[test]
fn costs_match_brute_force_pairwise_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect()
    };
    let bary = pts(&mut rng, 6);
    let s1 = pts(&mut rng, 4);
    let s2 = pts(&mut rng, 5);
    let raw = squared_distances(&bary, &[&s1, &s2]).unwrap();
    let mut max = 0.0_f64;
    for (t, s) in [&s1, &s2].iter().enumerate() {
        for (j, q) in s.iter().enumerate() {
            for (i, p) in bary.iter().enumerate() {
                let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                assert!((raw[t][j * 6 + i] - d).abs() <= 1e-12);
                max = max.max(d);
            }
        }
    }
    let normalized = build_cost(&bary, &[&s1, &s2]).unwrap();
    for (n, r) in normalized.iter().flatten().zip(raw.iter().flatten()) {
        assert!((n - r / max).abs() <= 1e-15);
    }
}

#[test]
fn identical_supports_give_symmetric_zero_diagonal_cost() {
    let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
    let c = &build_cost(&pts, &[&pts]).unwrap()[0];
    for i in 0..5 {
        assert_eq!(c[i * 5 + i], 0.0);
        for j in 0..5 {
            assert_eq!(c[j * 5 + i], c[i * 5 + j]);
        }
    }
    // Already normalized data keeps a unit maximum when rebuilt.
    let again = build_cost(&pts, &[&pts]).unwrap();
    assert_eq!(again[0].iter().cloned().fold(0.0, f64::max), 1.0);
}

#[test]
fn kmeans_wcss_is_monotone_and_beats_random_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts = sample_mixture(&mut rng, &MixtureParams::default(), &[0.2; 5], 300, 2).unwrap();
    let res = kmeans_select(&pts, 6, 1, 100).unwrap();
    for w in res.wcss_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", res.wcss_history);
    }
    // Baseline: random assignment, centers = cluster means.
    let assignment: Vec<usize> = (0..pts.len()).map(|_| rng.gen_range(0..6)).collect();
    let mut centers = vec![vec![0.0; 2]; 6];
    let mut counts = vec![0.0; 6];
    for (p, &k) in pts.iter().zip(&assignment) {
        counts[k] += 1.0;
        centers[k][0] += p[0];
        centers[k][1] += p[1];
    }
    for (c, n) in centers.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n);
    }
    let baseline = wcss(&pts, &centers, &assignment);
    assert!(res.wcss() <= baseline);
    assert!((wcss(&pts, &res.centers, &res.assignment) - res.wcss()).abs() < 1e-9 * res.wcss());
}

#[test]
fn kmeans_handles_duplicate_points() {
    // Fewer distinct points than centers: some cluster goes empty and is re-seeded.
    let pts = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
    let res = kmeans_select(&pts, 3, 4, 20).unwrap();
    assert_eq!(res.centers.len(), 3);
    assert_eq!(res.wcss(), 0.0);
}
