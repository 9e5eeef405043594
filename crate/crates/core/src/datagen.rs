//! Instance generation: Gaussian-mixture samples, k-means barycenter
//! supports, normalized squared-Euclidean costs, and grayscale images as
//! distributions.

use rand::distributions::{Distribution, Open01, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::GrayImage;
use crate::problem::{DiscreteDistribution, WbpInstance};

/// One-dimensional Gaussian mixture applied independently per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub means: Vec<f64>,
    /// Shared variance of every component.
    pub variance: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            means: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            variance: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of sample distributions `T`.
    pub num_samples: usize,
    /// Barycenter support size `m`.
    pub m: usize,
    /// Support size of each sample.
    pub sample_sizes: Vec<usize>,
    pub dim: usize,
    pub seed: u64,
    pub mixture: MixtureParams,
    pub kmeans_max_sweeps: usize,
}

impl SyntheticConfig {
    /// `T` samples of `m_t` atoms each in dimension 3.
    pub fn uniform(num_samples: usize, m: usize, mt: usize, seed: u64) -> Self {
        Self {
            num_samples,
            m,
            sample_sizes: vec![mt; num_samples],
            dim: 3,
            seed,
            mixture: MixtureParams::default(),
            kmeans_max_sweeps: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidOptions(msg));
        if self.num_samples == 0 {
            return bad("need at least one sample (T >= 1)".into());
        }
        if self.m < 2 {
            return bad(format!("barycenter support size must satisfy m >= 2, got {}", self.m));
        }
        if self.sample_sizes.len() != self.num_samples {
            return bad(format!(
                "{} sample sizes given for T = {}",
                self.sample_sizes.len(),
                self.num_samples
            ));
        }
        if self.sample_sizes.contains(&0) {
            return bad("every sample needs m_t >= 1".into());
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        let pooled: usize = self.sample_sizes.iter().sum();
        if pooled < self.m {
            return bad(format!("only {pooled} pooled points for m = {} centers", self.m));
        }
        if self.mixture.means.is_empty() || !(self.mixture.variance > 0.0) {
            return bad("mixture needs at least one component and positive variance".into());
        }
        Ok(())
    }
}

/// Positive weights drawn from `U(0,1)` and normalized to sum one.
pub fn random_simplex_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Open01)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `n` points in `R^dim`; each coordinate is an independent draw from the
/// mixture with the given component weights.
pub fn sample_mixture<R: Rng>(rng: &mut R, params: &MixtureParams, component_weights: &[f64], n: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    let pick = WeightedIndex::new(component_weights)
        .map_err(|e| Error::InvalidOptions(format!("mixture component weights: {e}")))?;
    let normals: Vec<Normal<f64>> = params
        .means
        .iter()
        .map(|&mu| Normal::new(mu, params.variance.sqrt()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidOptions(format!("mixture component: {e}")))?;
    Ok((0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let k = pick.sample(rng);
                    normals[k].sample(rng)
                })
                .collect()
        })
        .collect())
}

/// Samples, barycenter supports and normalized costs for a synthetic
/// instance; bitwise reproducible for a fixed config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<WbpInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.num_samples);
    for &mt in &cfg.sample_sizes {
        let comp = random_simplex_weights(&mut rng, cfg.mixture.means.len());
        let points = sample_mixture(&mut rng, &cfg.mixture, &comp, mt, cfg.dim)?;
        let weights = random_simplex_weights(&mut rng, mt);
        samples.push(DiscreteDistribution::new(points, weights)?);
    }
    let omega = random_simplex_weights(&mut rng, cfg.num_samples);
    let pooled: Vec<Vec<f64>> = samples.iter().flat_map(|s| s.supports().iter().cloned()).collect();
    let kmeans_seed = rng.gen::<u64>();
    let centers = kmeans_select(&pooled, cfg.m, kmeans_seed, cfg.kmeans_max_sweeps)?.centers;
    let sample_supports: Vec<&[Vec<f64>]> = samples.iter().map(|s| s.supports()).collect();
    let costs = build_cost(&centers, &sample_supports)?;
    WbpInstance::with_ground_costs(samples, centers, omega, costs)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared Euclidean distances `||q_i^c - q_j^t||^2` between the barycenter
/// supports and each sample's supports, column-major `m x m_t`, without
/// normalization.
pub fn squared_distances(bary: &[Vec<f64>], samples: &[&[Vec<f64>]]) -> Result<Vec<Vec<f64>>> {
    let d = bary.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(samples.len());
    for (t, pts) in samples.iter().enumerate() {
        if pts.iter().chain(bary.iter()).any(|p| p.len() != d) {
            return Err(Error::InvalidInstance(format!("support dimension mismatch in sample {t}")));
        }
        if pts.iter().chain(bary.iter()).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-finite support coordinate in sample {t}")));
        }
        let mut c = Vec::with_capacity(bary.len() * pts.len());
        for q in pts.iter() {
            for p in bary {
                c.push(sq_dist(p, q));
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// Squared Euclidean costs jointly scaled so that the largest entry over
/// all matrices is exactly one (left at zero when every cost is zero).
pub fn build_cost(bary: &[Vec<f64>], samples: &[&[Vec<f64>]]) -> Result<Vec<Vec<f64>>> {
    let mut costs = squared_distances(bary, samples)?;
    normalize_costs(&mut costs);
    Ok(costs)
}

/// Divides every entry by the global maximum entry, if positive.
pub fn normalize_costs(costs: &mut [Vec<f64>]) {
    let max = costs.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
    if max > 0.0 {
        for v in costs.iter_mut().flatten() {
            *v /= max;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub sweeps: usize,
}

impl KmeansResult {
    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

/// Within-cluster sum of squares of `points` under `assignment`.
pub fn wcss(points: &[Vec<f64>], centers: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points.iter().zip(assignment).map(|(p, &k)| sq_dist(p, &centers[k])).sum()
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], assignment: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (p, a) in points.iter().zip(assignment.iter_mut()) {
        let (best, dist) = centers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, sq_dist(p, c)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        *a = best;
        total += dist;
    }
    total
}

/// `m` centers by k-means++ seeding followed by Lloyd sweeps, stopping when
/// no center moves more than `1e-9` or after `max_sweeps` sweeps. A cluster
/// that becomes empty is re-seeded at a uniformly random input point.
pub fn kmeans_select(points: &[Vec<f64>], m: usize, seed: u64, max_sweeps: usize) -> Result<KmeansResult> {
    const MOVE_TOL: f64 = 1e-9;
    if m == 0 || points.len() < m {
        return Err(Error::InvalidOptions(format!(
            "k-means needs 1 <= m <= #points, got m = {m} with {} points",
            points.len()
        )));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidInstance("k-means points have mixed dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, w) in nearest.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding landing on an already chosen point.
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|w| *w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[idx].clone();
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let mut assignment = vec![0; points.len()];
    let mut history = Vec::new();
    let mut sweeps = 0;
    loop {
        history.push(assign(points, &centers, &mut assignment));
        if sweeps >= max_sweeps {
            break;
        }
        sweeps += 1;
        let mut sums = vec![vec![0.0; d]; m];
        let mut counts = vec![0usize; m];
        for (p, &k) in points.iter().zip(&assignment) {
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut moved = 0.0_f64;
        for k in 0..m {
            let next: Vec<f64> = if counts[k] == 0 {
                points[rng.gen_range(0..points.len())].clone()
            } else {
                sums[k].iter().map(|s| s / counts[k] as f64).collect()
            };
            moved = moved.max(sq_dist(&next, &centers[k]).sqrt());
            centers[k] = next;
        }
        if moved <= MOVE_TOL {
            history.push(assign(points, &centers, &mut assignment));
            break;
        }
    }
    Ok(KmeansResult {
        centers,
        assignment,
        wcss_history: history,
        sweeps,
    })
}

/// Pixel intensities normalized to sum one, supported on `(row, col)`
/// coordinates. Zero pixels are kept as zero-weight atoms.
pub fn image_to_distribution(image: &GrayImage) -> Result<DiscreteDistribution> {
    let total: f64 = image.pixels.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInstance("image has no nonzero pixel".into()));
    }
    let mut supports = Vec::with_capacity(image.pixels.len());
    let mut weights = Vec::with_capacity(image.pixels.len());
    for r in 0..image.height {
        for c in 0..image.width {
            supports.push(vec![r as f64, c as f64]);
            weights.push(image.pixels[r * image.width + c] / total);
        }
    }
    DiscreteDistribution::new(supports, weights)
}

/// Barycenter of equally sized images: every image becomes a sample, the
/// barycenter lives on the same pixel grid, `omega` is uniform and the cost is
/// the normalized squared pixel distance.
pub fn instance_from_images(images: &[GrayImage]) -> Result<WbpInstance> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInstance("no images given".into()))?;
    if images.iter().any(|im| im.width != first.width || im.height != first.height) {
        return Err(Error::InvalidInstance("images must share one size".into()));
    }
    let samples: Vec<DiscreteDistribution> = images.iter().map(image_to_distribution).collect::<Result<_>>()?;
    let grid = samples[0].supports().to_vec();
    let sample_supports: Vec<&[Vec<f64>]> = samples.iter().map(|s| s.supports()).collect();
    let costs = build_cost(&grid, &sample_supports)?;
    let t = images.len();
    let omega = vec![1.0 / t as f64; t];
    WbpInstance::with_ground_costs(samples, grid, omega, costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SyntheticConfig::uniform(2, 1, 3, 0).validate().is_err());
        assert!(SyntheticConfig::uniform(0, 2, 3, 0).validate().is_err());
        assert!(SyntheticConfig::uniform(1, 5, 3, 0).validate().is_err());
        assert!(SyntheticConfig::uniform(2, 5, 3, 0).validate().is_ok());
    }

    #[test]
    fn simplex_weights_positive_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_simplex_weights(&mut rng, 1000);
        assert!(w.iter().all(|v| *v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_is_the_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let r = kmeans_select(&pts, 1, 5, 100).unwrap();
        assert!((r.centers[0][0] - 1.0).abs() < 1e-15);
        assert!((r.centers[0][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distinct_points_become_centers() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let r = kmeans_select(&pts, 6, 11, 100).unwrap();
        assert_eq!(r.wcss(), 0.0);
        let mut c = r.centers.clone();
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(c, pts);
    }

    #[test]
    fn kmeans_rejects_too_few_points() {
        assert!(kmeans_select(&[vec![0.0]], 2, 0, 10).is_err());
    }

    #[test]
    fn cost_normalization_hits_farthest_pair() {
        let bary = vec![vec![0.0], vec![1.0]];
        let s1 = vec![vec![0.0], vec![2.0]];
        let s2 = vec![vec![0.5]];
        let c = build_cost(&bary, &[&s1, &s2]).unwrap();
        // farthest pair: bary 0 to s1 atom 1 (distance 2, squared 4)
        assert_eq!(c[0][2], 1.0);
        assert_eq!(c[0][0], 0.0);
        assert_eq!(c[0][1], 0.25);
        assert!(c.iter().flatten().all(|v| *v <= 1.0));
    }

    #[test]
    fn all_zero_costs_stay_zero() {
        let p = vec![vec![1.0, 1.0]];
        let c = build_cost(&p, &[&p]).unwrap();
        assert_eq!(c, vec![vec![0.0]]);
    }

    #[test]
    fn image_weights() {
        let uniform = GrayImage::new(2, 2, vec![3.0; 4]).unwrap();
        let d = image_to_distribution(&uniform).unwrap();
        assert_eq!(d.weights(), &[0.25; 4]);
        let point = GrayImage::new(3, 2, vec![0.0, 0.0, 0.0, 0.0, 9.0, 0.0]).unwrap();
        let d = image_to_distribution(&point).unwrap();
        assert_eq!(d.weights()[4], 1.0);
        assert_eq!(d.supports()[4], vec![1.0, 1.0]);
        assert!(image_to_distribution(&GrayImage::new(2, 1, vec![0.0; 2]).unwrap()).is_err());
    }
}
