//! Statistical outlier removal: a point is dropped when its mean distance
//! to its nearest neighbors exceeds `median + delta * std` of all mean
//! distances. Single pass, simultaneous removal.

use super::knn::KdTree;
use super::TargetCloud;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct OutlierConfig {
    pub n_neighbors: usize,
    pub deviation: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 50,
            deviation: 0.1,
        }
    }
}

/// Mean k-NN distance per point (self excluded). Shared with the renderer
/// pipeline; clouds smaller than `n_neighbors + 1` fall back to all
/// available neighbors.
pub fn mean_knn_distances(cloud: &TargetCloud, n_neighbors: usize) -> Vec<f64> {
    let n = cloud.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let k = n_neighbors.min(n - 1);
    let positions: Vec<_> = cloud.points.iter().map(|p| p.position).collect();
    let tree = KdTree::build(&positions);
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.k_nearest(p, k, i);
            nn.iter().map(|e| e.1).sum::<f64>() / k as f64
        })
        .collect()
}

/// Indices that survive the median + delta*std rule (population std).
pub fn inlier_indices(mean_dists: &[f64], deviation: f64) -> Vec<usize> {
    let n = mean_dists.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = mean_dists.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = mean_dists.iter().sum::<f64>() / n as f64;
    let var = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let threshold = median + deviation * var.sqrt();
    (0..n).filter(|&i| mean_dists[i] <= threshold).collect()
}

pub fn remove_outliers(cloud: &TargetCloud, cfg: &OutlierConfig) -> Result<TargetCloud> {
    if cloud.len() <= 1 {
        return Ok(cloud.clone());
    }
    let dists = mean_knn_distances(cloud, cfg.n_neighbors);
    let keep = inlier_indices(&dists, cfg.deviation);
    Ok(TargetCloud {
        points: keep.into_iter().map(|i| cloud.points[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamic::TargetPoint;
    use crate::geometry::Point3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn cloud_from(points: Vec<Point3>) -> TargetCloud {
        TargetCloud {
            points: points
                .into_iter()
                .map(|position| TargetPoint {
                    position,
                    color: [0.5; 3],
                    grid: None,
                })
                .collect(),
        }
    }

    /// O(n^2) all-pairs oracle, independent of the kd-tree path.
    pub(crate) fn brute_force_inliers(
        points: &[Point3],
        n_neighbors: usize,
        deviation: f64,
    ) -> Vec<usize> {
        let n = points.len();
        if n <= 1 {
            return (0..n).collect();
        }
        let k = n_neighbors.min(n - 1);
        let means: Vec<f64> = (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (points[i] - points[j]).norm())
                    .collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d[..k].iter().sum::<f64>() / k as f64
            })
            .collect();
        let mut sorted = means.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = means.iter().sum::<f64>() / n as f64;
        let std = (means.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        (0..n)
            .filter(|&i| means[i] <= median + deviation * std)
            .collect()
    }

    #[test]
    fn far_point_is_removed_from_gaussian_blob() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sigma = 0.05;
        let mut points: Vec<Point3> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.random_range(-sigma..sigma),
                    rng.random_range(-sigma..sigma),
                    rng.random_range(-sigma..sigma),
                )
            })
            .collect();
        points.push(Point3::new(100.0 * sigma, 0.0, 0.0));
        let cloud = cloud_from(points.clone());
        let cleaned = remove_outliers(&cloud, &OutlierConfig::default()).unwrap();
        assert_eq!(cleaned.len(), 500);
        assert!(cleaned
            .points
            .iter()
            .all(|p| p.position.x.abs() <= sigma));
        // And the oracle agrees on the removed index.
        let oracle = brute_force_inliers(&points, 50, 0.1);
        assert_eq!(oracle.len(), 500);
        assert!(!oracle.contains(&500));
    }

    #[test]
    fn identical_points_keep_everything() {
        let cloud = cloud_from(vec![Point3::new(1.0, 1.0, 1.0); 20]);
        let cleaned = remove_outliers(&cloud, &OutlierConfig::default()).unwrap();
        assert_eq!(cleaned.len(), 20);
    }

    #[test]
    fn matches_brute_force_oracle_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..10 {
            let n = rng.random_range(60..400);
            let points: Vec<Point3> = (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let cfg = OutlierConfig::default();
            let dists = mean_knn_distances(&cloud_from(points.clone()), cfg.n_neighbors);
            let got = inlier_indices(&dists, cfg.deviation);
            let want = brute_force_inliers(&points, cfg.n_neighbors, cfg.deviation);
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn empty_and_singleton_clouds_pass_through() {
        let empty = cloud_from(vec![]);
        assert_eq!(remove_outliers(&empty, &OutlierConfig::default()).unwrap().len(), 0);
        let single = cloud_from(vec![Point3::new(0.0, 0.0, 0.0)]);
        assert_eq!(remove_outliers(&single, &OutlierConfig::default()).unwrap().len(), 1);
    }
}
