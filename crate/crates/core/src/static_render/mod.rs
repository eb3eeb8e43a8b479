//! Static-content rendering: source-view selection (temporal window or
//! camera clustering) and the aggregated static point-cloud backend.

pub mod epipolar;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamic::{render_points, PointRenderConfig, TargetCloud, TargetPoint};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord, Point3};
use crate::raster::Raster;
use crate::scene_io::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Nearest camera centers within a temporal window around the target time.
    WindowNn,
    /// K-means over camera centers; one temporally-closest member per cluster.
    Cluster,
}

#[derive(Debug, Clone)]
pub struct SourceSelectionConfig {
    pub n_spatial: usize,
    pub strategy: SelectionStrategy,
    pub time_window: f64,
    pub n_cluster: usize,
    pub rng_seed: u64,
}

impl Default for SourceSelectionConfig {
    fn default() -> Self {
        Self {
            n_spatial: 10,
            strategy: SelectionStrategy::WindowNn,
            time_window: 12.0,
            n_cluster: 40,
            rng_seed: 0,
        }
    }
}

impl SourceSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_spatial == 0 {
            return Err(Error::InvalidArgument("n_spatial must be positive".into()));
        }
        if self.time_window < 0.0 {
            return Err(Error::InvalidArgument(
                "time_window must be non-negative".into(),
            ));
        }
        if self.strategy == SelectionStrategy::Cluster && self.n_cluster < self.n_spatial {
            return Err(Error::InvalidArgument(format!(
                "n_cluster ({}) must be >= n_spatial ({})",
                self.n_cluster, self.n_spatial
            )));
        }
        Ok(())
    }
}

fn dist2(a: &Point3, b: &Point3) -> f64 {
    (a - b).norm_squared()
}

/// Picks source frame indices for rendering around the target camera/time.
pub fn select_source_views(
    centers: &[Point3],
    times: &[f64],
    target_center: Point3,
    t_tgt: f64,
    cfg: &SourceSelectionConfig,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    assert_eq!(centers.len(), times.len());
    match cfg.strategy {
        SelectionStrategy::WindowNn => {
            let mut candidates: Vec<usize> = (0..centers.len())
                .filter(|&i| (times[i] - t_tgt).abs() <= cfg.time_window)
                .collect();
            if candidates.len() < cfg.n_spatial {
                return Err(Error::InsufficientFrames {
                    needed: cfg.n_spatial,
                    available: candidates.len(),
                    context: "source views inside the temporal window".into(),
                });
            }
            candidates.sort_by(|&a, &b| {
                let da = dist2(&centers[a], &target_center);
                let db = dist2(&centers[b], &target_center);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            candidates.truncate(cfg.n_spatial);
            candidates.sort_unstable();
            Ok(candidates)
        }
        SelectionStrategy::Cluster => {
            if centers.len() < cfg.n_cluster {
                return Err(Error::InsufficientFrames {
                    needed: cfg.n_cluster,
                    available: centers.len(),
                    context: "frames for camera clustering".into(),
                });
            }
            let assignment = kmeans(centers, cfg.n_cluster, cfg.rng_seed);
            // Cluster centroids nearest the target first; within a cluster,
            // the member temporally closest to t_tgt (earlier frame on ties).
            let mut order: Vec<usize> = (0..assignment.centroids.len()).collect();
            order.sort_by(|&a, &b| {
                let da = dist2(&assignment.centroids[a], &target_center);
                let db = dist2(&assignment.centroids[b], &target_center);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            let mut selected = Vec::with_capacity(cfg.n_spatial);
            for c in order {
                if selected.len() == cfg.n_spatial {
                    break;
                }
                let best = assignment
                    .members(c)
                    .min_by(|&a, &b| {
                        let da = (times[a] - t_tgt).abs();
                        let db = (times[b] - t_tgt).abs();
                        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                    });
                if let Some(i) = best {
                    selected.push(i);
                }
            }
            if selected.len() < cfg.n_spatial {
                return Err(Error::InsufficientFrames {
                    needed: cfg.n_spatial,
                    available: selected.len(),
                    context: "non-empty camera clusters".into(),
                });
            }
            selected.sort_unstable();
            Ok(selected)
        }
    }
}

struct KmeansResult {
    centroids: Vec<Point3>,
    labels: Vec<usize>,
}

impl KmeansResult {
    fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |&(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }
}

/// Lloyd's algorithm with k-means++ seeding; stops after 100 iterations or
/// when no centroid moves more than 1e-6.
fn kmeans(points: &[Point3], k: usize, seed: u64) -> KmeansResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Point3> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| dist2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                r -= d;
                if r <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next]);
    }

    let mut labels = vec![0usize; points.len()];
    for _ in 0..100 {
        for (i, p) in points.iter().enumerate() {
            labels[i] = (0..k)
                .min_by(|&a, &b| {
                    dist2(p, &centroids[a])
                        .partial_cmp(&dist2(p, &centroids[b]))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let mut sum = nalgebra::Vector3::zeros();
            let mut count = 0usize;
            for (i, p) in points.iter().enumerate() {
                if labels[i] == c {
                    sum += p.coords;
                    count += 1;
                }
            }
            if count > 0 {
                let new_c = Point3::from(sum / count as f64);
                shift = shift.max((new_c - centroids[c]).norm());
                centroids[c] = new_c;
            }
        }
        if shift < 1e-6 {
            break;
        }
    }
    KmeansResult { centroids, labels }
}

/// Lifts every static pixel (dynamic mask = 0) of the selected frames and
/// renders the union as a point cloud into the target view.
pub fn render_static_pointcloud(
    scene: &Scene,
    selected: &[usize],
    target: &CameraModel,
    stride: usize,
    cfg: &PointRenderConfig,
) -> Result<(Raster, Raster)> {
    let stride = stride.max(1);
    let mut cloud = TargetCloud::default();
    for &idx in selected {
        let frame = &scene.frames[idx];
        for row in (0..frame.camera.height() as usize).step_by(stride) {
            for col in (0..frame.camera.width() as usize).step_by(stride) {
                if frame.dynamic_mask.get(col, row, 0) > 0.0 {
                    continue;
                }
                let u = PixelCoord::new(col as f64, row as f64);
                let depth = frame.depth.get(col, row, 0) as f64;
                let rgb = frame.image.pixel(col, row);
                cloud.points.push(TargetPoint {
                    position: frame.camera.lift(u, depth)?,
                    color: [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64],
                    grid: None,
                });
            }
        }
    }
    render_points(&cloud, target, cfg)
}

/// Near/far bounds from the 1st/99th percentile of source depths, widened
/// by factors 0.9 and 1.1.
pub fn near_far_from_depths(depths: &mut Vec<f64>) -> Result<(f64, f64)> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument(
            "no source depths to derive ray bounds from".into(),
        ));
    }
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| {
        let pos = q * (depths.len() - 1) as f64;
        depths[pos.round() as usize]
    };
    Ok((pct(0.01) * 0.9, pct(0.99) * 1.1))
}

/// N_r uniformly spaced camera-z depths in [near, far] along the pixel ray.
pub fn sample_ray(
    camera: &CameraModel,
    pixel: PixelCoord,
    near: f64,
    far: f64,
    n_r: usize,
) -> Vec<Point3> {
    let origin = camera.center();
    let dir = camera.ray_direction(pixel);
    (0..n_r)
        .map(|i| {
            let z = if n_r == 1 {
                0.5 * (near + far)
            } else {
                near + (far - near) * i as f64 / (n_r - 1) as f64
            };
            origin + dir * z
        })
        .collect()
}
