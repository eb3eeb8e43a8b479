//! Toy epipolar feature aggregator: ray samples are projected into source
//! views, embedded RGB features are combined by alternating view/ray
//! attention blocks with frozen seeded weights, and views that see dynamic
//! content are excluded from the view attention. When every view is
//! excluded the vanilla unmasked computation is used instead and the pixel
//! is flagged so the blend can prefer the dynamic branch there.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord, Point3};
use crate::raster::Raster;
use crate::scene_io::FrameBundle;
use crate::static_render::{near_far_from_depths, sample_ray};

#[derive(Debug, Clone)]
pub struct AggregatorConfig {
    /// Number of alternating view/ray attention blocks.
    pub n_blocks: usize,
    /// Samples per target ray.
    pub n_ray_samples: usize,
    /// Feature dimensionality.
    pub feature_dim: usize,
    /// Seed for the frozen random weights.
    pub weight_seed: u64,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            n_blocks: 2,
            n_ray_samples: 64,
            feature_dim: 16,
            weight_seed: 0,
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_ray_samples == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument(
                "aggregator dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One source view's contribution at a ray sample.
#[derive(Debug, Clone)]
pub struct ViewSample {
    /// Embedded RGB feature at the projection.
    pub feature: DVector<f64>,
    /// True when the interpolated dynamic mask at the projection is > 0.
    pub masked: bool,
    /// False for behind-camera or out-of-frame projections.
    pub valid: bool,
}

impl ViewSample {
    fn included(&self) -> bool {
        self.valid && !self.masked
    }
}

struct BlockWeights {
    view_q: DMatrix<f64>,
    view_k: DMatrix<f64>,
    view_v: DMatrix<f64>,
    ray_q: DMatrix<f64>,
    ray_k: DMatrix<f64>,
    ray_v: DMatrix<f64>,
}

/// Frozen random weights; fully determined by the seed and dimensions.
pub struct AggregatorWeights {
    embed: DMatrix<f64>,
    blocks: Vec<BlockWeights>,
    to_rgb: DMatrix<f64>,
}

impl AggregatorWeights {
    pub fn seeded(cfg: &AggregatorConfig) -> Self {
        let d = cfg.feature_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.weight_seed);
        let scale = 1.0 / (d as f64).sqrt();
        let mut mat = |rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale)
        };
        let embed = mat(d, 3);
        let blocks = (0..cfg.n_blocks)
            .map(|_| BlockWeights {
                view_q: mat(d, d),
                view_k: mat(d, d),
                view_v: mat(d, d),
                ray_q: mat(d, d),
                ray_k: mat(d, d),
                ray_v: mat(d, d),
            })
            .collect();
        let to_rgb = mat(3, d);
        Self {
            embed,
            blocks,
            to_rgb,
        }
    }

    pub fn embed_rgb(&self, rgb: [f64; 3]) -> DVector<f64> {
        &self.embed * DVector::from_column_slice(&rgb)
    }
}

/// Projects a world position into each source view and embeds the sampled
/// color. Sampling clamps to the frame, but out-of-domain projections are
/// reported with `valid = false`.
pub fn gather_features(
    position: &Point3,
    sources: &[&FrameBundle],
    weights: &AggregatorWeights,
) -> Vec<ViewSample> {
    sources
        .iter()
        .map(|frame| {
            let (pixel, valid) = match frame.camera.project(position).in_front() {
                Some((u, _)) => {
                    let inside = u.x >= 0.0
                        && u.y >= 0.0
                        && u.x <= (frame.camera.width() - 1) as f64
                        && u.y <= (frame.camera.height() - 1) as f64;
                    (u, inside)
                }
                None => (PixelCoord::new(0.0, 0.0), false),
            };
            let rgb = frame.image.sample_rgb(pixel);
            let masked = frame.dynamic_mask.sample_channel(pixel, 0) > 0.0;
            ViewSample {
                feature: weights.embed_rgb(rgb),
                masked,
                valid,
            }
        })
        .collect()
}

/// Softmax with max-logit shift; equal logits produce exactly uniform
/// weights.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}

fn attend_views(
    w: &BlockWeights,
    query: &DVector<f64>,
    views: &[ViewSample],
    include: &[usize],
    d: usize,
) -> DVector<f64> {
    let q = &w.view_q * query;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let logits: Vec<f64> = include
        .iter()
        .map(|&j| q.dot(&(&w.view_k * &views[j].feature)) * inv_sqrt_d)
        .collect();
    let a = softmax(&logits);
    let mut out = DVector::zeros(d);
    for (weight, &j) in a.iter().zip(include) {
        out += (&w.view_v * &views[j].feature) * *weight;
    }
    out
}

/// Cross-view attention for one ray sample. Views seeing dynamic content
/// (or projecting outside their frame) carry exactly zero attention mass.
/// If that excludes every view, the unmasked computation over all views is
/// used instead and the fallback flag is set.
pub fn view_transformer_step(
    weights: &AggregatorWeights,
    block: usize,
    query: &DVector<f64>,
    views: &[ViewSample],
) -> (DVector<f64>, bool) {
    assert!(!views.is_empty(), "view attention needs at least one view");
    let w = &weights.blocks[block];
    let d = query.len();
    let included: Vec<usize> = (0..views.len()).filter(|&j| views[j].included()).collect();
    if included.is_empty() {
        let all: Vec<usize> = (0..views.len()).collect();
        (attend_views(w, query, views, &all, d), true)
    } else {
        (attend_views(w, query, views, &included, d), false)
    }
}

/// Vanilla attention over all views regardless of mask bits; the all-masked
/// fallback of `view_transformer_step` is this exact computation.
pub fn view_transformer_step_unmasked(
    weights: &AggregatorWeights,
    block: usize,
    query: &DVector<f64>,
    views: &[ViewSample],
) -> DVector<f64> {
    let all: Vec<usize> = (0..views.len()).collect();
    attend_views(&weights.blocks[block], query, views, &all, query.len())
}

/// Self-attention along the ray. The reported attention row `a` belongs to
/// a mean-feature aggregation query; it is non-negative and sums to 1.
pub fn ray_transformer_step(
    weights: &AggregatorWeights,
    block: usize,
    features: &[DVector<f64>],
) -> (Vec<DVector<f64>>, Vec<f64>) {
    assert!(!features.is_empty());
    let w = &weights.blocks[block];
    let d = features[0].len();
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let keys: Vec<DVector<f64>> = features.iter().map(|f| &w.ray_k * f).collect();
    let values: Vec<DVector<f64>> = features.iter().map(|f| &w.ray_v * f).collect();

    let attended: Vec<DVector<f64>> = features
        .iter()
        .map(|f| {
            let q = &w.ray_q * f;
            let logits: Vec<f64> = keys.iter().map(|k| q.dot(k) * inv_sqrt_d).collect();
            let a = softmax(&logits);
            let mut out = DVector::zeros(d);
            for (weight, v) in a.iter().zip(&values) {
                out += v * *weight;
            }
            out
        })
        .collect();

    let mut mean = DVector::zeros(d);
    for f in features {
        mean += f;
    }
    mean /= features.len() as f64;
    let q = &w.ray_q * mean;
    let logits: Vec<f64> = keys.iter().map(|k| q.dot(k) * inv_sqrt_d).collect();
    (attended, softmax(&logits))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean-of-dimensions population standard deviation across the selected
/// views' key-projected features; 0 when fewer than two views contribute.
fn view_feature_spread(w: &BlockWeights, views: &[ViewSample], include: &[usize]) -> f64 {
    if include.len() < 2 {
        return 0.0;
    }
    let keyed: Vec<DVector<f64>> = include
        .iter()
        .map(|&j| &w.view_k * &views[j].feature)
        .collect();
    let d = keyed[0].len();
    let n = keyed.len() as f64;
    let mut acc = 0.0;
    for dim in 0..d {
        let mean: f64 = keyed.iter().map(|k| k[dim]).sum::<f64>() / n;
        let var: f64 = keyed.iter().map(|k| (k[dim] - mean).powi(2)).sum::<f64>() / n;
        acc += var.sqrt();
    }
    acc / d as f64
}

/// Output of rendering one target ray.
pub struct RayResult {
    pub rgb: [f64; 3],
    /// True when some sample had every source view excluded.
    pub all_masked: bool,
    /// Per-block attention-weighted cross-view feature spread.
    pub sigma: Vec<f64>,
}

/// Runs the alternating view/ray blocks for one target pixel.
pub fn render_ray(
    target: &CameraModel,
    pixel: PixelCoord,
    sources: &[&FrameBundle],
    near: f64,
    far: f64,
    cfg: &AggregatorConfig,
    weights: &AggregatorWeights,
) -> RayResult {
    let positions = sample_ray(target, pixel, near, far, cfg.n_ray_samples);
    let per_sample_views: Vec<Vec<ViewSample>> = positions
        .iter()
        .map(|x| gather_features(x, sources, weights))
        .collect();

    // F_0: element-wise max over the per-view features.
    let mut features: Vec<DVector<f64>> = per_sample_views
        .iter()
        .map(|views| {
            let mut f = views[0].feature.clone();
            for v in &views[1..] {
                f.zip_apply(&v.feature, |a, b| *a = a.max(b));
            }
            f
        })
        .collect();

    let mut all_masked = false;
    let mut sigma = Vec::with_capacity(cfg.n_blocks);
    for p in 0..cfg.n_blocks {
        let mut hatted = Vec::with_capacity(features.len());
        let mut spreads = Vec::with_capacity(features.len());
        for (f, views) in features.iter().zip(&per_sample_views) {
            let (fh, fallback) = view_transformer_step(weights, p, f, views);
            all_masked |= fallback;
            let include: Vec<usize> = if fallback {
                (0..views.len()).collect()
            } else {
                (0..views.len()).filter(|&j| views[j].included()).collect()
            };
            spreads.push(view_feature_spread(&weights.blocks[p], views, &include));
            hatted.push(fh);
        }
        let (updated, a) = ray_transformer_step(weights, p, &hatted);
        sigma.push(a.iter().zip(&spreads).map(|(ai, si)| ai * si).sum());
        features = updated;
    }

    let mut mean = DVector::zeros(cfg.feature_dim);
    for f in &features {
        mean += f;
    }
    mean /= features.len() as f64;
    let raw = &weights.to_rgb * mean;
    RayResult {
        rgb: [sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])],
        all_masked,
        sigma,
    }
}

/// Output rasters of the epipolar backend.
pub struct EpipolarOutput {
    pub rgb: Raster,
    /// 1 where the aggregator produced a static color (no all-masked
    /// fallback); the blend treats 0 pixels as uncovered.
    pub coverage: Raster,
    /// Per-block cross-view spread diagnostic maps.
    pub sigma: Vec<Raster>,
}

/// Renders the full target view with the epipolar backend.
pub fn render_epipolar(
    sources: &[&FrameBundle],
    target: &CameraModel,
    cfg: &AggregatorConfig,
    weights: &AggregatorWeights,
) -> Result<EpipolarOutput> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::InsufficientFrames {
            needed: 1,
            available: 0,
            context: "epipolar aggregation source views".into(),
        });
    }
    let mut depths: Vec<f64> = Vec::new();
    for frame in sources {
        depths.extend(frame.depth.data().iter().map(|&d| d as f64));
    }
    let (near, far) = near_far_from_depths(&mut depths)?;

    let (w, h) = (target.width() as usize, target.height() as usize);
    let mut rgb = Raster::new(w, h, 3)?;
    let mut coverage = Raster::new(w, h, 1)?;
    let mut sigma: Vec<Raster> = (0..cfg.n_blocks)
        .map(|_| Raster::new(w, h, 1))
        .collect::<Result<_>>()?;
    for y in 0..h {
        for x in 0..w {
            let result = render_ray(
                target,
                PixelCoord::new(x as f64, y as f64),
                sources,
                near,
                far,
                cfg,
                weights,
            );
            for c in 0..3 {
                rgb.set(x, y, c, result.rgb[c] as f32);
            }
            coverage.set(x, y, 0, if result.all_masked { 0.0 } else { 1.0 });
            for (p, s) in result.sigma.iter().enumerate() {
                sigma[p].set(x, y, 0, *s as f32);
            }
        }
    }
    Ok(EpipolarOutput {
        rgb,
        coverage,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize) -> AggregatorConfig {
        AggregatorConfig {
            n_blocks: 2,
            n_ray_samples: 4,
            feature_dim: d,
            weight_seed: 11,
        }
    }

    fn view(feature: DVector<f64>, masked: bool, valid: bool) -> ViewSample {
        ViewSample {
            feature,
            masked,
            valid,
        }
    }

    fn random_views(weights: &AggregatorWeights, n: usize, seed: u64) -> Vec<ViewSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                view(
                    weights.embed_rgb([rng.random(), rng.random(), rng.random()]),
                    false,
                    true,
                )
            })
            .collect()
    }

    #[test]
    fn pure_red_embeds_to_first_column_exactly() {
        let weights = AggregatorWeights::seeded(&cfg(16));
        let f = weights.embed_rgb([1.0, 0.0, 0.0]);
        for i in 0..16 {
            assert_eq!(f[i], weights.embed[(i, 0)]);
        }
    }

    #[test]
    fn identical_unmasked_views_return_their_value_projection() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let f = weights.embed_rgb([0.3, 0.6, 0.9]);
        let views = vec![view(f.clone(), false, true); 5];
        let (out, fallback) = view_transformer_step(&weights, 0, &f, &views);
        assert!(!fallback);
        let expected = &weights.blocks[0].view_v * &f;
        for i in 0..8 {
            assert!((out[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_view_carries_exactly_zero_weight() {
        // Including a masked view must not change the output at all.
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let query = weights.embed_rgb([0.5, 0.5, 0.5]);
        let mut views = random_views(&weights, 4, 3);
        let (without, _) = view_transformer_step(&weights, 0, &query, &views);
        views.push(view(weights.embed_rgb([0.9, 0.1, 0.2]), true, true));
        let (with, fallback) = view_transformer_step(&weights, 0, &query, &views);
        assert!(!fallback);
        assert_eq!(without.as_slice(), with.as_slice());
    }

    #[test]
    fn all_masked_fallback_is_bitwise_unmasked() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let query = weights.embed_rgb([0.5, 0.2, 0.8]);
        let views: Vec<ViewSample> = random_views(&weights, 4, 5)
            .into_iter()
            .map(|mut v| {
                v.masked = true;
                v
            })
            .collect();
        let (out, fallback) = view_transformer_step(&weights, 1, &query, &views);
        assert!(fallback);
        let vanilla = view_transformer_step_unmasked(&weights, 1, &query, &views);
        assert_eq!(out.as_slice(), vanilla.as_slice());
    }

    #[test]
    fn ray_attention_rows_sum_to_one() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let feats: Vec<DVector<f64>> = random_views(&weights, 6, 9)
            .into_iter()
            .map(|v| v.feature)
            .collect();
        let (_, a) = ray_transformer_step(&weights, 0, &feats);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(a.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn single_sample_ray_attention_is_one() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let feats = vec![weights.embed_rgb([0.1, 0.2, 0.3])];
        let (_, a) = ray_transformer_step(&weights, 0, &feats);
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn identical_samples_get_uniform_ray_attention() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let feats = vec![weights.embed_rgb([0.4, 0.4, 0.4]); 4];
        let (_, a) = ray_transformer_step(&weights, 0, &feats);
        for w in a {
            assert_eq!(w, 0.25);
        }
    }

    #[test]
    fn spread_is_zero_when_views_agree() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let f = weights.embed_rgb([0.2, 0.7, 0.4]);
        let views = vec![view(f, false, true); 5];
        let include: Vec<usize> = (0..5).collect();
        assert_eq!(
            view_feature_spread(&weights.blocks[0], &views, &include),
            0.0
        );
    }

    #[test]
    fn spread_positive_for_disagreeing_views() {
        let c = cfg(8);
        let weights = AggregatorWeights::seeded(&c);
        let views = random_views(&weights, 4, 21);
        let include: Vec<usize> = (0..4).collect();
        assert!(view_feature_spread(&weights.blocks[0], &views, &include) > 0.0);
    }

    #[test]
    fn weights_are_reproducible_from_the_seed() {
        let c = cfg(16);
        let a = AggregatorWeights::seeded(&c);
        let b = AggregatorWeights::seeded(&c);
        assert_eq!(a.embed, b.embed);
        assert_eq!(a.to_rgb, b.to_rgb);
        assert_eq!(a.blocks[1].ray_v, b.blocks[1].ray_v);
    }
}
