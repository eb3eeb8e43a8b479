//! Softmax-weighted forward splatting of the target cloud.
//!
//! Each point projects into the target view and deposits its color onto
//! the four neighboring pixels with bilinear kernel weights. Overlapping
//! contributions are resolved by an exponential importance weight in the
//! point's target-view depth, so nearer surfaces dominate.

use crate::error::Result;
use crate::geometry::CameraModel;
use crate::raster::Raster;

use super::TargetCloud;

#[derive(Debug, Clone, Copy)]
pub struct SplatConfig {
    /// Importance-metric coefficient.
    pub alpha: f64,
}

impl Default for SplatConfig {
    fn default() -> Self {
        Self { alpha: 100.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SplatOutput {
    pub rgb: Raster,
    pub dyn_mask: Raster,
    /// Accumulated bilinear kernel weight per pixel (diagnostic).
    pub weight: Raster,
}

const COVERAGE_EPS: f64 = 1e-3;

pub fn render_splat(
    cloud: &TargetCloud,
    camera: &CameraModel,
    cfg: &SplatConfig,
) -> Result<SplatOutput> {
    let (w, h) = (camera.width() as usize, camera.height() as usize);
    let mut rgb = Raster::new(w, h, 3)?;
    let mut dyn_mask = Raster::new(w, h, 1)?;
    let mut weight = Raster::new(w, h, 1)?;

    // Project once, keeping only points in front of the camera.
    let mut projected = Vec::with_capacity(cloud.len());
    for point in &cloud.points {
        if let Some((pixel, depth)) = camera.project(&point.position).in_front() {
            projected.push((pixel, depth, point.color));
        }
    }
    if projected.is_empty() {
        return Ok(SplatOutput {
            rgb,
            dyn_mask,
            weight,
        });
    }

    // Depth normalization so alpha behaves consistently across scene
    // scales; shifting by the minimum depth keeps the exponentials in
    // (0, 1] without changing the softmax ratios.
    let mut depths: Vec<f64> = projected.iter().map(|p| p.1).collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d_min = depths[0];
    let n = depths.len();
    let d_scale = if n % 2 == 1 {
        depths[n / 2]
    } else {
        0.5 * (depths[n / 2 - 1] + depths[n / 2])
    };
    let d_scale = if d_scale > 0.0 { d_scale } else { 1.0 };

    let mut num = vec![[0.0f64; 3]; w * h];
    let mut den = vec![0.0f64; w * h];
    let mut kernel_acc = vec![0.0f64; w * h];

    for (pixel, depth, color) in projected {
        let importance = (cfg.alpha * (d_min - depth) / d_scale).exp();
        let x0 = pixel.x.floor();
        let y0 = pixel.y.floor();
        let fx = pixel.x - x0;
        let fy = pixel.y - y0;
        for (dx, dy, k) in [
            (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
            (1.0, 0.0, fx * (1.0 - fy)),
            (0.0, 1.0, (1.0 - fx) * fy),
            (1.0, 1.0, fx * fy),
        ] {
            if k == 0.0 {
                continue;
            }
            let px = x0 + dx;
            let py = y0 + dy;
            if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                continue;
            }
            let idx = py as usize * w + px as usize;
            let kw = k * importance;
            for c in 0..3 {
                num[idx][c] += kw * color[c];
            }
            den[idx] += kw;
            kernel_acc[idx] += k;
        }
    }

    for idx in 0..w * h {
        if den[idx] > 0.0 {
            for c in 0..3 {
                rgb.data_mut()[idx * 3 + c] = (num[idx][c] / den[idx]) as f32;
            }
        }
        if kernel_acc[idx] > COVERAGE_EPS {
            dyn_mask.data_mut()[idx] = 1.0;
        }
        weight.data_mut()[idx] = kernel_acc[idx] as f32;
    }

    Ok(SplatOutput {
        rgb,
        dyn_mask,
        weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamic::{TargetCloud, TargetPoint};
    use crate::geometry::Point3;
    use nalgebra::{Matrix3, Matrix4};

    fn pixel_camera(size: u32) -> CameraModel {
        // fx = fy = 1, principal point at image center: world xy maps
        // directly to pixel offsets at z = 1.
        let mut k = Matrix3::identity();
        k[(0, 2)] = (size / 2) as f64;
        k[(1, 2)] = (size / 2) as f64;
        CameraModel::new(k, Matrix4::identity(), size, size).unwrap()
    }

    fn single_point(color: [f64; 3], pos: Point3) -> TargetPoint {
        TargetPoint {
            position: pos,
            color,
            grid: None,
        }
    }

    #[test]
    fn point_at_pixel_center_deposits_exactly() {
        let cam = pixel_camera(8);
        let cloud = TargetCloud {
            points: vec![single_point([0.2, 0.4, 0.8], Point3::new(0.0, 0.0, 1.0))],
        };
        let out = render_splat(&cloud, &cam, &SplatConfig::default()).unwrap();
        assert_eq!(out.rgb.pixel(4, 4), &[0.2, 0.4, 0.8]);
        assert_eq!(out.dyn_mask.get(4, 4, 0), 1.0);
        assert_eq!(out.dyn_mask.get(3, 4, 0), 0.0);
    }

    #[test]
    fn softmax_resolves_depth_order() {
        // Two points on the same pixel at depths 1 and 2: with alpha = 100
        // the nearer color wins to within 1e-6.
        // Hand evaluation: d_scale = 1.5, weights exp(0) and exp(-100/1.5),
        // so the far weight fraction is ~6e-30.
        let cam = pixel_camera(8);
        let cloud = TargetCloud {
            points: vec![
                single_point([1.0, 0.0, 0.0], Point3::new(0.0, 0.0, 1.0)),
                single_point([0.0, 0.0, 1.0], Point3::new(0.0, 0.0, 2.0)),
            ],
        };
        let out = render_splat(&cloud, &cam, &SplatConfig::default()).unwrap();
        let px = out.rgb.pixel(4, 4);
        assert!((px[0] - 1.0).abs() < 1e-6 && px[2].abs() < 1e-6);
    }

    #[test]
    fn empty_cloud_renders_nothing() {
        let cam = pixel_camera(8);
        let out = render_splat(&TargetCloud::default(), &cam, &SplatConfig::default()).unwrap();
        assert!(out.rgb.data().iter().all(|&v| v == 0.0));
        assert!(out.dyn_mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn behind_camera_points_are_skipped() {
        let cam = pixel_camera(8);
        let cloud = TargetCloud {
            points: vec![single_point([1.0, 1.0, 1.0], Point3::new(0.0, 0.0, -1.0))],
        };
        let out = render_splat(&cloud, &cam, &SplatConfig::default()).unwrap();
        assert!(out.dyn_mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_invariant_to_point_order() {
        let cam = pixel_camera(16);
        let mut points = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.13;
            points.push(single_point(
                [t.sin().abs(), t.cos().abs(), 0.5],
                Point3::new(t.sin() * 3.0, t.cos() * 3.0, 1.0 + 0.1 * t),
            ));
        }
        let forward = render_splat(
            &TargetCloud {
                points: points.clone(),
            },
            &cam,
            &SplatConfig::default(),
        )
        .unwrap();
        points.reverse();
        let reversed = render_splat(&TargetCloud { points }, &cam, &SplatConfig::default()).unwrap();
        for (a, b) in forward.rgb.data().iter().zip(reversed.rgb.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
