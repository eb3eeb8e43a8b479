//! Point-based rendering: screen-space disks with front-to-back
//! alpha compositing.

use crate::error::Result;
use crate::geometry::CameraModel;
use crate::raster::Raster;

use super::TargetCloud;

#[derive(Debug, Clone, Copy)]
pub struct PointRenderConfig {
    /// Disk radius in normalized screen units; the screen-space radius in
    /// pixels is `radius * min(W, H) / 2`.
    pub radius: f64,
}

impl Default for PointRenderConfig {
    fn default() -> Self {
        Self { radius: 0.01 }
    }
}

const ALPHA_STOP: f64 = 0.999;
const COVERAGE_EPS: f64 = 1e-3;

struct Fragment {
    depth: f64,
    alpha: f64,
    color: [f64; 3],
    order: u32,
}

pub fn render_points(
    cloud: &TargetCloud,
    camera: &CameraModel,
    cfg: &PointRenderConfig,
) -> Result<(Raster, Raster)> {
    let (w, h) = (camera.width() as usize, camera.height() as usize);
    let mut rgb = Raster::new(w, h, 3)?;
    let mut mask = Raster::new(w, h, 1)?;

    let radius_px = cfg.radius * (w.min(h) as f64) / 2.0;
    let mut fragments: Vec<Vec<Fragment>> = (0..w * h).map(|_| Vec::new()).collect();

    for (order, point) in cloud.points.iter().enumerate() {
        let Some((pixel, depth)) = camera.project(&point.position).in_front() else {
            continue;
        };
        let x_min = ((pixel.x - radius_px).ceil().max(0.0)) as usize;
        let x_max = ((pixel.x + radius_px).floor().min((w - 1) as f64)) as isize;
        let y_min = ((pixel.y - radius_px).ceil().max(0.0)) as usize;
        let y_max = ((pixel.y + radius_px).floor().min((h - 1) as f64)) as isize;
        if x_max < x_min as isize || y_max < y_min as isize {
            continue;
        }
        for py in y_min..=y_max as usize {
            for px in x_min..=x_max as usize {
                let dx = px as f64 - pixel.x;
                let dy = py as f64 - pixel.y;
                let rho2 = (dx * dx + dy * dy) / (radius_px * radius_px);
                if rho2 > 1.0 {
                    continue;
                }
                fragments[py * w + px].push(Fragment {
                    depth,
                    alpha: 1.0 - rho2,
                    color: point.color,
                    order: order as u32,
                });
            }
        }
    }

    for idx in 0..w * h {
        let frags = &mut fragments[idx];
        if frags.is_empty() {
            continue;
        }
        frags.sort_by(|a, b| {
            a.depth
                .partial_cmp(&b.depth)
                .unwrap()
                .then(a.order.cmp(&b.order))
        });
        let mut acc = [0.0f64; 3];
        let mut transmittance = 1.0f64;
        for f in frags.iter() {
            let contrib = transmittance * f.alpha;
            for c in 0..3 {
                acc[c] += contrib * f.color[c];
            }
            transmittance *= 1.0 - f.alpha;
            if 1.0 - transmittance >= ALPHA_STOP {
                break;
            }
        }
        let coverage = 1.0 - transmittance;
        if coverage > COVERAGE_EPS {
            mask.data_mut()[idx] = 1.0;
        }
        for c in 0..3 {
            rgb.data_mut()[idx * 3 + c] = acc[c] as f32;
        }
    }

    Ok((rgb, mask))
}
