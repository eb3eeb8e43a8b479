//! Dynamic content rendering: flow-paired point clouds from the two
//! temporally closest frames, linear interpolation to the target time,
//! statistical outlier removal, and three interchangeable rasterizers.

mod knn;
mod mesh;
mod outliers;
mod points;
mod splat;

pub use knn::KdTree;
pub use mesh::render_mesh;
pub use outliers::{remove_outliers, OutlierConfig};
pub use points::{render_points, PointRenderConfig};
pub use splat::{render_splat, SplatConfig, SplatOutput};

use crate::error::{Error, Result};
use crate::geometry::{PixelCoord, Point3};
use crate::scene_io::{FlowField, FrameBundle};

/// Lattice origin of a cloud point: pixel (row, col) of a source frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridIndex {
    pub frame: usize,
    pub row: u32,
    pub col: u32,
}

/// One flow-matched pair of 3D points lifted from frames i- and i+.
#[derive(Debug, Clone)]
pub struct PairedPoint {
    pub x1: Point3,
    pub x2: Point3,
    pub c1: [f64; 3],
    pub c2: [f64; 3],
    pub u1: PixelCoord,
    pub u2: PixelCoord,
    pub grid: GridIndex,
}

#[derive(Debug, Clone, Default)]
pub struct PairedPointCloud {
    pub pairs: Vec<PairedPoint>,
}

/// A renderable point at the target time.
#[derive(Debug, Clone)]
pub struct TargetPoint {
    pub position: Point3,
    pub color: [f64; 3],
    pub grid: Option<GridIndex>,
}

#[derive(Debug, Clone, Default)]
pub struct TargetCloud {
    pub points: Vec<TargetPoint>,
}

impl TargetCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cycle-consistency tolerances (pixels / relative).
#[derive(Debug, Clone, Copy)]
pub struct CycleConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1.0,
            rel_tol: 0.05,
        }
    }
}

/// Indices of the two temporally closest frames bracketing `t_tgt`
/// (equal when `t_tgt` hits a frame time exactly).
pub fn select_temporal_neighbors(times: &[f64], t_tgt: f64) -> Result<(usize, usize)> {
    let (Some(&lo), Some(&hi)) = (times.first(), times.last()) else {
        return Err(Error::InvalidArgument("empty time list".into()));
    };
    if t_tgt < lo || t_tgt > hi {
        return Err(Error::TimeOutOfRange { t: t_tgt, lo, hi });
    }
    let i_minus = times
        .iter()
        .rposition(|&t| t <= t_tgt)
        .expect("t_tgt >= first time");
    let i_plus = times
        .iter()
        .position(|&t| t >= t_tgt)
        .expect("t_tgt <= last time");
    Ok((i_minus, i_plus))
}

/// Forward-backward flow agreement at pixel `u`:
/// `|f(u) + b(u + f(u))| <= max(abs_tol, rel_tol * |f(u)|)`.
pub fn check_cycle(
    flow_fwd: &FlowField,
    flow_bwd: &FlowField,
    u: PixelCoord,
    cfg: &CycleConfig,
) -> bool {
    let f = flow_fwd.sample(u);
    let back = flow_bwd.sample(PixelCoord::new(u.x + f[0], u.y + f[1]));
    let err = ((f[0] + back[0]).powi(2) + (f[1] + back[1]).powi(2)).sqrt();
    let fwd_norm = (f[0] * f[0] + f[1] * f[1]).sqrt();
    err <= cfg.abs_tol.max(cfg.rel_tol * fwd_norm)
}

/// Builds the paired cloud from frame i-'s dynamic pixels. Pass
/// `flows = None` when i- and i+ are the same frame (degenerate case).
pub fn build_paired_cloud(
    frame_minus: &FrameBundle,
    frame_minus_index: usize,
    frame_plus: &FrameBundle,
    flows: Option<(&FlowField, &FlowField)>,
    cycle: &CycleConfig,
) -> Result<PairedPointCloud> {
    let mut pairs = Vec::new();
    let (w, h) = (frame_minus.image.width(), frame_minus.image.height());
    for row in 0..h {
        for col in 0..w {
            if frame_minus.dynamic_mask.get(col, row, 0) <= 0.0 {
                continue;
            }
            let u1 = PixelCoord::new(col as f64, row as f64);
            let u2 = match flows {
                None => u1,
                Some((fwd, bwd)) => {
                    let d = fwd.sample(u1);
                    let u2 = PixelCoord::new(u1.x + d[0], u1.y + d[1]);
                    // Correspondence must land on dynamic content of i+.
                    if frame_plus.dynamic_mask.sample_channel(u2, 0) <= 0.0 {
                        continue;
                    }
                    if !check_cycle(fwd, bwd, u1, cycle) {
                        continue;
                    }
                    u2
                }
            };
            let d1 = frame_minus.depth.sample_channel(u1, 0);
            let x1 = frame_minus.camera.lift(u1, d1)?;
            let c1 = frame_minus.image.sample_rgb(u1);
            let (x2, c2) = if flows.is_none() {
                (x1, c1)
            } else {
                let d2 = frame_plus.depth.sample_channel(u2, 0);
                (
                    frame_plus.camera.lift(u2, d2)?,
                    frame_plus.image.sample_rgb(u2),
                )
            };
            pairs.push(PairedPoint {
                x1,
                x2,
                c1,
                c2,
                u1,
                u2,
                grid: GridIndex {
                    frame: frame_minus_index,
                    row: row as u32,
                    col: col as u32,
                },
            });
        }
    }
    Ok(PairedPointCloud { pairs })
}

/// Linear-motion interpolation of the paired cloud to `t_tgt`.
/// When `t_minus == t_plus` the cloud degenerates to the x1 side.
pub fn interpolate_cloud(
    cloud: &PairedPointCloud,
    t_minus: f64,
    t_plus: f64,
    t_tgt: f64,
) -> Result<TargetCloud> {
    if t_tgt < t_minus.min(t_plus) || t_tgt > t_minus.max(t_plus) {
        return Err(Error::TimeOutOfRange {
            t: t_tgt,
            lo: t_minus,
            hi: t_plus,
        });
    }
    let points = if t_minus == t_plus {
        cloud
            .pairs
            .iter()
            .map(|p| TargetPoint {
                position: p.x1,
                color: p.c1,
                grid: Some(p.grid),
            })
            .collect()
    } else {
        let w = (t_tgt - t_minus) / (t_plus - t_minus);
        cloud
            .pairs
            .iter()
            .map(|p| TargetPoint {
                position: Point3::from(p.x2.coords * w + p.x1.coords * (1.0 - w)),
                color: [
                    p.c2[0] * w + p.c1[0] * (1.0 - w),
                    p.c2[1] * w + p.c1[1] * (1.0 - w),
                    p.c2[2] * w + p.c1[2] * (1.0 - w),
                ],
                grid: Some(p.grid),
            })
            .collect()
    };
    Ok(TargetCloud { points })
}
