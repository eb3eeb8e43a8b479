//! Mesh-based rendering: the source-pixel lattice of frame i- is split
//! into two triangles per pixel quad; triangles spanning a depth
//! discontinuity are dropped; z-buffered rasterization with barycentric
//! color interpolation.

use std::collections::HashMap;

use crate::error::Result;
use crate::geometry::CameraModel;
use crate::raster::Raster;

use super::{GridIndex, TargetCloud};

/// Maximum per-edge depth ratio before a triangle is discarded
/// (relative depth gap > 5%).
const EDGE_DEPTH_RATIO: f64 = 1.05;

pub fn render_mesh(cloud: &TargetCloud, camera: &CameraModel) -> Result<(Raster, Raster)> {
    let (w, h) = (camera.width() as usize, camera.height() as usize);
    let mut rgb = Raster::new(w, h, 3)?;
    let mut mask = Raster::new(w, h, 1)?;
    let mut zbuf = vec![f64::INFINITY; w * h];

    // Project every gridded point once; group lattice occupancy by frame.
    struct Vert {
        x: f64,
        y: f64,
        depth: f64,
        color: [f64; 3],
    }
    let mut verts: Vec<Option<Vert>> = Vec::with_capacity(cloud.len());
    let mut lattice: HashMap<usize, HashMap<(u32, u32), usize>> = HashMap::new();
    for (i, point) in cloud.points.iter().enumerate() {
        let projected = camera.project(&point.position).in_front().map(|(p, d)| Vert {
            x: p.x,
            y: p.y,
            depth: d,
            color: point.color,
        });
        verts.push(projected);
        if let Some(GridIndex { frame, row, col }) = point.grid {
            lattice.entry(frame).or_default().insert((row, col), i);
        }
    }

    let mut raster_tri = |a: usize, b: usize, c: usize| {
        let (Some(va), Some(vb), Some(vc)) = (&verts[a], &verts[b], &verts[c]) else {
            return;
        };
        for (p, q) in [(va, vb), (vb, vc), (vc, va)] {
            let ratio = p.depth.max(q.depth) / p.depth.min(q.depth);
            if ratio > EDGE_DEPTH_RATIO {
                return;
            }
        }
        let area = (vb.x - va.x) * (vc.y - va.y) - (vc.x - va.x) * (vb.y - va.y);
        if area.abs() < 1e-12 {
            return;
        }
        let x_min = va.x.min(vb.x).min(vc.x).ceil().max(0.0) as usize;
        let x_max = va.x.max(vb.x).max(vc.x).floor().min((w - 1) as f64);
        let y_min = va.y.min(vb.y).min(vc.y).ceil().max(0.0) as usize;
        let y_max = va.y.max(vb.y).max(vc.y).floor().min((h - 1) as f64);
        if x_max < x_min as f64 || y_max < y_min as f64 {
            return;
        }
        for py in y_min..=y_max as usize {
            for px in x_min..=x_max as usize {
                let (x, y) = (px as f64, py as f64);
                let w0 = ((vb.x - va.x) * (y - va.y) - (x - va.x) * (vb.y - va.y)) / area;
                let w1 = ((x - va.x) * (vc.y - va.y) - (vc.x - va.x) * (y - va.y)) / area;
                let w2 = 1.0 - w0 - w1;
                // Barycentric coordinates: (w2, w1, w0) weight (a, b, c).
                if w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9 {
                    continue;
                }
                // Perspective-correct interpolation in 1/z.
                let inv_z = w2 / va.depth + w1 / vb.depth + w0 / vc.depth;
                let depth = 1.0 / inv_z;
                let idx = py * w + px;
                if depth >= zbuf[idx] {
                    continue;
                }
                zbuf[idx] = depth;
                for ch in 0..3 {
                    let val = (w2 * va.color[ch] / va.depth
                        + w1 * vb.color[ch] / vb.depth
                        + w0 * vc.color[ch] / vc.depth)
                        * depth;
                    rgb.data_mut()[idx * 3 + ch] = val as f32;
                }
                mask.data_mut()[idx] = 1.0;
            }
        }
    };

    for grid in lattice.values() {
        let mut quads: Vec<(&(u32, u32), &usize)> = grid.iter().collect();
        quads.sort();
        for (&(row, col), &i00) in quads {
            let (Some(&i10), Some(&i01), Some(&i11)) = (
                grid.get(&(row, col + 1)),
                grid.get(&(row + 1, col)),
                grid.get(&(row + 1, col + 1)),
            ) else {
                continue;
            };
            raster_tri(i00, i10, i11);
            raster_tri(i00, i11, i01);
        }
    }

    Ok((rgb, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamic::{TargetCloud, TargetPoint};
    use crate::geometry::Point3;
    use nalgebra::{Matrix3, Matrix4};

    fn camera(size: u32, focal: f64) -> CameraModel {
        let mut k = Matrix3::identity();
        k[(0, 0)] = focal;
        k[(1, 1)] = focal;
        k[(0, 2)] = (size / 2) as f64;
        k[(1, 2)] = (size / 2) as f64;
        CameraModel::new(k, Matrix4::identity(), size, size).unwrap()
    }

    fn gridded(pos: Point3, row: u32, col: u32, depth_frame: usize) -> TargetPoint {
        TargetPoint {
            position: pos,
            color: [0.5, 0.6, 0.7],
            grid: Some(GridIndex {
                frame: depth_frame,
                row,
                col,
            }),
        }
    }

    #[test]
    fn fronto_parallel_quad_covers_its_footprint() {
        let cam = camera(32, 16.0);
        // Quad from (-0.5,-0.5) to (0.5,0.5) at z=1: projects to the
        // square [8,24] x [8,24] around the principal point (16,16).
        let cloud = TargetCloud {
            points: vec![
                gridded(Point3::new(-0.5, -0.5, 1.0), 0, 0, 0),
                gridded(Point3::new(0.5, -0.5, 1.0), 0, 1, 0),
                gridded(Point3::new(-0.5, 0.5, 1.0), 1, 0, 0),
                gridded(Point3::new(0.5, 0.5, 1.0), 1, 1, 0),
            ],
        };
        let (rgb, mask) = render_mesh(&cloud, &cam).unwrap();
        assert_eq!(mask.get(16, 16, 0), 1.0);
        assert_eq!(mask.get(8, 8, 0), 1.0);
        assert_eq!(mask.get(24, 24, 0), 1.0);
        assert_eq!(mask.get(7, 16, 0), 0.0);
        assert_eq!(mask.get(25, 16, 0), 0.0);
        let px = rgb.pixel(16, 16);
        assert!((px[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn depth_discontinuity_discards_both_triangles() {
        let cam = camera(32, 16.0);
        // Right edge of the quad sits at twice the depth.
        let cloud = TargetCloud {
            points: vec![
                gridded(Point3::new(-0.5, -0.5, 1.0), 0, 0, 0),
                gridded(Point3::new(0.5, -0.5, 2.0), 0, 1, 0),
                gridded(Point3::new(-0.5, 0.5, 1.0), 1, 0, 0),
                gridded(Point3::new(0.5, 0.5, 2.0), 1, 1, 0),
            ],
        };
        let (_, mask) = render_mesh(&cloud, &cam).unwrap();
        assert!(mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slight_depth_slope_survives_ratio_rule() {
        let cam = camera(32, 16.0);
        // 4% depth gap across the quad stays below the 1.05 cutoff.
        let cloud = TargetCloud {
            points: vec![
                gridded(Point3::new(-0.5, -0.5, 1.0), 0, 0, 0),
                gridded(Point3::new(0.5, -0.5, 1.04), 0, 1, 0),
                gridded(Point3::new(-0.5, 0.5, 1.0), 1, 0, 0),
                gridded(Point3::new(0.5, 0.5, 1.04), 1, 1, 0),
            ],
        };
        let (_, mask) = render_mesh(&cloud, &cam).unwrap();
        assert!(mask.data().iter().any(|&v| v == 1.0));
    }

    #[test]
    fn ungridded_points_are_ignored() {
        let cam = camera(16, 8.0);
        let cloud = TargetCloud {
            points: vec![TargetPoint {
                position: Point3::new(0.0, 0.0, 1.0),
                color: [1.0; 3],
                grid: None,
            }],
        };
        let (_, mask) = render_mesh(&cloud, &cam).unwrap();
        assert!(mask.data().iter().all(|&v| v == 0.0));
    }
}
