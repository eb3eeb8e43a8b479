//! Analytic test scene: a textured background plane plus a textured square
//! translating at constant velocity in front of it, viewed by a camera
//! sliding along the x axis. Depths, flows, masks, and ground-truth renders
//! at arbitrary poses and times are all exact closed forms, which makes the
//! scene usable as a verification oracle for the full pipeline.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Point3};
use crate::raster::Raster;
use crate::scene_io::{
    save_scene, write_mask_png, write_rgb_png, FlowField, FrameBundle, Scene,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub width: u32,
    pub height: u32,
    pub n_frames: usize,
    /// Background plane depth (camera z, world units).
    pub z_bg: f64,
    /// Foreground square depth; must be closer than the background.
    pub z_fg: f64,
    /// Square edge length in world units.
    pub square_size: f64,
    /// Square center (world x, y) at time 0.
    pub square_center: [f64; 2],
    /// Square velocity in world units per frame-time.
    pub velocity: [f64; 2],
    /// Camera x translation per frame.
    pub baseline: f64,
    pub texture_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            n_frames: 8,
            z_bg: 6.0,
            z_fg: 3.0,
            square_size: 1.2,
            square_center: [0.35, 0.0],
            // Deliberately not baseline/2: with z_fg = z_bg/2 that ratio
            // keeps the square's disocclusion band hidden in every source
            // frame, leaving permanently unobserved background.
            velocity: [0.03, 0.02],
            baseline: 0.1,
            texture_seed: 7,
        }
    }
}

/// World-unit extent of one background texture cell.
const BG_CELL: f64 = 1.0;
/// Square-local extent of one foreground texture cell.
const FG_CELL: f64 = 0.5;
/// Padding (in pixels) around the square's footprint inside which flow
/// rasters carry the square's motion. It keeps bilinear flow lookups just
/// past the footprint edge consistent with the square layer, so cycle
/// checks on dynamic pixels are exact.
const FLOW_DILATION_PX: f64 = 1.0;

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::InvalidArgument(
                "synthetic scene needs at least 2 frames".into(),
            ));
        }
        if !(self.z_fg > 0.0 && self.z_fg < self.z_bg) {
            return Err(Error::InvalidArgument(format!(
                "foreground depth {} must sit in front of background depth {}",
                self.z_fg, self.z_bg
            )));
        }
        if self.square_size <= 0.0 || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "square size and image dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    fn focal(&self) -> f64 {
        0.75 * self.width as f64
    }

    fn principal(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    fn intrinsics(&self) -> Matrix3<f64> {
        let f = self.focal();
        let (px, py) = self.principal();
        Matrix3::new(f, 0.0, px, 0.0, f, py, 0.0, 0.0, 1.0)
    }

    /// Axis-aligned camera (identity rotation, looking down +z) at `center`.
    pub fn camera_at(&self, center: Point3) -> Result<CameraModel> {
        let mut e = Matrix4::identity();
        e[(0, 3)] = -center.x;
        e[(1, 3)] = -center.y;
        e[(2, 3)] = -center.z;
        CameraModel::new(self.intrinsics(), e, self.width, self.height)
    }

    pub fn source_center(&self, index: usize) -> Point3 {
        Point3::new(index as f64 * self.baseline, 0.0, 0.0)
    }

    pub fn source_camera(&self, index: usize) -> Result<CameraModel> {
        self.camera_at(self.source_center(index))
    }

    pub fn square_center_at(&self, t: f64) -> [f64; 2] {
        [
            self.square_center[0] + self.velocity[0] * t,
            self.square_center[1] + self.velocity[1] * t,
        ]
    }

    /// World-space square bounds (x0, y0, x1, y1) at time `t`.
    pub fn square_rect(&self, t: f64) -> [f64; 4] {
        let c = self.square_center_at(t);
        let h = self.square_size / 2.0;
        [c[0] - h, c[1] - h, c[0] + h, c[1] + h]
    }

    fn channel_noise(&self, seed_offset: u64, x: f64, y: f64, cell: f64) -> f64 {
        // Amplitude keeps the foreground/background palettes close enough
        // that the outlier filter's inherent one-to-three-pixel boundary
        // trim on the dynamic cloud stays photometrically small.
        0.3 + 0.45 * value_noise(self.texture_seed.wrapping_add(seed_offset), x / cell, y / cell)
    }

    /// Background color at world (x, y) on the background plane.
    pub fn background_color(&self, x: f64, y: f64) -> [f64; 3] {
        [
            self.channel_noise(0, x, y, BG_CELL),
            self.channel_noise(1, x, y, BG_CELL),
            self.channel_noise(2, x, y, BG_CELL),
        ]
    }

    /// Square color in square-local coordinates (the texture rides along).
    pub fn square_color(&self, lx: f64, ly: f64) -> [f64; 3] {
        [
            self.channel_noise(100, lx, ly, FG_CELL),
            self.channel_noise(101, lx, ly, FG_CELL),
            self.channel_noise(102, lx, ly, FG_CELL),
        ]
    }

    /// Exact render from an axis-aligned camera at `center`, time `t`:
    /// RGB, depth, and the dynamic (square footprint) mask.
    pub fn render_ground_truth(&self, center: Point3, t: f64) -> Result<(Raster, Raster, Raster)> {
        self.validate()?;
        let (w, h) = (self.width as usize, self.height as usize);
        let f = self.focal();
        let (ppx, ppy) = self.principal();
        let rect = self.square_rect(t);
        let c = self.square_center_at(t);
        let mut rgb = Raster::new(w, h, 3)?;
        let mut depth = Raster::new(w, h, 1)?;
        let mut mask = Raster::new(w, h, 1)?;
        for y in 0..h {
            for x in 0..w {
                // Ray through the pixel hits the foreground plane here.
                let fx = center.x + (self.z_fg - center.z) * (x as f64 - ppx) / f;
                let fy = center.y + (self.z_fg - center.z) * (y as f64 - ppy) / f;
                let (color, d, m);
                if fx >= rect[0] && fx <= rect[2] && fy >= rect[1] && fy <= rect[3] {
                    color = self.square_color(fx - c[0], fy - c[1]);
                    d = self.z_fg - center.z;
                    m = 1.0;
                } else {
                    let bx = center.x + (self.z_bg - center.z) * (x as f64 - ppx) / f;
                    let by = center.y + (self.z_bg - center.z) * (y as f64 - ppy) / f;
                    color = self.background_color(bx, by);
                    d = self.z_bg - center.z;
                    m = 0.0;
                }
                for ch in 0..3 {
                    rgb.set(x, y, ch, color[ch] as f32);
                }
                depth.set(x, y, 0, d as f32);
                mask.set(x, y, 0, m);
            }
        }
        Ok((rgb, depth, mask))
    }

    /// Exact optical flow raster from the view at (`center_i`, `t_i`) to the
    /// view at (`center_j`, `t_j`). Flows are constant per layer; pixels in
    /// the (slightly dilated) square footprint carry the square's motion.
    pub fn flow_raster(
        &self,
        center_i: Point3,
        t_i: f64,
        center_j: Point3,
        t_j: f64,
    ) -> Result<Raster> {
        let (w, h) = (self.width as usize, self.height as usize);
        let f = self.focal();
        let (ppx, ppy) = self.principal();
        let dt = t_j - t_i;
        let dc = center_j - center_i;
        let sq = [
            f * (self.velocity[0] * dt - dc.x) / (self.z_fg - center_i.z),
            f * (self.velocity[1] * dt - dc.y) / (self.z_fg - center_i.z),
        ];
        let bg = [
            f * (-dc.x) / (self.z_bg - center_i.z),
            f * (-dc.y) / (self.z_bg - center_i.z),
        ];
        // Square footprint in source pixels, dilated by one pixel.
        let rect = self.square_rect(t_i);
        let zi = self.z_fg - center_i.z;
        let px0 = f * (rect[0] - center_i.x) / zi + ppx - FLOW_DILATION_PX;
        let py0 = f * (rect[1] - center_i.y) / zi + ppy - FLOW_DILATION_PX;
        let px1 = f * (rect[2] - center_i.x) / zi + ppx + FLOW_DILATION_PX;
        let py1 = f * (rect[3] - center_i.y) / zi + ppy + FLOW_DILATION_PX;
        let mut flow = Raster::new(w, h, 2)?;
        for y in 0..h {
            for x in 0..w {
                let on_square = (x as f64) >= px0
                    && (x as f64) <= px1
                    && (y as f64) >= py0
                    && (y as f64) <= py1;
                let v = if on_square { sq } else { bg };
                flow.set(x, y, 0, v[0] as f32);
                flow.set(x, y, 1, v[1] as f32);
            }
        }
        Ok(flow)
    }

    /// Builds the full in-memory scene: frames at integer times plus
    /// forward/backward flows between adjacent frames.
    pub fn build_scene(&self) -> Result<Scene> {
        self.validate()?;
        let mut frames = Vec::with_capacity(self.n_frames);
        for i in 0..self.n_frames {
            let center = self.source_center(i);
            let t = i as f64;
            let (image, depth, dynamic_mask) = self.render_ground_truth(center, t)?;
            frames.push(FrameBundle {
                image,
                depth,
                dynamic_mask,
                camera: self.camera_at(center)?,
                time: t,
            });
        }
        let mut flows = std::collections::HashMap::new();
        for i in 0..self.n_frames - 1 {
            let (ci, cj) = (self.source_center(i), self.source_center(i + 1));
            let (ti, tj) = (i as f64, (i + 1) as f64);
            flows.insert(
                (i, i + 1),
                FlowField {
                    source_index: i,
                    target_index: i + 1,
                    flow: self.flow_raster(ci, ti, cj, tj)?,
                },
            );
            flows.insert(
                (i + 1, i),
                FlowField {
                    source_index: i + 1,
                    target_index: i,
                    flow: self.flow_raster(cj, tj, ci, ti)?,
                },
            );
        }
        Ok(Scene {
            frames,
            flows,
            tracks: None,
            segments: None,
        })
    }

    /// Held-out evaluation targets: a novel pose at the central intermediate
    /// time, and frame 1's exact pose/time for near-identity checks.
    pub fn default_targets(&self) -> Vec<(Point3, f64)> {
        let t_mid = (self.n_frames - 1) as f64 / 2.0;
        let held_out = Point3::new(
            t_mid * self.baseline + 0.3 * self.baseline,
            0.02,
            0.0,
        );
        vec![(held_out, t_mid), (self.source_center(1), 1.0)]
    }
}

#[derive(Serialize, Deserialize)]
struct TargetRecord {
    time: f64,
    position: [f64; 3],
}

/// Writes the scene bundle to `dir`, plus ground-truth renders for the
/// default held-out targets under `dir/gt`.
pub fn gen_synthetic(cfg: &SyntheticConfig, dir: &Path) -> Result<()> {
    let scene = cfg.build_scene()?;
    save_scene(&scene, dir)?;
    let gt_dir = dir.join("gt");
    fs::create_dir_all(&gt_dir)?;
    let targets = cfg.default_targets();
    let records: Vec<TargetRecord> = targets
        .iter()
        .map(|(p, t)| TargetRecord {
            time: *t,
            position: [p.x, p.y, p.z],
        })
        .collect();
    fs::write(
        gt_dir.join("targets.json"),
        serde_json::to_string_pretty(&records)?,
    )?;
    for (i, (pos, t)) in targets.iter().enumerate() {
        let (rgb, _, mask) = cfg.render_ground_truth(*pos, *t)?;
        write_rgb_png(&gt_dir.join(format!("{i:05}.png")), &rgb)?;
        write_mask_png(&gt_dir.join(format!("mask_{i:05}.png")), &mask)?;
    }
    Ok(())
}

fn hash_lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut h = seed
        ^ (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Band-limited value noise in [0,1]: hashed lattice values blended with a
/// smoothstep kernel; continuous and slowly varying at sub-cell scale.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let tx = smoothstep(x - x0);
    let ty = smoothstep(y - y0);
    let v00 = hash_lattice(seed, ix, iy);
    let v10 = hash_lattice(seed, ix + 1, iy);
    let v01 = hash_lattice(seed, ix, iy + 1);
    let v11 = hash_lattice(seed, ix + 1, iy + 1);
    v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
}
