//! Streaming refinement of per-frame dynamic masks.
//!
//! A running accumulator counts, per pixel, how many earlier frames
//! classified the tracked content as dynamic. The accumulator is warped
//! into each new frame with optical flow (backward sampling with the
//! i -> i-1 flow), normalized into [0,1], thresholded, ANDed with the raw
//! mask, optionally fused with class-agnostic segments, and then updated
//! with the final mask.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::raster::Raster;
use crate::scene_io::{FlowField, LabelMap};

/// Running count of dynamic classifications per tracked pixel.
#[derive(Debug, Clone)]
pub struct MaskHistory {
    pub accumulator: Raster,
    pub frame_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct MaskConfig {
    /// History ratio threshold (delta), default 0.5.
    pub history_threshold: f64,
    /// Segment-area overlap fraction required for inclusion, default 0.10.
    pub segment_overlap: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            history_threshold: 0.5,
            segment_overlap: 0.10,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("history_threshold", self.history_threshold),
            ("segment_overlap", self.segment_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be in [0,1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Warps the history accumulator into frame i by sampling it at
/// `u + flow_{i -> i-1}(u)` for every pixel u of frame i.
pub fn warp_history(prev: &MaskHistory, flow_to_prev: &FlowField) -> Result<Raster> {
    let acc = &prev.accumulator;
    if flow_to_prev.flow.width() != acc.width() || flow_to_prev.flow.height() != acc.height() {
        return Err(Error::DimensionMismatch(format!(
            "flow is {}x{}, accumulator is {}x{}",
            flow_to_prev.flow.width(),
            flow_to_prev.flow.height(),
            acc.width(),
            acc.height()
        )));
    }
    let mut out = Raster::new(acc.width(), acc.height(), 1)?;
    for y in 0..acc.height() {
        for x in 0..acc.width() {
            let u = PixelCoord::new(x as f64, y as f64);
            let d = flow_to_prev.sample(u);
            let v = acc.sample_channel(PixelCoord::new(u.x + d[0], u.y + d[1]), 0);
            out.set(x, y, 0, v as f32);
        }
    }
    Ok(out)
}

/// Includes every segment whose mask overlap fraction strictly exceeds
/// `overlap`; the output is a union of whole segments.
pub fn fuse_segments(mask: &Raster, segment_map: &LabelMap, overlap: f64) -> Result<Raster> {
    if mask.width() != segment_map.width || mask.height() != segment_map.height {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, segment map is {}x{}",
            mask.width(),
            mask.height(),
            segment_map.width,
            segment_map.height
        )));
    }
    let mut area: HashMap<u16, (usize, usize)> = HashMap::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let entry = area.entry(segment_map.get(x, y)).or_insert((0, 0));
            entry.0 += 1;
            if mask.get(x, y, 0) > 0.0 {
                entry.1 += 1;
            }
        }
    }
    let mut out = Raster::new(mask.width(), mask.height(), 1)?;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let (total, dynamic) = area[&segment_map.get(x, y)];
            let included = dynamic as f64 > overlap * total as f64;
            out.set(x, y, 0, included as u8 as f32);
        }
    }
    Ok(out)
}

/// Streaming mask propagation across all frames.
///
/// `flows` must provide the i -> i-1 field for every i >= 1.
pub fn propagate_masks(
    raw_masks: &[Raster],
    flows: &HashMap<(usize, usize), FlowField>,
    segments: Option<&[LabelMap]>,
    cfg: &MaskConfig,
) -> Result<Vec<Raster>> {
    cfg.validate()?;
    if raw_masks.is_empty() {
        return Ok(Vec::new());
    }
    let mut refined = Vec::with_capacity(raw_masks.len());
    let mut history: Option<MaskHistory> = None;

    for (i, raw) in raw_masks.iter().enumerate() {
        let mask = if i == 0 {
            raw.clone()
        } else {
            let prev = history.as_ref().unwrap();
            let flow = flows
                .get(&(i, i - 1))
                .ok_or(Error::MissingFlow {
                    from_frame: i,
                    to_frame: i - 1,
                })?;
            let warped = warp_history(prev, flow)?;
            // The normalizer (i-1) is undefined at i=1; use the raw count there.
            let denom = (i - 1).max(1) as f32;
            let mut m = raw.clone();
            for (out, w) in m.data_mut().iter_mut().zip(warped.data()) {
                let keep = (*w / denom) as f64 >= cfg.history_threshold;
                *out = if *out > 0.0 && keep { 1.0 } else { 0.0 };
            }
            m
        };

        let final_mask = match segments {
            Some(maps) => fuse_segments(&mask, &maps[i], cfg.segment_overlap)?,
            None => mask,
        };

        let acc = match history.take() {
            None => final_mask.clone(),
            Some(mut h) => {
                for (a, m) in h.accumulator.data_mut().iter_mut().zip(final_mask.data()) {
                    *a += m;
                }
                h.accumulator
            }
        };
        history = Some(MaskHistory {
            accumulator: acc,
            frame_count: i + 1,
        });
        refined.push(final_mask);
    }
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(values: &[&[u8]]) -> Raster {
        let h = values.len();
        let w = values[0].len();
        let data: Vec<f32> = values
            .iter()
            .flat_map(|row| row.iter().map(|&v| v as f32))
            .collect();
        Raster::from_vec(w, h, 1, data).unwrap()
    }

    fn constant_flow(w: usize, h: usize, dx: f32, dy: f32, source: usize, target: usize) -> FlowField {
        let mut data = Vec::with_capacity(w * h * 2);
        for _ in 0..w * h {
            data.push(dx);
            data.push(dy);
        }
        FlowField {
            source_index: source,
            target_index: target,
            flow: Raster::from_vec(w, h, 2, data).unwrap(),
        }
    }

    fn zero_flows(n: usize, w: usize, h: usize) -> HashMap<(usize, usize), FlowField> {
        let mut flows = HashMap::new();
        for i in 1..n {
            flows.insert((i, i - 1), constant_flow(w, h, 0.0, 0.0, i, i - 1));
        }
        flows
    }

    #[test]
    fn identity_warp_with_zero_flow() {
        let acc = mask_from(&[&[1, 0, 1], &[0, 1, 0]]);
        let history = MaskHistory {
            accumulator: acc.clone(),
            frame_count: 1,
        };
        let flow = constant_flow(3, 2, 0.0, 0.0, 1, 0);
        assert_eq!(warp_history(&history, &flow).unwrap(), acc);
    }

    #[test]
    fn integer_shift_translates_accumulator() {
        // flow i -> i-1 of +1 column means pixel (x, y) reads prev at x+1,
        // shifting content one column to the left (border clamps).
        let acc = mask_from(&[&[0, 1, 0, 0]]);
        let history = MaskHistory {
            accumulator: acc,
            frame_count: 1,
        };
        let flow = constant_flow(4, 1, 1.0, 0.0, 1, 0);
        let warped = warp_history(&history, &flow).unwrap();
        assert_eq!(warped.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_flow_matches_per_pixel_interpolation_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (w, h) = (9, 7);
        let acc = Raster::from_vec(
            w,
            h,
            1,
            (0..w * h).map(|_| rng.random_range(0.0..4.0)).collect(),
        )
        .unwrap();
        let flow_data: Vec<f32> = (0..w * h * 2)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let flow = FlowField {
            source_index: 1,
            target_index: 0,
            flow: Raster::from_vec(w, h, 2, flow_data).unwrap(),
        };
        let history = MaskHistory {
            accumulator: acc.clone(),
            frame_count: 4,
        };
        let warped = warp_history(&history, &flow).unwrap();
        for y in 0..h {
            for x in 0..w {
                let u = PixelCoord::new(x as f64, y as f64);
                let d = flow.sample(u);
                let expect =
                    crate::raster::interpolate_bilinear(&acc, PixelCoord::new(u.x + d[0], u.y + d[1]))[0];
                assert!((warped.get(x, y, 0) as f64 - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_frame_is_base_case() {
        let raw = vec![mask_from(&[&[1, 0], &[0, 1]])];
        let refined = propagate_masks(&raw, &HashMap::new(), None, &MaskConfig::default()).unwrap();
        assert_eq!(refined[0], raw[0]);
    }

    #[test]
    fn and_semantics_cannot_add_pixels() {
        // Object detected in frames 0 and 1 but missing from raw mask 2:
        // frame 2 stays zero on that region.
        let on = mask_from(&[&[1]]);
        let off = mask_from(&[&[0]]);
        let raw = vec![on.clone(), on, off];
        let refined =
            propagate_masks(&raw, &zero_flows(3, 1, 1), None, &MaskConfig::default()).unwrap();
        assert_eq!(refined[2].data(), &[0.0]);
    }

    #[test]
    fn history_ratio_threshold_rule() {
        // Pixel 0: dynamic in 2 of 4 prior frames (ratio 0.5) -> retained.
        // Pixel 1: dynamic in 1 of 4 (ratio 0.25) -> suppressed.
        let raw = vec![
            mask_from(&[&[1, 1]]),
            mask_from(&[&[1, 0]]),
            mask_from(&[&[0, 0]]),
            mask_from(&[&[0, 0]]),
            mask_from(&[&[1, 1]]),
        ];
        let refined =
            propagate_masks(&raw, &zero_flows(5, 2, 1), None, &MaskConfig::default()).unwrap();
        assert_eq!(refined[4].data(), &[1.0, 0.0]);
    }

    #[test]
    fn constant_masks_with_identity_flow_are_fixed_point() {
        let raw: Vec<Raster> = (0..5).map(|_| mask_from(&[&[1, 0], &[1, 1]])).collect();
        let refined =
            propagate_masks(&raw, &zero_flows(5, 2, 2), None, &MaskConfig::default()).unwrap();
        for (r, raw) in refined.iter().zip(&raw) {
            assert_eq!(r, raw);
        }
    }

    #[test]
    fn accumulator_bound_holds() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (w, h, n) = (6, 5, 7);
        let raw: Vec<Raster> = (0..n)
            .map(|_| {
                Raster::from_vec(
                    w,
                    h,
                    1,
                    (0..w * h)
                        .map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let flows = zero_flows(n, w, h);
        // Re-run the streaming loop, checking the bound after each frame.
        let mut history: Option<MaskHistory> = None;
        for i in 0..n {
            let refined = propagate_masks(&raw[..=i], &flows, None, &MaskConfig::default()).unwrap();
            let acc = refined.iter().fold(
                Raster::new(w, h, 1).unwrap(),
                |mut acc, m| {
                    for (a, v) in acc.data_mut().iter_mut().zip(m.data()) {
                        *a += v;
                    }
                    acc
                },
            );
            for &v in acc.data() {
                assert!(v >= 0.0 && v <= (i + 1) as f32);
            }
            history = Some(MaskHistory {
                accumulator: acc,
                frame_count: i + 1,
            });
        }
        assert!(history.is_some());
    }

    #[test]
    fn missing_flow_is_an_error() {
        let raw = vec![mask_from(&[&[1]]), mask_from(&[&[1]])];
        let err = propagate_masks(&raw, &HashMap::new(), None, &MaskConfig::default());
        assert!(matches!(err, Err(Error::MissingFlow { from_frame: 1, to_frame: 0 })));
    }

    #[test]
    fn segment_fully_inside_mask_is_included() {
        let mask = mask_from(&[&[1, 1, 0, 0]]);
        let map = LabelMap {
            width: 4,
            height: 1,
            labels: vec![7, 7, 3, 3],
        };
        let fused = fuse_segments(&mask, &map, 0.10).unwrap();
        assert_eq!(fused.data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn segment_overlap_boundary_is_strict() {
        // One 100-pixel segment; 10 mask pixels = exactly 10% -> excluded,
        // 11 -> included.
        let map = LabelMap {
            width: 100,
            height: 1,
            labels: vec![1; 100],
        };
        for (count, expect) in [(10usize, 0.0f32), (11, 1.0)] {
            let mut data = vec![0.0f32; 100];
            for v in data.iter_mut().take(count) {
                *v = 1.0;
            }
            let mask = Raster::from_vec(100, 1, 1, data).unwrap();
            let fused = fuse_segments(&mask, &map, 0.10).unwrap();
            assert_eq!(fused.get(50, 0, 0), expect);
        }
    }

    #[test]
    fn empty_mask_yields_empty_fusion() {
        let mask = mask_from(&[&[0, 0], &[0, 0]]);
        let map = LabelMap {
            width: 2,
            height: 2,
            labels: vec![1, 1, 2, 2],
        };
        let fused = fuse_segments(&mask, &map, 0.10).unwrap();
        assert!(fused.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fusion_output_is_union_of_whole_segments() {
        let mask = mask_from(&[&[1, 0, 0, 0]]);
        let map = LabelMap {
            width: 4,
            height: 1,
            labels: vec![5, 5, 9, 9],
        };
        let fused = fuse_segments(&mask, &map, 0.10).unwrap();
        // Label 5 is half-dynamic: whole segment in. Label 9: whole segment out.
        assert_eq!(fused.data(), &[1.0, 1.0, 0.0, 0.0]);
    }
}
