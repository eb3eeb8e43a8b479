//! Compositing of the static and dynamic branches plus image-quality
//! metrics (PSNR, SSIM) and the scene-mean-of-frame-means aggregation.

use crate::error::{Error, Result};
use crate::raster::Raster;

/// PSNR reported for identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

/// A composited target view.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub rgb: Raster,
    /// 1 where the dynamic branch was used.
    pub dyn_mask: Raster,
    /// 1 where neither branch covered the pixel (background color shown).
    pub hole_mask: Raster,
}

/// Per-pixel composition: dynamic pixels take the dynamic color; remaining
/// pixels take the static color where static coverage exists; pixels
/// covered by neither get `background` and are marked as holes.
pub fn blend(
    static_rgb: &Raster,
    static_coverage: &Raster,
    dynamic_rgb: &Raster,
    dyn_mask: &Raster,
    background: [f32; 3],
) -> Result<RenderOutput> {
    let (w, h) = (static_rgb.width(), static_rgb.height());
    for (name, r, c) in [
        ("static rgb", static_rgb, 3),
        ("static coverage", static_coverage, 1),
        ("dynamic rgb", dynamic_rgb, 3),
        ("dynamic mask", dyn_mask, 1),
    ] {
        if r.width() != w || r.height() != h || r.channels() != c {
            return Err(Error::DimensionMismatch(format!(
                "blend: {name} is {}x{}x{}, expected {}x{}x{}",
                r.width(),
                r.height(),
                r.channels(),
                w,
                h,
                c
            )));
        }
    }
    let mut rgb = Raster::new(w, h, 3)?;
    let mut out_dyn = Raster::new(w, h, 1)?;
    let mut holes = Raster::new(w, h, 1)?;
    for y in 0..h {
        for x in 0..w {
            if dyn_mask.get(x, y, 0) > 0.0 {
                out_dyn.set(x, y, 0, 1.0);
                for c in 0..3 {
                    rgb.set(x, y, c, dynamic_rgb.get(x, y, c));
                }
            } else if static_coverage.get(x, y, 0) > 0.0 {
                for c in 0..3 {
                    rgb.set(x, y, c, static_rgb.get(x, y, c));
                }
            } else {
                holes.set(x, y, 0, 1.0);
                for c in 0..3 {
                    rgb.set(x, y, c, background[c]);
                }
            }
        }
    }
    Ok(RenderOutput {
        rgb,
        dyn_mask: out_dyn,
        hole_mask: holes,
    })
}

fn check_same_shape(a: &Raster, b: &Raster) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "metric inputs differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn pixel_selected(mask: Option<&Raster>, coverage: Option<&Raster>, x: usize, y: usize) -> bool {
    mask.map_or(true, |m| m.get(x, y, 0) > 0.0)
        && coverage.map_or(true, |c| c.get(x, y, 0) > 0.0)
}

/// PSNR in dB for images in [0,1]; the MSE runs over all channels of the
/// pixels selected by `mask` AND `coverage` (both optional). Zero MSE
/// reports the 99 dB cap.
pub fn psnr(
    a: &Raster,
    b: &Raster,
    mask: Option<&Raster>,
    coverage: Option<&Raster>,
) -> Result<f64> {
    check_same_shape(a, b)?;
    let mut se = 0.0f64;
    let mut n = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if !pixel_selected(mask, coverage, x, y) {
                continue;
            }
            for c in 0..a.channels() {
                let d = a.get(x, y, c) as f64 - b.get(x, y, c) as f64;
                se += d * d;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "psnr: selection contains no pixels".into(),
        ));
    }
    let mse = se / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        total += *v;
    }
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Per-channel SSIM map over valid (fully interior) 11x11 windows.
/// Returns (map values, map width, map height). Images smaller than the
/// window fall back to one global window with uniform weights.
fn ssim_map(a: &Raster, b: &Raster, channel: usize) -> (Vec<f64>, usize, usize) {
    let (w, h) = (a.width(), a.height());
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        // Single uniform-weight window over the whole image.
        let n = (w * h) as f64;
        let mut mu_a = 0.0;
        let mut mu_b = 0.0;
        for y in 0..h {
            for x in 0..w {
                mu_a += a.get(x, y, channel) as f64;
                mu_b += b.get(x, y, channel) as f64;
            }
        }
        mu_a /= n;
        mu_b /= n;
        let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let da = a.get(x, y, channel) as f64 - mu_a;
                let db = b.get(x, y, channel) as f64 - mu_b;
                var_a += da * da / n;
                var_b += db * db / n;
                cov += da * db / n;
            }
        }
        let v = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        return (vec![v], 1, 1);
    }

    let kernel = gaussian_kernel();
    let half = SSIM_WINDOW / 2;
    let map_w = w - 2 * half;
    let map_h = h - 2 * half;
    let mut map = Vec::with_capacity(map_w * map_h);
    for cy in half..h - half {
        for cx in half..w - half {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let wgt = kernel[dy] * kernel[dx];
                    mu_a += wgt * a.get(cx + dx - half, cy + dy - half, channel) as f64;
                    mu_b += wgt * b.get(cx + dx - half, cy + dy - half, channel) as f64;
                }
            }
            let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let wgt = kernel[dy] * kernel[dx];
                    let da = a.get(cx + dx - half, cy + dy - half, channel) as f64 - mu_a;
                    let db = b.get(cx + dx - half, cy + dy - half, channel) as f64 - mu_b;
                    var_a += wgt * da * da;
                    var_b += wgt * db * db;
                    cov += wgt * da * db;
                }
            }
            map.push(
                ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)),
            );
        }
    }
    (map, map_w, map_h)
}

/// Mean SSIM over channels; the optional mask averages the SSIM map over
/// the mask pixels at the corresponding (interior-offset) locations.
pub fn ssim(a: &Raster, b: &Raster, mask: Option<&Raster>) -> Result<f64> {
    check_same_shape(a, b)?;
    let half = if a.width() >= SSIM_WINDOW && a.height() >= SSIM_WINDOW {
        SSIM_WINDOW / 2
    } else {
        0
    };
    let mut acc = 0.0;
    for channel in 0..a.channels() {
        let (map, map_w, map_h) = ssim_map(a, b, channel);
        let (mut total, mut n) = (0.0, 0usize);
        for my in 0..map_h {
            for mx in 0..map_w {
                let selected = match mask {
                    Some(m) if map_w > 1 => m.get(mx + half, my + half, 0) > 0.0,
                    _ => true,
                };
                if selected {
                    total += map[my * map_w + mx];
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "ssim: mask selects no interior pixels".into(),
            ));
        }
        acc += total / n as f64;
    }
    Ok(acc / a.channels() as f64)
}

/// Metrics of one rendered frame.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FrameMetrics {
    pub psnr_full: f64,
    pub psnr_dynamic: Option<f64>,
    pub psnr_static: Option<f64>,
    pub ssim_full: f64,
}

/// Aggregated report: scene means first, then the unweighted mean of the
/// scene means, so frame-count imbalance does not skew the overall number.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricReport {
    pub scene_psnr: Vec<f64>,
    pub scene_ssim: Vec<f64>,
    pub overall_psnr: f64,
    pub overall_ssim: f64,
}

pub fn aggregate(scenes: &[Vec<FrameMetrics>]) -> Result<MetricReport> {
    if scenes.is_empty() || scenes.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidArgument(
            "aggregate: every scene needs at least one frame".into(),
        ));
    }
    let scene_psnr: Vec<f64> = scenes
        .iter()
        .map(|s| s.iter().map(|f| f.psnr_full).sum::<f64>() / s.len() as f64)
        .collect();
    let scene_ssim: Vec<f64> = scenes
        .iter()
        .map(|s| s.iter().map(|f| f.ssim_full).sum::<f64>() / s.len() as f64)
        .collect();
    Ok(MetricReport {
        overall_psnr: scene_psnr.iter().sum::<f64>() / scene_psnr.len() as f64,
        overall_ssim: scene_ssim.iter().sum::<f64>() / scene_ssim.len() as f64,
        scene_psnr,
        scene_ssim,
    })
}
