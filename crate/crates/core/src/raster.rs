//! Dense H x W x C float rasters with clamp-to-edge bilinear sampling.

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

/// Row-major H x W x C raster of f32 samples, top-left origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    data: Vec<f32>,
    width: usize,
    height: usize,
    channels: usize,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument(
                "raster dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            data: vec![0.0; width * height * channels],
            width,
            height,
            channels,
        })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "raster payload has {} samples, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument(
                "raster dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            data,
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    /// Bilinear sample at `u` into `out` (one value per channel).
    /// Coordinates outside [0, W-1] x [0, H-1] clamp to the border.
    pub fn sample_into(&self, u: PixelCoord, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        let x = u.x.clamp(0.0, (self.width - 1) as f64);
        let y = u.y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        for c in 0..self.channels {
            let v00 = self.get(x0, y0, c) as f64;
            let v10 = self.get(x1, y0, c) as f64;
            let v01 = self.get(x0, y1, c) as f64;
            let v11 = self.get(x1, y1, c) as f64;
            out[c] = v00 * (1.0 - fx) * (1.0 - fy)
                + v10 * fx * (1.0 - fy)
                + v01 * (1.0 - fx) * fy
                + v11 * fx * fy;
        }
    }

    /// Bilinear sample of channel `c`.
    pub fn sample_channel(&self, u: PixelCoord, c: usize) -> f64 {
        let x = u.x.clamp(0.0, (self.width - 1) as f64);
        let y = u.y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        self.get(x0, y0, c) as f64 * (1.0 - fx) * (1.0 - fy)
            + self.get(x1, y0, c) as f64 * fx * (1.0 - fy)
            + self.get(x0, y1, c) as f64 * (1.0 - fx) * fy
            + self.get(x1, y1, c) as f64 * fx * fy
    }

    /// Convenience for 3-channel rasters.
    pub fn sample_rgb(&self, u: PixelCoord) -> [f64; 3] {
        let mut out = [0.0; 3];
        self.sample_into(u, &mut out);
        out
    }
}

/// Bilinear interpolation entry point matching the module surface; rejects
/// empty rasters by construction of [`Raster`].
pub fn interpolate_bilinear(raster: &Raster, u: PixelCoord) -> Vec<f64> {
    let mut out = vec![0.0; raster.channels()];
    raster.sample_into(u, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_by_two() -> Raster {
        Raster::from_vec(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn lattice_point_is_exact() {
        let r = two_by_two();
        assert_eq!(interpolate_bilinear(&r, PixelCoord::new(0.0, 0.0)), vec![0.0]);
        assert_eq!(interpolate_bilinear(&r, PixelCoord::new(1.0, 1.0)), vec![3.0]);
    }

    #[test]
    fn symmetric_average_at_center() {
        let r = two_by_two();
        assert_eq!(
            interpolate_bilinear(&r, PixelCoord::new(0.5, 0.5)),
            vec![1.5]
        );
    }

    #[test]
    fn clamps_to_border() {
        let r = two_by_two();
        // (-5, 0.5) clamps to (0, 0.5): halfway between 0 and 2.
        assert_eq!(
            interpolate_bilinear(&r, PixelCoord::new(-5.0, 0.5)),
            vec![1.0]
        );
    }

    #[test]
    fn empty_raster_rejected() {
        assert!(Raster::new(0, 4, 1).is_err());
        assert!(Raster::from_vec(2, 2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn exact_on_affine_rasters() {
        // f(x, y) = 0.25 + 0.5 x - 0.125 y is reproduced exactly anywhere
        // inside the domain.
        let (w, h) = (7, 5);
        let mut r = Raster::new(w, h, 1).unwrap();
        let f = |x: f64, y: f64| 0.25 + 0.5 * x - 0.125 * y;
        for y in 0..h {
            for x in 0..w {
                r.set(x, y, 0, f(x as f64, y as f64) as f32);
            }
        }
        for &(x, y) in &[(0.3, 0.7), (3.9, 2.2), (5.999, 3.999), (0.0, 4.0)] {
            let got = r.sample_channel(PixelCoord::new(x, y), 0);
            assert_relative_eq!(got, f(x, y), epsilon = 1e-6);
        }
    }
}
