//! Pinhole camera model, lifting/projection, and raster interpolation.
//!
//! Conventions used everywhere in this crate:
//! - extrinsics are stored world-to-camera;
//! - depth means camera-frame z, not ray length;
//! - the center of the pixel at column c, row r is the continuous
//!   coordinate (c, r), so the interpolation domain is
//!   [0, W-1] x [0, H-1] with clamp-to-edge outside.

use nalgebra::{Matrix3, Matrix4, Point3 as NaPoint3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = NaPoint3<f64>;

/// Continuous pixel coordinate (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Result of projecting a world point into a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Point in front of the camera: pixel coordinate and camera-z depth.
    InFront { pixel: PixelCoord, depth: f64 },
    /// Camera-z depth is <= 0; a distinguished outcome, not an error.
    Behind { depth: f64 },
}

impl Projection {
    pub fn in_front(&self) -> Option<(PixelCoord, f64)> {
        match *self {
            Projection::InFront { pixel, depth } => Some((pixel, depth)),
            Projection::Behind { .. } => None,
        }
    }
}

/// Pinhole camera: upper-triangular intrinsics plus a rigid
/// world-to-camera transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    intrinsics: Matrix3<f64>,
    intrinsics_inv: Matrix3<f64>,
    world_to_cam: Matrix4<f64>,
    cam_to_world: Matrix4<f64>,
    width: u32,
    height: u32,
}

const ROTATION_TOL: f64 = 1e-6;

impl CameraModel {
    pub fn new(
        intrinsics: Matrix3<f64>,
        world_to_cam: Matrix4<f64>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "camera dimensions must be positive".into(),
            ));
        }
        if !intrinsics.iter().all(|v| v.is_finite()) || !world_to_cam.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "camera matrices must be finite".into(),
            ));
        }
        let bottom = intrinsics.row(2);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 1.0 {
            return Err(Error::InvalidArgument(
                "intrinsics bottom row must be (0, 0, 1)".into(),
            ));
        }
        if intrinsics[(1, 0)] != 0.0 {
            return Err(Error::InvalidArgument(
                "intrinsics must be upper-triangular".into(),
            ));
        }
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(Error::InvalidArgument("fx and fy must be positive".into()));
        }
        let rot = world_to_cam.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho = rot * rot.transpose() - Matrix3::identity();
        if ortho.iter().any(|v| v.abs() > ROTATION_TOL) {
            return Err(Error::InvalidArgument(
                "extrinsics rotation block is not orthonormal".into(),
            ));
        }
        if (rot.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidArgument(
                "extrinsics rotation block must have determinant 1".into(),
            ));
        }
        let last = world_to_cam.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::InvalidArgument(
                "extrinsics bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("intrinsics not invertible".into()))?;
        // Rigid inverse: [R^T | -R^T t].
        let t = world_to_cam.fixed_view::<3, 1>(0, 3).into_owned();
        let rt = rot.transpose();
        let mut cam_to_world = Matrix4::identity();
        cam_to_world.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        cam_to_world
            .fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&(-(rt * t)));
        Ok(Self {
            intrinsics,
            intrinsics_inv,
            world_to_cam,
            cam_to_world,
            width,
            height,
        })
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn world_to_cam(&self) -> &Matrix4<f64> {
        &self.world_to_cam
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Same intrinsics, orientation, and image size, moved to a new center.
    pub fn with_center(&self, center: Point3) -> Result<Self> {
        let rot = self.world_to_cam.fixed_view::<3, 3>(0, 0).into_owned();
        let mut e = self.world_to_cam;
        e.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&(-(rot * center.coords)));
        Self::new(self.intrinsics, e, self.width, self.height)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        let c = self.cam_to_world.fixed_view::<3, 1>(0, 3);
        Point3::new(c[0], c[1], c[2])
    }

    /// World-space direction of the ray through pixel `u`, scaled so that
    /// advancing by `1.0 * dir` increases camera-z depth by exactly 1.
    pub fn ray_direction(&self, u: PixelCoord) -> Vector3<f64> {
        let d_cam = self.intrinsics_inv * Vector3::new(u.x, u.y, 1.0);
        // z component of d_cam is 1 by construction of K.
        let rot = self.cam_to_world.fixed_view::<3, 3>(0, 0);
        rot * d_cam
    }

    /// Lifts pixel `u` at camera-z `depth` to a world point.
    pub fn lift(&self, u: PixelCoord, depth: f64) -> Result<Point3> {
        if !u.is_finite() || !depth.is_finite() {
            return Err(Error::InvalidArgument("lift: non-finite input".into()));
        }
        if depth <= 0.0 {
            return Err(Error::InvalidArgument("lift: depth must be positive".into()));
        }
        let x_cam = self.intrinsics_inv * Vector3::new(u.x, u.y, 1.0) * depth;
        let rot = self.world_to_cam.fixed_view::<3, 3>(0, 0);
        let t = self.world_to_cam.fixed_view::<3, 1>(0, 3);
        let x_world = rot.transpose() * (x_cam - t);
        Ok(Point3::new(x_world[0], x_world[1], x_world[2]))
    }

    /// Projects a world point; behind-camera points are a distinguished result.
    pub fn project(&self, x: &Point3) -> Projection {
        let rot = self.world_to_cam.fixed_view::<3, 3>(0, 0);
        let t = self.world_to_cam.fixed_view::<3, 1>(0, 3);
        let x_cam = rot * x.coords + t;
        let depth = x_cam[2];
        if depth <= 0.0 {
            return Projection::Behind { depth };
        }
        let h = self.intrinsics * x_cam;
        Projection::InFront {
            pixel: PixelCoord::new(h[0] / h[2], h[1] / h[2]),
            depth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn identity_camera() -> CameraModel {
        CameraModel::new(Matrix3::identity(), Matrix4::identity(), 64, 64).unwrap()
    }

    pub(crate) fn random_camera(rng: &mut ChaCha8Rng) -> CameraModel {
        let fx = rng.random_range(50.0..500.0);
        let fy = rng.random_range(50.0..500.0);
        let cx = rng.random_range(10.0..200.0);
        let cy = rng.random_range(10.0..200.0);
        let skew = rng.random_range(-0.5..0.5);
        let mut k = Matrix3::identity();
        k[(0, 0)] = fx;
        k[(1, 1)] = fy;
        k[(0, 2)] = cx;
        k[(1, 2)] = cy;
        k[(0, 1)] = skew;
        // Random rotation from three axis rotations.
        let rot = nalgebra::Rotation3::from_euler_angles(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let mut e = Matrix4::identity();
        e.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        e[(0, 3)] = rng.random_range(-5.0..5.0);
        e[(1, 3)] = rng.random_range(-5.0..5.0);
        e[(2, 3)] = rng.random_range(-5.0..5.0);
        CameraModel::new(k, e, 256, 256).unwrap()
    }

    #[test]
    fn lift_identity_camera() {
        let cam = identity_camera();
        let p = cam.lift(PixelCoord::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn lift_principal_point_ray() {
        let mut k = Matrix3::identity();
        k[(0, 0)] = 100.0;
        k[(1, 1)] = 100.0;
        k[(0, 2)] = 50.0;
        k[(1, 2)] = 50.0;
        let cam = CameraModel::new(k, Matrix4::identity(), 100, 100).unwrap();
        let p = cam.lift(PixelCoord::new(50.0, 50.0), 2.0).unwrap();
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lift_matches_homogeneous_matrix_oracle() {
        // Independent oracle: full 4x4 homogeneous chain
        // X = E^{-1} * [depth * K^{-1} * (u, 1); 1] evaluated in exact order.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let cam = random_camera(&mut rng);
            let u = PixelCoord::new(rng.random_range(0.0..256.0), rng.random_range(0.0..256.0));
            let depth = rng.random_range(0.1..50.0);
            let got = cam.lift(u, depth).unwrap();

            let k_inv = cam.intrinsics().try_inverse().unwrap();
            let x_cam = k_inv * Vector3::new(u.x, u.y, 1.0) * depth;
            let e_inv = cam.world_to_cam().try_inverse().unwrap();
            let h = e_inv * nalgebra::Vector4::new(x_cam[0], x_cam[1], x_cam[2], 1.0);
            assert_relative_eq!(got.x, h[0] / h[3], epsilon = 1e-9);
            assert_relative_eq!(got.y, h[1] / h[3], epsilon = 1e-9);
            assert_relative_eq!(got.z, h[2] / h[3], epsilon = 1e-9);
        }
    }

    #[test]
    fn project_identity() {
        let cam = identity_camera();
        let (pix, depth) = cam
            .project(&Point3::new(0.0, 0.0, 1.0))
            .in_front()
            .unwrap();
        assert_eq!((pix.x, pix.y, depth), (0.0, 0.0, 1.0));
    }

    #[test]
    fn project_behind_camera() {
        let cam = identity_camera();
        assert!(matches!(
            cam.project(&Point3::new(0.0, 0.0, -1.0)),
            Projection::Behind { .. }
        ));
    }

    #[test]
    fn round_trip_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let cam = random_camera(&mut rng);
            let u = PixelCoord::new(rng.random_range(0.0..256.0), rng.random_range(0.0..256.0));
            let depth = rng.random_range(0.05..100.0);
            let x = cam.lift(u, depth).unwrap();
            let (pix, d) = cam.project(&x).in_front().unwrap();
            assert!((pix.x - u.x).abs() < 1e-4 && (pix.y - u.y).abs() < 1e-4);
            assert!(((d - depth) / depth).abs() < 1e-6);
        }
    }

    #[test]
    fn lift_linear_in_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let cam = random_camera(&mut rng);
            let u = PixelCoord::new(rng.random_range(0.0..256.0), rng.random_range(0.0..256.0));
            let d = rng.random_range(0.1..10.0);
            let c = cam.center();
            let a = cam.lift(u, d).unwrap() - c;
            let b = cam.lift(u, 2.0 * d).unwrap() - c;
            for i in 0..3 {
                assert_relative_eq!(b[i], 2.0 * a[i], max_relative = 1e-9, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_rotation() {
        let mut e = Matrix4::identity();
        e[(0, 0)] = 2.0;
        assert!(CameraModel::new(Matrix3::identity(), e, 4, 4).is_err());
    }

    #[test]
    fn rejects_nonfinite_lift_input() {
        let cam = identity_camera();
        assert!(cam.lift(PixelCoord::new(f64::NAN, 0.0), 1.0).is_err());
        assert!(cam.lift(PixelCoord::new(0.0, 0.0), -1.0).is_err());
    }
}
