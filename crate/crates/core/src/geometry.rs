//! Pinhole camera model and geometry derived from depth images.

use nalgebra::{Point3, Vector3};

use crate::image::{neighbor, to_array, BoundaryMap, DepthImage, NormalMap};
use crate::{Error, Result};

/// Pinhole intrinsics. No lens distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.check()?;
        Ok(k)
    }

    /// Centered principal point and a horizontal field of view in degrees.
    pub fn with_fov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
        CameraIntrinsics {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Domain(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::Domain(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Unnormalised ray through pixel `(u, v)`, with unit z-component.
    pub fn ray_direction(&self, u: usize, v: usize) -> Result<Vector3<f64>> {
        self.check_pixel(u, v)?;
        Ok(self.ray(u, v))
    }

    /// Point at depth `depth` (its z-coordinate) along the ray of `(u, v)`.
    pub fn back_project(&self, u: usize, v: usize, depth: f64) -> Result<Point3<f64>> {
        self.check_pixel(u, v)?;
        if !(depth > 0.0) {
            return Err(Error::Domain(format!("depth must be positive, got {depth}")));
        }
        Ok(Point3::from(self.ray(u, v) * depth))
    }

    pub(crate) fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new(
            (u as f64 - self.cx) / self.fx,
            (v as f64 - self.cy) / self.fy,
            1.0,
        )
    }

    pub(crate) fn ray_at(&self, index: usize) -> Vector3<f64> {
        self.ray(index % self.width, index / self.width)
    }

    fn check_pixel(&self, u: usize, v: usize) -> Result<()> {
        if u < self.width && v < self.height {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            })
        }
    }
}

/// Flips `n` so that it faces back along `ray`.
pub(crate) fn face_camera(n: Vector3<f64>, ray: &Vector3<f64>) -> Vector3<f64> {
    if n.dot(ray) > 0.0 {
        -n
    } else {
        n
    }
}

/// Normals from the cross product of image-axis tangents of the
/// back-projected surface.
///
/// Tangents use central differences, falling back to one-sided differences
/// where a neighbour is missing. A pixel with no usable neighbour along `u`
/// or along `v` gets [`NormalMap::INVALID`].
pub fn normals_from_depth(depth: &DepthImage, k: &CameraIntrinsics) -> NormalMap {
    let (w, h) = depth.dims();
    let point = |u: usize, v: usize| -> Option<Vector3<f64>> {
        let d = depth.get(u, v)?;
        (d.is_finite() && d > 0.0).then(|| k.ray(u, v) * d)
    };
    // Difference along one axis: central if possible, else one-sided.
    let tangent = |u: usize, v: usize, du: isize, dv: isize| -> Option<Vector3<f64>> {
        let centre = point(u, v)?;
        let fwd = neighbor(u, v, (du, dv), w, h).and_then(|(a, b)| point(a, b));
        let bwd = neighbor(u, v, (-du, -dv), w, h).and_then(|(a, b)| point(a, b));
        match (bwd, fwd) {
            (Some(b), Some(f)) => Some((f - b) * 0.5),
            (None, Some(f)) => Some(f - centre),
            (Some(b), None) => Some(centre - b),
            (None, None) => None,
        }
    };

    let mut data = vec![NormalMap::INVALID; w * h];
    for v in 0..h {
        for u in 0..w {
            let (Some(tu), Some(tv)) = (tangent(u, v, 1, 0), tangent(u, v, 0, 1)) else {
                continue;
            };
            let n = tu.cross(&tv);
            let norm = n.norm();
            if norm > 0.0 && norm.is_finite() {
                data[v * w + u] = to_array(&face_camera(n / norm, &k.ray(u, v)));
            }
        }
    }
    NormalMap::new(w, h, data).expect("dimensions match by construction")
}

/// Marks pixels with a depth jump above `jump_threshold` metres to any valid
/// 4-neighbour.
pub fn boundaries_from_depth(depth: &DepthImage, jump_threshold: f64) -> Result<BoundaryMap> {
    if !(jump_threshold > 0.0) {
        return Err(Error::Domain(format!(
            "jump threshold must be positive, got {jump_threshold}"
        )));
    }
    let (w, h) = depth.dims();
    let mut data = vec![0.0f64; w * h];
    for v in 0..h {
        for u in 0..w {
            let Some(dp) = depth.get(u, v) else { continue };
            // Right and down cover every unordered pair once.
            for (du, dv) in [(1, 0), (0, 1)] {
                let Some((qu, qv)) = neighbor(u, v, (du, dv), w, h) else { continue };
                let Some(dq) = depth.get(qu, qv) else { continue };
                if (dp - dq).abs() > jump_threshold {
                    data[v * w + u] = 1.0;
                    data[qv * w + qu] = 1.0;
                }
            }
        }
    }
    BoundaryMap::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn identity(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, w, h).unwrap()
    }

    #[test]
    fn ray_examples() {
        let k = CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 5, 5).unwrap();
        assert_eq!(k.ray_direction(2, 2).unwrap(), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(k.ray_direction(4, 2).unwrap(), Vector3::new(0.02, 0.0, 1.0));
        assert_eq!(identity(2, 1).ray_direction(1, 0).unwrap(), Vector3::new(1.0, 0.0, 1.0));
        assert!(matches!(k.ray_direction(5, 0), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn back_project_examples() {
        let k = CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 5, 5).unwrap();
        assert_eq!(k.back_project(2, 2, 3.0).unwrap(), Point3::new(0.0, 0.0, 3.0));
        assert_eq!(k.back_project(4, 2, 2.0).unwrap(), Point3::new(0.04, 0.0, 2.0));
        assert_eq!(identity(2, 1).back_project(1, 0, 2.0).unwrap(), Point3::new(2.0, 0.0, 2.0));
        assert!(matches!(k.back_project(0, 0, 0.0), Err(Error::Domain(_))));
        assert!(k.back_project(0, 0, -1.0).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.9, 3.9, 4, 4).is_ok());
    }

    #[test]
    fn fronto_parallel_normals() {
        let k = CameraIntrinsics::with_fov(8, 6, 60.0);
        let n = normals_from_depth(&DepthImage::filled(8, 6, 2.0), &k);
        for i in 0..48 {
            let v = n.normal(i).unwrap();
            assert_relative_eq!(v, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-7);
        }
    }

    #[test]
    fn slanted_plane_normals() {
        // Plane x + z = 4 seen through identity intrinsics: depth = 4 / (1 + u).
        let k = identity(6, 6);
        let depth = DepthImage::from_fn(6, 6, |u, _| Some(4.0 / (1.0 + u as f64)));
        let n = normals_from_depth(&depth, &k);
        let expected = Vector3::new(-1.0, 0.0, -1.0) / 2f64.sqrt();
        for v in 1..5 {
            for u in 1..5 {
                assert_relative_eq!(n.normal(v * 6 + u).unwrap(), expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn single_pixel_has_no_normal() {
        let n = normals_from_depth(&DepthImage::filled(1, 1, 1.0), &identity(1, 1));
        assert_eq!(n.raw(0), NormalMap::INVALID);
    }

    #[test]
    fn isolated_pixel_has_no_normal() {
        let depth = DepthImage::filled(3, 3, 1.0).masked(|i| i != 3 && i != 5);
        let n = normals_from_depth(&depth, &CameraIntrinsics::with_fov(3, 3, 60.0));
        assert!(n.normal(4).is_none());
        assert!(n.normal(1).is_some());
    }

    #[test]
    fn step_boundaries() {
        let depth = DepthImage::from_fn(4, 4, |u, _| Some(if u < 2 { 1.0 } else { 3.0 }));
        let b = boundaries_from_depth(&depth, 0.1).unwrap();
        for v in 0..4 {
            for u in 0..4 {
                let expected = if u == 1 || u == 2 { 1.0 } else { 0.0 };
                assert_eq!(b.data()[v * 4 + u], expected, "pixel ({u},{v})");
            }
        }
        assert_eq!(boundaries_from_depth(&depth, 5.0).unwrap().count_above(0.0), 0);
        let flat = DepthImage::filled(4, 4, 2.0);
        assert_eq!(boundaries_from_depth(&flat, 0.1).unwrap().count_above(0.0), 0);
        assert!(boundaries_from_depth(&flat, 0.0).is_err());
    }

    #[test]
    fn jumps_to_invalid_pixels_are_ignored() {
        let depth = DepthImage::new(2, 1, vec![1.0, 9.0], vec![true, false]).unwrap();
        assert_eq!(boundaries_from_depth(&depth, 0.1).unwrap().count_above(0.0), 0);
    }

    proptest! {
        #[test]
        fn back_project_keeps_depth_and_scales(
            u in 0usize..64, v in 0usize..48, d in 0.01f64..100.0, alpha in 0.1f64..10.0
        ) {
            let k = CameraIntrinsics::with_fov(64, 48, 70.0);
            let p = k.back_project(u, v, d).unwrap();
            prop_assert_eq!(p.z, d);
            let q = k.back_project(u, v, alpha * d).unwrap();
            for i in 0..3 {
                prop_assert!((q[i] - alpha * p[i]).abs() <= 1e-12 * q[i].abs().max(1.0));
            }
        }
    }
}
