//! Perspective frusta and the crop frustum fitted around the 4σ gaze cone.
//!
//! The crop is found by intersecting the cutoff cone with the near plane.
//! Rotating the gaze ray by ±φ about `u1 = r × forward` gives the two ends of
//! the ellipse's major axis; rotating about `u2 = r × u1` gives two more
//! points on the cone. The box around the ellipse becomes the `l', r', b', t'`
//! of a new perspective matrix that keeps the original near and far planes.

use nalgebra::{Matrix4, Point3, Quaternion, Vector3};

use super::{Fixation, GazeCone};
use crate::error::{Error, Result};

/// Rays whose z-component is not below this are treated as parallel to the
/// near plane.
const PARALLEL_EPS: f64 = 1e-9;

/// Near-plane rectangle and depth range of a perspective camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frustum {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
    pub near: f64,
    pub far: f64,
}

impl Frustum {
    pub fn new(left: f64, right: f64, bottom: f64, top: f64, near: f64, far: f64) -> Result<Self> {
        let f = Self {
            left,
            right,
            bottom,
            top,
            near,
            far,
        };
        f.validate()?;
        Ok(f)
    }

    /// Frustum centred on the optical axis with the given half-extents on the
    /// near plane.
    pub fn symmetric(half_width: f64, half_height: f64, near: f64, far: f64) -> Result<Self> {
        Self::new(-half_width, half_width, -half_height, half_height, near, far)
    }

    /// Symmetric frustum from a vertical field of view (radians) and aspect
    /// ratio (width / height).
    pub fn from_fov(fov_y: f64, aspect: f64, near: f64, far: f64) -> Result<Self> {
        let h = near * (fov_y / 2.0).tan();
        Self::symmetric(h * aspect, h, near, far)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.left, self.right, self.bottom, self.top, self.near, self.far]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidFrustum(format!("non-finite parameter in {self:?}")));
        }
        if !(self.left < self.right) {
            return Err(Error::InvalidFrustum(format!("left {} >= right {}", self.left, self.right)));
        }
        if !(self.bottom < self.top) {
            return Err(Error::InvalidFrustum(format!("bottom {} >= top {}", self.bottom, self.top)));
        }
        if !(self.near > 0.0 && self.far > self.near) {
            return Err(Error::InvalidFrustum(format!(
                "need 0 < near < far, got near {} far {}",
                self.near, self.far
            )));
        }
        Ok(())
    }

    /// OpenGL-style perspective matrix (column-vector convention), mapping
    /// the frustum to the `[-1, 1]³` cube.
    pub fn projection_matrix(&self) -> Matrix4<f64> {
        let Self {
            left: l,
            right: r,
            bottom: b,
            top: t,
            near: n,
            far: f,
        } = *self;
        Matrix4::new(
            2.0 * n / (r - l), 0.0, (r + l) / (r - l), 0.0,
            0.0, 2.0 * n / (t - b), (t + b) / (t - b), 0.0,
            0.0, 0.0, -(f + n) / (f - n), -2.0 * f * n / (f - n),
            0.0, 0.0, -1.0, 0.0,
        )
    }

    /// Recovers the six parameters from a matrix built by
    /// [`Frustum::projection_matrix`].
    pub fn from_projection_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let (m00, m02, m11, m12, m22, m23) = (m[(0, 0)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)], m[(2, 3)]);
        let near = m23 / (m22 - 1.0);
        let far = m23 / (m22 + 1.0);
        let width = 2.0 * near / m00;
        let height = 2.0 * near / m11;
        let (sum_x, sum_y) = (m02 * width, m12 * height);
        Self::new(
            (sum_x - width) / 2.0,
            (sum_x + width) / 2.0,
            (sum_y - height) / 2.0,
            (sum_y + height) / 2.0,
            near,
            far,
        )
    }
}

/// Intersection of the 4σ cone with the near plane `z = -n`.
///
/// `gaze_hit` is where the central gaze ray meets the plane and `center` is
/// the centre of the ellipse. The two coincide only for a gaze along the
/// optical axis: for a tilted gaze the far side of the cone is stretched more
/// than the near side, so the centre moves away from the optical axis.
/// `a0`/`a1` are the major-axis vertices, `b0`/`b1` the intersections of the
/// gaze ray rotated by ±φ across the major axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseParams {
    pub gaze_hit: Point3<f64>,
    pub center: Point3<f64>,
    pub major: f64,
    pub minor: f64,
    /// Angle between the camera's right vector and the major axis,
    /// in `[0, π]`.
    pub inclination: f64,
    pub a0: Point3<f64>,
    pub a1: Point3<f64>,
    pub b0: Point3<f64>,
    pub b1: Point3<f64>,
    pub near: f64,
}

/// Rotates `v` by `angle` about the unit `axis` as `q v q⁻¹`.
fn rotate(v: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = (angle / 2.0).sin_cos();
    let q = Quaternion::from_parts(c, axis * s);
    (q * Quaternion::from_imag(*v) * q.conjugate()).imag()
}

/// Intersection of the ray from the camera origin along `v` with `z = -n`.
fn hit_near_plane(v: &Vector3<f64>, n: f64) -> Point3<f64> {
    let t = -n / v.z;
    Point3::new(t * v.x, t * v.y, -n)
}

/// Fits the ellipse cut by the cone's 4σ cutoff on the near plane at
/// distance `near`.
///
/// Fails with [`Error::GazeOutsideFrustum`] when part of the cone does not
/// reach the near plane (the section is then not a bounded ellipse).
pub fn ellipse_intersection(gaze_dir: &Vector3<f64>, near: f64, cone: &GazeCone) -> Result<EllipseParams> {
    let r = gaze_dir.normalize();
    let forward = Vector3::new(0.0, 0.0, -1.0);
    let phi = cone.phi();

    let u1 = {
        let c = r.cross(&forward);
        // Gaze along the optical axis: every axis perpendicular to it works.
        if c.norm() < 1e-12 {
            Vector3::y()
        } else {
            c.normalize()
        }
    };
    let u2 = r.cross(&u1).normalize();

    let a0 = rotate(&r, &u1, -phi);
    let a1 = rotate(&r, &u1, phi);
    let b0 = rotate(&r, &u2, -phi);
    let b1 = rotate(&r, &u2, phi);
    if [r, a0, a1, b0, b1].iter().any(|v| !(v.z < -PARALLEL_EPS)) {
        return Err(Error::GazeOutsideFrustum);
    }

    let gaze_hit = hit_near_plane(&r, near);
    let (pa0, pa1) = (hit_near_plane(&a0, near), hit_near_plane(&a1, near));
    let (pb0, pb1) = (hit_near_plane(&b0, near), hit_near_plane(&b1, near));

    let major = (pa1 - pa0).norm() / 2.0;
    let center = nalgebra::center(&pa0, &pa1);

    // Plane section of a circular cone: eccentricity sin β / cos φ with β the
    // angle between the cone axis and the plane normal.
    let cos_beta = (-r.z).clamp(-1.0, 1.0);
    let sin_beta = (1.0 - cos_beta * cos_beta).max(0.0).sqrt();
    let e = sin_beta / phi.cos();
    let minor = major * (1.0 - e * e).max(0.0).sqrt();

    let me = Vector3::new(gaze_hit.x, gaze_hit.y, 0.0);
    let inclination = if me.norm() < 1e-15 {
        0.0
    } else {
        (me.x / me.norm()).clamp(-1.0, 1.0).acos()
    };

    Ok(EllipseParams {
        gaze_hit,
        center,
        major,
        minor,
        inclination,
        a0: pa0,
        a1: pa1,
        b0: pb0,
        b1: pb1,
        near,
    })
}

/// Axis-aligned near-plane rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropBounds {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl CropBounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.left && x <= self.right && y >= self.bottom && y <= self.top
    }
}

/// Bounding box of an inclined ellipse: half-extents
/// `sqrt(a²cos²α + b²sin²α)` along x and `sqrt(a²sin²α + b²cos²α)` along y.
pub fn crop_bounds(e: &EllipseParams) -> CropBounds {
    let (s, c) = e.inclination.sin_cos();
    let (a2, b2) = (e.major * e.major, e.minor * e.minor);
    let hx = (a2 * c * c + b2 * s * s).sqrt();
    let hy = (a2 * s * s + b2 * c * c).sqrt();
    CropBounds {
        left: e.center.x - hx,
        right: e.center.x + hx,
        bottom: e.center.y - hy,
        top: e.center.y + hy,
    }
}

/// Perspective matrix of the cropped frustum.
pub fn crop_projection_matrix(bounds: &CropBounds, near: f64, far: f64) -> Result<Matrix4<f64>> {
    Ok(Frustum::new(bounds.left, bounds.right, bounds.bottom, bounds.top, near, far)?.projection_matrix())
}

/// Frustum cropped to one fixation's 4σ cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropFrustum {
    pub frustum: Frustum,
    pub ellipse: EllipseParams,
    pub projection: Matrix4<f64>,
}

impl CropFrustum {
    pub fn new(fixation: &Fixation, cone: &GazeCone) -> Result<Self> {
        let near = fixation.frustum.near;
        let ellipse = ellipse_intersection(&fixation.gaze_dir, near, cone)?;
        let b = crop_bounds(&ellipse);
        let frustum = Frustum::new(b.left, b.right, b.bottom, b.top, near, fixation.frustum.far)?;
        Ok(Self {
            frustum,
            ellipse,
            projection: frustum.projection_matrix(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        a.cross(b).norm().atan2(a.dot(b))
    }

    fn random_gaze(rng: &mut impl Rng, max_tilt: f64) -> Vector3<f64> {
        let tilt = rng.gen_range(0.0..max_tilt);
        let az = rng.gen_range(0.0..std::f64::consts::TAU);
        Vector3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), -tilt.cos())
    }

    #[test]
    fn central_gaze_is_a_circle() {
        let cone = GazeCone::new(0.05).unwrap();
        let e = ellipse_intersection(&Vector3::new(0.0, 0.0, -1.0), 0.1, &cone).unwrap();
        assert_relative_eq!(e.gaze_hit, Point3::new(0.0, 0.0, -0.1), epsilon = 1e-15);
        assert_relative_eq!(e.center, e.gaze_hit, epsilon = 1e-15);
        assert_relative_eq!(e.major, 0.020_016_683_350_215_517, epsilon = 1e-12);
        assert_relative_eq!(e.minor, e.major, epsilon = 1e-15);
    }

    #[test]
    fn horizontal_tilt_is_axis_aligned() {
        let cone = GazeCone::new(0.05).unwrap();
        for sign in [1.0, -1.0] {
            let g = Vector3::new(sign * 0.4, 0.0, -1.0).normalize();
            let e = ellipse_intersection(&g, 0.1, &cone).unwrap();
            let expected = if sign > 0.0 { 0.0 } else { std::f64::consts::PI };
            assert_relative_eq!(e.inclination, expected, epsilon = 1e-12);
            assert!(e.major >= e.minor);
            for p in [e.gaze_hit, e.center, e.a0, e.a1, e.b0, e.b1] {
                assert_relative_eq!(p.z, -0.1, epsilon = 1e-12);
            }
            // Major-axis vertices on the x-axis, the other pair mirrored in y.
            assert_relative_eq!(e.a0.y, 0.0, epsilon = 1e-15);
            assert_relative_eq!(e.a1.y, 0.0, epsilon = 1e-15);
            assert_relative_eq!(e.b0.y, -e.b1.y, epsilon = 1e-15);
            assert_relative_eq!(e.b0.x, e.b1.x, epsilon = 1e-15);
        }
    }

    #[test]
    fn corner_points_subtend_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let cone = GazeCone::new(rng.gen_range(0.002..0.15)).unwrap();
            let g = random_gaze(&mut rng, 1.2 - cone.phi());
            let e = ellipse_intersection(&g, rng.gen_range(0.01..1.0), &cone).unwrap();
            for p in [e.a0, e.a1, e.b0, e.b1] {
                assert!((angle(&p.coords, &g) - cone.phi()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ellipse_boundary_lies_on_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let cone = GazeCone::new(rng.gen_range(0.002..0.15)).unwrap();
            let g = random_gaze(&mut rng, 1.2 - cone.phi());
            let n = 0.1;
            let e = ellipse_intersection(&g, n, &cone).unwrap();
            let u = {
                let d = Vector3::new(e.gaze_hit.x, e.gaze_hit.y, 0.0);
                if d.norm() < 1e-12 { Vector3::x() } else { d.normalize() }
            };
            let v = Vector3::new(-u.y, u.x, 0.0);
            for k in 0..64 {
                let t = k as f64 / 64.0 * std::f64::consts::TAU;
                let p = e.center + u * (e.major * t.cos()) + v * (e.minor * t.sin());
                let err = (angle(&p.coords, &g) - cone.phi()).abs();
                assert!(err < 1e-9, "boundary angle error {err}");
            }
        }
    }

    #[test]
    fn near_plane_parallel_cone_is_rejected() {
        let cone = GazeCone::new(0.1).unwrap();
        let g = Vector3::new(1.0, 0.0, -0.05).normalize();
        assert!(matches!(ellipse_intersection(&g, 0.1, &cone), Err(Error::GazeOutsideFrustum)));
        assert!(matches!(
            ellipse_intersection(&Vector3::new(0.0, 0.0, 1.0), 0.1, &cone),
            Err(Error::GazeOutsideFrustum)
        ));
    }

    #[test]
    fn bounds_examples() {
        let mut e = ellipse_intersection(&Vector3::new(0.0, 0.0, -1.0), 1.0, &GazeCone::new(0.1).unwrap()).unwrap();
        e.center = Point3::new(0.0, 0.0, -1.0);
        e.major = 2.0;
        e.minor = 1.0;
        e.inclination = 0.0;
        let b = crop_bounds(&e);
        assert_eq!((b.left, b.right, b.bottom, b.top), (-2.0, 2.0, -1.0, 1.0));

        e.center = Point3::new(0.3, -0.2, -1.0);
        e.major = 0.5;
        e.minor = 0.5;
        e.inclination = 0.7;
        let b = crop_bounds(&e);
        assert_relative_eq!(b.left, -0.2, epsilon = 1e-15);
        assert_relative_eq!(b.right, 0.8, epsilon = 1e-15);
        assert_relative_eq!(b.bottom, -0.7, epsilon = 1e-15);
        assert_relative_eq!(b.top, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn bounds_contain_ellipse_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let cone = GazeCone::new(rng.gen_range(0.002..0.15)).unwrap();
            let g = random_gaze(&mut rng, 1.2 - cone.phi());
            let e = ellipse_intersection(&g, 0.1, &cone).unwrap();
            let b = crop_bounds(&e);
            let slack = 1e-12 * (1.0 + e.major);
            for p in [e.gaze_hit, e.center, e.a0, e.a1, e.b0, e.b1] {
                assert!(
                    p.x >= b.left - slack && p.x <= b.right + slack && p.y >= b.bottom - slack && p.y <= b.top + slack,
                    "{p} outside {b:?}"
                );
            }
        }
    }

    #[test]
    fn matrix_form_and_roundtrip() {
        let f = Frustum::symmetric(0.2, 0.1, 0.1, 50.0).unwrap();
        let m = f.projection_matrix();
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
        assert_eq!(m[(3, 2)], -1.0);

        let f = Frustum::new(-0.013, 0.041, 0.002, 0.037, 0.1, 100.0).unwrap();
        let back = Frustum::from_projection_matrix(&f.projection_matrix()).unwrap();
        for (x, y) in [
            (f.left, back.left),
            (f.right, back.right),
            (f.bottom, back.bottom),
            (f.top, back.top),
            (f.near, back.near),
            (f.far, back.far),
        ] {
            assert_relative_eq!(x, y, max_relative = 1e-9);
        }
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let b = CropBounds {
            left: 0.1,
            right: 0.1,
            bottom: -1.0,
            top: 1.0,
        };
        assert!(matches!(crop_projection_matrix(&b, 0.1, 10.0), Err(Error::InvalidFrustum(_))));
        let b = CropBounds {
            left: -0.1,
            right: 0.1,
            bottom: -1.0,
            top: 1.0,
        };
        assert!(crop_projection_matrix(&b, 0.0, 10.0).is_err());
        assert!(crop_projection_matrix(&b, 1.0, 0.5).is_err());
    }

    #[test]
    fn ellipse_center_maps_to_ndc_origin() {
        let cone = GazeCone::new(0.03).unwrap();
        for g in [Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.3, -0.2, -1.0).normalize()] {
            let e = ellipse_intersection(&g, 0.1, &cone).unwrap();
            let m = crop_projection_matrix(&crop_bounds(&e), 0.1, 20.0).unwrap();
            let clip = m * Vector4::new(e.center.x, e.center.y, e.center.z, 1.0);
            let ndc = clip.xyz() / clip.w;
            assert_relative_eq!(ndc, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
        }
    }
}
