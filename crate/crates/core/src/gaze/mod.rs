//! Fixations, the Gaussian gaze cone and the crop frustum fitted to it.
//!
//! Camera convention: right-handed, looking down `-z`, `+x` right, `+y` up.
//! Gaze directions and the `p` vectors fed to [`gaussian_weight`] are in
//! camera space.

mod frustum;
mod log;

pub use frustum::{
    crop_bounds, crop_projection_matrix, ellipse_intersection, CropBounds, CropFrustum,
    EllipseParams, Frustum,
};
pub use log::{format_fixation, parse_fixation_log, parse_fixation_text, TimeWindow, LOG_HEADER};

use std::f64::consts::PI;

use nalgebra::{Matrix4, Point3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::ObjectOverride;

/// Default angular deviation: one degree.
pub const DEFAULT_THETA: f64 = 0.01745;

/// Gaussian gaze cone. `theta` is one standard deviation of angular error;
/// `phi` is the half-angle of the 4σ cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazeCone {
    theta: f64,
    sigma: f64,
    phi: f64,
}

impl GazeCone {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(Error::config("theta", format!("must lie in (0, π/2) radians, got {theta}")));
        }
        let sigma = theta.tan();
        Ok(Self {
            theta,
            sigma,
            phi: (4.0 * sigma).atan(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `tan(phi)`: the largest rejection-to-projection ratio inside the cutoff.
    #[inline]
    pub fn cutoff_slope(&self) -> f64 {
        4.0 * self.sigma
    }

    /// Weight of an on-axis sample for a fixation of duration `t`.
    pub fn peak(&self, t: f64) -> f64 {
        t / (self.sigma * (2.0 * PI).sqrt())
    }
}

/// Gaussian contribution of a point at camera-space offset `p` to a fixation
/// of duration `t` along `gaze_dir`.
///
/// The Gaussian is evaluated on the ratio of the rejection `d2` of `p` from
/// the gaze ray to the cone radius `d = d1·tanθ` at the projection distance
/// `d1`. Points behind the viewpoint (`d1 <= 0`) and points more than 4σ off
/// the ray contribute nothing.
#[inline]
pub fn gaussian_weight(p: &Vector3<f64>, gaze_dir: &Vector3<f64>, t: f64, cone: &GazeCone) -> f64 {
    let d1 = p.dot(gaze_dir);
    if !(d1 > 0.0) {
        return 0.0;
    }
    let d2 = (p - gaze_dir * d1).norm();
    if d2 > cone.cutoff_slope() * d1 {
        return 0.0;
    }
    let sigma = cone.sigma;
    let d = d1 * sigma;
    let sigma_k = if d == 0.0 { 0.0 } else { d2 / d * sigma };
    cone.peak(t) * (-(sigma_k * sigma_k) / (2.0 * sigma * sigma)).exp()
}

/// One recorded fixation with the camera state at the time it occurred.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixation {
    pub start_time: f64,
    pub duration: f64,
    pub camera_position: Point3<f64>,
    pub camera_rotation: UnitQuaternion<f64>,
    pub frustum: Frustum,
    /// Gaze direction in camera space.
    pub gaze_dir: Unit<Vector3<f64>>,
    pub overrides: Vec<ObjectOverride>,
}

impl Fixation {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::config("duration", format!("must be positive, got {}", self.duration)));
        }
        self.frustum.validate()?;
        if !(self.gaze_dir.z < 0.0) {
            return Err(Error::config(
                "gaze_dir",
                "must point into the viewed half-space (negative z)",
            ));
        }
        Ok(())
    }

    /// World-to-camera transform.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let inv_rot = self.camera_rotation.inverse();
        let mut m = inv_rot.to_homogeneous();
        let t = -(inv_rot * self.camera_position.coords);
        m[(0, 3)] = t.x;
        m[(1, 3)] = t.y;
        m[(2, 3)] = t.z;
        m
    }

    pub fn to_camera(&self, world: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.camera_rotation.inverse() * (world - self.camera_position))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cone_parameters() {
        let c = GazeCone::new(0.05).unwrap();
        assert_eq!(c.sigma(), 0.05f64.tan());
        assert_eq!(c.phi(), (4.0 * 0.05f64.tan()).atan());
        assert!(c.phi() > c.theta());
        assert!(GazeCone::new(0.0).is_err());
        assert!(GazeCone::new(PI / 2.0).is_err());
        assert!(GazeCone::new(-0.1).is_err());
    }

    #[test]
    fn on_axis_weight() {
        let c = GazeCone::new(0.05).unwrap();
        let r = Vector3::new(0.0, 0.0, -1.0);
        let w = gaussian_weight(&Vector3::new(0.0, 0.0, -3.0), &r, 1.0, &c);
        // 1 / (tan(0.05) · sqrt(2π))
        assert_relative_eq!(w, 7.972_195_461_585_046, epsilon = 1e-12);
        let w2 = gaussian_weight(&Vector3::new(0.0, 0.0, -3.0), &r, 2.0, &c);
        assert_eq!(w2, 2.0 * w);
    }

    #[test]
    fn one_sigma_weight() {
        let c = GazeCone::new(0.05).unwrap();
        let r = Vector3::new(0.0, 0.0, -1.0);
        let d1 = 2.0;
        let p = Vector3::new(d1 * c.sigma(), 0.0, -d1);
        let on = gaussian_weight(&Vector3::new(0.0, 0.0, -d1), &r, 1.0, &c);
        assert_relative_eq!(gaussian_weight(&p, &r, 1.0, &c), on * (-0.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn cutoff_and_behind() {
        let c = GazeCone::new(0.05).unwrap();
        let r = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(gaussian_weight(&Vector3::new(0.0, 0.0, 1.0), &r, 1.0, &c), 0.0);
        assert_eq!(gaussian_weight(&Vector3::zeros(), &r, 1.0, &c), 0.0);
        let just_out = Vector3::new(c.cutoff_slope() * 1.0001, 0.0, -1.0);
        assert_eq!(gaussian_weight(&just_out, &r, 1.0, &c), 0.0);
        let just_in = Vector3::new(c.cutoff_slope() * 0.9999, 0.0, -1.0);
        assert!(gaussian_weight(&just_in, &r, 1.0, &c) > 0.0);
    }

    #[test]
    fn view_matrix_matches_to_camera() {
        let f = Fixation {
            start_time: 0.0,
            duration: 0.2,
            camera_position: Point3::new(1.0, 1.6, 2.0),
            camera_rotation: UnitQuaternion::from_euler_angles(0.1, -0.4, 0.05),
            frustum: Frustum::symmetric(0.1, 0.1, 0.1, 100.0).unwrap(),
            gaze_dir: Unit::new_normalize(Vector3::new(0.1, 0.0, -1.0)),
            overrides: vec![],
        };
        let w = Point3::new(-0.3, 0.8, -1.5);
        assert_relative_eq!(f.view_matrix().transform_point(&w), f.to_camera(&w), epsilon = 1e-12);
        assert!(f.validate().is_ok());
    }
}
