use nalgebra::{Matrix4, Point3, Vector4};

use super::TriangleRef;
use crate::geometry::Scene;

/// The six planes of a view volume in world space, as `(n, d)` with `n`
/// normalized and the inside where `n·p + d >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrustumPlanes {
    pub planes: [Vector4<f64>; 6],
}

impl FrustumPlanes {
    /// Extracts the planes from a view-projection matrix (left, right,
    /// bottom, top, near, far).
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let row = |i: usize| m.row(i).transpose();
        let (r0, r1, r2, r3) = (row(0), row(1), row(2), row(3));
        let planes = [r3 + r0, r3 - r0, r3 + r1, r3 - r1, r3 + r2, r3 - r2].map(|p| {
            let n = p.xyz().norm();
            if n > 0.0 {
                p / n
            } else {
                p
            }
        });
        Self { planes }
    }

    #[inline]
    pub fn signed_distance(&self, plane: usize, p: &Point3<f64>) -> f64 {
        self.planes[plane].dot(&p.to_homogeneous())
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..6).all(|i| self.signed_distance(i, p) >= 0.0)
    }

    pub fn sphere_may_intersect(&self, center: &Point3<f64>, radius: f64) -> bool {
        (0..6).all(|i| self.signed_distance(i, center) >= -radius)
    }

    /// False only when all three corners lie outside the same plane, in
    /// which case the triangle cannot touch the (convex) frustum.
    pub fn triangle_may_intersect(&self, tri: &[Point3<f64>; 3]) -> bool {
        (0..6).all(|i| tri.iter().any(|p| self.signed_distance(i, p) >= 0.0))
    }
}

/// Conservative triangle culling: keeps every triangle that may intersect
/// the frustum.
pub fn cull_triangles(scene: &Scene, planes: &FrustumPlanes) -> Vec<TriangleRef> {
    let mut out = Vec::new();
    for (oi, o) in scene.objects.iter().enumerate() {
        let world: Vec<Point3<f64>> = o.mesh.positions.iter().map(|p| o.transform.apply_point(p)).collect();
        for (ti, t) in o.mesh.triangles.iter().enumerate() {
            if planes.triangle_may_intersect(&t.map(|i| world[i as usize])) {
                out.push(TriangleRef {
                    object: oi as u32,
                    triangle: ti as u32,
                });
            }
        }
    }
    out
}
