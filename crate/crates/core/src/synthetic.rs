//! Procedural meshes, scenes and fixation sets for tests, benchmarks and
//! demos.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix4, Point3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gaze::{Fixation, Frustum};
use crate::geometry::{Mesh, Scene, SceneObject, Transform};

fn mesh(positions: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Mesh {
    Mesh::new(positions, triangles).expect("procedural mesh is well formed")
}

/// Rectangle in the local xy-plane, centred at the origin, split into
/// `nx × ny` cells of two triangles each.
pub fn grid_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Mesh {
    let (nx, ny) = (nx.max(1), ny.max(1));
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push(Point3::new(
                width * (i as f64 / nx as f64 - 0.5),
                height * (j as f64 / ny as f64 - 0.5),
                0.0,
            ));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    mesh(positions, triangles)
}

/// Square of side `size` in the xy-plane (two triangles).
pub fn quad_mesh(size: f64) -> Mesh {
    grid_mesh(size, size, 1, 1)
}

/// A square facing the default camera at depth `z`.
pub fn quad_object(id: &str, size: f64, z: f64) -> SceneObject {
    SceneObject::new(id, quad_mesh(size), Transform::from_translation(Vector3::new(0.0, 0.0, z)))
}

/// Axis-aligned box centred at the origin (12 triangles).
pub fn box_mesh(sx: f64, sy: f64, sz: f64) -> Mesh {
    let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
    let positions = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -hx } else { hx },
                if i & 2 == 0 { -hy } else { hy },
                if i & 4 == 0 { -hz } else { hz },
            )
        })
        .collect();
    let faces: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let triangles = faces
        .iter()
        .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
        .collect();
    mesh(positions, triangles)
}

pub fn cube_mesh(size: f64) -> Mesh {
    box_mesh(size, size, size)
}

/// Latitude/longitude sphere. `stack_at(i)` maps stack index to polar
/// angle, which lets [`uneven_sphere`] bunch rings together.
fn sphere_with(radius: f64, stacks: usize, slices: usize, stack_at: impl Fn(usize) -> f64, bump: impl Fn(f64, f64) -> f64) -> Mesh {
    let (stacks, slices) = (stacks.max(2), slices.max(3));
    let mut positions = vec![Point3::new(0.0, radius * bump(0.0, 0.0), 0.0)];
    for i in 1..stacks {
        let theta = stack_at(i);
        for j in 0..slices {
            let phi = TAU * j as f64 / slices as f64;
            let r = radius * bump(theta, phi);
            positions.push(Point3::new(r * theta.sin() * phi.cos(), r * theta.cos(), r * theta.sin() * phi.sin()));
        }
    }
    positions.push(Point3::new(0.0, -radius * bump(PI, 0.0), 0.0));
    let south = (positions.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut triangles = Vec::new();
    for j in 0..slices {
        triangles.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            triangles.push([ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)]);
        }
    }
    for j in 0..slices {
        triangles.push([south, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    mesh(positions, triangles)
}

pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> Mesh {
    sphere_with(radius, stacks, slices, |i| PI * i as f64 / stacks as f64, |_, _| 1.0)
}

/// Sphere whose rings crowd towards one pole: tiny triangles on one side,
/// long slivers on the other.
pub fn uneven_sphere(radius: f64, stacks: usize, slices: usize) -> Mesh {
    sphere_with(radius, stacks, slices, |i| PI * (i as f64 / stacks as f64).powi(3), |_, _| 1.0)
}

/// Lumpy sphere standing in for a scanned statue.
pub fn blob(radius: f64, stacks: usize, slices: usize) -> Mesh {
    sphere_with(
        radius,
        stacks,
        slices,
        |i| PI * i as f64 / stacks as f64,
        |t, p| 1.0 + 0.12 * (3.0 * t).sin() * (5.0 * p).cos() + 0.05 * (7.0 * t + 2.0 * p).sin(),
    )
}

pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Mesh {
    let (nu, nv) = (nu.max(3), nv.max(3));
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            positions.push(Point3::new(r * u.cos(), minor * v.sin(), r * u.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    mesh(positions, triangles)
}

fn placed(id: &str, mesh: Mesh, translation: [f64; 3], rotation: UnitQuaternion<f64>) -> SceneObject {
    SceneObject::new(
        id,
        mesh,
        Transform {
            translation: Vector3::from(translation),
            rotation,
            scale: Vector3::new(1.0, 1.0, 1.0),
        },
    )
}

fn rot_x(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle)
}

fn rot_y(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angle)
}

/// Two parallel 10 m squares at 2 m and 4 m in front of the default camera.
pub fn stacked_quads() -> Scene {
    Scene::new(vec![quad_object("front", 10.0, -2.0), quad_object("back", 10.0, -4.0)]).unwrap()
}

/// An open-fronted box around a sphere, with a small cube in front of the
/// sphere. Seen from the origin looking down `-z`.
pub fn sphere_in_box() -> Scene {
    let wall = |id: &str, t: [f64; 3], r: UnitQuaternion<f64>| placed(id, grid_mesh(2.0, 2.0, 8, 8), t, r);
    Scene::new(vec![
        wall("back", [0.0, 0.0, -5.0], UnitQuaternion::identity()),
        wall("floor", [0.0, -1.0, -4.0], rot_x(-PI / 2.0)),
        wall("ceiling", [0.0, 1.0, -4.0], rot_x(PI / 2.0)),
        wall("left", [-1.0, 0.0, -4.0], rot_y(PI / 2.0)),
        wall("right", [1.0, 0.0, -4.0], rot_y(-PI / 2.0)),
        placed("sphere", uv_sphere(0.6, 24, 48), [0.0, 0.0, -4.0], UnitQuaternion::identity()),
        placed("occluder", cube_mesh(0.3), [0.25, 0.2, -3.0], rot_y(0.4)),
    ])
    .unwrap()
}

/// Room with a UV-less lumpy statue, a cube made of six big quads (whose
/// texture atlas would overlap), and a sphere with very uneven triangle
/// sizes.
pub fn challenging_scene() -> Scene {
    Scene::new(vec![
        placed("floor", grid_mesh(3.0, 3.0, 6, 6), [0.0, 0.0, -1.0], rot_x(-PI / 2.0)),
        placed("wall", grid_mesh(3.0, 2.0, 6, 4), [0.0, 1.0, -2.5], UnitQuaternion::identity()),
        placed("statue", blob(0.3, 40, 64), [-0.65, 0.38, -1.3], rot_y(0.3)),
        placed("cube", cube_mesh(0.45), [0.05, 0.225, -0.9], rot_y(0.6)),
        placed("uneven", uneven_sphere(0.28, 36, 48), [0.7, 0.3, -1.5], rot_x(0.5)),
    ])
    .unwrap()
}

/// Desk-scale scene for benchmarking: a room, a desk with a monitor and
/// keyboard, and a clutter of finely tessellated small objects. About 105k
/// triangles; at 15000 samples/m² it carries over a million samples.
pub fn desk_scene() -> Scene {
    let mut objects = vec![
        placed("floor", grid_mesh(4.0, 4.0, 40, 40), [0.0, 0.0, -1.0], rot_x(-PI / 2.0)),
        placed("back_wall", grid_mesh(4.0, 2.5, 40, 25), [0.0, 1.25, -3.0], UnitQuaternion::identity()),
        placed("left_wall", grid_mesh(4.0, 2.5, 40, 25), [-2.0, 1.25, -1.0], rot_y(PI / 2.0)),
        placed("right_wall", grid_mesh(4.0, 2.5, 40, 25), [2.0, 1.25, -1.0], rot_y(-PI / 2.0)),
        placed("desk_top", box_mesh(1.6, 0.04, 0.8), [0.0, 0.73, -1.6], UnitQuaternion::identity()),
        placed("monitor", box_mesh(0.6, 0.36, 0.03), [0.0, 1.05, -1.85], UnitQuaternion::identity()),
        placed("keyboard", grid_mesh(0.45, 0.15, 45, 15), [0.0, 0.752, -1.45], rot_x(-PI / 2.0)),
    ];
    for (i, x) in [-0.7, 0.7].iter().enumerate() {
        for (j, z) in [-1.25, -1.95].iter().enumerate() {
            objects.push(placed(
                &format!("leg_{i}{j}"),
                box_mesh(0.05, 0.71, 0.05),
                [*x, 0.355, *z],
                UnitQuaternion::identity(),
            ));
        }
    }
    let clutter = [
        (-0.55, -1.35, 0.06),
        (-0.4, -1.75, 0.05),
        (0.45, -1.4, 0.07),
        (0.6, -1.8, 0.05),
        (0.3, -1.3, 0.04),
        (-0.25, -1.3, 0.045),
        (0.5, -1.6, 0.035),
        (-0.65, -1.6, 0.055),
    ];
    for (i, (x, z, r)) in clutter.iter().enumerate() {
        objects.push(placed(
            &format!("ball_{i}"),
            uv_sphere(*r, 40, 80),
            [*x, 0.75 + r, *z],
            UnitQuaternion::identity(),
        ));
    }
    objects.push(placed("mug", torus(0.05, 0.02, 150, 100), [-0.2, 0.77, -1.75], rot_x(PI / 2.0)));
    objects.push(placed("statue", blob(0.09, 60, 120), [0.25, 0.84, -1.8], UnitQuaternion::identity()));
    Scene::new(objects).unwrap()
}

/// Camera orientation looking from `eye` towards `target` with `+y` up.
pub fn camera_rotation(eye: &Point3<f64>, target: &Point3<f64>) -> UnitQuaternion<f64> {
    let dir = target - eye;
    UnitQuaternion::face_towards(&-dir, &Vector3::y())
}

/// World-to-camera matrix for a camera at `eye` looking at `target`.
pub fn look_at(eye: &Point3<f64>, target: &Point3<f64>) -> Matrix4<f64> {
    let rot = camera_rotation(eye, target).inverse();
    let mut m = rot.to_homogeneous();
    let t = -(rot * eye.coords);
    m[(0, 3)] = t.x;
    m[(1, 3)] = t.y;
    m[(2, 3)] = t.z;
    m
}

/// A fixation from `eye`, with the head turned towards `look_target` and the
/// gaze landing on `gaze_target`.
pub fn fixation_towards(
    start_time: f64,
    duration: f64,
    eye: Point3<f64>,
    look_target: Point3<f64>,
    gaze_target: Point3<f64>,
    frustum: Frustum,
) -> Fixation {
    let camera_rotation = camera_rotation(&eye, &look_target);
    let gaze = camera_rotation.inverse() * (gaze_target - eye);
    Fixation {
        start_time,
        duration,
        camera_position: eye,
        camera_rotation,
        frustum,
        gaze_dir: Unit::new_normalize(gaze),
        overrides: Vec::new(),
    }
}

/// Parameters for [`random_fixations`].
#[derive(Clone, Debug)]
pub struct FixationSpec {
    pub eye: Point3<f64>,
    /// Uniform jitter of the eye position along each axis, meters.
    pub eye_jitter: f64,
    /// Box the head is turned towards.
    pub look_min: Point3<f64>,
    pub look_max: Point3<f64>,
    /// Largest angle between the head direction and the gaze, radians.
    pub max_gaze_offset: f64,
    pub frustum: Frustum,
}

impl FixationSpec {
    /// Seated viewer in front of [`desk_scene`].
    pub fn desk() -> Self {
        Self {
            eye: Point3::new(0.0, 1.2, -0.6),
            eye_jitter: 0.05,
            look_min: Point3::new(-0.8, 0.7, -2.2),
            look_max: Point3::new(0.8, 1.4, -1.2),
            max_gaze_offset: 0.3,
            frustum: Frustum::from_fov(70f64.to_radians(), 16.0 / 9.0, 0.1, 20.0).unwrap(),
        }
    }

    /// Viewer standing in front of [`challenging_scene`].
    pub fn challenging() -> Self {
        Self {
            eye: Point3::new(0.0, 1.1, 0.9),
            eye_jitter: 0.08,
            look_min: Point3::new(-0.8, 0.1, -1.7),
            look_max: Point3::new(0.8, 0.7, -0.8),
            max_gaze_offset: 0.25,
            frustum: Frustum::from_fov(60f64.to_radians(), 1.2, 0.1, 20.0).unwrap(),
        }
    }
}

/// Deterministic pseudo-random fixations, 0.1–0.5 s each, back to back.
pub fn random_fixations(seed: u64, count: usize, spec: &FixationSpec) -> Vec<Fixation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    (0..count)
        .map(|_| {
            let j = spec.eye_jitter;
            let eye = spec.eye + Vector3::new(rng.gen_range(-j..=j), rng.gen_range(-j..=j), rng.gen_range(-j..=j));
            let look = Point3::new(
                rng.gen_range(spec.look_min.x..=spec.look_max.x),
                rng.gen_range(spec.look_min.y..=spec.look_max.y),
                rng.gen_range(spec.look_min.z..=spec.look_max.z),
            );
            let rot = camera_rotation(&eye, &look);
            let offset = spec.max_gaze_offset * rng.gen::<f64>().sqrt();
            let az = rng.gen_range(0.0..TAU);
            let gaze_cam = Vector3::new(offset.sin() * az.cos(), offset.sin() * az.sin(), -offset.cos());
            let duration = rng.gen_range(0.1..0.5);
            let f = Fixation {
                start_time: t,
                duration,
                camera_position: eye,
                camera_rotation: rot,
                frustum: spec.frustum,
                gaze_dir: Unit::new_normalize(gaze_cam),
                overrides: Vec::new(),
            };
            t += duration + rng.gen_range(0.02..0.2);
            f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SampledMesh;
    use approx::assert_relative_eq;

    #[test]
    fn box_is_closed() {
        let b = box_mesh(1.0, 2.0, 3.0);
        assert_eq!(b.triangles.len(), 12);
        let area: f64 = (0..12)
            .map(|i| {
                let [a, b2, c] = b.triangle(i);
                crate::geometry::triangle_area(&a, &b2, &c)
            })
            .sum();
        assert_relative_eq!(area, 2.0 * (2.0 + 3.0 + 6.0), epsilon = 1e-12);
    }

    #[test]
    fn look_at_maps_target_to_forward() {
        let eye = Point3::new(1.0, 2.0, 3.0);
        let target = Point3::new(-1.0, 0.5, -2.0);
        let v = look_at(&eye, &target);
        let p = v.transform_point(&target);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert!(p.z < 0.0);
        // Camera right stays horizontal.
        let right = camera_rotation(&eye, &target) * Vector3::x();
        assert_relative_eq!(right.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn desk_scene_is_desk_scale() {
        let scene = desk_scene();
        assert!(scene.triangle_count() >= 100_000, "{}", scene.triangle_count());
        let samples: usize = SampledMesh::build_all(&scene, 15_000.0)
            .unwrap()
            .iter()
            .map(|m| m.total_samples)
            .sum();
        assert!(samples >= 1_000_000, "{samples}");
    }

    #[test]
    fn random_fixations_are_valid_and_reproducible() {
        let spec = FixationSpec::desk();
        let a = random_fixations(5, 50, &spec);
        let b = random_fixations(5, 50, &spec);
        assert_eq!(a, b);
        for f in &a {
            f.validate().unwrap();
        }
        assert!(a.windows(2).all(|w| w[0].start_time < w[1].start_time));
    }
}
