use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Matrix4, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Translation, rotation and per-axis scale, applied as `T · R · S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub scale: Vector3<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
            scale: Vector3::new(1.0, 1.0, 1.0),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    /// Builds a transform from raw components. The quaternion is given as
    /// `[x, y, z, w]` and must have unit norm within 1e-6.
    pub fn from_parts(translation: [f64; 3], rotation_xyzw: [f64; 4], scale: [f64; 3]) -> Result<Self> {
        Ok(Self {
            translation: Vector3::from(translation),
            rotation: unit_quaternion(rotation_xyzw)?,
            scale: Vector3::from(scale),
        })
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = self.rotation.to_homogeneous();
        for c in 0..3 {
            for r in 0..3 {
                m[(r, c)] *= self.scale[c];
            }
        }
        m[(0, 3)] = self.translation.x;
        m[(1, 3)] = self.translation.y;
        m[(2, 3)] = self.translation.z;
        m
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let scaled = p.coords.component_mul(&self.scale);
        Point3::from(self.rotation * scaled + self.translation)
    }
}

fn bounding_sphere(positions: &[Point3<f64>]) -> (Point3<f64>, f64) {
    let Some(first) = positions.first() else {
        return (Point3::origin(), 0.0);
    };
    let (mut lo, mut hi) = (first.coords, first.coords);
    for p in positions {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    let center = Point3::from((lo + hi) / 2.0);
    let radius = positions.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    (center, radius)
}

/// Validates an `[x, y, z, w]` quaternion and wraps it.
pub(crate) fn unit_quaternion(xyzw: [f64; 4]) -> Result<UnitQuaternion<f64>> {
    let [x, y, z, w] = xyzw;
    let q = Quaternion::new(w, x, y, z);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidScene(format!(
            "rotation quaternion [{x}, {y}, {z}, {w}] has norm {norm}, expected 1"
        )));
    }
    Ok(UnitQuaternion::new_normalize(q))
}

/// Indexed triangle mesh in local coordinates (meters).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Mesh {
    pub positions: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    bounds: (Point3<f64>, f64),
}

impl Mesh {
    pub fn new(positions: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = positions.len();
        if let Some((i, t)) = triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&v| v as usize >= n))
        {
            return Err(Error::InvalidScene(format!(
                "triangle {i} references vertex {t:?} but the mesh has {n} vertices"
            )));
        }
        if let Some(p) = positions.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidScene(format!("non-finite vertex {p}")));
        }
        let bounds = bounding_sphere(&positions);
        Ok(Self {
            positions,
            triangles,
            bounds,
        })
    }

    /// Centre and radius of a sphere enclosing every vertex (box-centred,
    /// not minimal).
    pub fn bounding_sphere(&self) -> (Point3<f64>, f64) {
        self.bounds
    }

    #[inline]
    pub fn triangle(&self, index: usize) -> [Point3<f64>; 3] {
        self.triangles[index].map(|i| self.positions[i as usize])
    }

    /// Stable digest input: vertex bits and indices.
    pub(crate) fn hash_into(&self, hasher: &mut impl sha2::Digest) {
        hasher.update((self.positions.len() as u64).to_le_bytes());
        for p in &self.positions {
            for c in p.coords.iter() {
                hasher.update(c.to_bits().to_le_bytes());
            }
        }
        hasher.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for i in t {
                hasher.update(i.to_le_bytes());
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SceneObject {
    pub id: String,
    pub mesh: Arc<Mesh>,
    pub transform: Transform,
}

impl SceneObject {
    pub fn new(id: &str, mesh: Mesh, transform: Transform) -> Self {
        Self {
            id: id.to_owned(),
            mesh: Arc::new(mesh),
            transform,
        }
    }
}

/// Per-fixation replacement of one object's transform.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectOverride {
    pub object_id: String,
    pub transform: Transform,
}

#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Checks that object ids are unique.
    pub fn new(objects: Vec<SceneObject>) -> Result<Self> {
        let mut seen = HashSet::new();
        for o in &objects {
            if !seen.insert(o.id.as_str()) {
                return Err(Error::InvalidScene(format!("duplicate object id `{}`", o.id)));
            }
        }
        Ok(Self { objects })
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn triangle_count(&self) -> usize {
        self.objects.iter().map(|o| o.mesh.triangles.len()).sum()
    }

    /// The scene as seen by one fixation: overridden objects take the given
    /// transform, everything else keeps its base pose. Meshes are shared.
    pub fn with_overrides(&self, overrides: &[ObjectOverride]) -> Result<Scene> {
        let mut scene = self.clone();
        for ov in overrides {
            let idx = self.object_index(&ov.object_id).ok_or_else(|| {
                Error::InvalidScene(format!("override for unknown object `{}`", ov.object_id))
            })?;
            scene.objects[idx].transform = ov.transform.clone();
        }
        Ok(scene)
    }

    /// Loads a scene manifest (TOML) and the OBJ files it references.
    /// Relative mesh paths resolve against the manifest's directory.
    ///
    /// ```toml
    /// [[object]]
    /// id = "statue"
    /// mesh = "statue.obj"
    /// translation = [0.0, 0.0, -2.0]
    /// rotation = [0.0, 0.0, 0.0, 1.0]   # x, y, z, w
    /// scale = [1.0, 1.0, 1.0]
    /// ```
    pub fn load_manifest(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.span().map(|s| line_of(&text, s.start)).unwrap_or(0),
            message: e.message().to_owned(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut objects = Vec::with_capacity(manifest.object.len());
        for entry in manifest.object {
            let mesh_path = if entry.mesh.is_absolute() {
                entry.mesh.clone()
            } else {
                base.join(&entry.mesh)
            };
            let mesh = load_obj(&mesh_path)?;
            let transform = Transform::from_parts(entry.translation, entry.rotation, entry.scale)
                .map_err(|e| Error::InvalidScene(format!("object `{}`: {e}", entry.id)))?;
            objects.push(SceneObject::new(&entry.id, mesh, transform));
        }
        Scene::new(objects)
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    object: Vec<ManifestObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestObject {
    id: String,
    mesh: PathBuf,
    #[serde(default)]
    translation: [f64; 3],
    #[serde(default = "identity_rotation")]
    rotation: [f64; 4],
    #[serde(default = "unit_scale")]
    scale: [f64; 3],
}

fn identity_rotation() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

fn unit_scale() -> [f64; 3] {
    [1.0; 3]
}

pub fn load_obj(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// Parses the `v` and `f` records of a Wavefront OBJ file. Faces with more
/// than three corners are fan-triangulated; texture and normal indices are
/// ignored, as are all other record types.
pub fn parse_obj(text: &str, path: &Path) -> Result<Mesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| err(lineno, "vertex needs three coordinates".into()))?;
                    *c = tok
                        .parse()
                        .map_err(|_| err(lineno, format!("bad coordinate `{tok}`")))?;
                }
                positions.push(Point3::from(xyz));
            }
            Some("f") => {
                let mut corners = Vec::with_capacity(4);
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| err(lineno, format!("bad face index `{tok}`")))?;
                    let resolved = match i {
                        i if i > 0 => i - 1,
                        i if i < 0 => positions.len() as i64 + i,
                        _ => return Err(err(lineno, "face index 0 is invalid".into())),
                    };
                    if resolved < 0 || resolved >= positions.len() as i64 {
                        return Err(err(lineno, format!("face index {i} out of range")));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(err(lineno, "face needs at least three vertices".into()));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(positions, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn obj_subset() {
        let text = "# cube face\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\nf -4 -3 -2\n";
        let mesh = parse_obj(text, Path::new("quad.obj")).unwrap();
        assert_eq!(mesh.positions.len(), 4);
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn obj_errors_carry_line() {
        let e = parse_obj("v 0 0 0\nf 1 2 3\n", Path::new("x.obj")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_obj("v 0 zero 0\n", Path::new("x.obj")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn scene_invariants() {
        let m = Mesh::new(vec![Point3::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(Mesh::new(vec![Point3::origin(); 2], vec![[0, 1, 2]]).is_err());
        let a = SceneObject::new("a", m.clone(), Transform::identity());
        assert!(Scene::new(vec![a.clone(), a.clone()]).is_err());
        assert!(Transform::from_parts([0.0; 3], [0.0, 0.0, 0.0, 2.0], [1.0; 3]).is_err());
        assert!(Transform::from_parts([0.0; 3], [0.0, 0.0, 0.0, 1.0 + 1e-7], [1.0; 3]).is_ok());
    }

    #[test]
    fn transform_matrix_matches_apply() {
        let t = Transform::from_parts(
            [1.0, 2.0, 3.0],
            [0.0, (0.3f64).sin(), 0.0, (0.3f64).cos()],
            [2.0, 0.5, 1.5],
        )
        .unwrap();
        let p = Point3::new(0.3, -0.7, 1.1);
        let via_matrix = t.matrix().transform_point(&p);
        assert_relative_eq!(via_matrix, t.apply_point(&p), epsilon = 1e-12);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tri.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let manifest = dir.path().join("scene.toml");
        std::fs::write(
            &manifest,
            "[[object]]\nid = \"a\"\nmesh = \"tri.obj\"\ntranslation = [0.0, 0.0, -2.0]\n\n[[object]]\nid = \"b\"\nmesh = \"tri.obj\"\nscale = [2.0, 2.0, 2.0]\n",
        )
        .unwrap();
        let scene = Scene::load_manifest(&manifest).unwrap();
        assert_eq!(scene.objects.len(), 2);
        assert_eq!(scene.objects[0].transform.translation.z, -2.0);
        assert_eq!(scene.objects[1].transform.scale.x, 2.0);

        std::fs::write(&manifest, "[[object]]\nid = \"a\"\nmesh = \"tri.obj\"\ncolour = 3\n").unwrap();
        assert!(matches!(Scene::load_manifest(&manifest), Err(Error::Parse { .. })));
        std::fs::write(&manifest, "[[object]]\nid = \"a\"\nmesh = \"missing.obj\"\n").unwrap();
        assert!(matches!(Scene::load_manifest(&manifest), Err(Error::Io { .. })));
    }

    #[test]
    fn overrides_replace_transform() {
        let m = Mesh::new(vec![Point3::origin(); 3], vec![[0, 1, 2]]).unwrap();
        let scene = Scene::new(vec![
            SceneObject::new("a", m.clone(), Transform::identity()),
            SceneObject::new("b", m, Transform::identity()),
        ])
        .unwrap();
        let moved = Transform::from_translation(Vector3::new(0.0, 1.0, 0.0));
        let s = scene
            .with_overrides(&[ObjectOverride {
                object_id: "b".into(),
                transform: moved.clone(),
            }])
            .unwrap();
        assert_eq!(s.objects[0].transform, Transform::identity());
        assert_eq!(s.objects[1].transform, moved);
        assert!(Arc::ptr_eq(&s.objects[1].mesh, &scene.objects[1].mesh));
        assert!(scene
            .with_overrides(&[ObjectOverride {
                object_id: "zzz".into(),
                transform: Transform::identity()
            }])
            .is_err());
    }
}
