//! Scenes, triangle areas and the per-triangle sample grid.
//!
//! A triangle subdivided at resolution `r` carries `(r+1)(r+2)/2` samples laid
//! out row by row: row `i` holds `i + 1` samples. Sample `(row, col)` sits at
//! barycentric weights `(col/r, (row-col)/r, 1 - row/r)` on the triangle's
//! vertices `(v0, v1, v2)`, so `(0,0)` is `v2`, `(r,0)` is `v1` and `(r,r)` is
//! `v0`. Samples are not shared between neighbouring triangles: every triangle
//! owns one contiguous block of the object's value array.

mod scene;

pub use scene::{load_obj, parse_obj, Mesh, ObjectOverride, Scene, SceneObject, Transform};
pub(crate) use scene::unit_quaternion;

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Triangles below this area are treated as degenerate and get `r = 1`.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Upper bound on the per-triangle resolution. Keeps sample counts inside
/// `u32` range for a single triangle.
pub const MAX_RESOLUTION: u32 = 16_384;

/// Number of samples in a triangle of resolution `r`.
#[inline]
pub fn samples_for_resolution(r: u32) -> usize {
    let r = r as usize;
    (r + 1) * (r + 2) / 2
}

/// Area of a triangle by Heron's formula.
///
/// Rounding can push the radicand slightly negative for degenerate
/// triangles; that is clamped to zero.
pub fn triangle_area(v0: &Point3<f64>, v1: &Point3<f64>, v2: &Point3<f64>) -> f64 {
    let a = (v1 - v0).norm();
    let b = (v2 - v1).norm();
    let c = (v2 - v0).norm();
    let s = 0.5 * (a + b + c);
    let radicand = s * (s - a) * (s - b) * (s - c);
    if radicand > 0.0 {
        radicand.sqrt()
    } else {
        0.0
    }
}

/// Smallest resolution whose sample density reaches `k` samples per m².
///
/// Solves `(r+1)(r+2)/2 = k·A` for `r` and rounds up, so the achieved density
/// never falls below `k`. Triangles too small to reach `r = 1` are clamped to
/// it and keep one sample per vertex.
pub fn adaptive_resolution(area: f64, k: f64) -> Result<u32> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::config("k", format!("must be positive and finite, got {k}")));
    }
    if !(area >= DEGENERATE_AREA) {
        return Ok(1);
    }
    let delta = 1.0 + 8.0 * k * area;
    if delta < 25.0 {
        return Ok(1);
    }
    let r = ((-3.0 + delta.sqrt()) / 2.0).ceil();
    Ok((r as u32).clamp(1, MAX_RESOLUTION))
}

/// Row and column of the `idx`-th sample of a triangle, in O(1).
///
/// Row `i` starts at index `i(i+1)/2`.
pub fn sample_index_to_rowcol(idx: usize) -> (u32, u32) {
    let x = 8.0 * idx as f64 + 9.0;
    let mut row = ((-3.0 + x.sqrt()) / 2.0).ceil() as usize;
    // The float root can land one off for very large indices.
    while row > 0 && row * (row + 1) / 2 > idx {
        row -= 1;
    }
    while (row + 1) * (row + 2) / 2 <= idx {
        row += 1;
    }
    let col = idx - row * (row + 1) / 2;
    (row as u32, col as u32)
}

/// Inverse of [`sample_index_to_rowcol`].
#[inline]
pub fn rowcol_to_sample_index(row: u32, col: u32) -> usize {
    let row = row as usize;
    row * (row + 1) / 2 + col as usize
}

/// Barycentric weights of sample `(row, col)` at resolution `r`.
pub fn rowcol_to_barycentric(row: u32, col: u32, r: u32) -> Result<[f64; 3]> {
    if r == 0 || col > row || row > r {
        return Err(Error::Index(format!(
            "sample (row {row}, col {col}) outside a resolution-{r} grid"
        )));
    }
    Ok(barycentric_unchecked(row, col, r))
}

#[inline]
pub(crate) fn barycentric_unchecked(row: u32, col: u32, r: u32) -> [f64; 3] {
    let rf = r as f64;
    [col as f64 / rf, (row - col) as f64 / rf, (r - row) as f64 / rf]
}

/// Sample layout of one triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TriangleSampling {
    pub resolution: u32,
    pub sample_count: u32,
    /// Index of the first sample in the object's value array.
    pub sample_offset: usize,
}

impl TriangleSampling {
    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        self.sample_offset..self.sample_offset + self.sample_count as usize
    }
}

/// A run of consecutive triangles whose samples form one contiguous slice.
/// Used to hand disjoint parts of a value array to parallel workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleChunk {
    pub triangles: std::ops::Range<usize>,
    pub samples: std::ops::Range<usize>,
}

/// Target number of samples per [`SampleChunk`].
const CHUNK_SAMPLES: usize = 8192;

/// Per-triangle sample layout of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMesh {
    pub object_id: String,
    pub triangles: Vec<TriangleSampling>,
    pub total_samples: usize,
    /// Target density `k` in samples per m².
    pub density_k: f64,
    chunks: Vec<SampleChunk>,
}

impl SampledMesh {
    /// Assigns every triangle its adaptive resolution and lays out the
    /// prefix-sum offsets.
    pub fn build(object_id: &str, mesh: &Mesh, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::config("k", format!("must be positive and finite, got {k}")));
        }
        let mut triangles = Vec::with_capacity(mesh.triangles.len());
        let mut offset = 0usize;
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|i| mesh.positions[i as usize]);
            let r = adaptive_resolution(triangle_area(&a, &b, &c), k)?;
            let count = samples_for_resolution(r);
            triangles.push(TriangleSampling {
                resolution: r,
                sample_count: count as u32,
                sample_offset: offset,
            });
            offset += count;
        }
        let chunks = chunk_triangles(&triangles);
        Ok(Self {
            object_id: object_id.to_owned(),
            triangles,
            total_samples: offset,
            density_k: k,
            chunks,
        })
    }

    /// Builds one sampled mesh per scene object, in scene order.
    pub fn build_all(scene: &Scene, k: f64) -> Result<Vec<Self>> {
        scene
            .objects
            .iter()
            .map(|o| Self::build(&o.id, &o.mesh, k))
            .collect()
    }

    pub fn chunks(&self) -> &[SampleChunk] {
        &self.chunks
    }

    /// Barycentric weights of a sample addressed by triangle and in-triangle
    /// index.
    pub fn sample_barycentric(&self, triangle: usize, sample: usize) -> Result<[f64; 3]> {
        let ts = self.triangles.get(triangle).ok_or_else(|| {
            Error::Index(format!(
                "triangle {triangle} of `{}` ({} triangles)",
                self.object_id,
                self.triangles.len()
            ))
        })?;
        if sample >= ts.sample_count as usize {
            return Err(Error::Index(format!(
                "sample {sample} of triangle {triangle} ({} samples)",
                ts.sample_count
            )));
        }
        let (row, col) = sample_index_to_rowcol(sample);
        rowcol_to_barycentric(row, col, ts.resolution)
    }
}

fn chunk_triangles(triangles: &[TriangleSampling]) -> Vec<SampleChunk> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut acc = 0;
    for (i, t) in triangles.iter().enumerate() {
        acc += t.sample_count as usize;
        if acc >= CHUNK_SAMPLES {
            chunks.push(SampleChunk {
                triangles: start..i + 1,
                samples: triangles[start].sample_offset..t.sample_offset + t.sample_count as usize,
            });
            start = i + 1;
            acc = 0;
        }
    }
    if start < triangles.len() {
        let last = triangles.last().unwrap();
        chunks.push(SampleChunk {
            triangles: start..triangles.len(),
            samples: triangles[start].sample_offset..last.sample_offset + last.sample_count as usize,
        });
    }
    chunks
}

/// Position of a sample in the object's local frame.
pub fn sample_local_position(
    mesh: &Mesh,
    sampled: &SampledMesh,
    triangle: usize,
    sample: usize,
) -> Result<Point3<f64>> {
    let w = sampled.sample_barycentric(triangle, sample)?;
    let tri = mesh.triangles.get(triangle).ok_or_else(|| {
        Error::Index(format!("triangle {triangle} missing from mesh of `{}`", sampled.object_id))
    })?;
    let [a, b, c] = tri.map(|i| mesh.positions[i as usize]);
    Ok(Point3::from(a.coords * w[0] + b.coords * w[1] + c.coords * w[2]))
}

/// Position of a sample in world space under the object's transform.
pub fn sample_world_position(
    object: &SceneObject,
    sampled: &SampledMesh,
    triangle: usize,
    sample: usize,
) -> Result<Point3<f64>> {
    let local = sample_local_position(&object.mesh, sampled, triangle, sample)?;
    Ok(object.transform.apply_point(&local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn heron_area() {
        assert_relative_eq!(triangle_area(&p(0., 0., 0.), &p(1., 0., 0.), &p(0., 1., 0.)), 0.5, epsilon = 1e-15);
        assert_eq!(triangle_area(&p(0., 0., 0.), &p(2., 0., 0.), &p(1., 0., 0.)), 0.0);
        let eq = triangle_area(&p(0., 0., 0.), &p(1., 0., 0.), &p(0.5, 0.866025, 0.));
        let cross = 0.5 * (p(1., 0., 0.) - p(0., 0., 0.)).cross(&(p(0.5, 0.866025, 0.) - p(0., 0., 0.))).norm();
        assert_relative_eq!(eq, cross, max_relative = 1e-12);
        assert_relative_eq!(eq, 0.433013, epsilon = 1e-6);
    }

    #[test]
    fn resolution_examples() {
        assert_eq!(adaptive_resolution(0.5, 6.0).unwrap(), 1);
        assert_eq!(adaptive_resolution(0.0, 40_000.0).unwrap(), 1);
        let r = adaptive_resolution(0.01, 10_000.0).unwrap();
        assert_eq!(r, 13);
        assert!(samples_for_resolution(r) as f64 / 0.01 >= 10_000.0);
        assert_eq!(samples_for_resolution(r), 105);
    }

    #[test]
    fn resolution_rejects_bad_k() {
        assert!(matches!(adaptive_resolution(1.0, 0.0), Err(Error::InvalidConfig { .. })));
        assert!(matches!(adaptive_resolution(1.0, -1.0), Err(Error::InvalidConfig { .. })));
        assert!(adaptive_resolution(1.0, f64::NAN).is_err());
    }

    #[test]
    fn index_examples() {
        assert_eq!(sample_index_to_rowcol(0), (0, 0));
        assert_eq!(sample_index_to_rowcol(3), (2, 0));
        assert_eq!(sample_index_to_rowcol(5), (2, 2));
    }

    #[test]
    fn index_matches_enumeration() {
        let mut idx = 0;
        for row in 0..200u32 {
            for col in 0..=row {
                assert_eq!(sample_index_to_rowcol(idx), (row, col), "idx {idx}");
                assert_eq!(rowcol_to_sample_index(row, col), idx);
                idx += 1;
            }
        }
    }

    #[test]
    fn corner_weights() {
        assert_eq!(rowcol_to_barycentric(0, 0, 2).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(rowcol_to_barycentric(2, 2, 2).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(rowcol_to_barycentric(2, 0, 2).unwrap(), [0.0, 1.0, 0.0]);
        assert!(matches!(rowcol_to_barycentric(1, 2, 2), Err(Error::Index(_))));
        assert!(matches!(rowcol_to_barycentric(3, 0, 2), Err(Error::Index(_))));
    }

    #[test]
    fn single_small_triangle_has_three_samples() {
        let mesh = Mesh::new(vec![p(0., 0., 0.), p(1e-3, 0., 0.), p(0., 1e-3, 0.)], vec![[0, 1, 2]]).unwrap();
        let sm = SampledMesh::build("t", &mesh, 10.0).unwrap();
        assert_eq!(sm.total_samples, 3);
        assert_eq!(sm.triangles[0].resolution, 1);
    }

    #[test]
    fn identical_triangles_share_resolution() {
        let mesh = Mesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(5., 0., 0.), p(6., 0., 0.), p(5., 1., 0.)],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let sm = SampledMesh::build("t", &mesh, 1000.0).unwrap();
        assert_eq!(sm.triangles[0].resolution, sm.triangles[1].resolution);
        assert_eq!(sm.triangles[1].sample_offset, sm.triangles[0].sample_count as usize);
        assert_eq!(sm.total_samples, 2 * sm.triangles[0].sample_count as usize);
    }

    #[test]
    fn cube_minimum_sampling() {
        let cube = crate::synthetic::cube_mesh(1.0);
        assert_eq!(cube.triangles.len(), 12);
        let sm = SampledMesh::build("cube", &cube, 0.1).unwrap();
        assert_eq!(sm.total_samples, 36);
    }

    #[test]
    fn empty_mesh_is_empty() {
        let mesh = Mesh::new(vec![], vec![]).unwrap();
        let sm = SampledMesh::build("e", &mesh, 40_000.0).unwrap();
        assert_eq!(sm.total_samples, 0);
        assert!(sm.chunks().is_empty());
    }

    #[test]
    fn chunks_cover_layout() {
        let mesh = crate::synthetic::uv_sphere(1.0, 24, 48);
        let sm = SampledMesh::build("s", &mesh, 40_000.0).unwrap();
        let mut next_tri = 0;
        let mut next_sample = 0;
        for c in sm.chunks() {
            assert_eq!(c.triangles.start, next_tri);
            assert_eq!(c.samples.start, next_sample);
            next_tri = c.triangles.end;
            next_sample = c.samples.end;
        }
        assert_eq!(next_tri, sm.triangles.len());
        assert_eq!(next_sample, sm.total_samples);
    }

    #[test]
    fn world_positions() {
        let mesh = Mesh::new(vec![p(0., 0., 0.), p(2., 0., 0.), p(0., 2., 0.)], vec![[0, 1, 2]]).unwrap();
        let sm = SampledMesh::build("t", &mesh, 1.0).unwrap();
        let obj = SceneObject::new("t", mesh.clone(), Transform::identity());
        // r = 1: samples 0, 1, 2 are v2, v1, v0.
        assert_eq!(sample_world_position(&obj, &sm, 0, 0).unwrap(), p(0., 2., 0.));
        assert_eq!(sample_world_position(&obj, &sm, 0, 1).unwrap(), p(2., 0., 0.));
        assert_eq!(sample_world_position(&obj, &sm, 0, 2).unwrap(), p(0., 0., 0.));
        assert!(matches!(sample_world_position(&obj, &sm, 0, 3), Err(Error::Index(_))));
        assert!(matches!(sample_world_position(&obj, &sm, 1, 0), Err(Error::Index(_))));

        let moved = SceneObject::new(
            "t",
            mesh.clone(),
            Transform::from_translation(nalgebra::Vector3::new(1.0, -2.0, 3.0)),
        );
        assert_eq!(sample_world_position(&moved, &sm, 0, 0).unwrap(), p(1., 0., 3.));

        // r = 2, (row 1, col 0) → weights (0, 0.5, 0.5): midpoint of v1–v2.
        let sm2 = SampledMesh::build("t", &mesh, 3.0).unwrap();
        assert_eq!(sm2.triangles[0].resolution, 2);
        let mid = sample_world_position(&obj, &sm2, 0, rowcol_to_sample_index(1, 0)).unwrap();
        assert_relative_eq!(mid, p(1., 1., 0.), epsilon = 1e-15);
    }
}
