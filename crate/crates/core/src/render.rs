//! Offscreen heatmap images.
//!
//! The scene is rasterized from a camera; each covered pixel finds the
//! point of its triangle under the pixel centre, locates the sub-triangle of
//! the sampling grid containing it and interpolates the three sample values
//! at its corners. Values go through `v^γ` and then the color map.

use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{Matrix4, Point3, UnitQuaternion, Vector3};
use rayon::prelude::*;

use crate::density::DensityMap;
use crate::error::{Error, Result};
use crate::gaze::Frustum;
use crate::geometry::{rowcol_to_sample_index, SampledMesh, Scene};
use crate::raster::{rasterize_depth, DepthBuffer};

pub const BACKGROUND: [u8; 3] = [24, 24, 24];

/// Piecewise-linear color scale over `[0, 1]` with a value exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorMap {
    stops: Vec<(f64, [u8; 3])>,
    gamma: f64,
}

impl Default for ColorMap {
    /// Blue, green, yellow, red.
    fn default() -> Self {
        Self {
            stops: vec![
                (0.0, [0, 0, 255]),
                (1.0 / 3.0, [0, 255, 0]),
                (2.0 / 3.0, [255, 255, 0]),
                (1.0, [255, 0, 0]),
            ],
            gamma: 1.0,
        }
    }
}

impl ColorMap {
    /// Stops must start at 0, end at 1 and increase strictly.
    pub fn new(stops: Vec<(f64, [u8; 3])>, gamma: f64) -> Result<Self> {
        if stops.len() < 2 {
            return Err(Error::config("colormap", "needs at least two stops"));
        }
        if stops[0].0 != 0.0 || stops[stops.len() - 1].0 != 1.0 {
            return Err(Error::config("colormap", "stops must start at 0 and end at 1"));
        }
        if stops.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::config("colormap", "stops must be strictly increasing"));
        }
        Self { stops, gamma: 1.0 }.with_gamma(gamma)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config("gamma", format!("must be positive and finite, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn stops(&self) -> &[(f64, [u8; 3])] {
        &self.stops
    }

    /// Reads stops from text: one `value r g b` per line, `#` comments.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut stops = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if fields.len() != 4 {
                return Err(parse_err(format!("expected `value r g b`, got {} fields", fields.len())));
            }
            let value: f64 = fields[0].parse().map_err(|_| parse_err(format!("bad stop value `{}`", fields[0])))?;
            let mut rgb = [0u8; 3];
            for (c, f) in rgb.iter_mut().zip(&fields[1..]) {
                *c = f.parse().map_err(|_| parse_err(format!("bad color channel `{f}`")))?;
            }
            stops.push((value, rgb));
        }
        Self::new(stops, 1.0)
    }

    /// Color of a normalized value; inputs are clamped to `[0, 1]`.
    pub fn color(&self, value: f64) -> [u8; 3] {
        let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) }.powf(self.gamma);
        let i = self.stops.partition_point(|s| s.0 <= v).clamp(1, self.stops.len() - 1);
        let (v0, c0) = self.stops[i - 1];
        let (v1, c1) = self.stops[i];
        let t = ((v - v0) / (v1 - v0)).clamp(0.0, 1.0);
        std::array::from_fn(|k| (c0[k] as f64 + t * (c1[k] as f64 - c0[k] as f64)).round() as u8)
    }
}

/// Pose and frustum of a render camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub position: Point3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub frustum: Frustum,
}

impl Camera {
    /// Camera at `eye` looking at `target`, `+y` up, with a vertical field
    /// of view and aspect ratio.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, fov_y: f64, aspect: f64) -> Result<Self> {
        if (target - eye).norm() == 0.0 {
            return Err(Error::config("camera", "eye and target coincide"));
        }
        let dir = target - eye;
        let up = if dir.cross(&Vector3::y()).norm() < 1e-9 * dir.norm() {
            Vector3::z()
        } else {
            Vector3::y()
        };
        let near = 0.01;
        Ok(Self {
            position: eye,
            rotation: UnitQuaternion::face_towards(&-dir, &up),
            frustum: Frustum::from_fov(fov_y, aspect, near, 1000.0)?,
        })
    }

    pub fn view_matrix(&self) -> Matrix4<f64> {
        let inv = self.rotation.inverse();
        let mut m = inv.to_homogeneous();
        let t = -(inv * self.position.coords);
        m[(0, 3)] = t.x;
        m[(1, 3)] = t.y;
        m[(2, 3)] = t.z;
        m
    }
}

/// Interpolated sample value at barycentric weights `w` of a triangle
/// sampled at resolution `r`, whose samples start at `values[0]`.
pub fn interpolate_in_triangle(values: &[f64], r: u32, w: [f64; 3]) -> f64 {
    let rf = r as f64;
    // Continuous grid coordinates: row from the third vertex, column
    // along the first weight.
    let row = (rf * (1.0 - w[2])).clamp(0.0, rf);
    let col = (rf * w[0]).clamp(0.0, row);
    let i = (row.floor() as u32).min(r - 1);
    let j = (col.floor() as u32).min(i);
    let fr = row - i as f64;
    let fc = col - j as f64;
    let at = |row: u32, col: u32| values[rowcol_to_sample_index(row, col)];
    let v00 = at(i, j);
    let v11 = at(i + 1, j + 1);
    if fc <= fr {
        let v10 = at(i + 1, j);
        v00 + fr * (v10 - v00) + fc * (v11 - v10)
    } else {
        let v01 = at(i, j + 1);
        v00 + fc * (v01 - v00) + fr * (v11 - v01)
    }
}

/// Barycentric weights of the point where the camera ray through screen
/// position `(x, y)` meets the triangle `[a, b, c]` given in camera space.
fn ray_barycentric(buffer: &DepthBuffer, frustum: &Frustum, tri: &[Point3<f64>; 3], x: f64, y: f64) -> Option<[f64; 3]> {
    let (w, h) = (buffer.width() as f64, buffer.height() as f64);
    let nx = x / w;
    let ny = y / h;
    let dir = Vector3::new(
        frustum.left + nx * (frustum.right - frustum.left),
        frustum.top - ny * (frustum.top - frustum.bottom),
        -frustum.near,
    );
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let n = e1.cross(&e2);
    let denom = n.dot(&dir);
    if denom.abs() < 1e-300 {
        return None;
    }
    let t = n.dot(&tri[0].coords) / denom;
    let p = dir * t - tri[0].coords;
    // Solve p = u e1 + v e2 in the triangle plane.
    let d00 = e1.dot(&e1);
    let d01 = e1.dot(&e2);
    let d11 = e2.dot(&e2);
    let d20 = p.dot(&e1);
    let d21 = p.dot(&e2);
    let det = d00 * d11 - d01 * d01;
    if det == 0.0 {
        return None;
    }
    let u = (d11 * d20 - d01 * d21) / det;
    let v = (d00 * d21 - d01 * d20) / det;
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let (u, v) = (clamp(u), clamp(v));
    let s = u + v;
    let (u, v) = if s > 1.0 { (u / s, v / s) } else { (u, v) };
    Some([1.0 - u - v, u, v])
}

/// Interpolated map value per pixel, row-major; `None` where no geometry
/// is drawn.
pub fn render_values(
    scene: &Scene,
    map: &DensityMap,
    sampled: &[SampledMesh],
    camera: &Camera,
    width: u32,
    height: u32,
) -> Result<Vec<Option<f64>>> {
    map.check_layout(sampled)?;
    let view = camera.view_matrix();
    let buffer = rasterize_depth(scene, &view, &camera.frustum.projection_matrix(), width as usize, height as usize);
    let model_views: Vec<Matrix4<f64>> = scene.objects.iter().map(|o| view * o.transform.matrix()).collect();
    let w = buffer.width();
    let mut out = vec![None; w * buffer.height()];
    out.par_chunks_mut(w).enumerate().for_each(|(py, row)| {
        for (px, slot) in row.iter_mut().enumerate() {
            let Some(frag) = buffer.fragment(px, py) else { continue };
            let (oi, ti) = (frag.triangle.object as usize, frag.triangle.triangle as usize);
            let o = &scene.objects[oi];
            let tri = o.mesh.triangles[ti].map(|i| model_views[oi].transform_point(&o.mesh.positions[i as usize]));
            let Some(bary) = ray_barycentric(&buffer, &camera.frustum, &tri, px as f64 + 0.5, py as f64 + 0.5) else {
                continue;
            };
            let ts = &sampled[oi].triangles[ti];
            *slot = Some(interpolate_in_triangle(&map.values[oi][ts.range()], ts.resolution, bary));
        }
    });
    Ok(out)
}

/// Renders the map as an RGB image. The map should be normalized; values
/// are clamped to `[0, 1]` before coloring.
pub fn render_heatmap(
    scene: &Scene,
    map: &DensityMap,
    sampled: &[SampledMesh],
    camera: &Camera,
    colormap: &ColorMap,
    width: u32,
    height: u32,
) -> Result<RgbImage> {
    let values = render_values(scene, map, sampled, camera, width, height)?;
    let mut img = RgbImage::new(width.max(1), height.max(1));
    for (pixel, v) in img.pixels_mut().zip(&values) {
        *pixel = Rgb(v.map_or(BACKGROUND, |v| colormap.color(v)));
    }
    Ok(img)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_world_position;
    use crate::synthetic;
    use approx::assert_relative_eq;

    #[test]
    fn default_colors() {
        let c = ColorMap::default();
        assert_eq!(c.color(0.0), [0, 0, 255]);
        assert_eq!(c.color(1.0 / 3.0), [0, 255, 0]);
        assert_eq!(c.color(1.0), [255, 0, 0]);
        assert_eq!(c.color(2.0), [255, 0, 0]);
        let g = c.clone().with_gamma(0.5).unwrap();
        assert_ne!(c.color(0.2), g.color(0.2));
        assert_eq!(c.color(1.0), g.color(1.0));
    }

    #[test]
    fn bad_colormaps() {
        assert!(ColorMap::new(vec![(0.0, [0; 3])], 1.0).is_err());
        assert!(ColorMap::new(vec![(0.0, [0; 3]), (0.0, [0; 3]), (1.0, [0; 3])], 1.0).is_err());
        assert!(ColorMap::new(vec![(0.1, [0; 3]), (1.0, [0; 3])], 1.0).is_err());
        assert!(ColorMap::default().with_gamma(0.0).is_err());
    }

    #[test]
    fn interpolation_hits_samples_and_is_linear() {
        let r = 4;
        let n = crate::geometry::samples_for_resolution(r);
        // A linear field in barycentric coordinates is reproduced exactly.
        let values: Vec<f64> = (0..n)
            .map(|s| {
                let (row, col) = crate::geometry::sample_index_to_rowcol(s);
                let w = crate::geometry::rowcol_to_barycentric(row, col, r).unwrap();
                1.0 + 2.0 * w[0] - 3.0 * w[1] + 0.5 * w[2]
            })
            .collect();
        for w in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.11, 0.77, 0.12]] {
            let expect = 1.0 + 2.0 * w[0] - 3.0 * w[1] + 0.5 * w[2];
            assert_relative_eq!(interpolate_in_triangle(&values, r, w), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_map_renders_lowest_stop() {
        let scene = synthetic::challenging_scene();
        let sampled = SampledMesh::build_all(&scene, 500.0).unwrap();
        let map = crate::density::normalize(DensityMap::zeros(&sampled));
        let cam = Camera::look_at(Point3::new(0.0, 1.1, 0.9), Point3::new(0.0, 0.3, -1.2), 1.0, 1.0).unwrap();
        let img = render_heatmap(&scene, &map, &sampled, &cam, &ColorMap::default(), 64, 64).unwrap();
        assert!(img.pixels().all(|p| p.0 == [0, 0, 255] || p.0 == BACKGROUND));
        assert!(img.pixels().any(|p| p.0 == [0, 0, 255]));
    }

    #[test]
    fn single_hot_sample_is_hottest_pixel() {
        let scene = Scene::new(vec![synthetic::quad_object("q", 2.0, -3.0)]).unwrap();
        let sampled = SampledMesh::build_all(&scene, 200.0).unwrap();
        let mut map = DensityMap::zeros(&sampled);
        let ts = sampled[0].triangles[0];
        let s = 7;
        map.values[0][ts.sample_offset + s] = 5.0;
        map.global_max = 5.0;
        map.normalize();
        let cam = Camera::look_at(Point3::origin(), Point3::new(0.0, 0.0, -1.0), 0.9, 1.0).unwrap();
        let values = render_values(&scene, &map, &sampled, &cam, 200, 200).unwrap();
        let (best, _) = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let world = sample_world_position(&scene.objects[0], &sampled[0], 0, s).unwrap();
        let buf = rasterize_depth(&scene, &cam.view_matrix(), &cam.frustum.projection_matrix(), 200, 200);
        let sp = buf.project(&world).unwrap();
        let (bx, by) = ((best % 200) as f64 + 0.5, (best / 200) as f64 + 0.5);
        assert!(((bx - sp.x).powi(2) + (by - sp.y).powi(2)).sqrt() <= 1.0, "{bx},{by} vs {},{}", sp.x, sp.y);
    }
}
