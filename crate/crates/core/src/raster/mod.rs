//! Software depth buffers and point-visibility queries.
//!
//! Triangles are transformed to clip space, culled against the frustum,
//! clipped against the near and far planes and scan-converted at pixel
//! centres with a top-left fill rule. No backface culling is done.
//!
//! Each pixel keeps the eye-space depth (distance along `-z`) of its nearest
//! surface plus a reference to the polygon that produced it. Inverse depth is
//! affine in screen space, so that polygon's depth can be re-evaluated at the
//! exact projected position of a query point instead of at the pixel centre.
//! This keeps sloped surfaces from shadowing their own samples.

mod cull;

pub use cull::{cull_triangles, FrustumPlanes};

use image::GrayImage;
use nalgebra::{Matrix3, Matrix4, Point3, Vector3, Vector4};

use crate::geometry::Scene;

const EMPTY: u32 = u32::MAX;

/// Side of the square pixel tiles of the coverage index.
const TILE: usize = 8;

/// A triangle addressed by object index (scene order) and triangle index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriangleRef {
    pub object: u32,
    pub triangle: u32,
}

/// Depth tolerance for visibility: `max(abs, rel · depth)` meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthEpsilon {
    pub abs: f64,
    pub rel: f64,
}

impl Default for DepthEpsilon {
    fn default() -> Self {
        Self { abs: 1e-3, rel: 1e-3 }
    }
}

impl DepthEpsilon {
    #[inline]
    pub fn at(&self, depth: f64) -> f64 {
        self.abs.max(self.rel * depth)
    }
}

/// The surface that won a pixel: which triangle, and its inverse depth as an
/// affine function `a·x + b·y + c` of continuous screen coordinates.
///
/// `coverage` maps homogeneous NDC `(x, y, 1)` to weights `λ` proportional
/// to the barycentric coordinates of the ray's hit on the full (unclipped)
/// triangle; the hit is inside when every `λ ≥ 0` and its inverse depth is
/// `Σλ`. `clip_z` holds the vertices' clip-space z for the depth-range test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fragment {
    pub triangle: TriangleRef,
    plane: [f64; 3],
    coverage: Option<Matrix3<f64>>,
    clip_z: Vector3<f64>,
}

/// Relative tolerance of the coverage test, so points on a shared edge are
/// covered by both triangles.
const COVERAGE_TOL: f64 = 1e-9;

impl Fragment {
    /// Eye-space depth of this triangle where it covers NDC point
    /// `(x, y)`, or `None` where it does not (or the hit is outside the
    /// depth range).
    #[inline]
    pub fn covered_depth(&self, ndc_x: f64, ndc_y: f64) -> Option<f64> {
        let m = self.coverage.as_ref()?;
        let l = m * Vector3::new(ndc_x, ndc_y, 1.0);
        let sum = l.x + l.y + l.z;
        let tol = -COVERAGE_TOL * (l.x.abs() + l.y.abs() + l.z.abs());
        if !(sum > 0.0) || l.x < tol || l.y < tol || l.z < tol {
            return None;
        }
        let ndc_z = l.dot(&self.clip_z);
        if ndc_z.abs() > 1.0 + COVERAGE_TOL {
            return None;
        }
        Some(1.0 / sum)
    }

    /// Eye-space depth of this surface at continuous screen position
    /// `(x, y)`; infinite where the plane is behind the camera.
    #[inline]
    pub fn depth_at(&self, x: f64, y: f64) -> f64 {
        let inv = self.plane[0] * x + self.plane[1] * y + self.plane[2];
        if inv > 0.0 {
            1.0 / inv
        } else {
            f64::INFINITY
        }
    }
}

/// Per-pixel nearest eye-space depth, with the matrices used to render it.
#[derive(Clone, Debug)]
pub struct DepthBuffer {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    owner: Vec<u32>,
    fragments: Vec<Fragment>,
    /// Conservative coverage: `candidates[starts[i]..starts[i + 1]]` lists
    /// every fragment whose polygon touches tile `i` (`TILE`² pixels),
    /// with the fragment's nearest depth.
    starts: Vec<u32>,
    candidates: Vec<(f64, u32)>,
    /// Nearest depth of each fragment's polygon.
    nearest: Vec<f64>,
    tiles_x: usize,
    tiles_y: usize,
    /// `(tile row, first tile column, last tile column, fragment)` runs
    /// recorded while drawing, turned into `starts`/`candidates` by
    /// `finish`.
    spans: Vec<[u32; 4]>,
    view: Matrix4<f64>,
    projection: Matrix4<f64>,
    view_projection: Matrix4<f64>,
}

impl PartialEq for DepthBuffer {
    /// Bitwise comparison of the stored depths and owners.
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.owner == other.owner
            && self.fragments == other.fragments
            && self
                .depth
                .iter()
                .zip(&other.depth)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Where a point lands on the screen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
    pub px: usize,
    pub py: usize,
    /// Eye-space depth of the point.
    pub depth: f64,
}

impl DepthBuffer {
    fn empty(width: usize, height: usize, view: Matrix4<f64>, projection: Matrix4<f64>) -> Self {
        let (width, height) = (width.max(1), height.max(1));
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            owner: vec![EMPTY; width * height],
            fragments: Vec::new(),
            starts: Vec::new(),
            candidates: Vec::new(),
            nearest: Vec::new(),
            tiles_x: width.div_ceil(TILE),
            tiles_y: height.div_ceil(TILE),
            spans: Vec::new(),
            view,
            projection,
            view_projection: projection * view,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn view(&self) -> &Matrix4<f64> {
        &self.view
    }

    pub fn projection(&self) -> &Matrix4<f64> {
        &self.projection
    }

    pub fn view_projection(&self) -> &Matrix4<f64> {
        &self.view_projection
    }

    /// Stored depth at pixel `(x, y)`; `+inf` where nothing was drawn.
    pub fn depth(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    /// The surface covering pixel `(x, y)`, if any.
    pub fn fragment(&self, x: usize, y: usize) -> Option<&Fragment> {
        match self.owner[y * self.width + x] {
            EMPTY => None,
            i => Some(&self.fragments[i as usize]),
        }
    }

    /// Projects clip coordinates produced with this buffer's matrices.
    /// `None` when the point is outside the view volume.
    #[inline]
    pub fn screen_from_clip(&self, clip: &Vector4<f64>) -> Option<ScreenPoint> {
        self.screen_from_clip_within(clip, 0.0)
    }

    /// [`DepthBuffer::screen_from_clip`] with the NDC cube widened by
    /// `slack` on every side. Positions past the border clamp to edge pixels.
    #[inline]
    pub fn screen_from_clip_within(&self, clip: &Vector4<f64>, slack: f64) -> Option<ScreenPoint> {
        let w = clip.w;
        if !(w > 0.0) {
            return None;
        }
        let (nx, ny, nz) = (clip.x / w, clip.y / w, clip.z / w);
        let lim = 1.0 + slack;
        if !(nx.abs() <= lim && ny.abs() <= lim && nz.abs() <= lim) {
            return None;
        }
        let x = (nx + 1.0) * 0.5 * self.width as f64;
        let y = (1.0 - ny) * 0.5 * self.height as f64;
        Some(ScreenPoint {
            x,
            y,
            px: (x.max(0.0) as usize).min(self.width - 1),
            py: (y.max(0.0) as usize).min(self.height - 1),
            depth: w,
        })
    }

    pub fn project(&self, world: &Point3<f64>) -> Option<ScreenPoint> {
        self.screen_from_clip(&(self.view_projection * world.to_homogeneous()))
    }

    /// Visibility of a point given its clip coordinates under
    /// [`DepthBuffer::view_projection`].
    ///
    /// Points outside the view volume are not visible. A point is hidden
    /// when a surface covers its exact projected position more than `eps`
    /// nearer than the point itself.
    #[inline]
    pub fn is_visible_clip(&self, clip: &Vector4<f64>, eps: &DepthEpsilon) -> bool {
        self.is_visible_clip_within(clip, eps, 0.0)
    }

    /// [`DepthBuffer::is_visible_clip`] with the view volume widened by
    /// `slack` in NDC units.
    #[inline]
    pub fn is_visible_clip_within(&self, clip: &Vector4<f64>, eps: &DepthEpsilon, slack: f64) -> bool {
        match self.screen_from_clip_within(clip, slack) {
            None => false,
            Some(s) => {
                let limit = s.depth - eps.at(s.depth);
                let (nx, ny) = self.ndc(&s);
                !self.tile(s.px, s.py).iter().any(|&(near, f)| {
                    near < limit && self.fragments[f as usize].covered_depth(nx, ny).is_some_and(|d| d < limit)
                })
            }
        }
    }

    /// Depth of the nearest surface at the exact projected position of a
    /// point, or infinity where nothing was drawn.
    ///
    /// Pixel ownership is decided at pixel centres, which misses slivers
    /// and misplaces silhouettes by up to half a pixel. Every fragment
    /// touching the point's pixel is therefore tested for exact coverage.
    pub fn nearest_surface(&self, s: &ScreenPoint) -> f64 {
        let (nx, ny) = self.ndc(s);
        self.candidates_at(s.px, s.py)
            .filter_map(|f| f.covered_depth(nx, ny))
            .fold(f64::INFINITY, f64::min)
    }

    /// Fragments whose polygons may touch pixel `(px, py)`.
    pub fn candidates_at(&self, px: usize, py: usize) -> impl Iterator<Item = &Fragment> + '_ {
        self.tile(px, py).iter().map(|&(_, f)| &self.fragments[f as usize])
    }

    #[inline]
    fn tile(&self, px: usize, py: usize) -> &[(f64, u32)] {
        let i = (py / TILE) * self.tiles_x + px / TILE;
        match self.starts.get(i..i + 2) {
            Some(r) => &self.candidates[r[0] as usize..r[1] as usize],
            None => &[],
        }
    }

    #[inline]
    fn ndc(&self, s: &ScreenPoint) -> (f64, f64) {
        (2.0 * s.x / self.width as f64 - 1.0, 1.0 - 2.0 * s.y / self.height as f64)
    }

    pub fn is_visible(&self, world: &Point3<f64>, eps: &DepthEpsilon) -> bool {
        self.is_visible_clip(&(self.view_projection * world.to_homogeneous()), eps)
    }

    /// Grayscale dump: nearest depth white, farthest dark, empty black.
    pub fn to_image(&self) -> GrayImage {
        let finite = self.depth.iter().copied().filter(|d| d.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let d = self.depth(x as usize, y as usize);
            let v = if d.is_finite() {
                (255.0 - 223.0 * (d - lo) / span).round() as u8
            } else {
                0
            };
            image::Luma([v])
        })
    }

    /// Draws one clip-space triangle. Returns false when nothing of it
    /// survived clipping.
    fn draw(&mut self, clip: [Vector4<f64>; 3], triangle: TriangleRef) -> bool {
        let in_depth = |v: &Vector4<f64>| v.z >= -v.w && v.z <= v.w;
        let mut poly;
        let verts: &[Vector4<f64>] = if clip.iter().all(in_depth) {
            &clip
        } else {
            poly = Polygon::from_triangle(clip);
            if !poly.clip_depth() {
                return false;
            }
            &poly.verts[..poly.len]
        };
        let (w, h) = (self.width as f64, self.height as f64);
        let mut screen = [[0.0f64; 3]; Polygon::CAP];
        for (s, v) in screen.iter_mut().zip(verts) {
            let inv_w = 1.0 / v.w;
            *s = [
                (v.x * inv_w + 1.0) * 0.5 * w,
                (1.0 - v.y * inv_w) * 0.5 * h,
                inv_w,
            ];
        }
        let screen = &screen[..verts.len()];
        let Some(plane) = affine_plane(screen) else {
            return false;
        };
        let frag = self.fragments.len() as u32;
        if !self.record_spans(screen, frag) {
            return false;
        }
        #[rustfmt::skip]
        let m = Matrix3::new(
            clip[0].x, clip[1].x, clip[2].x,
            clip[0].y, clip[1].y, clip[2].y,
            clip[0].w, clip[1].w, clip[2].w,
        );
        self.nearest.push(1.0 / screen.iter().map(|v| v[2]).fold(0.0, f64::max));
        self.fragments.push(Fragment {
            triangle,
            plane,
            coverage: m.try_inverse(),
            clip_z: Vector3::new(clip[0].z, clip[1].z, clip[2].z),
        });
        for k in 1..screen.len() - 1 {
            self.fill(screen[0], screen[k], screen[k + 1], &plane, frag);
        }
        true
    }

    /// Records, for every row of tiles the convex polygon touches, the run
    /// of tiles it touches (closed squares). False when it misses the
    /// screen.
    fn record_spans(&mut self, poly: &[[f64; 3]], frag: u32) -> bool {
        let (w, h) = (self.width as f64, self.height as f64);
        let tile = TILE as f64;
        let min_y = poly.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        let max_y = poly.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
        if !(max_y >= 0.0 && min_y <= h) {
            return false;
        }
        // Casts truncate, which is floor for these non-negative values.
        let row0 = (min_y.max(0.0) / tile) as usize;
        let row1 = ((max_y.min(h) / tile) as usize).min(self.tiles_y - 1);
        if row1 <= row0 + 1 {
            // Small polygon: its bounding box is tight enough.
            let min_x = poly.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let max_x = poly.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            if !(max_x >= 0.0 && min_x <= w) {
                return false;
            }
            let c0 = (min_x.max(0.0) / tile) as u32;
            let c1 = ((max_x.min(w) / tile) as u32).min(self.tiles_x as u32 - 1);
            for row in row0..=row1 {
                self.spans.push([row as u32, c0, c1, frag]);
            }
            return true;
        }
        let before = self.spans.len();
        for row in row0..=row1 {
            let (lo, hi) = (row as f64 * tile, (row + 1) as f64 * tile);
            let mut x_min = f64::INFINITY;
            let mut x_max = f64::NEG_INFINITY;
            for i in 0..poly.len() {
                let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
                // The part of edge p→q inside the band lo ≤ y ≤ hi.
                let (ey0, ey1) = (p[1].min(q[1]), p[1].max(q[1]));
                if ey1 < lo || ey0 > hi {
                    continue;
                }
                let dy = q[1] - p[1];
                for y in [ey0.max(lo), ey1.min(hi)] {
                    let x = if dy == 0.0 { p[0] } else { p[0] + (q[0] - p[0]) * ((y - p[1]) / dy).clamp(0.0, 1.0) };
                    x_min = x_min.min(x);
                    x_max = x_max.max(x);
                }
                if dy == 0.0 {
                    x_min = x_min.min(q[0]);
                    x_max = x_max.max(q[0]);
                }
            }
            if !(x_max >= 0.0 && x_min <= w) {
                continue;
            }
            let c0 = (x_min.max(0.0) / tile) as u32;
            let c1 = ((x_max.min(w) / tile) as u32).min(self.tiles_x as u32 - 1);
            self.spans.push([row as u32, c0, c1, frag]);
        }
        self.spans.len() > before
    }

    /// Turns the recorded spans into the per-tile candidate index.
    fn finish(&mut self) {
        let n = self.tiles_x * self.tiles_y;
        let mut starts = vec![0u32; n + 1];
        for &[row, c0, c1, _] in &self.spans {
            let base = row as usize * self.tiles_x;
            for c in c0..=c1 {
                starts[base + c as usize + 1] += 1;
            }
        }
        for i in 0..n {
            starts[i + 1] += starts[i];
        }
        let mut next = starts.clone();
        let mut candidates = vec![(0.0, 0u32); starts[n] as usize];
        for &[row, c0, c1, frag] in &self.spans {
            let base = row as usize * self.tiles_x;
            for c in c0..=c1 {
                let slot = &mut next[base + c as usize];
                candidates[*slot as usize] = (self.nearest[frag as usize], frag);
                *slot += 1;
            }
        }
        self.starts = starts;
        self.candidates = candidates;
        self.spans = Vec::new();
        self.nearest = Vec::new();
    }

    /// Scan-converts one screen-space triangle. Pixel centres on an edge are
    /// owned by the triangle only if the edge is a top or left edge.
    fn fill(&mut self, a: [f64; 3], b: [f64; 3], c: [f64; 3], plane: &[f64; 3], frag: u32) {
        let area = edge(&a, &b, c[0], c[1]);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        // Orient so that the interior is on the positive side of every edge.
        let (b, c) = if area < 0.0 { (c, b) } else { (b, c) };

        let min_x = a[0].min(b[0]).min(c[0]);
        let max_x = a[0].max(b[0]).max(c[0]);
        let min_y = a[1].min(b[1]).min(c[1]);
        let max_y = a[1].max(b[1]).max(c[1]);
        if !(max_x >= 0.5 && max_y >= 0.5) {
            return;
        }
        let x0 = ceil_nonneg(min_x - 0.5);
        let y0 = ceil_nonneg(min_y - 0.5);
        let x1 = ((max_x - 0.5) as usize).min(self.width - 1);
        let y1 = ((max_y - 0.5) as usize).min(self.height - 1);
        if x1 < x0 || y1 < y0 {
            return;
        }

        let edges = [(a, b), (b, c), (c, a)];
        let top_left = edges.map(|(p, q)| {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            (dy == 0.0 && dx > 0.0) || dy < 0.0
        });
        let inside = |sx: f64, sy: f64| {
            edges.iter().zip(&top_left).all(|((p, q), &tl)| {
                let e = edge(p, q, sx, sy);
                e > 0.0 || (e == 0.0 && tl)
            })
        };
        for py in y0..=y1 {
            let sy = py as f64 + 0.5;
            // Each edge test is monotone in x, so the covered pixel centres
            // of a row form one run. Estimate its ends from the edges' roots,
            // then settle them with the exact test.
            let (mut lo, mut hi) = (x0 as f64, x1 as f64);
            for (p, q) in &edges {
                let slope = p[1] - q[1];
                if slope != 0.0 {
                    // Pixel index where the edge crosses the row; the margin
                    // covers rounding and the truncating casts.
                    let root = p[0] + (q[0] - p[0]) * (sy - p[1]) / (q[1] - p[1]) - 0.5;
                    if !root.is_finite() {
                        continue;
                    }
                    if slope > 0.0 {
                        lo = lo.max((root - 2.0) as i64 as f64);
                    } else {
                        hi = hi.min((root + 2.0) as i64 as f64);
                    }
                }
            }
            if !(lo <= hi) {
                continue;
            }
            let (mut first, mut last) = (lo as usize, hi as usize);
            while first <= last && !inside(first as f64 + 0.5, sy) {
                first += 1;
            }
            if first > last {
                continue;
            }
            while !inside(last as f64 + 0.5, sy) {
                last -= 1;
            }
            let row = py * self.width;
            for px in first..=last {
                let sx = px as f64 + 0.5;
                let inv = plane[0] * sx + plane[1] * sy + plane[2];
                if !(inv > 0.0) {
                    continue;
                }
                let d = 1.0 / inv;
                let i = row + px;
                if d < self.depth[i] {
                    self.depth[i] = d;
                    self.owner[i] = frag;
                }
            }
        }
    }
}

/// `x.ceil().max(0.0)` as an index, without a libm call.
#[inline]
fn ceil_nonneg(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let i = x as usize;
    i + usize::from((i as f64) < x)
}

#[inline]
fn edge(p: &[f64; 3], q: &[f64; 3], x: f64, y: f64) -> f64 {
    (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0])
}

/// Fits `z = a·x + b·y + c` through the best-conditioned corner triple of a
/// convex polygon.
fn affine_plane(pts: &[[f64; 3]]) -> Option<[f64; 3]> {
    let mut best = (0.0, 0, 1, 2);
    for k in 1..pts.len() - 1 {
        let (p0, p1, p2) = (&pts[0], &pts[k], &pts[k + 1]);
        let area = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
        if area > best.0 {
            best = (area, 0, k, k + 1);
        }
    }
    if !(best.0 > 0.0) {
        return None;
    }
    let (p0, p1, p2) = (&pts[best.1], &pts[best.2], &pts[best.3]);
    let (x1, y1, z1) = (p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]);
    let (x2, y2, z2) = (p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]);
    let det = x1 * y2 - x2 * y1;
    let a = (z1 * y2 - z2 * y1) / det;
    let b = (x1 * z2 - x2 * z1) / det;
    let c = p0[2] - a * p0[0] - b * p0[1];
    Some([a, b, c])
}

/// Small convex polygon in clip space.
struct Polygon {
    verts: [Vector4<f64>; Polygon::CAP],
    len: usize,
}

impl Polygon {
    /// A triangle clipped by two planes has at most five corners.
    const CAP: usize = 8;

    fn from_triangle(t: [Vector4<f64>; 3]) -> Self {
        let mut verts = [Vector4::zeros(); Self::CAP];
        verts[..3].copy_from_slice(&t);
        Self { verts, len: 3 }
    }

    /// Clips against `z >= -w` (near) and `z <= w` (far). Returns false if
    /// nothing is left.
    fn clip_depth(&mut self) -> bool {
        let near = |v: &Vector4<f64>| v.z + v.w;
        let far = |v: &Vector4<f64>| v.w - v.z;
        self.clip_by(near) && self.clip_by(far)
    }

    fn clip_by(&mut self, dist: impl Fn(&Vector4<f64>) -> f64) -> bool {
        let d: [f64; Self::CAP] = std::array::from_fn(|i| if i < self.len { dist(&self.verts[i]) } else { 0.0 });
        if d[..self.len].iter().all(|&x| x >= 0.0) {
            return true;
        }
        if d[..self.len].iter().all(|&x| x < 0.0) {
            self.len = 0;
            return false;
        }
        let mut out = [Vector4::zeros(); Self::CAP];
        let mut n = 0;
        for i in 0..self.len {
            let j = (i + 1) % self.len;
            let (vi, vj) = (self.verts[i], self.verts[j]);
            if d[i] >= 0.0 {
                out[n] = vi;
                n += 1;
            }
            if (d[i] >= 0.0) != (d[j] >= 0.0) {
                let t = d[i] / (d[i] - d[j]);
                out[n] = vi + (vj - vi) * t;
                n += 1;
            }
        }
        self.verts = out;
        self.len = n;
        n >= 3
    }
}

/// Outcode bits of a clip-space vertex against the six frustum planes.
#[inline]
fn outcode(v: &Vector4<f64>) -> u8 {
    let mut c = 0;
    if v.x < -v.w {
        c |= 1;
    }
    if v.x > v.w {
        c |= 2;
    }
    if v.y < -v.w {
        c |= 4;
    }
    if v.y > v.w {
        c |= 8;
    }
    if v.z < -v.w {
        c |= 16;
    }
    if v.z > v.w {
        c |= 32;
    }
    c
}

/// Result of culling a scene against a frustum: per object, the sorted
/// indices of triangles that may intersect it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CulledScene {
    pub per_object: Vec<Vec<u32>>,
}

impl CulledScene {
    pub fn triangle_count(&self) -> usize {
        self.per_object.iter().map(Vec::len).sum()
    }
}

/// Clip-space vertices of every object that survived object-level culling.
pub(crate) struct ClipScene {
    objects: Vec<Option<Vec<Vector4<f64>>>>,
}

impl ClipScene {
    /// Transforms each object's vertices to clip space, skipping objects
    /// whose bounding sphere lies entirely outside the frustum.
    pub(crate) fn build(scene: &Scene, view_projection: &Matrix4<f64>) -> Self {
        let planes = FrustumPlanes::from_matrix(view_projection);
        let objects = scene
            .objects
            .iter()
            .map(|o| {
                let (c, r) = o.mesh.bounding_sphere();
                let center = o.transform.apply_point(&c);
                let s = o.transform.scale.abs().max();
                if !planes.sphere_may_intersect(&center, r * s) {
                    return None;
                }
                let mvp = view_projection * o.transform.matrix();
                Some(o.mesh.positions.iter().map(|p| mvp * p.to_homogeneous()).collect())
            })
            .collect();
        Self { objects }
    }

    /// Triangles with at least one vertex not outside any single plane.
    pub(crate) fn cull(&self, scene: &Scene) -> CulledScene {
        let per_object = scene
            .objects
            .iter()
            .zip(&self.objects)
            .map(|(o, clip)| match clip {
                None => Vec::new(),
                Some(clip) => {
                    let codes: Vec<u8> = clip.iter().map(outcode).collect();
                    o.mesh
                        .triangles
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| codes[t[0] as usize] & codes[t[1] as usize] & codes[t[2] as usize] == 0)
                        .map(|(i, _)| i as u32)
                        .collect()
                }
            })
            .collect();
        CulledScene { per_object }
    }

    pub(crate) fn rasterize(
        &self,
        scene: &Scene,
        culled: &CulledScene,
        view: Matrix4<f64>,
        projection: Matrix4<f64>,
        width: usize,
        height: usize,
    ) -> DepthBuffer {
        let mut buffer = DepthBuffer::empty(width, height, view, projection);
        buffer.fragments.reserve(culled.triangle_count());
        buffer.nearest.reserve(culled.triangle_count());
        buffer.spans.reserve(culled.triangle_count() * 2);
        for (oi, (o, tris)) in scene.objects.iter().zip(&culled.per_object).enumerate() {
            let Some(clip) = &self.objects[oi] else { continue };
            for &ti in tris {
                let t = o.mesh.triangles[ti as usize];
                let verts = t.map(|i| clip[i as usize]);
                buffer.draw(
                    verts,
                    TriangleRef {
                        object: oi as u32,
                        triangle: ti,
                    },
                );
            }
        }
        buffer.finish();
        buffer
    }
}

/// Renders the nearest eye-space depth of every scene triangle inside the
/// frustum of `projection`, at `width × height` pixels.
pub fn rasterize_depth(
    scene: &Scene,
    view: &Matrix4<f64>,
    projection: &Matrix4<f64>,
    width: usize,
    height: usize,
) -> DepthBuffer {
    rasterize_culled(scene, view, projection, width, height).0
}

/// [`rasterize_depth`], also returning the triangles that survived culling.
pub fn rasterize_culled(
    scene: &Scene,
    view: &Matrix4<f64>,
    projection: &Matrix4<f64>,
    width: usize,
    height: usize,
) -> (DepthBuffer, CulledScene) {
    let clip = ClipScene::build(scene, &(projection * view));
    let culled = clip.cull(scene);
    let buffer = clip.rasterize(scene, &culled, *view, *projection, width, height);
    (buffer, culled)
}
