//! Surface-based fixation density maps over triangle meshes.
//!
//! Every triangle of every mesh is subdivided into a barycentric grid whose
//! resolution adapts to the triangle's area, so the map is independent of
//! UV layout and mesh resolution. Fixations are projected onto those samples
//! as Gaussian cones, occlusion is resolved with a software z-buffer, and a
//! cropped per-fixation frustum keeps the work proportional to what the gaze
//! actually covers.
//!
//! The pipeline is:
//!
//! 1. [`geometry`]: load a [`Scene`], build one [`SampledMesh`] per object.
//! 2. [`gaze`]: parse fixations, build the Gaussian cone and crop frustum.
//! 3. [`raster`]: per-fixation depth buffers and visibility queries.
//! 4. [`density`]: accumulate, track the maximum, normalize.
//! 5. [`io`]: configuration, map persistence and per-sample export.
//! 6. [`render`]: offscreen heatmap images.
//!
//! [`oracle`] holds brute-force reference implementations used by the test
//! suites, and [`synthetic`] builds procedural scenes and fixation sets.

pub mod bench;
pub mod density;
pub mod error;
pub mod gaze;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod raster;
pub mod render;
pub mod synthetic;

pub use density::{DensityMap, GenerationConfig};
pub use error::{Error, Result};
pub use gaze::{CropFrustum, EllipseParams, Fixation, Frustum, GazeCone};
pub use geometry::{Mesh, SampledMesh, Scene, SceneObject, Transform, TriangleSampling};
pub use raster::DepthBuffer;
