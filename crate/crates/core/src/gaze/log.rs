//! Line-oriented fixation logs.
//!
//! One fixation per line, fields separated by commas and/or whitespace:
//!
//! ```text
//! start_time_s duration_s  cam_x cam_y cam_z  cam_qx cam_qy cam_qz cam_qw
//!   left right top bottom near far  gaze_x gaze_y gaze_z
//!   [object_id tx ty tz qx qy qz qw sx sy sz]...
//! ```
//!
//! The first 18 numeric fields are mandatory. Each optional trailing group of
//! 11 fields overrides one object's transform for that fixation. Lines
//! starting with `#` are comments, and a single header line (first token not
//! a number) may precede the records.

use std::path::Path;

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{Fixation, Frustum};
use crate::error::{Error, Result};
use crate::geometry::{ObjectOverride, Transform};

const BASE_FIELDS: usize = 18;
const OVERRIDE_FIELDS: usize = 11;

/// Half-open time interval `[start, end)` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self::all()
    }
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn all() -> Self {
        Self {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        }
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

pub fn parse_fixation_log(path: &Path, window: TimeWindow) -> Result<Vec<Fixation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fixation_text(&text, path, window)
}

/// Parses log text; `path` is only used in error messages.
pub fn parse_fixation_text(text: &str, path: &Path, window: TimeWindow) -> Result<Vec<Fixation>> {
    let mut out = Vec::new();
    let mut seen_record = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if !seen_record && tokens[0].parse::<f64>().is_err() {
            // Header line.
            seen_record = true;
            continue;
        }
        seen_record = true;
        let fixation = parse_record(&tokens).map_err(|message| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            message,
        })?;
        if window.contains(fixation.start_time) {
            out.push(fixation);
        }
    }
    Ok(out)
}

fn parse_record(tokens: &[&str]) -> std::result::Result<Fixation, String> {
    if tokens.len() < BASE_FIELDS || (tokens.len() - BASE_FIELDS) % OVERRIDE_FIELDS != 0 {
        return Err(format!(
            "expected {BASE_FIELDS} fields plus groups of {OVERRIDE_FIELDS}, got {}",
            tokens.len()
        ));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        let v: f64 = tokens[i]
            .parse()
            .map_err(|_| format!("field {} is not a number: `{}`", i + 1, tokens[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("field {} is not finite", i + 1))
        }
    };
    let start_time = num(0)?;
    let duration = num(1)?;
    if !(duration > 0.0) {
        return Err(format!("duration must be positive, got {duration}"));
    }
    let camera_position = Point3::new(num(2)?, num(3)?, num(4)?);
    let camera_rotation = crate::geometry::unit_quaternion([num(5)?, num(6)?, num(7)?, num(8)?])
        .map_err(|e| e.to_string())?;
    // Log order is left, right, top, bottom, near, far.
    let frustum = Frustum::new(num(9)?, num(10)?, num(12)?, num(11)?, num(13)?, num(14)?)
        .map_err(|e| e.to_string())?;
    let gaze = Vector3::new(num(15)?, num(16)?, num(17)?);
    if !(gaze.norm() > 0.0) {
        return Err("gaze direction has zero length".into());
    }
    let gaze_dir = Unit::new_normalize(gaze);
    if !(gaze_dir.z < 0.0) {
        return Err("gaze direction must have a negative z component".into());
    }

    let mut overrides = Vec::new();
    let mut at = BASE_FIELDS;
    while at < tokens.len() {
        let object_id = tokens[at].to_owned();
        let v = |k: usize| num(at + 1 + k);
        let transform = Transform::from_parts(
            [v(0)?, v(1)?, v(2)?],
            [v(3)?, v(4)?, v(5)?, v(6)?],
            [v(7)?, v(8)?, v(9)?],
        )
        .map_err(|e| format!("override for `{object_id}`: {e}"))?;
        overrides.push(ObjectOverride { object_id, transform });
        at += OVERRIDE_FIELDS;
    }

    Ok(Fixation {
        start_time,
        duration,
        camera_position,
        camera_rotation,
        frustum,
        gaze_dir,
        overrides,
    })
}

/// Formats a fixation as one log line, the inverse of the parser.
pub fn format_fixation(f: &Fixation) -> String {
    let q = f.camera_rotation.quaternion();
    let mut fields: Vec<String> = vec![
        f.start_time,
        f.duration,
        f.camera_position.x,
        f.camera_position.y,
        f.camera_position.z,
        q.i,
        q.j,
        q.k,
        q.w,
        f.frustum.left,
        f.frustum.right,
        f.frustum.top,
        f.frustum.bottom,
        f.frustum.near,
        f.frustum.far,
        f.gaze_dir.x,
        f.gaze_dir.y,
        f.gaze_dir.z,
    ]
    .into_iter()
    .map(|v| format!("{v:?}"))
    .collect();
    for ov in &f.overrides {
        let t = &ov.transform;
        let q = t.rotation.quaternion();
        fields.push(ov.object_id.clone());
        for v in [
            t.translation.x,
            t.translation.y,
            t.translation.z,
            q.i,
            q.j,
            q.k,
            q.w,
            t.scale.x,
            t.scale.y,
            t.scale.z,
        ] {
            fields.push(format!("{v:?}"));
        }
    }
    fields.join(",")
}

pub const LOG_HEADER: &str = "start_time,duration,cam_x,cam_y,cam_z,cam_qx,cam_qy,cam_qz,cam_qw,left,right,top,bottom,near,far,gaze_x,gaze_y,gaze_z";
