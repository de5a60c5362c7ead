//! Configuration files, map persistence and per-sample export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{DensityMap, GenerationConfig};
use crate::error::{Error, Result};
use crate::gaze::TimeWindow;
use crate::geometry::{sample_local_position, SampledMesh, Scene};

/// Configuration file contents. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k: Option<f64>,
    theta: Option<f64>,
    zbuffer_resolution: Option<i64>,
    epsilon_abs: Option<f64>,
    epsilon_rel: Option<f64>,
    time_window: Option<[f64; 2]>,
    filtering_enabled: Option<bool>,
    objects: Option<Vec<String>>,
}

/// Reads a TOML configuration file. Missing keys keep their defaults,
/// unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<GenerationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<GenerationConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            path: path.to_owned(),
            line,
            message: e.message().to_owned(),
        }
    })?;
    let mut c = GenerationConfig::default();
    if let Some(v) = file.k {
        c.k = v;
    }
    if let Some(v) = file.theta {
        c.theta = v;
    }
    if let Some(v) = file.zbuffer_resolution {
        c.zbuffer_resolution = u32::try_from(v)
            .map_err(|_| Error::config("zbuffer_resolution", format!("must be a positive integer, got {v}")))?;
    }
    if let Some(v) = file.epsilon_abs {
        c.epsilon_abs = v;
    }
    if let Some(v) = file.epsilon_rel {
        c.epsilon_rel = v;
    }
    if let Some([a, b]) = file.time_window {
        c.time_window = TimeWindow::new(a, b);
    }
    if let Some(v) = file.filtering_enabled {
        c.filtering_enabled = v;
    }
    c.objects = file.objects;
    c.validate()?;
    Ok(c)
}

/// Hex SHA-256 over everything that fixes the sample layout and sample
/// positions: object ids, mesh contents, base transforms, `k` and the
/// per-triangle resolutions.
pub fn layout_hash(scene: &Scene, sampled: &[SampledMesh]) -> String {
    let mut h = Sha256::new();
    h.update((scene.objects.len() as u64).to_le_bytes());
    for (o, sm) in scene.objects.iter().zip(sampled) {
        h.update((o.id.len() as u64).to_le_bytes());
        h.update(o.id.as_bytes());
        o.mesh.hash_into(&mut h);
        let t = &o.transform;
        let q = t.rotation.quaternion();
        for v in t.translation.iter().chain(q.coords.iter()).chain(t.scale.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(sm.density_k.to_bits().to_le_bytes());
        for ts in &sm.triangles {
            h.update(ts.resolution.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const MAP_MAGIC: &[u8] = b"GAZEMAP1\n";

/// JSON header line of a map file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapHeader {
    pub layout_hash: String,
    pub k: f64,
    pub objects: Vec<(String, usize)>,
    pub global_max: f64,
    pub normalized: bool,
}

/// Writes `bytes` to a sibling temporary file and renames it into place,
/// so a failed write never leaves a partial file at `path`.
fn write_atomically(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Saves a map: magic line, JSON header line, then the values as
/// little-endian `f64` in object order.
pub fn save_map(map: &DensityMap, scene: &Scene, sampled: &[SampledMesh], path: &Path) -> Result<()> {
    map.check_layout(sampled)?;
    let header = MapHeader {
        layout_hash: layout_hash(scene, sampled),
        k: sampled.first().map_or(0.0, |s| s.density_k),
        objects: map.object_ids.iter().cloned().zip(map.values.iter().map(Vec::len)).collect(),
        global_max: map.global_max,
        normalized: map.normalized,
    };
    let json = serde_json::to_string(&header).expect("header serializes");
    write_atomically(path, |w| {
        w.write_all(MAP_MAGIC)?;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        for v in map.values.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

/// Loads a map and its header without checking it against a scene.
pub fn load_map(path: &Path) -> Result<(DensityMap, MapHeader)> {
    let invalid = |message: String| Error::InvalidMap {
        path: path.to_owned(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = vec![0u8; MAP_MAGIC.len()];
    r.read_exact(&mut magic).map_err(|_| invalid("file too short".into()))?;
    if magic != MAP_MAGIC {
        return Err(invalid("not a density map file".into()));
    }
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: MapHeader = serde_json::from_str(line.trim_end()).map_err(|e| invalid(format!("bad header: {e}")))?;
    let mut values = Vec::with_capacity(header.objects.len());
    let mut buf = [0u8; 8];
    for (id, n) in &header.objects {
        let mut v = Vec::with_capacity(*n);
        for _ in 0..*n {
            r.read_exact(&mut buf)
                .map_err(|_| invalid(format!("truncated values for `{id}`")))?;
            let x = f64::from_le_bytes(buf);
            if !(x >= 0.0 && x.is_finite()) {
                return Err(invalid(format!("value {x} in `{id}` is not a finite non-negative number")));
            }
            v.push(x);
        }
        values.push(v);
    }
    if r.read(&mut buf).map_err(|e| Error::io(path, e))? != 0 {
        return Err(invalid("trailing bytes after values".into()));
    }
    let map = DensityMap {
        object_ids: header.objects.iter().map(|(id, _)| id.clone()).collect(),
        values,
        global_max: header.global_max,
        normalized: header.normalized,
    };
    Ok((map, header))
}

/// Loads a map, rebuilds the sample layout for `scene` at the map's `k`,
/// and rejects the map if the layout hash differs.
pub fn load_map_for_scene(path: &Path, scene: &Scene) -> Result<(DensityMap, Vec<SampledMesh>)> {
    let (map, header) = load_map(path)?;
    let sampled = SampledMesh::build_all(scene, header.k)?;
    let found = layout_hash(scene, &sampled);
    if found != header.layout_hash {
        return Err(Error::LayoutMismatch {
            expected: header.layout_hash,
            found,
        });
    }
    map.check_layout(&sampled)?;
    Ok((map, sampled))
}

pub const EXPORT_HEADER: &str =
    "object_id,triangle_index,sample_index,w1,w2,w3,local_x,local_y,local_z,world_x,world_y,world_z,value";

/// Formats like C's `%.9g`.
pub fn format_g9(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        strip(&format!("{v:.decimals$}"))
    }
}

/// Writes one CSV record per sample of the selected objects, ordered by
/// object id, triangle and sample. World positions use each object's base
/// transform, not per-fixation overrides. Returns the record count.
pub fn write_export(
    map: &DensityMap,
    scene: &Scene,
    sampled: &[SampledMesh],
    objects: Option<&[String]>,
    path: &Path,
) -> Result<usize> {
    map.check_layout(sampled)?;
    let mut order: Vec<usize> = (0..scene.objects.len())
        .filter(|&i| objects.is_none_or(|ids| ids.iter().any(|id| *id == scene.objects[i].id)))
        .collect();
    if let Some(ids) = objects {
        if let Some(bad) = ids.iter().find(|id| scene.object_index(id).is_none()) {
            return Err(Error::config("objects", format!("unknown object `{bad}`")));
        }
    }
    order.sort_by(|&a, &b| scene.objects[a].id.cmp(&scene.objects[b].id));

    let mut count = 0usize;
    write_atomically(path, |w| {
        writeln!(w, "{EXPORT_HEADER}")?;
        for &oi in &order {
            let o = &scene.objects[oi];
            let sm = &sampled[oi];
            for (ti, ts) in sm.triangles.iter().enumerate() {
                for s in 0..ts.sample_count as usize {
                    let bary = sm.sample_barycentric(ti, s).map_err(std::io::Error::other)?;
                    let local = sample_local_position(&o.mesh, sm, ti, s).map_err(std::io::Error::other)?;
                    let world = o.transform.apply_point(&local);
                    let value = map.values[oi][ts.sample_offset + s];
                    write!(w, "{},{ti},{s}", o.id)?;
                    for x in bary.iter().chain(local.coords.iter()).chain(world.coords.iter()) {
                        write!(w, ",{}", format_g9(*x))?;
                    }
                    writeln!(w, ",{}", format_g9(value))?;
                    count += 1;
                }
            }
        }
        Ok(())
    })?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SceneObject, Transform};
    use crate::synthetic;

    #[test]
    fn empty_config_is_default() {
        let c = parse_config("", Path::new("c.toml")).unwrap();
        assert_eq!(c, GenerationConfig::default());
        assert_eq!(c.k, 40_000.0);
        assert_eq!(c.theta, 0.01745);
        assert_eq!(c.zbuffer_resolution, 512);
    }

    #[test]
    fn config_errors_name_the_field() {
        let p = Path::new("c.toml");
        match parse_config("k = -1", p) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "k"),
            other => panic!("{other:?}"),
        }
        match parse_config("zbuffer_resolution = -3", p) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "zbuffer_resolution"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("\nkk = 3", p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn config_keys_parse() {
        let text = "k = 1000.0\ntheta = 0.02\nzbuffer_resolution = 64\nepsilon_abs = 0.01\nepsilon_rel = 0.0\n\
                    time_window = [1.0, 2.5]\nfiltering_enabled = false\nobjects = [\"a\", \"b\"]\n";
        let c = parse_config(text, Path::new("c.toml")).unwrap();
        assert_eq!(c.k, 1000.0);
        assert_eq!(c.zbuffer_resolution, 64);
        assert_eq!(c.time_window, TimeWindow::new(1.0, 2.5));
        assert!(!c.filtering_enabled);
        assert_eq!(c.objects, Some(vec!["a".to_string(), "b".to_string()]));
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(format_g9(0.0), "0");
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(0.25), "0.25");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(0.00001234), "1.234e-05");
        assert_eq!(format_g9(-2.5), "-2.5");
        assert_eq!(format_g9(0.999999999999), "1");
    }

    fn cube_scene() -> Scene {
        Scene::new(vec![SceneObject::new("cube", synthetic::cube_mesh(1.0), Transform::identity())]).unwrap()
    }

    #[test]
    fn cube_export_has_36_records() {
        let scene = cube_scene();
        let sampled = SampledMesh::build_all(&scene, 0.1).unwrap();
        let map = DensityMap::zeros(&sampled);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert_eq!(write_export(&map, &scene, &sampled, None, &path).unwrap(), 36);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(EXPORT_HEADER));
        assert!(lines.all(|l| l.ends_with(",0")));
        let first = std::fs::read(&path).unwrap();
        write_export(&map, &scene, &sampled, None, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert_eq!(write_export(&map, &scene, &sampled, Some(&[]), &path).unwrap(), 0);
    }

    #[test]
    fn map_roundtrip_and_stale_detection() {
        let scene = cube_scene();
        let sampled = SampledMesh::build_all(&scene, 50.0).unwrap();
        let mut map = DensityMap::zeros(&sampled);
        map.values[0][3] = 2.5;
        map.global_max = 2.5;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.map");
        save_map(&map, &scene, &sampled, &path).unwrap();
        let (loaded, again) = load_map_for_scene(&path, &scene).unwrap();
        assert_eq!(loaded, map);
        assert_eq!(again, sampled);

        let edited = Scene::new(vec![SceneObject::new("cube", synthetic::cube_mesh(1.01), Transform::identity())]).unwrap();
        assert!(matches!(load_map_for_scene(&path, &edited), Err(Error::LayoutMismatch { .. })));

        std::fs::write(&path, b"garbage").unwrap();
        assert!(matches!(load_map(&path), Err(Error::InvalidMap { .. })));
    }
}
