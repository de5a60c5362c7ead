//! `gazemap`: generate, export, render and benchmark fixation density maps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gazemap_core::bench::run_bench;
use gazemap_core::density::generate_normalized;
use gazemap_core::gaze::{parse_fixation_log, TimeWindow};
use gazemap_core::io::{load_config, load_map_for_scene, save_map, write_export};
use gazemap_core::render::{render_heatmap, save_png, Camera, ColorMap};
use gazemap_core::{Fixation, GenerationConfig, SampledMesh, Scene};
use nalgebra::Point3;

/// Exit status for bad flags or configuration values.
const EXIT_USAGE: u8 = 1;
/// Exit status for unreadable, malformed or inconsistent input data.
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "gazemap", version, about = "Surface-sampled fixation density maps over triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accumulate fixations into a normalized map and save it.
    Generate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        gen: GenerationFlags,
        /// Map file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one CSV record per sample of a saved map.
    Export {
        /// Map file written by `generate`.
        #[arg(long)]
        map: PathBuf,
        /// Scene manifest the map was generated for.
        #[arg(long)]
        scene: PathBuf,
        /// Comma-separated object ids to export (default: all).
        #[arg(long, value_delimiter = ',')]
        objects: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a saved map from a camera as a PNG heatmap.
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Camera position, `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        eye: Point3<f64>,
        /// Point the camera looks at, `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        target: Point3<f64>,
        /// Vertical field of view, degrees.
        #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
        fov_deg: f64,
        #[arg(long, default_value_t = 1280)]
        width: u32,
        #[arg(long, default_value_t = 720)]
        height: u32,
        /// Exponent applied to normalized values before coloring; below 1
        /// widens the hot areas.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Color stops file, one `value r g b` per line.
        #[arg(long)]
        colormap: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time filtered against unfiltered generation.
    Bench {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        gen: GenerationFlags,
        /// Repetitions of each path.
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
}

#[derive(Args)]
struct Input {
    /// Scene manifest (TOML listing OBJ meshes and their transforms).
    #[arg(long)]
    scene: PathBuf,
    /// Fixation log.
    #[arg(long)]
    fixations: PathBuf,
}

/// Generation parameters. Flags override the config file, which overrides
/// the defaults.
#[derive(Args)]
struct GenerationFlags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling density, samples per m².
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Angular standard deviation of the gaze, degrees.
    #[arg(long, allow_negative_numbers = true)]
    theta_deg: Option<f64>,
    /// Side of the square per-fixation depth buffer, pixels.
    #[arg(long)]
    zbuffer_res: Option<u32>,
    /// Absolute depth tolerance of the occlusion test, meters.
    #[arg(long, allow_negative_numbers = true)]
    epsilon_abs: Option<f64>,
    /// Relative depth tolerance of the occlusion test.
    #[arg(long, allow_negative_numbers = true)]
    epsilon_rel: Option<f64>,
    /// Only fixations starting in `[t0, t1)` seconds, as `t0:t1`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    time_window: Option<TimeWindow>,
    /// Evaluate every sample against a full-view depth buffer.
    #[arg(long, conflicts_with = "filtering")]
    no_filtering: bool,
    /// Crop each fixation's depth buffer to its gaze cone (the default).
    #[arg(long)]
    filtering: bool,
    /// Comma-separated ids of the objects that accumulate values (default:
    /// all). Other objects still occlude.
    #[arg(long, value_delimiter = ',')]
    objects: Option<Vec<String>>,
}

impl GenerationFlags {
    fn resolve(&self) -> Result<GenerationConfig> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => GenerationConfig::default(),
        };
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.theta_deg {
            c.theta = v.to_radians();
        }
        if let Some(v) = self.zbuffer_res {
            c.zbuffer_resolution = v;
        }
        if let Some(v) = self.epsilon_abs {
            c.epsilon_abs = v;
        }
        if let Some(v) = self.epsilon_rel {
            c.epsilon_rel = v;
        }
        if let Some(w) = self.time_window {
            c.time_window = w;
        }
        if self.no_filtering {
            c.filtering_enabled = false;
        }
        if self.filtering {
            c.filtering_enabled = true;
        }
        if let Some(ids) = &self.objects {
            c.objects = Some(ids.iter().filter(|s| !s.is_empty()).cloned().collect());
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_point(s: &str) -> Result<Point3<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Point3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers `x,y,z`, got `{s}`")),
    }
}

fn parse_window(s: &str) -> Result<TimeWindow, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `t0:t1`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if a.is_nan() || b.is_nan() || a > b {
        return Err(format!("start must not exceed end, got `{s}`"));
    }
    Ok(TimeWindow::new(a, b))
}

struct Loaded {
    scene: Scene,
    sampled: Vec<SampledMesh>,
    fixations: Vec<Fixation>,
}

fn load_inputs(input: &Input, config: &GenerationConfig) -> Result<Loaded> {
    let t = Instant::now();
    let scene = Scene::load_manifest(&input.scene)?;
    let fixations = parse_fixation_log(&input.fixations, TimeWindow::all())?;
    let load = t.elapsed();
    let t = Instant::now();
    let sampled = SampledMesh::build_all(&scene, config.k)?;
    let samples: usize = sampled.iter().map(|m| m.total_samples).sum();
    println!(
        "scene: {} objects, {} triangles, {samples} samples at k = {}",
        scene.objects.len(),
        scene.triangle_count(),
        config.k
    );
    println!("fixations: {} in log", fixations.len());
    println!("{:<11}{:>9.3} s", "load", load.as_secs_f64());
    println!("{:<11}{:>9.3} s", "sampling", t.elapsed().as_secs_f64());
    Ok(Loaded { scene, sampled, fixations })
}

fn generate(input: &Input, flags: &GenerationFlags, out: &Path) -> Result<()> {
    let config = flags.resolve()?;
    let Loaded { scene, sampled, fixations } = load_inputs(input, &config)?;
    let g = generate_normalized(&scene, &sampled, &fixations, &config, |_, _| {})?;
    let t = Instant::now();
    save_map(&g.map, &scene, &sampled, out)?;
    let save = t.elapsed();
    println!(
        "used {} fixations ({} without a crop frustum), filtering {}",
        g.fixations,
        g.fallbacks,
        if config.filtering_enabled { "on" } else { "off" }
    );
    for (phase, d) in [
        ("cull", g.timings.cull),
        ("rasterize", g.timings.rasterize),
        ("accumulate", g.timings.accumulate),
        ("normalize", g.timings.normalize),
        ("save", save),
    ] {
        println!("{phase:<11}{:>9.3} s", d.as_secs_f64());
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn export(map: &Path, scene: &Path, objects: Option<&[String]>, out: &Path) -> Result<()> {
    let scene = Scene::load_manifest(scene)?;
    let (map, sampled) = load_map_for_scene(map, &scene)?;
    let objects: Option<Vec<String>> = objects.map(|ids| ids.iter().filter(|s| !s.is_empty()).cloned().collect());
    let t = Instant::now();
    let n = write_export(&map, &scene, &sampled, objects.as_deref(), out)?;
    println!("wrote {n} records to {} in {:.3} s", out.display(), t.elapsed().as_secs_f64());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn render(
    map: &Path,
    scene: &Path,
    eye: Point3<f64>,
    target: Point3<f64>,
    fov_deg: f64,
    (width, height): (u32, u32),
    gamma: f64,
    colormap: Option<&Path>,
    out: &Path,
) -> Result<()> {
    anyhow::ensure!(width > 0 && height > 0, UsageError("image size must be positive".into()));
    let colormap = match colormap {
        Some(path) => ColorMap::load(path)?,
        None => ColorMap::default(),
    }
    .with_gamma(gamma)?;
    let camera = Camera::look_at(eye, target, fov_deg.to_radians(), width as f64 / height as f64)?;
    let scene = Scene::load_manifest(scene)?;
    let (mut map, sampled) = load_map_for_scene(map, &scene)?;
    map.normalize();
    let t = Instant::now();
    let img = render_heatmap(&scene, &map, &sampled, &camera, &colormap, width, height)?;
    save_png(&img, out)?;
    println!("wrote {width}x{height} image to {} in {:.3} s", out.display(), t.elapsed().as_secs_f64());
    Ok(())
}

fn bench(input: &Input, flags: &GenerationFlags, reps: usize) -> Result<()> {
    anyhow::ensure!(reps > 0, UsageError("--reps must be at least 1".into()));
    let config = flags.resolve()?;
    let Loaded { scene, sampled, fixations } = load_inputs(input, &config)?;
    let report = run_bench(&scene, &sampled, &fixations, &config, reps, |rep, filtered, secs| {
        let path = if filtered { "filtered" } else { "unfiltered" };
        eprintln!("rep {rep:>3} {path:<10} {secs:.3} s");
    })?;
    println!("{report}");
    Ok(())
}

/// A usage problem detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<gazemap_core::Error>() {
        Some(e) if e.is_usage_error() => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { input, gen, out } => generate(&input, &gen, &out),
        Command::Export { map, scene, objects, out } => export(&map, &scene, objects.as_deref(), &out),
        Command::Render {
            map,
            scene,
            eye,
            target,
            fov_deg,
            width,
            height,
            gamma,
            colormap,
            out,
        } => render(&map, &scene, eye, target, fov_deg, (width, height), gamma, colormap.as_deref(), &out),
        Command::Bench { input, gen, reps } => bench(&input, &gen, reps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
