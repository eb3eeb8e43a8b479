//! Command-line front end: synthetic scene generation, novel view
//! rendering, metric evaluation, mask propagation, and depth alignment.
//! Errors exit nonzero with a machine-readable JSON message on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dvs_core::error::{Error, Result};
use dvs_core::geometry::Point3;
use dvs_core::metrics::{aggregate, psnr, ssim, FrameMetrics};
use dvs_core::pipeline::{
    render_view, DynRenderer, PipelineConfig, RenderJob, SelectMode, StaticBackend,
};
use dvs_core::raster::Raster;
use dvs_core::scene_io::{
    load_scene, read_raster, write_mask_png, write_raster, write_rgb_png, RasterKind,
};
use dvs_core::synthetic::{gen_synthetic, SyntheticConfig};

#[derive(Parser)]
#[command(name = "dvs", about = "Space-time view synthesis from monocular video bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the analytic synthetic scene bundle.
    GenSynthetic {
        /// Output scene directory.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file overriding the scene parameters.
        #[arg(long)]
        scene_config: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        size: u32,
        #[arg(long, default_value_t = 8)]
        frames: usize,
    },
    /// Render a novel space-time view.
    Render {
        /// Input scene directory.
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for the rendered view.
        #[arg(long)]
        out: PathBuf,
        /// Target time.
        #[arg(long)]
        time: f64,
        /// Target camera position "x,y,z" (axis-aligned camera with the
        /// scene's shared intrinsics). Defaults to the nearest frame's pose.
        #[arg(long)]
        pose: Option<String>,
        #[arg(long, value_enum, default_value = "splat")]
        dyn_renderer: DynRenderer,
        #[arg(long, value_enum, default_value = "points")]
        static_backend: StaticBackend,
        #[arg(long, value_enum, default_value = "window")]
        select: SelectMode,
        #[arg(long)]
        n_spatial: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        use_tracks: bool,
        #[arg(long)]
        emit_diagnostics: bool,
        /// JSON file overriding pipeline constants.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare rendered images against ground truth.
    Evaluate {
        /// Directory of rendered PNGs.
        #[arg(long)]
        rendered: PathBuf,
        /// Directory of ground-truth PNGs with matching file names.
        #[arg(long)]
        truth: PathBuf,
        /// Optional directory of dynamic-region masks (mask_*.png).
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Restrict metrics to covered (non-hole) pixels using
        /// coverage_*.png masks next to the renders.
        #[arg(long)]
        eval_coverage: bool,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporally propagate raw dynamic masks through a scene.
    PropagateMasks {
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for the propagated masks.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        history_threshold: f64,
        #[arg(long, default_value_t = 0.10)]
        segment_overlap: f64,
    },
    /// Fit scale and shift aligning source depths to reference depths.
    AlignDepth {
        /// Source depth raster (.pgdv).
        #[arg(long)]
        source: PathBuf,
        /// Reference depth raster (.pgdv).
        #[arg(long)]
        reference: PathBuf,
    },
}

fn parse_pose(s: &str) -> Result<Point3> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad --pose '{s}': {e}")))?;
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "--pose needs three comma-separated numbers, got '{s}'"
        )));
    }
    Ok(Point3::new(parts[0], parts[1], parts[2]))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_png_rgb(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Raster::from_vec(w, h, 3, data)
}

fn read_png_mask(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .as_raw()
        .iter()
        .map(|&b| if b > 0 { 1.0 } else { 0.0 })
        .collect();
    Raster::from_vec(w, h, 1, data)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic {
            out,
            scene_config,
            size,
            frames,
        } => {
            let cfg = match scene_config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)?,
                None => SyntheticConfig {
                    width: size,
                    height: size,
                    n_frames: frames,
                    ..Default::default()
                },
            };
            gen_synthetic(&cfg, &out)?;
            println!("{}", serde_json::json!({"scene": out, "frames": cfg.n_frames}));
            Ok(())
        }
        Command::Render {
            scene,
            out,
            time,
            pose,
            dyn_renderer,
            static_backend,
            select,
            n_spatial,
            seed,
            use_tracks,
            emit_diagnostics,
            config,
        } => {
            let scene_data =
                load_scene(&scene).map_err(|e| e.with_context(format!("loading {}", scene.display())))?;
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = n_spatial {
                cfg.n_spatial = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let target_camera = match pose {
                Some(p) => {
                    let center = parse_pose(&p)?;
                    // Reuse the nearest frame's intrinsics for the new pose.
                    let reference = nearest_frame(&scene_data.times(), time);
                    let frame_cam = &scene_data.frames[reference].camera;
                    frame_cam.with_center(center)?
                }
                None => {
                    let reference = nearest_frame(&scene_data.times(), time);
                    scene_data.frames[reference].camera.clone()
                }
            };
            let job = RenderJob {
                target_camera,
                t_tgt: time,
                dyn_renderer,
                static_backend,
                select,
                use_tracks,
                emit_diagnostics,
                config: cfg,
            };
            let result = render_view(&scene_data, &job)
                .map_err(|e| e.with_context(format!("rendering t={time}")))?;
            fs::create_dir_all(&out)?;
            // File names follow the evaluate conventions: mask_*/coverage_*
            // are skipped when listing renders, and coverage_render.png is
            // what --eval-coverage picks up next to render.png.
            write_rgb_png(&out.join("render.png"), &result.output.rgb)?;
            write_mask_png(&out.join("mask_dyn.png"), &result.output.dyn_mask)?;
            write_mask_png(&out.join("mask_hole.png"), &result.output.hole_mask)?;
            // Coverage = everything that is not a hole.
            let mut coverage = result.output.hole_mask.clone();
            for v in coverage.data_mut() {
                *v = 1.0 - *v;
            }
            write_mask_png(&out.join("coverage_render.png"), &coverage)?;
            for (name, raster) in &result.diagnostics {
                write_raster(&out.join(format!("{name}.pgdv")), RasterKind::Feat, raster)?;
            }
            println!("{}", serde_json::json!({"render": out.join("render.png")}));
            Ok(())
        }
        Command::Evaluate {
            rendered,
            truth,
            masks,
            eval_coverage,
            out,
        } => {
            let mut names: Vec<String> = fs::read_dir(&rendered)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".png") && !n.starts_with("mask_") && !n.starts_with("coverage_"))
                .collect();
            names.sort();
            if names.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no renders found in {}",
                    rendered.display()
                )));
            }
            let mut frames = Vec::new();
            let mut rows = Vec::new();
            for name in &names {
                let a = read_png_rgb(&rendered.join(name))?;
                let b = read_png_rgb(&truth.join(name))
                    .map_err(|e| e.with_context(format!("ground truth for {name}")))?;
                let mask = match &masks {
                    Some(dir) => Some(read_png_mask(&dir.join(format!("mask_{name}")))?),
                    None => None,
                };
                let coverage = if eval_coverage {
                    let path = rendered.join(format!("coverage_{name}"));
                    if path.exists() {
                        Some(read_png_mask(&path)?)
                    } else {
                        None
                    }
                } else {
                    None
                };
                let psnr_full = psnr(&a, &b, None, coverage.as_ref())?;
                let ssim_full = ssim(&a, &b, None)?;
                let psnr_dynamic = match &mask {
                    Some(m) => Some(psnr(&a, &b, Some(m), coverage.as_ref())?),
                    None => None,
                };
                let psnr_static = match &mask {
                    Some(m) => {
                        let mut inv = m.clone();
                        for v in inv.data_mut() {
                            *v = 1.0 - *v;
                        }
                        Some(psnr(&a, &b, Some(&inv), coverage.as_ref())?)
                    }
                    None => None,
                };
                rows.push(serde_json::json!({
                    "frame": name,
                    "psnr": psnr_full,
                    "ssim": ssim_full,
                    "psnr_dynamic": psnr_dynamic,
                    "psnr_static": psnr_static,
                }));
                frames.push(FrameMetrics {
                    psnr_full,
                    psnr_dynamic,
                    psnr_static,
                    ssim_full,
                });
            }
            let report = aggregate(&[frames])?;
            let doc = serde_json::json!({
                "frames": rows,
                "scene_psnr": report.scene_psnr,
                "scene_ssim": report.scene_ssim,
                "overall_psnr": report.overall_psnr,
                "overall_ssim": report.overall_ssim,
            });
            let text = serde_json::to_string_pretty(&doc)?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::PropagateMasks {
            scene,
            out,
            history_threshold,
            segment_overlap,
        } => {
            let scene_data = load_scene(&scene)?;
            let raw: Vec<Raster> = scene_data
                .frames
                .iter()
                .map(|f| f.dynamic_mask.clone())
                .collect();
            let cfg = dvs_core::mask_pipeline::MaskConfig {
                history_threshold,
                segment_overlap,
            };
            let propagated = dvs_core::mask_pipeline::propagate_masks(
                &raw,
                &scene_data.flows,
                scene_data.segments.as_deref(),
                &cfg,
            )?;
            fs::create_dir_all(&out)?;
            for (i, mask) in propagated.iter().enumerate() {
                write_mask_png(&out.join(format!("{i:05}.png")), mask)?;
            }
            println!("{}", serde_json::json!({"masks": propagated.len()}));
            Ok(())
        }
        Command::AlignDepth { source, reference } => {
            let (_, src) = read_raster(&source)?;
            let (_, re) = read_raster(&reference)?;
            let s: Vec<f64> = src.data().iter().map(|&v| v as f64).collect();
            let r: Vec<f64> = re.data().iter().map(|&v| v as f64).collect();
            if s.len() != r.len() {
                return Err(Error::DimensionMismatch(format!(
                    "depth rasters differ in size: {} vs {}",
                    s.len(),
                    r.len()
                )));
            }
            let (scale, shift) = dvs_core::scene_io::align_depth_scale_shift(&s, &r)?;
            println!("{}", serde_json::json!({"scale": scale, "shift": shift}));
            Ok(())
        }
    }
}

fn nearest_frame(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &ti) in times.iter().enumerate() {
        if (ti - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
