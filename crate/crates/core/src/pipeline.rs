//! End-to-end orchestration: one render job lifts the bracketing frames
//! into a paired point cloud, positions it at the target time, renders the
//! dynamic content, renders the static content with the chosen backend,
//! and composites the two branches.

use serde::{Deserialize, Serialize};

use crate::dynamic::{
    build_paired_cloud, interpolate_cloud, remove_outliers, render_mesh, render_points,
    render_splat, select_temporal_neighbors, CycleConfig, OutlierConfig, PointRenderConfig,
    SplatConfig,
};
use crate::error::Result;
use crate::geometry::CameraModel;
use crate::metrics::{blend, RenderOutput};
use crate::raster::Raster;
use crate::scene_io::Scene;
use crate::static_render::epipolar::{render_epipolar, AggregatorConfig, AggregatorWeights};
use crate::static_render::{
    render_static_pointcloud, select_source_views, SelectionStrategy, SourceSelectionConfig,
};
use crate::tracks::{build_track_cloud, lift_tracks, merge_clouds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DynRenderer {
    Splat,
    Points,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StaticBackend {
    Points,
    Epipolar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    Window,
    Cluster,
}

/// Every tunable constant of the pipeline, with the reference defaults.
/// A JSON file with any subset of the fields overrides them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cycle_abs_tol: f64,
    pub cycle_rel_tol: f64,
    pub outlier_neighbors: usize,
    pub outlier_deviation: f64,
    pub splat_alpha: f64,
    pub point_radius: f64,
    pub mask_history_threshold: f64,
    pub segment_overlap: f64,
    pub n_spatial: usize,
    pub time_window: f64,
    pub n_cluster: usize,
    pub seed: u64,
    pub n_blocks: usize,
    pub n_ray_samples: usize,
    pub feature_dim: usize,
    /// Temporal candidate-window size around the target time.
    pub n_temporal: usize,
    /// Subsampling stride for static point-cloud lifting.
    pub static_stride: usize,
    pub background: [f32; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cycle_abs_tol: 1.0,
            cycle_rel_tol: 0.05,
            outlier_neighbors: 50,
            outlier_deviation: 0.1,
            splat_alpha: 100.0,
            point_radius: 0.01,
            mask_history_threshold: 0.5,
            segment_overlap: 0.10,
            n_spatial: 10,
            time_window: 12.0,
            n_cluster: 40,
            seed: 0,
            n_blocks: 2,
            n_ray_samples: 64,
            feature_dim: 16,
            n_temporal: 6,
            static_stride: 1,
            background: [0.0; 3],
        }
    }
}

impl PipelineConfig {
    pub fn cycle(&self) -> CycleConfig {
        CycleConfig {
            abs_tol: self.cycle_abs_tol,
            rel_tol: self.cycle_rel_tol,
        }
    }

    pub fn outliers(&self) -> OutlierConfig {
        OutlierConfig {
            n_neighbors: self.outlier_neighbors,
            deviation: self.outlier_deviation,
        }
    }

    pub fn splat(&self) -> SplatConfig {
        SplatConfig {
            alpha: self.splat_alpha,
        }
    }

    pub fn points(&self) -> PointRenderConfig {
        PointRenderConfig {
            radius: self.point_radius,
        }
    }

    pub fn mask(&self) -> crate::mask_pipeline::MaskConfig {
        crate::mask_pipeline::MaskConfig {
            history_threshold: self.mask_history_threshold,
            segment_overlap: self.segment_overlap,
        }
    }

    pub fn selection(&self, mode: SelectMode) -> SourceSelectionConfig {
        SourceSelectionConfig {
            n_spatial: self.n_spatial,
            strategy: match mode {
                SelectMode::Window => SelectionStrategy::WindowNn,
                SelectMode::Cluster => SelectionStrategy::Cluster,
            },
            time_window: self.time_window,
            n_cluster: self.n_cluster,
            rng_seed: self.seed,
        }
    }

    pub fn aggregator(&self) -> AggregatorConfig {
        AggregatorConfig {
            n_blocks: self.n_blocks,
            n_ray_samples: self.n_ray_samples,
            feature_dim: self.feature_dim,
            weight_seed: self.seed,
        }
    }
}

/// One novel view to synthesize.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub target_camera: CameraModel,
    pub t_tgt: f64,
    pub dyn_renderer: DynRenderer,
    pub static_backend: StaticBackend,
    pub select: SelectMode,
    pub use_tracks: bool,
    pub emit_diagnostics: bool,
    pub config: PipelineConfig,
}

pub struct RenderResult {
    pub output: RenderOutput,
    /// Named diagnostic rasters (splat weights, per-block sigma maps).
    pub diagnostics: Vec<(String, Raster)>,
}

pub fn render_view(scene: &Scene, job: &RenderJob) -> Result<RenderResult> {
    let cfg = &job.config;
    let times = scene.times();
    let (i_minus, i_plus) = select_temporal_neighbors(&times, job.t_tgt)
        .map_err(|e| e.with_context("selecting temporal neighbor frames"))?;
    let frame_minus = &scene.frames[i_minus];
    let frame_plus = &scene.frames[i_plus];

    let flows = if i_minus == i_plus {
        None
    } else {
        Some((
            scene.flow(i_minus, i_plus)?,
            scene.flow(i_plus, i_minus)?,
        ))
    };
    let paired = build_paired_cloud(frame_minus, i_minus, frame_plus, flows, &cfg.cycle())
        .map_err(|e| e.with_context("building the paired dynamic point cloud"))?;
    let mut cloud = interpolate_cloud(&paired, times[i_minus], times[i_plus], job.t_tgt)?;

    if job.use_tracks {
        if let Some(tracks) = &scene.tracks {
            let trajectories = lift_tracks(tracks, scene)?;
            let track_cloud = build_track_cloud(&trajectories, job.t_tgt, scene)?;
            cloud = merge_clouds(cloud, track_cloud);
        }
    }
    let cloud = remove_outliers(&cloud, &cfg.outliers())?;

    let mut diagnostics = Vec::new();
    let (dynamic_rgb, dyn_mask) = match job.dyn_renderer {
        DynRenderer::Splat => {
            let out = render_splat(&cloud, &job.target_camera, &cfg.splat())?;
            if job.emit_diagnostics {
                diagnostics.push(("splat_weight".to_string(), out.weight));
            }
            (out.rgb, out.dyn_mask)
        }
        DynRenderer::Points => render_points(&cloud, &job.target_camera, &cfg.points())?,
        DynRenderer::Mesh => render_mesh(&cloud, &job.target_camera)?,
    };

    let centers: Vec<_> = scene.frames.iter().map(|f| f.camera.center()).collect();
    let selected = select_source_views(
        &centers,
        &times,
        job.target_camera.center(),
        job.t_tgt,
        &cfg.selection(job.select),
    )
    .map_err(|e| e.with_context("selecting static source views"))?;

    let (static_rgb, static_coverage) = match job.static_backend {
        StaticBackend::Points => render_static_pointcloud(
            scene,
            &selected,
            &job.target_camera,
            cfg.static_stride,
            &cfg.points(),
        )?,
        StaticBackend::Epipolar => {
            let sources: Vec<_> = selected.iter().map(|&i| &scene.frames[i]).collect();
            let agg_cfg = cfg.aggregator();
            let weights = AggregatorWeights::seeded(&agg_cfg);
            let out = render_epipolar(&sources, &job.target_camera, &agg_cfg, &weights)?;
            if job.emit_diagnostics {
                for (p, sigma) in out.sigma.into_iter().enumerate() {
                    diagnostics.push((format!("sigma_block_{p}"), sigma));
                }
            }
            (out.rgb, out.coverage)
        }
    };

    let output = blend(
        &static_rgb,
        &static_coverage,
        &dynamic_rgb,
        &dyn_mask,
        cfg.background,
    )?;
    Ok(RenderResult {
        output,
        diagnostics,
    })
}

impl RenderJob {
    /// A job with the reference defaults for one target view.
    pub fn new(target_camera: CameraModel, t_tgt: f64) -> Self {
        Self {
            target_camera,
            t_tgt,
            dyn_renderer: DynRenderer::Splat,
            static_backend: StaticBackend::Points,
            select: SelectMode::Window,
            use_tracks: false,
            emit_diagnostics: false,
            config: PipelineConfig::default(),
        }
    }
}
