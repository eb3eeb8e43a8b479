//! Scene bundle loading/saving.
//!
//! Directory layout:
//! `cameras.json`, `rgb/%05d.png`, `depth/%05d.pgdv`, `mask/%05d.png`,
//! `flow/%05d_%05d.pgdv` (source_target), optional `segments/%05d.png`
//! (16-bit label ids), optional `tracks.csv`.

mod depth_align;
mod pgdv;

pub use depth_align::align_depth_scale_shift;
pub use pgdv::{read_raster, write_raster, RasterKind};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord};
use crate::raster::Raster;

/// One time step: RGB in [0,1], positive depth, binary dynamic mask,
/// camera, timestamp.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub image: Raster,
    pub depth: Raster,
    pub dynamic_mask: Raster,
    pub camera: CameraModel,
    pub time: f64,
}

/// Optical flow between two frames: `u_target = u_source + flow[u_source]`.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub source_index: usize,
    pub target_index: usize,
    pub flow: Raster,
}

impl FlowField {
    /// Bilinear flow sample (dx, dy) at `u`.
    pub fn sample(&self, u: PixelCoord) -> [f64; 2] {
        [
            self.flow.sample_channel(u, 0),
            self.flow.sample_channel(u, 1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub frame_index: usize,
    pub pos: PixelCoord,
    pub visible: bool,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub samples: Vec<TrackSample>,
}

#[derive(Debug, Clone, Default)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
}

/// Per-frame integer segment labels (class-agnostic segmentation).
#[derive(Debug, Clone)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u16>,
}

impl LabelMap {
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: Vec<FrameBundle>,
    pub flows: HashMap<(usize, usize), FlowField>,
    pub tracks: Option<TrackSet>,
    pub segments: Option<Vec<LabelMap>>,
}

impl Scene {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn flow(&self, source: usize, target: usize) -> Result<&FlowField> {
        self.flows
            .get(&(source, target))
            .ok_or(Error::MissingFlow { from_frame: source, to_frame: target })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraRecord {
    time: f64,
    /// Row-major 3x3 intrinsics.
    k: Vec<f64>,
    /// Row-major 4x4 world-to-camera extrinsics.
    e: Vec<f64>,
    width: u32,
    height: u32,
}

fn frame_name(index: usize, ext: &str) -> String {
    format!("{index:05}.{ext}")
}

fn flow_name(source: usize, target: usize) -> String {
    format!("{source:05}_{target:05}.pgdv")
}

fn read_rgb_png(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = img.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Raster::from_vec(w, h, 3, data)
}

fn read_mask_png(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    for &b in img.as_raw() {
        match b {
            0 => data.push(0.0),
            255 => data.push(1.0),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "mask {} holds value {other}, expected 0 or 255",
                    path.display()
                )))
            }
        }
    }
    Raster::from_vec(w, h, 1, data)
}

fn read_label_png(path: &Path) -> Result<LabelMap> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path)?.to_luma16();
    Ok(LabelMap {
        width: img.width() as usize,
        height: img.height() as usize,
        labels: img.as_raw().clone(),
    })
}

/// Writes a [0,1] RGB raster as 8-bit PNG.
pub fn write_rgb_png(path: &Path, raster: &Raster) -> Result<()> {
    if raster.channels() != 3 {
        return Err(Error::InvalidArgument("expected 3-channel raster".into()));
    }
    let bytes: Vec<u8> = raster
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img =
        image::RgbImage::from_raw(raster.width() as u32, raster.height() as u32, bytes).unwrap();
    img.save(path)?;
    Ok(())
}

/// Writes a binary mask raster as 8-bit PNG (0 = static, 255 = dynamic).
pub fn write_mask_png(path: &Path, raster: &Raster) -> Result<()> {
    if raster.channels() != 1 {
        return Err(Error::InvalidArgument("expected 1-channel raster".into()));
    }
    let bytes: Vec<u8> = raster
        .data()
        .iter()
        .map(|&v| if v > 0.0 { 255u8 } else { 0u8 })
        .collect();
    let img =
        image::GrayImage::from_raw(raster.width() as u32, raster.height() as u32, bytes).unwrap();
    img.save(path)?;
    Ok(())
}

/// Writes a 16-bit label map PNG.
pub fn write_label_png(path: &Path, map: &LabelMap) -> Result<()> {
    let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
        map.width as u32,
        map.height as u32,
        map.labels.clone(),
    )
    .unwrap();
    img.save(path)?;
    Ok(())
}

fn load_tracks(path: &Path) -> Result<TrackSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut by_id: BTreeMap<u64, Vec<TrackSample>> = BTreeMap::new();
    for record in reader.deserialize() {
        let row: TrackRow = record?;
        let samples = by_id.entry(row.track_id).or_default();
        if samples.iter().any(|s| s.frame_index == row.frame_index) {
            return Err(Error::InvalidArgument(format!(
                "track {} has duplicate sample for frame {}",
                row.track_id, row.frame_index
            )));
        }
        samples.push(TrackSample {
            frame_index: row.frame_index,
            pos: PixelCoord::new(row.x, row.y),
            visible: row.visible != 0,
        });
    }
    Ok(TrackSet {
        tracks: by_id
            .into_iter()
            .map(|(id, samples)| Track { id, samples })
            .collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    track_id: u64,
    frame_index: usize,
    x: f64,
    y: f64,
    visible: u8,
}

pub fn save_tracks(path: &Path, tracks: &TrackSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for track in &tracks.tracks {
        for s in &track.samples {
            writer.serialize(TrackRow {
                track_id: track.id,
                frame_index: s.frame_index,
                x: s.pos.x,
                y: s.pos.y,
                visible: s.visible as u8,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn load_scene(dir: &Path) -> Result<Scene> {
    let cameras_path = dir.join("cameras.json");
    if !cameras_path.exists() {
        return Err(Error::MissingFile(cameras_path));
    }
    let records: Vec<CameraRecord> = serde_json::from_str(&fs::read_to_string(&cameras_path)?)?;
    if records.is_empty() {
        return Err(Error::InvalidArgument("cameras.json lists no frames".into()));
    }
    for (i, pair) in records.windows(2).enumerate() {
        if pair[1].time <= pair[0].time {
            return Err(Error::NonMonotonicTimes { index: i + 1 });
        }
    }

    let mut frames = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.k.len() != 9 || rec.e.len() != 16 {
            return Err(Error::BadHeader {
                path: cameras_path.clone(),
                detail: format!("frame {i}: K must have 9 entries and E 16"),
            });
        }
        let k = Matrix3::from_row_slice(&rec.k);
        let e = Matrix4::from_row_slice(&rec.e);
        let camera = CameraModel::new(k, e, rec.width, rec.height)
            .map_err(|err| err.with_context(format!("frame {i} camera")))?;

        let image = read_rgb_png(&dir.join("rgb").join(frame_name(i, "png")))?;
        let (depth_kind, depth) = read_raster(&dir.join("depth").join(frame_name(i, "pgdv")))?;
        if depth_kind != RasterKind::Depth || depth.channels() != 1 {
            return Err(Error::BadHeader {
                path: dir.join("depth").join(frame_name(i, "pgdv")),
                detail: format!("expected 1-channel depth, got {depth_kind}"),
            });
        }
        let dynamic_mask = read_mask_png(&dir.join("mask").join(frame_name(i, "png")))?;

        let (w, h) = (rec.width as usize, rec.height as usize);
        for (name, raster) in [("rgb", &image), ("depth", &depth), ("mask", &dynamic_mask)] {
            if raster.width() != w || raster.height() != h {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} {name} raster is {}x{}, camera says {}x{}",
                    raster.width(),
                    raster.height(),
                    w,
                    h
                )));
            }
        }
        if depth.data().iter().any(|&d| d.is_finite() && d <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frame {i} depth holds non-positive values"
            )));
        }

        frames.push(FrameBundle {
            image,
            depth,
            dynamic_mask,
            camera,
            time: rec.time,
        });
    }

    let mut flows = HashMap::new();
    let flow_dir = dir.join("flow");
    if flow_dir.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(&flow_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "pgdv"))
            .collect();
        names.sort();
        for path in names {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let parts: Vec<&str> = stem.split('_').collect();
            let parsed = (parts.len() == 2)
                .then(|| {
                    Some((
                        parts[0].parse::<usize>().ok()?,
                        parts[1].parse::<usize>().ok()?,
                    ))
                })
                .flatten();
            let Some((source, target)) = parsed else {
                return Err(Error::BadHeader {
                    path: path.clone(),
                    detail: "flow file name must be <source>_<target>.pgdv".into(),
                });
            };
            if source >= frames.len() || target >= frames.len() {
                return Err(Error::BadHeader {
                    path: path.clone(),
                    detail: format!("flow references frame outside 0..{}", frames.len()),
                });
            }
            let (kind, flow) = read_raster(&path)?;
            if kind != RasterKind::Flow || flow.channels() != 2 {
                return Err(Error::BadHeader {
                    path: path.clone(),
                    detail: format!("expected 2-channel flow, got {kind}"),
                });
            }
            if flow.width() != frames[source].image.width()
                || flow.height() != frames[source].image.height()
            {
                return Err(Error::DimensionMismatch(format!(
                    "flow {source}->{target} is {}x{}, source frame is {}x{}",
                    flow.width(),
                    flow.height(),
                    frames[source].image.width(),
                    frames[source].image.height()
                )));
            }
            flows.insert(
                (source, target),
                FlowField {
                    source_index: source,
                    target_index: target,
                    flow,
                },
            );
        }
    }
    for &(source, target) in flows.keys() {
        if !flows.contains_key(&(target, source)) {
            return Err(Error::MissingFlow {
                from_frame: target,
                to_frame: source,
            });
        }
    }

    let segments_dir = dir.join("segments");
    let segments = if segments_dir.is_dir() {
        let mut maps = Vec::with_capacity(frames.len());
        for (i, frame) in frames.iter().enumerate() {
            let map = read_label_png(&segments_dir.join(frame_name(i, "png")))?;
            if map.width != frame.image.width() || map.height != frame.image.height() {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} segment map is {}x{}, image is {}x{}",
                    map.width,
                    map.height,
                    frame.image.width(),
                    frame.image.height()
                )));
            }
            maps.push(map);
        }
        Some(maps)
    } else {
        None
    };

    let tracks_path = dir.join("tracks.csv");
    let tracks = if tracks_path.exists() {
        let set = load_tracks(&tracks_path)?;
        for track in &set.tracks {
            for s in &track.samples {
                if s.frame_index >= frames.len() {
                    return Err(Error::MissingTrackFrame {
                        track_id: track.id,
                        frame_index: s.frame_index,
                    });
                }
            }
        }
        Some(set)
    } else {
        None
    };

    Ok(Scene {
        frames,
        flows,
        tracks,
        segments,
    })
}

pub fn save_scene(scene: &Scene, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("rgb"))?;
    fs::create_dir_all(dir.join("depth"))?;
    fs::create_dir_all(dir.join("mask"))?;
    fs::create_dir_all(dir.join("flow"))?;

    let records: Vec<CameraRecord> = scene
        .frames
        .iter()
        .map(|f| CameraRecord {
            time: f.time,
            k: f.camera.intrinsics().transpose().as_slice().to_vec(),
            e: f.camera.world_to_cam().transpose().as_slice().to_vec(),
            width: f.camera.width(),
            height: f.camera.height(),
        })
        .collect();
    fs::write(
        dir.join("cameras.json"),
        serde_json::to_string_pretty(&records)?,
    )?;

    for (i, frame) in scene.frames.iter().enumerate() {
        write_rgb_png(&dir.join("rgb").join(frame_name(i, "png")), &frame.image)?;
        write_raster(
            &dir.join("depth").join(frame_name(i, "pgdv")),
            RasterKind::Depth,
            &frame.depth,
        )?;
        write_mask_png(
            &dir.join("mask").join(frame_name(i, "png")),
            &frame.dynamic_mask,
        )?;
    }
    for ((source, target), field) in &scene.flows {
        write_raster(
            &dir.join("flow").join(flow_name(*source, *target)),
            RasterKind::Flow,
            &field.flow,
        )?;
    }
    if let Some(segments) = &scene.segments {
        fs::create_dir_all(dir.join("segments"))?;
        for (i, map) in segments.iter().enumerate() {
            write_label_png(&dir.join("segments").join(frame_name(i, "png")), map)?;
        }
    }
    if let Some(tracks) = &scene.tracks {
        save_tracks(&dir.join("tracks.csv"), tracks)?;
    }
    Ok(())
}
