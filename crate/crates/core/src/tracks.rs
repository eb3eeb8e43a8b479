//! Complementary dynamic points from 2D point tracks: visible samples are
//! lifted to 3D and positioned at the target time with the linear motion
//! rule applied to the two temporally closest samples.

use crate::dynamic::{TargetCloud, TargetPoint};
use crate::error::{Error, Result};
use crate::geometry::{PixelCoord, Point3};
use crate::scene_io::{Scene, TrackSet};

/// One lifted sample of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub time: f64,
    pub frame_index: usize,
    pub pixel: PixelCoord,
    pub position: Point3,
}

/// Visible samples of one track, lifted to 3D and time-sorted.
#[derive(Debug, Clone)]
pub struct Trajectory3D {
    pub track_id: u64,
    pub samples: Vec<TrajectorySample>,
}

/// Lifts each track's visible samples; samples on zero dynamic mask are
/// dropped (tracks serve only dynamic content). Tracks left with no
/// samples are excluded.
pub fn lift_tracks(tracks: &TrackSet, scene: &Scene) -> Result<Vec<Trajectory3D>> {
    let mut out = Vec::new();
    for track in &tracks.tracks {
        let mut samples = Vec::new();
        for s in &track.samples {
            if !s.visible {
                continue;
            }
            let frame = scene
                .frames
                .get(s.frame_index)
                .ok_or(Error::MissingTrackFrame {
                    track_id: track.id,
                    frame_index: s.frame_index,
                })?;
            if frame.dynamic_mask.sample_channel(s.pos, 0) <= 0.0 {
                continue;
            }
            let depth = frame.depth.sample_channel(s.pos, 0);
            samples.push(TrajectorySample {
                time: frame.time,
                frame_index: s.frame_index,
                pixel: s.pos,
                position: frame.camera.lift(s.pos, depth)?,
            });
        }
        samples.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        if !samples.is_empty() {
            out.push(Trajectory3D {
                track_id: track.id,
                samples,
            });
        }
    }
    Ok(out)
}

/// The two samples whose times are closest to `t_tgt`; ties prefer the
/// earlier frame. Returns indices into `traj.samples`.
fn closest_two(traj: &Trajectory3D, t_tgt: f64) -> (usize, Option<usize>) {
    let mut order: Vec<usize> = (0..traj.samples.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (traj.samples[a].time - t_tgt).abs();
        let db = (traj.samples[b].time - t_tgt).abs();
        da.partial_cmp(&db)
            .unwrap()
            .then(traj.samples[a].time.partial_cmp(&traj.samples[b].time).unwrap())
    });
    (order[0], order.get(1).copied())
}

/// Linear inter/extrapolation through the two closest samples; a single
/// sample is returned unchanged; an empty trajectory yields `None`.
pub fn track_position_at(traj: &Trajectory3D, t_tgt: f64) -> Option<Point3> {
    if traj.samples.is_empty() {
        return None;
    }
    let (first, second) = closest_two(traj, t_tgt);
    let a = &traj.samples[first];
    let Some(second) = second else {
        return Some(a.position);
    };
    let b = &traj.samples[second];
    if a.time == b.time {
        return Some(a.position);
    }
    let w = (t_tgt - a.time) / (b.time - a.time);
    Some(Point3::from(
        a.position.coords * (1.0 - w) + b.position.coords * w,
    ))
}

/// One target-time point per trajectory; color comes from the temporally
/// nearest visible sample's frame at the track's 2D location there.
pub fn build_track_cloud(
    trajectories: &[Trajectory3D],
    t_tgt: f64,
    scene: &Scene,
) -> Result<TargetCloud> {
    let mut points = Vec::new();
    for traj in trajectories {
        let Some(position) = track_position_at(traj, t_tgt) else {
            continue;
        };
        let (nearest, _) = closest_two(traj, t_tgt);
        let s = &traj.samples[nearest];
        let color = scene.frames[s.frame_index].image.sample_rgb(s.pixel);
        points.push(TargetPoint {
            position,
            color,
            grid: None,
        });
    }
    Ok(TargetCloud { points })
}

/// Concatenation; outlier removal applies afterwards to the merged cloud.
pub fn merge_clouds(a: TargetCloud, b: TargetCloud) -> TargetCloud {
    let mut points = a.points;
    points.extend(b.points);
    TargetCloud { points }
}
