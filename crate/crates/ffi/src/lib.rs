//! C ABI over the core library: opaque scene handles, integer error codes,
//! and a thread-local last-error message. The matching declarations live in
//! `include/dvs.h`, which is maintained by hand alongside this file.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_float, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dvs_core::error::Error;
use dvs_core::geometry::Point3;
use dvs_core::metrics::psnr;
use dvs_core::pipeline::{render_view, RenderJob};
use dvs_core::raster::Raster;
use dvs_core::scene_io::{load_scene, write_mask_png, write_rgb_png, Scene};
use dvs_core::synthetic::{gen_synthetic, SyntheticConfig};

pub const DVS_OK: c_int = 0;
pub const DVS_ERR_INVALID_ARGUMENT: c_int = 1;
pub const DVS_ERR_IO: c_int = 2;
pub const DVS_ERR_MISSING_DATA: c_int = 3;
pub const DVS_ERR_BAD_BUNDLE: c_int = 4;
pub const DVS_ERR_INTERNAL: c_int = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap());
}

fn code_for(err: &Error) -> c_int {
    match err {
        Error::InvalidArgument(_) | Error::TimeOutOfRange { .. } => DVS_ERR_INVALID_ARGUMENT,
        Error::Io(_) | Error::Image(_) | Error::Json(_) | Error::Csv(_) => DVS_ERR_IO,
        Error::MissingFile(_) | Error::MissingFlow { .. } | Error::MissingTrackFrame { .. } => {
            DVS_ERR_MISSING_DATA
        }
        Error::BadHeader { .. }
        | Error::TruncatedPayload { .. }
        | Error::DimensionMismatch(_)
        | Error::NonMonotonicTimes { .. }
        | Error::InsufficientFrames { .. }
        | Error::DegenerateFit(_) => DVS_ERR_BAD_BUNDLE,
        Error::Context { source, .. } => code_for(source),
    }
}

fn report(err: Error) -> c_int {
    let code = code_for(&err);
    set_last_error(&err.to_string());
    code
}

fn guarded(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            DVS_ERR_INTERNAL
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, c_int> {
    if ptr.is_null() {
        set_last_error("null path argument");
        return Err(DVS_ERR_INVALID_ARGUMENT);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_last_error("path is not valid UTF-8");
            Err(DVS_ERR_INVALID_ARGUMENT)
        }
    }
}

/// Opaque scene handle.
pub struct DvsScene {
    scene: Scene,
}

/// Message of the most recent error on this thread; empty when the last
/// call succeeded. The pointer stays valid until the next failing call.
#[no_mangle]
pub extern "C" fn dvs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a scene bundle directory. Returns NULL on failure (see
/// `dvs_last_error`).
#[no_mangle]
pub unsafe extern "C" fn dvs_scene_load(dir: *const c_char) -> *mut DvsScene {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let dir = match path_arg(dir) {
            Ok(d) => d,
            Err(_) => return ptr::null_mut(),
        };
        match load_scene(dir) {
            Ok(scene) => Box::into_raw(Box::new(DvsScene { scene })),
            Err(e) => {
                report(e);
                ptr::null_mut()
            }
        }
    }));
    match result {
        Ok(p) => p,
        Err(_) => {
            set_last_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Frees a scene handle; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dvs_scene_free(scene: *mut DvsScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

#[no_mangle]
pub unsafe extern "C" fn dvs_scene_frame_count(scene: *const DvsScene) -> usize {
    if scene.is_null() {
        return 0;
    }
    (*scene).scene.frames.len()
}

/// Generates the analytic synthetic scene bundle under `dir`.
#[no_mangle]
pub unsafe extern "C" fn dvs_gen_synthetic(
    dir: *const c_char,
    size: u32,
    frames: usize,
) -> c_int {
    guarded(|| {
        let dir = match path_arg(dir) {
            Ok(d) => d,
            Err(code) => return code,
        };
        let cfg = SyntheticConfig {
            width: size,
            height: size,
            n_frames: frames,
            ..Default::default()
        };
        match gen_synthetic(&cfg, dir) {
            Ok(()) => DVS_OK,
            Err(e) => report(e),
        }
    })
}

/// Renders the scene at `time` from the camera of the temporally nearest
/// frame, optionally moved to `pose` (pointer to 3 doubles, or NULL).
/// Writes render.png / dyn_mask.png / hole_mask.png into `out_dir`.
#[no_mangle]
pub unsafe extern "C" fn dvs_render(
    scene: *const DvsScene,
    time: c_double,
    pose: *const c_double,
    out_dir: *const c_char,
) -> c_int {
    guarded(|| {
        if scene.is_null() {
            set_last_error("null scene handle");
            return DVS_ERR_INVALID_ARGUMENT;
        }
        let out_dir = match path_arg(out_dir) {
            Ok(d) => d,
            Err(code) => return code,
        };
        let scene = &(*scene).scene;
        let nearest = scene
            .frames
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.time - time)
                    .abs()
                    .partial_cmp(&(b.time - time).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let base = &scene.frames[nearest].camera;
        let camera = if pose.is_null() {
            base.clone()
        } else {
            let p = std::slice::from_raw_parts(pose, 3);
            match base.with_center(Point3::new(p[0], p[1], p[2])) {
                Ok(c) => c,
                Err(e) => return report(e),
            }
        };
        let mut job = RenderJob::new(camera, time);
        job.config.n_spatial = job.config.n_spatial.min(scene.frames.len());
        let rendered = match render_view(scene, &job) {
            Ok(r) => r,
            Err(e) => return report(e),
        };
        let write = || -> dvs_core::Result<()> {
            std::fs::create_dir_all(out_dir)?;
            write_rgb_png(&out_dir.join("render.png"), &rendered.output.rgb)?;
            write_mask_png(&out_dir.join("dyn_mask.png"), &rendered.output.dyn_mask)?;
            write_mask_png(&out_dir.join("hole_mask.png"), &rendered.output.hole_mask)?;
            Ok(())
        };
        match write() {
            Ok(()) => DVS_OK,
            Err(e) => report(e),
        }
    })
}

/// Least-squares scale/shift aligning `source` depths onto `reference`.
#[no_mangle]
pub unsafe extern "C" fn dvs_align_depth(
    source: *const c_double,
    reference: *const c_double,
    len: usize,
    scale: *mut c_double,
    shift: *mut c_double,
) -> c_int {
    guarded(|| {
        if source.is_null() || reference.is_null() || scale.is_null() || shift.is_null() {
            set_last_error("null buffer argument");
            return DVS_ERR_INVALID_ARGUMENT;
        }
        let s = std::slice::from_raw_parts(source, len);
        let r = std::slice::from_raw_parts(reference, len);
        match dvs_core::scene_io::align_depth_scale_shift(s, r) {
            Ok((a, b)) => {
                *scale = a;
                *shift = b;
                DVS_OK
            }
            Err(e) => report(e),
        }
    })
}

/// PSNR in dB between two interleaved [0,1] image buffers of identical
/// layout (row-major, `channels` floats per pixel).
#[no_mangle]
pub unsafe extern "C" fn dvs_psnr(
    a: *const c_float,
    b: *const c_float,
    width: usize,
    height: usize,
    channels: usize,
    out_db: *mut c_double,
) -> c_int {
    guarded(|| {
        if a.is_null() || b.is_null() || out_db.is_null() {
            set_last_error("null buffer argument");
            return DVS_ERR_INVALID_ARGUMENT;
        }
        let n = width * height * channels;
        let build = |p: *const c_float| {
            Raster::from_vec(
                width,
                height,
                channels,
                std::slice::from_raw_parts(p, n).to_vec(),
            )
        };
        let (ra, rb) = match (build(a), build(b)) {
            (Ok(ra), Ok(rb)) => (ra, rb),
            (Err(e), _) | (_, Err(e)) => return report(e),
        };
        match psnr(&ra, &rb, None, None) {
            Ok(v) => {
                *out_db = v;
                DVS_OK
            }
            Err(e) => report(e),
        }
    })
}
