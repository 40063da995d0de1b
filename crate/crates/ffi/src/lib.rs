//! C interface to dmskel.
//!
//! Every function returns a [`DmStatus`]; on failure a message is available
//! from [`dm_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dmskel::config::PipelineConfig;
use dmskel::pipeline;
use dmskel::tree::{swc, SkeletonTree};
use dmskel::volume::{vtk, DensityField, Grid};
use dmskel::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Structure = 5,
    InvalidArgument = 6,
    Lookup = 7,
    NoSignal = 8,
    Config = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// A density volume.
pub struct DmField(DensityField);

/// Skeleton trees produced by [`dm_skeletonize`].
pub struct DmSkeleton(Vec<SkeletonTree>);

/// One tree node. `parent` is -1 for the root.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmNode {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub parent: i64,
    pub score: f64,
    pub weight: f64,
    pub radius: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmMatchReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::Io { .. } => DmStatus::Io,
        Error::Parse { .. } => DmStatus::Parse,
        Error::Structure(_) => DmStatus::Structure,
        Error::InvalidArgument(_) => DmStatus::InvalidArgument,
        Error::Lookup(_) => DmStatus::Lookup,
        Error::NoSignal => DmStatus::NoSignal,
        Error::Config(_) => DmStatus::Config,
        Error::Stage { source, .. } => status_of(source),
    }
}

/// Failure inside an entry point, before conversion to a status code.
enum Fail {
    Lib(Error),
    Null(&'static str),
    Utf8(&'static str),
    Range(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DmStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            DmStatus::InvalidUtf8
        }
        Ok(Err(Fail::Range(msg))) => {
            set_error(msg);
            DmStatus::OutOfRange
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_arg<T>(p: *mut T, what: &'static str, v: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

/// Message for the most recent failure on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Read a legacy VTK structured-points volume.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_field_read_vtk(
    path: *const c_char,
    out: *mut *mut DmField,
) -> DmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let f = vtk::read_vtk(path)?;
        out_arg(out, "out", Box::into_raw(Box::new(DmField(f))))
    })
}

/// Copy `nx*ny*nz` values (x fastest) into a new volume. `spacing` may be
/// null for unit spacing.
///
/// # Safety
/// `dims` must point to 3 values, `spacing` to 3 values or be null, and
/// `values` to `len` floats.
#[no_mangle]
pub unsafe extern "C" fn dm_field_from_buffer(
    dims: *const usize,
    spacing: *const f64,
    values: *const f32,
    len: usize,
    out: *mut *mut DmField,
) -> DmStatus {
    guard(|| {
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        if values.is_null() && len > 0 {
            return Err(Fail::Null("values"));
        }
        let d = [*dims, *dims.add(1), *dims.add(2)];
        let s = if spacing.is_null() {
            [1.0; 3]
        } else {
            [*spacing, *spacing.add(1), *spacing.add(2)]
        };
        let grid = Grid::new(d, s, [0.0; 3])?;
        let v = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(values, len).to_vec()
        };
        let f = DensityField::new(grid, v)?;
        out_arg(out, "out", Box::into_raw(Box::new(DmField(f))))
    })
}

/// Write the volume dimensions into `dims[0..3]`.
///
/// # Safety
/// `field` must come from this library; `dims` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn dm_field_dims(field: *const DmField, dims: *mut usize) -> DmStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        for (k, d) in f.0.dims().into_iter().enumerate() {
            dims.add(k).write(d);
        }
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dm_field_free(field: *mut DmField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Run the full pipeline. `config_toml` may be null for the single-neuron
/// defaults; otherwise it uses the same keys as the CLI's config file.
///
/// # Safety
/// `field` must come from this library; `config_toml` must be null or a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_skeletonize(
    field: *const DmField,
    config_toml: *const c_char,
    out: *mut *mut DmSkeleton,
) -> DmStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        let cfg = if config_toml.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::from_toml_str(str_arg(config_toml, "config_toml")?)?
        };
        let run = pipeline::run_pipeline(&f.0, &cfg)?;
        out_arg(out, "out", Box::into_raw(Box::new(DmSkeleton(run.trees))))
    })
}

/// Number of trees (one per root).
///
/// # Safety
/// `sk` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_tree_count(
    sk: *const DmSkeleton,
    out: *mut usize,
) -> DmStatus {
    guard(|| {
        let s = ref_arg(sk, "skeleton")?;
        out_arg(out, "out", s.0.len())
    })
}

unsafe fn tree_at<'a>(sk: *const DmSkeleton, tree: usize) -> Result<&'a SkeletonTree, Fail> {
    let s = ref_arg(sk, "skeleton")?;
    s.0.get(tree)
        .ok_or_else(|| Fail::Range(format!("tree {tree} out of range ({} trees)", s.0.len())))
}

/// Number of nodes in tree `tree`.
///
/// # Safety
/// `sk` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_node_count(
    sk: *const DmSkeleton,
    tree: usize,
    out: *mut usize,
) -> DmStatus {
    guard(|| out_arg(out, "out", tree_at(sk, tree)?.len()))
}

/// Node `node` of tree `tree`; node 0 is the root and parents precede
/// children.
///
/// # Safety
/// `sk` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_node(
    sk: *const DmSkeleton,
    tree: usize,
    node: usize,
    out: *mut DmNode,
) -> DmStatus {
    guard(|| {
        let t = tree_at(sk, tree)?;
        if node >= t.len() {
            return Err(Fail::Range(format!(
                "node {node} out of range ({} nodes)",
                t.len()
            )));
        }
        let n = t.node(node);
        let v = DmNode {
            x: n.position[0],
            y: n.position[1],
            z: n.position[2],
            parent: n.parent.map_or(-1, |p| p as i64),
            score: n.score,
            weight: n.weight,
            radius: n.radius,
        };
        out_arg(out, "out", v)
    })
}

/// Write all trees as SWC.
///
/// # Safety
/// `sk` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_write_swc(
    sk: *const DmSkeleton,
    path: *const c_char,
) -> DmStatus {
    guard(|| {
        let s = ref_arg(sk, "skeleton")?;
        swc::write_swc(&s.0, PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Write the per-node weight sidecar.
///
/// # Safety
/// `sk` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_write_weights(
    sk: *const DmSkeleton,
    path: *const c_char,
) -> DmStatus {
    guard(|| {
        let s = ref_arg(sk, "skeleton")?;
        swc::write_weights(&s.0, PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `sk` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dm_skeleton_free(sk: *mut DmSkeleton) {
    if !sk.is_null() {
        drop(Box::from_raw(sk));
    }
}

/// Compare two SWC files at one distance bound after discretising both at
/// `unit`.
///
/// # Safety
/// Paths must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_evaluate_swc(
    predicted: *const c_char,
    truth: *const c_char,
    bound: f64,
    unit: f64,
    out: *mut DmMatchReport,
) -> DmStatus {
    guard(|| {
        let p = PathBuf::from(str_arg(predicted, "predicted")?);
        let t = PathBuf::from(str_arg(truth, "truth")?);
        let r = pipeline::cmd_evaluate(&p, &t, &[bound], unit)?[0];
        out_arg(
            out,
            "out",
            DmMatchReport {
                true_positives: r.tp,
                false_positives: r.fp,
                false_negatives: r.fn_,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                bound: r.bound,
            },
        )
    })
}
