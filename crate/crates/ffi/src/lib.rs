//! C ABI over `sponge_core`: build and open bundles, verify, probe and export.
//!
//! Every entry point returns a [`SpongeStatus`]. Strings handed out are owned
//! by the caller and released with [`sponge_string_free`]; bundles are opaque
//! handles released with [`sponge_bundle_free`]. The message of the last
//! error on the calling thread is available from [`sponge_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sponge_core::cli::{
    cmd_build, cmd_export, cmd_probe, probe_jsonl, read_bundle, verify_bundle, Bundle, CliError, MeshFormat, RunConfig,
    Status, SurfaceSpec,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpongeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Corrupt = 4,
    MissingStage = 5,
    UnknownFormat = 6,
    Surface = 7,
    Construction = 8,
    Probe = 9,
    Io = 10,
    Json = 11,
    /// The report was produced and at least one certificate failed.
    VerifyFailed = 12,
    Panic = 13,
}

/// Opaque bundle handle.
pub struct SpongeBundle(Bundle);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &CliError) -> SpongeStatus {
    match err {
        CliError::Config(_) => SpongeStatus::Config,
        CliError::Corrupt(_) => SpongeStatus::Corrupt,
        CliError::MissingStage(_) => SpongeStatus::MissingStage,
        CliError::UnknownFormat(_) => SpongeStatus::UnknownFormat,
        CliError::Surface(_) => SpongeStatus::Surface,
        CliError::Stage(_) | CliError::Tower(_) => SpongeStatus::Construction,
        CliError::Probe(_) => SpongeStatus::Probe,
        CliError::Io(_) => SpongeStatus::Io,
        CliError::Json(_) => SpongeStatus::Json,
    }
}

enum Failure {
    Status(SpongeStatus, String),
    Cli(CliError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Cli(e)
    }
}

/// Run `f`, record any error message and map it to a status.
fn guard(f: impl FnOnce() -> Result<SpongeStatus, Failure>) -> SpongeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure::Cli(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("panic inside sponge_core");
            SpongeStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Status(SpongeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Status(SpongeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn bundle_ref<'a>(h: *const SpongeBundle) -> Result<&'a Bundle, Failure> {
    h.as_ref().map(|b| &b.0).ok_or(Failure::Status(SpongeStatus::NullPointer, "bundle handle is null".into()))
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Status(SpongeStatus::NullPointer, "output pointer is null".into()));
    }
    *out = CString::new(s).map_err(|e| Failure::Status(SpongeStatus::Json, e.to_string()))?.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sponge_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build the tower described by a JSON config (an empty object gives the
/// defaults) and write the bundle into `out_dir`.
///
/// # Safety
/// Both arguments must be null or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sponge_build(config_json: *const c_char, out_dir: *const c_char) -> SpongeStatus {
    guard(|| {
        let cfg = RunConfig::from_json(read_str(config_json, "config")?)?;
        cmd_build(&cfg, &PathBuf::from(read_str(out_dir, "output directory")?))?;
        Ok(SpongeStatus::Ok)
    })
}

/// Read a bundle directory into a new handle stored in `*out`.
///
/// # Safety
/// `dir` must be null or a valid NUL-terminated string; `out` must be null
/// or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn sponge_bundle_open(dir: *const c_char, out: *mut *mut SpongeBundle) -> SpongeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Status(SpongeStatus::NullPointer, "output pointer is null".into()));
        }
        let b = read_bundle(&PathBuf::from(read_str(dir, "bundle directory")?))?;
        *out = Box::into_raw(Box::new(SpongeBundle(b)));
        Ok(SpongeStatus::Ok)
    })
}

/// # Safety
/// `h` must be null or a handle from [`sponge_bundle_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sponge_bundle_free(h: *mut SpongeBundle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of stages in the bundle, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sponge_bundle_stage_count(h: *const SpongeBundle) -> usize {
    h.as_ref().map_or(0, |b| b.0.stages.len())
}

/// Cell, vertex and ambient-dimension counts of stage `j`.
///
/// # Safety
/// `h` must be null or a live handle; the output pointers must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sponge_bundle_stage_info(
    h: *const SpongeBundle,
    j: u32,
    cells: *mut usize,
    vertices: *mut usize,
    ambient_dim: *mut usize,
) -> SpongeStatus {
    guard(|| {
        let rec = bundle_ref(h)?.stage(j)?;
        if cells.is_null() || vertices.is_null() || ambient_dim.is_null() {
            return Err(Failure::Status(SpongeStatus::NullPointer, "output pointer is null".into()));
        }
        *cells = rec.stage.cell_count();
        *vertices = rec.stage.vertex_count();
        *ambient_dim = rec.ambient_dim;
        Ok(SpongeStatus::Ok)
    })
}

/// Verify the bundle. The JSON-lines report goes to `*report` and the number
/// of failed certificates to `*failures`; the status is `VerifyFailed` when
/// that number is positive.
///
/// # Safety
/// `h` must be null or a live handle; the output pointers must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sponge_verify(h: *const SpongeBundle, report: *mut *mut c_char, failures: *mut u32) -> SpongeStatus {
    guard(|| {
        let r = verify_bundle(bundle_ref(h)?);
        if failures.is_null() {
            return Err(Failure::Status(SpongeStatus::NullPointer, "output pointer is null".into()));
        }
        give_string(report, r.to_jsonl())?;
        *failures = r.count(Status::Fail) as u32;
        if r.failed() {
            set_error("verification failed");
            return Ok(SpongeStatus::VerifyFailed);
        }
        Ok(SpongeStatus::Ok)
    })
}

/// Probe every stage j ≥ 1 with the surface described by a JSON spec; the
/// per-stage certificates and the summary go to `*out` as JSON lines.
///
/// # Safety
/// `h` must be null or a live handle, `spec_json` null or a valid string,
/// `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sponge_probe(h: *const SpongeBundle, spec_json: *const c_char, out: *mut *mut c_char) -> SpongeStatus {
    guard(|| {
        let spec: SurfaceSpec = serde_json::from_str(read_str(spec_json, "surface spec")?).map_err(CliError::from)?;
        let (certs, summary) = cmd_probe(bundle_ref(h)?, &spec)?;
        give_string(out, probe_jsonl(&certs, &summary)?)?;
        Ok(SpongeStatus::Ok)
    })
}

/// Mesh of stage `j` in `format` ("off" or "obj"). `project` is null or
/// points to three ambient coordinate indices.
///
/// # Safety
/// `h` must be null or a live handle, `format` null or a valid string,
/// `project` null or readable for three values, `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sponge_export(
    h: *const SpongeBundle,
    j: u32,
    format: *const c_char,
    project: *const usize,
    out: *mut *mut c_char,
) -> SpongeStatus {
    guard(|| {
        let format: MeshFormat = read_str(format, "format")?.parse()?;
        let project = (!project.is_null()).then(|| [*project, *project.add(1), *project.add(2)]);
        give_string(out, cmd_export(bundle_ref(h)?, j, format, project)?)?;
        Ok(SpongeStatus::Ok)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sponge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
