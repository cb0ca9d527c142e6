//! C ABI over the simulator: build a simulation from TOML text or a file,
//! advance it, read back counts and the potential, and write the final
//! outputs.
//!
//! Every function returns an [`IfepicStatus`]. On failure the message is
//! kept per thread and can be read with [`ifepic_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ifepic::driver::{Simulation, SimulationConfig};
use ifepic::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IfepicStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidString = 2,
    Config = 3,
    Io = 4,
    Geometry = 5,
    Numerical = 6,
    Protocol = 7,
    /// The handle was already finished.
    Finished = 8,
    BufferTooSmall = 9,
    OutOfRange = 10,
    Panic = 11,
    Other = 12,
}

/// Opaque simulation handle.
pub struct IfepicSimulation {
    sim: Option<Simulation>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IfepicStatus {
    match e.category() {
        "config" => IfepicStatus::Config,
        "io" => IfepicStatus::Io,
        "geometry" => IfepicStatus::Geometry,
        "numerical" => IfepicStatus::Numerical,
        "protocol" => IfepicStatus::Protocol,
        _ => IfepicStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IfepicStatus, String)>) -> IfepicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IfepicStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {m}"));
            IfepicStatus::Panic
        }
    }
}

fn core(e: Error) -> (IfepicStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IfepicStatus, String) {
    (IfepicStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IfepicStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (IfepicStatus::InvalidString, format!("{what}: {e}")))
}

unsafe fn live<'a>(
    h: *mut IfepicSimulation,
) -> Result<&'a mut Simulation, (IfepicStatus, String)> {
    if h.is_null() {
        return Err(null("simulation handle"));
    }
    (*h).sim
        .as_mut()
        .ok_or((IfepicStatus::Finished, "simulation already finished".into()))
}

fn create(cfg: SimulationConfig, out: *mut *mut IfepicSimulation) -> Result<(), (IfepicStatus, String)> {
    let sim = Simulation::new(cfg).map_err(core)?;
    let h = Box::new(IfepicSimulation { sim: Some(sim) });
    unsafe { *out = Box::into_raw(h) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ifepic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ifepic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a simulation from TOML text and run its initial field solve.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_from_toml(
    config_toml: *const c_char,
    out: *mut *mut IfepicSimulation,
) -> IfepicStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let t = text(config_toml, "config_toml")?;
        create(SimulationConfig::from_toml(t).map_err(core)?, out)
    })
}

/// As [`ifepic_simulation_from_toml`], reading the configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_load(
    path: *const c_char,
    out: *mut *mut IfepicSimulation,
) -> IfepicStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = text(path, "path")?;
        create(SimulationConfig::load(Path::new(p)).map_err(core)?, out)
    })
}

/// Advance `steps` PIC steps.
///
/// # Safety
/// `sim` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_step(sim: *mut IfepicSimulation, steps: usize) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        for _ in 0..steps {
            s.step().map_err(core)?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_current_step(
    sim: *mut IfepicSimulation,
    out: *mut usize,
) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.current_step();
        Ok(())
    })
}

/// # Safety
/// `sim` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_species_count(
    sim: *mut IfepicSimulation,
    out: *mut usize,
) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.setup.species.len();
        Ok(())
    })
}

/// Number of macro-particles of `species` over all ranks.
///
/// # Safety
/// `sim` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_particle_count(
    sim: *mut IfepicSimulation,
    species: usize,
    out: *mut usize,
) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let counts = s.particle_counts();
        *out = *counts.get(species).ok_or((
            IfepicStatus::OutOfRange,
            format!("species {species} out of range ({} species)", counts.len()),
        ))?;
        Ok(())
    })
}

/// Global node counts per axis; the potential has their product entries,
/// x fastest.
///
/// # Safety
/// `sim` must be live and `dims` point to three `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_node_dims(
    sim: *mut IfepicSimulation,
    dims: *mut usize,
) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        let n = s.setup.global.nodes();
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&n);
        Ok(())
    })
}

/// Copy the global nodal potential into `buf` of `len` doubles.
///
/// # Safety
/// `sim` must be live and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_copy_potential(
    sim: *mut IfepicSimulation,
    buf: *mut f64,
    len: usize,
) -> IfepicStatus {
    guard(|| {
        let s = live(sim)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let phi = s.global_potential();
        if len < phi.len() {
            return Err((
                IfepicStatus::BufferTooSmall,
                format!("buffer holds {len} values, potential has {}", phi.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, phi.len()).copy_from_slice(&phi);
        Ok(())
    })
}

/// Write the final outputs. The handle stays allocated but later calls
/// other than free return `Finished`.
///
/// # Safety
/// `sim` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_finish(sim: *mut IfepicSimulation) -> IfepicStatus {
    guard(|| {
        live(sim)?;
        let s = (*sim).sim.take().expect("checked live");
        s.finish().map_err(core)?;
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `sim` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ifepic_simulation_free(sim: *mut IfepicSimulation) {
    if !sim.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(sim))));
    }
}
