//! C ABI for `medrelax`.
//!
//! Every fallible call returns a [`MedrelaxStatus`]; on failure the message is kept
//! per thread and can be read with [`medrelax_last_error`]. Objects are opaque
//! handles released with their `_free` function. Functions never unwind across the
//! boundary: a panic becomes `MEDRELAX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use medrelax::lattice::{parse_hamiltonian, LocalHamiltonian, ShieldPlan};
use medrelax::med::{solve_med, MedSolution, SolverOptions};
use medrelax::models::{commuting_ising_chain, tfim_chain};
use medrelax::operator::{conditional_mutual_information, normalize_sites};
use medrelax::oracle::{solve_gibbs_with, GibbsSolution, OracleOptions, Tripartition};
use medrelax::petz::{recover, PetzOptions};
use medrelax::runner::{verify_suite, VerifyOptions};
use medrelax::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MedrelaxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    SizeCap = 4,
    NotConverged = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

impl From<&Error> for MedrelaxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Toml(_) | Error::Json(_) => MedrelaxStatus::Config,
            Error::SizeCap { .. } => MedrelaxStatus::SizeCap,
            Error::Io(_) => MedrelaxStatus::Io,
            Error::Eigen | Error::NonPositiveSpectrum { .. } | Error::Quadrature { .. } => {
                MedrelaxStatus::Numerical
            }
            _ => MedrelaxStatus::InvalidArgument,
        }
    }
}

pub struct MedrelaxHamiltonian(LocalHamiltonian);

pub struct MedrelaxGibbs(GibbsSolution);

pub struct MedrelaxMedSolution(MedSolution);

/// The three sides of the recovery inequality chain.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MedrelaxRecovery {
    pub cmi: f64,
    pub neg_log_fidelity: f64,
    pub trace_term: f64,
    pub trace_distance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (MedrelaxStatus, String)>) -> MedrelaxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MedrelaxStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MedrelaxStatus::Panic
        }
    }
}

type Outcome<T> = Result<T, (MedrelaxStatus, String)>;

fn lib<T>(r: medrelax::Result<T>) -> Outcome<T> {
    r.map_err(|e| (MedrelaxStatus::from(&e), e.to_string()))
}

fn invalid(msg: &str) -> (MedrelaxStatus, String) {
    (MedrelaxStatus::InvalidArgument, msg.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref()
        .ok_or_else(|| (MedrelaxStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Outcome<()> {
    if out.is_null() {
        return Err((MedrelaxStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn sites<'a>(ptr: *const usize, len: usize, what: &str) -> Outcome<&'a [usize]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err((MedrelaxStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Outcome<&'a str> {
    if ptr.is_null() {
        return Err((MedrelaxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the next
/// call on the same thread.
#[no_mangle]
pub extern "C" fn medrelax_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static, nul-terminated version string.
#[no_mangle]
pub extern "C" fn medrelax_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML model description.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_hamiltonian_from_toml(
    toml: *const c_char,
    out: *mut *mut MedrelaxHamiltonian,
) -> MedrelaxStatus {
    guard(|| {
        let h = lib(parse_hamiltonian(string(toml, "toml")?))?;
        write_out(out, Box::into_raw(Box::new(MedrelaxHamiltonian(h))), "out")
    })
}

/// β(−Σ Z_i Z_{i+1} − Σ X_i) on an open chain of `n` sites.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_hamiltonian_tfim_chain(
    n: usize,
    beta: f64,
    out: *mut *mut MedrelaxHamiltonian,
) -> MedrelaxStatus {
    guard(|| {
        let h = lib(tfim_chain(n, beta))?;
        write_out(out, Box::into_raw(Box::new(MedrelaxHamiltonian(h))), "out")
    })
}

/// β(J Σ Z_i Z_{i+1} + g Σ Z_i) on an open chain of `n` sites.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_hamiltonian_ising_chain(
    n: usize,
    beta: f64,
    coupling: f64,
    field: f64,
    out: *mut *mut MedrelaxHamiltonian,
) -> MedrelaxStatus {
    guard(|| {
        let h = lib(commuting_ising_chain(n, beta, coupling, field))?;
        write_out(out, Box::into_raw(Box::new(MedrelaxHamiltonian(h))), "out")
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medrelax_hamiltonian_num_sites(h: *const MedrelaxHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.num_sites())
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn medrelax_hamiltonian_free(h: *mut MedrelaxHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Exact Gibbs state of `h`. `max_sites` caps the qubit count; 0 selects the default.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_solve(
    h: *const MedrelaxHamiltonian,
    max_sites: usize,
    out: *mut *mut MedrelaxGibbs,
) -> MedrelaxStatus {
    guard(|| {
        let h = deref(h, "hamiltonian")?;
        let mut opts = OracleOptions::default();
        if max_sites > 0 {
            opts.max_sites = max_sites;
        }
        let sol = lib(solve_gibbs_with(&h.0, &opts))?;
        write_out(out, Box::into_raw(Box::new(MedrelaxGibbs(sol))), "out")
    })
}

/// F = −log Z.
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_free_energy(
    g: *const MedrelaxGibbs,
    out: *mut f64,
) -> MedrelaxStatus {
    guard(|| write_out(out, deref(g, "gibbs")?.0.free_energy(), "out"))
}

/// Writes the marginal on `sites` as interleaved (re, im) pairs in row-major order.
/// `capacity` counts doubles; `written` receives 2·dim².
///
/// # Safety
/// `sites` must hold `n_sites` entries and `buffer` `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_marginal(
    g: *const MedrelaxGibbs,
    sites_ptr: *const usize,
    n_sites: usize,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> MedrelaxStatus {
    guard(|| {
        let g = deref(g, "gibbs")?;
        let s = normalize_sites(sites(sites_ptr, n_sites, "sites")?);
        let rho = lib(g.0.marginal(&s))?;
        let dim = rho.dim();
        let need = 2 * dim * dim;
        write_out(written, need, "written")?;
        if capacity < need {
            return Err(invalid(&format!(
                "buffer holds {capacity} doubles, {need} needed"
            )));
        }
        if buffer.is_null() {
            return Err((MedrelaxStatus::NullPointer, "buffer is null".into()));
        }
        let out = std::slice::from_raw_parts_mut(buffer, need);
        for i in 0..dim {
            for j in 0..dim {
                let z = rho.matrix()[(i, j)];
                out[2 * (i * dim + j)] = z.re;
                out[2 * (i * dim + j) + 1] = z.im;
            }
        }
        Ok(())
    })
}

/// I(A:C|B) of the Gibbs state.
///
/// # Safety
/// Each site array must hold its stated number of entries.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_cmi(
    g: *const MedrelaxGibbs,
    a: *const usize,
    na: usize,
    b: *const usize,
    nb: usize,
    c: *const usize,
    nc: usize,
    out: *mut f64,
) -> MedrelaxStatus {
    guard(|| {
        let g = deref(g, "gibbs")?;
        let (a, b, c) = (sites(a, na, "a")?, sites(b, nb, "b")?, sites(c, nc, "c")?);
        let v = lib(conditional_mutual_information(g.0.state(), a, b, c))?;
        write_out(out, v, "out")
    })
}

/// Recovers ρ_ABC from ρ_AB with the rotated Petz map of ρ_BC.
///
/// # Safety
/// Each site array must hold its stated number of entries.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_recovery(
    g: *const MedrelaxGibbs,
    a: *const usize,
    na: usize,
    b: *const usize,
    nb: usize,
    c: *const usize,
    nc: usize,
    out: *mut MedrelaxRecovery,
) -> MedrelaxStatus {
    guard(|| {
        let g = deref(g, "gibbs")?;
        let tri = Tripartition::new(sites(a, na, "a")?, sites(b, nb, "b")?, sites(c, nc, "c")?);
        let (q, _) = lib(recover(g.0.state(), &tri, &PetzOptions::default()))?;
        write_out(
            out,
            MedrelaxRecovery {
                cmi: q.cmi,
                neg_log_fidelity: q.neg_log_fidelity,
                trace_term: q.trace_term,
                trace_distance: q.trace_distance,
            },
            "out",
        )
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn medrelax_gibbs_free(g: *mut MedrelaxGibbs) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Solves the MED relaxation with shields of `radius` along the label order. A
/// solve that stops early still returns its handle, with `MEDRELAX_STATUS_NOT_CONVERGED`.
/// `tol` ≤ 0 selects the default.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_med_solve(
    h: *const MedrelaxHamiltonian,
    radius: usize,
    tol: f64,
    out: *mut *mut MedrelaxMedSolution,
) -> MedrelaxStatus {
    let mut converged = true;
    let status = guard(|| {
        let h = &deref(h, "hamiltonian")?.0;
        let plan = Arc::new(lib(ShieldPlan::consecutive(
            h.lattice(),
            radius,
            h.range(),
        ))?);
        let mut opts = SolverOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let sol = lib(solve_med(h, plan, &opts))?;
        converged = sol.converged;
        write_out(
            out,
            Box::into_raw(Box::new(MedrelaxMedSolution(sol))),
            "out",
        )
    });
    if status == MedrelaxStatus::Ok && !converged {
        set_error("MED solver stopped before convergence".into());
        return MedrelaxStatus::NotConverged;
    }
    status
}

/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_med_value(
    s: *const MedrelaxMedSolution,
    out: *mut f64,
) -> MedrelaxStatus {
    guard(|| write_out(out, deref(s, "solution")?.0.value(), "out"))
}

/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_med_iterations(
    s: *const MedrelaxMedSolution,
    out: *mut usize,
) -> MedrelaxStatus {
    guard(|| write_out(out, deref(s, "solution")?.0.iterations, "out"))
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn medrelax_med_free(s: *mut MedrelaxMedSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs the verification suite. `filter` may be null. `passed` receives 1 when every
/// selected check passed, else 0.
///
/// # Safety
/// `filter` must be null or nul-terminated, and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn medrelax_verify(
    seed: u64,
    filter: *const c_char,
    passed: *mut i32,
) -> MedrelaxStatus {
    guard(|| {
        let filter = if filter.is_null() {
            None
        } else {
            Some(string(filter, "filter")?.to_string())
        };
        let opts = VerifyOptions {
            seed,
            filter,
            ..Default::default()
        };
        let summary = lib(verify_suite(&opts))?;
        if summary.checks.is_empty() {
            return Err(invalid("no check matches the filter"));
        }
        write_out(passed, i32::from(summary.all_passed()), "passed")
    })
}
