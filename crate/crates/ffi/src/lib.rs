//! C ABI over the `qpsolver` core.
//!
//! Every function returns a [`QpStatus`]. On failure a description is kept
//! per thread and can be read with [`qp_last_error_message`]. Handles are
//! opaque and must be released with their `*_free` function. Complex
//! arrays are interleaved `(re, im)` pairs laid out as [`QpComplex`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use num_complex::Complex64;
use qpsolver::harness::{self, Experiment, TableKind};
use qpsolver::{
    forward_dft, inverse_dft, Convolution, Error, GridField, Lattice, Mode, ProjectionMatrix, QOperator,
    SparseCoefficient, SpectralField, VectorIndex,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLattice = 3,
    DimensionMismatch = 4,
    SolverFailure = 5,
    ConfigError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpConvolution {
    Truncated = 0,
    Wrapped = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpSweep {
    Space = 0,
    Time = 1,
}

/// Same layout as `num_complex::Complex64`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QpComplex {
    pub re: f64,
    pub im: f64,
}

/// Opaque lattice handle.
pub struct QpLattice {
    inner: Arc<Lattice>,
}

/// Opaque operator handle.
pub struct QpOperator {
    inner: QOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QpStatus {
    if e.is_solver_failure() {
        return QpStatus::SolverFailure;
    }
    match e {
        Error::InvalidProjection(_) | Error::InvalidLattice(_) => QpStatus::InvalidLattice,
        Error::DimensionMismatch { .. } | Error::LatticeMismatch => QpStatus::DimensionMismatch,
        Error::Config(_) | Error::InvalidTimeGrid(_) | Error::InvalidSolver(_) => QpStatus::ConfigError,
        _ => QpStatus::InvalidArgument,
    }
}

struct Fail(QpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QpStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn as_complex(v: &[QpComplex]) -> &[Complex64] {
    // SAFETY: both are #[repr(C)] pairs of f64.
    unsafe { std::slice::from_raw_parts(v.as_ptr().cast(), v.len()) }
}

fn as_complex_mut(v: &mut [QpComplex]) -> &mut [Complex64] {
    // SAFETY: both are #[repr(C)] pairs of f64.
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr().cast(), v.len()) }
}

unsafe fn lattice_ref<'a>(lat: *const QpLattice) -> Result<&'a Arc<Lattice>, Fail> {
    lat.as_ref().map(|l| &l.inner).ok_or_else(|| null("lattice"))
}

fn check_len(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the length the full message
/// needs including the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn qp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the lattice `K_N^n` for a `spatial_dim x torus_dim` projection
/// given row-major in `projection`.
///
/// # Safety
/// `projection` must hold `spatial_dim * torus_dim` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_new(
    n_modes: usize,
    spatial_dim: usize,
    torus_dim: usize,
    projection: *const f64,
    out: *mut *mut QpLattice,
) -> QpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let count = spatial_dim
            .checked_mul(torus_dim)
            .ok_or_else(|| Fail(QpStatus::InvalidLattice, "dimension overflow".into()))?;
        let entries = slice(projection, count, "projection")?.to_vec();
        let p = ProjectionMatrix::new(spatial_dim, torus_dim, entries)?;
        let lat = Lattice::new(n_modes, p)?;
        *out = Box::into_raw(Box::new(QpLattice { inner: Arc::new(lat) }));
        Ok(())
    })
}

/// # Safety
/// `lat` must come from [`qp_lattice_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_free(lat: *mut QpLattice) {
    if !lat.is_null() {
        drop(Box::from_raw(lat));
    }
}

/// Number of modes `D = N^n`, or 0 for a null handle.
///
/// # Safety
/// `lat` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_size(lat: *const QpLattice) -> usize {
    lat.as_ref().map_or(0, |l| l.inner.size())
}

/// Torus dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `lat` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_torus_dim(lat: *const QpLattice) -> usize {
    lat.as_ref().map_or(0, |l| l.inner.torus_dim())
}

/// Vector index of the frequency `k` (length `torus_dim`).
///
/// # Safety
/// `k` must hold `torus_dim` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_tensor_to_vector(
    lat: *const QpLattice,
    k: *const i64,
    k_len: usize,
    out: *mut usize,
) -> QpStatus {
    guard(|| {
        let lat = lattice_ref(lat)?;
        let k = slice(k, k_len, "k")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lat.tensor_to_vector(k)?.0;
        Ok(())
    })
}

/// Frequency of vector index `index`, written to `k_out` (length `torus_dim`).
///
/// # Safety
/// `k_out` must be writable for `k_len` integers.
#[no_mangle]
pub unsafe extern "C" fn qp_lattice_vector_to_tensor(
    lat: *const QpLattice,
    index: usize,
    k_out: *mut i64,
    k_len: usize,
) -> QpStatus {
    guard(|| {
        let lat = lattice_ref(lat)?;
        check_len(lat.torus_dim(), k_len)?;
        let out = slice_mut(k_out, k_len, "k_out")?;
        out.copy_from_slice(&lat.vector_to_tensor(VectorIndex(index))?.0);
        Ok(())
    })
}

/// Builds `Q` for a sparse coefficient with `count` modes. `modes` holds
/// `count * torus_dim` integers, one frequency per row.
///
/// # Safety
/// `modes` and `amplitudes` must hold the stated number of elements; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_operator_new(
    lat: *const QpLattice,
    modes: *const i64,
    amplitudes: *const QpComplex,
    count: usize,
    convolution: QpConvolution,
    out: *mut *mut QpOperator,
) -> QpStatus {
    guard(|| {
        let lat = lattice_ref(lat)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = lat.torus_dim();
        let ks = slice(modes, count * n, "modes")?;
        let amps = as_complex(slice(amplitudes, count, "amplitudes")?);
        let modes: Vec<Mode> = ks
            .chunks_exact(n)
            .zip(amps)
            .map(|(k, a)| Mode::new(k.to_vec(), *a))
            .collect();
        let conv = match convolution {
            QpConvolution::Truncated => Convolution::Truncated,
            QpConvolution::Wrapped => Convolution::Wrapped,
        };
        let alpha = SparseCoefficient::from_modes(lat.clone(), &modes)?;
        *out = Box::into_raw(Box::new(QpOperator {
            inner: QOperator::new(alpha, conv),
        }));
        Ok(())
    })
}

/// # Safety
/// `op` must come from [`qp_operator_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qp_operator_free(op: *mut QpOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// `out = Q v` for coefficient vectors of length `D`.
///
/// # Safety
/// `v` and `out` must hold `len` elements and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn qp_operator_apply(
    op: *const QpOperator,
    v: *const QpComplex,
    out: *mut QpComplex,
    len: usize,
) -> QpStatus {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("operator"))?.inner;
        check_len(op.size(), len)?;
        let v = as_complex(slice(v, len, "v")?);
        let out = as_complex_mut(slice_mut(out, len, "out")?);
        op.apply_into(v, out)?;
        Ok(())
    })
}

/// Grid values to coefficients, including the `1/D` factor.
///
/// # Safety
/// `values` and `coeffs` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn qp_forward_dft(
    lat: *const QpLattice,
    values: *const QpComplex,
    coeffs: *mut QpComplex,
    len: usize,
) -> QpStatus {
    guard(|| {
        let lat = lattice_ref(lat)?;
        check_len(lat.size(), len)?;
        let g = GridField::new(lat.clone(), as_complex(slice(values, len, "values")?).to_vec())?;
        as_complex_mut(slice_mut(coeffs, len, "coeffs")?).copy_from_slice(forward_dft(&g).coeffs());
        Ok(())
    })
}

/// Coefficients to grid values.
///
/// # Safety
/// `coeffs` and `values` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn qp_inverse_dft(
    lat: *const QpLattice,
    coeffs: *const QpComplex,
    values: *mut QpComplex,
    len: usize,
) -> QpStatus {
    guard(|| {
        let lat = lattice_ref(lat)?;
        check_len(lat.size(), len)?;
        let s = SpectralField::new(lat.clone(), as_complex(slice(coeffs, len, "coeffs")?).to_vec())?;
        as_complex_mut(slice_mut(values, len, "values")?).copy_from_slice(inverse_dft(&s).values());
        Ok(())
    })
}

/// Runs a sweep described by a JSON experiment config and returns the CSV
/// table in `*out_csv`. Release it with [`qp_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_csv` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_run_sweep(
    config_json: *const c_char,
    sweep: QpSweep,
    out_csv: *mut *mut c_char,
) -> QpStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out_csv.is_null() {
            return Err(null("out_csv"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| Fail(QpStatus::ConfigError, format!("config is not UTF-8: {e}")))?;
        let exp = Experiment::from_json(text)?;
        let (kind, rows) = match sweep {
            QpSweep::Space => (TableKind::Space, harness::space_sweep(&exp)?),
            QpSweep::Time => (TableKind::Time, harness::time_sweep(&exp)?),
        };
        let csv = harness::to_csv(kind, &rows)?;
        *out_csv = CString::new(csv).expect("csv has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
