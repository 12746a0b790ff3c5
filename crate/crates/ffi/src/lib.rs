//! C ABI over `hydropde`.
//!
//! Every entry point returns a [`PeStatus`]; outputs go through pointer
//! arguments. Handles are opaque and must be released with the matching
//! `*_free`. After a non-`Ok` status, `pe_last_error_message` describes the
//! failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hydropde::checkpoint;
use hydropde::norms;
use hydropde::projection::project_galerkin;
use hydropde::stokes::StokesOperator;
use hydropde::{Grid, PeError, SpectralField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Domain = 4,
    Singular = 5,
    OutOfRange = 6,
    Io = 7,
    Format = 8,
    NonFinite = 9,
    Panic = 10,
}

/// Periodic box discretization.
pub struct PeGrid(Grid);

/// Spectral velocity (or scalar) field.
pub struct PeField(SpectralField);

/// Hydrostatic Stokes operator on a fixed grid.
pub struct PeStokes(StokesOperator);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &PeError) -> PeStatus {
    match e {
        PeError::Config(_) | PeError::Parse { .. } | PeError::UnknownForcing(_) => PeStatus::InvalidArgument,
        PeError::Shape(_) => PeStatus::Shape,
        PeError::Domain(_) => PeStatus::Domain,
        PeError::Singular(_) => PeStatus::Singular,
        PeError::ModeOutOfRange(_) => PeStatus::OutOfRange,
        PeError::Format(_) => PeStatus::Format,
        PeError::NonFinite(_) => PeStatus::NonFinite,
        PeError::Io(_) => PeStatus::Io,
    }
}

struct Fail(PeStatus, String);

impl From<PeError> for Fail {
    fn from(e: PeError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PeStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside hydropde".into());
            PeStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(PeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(PeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = deref_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail(PeStatus::NullPointer, "path is null".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(PeStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn same_grid(a: &SpectralField, b: &Grid) -> Result<(), Fail> {
    if a.grid() != b {
        return Err(Fail(PeStatus::Shape, "field and operator live on different grids".into()));
    }
    Ok(())
}

/// Length in bytes (without the terminating NUL) of the last error message.
#[no_mangle]
pub extern "C" fn pe_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written, excluding the NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pe_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let n = e.len().min(len - 1);
        ptr::copy_nonoverlapping(e.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_grid_new(nx: usize, ny: usize, nz: usize, depth: c_double, out: *mut *mut PeGrid) -> PeStatus {
    guard(|| emit(out, PeGrid(Grid::new(nx, ny, nz, depth)?)))
}

/// # Safety
/// `grid` must be null or a handle from `pe_grid_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pe_grid_free(grid: *mut PeGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pe_grid_dims(grid: *const PeGrid, nx: *mut usize, ny: *mut usize, nz: *mut usize) -> PeStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        *deref_mut(nx, "nx")? = g.nx();
        *deref_mut(ny, "ny")? = g.ny();
        *deref_mut(nz, "nz")? = g.nz();
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_field_zeros(grid: *const PeGrid, components: usize, out: *mut *mut PeField) -> PeStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if components == 0 {
            return Err(Fail(PeStatus::InvalidArgument, "components must be positive".into()));
        }
        emit(out, PeField(SpectralField::zeros(g, components)))
    })
}

/// Random real field in the band `|kx|, |ky| <= kmax`, `m <= mmax`,
/// dealiased, reproducible from `seed`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_field_random(
    grid: *const PeGrid,
    components: usize,
    seed: u64,
    kmax: i64,
    mmax: usize,
    decay: c_double,
    out: *mut *mut PeField,
) -> PeStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if components == 0 || !decay.is_finite() {
            return Err(Fail(PeStatus::InvalidArgument, "components must be positive and decay finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        emit(out, PeField(SpectralField::random_band(g, components, &mut rng, kmax, mmax, decay)))
    })
}

/// # Safety
/// `field` must be null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn pe_field_free(field: *mut PeField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Sets mode `(kx, ky, m)` of component `c` and its conjugate partner.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pe_field_set_mode(
    field: *mut PeField,
    c: usize,
    kx: i64,
    ky: i64,
    m: usize,
    re: c_double,
    im: c_double,
) -> PeStatus {
    guard(|| Ok(deref_mut(field, "field")?.0.set_mode(c, kx, ky, m, Complex64::new(re, im))?))
}

/// # Safety
/// `field` must be a live handle; `re`, `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pe_field_get_mode(
    field: *const PeField,
    c: usize,
    kx: i64,
    ky: i64,
    m: usize,
    re: *mut c_double,
    im: *mut c_double,
) -> PeStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        let g = f.grid();
        let (ix, iy) = match (Grid::index_of(kx, g.nx()), Grid::index_of(ky, g.ny())) {
            (Some(ix), Some(iy)) if c < f.components() && m < g.nz() => (ix, iy),
            _ => return Err(Fail(PeStatus::OutOfRange, format!("mode ({c}, {kx}, {ky}, {m}) out of range"))),
        };
        let v = f.get(c, ix, iy, m);
        *deref_mut(re, "re")? = v.re;
        *deref_mut(im, "im")? = v.im;
        Ok(())
    })
}

/// Number of complex coefficients; `pe_field_copy_coeffs` needs twice as
/// many doubles.
///
/// # Safety
/// `field` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pe_field_len(field: *const PeField, len: *mut usize) -> PeStatus {
    guard(|| {
        *deref_mut(len, "len")? = deref(field, "field")?.0.coeffs().len();
        Ok(())
    })
}

/// Copies coefficients as interleaved `re, im` pairs, layout
/// `(component, ix, iy, m)` with `m` fastest.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pe_field_copy_coeffs(field: *const PeField, buf: *mut c_double, len: usize) -> PeStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        if buf.is_null() {
            return Err(Fail(PeStatus::NullPointer, "buffer is null".into()));
        }
        if len < 2 * f.coeffs().len() {
            return Err(Fail(PeStatus::Shape, format!("buffer holds {len} doubles, need {}", 2 * f.coeffs().len())));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (pair, c) in out.chunks_exact_mut(2).zip(f.coeffs()) {
            pair[0] = c.re;
            pair[1] = c.im;
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pe_field_l2_norm(field: *const PeField, out: *mut c_double) -> PeStatus {
    guard(|| {
        *deref_mut(out, "output pointer")? = norms::l2_norm(&deref(field, "field")?.0);
        Ok(())
    })
}

/// Divergence-free projection of a two-component field onto the basis.
///
/// # Safety
/// `field` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_project(field: *const PeField, out: *mut *mut PeField) -> PeStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        if f.components() != 2 {
            return Err(Fail(PeStatus::Shape, "projection needs a two-component field".into()));
        }
        emit(out, PeField(project_galerkin(f)))
    })
}

/// # Safety
/// `grid` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_stokes_new(grid: *const PeGrid, out: *mut *mut PeStokes) -> PeStatus {
    guard(|| emit(out, PeStokes(StokesOperator::new(&deref(grid, "grid")?.0))))
}

/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pe_stokes_free(op: *mut PeStokes) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Smallest eigenvalue of the operator.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pe_stokes_beta(op: *const PeStokes, out: *mut c_double) -> PeStatus {
    guard(|| {
        *deref_mut(out, "output pointer")? = deref(op, "operator")?.0.beta();
        Ok(())
    })
}

/// `e^{-tA} f`.
///
/// # Safety
/// Handles must be live and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_stokes_semigroup(
    op: *const PeStokes,
    t: c_double,
    field: *const PeField,
    out: *mut *mut PeField,
) -> PeStatus {
    guard(|| {
        let op = &deref(op, "operator")?.0;
        let f = &deref(field, "field")?.0;
        same_grid(f, op.grid())?;
        emit(out, PeField(op.semigroup_apply(t, f)?))
    })
}

/// Solves `(lambda + A) v = P f` for `lambda = re + i im`.
///
/// # Safety
/// Handles must be live and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_stokes_resolvent(
    op: *const PeStokes,
    re: c_double,
    im: c_double,
    field: *const PeField,
    out: *mut *mut PeField,
) -> PeStatus {
    guard(|| {
        let op = &deref(op, "operator")?.0;
        let f = &deref(field, "field")?.0;
        same_grid(f, op.grid())?;
        let (v, _) = op.resolvent_solve(Complex64::new(re, im), f)?;
        emit(out, PeField(v))
    })
}

/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pe_checkpoint_save(field: *const PeField, path: *const c_char) -> PeStatus {
    guard(|| Ok(checkpoint::save_field(path_arg(path)?, &deref(field, "field")?.0)?))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pe_checkpoint_load(path: *const c_char, out: *mut *mut PeField) -> PeStatus {
    guard(|| emit(out, PeField(checkpoint::load_field(path_arg(path)?)?)))
}
