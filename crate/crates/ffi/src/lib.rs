//! C ABI over the `plateau` crate.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json` or
//! transform calls and released with the matching `*_free`. Every fallible call
//! returns a [`PlateauStatus`]; on failure the message is available from
//! [`plateau_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use plateau::circuit::{Observable, ParamCircuit};
use plateau::estimator::{bounds, Estimator, EstimatorOptions, ParamSelection, Quantity};
use plateau::mpqc::{insert_gadget_layer, OpModel};
use plateau::oracle::two_design_check;
use plateau::pauli::PauliWord;
use plateau::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlateauStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed Pauli string.
    Parse = 3,
    /// Malformed or inconsistent document, or an out-of-range argument.
    Invalid = 4,
    CapExceeded = 5,
    MissingGadgetLayer = 6,
    NotSplit = 7,
    ActivationInfeasible = 8,
    Io = 9,
    Panic = 10,
}

/// Run the path formula even when the split condition fails.
pub const PLATEAU_ACKNOWLEDGE_NONSPLIT: u32 = 1;
/// Estimate every parameter's gradient variance alongside the loss variance.
pub const PLATEAU_ALL_PARAMS: u32 = 2;

pub struct PlateauCircuit {
    inner: ParamCircuit,
}

pub struct PlateauObservable {
    inner: Observable,
}

pub struct PlateauEstimate {
    rows: Vec<PlateauEstimateRow>,
}

/// One estimate. `quantity` is 0 for the loss variance and 1 for a gradient
/// variance; `param_index` is -1 for the loss; `samples` is 0 for exact results.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauEstimateRow {
    pub quantity: u32,
    pub param_index: i64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlateauStatus {
    match e {
        Error::Json(_) | Error::PauliParse { .. } | Error::Csv(_) => PlateauStatus::Parse,
        Error::Cap { .. } => PlateauStatus::CapExceeded,
        Error::MissingGadgetLayer => PlateauStatus::MissingGadgetLayer,
        Error::NoSplit(..) => PlateauStatus::NotSplit,
        Error::ActivationInfeasible(_) => PlateauStatus::ActivationInfeasible,
        Error::Io(_) => PlateauStatus::Io,
        _ => PlateauStatus::Invalid,
    }
}

struct Fail(PlateauStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PlateauStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlateauStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            PlateauStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PlateauStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PlateauStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(PlateauStatus::NullArgument, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(PlateauStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

/// Message of the last failing call on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn plateau_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plateau_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses circuit JSON into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn plateau_circuit_from_json(json: *const c_char, out: *mut *mut PlateauCircuit) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let c = ParamCircuit::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(PlateauCircuit { inner: c }));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_circuit_free(c: *mut PlateauCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Serializes a circuit; release the string with [`plateau_string_free`].
///
/// # Safety
/// `c` must be a live circuit handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn plateau_circuit_to_json(c: *const PlateauCircuit, out: *mut *mut c_char) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let json = handle(c, "circuit")?.inner.to_json();
        *out = CString::new(json).map_err(|e| Fail(PlateauStatus::Invalid, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `c` must be a live circuit handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_circuit_num_params(c: *const PlateauCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.inner.num_params())
}

/// Total wire count, system plus ancilla.
///
/// # Safety
/// `c` must be a live circuit handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_circuit_num_qubits(c: *const PlateauCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.inner.n_qubits())
}

/// Inserts a gadget layer before gate `position`. `op` is "fixed" or "trainable".
///
/// # Safety
/// `c` must be a live circuit handle, `op` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_insert_gadget_layer(
    c: *const PlateauCircuit,
    position: usize,
    op: *const c_char,
    out: *mut *mut PlateauCircuit,
) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let c = handle(c, "circuit")?;
        let name = text(op, "op")?;
        let op = OpModel::from_name(name).ok_or_else(|| Fail(PlateauStatus::Invalid, format!("unknown op model {name:?}")))?;
        let m = insert_gadget_layer(&c.inner, position, op)?;
        *out = Box::into_raw(Box::new(PlateauCircuit { inner: m }));
        Ok(())
    })
}

/// Parses observable JSON. `n_qubits` = 0 infers the width from the terms.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn plateau_observable_from_json(json: *const c_char, n_qubits: usize, out: *mut *mut PlateauObservable) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let n = (n_qubits > 0).then_some(n_qubits);
        let o = Observable::from_json(text(json, "json")?, n)?;
        *out = Box::into_raw(Box::new(PlateauObservable { inner: o }));
        Ok(())
    })
}

/// # Safety
/// `o` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_observable_free(o: *mut PlateauObservable) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Estimates the loss variance and, with [`PLATEAU_ALL_PARAMS`], every gradient
/// variance. `samples` = 0 enumerates exactly.
///
/// # Safety
/// `c` and `o` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn plateau_estimate(
    c: *const PlateauCircuit,
    o: *const PlateauObservable,
    samples: u64,
    seed: u64,
    flags: u32,
    out: *mut *mut PlateauEstimate,
) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let (c, o) = (handle(c, "circuit")?, handle(o, "observable")?);
        let opts = EstimatorOptions { acknowledge_nonsplit: flags & PLATEAU_ACKNOWLEDGE_NONSPLIT != 0, ..Default::default() };
        let sel = if flags & PLATEAU_ALL_PARAMS != 0 { ParamSelection::All } else { ParamSelection::None };
        let est = Estimator::new(&c.inner, &o.inner, None, opts)?;
        let rows = if samples == 0 {
            let ex = est.exact(&sel)?;
            let exact_row = |quantity, param_index, mean| PlateauEstimateRow { quantity, param_index, mean, std_error: 0.0, samples: 0, seed };
            std::iter::once(exact_row(0, -1, ex.variance))
                .chain(ex.grads.iter().map(|&(j, g)| exact_row(1, j as i64, g)))
                .collect()
        } else {
            let mc = est.monte_carlo(samples, seed, &sel)?;
            std::iter::once(&mc.variance)
                .chain(&mc.grads)
                .map(|r| PlateauEstimateRow {
                    quantity: u32::from(r.quantity == Quantity::GradVar),
                    param_index: r.param_index.map_or(-1, |j| j as i64),
                    mean: r.mean,
                    std_error: r.stderr,
                    samples: r.samples,
                    seed: r.seed,
                })
                .collect()
        };
        *out = Box::into_raw(Box::new(PlateauEstimate { rows }));
        Ok(())
    })
}

/// # Safety
/// `e` must be a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_estimate_len(e: *const PlateauEstimate) -> usize {
    e.as_ref().map_or(0, |e| e.rows.len())
}

/// Copies row `index` into `row`.
///
/// # Safety
/// `e` must be a live estimate handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_estimate_row(e: *const PlateauEstimate, index: usize, row: *mut PlateauEstimateRow) -> PlateauStatus {
    guard(|| {
        out_ptr(row)?;
        let e = handle(e, "estimate")?;
        let r = e.rows.get(index).ok_or_else(|| Fail(PlateauStatus::Invalid, format!("row {index} out of range ({} rows)", e.rows.len())))?;
        *row = *r;
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_estimate_free(e: *mut PlateauEstimate) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Closed-form loss-variance lower bound for a circuit with a gadget layer.
///
/// # Safety
/// `c` and `o` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_variance_lower_bound(c: *const PlateauCircuit, o: *const PlateauObservable, out: *mut f64) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let (c, o) = (handle(c, "circuit")?, handle(o, "observable")?);
        *out = bounds(&c.inner, &o.inner, OpModel::detect(&c.inner), None)?.variance_lower;
        Ok(())
    })
}

/// Maximum deviation of the quarter-turn second moment from the uniform one.
///
/// # Safety
/// `generator` must be a NUL-terminated Pauli string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_two_design_deviation(generator: *const c_char, out: *mut f64) -> PlateauStatus {
    guard(|| {
        out_ptr(out)?;
        let g = text(generator, "generator")?;
        let n = PauliWord::required_qubits(g)?.max(1);
        *out = two_design_check(&PauliWord::parse(g, n)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
