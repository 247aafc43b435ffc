//! C ABI for the expconcave library.
//!
//! Loss models and domains are opaque handles created and freed through
//! constructor/destructor pairs; every other entry point is a pure function
//! writing its result through an out-pointer and returning an [`ExpcStatus`]
//! code. All functions catch panics at the boundary and report them as
//! `EXPC_PANIC` instead of unwinding into foreign frames.
//!
//! The matching header is generated into `include/expconcave.h` by the
//! build script (cbindgen).

use std::panic::{catch_unwind, AssertUnwindSafe};

use expconcave::boost::{bayes_redundancy, confidence_boost, meta_bound, RedundancySpec};
use expconcave::diagnostics::erm_selection_threshold;
use expconcave::domains::ConvexDomain;
use expconcave::erm::{erm_fit, erm_whp_bound, SolverConfig, StepRule};
use expconcave::losses::{LossModel, Outcome};
use expconcave::online::{o2b_excess_bound, regret_bound, LearnerKind, RegretBoundParams};
use expconcave::Error;

/// Result codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpcStatus {
    ExpcOk = 0,
    ExpcNullPointer = 1,
    ExpcInvalidInput = 2,
    ExpcPrecondition = 3,
    ExpcConvergence = 4,
    ExpcUnsupportedDimension = 5,
    ExpcPanic = 6,
}

/// Online learner selector for the regret bound evaluator.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpcLearner {
    ExpcLearnerOgd = 0,
    ExpcLearnerOns = 1,
    ExpcLearnerEwoo = 2,
}

/// Opaque loss-model handle.
pub struct ExpcLoss {
    inner: LossModel,
}

/// Opaque convex-domain handle.
pub struct ExpcDomain {
    inner: ConvexDomain,
}

fn status_of(e: &Error) -> ExpcStatus {
    match e {
        Error::InvalidInput { .. } => ExpcStatus::ExpcInvalidInput,
        Error::Precondition { .. } => ExpcStatus::ExpcPrecondition,
        Error::Convergence { .. } => ExpcStatus::ExpcConvergence,
        Error::UnsupportedDimension { .. } => ExpcStatus::ExpcUnsupportedDimension,
    }
}

fn guard(f: impl FnOnce() -> ExpcStatus) -> ExpcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => ExpcStatus::ExpcPanic,
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn expc_status_message(status: ExpcStatus) -> *const std::os::raw::c_char {
    let msg: &'static [u8] = match status {
        ExpcStatus::ExpcOk => b"ok\0",
        ExpcStatus::ExpcNullPointer => b"null pointer argument\0",
        ExpcStatus::ExpcInvalidInput => b"invalid input\0",
        ExpcStatus::ExpcPrecondition => b"precondition violated\0",
        ExpcStatus::ExpcConvergence => b"solver did not converge\0",
        ExpcStatus::ExpcUnsupportedDimension => b"dimension unsupported\0",
        ExpcStatus::ExpcPanic => b"internal panic\0",
    };
    msg.as_ptr() as *const std::os::raw::c_char
}

// ---------------------------------------------------------------------------
// Loss handles
// ---------------------------------------------------------------------------

/// Squared loss `(y - <f, x>)^2` with diameter bound `b`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn expc_loss_new_squared(b: f64, out: *mut *mut ExpcLoss) -> ExpcStatus {
    if out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    guard(|| match LossModel::squared(b) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(ExpcLoss { inner })) };
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// Logistic loss `log(1 + exp(-y <f, x>))` with diameter bound `b`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn expc_loss_new_logistic(b: f64, out: *mut *mut ExpcLoss) -> ExpcStatus {
    if out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    guard(|| match LossModel::logistic(b) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(ExpcLoss { inner })) };
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// Exp-concavity rate carried by the loss.
///
/// # Safety
/// `loss` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_loss_eta(loss: *const ExpcLoss, out: *mut f64) -> ExpcStatus {
    if loss.is_null() || out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    unsafe { *out = (*loss).inner.eta() };
    ExpcStatus::ExpcOk
}

/// # Safety
/// `loss` must be a handle from one of the constructors, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn expc_loss_free(loss: *mut ExpcLoss) {
    if !loss.is_null() {
        drop(unsafe { Box::from_raw(loss) });
    }
}

// ---------------------------------------------------------------------------
// Domain handles
// ---------------------------------------------------------------------------

/// L2 ball of the given center and radius.
///
/// # Safety
/// `center` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_domain_new_l2_ball(
    center: *const f64,
    dim: usize,
    radius: f64,
    out: *mut *mut ExpcDomain,
) -> ExpcStatus {
    if center.is_null() || out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    let center = unsafe { std::slice::from_raw_parts(center, dim) }.to_vec();
    guard(|| match ConvexDomain::l2_ball(center, radius) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(ExpcDomain { inner })) };
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// Axis-aligned box with per-coordinate bounds.
///
/// # Safety
/// `lo` and `hi` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_domain_new_box(
    lo: *const f64,
    hi: *const f64,
    dim: usize,
    out: *mut *mut ExpcDomain,
) -> ExpcStatus {
    if lo.is_null() || hi.is_null() || out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    let lo = unsafe { std::slice::from_raw_parts(lo, dim) }.to_vec();
    let hi = unsafe { std::slice::from_raw_parts(hi, dim) }.to_vec();
    guard(|| match ConvexDomain::box_bounds(lo, hi) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(ExpcDomain { inner })) };
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// Probability simplex with `dim` coordinates.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_domain_new_simplex(
    dim: usize,
    out: *mut *mut ExpcDomain,
) -> ExpcStatus {
    if out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    guard(|| match ConvexDomain::simplex(dim) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(ExpcDomain { inner })) };
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// # Safety
/// `domain` must be a handle from one of the constructors, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn expc_domain_free(domain: *mut ExpcDomain) {
    if !domain.is_null() {
        drop(unsafe { Box::from_raw(domain) });
    }
}

/// Euclidean projection of `point` onto the domain, written to `out`
/// (`dim` doubles).
///
/// # Safety
/// `point` and `out` must point to `dim` doubles; `domain` must be live.
#[no_mangle]
pub unsafe extern "C" fn expc_domain_project(
    domain: *const ExpcDomain,
    point: *const f64,
    dim: usize,
    out: *mut f64,
) -> ExpcStatus {
    if domain.is_null() || point.is_null() || out.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    let domain = unsafe { &(*domain).inner };
    let point = unsafe { std::slice::from_raw_parts(point, dim) };
    guard(|| match domain.project(point) {
        Ok(projected) => {
            let out = unsafe { std::slice::from_raw_parts_mut(out, dim) };
            out.copy_from_slice(&projected);
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

fn gather_sample(xs: *const f64, ys: *const f64, n: usize, dim: usize) -> Vec<Outcome> {
    let xs = unsafe { std::slice::from_raw_parts(xs, n * dim) };
    let ys = unsafe { std::slice::from_raw_parts(ys, n) };
    (0..n).map(|i| Outcome::new(xs[i * dim..(i + 1) * dim].to_vec(), ys[i])).collect()
}

/// Empirical risk minimization over the domain; the fitted hypothesis is
/// written to `out_hypothesis` (`dim` doubles). `max_iters = 0` and
/// `tol = 0` select the defaults.
///
/// # Safety
/// `xs` must point to `n * dim` doubles (row-major), `ys` to `n` doubles,
/// and `out_hypothesis` to `dim` writable doubles; the handles must be live.
#[no_mangle]
pub unsafe extern "C" fn expc_erm_fit(
    loss: *const ExpcLoss,
    domain: *const ExpcDomain,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    dim: usize,
    max_iters: usize,
    tol: f64,
    out_hypothesis: *mut f64,
) -> ExpcStatus {
    if loss.is_null() || domain.is_null() || xs.is_null() || ys.is_null() || out_hypothesis.is_null()
    {
        return ExpcStatus::ExpcNullPointer;
    }
    let loss = unsafe { &(*loss).inner };
    let domain = unsafe { &(*domain).inner };
    let sample = gather_sample(xs, ys, n, dim);
    let mut cfg = SolverConfig::default();
    if max_iters > 0 {
        cfg.max_iters = max_iters;
    }
    if tol > 0.0 {
        cfg.tol = tol;
    }
    cfg.step_rule = StepRule::Backtracking;
    guard(|| match erm_fit(loss, domain, &sample, &cfg) {
        Ok(f) => {
            let out = unsafe { std::slice::from_raw_parts_mut(out_hypothesis, dim) };
            out.copy_from_slice(&f);
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}

/// Two-phase confidence boost with ERM as the base learner; the selected
/// hypothesis is written to `out_hypothesis` and the index of the chosen
/// phase-I candidate to `out_chosen`.
///
/// # Safety
/// Pointer contracts as in [`expc_erm_fit`]; `out_chosen` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_confidence_boost_erm(
    loss: *const ExpcLoss,
    domain: *const ExpcDomain,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    dim: usize,
    delta: f64,
    out_hypothesis: *mut f64,
    out_chosen: *mut usize,
) -> ExpcStatus {
    if loss.is_null()
        || domain.is_null()
        || xs.is_null()
        || ys.is_null()
        || out_hypothesis.is_null()
        || out_chosen.is_null()
    {
        return ExpcStatus::ExpcNullPointer;
    }
    let loss = unsafe { &(*loss).inner };
    let domain = unsafe { &(*domain).inner };
    let sample = gather_sample(xs, ys, n, dim);
    guard(|| {
        let base = |batch: &[Outcome]| erm_fit(loss, domain, batch, &SolverConfig::default());
        match confidence_boost(base, loss, &sample, delta) {
            Ok(run) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_hypothesis, dim) };
                out.copy_from_slice(&run.hypothesis);
                unsafe { *out_chosen = run.chosen };
                ExpcStatus::ExpcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Bound evaluators
// ---------------------------------------------------------------------------

macro_rules! write_bound {
    ($out:ident, $expr:expr) => {{
        if $out.is_null() {
            return ExpcStatus::ExpcNullPointer;
        }
        guard(|| match $expr {
            Ok(v) => {
                unsafe { *$out = v };
                ExpcStatus::ExpcOk
            }
            Err(e) => status_of(&e),
        })
    }};
}

/// High-probability ERM excess-risk bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_erm_whp_bound(
    b: f64,
    eta: f64,
    l: f64,
    r: f64,
    d: usize,
    n: usize,
    delta: f64,
    out: *mut f64,
) -> ExpcStatus {
    write_bound!(out, erm_whp_bound(b, eta, l, r, d, n, delta))
}

/// Confidence-boost bound with `psi(m) = psi_coeff / m`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_meta_bound(
    psi_coeff: f64,
    c: f64,
    q: f64,
    b: f64,
    n: usize,
    delta: f64,
    out: *mut f64,
) -> ExpcStatus {
    write_bound!(out, meta_bound(|m| psi_coeff / m, c, q, b, n, delta))
}

/// Online-to-batch excess-risk bound from realized regret.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_o2b_excess_bound(
    regret: f64,
    eta: f64,
    b: f64,
    n: usize,
    delta: f64,
    out: *mut f64,
) -> ExpcStatus {
    write_bound!(out, o2b_excess_bound(regret, eta, b, n, delta))
}

/// Worst-case regret bound of an online learner over `n` rounds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_regret_bound(
    learner: ExpcLearner,
    eta: f64,
    g: f64,
    d_bound: f64,
    nu: f64,
    dim: usize,
    n: f64,
    out: *mut f64,
) -> ExpcStatus {
    let kind = match learner {
        ExpcLearner::ExpcLearnerOgd => LearnerKind::Ogd,
        ExpcLearner::ExpcLearnerOns => LearnerKind::Ons,
        ExpcLearner::ExpcLearnerEwoo => LearnerKind::Ewoo,
    };
    write_bound!(
        out,
        regret_bound(kind, &RegretBoundParams { eta, g_bound: g, d_bound, nu, dim, n })
    )
}

/// Finite-class ERM selection threshold under a Bernstein condition.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_erm_selection_threshold(
    c: f64,
    q: f64,
    b: f64,
    class_size: usize,
    n: usize,
    delta: f64,
    out: *mut f64,
) -> ExpcStatus {
    write_bound!(out, erm_selection_threshold(c, q, b, class_size, n, delta))
}

/// Prior-weighted redundancy of a finite class: the infimum value and the
/// concentrated-posterior upper bound.
///
/// # Safety
/// `prior` and `excess` must point to `len` doubles; the out-pointers must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn expc_bayes_redundancy(
    prior: *const f64,
    excess: *const f64,
    len: usize,
    eta: f64,
    horizon: usize,
    out_value: *mut f64,
    out_concentrated: *mut f64,
) -> ExpcStatus {
    if prior.is_null() || excess.is_null() || out_value.is_null() || out_concentrated.is_null() {
        return ExpcStatus::ExpcNullPointer;
    }
    let spec = RedundancySpec {
        prior: unsafe { std::slice::from_raw_parts(prior, len) }.to_vec(),
        excess_risks: unsafe { std::slice::from_raw_parts(excess, len) }.to_vec(),
        eta,
        horizon,
    };
    guard(|| match bayes_redundancy(&spec) {
        Ok(rep) => {
            unsafe {
                *out_value = rep.value;
                *out_concentrated = rep.concentrated_bound;
            }
            ExpcStatus::ExpcOk
        }
        Err(e) => status_of(&e),
    })
}
