//! C ABI over `rewardot`.
//!
//! Every fallible call returns an [`RwStatus`] and writes results through out
//! pointers. On failure, [`rw_last_error`] gives a message for the calling
//! thread. Handles are opaque; each `*_new` or producing call hands
//! ownership to the caller, who releases it with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rewardot::mdp::build_gridworld;
use rewardot::ot::{
    exact_wasserstein, ground_metric_gridworld, medoid_centroid, sinkhorn_distance,
    wasserstein_barycenter,
};
use rewardot::reward::phi_embed;
use rewardot::{DiscreteMeasure, Error, GroundMetric, OtConfig, RewardTable};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericFailure = 2,
    GenerationFailure = 3,
    Parse = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

/// A probability vector.
pub struct RwMeasure(DiscreteMeasure);

/// A ground metric on `size` points.
pub struct RwMetric(GroundMetric);

/// A state-action reward table.
pub struct RwReward(RewardTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(error: &Error) -> RwStatus {
    match error {
        Error::InvalidArgument(_) => RwStatus::InvalidArgument,
        Error::NumericFailure(_) => RwStatus::NumericFailure,
        Error::GenerationFailure { .. } => RwStatus::GenerationFailure,
        Error::Parse(_) => RwStatus::Parse,
        Error::Io(_) => RwStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> RwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            RwStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            RwStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RwStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(p: *mut T, value: T, name: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(value);
    Ok(())
}

unsafe fn measures<'a>(
    items: *const *const RwMeasure,
    count: usize,
) -> Result<Vec<&'a DiscreteMeasure>, Fail> {
    slice(items, count, "measures")?
        .iter()
        .map(|&m| deref(m, "measures[i]").map(|m| &m.0))
        .collect()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `len` weights into a new measure. They must be nonnegative and sum to one.
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_measure_new(
    weights: *const f64,
    len: usize,
    out: *mut *mut RwMeasure,
) -> RwStatus {
    guard(|| {
        let m = DiscreteMeasure::new(slice(weights, len, "weights")?.to_vec())?;
        write(out, Box::into_raw(Box::new(RwMeasure(m))), "out")
    })
}

/// Number of support points, or 0 for a null handle.
///
/// # Safety
/// `measure` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rw_measure_len(measure: *const RwMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.0.len())
}

/// Copies the weights into `out`, which must hold `len` doubles where
/// `len` equals [`rw_measure_len`].
///
/// # Safety
/// `measure` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_measure_weights(
    measure: *const RwMeasure,
    out: *mut f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let m = deref(measure, "measure")?;
        if len != m.0.len() {
            return Err(Error::InvalidArgument(format!("buffer holds {len}, measure has {}", m.0.len())).into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        ptr::copy_nonoverlapping(m.0.weights().as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `measure` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rw_measure_free(measure: *mut RwMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Builds a metric from a row-major `size × size` cost matrix.
///
/// # Safety
/// `costs` must point to `size * size` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_metric_new(
    costs: *const f64,
    size: usize,
    out: *mut *mut RwMetric,
) -> RwStatus {
    guard(|| {
        let cells = size
            .checked_mul(size)
            .ok_or_else(|| Error::InvalidArgument("metric size overflows".into()))?;
        let m = GroundMetric::new(size, slice(costs, cells, "costs")?.to_vec())?;
        write(out, Box::into_raw(Box::new(RwMetric(m))), "out")
    })
}

/// Gridworld metric on state-action pairs: Manhattan distance between cells
/// plus `action_penalty` when the actions differ. Five actions per cell.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_metric_gridworld(
    width: usize,
    height: usize,
    action_penalty: f64,
    out: *mut *mut RwMetric,
) -> RwStatus {
    guard(|| {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid dimensions must be positive".into()).into());
        }
        let mdp = build_gridworld(width, height, 0.0, 0.9, &[(width - 1, height - 1)])?;
        let m = ground_metric_gridworld(&mdp, action_penalty)?;
        write(out, Box::into_raw(Box::new(RwMetric(m))), "out")
    })
}

/// Number of support points, or 0 for a null handle.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rw_metric_size(metric: *const RwMetric) -> usize {
    metric.as_ref().map_or(0, |m| m.0.size())
}

/// # Safety
/// `metric` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rw_metric_free(metric: *mut RwMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Copies a row-major `num_states × num_actions` reward table.
///
/// # Safety
/// `values` must point to `num_states * num_actions` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_reward_new(
    values: *const f64,
    num_states: usize,
    num_actions: usize,
    out: *mut *mut RwReward,
) -> RwStatus {
    guard(|| {
        let cells = num_states
            .checked_mul(num_actions)
            .ok_or_else(|| Error::InvalidArgument("reward table size overflows".into()))?;
        let r = RewardTable::new(num_states, num_actions, slice(values, cells, "values")?.to_vec())?;
        write(out, Box::into_raw(Box::new(RwReward(r))), "out")
    })
}

/// # Safety
/// `reward` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rw_reward_free(reward: *mut RwReward) {
    if !reward.is_null() {
        drop(Box::from_raw(reward));
    }
}

/// Softmax embedding of a reward table at `temperature`.
///
/// # Safety
/// `reward` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_phi_embed(
    reward: *const RwReward,
    temperature: f64,
    out: *mut *mut RwMeasure,
) -> RwStatus {
    guard(|| {
        let m = phi_embed(&deref(reward, "reward")?.0, temperature)?;
        write(out, Box::into_raw(Box::new(RwMeasure(m))), "out")
    })
}

/// Exact p-Wasserstein distance.
///
/// # Safety
/// Handles must be live; `out_distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_exact_distance(
    a: *const RwMeasure,
    b: *const RwMeasure,
    metric: *const RwMetric,
    order_p: f64,
    out_distance: *mut f64,
) -> RwStatus {
    guard(|| {
        let r = exact_wasserstein(&deref(a, "a")?.0, &deref(b, "b")?.0, &deref(metric, "metric")?.0, order_p)?;
        write(out_distance, r.distance, "out_distance")
    })
}

/// Entropic estimate `⟨γ_ε, cost^p⟩^(1/p)`. Both measures must be strictly
/// positive. `out_converged` may be null.
///
/// # Safety
/// Handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_sinkhorn_distance(
    a: *const RwMeasure,
    b: *const RwMeasure,
    metric: *const RwMetric,
    order_p: f64,
    reg_epsilon: f64,
    max_iterations: usize,
    convergence_tol: f64,
    out_value: *mut f64,
    out_converged: *mut bool,
) -> RwStatus {
    guard(|| {
        let config = OtConfig { order_p, reg_epsilon, max_iterations, convergence_tol };
        let r = sinkhorn_distance(&deref(a, "a")?.0, &deref(b, "b")?.0, &deref(metric, "metric")?.0, &config)?;
        write(out_value, r.value, "out_value")?;
        if !out_converged.is_null() {
            out_converged.write(r.converged);
        }
        Ok(())
    })
}

/// Set member minimizing the summed exact distance to all members.
///
/// # Safety
/// `items` must point to `count` live handles; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_medoid(
    items: *const *const RwMeasure,
    count: usize,
    metric: *const RwMetric,
    order_p: f64,
    out_index: *mut usize,
    out_objective: *mut f64,
) -> RwStatus {
    guard(|| {
        let set: Vec<DiscreteMeasure> = measures(items, count)?.into_iter().cloned().collect();
        let m = medoid_centroid(&set, &deref(metric, "metric")?.0, order_p)?;
        write(out_index, m.index, "out_index")?;
        write(out_objective, m.objective, "out_objective")
    })
}

/// Entropic barycenter with nonnegative `weights` summing to one.
/// `out_converged` may be null.
///
/// # Safety
/// `items` must point to `count` live handles and `weights` to `count`
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_barycenter(
    items: *const *const RwMeasure,
    weights: *const f64,
    count: usize,
    metric: *const RwMetric,
    order_p: f64,
    reg_epsilon: f64,
    max_iterations: usize,
    convergence_tol: f64,
    out: *mut *mut RwMeasure,
    out_converged: *mut bool,
) -> RwStatus {
    guard(|| {
        let set: Vec<DiscreteMeasure> = measures(items, count)?.into_iter().cloned().collect();
        let lambda = slice(weights, count, "weights")?;
        let config = OtConfig { order_p, reg_epsilon, max_iterations, convergence_tol };
        let r = wasserstein_barycenter(&set, lambda, &deref(metric, "metric")?.0, &config)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if !out_converged.is_null() {
            out_converged.write(r.converged);
        }
        out.write(Box::into_raw(Box::new(RwMeasure(r.barycenter))));
        Ok(())
    })
}
