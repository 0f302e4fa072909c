//! C ABI over `suft-core`.
//!
//! Every fallible function returns a [`SuftStatus`]; on failure a message is
//! available from [`suft_last_error_message`] on the same thread. Handles
//! (`SuftMlp`, `SuftReplayBuffer`) are opaque, created by the matching
//! `*_new`/`*_load` function and released with `*_free`. Array arguments are
//! caller-owned and only read (or written) for the duration of the call.
//! Panics never cross the boundary; they surface as `SUFT_STATUS_PANIC`.
//! Enum-typed inputs (`loss`, `activation`) are passed as `uint32_t` holding
//! a `SuftLoss` / `SuftActivation` value and are range-checked.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use suft_core::causal::{self, FiniteJoint, HypothesisTable, OutcomeDist};
use suft_core::harness::stats;
use suft_core::nn::{self, Activation, Mlp};
use suft_core::replay::{ReplayBuffer, Transition};
use suft_core::{rng_from_seed, LossFn};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Result undefined for these inputs (e.g. a metric's validity condition fails).
    Domain = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuftLoss {
    L1 = 0,
    L2 = 1,
}

fn loss_arg(code: u32) -> Result<LossFn, Failure> {
    match code {
        c if c == SuftLoss::L1 as u32 => Ok(LossFn::L1),
        c if c == SuftLoss::L2 as u32 => Ok(LossFn::L2),
        c => Err(invalid(format!("unknown loss code {c}"))),
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuftActivation {
    Relu = 0,
    Tanh = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuftBoundReport {
    pub factual: f64,
    pub counterfactual: f64,
    pub psi: f64,
    pub delta: f64,
    pub slack: f64,
    pub holds: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuftSweepResult {
    pub holds_all: bool,
    pub violation_count: usize,
    pub min_slack: f64,
    pub assumption_violation_count: usize,
}

/// Opaque multilayer perceptron.
pub struct SuftMlp(Mlp);

/// Opaque replay buffer.
pub struct SuftReplayBuffer(ReplayBuffer);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes replaced"));
}

struct Failure(SuftStatus, String);

impl Failure {
    fn new(status: SuftStatus, msg: impl ToString) -> Self {
        Self(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SuftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SuftStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SuftStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(SuftStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(SuftStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_in(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::new(SuftStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::new(SuftStatus::InvalidArgument, "path is not UTF-8"))
}

fn invalid(e: impl ToString) -> Failure {
    Failure::new(SuftStatus::InvalidArgument, e)
}

/// Message for the last failing call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn suft_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn suft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- bound

/// Evaluates the factual-loss bound on an explicit finite joint.
///
/// Treatment 0 is the target, `1..n_treatments` are controls. Arrays are
/// row-major: `q[t]`, `px_given_t[t * n_obs + x]`, `phi[x * n_treatments + t]`.
/// Each `(x, t)` cell has `n_support` outcome values and probabilities at
/// `outcome_values[(x * n_treatments + t) * n_support + k]` (same layout for
/// `outcome_probs`).
#[no_mangle]
pub unsafe extern "C" fn suft_verify_bound(
    n_obs: usize,
    n_treatments: usize,
    n_support: usize,
    q: *const f64,
    px_given_t: *const f64,
    outcome_values: *const f64,
    outcome_probs: *const f64,
    phi: *const f64,
    loss: u32,
    out: *mut SuftBoundReport,
) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if n_obs == 0 || n_treatments < 2 || n_support == 0 {
            return Err(invalid("need n_obs >= 1, n_treatments >= 2, n_support >= 1"));
        }
        let cells = n_obs * n_treatments;
        let q = slice_in(q, n_treatments, "q")?.to_vec();
        let px = slice_in(px_given_t, n_treatments * n_obs, "px_given_t")?;
        let values = slice_in(outcome_values, cells * n_support, "outcome_values")?;
        let probs = slice_in(outcome_probs, cells * n_support, "outcome_probs")?;
        let phi = slice_in(phi, cells, "phi")?;

        let px: Vec<Vec<f64>> = px.chunks(n_obs).map(<[f64]>::to_vec).collect();
        let mut outcomes = Vec::with_capacity(n_obs);
        for x in 0..n_obs {
            let mut row = Vec::with_capacity(n_treatments);
            for t in 0..n_treatments {
                let at = (x * n_treatments + t) * n_support;
                let span = at..at + n_support;
                row.push(OutcomeDist::new(values[span.clone()].to_vec(), probs[span].to_vec()).map_err(invalid)?);
            }
            outcomes.push(row);
        }
        let joint = FiniteJoint::new(q, px, outcomes).map_err(invalid)?;
        let table = HypothesisTable::new(phi.chunks(n_treatments).map(<[f64]>::to_vec).collect())
            .map_err(invalid)?;
        let r = causal::verify_bound(&joint, &table, loss_arg(loss)?).map_err(invalid)?;
        *out = SuftBoundReport {
            factual: r.factual,
            counterfactual: r.counterfactual,
            psi: r.psi,
            delta: r.delta,
            slack: r.slack,
            holds: r.holds,
        };
        Ok(())
    })
}

/// Runs `trials` bound verifications on random joints (see the `suft
/// verify-bound` command).
#[no_mangle]
pub unsafe extern "C" fn suft_verify_random_trials(
    trials: usize,
    max_controls: usize,
    loss: u32,
    seed: u64,
    out: *mut SuftSweepResult,
) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = causal::verify_random_trials(trials, max_controls, loss_arg(loss)?, seed).map_err(invalid)?;
        *out = SuftSweepResult {
            holds_all: s.holds_all,
            violation_count: s.violation_count,
            min_slack: s.min_slack,
            assumption_violation_count: s.assumption_violation_count,
        };
        Ok(())
    })
}

// ---------------------------------------------------------------- networks

/// He-uniform initialized network with `n_layers` layer sizes (input first).
#[no_mangle]
pub unsafe extern "C" fn suft_mlp_new(
    layer_sizes: *const usize,
    n_layers: usize,
    activation: u32,
    seed: u64,
    out: *mut *mut SuftMlp,
) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sizes = slice_in(layer_sizes, n_layers, "layer_sizes")?;
        let act = match activation {
            c if c == SuftActivation::Relu as u32 => Activation::Relu,
            c if c == SuftActivation::Tanh as u32 => Activation::Tanh,
            c => return Err(invalid(format!("unknown activation code {c}"))),
        };
        let net = Mlp::init(sizes, act, &mut rng_from_seed(seed)).map_err(invalid)?;
        *out = Box::into_raw(Box::new(SuftMlp(net)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn suft_mlp_free(net: *mut SuftMlp) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of trainable parameters, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn suft_mlp_param_count(net: *const SuftMlp) -> usize {
    net.as_ref().map_or(0, |n| n.0.weights().len())
}

/// Copies the flat parameter vector into `weights` (length `len`, which must
/// equal the parameter count).
#[no_mangle]
pub unsafe extern "C" fn suft_mlp_get_weights(net: *const SuftMlp, weights: *mut f64, len: usize) -> SuftStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(SuftStatus::NullPointer, "net is null"))?;
        if len != net.0.weights().len() {
            return Err(invalid(format!("expected {} weights, got {len}", net.0.weights().len())));
        }
        if weights.is_null() {
            return Err(Failure::new(SuftStatus::NullPointer, "weights is null"));
        }
        slice::from_raw_parts_mut(weights, len).copy_from_slice(net.0.weights());
        Ok(())
    })
}

/// Forward pass of one input row.
#[no_mangle]
pub unsafe extern "C" fn suft_mlp_forward(
    net: *const SuftMlp,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> SuftStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(SuftStatus::NullPointer, "net is null"))?;
        let x = slice_in(input, input_len, "input")?;
        if output_len != net.0.output_dim() {
            return Err(invalid(format!("output has length {output_len}, network emits {}", net.0.output_dim())));
        }
        let y = net.0.forward(x).map_err(invalid)?;
        if output.is_null() {
            return Err(Failure::new(SuftStatus::NullPointer, "output is null"));
        }
        slice::from_raw_parts_mut(output, output_len).copy_from_slice(&y);
        Ok(())
    })
}

fn checkpoint_failure(e: nn::CheckpointError) -> Failure {
    match e {
        nn::CheckpointError::Io(_) => Failure::new(SuftStatus::Io, e),
        _ => Failure::new(SuftStatus::Parse, e),
    }
}

/// Writes the network in the `SUFTNN1` checkpoint format.
#[no_mangle]
pub unsafe extern "C" fn suft_mlp_save(net: *const SuftMlp, path: *const c_char) -> SuftStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(SuftStatus::NullPointer, "net is null"))?;
        nn::save_weights(&net.0, path_in(path)?).map_err(checkpoint_failure)
    })
}

#[no_mangle]
pub unsafe extern "C" fn suft_mlp_load(path: *const c_char, out: *mut *mut SuftMlp) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let net = nn::load_weights(path_in(path)?).map_err(checkpoint_failure)?;
        *out = Box::into_raw(Box::new(SuftMlp(net)));
        Ok(())
    })
}

// ---------------------------------------------------------------- replay

#[no_mangle]
pub unsafe extern "C" fn suft_replay_new(
    capacity: usize,
    obs_dim: usize,
    out: *mut *mut SuftReplayBuffer,
) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let buf = ReplayBuffer::with_obs_dim(capacity, obs_dim).map_err(invalid)?;
        *out = Box::into_raw(Box::new(SuftReplayBuffer(buf)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn suft_replay_free(buf: *mut SuftReplayBuffer) {
    if !buf.is_null() {
        drop(Box::from_raw(buf));
    }
}

/// Appends a transition; `obs` and `next_obs` have the buffer's `obs_dim`
/// entries. The oldest transition is evicted when full.
#[no_mangle]
pub unsafe extern "C" fn suft_replay_push(
    buf: *mut SuftReplayBuffer,
    obs: *const f64,
    next_obs: *const f64,
    action: usize,
    reward: f64,
    terminated: bool,
    v_behavior: f64,
    policy_id: u64,
) -> SuftStatus {
    guard(|| {
        let buf = buf.as_mut().ok_or_else(|| Failure::new(SuftStatus::NullPointer, "buffer is null"))?;
        let d = buf.0.obs_dim().unwrap_or(0);
        let t = Transition {
            obs: slice_in(obs, d, "obs")?.to_vec(),
            action,
            reward,
            next_obs: slice_in(next_obs, d, "next_obs")?.to_vec(),
            terminated,
            v_behavior,
            policy_id,
        };
        buf.0.push(t).map_err(invalid)
    })
}

/// Number of stored transitions, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn suft_replay_len(buf: *const SuftReplayBuffer) -> usize {
    buf.as_ref().map_or(0, |b| b.0.len())
}

/// Number of distinct policy ids among stored transitions.
#[no_mangle]
pub unsafe extern "C" fn suft_replay_distinct_policies(buf: *const SuftReplayBuffer) -> usize {
    buf.as_ref().map_or(0, |b| b.0.distinct_policies())
}

/// Stored behavior value of the `index`-th oldest transition.
#[no_mangle]
pub unsafe extern "C" fn suft_replay_v_behavior(
    buf: *const SuftReplayBuffer,
    index: usize,
    out: *mut f64,
) -> SuftStatus {
    guard(|| {
        let buf = buf.as_ref().ok_or_else(|| Failure::new(SuftStatus::NullPointer, "buffer is null"))?;
        let out = out_ref(out, "out")?;
        let t = buf
            .0
            .iter()
            .nth(index)
            .ok_or_else(|| invalid(format!("index {index} out of range for {} transitions", buf.0.len())))?;
        *out = t.v_behavior;
        Ok(())
    })
}

// ---------------------------------------------------------------- statistics

/// Improvement percentage of `higher` over `lower` relative to `random`;
/// `SUFT_STATUS_DOMAIN` when either margin over random is not positive.
#[no_mangle]
pub unsafe extern "C" fn suft_improvement_pct(higher: f64, lower: f64, random: f64, out: *mut f64) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = stats::improvement_pct(higher, lower, random)
            .ok_or_else(|| Failure::new(SuftStatus::Domain, "both margins over random must be positive"))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn suft_upper_median(values: *const f64, n: usize, out: *mut f64) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let v = slice_in(values, n, "values")?;
        *out = stats::upper_median(v).map_err(|e| Failure::new(SuftStatus::Domain, e))?;
        Ok(())
    })
}

/// Two-sided Welch t-test p-value.
#[no_mangle]
pub unsafe extern "C" fn suft_welch_p_value(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut f64,
) -> SuftStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (a, b) = (slice_in(a, n_a, "a")?, slice_in(b, n_b, "b")?);
        *out = stats::welch_t_test(a, b)
            .map_err(|e| Failure::new(SuftStatus::Domain, e))?
            .p_value;
        Ok(())
    })
}
