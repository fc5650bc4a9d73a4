//! Step limiting and divergence heuristics.

use crate::netmodel::Var;

/// Cap one component step at `dv_max`, then clamp the result to `[v_min, v_max]`.
pub fn apply_voltage_limit(v: f64, dv: f64, dv_max: f64, v_min: f64, v_max: f64) -> f64 {
    let step = dv.signum() * dv.abs().min(dv_max);
    let step = if dv == 0.0 { 0.0 } else { step };
    (v + step).clamp(v_min, v_max)
}

/// Move `x` to `x_new` in place, limiting only nodal voltage components.
///
/// Current and reactive-power unknowns take the full Newton step.
pub fn limit_step(x: &mut [f64], x_new: &[f64], vars: &[Var], dv_max: f64, v_min: f64, v_max: f64) {
    for ((xi, &xn), var) in x.iter_mut().zip(x_new).zip(vars) {
        if var.is_voltage() {
            *xi = apply_voltage_limit(*xi, xn - *xi, dv_max, v_min, v_max);
        } else {
            *xi = xn;
        }
    }
}

/// True when the mismatch history has gone non-finite, grown over each of
/// the last `window` iterations, or risen above `ratio` times its first value.
pub fn detect_divergence(history: &[f64], window: usize, ratio: f64) -> bool {
    let Some(&last) = history.last() else {
        return false;
    };
    if history.iter().any(|r| !r.is_finite()) {
        return true;
    }
    if last > ratio * history[0] {
        return true;
    }
    if window > 0 && history.len() > window {
        let tail = &history[history.len() - window - 1..];
        if tail.windows(2).all(|w| w[1] > w[0]) {
            return true;
        }
    }
    false
}
