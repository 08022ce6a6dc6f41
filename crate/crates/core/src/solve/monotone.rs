//! Fixed-point iteration on squared voltages `u ← f(u)`, started from the
//! top of the voltage band.

use crate::model::{DerivedModel, VoltageBand};
use crate::numerics::inf_distance;
use crate::solve::{MapError, SolveOptions, SolveResult, Status, TraceRecorder};

/// Iterates leaving `(0, DIVERGENCE_FACTOR · ū]` are reported as diverged.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// `f_n(u) = √u_n (Σ_m g_nm √u_m + k_n) / c_n − p_n / c_n`.
pub fn monotone_map(model: &DerivedModel, u: &[f64]) -> Result<Vec<f64>, MapError> {
    if u.len() != model.len() {
        return Err(MapError::DimensionMismatch {
            expected: model.len(),
            got: u.len(),
        });
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, x)| x.is_nan() || **x <= 0.0) {
        return Err(MapError::NonPositiveInput { index, value });
    }
    let s: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();
    let mut out = vec![0.0; u.len()];
    apply(model, &s, &mut out);
    Ok(out)
}

fn apply(model: &DerivedModel, sqrt_u: &[f64], out: &mut [f64]) {
    let (c, k, p) = (model.c(), model.k(), model.p());
    for (n, row) in model.coupling().iter().enumerate() {
        let coupled: f64 = row.iter().map(|&(m, g)| g * sqrt_u[m]).sum();
        out[n] = (sqrt_u[n] * (coupled + k[n]) - p[n]) / c[n];
    }
}

/// Runs the iteration from `u⁰ = ū·1`.
///
/// Stops when `‖u^{t+1} − u^t‖∞ ≤ tol`. A non-positive or non-finite map
/// output is a [`Status::DomainError`]; an entry above `10·ū` is
/// [`Status::Diverged`].
pub fn solve_monotone(model: &DerivedModel, band: &VoltageBand, opts: &SolveOptions) -> SolveResult {
    let start = vec![band.u_hi; model.len()];
    run(model, band, opts, start)
}

/// Same iteration from an arbitrary squared-voltage start. Convergence to
/// the high-voltage solution is only established for the default start.
pub fn solve_monotone_from(
    model: &DerivedModel,
    band: &VoltageBand,
    opts: &SolveOptions,
    u0: &[f64],
) -> Result<SolveResult, MapError> {
    if u0.len() != model.len() {
        return Err(MapError::DimensionMismatch {
            expected: model.len(),
            got: u0.len(),
        });
    }
    if let Some((index, &value)) = u0.iter().enumerate().find(|(_, x)| x.is_nan() || **x <= 0.0) {
        return Err(MapError::NonPositiveInput { index, value });
    }
    Ok(run(model, band, opts, u0.to_vec()))
}

fn run(model: &DerivedModel, band: &VoltageBand, opts: &SolveOptions, mut u: Vec<f64>) -> SolveResult {
    assert!(opts.is_valid(), "invalid solve options: {opts:?}");
    let ceiling = DIVERGENCE_FACTOR * band.u_hi;
    let mut next = vec![0.0; u.len()];
    let mut sqrt_u: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();
    let mut trace = TraceRecorder::new(opts.record_trace);
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        apply(model, &sqrt_u, &mut next);
        iterations += 1;
        if next.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            status = Status::DomainError;
            break;
        }
        let diff = inf_distance(&next, &u);
        trace.push(iterations, None, diff);
        std::mem::swap(&mut u, &mut next);
        for (s, x) in sqrt_u.iter_mut().zip(&u) {
            *s = x.sqrt();
        }
        if u.iter().any(|x| *x > ceiling) {
            status = Status::Diverged;
            break;
        }
        if diff <= opts.tol {
            status = Status::Converged;
            break;
        }
    }

    // On a domain error `u` still holds the last admissible iterate.
    let v: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();
    let residual_inf = model.residual_inf(&v);
    SolveResult {
        v,
        iterations,
        trace: trace.finish(),
        status,
        residual_inf,
    }
}
