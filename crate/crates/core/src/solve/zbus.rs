//! Z-bus iteration `v ← Z (k − diag(v)⁻¹ p)`.

use nalgebra::DVector;
use serde::Serialize;

use crate::conditions::{contraction_analysis, BallAnalysis};
use crate::model::{DerivedModel, VoltageBand};
use crate::numerics::{inf_distance, inf_norm, NormOrder};
use crate::solve::{MapError, SolveOptions, SolveResult, Status, TraceRecorder};

/// Voltages below this are treated as having hit the `diag(v)⁻¹` singularity.
pub const SINGULARITY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZbusDiagnostics {
    pub analysis: BallAnalysis,
    /// `β / (d_min − R)²` at `r_used`, when the ball exists.
    pub alpha_theoretical: Option<f64>,
    /// Largest observed ratio of successive q-norm step lengths.
    pub alpha_empirical: f64,
    pub r_used: Option<f64>,
    /// Every iterate, including the start, lay within `r_over` of the center.
    pub stayed_in_ball: bool,
    /// With all `p ≥ 0` the map is itself monotone and
    /// `i_n^o + g_n^o + p_n^o/√ū ≥ 0` suffices for convergence. `None` when
    /// some bus injects constant power. Advisory only.
    pub monotone_h_condition: Option<bool>,
}

/// `h(v) = Z [k − diag(v)⁻¹ p]`.
pub fn zbus_map(model: &DerivedModel, v: &[f64]) -> Result<Vec<f64>, MapError> {
    if v.len() != model.len() {
        return Err(MapError::DimensionMismatch {
            expected: model.len(),
            got: v.len(),
        });
    }
    if let Some(index) = v.iter().position(|x| *x == 0.0) {
        return Err(MapError::ZeroVoltageEntry { index });
    }
    Ok(apply(model, v).iter().copied().collect())
}

fn apply(model: &DerivedModel, v: &[f64]) -> DVector<f64> {
    let w = DVector::from_iterator(v.len(), model.p().iter().zip(v).map(|(p, x)| p / x));
    let mut out = model.d().clone();
    out.gemv(-1.0, model.z_matrix(), &w, 1.0);
    out
}

/// Runs the Z-bus iteration, by default from the ball center `d`.
///
/// Stops when `‖v^{t+1} − v^t‖∞ ≤ tol`. Reports [`Status::Diverged`] when any
/// iterate drops below [`SINGULARITY_THRESHOLD`] (non-positive voltages
/// included) or grows past `10 (d_max + 1)`. Ball diagnostics are computed in
/// norm `q` whether or not the contraction condition holds.
pub fn solve_zbus(
    model: &DerivedModel,
    band: &VoltageBand,
    q: NormOrder,
    opts: &SolveOptions,
    init: Option<&[f64]>,
) -> Result<(SolveResult, ZbusDiagnostics), MapError> {
    assert!(opts.is_valid(), "invalid solve options: {opts:?}");
    let analysis = contraction_analysis(model, band, q);
    let r_used = analysis.r_under;
    let alpha_theoretical = r_used.and_then(|r| analysis.alpha_at(r));

    let d: Vec<f64> = model.d().iter().copied().collect();
    let mut v = match init {
        Some(x) if x.len() != model.len() => {
            return Err(MapError::DimensionMismatch {
                expected: model.len(),
                got: x.len(),
            })
        }
        Some(x) => x.to_vec(),
        None => d.clone(),
    };

    let ceiling = 10.0 * (analysis.d_max + 1.0);
    let in_ball = |x: &[f64]| match analysis.r_over {
        Some(r) => {
            let off: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
            q.vector_norm(&off) <= r * (1.0 + 1e-12)
        }
        None => false,
    };
    let mut stayed_in_ball = in_ball(&v);
    let mut trace = TraceRecorder::new(opts.record_trace);
    let mut alpha_empirical = 0.0_f64;
    let mut last_step_q: Option<f64> = None;
    let mut iterations = 0;
    let mut status = Status::MaxIterations;

    if v.iter().any(|x| x.is_nan() || *x < SINGULARITY_THRESHOLD) {
        status = Status::Diverged;
    } else {
        while iterations < opts.max_iter {
            let next: Vec<f64> = apply(model, &v).iter().copied().collect();
            iterations += 1;
            if next.iter().any(|x| x.is_nan() || *x < SINGULARITY_THRESHOLD) || inf_norm(&next) > ceiling {
                status = Status::Diverged;
                break;
            }
            let diff = inf_distance(&next, &v);
            let step: Vec<f64> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
            let step_q = q.vector_norm(&step);
            if let Some(prev) = last_step_q.filter(|s| *s > 0.0) {
                alpha_empirical = alpha_empirical.max(step_q / prev);
            }
            last_step_q = Some(step_q);
            trace.push(iterations, None, diff);
            stayed_in_ball &= in_ball(&next);
            v = next;
            if diff <= opts.tol {
                status = Status::Converged;
                break;
            }
        }
    }

    let monotone_h_condition = model.p().iter().all(|p| *p >= 0.0).then(|| {
        (0..model.len()).all(|n| {
            model.i0()[n] + model.g0()[n] + model.p()[n] / band.v_max() >= 0.0
        })
    });
    let residual_inf = model.residual_inf(&v);
    let result = SolveResult {
        v,
        iterations,
        trace: trace.finish(),
        status,
        residual_inf,
    };
    let diagnostics = ZbusDiagnostics {
        analysis,
        alpha_theoretical,
        alpha_empirical,
        r_used,
        stayed_in_ball,
        monotone_h_condition,
    };
    Ok((result, diagnostics))
}
