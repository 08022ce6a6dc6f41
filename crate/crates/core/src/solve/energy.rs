//! Energy-function formulation over log-squared voltages `ρ_n = log u_n`.
//!
//! The stationary points of
//!
//! ```text
//! E(ρ) = Σ_n [c_n e^{ρ_n} − 2 k_n e^{ρ_n/2} + p_n ρ_n] − 2 Σ_{n<m} g_nm e^{(ρ_n+ρ_m)/2}
//! ```
//!
//! are exactly the power-flow solutions. The coupling sum runs over unordered
//! ZIP-bus pairs, which makes `∂E/∂ρ_n` equal the per-bus mismatch
//! `c_n e^{ρ_n} − Σ_m g_nm e^{(ρ_n+ρ_m)/2} − k_n e^{ρ_n/2} + p_n`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::model::DerivedModel;
use crate::numerics::{inf_norm, max_eigenvalue_sym, min_eigenvalue_sym};
use crate::solve::{MapError, SolveOptions, SolveResult, Status, TraceRecorder};

/// Iterates with `‖ρ‖∞` above this are reported as diverged.
pub const RHO_LIMIT: f64 = 50.0;
/// Energies below this are reported as diverged.
pub const ENERGY_FLOOR: f64 = -1e12;

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyState {
    pub rho: Vec<f64>,
    pub value: f64,
    pub grad_norm_inf: f64,
}

impl EnergyState {
    pub fn at(model: &DerivedModel, rho: &[f64]) -> Result<Self, MapError> {
        Ok(Self {
            rho: rho.to_vec(),
            value: energy_value(model, rho)?,
            grad_norm_inf: inf_norm(&energy_gradient(model, rho)?),
        })
    }

    pub fn voltages(&self) -> Vec<f64> {
        self.rho.iter().map(|r| (0.5 * r).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianBundle {
    pub h: DMatrix<f64>,
    /// `2 diag(e^{−ρ/2}) H diag(e^{−ρ/2})`.
    pub h_tilde: DMatrix<f64>,
    /// Diagonal of `K(ρ)` with `H̃ = G + diag(K)`.
    pub k_diag: DVector<f64>,
    pub lambda_min_tilde: f64,
}

/// `e^{ρ/2}` per entry, rejecting inputs whose `e^{ρ}` is not finite.
fn half_exp(model: &DerivedModel, rho: &[f64]) -> Result<Vec<f64>, MapError> {
    if rho.len() != model.len() {
        return Err(MapError::DimensionMismatch {
            expected: model.len(),
            got: rho.len(),
        });
    }
    rho.iter()
        .enumerate()
        .map(|(index, &r)| {
            let s = (0.5 * r).exp();
            if r.is_finite() && (s * s).is_finite() {
                Ok(s)
            } else {
                Err(MapError::Overflow { index, rho: r })
            }
        })
        .collect()
}

/// Returns `E(ρ)` and the sum of the absolute values of its terms, which
/// bounds the rounding error of the evaluation.
fn value_and_scale(model: &DerivedModel, rho: &[f64], s: &[f64]) -> (f64, f64) {
    let (c, k, p) = (model.c(), model.k(), model.p());
    let mut value = 0.0;
    let mut scale = 0.0;
    for (n, row) in model.coupling().iter().enumerate() {
        let terms = [c[n] * s[n] * s[n], -2.0 * k[n] * s[n], p[n] * rho[n]];
        for t in terms {
            value += t;
            scale += t.abs();
        }
        for &(m, g) in row.iter().filter(|(m, _)| *m > n) {
            let t = 2.0 * g * s[n] * s[m];
            value -= t;
            scale += t;
        }
    }
    (value, scale)
}

fn gradient_from(model: &DerivedModel, s: &[f64]) -> Vec<f64> {
    let (c, k, p) = (model.c(), model.k(), model.p());
    model
        .coupling()
        .iter()
        .enumerate()
        .map(|(n, row)| {
            let coupled: f64 = row.iter().map(|&(m, g)| g * s[m]).sum();
            s[n] * (c[n] * s[n] - coupled - k[n]) + p[n]
        })
        .collect()
}

pub fn energy_value(model: &DerivedModel, rho: &[f64]) -> Result<f64, MapError> {
    let s = half_exp(model, rho)?;
    Ok(value_and_scale(model, rho, &s).0)
}

pub fn energy_gradient(model: &DerivedModel, rho: &[f64]) -> Result<Vec<f64>, MapError> {
    let s = half_exp(model, rho)?;
    Ok(gradient_from(model, &s))
}

pub fn hessian(model: &DerivedModel, rho: &[f64]) -> Result<HessianBundle, MapError> {
    let s = half_exp(model, rho)?;
    let size = model.len();
    let (c, k) = (model.c(), model.k());
    let mut h = DMatrix::zeros(size, size);
    let mut k_diag = DVector::zeros(size);
    for (n, row) in model.coupling().iter().enumerate() {
        let coupled: f64 = row.iter().map(|&(m, g)| g * s[m]).sum();
        h[(n, n)] = s[n] * (c[n] * s[n] - 0.5 * k[n] - 0.5 * coupled);
        for &(m, g) in row {
            h[(n, m)] = -0.5 * g * s[n] * s[m];
        }
        k_diag[n] = c[n] - k[n] / s[n] - coupled / s[n];
    }
    let mut h_tilde = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            h_tilde[(i, j)] = 2.0 * h[(i, j)] / (s[i] * s[j]);
        }
    }
    let lambda_min_tilde = min_eigenvalue_sym(&h_tilde).unwrap_or(f64::NAN);
    Ok(HessianBundle {
        h,
        h_tilde,
        k_diag,
        lambda_min_tilde,
    })
}

/// Gradient descent `ρ ← ρ − γ ∇E(ρ)` from `init` (default: flat profile
/// `ρ = 0`).
///
/// Each step starts from `γ₀ = 0.9 / λ_max(H(ρ⁰))` and halves until the
/// Armijo condition holds. Stops when `‖∇E‖∞ ≤ tol`. Reports
/// [`Status::Diverged`] once `E < -1e12` or `‖ρ‖∞ > 50`, which happens when
/// the energy is unbounded below and no solution exists.
pub fn solve_energy(
    model: &DerivedModel,
    opts: &SolveOptions,
    init: Option<&[f64]>,
) -> Result<SolveResult, MapError> {
    assert!(opts.is_valid(), "invalid solve options: {opts:?}");
    let mut rho = match init {
        Some(r) => r.to_vec(),
        None => vec![0.0; model.len()],
    };
    let mut s = half_exp(model, &rho)?;
    let (mut value, mut scale) = value_and_scale(model, &rho, &s);
    let mut grad = gradient_from(model, &s);

    let lam_max = max_eigenvalue_sym(&hessian(model, &rho)?.h).unwrap_or(f64::NAN);
    let gamma0 = if lam_max.is_finite() && lam_max > 0.0 {
        0.9 / lam_max
    } else {
        1.0
    };

    let mut trace = TraceRecorder::new(opts.record_trace);
    let mut iterations = 0;
    let status = loop {
        if inf_norm(&grad) <= opts.tol {
            break Status::Converged;
        }
        if iterations >= opts.max_iter {
            break Status::MaxIterations;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        let slack = 16.0 * f64::EPSILON * scale.max(1.0);
        let mut gamma = gamma0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = rho.iter().zip(&grad).map(|(r, g)| r - gamma * g).collect();
            if let Ok(ts) = half_exp(model, &trial) {
                let (tv, tscale) = value_and_scale(model, &trial, &ts);
                if tv <= value - ARMIJO_C1 * gamma * grad_sq + slack {
                    accepted = Some((trial, ts, tv, tscale));
                    break;
                }
            }
            gamma *= 0.5;
        }
        // No representable step lowers E any further.
        let Some((trial, ts, tv, tscale)) = accepted else {
            break Status::MaxIterations;
        };
        rho = trial;
        s = ts;
        value = tv;
        scale = tscale;
        grad = gradient_from(model, &s);
        iterations += 1;
        trace.push(iterations, Some(value), inf_norm(&grad));
        if value < ENERGY_FLOOR || inf_norm(&rho) > RHO_LIMIT {
            break Status::Diverged;
        }
    };

    let v: Vec<f64> = s.clone();
    let residual_inf = model.residual_inf(&v);
    Ok(SolveResult {
        v,
        iterations,
        trace: trace.finish(),
        status,
        residual_inf,
    })
}
