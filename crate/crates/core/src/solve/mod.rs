//! The three power-flow solvers and their shared result types.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod energy;
pub mod monotone;
pub mod zbus;

pub use energy::{energy_gradient, energy_value, hessian, solve_energy, EnergyState, HessianBundle};
pub use monotone::{monotone_map, solve_monotone, solve_monotone_from};
pub use zbus::{solve_zbus, zbus_map, ZbusDiagnostics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("squared voltage at position {index} is not positive: {value}")]
    NonPositiveInput { index: usize, value: f64 },
    #[error("voltage at position {index} is zero")]
    ZeroVoltageEntry { index: usize },
    #[error("exponential overflow at position {index} (rho = {rho})")]
    Overflow { index: usize, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stopping threshold; its meaning depends on the solver.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    /// `tol = 1e-6` on the ∞-norm successive difference, 10 000 iterations.
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    /// Defaults for the energy solver, which stops on `‖∇E‖∞ ≤ 1e-8`.
    pub fn energy() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            record_trace: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub(crate) fn is_valid(&self) -> bool {
        self.tol > 0.0 && self.max_iter >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
    DomainError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iterations",
            Self::Diverged => "diverged",
            Self::DomainError => "domain_error",
        }
    }
}

/// One row of an iteration trace. `metric` is the ∞-norm successive
/// difference for the fixed-point solvers and `‖∇E‖∞` for the energy solver,
/// which also records `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Voltages at the ZIP buses, in model order.
    pub v: Vec<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
    pub status: Status,
    /// `‖residual(v)‖∞`; `+∞` (written as `null`) when it cannot be evaluated.
    #[serde(deserialize_with = "de_nullable_f64")]
    pub residual_inf: f64,
}

fn de_nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Writes a trace as CSV: `iter,metric`, or `iter,energy,metric` when the
/// rows carry energy values.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceEntry]) -> io::Result<()> {
    let with_energy = trace.iter().any(|t| t.energy.is_some());
    if with_energy {
        writeln!(out, "iter,energy,metric")?;
    } else {
        writeln!(out, "iter,metric")?;
    }
    for t in trace {
        match (with_energy, t.energy) {
            (true, Some(e)) => writeln!(out, "{},{:e},{:e}", t.iter, e, t.metric)?,
            (true, None) => writeln!(out, "{},,{:e}", t.iter, t.metric)?,
            (false, _) => writeln!(out, "{},{:e}", t.iter, t.metric)?,
        }
    }
    Ok(())
}

pub(crate) struct TraceRecorder(Option<Vec<TraceEntry>>);

impl TraceRecorder {
    pub(crate) fn new(enabled: bool) -> Self {
        Self(enabled.then(Vec::new))
    }

    pub(crate) fn push(&mut self, iter: usize, energy: Option<f64>, metric: f64) {
        if let Some(rows) = &mut self.0 {
            rows.push(TraceEntry { iter, energy, metric });
        }
    }

    pub(crate) fn finish(self) -> Option<Vec<TraceEntry>> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layouts() {
        let plain = [
            TraceEntry { iter: 1, energy: None, metric: 0.5 },
            TraceEntry { iter: 2, energy: None, metric: 0.25 },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &plain).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,metric\n1,5e-1\n2,2.5e-1\n");

        let energy = [TraceEntry { iter: 1, energy: Some(-7.0), metric: 1.0 }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &energy).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,energy,metric\n1,-7e0,1e0\n");
    }

    #[test]
    fn result_json_accepts_null_residual() {
        let r: SolveResult = serde_json::from_str(
            r#"{"v":[0.5],"iterations":3,"status":"diverged","residual_inf":null}"#,
        )
        .unwrap();
        assert_eq!(r.status, Status::Diverged);
        assert!(r.residual_inf.is_infinite());
    }
}
