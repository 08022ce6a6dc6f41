//! Dense numerical kernels shared by the condition checks and solvers.
//!
//! Problem sizes here are at most a few thousand buses, so everything is dense
//! and backed by `nalgebra`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance on `max |M - Mᵀ|` for inputs treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not symmetric: max |M - Mᵀ| = {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// The order `q` of the ℓ_q norms used throughout a contraction analysis.
///
/// Vector norms and their induced matrix norms always share the same order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormOrder {
    One,
    #[default]
    Two,
    Inf,
}

impl NormOrder {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Some(Self::One),
            "2" => Some(Self::Two),
            "inf" | "infinity" | "∞" => Some(Self::Inf),
            _ => None,
        }
    }

    /// ℓ_q norm of a vector.
    pub fn vector_norm(self, x: &[f64]) -> f64 {
        match self {
            Self::One => x.iter().map(|v| v.abs()).sum(),
            Self::Two => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Self::Inf => inf_norm(x),
        }
    }

    /// ℓ_q norm of the all-ones vector of length `n`.
    pub fn ones_norm(self, n: usize) -> f64 {
        match self {
            Self::One => n as f64,
            Self::Two => (n as f64).sqrt(),
            Self::Inf => {
                if n == 0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => f.write_str("1"),
            Self::Two => f.write_str("2"),
            Self::Inf => f.write_str("inf"),
        }
    }
}

// On the wire `q` is either the number 1 or 2, or the string "inf".
impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::One => serializer.serialize_u8(1),
            Self::Two => serializer.serialize_u8(2),
            Self::Inf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let invalid = || serde::de::Error::custom("q must be 1, 2 or \"inf\"");
        match Raw::deserialize(deserializer)? {
            Raw::Num(1.0) => Ok(Self::One),
            Raw::Num(2.0) => Ok(Self::Two),
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Self::Inf),
            Raw::Num(_) => Err(invalid()),
            Raw::Text(s) => Self::parse(&s).ok_or_else(invalid),
        }
    }
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// ∞-distance between two equal-length vectors.
pub fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Induced matrix norm `max ‖Mx‖_q / ‖x‖_q`.
///
/// For `q = 2` this is the largest singular value, obtained from a symmetric
/// eigensolve of `M` itself when `M` is symmetric and of `MᵀM` otherwise.
pub fn induced_norm(m: &DMatrix<f64>, q: NormOrder) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match q {
        NormOrder::One => m
            .column_iter()
            .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormOrder::Inf => m
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormOrder::Two => {
            if m.is_square() && asymmetry(m) <= SYMMETRY_TOL {
                let eig = SymmetricEigen::new(symmetrized(m));
                eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
            } else {
                let gram = m.transpose() * m;
                let eig = SymmetricEigen::new(symmetrized(&gram));
                eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(*v)).sqrt()
            }
        }
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn checked_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(NumericsError::NotSymmetric { asymmetry: asym });
    }
    Ok(symmetrized(m))
}

/// Smallest eigenvalue of a symmetric matrix. Empty matrices yield `+∞`.
pub fn min_eigenvalue_sym(m: &DMatrix<f64>) -> Result<f64, NumericsError> {
    let s = checked_symmetric(m)?;
    if s.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(SymmetricEigen::new(s).eigenvalues.min())
}

/// Largest eigenvalue of a symmetric matrix. Empty matrices yield `-∞`.
pub fn max_eigenvalue_sym(m: &DMatrix<f64>) -> Result<f64, NumericsError> {
    let s = checked_symmetric(m)?;
    if s.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(SymmetricEigen::new(s).eigenvalues.max())
}

/// Central-difference gradient `(f(x + h eₙ) - f(x - h eₙ)) / 2h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|n| {
            probe[n] = x[n] + h;
            let up = f(&probe);
            probe[n] = x[n] - h;
            let down = f(&probe);
            probe[n] = x[n];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector field; row `i` holds `∂fᵢ/∂x`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut jac = DMatrix::zeros(n, n);
    for col in 0..n {
        probe[col] = x[col] + h;
        let up = f(&probe);
        probe[col] = x[col] - h;
        let down = f(&probe);
        probe[col] = x[col];
        for row in 0..n {
            jac[(row, col)] = (up[row] - down[row]) / (2.0 * h);
        }
    }
    jac
}
