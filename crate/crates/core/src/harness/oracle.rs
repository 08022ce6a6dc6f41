use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::DerivedModel;
use crate::numerics::{inf_distance, inf_norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("closed-form oracle needs exactly one ZIP bus, model has {0}")]
    NotSingleBus(usize),
    #[error("c v² − k v + p = 0 has no positive root")]
    NoPositiveRoot,
}

/// Positive roots of `c v² − k v + p = 0` for a model with one ZIP bus,
/// sorted in descending order.
pub fn oracle_single_pbus(model: &DerivedModel) -> Result<Vec<f64>, OracleError> {
    if model.len() != 1 {
        return Err(OracleError::NotSingleBus(model.len()));
    }
    let (c, k, p) = (model.c()[0], model.k()[0], model.p()[0]);
    let disc = k * k - 4.0 * c * p;
    if disc < 0.0 {
        return Err(OracleError::NoPositiveRoot);
    }
    let sq = disc.sqrt();
    let mut roots: Vec<f64> = [(k + sq) / (2.0 * c), (k - sq) / (2.0 * c)]
        .into_iter()
        .filter(|r| *r > 0.0)
        .collect();
    roots.dedup();
    if roots.is_empty() {
        Err(OracleError::NoPositiveRoot)
    } else {
        Ok(roots)
    }
}

const NEWTON_MAX_ITER: usize = 100;
const DEDUP_TOL: f64 = 1e-5;

/// Damped Newton on the power-flow mismatch from `starts` random points in
/// `[0.1, 2.0]^P`. Returns the distinct strictly positive roots found,
/// sorted by descending first entry.
pub fn oracle_multistart(model: &DerivedModel, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for _ in 0..starts {
        let v0: Vec<f64> = (0..model.len()).map(|_| rng.gen_range(0.1..2.0)).collect();
        if let Some(root) = newton_polish(model, &v0) {
            if !roots.iter().any(|r| inf_distance(r, &root) < DEDUP_TOL) {
                roots.push(root);
            }
        }
    }
    roots.sort_by(|a, b| b[0].total_cmp(&a[0]));
    roots
}

fn jacobian(model: &DerivedModel, v: &[f64]) -> DMatrix<f64> {
    let size = model.len();
    let mut jac = DMatrix::zeros(size, size);
    for (n, row) in model.coupling().iter().enumerate() {
        let coupled: f64 = row.iter().map(|&(m, g)| g * v[m]).sum();
        jac[(n, n)] = 2.0 * model.c()[n] * v[n] - coupled - model.k()[n];
        for &(m, g) in row {
            jac[(n, m)] = -g * v[n];
        }
    }
    jac
}

/// Damped Newton from `v0`; `Some(root)` if it reaches a strictly positive
/// root with a mismatch at rounding level.
pub fn newton_polish(model: &DerivedModel, v0: &[f64]) -> Option<Vec<f64>> {
    let scale = model.c().iter().fold(1.0_f64, |a, c| a.max(*c))
        * v0.iter().fold(1.0_f64, |a, v| a.max(v.abs())).powi(2);
    let target = 1e-12 * scale;
    let mut v = v0.to_vec();
    let mut r = model.residual_unchecked(&v);
    let mut r_norm = inf_norm(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if r_norm <= target {
            break;
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = jacobian(model, &v).lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-10 {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(x, s)| x + lambda * s).collect();
            if trial.iter().all(|x| *x > 0.0) {
                let tr = model.residual_unchecked(&trial);
                let tn = inf_norm(&tr);
                if tn < (1.0 - 1e-4 * lambda) * r_norm {
                    v = trial;
                    r = tr;
                    r_norm = tn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (r_norm <= target && v.iter().all(|x| *x > 1e-6)).then_some(v)
}
