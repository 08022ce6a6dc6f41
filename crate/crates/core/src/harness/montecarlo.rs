use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{evaluate, ConditionReport};
use crate::model::{BusKind, DerivedModel, ModelError, Network, VoltageBand};
use crate::numerics::{inf_distance, NormOrder};
use crate::solve::{solve_energy, solve_monotone, solve_zbus, SolveOptions, SolveResult, Status};

/// Converged results closer than this in ∞-distance count as the same
/// solution.
pub const AGREEMENT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub p_scale_range: (f64, f64),
    pub iz_scale_range: (f64, f64),
    /// Stopping tolerance for the Z-bus and monotone solvers. Tighter than
    /// their standalone default: the monotone map contracts slowly on
    /// feeders, so a successive difference of 1e-6 can leave an error far
    /// above [`AGREEMENT_TOL`] and register as a false disagreement.
    pub solver_tol: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            p_scale_range: (-10.0, 10.0),
            iz_scale_range: (0.0, 10.0),
            solver_tol: 1e-9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("invalid scale range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("solver tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("invalid base network: {0}")]
    Model(#[from] ModelError),
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.trials == 0 {
            return Err(McError::NoTrials);
        }
        for (lo, hi) in [self.p_scale_range, self.iz_scale_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(McError::BadRange(lo, hi));
            }
        }
        if !(self.solver_tol > 0.0 && self.solver_tol.is_finite()) {
            return Err(McError::BadTolerance(self.solver_tol));
        }
        Ok(())
    }
}

/// 2×2 counts of a sufficient condition against the success of the solver
/// it certifies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Contingency {
    pub holds_success: usize,
    pub holds_failure: usize,
    pub fails_success: usize,
    pub fails_failure: usize,
}

impl Contingency {
    fn add(&mut self, holds: bool, success: bool) {
        match (holds, success) {
            (true, true) => self.holds_success += 1,
            (true, false) => self.holds_failure += 1,
            (false, true) => self.fails_success += 1,
            (false, false) => self.fails_failure += 1,
        }
    }
}

/// Outcome of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub zbus: Status,
    pub monotone: Status,
    pub energy: Status,
    pub contraction_ok: bool,
    pub monotone_ok: bool,
    pub global_convexity_ok: bool,
    pub local_convexity_ok: bool,
    /// Largest pairwise ∞-distance among the converged results.
    pub disagreement: f64,
    /// A guarantee was violated: the contraction ball held but the Z-bus
    /// result failed or left the inner ball, or the monotone conditions held
    /// but the monotone result failed or was dominated by another in-band
    /// solution.
    pub soundness_violation: bool,
}

impl TrialRecord {
    fn converged_count(&self) -> usize {
        [self.zbus, self.monotone, self.energy]
            .iter()
            .filter(|s| **s == Status::Converged)
            .count()
    }

    pub fn agrees(&self) -> bool {
        self.converged_count() == 3 && self.disagreement < AGREEMENT_TOL
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct McSummary {
    pub trials: usize,
    /// All three solvers converged to the same solution.
    pub agree_count: usize,
    /// Every other trial: `all_failed + partial + disagree`.
    pub fail_count: usize,
    pub all_failed: usize,
    /// Some but not all solvers converged, and those agree.
    pub partial: usize,
    /// Converged results differ by at least the agreement tolerance.
    pub disagree: usize,
    pub worst_disagreement: f64,
    pub zbus_converged: usize,
    pub monotone_converged: usize,
    pub energy_converged: usize,
    /// Contraction ball vs. Z-bus success.
    pub contraction: Contingency,
    /// Monotone current and power conditions vs. monotone success.
    pub monotone: Contingency,
    /// Global convexity vs. energy success.
    pub global_convexity: Contingency,
    /// Convexity at solutions vs. energy success.
    pub local_convexity: Contingency,
    pub soundness_violations: usize,
}

/// Scales the ZIP components of `base`: each bus draws its own `p0` factor
/// and independent `i0` and `g0` factors.
fn scaled(base: &Network, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Network {
    let mut net = base.clone();
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
    for bus in &mut net.buses {
        if let BusKind::Zip(z) = &mut bus.kind {
            z.p0 *= draw(rng, cfg.p_scale_range);
            z.i0 *= draw(rng, cfg.iz_scale_range);
            z.g0 *= draw(rng, cfg.iz_scale_range);
        }
    }
    net
}

fn in_band(band: &VoltageBand, v: &[f64]) -> bool {
    band.contains_voltages(v)
}

fn soundness_violation(
    model: &DerivedModel,
    band: &VoltageBand,
    q: NormOrder,
    report: &ConditionReport,
    results: [&SolveResult; 3],
) -> bool {
    let [zbus, monotone, _] = results;
    let ball = &report.contraction;
    if ball.guarantees_zbus() {
        let r = ball.r_under.unwrap_or(0.0);
        let off: Vec<f64> = zbus.v.iter().zip(model.d().iter()).map(|(v, d)| v - d).collect();
        if !zbus.converged() || q.vector_norm(&off) > r + 1e-9 {
            return true;
        }
    }
    if report.monotone_ok() {
        let others: Vec<&SolveResult> = results
            .iter()
            .copied()
            .filter(|r| r.converged() && in_band(band, &r.v))
            .collect();
        if !others.is_empty() {
            if !monotone.converged() {
                return true;
            }
            let dominated = others
                .iter()
                .any(|o| o.v.iter().zip(&monotone.v).any(|(x, hv)| *x > hv + AGREEMENT_TOL));
            if dominated {
                return true;
            }
        }
    }
    false
}

fn run_trial(base: &Network, cfg: &McConfig, trial: usize) -> Result<TrialRecord, McError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let net = scaled(base, cfg, &mut rng);
    let model = net.derive()?;
    let (band, q) = (net.band, net.norm_q);
    let report = evaluate(&model, &band, q);

    let defaults = SolveOptions::default().with_tol(cfg.solver_tol);
    let (zbus, _) = solve_zbus(&model, &band, q, &defaults, None).expect("default start");
    let monotone = solve_monotone(&model, &band, &defaults);
    let energy = solve_energy(&model, &SolveOptions::energy(), None).expect("flat start");

    let converged: Vec<&SolveResult> = [&zbus, &monotone, &energy]
        .into_iter()
        .filter(|r| r.converged())
        .collect();
    let mut disagreement = 0.0_f64;
    for (i, a) in converged.iter().enumerate() {
        for b in &converged[i + 1..] {
            disagreement = disagreement.max(inf_distance(&a.v, &b.v));
        }
    }

    Ok(TrialRecord {
        trial,
        zbus: zbus.status,
        monotone: monotone.status,
        energy: energy.status,
        contraction_ok: report.contraction.guarantees_zbus(),
        monotone_ok: report.monotone_ok(),
        global_convexity_ok: report.global_convexity.ok,
        local_convexity_ok: report.local_convexity.ok,
        disagreement,
        soundness_violation: soundness_violation(&model, &band, q, &report, [&zbus, &monotone, &energy]),
    })
}

/// Runs every trial (in parallel) and returns the records in trial order.
///
/// Trial `t` draws from its own ChaCha stream `t` of `seed`, so results do
/// not depend on scheduling.
pub fn run_trials(base: &Network, cfg: &McConfig) -> Result<Vec<TrialRecord>, McError> {
    cfg.validate()?;
    base.derive()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(base, cfg, t))
        .collect()
}

pub fn summarize(records: &[TrialRecord]) -> McSummary {
    let mut s = McSummary {
        trials: records.len(),
        ..McSummary::default()
    };
    for r in records {
        let n = r.converged_count();
        if r.agrees() {
            s.agree_count += 1;
        } else {
            s.fail_count += 1;
            if n == 0 {
                s.all_failed += 1;
            } else if r.disagreement >= AGREEMENT_TOL {
                s.disagree += 1;
            } else {
                s.partial += 1;
            }
        }
        s.worst_disagreement = s.worst_disagreement.max(r.disagreement);
        let ok = |st: Status| st == Status::Converged;
        s.zbus_converged += usize::from(ok(r.zbus));
        s.monotone_converged += usize::from(ok(r.monotone));
        s.energy_converged += usize::from(ok(r.energy));
        s.contraction.add(r.contraction_ok, ok(r.zbus));
        s.monotone.add(r.monotone_ok, ok(r.monotone));
        s.global_convexity.add(r.global_convexity_ok, ok(r.energy));
        s.local_convexity.add(r.local_convexity_ok, ok(r.energy));
        s.soundness_violations += usize::from(r.soundness_violation);
    }
    s
}

/// Monte-Carlo loading study over random rescalings of the ZIP components
/// of `base`. Deterministic given `cfg.seed`.
pub fn run_monte_carlo(base: &Network, cfg: &McConfig) -> Result<McSummary, McError> {
    Ok(summarize(&run_trials(base, cfg)?))
}

pub fn write_trials_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> io::Result<()> {
    writeln!(
        out,
        "trial,zbus,monotone,energy,contraction_ok,monotone_ok,global_convexity_ok,local_convexity_ok,disagreement,soundness_violation"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:e},{}",
            r.trial,
            r.zbus.as_str(),
            r.monotone.as_str(),
            r.energy.as_str(),
            r.contraction_ok,
            r.monotone_ok,
            r.global_convexity_ok,
            r.local_convexity_ok,
            r.disagreement,
            r.soundness_violation
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::TwoBusCase;

    #[test]
    fn rejects_bad_configs() {
        let base = TwoBusCase::A.network();
        let cfg = McConfig {
            trials: 0,
            ..McConfig::default()
        };
        assert_eq!(run_monte_carlo(&base, &cfg), Err(McError::NoTrials));
        let cfg = McConfig {
            trials: 3,
            p_scale_range: (1.0, f64::NAN),
            ..McConfig::default()
        };
        assert!(matches!(run_monte_carlo(&base, &cfg), Err(McError::BadRange(..))));
    }

    #[test]
    fn unit_scales_reproduce_case_a() {
        let cfg = McConfig {
            trials: 1,
            seed: 9,
            p_scale_range: (1.0, 1.0),
            iz_scale_range: (1.0, 1.0),
            ..McConfig::default()
        };
        let records = run_trials(&TwoBusCase::A.network(), &cfg).unwrap();
        let r = &records[0];
        assert!(r.agrees());
        assert!(r.contraction_ok && r.monotone_ok);
        assert!(!r.soundness_violation);
        let s = summarize(&records);
        assert_eq!(s.agree_count, 1);
        assert_eq!(s.fail_count, 0);
    }

    #[test]
    fn counts_partition_trials() {
        let cfg = McConfig {
            trials: 40,
            seed: 2,
            ..McConfig::default()
        };
        let s = run_monte_carlo(&TwoBusCase::B.network(), &cfg).unwrap();
        assert_eq!(s.agree_count + s.fail_count, 40);
        assert_eq!(s.fail_count, s.all_failed + s.partial + s.disagree);
        for c in [s.contraction, s.monotone, s.global_convexity, s.local_convexity] {
            assert_eq!(c.holds_success + c.holds_failure + c.fails_success + c.fails_failure, 40);
        }
    }
}
