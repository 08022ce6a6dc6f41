//! Sufficient conditions for each solver, with per-bus margins, and the
//! method-selection flowchart built on top of them.
//!
//! Every margin is `RHS − LHS` of its inequality, so a condition holds
//! exactly when all of its margins are non-negative.

use serde::Serialize;

use crate::model::{BusId, DerivedModel, VoltageBand};
use crate::numerics::NormOrder;

/// Margins of one per-bus inequality.
///
/// A margin of `+∞` marks a bus the inequality does not constrain. In JSON
/// such margins are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub ok: bool,
    pub worst_bus: Option<BusId>,
    pub worst_margin: f64,
    pub margins: Vec<f64>,
}

impl ConditionCheck {
    fn from_margins(model: &DerivedModel, margins: Vec<f64>) -> Self {
        let worst = margins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(n, m)| (n, *m));
        let (worst_bus, worst_margin) = match worst {
            Some((n, m)) if m.is_finite() => (Some(model.zip_ids()[n]), m),
            _ => (None, f64::INFINITY),
        };
        Self {
            ok: margins.iter().all(|m| *m >= 0.0),
            worst_bus,
            worst_margin,
            margins,
        }
    }
}

/// The coefficient `u̲ / √(2ū − u̲)` bounding constant-current loads.
pub fn monotone_current_coefficient(band: &VoltageBand) -> f64 {
    band.u_lo / (2.0 * band.u_hi - band.u_lo).sqrt()
}

/// Monotonicity of the squared-voltage map.
///
/// Only buses drawing at least as much constant current as their
/// constant-voltage neighbours feed (`k_n ≤ 0`) are constrained; for them the
/// margin is `coef · g_n − i_n^o`.
pub fn check_monotone_current(model: &DerivedModel, band: &VoltageBand) -> ConditionCheck {
    let coef = monotone_current_coefficient(band);
    let margins = (0..model.len())
        .map(|n| {
            if model.k()[n] <= 0.0 {
                coef * model.gn()[n] - model.i0()[n]
            } else {
                f64::INFINITY
            }
        })
        .collect();
    ConditionCheck::from_margins(model, margins)
}

/// `f(ū·1) ≤ ū·1`: margin `ū g_n^o + √ū i_n^o + p_n^o`.
pub fn check_monotone_power(model: &DerivedModel, band: &VoltageBand) -> ConditionCheck {
    let sqrt_hi = band.v_max();
    let margins = (0..model.len())
        .map(|n| band.u_hi * model.g0()[n] + sqrt_hi * model.i0()[n] + model.p()[n])
        .collect();
    ConditionCheck::from_margins(model, margins)
}

/// Contraction ball analysis for the Z-bus map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallAnalysis {
    pub q: NormOrder,
    /// `‖Z‖_q ‖p‖_q`.
    pub beta: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// `d_min² ≥ 4β`.
    pub feasible: bool,
    /// Whether the ball center is entrywise positive; voltages near a
    /// negative center are not physical.
    pub center_positive: bool,
    pub r_under: Option<f64>,
    pub r_over: Option<f64>,
    pub ball_in_box: Option<bool>,
    pub box_in_ball: Option<bool>,
}

impl BallAnalysis {
    /// Contraction modulus `β / (d_min − R)²` valid on the ball of radius `r`.
    ///
    /// `None` when the analysis is infeasible or `r` lies outside
    /// `[r_under, r_over]`.
    pub fn alpha_at(&self, r: f64) -> Option<f64> {
        let (lo, hi) = (self.r_under?, self.r_over?);
        if !(lo..=hi).contains(&r) {
            return None;
        }
        Some(self.beta / (self.d_min - r).powi(2))
    }

    /// Whether the analysis certifies a solution the Z-bus iterations reach
    /// with positive voltages.
    pub fn guarantees_zbus(&self) -> bool {
        self.feasible && self.center_positive
    }
}

pub fn contraction_analysis(model: &DerivedModel, band: &VoltageBand, q: NormOrder) -> BallAnalysis {
    let p: Vec<f64> = model.p().iter().copied().collect();
    let d: Vec<f64> = model.d().iter().copied().collect();
    let beta = model.z_norm(q) * q.vector_norm(&p);
    let d_min = d.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let d_max = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let feasible = d_min * d_min >= 4.0 * beta;
    let center_positive = d.iter().all(|x| *x > 0.0);

    let (mut r_under, mut r_over, mut ball_in_box, mut box_in_ball) = (None, None, None, None);
    if feasible {
        let disc = (d_min * d_min - 4.0 * beta).max(0.0).sqrt();
        // 2β / (d + √disc) is the cancellation-free form of (d − √disc) / 2.
        let lo = if beta == 0.0 { 0.0 } else { 2.0 * beta / (d_min + disc) };
        let hi = d_min - beta.sqrt();
        let (v_lo, v_hi) = (band.v_min(), band.v_max());
        ball_in_box = Some(lo <= (d_min - v_lo).min(v_hi - d_max));
        let offset: Vec<f64> = d.iter().map(|dn| v_lo + v_hi - 2.0 * dn).collect();
        box_in_ball =
            Some(q.vector_norm(&offset) + (v_hi - v_lo) * q.ones_norm(d.len()) <= 2.0 * hi);
        r_under = Some(lo);
        r_over = Some(hi);
    }
    BallAnalysis {
        q,
        beta,
        d_min,
        d_max,
        feasible,
        center_positive,
        r_under,
        r_over,
        ball_in_box,
        box_in_ball,
    }
}

/// Convexity of the energy function over the whole band:
/// margin `√u̲ (λ̲(G) + c_n − √(ū/u̲) Σ_{m∈𝒫} g_nm) − [k_n]₊`.
pub fn check_global_convexity(model: &DerivedModel, band: &VoltageBand) -> ConditionCheck {
    let lam = model.lambda_min_g();
    let ratio = (band.u_hi / band.u_lo).sqrt();
    let margins = (0..model.len())
        .map(|n| {
            band.v_min() * (lam + model.c()[n] - ratio * model.zip_coupling_sum(n))
                - model.k()[n].max(0.0)
        })
        .collect();
    ConditionCheck::from_margins(model, margins)
}

/// Convexity of the energy function at any solution in the band:
/// margin `λ̲(G) u̲ − [p_n^o]₊`. Independent of the operating point.
pub fn check_local_convexity(model: &DerivedModel, band: &VoltageBand) -> ConditionCheck {
    let rhs = model.lambda_min_g() * band.u_lo;
    let margins = model.p().iter().map(|p| rhs - p.max(0.0)).collect();
    ConditionCheck::from_margins(model, margins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "zbus")]
    ZBus,
    Monotone,
    Energy,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZBus => "zbus",
            Self::Monotone => "monotone",
            Self::Energy => "energy",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MethodChoice {
    pub method: Method,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub monotone_current: ConditionCheck,
    pub monotone_power: ConditionCheck,
    pub contraction: BallAnalysis,
    pub global_convexity: ConditionCheck,
    pub local_convexity: ConditionCheck,
    pub lambda_min_g: f64,
    pub recommended: MethodChoice,
}

impl ConditionReport {
    pub fn monotone_ok(&self) -> bool {
        self.monotone_current.ok && self.monotone_power.ok
    }
}

/// Evaluates every condition and picks a method.
pub fn evaluate(model: &DerivedModel, band: &VoltageBand, q: NormOrder) -> ConditionReport {
    let monotone_current = check_monotone_current(model, band);
    let monotone_power = check_monotone_power(model, band);
    let contraction = contraction_analysis(model, band, q);
    let global_convexity = check_global_convexity(model, band);
    let local_convexity = check_local_convexity(model, band);
    let recommended = select_method(&contraction, monotone_current.ok, monotone_power.ok);
    ConditionReport {
        monotone_current,
        monotone_power,
        contraction,
        global_convexity,
        local_convexity,
        lambda_min_g: model.lambda_min_g(),
        recommended,
    }
}

/// Flowchart: Z-bus when the contraction ball exists, otherwise the
/// monotone map when both of its conditions hold, otherwise the energy
/// function.
pub fn select_method(ball: &BallAnalysis, current_ok: bool, power_ok: bool) -> MethodChoice {
    if ball.guarantees_zbus() {
        MethodChoice {
            method: Method::ZBus,
            rationale: format!(
                "d_min^2 = {:.6} >= 4*beta = {:.6}: a unique solution exists in the contraction ball",
                ball.d_min * ball.d_min,
                4.0 * ball.beta
            ),
        }
    } else if current_ok && power_ok {
        let why = if ball.feasible {
            "ball center has non-positive entries"
        } else {
            "d_min^2 < 4*beta"
        };
        MethodChoice {
            method: Method::Monotone,
            rationale: format!(
                "{why}; monotone current and power conditions hold, so iterates from the band top reach the high-voltage solution if one exists"
            ),
        }
    } else {
        let failed = match (current_ok, power_ok) {
            (false, false) => "current and power conditions",
            (false, true) => "current condition",
            _ => "power condition",
        };
        MethodChoice {
            method: Method::Energy,
            rationale: format!(
                "no contraction ball and the monotone {failed} failed; minimize the energy function"
            ),
        }
    }
}

pub fn select_method_for(report: &ConditionReport) -> MethodChoice {
    select_method(
        &report.contraction,
        report.monotone_current.ok,
        report.monotone_power.ok,
    )
}
