//! Power-flow solvers for DC networks with ZIP loads.
//!
//! Three solvers with complementary convergence guarantees:
//!
//! - [`solve_monotone`]: fixed-point iteration on squared voltages, reaching
//!   the high-voltage solution when constant-power generation is light;
//! - [`solve_zbus`]: the Z-bus contraction on voltages, with existence and
//!   uniqueness inside a computable ball;
//! - [`solve_energy`]: gradient descent on an energy function over
//!   log-squared voltages, convex at every solution under limited
//!   constant-power demand.
//!
//! [`conditions`] evaluates every sufficient condition with per-bus margins
//! and recommends a solver. [`harness`] holds the synthetic network generator,
//! the root-finding oracles and the Monte-Carlo study.
//!
//! ```
//! use dcpf::harness::TwoBusCase;
//! use dcpf::{evaluate, solve_zbus, Method, NormOrder, SolveOptions};
//!
//! let net = TwoBusCase::A.network();
//! let model = net.derive().unwrap();
//! let report = evaluate(&model, &net.band, NormOrder::Two);
//! assert_eq!(report.recommended.method, Method::ZBus);
//!
//! let (result, _) = solve_zbus(&model, &net.band, NormOrder::Two, &SolveOptions::default(), None).unwrap();
//! assert!((result.v[0] - 0.917288).abs() < 1e-6);
//! ```

pub mod case;
pub mod conditions;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod solve;

pub use case::{load_case, parse_case, CaseError, CaseFile};
pub use conditions::{
    check_global_convexity, check_local_convexity, check_monotone_current, check_monotone_power,
    contraction_analysis, evaluate, select_method, select_method_for, BallAnalysis, ConditionCheck,
    ConditionReport, Method, MethodChoice,
};
pub use model::{
    Bus, BusId, BusKind, DerivedModel, Line, ModelError, Network, ValidationError, VoltageBand,
    ZipAggregate,
};
pub use numerics::NormOrder;
pub use solve::{
    solve_energy, solve_monotone, solve_zbus, MapError, SolveOptions, SolveResult, Status,
    TraceEntry, ZbusDiagnostics,
};

/// Runs one solver by name with its default start.
///
/// The energy solver receives `opts` unchanged; pass
/// [`SolveOptions::energy`] for its defaults.
pub fn solve_with(
    method: Method,
    model: &DerivedModel,
    band: &VoltageBand,
    q: NormOrder,
    opts: &SolveOptions,
) -> SolveResult {
    match method {
        Method::ZBus => solve_zbus(model, band, q, opts, None).expect("default start").0,
        Method::Monotone => solve_monotone(model, band, opts),
        Method::Energy => solve_energy(model, opts, None).expect("flat start"),
    }
}
