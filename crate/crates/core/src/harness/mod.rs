//! Experiment support: reference networks, synthetic network generation,
//! independent root-finding oracles and the Monte-Carlo loading study.

mod generate;
mod montecarlo;
mod oracle;

pub use generate::{generate_network, generate_network_with, GeneratorSpec, Topology};
pub use montecarlo::{
    run_monte_carlo, run_trials, summarize, write_trials_csv, Contingency, McConfig, McError,
    McSummary, TrialRecord, AGREEMENT_TOL,
};
pub use oracle::{newton_polish, oracle_multistart, oracle_single_pbus, OracleError};

use crate::model::{Bus, DerivedModel, Line, Network, VoltageBand, ZipAggregate};

/// Two-bus system: slack at 1 pu feeding one ZIP bus through `g = 10`, with a
/// shunt load of 1 at the ZIP bus and the band `[0.9, 1.1]`.
pub fn two_bus(i0: f64, p0: f64) -> Network {
    Network::new(
        vec![Bus::voltage(0, 1.0), Bus::zip(1, ZipAggregate::new(i0, p0, 1.0))],
        vec![Line::new(0, 1, 10.0)],
    )
    .with_band(VoltageBand::from_voltages(0.9, 1.1))
}

/// The four loading cases of the two-bus comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwoBusCase {
    A,
    B,
    C,
    D,
}

impl TwoBusCase {
    pub const ALL: [Self; 4] = [Self::A, Self::B, Self::C, Self::D];

    /// `(p0, i0)` for the case.
    pub fn params(self) -> (f64, f64) {
        match self {
            Self::A => (-1.0, 1.0),
            Self::B => (-2.0, 1.0),
            Self::C => (-2.0, 10.0),
            Self::D => (-5.0, 20.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
            Self::D => "d",
        }
    }

    pub fn network(self) -> Network {
        let (p0, i0) = self.params();
        two_bus(i0, p0)
    }

    pub fn model(self) -> DerivedModel {
        self.network().derive().expect("two-bus case is valid")
    }
}
