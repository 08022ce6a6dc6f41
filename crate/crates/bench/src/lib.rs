//! Fixtures shared by the solver benchmarks.

use dcpf::harness::{generate_network, Topology};
use dcpf::{DerivedModel, Network};

/// A seeded synthetic network together with its derived model.
pub struct Fixture {
    pub label: String,
    pub net: Network,
    pub model: DerivedModel,
}

pub fn fixture(topology: Topology, n_buses: usize, seed: u64) -> Fixture {
    let net = generate_network(topology, n_buses, seed);
    let model = net.derive().expect("generated networks are valid");
    let kind = match topology {
        Topology::Radial => "radial",
        Topology::Meshed => "meshed",
    };
    Fixture {
        label: format!("{kind}-{n_buses}"),
        net,
        model,
    }
}

/// Meshed networks on which every solver converges at default settings.
pub fn meshed_suite() -> Vec<Fixture> {
    [20, 50, 100, 200].into_iter().map(|n| fixture(Topology::Meshed, n, 3)).collect()
}
