use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Bus, Line, Network, ZipAggregate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Radial,
    Meshed,
}

/// Parameters of a synthetic network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub topology: Topology,
    pub n_buses: usize,
    pub seed: u64,
    /// Line conductances are drawn uniformly from this range.
    pub conductance: (f64, f64),
    /// Nominal demand at 1 pu per ZIP bus, drawn uniformly from this range
    /// and split 30/30/40 into conductance, current and power. Defaults to
    /// `[0.05, 0.5]` scaled by `min(1, 10 / (n − 1))`, which keeps total
    /// demand roughly constant beyond ten ZIP buses.
    pub load: (f64, f64),
    /// Slack voltage.
    pub v_slack: f64,
}

impl GeneratorSpec {
    pub fn new(topology: Topology, n_buses: usize, seed: u64) -> Self {
        Self {
            topology,
            n_buses,
            seed,
            conductance: (5.0, 50.0),
            load: {
                let scale = (10.0 / n_buses.saturating_sub(1).max(1) as f64).min(1.0);
                (0.05 * scale, 0.5 * scale)
            },
            v_slack: 1.0,
        }
    }

    pub fn with_load(mut self, lo: f64, hi: f64) -> Self {
        self.load = (lo, hi);
        self
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Random network with the default parameters of [`GeneratorSpec::new`].
///
/// Radial networks are random trees rooted at the slack bus; meshed networks
/// add `⌈n/4⌉` chords between distinct non-adjacent buses (fewer when the
/// graph saturates). Deterministic in `seed`.
pub fn generate_network(topology: Topology, n_buses: usize, seed: u64) -> Network {
    generate_network_with(&GeneratorSpec::new(topology, n_buses, seed))
}

pub fn generate_network_with(spec: &GeneratorSpec) -> Network {
    let n = spec.n_buses;
    assert!(n >= 2, "a network needs at least two buses");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut lines = Vec::with_capacity(n - 1 + n.div_ceil(4));
    let mut adjacent = HashSet::new();
    for bus in 1..n {
        let parent = rng.gen_range(0..bus);
        lines.push(Line::new(parent, bus, uniform(&mut rng, spec.conductance)));
        adjacent.insert((parent, bus));
    }
    if spec.topology == Topology::Meshed {
        let max_edges = n * (n - 1) / 2;
        let chords = n.div_ceil(4).min(max_edges - (n - 1));
        let mut added = 0;
        while added < chords {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b || adjacent.contains(&(a.min(b), a.max(b))) {
                continue;
            }
            adjacent.insert((a.min(b), a.max(b)));
            lines.push(Line::new(a.min(b), a.max(b), uniform(&mut rng, spec.conductance)));
            added += 1;
        }
    }

    let mut buses = vec![Bus::voltage(0, spec.v_slack)];
    for id in 1..n {
        let demand = uniform(&mut rng, spec.load);
        buses.push(Bus::zip(
            id,
            ZipAggregate::new(0.3 * demand, 0.4 * demand, 0.3 * demand),
        ));
    }
    Network::new(buses, lines)
}
