//! Network description, validation, and the derived constants every solver
//! and condition check works from.
//!
//! Buses are split into constant-voltage buses (the slack bus at index 0 and
//! any other voltage-regulated bus) and ZIP buses. All quantities below are in
//! per unit. Per-bus vectors in [`DerivedModel`] are indexed by ZIP-bus
//! position, i.e. the order in which ZIP buses appear in [`Network::buses`].

use std::collections::{HashSet, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, NormOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub usize);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Aggregate ZIP components of everything attached to one bus.
///
/// `p0` is positive for consumption and negative for constant-power
/// generation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZipAggregate {
    pub i0: f64,
    pub p0: f64,
    pub g0: f64,
}

impl ZipAggregate {
    pub const ZERO: Self = Self {
        i0: 0.0,
        p0: 0.0,
        g0: 0.0,
    };

    pub fn new(i0: f64, p0: f64, g0: f64) -> Self {
        Self { i0, p0, g0 }
    }
}

impl std::ops::Add for ZipAggregate {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            i0: self.i0 + rhs.i0,
            p0: self.p0 + rhs.p0,
            g0: self.g0 + rhs.g0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusKind {
    ConstantVoltage { v: f64 },
    Zip(ZipAggregate),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
}

impl Bus {
    pub fn voltage(id: usize, v: f64) -> Self {
        Self {
            id: BusId(id),
            kind: BusKind::ConstantVoltage { v },
        }
    }

    pub fn zip(id: usize, load: ZipAggregate) -> Self {
        Self {
            id: BusId(id),
            kind: BusKind::Zip(load),
        }
    }

    pub fn is_voltage(&self) -> bool {
        matches!(self.kind, BusKind::ConstantVoltage { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub g: f64,
}

impl Line {
    pub fn new(from: usize, to: usize, g: f64) -> Self {
        Self {
            from: BusId(from),
            to: BusId(to),
            g,
        }
    }
}

/// Admissible band of squared voltages `[u_lo, u_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageBand {
    pub u_lo: f64,
    pub u_hi: f64,
}

impl VoltageBand {
    /// Builds the band from voltage magnitudes, squaring them.
    pub fn from_voltages(v_min: f64, v_max: f64) -> Self {
        Self {
            u_lo: v_min * v_min,
            u_hi: v_max * v_max,
        }
    }

    pub fn v_min(&self) -> f64 {
        self.u_lo.sqrt()
    }

    pub fn v_max(&self) -> f64 {
        self.u_hi.sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.u_lo.is_finite() && self.u_hi.is_finite() && 0.0 < self.u_lo && self.u_lo < self.u_hi
    }

    /// Whether every entry of `v` lies within `[√u_lo, √u_hi]`.
    pub fn contains_voltages(&self, v: &[f64]) -> bool {
        let (lo, hi) = (self.v_min(), self.v_max());
        v.iter().all(|x| (lo..=hi).contains(x))
    }
}

impl Default for VoltageBand {
    fn default() -> Self {
        Self::from_voltages(0.9, 1.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub band: VoltageBand,
    pub norm_q: NormOrder,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("network has no buses")]
    Empty,
    #[error("bus at position {position} has id {id}; ids must be dense 0..N in order")]
    NonDenseIds { position: usize, id: BusId },
    #[error("network has no constant-voltage bus")]
    NoVoltageBus,
    #[error("slack bus 0 must be a constant-voltage bus")]
    SlackNotVoltage,
    #[error("network has no ZIP bus to solve for")]
    NoZipBus,
    #[error("bus {bus} has invalid voltage setpoint {v}")]
    NonPositiveVoltage { bus: BusId, v: f64 },
    #[error("bus {bus} has invalid {field} = {value}")]
    InvalidComponent {
        bus: BusId,
        field: &'static str,
        value: f64,
    },
    #[error("line {index} references unknown bus {bus}")]
    UnknownBus { index: usize, bus: BusId },
    #[error("line {index} connects bus {bus} to itself")]
    SelfLoop { index: usize, bus: BusId },
    #[error("line {index} ({from}-{to}) has non-positive conductance {g}")]
    NonPositiveConductance {
        index: usize,
        from: BusId,
        to: BusId,
        g: f64,
    },
    #[error("line {index} duplicates an earlier line between buses {from} and {to}")]
    DuplicateLine { index: usize, from: BusId, to: BusId },
    #[error("network is disconnected: bus {unreachable} is not reachable from the slack bus")]
    DisconnectedGraph { unreachable: BusId },
    #[error("invalid voltage band: u_lo = {u_lo}, u_hi = {u_hi}")]
    InvalidBand { u_lo: f64, u_hi: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("reduced conductance matrix is not positive definite")]
    SingularG,
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("voltage at ZIP bus position {index} is not positive: {v}")]
    NonPositiveVoltage { index: usize, v: f64 },
}

impl Network {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>) -> Self {
        Self {
            buses,
            lines,
            band: VoltageBand::default(),
            norm_q: NormOrder::default(),
        }
    }

    pub fn with_band(mut self, band: VoltageBand) -> Self {
        self.band = band;
        self
    }

    pub fn with_norm(mut self, q: NormOrder) -> Self {
        self.norm_q = q;
        self
    }

    pub fn zip_buses(&self) -> impl Iterator<Item = (BusId, &ZipAggregate)> {
        self.buses.iter().filter_map(|b| match &b.kind {
            BusKind::Zip(z) => Some((b.id, z)),
            BusKind::ConstantVoltage { .. } => None,
        })
    }

    /// Checks every structural invariant; connectivity is verified by BFS
    /// from the slack bus.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.buses.is_empty() {
            return Err(ValidationError::Empty);
        }
        if !self.band.is_valid() {
            return Err(ValidationError::InvalidBand {
                u_lo: self.band.u_lo,
                u_hi: self.band.u_hi,
            });
        }
        for (position, bus) in self.buses.iter().enumerate() {
            if bus.id.0 != position {
                return Err(ValidationError::NonDenseIds {
                    position,
                    id: bus.id,
                });
            }
            match bus.kind {
                BusKind::ConstantVoltage { v } => {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(ValidationError::NonPositiveVoltage { bus: bus.id, v });
                    }
                }
                BusKind::Zip(z) => {
                    let checks = [
                        ("i0", z.i0, z.i0 >= 0.0),
                        ("g0", z.g0, z.g0 >= 0.0),
                        ("p0", z.p0, true),
                    ];
                    for (field, value, sign_ok) in checks {
                        if !value.is_finite() || !sign_ok {
                            return Err(ValidationError::InvalidComponent {
                                bus: bus.id,
                                field,
                                value,
                            });
                        }
                    }
                }
            }
        }
        if !self.buses.iter().any(Bus::is_voltage) {
            return Err(ValidationError::NoVoltageBus);
        }
        if !self.buses[0].is_voltage() {
            return Err(ValidationError::SlackNotVoltage);
        }
        if self.zip_buses().next().is_none() {
            return Err(ValidationError::NoZipBus);
        }

        let n = self.buses.len();
        let mut seen = HashSet::with_capacity(self.lines.len());
        let mut adjacency = vec![Vec::new(); n];
        for (index, line) in self.lines.iter().enumerate() {
            for end in [line.from, line.to] {
                if end.0 >= n {
                    return Err(ValidationError::UnknownBus { index, bus: end });
                }
            }
            if line.from == line.to {
                return Err(ValidationError::SelfLoop {
                    index,
                    bus: line.from,
                });
            }
            if !(line.g.is_finite() && line.g > 0.0) {
                return Err(ValidationError::NonPositiveConductance {
                    index,
                    from: line.from,
                    to: line.to,
                    g: line.g,
                });
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !seen.insert(key) {
                return Err(ValidationError::DuplicateLine {
                    index,
                    from: line.from,
                    to: line.to,
                });
            }
            adjacency[line.from.0].push(line.to.0);
            adjacency[line.to.0].push(line.from.0);
        }

        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(bus) = queue.pop_front() {
            for &next in &adjacency[bus] {
                if !visited[next] {
                    visited[next] = true;
                    queue.push_back(next);
                }
            }
        }
        if let Some(unreachable) = visited.iter().position(|v| !v) {
            return Err(ValidationError::DisconnectedGraph {
                unreachable: BusId(unreachable),
            });
        }
        Ok(())
    }

    /// Validates the network and computes its [`DerivedModel`].
    pub fn derive(&self) -> Result<DerivedModel, ModelError> {
        self.validate()?;
        DerivedModel::from_network(self)
    }
}

/// Constants of the reduced power-flow equations over the ZIP buses.
///
/// Immutable after construction, so it can be shared freely between threads.
#[derive(Debug, Clone)]
pub struct DerivedModel {
    zip_ids: Vec<BusId>,
    c: DVector<f64>,
    k: DVector<f64>,
    gn: DVector<f64>,
    p: DVector<f64>,
    i0: DVector<f64>,
    g0: DVector<f64>,
    g: DMatrix<f64>,
    z: DMatrix<f64>,
    d: DVector<f64>,
    coupling: Vec<Vec<(usize, f64)>>,
    lambda_min_g: f64,
    z_abs_sum: f64,
}

impl DerivedModel {
    fn from_network(net: &Network) -> Result<Self, ModelError> {
        let n_all = net.buses.len();
        let mut position = vec![None; n_all];
        let mut zip_ids = Vec::new();
        let mut loads = Vec::new();
        for bus in &net.buses {
            if let BusKind::Zip(z) = bus.kind {
                position[bus.id.0] = Some(zip_ids.len());
                zip_ids.push(bus.id);
                loads.push(z);
            }
        }
        let size = zip_ids.len();

        let mut gn = DVector::zeros(size);
        let mut vsum = DVector::zeros(size);
        let mut coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
        let voltage_of = |id: BusId| match net.buses[id.0].kind {
            BusKind::ConstantVoltage { v } => Some(v),
            BusKind::Zip(_) => None,
        };
        for line in &net.lines {
            for (a, b) in [(line.from, line.to), (line.to, line.from)] {
                let Some(n) = position[a.0] else { continue };
                gn[n] += line.g;
                match position[b.0] {
                    Some(m) => coupling[n].push((m, line.g)),
                    None => vsum[n] += line.g * voltage_of(b).unwrap_or(0.0),
                }
            }
        }
        for row in &mut coupling {
            row.sort_by_key(|(m, _)| *m);
        }

        let i0 = DVector::from_iterator(size, loads.iter().map(|z| z.i0));
        let g0 = DVector::from_iterator(size, loads.iter().map(|z| z.g0));
        let p = DVector::from_iterator(size, loads.iter().map(|z| z.p0));
        let c = &gn + &g0;
        let k = &vsum - &i0;

        Self::assemble(zip_ids, c, k, gn, p, i0, g0, coupling)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        zip_ids: Vec<BusId>,
        c: DVector<f64>,
        k: DVector<f64>,
        gn: DVector<f64>,
        p: DVector<f64>,
        i0: DVector<f64>,
        g0: DVector<f64>,
        coupling: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, ModelError> {
        let size = c.len();
        let mut g = DMatrix::from_diagonal(&c);
        for (n, row) in coupling.iter().enumerate() {
            for &(m, gnm) in row {
                g[(n, m)] = -gnm;
            }
        }
        let chol = g.clone().cholesky().ok_or(ModelError::SingularG)?;
        let mut z = chol.inverse();
        // One step of iterative refinement tightens G·Z ≈ I on stiff networks.
        let defect = DMatrix::identity(size, size) - &g * &z;
        z += &z * defect;
        z = (&z + z.transpose()) * 0.5;
        let d = &z * &k;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::SingularG);
        }
        let lambda_min_g =
            numerics::min_eigenvalue_sym(&g).map_err(|_| ModelError::SingularG)?;
        let z_abs_sum = numerics::induced_norm(&z, NormOrder::One);
        Ok(Self {
            zip_ids,
            c,
            k,
            gn,
            p,
            i0,
            g0,
            g,
            z,
            d,
            coupling,
            lambda_min_g,
            z_abs_sum,
        })
    }

    /// Builds a model directly from reduced constants, bypassing any network.
    ///
    /// `couplings` lists each ZIP-ZIP line once as `(n, m, g_nm)`; `i0` and
    /// `g0` only feed the condition checks and may be zero.
    pub fn from_reduced(
        c: &[f64],
        k: &[f64],
        p: &[f64],
        couplings: &[(usize, usize, f64)],
    ) -> Result<Self, ModelError> {
        let size = c.len();
        for len in [k.len(), p.len()] {
            if len != size {
                return Err(ModelError::DimensionMismatch {
                    expected: size,
                    got: len,
                });
            }
        }
        let mut coupling = vec![Vec::new(); size];
        let mut gn = DVector::zeros(size);
        for &(n, m, g) in couplings {
            coupling[n].push((m, g));
            coupling[m].push((n, g));
            gn[n] += g;
            gn[m] += g;
        }
        Self::assemble(
            (1..=size).map(BusId).collect(),
            DVector::from_column_slice(c),
            DVector::from_column_slice(k),
            gn,
            DVector::from_column_slice(p),
            DVector::zeros(size),
            DVector::zeros(size),
            coupling,
        )
    }

    /// Number of ZIP buses `P`.
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Network bus id of each ZIP-bus position.
    pub fn zip_ids(&self) -> &[BusId] {
        &self.zip_ids
    }

    /// `c_n`: total line conductance at the bus plus its shunt conductance.
    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// `k_n`: current fed in from constant-voltage neighbours minus the
    /// constant-current load.
    pub fn k(&self) -> &DVector<f64> {
        &self.k
    }

    /// `g_n`: total line conductance incident to the bus.
    pub fn gn(&self) -> &DVector<f64> {
        &self.gn
    }

    /// Constant-power components.
    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn i0(&self) -> &DVector<f64> {
        &self.i0
    }

    pub fn g0(&self) -> &DVector<f64> {
        &self.g0
    }

    /// Reduced conductance matrix over the ZIP buses.
    pub fn g_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `Z = G⁻¹`.
    pub fn z_matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Ball center `d = Z k`, the exact solution when `p = 0`.
    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// ZIP-ZIP neighbours of each bus as `(position, g_nm)`.
    pub fn coupling(&self) -> &[Vec<(usize, f64)>] {
        &self.coupling
    }

    /// `Σ_{m∈𝒫} g_nm` for each ZIP bus.
    pub fn zip_coupling_sum(&self, n: usize) -> f64 {
        self.coupling[n].iter().map(|(_, g)| g).sum()
    }

    /// Smallest eigenvalue of `G`, computed once at construction.
    pub fn lambda_min_g(&self) -> f64 {
        self.lambda_min_g
    }

    /// Induced norm `‖Z‖_q`, served from values cached at construction.
    ///
    /// `Z` is symmetric, so its 1- and ∞-norms coincide, and positive
    /// definite, so `‖Z‖₂ = 1 / λ̲(G)`.
    pub fn z_norm(&self, q: NormOrder) -> f64 {
        match q {
            NormOrder::One | NormOrder::Inf => self.z_abs_sum,
            NormOrder::Two if self.lambda_min_g > 0.0 => 1.0 / self.lambda_min_g,
            NormOrder::Two => numerics::induced_norm(&self.z, q),
        }
    }

    /// Power-flow mismatch `c v² − Σ g v v − k v + p` per ZIP bus.
    pub fn residual(&self, v: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_len(v.len())?;
        if let Some((index, &bad)) = v.iter().enumerate().find(|(_, x)| x.is_nan() || **x <= 0.0) {
            return Err(ModelError::NonPositiveVoltage { index, v: bad });
        }
        Ok(self.residual_unchecked(v))
    }

    /// Same as [`residual`](Self::residual) without the positivity check.
    pub fn residual_unchecked(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|n| {
                let coupled: f64 = self.coupling[n].iter().map(|&(m, g)| g * v[m]).sum();
                v[n] * (self.c[n] * v[n] - coupled - self.k[n]) + self.p[n]
            })
            .collect()
    }

    pub fn residual_inf(&self, v: &[f64]) -> f64 {
        if v.len() != self.len() {
            return f64::INFINITY;
        }
        let r = self.residual_unchecked(v);
        if r.iter().any(|x| !x.is_finite()) {
            return f64::INFINITY;
        }
        numerics::inf_norm(&r)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<(), ModelError> {
        if got == self.len() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.len(),
                got,
            })
        }
    }

    /// Returns a copy with the constant-power vector replaced.
    pub fn with_power(&self, p: &[f64]) -> Result<Self, ModelError> {
        self.check_len(p.len())?;
        let mut out = self.clone();
        out.p = DVector::from_column_slice(p);
        Ok(out)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(c: &[f64], k: &[f64], p: &[f64], couplings: &[(usize, usize, f64)]) -> Self {
        let size = c.len();
        let mut coupling = vec![Vec::new(); size];
        let mut g = DMatrix::from_diagonal(&DVector::from_column_slice(c));
        for &(n, m, gnm) in couplings {
            coupling[n].push((m, gnm));
            coupling[m].push((n, gnm));
            g[(n, m)] = -gnm;
            g[(m, n)] = -gnm;
        }
        Self {
            zip_ids: (1..=size).map(BusId).collect(),
            c: DVector::from_column_slice(c),
            k: DVector::from_column_slice(k),
            gn: DVector::zeros(size),
            p: DVector::from_column_slice(p),
            i0: DVector::zeros(size),
            g0: DVector::zeros(size),
            g,
            z: DMatrix::zeros(size, size),
            d: DVector::zeros(size),
            coupling,
            lambda_min_g: 0.0,
            z_abs_sum: 0.0,
        }
    }
}
