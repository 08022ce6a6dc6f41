//! JSON case files.
//!
//! ```json
//! { "buses": [{"id":0,"type":"V","v":1.0},
//!             {"id":1,"type":"P","i0":1.0,"p0":-1.0,"g0":1.0}],
//!   "lines": [{"from":0,"to":1,"g":10.0}],
//!   "band": {"v_min":0.9,"v_max":1.1},
//!   "q": 2 }
//! ```
//!
//! The band is given in volts and squared on load. `band` and `q` are
//! optional. A `P` bus may carry a `loads` array of `{i0, p0, g0}` entries;
//! these are summed together with any top-level components into one
//! aggregate per bus.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bus, BusId, BusKind, Line, Network, ValidationError, VoltageBand, ZipAggregate};
use crate::numerics::NormOrder;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {0}")]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub buses: Vec<CaseBus>,
    pub lines: Vec<CaseLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<CaseBand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<NormOrder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum CaseBus {
    #[serde(rename = "V")]
    Voltage { id: usize, v: f64 },
    #[serde(rename = "P")]
    Zip {
        id: usize,
        #[serde(default)]
        i0: f64,
        #[serde(default)]
        p0: f64,
        #[serde(default)]
        g0: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        loads: Vec<ZipAggregate>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseLine {
    pub from: usize,
    pub to: usize,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseBand {
    pub v_min: f64,
    pub v_max: f64,
}

impl CaseFile {
    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        serde_json::from_str(text).map_err(|e| CaseError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Builds the network, sorting buses by id. Does not validate.
    pub fn to_network(&self) -> Network {
        let mut buses: Vec<Bus> = self
            .buses
            .iter()
            .map(|b| match b {
                CaseBus::Voltage { id, v } => Bus {
                    id: BusId(*id),
                    kind: BusKind::ConstantVoltage { v: *v },
                },
                CaseBus::Zip {
                    id,
                    i0,
                    p0,
                    g0,
                    loads,
                } => {
                    let agg = loads
                        .iter()
                        .fold(ZipAggregate::new(*i0, *p0, *g0), |acc, l| acc + *l);
                    Bus {
                        id: BusId(*id),
                        kind: BusKind::Zip(agg),
                    }
                }
            })
            .collect();
        buses.sort_by_key(|b| b.id);
        let lines = self
            .lines
            .iter()
            .map(|l| Line::new(l.from, l.to, l.g))
            .collect();
        let band = self
            .band
            .map(|b| VoltageBand::from_voltages(b.v_min, b.v_max))
            .unwrap_or_default();
        Network {
            buses,
            lines,
            band,
            norm_q: self.q.unwrap_or_default(),
        }
    }

    pub fn from_network(net: &Network) -> Self {
        let buses = net
            .buses
            .iter()
            .map(|b| match b.kind {
                BusKind::ConstantVoltage { v } => CaseBus::Voltage { id: b.id.0, v },
                BusKind::Zip(z) => CaseBus::Zip {
                    id: b.id.0,
                    i0: z.i0,
                    p0: z.p0,
                    g0: z.g0,
                    loads: Vec::new(),
                },
            })
            .collect();
        let lines = net
            .lines
            .iter()
            .map(|l| CaseLine {
                from: l.from.0,
                to: l.to.0,
                g: l.g,
            })
            .collect();
        Self {
            buses,
            lines,
            band: Some(CaseBand {
                v_min: net.band.v_min(),
                v_max: net.band.v_max(),
            }),
            q: Some(net.norm_q),
        }
    }
}

/// Parses and validates a case from JSON text.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let net = CaseFile::from_json(text)?.to_network();
    net.validate()?;
    Ok(net)
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Network, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

pub fn to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&CaseFile::from_network(net)).expect("case serializes")
}
