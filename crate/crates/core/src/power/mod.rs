//! Multi-period AC optimal power flow.
//!
//! Network data comes from MATPOWER case files and is converted to per-unit
//! on load. Branches use the standard π-model with separate flow variables at
//! each end. Periods are coupled only through generator ramping rows.

mod matpower;
mod opf;
mod profile;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use matpower::parse_matpower;
pub use opf::{build_multiperiod_opf, extract_dispatch, Layout, OpfModel, RowFamily};
pub use profile::{generate_load_profile, LoadProfile, ProfileError};
pub use validate::{evaluate_rows, validate_solution, FamilyReport, FamilyRows, ViolationReport, VIOLATION_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing matrix `mpc.{0}`")]
    MissingBlock(&'static str),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("{element} refers to unknown bus {bus}")]
    UnknownBus { element: String, bus: i64 },
    #[error("no reference bus")]
    NoReferenceBus,
    #[error("more than one reference bus")]
    MultipleReferenceBuses,
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("{what}: expected length {expected}, found {found}")]
    Shape { what: String, expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Bus number in the source file.
    pub id: i64,
    pub reference: bool,
    pub vmin: f64,
    pub vmax: f64,
    /// Shunt conductance and susceptance, per unit at 1 p.u. voltage.
    pub gs: f64,
    pub bs: f64,
}

/// π-model branch between bus indices `from` and `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series conductance and susceptance.
    pub g: f64,
    pub b: f64,
    /// Total line charging susceptance.
    pub charging: f64,
    /// Off-nominal tap ratio (1 when absent) and phase shift in radians.
    pub tap: f64,
    pub shift: f64,
    /// Apparent power limit; `None` means unlimited.
    pub rate: Option<f64>,
    pub angmin: f64,
    pub angmax: f64,
}

/// Admittance coefficients of the two branch ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchAdmittance {
    pub gff: f64,
    pub bff: f64,
    pub gft: f64,
    pub bft: f64,
    pub gtt: f64,
    pub btt: f64,
    pub gtf: f64,
    pub btf: f64,
}

impl Line {
    pub fn admittance(&self) -> BranchAdmittance {
        let (g, b, t) = (self.g, self.b, self.tap);
        let (sn, cs) = self.shift.sin_cos();
        let bc = 0.5 * self.charging;
        BranchAdmittance {
            gff: g / (t * t),
            bff: (b + bc) / (t * t),
            gft: -(g * cs - b * sn) / t,
            bft: -(g * sn + b * cs) / t,
            gtt: g,
            btt: b + bc,
            gtf: -(g * cs + b * sn) / t,
            btf: -(b * cs - g * sn) / t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    /// Ramp capability per hour, per unit. Infinite disables ramp rows.
    pub ramp: f64,
    /// Cost `c2 p² + c1 p + c0` in per-unit `p`.
    pub cost: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    pub pd: f64,
    pub qd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkData {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

impl NetworkData {
    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.reference)
    }

    /// Check the structural invariants.
    pub fn check(&self) -> Result<(), PowerError> {
        let n = self.buses.len();
        match self.buses.iter().filter(|b| b.reference).count() {
            0 => return Err(PowerError::NoReferenceBus),
            1 => {}
            _ => return Err(PowerError::MultipleReferenceBuses),
        }
        let bad = |what: String| Err(PowerError::InvalidNetwork(what));
        for (i, b) in self.buses.iter().enumerate() {
            if !(b.vmin <= b.vmax) {
                return bad(format!("bus {i}: vmin > vmax"));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            if l.from >= n || l.to >= n {
                return bad(format!("line {i}: bus index out of range"));
            }
            if !(l.g.is_finite() && l.b.is_finite()) {
                return bad(format!("line {i}: non-finite admittance"));
            }
            if !(l.angmin <= l.angmax) {
                return bad(format!("line {i}: angmin > angmax"));
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.bus >= n {
                return bad(format!("generator {i}: bus index out of range"));
            }
            if !(g.pmin <= g.pmax && g.qmin <= g.qmax) {
                return bad(format!("generator {i}: inverted limits"));
            }
            if !(g.ramp >= 0.0) {
                return bad(format!("generator {i}: negative ramp"));
            }
        }
        if let Some(i) = self.loads.iter().position(|l| l.bus >= n) {
            return bad(format!("load {i}: bus index out of range"));
        }
        Ok(())
    }

    /// Multiply every base load by `factor`.
    pub fn with_load_scale(mut self, factor: f64) -> Self {
        self.loads.iter_mut().for_each(|l| {
            l.pd *= factor;
            l.qd *= factor;
        });
        self
    }

    /// Set every generator's hourly ramp capability.
    pub fn with_ramp(mut self, ramp: f64) -> Self {
        self.generators.iter_mut().for_each(|g| g.ramp = ramp);
        self
    }
}

/// A network together with its load profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiPeriodCase {
    pub network: NetworkData,
    pub profile: LoadProfile,
}

impl MultiPeriodCase {
    pub fn new(network: NetworkData, profile: LoadProfile) -> Result<Self, PowerError> {
        network.check()?;
        if profile.scale.iter().any(|row| row.len() != network.loads.len()) {
            return Err(PowerError::Shape {
                what: "load profile columns".into(),
                expected: network.loads.len(),
                found: profile.scale.iter().map(Vec::len).find(|&l| l != network.loads.len()).unwrap_or(0),
            });
        }
        Ok(MultiPeriodCase { network, profile })
    }

    pub fn periods(&self) -> usize {
        self.profile.periods
    }

    /// Ramp limit per period for generator `g`.
    pub fn ramp_per_period(&self, g: usize) -> f64 {
        self.network.generators[g].ramp * self.profile.resolution_minutes / 60.0
    }

    /// Real and reactive demand per bus in period `t`.
    pub fn bus_demand(&self, t: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.network.buses.len();
        let (mut pd, mut qd) = (vec![0.0; n], vec![0.0; n]);
        for (j, l) in self.network.loads.iter().enumerate() {
            let s = self.profile.scale[t][j];
            pd[l.bus] += s * l.pd;
            qd[l.bus] += s * l.qd;
        }
        (pd, qd)
    }
}

/// Operating point for one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodDispatch {
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub p_from: Vec<f64>,
    pub q_from: Vec<f64>,
    pub p_to: Vec<f64>,
    pub q_to: Vec<f64>,
}

/// Solved multi-period dispatch in per-unit quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub schema_version: u32,
    pub case: String,
    pub base_mva: f64,
    pub objective: f64,
    pub status: Option<String>,
    pub iterations: Option<usize>,
    /// Base-load multiplier the case was built with.
    #[serde(default)]
    pub load_scale: Option<f64>,
    /// Load profile the dispatch was computed for.
    #[serde(default)]
    pub profile: Option<LoadProfile>,
    pub periods: Vec<PeriodDispatch>,
}

pub const DISPATCH_SCHEMA_VERSION: u32 = 1;

impl DispatchSolution {
    /// Total generation cost evaluated directly from the network data.
    pub fn cost(&self, network: &NetworkData) -> f64 {
        self.periods
            .iter()
            .flat_map(|p| p.pg.iter().zip(&network.generators))
            .map(|(&p, g)| g.cost[0] * p * p + g.cost[1] * p + g.cost[2])
            .sum()
    }
}

/// MATPOWER cases shipped with the crate, by name (`case9`, `case30`, `case118`).
pub fn bundled_case(name: &str) -> Option<&'static str> {
    match name {
        "case9" => Some(include_str!("../../data/case9.m")),
        "case30" => Some(include_str!("../../data/case30.m")),
        "case118" => Some(include_str!("../../data/case118.m")),
        _ => None,
    }
}
