//! Network case description and the `gridcase-v1` JSON schema.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case document failed to parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid case: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
    Passive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(rename = "type")]
    pub kind: BusKind,
    /// Voltage setpoint for slack/generator buses, initial guess otherwise (p.u.).
    pub voltage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    pub reactance: f64,
    /// Total line-charging susceptance; half is placed at each end.
    #[serde(default)]
    pub charging: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Inertia constant M (s^2/rad on the system base).
    pub inertia: f64,
    pub damping: f64,
    /// Mechanical power setpoint (p.u.); the simulator re-derives the exact
    /// equilibrium value from the power-flow solution.
    pub mechanical_power: f64,
    pub transient_reactance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicLoad {
    pub bus: usize,
    pub tau_g: f64,
    pub tau_b: f64,
    pub p_s: f64,
    pub q_s: f64,
    pub sigma_p: f64,
    pub sigma_q: f64,
}

/// Static description of a network: buses, branches, classical generators and
/// dynamic admittance loads with their true time constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<DynamicLoad>,
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            return Err(CaseError::Validation(format!(
                "expected exactly one slack bus, found {slack_count}"
            )));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if self.buses[..i].iter().any(|o| o.id == b.id) {
                return Err(CaseError::Validation(format!("duplicate bus id {}", b.id)));
            }
            if b.voltage <= 0.0 {
                return Err(CaseError::Validation(format!(
                    "bus {} has nonpositive voltage setpoint",
                    b.id
                )));
            }
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if self.bus_index(end).is_none() {
                    return Err(CaseError::Validation(format!(
                        "branch {}-{} references missing bus {end}",
                        br.from, br.to
                    )));
                }
            }
            if (br.resistance * br.resistance + br.reactance * br.reactance).sqrt() == 0.0 {
                return Err(CaseError::Validation(format!(
                    "branch {}-{} has zero impedance",
                    br.from, br.to
                )));
            }
        }
        for g in &self.generators {
            if self.bus_index(g.bus).is_none() {
                return Err(CaseError::Validation(format!(
                    "generator references missing bus {}",
                    g.bus
                )));
            }
            if g.transient_reactance <= 0.0 || g.inertia <= 0.0 {
                return Err(CaseError::Validation(format!(
                    "generator at bus {} has nonpositive reactance or inertia",
                    g.bus
                )));
            }
        }
        for (i, l) in self.loads.iter().enumerate() {
            if self.bus_index(l.bus).is_none() {
                return Err(CaseError::Validation(format!(
                    "load references missing bus {}",
                    l.bus
                )));
            }
            if self.loads[..i].iter().any(|o| o.bus == l.bus) {
                return Err(CaseError::Validation(format!(
                    "two dynamic loads share bus {}",
                    l.bus
                )));
            }
            if l.tau_g <= 0.0 || l.tau_b <= 0.0 {
                return Err(CaseError::Validation(format!(
                    "load at bus {} has nonpositive time constant",
                    l.bus
                )));
            }
        }
        Ok(())
    }
}

/// Parses a `gridcase-v1` JSON document and validates its invariants.
pub fn load_case(text: &str) -> Result<GridCase, CaseError> {
    let case: GridCase = serde_json::from_str(text)?;
    case.validate()?;
    Ok(case)
}

/// Bus admittance matrix Y = G + jB from the branch list.
pub fn build_admittance(case: &GridCase) -> DMatrix<Complex64> {
    let n = case.n_buses();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for br in &case.branches {
        let i = case.bus_index(br.from).expect("validated");
        let j = case.bus_index(br.to).expect("validated");
        let z = Complex64::new(br.resistance, br.reactance);
        let ys = 1.0 / z;
        let shunt = Complex64::new(0.0, br.charging / 2.0);
        y[(i, i)] += ys + shunt;
        y[(j, j)] += ys + shunt;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
    }
    y
}
