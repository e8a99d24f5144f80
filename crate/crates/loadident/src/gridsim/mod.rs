//! Grid case handling, power flow and stochastic time-domain simulation.

mod case;
mod powerflow;
mod sim;

pub use case::{build_admittance, load_case, Branch, Bus, BusKind, CaseError, DynamicLoad, GridCase};
pub use powerflow::{solve_power_flow, OperatingPoint, PowerFlowError};
pub use sim::{
    simulate, simulate_with_events, LoadField, PhasorWindow, ScenarioEvent, SimConfig, SimError,
};

pub use case::Generator;
