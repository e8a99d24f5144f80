//! Stochastic differential-algebraic time-domain simulation.
//!
//! Classical generators (constant EMF behind transient reactance) enter the
//! network as Norton current sources, loads as admittances g - jb, so every
//! algebraic solve is one complex linear system. Load states follow
//! Euler-Maruyama, swing states semi-implicit Euler. The generator sitting on
//! the slack bus is held as an infinite bus (fixed EMF phasor) to anchor the
//! angle reference.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::case::{build_admittance, GridCase};
use super::powerflow::{solve_power_flow, PowerFlowError};
use crate::ou::LoadBlockSpec;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("instability detected at t={t:.2} s: {what}")]
    InstabilityDetected { t: f64, what: String },
    #[error("network solve failed at t={0:.2} s")]
    NetworkSolveFailed(f64),
}

/// Simulation configuration; `dt_pmu` must be an integer multiple of `step`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub duration: f64,
    pub step: f64,
    pub dt_pmu: f64,
    pub seed: u64,
    /// When set, replaces every load's sigma_p and sigma_q.
    #[serde(default)]
    pub sigma_override: Option<f64>,
    /// Bound on |omega| (rad/s) before the run is declared unstable.
    #[serde(default = "default_omega_bound")]
    pub omega_bound: f64,
}

fn default_omega_bound() -> f64 {
    20.0
}

impl SimConfig {
    pub fn new(duration: f64, seed: u64) -> Self {
        SimConfig {
            duration,
            step: 0.02,
            dt_pmu: 0.02,
            seed,
            sigma_override: None,
            omega_bound: default_omega_bound(),
        }
    }

    fn validate(&self) -> Result<usize, SimError> {
        if self.step <= 0.0 || self.duration <= 0.0 {
            return Err(SimError::InvalidConfig(
                "step and duration must be positive".into(),
            ));
        }
        if self.dt_pmu < self.step {
            return Err(SimError::InvalidConfig(
                "dt_pmu must be at least the integration step".into(),
            ));
        }
        let ratio = self.dt_pmu / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(
                "dt_pmu must be an integer multiple of the integration step".into(),
            ));
        }
        Ok(ratio.round() as usize)
    }
}

/// Which load parameter a scenario event mutates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadField {
    TauG,
    TauB,
    PS,
    QS,
    SigmaP,
    SigmaQ,
}

/// A mid-run step change applied to one load parameter.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScenarioEvent {
    pub t: f64,
    /// Zero-based index into the case's load list.
    pub load: usize,
    pub field: LoadField,
    pub value: f64,
}

/// Time-indexed synthetic PMU record: voltage phasors at every bus, current
/// phasors at every load bus.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorWindow {
    pub dt: f64,
    pub start: f64,
    pub bus_ids: Vec<usize>,
    pub load_bus_ids: Vec<usize>,
    /// n_bus x n samples.
    pub voltages: DMatrix<Complex64>,
    /// m x n samples, metered as I_k = (g_k + j b_k) V_k.
    pub currents: DMatrix<Complex64>,
    pub truth: Option<LoadBlockSpec>,
}

impl PhasorWindow {
    pub fn n_samples(&self) -> usize {
        self.voltages.ncols()
    }

    pub fn n_loads(&self) -> usize {
        self.load_bus_ids.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples() < 2 {
            return Err("phasor window needs at least 2 samples".into());
        }
        if self.currents.ncols() != self.n_samples() {
            return Err("voltage and current series lengths differ".into());
        }
        if self.voltages.iter().any(|v| v.norm() <= 0.0) {
            return Err("voltage magnitude must be strictly positive".into());
        }
        Ok(())
    }
}

/// Integrates the stochastic DAE and subsamples PMU phasors.
pub fn simulate(case: &GridCase, cfg: &SimConfig) -> Result<PhasorWindow, SimError> {
    simulate_with_events(case, cfg, &[])
}

/// [`simulate`] with mid-run load-parameter step changes.
pub fn simulate_with_events(
    case: &GridCase,
    cfg: &SimConfig,
    events: &[ScenarioEvent],
) -> Result<PhasorWindow, SimError> {
    let ratio = cfg.validate()?;
    for ev in events {
        if ev.t < 0.0 || ev.t > cfg.duration {
            return Err(SimError::InvalidConfig(format!(
                "event time {} s outside the simulation horizon",
                ev.t
            )));
        }
        if ev.load >= case.loads.len() {
            return Err(SimError::InvalidConfig(format!(
                "event references load {} but the case has {}",
                ev.load,
                case.loads.len()
            )));
        }
    }

    let op = solve_power_flow(case)?;
    let n_bus = case.n_buses();
    let m = case.loads.len();
    let slack = case.slack_index();

    let mut loads = case.loads.clone();
    if let Some(sigma) = cfg.sigma_override {
        for l in &mut loads {
            l.sigma_p = sigma;
            l.sigma_q = sigma;
        }
    }
    let load_bus: Vec<usize> = loads
        .iter()
        .map(|l| case.bus_index(l.bus).expect("validated"))
        .collect();
    let gen_bus: Vec<usize> = case
        .generators
        .iter()
        .map(|g| case.bus_index(g.bus).expect("validated"))
        .collect();
    let swing: Vec<usize> = (0..case.generators.len())
        .filter(|&gi| gen_bus[gi] != slack)
        .collect();

    // Constant part of the augmented admittance: network plus machine shunts.
    let mut y_base = build_admittance(case);
    for (gi, gen) in case.generators.iter().enumerate() {
        y_base[(gen_bus[gi], gen_bus[gi])] += 1.0 / Complex64::new(0.0, gen.transient_reactance);
    }

    // States at equilibrium. The power-flow point is accurate to its mismatch
    // tolerance only; polish the load admittances against the Norton network
    // to the exact dynamic fixed point, then pin mechanical power to the
    // resulting electrical power so sigma = 0 stays put to round-off.
    let mut delta: Vec<f64> = op.gen_delta.clone();
    let mut omega: Vec<f64> = vec![0.0; case.generators.len()];
    let mut g_state: Vec<f64> = op.load_g.clone();
    let mut b_state: Vec<f64> = op.load_b.clone();

    let solve_network = |g_state: &[f64], b_state: &[f64], delta: &[f64]| {
        let mut y = y_base.clone();
        for (k, &bi) in load_bus.iter().enumerate() {
            y[(bi, bi)] += Complex64::new(g_state[k], -b_state[k]);
        }
        let mut inj = DVector::<Complex64>::zeros(n_bus);
        for (gi, gen) in case.generators.iter().enumerate() {
            let emf = Complex64::from_polar(op.gen_emf_mag[gi], delta[gi]);
            inj[gen_bus[gi]] += emf / Complex64::new(0.0, gen.transient_reactance);
        }
        y.lu().solve(&inj)
    };

    for _ in 0..200 {
        let v = solve_network(&g_state, &b_state, &delta)
            .ok_or(SimError::NetworkSolveFailed(0.0))?;
        let mut max_change: f64 = 0.0;
        for (k, l) in loads.iter().enumerate() {
            let v2 = v[load_bus[k]].norm_sqr();
            let g_new = l.p_s / v2;
            let b_new = l.q_s / v2;
            max_change = max_change
                .max((g_new - g_state[k]).abs())
                .max((b_new - b_state[k]).abs());
            g_state[k] = g_new;
            b_state[k] = b_new;
        }
        if max_change < 1e-15 {
            break;
        }
    }
    let v_eq = solve_network(&g_state, &b_state, &delta)
        .ok_or(SimError::NetworkSolveFailed(0.0))?;
    let p_mech: Vec<f64> = case
        .generators
        .iter()
        .enumerate()
        .map(|(gi, gen)| {
            let emf = Complex64::from_polar(op.gen_emf_mag[gi], delta[gi]);
            let current = (emf - v_eq[gen_bus[gi]]) / Complex64::new(0.0, gen.transient_reactance);
            (emf * current.conj()).re
        })
        .collect();

    let n_steps = (cfg.duration / cfg.step).round() as usize;
    let n_samples = n_steps / ratio + 1;
    let mut voltages = DMatrix::<Complex64>::zeros(n_bus, n_samples);
    let mut currents = DMatrix::<Complex64>::zeros(m, n_samples);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.step;
    let sqrt_h = h.sqrt();

    let mut pending: Vec<&ScenarioEvent> = events.iter().collect();
    pending.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_event = 0usize;

    let mut sample_idx = 0usize;
    for step_idx in 0..=n_steps {
        let t = step_idx as f64 * h;

        while next_event < pending.len() && pending[next_event].t <= t + 1e-12 {
            let ev = pending[next_event];
            let l = &mut loads[ev.load];
            match ev.field {
                LoadField::TauG => l.tau_g = ev.value,
                LoadField::TauB => l.tau_b = ev.value,
                LoadField::PS => l.p_s = ev.value,
                LoadField::QS => l.q_s = ev.value,
                LoadField::SigmaP => l.sigma_p = ev.value,
                LoadField::SigmaQ => l.sigma_q = ev.value,
            }
            next_event += 1;
        }

        // Algebraic network solve with the current load admittances.
        let v =
            solve_network(&g_state, &b_state, &delta).ok_or(SimError::NetworkSolveFailed(t))?;

        for (i, vi) in v.iter().enumerate() {
            let mag = vi.norm();
            if !(0.5..=1.5).contains(&mag) {
                return Err(SimError::InstabilityDetected {
                    t,
                    what: format!("|V| = {mag:.3} p.u. at bus {}", case.buses[i].id),
                });
            }
        }

        if step_idx % ratio == 0 {
            for i in 0..n_bus {
                voltages[(i, sample_idx)] = v[i];
            }
            for (k, &bi) in load_bus.iter().enumerate() {
                currents[(k, sample_idx)] = Complex64::new(g_state[k], b_state[k]) * v[bi];
            }
            sample_idx += 1;
        }
        if step_idx == n_steps {
            break;
        }

        // Swing states: semi-implicit Euler.
        for &gi in &swing {
            let gen = &case.generators[gi];
            let emf = Complex64::from_polar(op.gen_emf_mag[gi], delta[gi]);
            let current = (emf - v[gen_bus[gi]]) / Complex64::new(0.0, gen.transient_reactance);
            let p_e = (emf * current.conj()).re;
            omega[gi] += h * (p_mech[gi] - p_e - gen.damping * omega[gi]) / gen.inertia;
            if omega[gi].abs() > cfg.omega_bound {
                return Err(SimError::InstabilityDetected {
                    t,
                    what: format!("|omega| = {:.3} rad/s at generator {}", omega[gi], gi),
                });
            }
            delta[gi] += h * omega[gi];
        }

        // Load states: Euler-Maruyama on the stochastic demand ODEs.
        for (k, l) in loads.iter().enumerate() {
            let v2 = v[load_bus[k]].norm_sqr();
            let dw_p: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sqrt_h
            };
            let dw_q: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sqrt_h
            };
            g_state[k] +=
                -h * (g_state[k] * v2 - l.p_s) / l.tau_g + l.p_s * l.sigma_p / l.tau_g * dw_p;
            b_state[k] +=
                -h * (b_state[k] * v2 - l.q_s) / l.tau_b + l.q_s * l.sigma_q / l.tau_b * dw_q;
        }
    }

    let truth = LoadBlockSpec {
        tau_g: case.loads.iter().map(|l| l.tau_g).collect(),
        tau_b: case.loads.iter().map(|l| l.tau_b).collect(),
        v_bar: load_bus
            .iter()
            .map(|&bi| op.bus_voltages[bi].norm())
            .collect(),
        p_s: case.loads.iter().map(|l| l.p_s).collect(),
        q_s: case.loads.iter().map(|l| l.q_s).collect(),
        sigma_p: loads.iter().map(|l| l.sigma_p).collect(),
        sigma_q: loads.iter().map(|l| l.sigma_q).collect(),
    };

    Ok(PhasorWindow {
        dt: cfg.dt_pmu,
        start: 0.0,
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        load_bus_ids: case.loads.iter().map(|l| l.bus).collect(),
        voltages,
        currents,
        truth: Some(truth),
    })
}
