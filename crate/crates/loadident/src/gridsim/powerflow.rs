//! Newton-Raphson power flow and equilibrium construction for the
//! classical-generator / admittance-load model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use super::case::{build_admittance, BusKind, GridCase};

const MAX_ITERATIONS: usize = 50;
const MISMATCH_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("power flow failed to converge after {iterations} iterations (mismatch {mismatch:.3e} p.u.)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("solved voltage magnitude {magnitude:.4} p.u. at bus {bus} is below 0.5 p.u.")]
    LowVoltage { bus: usize, magnitude: f64 },
    #[error("two generators share bus {0}; one machine per bus is supported")]
    DuplicateGeneratorBus(usize),
}

/// Converged operating point: bus phasors, generator internals and the load
/// admittance equilibria g_k = P_s/V^2, b_k = Q_s/V^2.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub bus_voltages: Vec<Complex64>,
    /// Internal EMF magnitude and angle per generator (case order).
    pub gen_emf_mag: Vec<f64>,
    pub gen_delta: Vec<f64>,
    /// Electrical power delivered by each generator at the equilibrium.
    pub gen_electrical_power: Vec<f64>,
    pub load_g: Vec<f64>,
    pub load_b: Vec<f64>,
    pub iterations: usize,
}

/// Solves the power flow with polar Newton-Raphson.
///
/// Generator buses hold |V| at their setpoint (PV), load and passive buses are
/// PQ, the slack bus holds both magnitude and angle.
pub fn solve_power_flow(case: &GridCase) -> Result<OperatingPoint, PowerFlowError> {
    let n = case.n_buses();
    let y = build_admittance(case);
    let g_mat: DMatrix<f64> = y.map(|v| v.re);
    let b_mat: DMatrix<f64> = y.map(|v| v.im);

    for (i, g) in case.generators.iter().enumerate() {
        if case.generators[..i].iter().any(|o| o.bus == g.bus) {
            return Err(PowerFlowError::DuplicateGeneratorBus(g.bus));
        }
    }

    // Specified injections.
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for g in &case.generators {
        let i = case.bus_index(g.bus).expect("validated");
        p_spec[i] += g.mechanical_power;
    }
    for l in &case.loads {
        let i = case.bus_index(l.bus).expect("validated");
        p_spec[i] -= l.p_s;
        q_spec[i] -= l.q_s;
    }

    let slack = case.slack_index();
    let is_pv: Vec<bool> = case
        .buses
        .iter()
        .map(|b| b.kind == BusKind::Generator)
        .collect();

    // Unknown ordering: theta for all non-slack buses, then |V| for PQ buses.
    let theta_idx: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let vm_idx: Vec<usize> = (0..n).filter(|&i| i != slack && !is_pv[i]).collect();

    let mut vm: Vec<f64> = case.buses.iter().map(|b| b.voltage).collect();
    let mut th = vec![0.0; n];

    let calc_pq = |vm: &[f64], th: &[f64]| {
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let tij = th[i] - th[j];
                let (s, c) = tij.sin_cos();
                p[i] += vm[i] * vm[j] * (g_mat[(i, j)] * c + b_mat[(i, j)] * s);
                q[i] += vm[i] * vm[j] * (g_mat[(i, j)] * s - b_mat[(i, j)] * c);
            }
        }
        (p, q)
    };

    let mut iterations = 0;
    loop {
        let (p_calc, q_calc) = calc_pq(&vm, &th);
        let mut mismatch = DVector::zeros(theta_idx.len() + vm_idx.len());
        for (r, &i) in theta_idx.iter().enumerate() {
            mismatch[r] = p_spec[i] - p_calc[i];
        }
        for (r, &i) in vm_idx.iter().enumerate() {
            mismatch[theta_idx.len() + r] = q_spec[i] - q_calc[i];
        }
        let inf_norm = mismatch.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if inf_norm <= MISMATCH_TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(PowerFlowError::NonConvergence {
                iterations,
                mismatch: inf_norm,
            });
        }

        // Jacobian: [dP/dth dP/dV; dQ/dth dQ/dV].
        let nt = theta_idx.len();
        let nv = vm_idx.len();
        let mut jac = DMatrix::zeros(nt + nv, nt + nv);
        for (r, &i) in theta_idx.iter().enumerate() {
            for (c, &j) in theta_idx.iter().enumerate() {
                jac[(r, c)] = if i == j {
                    -q_calc[i] - b_mat[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    vm[i] * vm[j] * (g_mat[(i, j)] * tij.sin() - b_mat[(i, j)] * tij.cos())
                };
            }
            for (c, &j) in vm_idx.iter().enumerate() {
                jac[(r, nt + c)] = if i == j {
                    p_calc[i] / vm[i] + g_mat[(i, i)] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    vm[i] * (g_mat[(i, j)] * tij.cos() + b_mat[(i, j)] * tij.sin())
                };
            }
        }
        for (r, &i) in vm_idx.iter().enumerate() {
            for (c, &j) in theta_idx.iter().enumerate() {
                jac[(nt + r, c)] = if i == j {
                    p_calc[i] - g_mat[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    -vm[i] * vm[j] * (g_mat[(i, j)] * tij.cos() + b_mat[(i, j)] * tij.sin())
                };
            }
            for (c, &j) in vm_idx.iter().enumerate() {
                jac[(nt + r, nt + c)] = if i == j {
                    q_calc[i] / vm[i] - b_mat[(i, i)] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    vm[i] * (g_mat[(i, j)] * tij.sin() - b_mat[(i, j)] * tij.cos())
                };
            }
        }

        let step = jac.lu().solve(&mismatch).ok_or({
            PowerFlowError::NonConvergence {
                iterations,
                mismatch: inf_norm,
            }
        })?;
        for (r, &i) in theta_idx.iter().enumerate() {
            th[i] += step[r];
        }
        for (r, &i) in vm_idx.iter().enumerate() {
            vm[i] += step[theta_idx.len() + r];
        }
        iterations += 1;
    }

    for (i, b) in case.buses.iter().enumerate() {
        if vm[i] < 0.5 {
            return Err(PowerFlowError::LowVoltage {
                bus: b.id,
                magnitude: vm[i],
            });
        }
    }

    let bus_voltages: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(vm[i], th[i]))
        .collect();

    // Generator internals: EMF behind transient reactance carrying the bus
    // injection plus any co-located load demand.
    let (p_calc, q_calc) = calc_pq(&vm, &th);
    let mut gen_emf_mag = Vec::with_capacity(case.generators.len());
    let mut gen_delta = Vec::with_capacity(case.generators.len());
    let mut gen_pe = Vec::with_capacity(case.generators.len());
    for gen in &case.generators {
        let i = case.bus_index(gen.bus).expect("validated");
        let mut s = Complex64::new(p_calc[i], q_calc[i]);
        if let Some(l) = case.loads.iter().find(|l| l.bus == gen.bus) {
            s += Complex64::new(l.p_s, l.q_s);
        }
        let v = bus_voltages[i];
        let current = (s / v).conj();
        let emf = v + Complex64::new(0.0, gen.transient_reactance) * current;
        gen_emf_mag.push(emf.norm());
        gen_delta.push(emf.arg());
        gen_pe.push((emf * current.conj()).re);
    }

    let mut load_g = Vec::with_capacity(case.loads.len());
    let mut load_b = Vec::with_capacity(case.loads.len());
    for l in &case.loads {
        let i = case.bus_index(l.bus).expect("validated");
        let v2 = vm[i] * vm[i];
        load_g.push(l.p_s / v2);
        load_b.push(l.q_s / v2);
    }

    Ok(OperatingPoint {
        bus_voltages,
        gen_emf_mag,
        gen_delta,
        gen_electrical_power: gen_pe,
        load_g,
        load_b,
        iterations,
    })
}
