//! Idealized PMU windows sampled directly from the load OU model.
//!
//! Voltages are held at their mean values and the load states evolve by exact
//! OU discretization, bypassing the network. This is the benchmark path for
//! estimator studies where the diagonal model is the ground truth by
//! construction; `gridsim` provides the full network-coupled alternative.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gridsim::PhasorWindow;
use crate::ou::{build_load_ou_model, LoadBlockSpec, OuError, OuSampler};

/// Stationary window of `duration / dt + 1` samples from a single spec.
pub fn ou_phasor_window(
    spec: &LoadBlockSpec,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<PhasorWindow, OuError> {
    ou_phasor_window_segments(&[(duration, spec.clone())], dt, seed)
}

/// Piecewise-stationary window: each segment runs its spec for the given
/// duration, carrying the load state across the boundary (a parameter step
/// change). The truth tag records the final segment's parameters.
pub fn ou_phasor_window_segments(
    segments: &[(f64, LoadBlockSpec)],
    dt: f64,
    seed: u64,
) -> Result<PhasorWindow, OuError> {
    assert!(!segments.is_empty(), "need at least one segment");
    assert!(dt > 0.0, "dt must be positive");
    let m = segments[0].1.m();
    let total_steps: usize = segments
        .iter()
        .map(|(d, _)| (d / dt).round() as usize)
        .sum();
    let n = total_steps + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut voltages = DMatrix::<Complex64>::zeros(m, n);
    let mut currents = DMatrix::<Complex64>::zeros(m, n);

    let first_model = build_load_ou_model(&segments[0].1)?;
    let mut sampler = OuSampler::stationary(&first_model, dt, &mut rng)?;

    let mut col = 0usize;
    let record = |col: usize, spec: &LoadBlockSpec, state: &nalgebra::DVector<f64>,
                      voltages: &mut DMatrix<Complex64>,
                      currents: &mut DMatrix<Complex64>| {
        for k in 0..m {
            let v = Complex64::new(spec.v_bar[k], 0.0);
            // States fluctuate around the equilibrium admittance.
            let g = spec.p_s[k] / (spec.v_bar[k] * spec.v_bar[k]) + state[k];
            let b = spec.q_s[k] / (spec.v_bar[k] * spec.v_bar[k]) + state[m + k];
            voltages[(k, col)] = v;
            currents[(k, col)] = Complex64::new(g, b) * v;
        }
    };

    record(col, &segments[0].1, sampler.state(), &mut voltages, &mut currents);
    for (si, (dur, spec)) in segments.iter().enumerate() {
        assert_eq!(spec.m(), m, "all segments must have the same load count");
        if si > 0 {
            let model = build_load_ou_model(spec)?;
            sampler = OuSampler::from_state(&model, dt, sampler.state().clone())?;
        }
        let steps = (dur / dt).round() as usize;
        for _ in 0..steps {
            sampler.step(&mut rng);
            col += 1;
            record(col, spec, sampler.state(), &mut voltages, &mut currents);
        }
    }

    Ok(PhasorWindow {
        dt,
        start: 0.0,
        bus_ids: (1..=m).collect(),
        load_bus_ids: (1..=m).collect(),
        voltages,
        currents,
        truth: Some(segments.last().unwrap().1.clone()),
    })
}
