//! Recursive tracking of a load parameter change.
//!
//! The first load's tau_g steps from 0.10 to 0.12 at t = 400 s. A recursive
//! estimator seeded from the first 300 s then updates once per sample with
//! exponential forgetting, and the tracked tau_g1 is printed every 20 s so
//! the convergence toward the new value is visible.

use loadident::estimator::{phasors_to_states, StateSeries};
use loadident::online::RecursiveState;
use loadident::ou::LoadBlockSpec;
use loadident::synth::ou_phasor_window_segments;
use nalgebra::DVector;

fn main() {
    let dt = 0.02;
    let spec = LoadBlockSpec::benchmark_ten_loads();
    let mut stepped = spec.clone();
    stepped.tau_g[0] = 0.12;

    let w = ou_phasor_window_segments(&[(400.0, spec), (400.0, stepped)], dt, 11).unwrap();
    let s = phasors_to_states(&w).unwrap();

    let init_n = (300.0 / dt) as usize + 1;
    let init = StateSeries {
        dt,
        x: s.x.columns(0, init_n).into_owned(),
        v_bar: s.v_bar.clone(),
    };
    let mut state = RecursiveState::init(&init, 10, None).unwrap();
    println!("smoothing alpha = {:.2e} (1/n of the init window)", state.alpha());
    println!("{:>8} {:>12} {:>10}", "t s", "tau_g1_hat", "err vs 0.12 %");

    let v = DVector::from_element(s.n_loads(), 1.0);
    for j in init_n..s.n_samples() {
        state.update(&s.x.column(j).into_owned(), &v).unwrap();
        let t = j as f64 * dt;
        if (t / dt).round() as usize % 1000 == 0 {
            let est = state.current_estimate().unwrap();
            let tau = est.tau_g_hat[0].value;
            println!("{t:>8.0} {tau:>12.5} {:>10.2}", 100.0 * (tau - 0.12) / 0.12);
        }
    }
}
