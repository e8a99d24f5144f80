//! Estimation accuracy versus PMU window length.
//!
//! Samples one long benchmark trajectory per seed and estimates from its
//! first 100..500 s, printing the ensemble-median normalized Frobenius drift
//! error per window length. Error falls roughly as 1/sqrt(T).

use loadident::estimator::estimate_from_window;
use loadident::gridsim::PhasorWindow;
use loadident::ou::LoadBlockSpec;
use loadident::synth::ou_phasor_window;

fn truncate(w: &PhasorWindow, seconds: f64) -> PhasorWindow {
    let n = (seconds / w.dt).round() as usize + 1;
    let mut out = w.clone();
    out.voltages = w.voltages.columns(0, n).into_owned();
    out.currents = w.currents.columns(0, n).into_owned();
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    0.5 * (v[(v.len() - 1) / 2] + v[v.len() / 2])
}

fn main() {
    let spec = LoadBlockSpec::benchmark_ten_loads();
    let seeds: Vec<u64> = (0..7).collect();
    let windows: Vec<_> = seeds
        .iter()
        .map(|&s| ou_phasor_window(&spec, 500.0, 0.02, s).unwrap())
        .collect();

    println!("{:>10} {:>24}", "window s", "median Frobenius error");
    for len in [100.0, 200.0, 300.0, 400.0, 500.0] {
        let errs: Vec<f64> = windows
            .iter()
            .map(|w| {
                estimate_from_window(&truncate(w, len), 10)
                    .unwrap()
                    .errors_vs_truth
                    .unwrap()
                    .normalized_frobenius
            })
            .collect();
        println!("{:>10.0} {:>24.4}", len, median(errs));
    }
}
