//! Experiment front end: simulate PMU data, run the batch estimator, or
//! stream the recursive estimator over a recorded window.
//!
//! Exit codes: 0 success, 1 runtime error, 2 validation error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use loadident::estimator::{
    error_report, estimate_drift, extract_time_constants, load_voltage_magnitudes,
    phasors_to_states, sample_stats, EstimationResult, StateSeries,
};
use loadident::gridsim::{load_case, simulate_with_events, SimConfig};
use loadident::io::{
    read_pmu_csv, read_sidecar, write_pmu_csv, write_sidecar, Sidecar, SidecarEvent,
};
use loadident::manifest::{
    EstimatorSettings, ExperimentManifest, ManifestEvent, RunRecord,
};
use loadident::noise::{add_measurement_noise, NoiseSpec};
use loadident::online::RecursiveState;
use loadident::ou::LoadBlockSpec;

#[derive(Parser)]
#[command(name = "loadident", version, about = "Ambient-PMU dynamic load parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a grid case and write PMU CSV + truth sidecar.
    Simulate(SimulateArgs),
    /// Batch-estimate load time constants from a PMU CSV.
    Estimate(EstimateArgs),
    /// Stream the recursive estimator over a PMU CSV (file or '-' for stdin).
    Stream(StreamArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Grid case JSON (gridcase-v1).
    #[arg(long)]
    case: PathBuf,
    /// Simulation horizon, seconds.
    #[arg(long)]
    duration: f64,
    /// Integration step, seconds.
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    /// PMU sample period, seconds (integer multiple of --dt).
    #[arg(long, default_value_t = 0.02)]
    dt_pmu: f64,
    #[arg(long)]
    seed: u64,
    /// Override every load's sigma_p and sigma_q.
    #[arg(long)]
    sigma: Option<f64>,
    /// Mid-run step change, t:param:value (e.g. 400:tau_g1:0.12); repeatable.
    #[arg(long = "event")]
    events: Vec<String>,
    /// Output directory for pmu.csv, pmu.json and run.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// PMU CSV path.
    #[arg(long = "in")]
    input: PathBuf,
    /// Sidecar JSON path (defaults to <input stem>.json when present).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Lag in samples.
    #[arg(long, default_value_t = 10)]
    kappa: usize,
    /// Ground-truth JSON (sidecar or bare load-parameter document).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Window sweep a:b:step in seconds; emits an error-vs-length CSV.
    #[arg(long)]
    sweep: Option<String>,
    /// Measurement noise frac:vsigma:seed applied before estimation.
    #[arg(long)]
    noise: Option<String>,
    /// Where to write the result JSON (default <input stem>.result.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    /// PMU CSV path, or '-' to read from stdin.
    #[arg(long = "in")]
    input: String,
    /// Sidecar JSON path.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Initialization window, seconds.
    #[arg(long)]
    init: f64,
    #[arg(long, default_value_t = 10)]
    kappa: usize,
    /// Smoothing parameter; defaults to 1/n of the init window.
    #[arg(long)]
    alpha: Option<f64>,
    /// Report period, seconds of stream time.
    #[arg(long, default_value_t = 1.0)]
    report: f64,
}

/// Errors that should exit with code 2 (validation) rather than 1 (runtime).
fn is_validation(err: &anyhow::Error) -> bool {
    use loadident::gridsim::{CaseError, SimError};
    use loadident::manifest::ManifestError;
    err.chain().any(|c| {
        c.downcast_ref::<ManifestError>().is_some()
            || c.downcast_ref::<CaseError>().is_some()
            || matches!(c.downcast_ref::<SimError>(), Some(SimError::InvalidConfig(_)))
            || c.downcast_ref::<clap::Error>().is_some()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Stream(args) => cmd_stream(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_validation(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let case_text = fs::read_to_string(&args.case)
        .with_context(|| format!("reading case {}", args.case.display()))?;
    let case = load_case(&case_text)?;

    let events: Vec<ManifestEvent> = args
        .events
        .iter()
        .map(|e| ManifestEvent::parse(e))
        .collect::<Result<_, _>>()?;

    let sim = SimConfig {
        duration: args.duration,
        step: args.dt,
        dt_pmu: args.dt_pmu,
        seed: args.seed,
        sigma_override: args.sigma,
        omega_bound: 20.0,
    };
    let manifest = ExperimentManifest {
        case_path: args.case.display().to_string(),
        sim: sim.clone(),
        noise: None,
        estimator: EstimatorSettings {
            kappa: 10,
            window: args.duration,
            alpha: None,
        },
        events: events.clone(),
        out_dir: args.out.display().to_string(),
    };
    let resolved = manifest.resolve_events(&case)?;

    let window = simulate_with_events(&case, &sim, &resolved)?;

    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("pmu.csv");
    let mut csv_file = BufWriter::new(File::create(&csv_path)?);
    write_pmu_csv(&mut csv_file, &window)?;
    csv_file.flush()?;

    let sidecar = Sidecar {
        schema: "pmu-sidecar-v1".into(),
        dt: sim.dt_pmu,
        seed: sim.seed,
        truth: window.truth.clone(),
        events: events
            .iter()
            .map(|e| SidecarEvent {
                t: e.t,
                parameter: e.parameter.clone(),
                value: e.value,
            })
            .collect(),
    };
    let mut sc_file = BufWriter::new(File::create(args.out.join("pmu.json"))?);
    write_sidecar(&mut sc_file, &sidecar)?;
    sc_file.flush()?;

    let record = RunRecord::new(&manifest);
    fs::write(
        args.out.join("run.json"),
        serde_json::to_string_pretty(&record)?,
    )?;

    println!(
        "wrote {} samples x {} buses to {}",
        window.n_samples(),
        window.bus_ids.len(),
        csv_path.display()
    );
    Ok(())
}

fn read_truth(path: &Path) -> Result<LoadBlockSpec> {
    let text = fs::read_to_string(path)?;
    if let Ok(sc) = serde_json::from_str::<Sidecar>(&text) {
        if let Some(t) = sc.truth {
            return Ok(t);
        }
    }
    serde_json::from_str(&text).with_context(|| format!("parsing truth {}", path.display()))
}

fn default_sidecar(input: &Path) -> Option<PathBuf> {
    let candidate = input.with_extension("json");
    candidate.exists().then_some(candidate)
}

fn parse_noise(text: &str) -> Result<NoiseSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("bad --noise '{text}', expected frac:vsigma:seed");
    }
    Ok(NoiseSpec {
        state_noise_fraction: parts[0].parse()?,
        voltage_sigma: parts[1].parse()?,
        seed: parts[2].parse()?,
    })
}

fn estimate_states(
    states: &StateSeries,
    kappa: usize,
    truth: Option<&LoadBlockSpec>,
) -> Result<EstimationResult> {
    let stats = sample_stats(states, kappa)?;
    let drift = estimate_drift(&stats, stats.lag_seconds())?;
    let mut result = extract_time_constants(&drift, &states.v_bar);
    if let Some(t) = truth {
        result.errors_vs_truth = Some(error_report(&result, t)?);
    }
    Ok(result)
}

fn print_table(result: &EstimationResult, truth: Option<&LoadBlockSpec>) {
    let m = result.tau_g_hat.len();
    match truth {
        Some(t) => {
            println!(
                "{:<14} {:>14} {:>20} {:>12}",
                "Time constant", "Real value (s)", "Estimated value (s)", "Error"
            );
            for k in 0..m {
                let est = &result.tau_g_hat[k];
                let err = (est.value - t.tau_g[k]) / t.tau_g[k] * 100.0;
                println!(
                    "{:<14} {:>14.4} {:>20.4} {:>11.4}%{}",
                    format!("tau_g{}", k + 1),
                    t.tau_g[k],
                    est.value,
                    err,
                    if est.physical { "" } else { "  [non-physical]" }
                );
            }
            for k in 0..m {
                let est = &result.tau_b_hat[k];
                let err = (est.value - t.tau_b[k]) / t.tau_b[k] * 100.0;
                println!(
                    "{:<14} {:>14.4} {:>20.4} {:>11.4}%{}",
                    format!("tau_b{}", k + 1),
                    t.tau_b[k],
                    est.value,
                    err,
                    if est.physical { "" } else { "  [non-physical]" }
                );
            }
        }
        None => {
            println!("{:<14} {:>20}", "Time constant", "Estimated value (s)");
            for k in 0..m {
                println!(
                    "{:<14} {:>20.4}{}",
                    format!("tau_g{}", k + 1),
                    result.tau_g_hat[k].value,
                    if result.tau_g_hat[k].physical { "" } else { "  [non-physical]" }
                );
            }
            for k in 0..m {
                println!(
                    "{:<14} {:>20.4}{}",
                    format!("tau_b{}", k + 1),
                    result.tau_b_hat[k].value,
                    if result.tau_b_hat[k].physical { "" } else { "  [non-physical]" }
                );
            }
        }
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let sidecar = match args.sidecar.clone().or_else(|| default_sidecar(&args.input)) {
        Some(p) => Some(read_sidecar(BufReader::new(File::open(&p)?))?),
        None => None,
    };
    let window = read_pmu_csv(
        BufReader::new(File::open(&args.input)?),
        sidecar.as_ref(),
    )?;
    let truth = match &args.truth {
        Some(p) => Some(read_truth(p)?),
        None => window.truth.clone(),
    };

    let mut states = phasors_to_states(&window)?;
    if let Some(spec_text) = &args.noise {
        let spec = parse_noise(spec_text)?;
        let v_series = load_voltage_magnitudes(&window);
        let (noisy, _) = add_measurement_noise(&states, &v_series, &spec);
        states = noisy;
    }

    if let Some(sweep) = &args.sweep {
        let parts: Vec<&str> = sweep.split(':').collect();
        if parts.len() != 3 {
            bail!("bad --sweep '{sweep}', expected a:b:step in seconds");
        }
        let (a, b, step): (f64, f64, f64) = (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        let truth = truth
            .as_ref()
            .context("--sweep needs ground truth (sidecar or --truth)")?;
        println!("window_s,normalized_frobenius,median_abs_rel_error");
        let mut w = a;
        while w <= b + 1e-9 {
            let n_w = ((w / states.dt).round() as usize).min(states.n_samples());
            let sub = StateSeries {
                dt: states.dt,
                x: states.x.columns(0, n_w).into_owned(),
                v_bar: states.v_bar.clone(),
            };
            let result = estimate_states(&sub, args.kappa, Some(truth))?;
            let report = result.errors_vs_truth.as_ref().unwrap();
            let mut abs: Vec<f64> = report
                .tau_g_rel_errors
                .iter()
                .chain(&report.tau_b_rel_errors)
                .map(|e| e.abs())
                .collect();
            abs.sort_by(f64::total_cmp);
            let median = abs[abs.len() / 2];
            println!("{w},{},{}", report.normalized_frobenius, median);
            w += step;
        }
        return Ok(());
    }

    let result = estimate_states(&states, args.kappa, truth.as_ref())?;
    print_table(&result, truth.as_ref());

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.with_extension("result.json"));
    fs::write(&out_path, serde_json::to_string_pretty(&result)?)?;
    println!("result written to {}", out_path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct StreamReport<'a> {
    t: f64,
    tau_g_hat: Vec<f64>,
    tau_b_hat: Vec<f64>,
    diagnostics: &'a loadident::estimator::Diagnostics,
}

fn cmd_stream(args: StreamArgs) -> Result<()> {
    let sidecar = match &args.sidecar {
        Some(p) => Some(read_sidecar(BufReader::new(File::open(p)?))?),
        None => {
            if args.input != "-" {
                match default_sidecar(Path::new(&args.input)) {
                    Some(p) => Some(read_sidecar(BufReader::new(File::open(&p)?))?),
                    None => None,
                }
            } else {
                None
            }
        }
    };
    let window = if args.input == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        read_pmu_csv(&buf[..], sidecar.as_ref())?
    } else {
        read_pmu_csv(
            BufReader::new(File::open(&args.input)?),
            sidecar.as_ref(),
        )?
    };

    let states = phasors_to_states(&window)?;
    let v_series = load_voltage_magnitudes(&window);
    let n = states.n_samples();
    let n_init = (args.init / states.dt).round() as usize;
    if n_init + args.kappa + 2 > n {
        bail!(
            "init window of {} samples leaves no stream data (total {n})",
            n_init
        );
    }
    let m = states.n_loads();

    let init_states = StateSeries {
        dt: states.dt,
        x: states.x.columns(0, n_init).into_owned(),
        v_bar: states.v_bar.clone(),
    };
    let mut state = RecursiveState::init(&init_states, args.kappa, args.alpha)?;

    let report_every = (args.report / states.dt).round().max(1.0) as usize;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut reports: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();

    for i in n_init..n {
        let x = states.x.column(i).into_owned();
        let v = DVector::from_iterator(m, v_series.iter().map(|row| row[i]));
        state.update(&x, &v)?;
        let is_last = i + 1 == n;
        if (i - n_init + 1) % report_every == 0 || is_last {
            let t = window.start + i as f64 * states.dt;
            match state.current_estimate() {
                Ok(est) => {
                    let report = StreamReport {
                        t,
                        tau_g_hat: est.tau_g_values(),
                        tau_b_hat: est.tau_b_values(),
                        diagnostics: &est.diagnostics,
                    };
                    serde_json::to_writer(&mut out, &report)?;
                    out.write_all(b"\n")?;
                    reports.push((t, est.tau_g_values(), est.tau_b_values()));
                }
                Err(err) => {
                    eprintln!("warning: estimate at t={t:.2}s failed: {err}");
                }
            }
        }
    }

    // Convergence summary versus scenario events in the sidecar.
    if let Some(sc) = &sidecar {
        for ev in &sc.events {
            let target = ev.value;
            let tau_at = |r: &(f64, Vec<f64>, Vec<f64>)| -> Option<f64> {
                let (prefix, idx) = if let Some(rest) = ev.parameter.strip_prefix("tau_g") {
                    ("g", rest.parse::<usize>().ok()?)
                } else if let Some(rest) = ev.parameter.strip_prefix("tau_b") {
                    ("b", rest.parse::<usize>().ok()?)
                } else {
                    return None;
                };
                let list = if prefix == "g" { &r.1 } else { &r.2 };
                list.get(idx - 1).copied()
            };
            // First report time after which every later report stays in the
            // 5% band around the new value.
            let mut converged_at = None;
            for (i, r) in reports.iter().enumerate() {
                if r.0 < ev.t {
                    continue;
                }
                let stays = reports[i..].iter().all(|r2| {
                    tau_at(r2)
                        .map(|v| ((v - target) / target).abs() <= 0.05)
                        .unwrap_or(false)
                });
                if stays {
                    converged_at = Some(r.0);
                    break;
                }
            }
            let summary = serde_json::json!({
                "summary": "convergence",
                "parameter": ev.parameter,
                "event_t": ev.t,
                "target": target,
                "converged_t": converged_at,
                "seconds_after_event": converged_at.map(|t| t - ev.t),
            });
            serde_json::to_writer(&mut out, &summary)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
