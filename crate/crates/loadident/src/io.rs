//! PMU CSV interchange and JSON sidecar / result serialization.
//!
//! CSV layout: one row per sample with columns `t`, then `V<bus>_re`,
//! `V<bus>_im` for every bus, then `I<bus>_re`, `I<bus>_im` for every load
//! bus; header row mandatory.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridsim::PhasorWindow;
use crate::ou::LoadBlockSpec;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed PMU csv: {0}")]
    Format(String),
}

/// JSON sidecar describing a PMU CSV: sampling, provenance and optional truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub truth: Option<LoadBlockSpec>,
    #[serde(default)]
    pub events: Vec<SidecarEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarEvent {
    pub t: f64,
    pub parameter: String,
    pub value: f64,
}

pub fn write_pmu_csv<W: Write>(w: &mut W, window: &PhasorWindow) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for &b in &window.bus_ids {
        header.push(format!("V{b}_re"));
        header.push(format!("V{b}_im"));
    }
    for &b in &window.load_bus_ids {
        header.push(format!("I{b}_re"));
        header.push(format!("I{b}_im"));
    }
    wtr.write_record(&header)?;
    let n = window.n_samples();
    for i in 0..n {
        let mut row = Vec::with_capacity(header.len());
        row.push(format!("{:.6}", window.start + i as f64 * window.dt));
        for bi in 0..window.bus_ids.len() {
            let v = window.voltages[(bi, i)];
            row.push(format!("{:.17e}", v.re));
            row.push(format!("{:.17e}", v.im));
        }
        for k in 0..window.load_bus_ids.len() {
            let c = window.currents[(k, i)];
            row.push(format!("{:.17e}", c.re));
            row.push(format!("{:.17e}", c.im));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_pmu_csv<R: Read>(r: R, sidecar: Option<&Sidecar>) -> Result<PhasorWindow, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(IoError::Format("first column must be t".into()));
    }
    let mut bus_ids = Vec::new();
    let mut load_bus_ids = Vec::new();
    for field in header.iter().skip(1) {
        let (prefix, rest) = field.split_at(1);
        if let Some(id_str) = rest.strip_suffix("_re") {
            let id: usize = id_str
                .parse()
                .map_err(|_| IoError::Format(format!("bad column name {field}")))?;
            match prefix {
                "V" => bus_ids.push(id),
                "I" => load_bus_ids.push(id),
                _ => return Err(IoError::Format(format!("bad column name {field}"))),
            }
        } else if !rest.ends_with("_im") {
            return Err(IoError::Format(format!("bad column name {field}")));
        }
    }
    let n_bus = bus_ids.len();
    let m = load_bus_ids.len();

    let mut times = Vec::new();
    let mut volt_rows: Vec<Vec<Complex64>> = Vec::new();
    let mut cur_rows: Vec<Vec<Complex64>> = Vec::new();
    for record in rdr.records() {
        let rec = record?;
        let expected = 1 + 2 * (n_bus + m);
        if rec.len() != expected {
            return Err(IoError::Format(format!(
                "row has {} fields, expected {expected}",
                rec.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, IoError> {
            s.parse()
                .map_err(|_| IoError::Format(format!("bad number {s}")))
        };
        times.push(parse(&rec[0])?);
        let mut vs = Vec::with_capacity(n_bus);
        for b in 0..n_bus {
            vs.push(Complex64::new(
                parse(&rec[1 + 2 * b])?,
                parse(&rec[2 + 2 * b])?,
            ));
        }
        let base = 1 + 2 * n_bus;
        let mut cs = Vec::with_capacity(m);
        for k in 0..m {
            cs.push(Complex64::new(
                parse(&rec[base + 2 * k])?,
                parse(&rec[base + 2 * k + 1])?,
            ));
        }
        volt_rows.push(vs);
        cur_rows.push(cs);
    }
    let n = times.len();
    if n < 2 {
        return Err(IoError::Format("need at least 2 samples".into()));
    }
    let dt = match sidecar {
        Some(sc) => sc.dt,
        None => times[1] - times[0],
    };
    Ok(PhasorWindow {
        dt,
        start: times[0],
        bus_ids,
        load_bus_ids,
        voltages: DMatrix::from_fn(n_bus, n, |i, j| volt_rows[j][i]),
        currents: DMatrix::from_fn(m, n, |i, j| cur_rows[j][i]),
        truth: sidecar.and_then(|sc| sc.truth.clone()),
    })
}

pub fn write_sidecar<W: Write>(w: &mut W, sidecar: &Sidecar) -> Result<(), IoError> {
    serde_json::to_writer_pretty(w, sidecar)?;
    Ok(())
}

pub fn read_sidecar<R: Read>(r: R) -> Result<Sidecar, IoError> {
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_window() -> PhasorWindow {
        PhasorWindow {
            dt: 0.02,
            start: 0.0,
            bus_ids: vec![1, 2],
            load_bus_ids: vec![2],
            voltages: DMatrix::from_fn(2, 3, |i, j| {
                Complex64::new(1.0 + i as f64 * 0.1, 0.01 * j as f64)
            }),
            currents: DMatrix::from_fn(1, 3, |_, j| Complex64::new(0.5, -0.1 * j as f64)),
            truth: None,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let w = sample_window();
        let mut buf = Vec::new();
        write_pmu_csv(&mut buf, &w).unwrap();
        let back = read_pmu_csv(&buf[..], None).unwrap();
        assert_eq!(back.bus_ids, w.bus_ids);
        assert_eq!(back.load_bus_ids, w.load_bus_ids);
        assert!((back.dt - w.dt).abs() < 1e-12);
        assert_eq!(back.voltages, w.voltages);
        assert_eq!(back.currents, w.currents);
    }

    #[test]
    fn header_is_first_row() {
        let mut buf = Vec::new();
        write_pmu_csv(&mut buf, &sample_window()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "t,V1_re,V1_im,V2_re,V2_im,I2_re,I2_im");
    }

    #[test]
    fn bad_header_rejected() {
        let data = "x,V1_re,V1_im\n0,1,0\n";
        assert!(matches!(
            read_pmu_csv(data.as_bytes(), None),
            Err(IoError::Format(_))
        ));
    }

    #[test]
    fn sidecar_roundtrip() {
        let sc = Sidecar {
            schema: "pmu-sidecar-v1".into(),
            dt: 0.02,
            seed: 42,
            truth: Some(LoadBlockSpec::benchmark_ten_loads()),
            events: vec![SidecarEvent {
                t: 400.0,
                parameter: "tau_g1".into(),
                value: 0.12,
            }],
        };
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &sc).unwrap();
        let back = read_sidecar(&buf[..]).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.events.len(), 1);
        assert!(back.truth.is_some());
    }
}
