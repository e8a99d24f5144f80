//! Experiment manifest: case path, simulation settings, noise, estimator
//! settings and scenario events, plus the run provenance record.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridsim::{GridCase, LoadField, ScenarioEvent, SimConfig};
use crate::noise::NoiseSpec;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("unknown parameter name '{0}' (expected e.g. tau_g1, sigma_p2)")]
    UnknownParameter(String),
    #[error("parameter '{0}' refers to load {1} but the case has {2} loads")]
    LoadOutOfRange(String, usize, usize),
    #[error("event at t = {0} s is outside the simulation horizon of {1} s")]
    EventOutsideHorizon(f64, f64),
    #[error("bad event syntax '{0}', expected t:param:value")]
    BadEventSyntax(String),
}

/// Estimator settings carried by a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub kappa: usize,
    /// Batch window / online init window, seconds.
    pub window: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// A named mid-run parameter change, e.g. `tau_g1 -> 0.12 at t = 400`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEvent {
    pub t: f64,
    pub parameter: String,
    pub value: f64,
}

impl ManifestEvent {
    /// Parses the CLI `t:param:value` form.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(ManifestError::BadEventSyntax(text.into()));
        }
        let t = parts[0]
            .parse()
            .map_err(|_| ManifestError::BadEventSyntax(text.into()))?;
        let value = parts[2]
            .parse()
            .map_err(|_| ManifestError::BadEventSyntax(text.into()))?;
        Ok(ManifestEvent {
            t,
            parameter: parts[1].to_string(),
            value,
        })
    }

    /// Resolves the parameter name against a case's load list.
    ///
    /// Names are `<field><one-based load index>` with field one of tau_g,
    /// tau_b, p_s, q_s, sigma_p, sigma_q.
    pub fn resolve(&self, case: &GridCase) -> Result<ScenarioEvent, ManifestError> {
        let (field, index) = parse_parameter(&self.parameter)
            .ok_or_else(|| ManifestError::UnknownParameter(self.parameter.clone()))?;
        if index == 0 || index > case.loads.len() {
            return Err(ManifestError::LoadOutOfRange(
                self.parameter.clone(),
                index,
                case.loads.len(),
            ));
        }
        Ok(ScenarioEvent {
            t: self.t,
            load: index - 1,
            field,
            value: self.value,
        })
    }
}

fn parse_parameter(name: &str) -> Option<(LoadField, usize)> {
    for (prefix, field) in [
        ("tau_g", LoadField::TauG),
        ("tau_b", LoadField::TauB),
        ("p_s", LoadField::PS),
        ("q_s", LoadField::QS),
        ("sigma_p", LoadField::SigmaP),
        ("sigma_q", LoadField::SigmaQ),
    ] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Ok(idx) = rest.parse::<usize>() {
                return Some((field, idx));
            }
        }
    }
    None
}

/// Full description of a reproducible experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub case_path: String,
    pub sim: SimConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub estimator: EstimatorSettings,
    #[serde(default)]
    pub events: Vec<ManifestEvent>,
    pub out_dir: String,
}

impl ExperimentManifest {
    /// Validates events against the case and horizon and resolves them.
    pub fn resolve_events(&self, case: &GridCase) -> Result<Vec<ScenarioEvent>, ManifestError> {
        self.events
            .iter()
            .map(|ev| {
                if ev.t < 0.0 || ev.t > self.sim.duration {
                    return Err(ManifestError::EventOutsideHorizon(ev.t, self.sim.duration));
                }
                ev.resolve(case)
            })
            .collect()
    }
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest_sha256: String,
    pub seed: u64,
    pub tool_version: String,
}

impl RunRecord {
    pub fn new(manifest: &ExperimentManifest) -> Self {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(manifest).expect("manifest serializes");
        let hash = Sha256::digest(&json);
        RunRecord {
            manifest_sha256: hex::encode(hash),
            seed: manifest.sim.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::load_case;

    fn case() -> GridCase {
        load_case(include_str!("../cases/twelve_bus.json")).unwrap()
    }

    #[test]
    fn parse_event_syntax() {
        let ev = ManifestEvent::parse("400:tau_g1:0.12").unwrap();
        assert_eq!(ev.t, 400.0);
        assert_eq!(ev.parameter, "tau_g1");
        assert_eq!(ev.value, 0.12);
        assert!(ManifestEvent::parse("nope").is_err());
    }

    #[test]
    fn resolve_parameter_names() {
        let c = case();
        let ev = ManifestEvent::parse("400:tau_g1:0.12").unwrap();
        let r = ev.resolve(&c).unwrap();
        assert_eq!(r.load, 0);
        assert_eq!(r.field, LoadField::TauG);

        let ev = ManifestEvent::parse("10:sigma_q4:0.2").unwrap();
        let r = ev.resolve(&c).unwrap();
        assert_eq!(r.load, 3);
        assert_eq!(r.field, LoadField::SigmaQ);
    }

    #[test]
    fn unknown_or_out_of_range_rejected() {
        let c = case();
        assert!(matches!(
            ManifestEvent::parse("1:tau_x1:2").unwrap().resolve(&c),
            Err(ManifestError::UnknownParameter(_))
        ));
        assert!(matches!(
            ManifestEvent::parse("1:tau_g9:2").unwrap().resolve(&c),
            Err(ManifestError::LoadOutOfRange(..))
        ));
    }

    #[test]
    fn event_outside_horizon_rejected() {
        let c = case();
        let manifest = ExperimentManifest {
            case_path: "cases/twelve_bus.json".into(),
            sim: SimConfig::new(100.0, 7),
            noise: None,
            estimator: EstimatorSettings {
                kappa: 10,
                window: 50.0,
                alpha: None,
            },
            events: vec![ManifestEvent::parse("400:tau_g1:0.12").unwrap()],
            out_dir: "out".into(),
        };
        assert!(matches!(
            manifest.resolve_events(&c),
            Err(ManifestError::EventOutsideHorizon(..))
        ));
    }

    #[test]
    fn run_record_is_stable() {
        let manifest = ExperimentManifest {
            case_path: "cases/twelve_bus.json".into(),
            sim: SimConfig::new(100.0, 7),
            noise: None,
            estimator: EstimatorSettings {
                kappa: 10,
                window: 50.0,
                alpha: None,
            },
            events: vec![],
            out_dir: "out".into(),
        };
        let a = RunRecord::new(&manifest);
        let b = RunRecord::new(&manifest);
        assert_eq!(a.manifest_sha256, b.manifest_sha256);
        assert_eq!(a.seed, 7);
    }
}
