//! Ambient-PMU load parameter identification toolkit.
//!
//! Two halves:
//! - a stochastic dynamic grid simulator ([`gridsim`]) that integrates swing
//!   generators and first-order admittance loads under stochastic demand and
//!   emits synthetic PMU phasor streams, and
//! - estimators ([`estimator`], [`online`]) that recover the dynamic load
//!   time constants purely from those streams via the Ornstein-Uhlenbeck
//!   regression relation G(tau) = exp(A tau) C.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `loadident` binary for the `simulate` / `estimate` / `stream`
//! experiment front end.

pub mod estimator;
pub mod gridsim;
pub mod io;
pub mod manifest;
pub mod matfn;
pub mod noise;
pub mod online;
pub mod ou;
pub mod synth;

pub use estimator::{EstimationResult, StateSeries};
pub use gridsim::{GridCase, PhasorWindow, SimConfig};
pub use matfn::{matexp, matlog, MatFnError, MatLog};
pub use noise::NoiseSpec;
pub use online::RecursiveState;
pub use ou::{
    analytic_lag_autocorr, build_load_ou_model, stationary_covariance, LoadBlockSpec, OuError,
    OuModel, OuSampler,
};
