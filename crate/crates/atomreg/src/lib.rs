//! Simulation of a string of single trapped two-level atoms addressed in a
//! magnetic field gradient with shaped microwave pulses.
//!
//! The crate is organized around the experiment it models:
//!
//! - [`fieldmap`] maps atom positions to transition-frequency shifts in the
//!   combined offset/gradient field.
//! - [`bloch`] integrates rotating-frame two-level dynamics under square and
//!   Gaussian pulse envelopes and produces propagators, population-transfer
//!   spectra, and spectator phase shifts.
//! - [`register`] holds the N-atom product-state register with optical-pumping
//!   initialization, gradient-addressed single-qubit pulses, and push-out
//!   readout with a classical detection-error channel.
//! - [`dephasing`] runs the Monte-Carlo spin-echo model of contrast decay from
//!   thermal radial motion through the field curvature.
//! - [`pulseprog`] parses a small line-oriented pulse-program language and
//!   compiles it into a timed schedule with a per-atom crosstalk phase ledger.
//! - [`config`] and [`output`] carry the TOML run configuration and the CSV /
//!   JSON emitters used by the `atomreg` command-line binary.
//!
//! Canonical units throughout: gauss, micrometer, microsecond, and kilohertz
//! (linear frequency). Conversions from configuration-file units happen once
//! at parse time.

pub mod bloch;
pub mod config;
pub mod dephasing;
pub mod fieldmap;
pub mod output;
pub mod pulseprog;
pub mod register;
pub mod seeding;

pub use bloch::{
    calibrate_pi_pulse, calibrate_pulse_area, propagate, spectator_phase, transfer_spectrum,
    Detuning, EnvelopeKind, PulseShape, TwoLevelState, TwoLevelUnitary,
};
pub use config::RunConfig;
pub use dephasing::{echo_contrast, sample_trial, trial_detuning_hz, EchoTrialSample, ThermalConfig};
pub use fieldmap::{AtomGeometry, FieldConfig};
pub use register::{DetectionModel, RegisterState};
