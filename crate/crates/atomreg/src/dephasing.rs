//! Monte-Carlo spin-echo dephasing from thermal radial motion in the
//! inhomogeneous field.
//!
//! Each trial draws initial radial displacements and velocities from the
//! Boltzmann distribution of the harmonic radial trap, evolves them as free
//! harmonic motion, and turns the motion into a time-varying detuning through
//! the quadratic field profile. An ideal pi/2 - pi - pi/2 echo then leaves
//! the phase difference between the two halves of the sequence,
//! `dphi = phi2 - phi1`, and the contrast is `|< exp(i dphi) >|` over trials.
//! A finite-pulse variant drives the same sequence with real propagators to
//! bound the instantaneous-pulse idealization.
//!
//! Trials derive their RNG stream from (seed, trial index), so results are
//! identical for any degree of parallelism.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64 as C64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bloch::{propagate_drive_frame, BlochError, Detuning, PulseShape, TwoLevelState};
use crate::fieldmap::FieldConfig;
use crate::seeding::stream_rng;

/// Caesium atom mass in kilograms.
pub const CS_MASS_KG: f64 = 2.20695e-25;
/// Boltzmann constant, J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Quadrature points per radial oscillation period for the echo phase
/// integrals.
const QUAD_STEPS_PER_PERIOD: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DephasingError {
    #[error("temperature must be positive, got {0} uK")]
    BadTemperature(f64),
    #[error("radial frequency must be positive, got {0} kHz")]
    BadRadialFrequency(f64),
    #[error("atom mass must be positive, got {0} kg")]
    BadMass(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("echo times must be positive and finite, got {0} us")]
    BadEchoTime(f64),
    #[error("quadrature step must be positive, got {0} us")]
    BadQuadStep(f64),
    #[error("pulse window {window_us} us exceeds half the echo time {echo_time_us} us")]
    PulseTooLong { window_us: f64, echo_time_us: f64 },
    #[error(transparent)]
    Pulse(#[from] BlochError),
}

/// Thermal ensemble parameters for the radial motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    temperature_uk: f64,
    radial_freq_khz: f64,
    atom_mass_kg: f64,
    trials: u64,
    seed: u64,
}

impl ThermalConfig {
    pub fn new(
        temperature_uk: f64,
        radial_freq_khz: f64,
        atom_mass_kg: f64,
        trials: u64,
        seed: u64,
    ) -> Result<Self, DephasingError> {
        if !temperature_uk.is_finite() || temperature_uk <= 0.0 {
            return Err(DephasingError::BadTemperature(temperature_uk));
        }
        if !radial_freq_khz.is_finite() || radial_freq_khz <= 0.0 {
            return Err(DephasingError::BadRadialFrequency(radial_freq_khz));
        }
        if !atom_mass_kg.is_finite() || atom_mass_kg <= 0.0 {
            return Err(DephasingError::BadMass(atom_mass_kg));
        }
        if trials == 0 {
            return Err(DephasingError::NoTrials);
        }
        Ok(Self {
            temperature_uk,
            radial_freq_khz,
            atom_mass_kg,
            trials,
            seed,
        })
    }

    /// 80 uK ensemble at 1.6 kHz radial frequency, 1e5 trials.
    pub fn paper_defaults() -> Self {
        Self::new(80.0, 1.6, CS_MASS_KG, 100_000, 1).expect("defaults are valid")
    }

    pub fn temperature_uk(&self) -> f64 {
        self.temperature_uk
    }

    pub fn radial_freq_khz(&self) -> f64 {
        self.radial_freq_khz
    }

    pub fn atom_mass_kg(&self) -> f64 {
        self.atom_mass_kg
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Angular radial frequency in rad/us.
    pub fn angular_freq_rad_per_us(&self) -> f64 {
        TAU * self.radial_freq_khz * 1.0e-3
    }

    /// Boltzmann position spread sqrt(kB T / m w^2) in micrometers.
    pub fn position_std_um(&self) -> f64 {
        let omega_si = TAU * self.radial_freq_khz * 1.0e3;
        let t_kelvin = self.temperature_uk * 1.0e-6;
        (BOLTZMANN_J_PER_K * t_kelvin / (self.atom_mass_kg * omega_si * omega_si)).sqrt() * 1.0e6
    }

    /// Boltzmann velocity spread sqrt(kB T / m); m/s equals um/us.
    pub fn velocity_std_um_per_us(&self) -> f64 {
        let t_kelvin = self.temperature_uk * 1.0e-6;
        (BOLTZMANN_J_PER_K * t_kelvin / self.atom_mass_kg).sqrt()
    }

    fn default_quad_step_us(&self) -> f64 {
        1.0e3 / (QUAD_STEPS_PER_PERIOD * self.radial_freq_khz)
    }
}

/// One thermal draw of initial radial displacements and velocities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoTrialSample {
    pub y0_um: f64,
    pub z0_um: f64,
    pub vy0_um_per_us: f64,
    pub vz0_um_per_us: f64,
}

/// Draws trial `index` of the thermal ensemble. Deterministic in
/// (seed, index).
pub fn sample_trial(cfg: &ThermalConfig, index: u64) -> EchoTrialSample {
    let mut rng = stream_rng(cfg.seed, index);
    let pos = Normal::new(0.0, cfg.position_std_um()).expect("positive std");
    let vel = Normal::new(0.0, cfg.velocity_std_um_per_us()).expect("positive std");
    EchoTrialSample {
        y0_um: pos.sample(&mut rng),
        z0_um: pos.sample(&mut rng),
        vy0_um_per_us: vel.sample(&mut rng),
        vz0_um_per_us: vel.sample(&mut rng),
    }
}

impl EchoTrialSample {
    /// Radial position (y, z) at time `t_us`, free harmonic motion.
    pub fn position_at(&self, cfg: &ThermalConfig, t_us: f64) -> (f64, f64) {
        let omega = cfg.angular_freq_rad_per_us();
        let (s, c) = (omega * t_us).sin_cos();
        (
            self.y0_um * c + self.vy0_um_per_us / omega * s,
            self.z0_um * c + self.vz0_um_per_us / omega * s,
        )
    }
}

/// Instantaneous detuning of the trial atom at `t_us`, in Hz, relative to the
/// displaced trap axis (the configured axis offsets alone). A frozen on-axis
/// atom therefore sits at zero detuning.
pub fn trial_detuning_hz(
    sample: &EchoTrialSample,
    thermal: &ThermalConfig,
    field: &FieldConfig,
    t_us: f64,
) -> f64 {
    let (y, z) = sample.position_at(thermal, t_us);
    let oy = field.axis_offset_y_um();
    let oz = field.axis_offset_z_um();
    field.radial_detuning_hz(y + oy, z + oz) - field.radial_detuning_hz(oy, oz)
}

/// One echo point: time, contrast, and the standard error of the complex
/// phasor mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoPoint {
    pub echo_time_us: f64,
    pub contrast: f64,
    pub std_error: f64,
}

fn validate_times(echo_times_us: &[f64]) -> Result<(), DephasingError> {
    match echo_times_us
        .iter()
        .find(|t| !t.is_finite() || **t <= 0.0)
    {
        Some(&bad) => Err(DephasingError::BadEchoTime(bad)),
        None => Ok(()),
    }
}

// Composite Simpson rule for the detuning phase 2 pi Int delta(t) dt over
// [a_us, b_us], result in radians. `step_us` bounds the subinterval width.
fn phase_integral_rad(
    sample: &EchoTrialSample,
    thermal: &ThermalConfig,
    field: &FieldConfig,
    a_us: f64,
    b_us: f64,
    step_us: f64,
) -> f64 {
    if b_us <= a_us {
        return 0.0;
    }
    let span = b_us - a_us;
    let mut n = (span / step_us).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = span / n as f64;
    let f = |t: f64| trial_detuning_hz(sample, thermal, field, t);
    let mut sum = f(a_us) + f(b_us);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a_us + h * i as f64);
    }
    let integral_hz_us = sum * h / 3.0;
    TAU * integral_hz_us * 1.0e-6
}

fn phasor_statistics(echo_time_us: f64, phasors: &[C64]) -> EchoPoint {
    let n = phasors.len() as f64;
    let mean = phasors.iter().sum::<C64>() / n;
    let var = phasors
        .iter()
        .map(|p| (p - mean).norm_sqr())
        .sum::<f64>()
        / n;
    EchoPoint {
        echo_time_us,
        contrast: mean.norm(),
        std_error: (var / n).sqrt(),
    }
}

/// Spin-echo contrast over a list of echo times with ideal (instantaneous)
/// pi/2 - pi - pi/2 pulses.
pub fn echo_contrast(
    thermal: &ThermalConfig,
    field: &FieldConfig,
    echo_times_us: &[f64],
) -> Result<Vec<EchoPoint>, DephasingError> {
    echo_contrast_with_step(thermal, field, echo_times_us, thermal.default_quad_step_us())
}

/// [`echo_contrast`] with an explicit quadrature step bound, for convergence
/// checks.
pub fn echo_contrast_with_step(
    thermal: &ThermalConfig,
    field: &FieldConfig,
    echo_times_us: &[f64],
    quad_step_us: f64,
) -> Result<Vec<EchoPoint>, DephasingError> {
    validate_times(echo_times_us)?;
    if !quad_step_us.is_finite() || quad_step_us <= 0.0 {
        return Err(DephasingError::BadQuadStep(quad_step_us));
    }
    let points = echo_times_us
        .iter()
        .map(|&te| {
            let phasors: Vec<C64> = (0..thermal.trials)
                .into_par_iter()
                .map(|k| {
                    let sample = sample_trial(thermal, k);
                    let phi1 =
                        phase_integral_rad(&sample, thermal, field, 0.0, te / 2.0, quad_step_us);
                    let phi2 =
                        phase_integral_rad(&sample, thermal, field, te / 2.0, te, quad_step_us);
                    C64::from_polar(1.0, phi2 - phi1)
                })
                .collect();
            phasor_statistics(te, &phasors)
        })
        .collect();
    Ok(points)
}

/// Free-decay (Ramsey, no refocusing pulse) contrast over the same thermal
/// trials, for comparison with the echo.
pub fn ramsey_contrast(
    thermal: &ThermalConfig,
    field: &FieldConfig,
    times_us: &[f64],
) -> Result<Vec<EchoPoint>, DephasingError> {
    validate_times(times_us)?;
    let step = thermal.default_quad_step_us();
    let points = times_us
        .iter()
        .map(|&t| {
            let phasors: Vec<C64> = (0..thermal.trials)
                .into_par_iter()
                .map(|k| {
                    let sample = sample_trial(thermal, k);
                    let phi = phase_integral_rad(&sample, thermal, field, 0.0, t, step);
                    C64::from_polar(1.0, phi)
                })
                .collect();
            phasor_statistics(t, &phasors)
        })
        .collect();
    Ok(points)
}

/// Spin-echo contrast with finite-duration pulses: the pi/2 and pi rotations
/// are drive-frame propagators with the trial's instantaneous detuning
/// applied during the pulse. The pi/2 pulses reuse the pi pulse's envelope
/// at half amplitude. The first pi/2 ends at t = 0, the pi pulse is centered
/// on the echo midpoint, and the contrast is read from the ensemble coherence
/// just before the analysis pulse (equivalent to sweeping its phase).
/// Converges to [`echo_contrast`] as the pulse duration goes to zero.
pub fn echo_contrast_pulsed(
    thermal: &ThermalConfig,
    field: &FieldConfig,
    echo_times_us: &[f64],
    pi_pulse: &PulseShape,
) -> Result<Vec<EchoPoint>, DephasingError> {
    validate_times(echo_times_us)?;
    let window = pi_pulse.window_us();
    let pi2_pulse = pi_pulse.with_area(FRAC_PI_2)?;
    let step = thermal.default_quad_step_us();
    let points: Result<Vec<EchoPoint>, DephasingError> = echo_times_us
        .iter()
        .map(|&te| {
            if window > te / 2.0 {
                return Err(DephasingError::PulseTooLong {
                    window_us: window,
                    echo_time_us: te,
                });
            }
            let phasors: Result<Vec<C64>, DephasingError> = (0..thermal.trials)
                .into_par_iter()
                .map(|k| {
                    let sample = sample_trial(thermal, k);
                    let det_khz =
                        |t: f64| trial_detuning_hz(&sample, thermal, field, t) * 1.0e-3;

                    // pi/2 pulse over [-window, 0].
                    let first = {
                        let prof = |t: f64| det_khz(t - window);
                        propagate_drive_frame(&pi2_pulse, &Detuning::Profile(&prof), 0.0)?
                    };
                    // pi pulse centered on te/2.
                    let mid_start = te / 2.0 - window / 2.0;
                    let refocus = {
                        let prof = |t: f64| det_khz(mid_start + t);
                        propagate_drive_frame(pi_pulse, &Detuning::Profile(&prof), 0.0)?
                    };
                    let phi_a =
                        phase_integral_rad(&sample, thermal, field, 0.0, mid_start, step);
                    let phi_b = phase_integral_rad(
                        &sample,
                        thermal,
                        field,
                        te / 2.0 + window / 2.0,
                        te,
                        step,
                    );

                    let free = |state: &TwoLevelState, phi: f64| TwoLevelState {
                        amp0: state.amp0 * C64::from_polar(1.0, -phi / 2.0),
                        amp1: state.amp1 * C64::from_polar(1.0, phi / 2.0),
                    };
                    let mut state = first.apply(&TwoLevelState::ket0());
                    state = free(&state, phi_a);
                    state = refocus.apply(&state);
                    state = free(&state, phi_b);
                    Ok(2.0 * state.coherence())
                })
                .collect();
            Ok(phasor_statistics(te, &phasors?))
        })
        .collect();
    points
}
