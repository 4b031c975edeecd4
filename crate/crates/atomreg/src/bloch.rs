//! Rotating-wave two-level dynamics under shaped microwave pulses.
//!
//! A pulse is an envelope (square or Gaussian) with a peak Rabi frequency, a
//! carrier detuning relative to the atom, and a carrier phase. Propagators
//! are computed in the atom's own rotating frame, where free evolution is the
//! identity; the drive coupling then carries the oscillating phase
//! `exp(i (theta(t) + phi))` with `theta(t) = 2 pi Int delta(t') dt'`. This
//! makes the relative phase picked up by a detuned spectator atom,
//! `arg(u00) - arg(u11)`, well defined.
//!
//! Integration is fixed-step fourth-order Runge-Kutta. The step resolves the
//! fastest of the peak Rabi frequency and the detuning with a fixed number of
//! steps per cycle, so repeated runs with the same configuration are
//! bit-identical.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldmap::FieldConfig;

/// Linear kHz to angular rad/us.
pub const KHZ_TO_RAD_PER_US: f64 = TAU * 1.0e-3;

/// RK4 steps per cycle of the fastest frequency in the problem. Chosen so
/// norm drift stays below 1e-10 and step-halving moves propagator entries by
/// less than 1e-7 for every pulse used here.
const STEPS_PER_CYCLE: f64 = 300.0;
const MIN_STEPS: usize = 16;
const MAX_STEPS: usize = 20_000_000;
/// Grid used to bound |delta(t)| for time-dependent detunings.
const DETUNING_SCAN_POINTS: usize = 257;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlochError {
    #[error("peak Rabi frequency must be finite and >= 0, got {0} kHz")]
    BadPeakRabi(f64),
    #[error("pulse duration must be finite and > 0, got {0} us")]
    BadDuration(f64),
    #[error("gaussian truncation must be >= 3 sigma, got {0}")]
    BadTruncation(f64),
    #[error("pulse area must be finite and >= 0, got {0} rad")]
    BadArea(f64),
    #[error(
        "step-size underflow: pulse window {window_us} us needs {required} RK4 steps \
         (limit {limit}); shorten the pulse or reduce the detuning"
    )]
    StepSizeUnderflow {
        window_us: f64,
        required: u64,
        limit: u64,
    },
    #[error("detuning must be finite over the pulse window")]
    NonFiniteDetuning,
    #[error("spectator phase is undefined for a resonant pulse (detuning 0)")]
    ResonantSpectatorPhase,
}

/// Pulse envelope family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Square,
    Gaussian,
}

/// A shaped drive pulse. `duration_us` is the full length for a square pulse
/// and the Gaussian width sigma_tau for a Gaussian pulse; Gaussian envelopes
/// are truncated at `truncation` sigma on either side of the peak and the
/// area calibration accounts for the clipped tails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    kind: EnvelopeKind,
    peak_rabi_khz: f64,
    duration_us: f64,
    truncation: f64,
}

/// Default Gaussian truncation, in units of sigma_tau. Clips less than 1e-4
/// of the pulse area, which the calibration renormalizes away.
pub const DEFAULT_GAUSSIAN_TRUNCATION: f64 = 4.0;

impl PulseShape {
    pub fn square(peak_rabi_khz: f64, duration_us: f64) -> Result<Self, BlochError> {
        Self::build(EnvelopeKind::Square, peak_rabi_khz, duration_us, 0.0)
    }

    pub fn gaussian(peak_rabi_khz: f64, sigma_tau_us: f64) -> Result<Self, BlochError> {
        Self::build(
            EnvelopeKind::Gaussian,
            peak_rabi_khz,
            sigma_tau_us,
            DEFAULT_GAUSSIAN_TRUNCATION,
        )
    }

    pub fn gaussian_with_truncation(
        peak_rabi_khz: f64,
        sigma_tau_us: f64,
        truncation: f64,
    ) -> Result<Self, BlochError> {
        Self::build(EnvelopeKind::Gaussian, peak_rabi_khz, sigma_tau_us, truncation)
    }

    fn build(
        kind: EnvelopeKind,
        peak_rabi_khz: f64,
        duration_us: f64,
        truncation: f64,
    ) -> Result<Self, BlochError> {
        if !peak_rabi_khz.is_finite() || peak_rabi_khz < 0.0 {
            return Err(BlochError::BadPeakRabi(peak_rabi_khz));
        }
        if !duration_us.is_finite() || duration_us <= 0.0 {
            return Err(BlochError::BadDuration(duration_us));
        }
        if kind == EnvelopeKind::Gaussian && (!truncation.is_finite() || truncation < 3.0) {
            return Err(BlochError::BadTruncation(truncation));
        }
        Ok(Self {
            kind,
            peak_rabi_khz,
            duration_us,
            truncation,
        })
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    pub fn peak_rabi_khz(&self) -> f64 {
        self.peak_rabi_khz
    }

    /// Square: full pulse length. Gaussian: sigma_tau.
    pub fn duration_us(&self) -> f64 {
        self.duration_us
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Total integration window in us.
    pub fn window_us(&self) -> f64 {
        match self.kind {
            EnvelopeKind::Square => self.duration_us,
            EnvelopeKind::Gaussian => 2.0 * self.truncation * self.duration_us,
        }
    }

    /// Instantaneous Rabi frequency in kHz at `t_us` from the window start.
    pub fn envelope_khz(&self, t_us: f64) -> f64 {
        match self.kind {
            EnvelopeKind::Square => self.peak_rabi_khz,
            EnvelopeKind::Gaussian => {
                let center = self.truncation * self.duration_us;
                let arg = (t_us - center) / self.duration_us;
                self.peak_rabi_khz * (-0.5 * arg * arg).exp()
            }
        }
    }

    /// Resonant pulse area `Int Omega(t) dt` in radians over the (truncated)
    /// window.
    pub fn area_rad(&self) -> f64 {
        self.peak_rabi_khz * KHZ_TO_RAD_PER_US * self.unit_area_us()
    }

    /// Rescales the peak Rabi frequency so the resonant area equals
    /// `area_rad`.
    pub fn with_area(mut self, area_rad: f64) -> Result<Self, BlochError> {
        if !area_rad.is_finite() || area_rad < 0.0 {
            return Err(BlochError::BadArea(area_rad));
        }
        self.peak_rabi_khz = area_rad / (KHZ_TO_RAD_PER_US * self.unit_area_us());
        Ok(self)
    }

    // Area in us for unit peak Rabi (1 kHz would multiply by KHZ_TO_RAD_PER_US).
    fn unit_area_us(&self) -> f64 {
        match self.kind {
            EnvelopeKind::Square => self.duration_us,
            EnvelopeKind::Gaussian => {
                self.duration_us * (TAU).sqrt() * libm::erf(self.truncation / 2f64.sqrt())
            }
        }
    }
}

/// Calibrates a pi pulse: square pulses get peak Rabi pi/t, Gaussian pulses
/// get the peak that makes the truncated area exactly pi.
pub fn calibrate_pi_pulse(kind: EnvelopeKind, duration_us: f64) -> Result<PulseShape, BlochError> {
    calibrate_pulse_area(kind, duration_us, PI)
}

/// Calibrates a pulse of arbitrary resonant area (pi/2 pulses, general
/// rotations). `duration_us` follows the [`PulseShape`] convention.
pub fn calibrate_pulse_area(
    kind: EnvelopeKind,
    duration_us: f64,
    area_rad: f64,
) -> Result<PulseShape, BlochError> {
    let base = match kind {
        EnvelopeKind::Square => PulseShape::square(0.0, duration_us)?,
        EnvelopeKind::Gaussian => PulseShape::gaussian(0.0, duration_us)?,
    };
    base.with_area(area_rad)
}

/// Carrier detuning relative to the atom's resonance, in kHz: either constant
/// over the pulse or an arbitrary profile of time since the window start.
pub enum Detuning<'a> {
    Constant(f64),
    Profile(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl Detuning<'_> {
    fn at(&self, t_us: f64) -> f64 {
        match self {
            Detuning::Constant(d) => *d,
            Detuning::Profile(f) => f(t_us),
        }
    }

    fn max_abs_khz(&self, window_us: f64) -> Result<f64, BlochError> {
        match self {
            Detuning::Constant(d) => {
                if !d.is_finite() {
                    return Err(BlochError::NonFiniteDetuning);
                }
                Ok(d.abs())
            }
            Detuning::Profile(f) => {
                let mut max = 0.0f64;
                for i in 0..DETUNING_SCAN_POINTS {
                    let t = window_us * i as f64 / (DETUNING_SCAN_POINTS - 1) as f64;
                    let d = f(t);
                    if !d.is_finite() {
                        return Err(BlochError::NonFiniteDetuning);
                    }
                    max = max.max(d.abs());
                }
                Ok(max)
            }
        }
    }
}

impl From<f64> for Detuning<'_> {
    fn from(d: f64) -> Self {
        Detuning::Constant(d)
    }
}

/// Qubit amplitudes in the rotating frame of the atom's own resonance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelState {
    pub amp0: C64,
    pub amp1: C64,
}

impl TwoLevelState {
    pub fn ket0() -> Self {
        Self {
            amp0: C64::new(1.0, 0.0),
            amp1: C64::new(0.0, 0.0),
        }
    }

    pub fn ket1() -> Self {
        Self {
            amp0: C64::new(0.0, 0.0),
            amp1: C64::new(1.0, 0.0),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Population of the upper state.
    pub fn prob1(&self) -> f64 {
        self.amp1.norm_sqr()
    }

    /// Off-diagonal coherence amp0 * conj(amp1).
    pub fn coherence(&self) -> C64 {
        self.amp0 * self.amp1.conj()
    }
}

/// 2x2 propagator of one pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelUnitary {
    pub u00: C64,
    pub u01: C64,
    pub u10: C64,
    pub u11: C64,
}

impl TwoLevelUnitary {
    pub fn identity() -> Self {
        Self {
            u00: C64::new(1.0, 0.0),
            u01: C64::new(0.0, 0.0),
            u10: C64::new(0.0, 0.0),
            u11: C64::new(1.0, 0.0),
        }
    }

    /// Population transfer |<1|U|0>|^2.
    pub fn transfer_probability(&self) -> f64 {
        self.u10.norm_sqr()
    }

    /// Relative phase arg(u00) - arg(u11) wrapped into (-pi, pi].
    pub fn relative_phase_rad(&self) -> f64 {
        wrap_phase(self.u00.arg() - self.u11.arg())
    }

    /// Max entry deviation of U^dagger U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let d00 = self.u00.conj() * self.u00 + self.u10.conj() * self.u10 - 1.0;
        let d01 = self.u00.conj() * self.u01 + self.u10.conj() * self.u11;
        let d11 = self.u01.conj() * self.u01 + self.u11.conj() * self.u11 - 1.0;
        d00.norm().max(d01.norm()).max(d11.norm())
    }

    pub fn apply(&self, state: &TwoLevelState) -> TwoLevelState {
        TwoLevelState {
            amp0: self.u00 * state.amp0 + self.u01 * state.amp1,
            amp1: self.u10 * state.amp0 + self.u11 * state.amp1,
        }
    }

    /// Matrix product self * rhs (rhs acts first).
    pub fn compose(&self, rhs: &TwoLevelUnitary) -> TwoLevelUnitary {
        TwoLevelUnitary {
            u00: self.u00 * rhs.u00 + self.u01 * rhs.u10,
            u01: self.u00 * rhs.u01 + self.u01 * rhs.u11,
            u10: self.u10 * rhs.u00 + self.u11 * rhs.u10,
            u11: self.u10 * rhs.u01 + self.u11 * rhs.u11,
        }
    }

    /// Largest entry-wise distance to another propagator.
    pub fn max_entry_distance(&self, other: &TwoLevelUnitary) -> f64 {
        (self.u00 - other.u00)
            .norm()
            .max((self.u01 - other.u01).norm())
            .max((self.u10 - other.u10).norm())
            .max((self.u11 - other.u11).norm())
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(rad: f64) -> f64 {
    let r = rad.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn step_count(
    window_us: f64,
    peak_rabi_khz: f64,
    max_detuning_khz: f64,
    step_scale: f64,
) -> Result<usize, BlochError> {
    let f_ref = peak_rabi_khz.max(max_detuning_khz).max(1e-6);
    let step_us = 1.0e3 / (STEPS_PER_CYCLE * f_ref) * step_scale;
    let n = (window_us / step_us).ceil();
    if !n.is_finite() || n as u64 > MAX_STEPS as u64 {
        return Err(BlochError::StepSizeUnderflow {
            window_us,
            required: n as u64,
            limit: MAX_STEPS as u64,
        });
    }
    Ok((n as usize).max(MIN_STEPS))
}

// RK4 state for the atom-frame integration: the four propagator entries plus
// the accumulated detuning phase theta = 2 pi Int delta dt.
#[derive(Clone, Copy)]
struct AtomFrameState {
    u: [C64; 4],
    theta: f64,
}

impl AtomFrameState {
    fn axpy(&self, scale: f64, d: &AtomFrameDeriv) -> AtomFrameState {
        AtomFrameState {
            u: [
                self.u[0] + scale * d.du[0],
                self.u[1] + scale * d.du[1],
                self.u[2] + scale * d.du[2],
                self.u[3] + scale * d.du[3],
            ],
            theta: self.theta + scale * d.dtheta,
        }
    }
}

struct AtomFrameDeriv {
    du: [C64; 4],
    dtheta: f64,
}

/// Computes the rotating-frame propagator of one pulse in the atom's own
/// frame. The detuning is drive minus atom, in kHz; `phase_rad` is the drive
/// phase at the window start.
pub fn propagate(
    shape: &PulseShape,
    detuning: &Detuning,
    phase_rad: f64,
) -> Result<TwoLevelUnitary, BlochError> {
    propagate_with_step_scale(shape, detuning, phase_rad, 1.0)
}

/// [`propagate`] with the RK4 step multiplied by `step_scale` (0.5 halves the
/// step). Exposed for convergence checks.
pub fn propagate_with_step_scale(
    shape: &PulseShape,
    detuning: &Detuning,
    phase_rad: f64,
    step_scale: f64,
) -> Result<TwoLevelUnitary, BlochError> {
    let window = shape.window_us();
    let max_det = detuning.max_abs_khz(window)?;
    let n = step_count(window, shape.peak_rabi_khz(), max_det, step_scale)?;
    let h = window / n as f64;

    let deriv = |t: f64, s: &AtomFrameState| -> AtomFrameDeriv {
        let omega = KHZ_TO_RAD_PER_US * shape.envelope_khz(t);
        let c = C64::from_polar(0.5 * omega, s.theta + phase_rad);
        let cc = c.conj();
        let mi = C64::new(0.0, -1.0);
        AtomFrameDeriv {
            // H = [[0, c], [conj(c), 0]]; dU = -i H U.
            du: [
                mi * c * s.u[2],
                mi * c * s.u[3],
                mi * cc * s.u[0],
                mi * cc * s.u[1],
            ],
            dtheta: KHZ_TO_RAD_PER_US * detuning.at(t),
        }
    };

    let mut state = AtomFrameState {
        u: [
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ],
        theta: 0.0,
    };
    let mut t = 0.0;
    for _ in 0..n {
        let k1 = deriv(t, &state);
        let k2 = deriv(t + 0.5 * h, &state.axpy(0.5 * h, &k1));
        let k3 = deriv(t + 0.5 * h, &state.axpy(0.5 * h, &k2));
        let k4 = deriv(t + h, &state.axpy(h, &k3));
        for i in 0..4 {
            state.u[i] +=
                (h / 6.0) * (k1.du[i] + 2.0 * k2.du[i] + 2.0 * k3.du[i] + k4.du[i]);
        }
        state.theta +=
            (h / 6.0) * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
        t += h;
    }
    Ok(TwoLevelUnitary {
        u00: state.u[0],
        u01: state.u[1],
        u10: state.u[2],
        u11: state.u[3],
    })
}

/// Propagator of one pulse in the frame co-rotating with the drive, symmetric
/// gauge: H = +delta/2 sigma_z + Omega(t)/2 (cos phi sigma_x - sin phi ...),
/// i.e. free evolution multiplies amp0 by exp(-i phi_free/2) and amp1 by
/// exp(+i phi_free/2) with phi_free = 2 pi Int delta dt. Used for sequences
/// where the detuning varies during the pulse and between pulses.
pub fn propagate_drive_frame(
    shape: &PulseShape,
    detuning: &Detuning,
    phase_rad: f64,
) -> Result<TwoLevelUnitary, BlochError> {
    let window = shape.window_us();
    let max_det = detuning.max_abs_khz(window)?;
    let n = step_count(window, shape.peak_rabi_khz(), max_det, 1.0)?;
    let h = window / n as f64;

    let coupling_phase = C64::from_polar(1.0, phase_rad);
    let deriv = |t: f64, u: &[C64; 4]| -> [C64; 4] {
        let omega = KHZ_TO_RAD_PER_US * shape.envelope_khz(t);
        let half_delta = 0.5 * KHZ_TO_RAD_PER_US * detuning.at(t);
        let c = 0.5 * omega * coupling_phase;
        let cc = c.conj();
        let mi = C64::new(0.0, -1.0);
        // H = [[+delta/2, c], [conj(c), -delta/2]].
        [
            mi * (half_delta * u[0] + c * u[2]),
            mi * (half_delta * u[1] + c * u[3]),
            mi * (cc * u[0] - half_delta * u[2]),
            mi * (cc * u[1] - half_delta * u[3]),
        ]
    };

    let mut u = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
    ];
    let axpy = |u: &[C64; 4], scale: f64, d: &[C64; 4]| -> [C64; 4] {
        [
            u[0] + scale * d[0],
            u[1] + scale * d[1],
            u[2] + scale * d[2],
            u[3] + scale * d[3],
        ]
    };
    let mut t = 0.0;
    for _ in 0..n {
        let k1 = deriv(t, &u);
        let k2 = deriv(t + 0.5 * h, &axpy(&u, 0.5 * h, &k1));
        let k3 = deriv(t + 0.5 * h, &axpy(&u, 0.5 * h, &k2));
        let k4 = deriv(t + h, &axpy(&u, h, &k3));
        for i in 0..4 {
            u[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    Ok(TwoLevelUnitary {
        u00: u[0],
        u01: u[1],
        u10: u[2],
        u11: u[3],
    })
}

/// One row of an addressing spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectrumPoint {
    pub offset_um: f64,
    pub transfer: f64,
    /// Spectator relative phase; `None` at exact resonance where the concept
    /// does not apply.
    pub phase_rad: Option<f64>,
}

/// Sweeps the pulse carrier over position offsets and records the population
/// transfer out of the lower state, plus the spectator phase at each offset.
/// The detuning at offset `dx` is the axial slope times `dx`.
pub fn spectrum_points(
    shape: &PulseShape,
    offsets_um: &[f64],
    field: &FieldConfig,
) -> Result<Vec<SpectrumPoint>, BlochError> {
    use rayon::prelude::*;
    offsets_um
        .par_iter()
        .map(|&dx| {
            let delta = field.axial_detuning_khz(dx);
            let u = propagate(shape, &Detuning::Constant(delta), 0.0)?;
            let phase_rad = (delta != 0.0).then(|| u.relative_phase_rad());
            Ok(SpectrumPoint {
                offset_um: dx,
                transfer: u.transfer_probability(),
                phase_rad,
            })
        })
        .collect()
}

/// Population-transfer spectrum (offset, transfer) over position offsets.
pub fn transfer_spectrum(
    shape: &PulseShape,
    offsets_um: &[f64],
    field: &FieldConfig,
) -> Result<Vec<(f64, f64)>, BlochError> {
    Ok(spectrum_points(shape, offsets_um, field)?
        .into_iter()
        .map(|p| (p.offset_um, p.transfer))
        .collect())
}

/// Coherent relative-phase kick arg(u00) - arg(u11) picked up by a spectator
/// atom detuned by `detuning_khz` from the pulse carrier. Errors at exact
/// resonance, where the pulse is a rotation rather than a phase shift.
pub fn spectator_phase(shape: &PulseShape, detuning_khz: f64) -> Result<f64, BlochError> {
    if detuning_khz == 0.0 {
        return Err(BlochError::ResonantSpectatorPhase);
    }
    let u = propagate(shape, &Detuning::Constant(detuning_khz), 0.0)?;
    Ok(u.relative_phase_rad())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    // Independent oracle: analytic Rabi transfer for a square pulse,
    // (Omega^2 / (Omega^2 + delta^2)) sin^2(sqrt(Omega^2 + delta^2) t / 2)
    // in linear-frequency units.
    fn analytic_square_transfer(omega_khz: f64, delta_khz: f64, t_us: f64) -> f64 {
        let gen = (omega_khz * omega_khz + delta_khz * delta_khz).sqrt();
        if gen == 0.0 {
            return 0.0;
        }
        let s = (PI * gen * 1.0e-3 * t_us).sin();
        (omega_khz * omega_khz) / (gen * gen) * s * s
    }

    #[test]
    fn zero_drive_is_identity() {
        let shape = PulseShape::square(0.0, 123.0).unwrap();
        let u = propagate(&shape, &Detuning::Constant(17.0), 0.3).unwrap();
        assert_eq!(u, TwoLevelUnitary::identity());
    }

    #[test]
    fn hadamard_point_square_pulse() {
        // Quarter-area point of the 32 kHz square pulse.
        let shape = PulseShape::square(32.0, 7.8125).unwrap();
        let u = propagate(&shape, &Detuning::Constant(0.0), 0.0).unwrap();
        assert_abs_diff_eq!(u.transfer_probability(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn pi_point_square_pulse() {
        let shape = PulseShape::square(32.0, 15.625).unwrap();
        let u = propagate(&shape, &Detuning::Constant(0.0), 0.0).unwrap();
        assert_abs_diff_eq!(u.transfer_probability(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn square_pi_calibration_gives_32_khz() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Square, 15.625).unwrap();
        assert_relative_eq!(shape.peak_rabi_khz(), 32.0, max_relative = 1e-12);
    }

    #[test]
    fn doubling_square_duration_halves_peak() {
        let a = calibrate_pi_pulse(EnvelopeKind::Square, 10.0).unwrap();
        let b = calibrate_pi_pulse(EnvelopeKind::Square, 20.0).unwrap();
        assert_relative_eq!(b.peak_rabi_khz(), a.peak_rabi_khz() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_pi_pulse_transfers_fully_on_resonance() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let u = propagate(&shape, &Detuning::Constant(0.0), 0.0).unwrap();
        assert!(u.transfer_probability() >= 0.999);
    }

    #[test]
    fn rabi_oracle_over_random_pulses() {
        use rand::Rng;
        let mut rng = crate::seeding::stream_rng(0xB10C, 0);
        for _ in 0..200 {
            let omega = rng.gen_range(0.5..80.0);
            let delta = rng.gen_range(-80.0..80.0);
            let t = rng.gen_range(0.1..40.0);
            let shape = PulseShape::square(omega, t).unwrap();
            let u = propagate(&shape, &Detuning::Constant(delta), 0.0).unwrap();
            let expected = analytic_square_transfer(omega, delta, t);
            assert_abs_diff_eq!(u.transfer_probability(), expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn norm_is_conserved() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let u = propagate(&shape, &Detuning::Constant(9.1875), 0.0).unwrap();
        let out = u.apply(&TwoLevelState::ket0());
        assert_abs_diff_eq!(out.norm_sq(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_step_halving_converges() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let det = Detuning::Constant(9.1875);
        let full = propagate_with_step_scale(&shape, &det, 0.0, 1.0).unwrap();
        let half = propagate_with_step_scale(&shape, &det, 0.0, 0.5).unwrap();
        assert!(full.max_entry_distance(&half) < 1e-7);
    }

    #[test]
    fn composition_over_subintervals() {
        // Splitting a constant-detuning pulse at t1 and carrying the
        // accumulated detuning phase into the second segment reproduces the
        // whole-interval propagator.
        let omega = 13.0;
        let (t1, t2) = (4.0, 11.0);
        let d = 7.5;
        let total_shape = PulseShape::square(omega, t2).unwrap();
        let total = propagate(&total_shape, &Detuning::Constant(d), 0.0).unwrap();

        let seg = |a: f64, b: f64| {
            let shape = PulseShape::square(omega, b - a).unwrap();
            let theta = KHZ_TO_RAD_PER_US * d * a;
            propagate(&shape, &Detuning::Constant(d), theta).unwrap()
        };
        let composed = seg(t1, t2).compose(&seg(0.0, t1));
        assert!(total.max_entry_distance(&composed) < 1e-7);
    }

    #[test]
    fn composition_with_piecewise_constant_detuning() {
        // Two-segment layout versus the same segments cut in four: the
        // composition must agree whichever way the piecewise-constant
        // detuning intervals are subdivided.
        let omega = 13.0;
        let cuts2 = [(0.0, 4.0, 7.5), (4.0, 11.0, -3.25)];
        let cuts4 = [
            (0.0, 1.5, 7.5),
            (1.5, 4.0, 7.5),
            (4.0, 9.0, -3.25),
            (9.0, 11.0, -3.25),
        ];
        let compose = |cuts: &[(f64, f64, f64)]| {
            let mut u = TwoLevelUnitary::identity();
            let mut theta = 0.0;
            for &(a, b, d) in cuts {
                let shape = PulseShape::square(omega, b - a).unwrap();
                let seg = propagate(&shape, &Detuning::Constant(d), theta).unwrap();
                u = seg.compose(&u);
                theta += KHZ_TO_RAD_PER_US * d * (b - a);
            }
            u
        };
        let two = compose(&cuts2);
        let four = compose(&cuts4);
        assert!(two.max_entry_distance(&four) < 1e-7);
    }

    #[test]
    fn atom_and_drive_frames_agree_on_populations() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 17.7).unwrap();
        for delta in [-22.0, -9.1875, 3.3, 41.0] {
            let ua = propagate(&shape, &Detuning::Constant(delta), 0.0).unwrap();
            let ud = propagate_drive_frame(&shape, &Detuning::Constant(delta), 0.0).unwrap();
            assert_abs_diff_eq!(
                ua.transfer_probability(),
                ud.transfer_probability(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn spectator_phase_rejects_resonant_pulse() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        assert!(matches!(
            spectator_phase(&shape, 0.0),
            Err(BlochError::ResonantSpectatorPhase)
        ));
    }

    #[test]
    fn spectator_phase_at_resolution_distance() {
        // Frozen from two independent integrators (augmented-phase RK4 and
        // piecewise-constant matrix exponentials): |dphi| = 0.23448 pi for the
        // sigma_tau = 35.35 us Gaussian pi pulse detuned by 9.1875 kHz.
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let phi = spectator_phase(&shape, -9.1875).unwrap();
        assert_abs_diff_eq!(phi.abs() / PI, 0.23448, epsilon = 5e-4);
    }

    #[test]
    fn spectator_phase_is_antisymmetric_in_detuning() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let plus = spectator_phase(&shape, 9.1875).unwrap();
        let minus = spectator_phase(&shape, -9.1875).unwrap();
        assert_abs_diff_eq!(plus, -minus, epsilon = 1e-9);
    }

    #[test]
    fn spectator_phase_vanishes_far_off_resonance() {
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let phi = spectator_phase(&shape, 2000.0).unwrap();
        assert!(phi.abs() < 0.01, "got {phi}");
    }

    #[test]
    fn spectrum_is_symmetric_and_resolves_neighbours() {
        let field = FieldConfig::paper_defaults();
        let shape = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let offsets = [-5.0, -2.5, 0.0, 2.5, 5.0];
        let pts = transfer_spectrum(&shape, &offsets, &field).unwrap();
        assert_abs_diff_eq!(pts[1].1, pts[3].1, epsilon = 1e-9);
        assert_abs_diff_eq!(pts[0].1, pts[4].1, epsilon = 1e-9);
        assert!(pts[2].1 >= 0.99);
        assert!(pts[3].1 <= 0.05);
    }

    #[test]
    fn shorter_pulse_transfers_more_at_fixed_offset() {
        let field = FieldConfig::paper_defaults();
        let short = calibrate_pi_pulse(EnvelopeKind::Gaussian, 8.85).unwrap();
        let long = calibrate_pi_pulse(EnvelopeKind::Gaussian, 35.35).unwrap();
        let at = |shape: &PulseShape| {
            transfer_spectrum(shape, &[2.5], &field).unwrap()[0].1
        };
        assert!(at(&short) > at(&long));
    }

    #[test]
    fn step_size_underflow_is_reported() {
        let shape = PulseShape::square(100.0, 1.0e9).unwrap();
        assert!(matches!(
            propagate(&shape, &Detuning::Constant(0.0), 0.0),
            Err(BlochError::StepSizeUnderflow { .. })
        ));
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval() {
        assert_abs_diff_eq!(wrap_phase(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_phase(0.25), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(TAU + 0.25), 0.25, epsilon = 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_shape() -> impl Strategy<Value = PulseShape> {
            (
                prop_oneof![Just(EnvelopeKind::Square), Just(EnvelopeKind::Gaussian)],
                0.0f64..60.0,
                0.5f64..30.0,
            )
                .prop_map(|(kind, peak, dur)| match kind {
                    EnvelopeKind::Square => PulseShape::square(peak, dur).unwrap(),
                    EnvelopeKind::Gaussian => PulseShape::gaussian(peak, dur).unwrap(),
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn propagators_are_unitary(
                shape in arb_shape(),
                delta in -60.0f64..60.0,
                phase in -3.0f64..3.0,
            ) {
                let u = propagate(&shape, &Detuning::Constant(delta), phase).unwrap();
                prop_assert!(u.unitarity_deviation() < 1e-8);
            }

            #[test]
            fn evolution_preserves_norm(
                shape in arb_shape(),
                delta in -60.0f64..60.0,
            ) {
                let u = propagate(&shape, &Detuning::Constant(delta), 0.0).unwrap();
                let s = u.apply(&TwoLevelState::ket0());
                prop_assert!((s.norm_sq() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn square_transfer_matches_analytic_formula(
                omega in 0.5f64..60.0,
                delta in -60.0f64..60.0,
                t in 0.1f64..30.0,
            ) {
                let shape = PulseShape::square(omega, t).unwrap();
                let u = propagate(&shape, &Detuning::Constant(delta), 0.0).unwrap();
                let expected = analytic_square_transfer(omega, delta, t);
                prop_assert!((u.transfer_probability() - expected).abs() < 1e-6);
            }
        }
    }
}
