//! Program → schedule compilation: sequential time layout, carrier
//! resolution from the gradient map, and the spectator phase ledger.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::{Program, Span, Statement};
use crate::bloch::{spectator_phase, BlochError, EnvelopeKind, PulseShape};
use crate::fieldmap::{AtomGeometry, FieldConfig, FieldError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("{span}: unknown atom label {label}")]
    UnknownLabel { span: Span, label: u32 },
    #[error("{span}: unknown shape `{name}`")]
    UnknownShape { span: Span, name: String },
    #[error("{span}: {source}")]
    BadPulse { span: Span, source: BlochError },
    #[error(transparent)]
    Geometry(#[from] FieldError),
    #[error("dead time must be finite and >= 0, got {0} us")]
    BadDeadTime(f64),
}

/// Scheduling options. The dead time models microwave-source retuning
/// between pulses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    pub dead_time_us: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { dead_time_us: 1.0 }
    }
}

/// Event target: a single addressed atom, or a broadcast pulse applied to
/// the whole string at a fixed carrier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Atom(u32),
    #[serde(rename = "broadcast")]
    Broadcast,
}

/// One scheduled pulse with an absolute start time. The carrier detuning is
/// relative to the resonance of an atom at the trap origin (x = 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseEvent {
    pub start_time_us: f64,
    pub shape: PulseShape,
    pub carrier_detuning_khz: f64,
    pub phase_rad: f64,
    pub target: Target,
}

/// Compiled, validated schedule: time-ordered non-overlapping events plus
/// the cumulative spectator phase per atom (unwrapped sum of per-pulse
/// phases, radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    events: Vec<PulseEvent>,
    ledger: BTreeMap<u32, f64>,
    geometry: Vec<AtomGeometry>,
    has_measure: bool,
    total_duration_us: f64,
}

impl Schedule {
    pub(crate) fn from_raw(
        events: Vec<PulseEvent>,
        ledger: BTreeMap<u32, f64>,
        geometry: Vec<AtomGeometry>,
        has_measure: bool,
        total_duration_us: f64,
    ) -> Self {
        Self {
            events,
            ledger,
            geometry,
            has_measure,
            total_duration_us,
        }
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn ledger(&self) -> &BTreeMap<u32, f64> {
        &self.ledger
    }

    pub fn geometry(&self) -> &[AtomGeometry] {
        &self.geometry
    }

    pub fn has_measure(&self) -> bool {
        self.has_measure
    }

    pub fn total_duration_us(&self) -> f64 {
        self.total_duration_us
    }

    /// JSON form: `{events: [{t_start_us, kind, sigma_or_len_us,
    /// peak_rabi_khz, carrier_detuning_khz, target, phase_rad}], ledger:
    /// {label: rad}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let events: Vec<serde_json::Value> = self
            .events
            .iter()
            .map(|e| {
                let kind = match e.shape.kind() {
                    EnvelopeKind::Square => "square",
                    EnvelopeKind::Gaussian => "gaussian",
                };
                let target = match e.target {
                    Target::Atom(label) => json!(label),
                    Target::Broadcast => json!("broadcast"),
                };
                json!({
                    "t_start_us": e.start_time_us,
                    "kind": kind,
                    "sigma_or_len_us": e.shape.duration_us(),
                    "peak_rabi_khz": e.shape.peak_rabi_khz(),
                    "carrier_detuning_khz": e.carrier_detuning_khz,
                    "target": target,
                    "phase_rad": e.phase_rad,
                })
            })
            .collect();
        let ledger: BTreeMap<String, f64> = self
            .ledger
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        json!({ "events": events, "ledger": ledger })
    }
}

/// Compiles a parsed program against an atom geometry and a named shape
/// table. Pulse statements resolve their carrier from the target's axial
/// position; PI / PI2 / ROT set the pulse area to pi, pi/2, and |angle|
/// (negative angles flip the drive phase by pi). After layout the compiler
/// simulates every pulse on every other atom and accumulates the ledger.
pub fn compile(
    program: &Program,
    geometry: &[AtomGeometry],
    shapes: &BTreeMap<String, PulseShape>,
    field: &FieldConfig,
    options: &CompileOptions,
) -> Result<Schedule, CompileError> {
    AtomGeometry::validate(geometry)?;
    if !options.dead_time_us.is_finite() || options.dead_time_us < 0.0 {
        return Err(CompileError::BadDeadTime(options.dead_time_us));
    }

    let find_atom = |label: u32, span: Span| {
        geometry
            .iter()
            .find(|a| a.label == label)
            .copied()
            .ok_or(CompileError::UnknownLabel { span, label })
    };
    let find_shape = |name: &str, span: Span| {
        shapes
            .get(name)
            .copied()
            .ok_or_else(|| CompileError::UnknownShape {
                span,
                name: name.to_owned(),
            })
    };

    let mut events = Vec::new();
    let mut ledger: BTreeMap<u32, f64> = BTreeMap::new();
    let mut cursor_us = 0.0;
    let mut has_measure = false;

    for stmt in program.statements() {
        let span = stmt.span;
        let pulse = match &stmt.node {
            Statement::Init => None,
            Statement::Measure => {
                has_measure = true;
                None
            }
            Statement::Wait { duration_us } => {
                cursor_us += duration_us;
                None
            }
            Statement::Pi { target, shape } => {
                Some((*target, shape.as_str(), std::f64::consts::PI, 0.0))
            }
            Statement::Pi2 { target, shape } => {
                Some((*target, shape.as_str(), std::f64::consts::FRAC_PI_2, 0.0))
            }
            Statement::Rot {
                target,
                angle_rad,
                shape,
            } => {
                let phase = if *angle_rad < 0.0 {
                    std::f64::consts::PI
                } else {
                    0.0
                };
                Some((*target, shape.as_str(), angle_rad.abs(), phase))
            }
        };
        let Some((target, shape_name, area_rad, phase_rad)) = pulse else {
            continue;
        };

        let atom = find_atom(target, span)?;
        let base = find_shape(shape_name, span)?;
        let shape = base
            .with_area(area_rad)
            .map_err(|source| CompileError::BadPulse { span, source })?;

        events.push(PulseEvent {
            start_time_us: cursor_us,
            shape,
            carrier_detuning_khz: field.axial_detuning_khz(atom.x_um),
            phase_rad,
            target: Target::Atom(target),
        });
        cursor_us += shape.window_us() + options.dead_time_us;

        for other in geometry {
            let entry = ledger.entry(other.label).or_insert(0.0);
            if other.label == target {
                continue;
            }
            let delta = field.axial_detuning_khz(other.x_um - atom.x_um);
            let phase = spectator_phase(&shape, delta)
                .map_err(|source| CompileError::BadPulse { span, source })?;
            *entry += phase;
        }
    }

    Ok(Schedule {
        events,
        ledger,
        geometry: geometry.to_vec(),
        has_measure,
        total_duration_us: cursor_us,
    })
}
