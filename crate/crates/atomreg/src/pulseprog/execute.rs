//! Schedule execution: Monte-Carlo shots of the full register protocol.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{Schedule, Target};
use crate::bloch::{propagate, BlochError, Detuning, TwoLevelUnitary};
use crate::fieldmap::{AtomGeometry, FieldConfig};
use crate::register::{DetectionModel, RegisterError, RegisterState};
use crate::seeding::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecuteError {
    #[error("schedule was compiled against a different atom geometry")]
    GeometryMismatch,
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Pulse(#[from] BlochError),
}

#[derive(Clone, Copy, Debug)]
pub struct ExecuteOptions {
    pub shots: u64,
    pub seed: u64,
    pub pump_fidelity: f64,
    pub detection: DetectionModel,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        Self {
            shots: 100,
            seed: 1,
            pump_fidelity: 1.0,
            detection: DetectionModel::default(),
        }
    }
}

/// One shot of the protocol. The phase ledger is the compiled per-atom
/// crosstalk record and is identical across shots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotRecord {
    pub shot: u64,
    pub readout_string: String,
    pub survivors: Vec<u32>,
    pub phase_ledger: BTreeMap<u32, f64>,
}

/// All shots plus per-atom flip statistics (fraction of shots reading '1').
#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionResult {
    pub records: Vec<ShotRecord>,
    pub flip_fraction: BTreeMap<u32, f64>,
}

/// Runs the compiled schedule: per shot a fresh register is loaded,
/// initialized, driven through every event, and (when the program measures)
/// read out. Per-shot RNG streams derive from (seed, shot), so results do
/// not depend on the degree of parallelism.
pub fn execute(
    schedule: &Schedule,
    geometry: &[AtomGeometry],
    field: &FieldConfig,
    options: &ExecuteOptions,
) -> Result<ExecutionResult, ExecuteError> {
    if geometry != schedule.geometry() {
        return Err(ExecuteError::GeometryMismatch);
    }

    // The propagators are identical across shots; precompute one set of
    // per-atom unitaries per event.
    let event_unitaries: Vec<Vec<(u32, TwoLevelUnitary)>> = schedule
        .events()
        .iter()
        .map(|event| {
            geometry
                .iter()
                .map(|atom| {
                    let delta = match event.target {
                        Target::Atom(label) => {
                            let target = geometry
                                .iter()
                                .find(|a| a.label == label)
                                .expect("compile validated labels");
                            field.axial_detuning_khz(atom.x_um - target.x_um)
                        }
                        Target::Broadcast => {
                            field.axial_detuning_khz(atom.x_um) - event.carrier_detuning_khz
                        }
                    };
                    let u = propagate(&event.shape, &Detuning::Constant(delta), event.phase_rad)?;
                    Ok((atom.label, u))
                })
                .collect::<Result<Vec<_>, BlochError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let records: Result<Vec<ShotRecord>, ExecuteError> = (0..options.shots)
        .into_par_iter()
        .map(|shot| {
            let mut register = RegisterState::new(geometry, derive_seed(options.seed, shot))?;
            register.initialize(options.pump_fidelity)?;
            for unitaries in &event_unitaries {
                register.apply_unitaries(unitaries)?;
            }
            let (readout_string, survivors) = if schedule.has_measure() {
                let readout = register.measure(&options.detection);
                (readout.readout, readout.survivors)
            } else {
                (String::new(), geometry.iter().map(|a| a.label).collect())
            };
            Ok(ShotRecord {
                shot,
                readout_string,
                survivors,
                phase_ledger: schedule.ledger().clone(),
            })
        })
        .collect();
    let records = records?;

    let mut ones: BTreeMap<u32, u64> = geometry.iter().map(|a| (a.label, 0)).collect();
    if schedule.has_measure() {
        for record in &records {
            for &label in &record.survivors {
                *ones.get_mut(&label).expect("labels validated") += 1;
            }
        }
    }
    let flip_fraction = ones
        .into_iter()
        .map(|(label, count)| {
            let fraction = if options.shots == 0 {
                0.0
            } else {
                count as f64 / options.shots as f64
            };
            (label, fraction)
        })
        .collect();

    Ok(ExecutionResult {
        records,
        flip_fraction,
    })
}
