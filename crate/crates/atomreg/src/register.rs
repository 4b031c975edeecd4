//! The N-atom product-state register: optical-pumping initialization,
//! gradient-addressed single-qubit pulses with explicit crosstalk on every
//! spectator, and state-selective push-out readout.
//!
//! Readout is destructive for atoms read as the lower state: the push-out
//! removes them from the trap, so a fresh register must be loaded to
//! continue. Atoms read as the upper state survive. Spectator phases
//! accumulated during addressed pulses are recorded in a per-atom ledger
//! rather than physically corrected; for product states the correction is
//! bookkeeping.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bloch::{propagate, BlochError, Detuning, PulseShape, TwoLevelState};
use crate::fieldmap::{AtomGeometry, FieldConfig, FieldError};
use crate::seeding::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegisterError {
    #[error(transparent)]
    Geometry(#[from] FieldError),
    #[error(transparent)]
    Pulse(#[from] BlochError),
    #[error("detection error probability must lie in [0, 0.05], got {0}")]
    BadDetectionError(f64),
    #[error("pump fidelity must lie in [0, 1], got {0}")]
    BadPumpFidelity(f64),
    #[error("unknown atom label {0}")]
    UnknownLabel(u32),
    #[error("atom {0} has been removed from the trap")]
    TargetRemoved(u32),
    #[error("initialization requires all atoms present; atom {0} is removed")]
    AtomMissing(u32),
}

/// Classical readout error channel of the push-out detection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionModel {
    eps_0_as_1: f64,
    eps_1_as_0: f64,
}

impl DetectionModel {
    /// `eps_0_as_1`: probability an atom projected to the lower state
    /// survives the push-out and reads as the upper state. `eps_1_as_0`:
    /// probability an upper-state atom is lost and reads as the lower state.
    /// Both must lie in [0, 0.05].
    pub fn new(eps_0_as_1: f64, eps_1_as_0: f64) -> Result<Self, RegisterError> {
        for eps in [eps_0_as_1, eps_1_as_0] {
            if !eps.is_finite() || !(0.0..=0.05).contains(&eps) {
                return Err(RegisterError::BadDetectionError(eps));
            }
        }
        Ok(Self {
            eps_0_as_1,
            eps_1_as_0,
        })
    }

    /// Error-free detection.
    pub fn ideal() -> Self {
        Self {
            eps_0_as_1: 0.0,
            eps_1_as_0: 0.0,
        }
    }

    pub fn eps_0_as_1(&self) -> f64 {
        self.eps_0_as_1
    }

    pub fn eps_1_as_0(&self) -> f64 {
        self.eps_1_as_0
    }
}

impl Default for DetectionModel {
    /// 1% error per atom and channel.
    fn default() -> Self {
        Self {
            eps_0_as_1: 0.01,
            eps_1_as_0: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occupancy {
    Present,
    Removed,
}

#[derive(Clone, Debug)]
struct AtomSlot {
    geometry: AtomGeometry,
    qubit: Option<TwoLevelState>,
    occupancy: Occupancy,
}

/// Result of one register measurement: the readout string in label order
/// ('1' = atom survived the push-out) and the labels of the survivors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Readout {
    pub readout: String,
    pub survivors: Vec<u32>,
}

/// Ordered product-state register over a fixed atom geometry.
#[derive(Clone, Debug)]
pub struct RegisterState {
    atoms: Vec<AtomSlot>,
    ledger: BTreeMap<u32, f64>,
    rng: ChaCha8Rng,
}

impl RegisterState {
    /// Loads a register with one atom per geometry site, all present and in
    /// the lower state. Measurement and pumping randomness is drawn from a
    /// stream derived from `seed`.
    pub fn new(geometry: &[AtomGeometry], seed: u64) -> Result<Self, RegisterError> {
        AtomGeometry::validate(geometry)?;
        Ok(Self {
            atoms: geometry
                .iter()
                .map(|&g| AtomSlot {
                    geometry: g,
                    qubit: Some(TwoLevelState::ket0()),
                    occupancy: Occupancy::Present,
                })
                .collect(),
            ledger: BTreeMap::new(),
            rng: stream_rng(seed, 0),
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn geometry(&self) -> Vec<AtomGeometry> {
        self.atoms.iter().map(|a| a.geometry).collect()
    }

    pub fn occupancy(&self, label: u32) -> Option<Occupancy> {
        self.slot(label).map(|a| a.occupancy)
    }

    pub fn qubit(&self, label: u32) -> Option<TwoLevelState> {
        self.slot(label).and_then(|a| a.qubit)
    }

    /// Accumulated spectator phase per atom label, radians (unwrapped sum of
    /// per-pulse phases).
    pub fn phase_ledger(&self) -> &BTreeMap<u32, f64> {
        &self.ledger
    }

    fn slot(&self, label: u32) -> Option<&AtomSlot> {
        self.atoms.iter().find(|a| a.geometry.label == label)
    }

    /// Optically pumps every atom: lower state with probability
    /// `pump_fidelity`, upper state otherwise. Requires all atoms present.
    pub fn initialize(&mut self, pump_fidelity: f64) -> Result<(), RegisterError> {
        if !pump_fidelity.is_finite() || !(0.0..=1.0).contains(&pump_fidelity) {
            return Err(RegisterError::BadPumpFidelity(pump_fidelity));
        }
        if let Some(missing) = self
            .atoms
            .iter()
            .find(|a| a.occupancy == Occupancy::Removed)
        {
            return Err(RegisterError::AtomMissing(missing.geometry.label));
        }
        for slot in &mut self.atoms {
            let pumped = self.rng.gen::<f64>() < pump_fidelity;
            slot.qubit = Some(if pumped {
                TwoLevelState::ket0()
            } else {
                TwoLevelState::ket1()
            });
        }
        self.ledger.clear();
        Ok(())
    }

    /// Applies a pulse resonant with `target`. Every other present atom sees
    /// the same pulse detuned by the gradient map, so crosstalk is simulated
    /// rather than ignored, and each spectator's relative-phase kick is added
    /// to the ledger.
    pub fn address(
        &mut self,
        target: u32,
        pulse: &PulseShape,
        field: &FieldConfig,
    ) -> Result<(), RegisterError> {
        let target_slot = self
            .slot(target)
            .ok_or(RegisterError::UnknownLabel(target))?;
        if target_slot.occupancy == Occupancy::Removed {
            return Err(RegisterError::TargetRemoved(target));
        }
        let x_target = target_slot.geometry.x_um;
        for slot in &mut self.atoms {
            if slot.occupancy == Occupancy::Removed {
                continue;
            }
            let qubit = slot.qubit.expect("present atoms hold a qubit");
            let delta = field.axial_detuning_khz(slot.geometry.x_um - x_target);
            let u = propagate(pulse, &Detuning::Constant(delta), 0.0)?;
            slot.qubit = Some(u.apply(&qubit));
            if slot.geometry.label != target {
                *self.ledger.entry(slot.geometry.label).or_insert(0.0) +=
                    u.relative_phase_rad();
            }
        }
        Ok(())
    }

    /// Applies precomputed per-atom propagators in one step. Used by the
    /// schedule executor, which shares one set of propagators across shots.
    /// Ledger accounting stays with the compiled schedule in that path.
    pub fn apply_unitaries(
        &mut self,
        unitaries: &[(u32, crate::bloch::TwoLevelUnitary)],
    ) -> Result<(), RegisterError> {
        for (label, u) in unitaries {
            let slot = self
                .atoms
                .iter_mut()
                .find(|a| a.geometry.label == *label)
                .ok_or(RegisterError::UnknownLabel(*label))?;
            if slot.occupancy == Occupancy::Removed {
                continue;
            }
            let qubit = slot.qubit.expect("present atoms hold a qubit");
            slot.qubit = Some(u.apply(&qubit));
        }
        Ok(())
    }

    /// Projects every atom (Born sampling on the upper-state population),
    /// applies the detection flip channel, removes atoms that read as the
    /// lower state, and returns the readout string in label order.
    pub fn measure(&mut self, detection: &DetectionModel) -> Readout {
        let mut readout = String::with_capacity(self.atoms.len());
        let mut survivors = Vec::new();
        for slot in &mut self.atoms {
            let Some(qubit) = slot.qubit else {
                readout.push('0');
                continue;
            };
            let projected_one = self.rng.gen::<f64>() < qubit.prob1();
            let flip_prob = if projected_one {
                detection.eps_1_as_0
            } else {
                detection.eps_0_as_1
            };
            let flipped = self.rng.gen::<f64>() < flip_prob;
            let reads_one = projected_one != flipped;
            if reads_one {
                // Survivor keeps its projected state; an erroneous survivor
                // is still physically in the lower state.
                slot.qubit = Some(if projected_one {
                    TwoLevelState::ket1()
                } else {
                    TwoLevelState::ket0()
                });
                survivors.push(slot.geometry.label);
                readout.push('1');
            } else {
                slot.qubit = None;
                slot.occupancy = Occupancy::Removed;
                readout.push('0');
            }
        }
        Readout { readout, survivors }
    }
}
