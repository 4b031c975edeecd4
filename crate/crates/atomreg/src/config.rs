//! TOML run configuration. Every key has a default, and the defaults are
//! exactly the reference parameter set (4 G offset field, 15 G/cm gradient,
//! -2.45 MHz/G Zeeman coefficient, 32 kHz square-pulse Rabi frequency,
//! 80 uK at 1.6 kHz radial frequency, 15 um axis offset, 1% detection
//! errors), so an empty file and the built-in defaults are equivalent.
//!
//! ```toml
//! [field]
//! b0_gauss = 4.0
//! b_grad_gauss_per_cm = 15.0
//! zeeman_coeff_mhz_per_gauss = -2.45
//! axis_offset_y_um = 0.0
//! axis_offset_z_um = 15.0
//!
//! [geometry]
//! positions_um = [-40.0, -20.0, 0.0, 20.0, 40.0]
//!
//! [thermal]
//! temperature_uk = 80.0
//! radial_freq_khz = 1.6
//! atom_mass_kg = 2.20695e-25
//! trials = 100000
//! seed = 1
//!
//! [detection]
//! eps_0_as_1 = 0.01
//! eps_1_as_0 = 0.01
//!
//! [init]
//! pump_fidelity = 1.0
//!
//! [run]
//! dead_time_us = 1.0
//! shots = 1000
//! seed = 1
//! rabi_khz = 32.0
//!
//! [shapes.c]
//! kind = "gaussian"
//! sigma_tau_us = 35.35
//! # peak_rabi_khz = ...   # omitted: calibrated to pulse area pi
//! # truncation = 4.0
//! ```
//!
//! Named shapes default to `a`, `b`, `c` (Gaussian sigma_tau 8.85, 17.7,
//! 35.35 us) and `sq32` (square, 15.625 us).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bloch::{calibrate_pi_pulse, BlochError, EnvelopeKind, PulseShape};
use crate::dephasing::{DephasingError, ThermalConfig, CS_MASS_KG};
use crate::fieldmap::{AtomGeometry, FieldConfig, FieldError};
use crate::register::{DetectionModel, RegisterError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Thermal(#[from] DephasingError),
    #[error(transparent)]
    Detection(#[from] RegisterError),
    #[error("shape `{name}`: {reason}")]
    Shape { name: String, reason: String },
    #[error("shape `{name}`: {source}")]
    ShapePulse { name: String, source: BlochError },
    #[error("pump fidelity must lie in [0, 1], got {0}")]
    BadPumpFidelity(f64),
    #[error("run.rabi_khz must be finite and > 0, got {0}")]
    BadRabi(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub b0_gauss: f64,
    pub b_grad_gauss_per_cm: f64,
    pub zeeman_coeff_mhz_per_gauss: f64,
    pub axis_offset_y_um: f64,
    pub axis_offset_z_um: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            b0_gauss: 4.0,
            b_grad_gauss_per_cm: 15.0,
            zeeman_coeff_mhz_per_gauss: -2.45,
            axis_offset_y_um: 0.0,
            axis_offset_z_um: 15.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub positions_um: Vec<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            positions_um: vec![-40.0, -20.0, 0.0, 20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalSection {
    pub temperature_uk: f64,
    pub radial_freq_khz: f64,
    pub atom_mass_kg: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ThermalSection {
    fn default() -> Self {
        Self {
            temperature_uk: 80.0,
            radial_freq_khz: 1.6,
            atom_mass_kg: CS_MASS_KG,
            trials: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub eps_0_as_1: f64,
    pub eps_1_as_0: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            eps_0_as_1: 0.01,
            eps_1_as_0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub pump_fidelity: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self { pump_fidelity: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    pub kind: String,
    #[serde(default)]
    pub sigma_tau_us: Option<f64>,
    #[serde(default)]
    pub duration_us: Option<f64>,
    #[serde(default)]
    pub truncation: Option<f64>,
    /// Peak Rabi frequency; omitted means the pulse is calibrated so its
    /// resonant area is pi.
    #[serde(default)]
    pub peak_rabi_khz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub dead_time_us: f64,
    pub shots: u64,
    pub seed: u64,
    /// Rabi frequency of the square drive used by the rabi sweep.
    pub rabi_khz: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            dead_time_us: 1.0,
            shots: 1000,
            seed: 1,
            rabi_khz: 32.0,
        }
    }
}

/// The raw TOML schema. All sections default to the reference parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub field: FieldSection,
    pub geometry: GeometrySection,
    pub thermal: ThermalSection,
    pub detection: DetectionSection,
    pub init: InitSection,
    pub shapes: BTreeMap<String, ShapeSection>,
    pub run: RunSection,
}

impl ShapeSection {
    fn build(&self, name: &str) -> Result<PulseShape, ConfigError> {
        let kind = match self.kind.to_ascii_lowercase().as_str() {
            "square" => EnvelopeKind::Square,
            "gaussian" => EnvelopeKind::Gaussian,
            other => {
                return Err(ConfigError::Shape {
                    name: name.to_owned(),
                    reason: format!("unknown kind `{other}`; expected `square` or `gaussian`"),
                })
            }
        };
        let duration = match kind {
            EnvelopeKind::Square => self.duration_us.ok_or_else(|| ConfigError::Shape {
                name: name.to_owned(),
                reason: "square shapes need duration_us".to_owned(),
            })?,
            EnvelopeKind::Gaussian => self.sigma_tau_us.ok_or_else(|| ConfigError::Shape {
                name: name.to_owned(),
                reason: "gaussian shapes need sigma_tau_us".to_owned(),
            })?,
        };
        if kind == EnvelopeKind::Square && self.sigma_tau_us.is_some() {
            return Err(ConfigError::Shape {
                name: name.to_owned(),
                reason: "square shapes take duration_us, not sigma_tau_us".to_owned(),
            });
        }
        if kind == EnvelopeKind::Square && self.truncation.is_some() {
            return Err(ConfigError::Shape {
                name: name.to_owned(),
                reason: "truncation applies to gaussian shapes only".to_owned(),
            });
        }
        let wrap = |source: BlochError| ConfigError::ShapePulse {
            name: name.to_owned(),
            source,
        };
        let shape = match (kind, self.peak_rabi_khz) {
            (EnvelopeKind::Square, Some(peak)) => PulseShape::square(peak, duration).map_err(wrap)?,
            (EnvelopeKind::Square, None) => {
                calibrate_pi_pulse(EnvelopeKind::Square, duration).map_err(wrap)?
            }
            (EnvelopeKind::Gaussian, peak) => {
                let truncation = self
                    .truncation
                    .unwrap_or(crate::bloch::DEFAULT_GAUSSIAN_TRUNCATION);
                let base = PulseShape::gaussian_with_truncation(
                    peak.unwrap_or(0.0),
                    duration,
                    truncation,
                )
                .map_err(wrap)?;
                match peak {
                    Some(_) => base,
                    None => base.with_area(std::f64::consts::PI).map_err(wrap)?,
                }
            }
        };
        Ok(shape)
    }
}

fn default_shapes() -> BTreeMap<String, PulseShape> {
    let mut shapes = BTreeMap::new();
    for (name, sigma) in [("a", 8.85), ("b", 17.7), ("c", 35.35)] {
        shapes.insert(
            name.to_owned(),
            calibrate_pi_pulse(EnvelopeKind::Gaussian, sigma).expect("valid preset"),
        );
    }
    shapes.insert(
        "sq32".to_owned(),
        calibrate_pi_pulse(EnvelopeKind::Square, 15.625).expect("valid preset"),
    );
    shapes
}

/// Validated run configuration in canonical units.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub field: FieldConfig,
    pub geometry: Vec<AtomGeometry>,
    pub thermal: ThermalConfig,
    pub detection: DetectionModel,
    pub pump_fidelity: f64,
    pub shapes: BTreeMap<String, PulseShape>,
    pub dead_time_us: f64,
    pub shots: u64,
    pub run_seed: u64,
    pub rabi_khz: f64,
    /// The raw section values, kept for echoing into output headers.
    pub raw: RawConfig,
}

impl RawConfig {
    pub fn build(self) -> Result<RunConfig, ConfigError> {
        let field = FieldConfig::new(
            self.field.b0_gauss,
            self.field.b_grad_gauss_per_cm,
            self.field.zeeman_coeff_mhz_per_gauss,
            self.field.axis_offset_y_um,
            self.field.axis_offset_z_um,
        )?;
        let geometry = AtomGeometry::label_positions(&self.geometry.positions_um)?;
        let thermal = ThermalConfig::new(
            self.thermal.temperature_uk,
            self.thermal.radial_freq_khz,
            self.thermal.atom_mass_kg,
            self.thermal.trials,
            self.thermal.seed,
        )?;
        let detection = DetectionModel::new(self.detection.eps_0_as_1, self.detection.eps_1_as_0)?;
        if !self.init.pump_fidelity.is_finite() || !(0.0..=1.0).contains(&self.init.pump_fidelity)
        {
            return Err(ConfigError::BadPumpFidelity(self.init.pump_fidelity));
        }
        if !self.run.rabi_khz.is_finite() || self.run.rabi_khz <= 0.0 {
            return Err(ConfigError::BadRabi(self.run.rabi_khz));
        }
        // Named shapes from the file extend/override the presets.
        let mut shapes = default_shapes();
        for (name, section) in &self.shapes {
            shapes.insert(name.clone(), section.build(name)?);
        }
        Ok(RunConfig {
            field,
            geometry,
            thermal,
            detection,
            pump_fidelity: self.init.pump_fidelity,
            shapes,
            dead_time_us: self.run.dead_time_us,
            shots: self.run.shots,
            run_seed: self.run.seed,
            rabi_khz: self.run.rabi_khz,
            raw: self,
        })
    }
}

impl RunConfig {
    /// The built-in reference parameter set.
    pub fn paper_defaults() -> Self {
        RawConfig::default().build().expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.build()
    }

    pub fn from_toml_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Overrides the seed of every stochastic component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.thermal = self.thermal.with_seed(seed);
        self.run_seed = seed;
        self.raw.thermal.seed = seed;
        self.raw.run.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.thermal = self.thermal.with_trials(trials);
        self.raw.thermal.trials = trials;
        self
    }

    /// Key/value pairs echoed into output file headers.
    pub fn header_params(&self) -> Vec<(String, String)> {
        let f = &self.raw.field;
        let t = &self.raw.thermal;
        vec![
            ("b0_gauss".into(), f.b0_gauss.to_string()),
            ("b_grad_gauss_per_cm".into(), f.b_grad_gauss_per_cm.to_string()),
            (
                "zeeman_coeff_mhz_per_gauss".into(),
                f.zeeman_coeff_mhz_per_gauss.to_string(),
            ),
            ("axis_offset_y_um".into(), f.axis_offset_y_um.to_string()),
            ("axis_offset_z_um".into(), f.axis_offset_z_um.to_string()),
            ("temperature_uk".into(), t.temperature_uk.to_string()),
            ("radial_freq_khz".into(), t.radial_freq_khz.to_string()),
            ("trials".into(), t.trials.to_string()),
            ("seed".into(), t.seed.to_string()),
            (
                "eps_0_as_1".into(),
                self.raw.detection.eps_0_as_1.to_string(),
            ),
            (
                "eps_1_as_0".into(),
                self.raw.detection.eps_1_as_0.to_string(),
            ),
        ]
    }
}
