//! Scenario configuration files.
//!
//! The format is TOML restricted to one level of tables, written either as
//! sections or as dotted keys (`field.tau_d_fs = 120`). Frequencies are
//! ordinary frequencies in THz, times in fs.
//!
//! ```toml
//! scenario = "cw_sudden"          # cw_sudden | cw_turnon_avg | pulse | white_noise
//!                                 # | correlation_check | stationary_f
//! mode = "analytic"               # analytic | ensemble
//! system.excited_thz = [71.666667, 88.333333]
//! system.coupling_thz = [1.0, 1.0]
//! field.tau_d_fs = 120
//! grid.t_end_fs = 1200
//! grid.step_fs = 0.25
//! ensemble.n = 4000
//! output.dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vcoh_core::fieldgen::{FieldSpec, JumpModel, NoiseModelConfig, TimeGrid};
use vcoh_core::model::{angular, VSystem};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown sweep axis '{axis}'; valid axes: {}", valid.join(", "))]
    UnknownAxis {
        axis: String,
        valid: Vec<&'static str>,
    },
}

fn field_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    CwSudden,
    CwTurnonAvg,
    Pulse,
    WhiteNoise,
    CorrelationCheck,
    StationaryF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub ground_thz: f64,
    pub excited_thz: [f64; 2],
    #[serde(default = "unit_couplings")]
    pub coupling_thz: [f64; 2],
}

fn unit_couplings() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Defaults to the midpoint of the two transitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_thz: Option<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_d_fs: Option<f64>,
    #[serde(default)]
    pub turn_on_fs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_p_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_fs: Option<f64>,
    /// White-noise pump power 𝓡 in rad²/fs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            carrier_thz: None,
            amplitude: 1.0,
            tau_d_fs: None,
            turn_on_fs: 0.0,
            tau_p_fs: None,
            center_fs: None,
            pump_power: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Poisson jumps for CW, frequency jitter for pulses.
    #[default]
    Auto,
    PoissonRate,
    WienerCollision,
    FrequencyJitter,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub model: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_start_fs: f64,
    pub t_end_fs: f64,
    pub step_fs: f64,
    /// Output every k-th grid point.
    #[serde(default = "one_usize")]
    pub record_every: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "one_u64")]
    pub master_seed: u64,
    /// 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// RK4 steps per grid interval.
    #[serde(default = "one_usize")]
    pub substeps: usize,
    /// Correlation checks use every k-th grid point.
    #[serde(default = "one_usize")]
    pub kernel_stride: usize,
}

fn default_n() -> usize {
    1000
}

fn one_u64() -> u64 {
    1
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            master_seed: 1,
            workers: 0,
            substeps: 1,
            kernel_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File name prefix; defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub mode: Mode,
    pub system: SystemConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Validated core objects built from a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub system: VSystem,
    pub field: FieldSpec,
    pub noise: NoiseModelConfig,
    pub grid: TimeGrid,
}

/// Numeric fields accepted by [`ScenarioConfig::set_axis`].
pub const SWEEP_AXES: &[&str] = &[
    "field.tau_d_fs",
    "field.tau_p_fs",
    "field.amplitude",
    "field.carrier_thz",
    "field.turn_on_fs",
    "field.center_fs",
    "field.pump_power",
    "system.split_thz",
    "system.tau_c_fs",
    "grid.t_end_fs",
    "grid.step_fs",
    "ensemble.n",
    "ensemble.master_seed",
];

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| {
            serde_json::to_value(self.scenario)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| "run".into())
        })
    }

    /// Sets one numeric field. `system.split_thz` and `system.tau_c_fs`
    /// move both excited levels symmetrically about their midpoint.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), ConfigError> {
        match axis {
            "field.tau_d_fs" => self.field.tau_d_fs = Some(value),
            "field.tau_p_fs" => self.field.tau_p_fs = Some(value),
            "field.amplitude" => self.field.amplitude = value,
            "field.carrier_thz" => self.field.carrier_thz = Some(value),
            "field.turn_on_fs" => self.field.turn_on_fs = value,
            "field.center_fs" => self.field.center_fs = Some(value),
            "field.pump_power" => self.field.pump_power = Some(value),
            "system.split_thz" | "system.tau_c_fs" => {
                let split = if axis == "system.split_thz" {
                    value
                } else {
                    1000.0 / value
                };
                let mid = 0.5 * (self.system.excited_thz[0] + self.system.excited_thz[1]);
                self.system.excited_thz = [mid - 0.5 * split, mid + 0.5 * split];
            }
            "grid.t_end_fs" => self.grid.t_end_fs = value,
            "grid.step_fs" => self.grid.step_fs = value,
            "ensemble.n" => self.ensemble.n = value as usize,
            "ensemble.master_seed" => self.ensemble.master_seed = value as u64,
            _ => {
                return Err(ConfigError::UnknownAxis {
                    axis: axis.to_owned(),
                    valid: SWEEP_AXES.to_vec(),
                })
            }
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let s = &self.system;
        let system = VSystem::from_thz(s.ground_thz, s.excited_thz, s.coupling_thz)
            .map_err(|e| field_err("system", e.to_string()))?;
        let f = &self.field;
        let carrier = match f.carrier_thz {
            Some(nu) => angular(nu),
            None => system.center_carrier(),
        };
        let need = |v: Option<f64>, name: &'static str| {
            v.ok_or_else(|| field_err(name, "required for this scenario"))
        };
        let field = match self.scenario {
            Scenario::CwSudden | Scenario::CwTurnonAvg | Scenario::StationaryF => FieldSpec::cw(
                carrier,
                f.amplitude,
                need(f.tau_d_fs, "field.tau_d_fs")?,
                f.turn_on_fs,
            ),
            Scenario::Pulse => FieldSpec::pulse(
                carrier,
                f.amplitude,
                need(f.tau_d_fs, "field.tau_d_fs")?,
                need(f.tau_p_fs, "field.tau_p_fs")?,
                need(f.center_fs, "field.center_fs")?,
            ),
            Scenario::WhiteNoise => {
                FieldSpec::white_noise(f.amplitude, need(f.pump_power, "field.pump_power")?)
            }
            Scenario::CorrelationCheck => match (f.tau_p_fs, f.center_fs) {
                (Some(tp), Some(tm)) => FieldSpec::pulse(
                    carrier,
                    f.amplitude,
                    need(f.tau_d_fs, "field.tau_d_fs")?,
                    tp,
                    tm,
                ),
                _ => FieldSpec::cw(
                    carrier,
                    f.amplitude,
                    need(f.tau_d_fs, "field.tau_d_fs")?,
                    f.turn_on_fs,
                ),
            },
        }
        .map_err(|e| field_err("field", e.to_string()))?;

        let n = &self.noise;
        let jump_model = match n.model {
            NoiseKind::Auto => NoiseModelConfig::matching(&field).jump_model,
            NoiseKind::PoissonRate => JumpModel::PoissonRate,
            NoiseKind::FrequencyJitter => JumpModel::FrequencyJitter,
            NoiseKind::WienerCollision => JumpModel::WienerCollision {
                drift: n
                    .drift_fs
                    .ok_or_else(|| field_err("noise.drift_fs", "required by wiener_collision"))?,
                b_min: n.b_min.unwrap_or(10),
                b_max: n.b_max.unwrap_or(12),
            },
        };
        let noise =
            NoiseModelConfig::new(jump_model).map_err(|e| field_err("noise", e.to_string()))?;

        let g = &self.grid;
        if !(g.step_fs > 0.0) {
            return Err(field_err("grid.step_fs", "must be positive"));
        }
        if !(g.t_end_fs > g.t_start_fs) {
            return Err(field_err("grid.t_end_fs", "must exceed grid.t_start_fs"));
        }
        if g.record_every == 0 {
            return Err(field_err("grid.record_every", "must be positive"));
        }
        let len = ((g.t_end_fs - g.t_start_fs) / g.step_fs * (1.0 + 1e-12)).floor() as usize + 1;
        let grid = TimeGrid::new(g.t_start_fs, g.step_fs, len)
            .map_err(|e| field_err("grid", e.to_string()))?;

        let e = &self.ensemble;
        if self.mode == Mode::Ensemble || self.scenario == Scenario::CorrelationCheck {
            if e.n < 2 {
                return Err(field_err("ensemble.n", "must be at least 2"));
            }
            if e.substeps == 0 {
                return Err(field_err("ensemble.substeps", "must be positive"));
            }
            if e.kernel_stride == 0 {
                return Err(field_err("ensemble.kernel_stride", "must be positive"));
            }
        }
        if self.mode == Mode::Ensemble
            && !matches!(self.scenario, Scenario::CwSudden | Scenario::Pulse)
        {
            return Err(field_err(
                "mode",
                "ensemble mode is available for cw_sudden and pulse only",
            ));
        }
        Ok(Resolved {
            system,
            field,
            noise,
            grid,
        })
    }
}
