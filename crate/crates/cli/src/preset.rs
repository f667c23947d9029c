//! Toy PC645 parameter sets.
//!
//! Two excited levels at 510 and 529 THz, τ_d = 1.32 fs and a carrier in
//! the middle at 519.5 THz. The coupling uses μ = 12.8 D. Sunlight is
//! quoted photometrically (130 000 lux), which has no field-strength
//! equivalent without a spectrum; the preset takes an irradiance of
//! 1000 W/m² instead, E₀ = √(2I/(cε₀)) ≈ 868 V/m and μE₀/ħ ≈ 3.5e-7 rad/fs.
//! First-order 𝒞 does not depend on this choice.

use std::f64::consts::TAU;
use std::path::PathBuf;

use crate::config::{
    EnsembleConfig, FieldConfig, GridConfig, Mode, NoiseConfig, OutputConfig, Scenario,
    ScenarioConfig, SystemConfig,
};

const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
const HBAR: f64 = 1.054_571_817e-34;
const DEBYE: f64 = 3.335_640_95e-30;

pub const IRRADIANCE_W_M2: f64 = 1000.0;
pub const DIPOLE_DEBYE: f64 = 12.8;
pub const LEVELS_THZ: [f64; 2] = [510.0, 529.0];
pub const CARRIER_THZ: f64 = 519.5;
pub const TAU_D_FS: f64 = 1.32;

/// Peak field of a plane wave of irradiance `i` (W/m²), in V/m.
pub fn field_strength(i: f64) -> f64 {
    (2.0 * i / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY)).sqrt()
}

/// μE₀/ħ in rad/fs.
pub fn coupling_rate() -> f64 {
    DIPOLE_DEBYE * DEBYE * field_strength(IRRADIANCE_W_M2) / HBAR * 1e-15
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetMode {
    Cw,
    Pulse,
}

pub fn preset_pc645(mode: PresetMode) -> ScenarioConfig {
    let coupling_thz = coupling_rate() / (TAU * 1e-3);
    let system = SystemConfig {
        ground_thz: 0.0,
        excited_thz: LEVELS_THZ,
        coupling_thz: [coupling_thz; 2],
    };
    let base_field = FieldConfig {
        carrier_thz: Some(CARRIER_THZ),
        amplitude: 1.0,
        tau_d_fs: Some(TAU_D_FS),
        turn_on_fs: 0.0,
        tau_p_fs: None,
        center_fs: None,
        pump_power: None,
    };
    // 0.05 fs samples with two RK4 substeps meet the ensemble step limits.
    let ensemble = EnsembleConfig {
        n: 1000,
        substeps: 2,
        ..EnsembleConfig::default()
    };
    match mode {
        PresetMode::Cw => ScenarioConfig {
            scenario: Scenario::CwSudden,
            mode: Mode::Analytic,
            system,
            field: base_field,
            noise: NoiseConfig::default(),
            grid: GridConfig {
                t_start_fs: 0.0,
                t_end_fs: 1000.0,
                step_fs: 0.05,
                record_every: 1,
            },
            ensemble,
            output: OutputConfig {
                dir: PathBuf::from("out"),
                prefix: Some("pc645_cw".into()),
            },
        },
        PresetMode::Pulse => ScenarioConfig {
            scenario: Scenario::Pulse,
            mode: Mode::Analytic,
            system,
            field: FieldConfig {
                tau_p_fs: Some(30.0),
                center_fs: Some(0.0),
                ..base_field
            },
            noise: NoiseConfig::default(),
            grid: GridConfig {
                t_start_fs: -200.0,
                t_end_fs: 1000.0,
                step_fs: 0.05,
                record_every: 1,
            },
            ensemble,
            output: OutputConfig {
                dir: PathBuf::from("out"),
                prefix: Some("pc645_pulse".into()),
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_from_irradiance() {
        assert!((field_strength(1000.0) - 868.0).abs() < 0.5);
        let rate = coupling_rate();
        assert!((rate - 3.514e-7).abs() < 2e-10, "{rate}");
    }

    #[test]
    fn presets_resolve() {
        for mode in [PresetMode::Cw, PresetMode::Pulse] {
            let c = preset_pc645(mode);
            let r = c.resolve().unwrap();
            assert!((r.system.splitting() - 0.119381).abs() < 1e-6);
            assert!((r.system.center_carrier() - r.field.carrier().unwrap()).abs() < 1e-12);
        }
    }
}
