//! Structured run configuration.
//!
//! A single TOML file can override any module default; CLI flags override
//! the file in turn. Actuator level sets are expressed as a setpoint list
//! plus an `off` toggle so the file stays plain TOML.

use crate::dataio::SplitMode;
use crate::error::{Error, Result};
use crate::forecaster::TrainConfig;
use crate::harness::HarnessConfig;
use crate::labeling::LabelConfig;
use crate::sim::{PhasePlan, SimConfig};
use crate::synth::{SynthKind, VqConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    pub phase_plan: Vec<PhasePlan>,
    pub heater_setpoints: Vec<f64>,
    pub heater_off_allowed: bool,
    pub cooler_setpoints: Vec<f64>,
    pub cooler_off_allowed: bool,
    pub room_capacitance: f64,
    pub wall_capacitance: f64,
    pub room_wall_conductance: f64,
    pub wall_outdoor_conductance: f64,
    pub actuator_gain: f64,
    pub actuator_tau_minutes: f64,
    pub outdoor_temp: f64,
    pub initial_temp_min: f64,
    pub initial_temp_max: f64,
    pub wall_initial_weight: f64,
    pub noise_std: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimSection {
            phase_plan: d.phase_plan.clone(),
            heater_setpoints: d.heater_levels.iter().flatten().copied().collect(),
            heater_off_allowed: d.heater_levels.contains(&None),
            cooler_setpoints: d.cooler_levels.iter().flatten().copied().collect(),
            cooler_off_allowed: d.cooler_levels.contains(&None),
            room_capacitance: d.room_capacitance,
            wall_capacitance: d.wall_capacitance,
            room_wall_conductance: d.room_wall_conductance,
            wall_outdoor_conductance: d.wall_outdoor_conductance,
            actuator_gain: d.actuator_gain,
            actuator_tau_minutes: d.actuator_tau_minutes,
            outdoor_temp: d.outdoor_temp,
            initial_temp_min: d.initial_temp_range.0,
            initial_temp_max: d.initial_temp_range.1,
            wall_initial_weight: d.wall_initial_weight,
            noise_std: d.noise_std,
        }
    }
}

impl SimSection {
    pub fn to_sim_config(&self, seed: u64) -> SimConfig {
        let levels = |setpoints: &[f64], off: bool| {
            let mut v: Vec<Option<f64>> = Vec::new();
            if off {
                v.push(None);
            }
            v.extend(setpoints.iter().map(|s| Some(*s)));
            v
        };
        SimConfig {
            phase_plan: self.phase_plan.clone(),
            heater_levels: levels(&self.heater_setpoints, self.heater_off_allowed),
            cooler_levels: levels(&self.cooler_setpoints, self.cooler_off_allowed),
            room_capacitance: self.room_capacitance,
            wall_capacitance: self.wall_capacitance,
            room_wall_conductance: self.room_wall_conductance,
            wall_outdoor_conductance: self.wall_outdoor_conductance,
            actuator_gain: self.actuator_gain,
            actuator_tau_minutes: self.actuator_tau_minutes,
            outdoor_temp: self.outdoor_temp,
            initial_temp_range: (self.initial_temp_min, self.initial_temp_max),
            wall_initial_weight: self.wall_initial_weight,
            noise_std: self.noise_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub fraction: f64,
    pub mode: SplitMode,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            fraction: 0.2,
            mode: SplitMode::Shuffled,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub kind: SynthKind,
    pub vq: VqConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            kind: SynthKind::Vq,
            vq: VqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessSection {
    pub runs: usize,
    pub synth_n: usize,
    pub ratios: Vec<f64>,
    /// Two-tailed trim fraction for histogram exports.
    pub trim_fraction: f64,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection {
            runs: 100,
            synth_n: 256,
            ratios: vec![0.25, 0.5, 0.75, 1.0],
            trim_fraction: 0.05,
        }
    }
}

/// Whole-run configuration; any field may be omitted in the TOML file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub sim: SimSection,
    pub labeling: LabelConfig,
    pub split: SplitSection,
    pub forecaster: TrainConfig,
    pub synth: SynthSection,
    pub harness: HarnessSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Assemble the harness config from the sections.
    pub fn harness_config(&self) -> HarnessConfig {
        HarnessConfig {
            runs: self.harness.runs,
            synth_n: self.harness.synth_n,
            synth_kind: self.synth.kind,
            ratios: self.harness.ratios.clone(),
            forecaster: self.forecaster,
            vq: self.synth.vq.clone(),
            labeling: self.labeling,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.split.fraction, 0.2);
        assert_eq!(cfg.harness.runs, 100);
        assert_eq!(cfg.synth.vq.codebook_size, 64);
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 9
            [forecaster]
            hidden = 32
            [synth]
            kind = "bootstrap"
            [harness]
            runs = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.forecaster.hidden, 32);
        assert_eq!(cfg.forecaster.batch_size, 16);
        assert_eq!(cfg.synth.kind, SynthKind::Bootstrap);
        assert_eq!(cfg.harness.runs, 5);
    }

    #[test]
    fn level_sets_round_trip_through_section() {
        let section: SimSection = toml::from_str(
            r#"
            heater_setpoints = [30.0, 50.0]
            heater_off_allowed = false
            "#,
        )
        .unwrap();
        let sim = section.to_sim_config(1);
        assert_eq!(sim.heater_levels, vec![Some(30.0), Some(50.0)]);
        assert!(sim.cooler_levels.contains(&None));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<RunConfig>("nonsense = 1").is_err());
    }

    #[test]
    fn config_serializes_back_to_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.harness.synth_n, cfg.harness.synth_n);
    }
}
