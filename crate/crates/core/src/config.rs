//! TOML scenario files.
//!
//! ```toml
//! [pulse]
//! t0 = 0.67
//! tau = 0.1
//!
//! [grid]
//! dt = 0.005
//! t_end = 1500.0
//! n_slabs = 128
//!
//! [target1]
//! xi = 15.0
//! delta_over_gamma = 80.0
//! switch_times = "3.28"
//!
//! [target2]
//! xi = 15.0
//! delta_over_gamma = 80.0
//!
//! [spectrum]
//! omega_min = -200.0
//! omega_max = 200.0
//! omega_step = 0.05
//! ```
//!
//! `[constants]` and `[switching]` are optional. Every section rejects
//! unknown keys.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NfsError, Result};
use crate::model::{
    GridConfig, NuclearConstants, PulseConfig, ScenarioConfig, SpectrumGrid, TargetConfig,
};
use crate::switching::{SwitchSchedule, SwitchingType, DEFAULT_DURATION_NS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConstantsSection {
    gamma: f64,
    cg_a: f64,
    k_xray: f64,
    n_electronic_re: f64,
    n_electronic_im: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        NuclearConstants::default().into()
    }
}

impl From<NuclearConstants> for ConstantsSection {
    fn from(c: NuclearConstants) -> Self {
        Self {
            gamma: c.gamma,
            cg_a: c.cg_a,
            k_xray: c.k_xray,
            n_electronic_re: c.n_electronic.re,
            n_electronic_im: c.n_electronic.im,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PulseSection {
    t0: f64,
    tau: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        let p = PulseConfig::default();
        Self { t0: p.t0, tau: p.tau }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridSection {
    dt: f64,
    t_end: f64,
    n_slabs: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            dt: g.dt,
            t_end: g.t_end,
            n_slabs: g.n_slabs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TargetSection {
    xi: f64,
    thickness_l: f64,
    delta_over_gamma: f64,
    include_electronic: bool,
    /// Comma-separated inversion times, ns.
    switch_times: String,
    duration_d: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        let t = TargetConfig::default();
        Self {
            xi: t.xi,
            thickness_l: t.thickness_l,
            delta_over_gamma: t.delta_over_gamma,
            include_electronic: t.include_electronic,
            switch_times: String::new(),
            duration_d: DEFAULT_DURATION_NS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpectrumSection {
    omega_min: f64,
    omega_max: f64,
    omega_step: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let s = SpectrumGrid::default();
        Self {
            omega_min: s.omega_min,
            omega_max: s.omega_max,
            omega_step: s.omega_step,
        }
    }
}

/// Schedules derived at run time from the unperturbed output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingPlan {
    /// Switching type 1–4; mutually exclusive with `node_switches`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_type: Option<u8>,
    /// First inversion, ns; defaults to the first intensity node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    /// Delay of the downstream inversion for type 4, ns.
    #[serde(default)]
    pub tau_d: f64,
    #[serde(default = "default_duration")]
    pub duration_d: f64,
    /// Invert both targets at this many nodes after the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_switches: Option<usize>,
    /// Re-detect nodes after every added inversion.
    #[serde(default)]
    pub iterative_nodes: bool,
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_NS
}

impl SwitchingPlan {
    pub fn with_type(kind: SwitchingType, t1: Option<f64>, tau_d: f64) -> Self {
        Self {
            schedule_type: Some(kind as u8),
            t1,
            tau_d,
            duration_d: DEFAULT_DURATION_NS,
            node_switches: None,
            iterative_nodes: false,
        }
    }

    pub fn nodes(n: usize) -> Self {
        Self {
            schedule_type: None,
            t1: None,
            tau_d: 0.0,
            duration_d: DEFAULT_DURATION_NS,
            node_switches: Some(n),
            iterative_nodes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.schedule_type, self.node_switches) {
            (Some(_), Some(_)) => {
                return Err(NfsError::config(
                    "[switching] sets both schedule_type and node_switches",
                ))
            }
            (None, None) => {
                return Err(NfsError::config(
                    "[switching] needs schedule_type or node_switches",
                ))
            }
            (Some(tag), None) => {
                SwitchingType::try_from(tag)?;
            }
            (None, Some(_)) => {}
        }
        if !(self.duration_d > 0.0 && self.duration_d.is_finite()) {
            return Err(NfsError::config("[switching] duration_d must be > 0"));
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0 && t1.is_finite()) {
                return Err(NfsError::config("[switching] t1 must be > 0"));
            }
        }
        if !self.tau_d.is_finite() {
            return Err(NfsError::config("[switching] tau_d must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    constants: ConstantsSection,
    #[serde(default)]
    pulse: PulseSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target1: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target2: Option<TargetSection>,
    #[serde(default)]
    spectrum: SpectrumSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    switching: Option<SwitchingPlan>,
}

/// A scenario plus an optional plan for deriving its switch times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub switching: Option<SwitchingPlan>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if let Some(plan) = &self.switching {
            plan.validate()?;
            if self.scenario.targets.is_empty() {
                return Err(NfsError::config("[switching] needs at least one target"));
            }
        }
        Ok(())
    }
}

fn parse_times(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| NfsError::config(format!("bad switch time '{p}'")))
        })
        .collect()
}

fn format_times(times: &[f64]) -> String {
    times
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl TargetSection {
    fn into_target(self) -> Result<TargetConfig> {
        let times = parse_times(&self.switch_times)?;
        Ok(TargetConfig {
            xi: self.xi,
            thickness_l: self.thickness_l,
            delta_over_gamma: self.delta_over_gamma,
            include_electronic: self.include_electronic,
            schedule: SwitchSchedule::new(times, self.duration_d)?,
        })
    }

    fn from_target(t: &TargetConfig) -> Self {
        Self {
            xi: t.xi,
            thickness_l: t.thickness_l,
            delta_over_gamma: t.delta_over_gamma,
            include_electronic: t.include_electronic,
            switch_times: format_times(&t.schedule.switch_times),
            duration_d: t.schedule.duration_d,
        }
    }
}

impl FileConfig {
    fn into_experiment(self) -> Result<ExperimentConfig> {
        if self.target1.is_none() && self.target2.is_some() {
            return Err(NfsError::config("[target2] given without [target1]"));
        }
        let c = self.constants;
        let constants = NuclearConstants {
            gamma: c.gamma,
            cg_a: c.cg_a,
            k_xray: c.k_xray,
            n_electronic: Complex64::new(c.n_electronic_re, c.n_electronic_im),
        };
        let mut targets = Vec::new();
        for t in [self.target1, self.target2].into_iter().flatten() {
            targets.push(t.into_target()?);
        }
        let scenario = ScenarioConfig {
            constants,
            pulse: PulseConfig {
                t0: self.pulse.t0,
                tau: self.pulse.tau,
            },
            grid: GridConfig {
                dt: self.grid.dt,
                t_end: self.grid.t_end,
                n_slabs: self.grid.n_slabs,
            },
            targets,
            spectrum: SpectrumGrid {
                omega_min: self.spectrum.omega_min,
                omega_max: self.spectrum.omega_max,
                omega_step: self.spectrum.omega_step,
            },
        };
        Ok(ExperimentConfig {
            scenario,
            switching: self.switching,
        })
    }

    fn from_experiment(cfg: &ExperimentConfig) -> Self {
        let s = &cfg.scenario;
        Self {
            constants: s.constants.into(),
            pulse: PulseSection {
                t0: s.pulse.t0,
                tau: s.pulse.tau,
            },
            grid: GridSection {
                dt: s.grid.dt,
                t_end: s.grid.t_end,
                n_slabs: s.grid.n_slabs,
            },
            target1: s.targets.first().map(TargetSection::from_target),
            target2: s.targets.get(1).map(TargetSection::from_target),
            spectrum: SpectrumSection {
                omega_min: s.spectrum.omega_min,
                omega_max: s.spectrum.omega_max,
                omega_step: s.spectrum.omega_step,
            },
            switching: cfg.switching.clone(),
        }
    }
}

/// Parses and validates a scenario file's contents.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| NfsError::config(e.to_string()))?;
    let cfg = file.into_experiment()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| NfsError::io(path, e))?;
    parse_config(&text)
}

/// Canonical TOML text; `parse_config(&to_toml(c))` reproduces `c`.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(&FileConfig::from_experiment(cfg)).expect("config types always serialize")
}

pub fn scenario_to_toml(scenario: &ScenarioConfig) -> String {
    to_toml(&ExperimentConfig {
        scenario: scenario.clone(),
        switching: None,
    })
}

/// SHA-256 of the canonical TOML, hex encoded.
pub fn config_hash(scenario: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(scenario_to_toml(scenario).as_bytes()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const FIG2: &str = r#"
[pulse]
t0 = 0.67
tau = 0.1

[grid]
dt = 0.005
t_end = 1500.0
n_slabs = 128

[target1]
xi = 15.0
delta_over_gamma = 80.0
switch_times = "3.28"

[target2]
xi = 15.0
delta_over_gamma = 80.0
switch_times = "3.28"

[spectrum]
omega_min = -200.0
omega_max = 200.0
omega_step = 0.05
"#;

    #[test]
    fn parses_plain_scenario() {
        let cfg = parse_config(FIG2).unwrap();
        assert_eq!(cfg.scenario.targets.len(), 2);
        assert_eq!(cfg.scenario.targets[1].schedule.switch_times, vec![3.28]);
        assert!(!cfg.scenario.targets[0].include_electronic);
        assert_eq!(cfg.scenario.grid, GridConfig::default());
        assert!(cfg.switching.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FIG2.replace("tau = 0.1", "tau = 0.1\nwidth = 3");
        assert!(matches!(parse_config(&bad), Err(NfsError::Config(_))));
        let bad = format!("{FIG2}\n[extra]\nx = 1\n");
        assert!(matches!(parse_config(&bad), Err(NfsError::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad = FIG2.replace("dt = 0.005", "dt = 0.007");
        assert!(matches!(parse_config(&bad), Err(NfsError::Config(_))));
        let bad = FIG2.replace("switch_times = \"3.28\"\n\n[target2]", "switch_times = \"3.28, x\"\n\n[target2]");
        assert!(matches!(parse_config(&bad), Err(NfsError::Config(_))));
        let bad = FIG2.replacen("delta_over_gamma = 80.0", "delta_over_gamma = 70.0", 1);
        assert!(matches!(parse_config(&bad), Err(NfsError::Config(_))));
    }

    #[test]
    fn switching_section() {
        let text = format!("{FIG2}\n[switching]\nschedule_type = 4\nt1 = 3.28\ntau_d = 4.2\n");
        let cfg = parse_config(&text).unwrap();
        let plan = cfg.switching.unwrap();
        assert_eq!(plan.schedule_type, Some(4));
        assert_eq!(plan.tau_d, 4.2);
        assert_eq!(plan.duration_d, DEFAULT_DURATION_NS);
        let both = format!("{FIG2}\n[switching]\nschedule_type = 1\nnode_switches = 5\n");
        assert!(parse_config(&both).is_err());
        let bad_type = format!("{FIG2}\n[switching]\nschedule_type = 7\n");
        assert!(parse_config(&bad_type).is_err());
    }

    #[test]
    fn empty_file_has_two_default_targets_absent() {
        let cfg = parse_config("").unwrap();
        assert!(cfg.scenario.targets.is_empty());
        assert!(parse_config("[target2]\nxi = 3.0\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config(FIG2).unwrap().scenario;
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.targets[0].xi = 15.5;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    proptest! {
        #[test]
        fn toml_round_trip(
            xi1 in 0.0f64..60.0,
            xi2 in 0.0f64..60.0,
            delta in 1.0f64..160.0,
            t1 in 1.5f64..40.0,
            gaps in proptest::collection::vec(4.0f64..30.0, 0..5),
            electronic in any::<bool>(),
            second in any::<bool>(),
            tau_d in -10.0f64..10.0,
        ) {
            let mut times = vec![t1];
            for g in &gaps { let last = *times.last().unwrap(); times.push(last + g); }
            let t = |xi| TargetConfig {
                xi,
                delta_over_gamma: delta,
                include_electronic: electronic,
                schedule: SwitchSchedule::new(times.clone(), 2.0).unwrap(),
                ..TargetConfig::default()
            };
            let mut targets = vec![t(xi1)];
            if second { targets.push(t(xi2)); }
            let cfg = ExperimentConfig {
                scenario: ScenarioConfig { targets, ..ScenarioConfig::default() },
                switching: Some(SwitchingPlan::with_type(SwitchingType::Delayed, Some(t1), tau_d)),
            };
            let back = parse_config(&to_toml(&cfg)).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
