//! Run and sweep configuration files (TOML) with validation.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fdsb_core::beamforming::LoadingVariant;
use fdsb_core::engine::{EngineConfig, RunConfig};
use fdsb_core::power::SolverOptions;
use fdsb_core::scenario::{Baseline, ScenarioConfig};
use fdsb_core::scheduler::SchedulerOptions;
use fdsb_core::traffic::TrafficConfig;

/// A single experiment: one baseline, one scenario, several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub baseline: String,
    pub seeds: Vec<u64>,
    pub scenario: ScenarioConfig,
    pub traffic: TrafficConfig,
    pub solver: SolverOptions,
    pub scheduler: SchedulerOptions,
    pub engine: EngineConfig,
    pub beam_loading: LoadingVariant,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            baseline: "FD-SDMA".to_string(),
            seeds: (0..10).collect(),
            scenario: ScenarioConfig::default(),
            traffic: TrafficConfig::default(),
            solver: SolverOptions::default(),
            scheduler: SchedulerOptions::default(),
            engine: EngineConfig::default(),
            beam_loading: LoadingVariant::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        parse_baseline(&self.baseline)?;
        if self.seeds.is_empty() {
            bail!("seeds must be non-empty");
        }
        if self.engine.slot_duration_s <= 0.0 || self.engine.sim_duration_s <= 0.0 {
            bail!("engine.slot_duration_s and engine.sim_duration_s must be positive");
        }
        Ok(())
    }

    pub fn run_config(&self, seed: u64) -> Result<RunConfig> {
        Ok(RunConfig {
            scenario: self.scenario.clone(),
            baseline: parse_baseline(&self.baseline)?,
            traffic: self.traffic,
            solver: self.solver.clone(),
            scoring_solver: None,
            scheduler: self.scheduler,
            beam_loading: self.beam_loading,
            engine: self.engine,
            seed,
        })
    }
}

pub fn parse_baseline(name: &str) -> Result<Baseline> {
    Baseline::from_name(name).with_context(|| {
        let names: Vec<_> = Baseline::ALL.iter().map(|b| b.name()).collect();
        format!("unknown baseline {name:?}; expected one of {names:?}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    D1,
    D2,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::D1 => "d1",
            SweepParam::D2 => "d2",
        }
    }
}

/// One swept scenario parameter crossed with baselines and traffic modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values_m: Vec<f64>,
    pub baselines: Vec<String>,
    #[serde(default = "default_traffic_modes")]
    pub traffic: Vec<TrafficMode>,
}

fn default_traffic_modes() -> Vec<TrafficMode> {
    vec![TrafficMode::Symmetric]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficMode {
    Symmetric,
    Asymmetric,
}

impl TrafficMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrafficMode::Symmetric => "symmetric",
            TrafficMode::Asymmetric => "asymmetric",
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values_m.is_empty() {
            bail!("sweep.values_m must be non-empty");
        }
        if !self.values_m.windows(2).all(|w| w[0] < w[1]) {
            bail!("sweep.values_m must be strictly increasing");
        }
        if self.baselines.is_empty() {
            bail!("sweep.baselines must be non-empty");
        }
        for b in &self.baselines {
            parse_baseline(b)?;
        }
        if self.traffic.is_empty() {
            bail!("sweep.traffic must be non-empty");
        }
        Ok(())
    }
}

/// Sweep file: the spec plus the base experiment it perturbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sweep: SweepSpec,
    #[serde(default)]
    pub base: SimulationConfig,
}

impl SweepFile {
    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        self.base.validate()
    }
}

pub fn load_run_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let config: SimulationConfig =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_sweep_file(path: &Path) -> Result<SweepFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: SweepFile =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.validate()?;
    Ok(file)
}
