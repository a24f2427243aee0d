//! The discrete-time slot loop: fading, beamforming, scheduling, service and
//! the resulting run metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{
    mmse_receive, mmse_transmit, BeamformerSet, BeamformingError, LoadingVariant,
};
use crate::modes::enumerate_modes;
use crate::power::{InnerSolveOptions, SolverOptions};
use crate::scenario::{
    build_topology, draw_channels, Baseline, NodeId, NodeKind, ScenarioConfig, ScenarioError,
};
use crate::scheduler::{
    select_mode, QueueMatrix, ScheduleDecision, SchedulerContext, SchedulerOptions,
};
use crate::traffic::{Direction, FlowStats, TrafficConfig, TrafficState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub slot_duration_s: f64,
    pub sim_duration_s: f64,
    pub record_trace: bool,
    pub record_queue_series: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            slot_duration_s: 1e-3,
            sim_duration_s: 12.5,
            record_trace: false,
            record_queue_series: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub baseline: Baseline,
    pub traffic: TrafficConfig,
    pub solver: SolverOptions,
    /// Cheaper solver used to score candidate modes; the winner is re-solved
    /// with `solver`. `None` derives one from `solver`.
    pub scoring_solver: Option<SolverOptions>,
    pub scheduler: SchedulerOptions,
    pub beam_loading: LoadingVariant,
    pub engine: EngineConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            baseline: Baseline::FdSdma,
            traffic: TrafficConfig::default(),
            solver: SolverOptions::default(),
            scoring_solver: None,
            scheduler: SchedulerOptions::default(),
            beam_loading: LoadingVariant::default(),
            engine: EngineConfig::default(),
            seed: 0,
        }
    }
}

/// Mode scoring runs the power solver once per feasible mode per slot, so it
/// gets a few fixed-point rounds with a loose inner tolerance. The winning
/// mode is re-solved with the full options.
pub fn scoring_options(solver: &SolverOptions) -> SolverOptions {
    SolverOptions {
        max_iterations: 1,
        rel_tol: 1e-3,
        restarts: 1,
        shutdown_probes: false,
        inner: InnerSolveOptions {
            step_tol: 1e-6,
            max_iters: 40,
        },
        ..*solver
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error("engine config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub slot: u64,
    pub mode: String,
    pub links: Vec<String>,
    pub weights: Vec<i64>,
    pub powers_w: Vec<f64>,
    pub rates_mbps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub cell: usize,
    pub ue: usize,
    pub downlink: bool,
    pub injected_bits: u64,
    pub delivered_bits: u64,
    pub files_injected: u64,
    pub files_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub baseline: String,
    pub seed: u64,
    pub slots: u64,
    pub idle_slots: u64,
    pub duration_s: f64,
    pub per_cell_dl_mbps: Vec<f64>,
    pub per_cell_ul_mbps: Vec<f64>,
    pub total_dl_mbps: f64,
    pub total_ul_mbps: f64,
    pub injected_dl_bits: u64,
    pub injected_ul_bits: u64,
    pub delivered_dl_bits: u64,
    pub delivered_ul_bits: u64,
    /// Fraction of active (non-idle) slots per mode string, descending.
    pub mode_usage: Vec<(String, f64)>,
    pub solver_warning_slots: u64,
    pub flows: Vec<FlowReport>,
    pub conservation_ok: bool,
    /// Total queued bits at the end of each slot, when recorded.
    pub queue_series: Option<Vec<u64>>,
    pub trace: Option<Vec<SlotTrace>>,
}

pub fn run_simulation(config: &RunConfig) -> Result<RunMetrics, EngineError> {
    let eng = &config.engine;
    if eng.slot_duration_s <= 0.0 || eng.sim_duration_s <= 0.0 {
        return Err(EngineError::Config(
            "slot and simulation durations must be positive".into(),
        ));
    }
    let scenario = &config.scenario;
    let profile = config.baseline.profile();
    let antennas = scenario
        .num_antennas
        .unwrap_or_else(|| config.baseline.default_antennas());
    let topology = build_topology(scenario, profile, antennas, config.seed)?;
    let modes = enumerate_modes(scenario.num_cells, &profile);
    let scoring = config
        .scoring_solver
        .clone()
        .unwrap_or_else(|| scoring_options(&config.solver));

    let slots = (eng.sim_duration_s / eng.slot_duration_s).round() as u64;
    let dt = eng.slot_duration_s;
    let p_sbs = scenario.max_power.max_watts(NodeKind::Sbs);

    let mut queues = QueueMatrix::new(scenario.num_cells, scenario.ues_per_cell);
    let mut traffic = TrafficState::new(
        scenario.num_cells,
        scenario.ues_per_cell,
        config.traffic,
        config.seed,
    );

    let mut idle_slots = 0u64;
    let mut warning_slots = 0u64;
    let mut mode_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut queue_series = eng.record_queue_series.then(Vec::new);
    let mut trace = eng.record_trace.then(Vec::new);

    for slot in 0..slots {
        let now = slot as f64 * dt;
        traffic.generate_arrivals(now, &mut queues);
        if queues.total_backlog() == 0 {
            idle_slots += 1;
            if let Some(series) = &mut queue_series {
                series.push(0);
            }
            continue;
        }
        let channel = draw_channels(&topology, scenario, config.seed, slot);
        let sbs_channels: Vec<_> = (0..scenario.num_cells)
            .map(|c| channel.mbs_channel(NodeId::Sbs { cell: c }).clone())
            .collect();
        let loading = vec![p_sbs; scenario.num_cells];
        let beams = BeamformerSet {
            receive: mmse_receive(
                &sbs_channels,
                &loading,
                channel.noise_mbs_w,
                config.beam_loading,
            )?,
            transmit: mmse_transmit(
                &sbs_channels,
                &loading,
                channel.noise_mbs_w,
                scenario.num_cells,
                config.beam_loading,
            )?,
        };
        let ctx = SchedulerContext {
            channel: &channel,
            beams: &beams,
            limits: &scenario.max_power,
            bandwidth_hz: scenario.bandwidth_hz,
            spectral_cap_bps_per_hz: scenario.spectral_cap_bps_per_hz,
            power_control: profile.power_control,
            solver: &config.solver,
            scoring_solver: &scoring,
            options: &config.scheduler,
        };
        let decision = select_mode(&modes, &queues, &ctx);
        match &decision {
            ScheduleDecision::Idle => idle_slots += 1,
            ScheduleDecision::Active(d) => {
                *mode_counts.entry(d.mode.to_string()).or_insert(0) += 1;
                if d.solver_warning {
                    warning_slots += 1;
                }
                if let Some(t) = &mut trace {
                    t.push(SlotTrace {
                        slot,
                        mode: d.mode.to_string(),
                        links: d
                            .links
                            .iter()
                            .map(|l| format!("{} {}->{}", l.direction.name(), l.src, l.dst))
                            .collect(),
                        weights: d.weights.clone(),
                        powers_w: d.powers.clone(),
                        rates_mbps: d.rates_bps.iter().map(|r| r / 1e6).collect(),
                    });
                }
            }
        }
        traffic.apply_service(&mut queues, &decision, dt);
        traffic.record_deliveries(now + dt, &queues);
        if let Some(series) = &mut queue_series {
            series.push(queues.total_backlog());
        }
    }

    let duration_s = slots as f64 * dt;
    let mut per_cell_dl = vec![0u64; scenario.num_cells];
    let mut per_cell_ul = vec![0u64; scenario.num_cells];
    let mut flows = Vec::new();
    for cell in 0..scenario.num_cells {
        for ue in 0..scenario.ues_per_cell {
            for dir in Direction::BOTH {
                let s: FlowStats = traffic.stats(cell, ue, dir);
                match dir {
                    Direction::Downlink => per_cell_dl[cell] += s.delivered_bits,
                    Direction::Uplink => per_cell_ul[cell] += s.delivered_bits,
                }
                flows.push(FlowReport {
                    cell,
                    ue,
                    downlink: matches!(dir, Direction::Downlink),
                    injected_bits: s.injected_bits,
                    delivered_bits: s.delivered_bits,
                    files_injected: s.files_injected,
                    files_delivered: s.files_delivered,
                });
            }
        }
    }

    let active = slots - idle_slots;
    let mut mode_usage: Vec<(String, f64)> = mode_counts
        .into_iter()
        .map(|(m, c)| (m, c as f64 / active.max(1) as f64))
        .collect();
    mode_usage.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let to_mbps = |bits: u64| bits as f64 / duration_s / 1e6;
    Ok(RunMetrics {
        baseline: config.baseline.name().to_string(),
        seed: config.seed,
        slots,
        idle_slots,
        duration_s,
        total_dl_mbps: to_mbps(per_cell_dl.iter().sum()),
        total_ul_mbps: to_mbps(per_cell_ul.iter().sum()),
        per_cell_dl_mbps: per_cell_dl.iter().map(|b| to_mbps(*b)).collect(),
        per_cell_ul_mbps: per_cell_ul.iter().map(|b| to_mbps(*b)).collect(),
        injected_dl_bits: traffic.injected_bits(Direction::Downlink),
        injected_ul_bits: traffic.injected_bits(Direction::Uplink),
        delivered_dl_bits: traffic.delivered_bits(Direction::Downlink),
        delivered_ul_bits: traffic.delivered_bits(Direction::Uplink),
        mode_usage,
        solver_warning_slots: warning_slots,
        flows,
        conservation_ok: traffic.audit(&queues),
        queue_series,
        trace,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0);
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
