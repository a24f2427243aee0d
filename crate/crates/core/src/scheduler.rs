//! Back-pressure link weighting, flow selection and max-weight transmission
//! mode selection.
//!
//! Every link role is weighted by the largest queue backlog differential over
//! the flows it could carry. Modes are scored with equal-weight power
//! allocation rates (`sum_l W_l * R_l`) and the winner is re-optimized with
//! the true weights.

use serde::{Deserialize, Serialize};

use crate::beamforming::BeamformerSet;
use crate::modes::{
    build_budgets, expand_links, link_rate, CellFlows, CellMode, FlowChoice, Link, LinkDirection,
    TransmissionMode,
};
use crate::power::{
    max_power_allocation, optimize_powers, trim_to_sinr_cap, SolverOptions, WeightedRateProblem,
};
use crate::scenario::{ChannelState, PowerLimits};

/// Per-node, per-UE, per-direction backlogs in bits for the two-hop relay
/// system. Downlink traffic waits at the MBS, then at the serving SBS;
/// uplink traffic waits at the UE, then at the SBS. Final destinations are
/// sinks with zero backlog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueMatrix {
    num_cells: usize,
    ues_per_cell: usize,
    mbs_dl: Vec<u64>,
    sbs_dl: Vec<u64>,
    sbs_ul: Vec<u64>,
    ue_ul: Vec<u64>,
}

impl QueueMatrix {
    pub fn new(num_cells: usize, ues_per_cell: usize) -> Self {
        let n = num_cells * ues_per_cell;
        QueueMatrix {
            num_cells,
            ues_per_cell,
            mbs_dl: vec![0; n],
            sbs_dl: vec![0; n],
            sbs_ul: vec![0; n],
            ue_ul: vec![0; n],
        }
    }

    fn i(&self, cell: usize, ue: usize) -> usize {
        debug_assert!(cell < self.num_cells && ue < self.ues_per_cell);
        cell * self.ues_per_cell + ue
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn ues_per_cell(&self) -> usize {
        self.ues_per_cell
    }

    pub fn mbs_dl(&self, cell: usize, ue: usize) -> u64 {
        self.mbs_dl[self.i(cell, ue)]
    }

    pub fn sbs_dl(&self, cell: usize, ue: usize) -> u64 {
        self.sbs_dl[self.i(cell, ue)]
    }

    pub fn sbs_ul(&self, cell: usize, ue: usize) -> u64 {
        self.sbs_ul[self.i(cell, ue)]
    }

    pub fn ue_ul(&self, cell: usize, ue: usize) -> u64 {
        self.ue_ul[self.i(cell, ue)]
    }

    pub fn inject_dl(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.mbs_dl[i] += bits;
    }

    pub fn inject_ul(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.ue_ul[i] += bits;
    }

    pub(crate) fn drain_mbs_dl(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.mbs_dl[i] -= bits;
    }

    pub(crate) fn credit_sbs_dl(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.sbs_dl[i] += bits;
    }

    pub(crate) fn drain_sbs_dl(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.sbs_dl[i] -= bits;
    }

    pub(crate) fn drain_ue_ul(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.ue_ul[i] -= bits;
    }

    pub(crate) fn credit_sbs_ul(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.sbs_ul[i] += bits;
    }

    pub(crate) fn drain_sbs_ul(&mut self, cell: usize, ue: usize, bits: u64) {
        let i = self.i(cell, ue);
        self.sbs_ul[i] -= bits;
    }

    pub fn total_backlog(&self) -> u64 {
        let sum = |v: &[u64]| v.iter().sum::<u64>();
        sum(&self.mbs_dl) + sum(&self.sbs_dl) + sum(&self.sbs_ul) + sum(&self.ue_ul)
    }

    pub fn max_backlog(&self) -> u64 {
        self.mbs_dl
            .iter()
            .chain(&self.sbs_dl)
            .chain(&self.sbs_ul)
            .chain(&self.ue_ul)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Backlog still in flight for one (cell, ue, direction) flow.
    pub fn flow_backlog(&self, cell: usize, ue: usize, downlink: bool) -> u64 {
        let i = self.i(cell, ue);
        if downlink {
            self.mbs_dl[i] + self.sbs_dl[i]
        } else {
            self.ue_ul[i] + self.sbs_ul[i]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerOptions {
    /// Floor negative backlog differentials at zero (they can never help the
    /// max-weight argmax).
    pub floor_negative_weights: bool,
    /// Number of top-scoring modes to re-optimize with the true weights.
    pub reoptimize_top_k: usize,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        SchedulerOptions {
            floor_negative_weights: true,
            reoptimize_top_k: 1,
        }
    }
}

/// Backlog differential weight and flow choice for one link role of a cell.
/// Sink destinations (UE for downlink, MBS for uplink) contribute zero
/// backlog; ties break toward the lowest UE index.
pub fn link_weight(queues: &QueueMatrix, cell: usize, direction: LinkDirection) -> (i64, usize) {
    let mut best_diff = i64::MIN;
    let mut best_ue = 0;
    for ue in 0..queues.ues_per_cell() {
        let diff = match direction {
            LinkDirection::BackhaulDl => {
                queues.mbs_dl(cell, ue) as i64 - queues.sbs_dl(cell, ue) as i64
            }
            LinkDirection::AccessDl => queues.sbs_dl(cell, ue) as i64,
            LinkDirection::AccessUl => {
                queues.ue_ul(cell, ue) as i64 - queues.sbs_ul(cell, ue) as i64
            }
            LinkDirection::BackhaulUl => queues.sbs_ul(cell, ue) as i64,
        };
        if diff > best_diff {
            best_diff = diff;
            best_ue = ue;
        }
    }
    (best_diff, best_ue)
}

/// Second-best UE for a role, excluding `skip`. Returns None with a single
/// UE.
fn link_weight_excluding(
    queues: &QueueMatrix,
    cell: usize,
    direction: LinkDirection,
    skip: usize,
) -> Option<(i64, usize)> {
    let mut best: Option<(i64, usize)> = None;
    for ue in 0..queues.ues_per_cell() {
        if ue == skip {
            continue;
        }
        let (w, _) = {
            // reuse the single-ue differential
            let diff = match direction {
                LinkDirection::BackhaulDl => {
                    queues.mbs_dl(cell, ue) as i64 - queues.sbs_dl(cell, ue) as i64
                }
                LinkDirection::AccessDl => queues.sbs_dl(cell, ue) as i64,
                LinkDirection::AccessUl => {
                    queues.ue_ul(cell, ue) as i64 - queues.sbs_ul(cell, ue) as i64
                }
                LinkDirection::BackhaulUl => queues.sbs_ul(cell, ue) as i64,
            };
            (diff, ue)
        };
        if best.map_or(true, |(bw, _)| w > bw) {
            best = Some((w, ue));
        }
    }
    best
}

/// Chooses the flow UE for every link role of the mode. FDA needs two
/// distinct UEs; returns None when that is impossible (single-UE cell).
pub fn choose_flows(mode: &TransmissionMode, queues: &QueueMatrix) -> Option<FlowChoice> {
    let mut per_cell = Vec::with_capacity(mode.per_cell.len());
    for (cell, m) in mode.per_cell.iter().enumerate() {
        let mut flows = CellFlows::default();
        let pick = |dir: LinkDirection| link_weight(queues, cell, dir).1;
        match m {
            CellMode::Off => {}
            CellMode::Fdd => {
                flows.backhaul_dl = Some(pick(LinkDirection::BackhaulDl));
                flows.access_dl = Some(pick(LinkDirection::AccessDl));
            }
            CellMode::Fdu => {
                flows.access_ul = Some(pick(LinkDirection::AccessUl));
                flows.backhaul_ul = Some(pick(LinkDirection::BackhaulUl));
            }
            CellMode::Fda => {
                if queues.ues_per_cell() < 2 {
                    return None;
                }
                let (dl_w, dl_ue) = link_weight(queues, cell, LinkDirection::AccessDl);
                let (ul_w, ul_ue) = link_weight(queues, cell, LinkDirection::AccessUl);
                if dl_ue != ul_ue {
                    flows.access_dl = Some(dl_ue);
                    flows.access_ul = Some(ul_ue);
                } else {
                    // Resolve the collision with the better second-best swap.
                    let (dl2_w, dl2_ue) =
                        link_weight_excluding(queues, cell, LinkDirection::AccessDl, dl_ue)?;
                    let (ul2_w, ul2_ue) =
                        link_weight_excluding(queues, cell, LinkDirection::AccessUl, ul_ue)?;
                    if dl_w + ul2_w >= dl2_w + ul_w {
                        flows.access_dl = Some(dl_ue);
                        flows.access_ul = Some(ul2_ue);
                    } else {
                        flows.access_dl = Some(dl2_ue);
                        flows.access_ul = Some(ul_ue);
                    }
                }
            }
            CellMode::Fdb => {
                flows.backhaul_dl = Some(pick(LinkDirection::BackhaulDl));
                flows.backhaul_ul = Some(pick(LinkDirection::BackhaulUl));
            }
            CellMode::Hdbu => flows.backhaul_ul = Some(pick(LinkDirection::BackhaulUl)),
            CellMode::Hdau => flows.access_ul = Some(pick(LinkDirection::AccessUl)),
            CellMode::Hdbd => flows.backhaul_dl = Some(pick(LinkDirection::BackhaulDl)),
            CellMode::Hdad => flows.access_dl = Some(pick(LinkDirection::AccessDl)),
        }
        per_cell.push(flows);
    }
    Some(FlowChoice { per_cell })
}

/// Weight of an already-instantiated link (its flow UE is fixed).
pub fn instantiated_weight(queues: &QueueMatrix, link: &Link, floor: bool) -> i64 {
    let (cell, ue) = (link.cell, link.flow_ue);
    let diff = match link.direction {
        LinkDirection::BackhaulDl => {
            queues.mbs_dl(cell, ue) as i64 - queues.sbs_dl(cell, ue) as i64
        }
        LinkDirection::AccessDl => queues.sbs_dl(cell, ue) as i64,
        LinkDirection::AccessUl => queues.ue_ul(cell, ue) as i64 - queues.sbs_ul(cell, ue) as i64,
        LinkDirection::BackhaulUl => queues.sbs_ul(cell, ue) as i64,
    };
    if floor {
        diff.max(0)
    } else {
        diff
    }
}

/// Everything mode evaluation needs besides the queues.
pub struct SchedulerContext<'a> {
    pub channel: &'a ChannelState,
    pub beams: &'a BeamformerSet,
    pub limits: &'a PowerLimits,
    pub bandwidth_hz: f64,
    pub spectral_cap_bps_per_hz: f64,
    /// When false (max-power baseline), every transmitter runs at p_max.
    pub power_control: bool,
    pub solver: &'a SolverOptions,
    pub scoring_solver: &'a SolverOptions,
    pub options: &'a SchedulerOptions,
}

#[derive(Debug, Clone)]
pub struct ActiveDecision {
    pub mode: TransmissionMode,
    pub links: Vec<Link>,
    pub weights: Vec<i64>,
    pub powers: Vec<f64>,
    pub rates_bps: Vec<f64>,
    pub solver_warning: bool,
}

#[derive(Debug, Clone)]
pub enum ScheduleDecision {
    Idle,
    Active(ActiveDecision),
}

impl ScheduleDecision {
    pub fn is_idle(&self) -> bool {
        matches!(self, ScheduleDecision::Idle)
    }
}

/// Equal-weight rate estimate for one mode: the rates `R*_l` used in the
/// max-weight score.
pub fn estimate_mode_rates(
    links: &[Link],
    ctx: &SchedulerContext,
    solver: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, bool), crate::modes::ModeError> {
    let budgets = build_budgets(links, ctx.channel, ctx.beams)?;
    let p_max = crate::modes::power_bounds(links, ctx.limits);
    let problem = WeightedRateProblem {
        weights: vec![1.0; links.len()],
        budgets,
        p_max,
        sinr_cap: Some(2f64.powf(ctx.spectral_cap_bps_per_hz) - 1.0),
    };
    let (mut powers, warning) = if ctx.power_control {
        let sol = optimize_powers(&problem, solver);
        (sol.powers, !sol.converged)
    } else {
        (max_power_allocation(&problem), false)
    };
    if ctx.power_control {
        let sinr_cap = 2f64.powf(ctx.spectral_cap_bps_per_hz) - 1.0;
        trim_to_sinr_cap(&problem.budgets, &mut powers, sinr_cap);
    }
    let rates = problem
        .budgets
        .iter()
        .map(|b| {
            link_rate(
                b.sinr(&powers),
                ctx.bandwidth_hz,
                ctx.spectral_cap_bps_per_hz,
            )
        })
        .collect();
    Ok((powers, rates, warning))
}

/// Max-weight mode selection: scores every feasible mode with
/// `sum_l W_l * R*_l`, re-optimizes the top `reoptimize_top_k` candidates
/// with the true weights and returns the best. Idle when every score is
/// zero (empty queues).
pub fn select_mode(
    feasible_modes: &[TransmissionMode],
    queues: &QueueMatrix,
    ctx: &SchedulerContext,
) -> ScheduleDecision {
    assert!(!feasible_modes.is_empty());
    let floor = ctx.options.floor_negative_weights;

    struct Scored {
        mode_idx: usize,
        links: Vec<Link>,
        weights: Vec<i64>,
        score: f64,
    }
    let mut scored: Vec<Scored> = Vec::new();

    for (mode_idx, mode) in feasible_modes.iter().enumerate() {
        let flows = match choose_flows(mode, queues) {
            Some(f) => f,
            None => continue,
        };
        let links = match expand_links(mode, &flows) {
            Ok(l) => l,
            Err(_) => continue,
        };
        let weights: Vec<i64> = links
            .iter()
            .map(|l| instantiated_weight(queues, l, floor))
            .collect();
        if weights.iter().all(|w| *w <= 0) {
            continue;
        }
        let (_, rates, _) = match estimate_mode_rates(&links, ctx, ctx.scoring_solver) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let score: f64 = weights.iter().zip(&rates).map(|(w, r)| *w as f64 * r).sum();
        if score > 0.0 {
            scored.push(Scored {
                mode_idx,
                links,
                weights,
                score,
            });
        }
    }

    if scored.is_empty() {
        return ScheduleDecision::Idle;
    }

    // Stable order: descending score, then enumeration order for ties.
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.mode_idx.cmp(&b.mode_idx))
    });
    let k = ctx.options.reoptimize_top_k.max(1).min(scored.len());

    let mut best: Option<(f64, usize, ActiveDecision)> = None;
    for cand in &scored[..k] {
        let budgets = match build_budgets(&cand.links, ctx.channel, ctx.beams) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let p_max = crate::modes::power_bounds(&cand.links, ctx.limits);
        let problem = WeightedRateProblem {
            weights: cand.weights.iter().map(|w| (*w).max(0) as f64).collect(),
            budgets,
            p_max,
            sinr_cap: Some(2f64.powf(ctx.spectral_cap_bps_per_hz) - 1.0),
        };
        let (mut powers, warning) = if ctx.power_control {
            let sol = optimize_powers(&problem, ctx.solver);
            (sol.powers, !sol.converged)
        } else {
            (max_power_allocation(&problem), false)
        };
        if ctx.power_control {
            let sinr_cap = 2f64.powf(ctx.spectral_cap_bps_per_hz) - 1.0;
            trim_to_sinr_cap(&problem.budgets, &mut powers, sinr_cap);
        }
        let rates: Vec<f64> = problem
            .budgets
            .iter()
            .map(|b| {
                link_rate(
                    b.sinr(&powers),
                    ctx.bandwidth_hz,
                    ctx.spectral_cap_bps_per_hz,
                )
            })
            .collect();
        let true_score: f64 = cand
            .weights
            .iter()
            .zip(&rates)
            .map(|(w, r)| (*w).max(0) as f64 * r)
            .sum();
        let decision = ActiveDecision {
            mode: feasible_modes[cand.mode_idx].clone(),
            links: cand.links.clone(),
            weights: cand.weights.clone(),
            powers,
            rates_bps: rates,
            solver_warning: warning,
        };
        let better = match &best {
            None => true,
            Some((s, idx, _)) => true_score > *s || (true_score == *s && cand.mode_idx < *idx),
        };
        if better {
            best = Some((true_score, cand.mode_idx, decision));
        }
    }

    match best {
        Some((_, _, d)) => ScheduleDecision::Active(d),
        None => ScheduleDecision::Idle,
    }
}
