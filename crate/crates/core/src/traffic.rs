//! FTP-style closed-loop traffic: each UE request injects one downlink and
//! one uplink file, and the next request follows an exponentially
//! distributed reading time after both are fully delivered. Queue
//! bookkeeping is exact (integer bits).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::modes::LinkDirection;
use crate::scenario::rng_purpose;
use crate::scheduler::{QueueMatrix, ScheduleDecision};
use crate::units::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Downlink, Direction::Uplink];

    pub fn name(&self) -> &'static str {
        match self {
            Direction::Downlink => "DL",
            Direction::Uplink => "UL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Symmetric load uses the downlink file size in both directions.
    pub symmetric: bool,
    pub dl_file_bits: u64,
    pub ul_file_bits: u64,
    pub mean_reading_time_s: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            symmetric: false,
            // 1.25 MB down, 250 KB up.
            dl_file_bits: 10_000_000,
            ul_file_bits: 2_000_000,
            mean_reading_time_s: 1.0,
        }
    }
}

impl TrafficConfig {
    pub fn file_bits(&self, dir: Direction) -> u64 {
        match dir {
            Direction::Downlink => self.dl_file_bits,
            Direction::Uplink => {
                if self.symmetric {
                    self.dl_file_bits
                } else {
                    self.ul_file_bits
                }
            }
        }
    }
}

/// Exact bit accounting for one (cell, ue, direction) flow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub injected_bits: u64,
    pub delivered_bits: u64,
    pub files_injected: u64,
    pub files_delivered: u64,
}

#[derive(Debug, Clone, Default)]
struct FlowState {
    in_flight: bool,
    stats: FlowStats,
}

/// One request cycle per UE covering both directions.
#[derive(Debug, Clone)]
struct SessionState {
    /// Next request time once no file of the session is in flight.
    ready_at: f64,
    rng: ChaCha8Rng,
}

/// Bits served per link in one slot, plus what reached a final destination.
#[derive(Debug, Clone, Default)]
pub struct ServiceOutcome {
    pub served_bits: Vec<u64>,
    pub delivered_dl_bits: u64,
    pub delivered_ul_bits: u64,
}

#[derive(Debug, Clone)]
pub struct TrafficState {
    num_cells: usize,
    ues_per_cell: usize,
    config: TrafficConfig,
    /// Indexed (cell * ues_per_cell + ue) * 2 + dir.
    flows: Vec<FlowState>,
    /// Indexed cell * ues_per_cell + ue.
    sessions: Vec<SessionState>,
}

impl TrafficState {
    pub fn new(num_cells: usize, ues_per_cell: usize, config: TrafficConfig, seed: u64) -> Self {
        let n = num_cells * ues_per_cell;
        let sessions = (0..n)
            .map(|i| SessionState {
                ready_at: 0.0,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, rng_purpose::TRAFFIC, i as u64)),
            })
            .collect();
        TrafficState {
            num_cells,
            ues_per_cell,
            config,
            flows: vec![FlowState::default(); n * 2],
            sessions,
        }
    }

    fn idx(&self, cell: usize, ue: usize, dir: Direction) -> usize {
        debug_assert!(cell < self.num_cells && ue < self.ues_per_cell);
        (cell * self.ues_per_cell + ue) * 2 + matches!(dir, Direction::Uplink) as usize
    }

    pub fn stats(&self, cell: usize, ue: usize, dir: Direction) -> FlowStats {
        self.flows[self.idx(cell, ue, dir)].stats
    }

    pub fn injected_bits(&self, dir: Direction) -> u64 {
        self.fold(dir, |s| s.injected_bits)
    }

    pub fn delivered_bits(&self, dir: Direction) -> u64 {
        self.fold(dir, |s| s.delivered_bits)
    }

    fn fold(&self, dir: Direction, f: impl Fn(&FlowStats) -> u64) -> u64 {
        let mut total = 0;
        for cell in 0..self.num_cells {
            for ue in 0..self.ues_per_cell {
                total += f(&self.flows[self.idx(cell, ue, dir)].stats);
            }
        }
        total
    }

    /// Injects one file per direction for every UE whose reading time has
    /// elapsed and whose previous request is fully delivered.
    pub fn generate_arrivals(&mut self, now: f64, queues: &mut QueueMatrix) {
        for cell in 0..self.num_cells {
            for ue in 0..self.ues_per_cell {
                let session = cell * self.ues_per_cell + ue;
                if now < self.sessions[session].ready_at
                    || Direction::BOTH
                        .iter()
                        .any(|&d| self.flows[self.idx(cell, ue, d)].in_flight)
                {
                    continue;
                }
                for dir in Direction::BOTH {
                    let bits = self.config.file_bits(dir);
                    if bits == 0 {
                        continue;
                    }
                    let i = self.idx(cell, ue, dir);
                    let flow = &mut self.flows[i];
                    flow.in_flight = true;
                    flow.stats.injected_bits += bits;
                    flow.stats.files_injected += 1;
                    match dir {
                        Direction::Downlink => queues.inject_dl(cell, ue, bits),
                        Direction::Uplink => queues.inject_ul(cell, ue, bits),
                    }
                }
            }
        }
    }

    /// Marks files whose backlog reached zero as delivered; once both files
    /// of a request are through, draws the next reading time.
    pub fn record_deliveries(&mut self, now: f64, queues: &QueueMatrix) {
        for cell in 0..self.num_cells {
            for ue in 0..self.ues_per_cell {
                let mut completed = false;
                let mut pending = false;
                for dir in Direction::BOTH {
                    let i = self.idx(cell, ue, dir);
                    if !self.flows[i].in_flight {
                        continue;
                    }
                    if queues.flow_backlog(cell, ue, matches!(dir, Direction::Downlink)) > 0 {
                        pending = true;
                        continue;
                    }
                    let flow = &mut self.flows[i];
                    flow.in_flight = false;
                    flow.stats.files_delivered += 1;
                    completed = true;
                }
                if completed && !pending {
                    let session = &mut self.sessions[cell * self.ues_per_cell + ue];
                    // Inverse-CDF exponential draw keeps the stream stable.
                    let u: f64 = session.rng.gen_range(f64::MIN_POSITIVE..1.0);
                    session.ready_at = now + self.config.mean_reading_time_s * -u.ln();
                }
            }
        }
    }

    /// Applies one slot of service. Drains are capped by the backlog at the
    /// start of the slot, so bits relayed to an SBS this slot cannot be
    /// forwarded until the next one.
    pub fn apply_service(
        &mut self,
        queues: &mut QueueMatrix,
        decision: &ScheduleDecision,
        slot_s: f64,
    ) -> ServiceOutcome {
        let d = match decision {
            ScheduleDecision::Idle => return ServiceOutcome::default(),
            ScheduleDecision::Active(d) => d,
        };
        let snapshot = queues.clone();
        let mut out = ServiceOutcome {
            served_bits: Vec::with_capacity(d.links.len()),
            ..Default::default()
        };
        for (link, rate) in d.links.iter().zip(&d.rates_bps) {
            let capacity = (rate * slot_s).floor() as u64;
            let (cell, ue) = (link.cell, link.flow_ue);
            let served = match link.direction {
                LinkDirection::BackhaulDl => {
                    let s = capacity.min(snapshot.mbs_dl(cell, ue));
                    queues.drain_mbs_dl(cell, ue, s);
                    queues.credit_sbs_dl(cell, ue, s);
                    s
                }
                LinkDirection::AccessDl => {
                    let s = capacity.min(snapshot.sbs_dl(cell, ue));
                    queues.drain_sbs_dl(cell, ue, s);
                    let i = self.idx(cell, ue, Direction::Downlink);
                    self.flows[i].stats.delivered_bits += s;
                    out.delivered_dl_bits += s;
                    s
                }
                LinkDirection::AccessUl => {
                    let s = capacity.min(snapshot.ue_ul(cell, ue));
                    queues.drain_ue_ul(cell, ue, s);
                    queues.credit_sbs_ul(cell, ue, s);
                    s
                }
                LinkDirection::BackhaulUl => {
                    let s = capacity.min(snapshot.sbs_ul(cell, ue));
                    queues.drain_sbs_ul(cell, ue, s);
                    let i = self.idx(cell, ue, Direction::Uplink);
                    self.flows[i].stats.delivered_bits += s;
                    out.delivered_ul_bits += s;
                    s
                }
            };
            out.served_bits.push(served);
        }
        out
    }

    /// Injected bits equal delivered bits plus what is still queued, for
    /// every flow.
    pub fn audit(&self, queues: &QueueMatrix) -> bool {
        for dir in Direction::BOTH {
            for cell in 0..self.num_cells {
                for ue in 0..self.ues_per_cell {
                    let backlog =
                        queues.flow_backlog(cell, ue, matches!(dir, Direction::Downlink));
                    let s = self.stats(cell, ue, dir);
                    if s.injected_bits != s.delivered_bits + backlog {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Link;
    use crate::modes::{CellMode, TransmissionMode};
    use crate::scenario::NodeId;
    use crate::scheduler::ActiveDecision;

    #[test]
    fn default_file_sizes() {
        let c = TrafficConfig::default();
        assert_eq!(c.file_bits(Direction::Downlink), 10_000_000);
        assert_eq!(c.file_bits(Direction::Uplink), 2_000_000);
        let sym = TrafficConfig {
            symmetric: true,
            ..c
        };
        assert_eq!(sym.file_bits(Direction::Uplink), 10_000_000);
    }

    #[test]
    fn first_files_arrive_at_time_zero() {
        let mut t = TrafficState::new(1, 2, TrafficConfig::default(), 7);
        let mut q = QueueMatrix::new(1, 2);
        t.generate_arrivals(0.0, &mut q);
        assert_eq!(q.mbs_dl(0, 0), 10_000_000);
        assert_eq!(q.ue_ul(0, 1), 2_000_000);
        // No second file while one is in flight.
        t.generate_arrivals(5.0, &mut q);
        assert_eq!(q.mbs_dl(0, 0), 10_000_000);
        assert_eq!(t.injected_bits(Direction::Downlink), 20_000_000);
    }

    #[test]
    fn reading_times_have_the_configured_mean() {
        let config = TrafficConfig {
            mean_reading_time_s: 1.0,
            ..TrafficConfig::default()
        };
        let mut t = TrafficState::new(1, 1, config, 42);
        let mut q = QueueMatrix::new(1, 1);
        let mut gaps = Vec::new();
        let mut prev = 0.0;
        for _ in 0..10_000 {
            t.generate_arrivals(prev, &mut q);
            // Deliver instantly: drain the whole flow.
            let dl = q.mbs_dl(0, 0) + q.sbs_dl(0, 0);
            q.drain_mbs_dl(0, 0, q.mbs_dl(0, 0));
            assert!(dl > 0);
            let ul = q.ue_ul(0, 0);
            q.drain_ue_ul(0, 0, ul);
            t.record_deliveries(prev, &q);
            let next = t.sessions[0].ready_at;
            gaps.push(next - prev);
            prev = next;
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean reading time {mean}");
    }

    fn one_link_decision(link: Link, rate_bps: f64) -> ScheduleDecision {
        ScheduleDecision::Active(ActiveDecision {
            mode: TransmissionMode::new(vec![CellMode::Hdbd]),
            links: vec![link],
            weights: vec![1],
            powers: vec![1.0],
            rates_bps: vec![rate_bps],
            solver_warning: false,
        })
    }

    #[test]
    fn service_is_capped_by_backlog() {
        let mut t = TrafficState::new(1, 1, TrafficConfig::default(), 1);
        let mut q = QueueMatrix::new(1, 1);
        q.inject_dl(0, 0, 500);
        t.flows[0].stats.injected_bits = 500;
        t.flows[0].in_flight = true;
        let link = Link {
            cell: 0,
            direction: LinkDirection::BackhaulDl,
            src: NodeId::Mbs,
            dst: NodeId::Sbs { cell: 0 },
            flow_ue: 0,
        };
        let out = t.apply_service(&mut q, &one_link_decision(link, 1e9), 1e-3);
        assert_eq!(out.served_bits, vec![500]);
        assert_eq!(q.mbs_dl(0, 0), 0);
        assert_eq!(q.sbs_dl(0, 0), 500);
        assert!(t.audit(&q));
    }

    #[test]
    fn relayed_bits_wait_one_slot() {
        let mut t = TrafficState::new(1, 1, TrafficConfig::default(), 1);
        let mut q = QueueMatrix::new(1, 1);
        q.inject_dl(0, 0, 1000);
        t.flows[0].stats.injected_bits = 1000;
        t.flows[0].in_flight = true;
        let backhaul = Link {
            cell: 0,
            direction: LinkDirection::BackhaulDl,
            src: NodeId::Mbs,
            dst: NodeId::Sbs { cell: 0 },
            flow_ue: 0,
        };
        let access = Link {
            cell: 0,
            direction: LinkDirection::AccessDl,
            src: NodeId::Sbs { cell: 0 },
            dst: NodeId::Ue { cell: 0, ue: 0 },
            flow_ue: 0,
        };
        let decision = ScheduleDecision::Active(ActiveDecision {
            mode: TransmissionMode::new(vec![CellMode::Fdd]),
            links: vec![backhaul, access],
            weights: vec![1, 1],
            powers: vec![1.0, 1.0],
            rates_bps: vec![1e9, 1e9],
            solver_warning: false,
        });
        let out = t.apply_service(&mut q, &decision, 1e-3);
        // The access link sees the empty pre-slot SBS queue.
        assert_eq!(out.served_bits, vec![1000, 0]);
        assert_eq!(q.sbs_dl(0, 0), 1000);
        let out2 = t.apply_service(&mut q, &decision, 1e-3);
        assert_eq!(out2.served_bits, vec![0, 1000]);
        assert_eq!(out2.delivered_dl_bits, 1000);
        assert!(t.audit(&q));
    }

    #[test]
    fn delivery_completion_triggers_next_cycle() {
        let config = TrafficConfig {
            ul_file_bits: 0,
            ..TrafficConfig::default()
        };
        let mut t = TrafficState::new(1, 1, config, 9);
        let mut q = QueueMatrix::new(1, 1);
        t.generate_arrivals(0.0, &mut q);
        let backhaul = Link {
            cell: 0,
            direction: LinkDirection::BackhaulDl,
            src: NodeId::Mbs,
            dst: NodeId::Sbs { cell: 0 },
            flow_ue: 0,
        };
        let access = Link {
            cell: 0,
            direction: LinkDirection::AccessDl,
            src: NodeId::Sbs { cell: 0 },
            dst: NodeId::Ue { cell: 0, ue: 0 },
            flow_ue: 0,
        };
        let decision = ScheduleDecision::Active(ActiveDecision {
            mode: TransmissionMode::new(vec![CellMode::Fdd]),
            links: vec![backhaul, access],
            weights: vec![1, 1],
            powers: vec![1.0, 1.0],
            rates_bps: vec![2e10, 2e10],
            solver_warning: false,
        });
        t.apply_service(&mut q, &decision, 1e-3);
        t.record_deliveries(0.001, &q);
        assert_eq!(t.stats(0, 0, Direction::Downlink).files_delivered, 0);
        t.apply_service(&mut q, &decision, 1e-3);
        t.record_deliveries(0.002, &q);
        let s = t.stats(0, 0, Direction::Downlink);
        assert_eq!(s.files_delivered, 1);
        assert_eq!(s.delivered_bits, 10_000_000);
        assert!(t.sessions[0].ready_at > 0.002);
        assert!(t.audit(&q));
    }

    #[test]
    fn requests_inject_both_directions_together() {
        let mut t = TrafficState::new(1, 1, TrafficConfig::default(), 3);
        let mut q = QueueMatrix::new(1, 1);
        t.generate_arrivals(0.0, &mut q);
        // Deliver only the uplink file; no new request until the downlink
        // file is also through.
        let ul = q.ue_ul(0, 0);
        q.drain_ue_ul(0, 0, ul);
        t.record_deliveries(0.5, &q);
        assert_eq!(t.stats(0, 0, Direction::Uplink).files_delivered, 1);
        t.generate_arrivals(10.0, &mut q);
        assert_eq!(t.stats(0, 0, Direction::Uplink).files_injected, 1);
        // Finish the downlink file; the next request injects both files.
        let dl = q.mbs_dl(0, 0);
        q.drain_mbs_dl(0, 0, dl);
        t.record_deliveries(11.0, &q);
        t.generate_arrivals(1e9, &mut q);
        assert_eq!(t.injected_bits(Direction::Downlink), 20_000_000);
        assert_eq!(t.injected_bits(Direction::Uplink), 4_000_000);
    }

    #[test]
    fn arrival_streams_are_deterministic() {
        let run = |seed| {
            let mut t = TrafficState::new(2, 3, TrafficConfig::default(), seed);
            let mut q = QueueMatrix::new(2, 3);
            let mut times = Vec::new();
            for step in 0..50 {
                let now = step as f64 * 0.1;
                t.generate_arrivals(now, &mut q);
                // Flush everything to force fresh reading draws.
                for cell in 0..2 {
                    for ue in 0..3 {
                        let dl = q.mbs_dl(cell, ue);
                        q.drain_mbs_dl(cell, ue, dl);
                        let ul = q.ue_ul(cell, ue);
                        q.drain_ue_ul(cell, ue, ul);
                    }
                }
                t.record_deliveries(now, &q);
                times.push(t.sessions.iter().map(|s| s.ready_at).collect::<Vec<_>>());
            }
            times
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }
}
