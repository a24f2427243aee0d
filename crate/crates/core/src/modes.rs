//! Transmission-mode alphabet, feasibility under a capability profile, link
//! expansion and per-link SINR / rate evaluation.
//!
//! Each small cell is in one of nine states per slot: OFF, one of four
//! full-duplex modes (FDD, FDU, FDA, FDB) or one of four half-duplex modes
//! (HDBU, HDAU, HDBD, HDAD). A network-wide transmission mode assigns one
//! state per cell; excluding all-OFF there are `9^N_s - 1` of them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{effective_gain, BeamformerSet};
use crate::scenario::{CapabilityProfile, ChannelState, NodeId, NodeKind, PowerLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellMode {
    Off,
    Fdd,
    Fdu,
    Fda,
    Fdb,
    Hdbu,
    Hdau,
    Hdbd,
    Hdad,
}

impl CellMode {
    pub const ALL: [CellMode; 9] = [
        CellMode::Off,
        CellMode::Fdd,
        CellMode::Fdu,
        CellMode::Fda,
        CellMode::Fdb,
        CellMode::Hdbu,
        CellMode::Hdau,
        CellMode::Hdbd,
        CellMode::Hdad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CellMode::Off => "OFF",
            CellMode::Fdd => "FDD",
            CellMode::Fdu => "FDU",
            CellMode::Fda => "FDA",
            CellMode::Fdb => "FDB",
            CellMode::Hdbu => "HDBU",
            CellMode::Hdau => "HDAU",
            CellMode::Hdbd => "HDBD",
            CellMode::Hdad => "HDAD",
        }
    }

    pub fn requires_fd_sbs(&self) -> bool {
        matches!(
            self,
            CellMode::Fdd | CellMode::Fdu | CellMode::Fda | CellMode::Fdb
        )
    }

    pub fn num_links(&self) -> usize {
        match self {
            CellMode::Off => 0,
            CellMode::Fdd | CellMode::Fdu | CellMode::Fda | CellMode::Fdb => 2,
            _ => 1,
        }
    }

    /// Backhaul streams this cell mode puts on the MBS: (downlink, uplink).
    fn mbs_streams(&self) -> (usize, usize) {
        match self {
            CellMode::Fdd | CellMode::Hdbd => (1, 0),
            CellMode::Fdu | CellMode::Hdbu => (0, 1),
            CellMode::Fdb => (1, 1),
            _ => (0, 0),
        }
    }
}

/// Per-cell state tuple; the network-wide transmission mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransmissionMode {
    pub per_cell: Vec<CellMode>,
}

impl TransmissionMode {
    pub fn new(per_cell: Vec<CellMode>) -> Self {
        TransmissionMode { per_cell }
    }

    pub fn is_all_off(&self) -> bool {
        self.per_cell.iter().all(|m| *m == CellMode::Off)
    }
}

impl std::fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for m in &self.per_cell {
            if !first {
                f.write_str("-")?;
            }
            f.write_str(m.name())?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkDirection {
    BackhaulUl,
    BackhaulDl,
    AccessUl,
    AccessDl,
}

impl LinkDirection {
    pub fn name(&self) -> &'static str {
        match self {
            LinkDirection::BackhaulUl => "backhaul-UL",
            LinkDirection::BackhaulDl => "backhaul-DL",
            LinkDirection::AccessUl => "access-UL",
            LinkDirection::AccessDl => "access-DL",
        }
    }

    /// Whether the link carries downlink traffic (toward a UE).
    pub fn is_downlink(&self) -> bool {
        matches!(self, LinkDirection::BackhaulDl | LinkDirection::AccessDl)
    }
}

/// A directed active link with the UE flow it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub cell: usize,
    pub direction: LinkDirection,
    pub src: NodeId,
    pub dst: NodeId,
    pub flow_ue: usize,
}

/// Chosen flow UE per role and cell; `None` where the mode has no such link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellFlows {
    pub access_dl: Option<usize>,
    pub access_ul: Option<usize>,
    pub backhaul_dl: Option<usize>,
    pub backhaul_ul: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowChoice {
    pub per_cell: Vec<CellFlows>,
}

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("cell {cell}: mode {mode} needs a {role} flow choice")]
    MissingFlow {
        cell: usize,
        mode: &'static str,
        role: &'static str,
    },
    #[error("cell {cell}: FDA needs two distinct UEs (got UE {ue} for both directions)")]
    FdaConflict { cell: usize, ue: usize },
    #[error("no beamformer for backhaul stream of cell {cell}")]
    MissingBeam { cell: usize },
    #[error("power allocation has {got} entries for {expected} links")]
    PowerCountMismatch { expected: usize, got: usize },
}

/// True iff the mode can run under `profile`: no half-duplex node both
/// transmits and receives, at most one same-direction MBS backhaul stream
/// without SDMA, and the total link count respects the profile cap.
pub fn is_feasible(mode: &TransmissionMode, profile: &CapabilityProfile) -> bool {
    if mode.is_all_off() {
        return false;
    }
    let mut mbs_dl = 0;
    let mut mbs_ul = 0;
    let mut links = 0;
    for m in &mode.per_cell {
        if m.requires_fd_sbs() && !profile.sbs_full_duplex {
            return false;
        }
        let (dl, ul) = m.mbs_streams();
        mbs_dl += dl;
        mbs_ul += ul;
        links += m.num_links();
    }
    if mbs_dl > 0 && mbs_ul > 0 && !profile.mbs_full_duplex {
        return false;
    }
    if (mbs_dl > 1 || mbs_ul > 1) && !profile.mbs_sdma {
        return false;
    }
    if let Some(max) = profile.max_simultaneous_links {
        if links > max {
            return false;
        }
    }
    true
}

/// All feasible modes in lexicographic order over [`CellMode::ALL`].
pub fn enumerate_modes(num_cells: usize, profile: &CapabilityProfile) -> Vec<TransmissionMode> {
    assert!(num_cells >= 1);
    let mut out = Vec::new();
    let total = 9usize.pow(num_cells as u32);
    for code in 0..total {
        let mut c = code;
        let mut per_cell = Vec::with_capacity(num_cells);
        for _ in 0..num_cells {
            per_cell.push(CellMode::ALL[c % 9]);
            c /= 9;
        }
        per_cell.reverse();
        let mode = TransmissionMode::new(per_cell);
        if !mode.is_all_off() && is_feasible(&mode, profile) {
            out.push(mode);
        }
    }
    out
}

/// Expands a mode into its active directed links using the chosen flow UEs.
/// Link order is deterministic: cell by cell, access before backhaul for
/// uplink-first modes as listed below.
pub fn expand_links(mode: &TransmissionMode, flows: &FlowChoice) -> Result<Vec<Link>, ModeError> {
    let mut links = Vec::new();
    for (cell, m) in mode.per_cell.iter().enumerate() {
        let f = flows.per_cell[cell];
        let sbs = NodeId::Sbs { cell };
        let need = |v: Option<usize>, role: &'static str| {
            v.ok_or(ModeError::MissingFlow {
                cell,
                mode: m.name(),
                role,
            })
        };
        let access_dl = |ue: usize| Link {
            cell,
            direction: LinkDirection::AccessDl,
            src: sbs,
            dst: NodeId::Ue { cell, ue },
            flow_ue: ue,
        };
        let access_ul = |ue: usize| Link {
            cell,
            direction: LinkDirection::AccessUl,
            src: NodeId::Ue { cell, ue },
            dst: sbs,
            flow_ue: ue,
        };
        let backhaul_dl = |ue: usize| Link {
            cell,
            direction: LinkDirection::BackhaulDl,
            src: NodeId::Mbs,
            dst: sbs,
            flow_ue: ue,
        };
        let backhaul_ul = |ue: usize| Link {
            cell,
            direction: LinkDirection::BackhaulUl,
            src: sbs,
            dst: NodeId::Mbs,
            flow_ue: ue,
        };
        match m {
            CellMode::Off => {}
            CellMode::Fdd => {
                links.push(backhaul_dl(need(f.backhaul_dl, "backhaul_dl")?));
                links.push(access_dl(need(f.access_dl, "access_dl")?));
            }
            CellMode::Fdu => {
                links.push(access_ul(need(f.access_ul, "access_ul")?));
                links.push(backhaul_ul(need(f.backhaul_ul, "backhaul_ul")?));
            }
            CellMode::Fda => {
                let dl = need(f.access_dl, "access_dl")?;
                let ul = need(f.access_ul, "access_ul")?;
                if dl == ul {
                    return Err(ModeError::FdaConflict { cell, ue: dl });
                }
                links.push(access_dl(dl));
                links.push(access_ul(ul));
            }
            CellMode::Fdb => {
                links.push(backhaul_dl(need(f.backhaul_dl, "backhaul_dl")?));
                links.push(backhaul_ul(need(f.backhaul_ul, "backhaul_ul")?));
            }
            CellMode::Hdbu => links.push(backhaul_ul(need(f.backhaul_ul, "backhaul_ul")?)),
            CellMode::Hdau => links.push(access_ul(need(f.access_ul, "access_ul")?)),
            CellMode::Hdbd => links.push(backhaul_dl(need(f.backhaul_dl, "backhaul_dl")?)),
            CellMode::Hdad => links.push(access_dl(need(f.access_dl, "access_dl")?)),
        }
    }
    Ok(links)
}

/// Signal, interference and noise terms for one link. Power coefficients are
/// indexed by transmitting link, so SINR is a ratio of linear forms in the
/// per-link powers.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    pub link_idx: usize,
    pub signal_gain: f64,
    /// Cross-interference entries (transmitting link index, linear gain).
    pub interference: Vec<(usize, f64)>,
    /// Residual self-interference entries (own transmit link index, gamma).
    pub self_terms: Vec<(usize, f64)>,
    pub noise_w: f64,
}

impl LinkBudget {
    pub fn sinr(&self, powers: &[f64]) -> f64 {
        self.signal_gain * powers[self.link_idx] / self.denominator(powers)
    }

    /// Interference plus noise at the receiver for the given powers.
    pub fn denominator(&self, powers: &[f64]) -> f64 {
        let mut d = self.noise_w;
        for &(j, g) in &self.interference {
            d += g * powers[j];
        }
        for &(j, g) in &self.self_terms {
            d += g * powers[j];
        }
        d
    }
}

/// Gain from the transmitter of link `j` into an arbitrary receiving node.
/// MBS-origin terms pass through the transmit beam of their stream; terms
/// received at the MBS pass through the receive beam of the victim stream.
fn cross_gain(
    links: &[Link],
    j: usize,
    receiver: NodeId,
    receive_beam_cell: Option<usize>,
    channel: &ChannelState,
    beams: &BeamformerSet,
) -> Result<f64, ModeError> {
    let src = links[j].src;
    if src == NodeId::Mbs {
        let w = beams
            .transmit
            .get(links[j].cell)
            .filter(|b| b.len() > 0)
            .ok_or(ModeError::MissingBeam {
                cell: links[j].cell,
            })?;
        Ok(effective_gain(channel.mbs_channel(receiver), w).expect("matching lengths"))
    } else if receiver == NodeId::Mbs {
        let cell = receive_beam_cell.expect("MBS receiver implies a backhaul-UL stream");
        let v = beams
            .receive
            .get(cell)
            .filter(|b| b.len() > 0)
            .ok_or(ModeError::MissingBeam { cell })?;
        Ok(effective_gain(channel.mbs_channel(src), v).expect("matching lengths"))
    } else {
        Ok(channel.gain(src, receiver))
    }
}

/// Builds the per-link budgets for a set of concurrently active links.
pub fn build_budgets(
    links: &[Link],
    channel: &ChannelState,
    beams: &BeamformerSet,
) -> Result<Vec<LinkBudget>, ModeError> {
    let mut budgets = Vec::with_capacity(links.len());
    for (l, link) in links.iter().enumerate() {
        let receiver = link.dst;
        let rx_cell = if receiver == NodeId::Mbs {
            Some(link.cell)
        } else {
            None
        };
        let signal_gain = cross_gain(links, l, receiver, rx_cell, channel, beams)?;
        let mut interference = Vec::new();
        let mut self_terms = Vec::new();
        for (j, other) in links.iter().enumerate() {
            if j == l {
                continue;
            }
            if other.src == receiver {
                // Receiver also transmits: residual self-interference.
                let gamma = match receiver.kind() {
                    NodeKind::Mbs => channel.gamma_mbs,
                    NodeKind::Sbs => channel.gamma_sbs,
                    NodeKind::Ue => unreachable!("UEs are half duplex"),
                };
                self_terms.push((j, gamma));
            } else {
                interference.push((j, cross_gain(links, j, receiver, rx_cell, channel, beams)?));
            }
        }
        budgets.push(LinkBudget {
            link_idx: l,
            signal_gain,
            interference,
            self_terms,
            noise_w: channel.noise_w(receiver.kind()),
        });
    }
    Ok(budgets)
}

/// Per-link SINR for the given power allocation (one power per link,
/// indexed like `links`).
pub fn link_sinr(
    links: &[Link],
    powers: &[f64],
    channel: &ChannelState,
    beams: &BeamformerSet,
) -> Result<Vec<f64>, ModeError> {
    if powers.len() != links.len() {
        return Err(ModeError::PowerCountMismatch {
            expected: links.len(),
            got: powers.len(),
        });
    }
    let budgets = build_budgets(links, channel, beams)?;
    Ok(budgets.iter().map(|b| b.sinr(powers)).collect())
}

/// Capped Shannon rate in bits/sec.
pub fn link_rate(sinr: f64, bandwidth_hz: f64, spectral_cap_bps_per_hz: f64) -> f64 {
    assert!(sinr >= 0.0);
    bandwidth_hz * (1.0 + sinr).log2().min(spectral_cap_bps_per_hz)
}

/// Per-link maximum transmit power. The MBS budget is split equally across
/// its simultaneous downlink streams.
pub fn power_bounds(links: &[Link], limits: &PowerLimits) -> Vec<f64> {
    let mbs_streams = links.iter().filter(|l| l.src == NodeId::Mbs).count().max(1) as f64;
    links
        .iter()
        .map(|l| {
            let p = limits.max_watts(l.src.kind());
            if l.src == NodeId::Mbs {
                p / mbs_streams
            } else {
                p
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{mmse_receive, mmse_transmit, LoadingVariant};
    use crate::scenario::{build_topology, draw_channels, Baseline, ScenarioConfig};

    fn flows_for(mode: &TransmissionMode) -> FlowChoice {
        // Any valid assignment: UE 0 everywhere, FDA pairs (0, 1).
        let per_cell = mode
            .per_cell
            .iter()
            .map(|m| match m {
                CellMode::Fda => CellFlows {
                    access_dl: Some(0),
                    access_ul: Some(1),
                    ..Default::default()
                },
                _ => CellFlows {
                    access_dl: Some(0),
                    access_ul: Some(0),
                    backhaul_dl: Some(0),
                    backhaul_ul: Some(0),
                },
            })
            .collect();
        FlowChoice { per_cell }
    }

    #[test]
    fn mode_counts_under_fd_sdma() {
        let p = Baseline::FdSdma.profile();
        assert_eq!(enumerate_modes(1, &p).len(), 8);
        assert_eq!(enumerate_modes(2, &p).len(), 80);
        assert_eq!(enumerate_modes(3, &p).len(), 728);
    }

    #[test]
    fn hd1_modes_expand_to_exactly_one_link() {
        let p = Baseline::Hd1.profile();
        let modes = enumerate_modes(2, &p);
        assert!(!modes.is_empty());
        for mode in &modes {
            let links = expand_links(&mode, &flows_for(&mode)).unwrap();
            assert_eq!(links.len(), 1, "{mode}");
        }
        // 4 HD modes x 2 cells.
        assert_eq!(modes.len(), 8);
    }

    #[test]
    fn hd2_links_share_no_node() {
        let p = Baseline::Hd2.profile();
        for mode in enumerate_modes(2, &p) {
            let links = expand_links(&mode, &flows_for(&mode)).unwrap();
            assert!(links.len() <= 2, "{mode}");
            for i in 0..links.len() {
                for j in i + 1..links.len() {
                    for a in [links[i].src, links[i].dst] {
                        for b in [links[j].src, links[j].dst] {
                            assert_ne!(a, b, "{mode}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn feasibility_examples() {
        let fdu_fdd = TransmissionMode::new(vec![CellMode::Fdu, CellMode::Fdd]);
        assert!(is_feasible(&fdu_fdd, &Baseline::FdSdma.profile()));

        let fdb_off = TransmissionMode::new(vec![CellMode::Fdb, CellMode::Off]);
        assert!(is_feasible(&fdb_off, &Baseline::Fd1.profile()));

        let hdbd_hdbd = TransmissionMode::new(vec![CellMode::Hdbd, CellMode::Hdbd]);
        assert!(is_feasible(&hdbd_hdbd, &Baseline::HdSdma.profile()));
        assert!(!is_feasible(&hdbd_hdbd, &Baseline::Hd2.profile()));

        // Opposite-direction backhaul without a FD MBS is infeasible.
        let hdbd_hdbu = TransmissionMode::new(vec![CellMode::Hdbd, CellMode::Hdbu]);
        assert!(!is_feasible(&hdbd_hdbu, &Baseline::Hd2.profile()));
        assert!(is_feasible(&hdbd_hdbu, &Baseline::Fd1.profile()));
    }

    /// Rule-table oracle: feasibility via explicit per-node transmit/receive
    /// sets over the expanded links.
    fn feasible_oracle(mode: &TransmissionMode, profile: &CapabilityProfile) -> bool {
        if mode.is_all_off() {
            return false;
        }
        let links = match expand_links(mode, &flows_for(mode)) {
            Ok(l) => l,
            Err(_) => return false,
        };
        use std::collections::BTreeMap;
        let mut tx: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut rx: BTreeMap<NodeId, usize> = BTreeMap::new();
        for l in &links {
            *tx.entry(l.src).or_default() += 1;
            *rx.entry(l.dst).or_default() += 1;
        }
        for (&node, &t) in &tx {
            if t > 0 && rx.get(&node).copied().unwrap_or(0) > 0 {
                let fd_ok = match node.kind() {
                    NodeKind::Mbs => profile.mbs_full_duplex,
                    NodeKind::Sbs => profile.sbs_full_duplex,
                    NodeKind::Ue => false,
                };
                if !fd_ok {
                    return false;
                }
            }
        }
        let mbs_tx = tx.get(&NodeId::Mbs).copied().unwrap_or(0);
        let mbs_rx = rx.get(&NodeId::Mbs).copied().unwrap_or(0);
        if (mbs_tx > 1 || mbs_rx > 1) && !profile.mbs_sdma {
            return false;
        }
        if let Some(max) = profile.max_simultaneous_links {
            if links.len() > max {
                return false;
            }
        }
        true
    }

    #[test]
    fn feasibility_matches_oracle_over_all_modes_and_profiles() {
        let all_modes = enumerate_modes(2, &Baseline::FdSdma.profile());
        assert_eq!(all_modes.len(), 80);
        for baseline in Baseline::ALL {
            let profile = baseline.profile();
            for mode in &all_modes {
                assert_eq!(
                    is_feasible(mode, &profile),
                    feasible_oracle(mode, &profile),
                    "{mode} under {baseline}"
                );
            }
        }
    }

    #[test]
    fn expansion_structure() {
        let mode = TransmissionMode::new(vec![CellMode::Fdu, CellMode::Fdd]);
        let flows = FlowChoice {
            per_cell: vec![
                CellFlows {
                    access_ul: Some(3),
                    backhaul_ul: Some(5),
                    ..Default::default()
                },
                CellFlows {
                    backhaul_dl: Some(2),
                    access_dl: Some(7),
                    ..Default::default()
                },
            ],
        };
        let links = expand_links(&mode, &flows).unwrap();
        assert_eq!(links.len(), 4);
        assert_eq!(links[0].src, NodeId::Ue { cell: 0, ue: 3 });
        assert_eq!(links[0].dst, NodeId::Sbs { cell: 0 });
        assert_eq!(links[1].src, NodeId::Sbs { cell: 0 });
        assert_eq!(links[1].dst, NodeId::Mbs);
        assert_eq!(links[1].flow_ue, 5);
        assert_eq!(links[2].src, NodeId::Mbs);
        assert_eq!(links[2].dst, NodeId::Sbs { cell: 1 });
        assert_eq!(links[3].dst, NodeId::Ue { cell: 1, ue: 7 });

        let off_hdad = TransmissionMode::new(vec![CellMode::Off, CellMode::Hdad]);
        let links = expand_links(&off_hdad, &flows_for(&off_hdad)).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].src, NodeId::Sbs { cell: 1 });

        let fda = TransmissionMode::new(vec![CellMode::Fda]);
        let bad = FlowChoice {
            per_cell: vec![CellFlows {
                access_dl: Some(0),
                access_ul: Some(0),
                ..Default::default()
            }],
        };
        assert!(matches!(
            expand_links(&fda, &bad),
            Err(ModeError::FdaConflict { .. })
        ));
    }

    #[test]
    fn every_feasible_mode_has_one_to_four_links() {
        for mode in enumerate_modes(2, &Baseline::FdSdma.profile()) {
            let links = expand_links(&mode, &flows_for(&mode)).unwrap();
            assert!((1..=4).contains(&links.len()), "{mode}");
        }
    }

    #[test]
    fn mode_string_format() {
        let mode = TransmissionMode::new(vec![CellMode::Fdu, CellMode::Fdd]);
        assert_eq!(mode.to_string(), "FDU-FDD");
        let mode = TransmissionMode::new(vec![CellMode::Off, CellMode::Hdad]);
        assert_eq!(mode.to_string(), "OFF-HDAD");
    }

    fn fdu_fdd_setup() -> (
        ScenarioConfig,
        crate::scenario::Topology,
        ChannelState,
        BeamformerSet,
        Vec<Link>,
    ) {
        let config = ScenarioConfig {
            ues_per_cell: 2,
            num_antennas: Some(4),
            ..ScenarioConfig::default()
        };
        let topo = build_topology(&config, Baseline::FdSdma.profile(), 4, 11).unwrap();
        let channel = draw_channels(&topo, &config, 11, 0);
        let p_s = config.max_power.max_watts(NodeKind::Sbs);
        let sbs_channels: Vec<_> = (0..2)
            .map(|c| channel.mbs_channel(NodeId::Sbs { cell: c }).clone())
            .collect();
        let beams = BeamformerSet {
            receive: mmse_receive(
                &sbs_channels,
                &[p_s, p_s],
                channel.noise_mbs_w,
                LoadingVariant::default(),
            )
            .unwrap(),
            transmit: mmse_transmit(
                &sbs_channels,
                &[p_s, p_s],
                channel.noise_mbs_w,
                2,
                LoadingVariant::default(),
            )
            .unwrap(),
        };
        let mode = TransmissionMode::new(vec![CellMode::Fdu, CellMode::Fdd]);
        let flows = FlowChoice {
            per_cell: vec![
                CellFlows {
                    access_ul: Some(0),
                    backhaul_ul: Some(0),
                    ..Default::default()
                },
                CellFlows {
                    backhaul_dl: Some(0),
                    access_dl: Some(0),
                    ..Default::default()
                },
            ],
        };
        let links = expand_links(&mode, &flows).unwrap();
        (config, topo, channel, beams, links)
    }

    #[test]
    fn fdu_fdd_sinrs_match_closed_form_term_for_term() {
        let (_config, _topo, ch, beams, links) = fdu_fdd_setup();
        // links: [UE1->SBS1, SBS1->MBS, MBS->SBS2, SBS2->UE2]
        let p = [0.1, 0.2, 10.0, 0.15];
        let got = link_sinr(&links, &p, &ch, &beams).unwrap();

        let u1 = NodeId::Ue { cell: 0, ue: 0 };
        let u2 = NodeId::Ue { cell: 1, ue: 0 };
        let s1 = NodeId::Sbs { cell: 0 };
        let s2 = NodeId::Sbs { cell: 1 };
        let v1 = &beams.receive[0];
        let w2 = &beams.transmit[1];
        let eg = |x: NodeId, b| effective_gain(ch.mbs_channel(x), b).unwrap();

        let sinr_s1 = ch.gain(s1, u1) * p[0]
            / (ch.gamma_sbs * p[1] + p[2] * eg(s1, w2) + p[3] * ch.gain(s1, s2) + ch.noise_sbs_w);
        let sinr_m = eg(s1, v1) * p[1]
            / (eg(u1, v1) * p[0] + ch.gamma_mbs * p[2] + eg(s2, v1) * p[3] + ch.noise_mbs_w);
        let sinr_s2 = eg(s2, w2) * p[2]
            / (ch.gain(s2, u1) * p[0]
                + ch.gain(s1, s2) * p[1]
                + ch.gamma_sbs * p[3]
                + ch.noise_sbs_w);
        let sinr_u2 = ch.gain(s2, u2) * p[3]
            / (ch.gain(u2, u1) * p[0] + ch.gain(s1, u2) * p[1] + eg(u2, w2) * p[2] + ch.noise_ue_w);

        for (g, e) in got.iter().zip([sinr_s1, sinr_m, sinr_s2, sinr_u2]) {
            assert!((g / e - 1.0).abs() < 1e-12, "got {g}, expected {e}");
        }
    }

    #[test]
    fn single_link_sinr_is_snr() {
        let (config, _topo, ch, beams, _) = fdu_fdd_setup();
        let mode = TransmissionMode::new(vec![CellMode::Off, CellMode::Hdad]);
        let links = expand_links(&mode, &flows_for(&mode)).unwrap();
        let p = [0.25];
        let got = link_sinr(&links, &p, &ch, &beams).unwrap();
        let s2 = NodeId::Sbs { cell: 1 };
        let u = NodeId::Ue { cell: 1, ue: 0 };
        let expected = ch.gain(s2, u) * 0.25 / ch.noise_ue_w;
        assert!((got[0] / expected - 1.0).abs() < 1e-12);
        let _ = config;
    }

    #[test]
    fn sinr_scale_invariant_in_interference_limit() {
        let (_config, _topo, mut ch, beams, links) = fdu_fdd_setup();
        ch.noise_mbs_w = 1e-300;
        ch.noise_sbs_w = 1e-300;
        ch.noise_ue_w = 1e-300;
        let p1 = [0.1, 0.2, 10.0, 0.15];
        let p2: Vec<f64> = p1.iter().map(|x| 2.0 * x).collect();
        let a = link_sinr(&links, &p1, &ch, &beams).unwrap();
        let b = link_sinr(&links, &p2, &ch, &beams).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x / y - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sinr_decreases_with_interferer_power() {
        let (_config, _topo, ch, beams, links) = fdu_fdd_setup();
        let p1 = [0.1, 0.2, 10.0, 0.15];
        let mut p2 = p1;
        p2[2] *= 3.0; // raise the MBS power
        let a = link_sinr(&links, &p1, &ch, &beams).unwrap();
        let b = link_sinr(&links, &p2, &ch, &beams).unwrap();
        // Every other link is a victim of the MBS transmission.
        assert!(b[0] < a[0]);
        assert!(b[1] < a[1]);
        assert!(b[3] < a[3]);
        assert!(b[2] > a[2]);
    }

    #[test]
    fn link_rate_cap_and_basics() {
        assert_eq!(link_rate(1e6, 10e6, 7.0), 70e6);
        assert_eq!(link_rate(0.0, 10e6, 7.0), 0.0);
        assert!((link_rate(1.0, 10e6, 7.0) - 10e6).abs() < 1e-6);
    }

    #[test]
    fn mbs_power_split_across_streams() {
        let limits = PowerLimits::default();
        let mode = TransmissionMode::new(vec![CellMode::Hdbd, CellMode::Hdbd]);
        let links = expand_links(&mode, &flows_for(&mode)).unwrap();
        let bounds = power_bounds(&links, &limits);
        let p_m = limits.max_watts(NodeKind::Mbs);
        assert!((bounds[0] - p_m / 2.0).abs() < 1e-12);
        assert!((bounds[1] - p_m / 2.0).abs() < 1e-12);
    }
}
