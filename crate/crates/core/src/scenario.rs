//! Topology generation, large-scale path loss, noise powers and per-slot
//! Rayleigh fading draws.
//!
//! The macro base station (MBS) sits at the origin. Small-cell base stations
//! (SBS) are placed at distance `d1` from the MBS; with two cells they sit
//! symmetrically about the x axis with mutual distance `d2`. UEs are uniform
//! over an annulus around their serving SBS.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{db_to_linear, dbm_to_watts, derive_seed};

/// RNG purpose tags for [`derive_seed`].
pub(crate) mod rng_purpose {
    pub const TOPOLOGY: u64 = 0;
    pub const FADING: u64 = 1;
    pub const TRAFFIC: u64 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Mbs,
    Sbs,
    Ue,
}

/// Identifier for a network node. `cell` indexes the small cell, `ue` the UE
/// within its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Mbs,
    Sbs { cell: usize },
    Ue { cell: usize, ue: usize },
}

impl NodeId {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeId::Mbs => NodeKind::Mbs,
            NodeId::Sbs { .. } => NodeKind::Sbs,
            NodeId::Ue { .. } => NodeKind::Ue,
        }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Mbs => write!(f, "MBS"),
            NodeId::Sbs { cell } => write!(f, "SBS{}", cell + 1),
            NodeId::Ue { cell, ue } => write!(f, "UE{}_{}", cell + 1, ue + 1),
        }
    }
}

/// Which nodes may operate full duplex and whether the MBS array supports
/// SDMA; encodes the comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityProfile {
    pub mbs_full_duplex: bool,
    pub sbs_full_duplex: bool,
    pub mbs_sdma: bool,
    pub power_control: bool,
    pub max_simultaneous_links: Option<usize>,
}

/// Named capability baselines used in the throughput comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Baseline {
    Hd1,
    Hd2,
    HdSdma,
    Fd1,
    Fd2,
    FdSdma,
    FdSdmaMp,
}

impl Baseline {
    pub const ALL: [Baseline; 7] = [
        Baseline::Hd1,
        Baseline::Hd2,
        Baseline::HdSdma,
        Baseline::Fd1,
        Baseline::Fd2,
        Baseline::FdSdma,
        Baseline::FdSdmaMp,
    ];

    pub fn profile(&self) -> CapabilityProfile {
        match self {
            Baseline::Hd1 => CapabilityProfile {
                mbs_full_duplex: false,
                sbs_full_duplex: false,
                mbs_sdma: false,
                power_control: true,
                max_simultaneous_links: Some(1),
            },
            Baseline::Hd2 => CapabilityProfile {
                mbs_full_duplex: false,
                sbs_full_duplex: false,
                mbs_sdma: false,
                power_control: true,
                max_simultaneous_links: None,
            },
            Baseline::HdSdma => CapabilityProfile {
                mbs_full_duplex: false,
                sbs_full_duplex: false,
                mbs_sdma: true,
                power_control: true,
                max_simultaneous_links: None,
            },
            Baseline::Fd1 => CapabilityProfile {
                mbs_full_duplex: true,
                sbs_full_duplex: true,
                mbs_sdma: false,
                power_control: true,
                max_simultaneous_links: None,
            },
            Baseline::Fd2 => CapabilityProfile {
                mbs_full_duplex: false,
                sbs_full_duplex: true,
                mbs_sdma: true,
                power_control: true,
                max_simultaneous_links: None,
            },
            Baseline::FdSdma => CapabilityProfile {
                mbs_full_duplex: true,
                sbs_full_duplex: true,
                mbs_sdma: true,
                power_control: true,
                max_simultaneous_links: None,
            },
            Baseline::FdSdmaMp => CapabilityProfile {
                mbs_full_duplex: true,
                sbs_full_duplex: true,
                mbs_sdma: true,
                power_control: false,
                max_simultaneous_links: None,
            },
        }
    }

    /// MBS array size implied by the baseline (32 with SDMA, otherwise 1).
    pub fn default_antennas(&self) -> usize {
        if self.profile().mbs_sdma {
            32
        } else {
            1
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Hd1 => "HD1",
            Baseline::Hd2 => "HD2",
            Baseline::HdSdma => "HD-SDMA",
            Baseline::Fd1 => "FD1",
            Baseline::Fd2 => "FD2",
            Baseline::FdSdma => "FD-SDMA",
            Baseline::FdSdmaMp => "FD-SDMA-MP",
        }
    }

    pub fn from_name(name: &str) -> Option<Baseline> {
        Baseline::ALL.iter().copied().find(|b| b.name() == name)
    }
}

impl std::fmt::Display for Baseline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Distance-dependent loss `intercept + slope * log10(d_km)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
}

impl PathLossParams {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.intercept_db + self.slope_db_per_decade * (distance_m / 1000.0).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    MbsSbs,
    MbsUe,
    SbsUe,
    SbsSbs,
    UeUe,
}

/// NLoS large-scale model constants per link kind. Defaults are the standard
/// 3GPP macro (128.1 + 37.6 log10 d_km) and pico (140.7 + 36.7 log10 d_km)
/// models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossConfig {
    pub mbs_sbs: PathLossParams,
    pub mbs_ue: PathLossParams,
    pub sbs_ue: PathLossParams,
    pub sbs_sbs: PathLossParams,
    pub ue_ue: PathLossParams,
}

const MACRO_NLOS: PathLossParams = PathLossParams {
    intercept_db: 128.1,
    slope_db_per_decade: 37.6,
};
const PICO_NLOS: PathLossParams = PathLossParams {
    intercept_db: 140.7,
    slope_db_per_decade: 36.7,
};

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig {
            mbs_sbs: MACRO_NLOS,
            mbs_ue: MACRO_NLOS,
            sbs_ue: PICO_NLOS,
            sbs_sbs: PICO_NLOS,
            ue_ue: PICO_NLOS,
        }
    }
}

impl PathLossConfig {
    pub fn params(&self, kind: LinkKind) -> PathLossParams {
        match kind {
            LinkKind::MbsSbs => self.mbs_sbs,
            LinkKind::MbsUe => self.mbs_ue,
            LinkKind::SbsUe => self.sbs_ue,
            LinkKind::SbsSbs => self.sbs_sbs,
            LinkKind::UeUe => self.ue_ue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseFigures {
    pub mbs_db: f64,
    pub sbs_db: f64,
    pub ue_db: f64,
}

impl Default for NoiseFigures {
    fn default() -> Self {
        NoiseFigures {
            mbs_db: 5.0,
            sbs_db: 12.0,
            ue_db: 9.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerLimits {
    pub mbs_dbm: f64,
    pub sbs_dbm: f64,
    pub ue_dbm: f64,
}

impl Default for PowerLimits {
    fn default() -> Self {
        PowerLimits {
            mbs_dbm: 46.0,
            sbs_dbm: 24.0,
            ue_dbm: 23.0,
        }
    }
}

impl PowerLimits {
    pub fn max_watts(&self, kind: NodeKind) -> f64 {
        match kind {
            NodeKind::Mbs => dbm_to_watts(self.mbs_dbm),
            NodeKind::Sbs => dbm_to_watts(self.sbs_dbm),
            NodeKind::Ue => dbm_to_watts(self.ue_dbm),
        }
    }
}

/// Scenario parameters; defaults reproduce the reference simulation setup
/// (10 MHz, 46/24/23 dBm, NF 5/12/9 dB, 120 dB self-interference
/// cancellation, 7 b/s/Hz cap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Number of small cells, N_s.
    pub num_cells: usize,
    /// UEs per small cell, N.
    pub ues_per_cell: usize,
    /// MBS to SBS distance in meters.
    pub d1_m: f64,
    /// SBS to SBS distance in meters (two-cell geometry).
    pub d2_m: f64,
    /// MBS antennas L; when absent, derived from the baseline (32 or 1).
    pub num_antennas: Option<usize>,
    pub si_cancellation_db: f64,
    pub bandwidth_hz: f64,
    pub spectral_cap_bps_per_hz: f64,
    pub max_power: PowerLimits,
    pub noise_figure: NoiseFigures,
    pub path_loss: PathLossConfig,
    pub ue_min_distance_m: f64,
    pub ue_max_distance_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_cells: 2,
            ues_per_cell: 10,
            d1_m: 212.06,
            d2_m: 180.0,
            num_antennas: None,
            si_cancellation_db: 120.0,
            bandwidth_hz: 10e6,
            spectral_cap_bps_per_hz: 7.0,
            max_power: PowerLimits::default(),
            noise_figure: NoiseFigures::default(),
            path_loss: PathLossConfig::default(),
            ue_min_distance_m: 10.0,
            ue_max_distance_m: 40.0,
        }
    }
}

impl ScenarioConfig {
    /// Residual self-interference power ratio, e.g. 120 dB -> 1e-12.
    pub fn self_interference_factor(&self) -> f64 {
        db_to_linear(-self.si_cancellation_db)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error("geometrically impossible SBS placement: d2 = {d2} m > 2*d1 = {max} m")]
    ImpossibleGeometry { d2: f64, max: f64 },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
}

/// Node positions plus the static parameters the rest of the pipeline needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub num_cells: usize,
    pub ues_per_cell: usize,
    pub d1_m: f64,
    pub d2_m: f64,
    pub num_antennas: usize,
    pub capabilities: CapabilityProfile,
    pub positions: BTreeMap<NodeId, (f64, f64)>,
}

impl Topology {
    pub fn position(&self, id: NodeId) -> (f64, f64) {
        self.positions[&id]
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (xa, ya) = self.position(a);
        let (xb, yb) = self.position(b);
        ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
    }

    /// All nodes in deterministic order: MBS, SBSs, then UEs cell by cell.
    pub fn nodes(&self) -> Vec<NodeId> {
        self.positions.keys().copied().collect()
    }

    /// Dense index for channel-state storage. MBS = 0, SBS c = 1 + c,
    /// UE (c, u) = 1 + num_cells + c * ues_per_cell + u.
    pub fn node_index(&self, id: NodeId) -> usize {
        match id {
            NodeId::Mbs => 0,
            NodeId::Sbs { cell } => 1 + cell,
            NodeId::Ue { cell, ue } => 1 + self.num_cells + cell * self.ues_per_cell + ue,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.num_cells + self.num_cells * self.ues_per_cell
    }
}

pub fn link_kind(a: NodeKind, b: NodeKind) -> LinkKind {
    use NodeKind::*;
    match (a, b) {
        (Mbs, Sbs) | (Sbs, Mbs) => LinkKind::MbsSbs,
        (Mbs, Ue) | (Ue, Mbs) => LinkKind::MbsUe,
        (Sbs, Ue) | (Ue, Sbs) => LinkKind::SbsUe,
        (Sbs, Sbs) => LinkKind::SbsSbs,
        (Ue, Ue) => LinkKind::UeUe,
        (Mbs, Mbs) => unreachable!("no MBS-MBS propagation link"),
    }
}

/// Large-scale path loss in dB for `kind` at `distance_m`.
pub fn path_loss_db(
    config: &PathLossConfig,
    kind: LinkKind,
    distance_m: f64,
) -> Result<f64, ScenarioError> {
    if distance_m <= 0.0 {
        return Err(ScenarioError::NonPositiveDistance(distance_m));
    }
    Ok(config.params(kind).loss_db(distance_m))
}

/// Thermal noise floor plus noise figure: -174 dBm/Hz + 10 log10(B) + NF,
/// converted to watts.
pub fn noise_power_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    dbm_to_watts(dbm)
}

/// Builds the node layout. SBS geometry is deterministic; only UE placement
/// consumes randomness, so the same seed reproduces identical positions.
pub fn build_topology(
    config: &ScenarioConfig,
    profile: CapabilityProfile,
    num_antennas: usize,
    seed: u64,
) -> Result<Topology, ScenarioError> {
    if config.num_cells < 1 {
        return Err(ScenarioError::InvalidParameter(
            "num_cells must be >= 1".into(),
        ));
    }
    if config.ues_per_cell < 1 {
        return Err(ScenarioError::InvalidParameter(
            "ues_per_cell must be >= 1".into(),
        ));
    }
    if config.d1_m <= 0.0 {
        return Err(ScenarioError::InvalidParameter(
            "d1_m must be positive".into(),
        ));
    }
    if config.d2_m < 0.0 {
        return Err(ScenarioError::InvalidParameter(
            "d2_m must be non-negative".into(),
        ));
    }
    if num_antennas < 1 {
        return Err(ScenarioError::InvalidParameter(
            "num_antennas must be >= 1".into(),
        ));
    }
    if !(0.0 < config.ue_min_distance_m && config.ue_min_distance_m < config.ue_max_distance_m) {
        return Err(ScenarioError::InvalidParameter(
            "require 0 < ue_min_distance_m < ue_max_distance_m".into(),
        ));
    }

    let mut positions = BTreeMap::new();
    positions.insert(NodeId::Mbs, (0.0, 0.0));

    let sbs_positions: Vec<(f64, f64)> = if config.num_cells == 1 {
        vec![(config.d1_m, 0.0)]
    } else if config.num_cells == 2 {
        if config.d2_m > 2.0 * config.d1_m {
            return Err(ScenarioError::ImpossibleGeometry {
                d2: config.d2_m,
                max: 2.0 * config.d1_m,
            });
        }
        // Symmetric about the x axis: both at distance d1 from the origin,
        // separated by d2.
        let y = config.d2_m / 2.0;
        let x = (config.d1_m.powi(2) - y.powi(2)).sqrt();
        vec![(x, y), (x, -y)]
    } else {
        // Uniform on a circle of radius d1; d2 is ignored.
        (0..config.num_cells)
            .map(|c| {
                let theta = 2.0 * std::f64::consts::PI * c as f64 / config.num_cells as f64;
                (config.d1_m * theta.cos(), config.d1_m * theta.sin())
            })
            .collect()
    };
    for (c, pos) in sbs_positions.iter().enumerate() {
        positions.insert(NodeId::Sbs { cell: c }, *pos);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rng_purpose::TOPOLOGY, 0));
    let r_min2 = config.ue_min_distance_m.powi(2);
    let r_max2 = config.ue_max_distance_m.powi(2);
    for c in 0..config.num_cells {
        let (sx, sy) = sbs_positions[c];
        for u in 0..config.ues_per_cell {
            // Uniform over the annulus area.
            let r = (rng.gen::<f64>() * (r_max2 - r_min2) + r_min2).sqrt();
            let theta = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            positions.insert(
                NodeId::Ue { cell: c, ue: u },
                (sx + r * theta.cos(), sy + r * theta.sin()),
            );
        }
    }

    Ok(Topology {
        num_cells: config.num_cells,
        ues_per_cell: config.ues_per_cell,
        d1_m: config.d1_m,
        d2_m: config.d2_m,
        num_antennas,
        capabilities: profile,
        positions,
    })
}

/// Complete channel state for one slot: pairwise scalar responses between
/// SBS/UE nodes, the MBS vector channels, self-interference factors and noise
/// powers. Immutable once built; reciprocity h(a,b) = h(b,a) holds within the
/// slot.
#[derive(Debug, Clone)]
pub struct ChannelState {
    num_cells: usize,
    ues_per_cell: usize,
    n_nodes: usize,
    scalar: Vec<Complex64>,
    mbs_vec: Vec<DVector<Complex64>>,
    pub gamma_mbs: f64,
    pub gamma_sbs: f64,
    pub noise_mbs_w: f64,
    pub noise_sbs_w: f64,
    pub noise_ue_w: f64,
}

impl ChannelState {
    fn idx(&self, id: NodeId) -> usize {
        match id {
            NodeId::Mbs => 0,
            NodeId::Sbs { cell } => 1 + cell,
            NodeId::Ue { cell, ue } => 1 + self.num_cells + cell * self.ues_per_cell + ue,
        }
    }

    /// Scalar channel response between two non-MBS nodes.
    pub fn h(&self, a: NodeId, b: NodeId) -> Complex64 {
        assert!(
            a != NodeId::Mbs && b != NodeId::Mbs,
            "MBS links are vector valued"
        );
        assert!(a != b, "no scalar channel from a node to itself");
        self.scalar[self.idx(a) * self.n_nodes + self.idx(b)]
    }

    /// Linear power gain |h|^2 between two non-MBS nodes.
    pub fn gain(&self, a: NodeId, b: NodeId) -> f64 {
        self.h(a, b).norm_sqr()
    }

    /// Vector channel between the MBS array and node `x`.
    pub fn mbs_channel(&self, x: NodeId) -> &DVector<Complex64> {
        assert!(x != NodeId::Mbs);
        &self.mbs_vec[self.idx(x)]
    }

    pub fn noise_w(&self, kind: NodeKind) -> f64 {
        match kind {
            NodeKind::Mbs => self.noise_mbs_w,
            NodeKind::Sbs => self.noise_sbs_w,
            NodeKind::Ue => self.noise_ue_w,
        }
    }
}

/// Draws i.i.d. Rayleigh block fading for every link: h = sqrt(g) * z with z
/// standard circularly-symmetric complex Gaussian and g the linear path gain.
/// Deterministic per (seed, slot); each slot uses an independent stream.
pub fn draw_channels(
    topology: &Topology,
    config: &ScenarioConfig,
    seed: u64,
    slot: u64,
) -> ChannelState {
    let n = topology.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rng_purpose::FADING, slot));
    let cplx_gauss = |rng: &mut ChaCha8Rng| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };

    let nodes = topology.nodes();
    let mut scalar = vec![Complex64::new(0.0, 0.0); n * n];
    let mut mbs_vec = vec![DVector::zeros(0); n];
    let l = topology.num_antennas;

    for (i, &a) in nodes.iter().enumerate() {
        for &b in nodes.iter().skip(i + 1) {
            let d = topology.distance(a, b).max(1.0);
            let kind = link_kind(a.kind(), b.kind());
            let g = db_to_linear(-config.path_loss.params(kind).loss_db(d));
            if a == NodeId::Mbs || b == NodeId::Mbs {
                let other = if a == NodeId::Mbs { b } else { a };
                let amp = g.sqrt();
                let v = DVector::from_fn(l, |_, _| cplx_gauss(&mut rng) * amp);
                mbs_vec[topology.node_index(other)] = v;
            } else {
                let h = cplx_gauss(&mut rng) * g.sqrt();
                let (ia, ib) = (topology.node_index(a), topology.node_index(b));
                scalar[ia * n + ib] = h;
                scalar[ib * n + ia] = h;
            }
        }
    }

    let gamma = config.self_interference_factor();
    ChannelState {
        num_cells: topology.num_cells,
        ues_per_cell: topology.ues_per_cell,
        n_nodes: n,
        scalar,
        mbs_vec,
        gamma_mbs: gamma,
        gamma_sbs: gamma,
        noise_mbs_w: noise_power_watts(config.bandwidth_hz, config.noise_figure.mbs_db),
        noise_sbs_w: noise_power_watts(config.bandwidth_hz, config.noise_figure.sbs_db),
        noise_ue_w: noise_power_watts(config.bandwidth_hz, config.noise_figure.ue_db),
    }
}
