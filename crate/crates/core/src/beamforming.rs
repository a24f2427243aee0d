//! MMSE receive and transmit beamforming at the multi-antenna MBS.
//!
//! Both directions share the regularized-inverse closed form
//! `normalize((I + sum_i c_i h_i h_i^H)^-1 h_k)`, which maximizes the
//! generalized Rayleigh quotient of the per-stream SINR. Receive beams load
//! the interferers with `p_i / sigma_M^2`, transmit beams with
//! `p_i / (N_S sigma_M^2)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeamformingError {
    #[error("channel vector length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need as many powers as channels: {channels} channels, {powers} powers")]
    PowerCountMismatch { channels: usize, powers: usize },
    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),
}

/// Which power index the printed closed form loads the interference terms
/// with. The MMSE derivation calls for the per-interferer power `p_i`
/// (default); the printed equation repeats the intended stream's `p_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LoadingVariant {
    PerInterferer,
    PrintedIndex,
}

impl Default for LoadingVariant {
    fn default() -> Self {
        LoadingVariant::PerInterferer
    }
}

/// Beam vectors for the backhaul streams of one slot, indexed by small cell.
#[derive(Debug, Clone, Default)]
pub struct BeamformerSet {
    /// Receive beam v_k for the uplink stream from SBS k.
    pub receive: Vec<DVector<Complex64>>,
    /// Transmit beam w_k for the downlink stream toward SBS k.
    pub transmit: Vec<DVector<Complex64>>,
}

fn check_inputs(
    channels: &[DVector<Complex64>],
    powers: &[f64],
    noise: f64,
) -> Result<usize, BeamformingError> {
    if noise <= 0.0 {
        return Err(BeamformingError::NonPositiveNoise(noise));
    }
    if channels.len() != powers.len() {
        return Err(BeamformingError::PowerCountMismatch {
            channels: channels.len(),
            powers: powers.len(),
        });
    }
    let l = channels.first().map_or(0, |h| h.len());
    for h in channels {
        if h.len() != l {
            return Err(BeamformingError::DimensionMismatch {
                expected: l,
                got: h.len(),
            });
        }
    }
    Ok(l)
}

/// Closed form shared by both directions: for each k, solve
/// (I + sum_i load_i h_i h_i^H) x = h_k and normalize. `load(i, k)` gives the
/// loading coefficient of channel i when computing beam k.
fn mmse_beams(
    channels: &[DVector<Complex64>],
    load: impl Fn(usize, usize) -> f64,
) -> Vec<DVector<Complex64>> {
    let l = channels[0].len();
    let mut beams = Vec::with_capacity(channels.len());
    for k in 0..channels.len() {
        let mut a = DMatrix::<Complex64>::identity(l, l);
        for (i, h) in channels.iter().enumerate() {
            let c = Complex64::new(load(i, k), 0.0);
            // a += c * h h^H
            a.ger(c, h, &h.conjugate(), Complex64::new(1.0, 0.0));
        }
        let x = a
            .lu()
            .solve(&channels[k])
            .expect("identity-regularized matrix is nonsingular");
        let norm = x.norm();
        beams.push(x / Complex64::new(norm, 0.0));
    }
    beams
}

/// Receive beams v_k for the uplink SBS channels, loading p_i / sigma_M^2.
pub fn mmse_receive(
    channels: &[DVector<Complex64>],
    powers: &[f64],
    noise_mbs: f64,
    variant: LoadingVariant,
) -> Result<Vec<DVector<Complex64>>, BeamformingError> {
    check_inputs(channels, powers, noise_mbs)?;
    if channels.is_empty() {
        return Ok(Vec::new());
    }
    Ok(mmse_beams(channels, |i, k| {
        let p = match variant {
            LoadingVariant::PerInterferer => powers[i],
            LoadingVariant::PrintedIndex => powers[k],
        };
        p / noise_mbs
    }))
}

/// Transmit beams w_k, loading p_i / (N_S sigma_M^2).
pub fn mmse_transmit(
    channels: &[DVector<Complex64>],
    powers: &[f64],
    noise_mbs: f64,
    num_sbs: usize,
    variant: LoadingVariant,
) -> Result<Vec<DVector<Complex64>>, BeamformingError> {
    check_inputs(channels, powers, noise_mbs)?;
    if channels.is_empty() {
        return Ok(Vec::new());
    }
    let n_s = num_sbs.max(1) as f64;
    Ok(mmse_beams(channels, |i, k| {
        let p = match variant {
            LoadingVariant::PerInterferer => powers[i],
            LoadingVariant::PrintedIndex => powers[k],
        };
        p / (n_s * noise_mbs)
    }))
}

/// Effective scalar power gain |h^H b|^2 of a vector channel through a beam.
pub fn effective_gain(
    vector_channel: &DVector<Complex64>,
    beam: &DVector<Complex64>,
) -> Result<f64, BeamformingError> {
    if vector_channel.len() != beam.len() {
        return Err(BeamformingError::DimensionMismatch {
            expected: vector_channel.len(),
            got: beam.len(),
        });
    }
    Ok(vector_channel.dotc(beam).norm_sqr())
}
