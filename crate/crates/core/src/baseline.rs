//! Interference-avoiding reference: each node gets `Q` exclusive slots.
//!
//! Nodes use the same analog power encoding as the over-the-air scheme, so
//! the only difference between the two is the multiple-access strategy. The
//! fusion center estimates each node's power from its own slots, subtracts
//! the noise mean, inverts `g` per node and evaluates the classifier on the
//! sum.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ota::{ChannelModel, OtaError, PowerMapping};
use crate::svm::{SeparatingHyperplane, Sign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("slots per node must be at least 1")]
    NoSlots,
    #[error("invalid energy model: {0}")]
    InvalidEnergyModel(String),
    #[error(transparent)]
    Ota(#[from] OtaError),
}

/// Recorded in run metadata so that consumers know which reference was used.
pub const TDMA_DECODER: &str = "per-node energy average, noise-mean subtraction, clamp >= 0, per-node g inverse, linear combination";

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaConfig {
    slots_per_node: usize,
    channel: ChannelModel,
}

impl TdmaConfig {
    /// The channel's block length is ignored; its gains and noise variance
    /// apply to every slot.
    pub fn new(slots_per_node: usize, channel: ChannelModel) -> Result<Self, BaselineError> {
        if slots_per_node == 0 {
            return Err(BaselineError::NoSlots);
        }
        Ok(Self {
            slots_per_node,
            channel,
        })
    }

    pub fn slots_per_node(&self) -> usize {
        self.slots_per_node
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }
}

/// Per-node power estimates `mean_q |Y_k[q]|^2 - sigma^2`, clamped at zero.
pub fn tdma_energy_estimates<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    cfg: &TdmaConfig,
    rng: &mut R,
) -> Result<Vec<f64>, BaselineError> {
    let ch = cfg.channel();
    if s.len() != ch.nodes() || s.len() != hyp.dim() {
        return Err(OtaError::DimensionMismatch {
            expected: ch.nodes(),
            got: s.len(),
        }
        .into());
    }
    let q = cfg.slots_per_node();
    let mut estimates = Vec::with_capacity(s.len());
    for ((sk, wk), h) in s.iter().zip(&hyp.w).zip(ch.gains()) {
        let pre = h.inv() * mapping.power(wk * sk)?.sqrt();
        let mut energy = 0.0;
        for _ in 0..q {
            let x = pre * Complex64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>());
            let mut y = h * x;
            if ch.noise_var() > 0.0 {
                y += ch.noise(rng);
            }
            energy += y.norm_sqr();
        }
        estimates.push((energy / q as f64 - ch.noise_var()).max(0.0));
    }
    Ok(estimates)
}

/// Decision statistic `sum_k g^-1(e_k) + b`.
pub fn tdma_statistic<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    cfg: &TdmaConfig,
    rng: &mut R,
) -> Result<f64, BaselineError> {
    let est = tdma_energy_estimates(s, hyp, mapping, cfg, rng)?;
    Ok(est.iter().map(|&e| mapping.preimage(e)).sum::<f64>() + hyp.b)
}

pub fn tdma_classify<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    cfg: &TdmaConfig,
    rng: &mut R,
) -> Result<Sign, BaselineError> {
    tdma_statistic(s, hyp, mapping, cfg, rng).map(Sign::of)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    /// Simultaneous transmission, interference exploited.
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "TDMA")]
    Tdma,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ei => "EI",
            Scheme::Tdma => "TDMA",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    p_max: f64,
    symbol_duration: f64,
}

impl EnergyModel {
    pub fn new(p_max: f64, symbol_duration: f64) -> Result<Self, BaselineError> {
        for (v, what) in [(p_max, "p_max"), (symbol_duration, "symbol_duration")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BaselineError::InvalidEnergyModel(format!("{what} must be positive, got {v}")));
            }
        }
        Ok(Self { p_max, symbol_duration })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAccount {
    /// Total transmit energy over all nodes, joules.
    pub energy: f64,
    /// Air time of one classification, seconds.
    pub duration: f64,
}

/// Transmit energy and air time of one classification.
///
/// Each node spends `uses * P_k * T` in either scheme; the EI block takes
/// `M T` of air time while TDMA serializes the nodes and takes `Q K T`.
pub fn energy_per_classification(scheme: Scheme, powers: &[f64], uses: usize, em: &EnergyModel) -> EnergyAccount {
    let t = em.symbol_duration();
    let energy = powers.iter().map(|p| uses as f64 * p * t).sum();
    let duration = match scheme {
        Scheme::Ei => uses as f64 * t,
        Scheme::Tdma => (uses * powers.len()) as f64 * t,
    };
    EnergyAccount { energy, duration }
}
