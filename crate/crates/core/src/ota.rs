//! Computing the linear classifier over a multiple-access channel.
//!
//! Node `k` pre-processes its reading to `w_k s_k`, maps that affinely to a
//! transmit power `g(w_k s_k)` in `[0, p_max]`, and sends `M` symbols of that
//! power with independent uniform phases, pre-multiplied by `1/h_k`. All
//! nodes transmit at once. The fusion center sums the received energy over
//! the block, undoes the power map with `h`, removes the known noise bias
//! and takes the sign after adding `b`.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::SensingRange;
use crate::svm::{SeparatingHyperplane, Sign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtaError {
    #[error("degenerate power mapping: phi_min = phi_max = {0}")]
    DegenerateMapping(f64),
    #[error("invalid power mapping: {0}")]
    InvalidMapping(String),
    #[error("pre-processed value {value} outside [{phi_min}, {phi_max}]")]
    OutOfRangePreimage { value: f64, phi_min: f64, phi_max: f64 },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty sample set")]
    EmptySampleSet,
}

/// The affine power map `g` and its receiver-side counterpart `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMapping {
    phi_min: f64,
    phi_max: f64,
    p_max: f64,
}

impl PowerMapping {
    pub fn new(phi_min: f64, phi_max: f64, p_max: f64) -> Result<Self, OtaError> {
        if !(phi_min.is_finite() && phi_max.is_finite()) {
            return Err(OtaError::InvalidMapping("phi range is not finite".into()));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(OtaError::InvalidMapping(format!("p_max must be positive, got {p_max}")));
        }
        if phi_min == phi_max {
            return Err(OtaError::DegenerateMapping(phi_min));
        }
        if phi_min > phi_max {
            return Err(OtaError::InvalidMapping(format!("phi_min {phi_min} > phi_max {phi_max}")));
        }
        Ok(Self {
            phi_min,
            phi_max,
            p_max,
        })
    }

    /// Smallest interval containing every `w_k s` with `s` in range `k`.
    pub fn from_weights(w: &[f64], ranges: &[SensingRange], p_max: f64) -> Result<Self, OtaError> {
        if w.len() != ranges.len() {
            return Err(OtaError::DimensionMismatch {
                expected: ranges.len(),
                got: w.len(),
            });
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(OtaError::InvalidMapping("weight vector is zero".into()));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (wk, r) in w.iter().zip(ranges) {
            let (a, b) = (wk * r.lo, wk * r.hi);
            lo = lo.min(a.min(b));
            hi = hi.max(a.max(b));
        }
        Self::new(lo, hi, p_max)
    }

    pub fn phi_min(&self) -> f64 {
        self.phi_min
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// `(phi_max - phi_min) / p_max`.
    pub fn alpha(&self) -> f64 {
        (self.phi_max - self.phi_min) / self.p_max
    }

    /// `g(xi)`, unchecked.
    pub fn g(&self, xi: f64) -> f64 {
        self.p_max * ((xi - self.phi_min) / (self.phi_max - self.phi_min))
    }

    /// `g(xi)` for a pre-processed value that must lie in the mapping domain.
    pub fn power(&self, xi: f64) -> Result<f64, OtaError> {
        let slack = 1e-12 * self.phi_min.abs().max(self.phi_max.abs()).max(1.0);
        if !(xi >= self.phi_min - slack && xi <= self.phi_max + slack) {
            return Err(OtaError::OutOfRangePreimage {
                value: xi,
                phi_min: self.phi_min,
                phi_max: self.phi_max,
            });
        }
        Ok(self.g(xi).clamp(0.0, self.p_max))
    }

    /// Inverse of `g` for one node: the pre-processed value carried by `power`.
    pub fn preimage(&self, power: f64) -> f64 {
        self.alpha() * power + self.phi_min
    }

    /// `h(y) = alpha / M * y + K phi_min`.
    pub fn post_process(&self, y_tilde: f64, block_len: usize, nodes: usize) -> f64 {
        (self.phi_max - self.phi_min) / (block_len as f64 * self.p_max) * y_tilde
            + nodes as f64 * self.phi_min
    }

    /// Per-node transmit powers `g(w_k s_k)` for a full state.
    pub fn powers(&self, w: &[f64], s: &[f64]) -> Result<Vec<f64>, OtaError> {
        if w.len() != s.len() {
            return Err(OtaError::DimensionMismatch {
                expected: w.len(),
                got: s.len(),
            });
        }
        w.iter().zip(s).map(|(wk, sk)| self.power(wk * sk)).collect()
    }
}

/// Flat-fading multiple-access channel with proper complex Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    gains: Vec<Complex64>,
    noise_var: f64,
    block_len: usize,
}

impl ChannelModel {
    pub fn new(gains: Vec<Complex64>, noise_var: f64, block_len: usize) -> Result<Self, OtaError> {
        if gains.is_empty() {
            return Err(OtaError::InvalidChannel("no nodes".into()));
        }
        if let Some(k) = gains.iter().position(|h| !(h.norm() > 0.0 && h.is_finite())) {
            return Err(OtaError::InvalidChannel(format!("gain of node {k} must be finite and nonzero")));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(OtaError::InvalidChannel(format!("noise variance must be finite and >= 0, got {noise_var}")));
        }
        if block_len == 0 {
            return Err(OtaError::InvalidChannel("block length must be at least 1".into()));
        }
        Ok(Self {
            gains,
            noise_var,
            block_len,
        })
    }

    pub fn unit_gains(nodes: usize, noise_var: f64, block_len: usize) -> Result<Self, OtaError> {
        Self::new(vec![Complex64::new(1.0, 0.0); nodes], noise_var, block_len)
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn nodes(&self) -> usize {
        self.gains.len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn with_block_len(&self, block_len: usize) -> Result<Self, OtaError> {
        Self::new(self.gains.clone(), self.noise_var, block_len)
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self, OtaError> {
        Self::new(self.gains.clone(), noise_var, self.block_len)
    }

    /// One proper complex Gaussian sample of total variance `noise_var`.
    pub fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let sd = (self.noise_var / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(sd * re, sd * im)
    }
}

/// Symbols of all nodes for one block, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitFrame {
    symbols: Vec<Complex64>,
    nodes: usize,
    block_len: usize,
}

impl TransmitFrame {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, OtaError> {
        let nodes = rows.len();
        let block_len = rows.first().map_or(0, Vec::len);
        if nodes == 0 || block_len == 0 {
            return Err(OtaError::InvalidChannel("empty frame".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != block_len) {
            return Err(OtaError::DimensionMismatch {
                expected: block_len,
                got: r.len(),
            });
        }
        Ok(Self {
            symbols: rows.into_iter().flatten().collect(),
            nodes,
            block_len,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.symbols[k * self.block_len..(k + 1) * self.block_len]
    }

    /// Largest `|X_k[m]|^2` per node, before the channel.
    pub fn peak_powers(&self) -> Vec<f64> {
        (0..self.nodes)
            .map(|k| self.row(k).iter().map(|x| x.norm_sqr()).fold(0.0, f64::max))
            .collect()
    }
}

/// Symbols of node `k` for one block.
pub fn encode<R: Rng + ?Sized>(
    k: usize,
    s_k: f64,
    w_k: f64,
    mapping: &PowerMapping,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<Vec<Complex64>, OtaError> {
    let h = *channel.gains().get(k).ok_or(OtaError::DimensionMismatch {
        expected: channel.nodes(),
        got: k + 1,
    })?;
    let amplitude = mapping.power(w_k * s_k)?.sqrt();
    let pre = h.inv() * amplitude;
    Ok((0..channel.block_len())
        .map(|_| pre * Complex64::from_polar(1.0, TAU * rng.random::<f64>()))
        .collect())
}

/// All nodes' symbols for state `s`, encoded in node order.
pub fn transmit_frame<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<TransmitFrame, OtaError> {
    if s.len() != hyp.dim() || s.len() != channel.nodes() {
        return Err(OtaError::DimensionMismatch {
            expected: channel.nodes(),
            got: s.len(),
        });
    }
    let rows = s
        .iter()
        .zip(&hyp.w)
        .enumerate()
        .map(|(k, (sk, wk))| encode(k, *sk, *wk, mapping, channel, rng))
        .collect::<Result<Vec<_>, _>>()?;
    TransmitFrame::from_rows(rows)
}

/// `Y[m] = sum_k h_k X_k[m] + N[m]`.
pub fn channel_output<R: Rng + ?Sized>(
    frame: &TransmitFrame,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<Vec<Complex64>, OtaError> {
    if frame.nodes() != channel.nodes() {
        return Err(OtaError::DimensionMismatch {
            expected: channel.nodes(),
            got: frame.nodes(),
        });
    }
    if frame.block_len() != channel.block_len() {
        return Err(OtaError::DimensionMismatch {
            expected: channel.block_len(),
            got: frame.block_len(),
        });
    }
    let mut y = vec![Complex64::new(0.0, 0.0); frame.block_len()];
    for (k, h) in channel.gains().iter().enumerate() {
        for (ym, x) in y.iter_mut().zip(frame.row(k)) {
            *ym += h * x;
        }
    }
    if channel.noise_var() > 0.0 {
        for ym in y.iter_mut() {
            *ym += channel.noise(rng);
        }
    }
    Ok(y)
}

/// `sum_m |y[m]|^2`.
pub fn receive_energy(y: &[Complex64]) -> f64 {
    y.iter().map(|v| v.norm_sqr()).sum()
}

/// The estimator's argument before the sign: `h(Y~) + b - alpha * sigma^2`.
pub fn ota_statistic<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<f64, OtaError> {
    let frame = transmit_frame(s, hyp, mapping, channel, rng)?;
    let y = channel_output(&frame, channel, rng)?;
    Ok(statistic_from_energy(receive_energy(&y), hyp, mapping, channel))
}

pub(crate) fn statistic_from_energy(
    y_tilde: f64,
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    channel: &ChannelModel,
) -> f64 {
    // alpha * M^-1 * E{N~} with E{N~} = M sigma^2
    let bias = mapping.alpha() * channel.noise_var();
    mapping.post_process(y_tilde, channel.block_len(), channel.nodes()) + hyp.b - bias
}

/// One encode, channel and receive pass; the fusion center's decision.
pub fn ota_classify<R: Rng + ?Sized>(
    s: &[f64],
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<Sign, OtaError> {
    ota_statistic(s, hyp, mapping, channel, rng).map(Sign::of)
}

/// Mean and variance of the effective noise `N~ = Y~ - M sum_k g_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMoments {
    pub mean: f64,
    pub variance: f64,
}

impl NoiseMoments {
    /// Centered residual `N~ - E{N~}`.
    pub fn centered(&self, effective_noise: f64) -> f64 {
        effective_noise - self.mean
    }
}

/// Effective-noise moments with expectations over the state replaced by
/// averages over `states`.
///
/// Given the powers, each symbol contributes `sum_{k<l} 2 g_k g_l` from the
/// cross-node phase terms, `2 sigma^2 sum_k g_k` from signal-noise products
/// and `sigma^4` from the noise energy, so
/// `Var = 2M sum_{k<l} E{g_k g_l} + 2M sigma^2 sum_k E{g_k} + M sigma^4`.
pub fn noise_moments(
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    channel: &ChannelModel,
    states: &[Vec<f64>],
) -> Result<NoiseMoments, OtaError> {
    if states.is_empty() {
        return Err(OtaError::EmptySampleSet);
    }
    let mut pair_sum = 0.0;
    let mut power_sum = 0.0;
    for s in states {
        let g = mapping.powers(&hyp.w, s)?;
        let s1: f64 = g.iter().sum();
        let s2: f64 = g.iter().map(|x| x * x).sum();
        // sum over unordered pairs k < l
        pair_sum += (s1 * s1 - s2) / 2.0;
        power_sum += s1;
    }
    let n = states.len() as f64;
    let m = channel.block_len() as f64;
    let var_n = channel.noise_var();
    Ok(NoiseMoments {
        mean: m * var_n,
        variance: 2.0 * m * pair_sum / n + 2.0 * m * var_n * power_sum / n + m * var_n * var_n,
    })
}

/// Debug dump of one received block: `m,re,im`.
pub fn write_trace_csv<W: Write>(y: &[Complex64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "m,re,im")?;
    for (m, v) in y.iter().enumerate() {
        writeln!(out, "{},{},{}", m + 1, v.re, v.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    fn ranges(spec: &[(f64, f64)]) -> Vec<SensingRange> {
        spec.iter().map(|&(a, b)| SensingRange::new(a, b).unwrap()).collect()
    }

    /// Exhaustive grid min/max of w_k s over each range.
    fn grid_extremes(w: &[f64], r: &[SensingRange]) -> (f64, f64) {
        let n = 10_000;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (wk, rk) in w.iter().zip(r) {
            for i in 0..=n {
                let s = rk.lo + (rk.hi - rk.lo) * i as f64 / n as f64;
                lo = lo.min(wk * s);
                hi = hi.max(wk * s);
            }
        }
        (lo, hi)
    }

    #[test]
    fn mapping_from_weights() {
        let r = ranges(&[(0.0, 30.0), (0.0, 30.0)]);
        let m = PowerMapping::from_weights(&[1.0, 1.0], &r, 1.0).unwrap();
        assert_eq!((m.phi_min(), m.phi_max()), (0.0, 30.0));
        let m = PowerMapping::from_weights(&[-1.0, -1.0], &r, 1.0).unwrap();
        assert_eq!((m.phi_min(), m.phi_max()), (-30.0, 0.0));

        let r = ranges(&[(0.0, 10.0), (0.0, 30.0)]);
        let w = [2.0, -0.5];
        let m = PowerMapping::from_weights(&w, &r, 1.0).unwrap();
        let (lo, hi) = grid_extremes(&w, &r);
        assert!((lo - -15.0).abs() < 1e-9 && (hi - 20.0).abs() < 1e-9);
        assert!((m.phi_min() - lo).abs() < 1e-9 && (m.phi_max() - hi).abs() < 1e-9);
    }

    #[test]
    fn mapping_errors() {
        // w = (0, 1) on a one-point image would still span; force a collapse
        assert!(matches!(PowerMapping::new(2.0, 2.0, 1.0), Err(OtaError::DegenerateMapping(_))));
        assert!(PowerMapping::new(3.0, 2.0, 1.0).is_err());
        assert!(PowerMapping::new(0.0, 2.0, 0.0).is_err());
        let r = ranges(&[(0.0, 30.0), (0.0, 30.0)]);
        assert!(PowerMapping::from_weights(&[0.0, 0.0], &r, 1.0).is_err());
        assert!(PowerMapping::from_weights(&[1.0], &r, 1.0).is_err());
    }

    #[test]
    fn g_endpoints_are_exact() {
        for (lo, hi, p) in [(0.0, 30.0, 100e-6), (-15.0, 20.0, 1.0), (-0.3, 7.1, 3.3e-5)] {
            let m = PowerMapping::new(lo, hi, p).unwrap();
            assert_eq!(m.g(lo), 0.0);
            assert_eq!(m.g(hi), p);
            assert!(m.alpha() > 0.0);
        }
    }

    #[test]
    fn encode_power_levels() {
        let mapping = PowerMapping::new(0.0, 30.0, 100e-6).unwrap();
        let ch = ChannelModel::unit_gains(1, 0.0, 16).unwrap();
        let mut rng = StreamFactory::new(0).stream(&[]);

        let x = encode(0, 0.0, 1.0, &mapping, &ch, &mut rng).unwrap();
        assert!(x.iter().all(|v| v.norm_sqr() == 0.0));

        let x = encode(0, 30.0, 1.0, &mapping, &ch, &mut rng).unwrap();
        assert!(x.iter().all(|v| (v.norm_sqr() - 100e-6).abs() < 1e-18));

        // midpoint of the affine map, checked against the formula directly
        let expected: f64 = 100e-6 / (30.0 - 0.0) * (15.0 - 0.0);
        assert!((expected - 50e-6).abs() < 1e-20);
        let x = encode(0, 15.0, 1.0, &mapping, &ch, &mut rng).unwrap();
        assert!(x.iter().all(|v| (v.norm_sqr() - expected).abs() < 1e-18));

        assert!(matches!(
            encode(0, 31.0, 1.0, &mapping, &ch, &mut rng),
            Err(OtaError::OutOfRangePreimage { .. })
        ));
    }

    #[test]
    fn channel_inversion_identity() {
        let mapping = PowerMapping::new(-30.0, 0.0, 1.0).unwrap();
        let gains = vec![Complex64::from_polar(0.3, 1.1), Complex64::from_polar(2.5, -2.0)];
        let ch = ChannelModel::new(gains.clone(), 0.0, 32).unwrap();
        let mut rng = StreamFactory::new(9).stream(&[]);
        for (k, s) in [(0usize, 12.0), (1, 27.0)] {
            let x = encode(k, s, -1.0, &mapping, &ch, &mut rng).unwrap();
            let target = mapping.g(-s);
            for v in x {
                assert!(((gains[k] * v).norm_sqr() - target).abs() < 1e-12 * target.max(1.0));
            }
        }
    }

    #[test]
    fn weak_gain_reports_raw_peak_power() {
        let mapping = PowerMapping::new(0.0, 1.0, 1.0).unwrap();
        let hyp = SeparatingHyperplane::new(vec![1.0, 1.0], -1.0).unwrap();
        let ch = ChannelModel::new(vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)], 0.0, 4).unwrap();
        let frame = transmit_frame(&[1.0, 1.0], &hyp, &mapping, &ch, &mut StreamFactory::new(1).stream(&[])).unwrap();
        let peaks = frame.peak_powers();
        assert!((peaks[0] - 4.0).abs() < 1e-12, "{peaks:?}");
        assert!((peaks[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn receive_energy_examples() {
        assert_eq!(receive_energy(&[Complex64::new(0.0, 0.0); 4]), 0.0);
        assert_eq!(receive_energy(&[Complex64::new(1.0, 0.0); 7]), 7.0);
        assert_eq!(receive_energy(&[Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]), 25.0);
    }

    #[test]
    fn post_process_zero() {
        let m = PowerMapping::new(0.0, 30.0, 1.0).unwrap();
        assert_eq!(m.post_process(0.0, 8, 2), 0.0);
    }

    #[test]
    fn single_node_noiseless_energy_is_exact() {
        let mapping = PowerMapping::new(0.0, 1.0, 2.0).unwrap();
        let hyp = SeparatingHyperplane::new(vec![1.0], -0.5).unwrap();
        let ch = ChannelModel::unit_gains(1, 0.0, 10).unwrap();
        let mut rng = StreamFactory::new(2).stream(&[]);
        let frame = transmit_frame(&[0.3], &hyp, &mapping, &ch, &mut rng).unwrap();
        let y = channel_output(&frame, &ch, &mut rng).unwrap();
        for v in &y {
            assert!((v.norm_sqr() - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_output_dimension_checks() {
        let frame = TransmitFrame::from_rows(vec![vec![Complex64::new(1.0, 0.0); 3]; 2]).unwrap();
        let mut rng = StreamFactory::new(2).stream(&[]);
        let ch = ChannelModel::unit_gains(3, 0.0, 3).unwrap();
        assert!(channel_output(&frame, &ch, &mut rng).is_err());
        let ch = ChannelModel::unit_gains(2, 0.0, 4).unwrap();
        assert!(channel_output(&frame, &ch, &mut rng).is_err());
        assert!(TransmitFrame::from_rows(vec![vec![Complex64::new(1.0, 0.0); 3], vec![]]).is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelModel::new(vec![Complex64::new(0.0, 0.0)], 0.0, 1).is_err());
        assert!(ChannelModel::unit_gains(2, -1.0, 1).is_err());
        assert!(ChannelModel::unit_gains(2, f64::NAN, 1).is_err());
        assert!(ChannelModel::unit_gains(2, 1.0, 0).is_err());
    }

    #[test]
    fn moments_trivial_cases() {
        let mapping = PowerMapping::new(0.0, 1.0, 1.0).unwrap();
        let hyp = SeparatingHyperplane::new(vec![1.0], 0.0).unwrap();
        let ch = ChannelModel::unit_gains(1, 0.0, 64).unwrap();
        let m = noise_moments(&hyp, &mapping, &ch, &[vec![0.4], vec![0.9]]).unwrap();
        assert_eq!((m.mean, m.variance), (0.0, 0.0));

        // silent nodes: only the noise energy term survives
        let hyp = SeparatingHyperplane::new(vec![1.0, 1.0], 0.0).unwrap();
        let ch = ChannelModel::unit_gains(2, 0.3, 64).unwrap();
        let m = noise_moments(&hyp, &mapping, &ch, &[vec![0.0, 0.0]]).unwrap();
        assert!((m.mean - 64.0 * 0.3).abs() < 1e-12);
        assert!((m.variance - 64.0 * 0.09).abs() < 1e-12);
        assert_eq!(m.centered(m.mean), 0.0);

        assert_eq!(noise_moments(&hyp, &mapping, &ch, &[]), Err(OtaError::EmptySampleSet));
    }

    #[test]
    fn trace_csv() {
        let mut buf = Vec::new();
        write_trace_csv(&[Complex64::new(1.0, -2.0)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "m,re,im\n1,1,-2\n");
    }
}
