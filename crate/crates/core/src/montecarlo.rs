//! Seeded Monte Carlo reliability and energy experiments.
//!
//! Reliability of a test state is the fraction of independent channel
//! realizations in which the scheme's output equals the noiseless
//! classifier's output `sign(w.s + b)`. A zero output never counts as
//! agreement. Trial `t` of test state `i` always draws from the stream
//! `(master_seed, i, t)`, so results do not depend on how trials are spread
//! over worker threads, and sweeps over `M` or SNR reuse the same random
//! numbers at every grid point.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::baseline::{self, BaselineError, EnergyModel, Scheme, TdmaConfig};
use crate::ota::{self, ChannelModel, NoiseMoments, OtaError, PowerMapping};
use crate::rng::{tags, Stream, StreamFactory};
use crate::scenario::SensingRange;
use crate::svm::{Label, LabeledSample, SeparatingHyperplane, Sign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("mean transmit power is zero; the power mapping is degenerate for these samples")]
    ZeroMeanPower,
    #[error("reliability maps need a two-dimensional state space, got {0}")]
    DimensionNotTwo(usize),
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Ota(#[from] OtaError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Noise level that realizes a given SNR for the frozen mean transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub snr_db: f64,
    pub noise_var: f64,
    pub mean_power: f64,
}

impl OperatingPoint {
    pub fn with_snr_db(&self, snr_db: f64) -> OperatingPoint {
        OperatingPoint {
            snr_db,
            noise_var: noise_var_for(self.mean_power, snr_db),
            mean_power: self.mean_power,
        }
    }

    /// A noiseless channel; used for exactness checks.
    pub fn noiseless(mean_power: f64) -> OperatingPoint {
        OperatingPoint {
            snr_db: f64::INFINITY,
            noise_var: 0.0,
            mean_power,
        }
    }
}

fn noise_var_for(mean_power: f64, snr_db: f64) -> f64 {
    mean_power / 10f64.powf(snr_db / 10.0)
}

/// Average `g(w_k s_k)` over nodes and samples, per node.
pub fn mean_node_powers(
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    states: &[Vec<f64>],
) -> Result<Vec<f64>, McError> {
    if states.is_empty() {
        return Err(McError::EmptySampleSet);
    }
    let mut acc = vec![0.0; hyp.dim()];
    for s in states {
        for (a, p) in acc.iter_mut().zip(mapping.powers(&hyp.w, s)?) {
            *a += p;
        }
    }
    let n = states.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// `noise_var = (1/K sum_k E{P_k}) / 10^(snr_db/10)` with `E{P_k}` taken
/// over `states`.
pub fn calibrate_noise(
    hyp: &SeparatingHyperplane,
    mapping: &PowerMapping,
    states: &[Vec<f64>],
    snr_db: f64,
) -> Result<OperatingPoint, McError> {
    let per_node = mean_node_powers(hyp, mapping, states)?;
    let mean_power = per_node.iter().sum::<f64>() / per_node.len() as f64;
    if mean_power <= 0.0 {
        return Err(McError::ZeroMeanPower);
    }
    Ok(OperatingPoint {
        snr_db,
        noise_var: noise_var_for(mean_power, snr_db),
        mean_power,
    })
}

/// A state to classify together with the noiseless reference output.
#[derive(Debug, Clone, PartialEq)]
pub struct TestState {
    pub state: Vec<f64>,
    pub truth: Sign,
    /// Generating class, when known.
    pub class: Option<Label>,
}

impl TestState {
    pub fn new(hyp: &SeparatingHyperplane, state: Vec<f64>, class: Option<Label>) -> Result<Self, McError> {
        let truth = hyp.classify(&state).map_err(|e| OtaError::DimensionMismatch {
            expected: hyp.dim(),
            got: match e {
                crate::svm::SvmError::DimensionMismatch { got, .. } => got,
                _ => state.len(),
            },
        })?;
        Ok(Self { state, truth, class })
    }

    pub fn from_samples(hyp: &SeparatingHyperplane, samples: &[LabeledSample]) -> Result<Vec<Self>, McError> {
        samples
            .iter()
            .map(|s| Self::new(hyp, s.state.clone(), Some(s.label)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReliability {
    pub state: Vec<f64>,
    pub truth: Sign,
    pub agreements: u64,
    pub agreement_rate: f64,
    pub std_error: f64,
    /// Fraction of trials whose output equals the generating class label.
    pub class_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub scheme: Scheme,
    /// `M` for the over-the-air scheme, `Q` for TDMA.
    pub uses: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub trials: u64,
    pub per_sample: Vec<SampleReliability>,
    pub aggregate: f64,
    /// Standard error of `aggregate`, from the per-sample standard errors.
    pub aggregate_std_error: f64,
}

pub fn std_error(rate: f64, trials: u64) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Fixed link parameters shared by every experiment on one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub hyp: SeparatingHyperplane,
    pub mapping: PowerMapping,
    pub gains: Vec<Complex64>,
    pub master_seed: u64,
}

impl Experiment {
    pub fn new(hyp: SeparatingHyperplane, mapping: PowerMapping, gains: Vec<Complex64>, master_seed: u64) -> Result<Self, McError> {
        if gains.len() != hyp.dim() {
            return Err(OtaError::DimensionMismatch {
                expected: hyp.dim(),
                got: gains.len(),
            }
            .into());
        }
        Ok(Self {
            hyp,
            mapping,
            gains,
            master_seed,
        })
    }

    /// Unit gains on every node.
    pub fn unit_gains(hyp: SeparatingHyperplane, mapping: PowerMapping, master_seed: u64) -> Self {
        let k = hyp.dim();
        Self::new(hyp, mapping, vec![Complex64::new(1.0, 0.0); k], master_seed).expect("dimensions agree")
    }

    pub fn channel(&self, op: &OperatingPoint, uses: usize) -> Result<ChannelModel, McError> {
        Ok(ChannelModel::new(self.gains.clone(), op.noise_var, uses)?)
    }

    fn trial_streams(&self) -> StreamFactory {
        StreamFactory::new(self.master_seed).child(tags::TRIALS)
    }

    /// The decision statistic of one transmission (before the sign).
    pub fn statistic(&self, scheme: Scheme, s: &[f64], channel: &ChannelModel, rng: &mut Stream) -> Result<f64, McError> {
        Ok(match scheme {
            Scheme::Ei => ota::ota_statistic(s, &self.hyp, &self.mapping, channel, rng)?,
            Scheme::Tdma => {
                let cfg = TdmaConfig::new(channel.block_len(), channel.clone())?;
                baseline::tdma_statistic(s, &self.hyp, &self.mapping, &cfg, rng)?
            }
        })
    }

    /// Agreement counts `(with truth, with class label)` for one test state.
    fn count_agreements(
        &self,
        scheme: Scheme,
        index: usize,
        test: &TestState,
        channel: &ChannelModel,
        trials: u64,
    ) -> Result<(u64, u64), McError> {
        let streams = self.trial_streams();
        let class_sign = test.class.map(|c| Sign::of(c.value()));
        let mut agree = 0;
        let mut agree_class = 0;
        for t in 0..trials {
            let mut rng = streams.stream(&[index as u64, t]);
            let out = Sign::of(self.statistic(scheme, &test.state, channel, &mut rng)?);
            if out != Sign::Zero {
                agree += u64::from(out == test.truth);
                agree_class += u64::from(Some(out) == class_sign);
            }
        }
        Ok((agree, agree_class))
    }

    pub fn estimate_reliability(
        &self,
        scheme: Scheme,
        op: &OperatingPoint,
        uses: usize,
        tests: &[TestState],
        trials: u64,
    ) -> Result<ReliabilityReport, McError> {
        if tests.is_empty() {
            return Err(McError::EmptySampleSet);
        }
        if trials == 0 {
            return Err(McError::NoTrials);
        }
        let channel = self.channel(op, uses)?;
        let counts = par_map(tests.len(), |i| self.count_agreements(scheme, i, &tests[i], &channel, trials));
        let mut per_sample = Vec::with_capacity(tests.len());
        for (test, c) in tests.iter().zip(counts) {
            let (agree, agree_class) = c?;
            let rate = agree as f64 / trials as f64;
            per_sample.push(SampleReliability {
                state: test.state.clone(),
                truth: test.truth,
                agreements: agree,
                agreement_rate: rate,
                std_error: std_error(rate, trials),
                class_accuracy: test.class.map(|_| agree_class as f64 / trials as f64),
            });
        }
        let n = per_sample.len() as f64;
        let aggregate = per_sample.iter().map(|p| p.agreement_rate).sum::<f64>() / n;
        let aggregate_std_error = per_sample.iter().map(|p| p.std_error * p.std_error).sum::<f64>().sqrt() / n;
        Ok(ReliabilityReport {
            scheme,
            uses,
            snr_db: op.snr_db,
            seed: self.master_seed,
            trials,
            per_sample,
            aggregate,
            aggregate_std_error,
        })
    }

    /// One report per `(uses, snr)` pair, SNR-major.
    pub fn reliability_sweep(
        &self,
        scheme: Scheme,
        base: &OperatingPoint,
        uses_grid: &[usize],
        snr_grid: &[f64],
        tests: &[TestState],
        trials: u64,
    ) -> Result<Vec<ReliabilityReport>, McError> {
        if uses_grid.is_empty() {
            return Err(McError::EmptyGrid("channel-use"));
        }
        if snr_grid.is_empty() {
            return Err(McError::EmptyGrid("SNR"));
        }
        let mut out = Vec::with_capacity(uses_grid.len() * snr_grid.len());
        for &snr in snr_grid {
            let op = base.with_snr_db(snr);
            for &uses in uses_grid {
                out.push(self.estimate_reliability(scheme, &op, uses, tests, trials)?);
            }
        }
        Ok(out)
    }

    /// Reliability on a `resolution x resolution` lattice spanning the two
    /// sensing ranges, endpoints included.
    pub fn reliability_map(
        &self,
        scheme: Scheme,
        op: &OperatingPoint,
        uses: usize,
        ranges: &[SensingRange],
        resolution: usize,
        trials: u64,
    ) -> Result<ReliabilityMap, McError> {
        if ranges.len() != 2 || self.hyp.dim() != 2 {
            return Err(McError::DimensionNotTwo(self.hyp.dim().max(ranges.len())));
        }
        if resolution == 0 {
            return Err(McError::EmptyGrid("lattice"));
        }
        let axis = |r: &SensingRange| -> Vec<f64> {
            if resolution == 1 {
                return vec![(r.lo + r.hi) / 2.0];
            }
            (0..resolution)
                .map(|i| r.lo + r.width() * i as f64 / (resolution - 1) as f64)
                .collect()
        };
        let (xs, ys) = (axis(&ranges[0]), axis(&ranges[1]));
        let tests = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
            .map(|s| TestState::new(&self.hyp, s, None))
            .collect::<Result<Vec<_>, _>>()?;
        let report = self.estimate_reliability(scheme, op, uses, &tests, trials)?;
        let points = report
            .per_sample
            .iter()
            .map(|p| MapPoint {
                s1: p.state[0],
                s2: p.state[1],
                decision_value: self.hyp.decision_value(&p.state).expect("2-D state"),
                reliability: p.agreement_rate,
            })
            .collect();
        Ok(ReliabilityMap { points, report })
    }

    /// Paired energy/reliability curves, one grid per scheme.
    pub fn energy_vs_reliability(
        &self,
        op: &OperatingPoint,
        uses_grid_ei: &[usize],
        uses_grid_tdma: &[usize],
        tests: &[TestState],
        trials: u64,
        em: &EnergyModel,
    ) -> Result<(EnergyCurve, EnergyCurve), McError> {
        let states: Vec<Vec<f64>> = tests.iter().map(|t| t.state.clone()).collect();
        let powers = mean_node_powers(&self.hyp, &self.mapping, &states)?;
        let curve = |scheme: Scheme, grid: &[usize]| -> Result<EnergyCurve, McError> {
            if grid.is_empty() {
                return Err(McError::EmptyGrid("channel-use"));
            }
            let mut grid = grid.to_vec();
            grid.sort_unstable();
            grid.dedup();
            let mut points = Vec::with_capacity(grid.len());
            for uses in grid {
                let report = self.estimate_reliability(scheme, op, uses, tests, trials)?;
                let acct = baseline::energy_per_classification(scheme, &powers, uses, em);
                points.push(EnergyPoint {
                    channel_uses: uses,
                    reliability: report.aggregate,
                    std_error: report.aggregate_std_error,
                    energy: acct.energy,
                    duration: acct.duration,
                });
            }
            Ok(EnergyCurve { scheme, points })
        };
        Ok((curve(Scheme::Ei, uses_grid_ei)?, curve(Scheme::Tdma, uses_grid_tdma)?))
    }

    /// Empirical moments of `N~ = Y~ - M sum_k g_k` over `frames` blocks,
    /// frame `i` transmitting `states[i % n]`.
    pub fn validate_moments(
        &self,
        op: &OperatingPoint,
        block_len: usize,
        states: &[Vec<f64>],
        frames: usize,
    ) -> Result<MomentCheck, McError> {
        if states.is_empty() {
            return Err(McError::EmptySampleSet);
        }
        if frames < 2 {
            return Err(McError::NoTrials);
        }
        let channel = self.channel(op, block_len)?;
        let theory = ota::noise_moments(&self.hyp, &self.mapping, &channel, states)?;
        let streams = StreamFactory::new(self.master_seed).child(tags::MOMENTS);
        let m = block_len as f64;
        let residuals = par_map(frames, |i| -> Result<f64, McError> {
            let s = &states[i % states.len()];
            let mut rng = streams.stream(&[i as u64]);
            let frame = ota::transmit_frame(s, &self.hyp, &self.mapping, &channel, &mut rng)?;
            let y = ota::channel_output(&frame, &channel, &mut rng)?;
            let centroid = m * self.mapping.powers(&self.hyp.w, s)?.iter().sum::<f64>();
            Ok(ota::receive_energy(&y) - centroid)
        });
        let residuals = residuals.into_iter().collect::<Result<Vec<_>, _>>()?;
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let variance = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);

        // ordered-pair reading of the cross term, kept for comparison
        let cross = theory.variance - 2.0 * m * op.noise_var * mean_total_power(&self.hyp, &self.mapping, states)? - m * op.noise_var * op.noise_var;
        let literal_variance = theory.variance + cross;

        Ok(MomentCheck {
            frames,
            block_len,
            empirical_mean: mean,
            empirical_variance: variance,
            theory,
            literal_variance,
        })
    }
}

fn mean_total_power(hyp: &SeparatingHyperplane, mapping: &PowerMapping, states: &[Vec<f64>]) -> Result<f64, McError> {
    Ok(mean_node_powers(hyp, mapping, states)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub frames: usize,
    pub block_len: usize,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub theory: NoiseMoments,
    /// Variance with the cross-node term summed over ordered pairs (twice
    /// the unordered-pair value used in `theory`).
    pub literal_variance: f64,
}

impl MomentCheck {
    pub fn mean_rel_error(&self) -> f64 {
        (self.empirical_mean - self.theory.mean).abs() / self.theory.mean.abs()
    }

    pub fn variance_rel_error(&self) -> f64 {
        (self.empirical_variance - self.theory.variance).abs() / self.theory.variance.abs()
    }

    pub fn passes(&self, mean_tol: f64, var_tol: f64) -> bool {
        self.mean_rel_error() <= mean_tol && self.variance_rel_error() <= var_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub s1: f64,
    pub s2: f64,
    pub decision_value: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMap {
    pub points: Vec<MapPoint>,
    pub report: ReliabilityReport,
}

impl ReliabilityMap {
    /// Mean reliability of lattice points with `|w.s + b| < 1` and of the
    /// rest; `None` when a side has no points.
    pub fn margin_split(&self) -> (Option<f64>, Option<f64>) {
        let mean = |it: Vec<f64>| (!it.is_empty()).then(|| it.iter().sum::<f64>() / it.len() as f64);
        let (inside, outside): (Vec<&MapPoint>, Vec<&MapPoint>) =
            self.points.iter().partition(|p| p.decision_value.abs() < 1.0);
        (
            mean(inside.iter().map(|p| p.reliability).collect()),
            mean(outside.iter().map(|p| p.reliability).collect()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub channel_uses: usize,
    pub reliability: f64,
    pub std_error: f64,
    pub energy: f64,
    pub duration: f64,
}

/// Energy against reliability for one scheme, ascending in channel uses.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve {
    pub scheme: Scheme,
    pub points: Vec<EnergyPoint>,
}

impl EnergyCurve {
    /// Energy at which the curve first reaches `target`, interpolating
    /// linearly between the bracketing grid points. `None` if the curve
    /// starts above the target or never reaches it.
    pub fn energy_at(&self, target: f64) -> Option<f64> {
        let first = self.points.first()?;
        if first.reliability >= target {
            return (first.reliability == target).then_some(first.energy);
        }
        self.points.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            (a.reliability < target && b.reliability >= target).then(|| {
                let f = (target - a.reliability) / (b.reliability - a.reliability);
                a.energy + f * (b.energy - a.energy)
            })
        })
    }

    pub fn max_reliability(&self) -> f64 {
        self.points.iter().map(|p| p.reliability).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Compares energies at reliability levels `from, from + step, ...` up
    /// to the lower of the two curves' maxima. Returns `(levels reached by
    /// both, levels where self is strictly cheaper)`.
    pub fn dominance(&self, other: &EnergyCurve, from: f64, step: f64) -> (usize, usize) {
        let top = self.max_reliability().min(other.max_reliability());
        let (mut both, mut cheaper) = (0, 0);
        let mut i = 0;
        loop {
            let r = from + step * i as f64;
            if r > top + 1e-12 || step <= 0.0 {
                break;
            }
            if let (Some(a), Some(b)) = (self.energy_at(r), other.energy_at(r)) {
                both += 1;
                cheaper += usize::from(a < b);
            }
            i += 1;
        }
        (both, cheaper)
    }
}

pub fn write_sweep_csv<W: Write>(reports: &[ReliabilityReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "scheme,M_or_Q,snr_db,reliability,std_err")?;
    for r in reports {
        writeln!(out, "{},{},{},{},{}", r.scheme, r.uses, r.snr_db, r.aggregate, r.aggregate_std_error)?;
    }
    Ok(())
}

/// Per-sample detail: state, noiseless output, reliability and, when the
/// generating class is known, accuracy against it.
pub fn write_sample_detail_csv<W: Write>(reports: &[ReliabilityReport], mut out: W) -> std::io::Result<()> {
    let k = reports
        .first()
        .and_then(|r| r.per_sample.first())
        .map_or(0, |p| p.state.len());
    let states: Vec<String> = (1..=k).map(|i| format!("s_{i}")).collect();
    writeln!(
        out,
        "scheme,M_or_Q,snr_db,sample,{},truth,reliability,std_err,class_accuracy",
        states.join(",")
    )?;
    for r in reports {
        for (i, p) in r.per_sample.iter().enumerate() {
            let s: Vec<String> = p.state.iter().map(|x| x.to_string()).collect();
            let acc = p.class_accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scheme,
                r.uses,
                r.snr_db,
                i,
                s.join(","),
                p.truth.value(),
                p.agreement_rate,
                p.std_error,
                acc
            )?;
        }
    }
    Ok(())
}

pub fn write_map_csv<W: Write>(map: &ReliabilityMap, mut out: W) -> std::io::Result<()> {
    writeln!(out, "s1,s2,reliability")?;
    for p in &map.points {
        writeln!(out, "{},{},{}", p.s1, p.s2, p.reliability)?;
    }
    Ok(())
}

pub fn write_energy_csv<W: Write>(curves: &[&EnergyCurve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "scheme,channel_uses,reliability,energy_joules,duration_s")?;
    for c in curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{},{}", c.scheme, p.channel_uses, p.reliability, p.energy, p.duration)?;
        }
    }
    Ok(())
}
