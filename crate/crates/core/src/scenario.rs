//! The sensed system: per-node sensing ranges, two Gaussian class models,
//! a class prior, and labeled state sampling.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;
use crate::svm::{Label, LabeledSample, TrainingSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Validation(String),
}

/// Compact interval `[lo, hi]` a sensor can report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingRange {
    pub lo: f64,
    pub hi: f64,
}

impl SensingRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ScenarioError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(ScenarioError::Validation(format!("range [{lo}, {hi}] is not finite")));
        }
        if lo >= hi {
            return Err(ScenarioError::Validation(format!("range requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Class-conditional multivariate normal model.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClass {
    label: Label,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    // lower-triangular Cholesky factor, row-major
    chol: Vec<f64>,
}

impl GaussianClass {
    #[allow(clippy::needless_range_loop)]
    pub fn new(label: Label, mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self, ScenarioError> {
        let k = mean.len();
        if k == 0 {
            return Err(ScenarioError::Validation("class mean is empty".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(ScenarioError::Validation("class mean is not finite".into()));
        }
        if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
            return Err(ScenarioError::Validation(format!("covariance must be {k}x{k}")));
        }
        for i in 0..k {
            for j in 0..i {
                if (covariance[i][j] - covariance[j][i]).abs() > 1e-12 {
                    return Err(ScenarioError::Validation(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = cholesky(&covariance).ok_or_else(|| {
            ScenarioError::Validation("covariance is not positive definite".into())
        })?;
        Ok(Self {
            label,
            mean,
            covariance,
            chol,
        })
    }

    /// `scale * I` covariance.
    pub fn isotropic(label: Label, mean: Vec<f64>, scale: f64) -> Result<Self, ScenarioError> {
        let k = mean.len();
        let cov = (0..k)
            .map(|i| (0..k).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        Self::new(label, mean, cov)
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + L z` with `z` standard normal.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.dim();
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        (0..k)
            .map(|i| {
                let row = &self.chol[i * k..i * k + i + 1];
                self.mean[i] + row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()
            })
            .collect()
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i * n + p] * l[j * n + p]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i][j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// State space, class models and prior of one monitored system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    ranges: Vec<SensingRange>,
    normal: GaussianClass,
    anomaly: GaussianClass,
    prior_anomaly: f64,
    seed: u64,
}

impl ScenarioConfig {
    pub fn new(
        ranges: Vec<SensingRange>,
        classes: [GaussianClass; 2],
        prior_anomaly: f64,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        let k = ranges.len();
        if k < 2 {
            return Err(ScenarioError::Validation(format!("need at least 2 sensors, got {k}")));
        }
        if !(prior_anomaly > 0.0 && prior_anomaly < 1.0) {
            return Err(ScenarioError::Validation(format!(
                "prior_anomaly must lie in (0, 1), got {prior_anomaly}"
            )));
        }
        let [a, b] = classes;
        if a.label() == b.label() {
            return Err(ScenarioError::Validation("the two classes must carry distinct labels".into()));
        }
        let (normal, anomaly) = if a.label() == Label::Normal { (a, b) } else { (b, a) };
        for class in [&normal, &anomaly] {
            if class.dim() != k {
                return Err(ScenarioError::Validation(format!(
                    "class {:?} has dimension {} but there are {k} sensors",
                    class.label(),
                    class.dim()
                )));
            }
            for (i, (m, r)) in class.mean().iter().zip(&ranges).enumerate() {
                if !r.contains(*m) {
                    return Err(ScenarioError::Validation(format!(
                        "class {:?} mean coordinate {i} = {m} lies outside range {i} [{}, {}]",
                        class.label(),
                        r.lo,
                        r.hi
                    )));
                }
            }
        }
        Ok(Self {
            ranges,
            normal,
            anomaly,
            prior_anomaly,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[SensingRange] {
        &self.ranges
    }

    pub fn class(&self, label: Label) -> &GaussianClass {
        match label {
            Label::Normal => &self.normal,
            Label::Anomaly => &self.anomaly,
        }
    }

    pub fn prior_anomaly(&self) -> f64 {
        self.prior_anomaly
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.dim() && s.iter().zip(&self.ranges).all(|(x, r)| r.contains(*x))
    }
}

/// Labeled states together with the number of clamped coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledStates {
    pub set: TrainingSet,
    pub clamped: usize,
}

/// Draw `n` labeled states: label first, then the state from that class,
/// clamped coordinate-wise into the sensing ranges.
pub fn sample_states<R: Rng + ?Sized>(cfg: &ScenarioConfig, n: usize, rng: &mut R) -> Result<SampledStates, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Validation("sample count must be at least 1".into()));
    }
    let mut clamped = 0;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let label = if rng.random::<f64>() < cfg.prior_anomaly {
            Label::Anomaly
        } else {
            Label::Normal
        };
        let mut state = cfg.class(label).draw(rng);
        for (x, r) in state.iter_mut().zip(&cfg.ranges) {
            let c = r.clamp(*x);
            if c != *x {
                clamped += 1;
                *x = c;
            }
        }
        samples.push(LabeledSample::new(state, label));
    }
    let set = TrainingSet::new(samples).map_err(|e| ScenarioError::Validation(e.to_string()))?;
    Ok(SampledStates { set, clamped })
}

/// Convenience wrapper around [`sample_states`] for a concrete stream.
pub fn sample_with(cfg: &ScenarioConfig, n: usize, mut rng: Stream) -> Result<SampledStates, ScenarioError> {
    sample_states(cfg, n, &mut rng)
}

/// CSV with header `s_1,...,s_K,label`.
pub fn write_samples_csv<W: Write>(set: &TrainingSet, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=set.dim()).map(|k| format!("s_{k}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for s in set.samples() {
        for x in &s.state {
            write!(out, "{x},")?;
        }
        writeln!(out, "{}", i64::from(s.label))?;
    }
    Ok(())
}
