//! Experiment configuration files.
//!
//! Configurations are TOML documents tagged with `schema = 1`. Every table
//! rejects unknown keys. Vectors that are constant across sensors may be
//! written as a scalar (`mean = 15.0`, `covariance = 1.5` for `1.5 * I`,
//! `range = [0.0, 30.0]`) so that 32-sensor scenarios stay readable.
//!
//! ```toml
//! schema = 1
//! name = "example"
//! seed = 1
//!
//! [scenario]
//! sensors = 2
//! range = [0.0, 30.0]
//! prior_anomaly = 0.5
//! normal = { mean = [20.0, 20.0], covariance = 1.5 }
//! anomaly = { mean = [10.0, 10.0], covariance = 1.5 }
//!
//! [training]
//! samples = 200
//!
//! [channel]
//! p_max = 100e-6
//! snr_db = 10.0
//! block_len = 64
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::scenario::{GaussianClass, ScenarioConfig, SensingRange};
use crate::svm::Label;

pub const SCHEMA_VERSION: u32 = 1;

/// The two experiments of the reference evaluation, bundled verbatim.
pub mod bundled {
    pub const SEC5A: &str = include_str!("../scenarios/sec5a.toml");
    pub const SEC5B: &str = include_str!("../scenarios/sec5b.toml");

    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "sec5a" => Some(SEC5A),
            "sec5b" => Some(SEC5B),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", .path.as_deref().map(|p| format!(" in {p}")).unwrap_or_default())]
    Parse { path: Option<String>, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerSensor {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerSensor {
    fn expand(&self, k: usize, what: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerSensor::Scalar(v) => Ok(vec![*v; k]),
            PerSensor::Vector(v) if v.len() == k => Ok(v.clone()),
            PerSensor::Vector(v) => Err(ConfigError::Validation(format!(
                "{what} has {} entries but sensors = {k}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum CovarianceSpec {
    Isotropic(f64),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridSpec {
    List(Vec<usize>),
    Span(Span),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Span {
    from: usize,
    to: usize,
    #[serde(default = "one")]
    step: usize,
}

fn one() -> usize {
    1
}

impl GridSpec {
    fn expand(&self, what: &str) -> Result<Vec<usize>, ConfigError> {
        let v: Vec<usize> = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Span(s) => {
                if s.step == 0 {
                    return Err(ConfigError::Validation(format!("{what}: step must be positive")));
                }
                (s.from..=s.to).step_by(s.step).collect()
            }
        };
        if v.is_empty() {
            return Err(ConfigError::Validation(format!("{what} is empty")));
        }
        if v.contains(&0) {
            return Err(ConfigError::Validation(format!("{what} contains 0 channel uses")));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Validation(format!("{what} must be strictly increasing")));
        }
        Ok(v)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    name: String,
    seed: u64,
    scenario: RawScenario,
    training: RawTraining,
    channel: RawChannel,
    #[serde(default)]
    reliability: Option<RawReliability>,
    #[serde(default)]
    map: Option<RawMap>,
    #[serde(default)]
    energy: Option<RawEnergy>,
    #[serde(default)]
    moments: Option<RawMoments>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    sensors: usize,
    #[serde(default)]
    range: Option<[f64; 2]>,
    #[serde(default)]
    ranges: Option<Vec<[f64; 2]>>,
    prior_anomaly: f64,
    normal: RawClass,
    anomaly: RawClass,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    mean: PerSensor,
    covariance: CovarianceSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    p_max: f64,
    snr_db: f64,
    block_len: usize,
    #[serde(default)]
    gains: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReliability {
    trials: u64,
    test_samples: usize,
    m_grid: GridSpec,
    snr_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    resolution: usize,
    trials: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    snr_db: f64,
    symbol_duration: f64,
    trials: u64,
    test_samples: usize,
    m_grid: GridSpec,
    q_grid: GridSpec,
    reliability_target: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMoments {
    frames: usize,
}

/// Channel parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSettings {
    pub p_max: f64,
    pub snr_db: f64,
    pub block_len: usize,
    /// One gain per sensor; unit gains when the file leaves them out.
    pub gains: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilitySettings {
    pub trials: u64,
    pub test_samples: usize,
    pub m_grid: Vec<usize>,
    pub snr_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSettings {
    pub resolution: usize,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySettings {
    pub snr_db: f64,
    pub symbol_duration: f64,
    pub trials: u64,
    pub test_samples: usize,
    pub m_grid: Vec<usize>,
    pub q_grid: Vec<usize>,
    pub reliability_target: f64,
}

/// Everything in a config file besides the scenario itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub training_samples: usize,
    pub channel: ChannelSettings,
    pub reliability: ReliabilitySettings,
    pub map: MapSettings,
    pub energy: Option<EnergySettings>,
    pub moment_frames: usize,
}

pub fn load_config(path: &Path) -> Result<(ScenarioConfig, ExperimentConfig), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: Some(path.display().to_string()),
            message,
        },
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<(ScenarioConfig, ExperimentConfig), ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: None,
        message: e.to_string(),
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(ConfigError::Validation(format!(
            "unsupported schema {} (expected {SCHEMA_VERSION})",
            raw.schema
        )));
    }
    let scenario = build_scenario(&raw.scenario, raw.seed)?;
    let k = scenario.dim();
    let experiment = build_experiment(&raw, k)?;
    Ok((scenario, experiment))
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Validation(e.to_string())
}

fn build_scenario(raw: &RawScenario, seed: u64) -> Result<ScenarioConfig, ConfigError> {
    let k = raw.sensors;
    let bounds: Vec<[f64; 2]> = match (&raw.range, &raw.ranges) {
        (Some(r), None) => vec![*r; k],
        (None, Some(rs)) => {
            if rs.len() != k {
                return Err(invalid(format!("ranges has {} entries but sensors = {k}", rs.len())));
            }
            rs.clone()
        }
        _ => return Err(invalid("exactly one of `range` or `ranges` must be given")),
    };
    let ranges = bounds
        .iter()
        .enumerate()
        .map(|(i, [lo, hi])| SensingRange::new(*lo, *hi).map_err(|e| invalid(format!("ranges[{i}]: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let class = |label: Label, c: &RawClass, what: &str| -> Result<GaussianClass, ConfigError> {
        let mean = c.mean.expand(k, &format!("{what}.mean"))?;
        let g = match &c.covariance {
            CovarianceSpec::Isotropic(s) => GaussianClass::isotropic(label, mean, *s),
            CovarianceSpec::Full(m) => GaussianClass::new(label, mean, m.clone()),
        };
        g.map_err(|e| invalid(format!("{what}: {e}")))
    };
    let normal = class(Label::Normal, &raw.normal, "normal")?;
    let anomaly = class(Label::Anomaly, &raw.anomaly, "anomaly")?;
    ScenarioConfig::new(ranges, [normal, anomaly], raw.prior_anomaly, seed).map_err(invalid)
}

fn positive(v: f64, what: &str) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

fn nonzero<T: PartialEq + Default + std::fmt::Display>(v: T, what: &str) -> Result<T, ConfigError> {
    if v == T::default() {
        Err(invalid(format!("{what} must be at least 1")))
    } else {
        Ok(v)
    }
}

fn build_experiment(raw: &RawConfig, k: usize) -> Result<ExperimentConfig, ConfigError> {
    let ch = &raw.channel;
    let gains = match &ch.gains {
        None => vec![Complex64::new(1.0, 0.0); k],
        Some(g) => {
            if g.len() != k {
                return Err(invalid(format!("channel.gains has {} entries but sensors = {k}", g.len())));
            }
            let g: Vec<Complex64> = g.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
            if let Some(i) = g.iter().position(|h| !h.is_finite() || h.norm() <= 0.0) {
                return Err(invalid(format!("channel.gains[{i}] must be finite and nonzero")));
            }
            g
        }
    };
    if !ch.snr_db.is_finite() {
        return Err(invalid("channel.snr_db must be finite"));
    }
    let channel = ChannelSettings {
        p_max: positive(ch.p_max, "channel.p_max")?,
        snr_db: ch.snr_db,
        block_len: nonzero(ch.block_len, "channel.block_len")?,
        gains,
    };

    let reliability = match &raw.reliability {
        Some(r) => {
            if r.snr_grid.is_empty() || r.snr_grid.iter().any(|s| !s.is_finite()) {
                return Err(invalid("reliability.snr_grid must be a nonempty list of finite values"));
            }
            ReliabilitySettings {
                trials: nonzero(r.trials, "reliability.trials")?,
                test_samples: nonzero(r.test_samples, "reliability.test_samples")?,
                m_grid: r.m_grid.expand("reliability.m_grid")?,
                snr_grid: r.snr_grid.clone(),
            }
        }
        None => ReliabilitySettings {
            trials: 10_000,
            test_samples: 100,
            m_grid: (2..=120).collect(),
            snr_grid: vec![ch.snr_db],
        },
    };

    let map = match &raw.map {
        Some(m) => MapSettings {
            resolution: nonzero(m.resolution, "map.resolution")?,
            trials: nonzero(m.trials, "map.trials")?,
        },
        None => MapSettings {
            resolution: 30,
            trials: 1_000,
        },
    };

    let energy = match &raw.energy {
        Some(e) => {
            if !(e.reliability_target > 0.0 && e.reliability_target < 1.0) {
                return Err(invalid("energy.reliability_target must lie in (0, 1)"));
            }
            if !e.snr_db.is_finite() {
                return Err(invalid("energy.snr_db must be finite"));
            }
            Some(EnergySettings {
                snr_db: e.snr_db,
                symbol_duration: positive(e.symbol_duration, "energy.symbol_duration")?,
                trials: nonzero(e.trials, "energy.trials")?,
                test_samples: nonzero(e.test_samples, "energy.test_samples")?,
                m_grid: e.m_grid.expand("energy.m_grid")?,
                q_grid: e.q_grid.expand("energy.q_grid")?,
                reliability_target: e.reliability_target,
            })
        }
        None => None,
    };

    Ok(ExperimentConfig {
        name: raw.name.clone(),
        seed: raw.seed,
        training_samples: nonzero(raw.training.samples, "training.samples")?,
        channel,
        reliability,
        map,
        energy,
        moment_frames: raw.moments.as_ref().map_or(100_000, |m| m.frames),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = 1
name = "t"
seed = 3

[scenario]
sensors = 2
range = [0.0, 30.0]
prior_anomaly = 0.5
normal = { mean = [20.0, 20.0], covariance = 1.5 }
anomaly = { mean = 10.0, covariance = [[1.5, 0.0], [0.0, 1.5]] }

[training]
samples = 200

[channel]
p_max = 100e-6
snr_db = 10.0
block_len = 64
"#;

    #[test]
    fn minimal_config_parses() {
        let (s, e) = parse_config(MINIMAL).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.class(Label::Anomaly).mean(), &[10.0, 10.0]);
        assert_eq!(s.class(Label::Normal).covariance()[1][1], 1.5);
        assert_eq!(e.channel.gains, vec![Complex64::new(1.0, 0.0); 2]);
        assert_eq!(e.reliability.m_grid.len(), 119);
        assert!(e.energy.is_none());
    }

    #[test]
    fn sec5a_is_verbatim() {
        let (s, e) = parse_config(bundled::SEC5A).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.ranges().iter().all(|r| r.lo == 0.0 && r.hi == 30.0));
        assert_eq!(s.class(Label::Normal).mean(), &[20.0, 20.0]);
        assert_eq!(s.class(Label::Anomaly).mean(), &[10.0, 10.0]);
        for label in [Label::Normal, Label::Anomaly] {
            assert_eq!(s.class(label).covariance(), &[vec![1.5, 0.0], vec![0.0, 1.5]]);
        }
        assert_eq!(s.prior_anomaly(), 0.5);
        assert_eq!(e.training_samples, 200);
        assert_eq!(e.channel.block_len, 64);
        assert_eq!(e.channel.snr_db, 10.0);
        assert_eq!(e.reliability.trials, 10_000);
        assert_eq!(e.reliability.test_samples, 100);
        assert_eq!(e.reliability.m_grid, (2..=120).collect::<Vec<_>>());
    }

    #[test]
    fn sec5b_is_verbatim() {
        let (s, e) = parse_config(bundled::SEC5B).unwrap();
        assert_eq!(s.dim(), 32);
        assert_eq!(s.class(Label::Normal).mean(), &[15.0; 32]);
        assert_eq!(s.class(Label::Anomaly).mean(), &[20.0; 32]);
        assert_eq!(e.training_samples, 2000);
        assert_eq!(e.channel.p_max, 100e-6);
        let en = e.energy.unwrap();
        assert_eq!(en.snr_db, 1.0);
        assert_eq!(en.symbol_duration, 1e-3);
        assert_eq!(en.reliability_target, 0.98);
    }

    #[test]
    fn bad_range_names_index() {
        let text = MINIMAL.replace("range = [0.0, 30.0]", "ranges = [[0.0, 30.0], [5.0, 5.0]]");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(ref m) if m.contains("ranges[1]")), "{err}");
    }

    #[test]
    fn bad_prior_rejected() {
        let text = MINIMAL.replace("prior_anomaly = 0.5", "prior_anomaly = 1.2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let text = MINIMAL.replace("samples = 200", "samples = 200\nepochs = 3");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::Parse { message, .. } => {
                assert!(message.contains("epochs"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = MINIMAL.replace("schema = 1", "schema = 2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_config(Path::new("/nonexistent/config.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }

    #[test]
    fn grid_span() {
        let text = format!("{MINIMAL}\n[reliability]\ntrials = 10\ntest_samples = 5\nm_grid = {{ from = 2, to = 10, step = 4 }}\nsnr_grid = [0.0]\n");
        let (_, e) = parse_config(&text).unwrap();
        assert_eq!(e.reliability.m_grid, vec![2, 6, 10]);
        let text = text.replace("step = 4", "step = 0");
        assert!(parse_config(&text).is_err());
    }
}
