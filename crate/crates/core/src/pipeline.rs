//! Wiring from a configuration file to a ready-to-run experiment: training
//! samples, trained model, power mapping, test states and operating point.
//! The CLI and the acceptance suite both go through here so that a given
//! `(config, seed)` always produces the same artifacts.

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::montecarlo::{calibrate_noise, Experiment, McError, OperatingPoint, TestState};
use crate::ota::{OtaError, PowerMapping};
use crate::rng::{tags, StreamFactory};
use crate::scenario::{sample_states, SampledStates, ScenarioConfig, ScenarioError};
use crate::svm::{train_svm, SeparatingHyperplane, SolverConfig, SvmError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ota(#[from] OtaError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("model has K = {model} but the scenario has {scenario} sensors")]
    ModelDimension { model: usize, scenario: usize },
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub scenario: ScenarioConfig,
    pub config: ExperimentConfig,
    pub hyp: SeparatingHyperplane,
    pub mapping: PowerMapping,
    pub experiment: Experiment,
}

impl Pipeline {
    fn streams(config: &ExperimentConfig) -> StreamFactory {
        StreamFactory::new(config.seed)
    }

    /// The `L` training samples the config asks for.
    pub fn training_samples(scenario: &ScenarioConfig, config: &ExperimentConfig) -> Result<SampledStates, PipelineError> {
        let mut rng = Self::streams(config).stream(&[tags::TRAINING]);
        Ok(sample_states(scenario, config.training_samples, &mut rng)?)
    }

    /// Sample, train and build the power mapping.
    pub fn train(scenario: ScenarioConfig, config: ExperimentConfig, solver: &SolverConfig) -> Result<Self, PipelineError> {
        let training = Self::training_samples(&scenario, &config)?;
        let hyp = train_svm(&training.set, solver)?;
        Self::with_model(scenario, config, hyp)
    }

    /// Use an already trained model.
    pub fn with_model(scenario: ScenarioConfig, config: ExperimentConfig, hyp: SeparatingHyperplane) -> Result<Self, PipelineError> {
        if hyp.dim() != scenario.dim() {
            return Err(PipelineError::ModelDimension {
                model: hyp.dim(),
                scenario: scenario.dim(),
            });
        }
        let mapping = PowerMapping::from_weights(&hyp.w, scenario.ranges(), config.channel.p_max)?;
        let experiment = Experiment::new(hyp.clone(), mapping, config.channel.gains.clone(), config.seed)?;
        Ok(Self {
            scenario,
            config,
            hyp,
            mapping,
            experiment,
        })
    }

    /// `n` fresh labeled states, independent of the training draw. The same
    /// `n` always yields the same states.
    pub fn test_states(&self, n: usize) -> Result<Vec<TestState>, PipelineError> {
        let mut rng = Self::streams(&self.config).stream(&[tags::TEST_SAMPLES, n as u64]);
        let drawn = sample_states(&self.scenario, n, &mut rng)?;
        Ok(TestState::from_samples(&self.hyp, drawn.set.samples())?)
    }

    /// Operating point with the mean power frozen over `tests`.
    pub fn operating_point(&self, tests: &[TestState], snr_db: f64) -> Result<OperatingPoint, PipelineError> {
        let states: Vec<Vec<f64>> = tests.iter().map(|t| t.state.clone()).collect();
        Ok(calibrate_noise(&self.hyp, &self.mapping, &states, snr_db)?)
    }

    /// States for the effective-noise moment check.
    pub fn moment_states(&self, n: usize) -> Result<Vec<Vec<f64>>, PipelineError> {
        let mut rng = Self::streams(&self.config).stream(&[tags::MOMENTS, n as u64]);
        let drawn = sample_states(&self.scenario, n, &mut rng)?;
        Ok(drawn.set.into_samples().into_iter().map(|s| s.state).collect())
    }
}
