use std::fmt::Debug;

use ota_anomaly::montecarlo::McError;
use ota_anomaly::pipeline::PipelineError;
use ota_anomaly::scenario::ScenarioError;
use ota_anomaly::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot load model {path}: {message}")]
    Model { path: String, message: String },
    #[error("{kind}: {message}")]
    Domain { kind: String, message: String },
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for usage and input problems, 2 for failures of the computation
    /// itself.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Model { .. } => 1,
            CliError::Domain { .. } | CliError::Output { .. } => 2,
        }
    }

    pub fn output(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Name of the enum variant, e.g. `NotSeparable`.
fn variant<E: Debug>(e: &E) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        let kind = match &e {
            McError::Ota(inner) => variant(inner),
            McError::Baseline(inner) => variant(inner),
            other => variant(other),
        };
        CliError::Domain {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Svm(inner) => variant(inner),
            PipelineError::Scenario(inner) => variant(inner),
            PipelineError::Ota(inner) => variant(inner),
            PipelineError::MonteCarlo(inner) => return inner.clone().into(),
            PipelineError::ModelDimension { .. } => "ModelDimension".into(),
        };
        CliError::Domain {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Domain {
            kind: "Validation".into(),
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ota_anomaly::svm::SvmError;

    #[test]
    fn domain_errors_name_their_variant() {
        let e: CliError = PipelineError::Svm(SvmError::NotSeparable("overlap".into())).into();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("NotSeparable: "), "{e}");
        let e: CliError = McError::DimensionNotTwo(32).into();
        assert!(e.to_string().starts_with("DimensionNotTwo: "));
    }
}
