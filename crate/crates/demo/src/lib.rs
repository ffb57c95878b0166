//! WebAssembly bindings behind the static page in `www/`.
//!
//! [`Session`] holds a trained pipeline and is plain Rust, so it can be
//! tested natively; [`Demo`] wraps it for JavaScript and hands results over
//! as JSON strings.

use ota_anomaly::config::bundled;
use ota_anomaly::montecarlo::TestState;
use ota_anomaly::{parse_config, Pipeline, Scheme, SolverConfig, TrainingSet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ModelView {
    pub dim: usize,
    pub w: Vec<f64>,
    pub b: f64,
    pub margin: f64,
    pub ranges: Vec<[f64; 2]>,
    /// First two coordinates and the label (+-1) of each training sample.
    pub samples: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
pub struct MapView {
    pub resolution: usize,
    pub uses: usize,
    pub snr_db: f64,
    /// Row-major, `s2` outer, `s1` inner.
    pub reliability: Vec<f64>,
    pub inside_margin: Option<f64>,
    pub outside_margin: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub uses: usize,
    pub reliability: f64,
    pub std_error: f64,
}

pub struct Session {
    pipeline: Pipeline,
    training: TrainingSet,
    tests: Vec<TestState>,
}

impl Session {
    /// `config` is a bundled config name or TOML text.
    pub fn new(config: &str, seed: Option<u64>) -> Result<Self, String> {
        let text = bundled::by_name(config).unwrap_or(config);
        let (scenario, mut cfg) = parse_config(text).map_err(|e| e.to_string())?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        let training = Pipeline::training_samples(&scenario, &cfg).map_err(|e| e.to_string())?.set;
        let test_samples = cfg.reliability.test_samples;
        let pipeline = Pipeline::train(scenario, cfg, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let tests = pipeline.test_states(test_samples).map_err(|e| e.to_string())?;
        Ok(Self {
            pipeline,
            training,
            tests,
        })
    }

    pub fn model(&self) -> ModelView {
        let hyp = &self.pipeline.hyp;
        ModelView {
            dim: hyp.dim(),
            w: hyp.w.clone(),
            b: hyp.b,
            margin: hyp.margin().unwrap_or(f64::NAN),
            ranges: self.pipeline.scenario.ranges().iter().map(|r| [r.lo, r.hi]).collect(),
            samples: self
                .training
                .samples()
                .iter()
                .map(|s| [s.state[0], s.state.get(1).copied().unwrap_or(0.0), s.label.value()])
                .collect(),
        }
    }

    pub fn map(&self, uses: usize, snr_db: f64, resolution: usize, trials: u64) -> Result<MapView, String> {
        let p = &self.pipeline;
        let op = p.operating_point(&self.tests, snr_db).map_err(|e| e.to_string())?;
        let map = p
            .experiment
            .reliability_map(Scheme::Ei, &op, uses, p.scenario.ranges(), resolution, trials)
            .map_err(|e| e.to_string())?;
        let (inside_margin, outside_margin) = map.margin_split();
        Ok(MapView {
            resolution,
            uses,
            snr_db,
            reliability: map.points.iter().map(|pt| pt.reliability).collect(),
            inside_margin,
            outside_margin,
        })
    }

    pub fn curve(&self, scheme: &str, snr_db: f64, grid: &[usize], trials: u64) -> Result<Vec<CurvePoint>, String> {
        let scheme = match scheme.to_ascii_uppercase().as_str() {
            "EI" => Scheme::Ei,
            "TDMA" => Scheme::Tdma,
            other => return Err(format!("unknown scheme {other:?}")),
        };
        let p = &self.pipeline;
        let op = p.operating_point(&self.tests, snr_db).map_err(|e| e.to_string())?;
        let reports = p
            .experiment
            .reliability_sweep(scheme, &op, grid, &[snr_db], &self.tests, trials)
            .map_err(|e| e.to_string())?;
        Ok(reports
            .iter()
            .map(|r| CurvePoint {
                uses: r.uses,
                reliability: r.aggregate,
                std_error: r.aggregate_std_error,
            })
            .collect())
    }
}

/// Parses `"2,4,8"` into channel-use counts.
pub fn parse_grid(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| format!("not a channel-use count: {t:?}")))
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view serializes")
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    /// Train from a bundled config name or TOML text.
    #[wasm_bindgen(constructor)]
    pub fn new(config: &str, seed: Option<u32>) -> Result<Demo, JsError> {
        Session::new(config, seed.map(u64::from)).map(Demo).map_err(|e| JsError::new(&e))
    }

    /// TOML of a bundled config, for the page's editor.
    pub fn bundled_config(name: &str) -> Option<String> {
        bundled::by_name(name).map(str::to_string)
    }

    pub fn model_json(&self) -> String {
        to_json(&self.0.model())
    }

    pub fn map_json(&self, uses: usize, snr_db: f64, resolution: usize, trials: u32) -> Result<String, JsError> {
        self.0
            .map(uses, snr_db, resolution, u64::from(trials))
            .map(|v| to_json(&v))
            .map_err(|e| JsError::new(&e))
    }

    pub fn curve_json(&self, scheme: &str, snr_db: f64, grid: &str, trials: u32) -> Result<String, JsError> {
        let grid = parse_grid(grid).map_err(|e| JsError::new(&e))?;
        self.0
            .curve(scheme, snr_db, &grid, u64::from(trials))
            .map(|v| to_json(&v))
            .map_err(|e| JsError::new(&e))
    }
}
