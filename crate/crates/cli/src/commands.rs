use std::path::{Path, PathBuf};

use ota_anomaly::baseline::TDMA_DECODER;
use ota_anomaly::config::bundled;
use ota_anomaly::montecarlo::{write_energy_csv, write_map_csv, write_sample_detail_csv, write_sweep_csv, TestState};
use ota_anomaly::scenario::write_samples_csv;
use ota_anomaly::{
    parse_config, ConfigError, EnergyModel, ExperimentConfig, Pipeline, ScenarioConfig, Scheme, SeparatingHyperplane,
    SolverConfig,
};
use serde_json::json;

use crate::args::{Common, RunOpts, SchemeArg};
use crate::error::CliError;
use crate::manifest::{write_atomic, ConfigRef};

pub struct Loaded {
    pub config_ref: ConfigRef,
    pub scenario: ScenarioConfig,
    pub config: ExperimentConfig,
}

/// What a command produced, for the manifest.
pub struct Produced {
    pub outputs: Vec<PathBuf>,
    pub details: serde_json::Value,
}

/// Reads a config file, or a bundled config when `name` is not a file.
pub fn load(common: &Common) -> Result<Loaded, CliError> {
    let path = Path::new(&common.config);
    let (label, text) = match std::fs::read_to_string(path) {
        Ok(text) => (common.config.clone(), text),
        Err(source) => match bundled::by_name(&common.config) {
            Some(text) if !path.exists() => (format!("bundled:{}", common.config), text.to_string()),
            _ => {
                return Err(ConfigError::Io {
                    path: common.config.clone(),
                    source,
                }
                .into())
            }
        },
    };
    let (scenario, mut config) = parse_config(&text).map_err(|e| match e {
        ConfigError::Parse { path: None, message } => ConfigError::Parse {
            path: Some(label.clone()),
            message,
        },
        other => other,
    })?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(Loaded {
        config_ref: ConfigRef::new(&label, &text),
        scenario,
        config,
    })
}

fn build(loaded: &Loaded, model: Option<&Path>) -> Result<Pipeline, CliError> {
    let (scenario, config) = (loaded.scenario.clone(), loaded.config.clone());
    Ok(match model {
        Some(path) => {
            let model_err = |message: String| CliError::Model {
                path: path.display().to_string(),
                message,
            };
            let text = std::fs::read_to_string(path).map_err(|e| model_err(e.to_string()))?;
            let hyp = SeparatingHyperplane::from_json(&text).map_err(model_err)?;
            Pipeline::with_model(scenario, config, hyp)?
        }
        None => Pipeline::train(scenario, config, &SolverConfig::default())?,
    })
}

fn write(path: PathBuf, bytes: &[u8], outputs: &mut Vec<PathBuf>) -> Result<(), CliError> {
    write_atomic(&path, bytes).map_err(|e| CliError::output(&path, e))?;
    outputs.push(path);
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn test_states(p: &Pipeline, run: &RunOpts) -> Result<Vec<TestState>, CliError> {
    let n = run.test_samples.unwrap_or(p.config.reliability.test_samples);
    if n == 0 {
        return Err(CliError::Usage("--test-samples must be at least 1".into()));
    }
    Ok(p.test_states(n)?)
}

pub fn train(loaded: &Loaded, out_dir: &Path, model_out: Option<PathBuf>) -> Result<Produced, CliError> {
    let training = Pipeline::training_samples(&loaded.scenario, &loaded.config)?;
    let p = build(loaded, None)?;
    let mut outputs = Vec::new();
    let model_path = model_out.unwrap_or_else(|| out_dir.join("model.json"));
    write(model_path, format!("{}\n", p.hyp.to_json()).as_bytes(), &mut outputs)?;
    write(
        out_dir.join("training_samples.csv"),
        &csv_bytes(|b| write_samples_csv(&training.set, b)),
        &mut outputs,
    )?;
    let margin = p.hyp.margin().map_err(|e| CliError::Domain {
        kind: "ZeroNormal".into(),
        message: e.to_string(),
    })?;
    println!("trained K = {} on L = {} samples: margin {margin:.6}", p.hyp.dim(), training.set.len());
    println!("w = {:?}, b = {}", p.hyp.w, p.hyp.b);
    Ok(Produced {
        outputs,
        details: json!({
            "training_samples": training.set.len(),
            "clamped_samples": training.clamped,
            "margin": margin,
            "phi_min": p.mapping.phi_min(),
            "phi_max": p.mapping.phi_max(),
        }),
    })
}

pub fn sweep(
    loaded: &Loaded,
    out_dir: &Path,
    run: &RunOpts,
    scheme: SchemeArg,
    m_grid: Option<Vec<usize>>,
    q_grid: Option<Vec<usize>>,
    snr_db: Option<Vec<f64>>,
) -> Result<Produced, CliError> {
    let p = build(loaded, run.model.as_deref())?;
    let tests = test_states(&p, run)?;
    let op = p.operating_point(&tests, p.config.channel.snr_db)?;
    let trials = run.trials.unwrap_or(p.config.reliability.trials);
    let m_grid = m_grid.unwrap_or_else(|| p.config.reliability.m_grid.clone());
    let q_grid = q_grid.unwrap_or_else(|| m_grid.clone());
    let snrs = snr_db.unwrap_or_else(|| p.config.reliability.snr_grid.clone());
    let mut reports = Vec::new();
    if matches!(scheme, SchemeArg::Ei | SchemeArg::Both) {
        reports.extend(p.experiment.reliability_sweep(Scheme::Ei, &op, &m_grid, &snrs, &tests, trials)?);
    }
    if matches!(scheme, SchemeArg::Tdma | SchemeArg::Both) {
        reports.extend(p.experiment.reliability_sweep(Scheme::Tdma, &op, &q_grid, &snrs, &tests, trials)?);
    }
    for r in &reports {
        println!(
            "{:>4} uses {:>5} SNR {:>5} dB: reliability {:.4} +- {:.4}",
            r.scheme, r.uses, r.snr_db, r.aggregate, r.aggregate_std_error
        );
    }
    let mut outputs = Vec::new();
    write(out_dir.join("sweep.csv"), &csv_bytes(|b| write_sweep_csv(&reports, b)), &mut outputs)?;
    write(
        out_dir.join("sweep_samples.csv"),
        &csv_bytes(|b| write_sample_detail_csv(&reports, b)),
        &mut outputs,
    )?;
    Ok(Produced {
        outputs,
        details: json!({
            "trials": trials,
            "test_samples": tests.len(),
            "mean_power": op.mean_power,
            "tdma_decoder": TDMA_DECODER,
        }),
    })
}

pub fn map(
    loaded: &Loaded,
    out_dir: &Path,
    run: &RunOpts,
    scheme: SchemeArg,
    uses: Option<usize>,
    snr_db: Option<f64>,
    resolution: Option<usize>,
) -> Result<Produced, CliError> {
    let scheme = match scheme {
        SchemeArg::Ei => Scheme::Ei,
        SchemeArg::Tdma => Scheme::Tdma,
        SchemeArg::Both => return Err(CliError::Usage("map takes a single scheme".into())),
    };
    let p = build(loaded, run.model.as_deref())?;
    let tests = test_states(&p, run)?;
    let op = p.operating_point(&tests, snr_db.unwrap_or(p.config.channel.snr_db))?;
    let uses = uses.unwrap_or(p.config.channel.block_len);
    let resolution = resolution.unwrap_or(p.config.map.resolution);
    let trials = run.trials.unwrap_or(p.config.map.trials);
    let map = p.experiment.reliability_map(scheme, &op, uses, p.scenario.ranges(), resolution, trials)?;
    let (inside, outside) = map.margin_split();
    println!(
        "{scheme} uses {uses}, SNR {} dB, {resolution}x{resolution} lattice: mean reliability inside margin {}, outside {}",
        op.snr_db,
        inside.map_or("n/a".into(), |v| format!("{v:.4}")),
        outside.map_or("n/a".into(), |v| format!("{v:.4}")),
    );
    let mut outputs = Vec::new();
    write(out_dir.join("map.csv"), &csv_bytes(|b| write_map_csv(&map, b)), &mut outputs)?;
    Ok(Produced {
        outputs,
        details: json!({
            "scheme": scheme,
            "uses": uses,
            "snr_db": op.snr_db,
            "trials": trials,
            "inside_margin_mean": inside,
            "outside_margin_mean": outside,
        }),
    })
}

pub fn energy(
    loaded: &Loaded,
    out_dir: &Path,
    run: &RunOpts,
    m_grid: Option<Vec<usize>>,
    q_grid: Option<Vec<usize>>,
    snr_db: Option<f64>,
) -> Result<Produced, CliError> {
    let settings = loaded
        .config
        .energy
        .clone()
        .ok_or_else(|| CliError::Usage("config has no [energy] table".into()))?;
    let p = build(loaded, run.model.as_deref())?;
    let n = run.test_samples.unwrap_or(settings.test_samples);
    let tests = p.test_states(n)?;
    let op = p.operating_point(&tests, snr_db.unwrap_or(settings.snr_db))?;
    let em = EnergyModel::new(p.config.channel.p_max, settings.symbol_duration).map_err(|e| CliError::Usage(e.to_string()))?;
    let trials = run.trials.unwrap_or(settings.trials);
    let (ei, tdma) = p.experiment.energy_vs_reliability(
        &op,
        &m_grid.unwrap_or(settings.m_grid),
        &q_grid.unwrap_or(settings.q_grid),
        &tests,
        trials,
        &em,
    )?;
    for c in [&ei, &tdma] {
        for pt in &c.points {
            println!(
                "{:>4} uses {:>5}: reliability {:.4}, energy {:.4e} J, air time {:.4e} s",
                c.scheme, pt.channel_uses, pt.reliability, pt.energy, pt.duration
            );
        }
    }
    let target = settings.reliability_target;
    let (e_ei, e_tdma) = (ei.energy_at(target), tdma.energy_at(target));
    let ratio = e_ei.zip(e_tdma).map(|(a, b)| b / a);
    let (levels, cheaper) = ei.dominance(&tdma, 0.9, 0.005);
    println!(
        "at reliability {target}: EI {} J, TDMA {} J, TDMA/EI {}; EI cheaper at {cheaper}/{levels} levels >= 0.9",
        e_ei.map_or("n/a".into(), |v| format!("{v:.4e}")),
        e_tdma.map_or("n/a".into(), |v| format!("{v:.4e}")),
        ratio.map_or("n/a".into(), |v| format!("{v:.3}")),
    );
    let mut outputs = Vec::new();
    write(out_dir.join("energy.csv"), &csv_bytes(|b| write_energy_csv(&[&ei, &tdma], b)), &mut outputs)?;
    Ok(Produced {
        outputs,
        details: json!({
            "snr_db": op.snr_db,
            "trials": trials,
            "test_samples": tests.len(),
            "reliability_target": target,
            "ei_energy_at_target": e_ei,
            "tdma_energy_at_target": e_tdma,
            "tdma_over_ei": ratio,
            "levels_compared": levels,
            "levels_ei_cheaper": cheaper,
            "tdma_decoder": TDMA_DECODER,
        }),
    })
}

/// Returns whether the check passed alongside the outputs.
pub fn validate_moments(
    loaded: &Loaded,
    out_dir: &Path,
    block_len: Option<usize>,
    snr_db: Option<f64>,
    frames: Option<usize>,
    states: Option<usize>,
) -> Result<(Produced, bool), CliError> {
    let p = build(loaded, None)?;
    let n = states.unwrap_or(p.config.reliability.test_samples);
    let tests = p.test_states(p.config.reliability.test_samples)?;
    let op = p.operating_point(&tests, snr_db.unwrap_or(p.config.channel.snr_db))?;
    let block_len = block_len.unwrap_or(p.config.channel.block_len);
    let frames = frames.unwrap_or(p.config.moment_frames);
    let states = p.moment_states(n)?;
    let check = p.experiment.validate_moments(&op, block_len, &states, frames)?;
    let (mean_tol, var_tol) = (0.01, 0.05);
    let pass = check.passes(mean_tol, var_tol);
    println!(
        "{}: mean empirical {:.6e} vs theory {:.6e} (rel err {:.4}, tol {mean_tol}); variance empirical {:.6e} vs theory {:.6e} (rel err {:.4}, tol {var_tol})",
        if pass { "PASS" } else { "FAIL" },
        check.empirical_mean,
        check.theory.mean,
        check.mean_rel_error(),
        check.empirical_variance,
        check.theory.variance,
        check.variance_rel_error(),
    );
    let csv = format!(
        "frames,block_len,snr_db,noise_var,empirical_mean,theory_mean,empirical_variance,theory_variance,ordered_pair_variance\n{},{},{},{},{},{},{},{},{}\n",
        check.frames,
        check.block_len,
        op.snr_db,
        op.noise_var,
        check.empirical_mean,
        check.theory.mean,
        check.empirical_variance,
        check.theory.variance,
        check.literal_variance,
    );
    let mut outputs = Vec::new();
    write(out_dir.join("moments.csv"), csv.as_bytes(), &mut outputs)?;
    Ok((
        Produced {
            outputs,
            details: json!({ "pass": pass, "mean_tol": mean_tol, "variance_tol": var_tol }),
        },
        pass,
    ))
}

pub fn export_samples(loaded: &Loaded, out_dir: &Path, count: usize) -> Result<Produced, CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let mut rng = ota_anomaly::StreamFactory::new(loaded.config.seed).stream(&[ota_anomaly::rng::tags::TEST_SAMPLES, count as u64]);
    let drawn = ota_anomaly::sample_states(&loaded.scenario, count, &mut rng)?;
    let mut outputs = Vec::new();
    write(out_dir.join("samples.csv"), &csv_bytes(|b| write_samples_csv(&drawn.set, b)), &mut outputs)?;
    println!("wrote {count} samples ({} clamped)", drawn.clamped);
    Ok(Produced {
        outputs,
        details: json!({ "count": count, "clamped": drawn.clamped }),
    })
}
