//! Front end for the `cbf-synth` binary: configuration loading and the
//! `check-degree`, `synthesize` and `simulate` commands.

pub mod config;

use std::path::{Path, PathBuf};

use cbf_synth::filter::{condition_plan, verify_cbf_condition, CbfConditionReport};
use cbf_synth::lie::{verify_relative_degree, OutputDomain, OutputMap, RankReport, RankTolerances};
use cbf_synth::sampling::{BoxDomain, SamplingPlan};
use cbf_synth::sim::{invariance_report, simulate, write_plot_script, InvarianceReport, NominalController, Scenario};
use cbf_synth::synthesis::constraint::grid_size;
use cbf_synth::synthesis::{check_rank_on_constraint, CandidateMetadata, CbfBuilder, CbfCandidate, OutputConstraint};
use cbf_synth::systems::zoo::{zoo_entry, ModelZooEntry};
use cbf_synth::systems::ControlAffineSystem;
use serde::Serialize;

pub use config::ConfigFile;
use config::{ConstraintConfig, NominalConfig, OutputKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        source: cbf_synth::Error,
    },
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn config_err(e: cbf_synth::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Model, output and constraint resolved from a configuration.
pub struct Setup {
    pub entry: ModelZooEntry,
    pub system: ControlAffineSystem,
    pub output: OutputMap,
    pub constraint: OutputConstraint,
}

pub fn setup(cfg: &ConfigFile) -> Result<Setup, CliError> {
    let entry = zoo_entry(&cfg.model.name, &cfg.model.params).map_err(config_err)?;
    let system = entry.system.control_affine().map_err(config_err)?;
    let (kind, source) = match cfg.output.kind {
        OutputKind::FullState => (OutputDomain::FullState, system.state_dim()),
        OutputKind::Configuration => {
            let n = system.config_dim().ok_or_else(|| {
                CliError::Config(format!("model {} has no configuration coordinates", cfg.model.name))
            })?;
            (OutputDomain::Configuration, n)
        }
    };
    let name = format!(
        "{}[{}]",
        if kind == OutputDomain::Configuration { "q" } else { "x" },
        cfg.output.indices.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    );
    let output = OutputMap::select(name, &cfg.output.indices, source, cfg.output.relative_degree, kind)
        .map_err(config_err)?;
    let constraint = match cfg.constraint {
        ConstraintConfig::UpperLimit { max } => OutputConstraint::upper_limit(max),
        ConstraintConfig::LowerLimit { min } => OutputConstraint::lower_limit(min),
        ConstraintConfig::Band { center, half_width } => OutputConstraint::band(center, half_width),
        ConstraintConfig::Ellipse {
            z_center_m,
            z_min_m,
            theta_max_rad,
        } => OutputConstraint::ellipse(z_center_m, z_min_m, theta_max_rad),
    }
    .map_err(config_err)?;
    if constraint.dim() != output.dim() {
        return Err(CliError::Config(format!(
            "constraint takes {} outputs but the output selects {}",
            constraint.dim(),
            output.dim()
        )));
    }
    Ok(Setup {
        entry,
        system,
        output,
        constraint,
    })
}

fn stage_of(e: &cbf_synth::Error) -> &'static str {
    use cbf_synth::Error::*;
    match e {
        GradientConditionViolated { .. } => "gradient",
        RankDeficientOnC { .. } => "rank",
        GainTooSmall { .. } => "gains",
        _ => "build",
    }
}

/// Builds the candidate with every hypothesis check enabled.
pub fn build_candidate(cfg: &ConfigFile, s: &Setup) -> Result<CbfCandidate, CliError> {
    let g = &cfg.gains;
    let mut builder = CbfBuilder::new(&s.system, &s.output, &s.constraint)
        .alpha(g.alpha)
        .sigma(g.sigma)
        .seed(cfg.seed);
    if let Some(mu) = &g.mu {
        builder = builder.mu(mu.clone());
    }
    if let Some(lambda) = &g.lambda {
        builder = builder.lambda(lambda.clone());
    }
    let specialized = s.output.kind() == OutputDomain::Configuration
        && s.output.gamma() == 2
        && g.lambda.is_none()
        && s.system.config_dim().is_some();
    if specialized {
        builder = builder.relative_degree_two().map_err(config_err)?;
    }
    builder.build().map_err(|e| match e {
        cbf_synth::Error::InvalidParameter(_)
        | cbf_synth::Error::DimensionMismatch { .. }
        | cbf_synth::Error::Unknown { .. } => config_err(e),
        other => CliError::Stage {
            stage: stage_of(&other),
            source: other,
        },
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn check_degree(cfg: &ConfigFile, seed: Option<u64>, out: Option<&Path>) -> Result<RankReport, CliError> {
    let s = setup(cfg)?;
    let seed = seed.unwrap_or(cfg.seed);
    let tol = RankTolerances::default();
    let report = match &cfg.relative_degree {
        Some(b) => {
            let domain = BoxDomain::new(b.lower.clone(), b.upper.clone()).map_err(config_err)?;
            let plan = SamplingPlan::new(domain.clone(), seed)
                .with_grid(grid_size(domain.dim()))
                .with_lhs(2000);
            verify_relative_degree(&s.system, &s.output, &plan, tol).map_err(config_err)?
        }
        None => check_rank_on_constraint(&s.system, &s.output, &s.constraint, seed, tol).map_err(config_err)?,
    };
    write_json(&report, out)?;
    if report.rank_ok {
        Ok(report)
    } else {
        let w = report.witnesses.first().map(|w| format!("{:?}", w.state)).unwrap_or_default();
        Err(CliError::Failed(format!(
            "relative-degree condition fails at {} of {} points, min singular value {:.3e}, worst at {w}",
            report.failures, report.sampled_points, report.min_singular_value
        )))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisOutput {
    pub name: String,
    pub passed: bool,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub metadata: Option<CandidateMetadata>,
    pub condition: Option<CbfConditionReport>,
}

pub fn synthesize(cfg: &ConfigFile, seed: Option<u64>, out: Option<&Path>) -> Result<SynthesisOutput, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let s = setup(&cfg)?;
    let mut result = SynthesisOutput {
        name: cfg.name.clone(),
        passed: false,
        failed_stage: None,
        error: None,
        metadata: None,
        condition: None,
    };
    let cbf = match build_candidate(&cfg, &s) {
        Ok(cbf) => cbf,
        Err(CliError::Stage { stage, source }) => {
            result.failed_stage = Some(stage.to_string());
            result.error = Some(source.to_string());
            write_json(&result, out)?;
            return Err(CliError::Stage { stage, source });
        }
        Err(e) => return Err(e),
    };
    result.metadata = Some(cbf.metadata().clone());
    let plan = condition_plan(&cbf, cfg.verification.condition_samples, cfg.seed);
    let report = verify_cbf_condition(&cbf, &plan, cfg.verification.inflation);
    result.passed = report.passed;
    if !report.passed {
        result.failed_stage = Some("condition".into());
        result.error = Some(format!(
            "{} violations in {} samples, min margin {:.3e}",
            report.violations, report.sampled_points, report.min_margin
        ));
    }
    result.condition = Some(report);
    write_json(&result, out)?;
    match &result.error {
        Some(msg) => Err(CliError::Failed(format!("condition failed: {msg}"))),
        None => Ok(result),
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub no_filter: bool,
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub name: String,
    pub model: String,
    pub filter: bool,
    pub dt: f64,
    pub horizon: f64,
    pub nominal: NominalController,
    pub invariance: InvarianceReport,
}

fn param(entry: &ModelZooEntry, name: &str) -> Result<f64, CliError> {
    entry
        .params
        .iter()
        .find(|p| p.name == name)
        .map(|p| p.value)
        .ok_or_else(|| CliError::Config(format!("model {} has no parameter {name}", entry.name)))
}

fn nominal(cfg: &NominalConfig, entry: &ModelZooEntry) -> Result<NominalController, CliError> {
    Ok(match *cfg {
        NominalConfig::Zero => NominalController::Zero,
        NominalConfig::Pd {
            position,
            velocity,
            input,
            setpoint,
            kp,
            kd,
        } => NominalController::Pd {
            position,
            velocity,
            input,
            setpoint,
            kp,
            kd,
        },
        NominalConfig::QuadrotorHeight { height_m, kp, kd } => {
            if entry.name != "planar-quadrotor" {
                return Err(CliError::Config(format!(
                    "quadrotor-height controller needs the planar-quadrotor model, not {}",
                    entry.name
                )));
            }
            NominalController::QuadrotorHeight {
                mass: param(entry, "mass_kg")?,
                inertia: param(entry, "inertia_kgm2")?,
                gravity: param(entry, "gravity_mps2")?,
                height: height_m,
                kp,
                kd,
            }
        }
    })
}

pub fn run_simulation(cfg: &ConfigFile, opts: &SimulateOptions) -> Result<SimulationSummary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let sim = cfg
        .simulation
        .clone()
        .ok_or_else(|| CliError::Config("missing [simulation] table".into()))?;
    let s = setup(&cfg)?;
    let nominal = nominal(&sim.nominal, &s.entry)?;
    let cbf = build_candidate(&cfg, &s)?;
    let mut scenario = Scenario::new(cfg.name.clone(), cbf, nominal.clone(), sim.x0.clone());
    scenario.dt = opts.dt.unwrap_or(sim.dt_s);
    scenario.horizon = opts.horizon.unwrap_or(sim.horizon_s);
    scenario.filter = !opts.no_filter;
    if scenario.x0.len() != s.system.state_dim() {
        return Err(CliError::Config(format!(
            "x0 has {} entries, model state has {}",
            scenario.x0.len(),
            s.system.state_dim()
        )));
    }
    let log = simulate(&scenario).map_err(|e| match e {
        cbf_synth::Error::InvalidParameter(_) => config_err(e),
        other => CliError::Stage {
            stage: "simulation",
            source: other,
        },
    })?;
    if let Some(path) = &opts.csv {
        log.write_csv_file(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let script = path.with_extension("plot.py");
        let csv_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        write_plot_script(&script, &csv_name, &log)
            .map_err(|e| CliError::Io(format!("{}: {e}", script.display())))?;
    }
    let summary = SimulationSummary {
        name: cfg.name.clone(),
        model: cfg.model.name.clone(),
        filter: scenario.filter,
        dt: scenario.dt,
        horizon: scenario.horizon,
        nominal,
        invariance: invariance_report(&log),
    };
    write_json(&summary, opts.summary.as_deref())?;
    let r = &summary.invariance;
    if r.passed {
        Ok(summary)
    } else {
        Err(CliError::Failed(format!(
            "invariance check failed: min h {:.3e}, min psi {:.3e}",
            r.min_h, r.min_psi
        )))
    }
}
