//! Runs a configured convergence study on the cosine example.

use std::path::PathBuf;
use std::time::Instant;

use opwg_core::analysis::{final_time_errors, AnalysisError, ConvergenceReport, ConvergenceRow, ManufacturedCase, SweepKind};
use opwg_core::mesh::{generate_uniform, read_gmsh, Mesh, MeshError};
use opwg_core::stepper::{StepperError, ThetaConfig};
use opwg_core::wg::WgSpace;
use thiserror::Error;

use crate::config::{steps_for, ExperimentConfig, MeshSpec, Sweep};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("level {level}: cannot read mesh {path}: {source}")]
    MeshFile { level: usize, path: PathBuf, source: std::io::Error },
    #[error("level {level}: invalid mesh: {source}")]
    Mesh { level: usize, source: MeshError },
    #[error("level {level}: {message}")]
    TimeStep { level: usize, message: String },
    #[error("level {level} (h = {h:e}, tau = {tau:e}): {source}")]
    Run { level: usize, h: f64, tau: f64, source: StepperError },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Solver statistics for one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub h: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub n_dofs: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_relative_residual: f64,
    /// Largest element balance residual, when monitors are on.
    pub max_mass_residual: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: ExperimentConfig,
    pub report: ConvergenceReport,
    pub levels: Vec<LevelStats>,
    pub seconds: f64,
}

fn load_mesh(level: usize, spec: &MeshSpec) -> Result<(Mesh, f64), StudyError> {
    match spec {
        MeshSpec::Uniform(n) => {
            let mesh = generate_uniform(*n).map_err(|source| StudyError::Mesh { level, source })?;
            Ok((mesh, 1.0 / *n as f64))
        }
        MeshSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| StudyError::MeshFile { level, path: path.clone(), source })?;
            let mesh = read_gmsh(&text).map_err(|source| StudyError::Mesh { level, source })?;
            let h = mesh.h_max;
            Ok((mesh, h))
        }
    }
}

/// Number of steps for a rule-derived `τ`: exact when `τ` divides the final
/// time, otherwise rounded up so that the actual step does not exceed `τ`.
fn steps_at_most(final_time: f64, tau: f64) -> usize {
    steps_for(final_time, tau).unwrap_or_else(|_| (final_time / tau).ceil().max(1.0) as usize)
}

fn run_level(
    level: usize,
    space: &WgSpace,
    h: f64,
    n_steps: usize,
    config: &ExperimentConfig,
    case: &ManufacturedCase,
) -> Result<(ConvergenceRow, LevelStats), StudyError> {
    let started = Instant::now();
    let theta = ThetaConfig::uniform(config.theta, config.final_time, n_steps, config.beta0(), config.solver());
    let tau = theta.tau;
    log::info!("{}: level {level}, h = {h:e}, tau = {tau:e}, {n_steps} steps", config.label);
    let (errors, outcome) = final_time_errors(space, case, theta, config.monitors)
        .map_err(|source| StudyError::Run { level, h, tau, source })?;
    let records = &outcome.records;
    let stats = LevelStats {
        h,
        tau,
        n_steps,
        n_dofs: space.dofs.total(),
        total_iterations: records.iter().map(|r| r.iterations).sum(),
        max_iterations: records.iter().map(|r| r.iterations).max().unwrap_or(0),
        max_relative_residual: records.iter().map(|r| r.relative_residual).fold(0.0, f64::max),
        max_mass_residual: records.iter().filter_map(|r| r.max_mass_residual).reduce(f64::max),
        seconds: started.elapsed().as_secs_f64(),
    };
    let step = match config.sweep {
        Sweep::Space { .. } => h,
        Sweep::Time { .. } => tau,
    };
    Ok((ConvergenceRow { step, errors }, stats))
}

/// Runs every level of the study and collects errors, orders and solver
/// statistics.
pub fn run_study(config: &ExperimentConfig) -> Result<StudyResult, StudyError> {
    config.validate()?;
    let started = Instant::now();
    let case = ManufacturedCase { final_time: config.final_time, ..ManufacturedCase::cosine_example() };
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let kind = match &config.sweep {
        Sweep::Space { meshes, tau } => {
            for (level, spec) in meshes.iter().enumerate() {
                let (mesh, h) = load_mesh(level, spec)?;
                let space = WgSpace::new(mesh, config.k);
                let n_steps = steps_at_most(config.final_time, tau.coefficient * h.powi(tau.power));
                let (row, stats) = run_level(level, &space, h, n_steps, config, &case)?;
                rows.push(row);
                levels.push(stats);
            }
            SweepKind::Space
        }
        Sweep::Time { mesh, taus } => {
            let (mesh, h) = load_mesh(0, mesh)?;
            let space = WgSpace::new(mesh, config.k);
            for (level, &tau) in taus.iter().enumerate() {
                let n_steps =
                    steps_for(config.final_time, tau).map_err(|message| StudyError::TimeStep { level, message })?;
                let (row, stats) = run_level(level, &space, h, n_steps, config, &case)?;
                rows.push(row);
                levels.push(stats);
            }
            SweepKind::Time
        }
    };
    let report = ConvergenceReport::new(config.label.clone(), kind, rows)?;
    Ok(StudyResult { config: config.clone(), report, levels, seconds: started.elapsed().as_secs_f64() })
}
