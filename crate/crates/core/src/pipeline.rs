//! End-to-end runs: problem construction from a [`RunConfig`], state
//! solves, optimization and the files they write.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bfgs::{compare_runs, minimize, OptRunTrace, Variant};
use crate::config::RunConfig;
use crate::control::ControlVector;
use crate::error::{Error, Result};
use crate::export::{control_csv, level_set_csv, state_csv, state_vtk, write_file, zero_level_set};
use crate::fem::DiscreteObstacleProblem;
use crate::mesh::{generate_disk_mesh, TriMesh};
use crate::objective::{evaluate, EvalRecord, ReducedObjective};

pub fn build_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    cfg.validate()?;
    generate_disk_mesh(cfg.radius, cfg.h, &cfg.omega0)
}

pub fn problem_on_mesh(cfg: &RunConfig, mesh: TriMesh) -> Result<DiscreteObstacleProblem> {
    let f = cfg.f;
    DiscreteObstacleProblem::new(mesh, move |_| f, cfg.psi())
}

pub fn build_problem(cfg: &RunConfig) -> Result<DiscreteObstacleProblem> {
    problem_on_mesh(cfg, build_mesh(cfg)?)
}

pub fn initial_control(cfg: &RunConfig) -> Vec<f64> {
    vec![cfg.a0; cfg.n]
}

/// Solves the state for control coefficients `a` and evaluates the cost.
pub fn solve_state(cfg: &RunConfig, problem: &DiscreteObstacleProblem, a: &[f64]) -> Result<EvalRecord> {
    let ctrl = ControlVector::new(a.to_vec(), cfg.objective.u_min, cfg.objective.u_max)?;
    evaluate(&ctrl, problem, &cfg.objective, None)
}

/// Writes `{prefix}state.csv`, `{prefix}state.vtk` and `{prefix}levelset.csv`.
pub fn write_state(
    dir: &Path,
    prefix: &str,
    problem: &DiscreteObstacleProblem,
    record: &EvalRecord,
) -> Result<Vec<PathBuf>> {
    let state = &record.state;
    let files = [
        (format!("{prefix}state.csv"), state_csv(problem, &state.q, &state.contact_set)),
        (format!("{prefix}state.vtk"), state_vtk(problem, &state.q, &state.contact_set)),
        (format!("{prefix}levelset.csv"), level_set_csv(&zero_level_set(&problem.mesh, &state.q))),
    ];
    write_all(dir, files)
}

fn write_all(dir: &Path, files: impl IntoIterator<Item = (String, String)>) -> Result<Vec<PathBuf>> {
    files
        .into_iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            write_file(&path, &contents)?;
            Ok(path)
        })
        .collect()
}

/// Cost components of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub value: f64,
    pub area: f64,
    pub contact: f64,
    pub penalty: f64,
}

impl From<&EvalRecord> for Terms {
    fn from(r: &EvalRecord) -> Self {
        Self {
            value: r.value,
            area: r.area_term,
            contact: r.contact_term,
            penalty: r.box_term,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub trace: OptRunTrace,
    pub initial: Terms,
    /// Re-evaluation at the best point, outside the evaluation budget.
    pub final_eval: EvalRecord,
    pub eval_log: String,
}

/// Optimization that stopped on a failed evaluation.
#[derive(Debug)]
pub struct RunFailure {
    pub variant: Variant,
    pub error: Error,
    pub trace: OptRunTrace,
    pub eval_log: String,
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        Error::Optimization {
            variant: f.variant.to_string(),
            evaluation: f.trace.records.len() + 1,
            source: Box::new(f.error),
        }
    }
}

pub fn optimize(
    cfg: &RunConfig,
    problem: &DiscreteObstacleProblem,
    variant: Variant,
) -> std::result::Result<RunResult, Box<RunFailure>> {
    let fail_early = |error: Error| Box::new(RunFailure {
        variant,
        error,
        trace: OptRunTrace {
            variant,
            records: Vec::new(),
            points: Vec::new(),
            termination: crate::bfgs::Termination::NonFiniteStart,
            best_point: Vec::new(),
            best_value: f64::NAN,
            iterations: 0,
            wall_clock: Default::default(),
        },
        eval_log: String::new(),
    });
    cfg.validate().map_err(fail_early)?;
    let objective = ReducedObjective::new(problem, cfg.objective, cfg.n).map_err(fail_early)?;
    let mut initial = None;
    let callback = |a: &[f64]| {
        let record = objective.evaluate(a)?;
        if initial.is_none() {
            initial = Some(Terms::from(&record));
        }
        Ok::<_, Error>((record.value, record.grad))
    };
    let (best, trace) = match minimize(callback, &initial_control(cfg), &cfg.optimizer(variant)) {
        Ok(done) => done,
        Err(interrupted) => {
            return Err(Box::new(RunFailure {
                variant,
                error: interrupted.source,
                trace: interrupted.trace,
                eval_log: objective.log_csv(),
            }))
        }
    };
    let eval_log = objective.log_csv();
    let failure = |error: Error, trace: OptRunTrace, eval_log: String| {
        Box::new(RunFailure {
            variant,
            error,
            trace,
            eval_log,
        })
    };
    let final_eval = match solve_state(cfg, problem, &best) {
        Ok(r) => r,
        Err(e) => return Err(failure(e, trace, eval_log)),
    };
    Ok(RunResult {
        variant,
        initial: initial.expect("at least one evaluation"),
        trace,
        final_eval,
        eval_log,
    })
}

/// Writes the trace, evaluation log, final control and final state of a
/// run, each file prefixed with the variant name.
pub fn write_run(dir: &Path, problem: &DiscreteObstacleProblem, run: &RunResult) -> Result<Vec<PathBuf>> {
    let prefix = format!("{}_", run.variant);
    let mut files = write_all(
        dir,
        [
            (format!("{prefix}trace.csv"), run.trace.to_csv()),
            (format!("{prefix}evals.csv"), run.eval_log.clone()),
            (format!("{prefix}control.csv"), control_csv(&run.trace.best_point)),
        ],
    )?;
    files.extend(write_state(dir, &prefix, problem, &run.final_eval)?);
    Ok(files)
}

/// Writes what a failed run produced before stopping.
pub fn write_partial(dir: &Path, failure: &RunFailure) -> Result<Vec<PathBuf>> {
    let prefix = format!("{}_", failure.variant);
    write_all(
        dir,
        [
            (format!("{prefix}trace.csv"), failure.trace.to_csv()),
            (format!("{prefix}evals.csv"), failure.eval_log.clone()),
        ],
    )
}

pub fn write_comparison(dir: &Path, runs: &[RunResult]) -> Result<PathBuf> {
    let traces: Vec<(&str, &OptRunTrace)> = runs.iter().map(|r| (r.variant.name(), &r.trace)).collect();
    let path = dir.join("compare.csv");
    write_file(&path, &compare_runs(&traces)?.to_csv())?;
    Ok(path)
}

/// Runs every configured variant on `problem`, writing all outputs to
/// `dir`. A failing run keeps its partial trace on disk.
pub fn run_all(cfg: &RunConfig, problem: &DiscreteObstacleProblem, dir: &Path) -> Result<Vec<RunResult>> {
    write_file(&dir.join("config.txt"), &cfg.serialize())?;
    let mut runs = Vec::new();
    for variant in cfg.variant.variants() {
        match optimize(cfg, problem, variant) {
            Ok(run) => {
                write_run(dir, problem, &run)?;
                runs.push(run);
            }
            Err(failure) => {
                write_partial(dir, &failure)?;
                return Err((*failure).into());
            }
        }
    }
    write_comparison(dir, &runs)?;
    Ok(runs)
}

/// Adjoint directional derivative along a seeded random unit direction,
/// paired with its central difference quotient.
pub fn directional_check(
    cfg: &RunConfig,
    problem: &DiscreteObstacleProblem,
    a: &[f64],
    step: f64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d: Vec<f64> = (0..a.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.iter_mut().for_each(|v| *v /= norm);
    let at = |t: f64| -> Vec<f64> { a.iter().zip(&d).map(|(x, dx)| x + t * dx).collect() };
    let base = solve_state(cfg, problem, a)?;
    let adjoint: f64 = base.grad.iter().zip(&d).map(|(g, dx)| g * dx).sum();
    let plus = solve_state(cfg, problem, &at(step))?.value;
    let minus = solve_state(cfg, problem, &at(-step))?.value;
    Ok((adjoint, (plus - minus) / (2.0 * step)))
}
