use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use obstacle_shape::bfgs::compare_series;
use obstacle_shape::config::{RunConfig, VariantChoice};
use obstacle_shape::control::kink_sweep;
use obstacle_shape::export::{pchip_csv, read_control_csv, state_vtk, write_file, CsvTable, STATE_CSV_HEADER};
use obstacle_shape::fem::DiscreteObstacleProblem;
use obstacle_shape::mesh::{load_mesh, save_mesh};
use obstacle_shape::pipeline::{
    build_mesh, build_problem, directional_check, initial_control, problem_on_mesh, run_all, solve_state,
    write_state,
};

/// Boundary-control shape optimization for the elliptic obstacle problem.
#[derive(Debug, Parser)]
#[command(name = "obstacle-shape", version)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides one configuration key, e.g. `--set discretization.h=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generates the disk mesh and writes it in the ASCII mesh format.
    Mesh {
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves the obstacle problem for one control and exports the state.
    Solve {
        /// Mesh file; generated from the configuration when absent.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Control CSV (`k,theta_k,a_k`); the constant initial control when absent.
        #[arg(long)]
        control: Option<PathBuf>,
        /// Output directory, defaults to `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the configured optimizer variants and exports traces and states.
    Optimize {
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Overrides `optimizer.variant`.
        #[arg(long)]
        variant: Option<VariantChoice>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compares the adjoint gradient with a difference quotient at each
        /// final control, along a direction drawn from `run.seed`.
        #[arg(long)]
        check_gradient: bool,
    },
    /// Samples the interpolant of the three-knot demonstration data at
    /// t = 0.3 over a range of the middle knot value.
    PchipDemo {
        #[arg(long, default_value = "-0.5,1.0", allow_hyphen_values = true, value_parser = parse_range)]
        range: (f64, f64),
        #[arg(long, default_value_t = 601)]
        samples: usize,
        /// Output CSV, defaults to `pchip_demo.csv` in `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Converts exported files into the forms the plotting scripts read.
    #[command(subcommand)]
    Export(Export),
}

#[derive(Debug, Subcommand)]
enum Export {
    /// Aligns the best-so-far columns of trace files on one evaluation axis.
    Compare {
        #[arg(long)]
        out: PathBuf,
        /// Trace CSVs; each column is named after its file, less `_trace.csv`.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Writes a state CSV on a mesh file as legacy VTK.
    Vtk {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `LO,HI`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg.apply_override(assignment)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn problem(cfg: &RunConfig, mesh: Option<&Path>) -> anyhow::Result<DiscreteObstacleProblem> {
    Ok(match mesh {
        Some(path) => problem_on_mesh(cfg, load_mesh(path)?)?,
        None => build_problem(cfg)?,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Mesh { out } => {
            let mesh = build_mesh(&cfg)?;
            save_mesh(&mesh, &out)?;
            println!(
                "{} nodes, {} triangles, {} boundary nodes -> {}",
                mesh.num_nodes(),
                mesh.num_triangles(),
                mesh.boundary_nodes.len(),
                out.display()
            );
        }
        Command::Solve { mesh, control, out } => {
            let problem = problem(&cfg, mesh.as_deref())?;
            let a = match &control {
                Some(path) => read_control_csv(path)?,
                None => initial_control(&cfg),
            };
            let record = solve_state(&cfg, &problem, &a)?;
            let dir = out.unwrap_or(cfg.output_dir);
            write_state(&dir, "", &problem, &record)?;
            println!(
                "J = {:e} (area {:e}, contact {:e}, box {:e}), |contact set| = {}, {} active-set iterations",
                record.value,
                record.area_term,
                record.contact_term,
                record.box_term,
                record.state.contact_set.len(),
                record.state.iterations
            );
        }
        Command::Optimize {
            mesh,
            variant,
            out,
            check_gradient,
        } => {
            if let Some(v) = variant {
                cfg.variant = v;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let problem = problem(&cfg, mesh.as_deref())?;
            let runs = run_all(&cfg, &problem, &cfg.output_dir)?;
            for run in &runs {
                println!(
                    "{}: J {:e} -> {:e} after {} evaluations ({}), contact term {:e} -> {:e}",
                    run.variant,
                    run.initial.value,
                    run.trace.best_value,
                    run.trace.records.len(),
                    run.trace.termination,
                    run.initial.contact,
                    run.final_eval.contact_term
                );
                if check_gradient {
                    let (adjoint, fd) = directional_check(&cfg, &problem, &run.trace.best_point, 1e-6)?;
                    println!("{}: directional derivative adjoint {adjoint:e}, difference {fd:e}", run.variant);
                }
            }
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::PchipDemo { range, samples, out } => {
            let sweep = kink_sweep(range, samples, 0.3)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join("pchip_demo.csv"));
            write_file(&out, &pchip_csv(&sweep))?;
            println!("{} samples -> {}", sweep.len(), out.display());
        }
        Command::Export(Export::Compare { out, traces }) => {
            let mut series = Vec::new();
            for path in &traces {
                let table = CsvTable::read(path, &["bestJ"])?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let name = stem.strip_suffix("_trace").unwrap_or(&stem).to_string();
                series.push((name, table.column("bestJ").expect("required column")));
            }
            let named: Vec<(&str, Vec<f64>)> = series.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
            write_file(&out, &compare_series(&named)?.to_csv())?;
            println!("{} traces -> {}", traces.len(), out.display());
        }
        Command::Export(Export::Vtk { mesh, state, out }) => {
            let problem = problem_on_mesh(&cfg, load_mesh(&mesh)?)?;
            let columns: Vec<&str> = STATE_CSV_HEADER.split(',').collect();
            let table = CsvTable::read(&state, &columns)?;
            let q = table.column("q").expect("required column");
            if q.len() != problem.num_nodes() {
                bail!(
                    "{} has {} rows but the mesh has {} nodes",
                    state.display(),
                    q.len(),
                    problem.num_nodes()
                );
            }
            let contact: Vec<usize> = table
                .column("contact")
                .expect("required column")
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(i, _)| i)
                .collect();
            write_file(&out, &state_vtk(&problem, &q, &contact))
                .with_context(|| format!("converting {}", state.display()))?;
            println!("{} nodes -> {}", q.len(), out.display());
        }
    }
    Ok(())
}

/// The error chain joined by `: `, skipping causes that the library error
/// messages already quote.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

/// 2 for numerical failures, 1 for bad input of any kind.
fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .find_map(|c| c.downcast_ref::<obstacle_shape::Error>())
        .is_some_and(obstacle_shape::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests go to stdout and are not failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
