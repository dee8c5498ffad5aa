use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nlschwarz_cli::config::{Experiment, ExperimentConfig, PatchKind, SolverKind};
use nlschwarz_cli::experiments::{run_dirichlet, run_gmres_bench, run_h_study, run_neumann, run_patch_test, RunReport};
use nlschwarz_cli::io::{write_bench, write_convergence, write_matrix_market, write_solution, write_trace};

#[derive(Parser)]
#[command(name = "nlschwarz", version, about = "Schwarz and block-preconditioned GMRES solvers for nonlocal diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-subdomain Dirichlet problem with a singular kernel.
    SolveDirichlet(Flags),
    /// Two-subdomain problem with Neumann constraints and a constant kernel.
    SolveNeumann(Flags),
    /// Coupled constant/fractional kernel patch test.
    PatchTest(Flags),
    /// GMRES iterations and condition numbers without and with block preconditioners.
    GmresBench(Flags),
    /// L2 self-convergence of the Dirichlet, Neumann and patch-test solutions.
    HStudy(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Main CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mesh size of the h-study reference solution (0.01 for the full-scale study).
    #[arg(long)]
    reference_h: Option<f64>,
    /// Patch-test polynomial.
    #[arg(long, value_enum)]
    patch: Option<PatchKind>,
    /// Also write the stiffness matrix in MatrixMarket format.
    #[arg(long)]
    matrix_out: Option<PathBuf>,
}

impl Flags {
    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::new(experiment);
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        c.experiment = experiment;
        c.h = self.h.or(c.h);
        c.delta = self.delta.unwrap_or(c.delta);
        c.delta2 = self.delta2.or(c.delta2);
        c.s = self.s.or(c.s);
        c.solver = self.solver.unwrap_or(c.solver);
        c.tol = self.tol.or(c.tol);
        c.inner_tol = self.inner_tol.unwrap_or(c.inner_tol);
        c.max_iters = self.max_iters.unwrap_or(c.max_iters);
        c.theta = self.theta.unwrap_or(c.theta);
        c.out = self.out.clone().or(c.out);
        c.reference_h = self.reference_h.unwrap_or(c.reference_h);
        c.patch = self.patch.unwrap_or(c.patch);
        c.validate()?;
        Ok(c)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// `dir/name.csv` -> `dir/name.solution.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_run(c: &ExperimentConfig, flags: &Flags, run: &RunReport) -> Result<()> {
    let mut w = output(c.out.as_deref())?;
    write_trace(&mut w, &run.trace)?;
    w.flush()?;
    if let Some(out) = &c.out {
        let path = sibling(out, "solution");
        let mut s = output(Some(&path))?;
        write_solution(&mut s, &run.disc.mesh, &run.disc.dofmap, &run.solution)?;
        s.flush()?;
    }
    if let Some(path) = &flags.matrix_out {
        let mut m = output(Some(path))?;
        write_matrix_market(&mut m, &run.disc.system.a)?;
        m.flush()?;
    }
    Ok(())
}

fn summary(c: &ExperimentConfig, run: &RunReport) {
    let t = &run.trace;
    let times: Vec<String> = t.phase_times.iter().map(|(k, v)| format!("{k} {v:.2}s")).collect();
    eprintln!(
        "{}: h={} unknowns={} solver={} iterations={} residual={:.3e} converged={} ({})",
        c.experiment.name(),
        c.mesh_size(),
        run.disc.system.dim(),
        c.solver,
        t.iterations,
        t.final_residual(),
        t.converged,
        times.join(", ")
    );
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::SolveDirichlet(f) => {
            let c = f.resolve(Experiment::Dirichlet)?;
            let r = run_dirichlet(&c)?;
            summary(&c, &r);
            write_run(&c, f, &r)?;
            Ok(r.trace.converged)
        }
        Command::SolveNeumann(f) => {
            let c = f.resolve(Experiment::Neumann)?;
            let r = run_neumann(&c)?;
            summary(&c, &r);
            eprintln!("neumann: flux data g^N = 0 on the layer (assumed, not given for this setup)");
            write_run(&c, f, &r)?;
            Ok(r.trace.converged)
        }
        Command::PatchTest(f) => {
            let c = f.resolve(Experiment::PatchTest)?;
            let r = run_patch_test(&c)?;
            summary(&c, &r.run);
            eprintln!("patch-test: max nodal error {:.3e}, L2 error {:.3e}", r.max_error, r.l2_error);
            write_run(&c, f, &r.run)?;
            Ok(r.run.trace.converged)
        }
        Command::GmresBench(f) => {
            let c = f.resolve(Experiment::GmresBench)?;
            let r = run_gmres_bench(&c)?;
            let mut w = output(c.out.as_deref())?;
            write_bench(&mut w, &r.rows)?;
            w.flush()?;
            Ok(r.converged)
        }
        Command::HStudy(f) => {
            let c = f.resolve(Experiment::HStudy)?;
            let r = run_h_study(&c)?;
            for s in ["dirichlet", "neumann", "patch-test"] {
                if let Some(slope) = r.slope(s) {
                    eprintln!("h-study: {s} slope {slope:.3}");
                }
            }
            let mut w = output(c.out.as_deref())?;
            write_convergence(&mut w, &r.rows)?;
            w.flush()?;
            Ok(r.converged)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: a solve did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
