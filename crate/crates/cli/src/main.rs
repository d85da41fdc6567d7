use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nehari_core::harness::{self, Config, Prepared, SolutionFile};
use nehari_core::solver::{Branch, DirectionBias};
use nehari_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "nehari-frac",
    version,
    about = "Two-branch Nehari solver for a singular fractional system on an interval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Plus,
    Minus,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    Any,
    PositiveB,
    NonPositiveB,
}

impl From<BiasArg> for DirectionBias {
    fn from(b: BiasArg) -> Self {
        match b {
            BiasArg::Any => DirectionBias::Any,
            BiasArg::PositiveB => DirectionBias::PositiveB,
            BiasArg::NonPositiveB => DirectionBias::NonPositiveB,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the explicit constants for a config as JSON.
    Constants {
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimize the energy on one or both manifold branches.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        branch: BranchArg,
        /// Overrides the solver seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for solution_<branch>.json and gap.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Exit 0 even if a branch did not converge.
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// Solve both branches over a (lambda, mu) grid and write a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated lambda values.
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_grid: Vec<f64>,
        /// Comma-separated mu values.
        #[arg(long, value_delimiter = ',', required = true)]
        mu_grid: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "NEHARI_FRAC_JOBS")]
        jobs: Option<usize>,
    },
    /// Sample the fiber map along a seeded direction.
    Fiber {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "positive-b")]
        direction: BiasArg,
        #[arg(long, default_value_t = 1e-3)]
        t_lo: f64,
        #[arg(long, default_value_t = 1e3)]
        t_hi: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stored solution: energy round trip, residual and inequalities.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Assemble the quadratic form and optionally dump it as CSV.
    Assemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Unconverged,
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse(_) => 2,
        Error::InvalidExponent(_)
        | Error::InvalidOrder(_)
        | Error::WeightSignViolation(_)
        | Error::ZeroParameters
        | Error::InvalidGrid(_)
        | Error::SampleLengthMismatch { .. }
        | Error::NonFiniteWeight(_)
        | Error::GridMismatch { .. }
        | Error::InvalidOption(_) => 3,
        Error::NoAdmissibleDirection | Error::DirectionSearchFailed(_) => 4,
        Error::NotConverged | Error::NotConvergedInput => 5,
        _ => 1,
    }
}

fn load(path: &Path) -> Result<Prepared, Failure> {
    Ok(harness::prepare(&Config::load(path)?)?)
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    io::stdout().write_all(harness::to_json(value).as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Constants { config } => {
            let prep = load(&config)?;
            print_json(&harness::constants_with(&prep, &[])?)
        }
        Command::Solve {
            config,
            branch,
            seed,
            out,
            allow_unconverged,
        } => {
            let mut cfg = Config::load(&config)?;
            if let Some(seed) = seed {
                cfg.solver.seed = seed;
            }
            let prep = harness::prepare(&cfg)?;
            let branches: &[Branch] = match branch {
                BranchArg::Plus => &[Branch::Plus],
                BranchArg::Minus => &[Branch::Minus],
                BranchArg::Both => &[Branch::Plus, Branch::Minus],
            };
            let art = harness::run_solve(&prep, branches)?;
            std::fs::create_dir_all(&out)?;
            let mut files = Vec::new();
            for sol in &art.solutions {
                let path = out.join(format!("solution_{}.json", sol.branch));
                harness::write_json(&path, &SolutionFile::from_report(sol, &art.problem_hash))?;
                files.push(path.display().to_string());
            }
            if let Some(gap) = &art.gap {
                let path = out.join("gap.json");
                harness::write_json(&path, gap)?;
                files.push(path.display().to_string());
            }
            let summary: Vec<_> = art
                .solutions
                .iter()
                .map(|s| json!({"branch": s.branch, "J": s.j, "norm": s.norm, "phi2": s.phi2, "iters": s.iters, "converged": s.converged}))
                .collect();
            print_json(&json!({
                "problem_hash": art.problem_hash,
                "constants": art.constants,
                "solutions": summary,
                "gap": art.gap,
                "files": files,
                "timings_ms": art.timings,
            }))?;
            if !allow_unconverged && art.solutions.iter().any(|s| !s.converged) {
                return Err(Failure::Unconverged);
            }
            Ok(())
        }
        Command::Sweep {
            config,
            lambda_grid,
            mu_grid,
            out,
            jobs,
        } => {
            let prep = load(&config)?;
            let jobs =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = harness::run_sweep(&prep, &lambda_grid, &mu_grid, jobs)?;
            let mut w = BufWriter::new(File::create(&out)?);
            harness::write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Fiber {
            config,
            seed,
            direction,
            t_lo,
            t_hi,
            samples,
            out,
        } => {
            let prep = load(&config)?;
            let table = harness::fiber_table(&prep, seed, direction.into(), t_lo, t_hi, samples)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    harness::write_fiber_csv(&table, &mut w)?;
                    w.flush()?;
                }
                None => harness::write_fiber_csv(&table, io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Verify { config, solution } => {
            let prep = load(&config)?;
            let sol = SolutionFile::load(&solution)?;
            let report = harness::verify_solution(&prep, &sol)?;
            print_json(&report)?;
            if !report.passed {
                return Err(Failure::Checks);
            }
            Ok(())
        }
        Command::Assemble {
            config,
            dump_matrix,
        } => {
            let prep = load(&config)?;
            if let Some(path) = &dump_matrix {
                let mut w = BufWriter::new(File::create(path)?);
                prep.form.write_csv(&mut w)?;
                w.flush()?;
            }
            let hat = nehari_core::form::center_hat(prep.problem.grid());
            print_json(&json!({
                "N": prep.problem.grid().cells,
                "s": prep.problem.s(),
                "interior_nodes": prep.form.matrix.nrows(),
                "center_hat_norm_sq": prep.form.seminorm_sq(&hat)?,
                "matrix": dump_matrix.map(|p| p.display().to_string()),
            }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Unconverged) => {
            eprintln!("error: {}", Error::NotConverged);
            ExitCode::from(5)
        }
        Err(Failure::Checks) => {
            eprintln!("error: verification failed");
            ExitCode::from(1)
        }
    }
}
