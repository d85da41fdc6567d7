//! Run orchestration shared by the command-line front end: config ingestion,
//! problem hashing, solution files, parameter sweeps and fiber tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy;
use crate::error::{Error, Result};
use crate::fiber::{self, FiberRoots, FiberShape};
use crate::form::{assemble_form, GagliardoForm};
use crate::problem::{validate_params, GridFunction, GridPair, ProblemSpec, ValidatedProblem};
use crate::solver::{self, Branch, DirectionBias, GapReport, SolutionReport, SolverOptions};
use crate::thresholds::{self, ConstantsReport, SEstimateOptions};
use crate::verify::{self, Check, CheckList, ResidualReport};

/// A problem file: the problem parameters plus optional solver overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(flatten)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// SHA-256 of the config serialized with sorted keys.
pub fn problem_hash(config: &Config) -> String {
    // serde_json maps are ordered by key, so the encoding is canonical
    let value = serde_json::to_value(config).expect("config is serializable");
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// A validated config with its assembled form.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: Config,
    pub problem: ValidatedProblem,
    pub form: GagliardoForm,
    pub hash: String,
}

pub fn prepare(config: &Config) -> Result<Prepared> {
    config.solver.check()?;
    let problem = validate_params(&config.problem)?;
    let form = assemble_form(problem.grid(), problem.s())?;
    Ok(Prepared {
        config: config.clone(),
        problem,
        form,
        hash: problem_hash(config),
    })
}

/// On-disk form of a [`SolutionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub branch: Branch,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    pub norm: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub t_used: f64,
    pub iters: usize,
    pub converged: bool,
    pub problem_hash: String,
}

impl SolutionFile {
    pub fn from_report(report: &SolutionReport, hash: &str) -> Self {
        Self {
            branch: report.branch,
            u: report.pair.u.0.clone(),
            w: report.pair.w.0.clone(),
            j: report.j,
            norm: report.norm,
            phi1: report.phi1,
            phi2: report.phi2,
            t_used: report.t_used,
            iters: report.iters,
            converged: report.converged,
            problem_hash: hash.to_string(),
        }
    }

    pub fn pair(&self) -> Result<GridPair> {
        GridPair::new(GridFunction(self.u.clone()), GridFunction(self.w.clone()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::ConfigParse(e.to_string()))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value is serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub problem_hash: String,
    pub constants: ConstantsReport,
    pub solutions: Vec<SolutionReport>,
    pub gap: Option<GapReport>,
    /// Phase name to wall-clock milliseconds.
    pub timings: BTreeMap<String, f64>,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn solution_candidates(solutions: &[&SolutionReport]) -> Vec<GridFunction> {
    solutions
        .iter()
        .flat_map(|r| [r.pair.u.clone(), r.pair.w.clone()])
        .collect()
}

/// Constants with the `S` estimate refined over the default candidates and
/// the components of `solutions`, so the estimate never exceeds their quotients.
pub fn constants_with(prep: &Prepared, solutions: &[&SolutionReport]) -> Result<ConstantsReport> {
    let extra = solution_candidates(solutions);
    let (report, _) = thresholds::compute_constants(
        &prep.problem,
        &prep.form,
        &extra,
        &SEstimateOptions::default(),
    )?;
    Ok(report)
}

/// Solves each requested branch; with both branches the gap report is
/// included when both converged.
pub fn run_solve(prep: &Prepared, branches: &[Branch]) -> Result<RunArtifacts> {
    let mut timings = BTreeMap::new();
    let mut solutions = Vec::new();
    for &branch in branches {
        let start = Instant::now();
        solutions.push(solver::solve_branch(
            &prep.problem,
            &prep.form,
            branch,
            &prep.config.solver,
        )?);
        timings.insert(format!("solve_{branch}"), ms(start));
    }
    let start = Instant::now();
    let refs: Vec<&SolutionReport> = solutions.iter().collect();
    let constants = constants_with(prep, &refs)?;
    timings.insert("constants".into(), ms(start));

    let plus = solutions.iter().find(|r| r.branch == Branch::Plus);
    let minus = solutions.iter().find(|r| r.branch == Branch::Minus);
    let gap = match (plus, minus) {
        (Some(p), Some(m)) if p.converged && m.converged => {
            Some(solver::gap_check(p, m, &constants)?)
        }
        _ => None,
    };
    Ok(RunArtifacts {
        problem_hash: prep.hash.clone(),
        constants,
        solutions,
        gap,
        timings,
    })
}

pub const SWEEP_HEADER: &str =
    "lambda,mu,Lambda,C,in_gamma,plus_converged,minus_converged,J_plus,J_minus,norm_plus,norm_minus,A0,A_lm,gap_ok";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "Lambda")]
    pub lambda_agg: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub in_gamma: bool,
    pub plus_converged: bool,
    pub minus_converged: bool,
    #[serde(rename = "J_plus")]
    pub j_plus: f64,
    #[serde(rename = "J_minus")]
    pub j_minus: f64,
    pub norm_plus: f64,
    pub norm_minus: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "A_lm")]
    pub a_lm: f64,
    pub gap_ok: bool,
}

impl SweepRow {
    fn failed(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            lambda_agg: f64::NAN,
            c: f64::NAN,
            in_gamma: false,
            plus_converged: false,
            minus_converged: false,
            j_plus: f64::NAN,
            j_minus: f64::NAN,
            norm_plus: f64::NAN,
            norm_minus: f64::NAN,
            a0: f64::NAN,
            a_lm: f64::NAN,
            gap_ok: false,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            self.mu,
            self.lambda_agg,
            self.c,
            self.in_gamma,
            self.plus_converged,
            self.minus_converged,
            self.j_plus,
            self.j_minus,
            self.norm_plus,
            self.norm_minus,
            self.a0,
            self.a_lm,
            self.gap_ok
        )
    }
}

fn sweep_point(prep: &Prepared, lambda: f64, mu: f64) -> SweepRow {
    let Ok(problem) = prep.problem.with_parameters(lambda, mu) else {
        return SweepRow::failed(lambda, mu);
    };
    let opts = &prep.config.solver;
    let plus = solver::solve_branch(&problem, &prep.form, Branch::Plus, opts).ok();
    let minus = solver::solve_branch(&problem, &prep.form, Branch::Minus, opts).ok();
    let sols: Vec<&SolutionReport> = [plus.as_ref(), minus.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    let point = Prepared {
        problem,
        ..prep.clone()
    };
    let Ok(constants) = constants_with(&point, &sols) else {
        return SweepRow::failed(lambda, mu);
    };
    let conv = |r: &Option<SolutionReport>| r.as_ref().is_some_and(|r| r.converged);
    let val =
        |r: &Option<SolutionReport>, f: fn(&SolutionReport) -> f64| r.as_ref().map_or(f64::NAN, f);
    let gap_ok = match (&plus, &minus) {
        (Some(p), Some(m)) if p.converged && m.converged => {
            solver::gap_from_norms(p.norm, m.norm, constants.a0, constants.a_lm).ordering_ok
        }
        _ => false,
    };
    SweepRow {
        lambda,
        mu,
        lambda_agg: constants.lambda_agg,
        c: constants.c,
        in_gamma: constants.in_gamma,
        plus_converged: conv(&plus),
        minus_converged: conv(&minus),
        j_plus: val(&plus, |r| r.j),
        j_minus: val(&minus, |r| r.j),
        norm_plus: val(&plus, |r| r.norm),
        norm_minus: val(&minus, |r| r.norm),
        a0: constants.a0,
        a_lm: constants.a_lm,
        gap_ok,
    }
}

/// One row per `(lambda, mu)`, sorted by `(lambda, mu)`. Points run
/// concurrently on at most `jobs` threads; a failing point is recorded with
/// `NaN` values and false flags.
pub fn run_sweep(
    prep: &Prepared,
    lambdas: &[f64],
    mus: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || mus.is_empty() {
        return Err(Error::InvalidOption("sweep grids must be nonempty".into()));
    }
    let mut points: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| mus.iter().map(move |&m| (l, m)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidOption(e.to_string()))?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&(l, m)| sweep_point(prep, l, m))
            .collect()
    }))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// `(t, phi, dphi, psi)` samples along one seeded direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberTable {
    pub roots: FiberRoots,
    pub rows: Vec<[f64; 4]>,
}

pub fn fiber_table(
    prep: &Prepared,
    seed: u64,
    bias: DirectionBias,
    t_lo: f64,
    t_hi: f64,
    samples: usize,
) -> Result<FiberTable> {
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::InvalidOption(format!(
            "need 0 < t_lo < t_hi, got {t_lo}, {t_hi}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidOption(format!(
            "samples must be at least 2, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = solver::initial_direction(&prep.problem, bias, &mut rng, false)?;
    let stats = energy::pair_stats(&prep.problem, &prep.form, &dir)?;
    let shape = FiberShape::of(&prep.problem);
    let roots = fiber::project(&stats, shape, prep.config.solver.root_tol)?;
    let (a, b) = (t_lo.ln(), t_hi.ln());
    let rows = (0..samples)
        .map(|i| {
            let t = if i == 0 {
                t_lo
            } else if i + 1 == samples {
                t_hi
            } else {
                (a + (b - a) * i as f64 / (samples - 1) as f64).exp()
            };
            let (phi, dphi, _) = energy::phi_from_stats(&stats, shape.q, shape.ab, t)?;
            Ok([t, phi, dphi, fiber::psi(&stats, shape, t)?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiberTable { roots, rows })
}

pub fn write_fiber_csv<W: Write>(table: &FiberTable, mut out: W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
    writeln!(
        out,
        "# t1={},t2={},t_max={}",
        opt(table.roots.t1),
        opt(table.roots.t2),
        table.roots.t_max
    )?;
    writeln!(out, "t,phi,dphi,psi")?;
    for r in &table.rows {
        writeln!(out, "{},{},{},{}", r[0], r[1], r[2], r[3])?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub problem_hash_match: bool,
    #[serde(rename = "J_stored")]
    pub j_stored: f64,
    #[serde(rename = "J_recomputed")]
    pub j_recomputed: f64,
    #[serde(rename = "S")]
    pub s_est: f64,
    pub residual: ResidualReport,
    pub checks: CheckList,
    pub passed: bool,
}

/// Relative tolerance for the stored energy against its recomputation.
pub const ROUNDTRIP_TOL: f64 = 1e-12;

/// Recomputes the energy, the masked residual at `delta = 1e-4 max(u)` and
/// the inequality suite for a stored solution.
pub fn verify_solution(prep: &Prepared, sol: &SolutionFile) -> Result<VerifyReport> {
    let pair = sol.pair()?;
    let parts = energy::energy(&prep.problem, &prep.form, &pair)?;
    let extra = [pair.u.clone(), pair.w.clone()];
    let (constants, _) = thresholds::compute_constants(
        &prep.problem,
        &prep.form,
        &extra,
        &SEstimateOptions::default(),
    )?;
    let delta = 1e-4 * pair.u.max().max(pair.w.max());
    let residual = verify::weak_residual(&prep.problem, &prep.form, &pair, delta)?;
    let mut checks = verify::inequality_suite(&prep.problem, &prep.form, &pair, constants.s_est)?;
    let rel = (parts.j - sol.j).abs() / parts.j.abs().max(f64::MIN_POSITIVE);
    checks.checks.push(Check {
        name: "J_roundtrip".into(),
        lhs: rel,
        rhs: ROUNDTRIP_TOL,
        passed: rel <= ROUNDTRIP_TOL,
    });
    Ok(VerifyReport {
        problem_hash_match: sol.problem_hash == prep.hash,
        j_stored: sol.j,
        j_recomputed: parts.j,
        s_est: constants.s_est,
        residual,
        passed: checks.all_passed(),
        checks,
    })
}
