//! Energy minimization on the two Nehari branches.
//!
//! Each iterate lives on the chosen branch: a nonnegative direction is scaled
//! by its fiber root (`t1` for the plus branch, `t2` for the minus branch),
//! a preconditioned gradient step is taken from the projected point, negative
//! entries are clipped and the result is projected again. A step is accepted
//! only if it lowers the energy; otherwise the step length is halved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, PairStats};
use crate::error::{Error, Result};
use crate::fiber::{self, FiberCase, FiberShape};
use crate::form::GagliardoForm;
use crate::problem::{GridFunction, GridPair, ValidatedProblem};
use crate::thresholds::ConstantsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub step: f64,
    pub tol_energy: f64,
    pub tol_manifold: f64,
    pub eps_singular: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Start every restart from `u = w`.
    pub symmetric_seed: bool,
    /// Relative bisection tolerance for fiber roots.
    pub root_tol: f64,
    /// Keep every accepted iterate of the winning restart.
    #[serde(skip)]
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step: 0.1,
            tol_energy: 1e-10,
            tol_manifold: 1e-8,
            eps_singular: 1e-8,
            seed: 0,
            restarts: 8,
            symmetric_seed: false,
            root_tol: 1e-12,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("tol_energy", self.tol_energy),
            ("tol_manifold", self.tol_manifold),
            ("eps_singular", self.eps_singular),
            ("root_tol", self.root_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidOption(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidOption(
                "max_iters and restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub j: f64,
    pub stats: PairStats,
    pub pair: Option<GridPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub branch: Branch,
    pub pair: GridPair,
    #[serde(rename = "J")]
    pub j: f64,
    pub norm: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub t_used: f64,
    pub iters: usize,
    pub converged: bool,
    pub restarts_used: usize,
    #[serde(skip)]
    pub trace: Vec<IterateRecord>,
}

impl SolutionReport {
    /// `|phi'(1)|` relative to `|z|^2 + |K| + |B|`.
    pub fn manifold_residual(
        &self,
        problem: &ValidatedProblem,
        form: &GagliardoForm,
    ) -> Result<f64> {
        let st = energy::pair_stats(problem, form, &self.pair)?;
        Ok(self.phi1.abs() / st.scale())
    }
}

/// Where an initial direction concentrates relative to the sign of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionBias {
    /// Positive everywhere inside the interval.
    Any,
    /// Concentrated where `b > 0`, with `B > 0`.
    PositiveB,
    /// Supported where `b <= 0`, so `B <= 0`.
    NonPositiveB,
}

impl From<Branch> for DirectionBias {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Plus => DirectionBias::Any,
            Branch::Minus => DirectionBias::PositiveB,
        }
    }
}

const DIRECTION_SAMPLES: usize = 1000;

/// A seeded nonnegative direction with `K > 0`. Deterministic given the rng state.
pub fn initial_direction(
    problem: &ValidatedProblem,
    bias: DirectionBias,
    rng: &mut ChaCha8Rng,
    symmetric: bool,
) -> Result<GridPair> {
    let n = problem.grid().cells;
    let xhat = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;
    let bump = |c: f64, wid: f64, i: usize| {
        let z = (xhat(i) - c) / wid;
        (1.0 - z * z).max(0.0)
    };
    let base = |i: usize| 1.0 - xhat(i) * xhat(i);
    let b = &problem.b.0;
    let region: Vec<usize> = match bias {
        DirectionBias::Any => (1..n).collect(),
        DirectionBias::PositiveB => (1..n).filter(|&i| b[i] > 0.0).collect(),
        DirectionBias::NonPositiveB => (1..n).filter(|&i| b[i] <= 0.0).collect(),
    };
    if region.is_empty() {
        return Err(Error::DirectionSearchFailed(0));
    }

    for _ in 0..DIRECTION_SAMPLES {
        let c = xhat(region[rng.gen_range(0..region.len())]);
        let component = |rng: &mut ChaCha8Rng| -> GridFunction {
            let amp = rng.gen_range(0.5..1.5);
            let mut v = vec![0.0; n + 1];
            match bias {
                DirectionBias::Any => {
                    let c = rng.gen_range(-0.6..0.6);
                    let wid = rng.gen_range(0.3..0.9);
                    let floor = rng.gen_range(0.1..0.3);
                    for (i, vi) in v.iter_mut().enumerate().take(n).skip(1) {
                        *vi = floor * base(i) + amp * bump(c, wid, i);
                    }
                }
                DirectionBias::PositiveB => {
                    let wid = rng.gen_range(0.2..0.6);
                    let floor = rng.gen_range(0.01..0.05);
                    for (i, vi) in v.iter_mut().enumerate().take(n).skip(1) {
                        *vi = floor * base(i) + amp * bump(c, wid, i);
                    }
                }
                DirectionBias::NonPositiveB => {
                    let wid = rng.gen_range(0.1..0.5);
                    for (i, vi) in v.iter_mut().enumerate().take(n).skip(1) {
                        if b[i] <= 0.0 {
                            *vi = amp * bump(c, wid, i);
                        }
                    }
                }
            }
            GridFunction(v)
        };
        let u = component(rng);
        let w = if symmetric { u.clone() } else { component(rng) };
        let pair = GridPair { u, w };
        let k = energy::k_value(problem, &pair)?;
        let bv = energy::b_value(problem, &pair)?;
        let ok = k > 0.0
            && match bias {
                DirectionBias::Any => true,
                DirectionBias::PositiveB => bv > 0.0,
                DirectionBias::NonPositiveB => bv <= 0.0,
            };
        if ok {
            return Ok(pair);
        }
    }
    Err(Error::DirectionSearchFailed(DIRECTION_SAMPLES))
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(restart as u64)
        .rotate_left(17)
        ^ 0xD1B5_4A32_D192_ED03
}

/// Scaling of `stats` onto `branch`, or `None` when the fiber has no root there.
fn branch_root(
    stats: &PairStats,
    shape: FiberShape,
    branch: Branch,
    tol: f64,
) -> Result<Option<f64>> {
    if !(stats.norm2 > 0.0 && stats.k > 0.0) {
        return Ok(None);
    }
    let roots = fiber::project(stats, shape, tol)?;
    Ok(match (branch, roots.case) {
        (_, FiberCase::NoAdmissibleRoot) => None,
        (Branch::Plus, _) => roots.t1,
        (Branch::Minus, FiberCase::TwoRoots) => roots.t2,
        (Branch::Minus, FiberCase::SingleRoot) => None,
    })
}

struct Projected {
    pair: GridPair,
    stats: PairStats,
    j: f64,
    t: f64,
}

fn project_onto(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    dir: &GridPair,
    branch: Branch,
    tol: f64,
) -> Result<Option<Projected>> {
    let shape = FiberShape::of(problem);
    let stats = energy::pair_stats(problem, form, dir)?;
    let Some(t) = branch_root(&stats, shape, branch, tol)? else {
        return Ok(None);
    };
    let pair = dir.scaled(t);
    let stats = energy::pair_stats(problem, form, &pair)?;
    let j = energy::energy_from_stats(&stats, shape.q, shape.ab);
    Ok(Some(Projected { pair, stats, j, t }))
}

struct RestartOutcome {
    report: SolutionReport,
    residual: f64,
}

fn run_restart(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    branch: Branch,
    opts: &SolverOptions,
    restart: usize,
) -> Result<Option<RestartOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(opts.seed, restart));
    let dir = initial_direction(problem, branch.into(), &mut rng, opts.symmetric_seed)?;
    let Some(mut cur) = project_onto(problem, form, &dir, branch, opts.root_tol)? else {
        return Ok(None);
    };
    let mut trace = Vec::new();
    let record = |cur: &Projected, trace: &mut Vec<IterateRecord>| {
        trace.push(IterateRecord {
            j: cur.j,
            stats: cur.stats,
            pair: opts.record_iterates.then(|| cur.pair.clone()),
        });
    };
    record(&cur, &mut trace);

    let min_step = opts.step * 1e-12;
    let mut converged = false;
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let grad = energy::energy_gradient(problem, form, &cur.pair, opts.eps_singular)?;
        let du = form.solve(&grad.u)?;
        let dw = form.solve(&grad.w)?;
        let mut step = opts.step;
        let mut next = None;
        while step >= min_step {
            let trial = GridPair {
                u: GridFunction(
                    cur.pair
                        .u
                        .0
                        .iter()
                        .zip(&du.0)
                        .map(|(p, d)| (p - step * d).max(0.0))
                        .collect(),
                ),
                w: GridFunction(
                    cur.pair
                        .w
                        .0
                        .iter()
                        .zip(&dw.0)
                        .map(|(p, d)| (p - step * d).max(0.0))
                        .collect(),
                ),
            };
            if let Some(cand) = project_onto(problem, form, &trial, branch, opts.root_tol)? {
                if cand.j < cur.j {
                    next = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(cand) = next else {
            // no decrease is representable along the descent direction
            converged = true;
            break;
        };
        let decrease = (cur.j - cand.j) / cur.j.abs().max(f64::MIN_POSITIVE);
        cur = cand;
        record(&cur, &mut trace);
        if decrease < opts.tol_energy {
            converged = true;
            break;
        }
    }

    let shape = FiberShape::of(problem);
    let (_, phi1, phi2) = energy::phi_from_stats(&cur.stats, shape.q, shape.ab, 1.0)?;
    let residual = phi1.abs() / cur.stats.scale();
    let branch_ok = match branch {
        Branch::Plus => phi2 > 0.0,
        Branch::Minus => phi2 < 0.0,
    };
    let converged = converged && branch_ok && residual <= opts.tol_manifold;
    Ok(Some(RestartOutcome {
        report: SolutionReport {
            branch,
            norm: cur.stats.norm2.sqrt(),
            pair: cur.pair,
            j: cur.j,
            phi1,
            phi2,
            t_used: cur.t,
            iters,
            converged,
            restarts_used: 0,
            trace,
        },
        residual,
    }))
}

/// Minimizes the energy over one branch; the best restart wins (lowest
/// energy, then lowest manifold residual, then fewest iterations).
pub fn solve_branch(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    branch: Branch,
    opts: &SolverOptions,
) -> Result<SolutionReport> {
    opts.check()?;
    let outcomes = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(problem, form, branch, opts, r))
        .collect::<Result<Vec<_>>>()?;
    let finished: Vec<RestartOutcome> = outcomes.into_iter().flatten().collect();
    let used = finished.len();
    let mut best: Option<RestartOutcome> = None;
    for cand in finished {
        let better = match &best {
            None => true,
            Some(b) => {
                let key = |o: &RestartOutcome| {
                    (!o.report.converged, o.report.j, o.residual, o.report.iters)
                };
                let (kc, kb) = (key(&cand), key(b));
                kc.partial_cmp(&kb) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let mut best = best.ok_or(Error::NoAdmissibleDirection)?.report;
    best.restarts_used = used;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub norm_plus: f64,
    pub norm_minus: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "A_lm")]
    pub a_lm: f64,
    pub ordering_ok: bool,
}

/// Checks `|Z-| > A0 > A_lm > |z+|` strictly.
pub fn gap_check(
    plus: &SolutionReport,
    minus: &SolutionReport,
    constants: &ConstantsReport,
) -> Result<GapReport> {
    if !(plus.converged && minus.converged) {
        return Err(Error::NotConvergedInput);
    }
    Ok(gap_from_norms(
        plus.norm,
        minus.norm,
        constants.a0,
        constants.a_lm,
    ))
}

pub fn gap_from_norms(norm_plus: f64, norm_minus: f64, a0: f64, a_lm: f64) -> GapReport {
    GapReport {
        norm_plus,
        norm_minus,
        a0,
        a_lm,
        ordering_ok: norm_minus > a0 && a0 > a_lm && a_lm > norm_plus,
    }
}
