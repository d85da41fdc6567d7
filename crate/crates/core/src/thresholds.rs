//! Explicit constants: `q*`, weight norms, the aggregate `Lambda`, a discrete
//! Sobolev constant estimate, the admissibility threshold `C`, the
//! coefficient `E`, the gap radii and the coercivity floor.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{center_hat, GagliardoForm};
use crate::problem::{GridFunction, GridSpec, ValidatedProblem};

/// `(alpha + beta) / (alpha + beta - 1 + q)`.
pub fn q_star(alpha: f64, beta: f64, q: f64) -> f64 {
    let ab = alpha + beta;
    ab / (ab - 1.0 + q)
}

/// `(sum_i w_i |f_i|^r)^{1/r}`.
pub fn weight_norm(r: f64, f: &GridFunction, weights: &[f64]) -> f64 {
    let sum: f64 = weights
        .iter()
        .zip(&f.0)
        .map(|(w, v)| w * v.abs().powf(r))
        .sum();
    sum.powf(1.0 / r)
}

/// `(|lambda| |f|)^{2/(1+q)} + (|mu| |g|)^{2/(1+q)}`.
pub fn lambda_aggregate(lambda: f64, mu: f64, f_norm: f64, g_norm: f64, q: f64) -> f64 {
    let e = 2.0 / (1.0 + q);
    (lambda.abs() * f_norm).powf(e) + (mu.abs() * g_norm).powf(e)
}

/// `|u|^2 / (sum_i w_i |u_i|^r)^{2/r}`.
pub fn sobolev_quotient(form: &GagliardoForm, u: &GridFunction, r: f64) -> Result<f64> {
    let num = form.seminorm_sq(u)?;
    let den = weight_norm(r, u, &form.quad_weights);
    Ok(num / (den * den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEstimateOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SEstimateOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SEstimate {
    pub value: f64,
    /// Quotient of each supplied candidate before refinement.
    pub candidate_quotients: Vec<f64>,
    /// Refined minimizer of the best run.
    pub best: GridFunction,
}

/// Decreases the Sobolev quotient starting from `u` by preconditioned descent;
/// the full step is the nonlinear inverse iteration `u <- G^{-1}(w |u|^{r-2} u)`.
pub fn refine_quotient(
    form: &GagliardoForm,
    u: &GridFunction,
    r: f64,
    opts: &SEstimateOptions,
) -> Result<(f64, GridFunction)> {
    let norm_max = |v: &GridFunction| v.0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut cur = u.scaled(1.0 / norm_max(u));
    let mut value = sobolev_quotient(form, &cur, r)?;
    let wq = &form.quad_weights;
    for _ in 0..opts.max_iters {
        let num = form.seminorm_sq(&cur)?;
        let den: f64 = wq
            .iter()
            .zip(&cur.0)
            .map(|(w, v)| w * v.abs().powf(r))
            .sum();
        let rhs = GridFunction(
            wq.iter()
                .zip(&cur.0)
                .map(|(w, v)| w * v.abs().powf(r - 2.0) * v)
                .collect(),
        );
        let v = form.solve(&rhs)?.scaled(num / den);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-6 {
            let trial = GridFunction(
                cur.0
                    .iter()
                    .zip(&v.0)
                    .map(|(a, b)| (1.0 - step) * a + step * b)
                    .collect(),
            );
            let m = norm_max(&trial);
            if m > 0.0 {
                let trial = trial.scaled(1.0 / m);
                let tv = sobolev_quotient(form, &trial, r)?;
                if tv < value {
                    accepted = Some((tv, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((tv, trial)) => {
                let done = value - tv <= opts.tol * value;
                value = tv;
                cur = trial;
                if done {
                    break;
                }
            }
            None => break,
        }
    }
    Ok((value, cur))
}

/// Minimum of the Sobolev quotient over the candidates, each refined by
/// descent. Never exceeds the quotient of any supplied candidate.
pub fn estimate_s(
    form: &GagliardoForm,
    r: f64,
    candidates: &[GridFunction],
    opts: &SEstimateOptions,
) -> Result<SEstimate> {
    let usable: Vec<&GridFunction> = candidates
        .iter()
        .filter(|c| c.0.iter().any(|&v| v != 0.0))
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let candidate_quotients = usable
        .iter()
        .map(|c| sobolev_quotient(form, c, r))
        .collect::<Result<Vec<_>>>()?;
    let refined = usable
        .par_iter()
        .map(|c| refine_quotient(form, c, r, opts))
        .collect::<Result<Vec<_>>>()?;
    // deterministic reduction: first minimum in candidate order
    let mut best = 0;
    for (i, (v, _)) in refined.iter().enumerate() {
        if *v < refined[best].0 {
            best = i;
        }
    }
    let min_candidate = candidate_quotients
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let value = refined[best].0.min(min_candidate);
    Ok(SEstimate {
        value,
        candidate_quotients,
        best: refined[best].1.clone(),
    })
}

/// Seed family: the center hat, a cosine bump and the boundary profile
/// `(1 - xhat^2)^s`.
pub fn default_candidates(grid: &GridSpec, s: f64) -> Vec<GridFunction> {
    let n = grid.cells;
    let xhat = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;
    let bump = GridFunction(
        (0..=n)
            .map(|i| (0.5 * PI * xhat(i)).cos().powi(2))
            .collect(),
    );
    let profile = GridFunction(
        (0..=n)
            .map(|i| (1.0 - xhat(i) * xhat(i)).max(0.0).powf(s))
            .collect(),
    );
    let mut bump = bump;
    bump.0[0] = 0.0;
    bump.0[n] = 0.0;
    vec![center_hat(grid), bump, profile]
}

fn check_positive_s(s: f64) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::NonpositiveS(s));
    }
    Ok(())
}

fn check_positive_b(b_sup: f64) -> Result<()> {
    if !(b_sup > 0.0) {
        return Err(Error::NonpositiveBSup(b_sup));
    }
    Ok(())
}

/// The admissibility threshold: `(lambda, mu)` is admissible iff `0 < Lambda < C`.
pub fn threshold_c(alpha: f64, beta: f64, q: f64, s: f64, b_sup: f64) -> Result<f64> {
    check_positive_s(s)?;
    check_positive_b(b_sup)?;
    let ab = alpha + beta;
    let top = ab - 1.0 + q;
    Ok(((1.0 + q) / top).powf(2.0 / (ab - 2.0))
        * ((ab - 2.0) / top).powf(2.0 / (1.0 + q))
        * (1.0 / b_sup).powf(2.0 / (ab - 2.0))
        * s.powf(2.0 * top / ((1.0 + q) * (ab - 2.0))))
}

/// `(A0, A_lm)`: elements of the minus branch have norm above `A0`, elements
/// of the plus branch below `A_lm`.
pub fn gap_radii(
    alpha: f64,
    beta: f64,
    q: f64,
    s: f64,
    b_sup: f64,
    lambda_agg: f64,
) -> Result<(f64, f64)> {
    check_positive_s(s)?;
    check_positive_b(b_sup)?;
    let ab = alpha + beta;
    let top = ab - 1.0 + q;
    let a0 = ((1.0 + q) / (top * b_sup) * s.powf(0.5 * ab)).powf(1.0 / (ab - 2.0));
    let a_lm = (top / (ab - 2.0) * s.powf(-0.5 * (1.0 - q))).powf(1.0 / (1.0 + q))
        * lambda_agg.max(0.0).sqrt();
    Ok((a0, a_lm))
}

/// Lower bound coefficient of `psi(t_max) >= E |z|^{alpha+beta}`.
pub fn e_coefficient(
    alpha: f64,
    beta: f64,
    q: f64,
    s: f64,
    b_sup: f64,
    lambda_agg: f64,
) -> Result<f64> {
    check_positive_s(s)?;
    if !(lambda_agg > 0.0) {
        return Err(Error::NonpositiveLambda(lambda_agg));
    }
    let ab = alpha + beta;
    let top = ab - 1.0 + q;
    let ex = (ab - 2.0) / (1.0 + q);
    let ratio = s.powf(0.5 * (1.0 - q)) / lambda_agg.powf(0.5 * (1.0 + q));
    Ok((1.0 + q) / top * ((ab - 2.0) / top).powf(ex) * ratio.powf(ex) - b_sup * s.powf(-0.5 * ab))
}

/// The closed-form energy floor on the manifold as displayed with the
/// coercivity argument. It does not coincide with [`rho_min`] evaluated at
/// the constants of [`coercivity_constants`]; see [`coercivity_floor`].
pub fn energy_lower_bound(alpha: f64, beta: f64, q: f64, s: f64, lambda_agg: f64) -> Result<f64> {
    check_positive_s(s)?;
    let ab = alpha + beta;
    Ok(-(1.0 + q) * (ab - 2.0) / ((1.0 - q) * ab)
        * ((ab - 1.0 + q) / (2.0 * (ab - 2.0))).powf(2.0 / (1.0 + q))
        * lambda_agg
        * s.powf(-(1.0 - q) / (1.0 + q)))
}

/// `rho(t) = c t^2 - d t^{1-q}`.
pub fn rho(c: f64, d: f64, q: f64, t: f64) -> f64 {
    c * t * t - d * t.powf(1.0 - q)
}

/// Minimizer and minimum of [`rho`].
pub fn rho_min(c: f64, d: f64, q: f64) -> (f64, f64) {
    let t_min = (d * (1.0 - q) / (2.0 * c)).powf(1.0 / (1.0 + q));
    (t_min, rho(c, d, q, t_min))
}

/// `(c, d)` with `J(z) >= c |z|^2 - d |z|^{1-q}` on the manifold.
pub fn coercivity_constants(alpha: f64, beta: f64, q: f64, s: f64, lambda_agg: f64) -> (f64, f64) {
    let ab = alpha + beta;
    let c = 0.5 - 1.0 / ab;
    let d =
        (1.0 / (1.0 - q) - 1.0 / ab) * lambda_agg.powf(0.5 * (1.0 + q)) * s.powf(-0.5 * (1.0 - q));
    (c, d)
}

/// `min rho` for the coercivity constants: a valid lower bound of `J` on the manifold.
pub fn coercivity_floor(alpha: f64, beta: f64, q: f64, s: f64, lambda_agg: f64) -> Result<f64> {
    check_positive_s(s)?;
    if lambda_agg == 0.0 {
        return Ok(0.0);
    }
    let (c, d) = coercivity_constants(alpha, beta, q, s, lambda_agg);
    Ok(rho_min(c, d, q).1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub q_star: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub b_sup: f64,
    #[serde(rename = "Lambda")]
    pub lambda_agg: f64,
    #[serde(rename = "S")]
    pub s_est: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "A_lm")]
    pub a_lm: f64,
    /// `min rho` with the coercivity constants.
    #[serde(rename = "J_lower")]
    pub j_lower: f64,
    /// [`energy_lower_bound`], reported alongside.
    #[serde(rename = "J_lower_closed_form")]
    pub j_lower_closed_form: f64,
    /// Coupled constant estimate; informational.
    #[serde(rename = "S_bar")]
    pub s_bar: f64,
    pub in_gamma: bool,
}

/// Estimate of the coupled constant over pairs `(v, c v)` built from the
/// refined Sobolev minimizer, with the scaling `c` chosen optimally.
pub fn estimate_s_bar(alpha: f64, beta: f64, s_est: f64) -> f64 {
    let ab = alpha + beta;
    let c = (beta / alpha).sqrt();
    (1.0 + c * c) * c.powf(-2.0 * beta / ab) * s_est
}

/// All constants for `problem` given an estimate of `S`.
pub fn constants_report(problem: &ValidatedProblem, s_est: f64) -> Result<ConstantsReport> {
    let (a, b, q) = (problem.alpha(), problem.beta(), problem.q());
    let qs = q_star(a, b, q);
    let f_norm = weight_norm(qs, &problem.f, &problem.weights);
    let g_norm = weight_norm(qs, &problem.g, &problem.weights);
    let b_sup = problem.b_sup();
    let lambda_agg = lambda_aggregate(problem.lambda(), problem.mu(), f_norm, g_norm, q);
    let c = threshold_c(a, b, q, s_est, b_sup)?;
    let e = e_coefficient(a, b, q, s_est, b_sup, lambda_agg)?;
    let (a0, a_lm) = gap_radii(a, b, q, s_est, b_sup, lambda_agg)?;
    Ok(ConstantsReport {
        q_star: qs,
        f_norm,
        g_norm,
        b_sup,
        lambda_agg,
        s_est,
        c,
        e,
        a0,
        a_lm,
        j_lower: coercivity_floor(a, b, q, s_est, lambda_agg)?,
        j_lower_closed_form: energy_lower_bound(a, b, q, s_est, lambda_agg)?,
        s_bar: estimate_s_bar(a, b, s_est),
        in_gamma: lambda_agg > 0.0 && lambda_agg < c,
    })
}

/// `S` estimate from the default candidates plus `extra`, then the report.
pub fn compute_constants(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    extra: &[GridFunction],
    opts: &SEstimateOptions,
) -> Result<(ConstantsReport, SEstimate)> {
    let mut candidates = default_candidates(problem.grid(), problem.s());
    candidates.extend(extra.iter().cloned());
    let est = estimate_s(form, problem.ab(), &candidates, opts)?;
    Ok((constants_report(problem, est.value)?, est))
}
