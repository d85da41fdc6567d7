//! The energy functional, its singular and coupling integrals, a regularized
//! gradient and the fiber map `t -> J(tu, tw)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::GagliardoForm;
use crate::problem::{GridFunction, GridPair, ValidatedProblem};

/// The three scalars every fiber computation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    /// `|(u, w)|^2`
    pub norm2: f64,
    /// `lambda int f u+^{1-q} + mu int g w+^{1-q}`
    pub k: f64,
    /// `int b u+^alpha w+^beta`
    pub b: f64,
}

impl PairStats {
    pub fn scale(&self) -> f64 {
        self.norm2.abs() + self.k.abs() + self.b.abs()
    }

    /// Stats of `t * pair`, from the homogeneity of each part.
    pub fn scaled(&self, t: f64, q: f64, ab: f64) -> Self {
        Self {
            norm2: t * t * self.norm2,
            k: t.powf(1.0 - q) * self.k,
            b: t.powf(ab) * self.b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub norm2: f64,
    pub k: f64,
    pub b: f64,
    pub j: f64,
}

pub(crate) fn check_pair(problem: &ValidatedProblem, pair: &GridPair) -> Result<()> {
    let n = problem.nodes();
    for len in [pair.u.len(), pair.w.len()] {
        if len != n {
            return Err(Error::GridMismatch {
                expected: n,
                got: len,
            });
        }
    }
    Ok(())
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

pub fn k_value(problem: &ValidatedProblem, pair: &GridPair) -> Result<f64> {
    check_pair(problem, pair)?;
    let e = 1.0 - problem.q();
    let (lambda, mu) = (problem.lambda(), problem.mu());
    let mut total = 0.0;
    for i in 0..problem.nodes() {
        let term = lambda * problem.f.0[i] * pos(pair.u.0[i]).powf(e)
            + mu * problem.g.0[i] * pos(pair.w.0[i]).powf(e);
        total += problem.weights[i] * term;
    }
    Ok(total)
}

pub fn b_value(problem: &ValidatedProblem, pair: &GridPair) -> Result<f64> {
    check_pair(problem, pair)?;
    let (a, b) = (problem.alpha(), problem.beta());
    let mut total = 0.0;
    for i in 0..problem.nodes() {
        let (u, w) = (pos(pair.u.0[i]), pos(pair.w.0[i]));
        if u > 0.0 && w > 0.0 {
            total += problem.weights[i] * problem.b.0[i] * u.powf(a) * w.powf(b);
        }
    }
    Ok(total)
}

pub fn pair_stats(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
) -> Result<PairStats> {
    check_pair(problem, pair)?;
    Ok(PairStats {
        norm2: form.pair_norm_sq(pair)?,
        k: k_value(problem, pair)?,
        b: b_value(problem, pair)?,
    })
}

/// `J = |z|^2 / 2 - K / (1 - q) - B / (alpha + beta)`.
pub fn energy_from_stats(stats: &PairStats, q: f64, ab: f64) -> f64 {
    0.5 * stats.norm2 - stats.k / (1.0 - q) - stats.b / ab
}

pub fn energy(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
) -> Result<EnergyParts> {
    let st = pair_stats(problem, form, pair)?;
    Ok(EnergyParts {
        norm2: st.norm2,
        k: st.k,
        b: st.b,
        j: energy_from_stats(&st, problem.q(), problem.ab()),
    })
}

/// Primitive of `max(v, eps)^{-q}` that agrees with `v^{1-q} / (1-q)` for
/// `v >= eps` and continues linearly below.
fn smoothed_power(v: f64, q: f64, eps: f64) -> f64 {
    if v >= eps {
        v.powf(1.0 - q) / (1.0 - q)
    } else {
        eps.powf(1.0 - q) / (1.0 - q) + eps.powf(-q) * (v - eps)
    }
}

/// Energy whose singular term is replaced by [`smoothed_power`]; its exact
/// gradient is [`energy_gradient`].
pub fn smoothed_energy(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
    eps: f64,
) -> Result<f64> {
    check_pair(problem, pair)?;
    if !(eps > 0.0) {
        return Err(Error::NonpositiveEpsilon(eps));
    }
    let q = problem.q();
    let n = problem.grid().cells;
    let mut sing = 0.0;
    for i in 1..n {
        sing += problem.weights[i]
            * (problem.lambda() * problem.f.0[i] * smoothed_power(pair.u.0[i], q, eps)
                + problem.mu() * problem.g.0[i] * smoothed_power(pair.w.0[i], q, eps));
    }
    Ok(0.5 * form.pair_norm_sq(pair)? - sing - b_value(problem, pair)? / problem.ab())
}

/// One component of the regularized gradient; the other component is the
/// same call with the roles of the two functions swapped.
#[allow(clippy::too_many_arguments)]
fn gradient_component(
    problem: &ValidatedProblem,
    g_own: &GridFunction,
    own: &GridFunction,
    other: &GridFunction,
    coeff: f64,
    weight: &GridFunction,
    own_exp: f64,
    other_exp: f64,
    eps: f64,
) -> GridFunction {
    let q = problem.q();
    let ab = problem.ab();
    let n = problem.grid().cells;
    let mut out = GridFunction::zeros(n + 1);
    for i in 1..n {
        let (x, y) = (own.0[i], other.0[i]);
        let sing = coeff * weight.0[i] * x.max(eps).powf(-q);
        let coupling = if x > 0.0 && y > 0.0 {
            own_exp / ab * problem.b.0[i] * x.powf(own_exp - 1.0) * y.powf(other_exp)
        } else {
            0.0
        };
        out.0[i] = g_own.0[i] - problem.weights[i] * (sing + coupling);
    }
    out
}

/// Nodal gradient of [`smoothed_energy`]: `G u - M (lambda f max(u, eps)^{-q}
/// + alpha/(alpha+beta) b u+^{alpha-1} w+^beta)` and its mirror for `w`.
pub fn energy_gradient(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
    eps: f64,
) -> Result<GridPair> {
    check_pair(problem, pair)?;
    if !(eps > 0.0) {
        return Err(Error::NonpositiveEpsilon(eps));
    }
    let gu = form.apply(&pair.u)?;
    let gw = form.apply(&pair.w)?;
    let (a, b) = (problem.alpha(), problem.beta());
    let du = gradient_component(
        problem,
        &gu,
        &pair.u,
        &pair.w,
        problem.lambda(),
        &problem.f,
        a,
        b,
        eps,
    );
    let dw = gradient_component(
        problem,
        &gw,
        &pair.w,
        &pair.u,
        problem.mu(),
        &problem.g,
        b,
        a,
        eps,
    );
    Ok(GridPair { u: du, w: dw })
}

/// Fiber map values `(phi(t), phi'(t), phi''(t))` from the pair's stats.
pub fn phi_from_stats(stats: &PairStats, q: f64, ab: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::NonpositiveT(t));
    }
    let PairStats { norm2, k, b } = *stats;
    let phi = t * t * norm2 / 2.0 - t.powf(1.0 - q) * k / (1.0 - q) - t.powf(ab) * b / ab;
    let d1 = t * norm2 - t.powf(-q) * k - t.powf(ab - 1.0) * b;
    let d2 = norm2 + q * t.powf(-q - 1.0) * k - (ab - 1.0) * t.powf(ab - 2.0) * b;
    Ok((phi, d1, d2))
}

pub fn phi(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
    t: f64,
) -> Result<(f64, f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::NonpositiveT(t));
    }
    let stats = pair_stats(problem, form, pair)?;
    phi_from_stats(&stats, problem.q(), problem.ab(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::assemble_form;
    use crate::problem::{validate_params, ProblemSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(cells: usize) -> (ValidatedProblem, GagliardoForm) {
        let p = validate_params(&ProblemSpec::fixture(cells, 0.01, 0.01)).unwrap();
        let f = assemble_form(p.grid(), p.s()).unwrap();
        (p, f)
    }

    fn random_pair(rng: &mut ChaCha8Rng, nodes: usize, lo: f64) -> GridPair {
        let u: Vec<f64> = (0..nodes - 2).map(|_| rng.gen_range(lo..1.0)).collect();
        let w: Vec<f64> = (0..nodes - 2).map(|_| rng.gen_range(lo..1.0)).collect();
        GridPair::new(
            GridFunction::from_interior(&u),
            GridFunction::from_interior(&w),
        )
        .unwrap()
    }

    #[test]
    fn zero_pair() {
        let (p, f) = setup(16);
        let z = GridPair::zeros(17);
        assert_eq!(k_value(&p, &z).unwrap(), 0.0);
        assert_eq!(b_value(&p, &z).unwrap(), 0.0);
        assert_eq!(energy(&p, &f, &z).unwrap().j, 0.0);
    }

    #[test]
    fn nonpositive_pairs_have_no_k_or_b() {
        let (p, _) = setup(16);
        let neg = GridFunction::from_interior(&[-0.5; 15]);
        let pair = GridPair::new(neg.clone(), neg).unwrap();
        assert_eq!(k_value(&p, &pair).unwrap(), 0.0);
        assert_eq!(b_value(&p, &pair).unwrap(), 0.0);
    }

    #[test]
    fn k_matches_trapezoid_sum() {
        let mut spec = ProblemSpec::fixture(16, 1.0, 1.0);
        spec.q = 0.3;
        let p = validate_params(&spec).unwrap();
        let c = 0.7;
        let u = GridFunction::from_interior(&[c; 15]);
        let pair = GridPair::new(u.clone(), u).unwrap();
        // 15 interior nodes of weight h = 1/8, boundary values zero
        let want = 2.0 * 15.0 * 0.125 * c.powf(0.7);
        assert!((k_value(&p, &pair).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn b_negative_where_b_is_negative() {
        let (p, _) = setup(32);
        // support near the left end, where cos(pi x) < 0
        let mut u = GridFunction::zeros(33);
        for i in 1..6 {
            u.0[i] = 1.0;
        }
        let pair = GridPair::new(u.clone(), u).unwrap();
        assert!(b_value(&p, &pair).unwrap() < 0.0);
    }

    #[test]
    fn energy_arithmetic() {
        let st = PairStats {
            norm2: 1.0,
            k: 0.1,
            b: 0.1,
        };
        let j = energy_from_stats(&st, 0.5, 3.0);
        assert!((j - (0.5 - 0.2 - 0.1 / 3.0)).abs() < 1e-15);
        let (_, d1, d2) = phi_from_stats(&st, 0.5, 3.0, 1.0).unwrap();
        assert!((d1 - 0.8).abs() < 1e-15);
        assert!((d2 - 0.85).abs() < 1e-15);
        assert_eq!(
            phi_from_stats(&st, 0.5, 3.0, 0.0),
            Err(Error::NonpositiveT(0.0))
        );
    }

    #[test]
    fn energy_is_negative_near_zero() {
        let (p, f) = setup(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pair = random_pair(&mut rng, 33, 0.0);
        let j3 = energy(&p, &f, &pair.scaled(1e-3)).unwrap().j;
        let j2 = energy(&p, &f, &pair.scaled(1e-2)).unwrap().j;
        assert!(j3 < 0.0 && j2 < 0.0 && j3 > j2 * 10.0);
        assert!(j3 > j2);
    }

    #[test]
    fn phi_equals_scaled_energy() {
        let (p, f) = setup(32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pair = random_pair(&mut rng, 33, -0.2);
            let t = rng.gen_range(0.05..5.0);
            let (ph, _, _) = phi(&p, &f, &pair, t).unwrap();
            let j = energy(&p, &f, &pair.scaled(t)).unwrap().j;
            assert!((ph - j).abs() <= 1e-12 * j.abs().max(1e-300), "{ph} vs {j}");
        }
    }

    #[test]
    fn homogeneity() {
        let (p, _) = setup(32);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pair = random_pair(&mut rng, 33, -0.3);
        let t = 2.7;
        let k = k_value(&p, &pair).unwrap();
        let b = b_value(&p, &pair).unwrap();
        let kt = k_value(&p, &pair.scaled(t)).unwrap();
        let bt = b_value(&p, &pair.scaled(t)).unwrap();
        assert!((kt - t.powf(0.5) * k).abs() < 1e-13 * kt.abs());
        assert!((bt - t.powf(3.0) * b).abs() < 1e-13 * bt.abs());
    }

    #[test]
    fn gradient_quadratic_only() {
        let mut p = validate_params(&ProblemSpec::fixture(16, 0.01, 0.01)).unwrap();
        p.spec.lambda = 0.0;
        p.spec.mu = 0.0;
        p.b = GridFunction::zeros(17);
        let f = assemble_form(p.grid(), p.s()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pair = random_pair(&mut rng, 17, 0.0);
        let g = energy_gradient(&p, &f, &pair, 1e-8).unwrap();
        assert_eq!(g.u, f.apply(&pair.u).unwrap());
        assert_eq!(g.w, f.apply(&pair.w).unwrap());
        assert_eq!(
            energy_gradient(&p, &f, &pair, 0.0),
            Err(Error::NonpositiveEpsilon(0.0))
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, f) = setup(32);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = random_pair(&mut rng, 33, 0.05);
        let eps = 1e-8;
        let g = energy_gradient(&p, &f, &pair, eps).unwrap();
        let step = 1e-6;
        for _ in 0..20 {
            let i = rng.gen_range(1..32);
            let which = rng.gen_bool(0.5);
            let mut plus = pair.clone();
            let mut minus = pair.clone();
            let (pp, mm, gi) = if which {
                (&mut plus.u, &mut minus.u, g.u.0[i])
            } else {
                (&mut plus.w, &mut minus.w, g.w.0[i])
            };
            pp.0[i] += step;
            mm.0[i] -= step;
            let fd = (smoothed_energy(&p, &f, &plus, eps).unwrap()
                - smoothed_energy(&p, &f, &minus, eps).unwrap())
                / (2.0 * step);
            assert!((fd - gi).abs() < 1e-5 * gi.abs(), "node {i}: {fd} vs {gi}");
        }
    }

    #[test]
    fn manifold_second_derivative_forms_agree() {
        let (p, f) = setup(32);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dir = random_pair(&mut rng, 33, 0.0);
        let st = pair_stats(&p, &f, &dir).unwrap();
        let (q, ab) = (p.q(), p.ab());
        // solve phi'(t) = 0 by bisection on the first root
        let (mut lo, mut hi) = (1e-8, 1.0);
        while phi_from_stats(&st, q, ab, hi).unwrap().1 < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi_from_stats(&st, q, ab, mid).unwrap().1 < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let on = st.scaled(hi, q, ab);
        let (_, d1, d2) = phi_from_stats(&on, q, ab, 1.0).unwrap();
        let tau = d1.abs().max(1e-14 * on.scale());
        let first = (1.0 + q) * on.norm2 - (ab - 1.0 + q) * on.b;
        let second = (2.0 - ab) * on.norm2 + (ab - 1.0 + q) * on.k;
        assert!((first - second).abs() <= 10.0 * tau * on.norm2.max(1.0));
        assert!((d2 - first).abs() <= 1e-9 * on.scale());
    }
}
