//! Fiber-map root structure: `psi(t) = t^{2-a-b} |z|^2 - t^{1-a-b-q} K - B`
//! vanishes exactly where `t z` lies on the Nehari manifold. `psi` increases
//! up to its unique maximizer `t_max` and decreases after, so each side holds
//! at most one root and bisection brackets are guaranteed.

use serde::{Deserialize, Serialize};

use crate::energy::{self, PairStats};
use crate::error::{Error, Result};
use crate::form::GagliardoForm;
use crate::problem::{GridPair, ValidatedProblem};

/// Shape parameters shared by every fiber of a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberShape {
    pub q: f64,
    /// `alpha + beta`
    pub ab: f64,
}

impl FiberShape {
    pub fn of(problem: &ValidatedProblem) -> Self {
        Self {
            q: problem.q(),
            ab: problem.ab(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiberCase {
    /// `B <= 0`: one root, a global minimum of the fiber.
    SingleRoot,
    /// `B > 0` and `psi(t_max) > 0`: a local minimum and a local maximum.
    TwoRoots,
    /// `B > 0` and `psi(t_max) <= 0`.
    NoAdmissibleRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRoots {
    pub case: FiberCase,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t_max: f64,
    pub psi_at_tmax: f64,
}

pub fn psi(stats: &PairStats, shape: FiberShape, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonpositiveT(t));
    }
    Ok(psi_unchecked(stats, shape, t))
}

fn psi_unchecked(stats: &PairStats, shape: FiberShape, t: f64) -> f64 {
    let FiberShape { q, ab } = shape;
    t.powf(2.0 - ab) * stats.norm2 - t.powf(1.0 - ab - q) * stats.k - stats.b
}

/// `psi'(t)`.
pub fn psi_prime(stats: &PairStats, shape: FiberShape, t: f64) -> f64 {
    let FiberShape { q, ab } = shape;
    (2.0 - ab) * t.powf(1.0 - ab) * stats.norm2 + (ab - 1.0 + q) * t.powf(-ab - q) * stats.k
}

/// `psi''(t)`.
pub fn psi_second(stats: &PairStats, shape: FiberShape, t: f64) -> f64 {
    let FiberShape { q, ab } = shape;
    (2.0 - ab) * (1.0 - ab) * t.powf(-ab) * stats.norm2
        - (ab - 1.0 + q) * (ab + q) * t.powf(-ab - q - 1.0) * stats.k
}

fn check_stats(stats: &PairStats) -> Result<()> {
    if !(stats.norm2 > 0.0) {
        return Err(Error::NonpositiveNorm(stats.norm2));
    }
    if !(stats.k > 0.0) {
        return Err(Error::NonpositiveK(stats.k));
    }
    Ok(())
}

/// `[(a+b-1+q) K / ((a+b-2) |z|^2)]^{1/(1+q)}`.
pub fn t_max(stats: &PairStats, shape: FiberShape) -> Result<f64> {
    check_stats(stats)?;
    let FiberShape { q, ab } = shape;
    Ok(((ab - 1.0 + q) * stats.k / ((ab - 2.0) * stats.norm2)).powf(1.0 / (1.0 + q)))
}

/// Bisection for the sign change of `f` in `[neg, pos]` (`f(neg) < 0 <= f(pos)`
/// in the orientation given). Stops when the bracket is narrower than
/// `width` or cannot be split further.
fn bisect(f: impl Fn(f64) -> f64, mut neg: f64, mut pos: f64, width: f64) -> f64 {
    for _ in 0..2000 {
        if (pos - neg).abs() <= width {
            break;
        }
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            break;
        }
        if f(mid) < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    0.5 * (neg + pos)
}

/// Scalings `t` putting `t z` on the manifold, classified by the sign of `B`
/// and of `psi(t_max)`.
pub fn project(stats: &PairStats, shape: FiberShape, tol: f64) -> Result<FiberRoots> {
    check_stats(stats)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidOption(format!(
            "root tolerance must be positive, got {tol}"
        )));
    }
    let tm = t_max(stats, shape)?;
    let top = psi_unchecked(stats, shape, tm);
    let f = |t: f64| psi_unchecked(stats, shape, t);
    if stats.b > 0.0 && top <= 0.0 {
        return Ok(FiberRoots {
            case: FiberCase::NoAdmissibleRoot,
            t1: None,
            t2: None,
            t_max: tm,
            psi_at_tmax: top,
        });
    }
    let width = tol * tm;

    let mut lo = 0.5 * tm;
    while f(lo) >= 0.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::NoBracket);
        }
    }
    let t1 = bisect(f, lo, tm, width);

    if stats.b <= 0.0 {
        return Ok(FiberRoots {
            case: FiberCase::SingleRoot,
            t1: Some(t1),
            t2: None,
            t_max: tm,
            psi_at_tmax: top,
        });
    }
    let mut hi = 2.0 * tm;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoBracket);
        }
    }
    let t2 = bisect(f, hi, tm, width);
    Ok(FiberRoots {
        case: FiberCase::TwoRoots,
        t1: Some(t1),
        t2: Some(t2),
        t_max: tm,
        psi_at_tmax: top,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipLabel {
    NPlus,
    NMinus,
    NZero,
    OffManifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub label: MembershipLabel,
    /// `phi'(1)`
    pub phi1: f64,
    /// `phi''(1)`
    pub phi2: f64,
}

/// Default relative band for `|phi'(1)|`.
pub const TAU: f64 = 1e-8;
/// Default relative band for `|phi''(1)|`.
pub const TAU2: f64 = 1e-10;

/// Applies the tolerance bands to `phi'(1)`, `phi''(1)`; `tol`, `tol2` are
/// relative to `|z|^2 + |K| + |B|`.
pub fn classify_stats(stats: &PairStats, shape: FiberShape, tol: f64, tol2: f64) -> Membership {
    let (_, phi1, phi2) = energy::phi_from_stats(stats, shape.q, shape.ab, 1.0).expect("t = 1");
    let scale = stats.scale();
    let (tau, tau2) = (tol * scale, tol2 * scale);
    let label = if phi1.abs() > tau {
        MembershipLabel::OffManifold
    } else if phi2 > tau2 {
        MembershipLabel::NPlus
    } else if phi2 < -tau2 {
        MembershipLabel::NMinus
    } else {
        MembershipLabel::NZero
    };
    Membership { label, phi1, phi2 }
}

pub fn classify(
    problem: &ValidatedProblem,
    form: &GagliardoForm,
    pair: &GridPair,
    tol: f64,
    tol2: f64,
) -> Result<Membership> {
    let stats = energy::pair_stats(problem, form, pair)?;
    Ok(classify_stats(&stats, FiberShape::of(problem), tol, tol2))
}
