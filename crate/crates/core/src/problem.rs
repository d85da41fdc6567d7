//! Problem data: the interval grid, exponents, parameters and the weights
//! `f`, `g`, `b` sampled onto the nodes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `cells` cells on `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
}

impl GridSpec {
    pub fn new(left: f64, right: f64, cells: usize) -> Result<Self> {
        let grid = Self { left, right, cells };
        grid.check()?;
        Ok(grid)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.left.is_finite() && self.right.is_finite()) || self.right - self.left <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "need finite left < right, got [{}, {}]",
                self.left, self.right
            )));
        }
        if self.cells < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells, got {}",
                self.cells
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.right - self.left) / self.cells as f64
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn interior(&self) -> usize {
        self.cells - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.left + i as f64 * self.h()
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    /// Composite trapezoid weights over all nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.nodes()];
        w[0] = 0.5 * h;
        w[self.cells] = 0.5 * h;
        w
    }
}

/// A concrete weight function `f`, `g` or `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// `amplitude * cos(pi * xhat)` with `xhat` the coordinate mapped onto `[-1, 1]`.
    CosPiX {
        amplitude: f64,
    },
    LinearX {
        slope: f64,
        offset: f64,
    },
    Samples {
        values: Vec<f64>,
    },
}

/// Nodal values of a function on the grid. Elements of X0 carry exact zeros
/// at both boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn zeros(nodes: usize) -> Self {
        Self(vec![0.0; nodes])
    }

    /// Builds an X0 element from interior values, padding the boundary with zeros.
    pub fn from_interior(interior: &[f64]) -> Self {
        let mut v = Vec::with_capacity(interior.len() + 2);
        v.push(0.0);
        v.extend_from_slice(interior);
        v.push(0.0);
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn interior(&self) -> &[f64] {
        let n = self.0.len();
        &self.0[1..n - 1]
    }

    pub fn is_x0(&self) -> bool {
        self.0.len() >= 2
            && self.0[0] == 0.0
            && self.0[self.0.len() - 1] == 0.0
            && self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| t * v).collect())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_interior(&self) -> f64 {
        self.interior()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// An element `(u, w)` of the product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPair {
    pub u: GridFunction,
    pub w: GridFunction,
}

impl GridPair {
    pub fn new(u: GridFunction, w: GridFunction) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::GridMismatch {
                expected: u.len(),
                got: w.len(),
            });
        }
        Ok(Self { u, w })
    }

    pub fn zeros(nodes: usize) -> Self {
        Self {
            u: GridFunction::zeros(nodes),
            w: GridFunction::zeros(nodes),
        }
    }

    pub fn nodes(&self) -> usize {
        self.u.len()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            u: self.u.scaled(t),
            w: self.w.scaled(t),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.u.0.iter().chain(self.w.0.iter()).all(|&v| v >= 0.0)
    }

    pub fn sup_diff(&self) -> f64 {
        self.u
            .0
            .iter()
            .zip(&self.w.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Raw problem parameters as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub s: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub f: WeightSpec,
    pub g: WeightSpec,
    pub b: WeightSpec,
}

impl ProblemSpec {
    /// The reference configuration used throughout the tests: `s = 0.4`,
    /// `q = 0.5`, `alpha = beta = 1.5`, `f = g = 1`, `b = cos(pi x)` on `(-1, 1)`.
    pub fn fixture(cells: usize, lambda: f64, mu: f64) -> Self {
        Self {
            grid: GridSpec {
                left: -1.0,
                right: 1.0,
                cells,
            },
            s: 0.4,
            q: 0.5,
            alpha: 1.5,
            beta: 1.5,
            lambda,
            mu,
            f: WeightSpec::Constant { value: 1.0 },
            g: WeightSpec::Constant { value: 1.0 },
            b: WeightSpec::CosPiX { amplitude: 1.0 },
        }
    }
}

/// A problem whose invariants have been checked, with weights sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    pub spec: ProblemSpec,
    pub critical_exponent: f64,
    pub f: GridFunction,
    pub g: GridFunction,
    pub b: GridFunction,
    pub weights: Vec<f64>,
}

impl ValidatedProblem {
    pub fn grid(&self) -> &GridSpec {
        &self.spec.grid
    }

    pub fn s(&self) -> f64 {
        self.spec.s
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn beta(&self) -> f64 {
        self.spec.beta
    }

    /// `alpha + beta`.
    pub fn ab(&self) -> f64 {
        self.spec.alpha + self.spec.beta
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn mu(&self) -> f64 {
        self.spec.mu
    }

    pub fn nodes(&self) -> usize {
        self.spec.grid.nodes()
    }

    /// `max_i b_i^+`, the discrete stand-in for the sup norm of `b`.
    pub fn b_sup(&self) -> f64 {
        self.b.0.iter().copied().fold(0.0, f64::max)
    }

    /// Whether the data is invariant under swapping `u` and `w`.
    pub fn is_symmetric(&self) -> bool {
        self.spec.alpha == self.spec.beta && self.spec.lambda == self.spec.mu && self.f == self.g
    }

    /// Re-checks a replaced parameter pair, keeping everything else.
    pub fn with_parameters(&self, lambda: f64, mu: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.lambda = lambda;
        spec.mu = mu;
        validate_params(&spec)
    }
}

/// `2n / (n - 2s)`.
pub fn critical_exponent(n: u32, s: f64) -> Result<f64> {
    let n = n as f64;
    if !(s > 0.0) || n <= 2.0 * s {
        return Err(Error::InvalidOrder(format!(
            "need 0 < 2s < n, got n = {n}, s = {s}"
        )));
    }
    Ok(2.0 * n / (n - 2.0 * s))
}

pub fn sample_weight(spec: &WeightSpec, grid: &GridSpec) -> Result<GridFunction> {
    let nodes = grid.nodes();
    let values: Vec<f64> = match spec {
        WeightSpec::Constant { value } => vec![*value; nodes],
        WeightSpec::Gaussian {
            center,
            width,
            amplitude,
        } => (0..nodes)
            .map(|i| {
                let z = (grid.x(i) - center) / width;
                amplitude * (-z * z).exp()
            })
            .collect(),
        WeightSpec::CosPiX { amplitude } => (0..nodes)
            .map(|i| {
                let xhat = -1.0 + 2.0 * i as f64 / grid.cells as f64;
                amplitude * (PI * xhat).cos()
            })
            .collect(),
        WeightSpec::LinearX { slope, offset } => {
            (0..nodes).map(|i| slope * grid.x(i) + offset).collect()
        }
        WeightSpec::Samples { values } => {
            if values.len() != nodes {
                return Err(Error::SampleLengthMismatch {
                    expected: nodes,
                    got: values.len(),
                });
            }
            values.clone()
        }
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteWeight(i));
    }
    Ok(GridFunction(values))
}

pub fn validate_params(spec: &ProblemSpec) -> Result<ValidatedProblem> {
    spec.grid.check()?;
    let mut violations = Vec::new();

    let s = spec.s;
    if !(s > 1.0 / 6.0 && s < 0.5) {
        violations.push(Error::InvalidOrder(format!("s = {s} outside (1/6, 1/2)")));
    }
    let q = spec.q;
    if !(q > 0.0 && q < 1.0) {
        violations.push(Error::InvalidExponent(format!("q = {q} outside (0, 1)")));
    }
    if !(spec.alpha > 1.0) {
        violations.push(Error::InvalidExponent(format!(
            "alpha = {} must exceed 1",
            spec.alpha
        )));
    }
    if !(spec.beta > 1.0) {
        violations.push(Error::InvalidExponent(format!(
            "beta = {} must exceed 1",
            spec.beta
        )));
    }
    let critical = critical_exponent(1, s).unwrap_or(f64::INFINITY);
    let ab = spec.alpha + spec.beta;
    if !(ab > 2.0 && ab < critical - 1.0) {
        violations.push(Error::InvalidExponent(format!(
            "alpha + beta = {ab} outside (2, {})",
            critical - 1.0
        )));
    }
    if spec.lambda == 0.0 && spec.mu == 0.0 {
        violations.push(Error::ZeroParameters);
    }
    if !(spec.lambda.is_finite() && spec.mu.is_finite()) {
        violations.push(Error::InvalidExponent(
            "lambda and mu must be finite".into(),
        ));
    }

    let f = sample_weight(&spec.f, &spec.grid)?;
    let g = sample_weight(&spec.g, &spec.grid)?;
    let b = sample_weight(&spec.b, &spec.grid)?;
    if f.interior().iter().any(|&v| v <= 0.0) {
        violations.push(Error::WeightSignViolation(
            "f must be strictly positive on interior nodes".into(),
        ));
    }
    if g.interior().iter().any(|&v| v <= 0.0) {
        violations.push(Error::WeightSignViolation(
            "g must be strictly positive on interior nodes".into(),
        ));
    }
    if !b.0.iter().any(|&v| v > 0.0) {
        violations.push(Error::WeightSignViolation("b+ vanishes identically".into()));
    }

    if let Some(first) = violations.into_iter().next() {
        return Err(first);
    }
    Ok(ValidatedProblem {
        spec: spec.clone(),
        critical_exponent: critical,
        weights: spec.grid.trapezoid_weights(),
        f,
        g,
        b,
    })
}

/// Every invariant of a validated problem, as a list of human-readable failures.
pub fn violations(problem: &ValidatedProblem) -> Vec<String> {
    let mut out = Vec::new();
    let ab = problem.ab();
    if !(ab > 2.0 && ab < problem.critical_exponent - 1.0) {
        out.push(format!("alpha + beta = {ab} out of range"));
    }
    if !(problem.s() > 1.0 / 6.0 && problem.s() < 0.5) {
        out.push(format!("s = {} out of range", problem.s()));
    }
    if problem.f.min_interior() <= 0.0 || problem.g.min_interior() <= 0.0 {
        out.push("f or g not strictly positive".into());
    }
    if problem.b_sup() <= 0.0 {
        out.push("b+ vanishes".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_accepted() {
        let p = validate_params(&ProblemSpec::fixture(64, 0.01, 0.01)).unwrap();
        assert!((p.critical_exponent - 10.0).abs() < 1e-14);
        assert!(violations(&p).is_empty());
    }

    #[test]
    fn critical_exponent_values() {
        assert!((critical_exponent(1, 0.4).unwrap() - 10.0).abs() < 1e-14);
        assert!((critical_exponent(1, 0.25).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(
            critical_exponent(1, 0.5),
            Err(Error::InvalidOrder(_))
        ));
    }

    #[test]
    fn rejects_q_one() {
        let mut spec = ProblemSpec::fixture(16, 0.01, 0.01);
        spec.q = 1.0;
        assert!(matches!(
            validate_params(&spec),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn rejects_zero_parameters() {
        let spec = ProblemSpec::fixture(16, 0.0, 0.0);
        assert_eq!(validate_params(&spec), Err(Error::ZeroParameters));
    }

    #[test]
    fn rejects_order_outside_window() {
        let mut spec = ProblemSpec::fixture(16, 0.01, 0.01);
        spec.s = 0.15;
        assert!(matches!(
            validate_params(&spec),
            Err(Error::InvalidOrder(_))
        ));
        spec.s = 0.5;
        assert!(matches!(
            validate_params(&spec),
            Err(Error::InvalidOrder(_))
        ));
    }

    #[test]
    fn rejects_supercritical_sum() {
        let mut spec = ProblemSpec::fixture(16, 0.01, 0.01);
        // s = 0.25 gives 2*_s - 1 = 3
        spec.s = 0.25;
        assert!(matches!(
            validate_params(&spec),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn rejects_bad_weights() {
        let mut spec = ProblemSpec::fixture(16, 0.01, 0.01);
        spec.b = WeightSpec::Constant { value: -1.0 };
        assert!(matches!(
            validate_params(&spec),
            Err(Error::WeightSignViolation(_))
        ));
        let mut spec = ProblemSpec::fixture(16, 0.01, 0.01);
        spec.f = WeightSpec::LinearX {
            slope: 1.0,
            offset: 0.0,
        };
        assert!(matches!(
            validate_params(&spec),
            Err(Error::WeightSignViolation(_))
        ));
    }

    #[test]
    fn sampling() {
        let grid = GridSpec::new(-1.0, 1.0, 8).unwrap();
        let c = sample_weight(&WeightSpec::Constant { value: 1.0 }, &grid).unwrap();
        assert!(c.0.iter().all(|&v| v == 1.0));
        let cos = sample_weight(&WeightSpec::CosPiX { amplitude: 1.0 }, &grid).unwrap();
        assert_eq!(cos.0[4], 1.0);
        assert_eq!(cos.0[0], -1.0);
        assert_eq!(cos.0[8], -1.0);
        let lin = sample_weight(
            &WeightSpec::LinearX {
                slope: 1.0,
                offset: 0.0,
            },
            &grid,
        )
        .unwrap();
        assert_eq!(lin.0[4], 0.0);
        let err = sample_weight(
            &WeightSpec::Samples {
                values: vec![1.0; 3],
            },
            &grid,
        );
        assert_eq!(
            err,
            Err(Error::SampleLengthMismatch {
                expected: 9,
                got: 3
            })
        );
        let again = sample_weight(&WeightSpec::CosPiX { amplitude: 1.0 }, &grid).unwrap();
        assert_eq!(cos, again);
    }

    #[test]
    fn weight_spec_json_shape() {
        let w: WeightSpec = serde_json::from_str(r#"{"kind":"cos_pi_x","amplitude":1.0}"#).unwrap();
        assert_eq!(w, WeightSpec::CosPiX { amplitude: 1.0 });
        let w: WeightSpec = serde_json::from_str(r#"{"kind":"constant","value":2.0}"#).unwrap();
        assert_eq!(w, WeightSpec::Constant { value: 2.0 });
    }

    #[test]
    fn grid_rejects_small_or_inverted() {
        assert!(GridSpec::new(0.0, 1.0, 3).is_err());
        assert!(GridSpec::new(1.0, 0.0, 8).is_err());
        let g = GridSpec::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(g.h(), 0.25);
    }
}
