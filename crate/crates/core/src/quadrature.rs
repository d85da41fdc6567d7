//! Gauss-Legendre rules and the closed-form cell integrals of the singular
//! kernel `|x - y|^{-(1 + 2s)}` against piecewise-linear differences.

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_0^1 int_0^1 |x - y|^{1 - 2s} dx dy = 2 / ((2 - 2s)(3 - 2s))`.
pub fn same_cell_unit(s: f64) -> f64 {
    2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
}

/// Unit-cell moments for two cells sharing an endpoint:
/// `I20 = int int xi^2 (xi + eta)^{-p}` and `I11 = int int xi eta (xi + eta)^{-p}`
/// over `[0,1]^2`, with `p = 1 + 2s`.
pub fn adjacent_cell_unit(s: f64) -> (f64, f64) {
    let p = 1.0 + 2.0 * s;
    let j2 = (2f64.powf(4.0 - p) - 1.0) / (4.0 - p) - 2.0 * (2f64.powf(3.0 - p) - 1.0) / (3.0 - p)
        + (2f64.powf(2.0 - p) - 1.0) / (2.0 - p);
    let i20 = (j2 - 1.0 / (4.0 - p)) / (1.0 - p);
    let total = (2f64.powf(4.0 - p) - 2.0) / ((3.0 - p) * (4.0 - p));
    let i11 = 0.5 * (total - 2.0 * i20);
    (i20, i11)
}
