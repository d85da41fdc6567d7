//! Dense quadratic form for the squared X0 norm
//! `int_Q |u(x) - u(y)|^2 / |x - y|^{1 + 2s}` of piecewise-linear functions
//! vanishing outside the interval.
//!
//! The double integral over `Omega x Omega` is split by cell pairs: pairs of
//! identical or adjacent cells are integrated in closed form (the linear
//! difference cancels the kernel singularity there), separated pairs use a
//! tensor Gauss rule. The two exterior strips `Omega x C Omega` collapse to
//! `2 int_Omega u^2 kappa` with `kappa` the closed-form exterior kernel.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::problem::{GridFunction, GridPair, GridSpec};
use crate::quadrature::{adjacent_cell_unit, gauss_legendre_unit, same_cell_unit};

/// Gauss points per direction on separated cell pairs.
const FAR_FIELD_POINTS: usize = 3;
/// Gauss points for the smooth part of the exterior kernel on a cell.
const EXTERIOR_POINTS: usize = 8;

#[derive(Debug, Clone)]
pub struct GagliardoForm {
    /// Symmetric matrix over interior nodes `1..N-1`.
    pub matrix: DMatrix<f64>,
    /// Trapezoid weights over all nodes.
    pub quad_weights: Vec<f64>,
    pub s: f64,
    pub grid: GridSpec,
    chol: Cholesky<f64, Dyn>,
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::InvalidOrder(format!("s = {s} outside (0, 1/2)")));
    }
    Ok(())
}

/// `kappa(x) = int_{C Omega} |x - y|^{-(1 + 2s)} dy` at the nodes; infinite
/// at the two endpoints.
pub fn exterior_kernel(grid: &GridSpec, s: f64) -> Result<GridFunction> {
    check_order(s)?;
    let values = (0..grid.nodes())
        .map(|i| exterior_kernel_at(grid, s, grid.x(i)))
        .collect();
    Ok(GridFunction(values))
}

pub fn exterior_kernel_at(grid: &GridSpec, s: f64, x: f64) -> f64 {
    ((grid.right - x).powf(-2.0 * s) + (x - grid.left).powf(-2.0 * s)) / (2.0 * s)
}

/// Accumulates `value * c c^T` into the interior matrix for node indices `nodes`.
fn scatter<const K: usize>(
    m: &mut DMatrix<f64>,
    n_cells: usize,
    nodes: [usize; K],
    c: [f64; K],
    value: f64,
) {
    for a in 0..K {
        let i = nodes[a];
        if i == 0 || i == n_cells {
            continue;
        }
        for b in 0..K {
            let j = nodes[b];
            if j == 0 || j == n_cells {
                continue;
            }
            m[(i - 1, j - 1)] += value * c[a] * c[b];
        }
    }
}

pub fn assemble_form(grid: &GridSpec, s: f64) -> Result<GagliardoForm> {
    grid.check()?;
    check_order(s)?;
    let n = grid.cells;
    let h = grid.h();
    let p = 1.0 + 2.0 * s;
    let mut m = DMatrix::<f64>::zeros(n - 1, n - 1);

    // identical cells: (u_{a+1} - u_a)^2 h^{1-2s} * 2/((2-2s)(3-2s))
    let same = same_cell_unit(s) * h.powf(1.0 - 2.0 * s);
    for a in 0..n {
        scatter(&mut m, n, [a, a + 1], [-1.0, 1.0], same);
    }

    // adjacent cells, both orderings
    let (i20, i11) = adjacent_cell_unit(s);
    let scale = 2.0 * h.powf(1.0 - 2.0 * s);
    for a in 0..n - 1 {
        let nodes = [a, a + 1, a + 2];
        let d1 = [-1.0, 1.0, 0.0];
        let d2 = [0.0, -1.0, 1.0];
        scatter(&mut m, n, nodes, d1, scale * i20);
        scatter(&mut m, n, nodes, d2, scale * i20);
        // cross term 2 I11 d1 d2, symmetrized
        for (ia, &na) in nodes.iter().enumerate() {
            for (ib, &nb) in nodes.iter().enumerate() {
                if na == 0 || na == n || nb == 0 || nb == n {
                    continue;
                }
                m[(na - 1, nb - 1)] += scale * i11 * (d1[ia] * d2[ib] + d2[ia] * d1[ib]);
            }
        }
    }

    // separated cells, tensor Gauss, both orderings
    let (gx, gw) = gauss_legendre_unit(FAR_FIELD_POINTS);
    for a in 0..n {
        for b in a + 2..n {
            let mut local = [[0.0; 4]; 4];
            for (&tk, &wk) in gx.iter().zip(&gw) {
                let xk = (a as f64 + tk) * h;
                for (&tl, &wl) in gx.iter().zip(&gw) {
                    let yl = (b as f64 + tl) * h;
                    let kern = 2.0 * wk * wl * h * h * (yl - xk).powf(-p);
                    let c = [1.0 - tk, tk, -(1.0 - tl), -tl];
                    for i in 0..4 {
                        for j in 0..4 {
                            local[i][j] += kern * c[i] * c[j];
                        }
                    }
                }
            }
            let nodes = [a, a + 1, b, b + 1];
            for i in 0..4 {
                let ni = nodes[i];
                if ni == 0 || ni == n {
                    continue;
                }
                for j in 0..4 {
                    let nj = nodes[j];
                    if nj == 0 || nj == n {
                        continue;
                    }
                    m[(ni - 1, nj - 1)] += local[i][j];
                }
            }
        }
    }

    // exterior strips: 2 int u^2 kappa
    let ext = exterior_cell_matrices(grid, s);
    for (a, cell) in ext.iter().enumerate() {
        let nodes = [a, a + 1];
        for i in 0..2 {
            for j in 0..2 {
                let (ni, nj) = (nodes[i], nodes[j]);
                if ni == 0 || ni == n || nj == 0 || nj == n {
                    continue;
                }
                m[(ni - 1, nj - 1)] += 2.0 * cell[i][j];
            }
        }
    }

    // exact symmetry
    for i in 0..n - 1 {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }

    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(GagliardoForm {
        matrix: m,
        quad_weights: grid.trapezoid_weights(),
        s,
        grid: *grid,
        chol,
    })
}

/// `int_cell phi_i phi_j kappa` for the two hats living on each cell.
fn exterior_cell_matrices(grid: &GridSpec, s: f64) -> Vec<[[f64; 2]; 2]> {
    let n = grid.cells;
    let h = grid.h();
    let (gx, gw) = gauss_legendre_unit(EXTERIOR_POINTS);
    let e = -2.0 * s;
    // int_0^1 tau^j tau^{-2s} dtau, scaled by h^{1-2s}
    let mom = |j: f64| h.powf(1.0 + e) / (j + 1.0 + e);
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let mut cell = [[0.0; 2]; 2];
        // left endpoint term (x - L)^{-2s}
        if a == 0 {
            let (m0, m1, m2) = (mom(0.0), mom(1.0), mom(2.0));
            cell[0][0] += m0 - 2.0 * m1 + m2;
            cell[0][1] += m1 - m2;
            cell[1][0] += m1 - m2;
            cell[1][1] += m2;
        } else {
            for (&t, &w) in gx.iter().zip(&gw) {
                let z = (a as f64 + t) * h;
                let k = w * h * z.powf(e);
                let phi = [1.0 - t, t];
                for i in 0..2 {
                    for j in 0..2 {
                        cell[i][j] += k * phi[i] * phi[j];
                    }
                }
            }
        }
        // right endpoint term (R - x)^{-2s}
        if a == n - 1 {
            // sigma = (R - x)/h; node a+1 has hat 1 - sigma, node a has sigma
            let (m0, m1, m2) = (mom(0.0), mom(1.0), mom(2.0));
            cell[1][1] += m0 - 2.0 * m1 + m2;
            cell[0][1] += m1 - m2;
            cell[1][0] += m1 - m2;
            cell[0][0] += m2;
        } else {
            for (&t, &w) in gx.iter().zip(&gw) {
                let z = ((n - a) as f64 - t) * h;
                let k = w * h * z.powf(e);
                let phi = [1.0 - t, t];
                for i in 0..2 {
                    for j in 0..2 {
                        cell[i][j] += k * phi[i] * phi[j];
                    }
                }
            }
        }
        let c = 1.0 / (2.0 * s);
        for row in cell.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out.push(cell);
    }
    out
}

impl GagliardoForm {
    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.len() != self.nodes() {
            return Err(Error::GridMismatch {
                expected: self.nodes(),
                got: u.len(),
            });
        }
        Ok(())
    }

    fn interior_vec(u: &GridFunction) -> DVector<f64> {
        DVector::from_column_slice(u.interior())
    }

    pub fn seminorm_sq(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        let v = Self::interior_vec(u);
        Ok(v.dot(&(&self.matrix * &v)))
    }

    pub fn pair_norm_sq(&self, p: &GridPair) -> Result<f64> {
        Ok(self.seminorm_sq(&p.u)? + self.seminorm_sq(&p.w)?)
    }

    /// `G u` on interior nodes, zero at the boundary.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let gu = &self.matrix * Self::interior_vec(u);
        Ok(GridFunction::from_interior(gu.as_slice()))
    }

    /// `G^{-1} r` on interior nodes, zero at the boundary.
    pub fn solve(&self, r: &GridFunction) -> Result<GridFunction> {
        self.check(r)?;
        let x = self.chol.solve(&Self::interior_vec(r));
        Ok(GridFunction::from_interior(x.as_slice()))
    }

    /// `<u, v>` over interior nodes.
    pub fn dot(u: &GridFunction, v: &GridFunction) -> f64 {
        u.interior()
            .iter()
            .zip(v.interior())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// CSV dump: a `N,s` header line followed by the interior matrix row-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N,s")?;
        writeln!(out, "{},{}", self.grid.cells, self.s)?;
        let k = self.matrix.nrows();
        for i in 0..k {
            let row: Vec<String> = (0..k)
                .map(|j| format!("{:e}", self.matrix[(i, j)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Piecewise-linear hat at the node nearest the interval midpoint.
pub fn center_hat(grid: &GridSpec) -> GridFunction {
    let mut v = vec![0.0; grid.nodes()];
    v[grid.cells / 2] = 1.0;
    GridFunction(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x0(rng: &mut ChaCha8Rng, nodes: usize) -> GridFunction {
        let interior: Vec<f64> = (0..nodes - 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridFunction::from_interior(&interior)
    }

    #[test]
    fn exterior_kernel_values() {
        let grid = GridSpec::new(-1.0, 1.0, 8).unwrap();
        let k = exterior_kernel(&grid, 0.4).unwrap();
        assert!((k.0[4] - 2.5).abs() < 1e-14);
        for i in 1..8 {
            assert!((k.0[i] - k.0[8 - i]).abs() < 1e-12);
        }
        assert!(k.0[5] < k.0[6] && k.0[6] < k.0[7]);
        assert!(k.0[0].is_infinite());
        assert!(matches!(
            exterior_kernel(&grid, 0.5),
            Err(Error::InvalidOrder(_))
        ));
    }

    #[test]
    fn exterior_cells_match_direct_integration() {
        // compare against fine composite Gauss on a graded mesh toward the endpoint
        let grid = GridSpec::new(-1.0, 1.0, 8).unwrap();
        let s = 0.35;
        let cells = exterior_cell_matrices(&grid, s);
        let (gx, gw) = gauss_legendre_unit(16);
        let h = grid.h();
        for (a, cell) in cells.iter().enumerate() {
            let mut edges = vec![0.0];
            let mut e = 1e-60;
            while e < 0.5 {
                edges.push(e);
                e *= 2.0;
            }
            edges.push(0.5);
            let mut want = [[0.0; 2]; 2];
            // graded toward each endpoint of the cell; `mirror` integrates in 1 - tau
            for mirror in [false, true] {
                for win in edges.windows(2) {
                    let len = win[1] - win[0];
                    for (&t, &w) in gx.iter().zip(&gw) {
                        let r = win[0] + len * t;
                        let (tau, dl, dr) = if mirror {
                            (
                                1.0 - r,
                                (a as f64 + 1.0 - r) * h,
                                ((grid.cells - a - 1) as f64 + r) * h,
                            )
                        } else {
                            (r, (a as f64 + r) * h, ((grid.cells - a) as f64 - r) * h)
                        };
                        let k = (dl.powf(-2.0 * s) + dr.powf(-2.0 * s)) / (2.0 * s);
                        let phi = [1.0 - tau, tau];
                        for i in 0..2 {
                            for j in 0..2 {
                                want[i][j] += w * len * h * k * phi[i] * phi[j];
                            }
                        }
                    }
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (cell[i][j] - want[i][j]).abs() < 1e-7 * want[i][j].abs().max(1e-3),
                        "cell {a} ({i},{j}): {} vs {}",
                        cell[i][j],
                        want[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn form_is_symmetric_and_positive() {
        let grid = GridSpec::new(-1.0, 1.0, 16).unwrap();
        let form = assemble_form(&grid, 0.4).unwrap();
        let m = &form.matrix;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = random_x0(&mut rng, grid.nodes());
            assert!(form.seminorm_sq(&u).unwrap() > 0.0);
        }
    }

    #[test]
    fn zero_and_scaling() {
        let grid = GridSpec::new(-1.0, 1.0, 16).unwrap();
        let form = assemble_form(&grid, 0.4).unwrap();
        assert_eq!(form.seminorm_sq(&GridFunction::zeros(17)).unwrap(), 0.0);
        let u = center_hat(&grid);
        let a = form.seminorm_sq(&u).unwrap();
        let b = form.seminorm_sq(&u.scaled(2.0)).unwrap();
        assert!((b - 4.0 * a).abs() <= 1e-14 * b);
        assert!(a > 0.0);
    }

    #[test]
    fn apply_is_symmetric_and_consistent() {
        let grid = GridSpec::new(0.0, 3.0, 20).unwrap();
        let form = assemble_form(&grid, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = random_x0(&mut rng, grid.nodes());
            let v = random_x0(&mut rng, grid.nodes());
            let a = GagliardoForm::dot(&form.apply(&u).unwrap(), &v);
            let b = GagliardoForm::dot(&form.apply(&v).unwrap(), &u);
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
            let uu = GagliardoForm::dot(&form.apply(&u).unwrap(), &u);
            assert!((uu - form.seminorm_sq(&u).unwrap()).abs() <= 1e-14 * uu);
            let back = form.solve(&form.apply(&u).unwrap()).unwrap();
            for (x, y) in back.0.iter().zip(&u.0) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert_eq!(
            form.apply(&GridFunction::zeros(21)).unwrap(),
            GridFunction::zeros(21)
        );
    }

    #[test]
    fn reflection_invariance() {
        let grid = GridSpec::new(-1.0, 1.0, 24).unwrap();
        let form = assemble_form(&grid, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_x0(&mut rng, grid.nodes());
        let mut r = u.clone();
        r.0.reverse();
        let a = form.seminorm_sq(&u).unwrap();
        let b = form.seminorm_sq(&r).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn grid_mismatch() {
        let grid = GridSpec::new(-1.0, 1.0, 16).unwrap();
        let form = assemble_form(&grid, 0.4).unwrap();
        assert!(matches!(
            form.seminorm_sq(&GridFunction::zeros(5)),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn pair_norm_is_additive() {
        let grid = GridSpec::new(-1.0, 1.0, 16).unwrap();
        let form = assemble_form(&grid, 0.4).unwrap();
        let u = center_hat(&grid);
        let nu = form.seminorm_sq(&u).unwrap();
        let p = GridPair::new(u.clone(), GridFunction::zeros(17)).unwrap();
        assert_eq!(form.pair_norm_sq(&p).unwrap(), nu);
        let p = GridPair::new(u.clone(), u.clone()).unwrap();
        assert_eq!(form.pair_norm_sq(&p).unwrap(), 2.0 * nu);
        let t = 0.7;
        let scaled = form.pair_norm_sq(&p.scaled(t)).unwrap();
        assert!((scaled - t * t * 2.0 * nu).abs() < 1e-14 * scaled);
    }
}
