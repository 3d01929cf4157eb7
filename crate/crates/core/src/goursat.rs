//! The wave kernel w(x,t) as the solution of a characteristic
//! boundary-value (Goursat) problem.
//!
//! In light-cone coordinates `xi = t - x`, `eta = t + x` the wave operator
//! `d_tt - d_xx` becomes `4 d_xi d_eta`, so the kernel
//! `v(xi, eta) = w((eta - xi)/2, (eta + xi)/2)` satisfies
//!
//! ```text
//! v_{xi eta} = -(1/4) q((eta - xi)/2) v,   0 < xi < eta,
//! v(eta, eta) = 0,
//! v(0, eta)   = -(1/2) * integral of q over [0, eta/2],
//! ```
//!
//! which is solved here by a Picard (iterated-integral) series with an
//! analytic tail bound, plus an independent marching discretization used
//! as a testing oracle.

use nalgebra::DMatrix;

use crate::grid::{
    cumulative_trapezoid, half_step_cumulative, refine_half, PotentialSample, UniformGrid,
};
use crate::{Error, Result};

const ITERATION_CAP: usize = 64;

/// Which kernel a triangular sample holds; determines the meaning of the
/// row/column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelOrientation {
    /// w(x, t) on 0 <= x <= t <= T (row x, column t). Note that in the
    /// spectral picture the same function appears with arguments swapped:
    /// w(x, t) equals the inverse-transformation kernel L(t, x).
    Wave,
    /// v(xi, eta) on 0 <= xi <= eta <= 2T (row xi, column eta).
    Characteristic,
    /// V(y, t) on 0 <= y <= t <= T (row y, column t), the kernel of the
    /// inverse control operator.
    InverseControl,
}

/// A kernel sampled on a triangular domain. `values[(i, j)]` is meaningful
/// for `i <= j`; the lower triangle is stored as zero.
#[derive(Debug, Clone)]
pub struct TriangularKernel {
    grid: UniformGrid,
    orientation: KernelOrientation,
    values: DMatrix<f64>,
}

impl TriangularKernel {
    pub fn new(
        grid: UniformGrid,
        orientation: KernelOrientation,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != grid.n_points() || values.ncols() != grid.n_points() {
            return Err(Error::Contract("kernel/grid dimension mismatch".into()));
        }
        Ok(Self {
            grid,
            orientation,
            values,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn orientation(&self) -> KernelOrientation {
        self.orientation
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Convert a characteristic-coordinate kernel v on [0, 2T] into the
    /// wave kernel w on [0, T]: `w(x, t) = v(t - x, t + x)`.
    pub fn to_wave(&self) -> Result<TriangularKernel> {
        if self.orientation != KernelOrientation::Characteristic {
            return Err(Error::Contract(
                "to_wave requires a characteristic-coordinate kernel".into(),
            ));
        }
        let n2 = self.grid.n_points();
        if n2 % 2 == 0 {
            return Err(Error::Contract(
                "characteristic lattice must have an odd number of nodes".into(),
            ));
        }
        let m = (n2 - 1) / 2;
        let wgrid = UniformGrid::new(m + 1, 0.5 * self.grid.length())?;
        let mut w = DMatrix::zeros(m + 1, m + 1);
        for i in 0..=m {
            for j in i..=m {
                w[(i, j)] = self.values[(j - i, j + i)];
            }
        }
        TriangularKernel::new(wgrid, KernelOrientation::Wave, w)
    }
}

/// Double running trapezoid table: `P[(a, b)]` approximates the integral of
/// `g` over the rectangle `[0, a h] x [0, b h]`.
fn cumulative_trapezoid_2d(g: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = g.nrows();
    // cumulative along columns (second argument) per row
    let mut rowcum = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 1..n {
            acc += 0.5 * h * (g[(i, j - 1)] + g[(i, j)]);
            rowcum[(i, j)] = acc;
        }
    }
    // cumulative along rows (first argument)
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut acc = 0.0;
        for i in 1..n {
            acc += 0.5 * h * (rowcum[(i - 1, j)] + rowcum[(i, j)]);
            out[(i, j)] = acc;
        }
    }
    out
}

/// Solve the characteristic-form Goursat problem on the lattice over
/// `[0, 2T]` by the Picard series, truncated once the analytic tail bound
/// (or, as a fallback, the size of the latest iterate) drops below `tol`
/// in sup norm.
///
/// `T` must be a node of the potential grid.
pub fn solve_goursat_picard(
    q: &PotentialSample,
    t_horizon: f64,
    tol: f64,
) -> Result<TriangularKernel> {
    if tol <= 0.0 {
        return Err(Error::Contract("tolerance must be positive".into()));
    }
    let h = q.grid().step();
    let m = q.grid().index_of(t_horizon)?;
    if m < 1 {
        return Err(Error::Contract("horizon must be at least one grid step".into()));
    }
    let n2 = 2 * m + 1;
    let qs = &q.values()[..=m];
    let qh = refine_half(qs); // q(k h / 2)
    let cq = half_step_cumulative(qs, h); // integral of q over [0, k h / 2]
    let qabs: Vec<f64> = qs.iter().map(|v| v.abs()).collect();
    let s_half = half_step_cumulative(&qabs, h);
    let s_max = 0.5 * s_half[2 * m]; // S(2T) = (1/2) int_0^T |q|
    let z = s_max * t_horizon;

    // Leading term Q(xi, eta) = -(1/2) int_{xi/2}^{eta/2} q.
    let mut term = DMatrix::zeros(n2, n2);
    for i in 0..n2 {
        for j in i..n2 {
            term[(i, j)] = -0.5 * (cq[j] - cq[i]);
        }
    }
    let mut v = term.clone();

    // Tail of the series after the n-th iterate: S * sum_{k>n} z^k / k!
    // bounded by S * z^{n+1} / (n+1)! * exp(z).
    let tail_bound = |n: usize| -> f64 {
        let mut pow = s_max * z.exp();
        for k in 1..=n + 1 {
            pow *= z / k as f64;
        }
        pow
    };

    let mut n = 0;
    let mut g = DMatrix::zeros(n2, n2);
    loop {
        let bound = tail_bound(n);
        if bound <= tol {
            break;
        }
        if n >= ITERATION_CAP {
            return Err(Error::GoursatConvergence {
                achieved: bound,
                iterations: n,
                tol,
            });
        }
        // next iterate: -(K term)(xi, eta) with
        // (K term)(xi, eta) = (1/4) int_0^xi int_xi^eta q((eta1-xi1)/2) term
        for i in 0..n2 {
            for j in 0..n2 {
                g[(i, j)] = if j >= i {
                    0.25 * qh[j - i] * term[(i, j)]
                } else {
                    0.0
                };
            }
        }
        let p = cumulative_trapezoid_2d(&g, h);
        let mut sup: f64 = 0.0;
        for i in 0..n2 {
            for j in i..n2 {
                let next = -(p[(i, j)] - p[(i, i)]);
                term[(i, j)] = next;
                v[(i, j)] += next;
                sup = sup.max(next.abs());
            }
        }
        n += 1;
        if sup <= tol {
            break;
        }
    }

    let grid = UniformGrid::new(n2, 2.0 * t_horizon)?;
    TriangularKernel::new(grid, KernelOrientation::Characteristic, v)
}

/// Independent discretization used for testing: march the characteristic
/// form `v_{xi eta} = -(1/4) q((eta - xi)/2) v` over the (xi, eta) lattice
/// with the rectangle rule for the mixed derivative, imposing
/// `v(eta, eta) = 0` and the integrated edge condition at `xi = 0`.
///
/// `h` must divide `T`.
pub fn goursat_fd_oracle(
    q: &PotentialSample,
    t_horizon: f64,
    h: f64,
) -> Result<TriangularKernel> {
    let m2f = 2.0 * t_horizon / h;
    let m2 = m2f.round() as usize;
    if m2 < 2 || (m2 as f64 - m2f).abs() > 1e-9 * m2f {
        return Err(Error::Contract(format!("step {h} does not divide horizon {t_horizon}")));
    }
    let n2 = m2 + 1;
    let qh: Vec<f64> = (0..=m2).map(|k| q.eval(0.5 * h * k as f64)).collect();
    let cq = cumulative_trapezoid(&qh, 0.5 * h);

    let mut v = DMatrix::zeros(n2, n2);
    for j in 0..n2 {
        v[(0, j)] = -0.5 * cq[j];
    }
    for i in 1..n2 {
        v[(i, i)] = 0.0;
        for j in i + 1..n2 {
            let src = -0.25 * qh[j - i] * v[(i - 1, j - 1)];
            v[(i, j)] = v[(i - 1, j)] + v[(i, j - 1)] - v[(i - 1, j - 1)] + h * h * src;
        }
    }

    let grid = UniformGrid::new(n2, 2.0 * t_horizon)?;
    TriangularKernel::new(grid, KernelOrientation::Characteristic, v)
}

/// Closed-form integral expressions for the partial derivatives of the
/// characteristic kernel (not numerical differencing):
///
/// ```text
/// v_eta = -(1/4) q(eta/2) - (1/4) int_0^xi  q((eta - z)/2) v(z, eta) dz
/// v_xi  =  (1/4) q(xi/2)  - (1/4) int_xi^eta q((z - xi)/2) v(xi, z) dz
///                         + (1/4) int_0^xi  q((xi - z)/2) v(z, xi) dz
/// ```
///
/// Returns `(v_xi, v_eta)` on the kernel lattice.
pub fn kernel_derivatives(
    kernel: &TriangularKernel,
    q: &PotentialSample,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if kernel.orientation() != KernelOrientation::Characteristic {
        return Err(Error::Contract(
            "kernel_derivatives requires a characteristic-coordinate kernel".into(),
        ));
    }
    let n2 = kernel.grid().n_points();
    let h = kernel.grid().step();
    if kernel.grid().length() > 2.0 * q.grid().length() + 1e-9 {
        return Err(Error::Contract("potential does not cover the kernel horizon".into()));
    }
    let qh: Vec<f64> = (0..n2).map(|k| q.eval(0.5 * h * k as f64)).collect();
    let v = kernel.values();

    let mut v_eta = DMatrix::zeros(n2, n2);
    let mut v_xi = DMatrix::zeros(n2, n2);
    for i in 0..n2 {
        for j in i..n2 {
            // integral over z in [0, xi_i] of q((eta_j - z)/2) v(z, eta_j)
            let mut acc = 0.0;
            for k in 0..=i {
                let w = if k == 0 || k == i { 0.5 * h } else { h };
                acc += w * qh[j - k] * v[(k, j)];
            }
            let int0 = if i == 0 { 0.0 } else { acc };
            v_eta[(i, j)] = -0.25 * qh[j] - 0.25 * int0;

            // integral over z in [xi_i, eta_j] of q((z - xi_i)/2) v(xi_i, z)
            let mut acc1 = 0.0;
            if j > i {
                for k in i..=j {
                    let w = if k == i || k == j { 0.5 * h } else { h };
                    acc1 += w * qh[k - i] * v[(i, k)];
                }
            }
            // integral over z in [0, xi_i] of q((xi_i - z)/2) v(z, xi_i)
            let mut acc2 = 0.0;
            if i > 0 {
                for k in 0..=i {
                    let w = if k == 0 || k == i { 0.5 * h } else { h };
                    acc2 += w * qh[i - k] * v[(k, i)];
                }
            }
            v_xi[(i, j)] = 0.25 * qh[i] - 0.25 * acc1 + 0.25 * acc2;
        }
    }
    Ok((v_xi, v_eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::trapezoid;
    use approx::assert_relative_eq;

    fn constant_q(c: f64, l: f64, n: usize) -> PotentialSample {
        PotentialSample::constant(UniformGrid::new(n, l).unwrap(), c).unwrap()
    }

    #[test]
    fn zero_potential_gives_zero_kernel() {
        let q = constant_q(0.0, 1.0, 51);
        let v = solve_goursat_picard(&q, 1.0, 1e-12).unwrap();
        assert_eq!(v.values().amax(), 0.0);
        let v_fd = goursat_fd_oracle(&q, 1.0, 0.02).unwrap();
        assert_eq!(v_fd.values().amax(), 0.0);
    }

    #[test]
    fn diagonal_matches_integral_of_q() {
        // w(x, x) = -(1/2) int_0^x q; for q = 2 this is -x.
        let q = constant_q(2.0, 1.0, 101);
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let w = v.to_wave().unwrap();
        let i = 50; // x = 0.5
        assert_relative_eq!(w.value(i, i), -0.5, epsilon = 1e-12);
        for i in 0..=100 {
            let x = 0.01 * i as f64;
            assert_relative_eq!(w.value(i, i), -x, epsilon = 1e-12);
        }
    }

    #[test]
    fn left_edge_is_zero() {
        let q = PotentialSample::from_fn(UniformGrid::new(101, 1.0).unwrap(), |x| {
            (3.0 * x).cos() + x
        })
        .unwrap();
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let w = v.to_wave().unwrap();
        for j in 0..w.grid().n_points() {
            assert!(w.value(0, j).abs() <= 1e-10, "w(0, t_{j}) = {}", w.value(0, j));
        }
    }

    #[test]
    fn fd_oracle_edge_value() {
        // q = 2: v(0, eta) = -eta/2 along the edge.
        let q = constant_q(2.0, 1.0, 101);
        let v = goursat_fd_oracle(&q, 1.0, 0.01).unwrap();
        for j in 0..v.grid().n_points() {
            let eta = v.grid().node(j);
            assert_relative_eq!(v.value(0, j), -0.5 * eta, epsilon = 1e-12);
        }
    }

    #[test]
    fn picard_matches_fd_oracle() {
        let q = constant_q(1.0, 1.0, 101);
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let v_fd = goursat_fd_oracle(&q, 1.0, 0.01 / 4.0).unwrap();
        let n = v.grid().n_points();
        let mut gap: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                gap = gap.max((v.value(i, j) - v_fd.value(4 * i, 4 * j)).abs());
            }
        }
        assert!(gap <= 1e-2, "picard vs fd gap {gap}");
    }

    #[test]
    fn fd_oracle_self_convergence_is_first_order() {
        let q = PotentialSample::from_fn(UniformGrid::new(201, 1.0).unwrap(), |x| x).unwrap();
        let probe = |k: &TriangularKernel, i: usize, j: usize| k.value(i, j);
        let v1 = goursat_fd_oracle(&q, 1.0, 0.02).unwrap();
        let v2 = goursat_fd_oracle(&q, 1.0, 0.01).unwrap();
        let v3 = goursat_fd_oracle(&q, 1.0, 0.005).unwrap();
        // v(0.5, 1.5): indices scale with refinement
        let d12 = (probe(&v1, 25, 75) - probe(&v2, 50, 150)).abs();
        let d23 = (probe(&v2, 50, 150) - probe(&v3, 100, 300)).abs();
        assert!(d23 > 0.0 && d12 / d23 >= 1.5, "ratio {}", d12 / d23);
    }

    #[test]
    fn sup_norm_bound_holds_pointwise() {
        let q = PotentialSample::from_fn(UniformGrid::new(101, 1.0).unwrap(), |x| {
            1.0 + (5.0 * x).sin()
        })
        .unwrap();
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let h = v.grid().step();
        let qabs: Vec<f64> = q.values().iter().map(|x| x.abs()).collect();
        let s_half = half_step_cumulative(&qabs, q.grid().step());
        let n = v.grid().n_points();
        for i in 0..n {
            for j in i..n {
                let s = 0.5 * s_half[j];
                let xi = h * i as f64;
                let bound = s * (0.5 * s * xi).exp();
                assert!(
                    v.value(i, j).abs() <= bound + 1e-8,
                    "bound violated at ({i}, {j}): {} > {}",
                    v.value(i, j).abs(),
                    bound
                );
            }
        }
    }

    #[test]
    fn kernel_map_is_nonlinear() {
        // The Picard series has even terms, so w(q) + w(-q) must not vanish.
        let qp = constant_q(1.0, 1.0, 101);
        let qm = constant_q(-1.0, 1.0, 101);
        let vp = solve_goursat_picard(&qp, 1.0, 1e-12).unwrap();
        let vm = solve_goursat_picard(&qm, 1.0, 1e-12).unwrap();
        let sum = vp.values() + vm.values();
        assert!(sum.amax() > 1e-4, "kernel map looks linear: {}", sum.amax());
    }

    #[test]
    fn derivatives_vanish_for_zero_potential() {
        let q = constant_q(0.0, 1.0, 51);
        let v = solve_goursat_picard(&q, 1.0, 1e-12).unwrap();
        let (v_xi, v_eta) = kernel_derivatives(&v, &q).unwrap();
        assert_eq!(v_xi.amax(), 0.0);
        assert_eq!(v_eta.amax(), 0.0);
    }

    #[test]
    fn derivative_edge_value_constant_potential() {
        // q = 2: v_eta(0, eta) = -(1/4) q(eta/2) = -0.5.
        let q = constant_q(2.0, 1.0, 101);
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let (_, v_eta) = kernel_derivatives(&v, &q).unwrap();
        for j in 0..v.grid().n_points() {
            assert_relative_eq!(v_eta[(0, j)], -0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivatives_match_difference_quotients_of_oracle() {
        let q = constant_q(1.0, 1.0, 101);
        let h = 0.005;
        let v_fd = goursat_fd_oracle(&q, 1.0, h).unwrap();
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let (v_xi, v_eta) = kernel_derivatives(&v, &q).unwrap();
        // compare at interior lattice points common to both grids (ratio 2)
        let n = v.grid().n_points();
        for i in (2..n - 2).step_by(7) {
            for j in (i + 2..n - 2).step_by(7) {
                let de = (v_fd.value(2 * i, 2 * j + 1) - v_fd.value(2 * i, 2 * j - 1)) / (2.0 * h);
                let dx = (v_fd.value(2 * i + 1, 2 * j) - v_fd.value(2 * i - 1, 2 * j)) / (2.0 * h);
                assert!((v_eta[(i, j)] - de).abs() < 1e-2, "v_eta mismatch at ({i},{j})");
                assert!((v_xi[(i, j)] - dx).abs() < 1e-2, "v_xi mismatch at ({i},{j})");
            }
        }
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let q = constant_q(40.0, 1.0, 51);
        let err = solve_goursat_picard(&q, 1.0, 1e-300).unwrap_err();
        assert!(matches!(err, Error::GoursatConvergence { .. }), "{err}");
    }

    #[test]
    fn quadrature_tolerance_on_diagonal_for_rough_q() {
        // step potential: kernel stays continuous, diagonal still matches
        // the running integral of q to quadrature accuracy
        let q = PotentialSample::from_fn(UniformGrid::new(201, 1.0).unwrap(), |x| {
            if x < 0.5 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let v = solve_goursat_picard(&q, 1.0, 1e-10).unwrap();
        let w = v.to_wave().unwrap();
        let h = q.grid().step();
        for i in 0..w.grid().n_points() {
            let int_q = trapezoid(&q.values()[..=i.max(1)], h).unwrap();
            let int_q = if i == 0 { 0.0 } else { int_q };
            assert!((w.value(i, i) + 0.5 * int_q).abs() < 1e-2);
        }
    }
}
