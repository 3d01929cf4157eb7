//! The connecting operator C^T = (W^T)* W^T and its integral kernel,
//! assembled directly from the boundary response:
//!
//! ```text
//! c^T(t, s) = p(2T - t - s) - p(t - s),   p(t) = (1/2) int_0^|t| r,
//! ```
//!
//! so that C^T = I + c^T as an operator on L^2(0, T). All constructions here
//! keep every kernel argument on a lattice node, which makes the assembled
//! matrix exactly symmetric.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::grid::{half_step_cumulative, trap_weights, ResponseSample, UniformGrid};
use crate::{Error, Result};

/// Cumulative response p(t) = (1/2) int_0^|t| r, sampled at half the
/// response step: entry `k` holds p(k h / 2) where `h` is the step of the
/// response grid on `[0, 2T]`.
pub fn build_p(r: &ResponseSample) -> Vec<f64> {
    half_step_cumulative(r.values(), r.grid().step())
        .into_iter()
        .map(|v| 0.5 * v)
        .collect()
}

/// Spectral-positivity diagnostic: smallest eigenvalue of the symmetrized
/// Nystrom matrix of I + c^T.
#[derive(Debug, Clone, Copy)]
pub struct PositivityReport {
    pub min_eig: f64,
    pub positive: bool,
    /// Number of quadrature nodes used.
    pub n: usize,
}

/// The kernel c^T of the connecting operator, sampled on `[0, T]^2`.
#[derive(Debug, Clone)]
pub struct ConnectingKernel {
    horizon: f64,
    grid: UniformGrid,
    values: DMatrix<f64>,
    /// p at half-step resolution when the kernel was built from a response.
    p_half: Option<Vec<f64>>,
}

/// Assemble c^T from a response sampled on `[0, 2T]` with an even number of
/// intervals, so that `T` itself is a node.
pub fn build_connecting_kernel(r: &ResponseSample) -> Result<ConnectingKernel> {
    let n2 = r.grid().n_points();
    if n2 % 2 == 0 {
        return Err(Error::Contract(
            "response must have an odd number of samples so T is a node".into(),
        ));
    }
    let m = (n2 - 1) / 2;
    let h = r.grid().step();
    let ph = build_p(r);
    let grid = UniformGrid::new(m + 1, r.horizon())?;
    let mut c = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        for j in i..=m {
            // t = i h, s = j h: both kernel arguments are lattice nodes
            let v = ph[2 * (2 * m - i - j)] - ph[2 * (j - i)];
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    debug_assert!((grid.step() - h).abs() <= 1e-12 * h);
    Ok(ConnectingKernel {
        horizon: r.horizon(),
        grid,
        values: c,
        p_half: Some(ph),
    })
}

impl ConnectingKernel {
    /// Wrap an externally assembled kernel matrix (used by the spectral
    /// representation).
    pub fn from_matrix(t_horizon: f64, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Contract("connecting kernel must be square".into()));
        }
        let sym_gap = (&values - values.transpose()).amax();
        if sym_gap > 1e-8 * values.amax().max(1.0) {
            return Err(Error::Contract(format!(
                "connecting kernel must be symmetric (gap {sym_gap:.3e})"
            )));
        }
        let grid = UniformGrid::new(values.nrows(), t_horizon)?;
        Ok(Self {
            horizon: t_horizon,
            grid,
            values,
            p_half: None,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// p at half-step resolution, when built from a response.
    pub fn p_half(&self) -> Option<&[f64]> {
        self.p_half.as_deref()
    }

    /// Quadrature application of the integral part: `(c f)(t_i)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n_points();
        if f.len() != n {
            return Err(Error::Contract(format!(
                "operand has {} samples on a grid of {n} points",
                f.len()
            )));
        }
        let w = trap_weights(n, self.grid.step());
        Ok((0..n)
            .map(|i| (0..n).map(|j| w[j] * self.values[(i, j)] * f[j]).sum())
            .collect())
    }

    /// Nystrom matrix of the full operator: `I + c W` with W the diagonal of
    /// trapezoid weights.
    pub fn nystrom_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n_points();
        let w = trap_weights(n, self.grid.step());
        let mut a: DMatrix<f64> = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += self.values[(i, j)] * w[j];
            }
        }
        a
    }

    /// Smallest eigenvalue of `I + W^{1/2} c W^{1/2}`, the symmetric matrix
    /// similar to the Nystrom discretization of I + c^T. For an admissible
    /// response this operator is positive; a negative margin certifies that
    /// the data is not the response of any potential on `[0, T]`.
    pub fn positivity_margin(&self) -> PositivityReport {
        let n = self.grid.n_points();
        let w = trap_weights(n, self.grid.step());
        let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let mut a: DMatrix<f64> = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += s[i] * self.values[(i, j)] * s[j];
            }
        }
        let eig = SymmetricEigen::new(a);
        let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        PositivityReport {
            min_eig,
            positive: min_eig > 0.0,
            n,
        }
    }

    /// Weighted inner product `<f, g>` with trapezoid weights.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let w = trap_weights(self.grid.n_points(), self.grid.step());
        f.iter().zip(g).zip(&w).map(|((a, b), c)| a * b * c).sum()
    }

    /// Quadratic form `<(I + c^T) f, f>` of the full connecting operator.
    pub fn quadratic_form(&self, f: &[f64]) -> Result<f64> {
        let cf = self.apply(f)?;
        let total: Vec<f64> = f.iter().zip(&cf).map(|(a, b)| a + b).collect();
        Ok(self.inner(&total, f))
    }

    /// Restriction of the kernel to `[y, T]^2` as a principal submatrix,
    /// with the matching sub-grid (used by the local inverse method).
    pub fn restrict(&self, start: usize) -> Result<(UniformGrid, DMatrix<f64>)> {
        let n = self.grid.n_points();
        if start + 2 > n {
            return Err(Error::Contract(format!(
                "restriction to [{start}, {}] leaves fewer than 2 nodes",
                n - 1
            )));
        }
        let m = n - start;
        let sub = self.values.view((start, start), (m, m)).into_owned();
        let grid = UniformGrid::new(m, (m - 1) as f64 * self.grid.step())?;
        Ok((grid, sub))
    }
}

/// Solve `(I + c^T) f = rhs` for several right-hand sides at once via LU of
/// the Nystrom matrix. Returns the solutions and the largest max-norm
/// residual across columns.
pub fn solve_second_kind(
    matrix: &DMatrix<f64>,
    rhs: &[Vec<f64>],
) -> Result<(Vec<DVector<f64>>, f64)> {
    let n = matrix.nrows();
    let lu = matrix.clone().lu();
    let mut out = Vec::with_capacity(rhs.len());
    let mut residual: f64 = 0.0;
    for b in rhs {
        if b.len() != n {
            return Err(Error::Contract("right-hand side length mismatch".into()));
        }
        let bv = DVector::from_column_slice(b);
        let x = lu
            .solve(&bv)
            .ok_or_else(|| Error::SingularSystem("second-kind Nystrom matrix".into()))?;
        residual = residual.max((matrix * &x - &bv).amax());
        out.push(x);
    }
    Ok((out, residual))
}
