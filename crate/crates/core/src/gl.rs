//! Gelfand-Levitan recoveries from the connecting kernel: the local
//! equation
//!
//! ```text
//! V(y,t) + c^T(y,t) + int_y^T c^T(t,s) V(y,s) ds = 0,   0 < y < t < T,
//! ```
//!
//! the classical equation
//!
//! ```text
//! F(x,t) + K(x,t) + int_0^x K(x,s) F(s,t) ds = 0,   0 <= t < x,
//! q(x) = 2 d/dx K(x,x),
//! ```
//!
//! related by the relabeling `K(x,t) = V(T-x, T-t)`, `F(x,t) = c^T(T-x,
//! T-t)`, and the operator identity `(I+K)* C^T (I+K) = I` used as a
//! residual diagnostic.
//!
//! The local equation determines V; its diagonal is read through the
//! relabeling, `q(x) = 2 d/dx V(T-x, T-x)`, which is the orientation
//! consistent with the classical recovery (the raw diagonal V(y,y) carries
//! the reflected potential).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::connecting::{solve_second_kind, ConnectingKernel};
use crate::goursat::{KernelOrientation, TriangularKernel};
use crate::grid::{first_derivative, trap_weights, UniformGrid};
use crate::{Error, Result};

/// Output of the local Gelfand-Levitan solve.
#[derive(Debug, Clone)]
pub struct GlRecovery {
    /// V(y, t) on the upper triangle y <= t.
    pub kernel: TriangularKernel,
    /// Diagonal trace V(y, y).
    pub diagonal: Vec<f64>,
    /// Recovered potential on [0, T] (node i at x = i h).
    pub q_values: Vec<f64>,
    /// Edge values V(y, T), reported as a Goursat-condition diagnostic.
    pub edge: Vec<f64>,
    /// Largest linear-solve residual across y nodes.
    pub residual: f64,
}

/// Output of the classical Gelfand-Levitan solve.
#[derive(Debug, Clone)]
pub struct ClassicalGlRecovery {
    /// K(x, t) on the lower triangle t <= x (row x, column t).
    pub kernel: DMatrix<f64>,
    pub grid: UniformGrid,
    /// Diagonal trace K(x, x).
    pub diagonal: Vec<f64>,
    pub q_values: Vec<f64>,
    pub residual: f64,
}

/// Solve the local equation for every grid y and recover q.
pub fn gl_local_solve(ck: &ConnectingKernel) -> Result<GlRecovery> {
    let n = ck.grid().n_points();
    let m = n - 1;
    let h = ck.grid().step();
    let c = ck.values();

    let rows: Vec<Result<(Vec<f64>, f64)>> = (0..m)
        .into_par_iter()
        .map(|i| {
            // unknown s -> V(y_i, s) on [y_i, T]; equation indexed by t
            let len = n - i;
            let w = trap_weights(len, h);
            let mut a = DMatrix::identity(len, len);
            for t in 0..len {
                for s in 0..len {
                    a[(t, s)] += c[(i + t, i + s)] * w[s];
                }
            }
            let rhs: Vec<f64> = (0..len).map(|t| -c[(i, i + t)]).collect();
            let (sol, residual) =
                solve_second_kind(&a, std::slice::from_ref(&rhs)).map_err(|e| match e {
                    Error::SingularSystem(_) => Error::SingularSystem(format!(
                        "local Gelfand-Levitan system at y = {}",
                        i as f64 * h
                    )),
                    other => other,
                })?;
            Ok((sol[0].iter().copied().collect(), residual))
        })
        .collect();

    let mut v = DMatrix::zeros(n, n);
    let mut residual: f64 = 0.0;
    for (i, row) in rows.into_iter().enumerate() {
        let (sol, res) = row?;
        for (b, val) in sol.iter().enumerate() {
            v[(i, i + b)] = *val;
        }
        residual = residual.max(res);
    }
    // y = T degenerates to V(T,T) = -c^T(T,T) = 0
    v[(m, m)] = -c[(m, m)];

    let diagonal: Vec<f64> = (0..n).map(|i| v[(i, i)]).collect();
    let edge: Vec<f64> = (0..n).map(|i| v[(i, m)]).collect();
    let dd = first_derivative(&diagonal, h)?;
    // diagonal in reflected coordinates: q(x) = 2 d/dx V(T-x, T-x)
    let q_values: Vec<f64> = (0..n).map(|a| -2.0 * dd[m - a]).collect();

    let kernel = TriangularKernel::new(*ck.grid(), KernelOrientation::InverseControl, v)?;
    Ok(GlRecovery {
        kernel,
        diagonal,
        q_values,
        edge,
        residual,
    })
}

/// The classical-equation input obtained from the connecting kernel by the
/// relabeling `F(x,t) = c^T(T-x, T-t)`.
pub fn relabel_connecting(ck: &ConnectingKernel) -> DMatrix<f64> {
    let n = ck.grid().n_points();
    let m = n - 1;
    DMatrix::from_fn(n, n, |a, b| ck.values()[(m - a, m - b)])
}

/// Solve the classical equation for every grid x and recover q.
/// `f` must be a symmetric kernel sampled on `grid x grid`.
pub fn gl_classical_solve(f: &DMatrix<f64>, grid: &UniformGrid) -> Result<ClassicalGlRecovery> {
    let n = grid.n_points();
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::Contract("kernel/grid dimension mismatch".into()));
    }
    let h = grid.step();

    let rows: Vec<Result<(Vec<f64>, f64)>> = (1..n)
        .into_par_iter()
        .map(|i| {
            // unknown s -> K(x_i, s) on [0, x_i]; equation indexed by t
            let len = i + 1;
            let w = trap_weights(len, h);
            let mut a = DMatrix::identity(len, len);
            for t in 0..len {
                for s in 0..len {
                    a[(t, s)] += f[(s, t)] * w[s];
                }
            }
            let rhs: Vec<f64> = (0..len).map(|t| -f[(i, t)]).collect();
            let (sol, residual) =
                solve_second_kind(&a, std::slice::from_ref(&rhs)).map_err(|e| match e {
                    Error::SingularSystem(_) => Error::SingularSystem(format!(
                        "classical Gelfand-Levitan system at x = {}",
                        i as f64 * h
                    )),
                    other => other,
                })?;
            Ok((sol[0].iter().copied().collect(), residual))
        })
        .collect();

    let mut k = DMatrix::zeros(n, n);
    k[(0, 0)] = -f[(0, 0)];
    let mut residual: f64 = 0.0;
    for (idx, row) in rows.into_iter().enumerate() {
        let (sol, res) = row?;
        let i = idx + 1;
        for (t, val) in sol.iter().enumerate() {
            k[(i, t)] = *val;
        }
        residual = residual.max(res);
    }

    let diagonal: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let dd = first_derivative(&diagonal, h)?;
    let q_values: Vec<f64> = dd.iter().map(|v| 2.0 * v).collect();
    Ok(ClassicalGlRecovery {
        kernel: k,
        grid: *grid,
        diagonal,
        q_values,
        residual,
    })
}

/// Max-norm deviation of the discrete `(I+K)* C^T (I+K)` from the identity,
/// where K has kernel V from the local solve:
/// `(K a)(t) = int_0^t V(y,t) a(y) dy`,
/// `(K* b)(t) = int_t^T V(t,y) b(y) dy`.
/// The two discretizations below are exact adjoints in the weighted inner
/// product.
pub fn operator_identity_deviation(ck: &ConnectingKernel, gl: &GlRecovery) -> Result<f64> {
    let n = ck.grid().n_points();
    if gl.kernel.grid().n_points() != n {
        return Err(Error::Contract("kernel/grid dimension mismatch".into()));
    }
    let h = ck.grid().step();
    let v = gl.kernel.values();

    // row-dependent trapezoid weights over the moving integration window
    let mut k_op: DMatrix<f64> = DMatrix::identity(n, n);
    for t in 0..n {
        for y in 0..=t {
            let tau = if y == 0 || y == t { 0.5 * h } else { h };
            k_op[(t, y)] += tau * v[(y, t)];
        }
    }
    let mut k_adj: DMatrix<f64> = DMatrix::identity(n, n);
    for t in 0..n {
        for y in t..n {
            let sigma = if y == t || y == n - 1 { 0.5 * h } else { h };
            k_adj[(t, y)] += sigma * v[(t, y)];
        }
    }
    let c_full = ck.nystrom_matrix();
    let product = k_adj * c_full * k_op;
    let ident: DMatrix<f64> = DMatrix::identity(n, n);
    let dev = (&product - ident).amax();
    Ok(dev)
}
