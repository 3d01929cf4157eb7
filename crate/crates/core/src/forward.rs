//! The forward dynamical map: wave solution, boundary response function,
//! control operator and its Volterra inverse.

use nalgebra::DMatrix;

use crate::goursat::{solve_goursat_picard, KernelOrientation, TriangularKernel};
use crate::grid::{PotentialSample, ResponseSample, UniformGrid};
use crate::{Error, Result};

/// Wave field u(x, t) on `[0, T] x [0, T]`; zero above the characteristic
/// `x = t`.
#[derive(Debug, Clone)]
pub struct Wavefield {
    grid: UniformGrid,
    values: DMatrix<f64>, // row x, column t
}

impl Wavefield {
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Final-time profile u(., T).
    pub fn final_state(&self) -> Vec<f64> {
        let n = self.grid.n_points();
        (0..n).map(|i| self.values[(i, n - 1)]).collect()
    }
}

/// Boundary response r(t) on `[0, 2T]`:
/// `r(t) = -(1/2) q(t/2) - (1/2) int_0^t q((t - z)/2) v(z, t) dz`,
/// with v the characteristic Goursat kernel.
pub fn response_function(
    q: &PotentialSample,
    t_horizon: f64,
    tol: f64,
) -> Result<ResponseSample> {
    let v = solve_goursat_picard(q, t_horizon, tol)?;
    response_from_kernel(&v, q)
}

/// Response function computed from an already-solved characteristic kernel.
pub fn response_from_kernel(
    kernel: &TriangularKernel,
    q: &PotentialSample,
) -> Result<ResponseSample> {
    if kernel.orientation() != KernelOrientation::Characteristic {
        return Err(Error::Contract(
            "response_from_kernel requires a characteristic-coordinate kernel".into(),
        ));
    }
    let n2 = kernel.grid().n_points();
    let h = kernel.grid().step();
    let qh: Vec<f64> = (0..n2).map(|k| q.eval(0.5 * h * k as f64)).collect();
    let mut r = vec![0.0; n2];
    for j in 0..n2 {
        let mut acc = 0.0;
        if j > 0 {
            for k in 0..=j {
                let w = if k == 0 || k == j { 0.5 * h } else { h };
                acc += w * qh[j - k] * kernel.value(k, j);
            }
        }
        r[j] = -0.5 * qh[j] - 0.5 * acc;
    }
    ResponseSample::new(0.5 * kernel.grid().length(), r)
}

fn check_compatible(w: &TriangularKernel, f: &[f64]) -> Result<usize> {
    if w.orientation() != KernelOrientation::Wave {
        return Err(Error::Contract("expected a wave-orientation kernel".into()));
    }
    let n = w.grid().n_points();
    if f.len() != n {
        return Err(Error::Contract(format!(
            "control has {} samples on a grid of {n} points",
            f.len()
        )));
    }
    Ok(n)
}

/// One row of the wave formula at time-node `j`:
/// `u(x_i, t_j) = f(t_j - x_i) + int_{x_i}^{t_j} w(x_i, s) f(t_j - s) ds`.
fn wave_row(w: &TriangularKernel, f: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    if j > i {
        for s in i..=j {
            let wt = if s == i || s == j { 0.5 * h } else { h };
            acc += wt * w.value(i, s) * f[j - s];
        }
    }
    f[j - i] + acc
}

/// Solve the wave problem for a boundary control `f` sampled on `[0, T]`.
/// Requires `f(0) = 0` (Dirichlet compatibility).
pub fn wave_solve(
    q: &PotentialSample,
    f: &[f64],
    t_horizon: f64,
    tol: f64,
) -> Result<Wavefield> {
    let v = solve_goursat_picard(q, t_horizon, tol)?;
    let w = v.to_wave()?;
    wave_solve_kernel(&w, f)
}

/// Wave solution from an already-solved wave kernel.
pub fn wave_solve_kernel(w: &TriangularKernel, f: &[f64]) -> Result<Wavefield> {
    let n = check_compatible(w, f)?;
    let fmax = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if f[0].abs() > 1e-9 * fmax.max(1.0) {
        return Err(Error::Contract(format!(
            "control must vanish at t = 0, found {}",
            f[0]
        )));
    }
    let h = w.grid().step();
    let mut u = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            u[(i, j)] = wave_row(w, f, i, j, h);
        }
        // zero above the characteristic by construction (finite speed)
    }
    Ok(Wavefield {
        grid: *w.grid(),
        values: u,
    })
}

/// Final wave profile `z(x) = u(x, T)` produced by a control `f`.
pub fn control_apply(q: &PotentialSample, f: &[f64], t_horizon: f64, tol: f64) -> Result<Vec<f64>> {
    let v = solve_goursat_picard(q, t_horizon, tol)?;
    control_apply_kernel(&v.to_wave()?, f)
}

/// Same as [`control_apply`] with a precomputed wave kernel.
pub fn control_apply_kernel(w: &TriangularKernel, f: &[f64]) -> Result<Vec<f64>> {
    let n = check_compatible(w, f)?;
    let h = w.grid().step();
    Ok((0..n).map(|i| wave_row(w, f, i, n - 1, h)).collect())
}

/// Result of the Volterra back-substitution in [`control_invert`].
#[derive(Debug, Clone)]
pub struct ControlFit {
    pub control: Vec<f64>,
    /// Max-norm residual of the discrete Volterra system.
    pub residual: f64,
}

/// Recover the control `f` that produces a prescribed final state `z`:
/// solve `z(x) = f(T - x) + int_x^T w(x, s) f(T - s) ds` by marching from
/// `x = T` down to 0 (second-kind Volterra equation, always solvable).
pub fn control_invert(
    q: &PotentialSample,
    z: &[f64],
    t_horizon: f64,
    tol: f64,
) -> Result<ControlFit> {
    let v = solve_goursat_picard(q, t_horizon, tol)?;
    control_invert_kernel(&v.to_wave()?, z)
}

/// Same as [`control_invert`] with a precomputed wave kernel.
pub fn control_invert_kernel(w: &TriangularKernel, z: &[f64]) -> Result<ControlFit> {
    let n = check_compatible(w, z)?;
    let h = w.grid().step();
    // g(s) := f(T - s); march the index of x downward
    let mut g = vec![0.0; n];
    g[n - 1] = z[n - 1];
    for i in (0..n - 1).rev() {
        let mut acc = 0.0;
        for s in i + 1..n {
            let wt = if s == n - 1 { 0.5 * h } else { h };
            acc += wt * w.value(i, s) * g[s];
        }
        g[i] = (z[i] - acc) / (1.0 + 0.5 * h * w.value(i, i));
    }
    let f: Vec<f64> = (0..n).map(|k| g[n - 1 - k]).collect();
    // report the residual of the discrete system
    let mut residual: f64 = 0.0;
    for i in 0..n {
        residual = residual.max((wave_row(w, &f, i, n - 1, h) - z[i]).abs());
    }
    Ok(ControlFit {
        control: f,
        residual,
    })
}
