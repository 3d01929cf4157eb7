//! Remling's integral equations, driven by the A-amplitude
//! `A(t) = -2 r(2t)`:
//!
//! ```text
//! phi(x) = int_0^{|x|/2} A,      psi(t) = -1 - int_0^t phi,
//! k(x, t) = (1/2) [phi(x - t) - phi(x + t)],
//! y(x, t) + int_0^x k(t, s) y(x, s) ds = t,
//! z(x, t) + int_0^x k(t, s) z(x, s) ds = psi(t),
//! ```
//!
//! and the potential comes from either diagonal:
//! `q(x) = (d^2/dx^2 y(x, x)) / y(x, x)`, likewise for z.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::connecting::solve_second_kind;
use crate::grid::{
    cumulative_trapezoid, half_step_cumulative, second_derivative, trap_weights, ResponseSample,
    UniformGrid,
};
use crate::{Error, Result};

/// Relative zero guard for the diagonal in the recovery quotient.
const DIAG_GUARD: f64 = 1e-6;

/// Which of Remling's two equations to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemlingVariant {
    /// Right-hand side t; diagonal behaves like the sine-type solution
    /// (vanishes at x = 0).
    Y,
    /// Right-hand side psi; diagonal starts at -1.
    Z,
}

/// Recovery through one of Remling's equations.
#[derive(Debug, Clone)]
pub struct RemlingRecovery {
    pub grid: UniformGrid,
    pub variant: RemlingVariant,
    /// Diagonal trace y(x, x) or z(x, x).
    pub diagonal: Vec<f64>,
    /// Recovered q; NaN where the diagonal sits under the zero guard.
    pub q_values: Vec<f64>,
    pub gaps: Vec<usize>,
    /// Largest linear-solve residual across x nodes.
    pub residual: f64,
}

/// A-amplitude on `[0, T]` read off the response: `A(t) = -2 r(2t)`.
pub fn a_from_response(r: &ResponseSample) -> Result<(UniformGrid, Vec<f64>)> {
    let n2 = r.grid().n_points();
    if n2 % 2 == 0 {
        return Err(Error::Contract(
            "response must have an odd number of samples so T is a node".into(),
        ));
    }
    let m = (n2 - 1) / 2;
    let a: Vec<f64> = (0..=m).map(|i| -2.0 * r.values()[2 * i]).collect();
    Ok((UniformGrid::new(m + 1, r.horizon())?, a))
}

/// Solve one Remling equation up to horizon `t_max` (a response-grid node).
pub fn remling_solve(
    r: &ResponseSample,
    t_max: f64,
    variant: RemlingVariant,
) -> Result<RemlingRecovery> {
    let (agrid, a) = a_from_response(r)?;
    let m = agrid.index_of(t_max)?;
    if m < 3 {
        return Err(Error::Contract(
            "recovery needs at least 3 horizon steps".into(),
        ));
    }
    let h = agrid.step();
    // phi at half-step resolution: phi(l h) = int_0^{l h / 2} A = phih[l]
    let phih = half_step_cumulative(&a, h);
    let phi_nodes: Vec<f64> = (0..=m).map(|l| phih[l]).collect();
    let cphi = cumulative_trapezoid(&phi_nodes, h);
    let psi: Vec<f64> = cphi.iter().map(|v| -1.0 - v).collect();

    // k(t_a, s_b) = (1/2) [phi(|t_a - s_b|) - phi(t_a + s_b)], phi even
    let kk = |ta: usize, sb: usize| {
        0.5 * (phih[ta.abs_diff(sb)] - phih[ta + sb])
    };

    let rows: Vec<Result<(f64, f64)>> = (1..=m)
        .into_par_iter()
        .map(|i| {
            // Nystrom system over s, t in [0, x_i]
            let n = i + 1;
            let w = trap_weights(n, h);
            let mut mat = DMatrix::identity(n, n);
            for t in 0..n {
                for s in 0..n {
                    mat[(t, s)] += kk(t, s) * w[s];
                }
            }
            let rhs: Vec<f64> = match variant {
                RemlingVariant::Y => (0..n).map(|t| t as f64 * h).collect(),
                RemlingVariant::Z => psi[..n].to_vec(),
            };
            let (sol, residual) = solve_second_kind(&mat, std::slice::from_ref(&rhs))
                .map_err(|e| match e {
                    Error::SingularSystem(_) => Error::SingularSystem(format!(
                        "Remling system at x = {}",
                        i as f64 * h
                    )),
                    other => other,
                })?;
            Ok((sol[0][i], residual))
        })
        .collect();

    let mut diagonal = Vec::with_capacity(m + 1);
    diagonal.push(match variant {
        RemlingVariant::Y => 0.0,  // y(0, 0) = rhs t at t = 0
        RemlingVariant::Z => -1.0, // z(0, 0) = psi(0)
    });
    let mut residual: f64 = 0.0;
    for row in rows {
        let (d, res) = row?;
        diagonal.push(d);
        residual = residual.max(res);
    }

    let d2 = second_derivative(&diagonal, h)?;
    let dmax = diagonal.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let eps = DIAG_GUARD * dmax;
    let mut q_values = vec![0.0; m + 1];
    let mut gaps = Vec::new();
    for i in 0..=m {
        if diagonal[i].abs() >= eps {
            q_values[i] = d2[i] / diagonal[i];
        } else {
            q_values[i] = f64::NAN;
            gaps.push(i);
        }
    }

    Ok(RemlingRecovery {
        grid: UniformGrid::new(m + 1, t_max)?,
        variant,
        diagonal,
        q_values,
        gaps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::response_function;
    use crate::grid::PotentialSample;
    use crate::krein::recover_q_bc;
    use approx::assert_relative_eq;

    fn response_of_constant(c: f64, n: usize) -> ResponseSample {
        let q = PotentialSample::constant(UniformGrid::new(n, 1.0).unwrap(), c).unwrap();
        response_function(&q, 1.0, 1e-10).unwrap()
    }

    #[test]
    fn zero_response_y_diagonal_is_x() {
        let r = ResponseSample::new(1.0, vec![0.0; 201]).unwrap();
        let rec = remling_solve(&r, 1.0, RemlingVariant::Y).unwrap();
        let h = rec.grid.step();
        for (i, d) in rec.diagonal.iter().enumerate() {
            assert_relative_eq!(*d, h * i as f64, epsilon = 1e-12);
        }
        // x = 0 is the only node where the diagonal vanishes
        assert_eq!(rec.gaps, vec![0]);
        for (i, v) in rec.q_values.iter().enumerate() {
            if i > 0 {
                assert!(v.abs() < 1e-8, "q[{i}] = {v}");
            }
        }
    }

    #[test]
    fn zero_response_z_diagonal_is_minus_one() {
        let r = ResponseSample::new(1.0, vec![0.0; 201]).unwrap();
        let rec = remling_solve(&r, 1.0, RemlingVariant::Z).unwrap();
        for d in &rec.diagonal {
            assert_relative_eq!(*d, -1.0, epsilon = 1e-12);
        }
        assert!(rec.gaps.is_empty());
        for v in &rec.q_values {
            assert!(v.abs() < 1e-8);
        }
    }

    #[test]
    fn constant_potential_round_trip_both_variants() {
        let r = response_of_constant(1.0, 201);
        for variant in [RemlingVariant::Y, RemlingVariant::Z] {
            let rec = remling_solve(&r, 1.0, variant).unwrap();
            let h = rec.grid.step();
            for (i, v) in rec.q_values.iter().enumerate() {
                let x = h * i as f64;
                if x >= 0.1 {
                    assert!((v - 1.0).abs() <= 0.02, "{variant:?}: q({x}) = {v}");
                }
            }
        }
    }

    #[test]
    fn y_diagonal_matches_krein_sine_trace() {
        // Both equal the sine-type Cauchy solution of -u'' + q u = 0.
        let r = response_of_constant(1.0, 201);
        let rem = remling_solve(&r, 1.0, RemlingVariant::Y).unwrap();
        let bc = recover_q_bc(&r, 1.0).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in rem.diagonal.iter().zip(&bc.mu0) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 0.01 * 1.0f64.sinh(), "diagonal vs mu_0 gap {worst}");
    }

    #[test]
    fn cross_agreement_with_boundary_control() {
        let grid = UniformGrid::new(201, 1.0).unwrap();
        let q = PotentialSample::from_fn(grid, |x| (std::f64::consts::PI * x).sin() + 0.5)
            .unwrap();
        let r = response_function(&q, 1.0, 1e-10).unwrap();
        let rem = remling_solve(&r, 1.0, RemlingVariant::Y).unwrap();
        let bc = recover_q_bc(&r, 1.0).unwrap();
        let h = rem.grid.step();
        let mut worst = 0.0f64;
        for i in 0..rem.q_values.len() {
            let x = h * i as f64;
            if (0.1..=0.9).contains(&x) {
                worst = worst.max((rem.q_values[i] - bc.q_values[i]).abs());
            }
        }
        assert!(worst / 1.5 <= 0.01, "BC vs Remling gap {worst}");
    }

    #[test]
    fn even_sample_count_is_rejected() {
        let r = ResponseSample::new(1.0, vec![0.0; 200]).unwrap();
        assert!(remling_solve(&r, 1.0, RemlingVariant::Y).is_err());
    }
}
