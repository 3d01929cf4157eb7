//! Potential recovery by the Krein-type equations of the boundary control
//! method: for each horizon T solve
//!
//! ```text
//! (I + C^T) f_0 = T - t,
//! (I + C^T) f_1 = 1 - int_t^T r(s - t) (T - s) ds,
//! ```
//!
//! read the boundary traces mu_j(T) = f_j(0), and recover
//! `q(T) = mu_j''(T) / mu_j(T)`. The traces solve mu'' = q mu with Cauchy
//! data (0, 1) and (1, 0), so at least one of them is nonzero at every T
//! and the recovery can switch between them.

use rayon::prelude::*;

use crate::connecting::{build_connecting_kernel, build_p, solve_second_kind, PositivityReport};
use crate::grid::{second_derivative, trap_weights, PotentialSample, ResponseSample, UniformGrid};
use crate::{Error, Result};

/// Relative zero guard for the trace denominators in `mu''/mu`.
const MU_GUARD: f64 = 1e-6;

/// Which Cauchy trace a Krein solve targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KreinVariant {
    /// mu_0(0) = 0, mu_0'(0) = 1 (right-hand side T - t).
    SineLike,
    /// mu_1(0) = 1, mu_1'(0) = 0.
    CosineLike,
}

/// One Krein solve at a fixed horizon.
#[derive(Debug, Clone)]
pub struct KreinSolution {
    pub horizon: f64,
    pub variant: KreinVariant,
    /// The solved control f_j^T on [0, T].
    pub control: Vec<f64>,
    /// Boundary trace mu_j(T) = f_j^T(0).
    pub mu: f64,
    /// Max-norm residual of the discrete second-kind system.
    pub residual: f64,
}

/// Connecting-kernel matrix for the sub-horizon `k h`, assembled from the
/// half-step cumulative response `ph` (entry `l` holds p(l h / 2)).
fn sub_kernel(ph: &[f64], k: usize) -> nalgebra::DMatrix<f64> {
    let mut c = nalgebra::DMatrix::zeros(k + 1, k + 1);
    for i in 0..=k {
        for j in i..=k {
            let v = ph[2 * (2 * k - i - j)] - ph[2 * (j - i)];
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

fn krein_rhs(r: &ResponseSample, k: usize, h: f64, variant: KreinVariant) -> Vec<f64> {
    match variant {
        KreinVariant::SineLike => (0..=k).map(|i| (k - i) as f64 * h).collect(),
        KreinVariant::CosineLike => {
            let rv = r.values();
            (0..=k)
                .map(|i| {
                    // int_{t_i}^{T} r(s - t_i) (T - s) ds
                    let mut acc = 0.0;
                    if k > i {
                        for s in i..=k {
                            let w = if s == i || s == k { 0.5 * h } else { h };
                            acc += w * rv[s - i] * (k - s) as f64 * h;
                        }
                    }
                    1.0 - acc
                })
                .collect()
        }
    }
}

fn solve_krein_with_ph(
    r: &ResponseSample,
    ph: &[f64],
    k: usize,
    variant: KreinVariant,
) -> Result<KreinSolution> {
    let h = r.grid().step();
    let c = sub_kernel(ph, k);
    let w = trap_weights(k + 1, h);
    let mut a = nalgebra::DMatrix::identity(k + 1, k + 1);
    for i in 0..=k {
        for j in 0..=k {
            a[(i, j)] += c[(i, j)] * w[j];
        }
    }
    let rhs = krein_rhs(r, k, h, variant);
    let (sols, residual) = solve_second_kind(&a, std::slice::from_ref(&rhs)).map_err(|e| {
        match e {
            Error::SingularSystem(_) => Error::SingularSystem(format!(
                "Krein system at horizon {}: discrete connecting operator lost positivity",
                k as f64 * h
            )),
            other => other,
        }
    })?;
    let control: Vec<f64> = sols[0].iter().copied().collect();
    Ok(KreinSolution {
        horizon: k as f64 * h,
        variant,
        mu: control[0],
        control,
        residual,
    })
}

/// Solve one Krein equation at horizon `t_horizon` (a node of the response
/// grid, at least one step).
pub fn solve_krein(
    r: &ResponseSample,
    t_horizon: f64,
    variant: KreinVariant,
) -> Result<KreinSolution> {
    let k = r.grid().index_of(t_horizon)?;
    if k < 1 {
        return Err(Error::Contract("horizon must be at least one grid step".into()));
    }
    if t_horizon > r.horizon() + 1e-9 {
        return Err(Error::Domain(format!(
            "response covers [0, {}], cannot solve at horizon {t_horizon}",
            2.0 * r.horizon()
        )));
    }
    let ph = build_p(r);
    solve_krein_with_ph(r, &ph, k, variant)
}

/// Recovered potential with its diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub grid: UniformGrid,
    /// Recovered q; NaN at gap nodes.
    pub q_values: Vec<f64>,
    /// Trace used per node; `None` where both traces sat under the guard.
    pub variants: Vec<Option<KreinVariant>>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// Largest linear-solve residual across all horizons.
    pub residual: f64,
    pub positivity: PositivityReport,
    /// Indices where neither trace was usable.
    pub gaps: Vec<usize>,
}

impl RecoveryResult {
    pub fn potential(&self) -> Result<PotentialSample> {
        if !self.gaps.is_empty() {
            return Err(Error::Numeric(format!(
                "recovery has {} gap nodes",
                self.gaps.len()
            )));
        }
        PotentialSample::new(self.grid, self.q_values.clone())
    }
}

/// Pointwise `mu''/mu` with the variant-switching rule: prefer the sine-like
/// trace, fall back to the cosine-like one where it sits under the zero
/// guard, and report a gap where both do.
pub fn traces_to_q(
    mu0: &[f64],
    mu1: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<Option<KreinVariant>>, Vec<usize>)> {
    if mu0.len() != mu1.len() {
        return Err(Error::Contract("trace length mismatch".into()));
    }
    let d0 = second_derivative(mu0, h)?;
    let d1 = second_derivative(mu1, h)?;
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let eps0 = MU_GUARD * amax(mu0);
    let eps1 = MU_GUARD * amax(mu1);
    let mut q = vec![0.0; mu0.len()];
    let mut variants = vec![None; mu0.len()];
    let mut gaps = Vec::new();
    for i in 0..mu0.len() {
        if mu0[i].abs() >= eps0 {
            q[i] = d0[i] / mu0[i];
            variants[i] = Some(KreinVariant::SineLike);
        } else if mu1[i].abs() >= eps1 {
            q[i] = d1[i] / mu1[i];
            variants[i] = Some(KreinVariant::CosineLike);
        } else {
            q[i] = f64::NAN;
            gaps.push(i);
        }
    }
    Ok((q, variants, gaps))
}

/// Boundary-control recovery of q on `(0, t_max]` from a response on
/// `[0, 2 t_max]` or longer. One independent pair of Krein solves per grid
/// horizon, run in parallel.
pub fn recover_q_bc(r: &ResponseSample, t_max: f64) -> Result<RecoveryResult> {
    let m = r.grid().index_of(t_max)?;
    if m < 3 {
        return Err(Error::Contract(
            "recovery needs at least 3 horizon steps".into(),
        ));
    }
    if t_max > r.horizon() + 1e-9 {
        return Err(Error::Domain(format!(
            "response covers [0, {}], cannot recover on [0, {t_max}]",
            2.0 * r.horizon()
        )));
    }
    let h = r.grid().step();
    let ph = build_p(r);

    let solves: Vec<Result<(f64, f64, f64)>> = (1..=m)
        .into_par_iter()
        .map(|k| {
            let s0 = solve_krein_with_ph(r, &ph, k, KreinVariant::SineLike)?;
            let s1 = solve_krein_with_ph(r, &ph, k, KreinVariant::CosineLike)?;
            Ok((s0.mu, s1.mu, s0.residual.max(s1.residual)))
        })
        .collect();

    let mut mu0 = Vec::with_capacity(m + 1);
    let mut mu1 = Vec::with_capacity(m + 1);
    mu0.push(0.0); // mu_0(0) = 0
    mu1.push(1.0); // mu_1(0) = 1
    let mut residual: f64 = 0.0;
    for s in solves {
        let (a, b, res) = s?;
        mu0.push(a);
        mu1.push(b);
        residual = residual.max(res);
    }

    let (q_values, variants, gaps) = traces_to_q(&mu0, &mu1, h)?;
    // positivity of the full-horizon operator, for diagnostics
    let sub = ResponseSample::new(t_max, r.values()[..=2 * m].to_vec())?;
    let positivity = build_connecting_kernel(&sub)?.positivity_margin();
    Ok(RecoveryResult {
        grid: UniformGrid::new(m + 1, t_max)?,
        q_values,
        variants,
        mu0,
        mu1,
        residual,
        positivity,
        gaps,
    })
}
