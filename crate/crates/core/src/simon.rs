//! The Simon A-amplitude flow: evolve
//!
//! ```text
//! dA/dx = dA/dt + int_0^t A(s, x) A(t - s, x) ds
//! ```
//!
//! from A(., 0) = -2 r(2 .) on the shrinking triangle
//! `{0 <= x <= a, 0 <= t <= a - x}` and read the potential off the flow:
//! `q(x) = A(0+, x)`.

use crate::grid::{PotentialSample, ResponseSample, UniformGrid};
use crate::remling::a_from_response;
use crate::{Error, Result};

/// Blow-up guard on the amplitude magnitude.
const FLOW_CAP: f64 = 1e6;

/// Trapezoid self-convolution `int_0^{t_j} A(s) A(t_j - s) ds` at node j.
fn self_convolution_at(a: &[f64], j: usize, h: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..=j {
        let w = if k == 0 || k == j { 0.5 * h } else { h };
        acc += w * a[k] * a[j - k];
    }
    acc
}

/// March the flow from the initial amplitude `a0` sampled on `[0, a]`.
/// Each x-step combines the exact unit-speed characteristic shift
/// (re-index t <- t + h) with an explicit trapezoid source term; the domain
/// shrinks by one node per step. Returns `q(x) = A(0, x)` on `[0, a]`.
pub fn simon_flow(a0: &[f64], length: f64) -> Result<PotentialSample> {
    let grid = UniformGrid::new(a0.len(), length)?;
    let h = grid.step();
    let m = a0.len() - 1;
    let mut q = Vec::with_capacity(m + 1);
    q.push(a0[0]);
    let mut a = a0.to_vec();
    for n in 1..=m {
        // A_new(t_i, x_n) = A(t_{i+1}, x_{n-1}) + h * conv(t_{i+1}, x_{n-1})
        let mut next = Vec::with_capacity(m - n + 1);
        for i in 0..=m - n {
            next.push(a[i + 1] + h * self_convolution_at(&a, i + 1, h));
        }
        a = next;
        let sup = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !sup.is_finite() || sup > FLOW_CAP {
            return Err(Error::FlowBlowUp(n as f64 * h));
        }
        q.push(a[0]);
    }
    PotentialSample::new(grid, q)
}

/// Run the flow from a boundary response: `A(., 0) = -2 r(2 .)`.
pub fn simon_from_response(r: &ResponseSample) -> Result<PotentialSample> {
    let (grid, a0) = a_from_response(r)?;
    simon_flow(&a0, grid.length())
}
