//! Uniform grids, sampled functions, quadrature and numerical
//! differentiation shared by all modules.

use crate::{Error, Result};

/// Uniform grid of `n_points` nodes on `[0, length]`; node `i` sits at
/// `i * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    n_points: usize,
    length: f64,
}

impl UniformGrid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidGrid(format!("invalid length {length}")));
        }
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.node(i))
    }

    /// Grid with the same step truncated to the first `m + 1` nodes.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m + 1 > self.n_points {
            return Err(Error::InvalidGrid(format!(
                "prefix of {} nodes exceeds grid of {}",
                m + 1,
                self.n_points
            )));
        }
        UniformGrid::new(m + 1, m as f64 * self.step())
    }

    /// Nearest node index for a coordinate that must lie on the grid.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let h = self.step();
        let i = (x / h).round();
        if i < 0.0 || i as usize >= self.n_points || (x - i * h).abs() > 1e-9 * self.length.max(1.0)
        {
            return Err(Error::Contract(format!("{x} is not a grid node")));
        }
        Ok(i as usize)
    }
}

/// Real potential q sampled on a uniform grid over `[0, L]`.
#[derive(Debug, Clone)]
pub struct PotentialSample {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl PotentialSample {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Contract(format!(
                "potential has {} values on a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("potential contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_points()])
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear evaluation, clamped to `[0, L]`.
    pub fn eval(&self, x: f64) -> f64 {
        interp_uniform(&self.values, self.grid.step(), x)
    }
}

/// Response function r sampled on `[0, 2T]`.
#[derive(Debug, Clone)]
pub struct ResponseSample {
    horizon: f64,
    grid: UniformGrid,
    values: Vec<f64>,
}

impl ResponseSample {
    /// `values` must sample `[0, 2 * horizon]` uniformly.
    pub fn new(horizon: f64, values: Vec<f64>) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Contract(format!("invalid horizon {horizon}")));
        }
        let grid = UniformGrid::new(values.len(), 2.0 * horizon)?;
        Ok(Self {
            horizon,
            grid,
            values,
        })
    }

    /// Horizon T; the sample covers `[0, 2T]`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        interp_uniform(&self.values, self.grid.step(), t)
    }

    /// Sample with every value negated (corrupted-data scenarios).
    pub fn negated(&self) -> Self {
        Self {
            horizon: self.horizon,
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Piecewise-linear interpolation on a uniform sample, clamped at the ends.
pub fn interp_uniform(values: &[f64], h: f64, x: f64) -> f64 {
    let n = values.len();
    if x <= 0.0 {
        return values[0];
    }
    let s = x / h;
    let i = s.floor() as usize;
    if i + 1 >= n {
        return values[n - 1];
    }
    let frac = s - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Composite trapezoid rule over the whole sample.
pub fn trapezoid(values: &[f64], h: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Contract("trapezoid needs at least 2 samples".into()));
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    Ok(h * (0.5 * (values[0] + values[values.len() - 1]) + inner))
}

/// Running trapezoid integral; entry `k` holds the integral over `[0, k h]`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..values.len() {
        acc += 0.5 * h * (values[k - 1] + values[k]);
        out.push(acc);
    }
    out
}

/// Trapezoid quadrature weights for `n` nodes at step `h` (all zero for a
/// single node).
pub fn trap_weights(n: usize, h: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Second derivative: central stencil at interior nodes, one-sided
/// second-order stencils at the two endpoints.
pub fn second_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Contract(
            "second_derivative needs at least 3 samples".into(),
        ));
    }
    let h2 = h * h;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (values[i - 1] - 2.0 * values[i] + values[i + 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
        out[n - 1] =
            (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
    } else {
        out[0] = (values[0] - 2.0 * values[1] + values[2]) / h2;
        out[n - 1] = out[0];
    }
    Ok(out)
}

/// First derivative: central stencil inside, one-sided second-order at the
/// endpoints.
pub fn first_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Contract(
            "first_derivative needs at least 3 samples".into(),
        ));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    Ok(out)
}

/// Refine a sample to step `h/2` with midpoint averages; entry `k` holds the
/// value at `k h / 2`.
pub fn refine_half(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(2 * n - 1);
    for i in 0..n - 1 {
        out.push(values[i]);
        out.push(0.5 * (values[i] + values[i + 1]));
    }
    out.push(values[n - 1]);
    out
}

/// Running integral sampled at half steps: entry `k` holds the trapezoid
/// integral of the piecewise-linear interpolant over `[0, k h / 2]`.
pub fn half_step_cumulative(values: &[f64], h: f64) -> Vec<f64> {
    cumulative_trapezoid(&refine_half(values), 0.5 * h)
}
