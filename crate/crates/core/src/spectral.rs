//! Spectral data of the finite-interval Dirichlet problem and its bridges
//! to the dynamical picture: the regularized-measure representation of the
//! connecting kernel, the integrated response, the Titchmarsh-Weyl
//! m-function, and the A-amplitude Laplace-transform check
//! `m(-k^2) = -k - int_0^a A(t) e^{-2tk} dt + O(e^{-2ak})`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::connecting::ConnectingKernel;
use crate::forward::response_function;
use crate::grid::{trapezoid, PotentialSample, UniformGrid};
use crate::{Error, Result};

/// Eigenvalue/weight pairs (lambda_n, alpha_n) of -d^2/dx^2 + q on [0, L]
/// with Dirichlet ends, next to the zero-potential reference pairs.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub length: f64,
    pub lambdas: Vec<f64>,
    /// alpha_n = 1 / ||phi(., lambda_n)||^2 for the solution with
    /// phi(0) = 0, phi'(0) = 1.
    pub alphas: Vec<f64>,
    /// lambda0_n = (n pi / L)^2.
    pub lambdas0: Vec<f64>,
    /// alpha0_n = 2 lambda0_n / L.
    pub alphas0: Vec<f64>,
}

impl SpectralData {
    pub fn n_max(&self) -> usize {
        self.lambdas.len()
    }
}

/// One transfer step across a cell of width `delta` with constant potential
/// offset `w2 = lambda - qbar`: exact trig/hyperbolic propagation of
/// (phi, phi').
fn cell_transfer(y: f64, yp: f64, w2: f64, delta: f64) -> (f64, f64) {
    let (c, s) = if w2 > 1e-12 {
        let om = w2.sqrt();
        ((om * delta).cos(), (om * delta).sin() / om)
    } else if w2 < -1e-12 {
        let ka = (-w2).sqrt();
        ((ka * delta).cosh(), (ka * delta).sinh() / ka)
    } else {
        let z = w2 * delta * delta;
        (1.0 - 0.5 * z, delta * (1.0 - z / 6.0))
    };
    (c * y + s * yp, -w2 * s * y + c * yp)
}

/// Zeros of phi(., lambda) in (0, L], counted as sign changes of the shot
/// solution at cell boundaries. Equals the number of Dirichlet eigenvalues
/// below lambda once the lattice resolves the oscillation.
fn count_zeros(qbar: &[f64], delta: f64, lambda: f64) -> usize {
    let (mut y, mut yp) = (0.0, 1.0);
    let mut count = 0;
    let mut prev = 0i8;
    for v in qbar {
        let (ny, nyp) = cell_transfer(y, yp, lambda - v, delta);
        y = ny;
        yp = nyp;
        let mag = y.abs().max(yp.abs());
        if mag > 1e100 {
            y /= mag;
            yp /= mag;
        }
        let sg = if y > 0.0 {
            1
        } else if y < 0.0 {
            -1
        } else {
            0
        };
        if sg != 0 {
            if prev != 0 && sg != prev {
                count += 1;
            }
            prev = sg;
        }
    }
    count
}

/// Shot solution values at the cell boundaries for a fixed lambda.
fn shoot_values(qbar: &[f64], delta: f64, lambda: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(qbar.len() + 1);
    let (mut y, mut yp) = (0.0, 1.0);
    out.push(y);
    for v in qbar {
        let (ny, nyp) = cell_transfer(y, yp, lambda - v, delta);
        y = ny;
        yp = nyp;
        out.push(y);
    }
    out
}

/// Eigenvalues and weights with an explicit cell count (exposed for
/// self-convergence studies).
pub fn dirichlet_eigs_with_cells(
    q: &PotentialSample,
    length: f64,
    n_max: usize,
    n_cells: usize,
) -> Result<SpectralData> {
    if n_max < 1 {
        return Err(Error::Contract("n_max must be at least 1".into()));
    }
    if length > q.grid().length() + 1e-9 {
        return Err(Error::Domain(format!(
            "potential covers [0, {}], requested length {length}",
            q.grid().length()
        )));
    }
    if n_cells < 16 * n_max {
        return Err(Error::Contract(format!(
            "{n_cells} cells cannot resolve {n_max} oscillatory modes"
        )));
    }
    let delta = length / n_cells as f64;
    let qbar: Vec<f64> = (0..n_cells)
        .map(|j| q.eval((j as f64 + 0.5) * delta))
        .collect();
    let (qmin, qmax) = qbar
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });

    let pi = std::f64::consts::PI;
    let results: Vec<Result<(f64, f64)>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let lam0 = (n as f64 * pi / length).powi(2);
            // operator monotonicity brackets the eigenvalue between the
            // constant-potential extremes
            let mut lo = lam0 + qmin - 1e-6 * (1.0 + qmin.abs());
            let mut hi = lam0 + qmax + 1e-6 * (1.0 + qmax.abs());
            let mut tries = 0;
            while count_zeros(&qbar, delta, lo) >= n {
                lo -= 1.0 + (hi - lo);
                tries += 1;
                if tries > 40 {
                    return Err(Error::EigenBracket(n));
                }
            }
            while count_zeros(&qbar, delta, hi) < n {
                hi += 1.0 + (hi - lo);
                tries += 1;
                if tries > 80 {
                    return Err(Error::EigenBracket(n));
                }
            }
            let mut iter = 0;
            while hi - lo > 1e-10 * hi.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if count_zeros(&qbar, delta, mid) >= n {
                    hi = mid;
                } else {
                    lo = mid;
                }
                iter += 1;
                if iter > 200 {
                    break;
                }
            }
            let lam = 0.5 * (lo + hi);
            let phi = shoot_values(&qbar, delta, lam);
            let phi2: Vec<f64> = phi.iter().map(|v| v * v).collect();
            let norm2 = trapezoid(&phi2, delta)?;
            if !(norm2 > 0.0) {
                return Err(Error::Numeric(format!(
                    "degenerate eigenfunction norm at index {n}"
                )));
            }
            Ok((lam, 1.0 / norm2))
        })
        .collect();

    let mut lambdas = Vec::with_capacity(n_max);
    let mut alphas = Vec::with_capacity(n_max);
    for r in results {
        let (l, a) = r?;
        lambdas.push(l);
        alphas.push(a);
    }
    for w in lambdas.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Numeric(format!(
                "eigenvalues not increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let lambdas0: Vec<f64> = (1..=n_max)
        .map(|n| (n as f64 * pi / length).powi(2))
        .collect();
    let alphas0: Vec<f64> = lambdas0.iter().map(|l| 2.0 * l / length).collect();
    Ok(SpectralData {
        length,
        lambdas,
        alphas,
        lambdas0,
        alphas0,
    })
}

/// First `n_max` Dirichlet eigenvalue/weight pairs on `[0, length]`,
/// using a default lattice fine enough for the requested mode count.
pub fn dirichlet_eigs(q: &PotentialSample, length: f64, n_max: usize) -> Result<SpectralData> {
    dirichlet_eigs_with_cells(q, length, n_max, (16 * n_max).max(256))
}

/// `sin(sqrt(lambda) x) / sqrt(lambda)` continued through lambda <= 0.
pub fn sinlike(lambda: f64, x: f64) -> f64 {
    if lambda > 1e-12 {
        let om = lambda.sqrt();
        (om * x).sin() / om
    } else if lambda < -1e-12 {
        let ka = (-lambda).sqrt();
        (ka * x).sinh() / ka
    } else {
        x * (1.0 - lambda * x * x / 6.0)
    }
}

/// Kernel of the regularized spectral sum on `grid x grid`:
/// `F(x,t) = sum_n [alpha_n s(lambda_n,x) s(lambda_n,t)
///                  - alpha0_n s(lambda0_n,x) s(lambda0_n,t)]`
/// with s = [`sinlike`].
pub fn f_from_sigma(sd: &SpectralData, grid: &UniformGrid) -> DMatrix<f64> {
    let n = grid.n_points();
    let mut f = DMatrix::zeros(n, n);
    let mut u = vec![0.0; n];
    let mut u0 = vec![0.0; n];
    for idx in 0..sd.n_max() {
        for (i, x) in grid.nodes().enumerate() {
            u[i] = sinlike(sd.lambdas[idx], x);
            u0[i] = sinlike(sd.lambdas0[idx], x);
        }
        let (a, a0) = (sd.alphas[idx], sd.alphas0[idx]);
        for i in 0..n {
            for j in i..n {
                let v = a * u[i] * u[j] - a0 * u0[i] * u0[j];
                f[(i, j)] += v;
                if i != j {
                    f[(j, i)] += v;
                }
            }
        }
    }
    f
}

/// Connecting kernel from spectral data (the regularized-measure partial
/// sum): `c^T(t,s) = F(T-t, T-s)`. Requires `t_horizon <= L`.
pub fn ct_from_sigma(
    sd: &SpectralData,
    t_horizon: f64,
    n_points: usize,
) -> Result<ConnectingKernel> {
    if t_horizon > sd.length + 1e-9 {
        return Err(Error::Domain(format!(
            "spectral data lives on [0, {}], requested horizon {t_horizon}",
            sd.length
        )));
    }
    let grid = UniformGrid::new(n_points, t_horizon)?;
    let f = f_from_sigma(sd, &grid);
    let m = n_points - 1;
    let c = DMatrix::from_fn(n_points, n_points, |i, j| f[(m - i, m - j)]);
    ConnectingKernel::from_matrix(t_horizon, c)
}

/// The uniformly convergent integrated response from spectral data:
/// entry k holds `int_0^{2 t_k} r = 2 c^T(T - t_k, T - t_k)` on a grid of
/// `n_points` over `[0, t_horizon]`.
pub fn r_from_sigma_integrated(
    sd: &SpectralData,
    t_horizon: f64,
    n_points: usize,
) -> Result<(UniformGrid, Vec<f64>)> {
    if t_horizon > sd.length + 1e-9 {
        return Err(Error::Domain(format!(
            "spectral data lives on [0, {}], requested horizon {t_horizon}",
            sd.length
        )));
    }
    let grid = UniformGrid::new(n_points, t_horizon)?;
    let values: Vec<f64> = grid
        .nodes()
        .map(|t| {
            let mut acc = 0.0;
            for idx in 0..sd.n_max() {
                let s = sinlike(sd.lambdas[idx], t);
                let s0 = sinlike(sd.lambdas0[idx], t);
                acc += sd.alphas[idx] * s * s - sd.alphas0[idx] * s0 * s0;
            }
            2.0 * acc
        })
        .collect();
    Ok((grid, values))
}

/// Titchmarsh-Weyl m-function samples `m(-k^2) = psi'(0) / psi(0)` for the
/// Dirichlet-truncated problem on [0, L].
#[derive(Debug, Clone)]
pub struct MFunctionSample {
    pub k_values: Vec<f64>,
    pub m_values: Vec<f64>,
    pub length: f64,
    pub steps: usize,
}

/// m-function with an explicit RK4 step count: integrate
/// `psi'' = (q + k^2) psi` backward from `psi(L) = 0, psi'(L) = -1`.
pub fn m_function_with_steps(
    q: &PotentialSample,
    length: f64,
    k_values: &[f64],
    steps: usize,
) -> Result<MFunctionSample> {
    if length > q.grid().length() + 1e-9 {
        return Err(Error::Domain(format!(
            "potential covers [0, {}], requested length {length}",
            q.grid().length()
        )));
    }
    if k_values.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Contract("wavenumbers must be positive".into()));
    }
    if steps < 2 {
        return Err(Error::Contract("need at least 2 integration steps".into()));
    }
    let delta = length / steps as f64;
    let m_values: Vec<Result<f64>> = k_values
        .par_iter()
        .map(|&k| {
            let k2 = k * k;
            let rhs = |x: f64, y: f64, yp: f64| (yp, (q.eval(x) + k2) * y);
            let (mut y, mut yp) = (0.0, -1.0);
            let mut x = length;
            let mut sup: f64 = 1.0;
            for _ in 0..steps {
                let d = -delta;
                let (k1y, k1p) = rhs(x, y, yp);
                let (k2y, k2p) = rhs(x + 0.5 * d, y + 0.5 * d * k1y, yp + 0.5 * d * k1p);
                let (k3y, k3p) = rhs(x + 0.5 * d, y + 0.5 * d * k2y, yp + 0.5 * d * k2p);
                let (k4y, k4p) = rhs(x + d, y + d * k3y, yp + d * k3p);
                y += d * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0;
                yp += d * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0;
                x += d;
                sup = sup.max(y.abs());
            }
            if y.abs() < 1e-12 * sup {
                return Err(Error::PoleProximity(k));
            }
            Ok(yp / y)
        })
        .collect();
    let mut out = Vec::with_capacity(k_values.len());
    for v in m_values {
        out.push(v?);
    }
    Ok(MFunctionSample {
        k_values: k_values.to_vec(),
        m_values: out,
        length,
        steps,
    })
}

/// m-function with a step count chosen from the largest wavenumber.
pub fn m_function(q: &PotentialSample, length: f64, k_values: &[f64]) -> Result<MFunctionSample> {
    let k_max = k_values.iter().fold(0.0f64, |a, b| a.max(*b));
    let steps = ((200.0 * k_max * length).ceil() as usize).max(4000);
    m_function_with_steps(q, length, k_values, steps)
}

/// Laplace transform `int_0^L A(t) e^{-2kt} dt` of the piecewise-linear
/// interpolant of A, with exact exponential moments per interval (plain
/// trapezoid error grows with k and would swamp the e^{-2kL} tail).
fn laplace_piecewise_linear(a: &[f64], h: f64, k: f64) -> f64 {
    let s = 2.0 * k;
    let eh = (-s * h).exp();
    let e1 = -(-s * h).exp_m1(); // 1 - e^{-s h}
    let i0 = e1 / s;
    let i1 = (e1 - s * h * eh) / (s * s);
    let mut front = 1.0; // e^{-s t_i}
    let mut acc = 0.0;
    for w in a.windows(2) {
        let slope = (w[1] - w[0]) / h;
        acc += front * (w[0] * i0 + slope * i1);
        front *= eh;
    }
    acc
}

/// Residuals of the A-amplitude asymptotics.
#[derive(Debug, Clone)]
pub struct AmplitudeCheck {
    pub k_values: Vec<f64>,
    /// rho(k) = m(-k^2) + k + int_0^L A(t) e^{-2kt} dt.
    pub residuals: Vec<f64>,
    /// True from the first point whose decay is slower than e^{-L k}
    /// onward (quadrature floor reached).
    pub flagged: Vec<bool>,
    /// Least-squares slope of log|rho| vs k over the unflagged points
    /// (expected near -2L).
    pub slope: f64,
    pub intercept: f64,
}

/// Check `m(-k^2) = -k - int A(t) e^{-2tk} dt + O(e^{-2Lk})` with
/// `A(t) = -2 r(2t)` from the forward response of q.
pub fn a_amplitude_check(
    q: &PotentialSample,
    length: f64,
    k_values: &[f64],
) -> Result<AmplitudeCheck> {
    let r = response_function(q, length, 1e-10)?;
    let (agrid, a) = crate::remling::a_from_response(&r)?;
    let h = agrid.step();
    let m = m_function(q, length, k_values)?;

    let residuals: Vec<f64> = k_values
        .iter()
        .zip(&m.m_values)
        .map(|(&k, &mv)| mv + k + laplace_piecewise_linear(&a, h, k))
        .collect();

    // Flag the quadrature floor: the genuine remainder decays like
    // e^{-2 L k}, while the floor (quadrature and ODE error) decays only
    // algebraically in k. Once the local decay rate of |rho| falls below
    // e^{-L k} (half the expected rate) the residual no longer measures
    // the remainder, and neither does anything after it.
    let mut flagged = vec![false; residuals.len()];
    let mut floor_hit = false;
    for i in 0..residuals.len() {
        if i > 0 {
            let dk = k_values[i] - k_values[i - 1];
            let prev = residuals[i - 1].abs().max(f64::MIN_POSITIVE);
            let dl = (residuals[i].abs() / prev).ln();
            if dl > -length * dk {
                floor_hit = true;
            }
        }
        flagged[i] = floor_hit || residuals[i].abs() < 1e-14;
    }

    let pts: Vec<(f64, f64)> = k_values
        .iter()
        .zip(&residuals)
        .zip(&flagged)
        .filter(|(_, fl)| !**fl)
        .map(|((k, r), _)| (*k, r.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numeric(
            "all A-amplitude residuals sit on the quadrature floor".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;

    Ok(AmplitudeCheck {
        k_values: k_values.to_vec(),
        residuals,
        flagged,
        slope,
        intercept,
    })
}
