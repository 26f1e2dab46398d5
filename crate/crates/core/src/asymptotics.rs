//! Steepest-descent constants, fitted `1/N` expansions and pinched averages.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelContext, KernelDomain, Phase, FACE_TOL};
use crate::poly::Polynomial;

/// `Σ_i dℓ_i ⊗ dℓ_i / ℓ_i(x)` and its determinant `h(x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HessianForm {
    pub matrix: Vec<Vec<f64>>,
    pub determinant: f64,
}

pub fn hessian_det(domain: &KernelDomain, x: &[f64]) -> Result<HessianForm> {
    let phase = Phase::new(domain, x)?;
    if phase.base_distances().iter().any(|&l| l <= FACE_TOL) {
        return Err(Error::BoundaryPoint {
            point: x.to_vec(),
            what: "the Hessian form",
        });
    }
    let n = domain.dim();
    let region = domain.region();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, &l) in phase.base_distances().iter().enumerate() {
        let u = &region.normals()[i];
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] += u[a] * u[b] / l;
            }
        }
    }
    Ok(HessianForm {
        determinant: m.determinant(),
        matrix: (0..n).map(|a| (0..n).map(|b| m[(a, b)]).collect()).collect(),
    })
}

/// Leading-order prediction `log[(2π/N)^{n/2} h(x)^{−1/2} e^{Nφ(x,x)}]` for
/// `log c_N(x)`.
pub fn laplace_normalization(domain: &KernelDomain, level: u32, x: &[f64]) -> Result<f64> {
    let h = hessian_det(domain, x)?;
    let phase = Phase::new(domain, x)?;
    let n = domain.dim() as f64;
    let nf = f64::from(level);
    Ok(0.5 * n * (2.0 * std::f64::consts::PI / nf).ln() - 0.5 * h.determinant.ln() + nf * phase.peak())
}

/// Log of the predicted section norm
/// `(N/2π)^{n/2} h(x)^{1/2} e^{N(φ(x,y) − φ(x,x))}`.
pub fn pointwise_norm_asymptotic(domain: &KernelDomain, level: u32, x: &[f64], y: &[f64]) -> Result<f64> {
    let h = hessian_det(domain, x)?;
    let phase = Phase::new(domain, x)?;
    let n = domain.dim() as f64;
    let nf = f64::from(level);
    Ok(0.5 * n * (nf / (2.0 * std::f64::consts::PI)).ln() + 0.5 * h.determinant.ln()
        + nf * (phase.value(y) - phase.peak()))
}

pub const CONDITION_LIMIT: f64 = 1e12;
pub const DEFAULT_N_GRID: [u32; 7] = [50, 71, 100, 141, 200, 283, 400];
pub const DEFAULT_ORDER: usize = 4;

/// Least-squares fit of `values` against `Σ_{i≤order} a_i N^{−i}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionFit {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
}

pub fn fit_expansion(levels: &[f64], values: &[f64], order: usize) -> Result<ExpansionFit> {
    if levels.len() != values.len() || levels.len() < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} levels for an order-{order} fit, got {}",
            order + 1,
            levels.len()
        )));
    }
    let rows = levels.len();
    let cols = order + 1;
    let mut a = DMatrix::from_fn(rows, cols, |r, c| levels[r].powi(-(c as i32)));
    let mut scales = vec![0.0; cols];
    for c in 0..cols {
        scales[c] = a.column(c).norm();
        a.column_mut(c).scale_mut(1.0 / scales[c]);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let b = DVector::from_column_slice(values);
    let sol = svd
        .solve(&b, smax * 1e-15)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let residual_norm = (&a * &sol - &b).norm();
    Ok(ExpansionFit {
        coefficients: (0..cols).map(|c| sol[c] / scales[c]).collect(),
        residual_norm,
        condition,
    })
}

/// Least-squares slope and R² of `ys` against `xs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Slope of `log|values|` against `log levels`.
pub fn log_log_slope(levels: &[f64], values: &[f64]) -> LineFit {
    let xs: Vec<f64> = levels.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    fit_line(&xs, &ys)
}

/// Fitted coefficients `a_i ≈ (P_i f)(x)` of `f♯_N(x) ∼ Σ a_i N^{−i}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub point: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub n_grid: Vec<u32>,
    pub values: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
    /// `−slope` of `log|f♯_N − a_0 − a_1/N|` against `log N`; `None` if the
    /// remainder vanishes to working precision.
    pub tail_order: Option<f64>,
}

/// Transforms at every level of `n_grid` (in parallel), then a fit.
pub fn extract_expansion<F>(
    domain: &KernelDomain,
    f: F,
    x: &[f64],
    n_grid: &[u32],
    order: usize,
    tol: f64,
) -> Result<ExpansionReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_grid.len() < order + 3 {
        return Err(Error::InvalidArgument(format!(
            "an order-{order} expansion needs at least {} levels",
            order + 3
        )));
    }
    let values = n_grid
        .par_iter()
        .map(|&n| KernelContext::new(domain.clone(), n).with_tol(tol).transform(&f, x))
        .collect::<Result<Vec<f64>>>()?;
    expansion_from_values(x, n_grid, values, order)
}

/// Fit an expansion to already computed transform values.
pub fn expansion_from_values(x: &[f64], n_grid: &[u32], values: Vec<f64>, order: usize) -> Result<ExpansionReport> {
    let levels: Vec<f64> = n_grid.iter().map(|&n| f64::from(n)).collect();
    let fit = fit_expansion(&levels, &values, order)?;
    let a0 = fit.coefficients[0];
    let a1 = fit.coefficients.get(1).copied().unwrap_or(0.0);
    let rem: Vec<f64> = levels.iter().zip(&values).map(|(n, v)| v - a0 - a1 / n).collect();
    let floor = 1e-13 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tail_order = if rem.iter().all(|r| r.abs() > floor) {
        Some(-log_log_slope(&levels, &rem).slope)
    } else {
        None
    };
    Ok(ExpansionReport {
        point: x.to_vec(),
        coefficients: fit.coefficients,
        n_grid: n_grid.to_vec(),
        values,
        residual_norm: fit.residual_norm,
        condition: fit.condition,
        tail_order,
    })
}

/// `Σ_j (x_j/2) ∂²f/∂x_j² + ∂f/∂x_j`, the `1/N` coefficient of the orthant
/// model transform.
pub fn model_p1(f: &Polynomial, x: &[f64]) -> f64 {
    (0..x.len())
        .map(|j| {
            let d1 = f.partial(j);
            0.5 * x[j] * d1.partial(j).eval(x) + d1.eval(x)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// `exp(1 − 1/(1 − |u|²))` on `|u| < 1`, so `ψ(0) = 1`.
    Bump,
    /// `ψ ≡ 1`.
    Constant,
}

impl Window {
    pub fn eval(self, u: &[f64]) -> f64 {
        match self {
            Self::Bump => {
                let r2: f64 = u.iter().map(|v| v * v).sum();
                if r2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            Self::Constant => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bump => "bump",
            Self::Constant => "constant",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(Self::Bump),
            "constant" => Ok(Self::Constant),
            other => Err(Error::InvalidArgument(format!("unknown window {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PinchedAverageReport {
    pub delta: f64,
    pub window: Window,
    pub point: Vec<f64>,
    pub n_grid: Vec<u32>,
    pub values: Vec<f64>,
    /// `|v_{j+1} − v_j|` along the grid.
    pub increments: Vec<f64>,
    /// Fit of `v_N ≈ σ_0 + σ_1 N^{−p}`.
    pub sigma0: f64,
    pub sigma1: f64,
    pub exponent: f64,
    pub fit_residual: f64,
    /// Set when the window misses the polytope entirely at some level.
    pub vanished: bool,
}

/// `∫ ⟨s_k, s_k⟩(y) ψ(N^δ(k/N − y)) dy` with `k = N x` at every level.
pub fn pinched_average(
    domain: &KernelDomain,
    x: &[f64],
    delta: f64,
    window: Window,
    n_grid: &[u32],
    tol: f64,
) -> Result<PinchedAverageReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!("δ = {delta} is outside (0, 1/2)")));
    }
    let values = n_grid
        .par_iter()
        .map(|&n| {
            let nf = f64::from(n);
            let k: Vec<i64> = x.iter().map(|v| (v * nf).round() as i64).collect();
            if k.iter().zip(x).any(|(&k, v)| (k as f64 - v * nf).abs() > 1e-9 * nf) {
                return Err(Error::NotLatticePoint { k, level: n });
            }
            let ctx = KernelContext::new(domain.clone(), n).with_tol(tol);
            let xk = ctx.lattice_point(&k)?;
            let scale = nf.powf(delta);
            ctx.transform(
                |y| {
                    let u: Vec<f64> = xk.iter().zip(y).map(|(a, b)| scale * (a - b)).collect();
                    window.eval(&u)
                },
                &xk,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let levels: Vec<f64> = n_grid.iter().map(|&n| f64::from(n)).collect();
    let (sigma0, sigma1, exponent, fit_residual) = fit_power_tail(&levels, &values);
    Ok(PinchedAverageReport {
        delta,
        window,
        point: x.to_vec(),
        n_grid: n_grid.to_vec(),
        vanished: values.contains(&0.0),
        values,
        increments,
        sigma0,
        sigma1,
        exponent,
        fit_residual,
    })
}

/// Best `(σ_0, σ_1, p)` for `v ≈ σ_0 + σ_1 N^{−p}` by scanning `p`.
fn fit_power_tail(levels: &[f64], values: &[f64]) -> (f64, f64, f64, f64) {
    let mut best = (values.last().copied().unwrap_or(f64::NAN), 0.0, f64::NAN, f64::INFINITY);
    if levels.len() < 3 {
        return best;
    }
    for step in 1..=600 {
        let p = step as f64 * 0.005;
        let xs: Vec<f64> = levels.iter().map(|n| n.powf(-p)).collect();
        let line = fit_line(&xs, values);
        let res: f64 = xs
            .iter()
            .zip(values)
            .map(|(x, v)| (v - line.intercept - line.slope * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if res < best.3 {
            best = (line.intercept, line.slope, p, res);
        }
    }
    best
}
