//! τ-corrected lattice sums over dilated Delzant polytopes.
//!
//! `em_sum` applies the truncated operator `Π_i τ((1/N) ∂/∂h_i)` to
//! `h ↦ ∫_{Δ_h} f` at `h = 0`. The `h`-derivatives are central finite
//! differences of integrals over shifted polytopes, one stencil per facet
//! that the multi-index involves.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::log_log_slope;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::polytope::DelzantPolytope;
use crate::quadrature::{self, QuadOptions};
use crate::sum::NeumaierSum;

/// Coefficients `t_0..t_m` of `τ(s) = s / (1 − e^{−s})`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauSeries {
    pub order: usize,
    pub coefficients: Vec<BigRational>,
}

impl TauSeries {
    pub fn to_f64(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Exact power-series division `1 / g(s)` with `g(s) = (1 − e^{−s})/s`.
pub fn tau_coefficients(m: usize) -> TauSeries {
    let int = |v: i64| BigRational::from_integer(BigInt::from(v));
    // g_j = (−1)^j / (j+1)!
    let mut g = Vec::with_capacity(m + 1);
    let mut fact = BigInt::one();
    for j in 0..=m {
        fact *= BigInt::from(j as u64 + 1);
        let sign = if j % 2 == 0 { 1 } else { -1 };
        g.push(BigRational::new(BigInt::from(sign), fact.clone()));
    }
    let mut t: Vec<BigRational> = vec![int(1)];
    for k in 1..=m {
        let mut s = BigRational::zero();
        for j in 1..=k {
            s += &g[j] * &t[k - j];
        }
        t.push(-s);
    }
    TauSeries {
        order: m,
        coefficients: t,
    }
}

/// `N^{−n} Σ_{k ∈ NΔ ∩ ℤⁿ} f(k/N)`, compensated, in lattice order.
pub fn riemann_sum<F>(polytope: &DelzantPolytope, f: F, level: u32) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let nf = f64::from(level);
    let mut acc = NeumaierSum::new();
    let mut x = vec![0.0; polytope.dim()];
    for k in polytope.lattice_points(level) {
        for (xi, ki) in x.iter_mut().zip(&k) {
            *xi = *ki as f64 / nf;
        }
        acc.add(f(&x));
    }
    acc.value() / nf.powi(polytope.dim() as i32)
}

/// Exact rational Riemann sum of a polynomial.
pub fn riemann_sum_exact(polytope: &DelzantPolytope, f: &Polynomial, level: u32) -> BigRational {
    let n = BigInt::from(level);
    let mut acc = BigRational::zero();
    for k in polytope.lattice_points(level) {
        let x: Vec<BigRational> = k
            .iter()
            .map(|&ki| BigRational::new(BigInt::from(ki), n.clone()))
            .collect();
        acc += f.eval_rational(&x);
    }
    let mut denom = BigInt::one();
    for _ in 0..polytope.dim() {
        denom *= &n;
    }
    acc / BigRational::from_integer(denom)
}

/// Central difference weights on offsets `−r..=r`, all `O(h⁴)` accurate.
fn stencil(order: u32) -> &'static [f64] {
    const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
    const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
    const D3: [f64; 7] = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];
    const D4: [f64; 7] = [-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0];
    match order {
        1 => &D1,
        2 => &D2,
        3 => &D3,
        4 => &D4,
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Relative accuracy assumed for the shifted-polytope integrals when
/// choosing finite-difference steps.
pub const SHIFT_INTEGRAL_TOL: f64 = 1e-15;
pub const MAX_ORDER: usize = 4;
pub const DEFAULT_ORDER: usize = 2;

/// One term `Π t_{α_i} N^{−|α|} ∂^α ∫_{Δ_h} f` of the operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmTerm {
    /// Exponent per facet.
    pub alpha: Vec<u32>,
    pub tau_weight: f64,
    pub derivative: f64,
    pub step: f64,
}

impl EmTerm {
    pub fn degree(&self) -> usize {
        self.alpha.iter().map(|&a| a as usize).sum()
    }
}

/// All operator terms up to a total degree, independent of `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmTerms {
    pub order: usize,
    pub terms: Vec<EmTerm>,
}

impl EmTerms {
    pub fn integral(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.degree() == 0)
            .map_or(0.0, |t| t.derivative)
    }

    /// Sum of the degree-`j` terms at level `N`.
    pub fn degree_component(&self, level: u32, j: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        for t in self.terms.iter().filter(|t| t.degree() == j) {
            acc.add(t.tau_weight * t.derivative);
        }
        acc.value() / f64::from(level).powi(j as i32)
    }

    /// The truncation of total degree `order` at level `N`.
    pub fn evaluate(&self, level: u32, order: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        for j in 0..=order.min(self.order) {
            acc.add(self.degree_component(level, j));
        }
        acc.value()
    }
}

/// Multi-indices over `d` facets with total degree `≤ m`.
fn multi_indices(d: usize, m: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; d]];
    let mut frontier = out.clone();
    for _ in 0..m {
        let mut next = BTreeSet::new();
        for a in &frontier {
            for i in 0..d {
                let mut b = a.clone();
                b[i] += 1;
                next.insert(b);
            }
        }
        frontier = next.into_iter().collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// Operator terms of total degree `≤ m`; zero-weight terms are skipped.
pub fn em_terms<F>(polytope: &DelzantPolytope, f: F, m: usize) -> Result<EmTerms>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if m > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "truncation order {m} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let d = polytope.num_facets();
    let tau = tau_coefficients(m).to_f64();

    // Per-term stencil plans: (alpha, weight, step, [(offsets, coefficient)]).
    let mut plans = Vec::new();
    for alpha in multi_indices(d, m) {
        let weight: f64 = alpha.iter().map(|&a| tau[a as usize]).product();
        if weight == 0.0 {
            continue;
        }
        let degree: u32 = alpha.iter().sum();
        let mut step = if degree == 0 {
            0.0
        } else {
            SHIFT_INTEGRAL_TOL.powf(1.0 / (f64::from(degree) + 4.0))
        };
        let plan = loop {
            let plan = stencil_plan(&alpha);
            let valid = degree == 0
                || plan.iter().all(|(offs, _)| {
                    let h: Vec<f64> = offs.iter().map(|&o| f64::from(o) * step).collect();
                    polytope.shift(&h).is_ok()
                });
            if valid {
                break plan;
            }
            step *= 0.5;
            if step < 1e-8 {
                return Err(Error::InvalidArgument(
                    "finite-difference stencil leaves the valid shift range".into(),
                ));
            }
        };
        plans.push((alpha, weight, step, plan));
    }

    // Every distinct shift vector is integrated once.
    let mut needed: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
    for (_, _, step, plan) in &plans {
        for (offs, _) in plan {
            let h: Vec<f64> = offs.iter().map(|&o| f64::from(o) * step).collect();
            needed.insert(h.iter().map(|v| v.to_bits()).collect(), h);
        }
    }
    let opts = QuadOptions::relative(SHIFT_INTEGRAL_TOL);
    let keys: Vec<(Vec<u64>, Vec<f64>)> = needed.into_iter().collect();
    let values = keys
        .par_iter()
        .map(|(_, h)| {
            let shifted = polytope.shift(h)?;
            Ok(quadrature::integrate(&shifted, &f, &opts)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let table: BTreeMap<Vec<u64>, f64> = keys.into_iter().map(|(k, _)| k).zip(values).collect();

    let terms = plans
        .into_iter()
        .map(|(alpha, weight, step, plan)| {
            let mut acc = NeumaierSum::new();
            for (offs, c) in &plan {
                let key: Vec<u64> = offs.iter().map(|&o| (f64::from(o) * step).to_bits()).collect();
                acc.add(c * table[&key]);
            }
            let degree: u32 = alpha.iter().sum();
            let derivative = if degree == 0 {
                acc.value()
            } else {
                acc.value() / step.powi(degree as i32)
            };
            EmTerm {
                alpha,
                tau_weight: weight,
                derivative,
                step,
            }
        })
        .collect();
    Ok(EmTerms { order: m, terms })
}

/// Tensor stencil over the facets with `α_i > 0`: integer offsets per facet
/// and the product of the one-dimensional weights.
fn stencil_plan(alpha: &[u32]) -> Vec<(Vec<i32>, f64)> {
    let mut plan = vec![(vec![0i32; alpha.len()], 1.0)];
    for (i, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let w = stencil(a);
        let r = (w.len() / 2) as i32;
        let mut next = Vec::with_capacity(plan.len() * w.len());
        for (offs, c) in &plan {
            for (j, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                let mut o = offs.clone();
                o[i] = j as i32 - r;
                next.push((o, c * wj));
            }
        }
        plan = next;
    }
    plan
}

/// `Π_i τ((1/N) ∂/∂h_i) ∫_{Δ_h} f |_{h=0}`, truncated at total degree `m`.
pub fn em_sum<F>(polytope: &DelzantPolytope, f: F, level: u32, m: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(em_terms(polytope, f, m)?.evaluate(level, m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmRow {
    #[serde(rename = "N")]
    pub level: u32,
    pub order: usize,
    pub riemann_sum: f64,
    pub em_sum: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EMReport {
    pub integral: f64,
    pub rows: Vec<EmRow>,
    /// Per order: `−slope` of `log|error|` against `log N` (the decay rate).
    pub decay_rates: Vec<(usize, f64)>,
}

pub fn em_error_report<F>(
    polytope: &DelzantPolytope,
    f: F,
    n_grid: &[u32],
    orders: &[usize],
) -> Result<EMReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = orders.iter().copied().max().unwrap_or(0);
    let terms = em_terms(polytope, &f, m)?;
    let sums: Vec<f64> = n_grid.iter().map(|&n| riemann_sum(polytope, &f, n)).collect();
    let mut rows = Vec::new();
    let mut decay_rates = Vec::new();
    for &order in orders {
        let mut errs = Vec::new();
        for (&n, &rs) in n_grid.iter().zip(&sums) {
            let em = terms.evaluate(n, order);
            errs.push((rs - em).abs());
            rows.push(EmRow {
                level: n,
                order,
                riemann_sum: rs,
                em_sum: em,
                abs_error: (rs - em).abs(),
            });
        }
        let levels: Vec<f64> = n_grid.iter().map(|&n| f64::from(n)).collect();
        if n_grid.len() >= 2 && errs.iter().all(|e| *e > 0.0) {
            decay_rates.push((order, -log_log_slope(&levels, &errs).slope));
        }
    }
    Ok(EMReport {
        integral: terms.integral(),
        rows,
        decay_rates,
    })
}
