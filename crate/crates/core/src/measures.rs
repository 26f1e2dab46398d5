//! The pushed-forward spectral measure `μ♯_N` on the polytope and the
//! quantities built from it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{extract_expansion, hessian_det};
use crate::error::{Error, Result};
use crate::euler_maclaurin::em_terms;
use crate::kernel::{KernelContext, KernelDomain};
use crate::polytope::{DelzantPolytope, Face};
use crate::quadrature::{self, QuadOptions};
use crate::sum::{compensated_sum, NeumaierSum};

/// `μ♯_N` with the normalizers `log c_k` of every lattice point.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    context: Arc<KernelContext>,
    points: Vec<Vec<i64>>,
    log_c: Vec<f64>,
}

impl SpectralMeasure {
    pub fn new(polytope: DelzantPolytope, level: u32) -> Result<Self> {
        Self::from_context(Arc::new(KernelContext::new(polytope, level)))
    }

    pub fn from_context(context: Arc<KernelContext>) -> Result<Self> {
        let polytope = context
            .domain()
            .polytope()
            .ok_or_else(|| Error::InvalidArgument("the spectral measure needs a polytope".into()))?;
        let points = polytope.lattice_points(context.level());
        let log_c = points
            .par_iter()
            .map(|k| context.log_c(&context.lattice_point(k)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            context,
            points,
            log_c,
        })
    }

    pub fn context(&self) -> &KernelContext {
        &self.context
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        self.context.domain().polytope().expect("checked at construction")
    }

    pub fn level(&self) -> u32 {
        self.context.level()
    }

    pub fn lattice_points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn log_normalizers(&self) -> &[f64] {
        &self.log_c
    }

    /// Density of `μ♯_N` against Lebesgue measure: `Σ_k ⟨s_k, s_k⟩(y)`.
    pub fn spectral_density(&self, y: &[f64]) -> Result<f64> {
        let domain = self.context.domain();
        if !self.polytope().contains(y) {
            return Err(Error::OutsidePolytope { point: y.to_vec() });
        }
        let level = f64::from(self.level());
        let mut logs = Vec::with_capacity(self.points.len());
        for (k, lc) in self.points.iter().zip(&self.log_c) {
            let x: Vec<f64> = k.iter().map(|&v| v as f64 / level).collect();
            let phase = crate::kernel::Phase::new(domain, &x)?;
            logs.push(level * phase.value(y) - lc);
        }
        logs.sort_by(|a, b| b.total_cmp(a));
        let mut acc = NeumaierSum::new();
        for l in logs {
            acc.add(l.exp());
        }
        Ok(acc.value())
    }

    /// `∫ f dμ♯_N = Σ_k f♯_N(k/N)`.
    pub fn pair<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = self
            .points
            .par_iter()
            .map(|k| self.context.transform(&f, &self.context.lattice_point(k)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(&values))
    }

    /// `∫_Δ f · density`, the quadrature side of the pairing identity.
    pub fn pair_by_density<F>(&self, f: F, tol: f64) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let r = quadrature::integrate(
            self.polytope(),
            |y| f(y) * self.spectral_density(y).unwrap_or(f64::NAN),
            &QuadOptions::relative(tol),
        )?;
        Ok(r.value)
    }

    /// `∫ f dμ_{Nk} = f♯_N(k/N)`.
    pub fn eigensection_average<F>(&self, k: &[i64], f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        self.context.transform(f, &self.context.lattice_point(k)?)
    }

    /// `c_{km}/c_k^m` for each `m`, with the Laplace prediction where `k/N`
    /// is interior.
    pub fn moment(&self, k: &[i64], exponents: &[u32]) -> Result<MomentReport> {
        let x = self.context.lattice_point(k)?;
        let log_ck = self.context.log_c(&x)?;
        let domain = self.context.domain();
        let n = domain.dim() as f64;
        let level = f64::from(self.level());
        let h = hessian_det(domain, &x).ok().map(|h| h.determinant);
        let mut values = Vec::new();
        let mut predictions = Vec::new();
        for &m in exponents {
            if m == 0 {
                return Err(Error::InvalidArgument("moment exponents start at 1".into()));
            }
            let log_ckm = if m == 1 {
                log_ck
            } else {
                KernelContext::new(domain.clone(), self.level() * m)
                    .with_tol(self.context.tol())
                    .log_c(&x)?
            };
            let mf = f64::from(m);
            values.push((log_ckm - mf * log_ck).exp());
            predictions.push(h.map(|h| {
                (0.5 * (mf - 1.0) * n * (level / (2.0 * std::f64::consts::PI)).ln() - 0.5 * n * mf.ln()
                    + 0.5 * (mf - 1.0) * h.ln())
                .exp()
            }));
        }
        let ratios = values
            .iter()
            .zip(&predictions)
            .map(|(v, p)| p.map(|p| v / p))
            .collect();
        Ok(MomentReport {
            weight: k.to_vec(),
            level: self.level(),
            exponents: exponents.to_vec(),
            values,
            predictions,
            ratios,
        })
    }

    /// `t ↦ Vol{y : ⟨s_k, s_k⟩(y) ≥ t}` on `t_grid`.
    pub fn distribution_function(&self, k: &[i64], t_grid: &[f64], tol: f64) -> Result<Vec<(f64, f64)>> {
        let x = self.context.lattice_point(k)?;
        let phase = self.context.phase(&x)?;
        let level = f64::from(self.level());
        let lc = self.context.log_c(&x)?;
        let opts = QuadOptions::absolute(tol);
        t_grid
            .par_iter()
            .map(|&t| {
                if !(t > 0.0) {
                    return Err(Error::InvalidArgument(format!("threshold {t} must be positive")));
                }
                let v = quadrature::superlevel_volume(
                    self.polytope(),
                    |y| level * phase.value(y) - lc,
                    t.ln(),
                    &opts,
                )?;
                Ok((t, v.value))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub weight: Vec<i64>,
    pub level: u32,
    pub exponents: Vec<u32>,
    pub values: Vec<f64>,
    pub predictions: Vec<Option<f64>>,
    pub ratios: Vec<Option<f64>>,
}

/// Summary of one measure at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub level: u32,
    pub lattice_points: usize,
    pub total_mass: f64,
    pub total_mass_by_density: Option<f64>,
    pub pairing: Option<f64>,
    pub moments: Option<MomentReport>,
    pub distribution: Vec<(f64, f64)>,
}

/// Controls for [`asymptotic_pairing`].
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticPairingOptions {
    /// Levels used to extract `P_i f` pointwise.
    pub n_grid: Vec<u32>,
    pub fit_order: usize,
    /// Gauss points per axis of the fixed rule for integrals of `P_i f`.
    pub rule_points: usize,
    pub tol: f64,
}

impl Default for AsymptoticPairingOptions {
    fn default() -> Self {
        Self {
            n_grid: vec![40, 57, 80, 113, 160, 226, 320],
            fit_order: 4,
            rule_points: 6,
            tol: 1e-10,
        }
    }
}

/// `N^{−n} ∫ f dμ♯_N ∼ Σ_j s_j N^{−j}` up to `order ≤ 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticSeries {
    pub coefficients: Vec<f64>,
    /// `(j, i)`-entries: degree-`j` lattice-sum term applied to `P_i f`.
    pub contributions: Vec<(usize, usize, f64)>,
}

/// Composes the pointwise expansion `f♯_N = Σ N^{−i} P_i f` with the
/// lattice-sum expansion `N^{−n} Σ_k g(k/N) = Σ N^{−j} T_j g`:
/// `s_0 = T_0 f`, `s_1 = T_1 f + T_0 P_1 f`, `s_2 = T_2 f + T_1 P_1 f + T_0 P_2 f`.
///
/// `T_j f` comes from the finite-difference operator terms. `T_0 g = ∫ g` and
/// `T_1 g = ½ Σ_i ∫_{F_i} g` are used for the extracted `P_i f`, which are
/// only available pointwise.
pub fn asymptotic_pairing<F>(
    polytope: &DelzantPolytope,
    f: F,
    order: usize,
    opts: &AsymptoticPairingOptions,
) -> Result<AsymptoticSeries>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if order > 2 {
        return Err(Error::InvalidArgument(format!("pairing order {order} exceeds 2")));
    }
    let terms = em_terms(polytope, &f, order)?;
    let domain = KernelDomain::Polytope(polytope.clone());
    let p_coeff = |i: usize| {
        let domain = &domain;
        let f = &f;
        move |x: &[f64]| -> f64 {
            extract_expansion(domain, f, x, &opts.n_grid, opts.fit_order, opts.tol)
                .map(|r| r.coefficients[i])
                .unwrap_or(f64::NAN)
        }
    };
    let facets: Vec<Face> = (0..polytope.num_facets())
        .map(|i| Face {
            active_set: vec![i],
            dimension: polytope.dim() - 1,
        })
        .collect();
    let mut contributions = Vec::new();
    for j in 0..=order {
        contributions.push((j, 0, terms.degree_component(1, j)));
    }
    if order >= 1 {
        let p1 = p_coeff(1);
        contributions.push((0, 1, quadrature::integrate_fixed(polytope, p1, opts.rule_points)));
        if order >= 2 {
            let t1: f64 = facets
                .iter()
                .map(|face| 0.5 * quadrature::integrate_face_fixed(polytope, face, p1, opts.rule_points))
                .sum();
            contributions.push((1, 1, t1));
            let p2 = p_coeff(2);
            contributions.push((0, 2, quadrature::integrate_fixed(polytope, p2, opts.rule_points)));
        }
    }
    if contributions.iter().any(|c| !c.2.is_finite()) {
        return Err(Error::InvalidArgument("expansion extraction failed at a rule node".into()));
    }
    let coefficients = (0..=order)
        .map(|s| {
            contributions
                .iter()
                .filter(|(j, i, _)| j + i == s)
                .map(|c| c.2)
                .sum()
        })
        .collect();
    Ok(AsymptoticSeries {
        coefficients,
        contributions,
    })
}
