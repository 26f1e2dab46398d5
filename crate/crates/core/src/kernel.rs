//! The phase function, the normalized kernel `K_N`, section norms and the
//! transform `f ↦ f♯_N`.
//!
//! Everything is evaluated relative to the peak value `N φ(x, x)`, which is
//! the maximum of `N φ(x, ·)` over the polytope, so integrands stay in
//! `[0, 1]` and logarithms are only taken at the end.

use std::collections::HashMap;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polytope::DelzantPolytope;
use crate::quadrature::{self, Focus, QuadOptions};
use crate::region::ConvexRegion;

/// Lattice distances below this are treated as exact zeros of `ℓ_i(x)`.
pub const FACE_TOL: f64 = 1e-12;
/// Upper truncation of the half-line model.
pub const ORTHANT_TRUNCATION: f64 = 50.0;

/// Where the kernel lives: a Delzant polytope, or the orthant model
/// `φ = Σ x_j log y_j − y_j` truncated to a box.
#[derive(Clone, Debug)]
pub enum KernelDomain {
    Polytope(DelzantPolytope),
    Orthant {
        dim: usize,
        truncation: f64,
        region: ConvexRegion,
    },
}

impl KernelDomain {
    pub fn orthant(dim: usize) -> Self {
        Self::orthant_truncated(dim, ORTHANT_TRUNCATION)
    }

    pub fn orthant_truncated(dim: usize, truncation: f64) -> Self {
        // Facets 0..dim are the coordinate hyperplanes, dim..2dim the far sides.
        Self::Orthant {
            dim,
            truncation,
            region: ConvexRegion::cube(dim, truncation),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polytope(p) => p.dim(),
            Self::Orthant { dim, .. } => *dim,
        }
    }

    pub fn region(&self) -> &ConvexRegion {
        match self {
            Self::Polytope(p) => p.region(),
            Self::Orthant { region, .. } => region,
        }
    }

    pub fn polytope(&self) -> Option<&DelzantPolytope> {
        match self {
            Self::Polytope(p) => Some(p),
            Self::Orthant { .. } => None,
        }
    }

    /// Number of facets entering the phase (the far sides of the orthant
    /// box are not facets of the model).
    pub fn num_phase_facets(&self) -> usize {
        match self {
            Self::Polytope(p) => p.num_facets(),
            Self::Orthant { dim, .. } => *dim,
        }
    }

    fn normal(&self, i: usize) -> &[f64] {
        &self.region().normals()[i]
    }

    /// `ℓ_i(y)` for the phase facets.
    pub fn lattice_distances(&self, y: &[f64]) -> Vec<f64> {
        let region = self.region();
        (0..self.num_phase_facets())
            .map(|i| region.offsets()[i] - crate::region::dot(&region.normals()[i], y))
            .collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !self.region().contains(x, FACE_TOL * scale) {
            return Err(Error::OutsidePolytope { point: x.to_vec() });
        }
        Ok(())
    }
}

impl From<DelzantPolytope> for KernelDomain {
    fn from(p: DelzantPolytope) -> Self {
        Self::Polytope(p)
    }
}

/// Phase `φ(x, ·)` with the base point's lattice distances precomputed.
#[derive(Clone, Debug)]
pub struct Phase<'a> {
    domain: &'a KernelDomain,
    ell_x: Vec<f64>,
    peak: f64,
}

impl<'a> Phase<'a> {
    pub fn new(domain: &'a KernelDomain, x: &[f64]) -> Result<Self> {
        domain.check_point(x)?;
        let ell_x: Vec<f64> = domain
            .lattice_distances(x)
            .into_iter()
            .map(|l| if l < FACE_TOL { 0.0 } else { l })
            .collect();
        let peak = ell_x
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| l * l.ln() - l)
            .sum();
        Ok(Self { domain, ell_x, peak })
    }

    /// `φ(x, x)`, the maximum of `φ(x, ·)`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn base_distances(&self) -> &[f64] {
        &self.ell_x
    }

    /// Facets tight at the base point.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.ell_x.len()).filter(|&i| self.ell_x[i] == 0.0).collect()
    }

    /// `φ(x, y)`; `-inf` where a facet with `ℓ_i(x) > 0` vanishes at `y`.
    pub fn value(&self, y: &[f64]) -> f64 {
        let region = self.domain.region();
        let mut v = 0.0;
        for (i, &lx) in self.ell_x.iter().enumerate() {
            let ly = (region.offsets()[i] - crate::region::dot(&region.normals()[i], y)).max(0.0);
            if lx > 0.0 {
                if ly == 0.0 {
                    return f64::NEG_INFINITY;
                }
                v += lx * ly.ln();
            }
            v -= ly;
        }
        v
    }

    /// `exp(N (φ(x, y) − φ(x, x)))`.
    pub fn weight(&self, level: f64, y: &[f64]) -> f64 {
        (level * (self.value(y) - self.peak)).exp()
    }

    pub fn evaluate(&self, y: &[f64]) -> PhaseEvaluation {
        let value = self.value(y);
        if !value.is_finite() {
            return PhaseEvaluation {
                value,
                gradient_y: None,
                hessian_y: None,
            };
        }
        let n = self.domain.dim();
        let ell_y = self.domain.lattice_distances(y);
        let mut grad = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        for (i, &lx) in self.ell_x.iter().enumerate() {
            let u = self.domain.normal(i);
            // dℓ_i = −u_i.
            let coef = if lx > 0.0 { lx / ell_y[i] - 1.0 } else { -1.0 };
            let h = if lx > 0.0 { lx / (ell_y[i] * ell_y[i]) } else { 0.0 };
            for a in 0..n {
                grad[a] -= coef * u[a];
                for b in 0..n {
                    hess[a][b] -= h * u[a] * u[b];
                }
            }
        }
        PhaseEvaluation {
            value,
            gradient_y: Some(grad),
            hessian_y: Some(hess),
        }
    }

    /// Euclidean scale of the peak, used to pre-refine the quadrature mesh.
    fn focus(&self, x: &[f64], level: f64) -> Focus {
        let l_max = self.ell_x.iter().fold(0.0f64, |m, &l| m.max(l));
        let sigma = (l_max.max(1.0 / level) / level).sqrt();
        Focus {
            center: x.to_vec(),
            radius: 8.0 * sigma,
            max_diameter: 2.0 * sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseEvaluation {
    pub value: f64,
    pub gradient_y: Option<Vec<f64>>,
    pub hessian_y: Option<Vec<Vec<f64>>>,
}

/// `φ(x, y)` with gradient and Hessian in `y` where finite.
pub fn phi(domain: &KernelDomain, x: &[f64], y: &[f64]) -> Result<PhaseEvaluation> {
    domain.check_point(y)?;
    Ok(Phase::new(domain, x)?.evaluate(y))
}

/// Outcome of the constrained ascent of `φ(x, ·)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgmaxReport {
    pub point: Vec<f64>,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// Norm of the gradient of `φ` restricted to the face, per iteration.
    pub trace: Vec<f64>,
}

pub const ARGMAX_GRADIENT_TOL: f64 = 1e-10;

/// Maximizer of `φ(x, ·)`, found by damped Newton ascent within the face
/// containing `x`, started from the face's vertex centroid.
pub fn argmax_phi(domain: &KernelDomain, x: &[f64]) -> Result<ArgmaxReport> {
    let phase = Phase::new(domain, x)?;
    let active = phase.active_set();
    let n = domain.dim();
    let region = domain.region();

    let face_points = if active.is_empty() {
        region.vertices().to_vec()
    } else {
        region.face_points(&active)
    };
    let mut start = vec![0.0; n];
    for p in &face_points {
        for j in 0..n {
            start[j] += p[j] / face_points.len() as f64;
        }
    }
    // Directions spanning the face.
    let basis: Vec<Vec<f64>> = match domain {
        KernelDomain::Polytope(p) if !active.is_empty() => p
            .face_lattice_basis(&crate::polytope::Face {
                dimension: n - active.len(),
                active_set: active.clone(),
            })
            .into_iter()
            .map(|v| v.into_iter().map(|c| c as f64).collect())
            .collect(),
        _ => (0..n)
            .filter(|j| !active.contains(j))
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect(),
    };
    let k = basis.len();
    if k == 0 {
        return Ok(ArgmaxReport {
            point: start,
            active_set: active,
            iterations: 0,
            trace: Vec::new(),
        });
    }
    let project = |ev: &PhaseEvaluation| -> (DVector<f64>, DMatrix<f64>) {
        let g = ev.gradient_y.as_ref().expect("finite phase");
        let h = ev.hessian_y.as_ref().expect("finite phase");
        let gt = DVector::from_fn(k, |a, _| crate::region::dot(&basis[a], g));
        let ht = DMatrix::from_fn(k, k, |a, b| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += basis[a][i] * h[i][j] * basis[b][j];
                }
            }
            s
        });
        (gt, ht)
    };

    let mut y = start;
    let mut trace = Vec::new();
    for iter in 0..200 {
        let ev = phase.evaluate(&y);
        let (g, h) = project(&ev);
        let gnorm = g.norm();
        trace.push(gnorm);
        if gnorm < ARGMAX_GRADIENT_TOL {
            return Ok(ArgmaxReport {
                point: y,
                active_set: active,
                iterations: iter,
                trace,
            });
        }
        let step = match (-h.clone()).cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let dir: Vec<f64> = (0..n)
            .map(|i| (0..k).map(|a| basis[a][i] * step[a]).sum())
            .collect();
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let v = phase.value(&cand);
            if v.is_finite() && v >= ev.value + 1e-4 * t * slope {
                y = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent possible at working precision.
            if gnorm < 1e3 * ARGMAX_GRADIENT_TOL {
                return Ok(ArgmaxReport {
                    point: y,
                    active_set: active,
                    iterations: iter,
                    trace,
                });
            }
            break;
        }
    }
    let gradient_norm = *trace.last().unwrap_or(&f64::NAN);
    Err(Error::NoConvergence {
        iterations: trace.len(),
        gradient_norm,
        trace,
    })
}

/// One-sided directional derivative of `φ(x, ·)` at `y = x` along `nu`:
/// `−Σ_{i∈I} dℓ_i(ν)` over the facets tight at `x`.
pub fn normal_derivative(domain: &KernelDomain, x: &[f64], nu: &[f64]) -> Result<f64> {
    let phase = Phase::new(domain, x)?;
    Ok(phase
        .active_set()
        .into_iter()
        .map(|i| crate::region::dot(domain.normal(i), nu))
        .sum())
}

/// A domain and level, with memoized normalizers `log c_N(x)`.
#[derive(Debug)]
pub struct KernelContext {
    domain: KernelDomain,
    level: u32,
    tol: f64,
    cache: RwLock<HashMap<Vec<u64>, f64>>,
}

pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

impl KernelContext {
    pub fn new(domain: impl Into<KernelDomain>, level: u32) -> Self {
        Self {
            domain: domain.into(),
            level,
            tol: DEFAULT_KERNEL_TOL,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn orthant(dim: usize, level: u32) -> Self {
        Self::new(KernelDomain::orthant(dim), level)
    }

    /// Relative tolerance for every integral this context computes.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.cache.get_mut().expect("cache poisoned").clear();
        self
    }

    pub fn domain(&self) -> &KernelDomain {
        &self.domain
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn phase(&self, x: &[f64]) -> Result<Phase<'_>> {
        Phase::new(&self.domain, x)
    }

    fn options(&self, phase: &Phase<'_>, x: &[f64]) -> QuadOptions {
        let region = self.domain.region();
        // Facets where ℓ_i(y)^{N ℓ_i(x)} is a fractional power.
        let planes = (0..self.domain.num_phase_facets())
            .filter(|&i| phase.base_distances()[i] > 0.0)
            .map(|i| (region.normals()[i].clone(), region.offsets()[i]))
            .collect();
        QuadOptions::relative(self.tol)
            .with_focus(phase.focus(x, f64::from(self.level)))
            .with_singular_hyperplanes(planes)
    }

    /// `log c_N(x) = log ∫ exp(N φ(x, y)) dy`.
    pub fn log_c(&self, x: &[f64]) -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let phase = self.phase(x)?;
        let level = f64::from(self.level);
        let r = quadrature::integrate(
            self.domain.region(),
            |y| phase.weight(level, y),
            &self.options(&phase, x),
        )?;
        let value = level * phase.peak() + r.value.ln();
        self.cache
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert(value);
        Ok(value)
    }

    /// `K_N(x, y)`.
    pub fn kernel_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_point(y)?;
        let phase = self.phase(x)?;
        let lc = self.log_c(x)?;
        Ok((f64::from(self.level) * phase.value(y) - lc).exp())
    }

    /// `f♯_N(x) = ∫ K_N(x, y) f(y) dy`, numerator and normalizer integrated
    /// over one adaptive mesh.
    pub fn transform<F>(&self, f: F, x: &[f64]) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        let phase = self.phase(x)?;
        let level = f64::from(self.level);
        let scale = (self.log_c(x)? - level * phase.peak()).exp();
        let opts = QuadOptions {
            abs_tol: self.tol * scale,
            rel_tol: 0.0,
            ..self.options(&phase, x)
        };
        let r = quadrature::integrate_many(
            self.domain.region(),
            2,
            |y, out| {
                let w = phase.weight(level, y);
                out[0] = if w == 0.0 { 0.0 } else { w * f(y) };
                out[1] = w;
            },
            &opts,
        )?;
        Ok(r[0].value / r[1].value)
    }

    /// Lattice point check for `section_norm`; the orthant model accepts
    /// every nonnegative `k`.
    pub fn lattice_point(&self, k: &[i64]) -> Result<Vec<f64>> {
        let ok = match &self.domain {
            KernelDomain::Polytope(p) => k.len() == p.dim() && p.is_lattice_point(k, self.level),
            KernelDomain::Orthant { dim, truncation, .. } => {
                k.len() == *dim
                    && k.iter()
                        .all(|&v| v >= 0 && (v as f64) <= truncation * f64::from(self.level))
            }
        };
        if !ok {
            return Err(Error::NotLatticePoint {
                k: k.to_vec(),
                level: self.level,
            });
        }
        Ok(k.iter().map(|&v| v as f64 / f64::from(self.level)).collect())
    }

    /// `⟨s_k, s_k⟩(y) = exp(N φ(k/N, y)) / c_k`.
    pub fn section_norm(&self, k: &[i64], y: &[f64]) -> Result<f64> {
        let x = self.lattice_point(k)?;
        self.kernel_eval(&x, y)
    }

    /// Logarithm of the section norm; `-inf` where it vanishes.
    pub fn log_section_norm(&self, k: &[i64], y: &[f64]) -> Result<f64> {
        let x = self.lattice_point(k)?;
        self.domain.check_point(y)?;
        let phase = self.phase(&x)?;
        Ok(f64::from(self.level) * phase.value(y) - self.log_c(&x)?)
    }

    pub fn section_norm_profile(&self, k: &[i64], ys: &[Vec<f64>]) -> Result<SectionNormProfile> {
        let samples = ys
            .iter()
            .map(|y| Ok((y.clone(), self.section_norm(k, y)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SectionNormProfile {
            weight: k.to_vec(),
            level: self.level,
            samples,
        })
    }

    /// `|∫ e^{Nφ} g| / |∫ e^{Nφ} f|`, with its logarithm.
    pub fn localization_ratio<F, G>(&self, f: F, g: G, x: &[f64]) -> Result<LocalizationRatio>
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let phase = self.phase(x)?;
        let level = f64::from(self.level);
        let opts = self.options(&phase, x);
        let shift = level * phase.peak();
        let log_w = |y: &[f64]| level * phase.value(y);
        let den = quadrature::integrate_log_shifted(self.domain.region(), log_w, &f, shift, &opts)?;
        if den.log_value == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(
                "denominator integral vanishes".into(),
            ));
        }
        let num = quadrature::integrate_log_shifted(self.domain.region(), log_w, &g, shift, &opts)?;
        let log_ratio = num.log_value - den.log_value;
        Ok(LocalizationRatio {
            log_ratio,
            ratio: log_ratio.exp(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationRatio {
    pub log_ratio: f64,
    /// May underflow to zero; `log_ratio` stays finite.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionNormProfile {
    pub weight: Vec<i64>,
    pub level: u32,
    pub samples: Vec<(Vec<f64>, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn ln_beta(a: f64, b: f64) -> f64 {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    }

    fn interval() -> KernelDomain {
        DelzantPolytope::interval().into()
    }

    #[test]
    fn phi_examples() {
        let d = interval();
        let v = phi(&d, &[0.5], &[0.5]).unwrap().value;
        assert!((v - (0.5f64.ln() - 1.0)).abs() < 1e-15);
        assert_eq!(phi(&d, &[0.0], &[0.0]).unwrap().value, -1.0);
        assert_eq!(phi(&d, &[0.5], &[0.0]).unwrap().value, f64::NEG_INFINITY);
        assert!(matches!(phi(&d, &[1.5], &[0.5]), Err(Error::OutsidePolytope { .. })));
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let d: KernelDomain = DelzantPolytope::hirzebruch_trapezoid().into();
        let x = [0.4, 0.3];
        let y = [0.5, 0.45];
        let ph = Phase::new(&d, &x).unwrap();
        let ev = ph.evaluate(&y);
        let h = ev.hessian_y.unwrap();
        let g = ev.gradient_y.unwrap();
        let e = 1e-4;
        for a in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[a] += e;
            ym[a] -= e;
            let fd = (ph.value(&yp) - ph.value(&ym)) / (2.0 * e);
            assert!((fd - g[a]).abs() < 1e-7);
            for b in 0..2 {
                let mut ypp = yp;
                let mut ypm = yp;
                let mut ymp = ym;
                let mut ymm = ym;
                ypp[b] += e;
                ypm[b] -= e;
                ymp[b] += e;
                ymm[b] -= e;
                let fd2 = (ph.value(&ypp) - ph.value(&ypm) - ph.value(&ymp) + ph.value(&ymm)) / (4.0 * e * e);
                assert!((fd2 - h[a][b]).abs() < 1e-6 * (1.0 + h[a][b].abs()), "{a}{b}");
            }
        }
        let at_x = ph.evaluate(&x).gradient_y.unwrap();
        assert!(at_x.iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn argmax_examples() {
        let d = interval();
        let r = argmax_phi(&d, &[0.3]).unwrap();
        assert!((r.point[0] - 0.3).abs() < 1e-12);
        let s: KernelDomain = DelzantPolytope::simplex(2).into();
        let r = argmax_phi(&s, &[0.4, 0.0]).unwrap();
        assert!((r.point[0] - 0.4).abs() < 1e-12 && r.point[1] == 0.0, "{r:?}");
        let sq: KernelDomain = DelzantPolytope::unit_square().into();
        let r = argmax_phi(&sq, &[0.5, 0.5]).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-12 && (r.point[1] - 0.5).abs() < 1e-12);
        let r = argmax_phi(&sq, &[1.0, 0.0]).unwrap();
        assert_eq!(r.point, vec![1.0, 0.0]);
        let o = KernelDomain::orthant(1);
        let r = argmax_phi(&o, &[2.5]).unwrap();
        assert!((r.point[0] - 2.5).abs() < 1e-10);
    }

    #[test]
    fn normal_derivative_is_negative_on_facets() {
        let s: KernelDomain = DelzantPolytope::simplex(2).into();
        // Hypotenuse facet (1,1)·y ≤ 1, inward normal −(1,1).
        let x = [0.3, 0.7];
        let nu = [-1.0, -1.0];
        let d = normal_derivative(&s, &x, &nu).unwrap();
        assert_eq!(d, -2.0);
        let ph = Phase::new(&s, &x).unwrap();
        let e = 1e-7;
        let y = [x[0] + e * nu[0], x[1] + e * nu[1]];
        let fd = (ph.value(&y) - ph.value(&x)) / e;
        assert!((fd - d).abs() < 1e-5, "{fd}");
    }

    #[test]
    fn log_c_examples() {
        let d = interval();
        let c2 = KernelContext::new(d.clone(), 2);
        // Σℓ_i ≡ 1 on the interval, so the constant factor is e^{−N}.
        assert!((c2.log_c(&[0.5]).unwrap() - (-2.0 + (1.0f64 / 6.0).ln())).abs() < 1e-10);
        let c100 = KernelContext::new(d, 100);
        let expect = -100.0 + ln_beta(51.0, 51.0);
        assert!((c100.log_c(&[0.5]).unwrap() - expect).abs() < 1e-9);
        let s = KernelContext::new(DelzantPolytope::simplex(2), 3);
        // Dirichlet integral k1! k2! (N−|k|)! / (N+n)! at k=(1,1), N=3.
        let expect = -3.0 + (1.0f64 / 120.0).ln();
        assert!((s.log_c(&[1.0 / 3.0, 1.0 / 3.0]).unwrap() - expect).abs() < 1e-9);
        let o = KernelContext::orthant(1, 10);
        // ∫ y^10 e^{−10y} = Γ(11)/10^11.
        let expect = ln_gamma(11.0) - 11.0 * 10f64.ln();
        assert!((o.log_c(&[1.0]).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn kernel_and_section_norm_examples() {
        let c2 = KernelContext::new(interval(), 2);
        assert!((c2.kernel_eval(&[0.5], &[0.5]).unwrap() - 1.5).abs() < 1e-9);
        assert_eq!(c2.kernel_eval(&[0.5], &[0.0]).unwrap(), 0.0);
        assert!((c2.section_norm(&[1], &[0.5]).unwrap() - 1.5).abs() < 1e-9);
        let c1 = KernelContext::new(interval(), 1);
        for y in [0.0, 0.2, 0.9] {
            assert!((c1.section_norm(&[0], &[y]).unwrap() - 2.0 * (1.0 - y)).abs() < 1e-9);
        }
        assert!((c1.section_norm(&[1], &[1.0]).unwrap() - 2.0).abs() < 1e-9);
        assert!(matches!(c1.section_norm(&[2], &[0.5]), Err(Error::NotLatticePoint { .. })));
    }

    #[test]
    fn transform_examples() {
        for n in [3u32, 10, 100] {
            let ctx = KernelContext::new(interval(), n);
            for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
                let t = ctx.transform(|y| y[0], &[x]).unwrap();
                let nf = f64::from(n);
                assert!((t - (nf * x + 1.0) / (nf + 2.0)).abs() < 1e-9, "N={n} x={x}");
                assert!((ctx.transform(|_| 1.0, &[x]).unwrap() - 1.0).abs() < 1e-14);
            }
        }
        let o = KernelContext::orthant(1, 7);
        let x = 0.8;
        let t = o.transform(|y| y[0] * y[0], &[x]).unwrap();
        assert!((t - (x + 1.0 / 7.0) * (x + 2.0 / 7.0)).abs() < 1e-10);
    }

    #[test]
    fn kernel_integrates_to_one_on_faces() {
        let ctx = KernelContext::new(DelzantPolytope::hirzebruch_trapezoid(), 9);
        for x in [[0.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.3, 0.6]] {
            let r = quadrature::integrate(
                ctx.domain().region(),
                |y| ctx.kernel_eval(&x, y).unwrap(),
                &QuadOptions::absolute(1e-9),
            )
            .unwrap();
            assert!((r.value - 1.0).abs() < 1e-7, "{x:?} {r:?}");
        }
    }

    #[test]
    fn localization_examples() {
        let ctx25 = KernelContext::new(interval(), 25);
        let ctx50 = KernelContext::new(interval(), 50);
        let g = |y: &[f64]| if y[0] < 0.1 { (0.1 - y[0]).powi(3) } else { 0.0 };
        let r25 = ctx25.localization_ratio(|_| 1.0, g, &[0.5]).unwrap();
        let r50 = ctx50.localization_ratio(|_| 1.0, g, &[0.5]).unwrap();
        assert!(r50.log_ratio < r25.log_ratio);
        let zero = ctx25.localization_ratio(|_| 1.0, |_| 0.0, &[0.5]).unwrap();
        assert_eq!(zero.ratio, 0.0);
    }
}
