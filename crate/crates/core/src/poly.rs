//! Polynomial test functions in multi-index coefficient form.
//!
//! The on-disk form is `{"terms":[{"exps":[...],"coef":r}]}`. A term whose
//! exponent list is shorter than the point dimension treats the missing
//! exponents as zero.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exps: Vec<u32>,
    pub coef: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![Monomial {
                exps: vec![],
                coef: c,
            }],
        }
    }

    pub fn monomial(exps: Vec<u32>, coef: f64) -> Self {
        Self {
            terms: vec![Monomial { exps, coef }],
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<u32>, f64)>>(terms: I) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|(exps, coef)| Monomial { exps, coef })
                .collect(),
        }
    }

    /// Parses a `poly:` spec string.
    ///
    /// Accepted forms: `poly:{json}` or `poly:c@e1,e2;c@e1,e2;...` where a term
    /// without `@` is a constant. Example: `poly:2@1,0;1@0,1` is `2y₁ + y₂`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let body = spec
            .strip_prefix("poly:")
            .ok_or_else(|| Error::InvalidArgument(format!("expected `poly:` prefix in {spec:?}")))?
            .trim();
        if body.starts_with('{') {
            return serde_json::from_str(body)
                .map_err(|e| Error::InvalidArgument(format!("bad polynomial json: {e}")));
        }
        let mut terms = Vec::new();
        for raw in body.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let (coef, exps) = match raw.split_once('@') {
                Some((c, e)) => (c, Some(e)),
                None => (raw, None),
            };
            let coef: f64 = coef
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad coefficient in term {raw:?}")))?;
            let exps = match exps {
                None => vec![],
                Some(e) => e
                    .split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidArgument(format!("bad exponents in term {raw:?}")))?,
            };
            terms.push(Monomial { exps, coef });
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty polynomial".into()));
        }
        Ok(Self { terms })
    }

    /// Largest exponent-list length; the polynomial is defined on any ℝⁿ with
    /// n at least this.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|t| t.exps.len()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exps.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = crate::sum::NeumaierSum::new();
        for t in &self.terms {
            let mut v = t.coef;
            for (j, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    v *= x.get(j).copied().unwrap_or(0.0).powi(e as i32);
                }
            }
            acc.add(v);
        }
        acc.value()
    }

    /// Exact evaluation at a rational point; coefficients are taken as the
    /// exact binary value of each `f64`.
    pub fn eval_rational(&self, x: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for t in &self.terms {
            let mut v = BigRational::from_float(t.coef).unwrap_or_else(BigRational::zero);
            for (j, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    let base = x
                        .get(j)
                        .cloned()
                        .unwrap_or_else(|| BigRational::from_integer(BigInt::zero()));
                    let mut p = BigRational::one();
                    for _ in 0..e {
                        p *= &base;
                    }
                    v *= p;
                }
            }
            acc += v;
        }
        acc
    }

    /// ∂/∂x_var.
    pub fn partial(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let e = t.exps.get(var).copied().unwrap_or(0);
                if e == 0 {
                    return None;
                }
                let mut exps = t.exps.clone();
                exps[var] -= 1;
                Some(Monomial {
                    exps,
                    coef: t.coef * f64::from(e),
                })
            })
            .collect::<Vec<_>>();
        if terms.is_empty() {
            Self::constant(0.0)
        } else {
            Self { terms }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_compact_and_json_specs() {
        let p = Polynomial::parse_spec("poly:2@1,0;1@0,1").unwrap();
        assert_eq!(p.eval(&[3.0, 5.0]), 11.0);
        let c = Polynomial::parse_spec("poly:1").unwrap();
        assert_eq!(c.eval(&[0.3, 0.4]), 1.0);
        let j = Polynomial::parse_spec(r#"poly:{"terms":[{"exps":[2],"coef":1.5}]}"#).unwrap();
        assert_eq!(j.eval(&[2.0]), 6.0);
        assert!(Polynomial::parse_spec("1@1").is_err());
        assert!(Polynomial::parse_spec("poly:x@1").is_err());
        assert!(Polynomial::parse_spec("poly:").is_err());
    }

    #[test]
    fn derivatives_and_exact_evaluation() {
        // y³ + 2 y₁ y₂
        let p = Polynomial::from_terms([(vec![3, 0], 1.0), (vec![1, 1], 2.0)]);
        let d0 = p.partial(0);
        assert_eq!(d0.eval(&[2.0, 1.0]), 14.0);
        let d00 = d0.partial(0);
        assert_eq!(d00.eval(&[2.0, 1.0]), 12.0);
        assert_eq!(p.partial(1).partial(1).eval(&[1.0, 1.0]), 0.0);
        let half = BigRational::new(1.into(), 2.into());
        let v = p.eval_rational(&[half.clone(), half]);
        assert_eq!(v, BigRational::new(5.into(), 8.into()));
        assert_eq!(p.degree(), 3);
    }
}
