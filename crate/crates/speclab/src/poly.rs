//! Sparse multivariate polynomials with real coefficients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Coefficients above this magnitude are treated as overflowing the expanded form.
pub const COEFFICIENT_CAP: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    nvars: usize,
    terms: Vec<Term>,
}

impl TryFrom<PolynomialRepr> for Polynomial {
    type Error = Error;
    fn try_from(r: PolynomialRepr) -> Result<Self> {
        let mut p = Polynomial::zero(r.nvars);
        for t in r.terms {
            if t.exponents.len() != r.nvars {
                return Err(contract("term arity differs from nvars"));
            }
            if !t.coeff.is_finite() {
                return Err(contract("non-finite coefficient"));
            }
            p.add_term(t.exponents, t.coeff);
        }
        Ok(p)
    }
}

impl From<Polynomial> for PolynomialRepr {
    fn from(p: Polynomial) -> Self {
        PolynomialRepr { nvars: p.nvars, terms: p.terms().collect() }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("x{i}") } else { format!("x{i}^{k}") })
                    .collect();
                if mono.is_empty() { format!("{c}") } else { format!("{c}*{}", mono.join("*")) }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, i: usize) -> Self {
        Self::monomial(nvars, &unit(nvars, i), 1.0)
    }

    pub fn monomial(nvars: usize, exponents: &[u32], coeff: f64) -> Self {
        assert_eq!(exponents.len(), nvars, "monomial arity");
        let mut p = Self::zero(nvars);
        p.add_term(exponents.to_vec(), coeff);
        p
    }

    /// `Σ x_i²`.
    pub fn squared_norm(nvars: usize) -> Self {
        let mut p = Self::zero(nvars);
        for i in 0..nvars {
            let mut e = vec![0; nvars];
            e[i] = 2;
            p.add_term(e, 1.0);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.terms.iter().map(|(e, &c)| Term { exponents: e.clone(), coeff: c })
    }

    fn add_term(&mut self, exponents: Vec<u32>, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exponents).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.retain(|_, c| *c != 0.0);
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "polynomial arity");
        let mut p = self.clone();
        for (e, &c) in &other.terms {
            p.add_term(e.clone(), c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars, "polynomial arity");
        let mut p = Self::zero(self.nvars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.nvars, 1.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Like [`mul`](Self::mul) but fails once a coefficient leaves the representable range.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        let p = self.mul(other);
        let m = p.max_abs_coefficient();
        if !m.is_finite() || m > COEFFICIENT_CAP {
            return Err(Error::Capacity(format!(
                "expanded coefficient {m:e} exceeds {COEFFICIENT_CAP:e}; use the factored evaluation"
            )));
        }
        Ok(p)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars, "point dimension");
        let max = self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0) as usize;
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut v = Vec::with_capacity(max + 1);
                let mut acc = 1.0;
                for _ in 0..=max {
                    v.push(acc);
                    acc *= xi;
                }
                v
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, &c)| c * e.iter().enumerate().map(|(i, &k)| powers[i][k as usize]).product::<f64>())
            .sum()
    }

    /// Sum of the terms of total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e.iter().sum::<u32>() == d {
                p.add_term(e.clone(), c);
            }
        }
        p
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degrees = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degrees.next() {
            None => true,
            Some(d) => degrees.all(|k| k == d),
        }
    }

    /// All odd-degree coefficients are below `tol` relative to the largest coefficient.
    pub fn is_even(&self, tol: f64) -> bool {
        let scale = self.max_abs_coefficient().max(1.0);
        self.terms.iter().all(|(e, c)| e.iter().sum::<u32>() % 2 == 0 || c.abs() <= tol * scale)
    }

    /// The homogeneous polynomial of degree `2M` that agrees with `self` on the unit sphere,
    /// obtained by multiplying each even part `F_{2j}` by `|x|^{2(M-j)}`.
    pub fn homogenize(&self) -> Result<Self> {
        if !self.is_even(1e-14) {
            return Err(contract("homogenize needs an even polynomial"));
        }
        let Some(top) = self.degree() else {
            return Ok(self.clone());
        };
        let m = top / 2;
        let norm = Self::squared_norm(self.nvars);
        let mut out = Self::zero(self.nvars);
        for j in 0..=m {
            let part = self.homogeneous_part(2 * j);
            if part.is_zero() {
                continue;
            }
            out = out.add(&part.mul(&norm.pow(m - j)));
        }
        Ok(out)
    }
}

fn unit(n: usize, i: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[i] = 1;
    e
}

/// A map `ℝⁿ → ℝᵈ` with polynomial components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct PolynomialVectorField {
    components: Vec<Polynomial>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    components: Vec<Polynomial>,
}

impl TryFrom<FieldRepr> for PolynomialVectorField {
    type Error = Error;
    fn try_from(r: FieldRepr) -> Result<Self> {
        Self::new(r.components)
    }
}

impl From<PolynomialVectorField> for FieldRepr {
    fn from(f: PolynomialVectorField) -> Self {
        FieldRepr { components: f.components }
    }
}

impl PolynomialVectorField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(contract("vector field needs a component"));
        };
        if components.iter().any(|c| c.nvars() != first.nvars()) {
            return Err(contract("components must share the variable count"));
        }
        Ok(Self { components })
    }

    /// `(x², y², z²)`.
    pub fn squares(n: usize) -> Self {
        let comps = (0..n).map(|i| Polynomial::variable(n, i).pow(2)).collect();
        Self { components: comps }
    }

    pub fn dim(&self) -> usize {
        self.components[0].nvars()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Common degree when every nonzero component is homogeneous of the same degree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut deg = None;
        for c in &self.components {
            if c.is_zero() {
                continue;
            }
            if !c.is_homogeneous() {
                return None;
            }
            match (deg, c.degree()) {
                (None, d) => deg = d,
                (Some(a), Some(b)) if a != b => return None,
                _ => {}
            }
        }
        deg
    }

    pub fn homogenize(&self) -> Result<Self> {
        let comps = self.components.iter().map(|c| c.homogenize()).collect::<Result<Vec<_>>>()?;
        // components must end up with one common degree
        let top = comps.iter().filter_map(|c| c.degree()).max().unwrap_or(0);
        let norm = Polynomial::squared_norm(self.dim());
        let comps = comps
            .into_iter()
            .map(|c| match c.degree() {
                Some(d) if d < top => c.mul(&norm.pow((top - d) / 2)),
                _ => c,
            })
            .collect();
        Self::new(comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> Polynomial {
        Polynomial::variable(3, 0)
    }
    fn y() -> Polynomial {
        Polynomial::variable(3, 1)
    }
    fn z() -> Polynomial {
        Polynomial::variable(3, 2)
    }

    fn sphere_point(a: f64, b: f64) -> [f64; 3] {
        [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
    }

    #[test]
    fn arithmetic() {
        let p = x().add(&Polynomial::constant(3, 1.0)).pow(2);
        assert_eq!(p.coefficient(&[2, 0, 0]), 1.0);
        assert_eq!(p.coefficient(&[1, 0, 0]), 2.0);
        assert_eq!(p.coefficient(&[0, 0, 0]), 1.0);
        assert_eq!(p.eval(&[2.0, 5.0, 7.0]), 9.0);
        assert!(p.sub(&p).is_zero());
        assert_eq!(p.degree(), Some(2));
        assert_eq!(Polynomial::zero(3).degree(), None);
    }

    #[test]
    fn homogenize_examples() {
        let one = Polynomial::constant(3, 1.0);
        assert_eq!(one.homogenize().unwrap(), one);
        let f = x().pow(2).add(&one);
        let expect = x().pow(2).scale(2.0).add(&y().pow(2)).add(&z().pow(2));
        assert_eq!(f.homogenize().unwrap(), expect);
        let g = x().pow(4).add(&y().pow(2));
        let expect = x().pow(4).add(&y().pow(2).mul(&Polynomial::squared_norm(3)));
        assert_eq!(g.homogenize().unwrap(), expect);
        assert!(x().homogenize().is_err());
    }

    #[test]
    fn vector_field_degree() {
        let f = PolynomialVectorField::new(vec![x().pow(2), y().pow(2), z().pow(2).add(&Polynomial::constant(3, 1.0))]).unwrap();
        assert_eq!(f.homogeneous_degree(), None);
        let h = f.homogenize().unwrap();
        assert_eq!(h.homogeneous_degree(), Some(2));
        assert_eq!(PolynomialVectorField::squares(3).homogeneous_degree(), Some(2));
        let json = serde_json::to_string(&h).unwrap();
        let back: PolynomialVectorField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn capacity() {
        let big = Polynomial::constant(3, 1e100);
        assert!(matches!(big.checked_mul(&big), Err(Error::Capacity(_))));
    }

    proptest! {
        #[test]
        fn homogenize_agrees_on_sphere(cs in prop::collection::vec(-3.0f64..3.0, 6), a in 0.0f64..3.14, b in -3.14f64..3.14) {
            let one = Polynomial::constant(3, 1.0);
            let monos = [one, x().pow(2), y().mul(&z()), x().pow(4), x().mul(&y()).mul(&z().pow(2)), z().pow(6)];
            let f = monos.iter().zip(&cs).fold(Polynomial::zero(3), |acc, (m, c)| acc.add(&m.scale(*c)));
            let h = f.homogenize().unwrap();
            prop_assert!(h.is_homogeneous());
            let p = sphere_point(a, b);
            prop_assert!((h.eval(&p) - f.eval(&p)).abs() < 1e-10);
            let top = h.homogenize().unwrap();
            prop_assert_eq!(top, h);
        }

        #[test]
        fn homogeneous_scaling(t in 0.1f64..10.0, a in 0.0f64..3.14, b in -3.14f64..3.14) {
            let f = x().pow(2).add(&Polynomial::constant(3, 1.0)).mul(&z().pow(2)).homogenize().unwrap();
            let d = f.degree().unwrap() as i32;
            let p = sphere_point(a, b);
            let q: Vec<f64> = p.iter().map(|v| v * t).collect();
            let lhs = f.eval(&q);
            let rhs = t.powi(d) * f.eval(&p);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }
}
