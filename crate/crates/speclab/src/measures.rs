//! Singular measures on the unit interval, given by two oracles: exact
//! Fourier coefficients and ball masses.
//!
//! The circle is parametrized by `[0, 1)` and coefficients follow
//! `c(m) = ∫ e^{-2πimx} dμ(x)`, so a probability measure has `c(0) = 1`.
//! Balls are intervals of the line (no wraparound at 0 ≡ 1).

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::rng::Stream;

/// Product factors are dropped once their argument falls below this.
pub const PRODUCT_EPSILON: f64 = 1e-14;
/// Hard cap on the number of product factors.
pub const PRODUCT_MAX_DEPTH: usize = 4096;

const CYLINDER_WEIGHT_FLOOR: f64 = 1e-18;
const CYLINDER_NODE_BUDGET: usize = 2_000_000;
const RIESZ_MAX_DEPTH: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarMeasure1D {
    pub ratio: f64,
    pub translations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SelfSimilarMeasure1D {
    pub fn new(ratio: f64, translations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self { ratio, translations, weights };
        m.validate()?;
        Ok(m)
    }

    /// The middle-thirds Cantor measure.
    pub fn cantor() -> Self {
        Self { ratio: 1.0 / 3.0, translations: vec![0.0, 2.0 / 3.0], weights: vec![0.5, 0.5] }
    }

    /// Two maps `x/9` and `x/9 + 8/9` with equal weights.
    pub fn ninths() -> Self {
        Self { ratio: 1.0 / 9.0, translations: vec![0.0, 8.0 / 9.0], weights: vec![0.5, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(contract(format!("ratio {} not in (0,1)", self.ratio)));
        }
        if self.translations.len() != self.weights.len() {
            return Err(contract("translations and weights differ in length"));
        }
        if self.translations.len() < 2 {
            return Err(contract("a single map is an atom; use the atom model"));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(contract("weights must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(contract(format!("weights sum to {total}, not 1")));
        }
        for &t in &self.translations {
            if !(0.0..1.0).contains(&t) || t + self.ratio > 1.0 + 1e-15 {
                return Err(contract(format!("translation {t} pushes an image outside [0,1]")));
            }
        }
        Ok(())
    }

    /// `m(η) = Σ p_j e^{-2πiηt_j}`.
    fn mask(&self, eta: f64) -> Complex64 {
        self.translations
            .iter()
            .zip(&self.weights)
            .map(|(&t, &p)| p * Complex64::from_polar(1.0, -2.0 * PI * eta * t))
            .sum()
    }

    /// `μ̂(ξ) = ∏_{k≥0} m(ratio^k ξ)` for real ξ.
    pub fn transform(&self, xi: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        let mut arg = xi;
        for _ in 0..PRODUCT_MAX_DEPTH {
            if arg.abs() < PRODUCT_EPSILON {
                return Ok(acc);
            }
            acc *= self.mask(arg);
            arg *= self.ratio;
        }
        if arg.abs() < PRODUCT_EPSILON {
            return Ok(acc);
        }
        Err(Error::Truncation { epsilon: PRODUCT_EPSILON, max_depth: PRODUCT_MAX_DEPTH })
    }

    pub fn similarity_dimension(&self) -> Option<f64> {
        // Only meaningful for equal weights; used by tests and reports.
        let n = self.weights.len() as f64;
        let equal = self.weights.iter().all(|&w| (w - 1.0 / n).abs() < 1e-12);
        equal.then(|| n.ln() / (1.0 / self.ratio).ln())
    }

    fn ball_mass(&self, x: f64, r: f64) -> Result<f64> {
        let (lo, hi) = (x - r, x + r);
        let mut stack = vec![(0.0f64, 1.0f64, 1.0f64)];
        let mut total = 0.0;
        let mut nodes = 0usize;
        while let Some((a, s, w)) = stack.pop() {
            nodes += 1;
            if nodes > CYLINDER_NODE_BUDGET {
                return Err(Error::Resolution(format!(
                    "cylinder recursion exceeded {CYLINDER_NODE_BUDGET} nodes at r = {r:e}"
                )));
            }
            let b = a + s;
            if b < lo || a > hi {
                continue;
            }
            if a >= lo && b <= hi {
                total += w;
                continue;
            }
            if w < CYLINDER_WEIGHT_FLOOR {
                let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                total += if s > 0.0 { w * overlap / s } else { w };
                continue;
            }
            for (&t, &p) in self.translations.iter().zip(&self.weights) {
                stack.push((a + s * t, s * self.ratio, w * p));
            }
        }
        Ok(total.min(1.0))
    }

    fn sample(&self, rng: &mut Stream) -> f64 {
        let mut x = 0.0;
        let mut scale = 1.0;
        while scale > 1e-17 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.weights.len() - 1;
            for (j, &p) in self.weights.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            x += scale * self.translations[pick];
            scale *= self.ratio;
        }
        x
    }
}

/// Lacunary Riesz product `∏ (1 + a_k cos 2πλ_k x)`, truncated at depth K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszProductMeasure {
    pub frequencies: Vec<u64>,
    pub amplitudes: Vec<f64>,
    pub truncation_depth: usize,
}

impl RieszProductMeasure {
    pub fn new(frequencies: Vec<u64>, amplitudes: Vec<f64>) -> Result<Self> {
        let truncation_depth = frequencies.len();
        let m = Self { frequencies, amplitudes, truncation_depth };
        m.validate()?;
        Ok(m)
    }

    /// Frequencies `base^1, …, base^depth` with unit amplitudes.
    pub fn geometric(base: u64, depth: usize) -> Result<Self> {
        let freqs: Vec<u64> = (1..=depth as u32).map(|k| base.pow(k)).collect();
        Self::new(freqs, vec![1.0; depth])
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.amplitudes.len() {
            return Err(contract("frequencies and amplitudes differ in length"));
        }
        if self.truncation_depth == 0 || self.truncation_depth > self.frequencies.len() {
            return Err(contract("truncation depth must be in 1..=len(frequencies)"));
        }
        if self.truncation_depth > RIESZ_MAX_DEPTH {
            return Err(Error::Capacity(format!(
                "truncation depth {} exceeds {RIESZ_MAX_DEPTH}",
                self.truncation_depth
            )));
        }
        if self.frequencies[0] == 0 {
            return Err(contract("frequencies must be positive"));
        }
        for w in self.frequencies.windows(2) {
            if w[1] < 3 * w[0] {
                return Err(contract(format!("frequencies {} -> {} not lacunary (ratio < 3)", w[0], w[1])));
            }
        }
        if self.amplitudes.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(contract("amplitudes must lie in [-1,1]"));
        }
        Ok(())
    }

    fn active(&self) -> (&[u64], &[f64]) {
        let k = self.truncation_depth;
        (&self.frequencies[..k], &self.amplitudes[..k])
    }

    pub fn top_frequency(&self) -> u64 {
        self.frequencies[self.truncation_depth - 1]
    }

    /// Signed-sum digits of m, if m = Σ ε_k λ_k with ε_k ∈ {-1,0,1}.
    /// Lacunarity makes the representation unique.
    pub fn digits(&self, m: i64) -> Option<Vec<i8>> {
        let (freqs, _) = self.active();
        // tails[k] = Σ_{j<k} λ_j
        let mut tails = vec![0i128; freqs.len() + 1];
        for (k, &f) in freqs.iter().enumerate() {
            tails[k + 1] = tails[k] + f as i128;
        }
        let mut eps = vec![0i8; freqs.len()];
        fn go(k: usize, rem: i128, freqs: &[u64], tails: &[i128], eps: &mut [i8]) -> bool {
            if k == 0 {
                return rem == 0;
            }
            let f = freqs[k - 1] as i128;
            for e in [-1i8, 0, 1] {
                let next = rem - e as i128 * f;
                if next.abs() <= tails[k - 1] && go(k - 1, next, freqs, tails, eps) {
                    eps[k - 1] = e;
                    return true;
                }
            }
            false
        }
        go(freqs.len(), m as i128, freqs, &tails, &mut eps).then_some(eps)
    }

    pub fn coefficient(&self, m: i64) -> f64 {
        let (_, amps) = self.active();
        match self.digits(m) {
            None => 0.0,
            Some(eps) => eps
                .iter()
                .zip(amps)
                .map(|(&e, &a)| if e == 0 { 1.0 } else { a / 2.0 })
                .product(),
        }
    }

    /// All nonnegative frequencies of the expanded product with their coefficients.
    pub fn terms(&self) -> Vec<(u64, f64)> {
        let (freqs, amps) = self.active();
        let mut terms: Vec<(i64, f64)> = vec![(0, 1.0)];
        for (&f, &a) in freqs.iter().zip(amps) {
            let mut next = Vec::with_capacity(terms.len() * 3);
            for &(n, c) in &terms {
                next.push((n, c));
                next.push((n + f as i64, c * a / 2.0));
                next.push((n - f as i64, c * a / 2.0));
            }
            terms = next;
        }
        let mut out: Vec<(u64, f64)> =
            terms.into_iter().filter(|&(n, _)| n >= 0).map(|(n, c)| (n as u64, c)).collect();
        out.sort_by_key(|t| t.0);
        out
    }

    pub fn density(&self, x: f64) -> f64 {
        let (freqs, amps) = self.active();
        freqs
            .iter()
            .zip(amps)
            .map(|(&f, &a)| 1.0 + a * (2.0 * PI * (f as f64) * x).cos())
            .product()
    }

    /// Smallest radius the truncated product resolves: ten periods of the top frequency.
    pub fn resolution_floor(&self) -> f64 {
        10.0 / self.top_frequency() as f64
    }

    fn ball_mass(&self, x: f64, r: f64) -> Result<f64> {
        if r < self.resolution_floor() {
            return Err(Error::Resolution(format!(
                "radius {r:e} below 10/λ_K = {:e}",
                self.resolution_floor()
            )));
        }
        let a = (x - r).max(0.0);
        let b = (x + r).min(1.0);
        if b <= a {
            return Ok(0.0);
        }
        // Exact antiderivative of the truncated trigonometric polynomial.
        let mut total = b - a;
        for (n, c) in self.terms() {
            if n == 0 {
                continue;
            }
            let w = 2.0 * PI * n as f64;
            total += 2.0 * c * ((w * b).sin() - (w * a).sin()) / w;
        }
        Ok(total.max(0.0))
    }

    fn transform(&self, xi: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, c) in self.terms() {
            acc += c * unit_interval_exponential(n as f64 - xi);
            if n != 0 {
                acc += c * unit_interval_exponential(-(n as f64) - xi);
            }
        }
        acc
    }

    fn sample(&self, rng: &mut Stream) -> f64 {
        let (_, amps) = self.active();
        let bound: f64 = amps.iter().map(|a| 1.0 + a.abs()).product();
        loop {
            let x: f64 = rng.random();
            let u: f64 = rng.random();
            if u * bound <= self.density(x) {
                return x;
            }
        }
    }
}

/// `∫₀¹ e^{2πiνx} dx`.
fn unit_interval_exponential(nu: f64) -> Complex64 {
    if nu.abs() < 1e-12 {
        return Complex64::new(1.0, 0.0);
    }
    let w = 2.0 * PI * nu;
    (Complex64::from_polar(1.0, w) - 1.0) / Complex64::new(0.0, w)
}

/// A measure described by its coefficient and ball-mass oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureModel {
    SelfSimilar(SelfSimilarMeasure1D),
    Riesz(RieszProductMeasure),
    Atom { point: f64 },
    Lebesgue,
}

impl MeasureModel {
    pub fn cantor() -> Self {
        MeasureModel::SelfSimilar(SelfSimilarMeasure1D::cantor())
    }

    pub fn dirac() -> Self {
        MeasureModel::Atom { point: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureModel::SelfSimilar(m) => m.validate(),
            MeasureModel::Riesz(m) => m.validate(),
            MeasureModel::Atom { point } if !point.is_finite() => Err(contract("atom point must be finite")),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeasureModel::SelfSimilar(m) => format!("self_similar(ratio={}, maps={})", m.ratio, m.weights.len()),
            MeasureModel::Riesz(m) => format!("riesz(depth={}, top={})", m.truncation_depth, m.top_frequency()),
            MeasureModel::Atom { point } => format!("atom({point})"),
            MeasureModel::Lebesgue => "lebesgue".to_string(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        1.0
    }

    /// Fourier transform at a real frequency, `∫ e^{-2πiξx} dμ(x)`.
    pub fn transform(&self, xi: f64) -> Result<Complex64> {
        Ok(match self {
            MeasureModel::SelfSimilar(m) => m.transform(xi)?,
            MeasureModel::Riesz(m) => m.transform(xi),
            MeasureModel::Atom { point } => Complex64::from_polar(1.0, -2.0 * PI * xi * point),
            MeasureModel::Lebesgue => unit_interval_exponential(-xi),
        })
    }

    pub fn coefficient(&self, m: i64) -> Result<Complex64> {
        Ok(match self {
            MeasureModel::Riesz(r) => Complex64::new(r.coefficient(m), 0.0),
            MeasureModel::Lebesgue => Complex64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0),
            MeasureModel::Atom { point } => {
                // Reduce the phase exactly for integer m.
                let phase = (m as f64 * point).rem_euclid(1.0);
                Complex64::from_polar(1.0, -2.0 * PI * phase)
            }
            MeasureModel::SelfSimilar(s) => s.transform(m as f64)?,
        })
    }

    /// `μ(B(x, r))` with B the closed interval `[x-r, x+r]`.
    pub fn ball_mass(&self, x: f64, r: f64) -> Result<f64> {
        if !(r > 0.0) || !x.is_finite() {
            return Err(contract(format!("ball_mass needs r > 0 and finite x (x={x}, r={r})")));
        }
        if r < 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Err(Error::Resolution(format!("radius {r:e} below double resolution at x = {x}")));
        }
        match self {
            MeasureModel::SelfSimilar(m) => m.ball_mass(x, r),
            MeasureModel::Riesz(m) => m.ball_mass(x, r),
            MeasureModel::Atom { point } => Ok(if (x - point).abs() <= r { 1.0 } else { 0.0 }),
            MeasureModel::Lebesgue => Ok(((x + r).min(1.0) - (x - r).max(0.0)).max(0.0)),
        }
    }

    /// Smallest radius at which ball masses are meaningful for the model.
    pub fn resolution_floor(&self) -> f64 {
        match self {
            MeasureModel::Riesz(m) => m.resolution_floor(),
            _ => 1e-15,
        }
    }

    pub fn can_sample(&self) -> bool {
        true
    }

    pub fn sample(&self, rng: &mut Stream) -> Result<f64> {
        Ok(match self {
            MeasureModel::SelfSimilar(m) => m.sample(rng),
            MeasureModel::Riesz(m) => m.sample(rng),
            MeasureModel::Atom { point } => *point,
            MeasureModel::Lebesgue => rng.random(),
        })
    }
}

/// Measure configuration as read from JSON: the model plus an optional seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(flatten)]
    pub model: MeasureModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Fourier coefficients on the window `[-n, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    window: usize,
    coefficients: Vec<Complex64>,
}

impl FourierTable {
    pub fn from_fn(window: usize, mut f: impl FnMut(i64) -> Result<Complex64>) -> Result<Self> {
        let n = window as i64;
        let coefficients = (-n..=n).map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(Self { window, coefficients })
    }

    /// Builds a table from explicit `(m, c(m))` pairs; missing entries are zero.
    pub fn from_entries(window: usize, entries: &[(i64, Complex64)]) -> Result<Self> {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); 2 * window + 1];
        for &(m, c) in entries {
            if m.unsigned_abs() as usize > window {
                return Err(contract(format!("entry {m} outside window {window}")));
            }
            coefficients[(m + window as i64) as usize] = c;
        }
        Ok(Self { window, coefficients })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn get(&self, m: i64) -> Complex64 {
        if m.unsigned_abs() as usize > self.window {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients[(m + self.window as i64) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.window as i64;
        (-n..=n).zip(self.coefficients.iter().copied())
    }

    /// Largest `|c(-m) - conj(c(m))|` over the window.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.window as i64;
        (0..=n).map(|m| (self.get(-m) - self.get(m).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn restrict(&self, window: usize) -> Self {
        let w = window.min(self.window);
        let n = w as i64;
        Self { window: w, coefficients: (-n..=n).map(|m| self.get(m)).collect() }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "re", "im"])?;
        for (m, c) in self.iter() {
            w.write_record([m.to_string(), format!("{:.17e}", c.re), format!("{:.17e}", c.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| contract("short CSV row"))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| contract(format!("bad CSV number: {e}")))
            };
            let m = rec
                .get(0)
                .ok_or_else(|| contract("short CSV row"))?
                .trim()
                .parse::<i64>()
                .map_err(|e| contract(format!("bad CSV index: {e}")))?;
            entries.push((m, Complex64::new(parse(1)?, parse(2)?)));
        }
        let window = entries.iter().map(|e| e.0.unsigned_abs() as usize).max().unwrap_or(0);
        Self::from_entries(window, &entries)
    }
}

pub fn fourier_coefficients(measure: &MeasureModel, window: usize) -> Result<FourierTable> {
    if window == 0 {
        return Err(contract("window must be at least 1"));
    }
    FourierTable::from_fn(window, |m| measure.coefficient(m))
}

pub fn ball_mass(measure: &MeasureModel, center: f64, radius: f64) -> Result<f64> {
    measure.ball_mass(center, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian { width: f64, ambient_dim: usize },
    Fejer { order: usize },
}

impl KernelSpec {
    /// Fourier multiplier at integer frequency m (ambient dimension 1).
    pub fn weight(&self, m: i64) -> f64 {
        match *self {
            KernelSpec::Gaussian { width, .. } => gaussian_transform(width, &[m as f64]),
            KernelSpec::Fejer { order } => fejer_weight(order, m),
        }
    }
}

/// `1 - |m|/(n+1)` inside the window, zero outside.
pub fn fejer_weight(order: usize, m: i64) -> f64 {
    let a = m.unsigned_abs() as f64;
    let n1 = order as f64 + 1.0;
    if a >= n1 {
        0.0
    } else {
        1.0 - a / n1
    }
}

/// `g_t(x) = (2πt²)^{-n/2} e^{-‖x‖²/(2t²)}`.
pub fn gaussian(t: f64, x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI * t * t).powf(-n / 2.0) * (-r2 / (2.0 * t * t)).exp()
}

/// `ĝ_t(ξ) = e^{-2π²t²‖ξ‖²}`.
pub fn gaussian_transform(t: f64, xi: &[f64]) -> f64 {
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    (-2.0 * PI * PI * t * t * r2).exp()
}

pub fn mollify(table: &FourierTable, kernel: &KernelSpec) -> Result<FourierTable> {
    if let KernelSpec::Gaussian { width, ambient_dim } = *kernel {
        if ambient_dim != 1 {
            return Err(contract("tables live on the circle; kernel ambient_dim must be 1"));
        }
        if !(width > 0.0) {
            return Err(contract("gaussian width must be positive"));
        }
    }
    FourierTable::from_fn(table.window(), |m| Ok(table.get(m) * kernel.weight(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn riesz_4_16_64() -> MeasureModel {
        MeasureModel::Riesz(RieszProductMeasure::new(vec![4, 16, 64], vec![1.0; 3]).unwrap())
    }

    #[test]
    fn lebesgue_coefficients_are_orthogonal() {
        let t = fourier_coefficients(&MeasureModel::Lebesgue, 4).unwrap();
        assert_eq!(t.get(0), Complex64::new(1.0, 0.0));
        for m in 1..=4 {
            assert_eq!(t.get(m).norm(), 0.0);
            assert_eq!(t.get(-m).norm(), 0.0);
        }
    }

    #[test]
    fn cantor_coefficients_are_triadic_invariant() {
        let t = fourier_coefficients(&MeasureModel::cantor(), 300).unwrap();
        for m in -100..=100 {
            assert!((t.get(3 * m) - t.get(m)).norm() < 1e-9, "m = {m}");
        }
    }

    #[test]
    fn cantor_coefficients_match_cosine_product() {
        // μ̂(ξ) = e^{-πiξ} ∏_{k≥1} cos(2πξ/3^k)
        for &xi in &[1.0, 2.0, 5.0, 17.0, 0.3] {
            let mut prod = 1.0;
            let mut s = 1.0 / 3.0;
            for _ in 0..60 {
                prod *= (2.0 * PI * xi * s).cos();
                s /= 3.0;
            }
            let expect = Complex64::from_polar(1.0, -PI * xi) * prod;
            let got = MeasureModel::cantor().transform(xi).unwrap();
            assert!((got - expect).norm() < 1e-12, "{xi}: {got} vs {expect}");
        }
    }

    #[test]
    fn riesz_coefficients_on_signed_sums() {
        let m = riesz_4_16_64();
        assert_eq!(m.coefficient(4).unwrap().re, 0.5);
        assert_eq!(m.coefficient(20).unwrap().re, 0.25);
        assert_eq!(m.coefficient(5).unwrap().re, 0.0);
        assert_eq!(m.coefficient(-84).unwrap().re, 0.125);
        assert_eq!(m.coefficient(0).unwrap().re, 1.0);
    }

    #[test]
    fn riesz_coefficients_agree_with_quadrature_of_density() {
        // Independent route: trapezoid rule on the density is exact for this trig polynomial.
        let r = RieszProductMeasure::new(vec![3, 10, 31], vec![0.7, -0.4, 1.0]).unwrap();
        let q = 4096;
        for m in [0i64, 3, 7, 10, 13, 44, -28, 5] {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..q {
                let x = j as f64 / q as f64;
                acc += r.density(x) * Complex64::from_polar(1.0, -2.0 * PI * m as f64 * x);
            }
            acc /= q as f64;
            assert!((acc.re - r.coefficient(m)).abs() < 1e-12, "m = {m}");
            assert!(acc.im.abs() < 1e-12);
        }
    }

    #[test]
    fn riesz_rejects_non_lacunary() {
        assert!(RieszProductMeasure::new(vec![4, 10], vec![1.0, 1.0]).is_err());
        assert!(RieszProductMeasure::new(vec![4, 12], vec![1.5, 1.0]).is_err());
    }

    #[test]
    fn self_similar_rejects_single_map() {
        assert!(SelfSimilarMeasure1D::new(0.5, vec![0.0], vec![1.0]).is_err());
        assert!(SelfSimilarMeasure1D::new(0.5, vec![0.0, 0.6], vec![0.5, 0.5]).is_err());
        assert!(SelfSimilarMeasure1D::new(0.5, vec![0.0, 0.5], vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn simple_ball_masses() {
        assert_relative_eq!(MeasureModel::Lebesgue.ball_mass(0.5, 0.1).unwrap(), 0.2, epsilon = 1e-15);
        let d = MeasureModel::dirac();
        assert_eq!(d.ball_mass(0.05, 0.1).unwrap(), 1.0);
        assert_eq!(d.ball_mass(0.2, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn cantor_ball_masses_at_triadic_radii() {
        let c = MeasureModel::cantor();
        for k in 0..30 {
            let r = 3f64.powi(-k);
            let m = c.ball_mass(0.0, r).unwrap();
            assert_relative_eq!(m, 0.5f64.powi(k), max_relative = 1e-6);
        }
    }

    #[test]
    fn ball_mass_rejects_unresolvable_radius() {
        assert!(matches!(MeasureModel::cantor().ball_mass(0.5, 1e-17), Err(Error::Resolution(_))));
        let r = riesz_4_16_64();
        assert!(matches!(r.ball_mass(0.5, 1e-3), Err(Error::Resolution(_))));
    }

    #[test]
    fn riesz_ball_mass_matches_adaptive_simpson() {
        let MeasureModel::Riesz(r) = riesz_4_16_64() else { unreachable!() };
        for &(x, rad) in &[(0.3f64, 0.2f64), (0.5, 0.17), (0.01, 0.3), (0.77, 0.5)] {
            let a = (x - rad).max(0.0);
            let b = (x + rad).min(1.0);
            let oracle = adaptive_simpson(&|t| r.density(t), a, b, 1e-11, 40);
            let got = r.ball_mass(x, rad).unwrap();
            assert!((got - oracle).abs() < 1e-9, "{x} {rad}: {got} vs {oracle}");
        }
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (simpson(f, a, m), simpson(f, m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                return l + r + (l + r - whole) / 15.0;
            }
            rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
        }
        rec(f, a, b, simpson(f, a, b), tol, depth)
    }

    #[test]
    fn gaussian_closed_forms() {
        assert_relative_eq!(gaussian(1.0, &[0.0]), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_eq!(gaussian_transform(0.7, &[0.0, 0.0]), 1.0);
        // ∫ g_1² = 1/(2√π), by a fine Riemann sum.
        let h = 1e-3;
        let s: f64 = (-20_000..=20_000).map(|i| gaussian(1.0, &[i as f64 * h]).powi(2) * h).sum();
        assert_relative_eq!(s, 0.282_094_791_773_878_1, epsilon = 1e-12);
    }

    #[test]
    fn fejer_mollification_of_dirac() {
        let t = fourier_coefficients(&MeasureModel::dirac(), 3).unwrap();
        let f = mollify(&t, &KernelSpec::Fejer { order: 1 }).unwrap();
        assert_eq!(f.get(0).re, 1.0);
        assert_eq!(f.get(1).re, 0.5);
        assert_eq!(f.get(-1).re, 0.5);
        assert_eq!(f.get(2).norm(), 0.0);
    }

    #[test]
    fn gaussian_mollification_scales_modulus() {
        let t = fourier_coefficients(&MeasureModel::cantor(), 20).unwrap();
        let g = mollify(&t, &KernelSpec::Gaussian { width: 0.05, ambient_dim: 1 }).unwrap();
        for (m, c) in t.iter() {
            let expect = c.norm() * (-2.0 * PI * PI * 0.0025 * (m * m) as f64).exp();
            assert!((g.get(m).norm() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = fourier_coefficients(&MeasureModel::cantor(), 5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FourierTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn measure_spec_json() {
        let s: MeasureSpec = serde_json::from_str(
            r#"{"kind":"self_similar","ratio":0.3333333333333333,"translations":[0,0.6666666666666666],"weights":[0.5,0.5],"seed":3}"#,
        )
        .unwrap();
        assert_eq!(s.seed, Some(3));
        assert!(matches!(s.model, MeasureModel::SelfSimilar(_)));
        let l: MeasureSpec = serde_json::from_str(r#"{"kind":"lebesgue"}"#).unwrap();
        assert_eq!(l.model, MeasureModel::Lebesgue);
    }

    #[test]
    fn samples_lie_in_support() {
        let c = MeasureModel::cantor();
        for i in 0..200 {
            let x = c.sample(&mut stream(11, i)).unwrap();
            // Every Cantor point has a ternary expansion avoiding the digit 1 to depth 20.
            let mut y = x;
            for _ in 0..20 {
                y *= 3.0;
                let d = y.floor();
                assert!(d != 1.0 || (y - 1.0).abs() < 1e-6 || (y - 2.0).abs() < 1e-6, "{x}");
                y -= d;
            }
        }
    }

    fn models() -> Vec<MeasureModel> {
        vec![
            MeasureModel::Lebesgue,
            MeasureModel::dirac(),
            MeasureModel::Atom { point: 0.37 },
            MeasureModel::cantor(),
            MeasureModel::SelfSimilar(SelfSimilarMeasure1D::ninths()),
            MeasureModel::SelfSimilar(
                SelfSimilarMeasure1D::new(0.25, vec![0.0, 0.3, 0.75], vec![0.2, 0.5, 0.3]).unwrap(),
            ),
            riesz_4_16_64(),
            MeasureModel::Riesz(RieszProductMeasure::new(vec![5, 17, 60], vec![0.5, -1.0, 0.25]).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn conjugate_symmetry_and_mass_bound(which in 0usize..8, m in -2000i64..2000) {
            let model = &models()[which];
            let c = model.coefficient(m).unwrap();
            let cm = model.coefficient(-m).unwrap();
            prop_assert!((cm - c.conj()).norm() < 1e-12);
            prop_assert!(c.norm() <= model.coefficient(0).unwrap().re + 1e-12);
        }

        #[test]
        fn riesz_zero_off_signed_sums(m in -300i64..300) {
            let MeasureModel::Riesz(r) = riesz_4_16_64() else { unreachable!() };
            let brute = (0..27).any(|code: i64| {
                let e = [code % 3 - 1, (code / 3) % 3 - 1, code / 9 - 1];
                4 * e[0] + 16 * e[1] + 64 * e[2] == m
            });
            prop_assert_eq!(r.coefficient(m) != 0.0, brute);
        }

        #[test]
        fn ball_mass_is_monotone(which in 0usize..8, x in 0.0f64..1.0, r1 in 0.18f64..0.5, f in 1.0f64..3.0) {
            let model = &models()[which];
            let a = model.ball_mass(x, r1).unwrap();
            let b = model.ball_mass(x, r1 * f).unwrap();
            prop_assert!(a <= b + 1e-12);
        }
    }
}
