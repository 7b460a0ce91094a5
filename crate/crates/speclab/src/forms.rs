//! Counting forms in their frequency-side and time-side representations.
//!
//! On the circle, `Λ_*(f,g,h) = Σ_{n,r} f̂(n) ĝ(n+r) ĥ(n+2r)`. The time side
//! `∫ f(x) conj(g(-2x) h(x)) dx` equals `Σ f̂(a) conj(ĝ(b)) conj(ĥ(a+2b))`,
//! which agrees with `Λ_*` only when `g` and `h` are real-valued.
//!
//! On ℝⁿ, `Λ^𝔹(g; f_1..f_k) = ∫ ĝ(ξ) ∏ f̂_j(B_j ξ) dξ`, and the time side is
//! `∫ g(-𝔹ᵀx) ∏ f_j(x_j) dx`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configurations::{least_squares, ConfigFamily};
use crate::error::{contract, Error, Result};
use crate::measures::{fejer_weight, FourierTable, MeasureModel};

/// Tail mass allowed outside a quadrature box.
pub const TAIL_BUDGET: f64 = 1e-10;

/// A trigonometric polynomial held by its (finitely supported) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    coefficients: FourierTable,
    real: bool,
}

impl TrigPolynomial {
    pub fn new(coefficients: FourierTable) -> Self {
        let real = coefficients.conjugate_symmetry_defect() < 1e-12;
        Self { coefficients, real }
    }

    pub fn from_entries(entries: &[(i64, Complex64)]) -> Result<Self> {
        let window = entries.iter().map(|e| e.0.unsigned_abs() as usize).max().unwrap_or(0);
        Ok(Self::new(FourierTable::from_entries(window, entries)?))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_entries(&[(0, Complex64::new(c, 0.0))]).expect("window 0 holds index 0")
    }

    /// `cos(2πkx)`.
    pub fn cosine(k: i64) -> Self {
        let half = Complex64::new(0.5, 0.0);
        Self::from_entries(&[(k, half), (-k, half)]).expect("entries inside window")
    }

    /// `e^{2πikx}`.
    pub fn exponential(k: i64) -> Self {
        Self::from_entries(&[(k, Complex64::new(1.0, 0.0))]).expect("entry inside window")
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coefficient(&self, m: i64) -> Complex64 {
        self.coefficients.get(m)
    }

    pub fn support(&self) -> Vec<(i64, Complex64)> {
        self.coefficients.iter().filter(|(_, c)| c.norm() > 0.0).collect()
    }

    pub fn degree(&self) -> usize {
        self.support().iter().map(|(m, _)| m.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.support().iter().map(|&(m, c)| c * Complex64::from_polar(1.0, 2.0 * PI * m as f64 * x)).sum()
    }

    /// `Σ a_i p_i` over polynomials of a common window.
    pub fn combine(terms: &[(Complex64, &TrigPolynomial)]) -> Result<Self> {
        let window = terms.iter().map(|t| t.1.coefficients.window()).max().unwrap_or(0);
        let table = FourierTable::from_fn(window, |m| Ok(terms.iter().map(|(a, p)| a * p.coefficient(m)).sum()))?;
        Ok(Self::new(table))
    }
}

pub fn trilinear_frequency(f: &TrigPolynomial, g: &TrigPolynomial, h: &TrigPolynomial) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, fc) in f.support() {
        for (b, gc) in g.support() {
            // r = b - n, third index n + 2r = 2b - n.
            let hc = h.coefficient(2 * b - n);
            if hc.norm() > 0.0 {
                acc += fc * gc * hc;
            }
        }
    }
    acc
}

/// Smallest trapezoid order that integrates `f(x) conj(g(-2x) h(x))` exactly.
pub fn exact_time_order(f: &TrigPolynomial, g: &TrigPolynomial, h: &TrigPolynomial) -> usize {
    f.degree() + 2 * g.degree() + h.degree() + 1
}

pub fn trilinear_time(f: &TrigPolynomial, g: &TrigPolynomial, h: &TrigPolynomial, order: usize) -> Result<Complex64> {
    let need = exact_time_order(f, g, h);
    if order < need {
        return Err(contract(format!("quadrature order {order} below exactness threshold {need}")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..order {
        let x = j as f64 / order as f64;
        acc += f.eval(x) * (g.eval(-2.0 * x) * h.eval(x)).conj();
    }
    Ok(acc / order as f64)
}

/// A separable Schwartz function `A ∏_i (x_i - c_i)^{α_i} g_t(x - c)` with
/// `g_t` the unit-mass Gaussian of width `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwartzSurrogate {
    pub amplitude: f64,
    pub width: f64,
    pub center: Vec<f64>,
    #[serde(default)]
    pub exponents: Vec<u32>,
}

impl SchwartzSurrogate {
    pub fn gaussian(width: f64, center: Vec<f64>) -> Self {
        let n = center.len();
        Self { amplitude: 1.0, width, center, exponents: vec![0; n] }
    }

    pub fn centered(width: f64, dim: usize) -> Self {
        Self::gaussian(width, vec![0.0; dim])
    }

    pub fn with_exponents(mut self, exponents: Vec<u32>) -> Self {
        self.exponents = exponents;
        self
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn exponent(&self, i: usize) -> u32 {
        self.exponents.get(i).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || self.center.is_empty() {
            return Err(contract("surrogate needs positive width and dim ≥ 1"));
        }
        if !self.exponents.is_empty() && self.exponents.len() != self.center.len() {
            return Err(contract("exponent count must match dimension"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let t = self.width;
        let norm = 1.0 / (t * (2.0 * PI).sqrt());
        let mut v = self.amplitude;
        for (i, (&xi, &ci)) in x.iter().zip(&self.center).enumerate() {
            let u = xi - ci;
            v *= u.powi(self.exponent(i) as i32) * norm * (-u * u / (2.0 * t * t)).exp();
        }
        v
    }

    /// Closed-form transform: per axis `(-it/√2)^a H_a(√2πtξ) e^{-2π²t²ξ²} e^{-2πicξ}`.
    pub fn transform(&self, xi: &[f64]) -> Complex64 {
        let t = self.width;
        let s = 2f64.sqrt() * PI * t;
        let mut v = Complex64::new(self.amplitude, 0.0);
        for (i, (&w, &c)) in xi.iter().zip(&self.center).enumerate() {
            let a = self.exponent(i);
            let pre = Complex64::new(0.0, -t / 2f64.sqrt()).powu(a);
            let shift = Complex64::from_polar(1.0, -2.0 * PI * c * w);
            v *= pre * hermite(a, s * w) * (-(s * w) * (s * w)).exp() * shift;
        }
        v
    }

    /// `‖f‖₁`, which also bounds `sup |f̂|`.
    pub fn l1_norm(&self) -> f64 {
        let t = self.width;
        (0..self.dim())
            .map(|i| {
                let a = self.exponent(i) as f64;
                // E|X|^a for X ~ N(0, t²).
                t.powf(a) * 2f64.powf(a / 2.0) * gamma_half_integer(a + 1.0) / PI.sqrt()
            })
            .product::<f64>()
            * self.amplitude.abs()
    }

    /// `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        let t = self.width;
        let norm = 1.0 / (t * (2.0 * PI).sqrt());
        (0..self.dim())
            .map(|i| {
                let a = self.exponent(i) as f64;
                if a == 0.0 {
                    norm
                } else {
                    (a * t * t).powf(a / 2.0) * (-a / 2.0).exp() * norm
                }
            })
            .product::<f64>()
            * self.amplitude.abs()
    }

    /// Half-width (about the center) outside which each axis carries less than `eps` of `‖f‖₁`.
    fn time_radius(&self, eps: f64) -> f64 {
        let amax = (0..self.dim()).map(|i| self.exponent(i)).max().unwrap_or(0) as f64;
        self.width * ((2.0 * (1.0 / eps).ln()).sqrt() + 2.0 * amax.sqrt() + 1.0)
    }

    /// Half-width outside which the transform carries less than `eps` of its `L¹` mass.
    fn frequency_radius(&self, eps: f64) -> f64 {
        let amax = (0..self.dim()).map(|i| self.exponent(i)).max().unwrap_or(0) as f64;
        let s = 2f64.sqrt() * PI * self.width;
        (((1.0 / eps).ln()).sqrt() + 2.0 * amax.sqrt() + 1.0) / s
    }

    /// Upper bound on `∫_{|ξ_i| > R for some i} |f̂|`, by 1D quadrature of the separable factors.
    fn frequency_tail(&self, r: f64) -> f64 {
        let t = self.width;
        let s = 2f64.sqrt() * PI * t;
        let factor = |a: u32, w: f64| (t / 2f64.sqrt()).powi(a as i32) * hermite(a, s * w).abs() * (-(s * w).powi(2)).exp();
        self.separable_tail(r, 0.0, &factor)
    }

    /// Upper bound on `∫_{|x_i - c_i| > R for some i} |f|`.
    fn time_tail(&self, r: f64) -> f64 {
        let t = self.width;
        let norm = 1.0 / (t * (2.0 * PI).sqrt());
        let factor = |a: u32, u: f64| u.abs().powi(a as i32) * norm * (-u * u / (2.0 * t * t)).exp();
        self.separable_tail(r, 0.0, &factor)
    }

    fn separable_tail(&self, r: f64, c: f64, factor: &dyn Fn(u32, f64) -> f64) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        let whole: Vec<f64> = (0..n).map(|i| line_integral(&|u| factor(self.exponent(i), u), c, 0.0, f64::INFINITY)).collect();
        for i in 0..n {
            let tail = line_integral(&|u| factor(self.exponent(i), u), c, r, f64::INFINITY);
            let others: f64 = (0..n).filter(|&l| l != i).map(|l| whole[l]).product();
            total += tail * others;
        }
        total * self.amplitude.abs()
    }
}

/// `∫_{|u - c| ∈ [lo, hi)} f(u) du` for a rapidly decaying non-negative f, by fine trapezoid.
fn line_integral(f: &dyn Fn(f64) -> f64, c: f64, lo: f64, hi: f64) -> f64 {
    // Integrate outward until the integrand is negligible.
    let mut scale = 1e-3;
    while f(c + scale) > 0.0 && scale < 1e6 && f(c + scale) > 1e-300 {
        scale *= 2.0;
    }
    let end = hi.min(scale.max(lo));
    if end <= lo {
        return 0.0;
    }
    let m = 20_000;
    let h = (end - lo) / m as f64;
    let mut s = 0.0;
    for j in 0..=m {
        let u = lo + j as f64 * h;
        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
        s += w * (f(c + u) + f(c - u));
    }
    s * h
}

/// Physicists' Hermite polynomial `H_a(u)`.
fn hermite(a: u32, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    if a == 0 {
        return h0;
    }
    for k in 1..a {
        let h2 = 2.0 * u * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `Γ(x/2 · 2) ` for positive integers or half-integers `x`, via recursion.
fn gamma_half_integer(x: f64) -> f64 {
    // Γ((a+1)/2) for a = x - 1.
    let z = x / 2.0;
    let mut acc = 1.0;
    let mut z0 = z;
    while z0 > 1.0 {
        z0 -= 1.0;
        acc *= z0;
    }
    if (z0 - 0.5).abs() < 1e-12 {
        acc * PI.sqrt()
    } else {
        acc
    }
}

/// A tensor trapezoid grid: `2m+1` nodes per axis on `[c - R, c + R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub half_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormValue {
    pub re: f64,
    pub im: f64,
    /// Discretization error estimate `|I_h - I_{2h}|` plus the tail bound.
    pub error: f64,
    pub tail_bound: f64,
}

impl FormValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn check_dims(g: &SchwartzSurrogate, fs: &[SchwartzSurrogate], fam: &ConfigFamily) -> Result<()> {
    g.validate()?;
    let n = g.dim();
    if fam.dim() != n || fs.len() != fam.k() {
        return Err(contract(format!(
            "dimension mismatch: g in ℝ^{n}, family in ℝ^{} with k = {}, {} functions",
            fam.dim(),
            fam.k(),
            fs.len()
        )));
    }
    for f in fs {
        f.validate()?;
        if f.dim() != n {
            return Err(contract("all surrogates must share the dimension"));
        }
    }
    Ok(())
}

/// Tensor trapezoid over `dims` axes, returning the fine and the every-other-node sums.
fn tensor_trapezoid(
    dims: usize,
    centers: &[f64],
    grid: &QuadratureGrid,
    f: &mut dyn FnMut(&[f64]) -> Complex64,
) -> Result<(Complex64, Complex64)> {
    let m = grid.half_points;
    let per_axis = 2 * m + 1;
    let total = (per_axis as u128).pow(dims as u32);
    if total > 200_000_000 {
        return Err(Error::Capacity(format!("quadrature needs {total} nodes")));
    }
    let h = grid.half_width / m as f64;
    let mut idx = vec![0usize; dims];
    let mut x = vec![0.0; dims];
    let (mut fine, mut coarse) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    loop {
        let mut on_coarse = true;
        for d in 0..dims {
            x[d] = centers[d] - grid.half_width + idx[d] as f64 * h;
            on_coarse &= idx[d] % 2 == 0;
        }
        let v = f(&x);
        fine += v;
        if on_coarse {
            coarse += v;
        }
        let mut d = 0;
        loop {
            if d == dims {
                let hf = h.powi(dims as i32);
                let hc = (2.0 * h).powi(dims as i32);
                return Ok((fine * hf, coarse * hc));
            }
            idx[d] += 1;
            if idx[d] < per_axis {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn mat_vec(b: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..x.len()).map(|j| b[(i, j)] * x[j]).sum();
    }
}

/// A grid wide enough for the frequency-side integrand of the given surrogates.
pub fn auto_frequency_grid(g: &SchwartzSurrogate, half_points: usize) -> QuadratureGrid {
    QuadratureGrid { half_width: g.frequency_radius(1e-14), half_points }
}

/// A grid wide enough (about each `f_j` center) for the time-side integrand.
pub fn auto_time_grid(fs: &[SchwartzSurrogate], half_points: usize) -> QuadratureGrid {
    let r = fs.iter().map(|f| f.time_radius(1e-14)).fold(0.0, f64::max);
    QuadratureGrid { half_width: r, half_points }
}

pub fn multilinear_frequency(
    g: &SchwartzSurrogate,
    fs: &[SchwartzSurrogate],
    fam: &ConfigFamily,
    grid: &QuadratureGrid,
) -> Result<FormValue> {
    check_dims(g, fs, fam)?;
    let n = g.dim();
    let sup_f: f64 = fs.iter().map(|f| f.l1_norm()).product();
    let tail_bound = g.frequency_tail(grid.half_width) * sup_f;
    if tail_bound > TAIL_BUDGET {
        return Err(Error::Resolution(format!("frequency tail {tail_bound:e} exceeds budget {TAIL_BUDGET:e}")));
    }
    let mut y = vec![0.0; n];
    let centers = vec![0.0; n];
    let (fine, coarse) = tensor_trapezoid(n, &centers, grid, &mut |xi| {
        let mut v = g.transform(xi);
        for (f, b) in fs.iter().zip(fam.matrices()) {
            mat_vec(b, xi, &mut y);
            v *= f.transform(&y);
        }
        v
    })?;
    Ok(FormValue { re: fine.re, im: fine.im, error: (fine - coarse).norm() + tail_bound, tail_bound })
}

pub fn multilinear_time(
    g: &SchwartzSurrogate,
    fs: &[SchwartzSurrogate],
    fam: &ConfigFamily,
    grid: &QuadratureGrid,
) -> Result<FormValue> {
    check_dims(g, fs, fam)?;
    let n = g.dim();
    let k = fs.len();
    let tail_bound = {
        let whole: Vec<f64> = fs.iter().map(|f| f.l1_norm()).collect();
        let mut t = 0.0;
        for j in 0..k {
            let others: f64 = (0..k).filter(|&l| l != j).map(|l| whole[l]).product();
            t += fs[j].time_tail(grid.half_width) * others;
        }
        t * g.sup_norm()
    };
    if tail_bound > TAIL_BUDGET {
        return Err(Error::Resolution(format!("time tail {tail_bound:e} exceeds budget {TAIL_BUDGET:e}")));
    }
    let centers: Vec<f64> = fs.iter().flat_map(|f| f.center.iter().copied()).collect();
    let mut arg = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let (fine, coarse) = tensor_trapezoid(n * k, &centers, grid, &mut |x| {
        // -𝔹ᵀx = -Σ B_jᵀ x_j
        arg.iter_mut().for_each(|a| *a = 0.0);
        let mut prod = 1.0;
        for (j, (f, b)) in fs.iter().zip(fam.matrices()).enumerate() {
            let xj = &x[j * n..(j + 1) * n];
            prod *= f.eval(xj);
            for (i, t) in tmp.iter_mut().enumerate() {
                *t = (0..n).map(|l| b[(l, i)] * xj[l]).sum();
            }
            for i in 0..n {
                arg[i] -= tmp[i];
            }
        }
        if prod == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(g.eval(&arg) * prod, 0.0)
    })?;
    Ok(FormValue { re: fine.re, im: fine.im, error: (fine - coarse).norm() + tail_bound, tail_bound })
}

/// `Λ_*(f_n, f_n, f_n)` for the Fejér-order-n mollification `f_n` of the table's measure.
pub fn fejer_form(table: &FourierTable, n: usize) -> Result<f64> {
    if table.window() < n {
        return Err(contract(format!("table window {} smaller than order {n}", table.window())));
    }
    let k = n as i64;
    let f: Vec<Complex64> = (-k..=k).map(|m| table.get(m) * fejer_weight(n, m)).collect();
    let at = |m: i64| f[(m + k) as usize];
    let mut acc = Complex64::new(0.0, 0.0);
    for a in -k..=k {
        let fa = at(a);
        if fa.norm() == 0.0 {
            continue;
        }
        let mut c = -k + (a + k).rem_euclid(2);
        while c <= k {
            let fc = at(c);
            if fc.norm() > 0.0 {
                acc += fa * at((a + c) / 2) * fc;
            }
            c += 2;
        }
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::SymmetryViolation { imag: acc.im, tol: 1e-10 });
    }
    Ok(acc.re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub radii: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub fitted_slope: f64,
    pub predicted_exponent: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `Λ^𝔹(G_r; G_r, …, G_r)` with `G_r = g_r ∗ μ`, for a measure on `[0, 1]` and scalar `B_j`.
pub fn mollified_form(measure: &MeasureModel, fam: &ConfigFamily, r: f64) -> Result<f64> {
    if fam.dim() != 1 {
        return Err(contract("measures live on the line; the family must act on ℝ¹"));
    }
    let bs: Vec<f64> = fam.matrices().iter().map(|b| b[(0, 0)]).collect();
    let spread = 1.0 + bs.iter().map(|b| b.abs()).sum::<f64>();
    let energy = 1.0 + bs.iter().map(|b| b * b).sum::<f64>();
    // Poisson summation: aliases sit at multiples of 1/h, beyond the time-side support.
    let h = 1.0 / (2.0 * spread + 10.0 * r);
    let cutoff = ((1e14f64).ln() / (2.0 * PI * PI * r * r * energy)).sqrt();
    let steps = (cutoff / h).ceil() as i64;
    if steps > 50_000_000 {
        return Err(Error::Capacity(format!("{steps} quadrature nodes at r = {r:e}")));
    }
    let gt = |xi: f64| (-2.0 * PI * PI * r * r * xi * xi).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in -steps..=steps {
        let xi = j as f64 * h;
        let mut v = measure.transform(xi)? * gt(xi);
        for &b in &bs {
            v *= measure.transform(b * xi)? * gt(b * xi);
        }
        acc += v;
    }
    Ok(acc.re * h)
}

/// Log-log slope of `Λ^𝔹(G_r; …)` against the radius, compared with `α(k+1) - n`.
pub fn scaling_experiment(measure: &MeasureModel, fam: &ConfigFamily, alpha: f64, radii: &[f64], tolerance: f64) -> Result<ScalingReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(contract("radii must be a decreasing list of at least two values"));
    }
    let offending: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| match measure.ball_mass(0.0, r) {
            Ok(m) => m < r.powf(alpha) * (1.0 - 1e-9),
            Err(_) => true,
        })
        .collect();
    if !offending.is_empty() {
        return Err(Error::Precondition(format!("μ(B(0,r)) < r^{alpha} at radii {offending:?}")));
    }
    let lambda_values = radii.iter().map(|&r| mollified_form(measure, fam, r)).collect::<Result<Vec<_>>>()?;
    if let Some(v) = lambda_values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::UndefinedLog(format!("form value {v} is not positive")));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = lambda_values.iter().map(|v| v.ln()).collect();
    let (fitted_slope, _) = least_squares(&xs, &ys);
    let predicted_exponent = alpha * (fam.k() as f64 + 1.0) - fam.dim() as f64;
    Ok(ScalingReport {
        radii: radii.to_vec(),
        lambda_values,
        fitted_slope,
        predicted_exponent,
        tolerance,
        pass: fitted_slope <= predicted_exponent + tolerance,
    })
}
