//! Subspace bundles on the sphere and constant-coefficient operator symbols.
//!
//! A bundle assigns a subspace to every direction `ξ ∈ S^{n-1}`. The
//! operators here are homogeneous of order `m`, so their symbols satisfy
//! `A[tξ] = t^m A[ξ]` and everything can be decided on the sphere.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::poly::{Polynomial, PolynomialVectorField};
use crate::rng;
use crate::sphere::{
    self, angle, angle_to_chord, dedup_points, normalize, random_unit, rotate, tangent_basis, Cap, CapFamily,
    Point, PointIndex, Rotation, SphereGrid,
};

// ---------------------------------------------------------------- subspaces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct Subspace {
    basis: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient: usize,
    basis: Vec<Vec<f64>>,
}

impl TryFrom<SubspaceRepr> for Subspace {
    type Error = Error;
    fn try_from(r: SubspaceRepr) -> Result<Self> {
        if r.basis.iter().any(|c| c.len() != r.ambient) {
            return Err(contract("basis vector length differs from ambient dimension"));
        }
        Subspace::span(r.ambient, &r.basis, 1e-12)
    }
}

impl From<Subspace> for SubspaceRepr {
    fn from(s: Subspace) -> Self {
        SubspaceRepr { ambient: s.ambient(), basis: s.basis_vectors() }
    }
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self { basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Self { basis: DMatrix::identity(ambient, ambient) }
    }

    /// Span of the given vectors; singular values below `tol·σ_max` are dropped.
    pub fn span(ambient: usize, vectors: &[Vec<f64>], tol: f64) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != ambient) {
            return Err(contract("vector length differs from ambient dimension"));
        }
        if vectors.is_empty() {
            return Ok(Self::zero(ambient));
        }
        let m = DMatrix::from_fn(ambient, vectors.len(), |i, j| vectors[j][i]);
        Ok(Self::range(&m, tol))
    }

    /// Column space of `m`, thresholded relative to the largest singular value.
    pub fn range(m: &DMatrix<f64>, tol: f64) -> Self {
        let n = m.nrows();
        if m.ncols() == 0 {
            return Self::zero(n);
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors");
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Self::zero(n);
        }
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol * smax).collect();
        Self { basis: DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]) }
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|j| self.basis.column(j).iter().copied().collect()).collect()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// `‖v − Pv‖ / ‖v‖`.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        (v - self.project(v)).norm() / n
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.residual(&DVector::from_column_slice(v)) <= tol
    }

    /// `self ∩ other`, with directions kept when their distance to `other` is at most `tol`.
    pub fn intersect(&self, other: &Subspace, tol: f64) -> Subspace {
        if self.dim() == 0 {
            return self.clone();
        }
        let comp = &self.basis - &other.basis * (other.basis.transpose() * &self.basis);
        let coords = null_space_absolute(&comp, tol);
        let basis = &self.basis * coords;
        Subspace::range(&basis, 1e-12)
    }
}

/// Right null space of `m`, keeping singular values at most `tol` (absolute).
fn null_space_absolute(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let l = m.ncols();
    let (sv, vt) = full_svd(m);
    let keep: Vec<usize> = (0..l).filter(|&i| sv[i] <= tol).collect();
    DMatrix::from_fn(l, keep.len(), |i, j| vt[(keep[j], i)])
}

/// Singular values padded with zeros to `ncols`, and the full `ncols × ncols` right factor.
fn full_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = m.ncols();
    let rows = m.nrows().max(l);
    let mut a = DMatrix::zeros(rows, l);
    a.view_mut((0, 0), (m.nrows(), l)).copy_from(m);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.resize(l, 0.0);
    (sv, vt)
}

/// Orthonormal basis of the right null space of `m`, thresholded at `tol·σ_max`.
pub fn kernel_subspace(m: &DMatrix<f64>, tol: f64) -> Result<Subspace> {
    if !(tol > 0.0) {
        return Err(contract("kernel tolerance must be positive"));
    }
    let l = m.ncols();
    let (sv, vt) = full_svd(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(Subspace::full(l));
    }
    let keep: Vec<usize> = (0..l).filter(|&i| sv[i] <= tol * smax).collect();
    Ok(Subspace { basis: DMatrix::from_fn(l, keep.len(), |i, j| vt[(keep[j], i)]) })
}

/// Sine of the largest principal angle between equal-dimensional subspaces.
pub fn grassmann_distance(v: &Subspace, w: &Subspace) -> Result<f64> {
    if v.ambient() != w.ambient() || v.dim() != w.dim() {
        return Err(contract(format!(
            "grassmann distance needs equal dimensions, got {}/{} and {}/{}",
            v.dim(),
            v.ambient(),
            w.dim(),
            w.ambient()
        )));
    }
    if v.dim() == 0 {
        return Ok(0.0);
    }
    let comp = &v.basis - &w.basis * (w.basis.transpose() * &v.basis);
    let s = comp.singular_values().max();
    Ok(s.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------- operators

/// Anything with a matrix-valued symbol on `ℝⁿ`.
pub trait SymbolField {
    fn dim(&self) -> usize;
    fn shape(&self) -> (usize, usize);
    /// The symbol at `ξ`, possibly multiplied by a positive scalar.
    fn symbol(&self, xi: &[f64]) -> DMatrix<f64>;
    /// Scalars whose sign change between two points of a path certifies a zero of `symbol·w` in between.
    fn certificates(&self, _w: &[f64], _xi: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    /// Parameters `s` of the circle `cos s·u₁ + sin s·u₂` worth sampling for the certificates.
    fn sweep_hints(&self, _w: &[f64], _u1: &[f64], _u2: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTerm {
    pub alpha: Vec<u32>,
    pub matrix: DMatrix<f64>,
}

/// Principal part `Σ_{|α|=m} A_α ∂^α` of a constant-coefficient operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct PDOperator {
    order: u32,
    terms: Vec<OperatorTerm>,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    order: u32,
    terms: Vec<TermRepr>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    alpha: Vec<u32>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<OperatorRepr> for PDOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        let terms = r
            .terms
            .into_iter()
            .map(|t| {
                let rows = t.matrix.len();
                let cols = t.matrix.first().map_or(0, |row| row.len());
                if t.matrix.iter().any(|row| row.len() != cols) {
                    return Err(contract("ragged operator matrix"));
                }
                Ok(OperatorTerm { alpha: t.alpha, matrix: DMatrix::from_fn(rows, cols, |i, j| t.matrix[i][j]) })
            })
            .collect::<Result<Vec<_>>>()?;
        PDOperator::new(r.order, terms)
    }
}

impl From<PDOperator> for OperatorRepr {
    fn from(op: PDOperator) -> Self {
        OperatorRepr {
            order: op.order,
            terms: op
                .terms
                .into_iter()
                .map(|t| TermRepr {
                    alpha: t.alpha,
                    matrix: (0..t.matrix.nrows()).map(|i| t.matrix.row(i).iter().copied().collect()).collect(),
                })
                .collect(),
        }
    }
}

impl PDOperator {
    pub fn new(order: u32, terms: Vec<OperatorTerm>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(contract("operator needs at least one term"));
        };
        let (n, shape) = (first.alpha.len(), first.matrix.shape());
        for t in &terms {
            if t.alpha.len() != n || t.alpha.iter().sum::<u32>() != order {
                return Err(contract(format!("multi-index {:?} is not of order {order} in {n} variables", t.alpha)));
            }
            if t.matrix.shape() != shape {
                return Err(contract("operator matrices must share one shape"));
            }
        }
        if terms.iter().all(|t| t.matrix.iter().all(|&a| a == 0.0)) {
            return Err(contract("operator has no nonzero term"));
        }
        Ok(Self { order, terms })
    }

    /// `div f = Σ ∂_i f_i` on `ℝⁿ`.
    pub fn divergence(n: usize) -> Self {
        let terms = (0..n)
            .map(|i| {
                let mut alpha = vec![0; n];
                alpha[i] = 1;
                OperatorTerm { alpha, matrix: DMatrix::from_fn(1, n, |_, j| if j == i { 1.0 } else { 0.0 }) }
            })
            .collect();
        Self { order: 1, terms }
    }

    /// Operator whose symbol entries are the given homogeneous polynomials.
    pub fn from_polynomial_matrix(entries: &[Vec<Polynomial>]) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, |r| r.len());
        let nonzero: Vec<&Polynomial> = entries.iter().flatten().filter(|p| !p.is_zero()).collect();
        let Some(first) = nonzero.first() else {
            return Err(contract("operator has no nonzero entry"));
        };
        let n = first.nvars();
        let order = first.degree().unwrap_or(0);
        if nonzero.iter().any(|p| !p.is_homogeneous() || p.degree() != Some(order) || p.nvars() != n) {
            return Err(contract("symbol entries must be homogeneous of one degree"));
        }
        let mut by_alpha: std::collections::BTreeMap<Vec<u32>, DMatrix<f64>> = Default::default();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != cols {
                return Err(contract("ragged polynomial matrix"));
            }
            for (j, p) in row.iter().enumerate() {
                for t in p.terms() {
                    by_alpha.entry(t.exponents).or_insert_with(|| DMatrix::zeros(rows, cols))[(i, j)] += t.coeff;
                }
            }
        }
        let terms = by_alpha.into_iter().map(|(alpha, matrix)| OperatorTerm { alpha, matrix }).collect();
        Self::new(order, terms)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }
}

impl SymbolField for PDOperator {
    fn dim(&self) -> usize {
        self.terms[0].alpha.len()
    }

    fn shape(&self) -> (usize, usize) {
        self.terms[0].matrix.shape()
    }

    fn symbol(&self, xi: &[f64]) -> DMatrix<f64> {
        assert_eq!(xi.len(), self.dim(), "frequency dimension");
        let (r, c) = self.shape();
        let mut out = DMatrix::zeros(r, c);
        for t in &self.terms {
            let mono: f64 = t.alpha.iter().zip(xi).map(|(&a, &x)| x.powi(a as i32)).product();
            if mono != 0.0 {
                out += &t.matrix * mono;
            }
        }
        out
    }
}

pub fn symbol(op: &PDOperator, xi: &[f64]) -> DMatrix<f64> {
    op.symbol(xi)
}

// ---------------------------------------------------------------- line bundles

/// `ξ ↦ span{P(ξ)}` for a vector field `P`.
pub trait LineBundle {
    fn dim(&self) -> usize;
    /// A vector spanning the line at `ξ`, up to a positive factor; zero where the line is undefined.
    fn direction(&self, xi: &[f64]) -> Vec<f64>;
}

impl LineBundle for PolynomialVectorField {
    fn dim(&self) -> usize {
        PolynomialVectorField::dim(self)
    }

    fn direction(&self, xi: &[f64]) -> Vec<f64> {
        self.eval(xi)
    }
}

/// Sine of the angle between `p` and the line through `v_hat`; infinite when `p` vanishes.
pub fn parallel_residual(p: &[f64], v_hat: &[f64]) -> f64 {
    let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(pn > 0.0) || !pn.is_finite() {
        return f64::INFINITY;
    }
    let c: f64 = p.iter().zip(v_hat).map(|(a, b)| a * b).sum();
    let r2: f64 = p.iter().zip(v_hat).map(|(a, b)| (a - c * b).powi(2)).sum();
    r2.sqrt() / pn
}

/// `φ⁻¹(v) = {ξ ∈ S² : v ∈ span P(ξ)}`, sampled on `grid`, refined to well below its spacing.
pub fn level_set(bundle: &dyn LineBundle, v: &Point, grid: &SphereGrid, tol: f64) -> Result<Vec<Point>> {
    if bundle.dim() != 3 {
        return Err(contract("level sets are computed on S²"));
    }
    if sphere::norm(v) == 0.0 {
        return Err(contract("level set of the zero vector"));
    }
    let v_hat = normalize(v);
    let rho = |x: &Point| parallel_residual(&bundle.direction(x), &v_hat);
    let h = grid.h();
    let nodes = grid.nodes();
    let values: Vec<f64> = nodes.iter().map(rho).collect();
    let reach = angle_to_chord(1.6 * h);
    let index = PointIndex::new(nodes, reach);
    let mut found = Vec::new();
    for (i, x) in nodes.iter().enumerate() {
        if values[i] < tol {
            found.push(*x);
            continue;
        }
        if !values[i].is_finite() {
            continue;
        }
        let local_min = index.within(x, reach).into_iter().all(|j| values[i] <= values[j]);
        if local_min {
            let (y, f) = refine_minimum(&rho, *x, values[i], h);
            if f < tol {
                found.push(y);
            }
        }
    }
    Ok(dedup_points(&found, angle_to_chord(h / 10.0)))
}

/// Pattern search for a local minimum of `f` on the sphere starting at step `h`.
pub fn refine_minimum(f: &dyn Fn(&Point) -> f64, x0: Point, f0: f64, h: f64) -> (Point, f64) {
    const DIRS: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (0.7071067811865476, 0.7071067811865476),
        (-0.7071067811865476, 0.7071067811865476),
        (0.7071067811865476, -0.7071067811865476),
        (-0.7071067811865476, -0.7071067811865476),
    ];
    let (mut x, mut fx, mut s) = (x0, f0, h);
    let mut iterations = 0;
    while s > h * 1e-6 && fx > 0.0 && iterations < 2000 {
        iterations += 1;
        let (t1, t2) = tangent_basis(&x);
        let mut best = (x, fx);
        for (a, b) in DIRS {
            let y = sphere::step(&x, &t1, &t2, a * s, b * s);
            let fy = f(&y);
            if fy < best.1 {
                best = (y, fy);
            }
        }
        if best.1 < fx {
            (x, fx) = best;
        } else {
            s *= 0.5;
        }
    }
    (x, fx)
}

// ---------------------------------------------------------------- 1-cone condition

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum OneCone {
    /// The subspaces at these nodes already intersect in `{0}`.
    Trivial { nodes: Vec<usize> },
    /// A unit vector in every sampled subspace.
    Common { vector: Vec<f64> },
}

impl OneCone {
    pub fn holds(&self) -> bool {
        matches!(self, OneCone::Trivial { .. })
    }
}

/// Whether `⋂_ξ φ(ξ) = {0}` over the grid nodes.
pub fn one_cone_condition(grid: &SphereGrid, phi: &dyn Fn(&Point) -> Subspace) -> OneCone {
    let mut nodes = Vec::new();
    let mut common: Option<Subspace> = None;
    for (i, x) in grid.nodes().iter().enumerate() {
        let s = phi(x);
        let next = match &common {
            None => s,
            Some(c) => c.intersect(&s, 1e-10),
        };
        if common.as_ref().is_none_or(|c| next.dim() < c.dim()) {
            nodes.push(i);
        }
        if next.dim() == 0 {
            return OneCone::Trivial { nodes };
        }
        common = Some(next);
    }
    let c = common.expect("grid is nonempty");
    OneCone::Common { vector: c.basis().column(0).iter().copied().collect() }
}

// ---------------------------------------------------------------- wave cones

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveConeOptions {
    pub tol: f64,
    pub sweep_step: f64,
    /// Planes through a fixed axis added to the random ones (k = 2 only).
    pub structured_planes: usize,
}

impl Default for WaveConeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, sweep_step: 0.02, structured_planes: 180 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveConeStatus {
    Verified,
    Refuted,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveConeReport {
    pub status: WaveConeStatus,
    pub k: usize,
    pub w: Vec<f64>,
    pub planes_checked: usize,
    pub sign_change_certified: usize,
    pub min_norm_certified: usize,
    /// Largest minimal residual over the planes.
    pub worst_residual: f64,
    pub refuting_plane: Option<Vec<Vec<f64>>>,
    pub indeterminate_planes: Vec<Vec<Vec<f64>>>,
}

enum PlaneOutcome {
    SignChange,
    MinNorm,
    Refuted(f64),
    Inconclusive(f64),
}

fn normalized_residual(op: &dyn SymbolField, w: &DVector<f64>, xi: &[f64]) -> f64 {
    let s = op.symbol(xi);
    let sn = s.norm();
    if sn == 0.0 {
        return 0.0;
    }
    (s * w).norm() / (sn * w.norm())
}

fn circle_point(u1: &[f64], u2: &[f64], s: f64) -> Vec<f64> {
    let (c, sn) = (s.cos(), s.sin());
    u1.iter().zip(u2).map(|(a, b)| c * a + sn * b).collect()
}

fn check_circle(op: &dyn SymbolField, w: &[f64], u1: &[f64], u2: &[f64], opts: &WaveConeOptions) -> (bool, f64) {
    let tau = std::f64::consts::TAU;
    let steps = (tau / opts.sweep_step).ceil() as usize;
    let mut params: Vec<f64> = (0..steps).map(|i| tau * i as f64 / steps as f64).collect();
    params.extend(op.sweep_hints(w, u1, u2).into_iter().map(|s| s.rem_euclid(tau)));
    params.sort_by(|a, b| a.total_cmp(b));
    params.dedup();
    let mut prev: Option<Vec<f64>> = None;
    for s in &params {
        let cert = op.certificates(w, &circle_point(u1, u2, *s));
        if cert.is_empty() {
            break;
        }
        if let Some(p) = &prev {
            if p.iter().zip(&cert).any(|(a, b)| a * b <= 0.0) {
                return (true, 0.0);
            }
        }
        prev = Some(cert);
    }
    let wv = DVector::from_column_slice(w);
    let res: Vec<f64> = params.iter().map(|s| normalized_residual(op, &wv, &circle_point(u1, u2, *s))).collect();
    let (ibest, _) = res.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty sweep");
    let n = params.len();
    let lo = if ibest == 0 { params[n - 1] - tau } else { params[ibest - 1] };
    let hi = if ibest + 1 == n { params[0] + tau } else { params[ibest + 1] };
    let best = golden_min(&|s| normalized_residual(op, &wv, &circle_point(u1, u2, s)), lo, hi).min(res[ibest]);
    (false, best)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.618_033_988_749_894_9;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

fn check_plane(op: &dyn SymbolField, w: &[f64], plane: &[Vec<f64>], opts: &WaveConeOptions) -> PlaneOutcome {
    let best = if plane.len() == 1 {
        normalized_residual(op, &DVector::from_column_slice(w), &plane[0])
    } else {
        let mut best = f64::INFINITY;
        for i in 0..plane.len() {
            for j in i + 1..plane.len() {
                let (signed, r) = check_circle(op, w, &plane[i], &plane[j], opts);
                if signed {
                    return PlaneOutcome::SignChange;
                }
                best = best.min(r);
            }
        }
        best
    };
    if best < opts.tol {
        PlaneOutcome::MinNorm
    } else if best > 100.0 * opts.tol {
        PlaneOutcome::Refuted(best)
    } else {
        PlaneOutcome::Inconclusive(best)
    }
}

/// Random orthonormal `k`-frame in `ℝⁿ`.
pub fn random_plane(n: usize, k: usize, rng: &mut rng::Stream) -> Vec<Vec<f64>> {
    use rand::Rng;
    let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let q = g.qr().q();
    (0..k).map(|j| q.column(j).iter().copied().collect()).collect()
}

/// Planes spanned by the last axis and a direction rotating in the first two coordinates.
pub fn axis_planes(n: usize, count: usize) -> Vec<Vec<Vec<f64>>> {
    (0..count)
        .map(|j| {
            let t = std::f64::consts::PI * j as f64 / count as f64;
            let mut a = vec![0.0; n];
            a[n - 1] = 1.0;
            let mut b = vec![0.0; n];
            b[0] = t.cos();
            b[1] = t.sin();
            vec![a, b]
        })
        .collect()
}

/// Tests `w ∈ Λᵏ`: every sampled `k`-plane `V` must contain `ξ ≠ 0` with `A[ξ]w = 0`.
pub fn wave_cone_witness(
    op: &dyn SymbolField,
    k: usize,
    w: &[f64],
    plane_samples: usize,
    seed: u64,
    opts: &WaveConeOptions,
) -> Result<WaveConeReport> {
    let n = op.dim();
    if w.len() != op.shape().1 || w.iter().all(|&x| x == 0.0) {
        return Err(contract("w must be a nonzero vector in the operator's domain"));
    }
    if k == 0 || k >= n {
        return Err(contract(format!("need 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    let plane_seed = rng::subseed(seed, "wave-cone-planes");
    let mut planes: Vec<Vec<Vec<f64>>> =
        (0..plane_samples).map(|i| random_plane(n, k, &mut rng::stream(plane_seed, i as u64))).collect();
    if k == 2 && n >= 3 {
        planes.extend(axis_planes(n, opts.structured_planes));
    }
    let mut report = WaveConeReport {
        status: WaveConeStatus::Verified,
        k,
        w: w.to_vec(),
        planes_checked: planes.len(),
        sign_change_certified: 0,
        min_norm_certified: 0,
        worst_residual: 0.0,
        refuting_plane: None,
        indeterminate_planes: Vec::new(),
    };
    for plane in &planes {
        match check_plane(op, w, plane, opts) {
            PlaneOutcome::SignChange => report.sign_change_certified += 1,
            PlaneOutcome::MinNorm => report.min_norm_certified += 1,
            PlaneOutcome::Refuted(r) => {
                report.worst_residual = report.worst_residual.max(r);
                if report.refuting_plane.is_none() {
                    report.refuting_plane = Some(plane.clone());
                }
            }
            PlaneOutcome::Inconclusive(r) => {
                report.worst_residual = report.worst_residual.max(r);
                report.indeterminate_planes.push(plane.clone());
            }
        }
    }
    report.status = if report.refuting_plane.is_some() {
        WaveConeStatus::Refuted
    } else if !report.indeterminate_planes.is_empty() {
        WaveConeStatus::Indeterminate
    } else {
        WaveConeStatus::Verified
    };
    Ok(report)
}

// ---------------------------------------------------------------- rotation separation

/// `min_{a ∈ A, b ∈ B} angle(a, Rb) − ρ_a − ρ_b`; stops early once the running value drops below `stop_below`.
pub fn pair_margin(a: &CapFamily, b: &CapFamily, r: &Rotation, stop_below: f64) -> f64 {
    let rb: Vec<Cap> = b.caps.iter().map(|c| Cap { center: rotate(r, &c.center), radius: c.radius }).collect();
    let mut m = f64::INFINITY;
    for ca in &a.caps {
        for cb in &rb {
            let g = angle(&ca.center, &cb.center) - ca.radius - cb.radius;
            if g < m {
                m = g;
                if m < stop_below {
                    return m;
                }
            }
        }
    }
    m
}

pub fn separation_margin(f: &CapFamily, r: &Rotation) -> f64 {
    pair_margin(f, f, r, f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSearch {
    /// Index of the first candidate with positive margin.
    pub found: Option<usize>,
    pub rotation: Option<[[f64; 3]; 3]>,
    /// Margin of the found rotation, or the best (upper-bounded) margin on failure.
    pub margin: f64,
    pub candidates_tried: usize,
}

/// First candidate `R` with `F ∩ RF = ∅`, measured by the cap-pair margin.
pub fn rotation_separation_search(f: &CapFamily, candidates: &[Rotation]) -> Result<SeparationSearch> {
    if candidates.is_empty() {
        return Err(contract("no candidate rotations"));
    }
    let mut best = f64::NEG_INFINITY;
    for (i, r) in candidates.iter().enumerate() {
        let m = pair_margin(f, f, r, 0.0);
        if m > 0.0 {
            return Ok(SeparationSearch {
                found: Some(i),
                rotation: Some(sphere::rotation_to_matrix(r)),
                margin: m,
                candidates_tried: i + 1,
            });
        }
        best = best.max(m);
    }
    Ok(SeparationSearch { found: None, rotation: None, margin: best, candidates_tried: candidates.len() })
}

/// Margin for `F ∩ R₁F ∩ … ∩ R_kF = ∅`: every tuple of one cap per copy must contain a disjoint pair.
pub fn common_intersection_margin(f: &CapFamily, rotations: &[Rotation]) -> f64 {
    let mut copies = vec![f.clone()];
    copies.extend(rotations.iter().map(|r| f.rotated(r)));
    let sizes: Vec<usize> = copies.iter().map(|c| c.len()).collect();
    if sizes.contains(&0) {
        return f64::INFINITY;
    }
    let mut idx = vec![0usize; copies.len()];
    let mut worst = f64::INFINITY;
    loop {
        let mut best_pair = f64::NEG_INFINITY;
        for a in 0..copies.len() {
            for b in a + 1..copies.len() {
                let (ca, cb) = (&copies[a].caps[idx[a]], &copies[b].caps[idx[b]]);
                best_pair = best_pair.max(angle(&ca.center, &cb.center) - ca.radius - cb.radius);
            }
        }
        worst = worst.min(best_pair);
        if worst <= 0.0 {
            return worst;
        }
        let mut pos = 0;
        loop {
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
            pos += 1;
            if pos == idx.len() {
                return worst;
            }
        }
    }
}

/// `R_e ∘ B` for `e` on a grid of spacing `h` and `B` in `bases`, where `R_e` sends `e₂` to `e`.
pub fn rotation_candidates(h: f64, bases: &[Rotation]) -> Result<Vec<Rotation>> {
    let grid = SphereGrid::new(h)?;
    let e2 = [0.0, 1.0, 0.0];
    let mut out = Vec::with_capacity(grid.len() * bases.len());
    for e in grid.nodes() {
        let re = sphere::rotation_sending(&e2, e);
        out.extend(bases.iter().map(|b| re * b));
    }
    Ok(out)
}

/// The cyclic coordinate rotation `e₁ → e₂ → e₃ → e₁`.
pub fn cyclic_rotation() -> Rotation {
    sphere::rotation_from_matrix([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
}

// ---------------------------------------------------------------- dimension certificate

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub level_tol: f64,
    pub candidate_spacing: f64,
    /// Candidate tuples tried per `v` when `k ≥ 2`.
    pub tuple_budget: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { level_tol: 1e-6, candidate_spacing: 0.3, tuple_budget: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetCertificate {
    pub v: Point,
    pub level_set_size: usize,
    pub caps: usize,
    pub margin: f64,
    pub rotations: Vec<[[f64; 3]; 3]>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub n: usize,
    pub k: usize,
    pub bound: f64,
    pub certified: bool,
    pub grid_spacing: f64,
    pub per_v: Vec<LevelSetCertificate>,
    pub failed: Vec<Point>,
    pub conditional_on: String,
}

pub const REDUCTION_NOTE: &str =
    "the reduction from a measure in M_phi to separated level sets (tangent measures and mollification) is assumed, not computed";

/// Samples `v`, encloses each level set in caps of radius `2h`, and searches for `k` separating rotations.
pub fn certify_dimension_bound(
    bundle: &dyn LineBundle,
    k: usize,
    grid: &SphereGrid,
    v_samples: usize,
    seed: u64,
    opts: &CertifyOptions,
) -> Result<BoundCertificate> {
    if k == 0 {
        return Err(contract("k must be at least 1"));
    }
    let n = bundle.dim();
    let candidates = rotation_candidates(opts.candidate_spacing, &[Rotation::identity(), cyclic_rotation()])?;
    let vseed = rng::subseed(seed, "certify-v");
    let mut per_v = Vec::with_capacity(v_samples);
    let mut failed = Vec::new();
    for i in 0..v_samples {
        let mut s = rng::stream(vseed, i as u64);
        let xi = random_unit(&mut s);
        let v = if i % 2 == 0 {
            let d = bundle.direction(&xi);
            if sphere::norm(&[d[0], d[1], d[2]]) > 0.0 { normalize(&[d[0], d[1], d[2]]) } else { xi }
        } else {
            random_unit(&mut s)
        };
        let ls = level_set(bundle, &v, grid, opts.level_tol)?;
        let caps = CapFamily::from_points(&ls, 2.0 * grid.h());
        let (margin, rotations) = if caps.is_empty() {
            (std::f64::consts::PI, Vec::new())
        } else if k == 1 {
            let s = rotation_separation_search(&caps, &candidates)?;
            (s.margin, s.rotation.into_iter().collect())
        } else {
            search_tuples(&caps, &candidates, k, opts.tuple_budget)
        };
        let pass = margin > 0.0;
        if !pass {
            failed.push(v);
        }
        per_v.push(LevelSetCertificate { v, level_set_size: ls.len(), caps: caps.len(), margin, rotations, pass });
    }
    Ok(BoundCertificate {
        n,
        k,
        bound: n as f64 / (k as f64 + 1.0),
        certified: failed.is_empty(),
        grid_spacing: grid.h(),
        per_v,
        failed,
        conditional_on: REDUCTION_NOTE.to_string(),
    })
}

fn search_tuples(caps: &CapFamily, candidates: &[Rotation], k: usize, budget: usize) -> (f64, Vec<[[f64; 3]; 3]>) {
    let m = candidates.len();
    let mut best = f64::NEG_INFINITY;
    for t in 0..budget {
        // strided tuples spread the choices over the candidate list
        let picks: Vec<usize> = (0..k).map(|j| (t + j * (t / m + 1) * 7919) % m).collect();
        let rots: Vec<Rotation> = picks.iter().map(|&p| candidates[p]).collect();
        let margin = common_intersection_margin(caps, &rots);
        if margin > 0.0 {
            return (margin, rots.iter().map(sphere::rotation_to_matrix).collect());
        }
        best = best.max(margin);
    }
    (best, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{distance, rotation_about};
    use proptest::prelude::*;

    fn rows(m: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
    }

    fn psi() -> PolynomialVectorField {
        PolynomialVectorField::squares(3)
    }

    fn cross_matrix(p: &[f64]) -> DMatrix<f64> {
        rows(&[&[0.0, -p[2], p[1]], &[p[2], 0.0, -p[0]], &[-p[1], p[0], 0.0]])
    }

    #[test]
    fn divergence_symbol() {
        let div = PDOperator::divergence(3);
        assert_eq!(div.symbol(&[1.0, 2.0, 3.0]), rows(&[&[1.0, 2.0, 3.0]]));
        assert_eq!(div.symbol(&[0.0, 0.0, 0.0]), DMatrix::zeros(1, 3));
        let json = serde_json::to_string(&div).unwrap();
        assert!(json.contains("\"alpha\""));
        let back: PDOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, div);
    }

    #[test]
    fn kernels() {
        let full = kernel_subspace(&DMatrix::zeros(3, 3), 1e-12).unwrap();
        assert_eq!(full.dim(), 3);
        let k = kernel_subspace(&rows(&[&[1.0, 2.0, 3.0]]), 1e-12).unwrap();
        assert_eq!(k.dim(), 2);
        let n = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!((k.basis().transpose() * n).norm() < 1e-12);
        let e3 = kernel_subspace(&cross_matrix(&[0.0, 0.0, 1.0]), 1e-12).unwrap();
        assert_eq!(e3.dim(), 1);
        assert!(e3.contains(&[0.0, 0.0, 1.0], 1e-12));
        assert!(kernel_subspace(&DMatrix::zeros(1, 1), 0.0).is_err());
    }

    #[test]
    fn grassmann_examples() {
        let e1 = Subspace::span(3, &[vec![1.0, 0.0, 0.0]], 1e-12).unwrap();
        let e2 = Subspace::span(3, &[vec![0.0, 1.0, 0.0]], 1e-12).unwrap();
        let d = Subspace::span(3, &[vec![1.0, 1.0, 0.0]], 1e-12).unwrap();
        assert!(grassmann_distance(&e1, &e1).unwrap() < 1e-15);
        assert!((grassmann_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        assert!((grassmann_distance(&e1, &d).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(grassmann_distance(&e1, &Subspace::full(3)).is_err());
    }

    #[test]
    fn level_sets_of_squares() {
        let grid = SphereGrid::new(0.05).unwrap();
        let ls = level_set(&psi(), &[1.0, 1.0, 1.0], &grid, 1e-6).unwrap();
        assert_eq!(ls.len(), 8, "{ls:?}");
        let s = 1.0 / 3f64.sqrt();
        for p in &ls {
            assert!(p.iter().all(|c| (c.abs() - s).abs() < 1e-5), "{p:?}");
        }
        let poles = level_set(&psi(), &[0.0, 0.0, 1.0], &grid, 1e-6).unwrap();
        assert_eq!(poles.len(), 2);
        assert!(poles.iter().all(|p| p[2].abs() > 1.0 - 1e-9));
        assert!(level_set(&psi(), &[1.0, -1.0, 0.0], &grid, 1e-6).unwrap().is_empty());
        assert!(level_set(&psi(), &[0.0, 0.0, 0.0], &grid, 1e-6).is_err());
    }

    #[test]
    fn level_set_permutation_invariance() {
        let grid = SphereGrid::new(0.05).unwrap();
        let v = [0.2, 0.5, 0.9];
        let a = level_set(&psi(), &v, &grid, 1e-6).unwrap();
        let b = level_set(&psi(), &[v[2], v[0], v[1]], &grid, 1e-6).unwrap();
        assert_eq!(a.len(), b.len());
        for p in &a {
            let q = [p[2], p[0], -p[1]];
            assert!(b.iter().any(|x| distance(x, &q) < 1e-4), "{q:?}");
        }
    }

    #[test]
    fn one_cone_examples() {
        let grid = SphereGrid::new(0.3).unwrap();
        let constant = one_cone_condition(&grid, &|_| Subspace::span(3, &[vec![1.0, 0.0, 0.0]], 1e-12).unwrap());
        match constant {
            OneCone::Common { vector } => assert!((vector[0].abs() - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let taut = one_cone_condition(&grid, &|x| Subspace::span(3, &[x.to_vec()], 1e-12).unwrap());
        assert_eq!(taut, OneCone::Trivial { nodes: vec![0, 1] });
        let p = psi();
        let sq = one_cone_condition(&grid, &|x| Subspace::span(3, &[p.eval(x)], 1e-12).unwrap());
        assert!(sq.holds());
    }

    #[test]
    fn divergence_wave_cone_is_refuted() {
        let rep = wave_cone_witness(&PDOperator::divergence(3), 1, &[0.3, -0.2, 1.0], 20, 1, &Default::default()).unwrap();
        assert_eq!(rep.status, WaveConeStatus::Refuted);
        assert!(rep.refuting_plane.is_some());
    }

    #[test]
    fn constant_kernel_wave_cone_is_verified() {
        // symbol ξ ↦ [ξ₁ ξ₂ 0] annihilates e₃ everywhere
        let op = PDOperator::new(
            1,
            vec![
                OperatorTerm { alpha: vec![1, 0, 0], matrix: rows(&[&[1.0, 0.0, 0.0]]) },
                OperatorTerm { alpha: vec![0, 1, 0], matrix: rows(&[&[0.0, 1.0, 0.0]]) },
            ],
        )
        .unwrap();
        let rep = wave_cone_witness(&op, 2, &[0.0, 0.0, 1.0], 50, 3, &Default::default()).unwrap();
        assert_eq!(rep.status, WaveConeStatus::Verified);
        assert_eq!(rep.min_norm_certified, rep.planes_checked);
    }

    #[test]
    fn divergence_two_planes_always_contain_a_zero() {
        // every 2-plane in ℝ³ meets w^⊥
        let rep = wave_cone_witness(&PDOperator::divergence(3), 2, &[0.3, -0.2, 1.0], 30, 2, &Default::default()).unwrap();
        assert_eq!(rep.status, WaveConeStatus::Verified);
    }

    #[test]
    fn separation_examples() {
        let single = CapFamily::from_points(&[[1.0, 0.0, 0.0]], 0.1);
        let half = rotation_about(&[0.0, 0.0, 1.0], std::f64::consts::PI);
        let s = rotation_separation_search(&single, &[Rotation::identity(), half]).unwrap();
        assert_eq!(s.found, Some(1));
        assert!((s.margin - (std::f64::consts::PI - 0.2)).abs() < 1e-12);

        let full = CapFamily::from_points(&[[0.0, 0.0, 1.0]], std::f64::consts::PI);
        let f = rotation_separation_search(&full, &[Rotation::identity(), half]).unwrap();
        assert_eq!(f.found, None);

        let mut verts = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                for c in [-1.0, 1.0] {
                    verts.push(normalize(&[a, b, c]));
                }
            }
        }
        let cube = CapFamily::from_points(&verts, 0.1);
        let r45 = rotation_about(&[0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_4);
        let s = rotation_separation_search(&cube, &[r45]).unwrap();
        let expect = ((1.0 + 2f64.sqrt()) / 3.0).acos() - 0.2;
        assert_eq!(s.found, Some(0));
        assert!((s.margin - expect).abs() < 1e-12);
        assert!(rotation_separation_search(&cube, &[]).is_err());
    }

    #[test]
    fn certificate_for_squares() {
        let grid = SphereGrid::new(0.05).unwrap();
        let rep = certify_dimension_bound(&psi(), 1, &grid, 12, 4, &Default::default()).unwrap();
        assert!(rep.certified, "{:?}", rep.failed);
        assert_eq!(rep.bound, 1.5);
    }

    #[test]
    fn constant_bundle_is_not_certified() {
        struct Constant;
        impl LineBundle for Constant {
            fn dim(&self) -> usize {
                3
            }
            fn direction(&self, _: &[f64]) -> Vec<f64> {
                vec![1.0, 0.0, 0.0]
            }
        }
        let grid = SphereGrid::new(0.2).unwrap();
        let rep = certify_dimension_bound(&Constant, 1, &grid, 2, 1, &Default::default()).unwrap();
        assert!(!rep.certified);
    }

    #[test]
    fn tuple_margin() {
        let f = CapFamily::from_points(&[[1.0, 0.0, 0.0]], 0.1);
        let rots = [rotation_about(&[0.0, 0.0, 1.0], 2.0), rotation_about(&[0.0, 0.0, 1.0], 4.0)];
        assert!(common_intersection_margin(&f, &rots) > 0.0);
        assert!(common_intersection_margin(&f, &[Rotation::identity(), Rotation::identity()]) < 0.0);
    }

    fn arb_unit() -> impl Strategy<Value = Point> {
        (0.0f64..std::f64::consts::PI, -3.2f64..3.2).prop_map(|(a, b)| [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn symbol_is_homogeneous(t in 0.1f64..10.0, x in arb_unit()) {
            let p = psi().components().to_vec();
            let z = Polynomial::zero(3);
            let entries = vec![
                vec![z.clone(), p[2].scale(-1.0), p[1].clone()],
                vec![p[2].clone(), z.clone(), p[0].scale(-1.0)],
                vec![p[1].scale(-1.0), p[0].clone(), z],
            ];
            let op = PDOperator::from_polynomial_matrix(&entries).unwrap();
            let tx: Vec<f64> = x.iter().map(|v| v * t).collect();
            let lhs = op.symbol(&tx);
            let rhs = op.symbol(&x) * t.powi(op.order() as i32);
            prop_assert!((lhs - &rhs).norm() < 1e-9 * rhs.norm().max(1.0));
            let ker = kernel_subspace(&op.symbol(&x), 1e-10).unwrap();
            prop_assert!((op.symbol(&x) * ker.basis()).norm() <= 10.0 * 1e-10 * op.symbol(&x).norm());
        }

        #[test]
        fn grassmann_metric(a in arb_unit(), b in arb_unit(), c in arb_unit(), d in arb_unit(), e in arb_unit(), f in arb_unit()) {
            let s = |p: Point, q: Point| Subspace::span(3, &[p.to_vec(), q.to_vec()], 1e-9).unwrap();
            let (u, v, w) = (s(a, b), s(c, d), s(e, f));
            prop_assume!(u.dim() == 2 && v.dim() == 2 && w.dim() == 2);
            let duv = grassmann_distance(&u, &v).unwrap();
            prop_assert!((duv - grassmann_distance(&v, &u).unwrap()).abs() < 1e-9);
            prop_assert!(duv <= grassmann_distance(&u, &w).unwrap() + grassmann_distance(&w, &v).unwrap() + 1e-9);
            prop_assert!(grassmann_distance(&u, &u).unwrap() < 1e-9);
        }

        #[test]
        fn margins_are_conjugation_invariant(axis in arb_unit(), th in 0.0f64..6.0, g_axis in arb_unit(), g_th in 0.0f64..6.0, pts in prop::collection::vec(arb_unit(), 1..6)) {
            let f = CapFamily::from_points(&pts, 0.05);
            let r = rotation_about(&axis, th);
            let g = rotation_about(&g_axis, g_th);
            let gf = f.rotated(&g);
            let conj = g * r * g.inverse();
            prop_assert!((separation_margin(&f, &r) - separation_margin(&gf, &conj)).abs() < 1e-9);
        }
    }
}
