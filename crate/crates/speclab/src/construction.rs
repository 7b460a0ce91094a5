//! The explicit bundle on S² with a nonzero 2-wave cone whose annihilated
//! measures have dimension at least 3/2.
//!
//! Pipeline: a centrally symmetric curve Γ meeting every great circle and
//! disjoint from a rotated copy of itself; a symmetric cover of Γ by balls
//! `B(a_j, r)`; the polynomials `Q_j = (|ξ − a_j|² − r²)²`, `Q = ∏ Q_j` and
//! `P = (K x² Q, K y² Q, 1 + K z² Q)`; and the operator whose symbol is the
//! cross-product matrix of `P`, so that its kernel is `span{P(ξ)}`.
//!
//! `K = δ^{-(4N+1)}` is far outside floating-point range for realistic `N`,
//! so the bundle is evaluated in factored form: `ln K + ln Q` is accumulated
//! as a sum of logarithms and `P` is rescaled by `1/(KQ)` before use.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundles::{
    self, grassmann_distance, kernel_subspace, pair_margin, LineBundle, PDOperator, Subspace, SymbolField,
    WaveConeOptions, WaveConeReport, WaveConeStatus,
};
use crate::error::{contract, Error, Result};
use crate::poly::{Polynomial, PolynomialVectorField};
use crate::rng;
use crate::sphere::{
    self, angle, angle_to_chord, chord_to_angle, cross, dot, neg, normalize, random_unit, rotate, Cap, CapFamily,
    Point, PointIndex, Rotation,
};

const E1: Point = [1.0, 0.0, 0.0];
const E2: Point = [0.0, 1.0, 0.0];
const E3: Point = [0.0, 0.0, 1.0];

// ---------------------------------------------------------------- the curve

/// Geodesic arc `t ↦ cos t·c + sin t·u`, `|t| ≤ half_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: Point,
    pub direction: Point,
    pub half_length: f64,
}

impl Arc {
    /// Normalizes `center` and makes `direction` a unit tangent at it.
    pub fn new(center: Point, direction: Point, half_length: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length <= std::f64::consts::FRAC_PI_2) {
            return Err(contract(format!("arc half-length {half_length} outside (0, π/2]")));
        }
        if sphere::norm(&center) < 1e-12 {
            return Err(contract("arc center must be nonzero"));
        }
        let c = normalize(&center);
        let p = dot(&direction, &c);
        let t = [direction[0] - p * c[0], direction[1] - p * c[1], direction[2] - p * c[2]];
        if sphere::norm(&t) < 1e-12 {
            return Err(contract("arc direction is parallel to its center"));
        }
        Ok(Self { center: c, direction: normalize(&t), half_length })
    }

    pub fn point(&self, t: f64) -> Point {
        let (c, s) = (t.cos(), t.sin());
        let (a, u) = (&self.center, &self.direction);
        [c * a[0] + s * u[0], c * a[1] + s * u[1], c * a[2] + s * u[2]]
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.point(-self.half_length), self.point(self.half_length))
    }

    pub fn antipodal(&self) -> Self {
        Self { center: neg(&self.center), direction: neg(&self.direction), half_length: self.half_length }
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self { center: rotate(r, &self.center), direction: rotate(r, &self.direction), half_length: self.half_length }
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    /// Points along the arc with geodesic spacing at most `resolution`.
    pub fn sample(&self, resolution: f64) -> Vec<Point> {
        let steps = (self.length() / resolution).ceil().max(1.0) as usize;
        (0..=steps).map(|i| self.point(-self.half_length + self.length() * i as f64 / steps as f64)).collect()
    }

    /// Geodesic distance from a unit vector to the arc.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let (x, y) = (dot(p, &self.center), dot(p, &self.direction));
        let t = y.atan2(x);
        if (x != 0.0 || y != 0.0) && t.abs() <= self.half_length {
            return angle(p, &self.point(t));
        }
        let (a, b) = self.endpoints();
        angle(p, &a).min(angle(p, &b))
    }

    /// `max_t min(f, −f)` style crossing margin of `t ↦ ⟨γ(t), ν⟩`: positive iff it changes sign.
    pub fn crossing_margin(&self, nu: &Point) -> f64 {
        let (a, b) = (dot(&self.center, nu), dot(&self.direction, nu));
        // ⟨γ(t), ν⟩ = ρ cos(t − φ)
        let (rho, phi) = ((a * a + b * b).sqrt(), b.atan2(a));
        let h = self.half_length;
        let mut candidates = vec![-h, h];
        for k in -2..=2 {
            let t = phi + k as f64 * std::f64::consts::PI;
            if t.abs() <= h {
                candidates.push(t);
            }
        }
        let vals: Vec<f64> = candidates.iter().map(|t| rho * (t - phi).cos()).collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        hi.min(-lo)
    }
}

/// A centrally symmetric union of geodesic arcs; each stored arc stands for itself and its antipode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub arcs: Vec<Arc>,
}

impl GammaCurve {
    /// Every arc together with its antipodal copy.
    pub fn segments(&self) -> Vec<Arc> {
        self.arcs.iter().flat_map(|a| [*a, a.antipodal()]).collect()
    }

    pub fn length(&self) -> f64 {
        self.segments().iter().map(|a| a.length()).sum()
    }

    pub fn sample(&self, resolution: f64) -> Vec<Point> {
        self.segments().iter().flat_map(|a| a.sample(resolution)).collect()
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        self.segments().iter().map(|a| a.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self { arcs: self.arcs.iter().map(|a| a.rotated(r)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    /// Half-width of the gaps cut from the equator around `±e₂`.
    pub hole_half_width: f64,
    pub blocking: Vec<Arc>,
}

impl GammaParams {
    /// Parameters found by a separation-maximizing search; validity is established by the verifiers.
    pub fn shipped() -> Self {
        let arcs = [
            ([-0.018_799, 0.062_704, 0.930_291], [-1.013_665, -0.067_247, -0.004_131], 0.785_927),
            ([-0.058_239, -0.916_325, -0.009_906], [0.063_791, 0.014_050, -1.140_295], 0.794_427),
        ];
        Self {
            hole_half_width: std::f64::consts::FRAC_PI_2 - 0.863_620,
            blocking: arcs.iter().map(|(c, u, h)| Arc::new(*c, *u, *h).expect("shipped arc")).collect(),
        }
    }

    /// The full equator.
    pub fn equator() -> Self {
        Self { hole_half_width: 0.0, blocking: Vec::new() }
    }
}

/// Rotation vectors of rotations `R` with `Γ ∩ RΓ = ∅` for the shipped Γ, best separation first.
const SEPARATING_ROTVECS: [[f64; 3]; 16] = [
    [1.987_797_391_003_375_9, -0.921_592_075_581_361_8, -0.806_499_154_978_189_7],
    [0.374_927_495_093_236_0, 1.326_538_357_825_238_5, 1.352_005_399_218_316_1],
    [0.922_508_200_510_271_2, 1.951_473_095_422_213_9, -0.978_972_605_834_916_0],
    [-2.666_257_497_391_641_1, -0.530_190_891_642_732_3, -0.700_055_790_595_108_5],
    [1.360_082_301_016_259_7, -0.446_784_727_699_760_2, -1.212_788_786_020_009_7],
    [0.862_355_874_056_753_6, 0.945_825_010_372_370_3, 2.024_508_622_053_073_0],
    [-0.586_729_752_559_182_7, 2.651_046_016_539_947_2, 0.353_450_276_305_886_1],
    [1.335_134_782_194_907_6, 1.279_972_643_214_748_2, -0.363_826_447_120_598_0],
    [-2.061_479_357_404_712_3, 0.867_909_105_076_031_7, -1.002_665_158_238_662_5],
    [-0.624_874_163_946_735_2, -0.473_098_645_241_674_3, 2.609_408_756_121_641_0],
    [-0.899_910_203_535_132_7, -2.078_398_093_022_928_0, -0.935_176_427_842_661_5],
    [0.737_320_836_380_568_8, -0.692_318_284_423_539_3, 0.789_015_193_627_801_7],
    [-1.245_710_774_281_316_5, 0.321_560_029_662_717_3, -1.330_557_004_424_951_3],
    [0.476_349_819_699_633_4, 0.493_319_822_282_361_7, 0.522_624_093_961_823_7],
    [1.605_470_718_461_021_7, -1.624_736_090_347_461_5, 1.742_003_526_786_319_2],
    [-0.747_868_905_600_122_9, 0.702_458_407_017_751_2, 2.497_886_473_286_475_2],
];

/// Separating rotations shipped with [`GammaParams::shipped`], found by random restarts and local search.
pub fn separating_rotations() -> Vec<Rotation> {
    SEPARATING_ROTVECS.iter().map(|v| Rotation::from_scaled_axis(nalgebra::Vector3::new(v[0], v[1], v[2]))).collect()
}

/// The best of [`separating_rotations`].
pub fn shipped_rotation() -> Rotation {
    separating_rotations()[0]
}

/// The rotation `e₁ → e₂ → e₃ → e₁`: a quarter turn about `e₁` followed by one about `e₃`.
pub fn quarter_turn_rotation() -> Rotation {
    bundles::cyclic_rotation()
}

/// The equator with holes at `±e₂`, plus the blocking arcs and their antipodes.
pub fn build_gamma(params: &GammaParams) -> Result<GammaCurve> {
    let w = params.hole_half_width;
    if !(0.0..std::f64::consts::FRAC_PI_4).contains(&w) {
        return Err(contract(format!("hole half-width {w} outside [0, π/4)")));
    }
    let mut arcs = vec![Arc::new(E1, E2, std::f64::consts::FRAC_PI_2 - w)?];
    for b in &params.blocking {
        arcs.push(Arc::new(b.center, b.direction, b.half_length)?);
    }
    Ok(GammaCurve { arcs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub pass: bool,
    pub planes: usize,
    pub worst_margin: f64,
    pub worst_normal: Point,
    pub failures: usize,
}

/// Touching within this tolerance counts as crossing.
pub const CROSSING_TOL: f64 = 1e-6;

/// Checks that Γ meets the great circle `ν^⊥` for sampled normals `ν` (plus the coordinate axes).
pub fn verify_gamma_plane_crossing(curve: &GammaCurve, plane_samples: usize, seed: u64) -> CrossingReport {
    let segs = curve.segments();
    let nseed = rng::subseed(seed, "gamma-planes");
    let mut normals = vec![E1, E2, E3];
    normals.extend((0..plane_samples).map(|i| random_unit(&mut rng::stream(nseed, i as u64))));
    let mut rep =
        CrossingReport { pass: true, planes: normals.len(), worst_margin: f64::INFINITY, worst_normal: E3, failures: 0 };
    for nu in &normals {
        let m = segs.iter().map(|a| a.crossing_margin(nu)).fold(f64::NEG_INFINITY, f64::max);
        if m < rep.worst_margin {
            rep.worst_margin = m;
            rep.worst_normal = *nu;
        }
        if m < -CROSSING_TOL {
            rep.failures += 1;
        }
    }
    rep.pass = rep.failures == 0;
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSeparation {
    /// Smallest sampled geodesic distance from `R(Γ)` to `Γ`.
    pub sampled_distance: f64,
    pub resolution: f64,
    /// `sampled_distance − resolution/2`: a lower bound on `dist(Γ, RΓ)`.
    pub margin: f64,
}

/// Lower bound on the geodesic distance between Γ and `R(Γ)`.
pub fn verify_gamma_separation(curve: &GammaCurve, r: &Rotation) -> GammaSeparation {
    let resolution = 1e-3;
    let segs = curve.segments();
    let moved = curve.rotated(r).sample(resolution);
    let d = moved
        .iter()
        .map(|p| segs.iter().map(|a| a.distance_to(p)).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    GammaSeparation { sampled_distance: d, resolution, margin: d - resolution / 2.0 }
}

// ---------------------------------------------------------------- balls and parameters

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub centers: Vec<Point>,
    pub radius: f64,
}

impl BallFamily {
    pub fn new(centers: Vec<Point>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(contract(format!("ball radius {radius} outside (0, 1]")));
        }
        if centers.len() % 2 != 0 {
            return Err(contract("a symmetric family has an even number of centers"));
        }
        for c in &centers {
            let m = neg(c);
            if !centers.iter().any(|d| sphere::distance(d, &m) < 1e-12) {
                return Err(contract("ball family is not centrally symmetric"));
            }
        }
        Ok(Self { centers, radius })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Greedy symmetric cover of Γ by balls of radius `δ/2` centered on Γ.
pub fn cover_gamma(curve: &GammaCurve, delta: f64, max_n: usize) -> Result<BallFamily> {
    let r = delta / 2.0;
    if !(r > 0.0 && r <= 1.0) {
        return Err(contract(format!("δ = {delta} gives a ball radius outside (0, 1]")));
    }
    let spacing = (1e-3f64).min(r / 100.0);
    // samples closer than r − spacing to a center keep the whole curve strictly inside the balls
    let reach = r - spacing;
    let samples = curve.sample(spacing);
    let index = PointIndex::new(&samples, reach);
    let mut covered = vec![false; samples.len()];
    let mut centers = Vec::new();
    for i in 0..samples.len() {
        if covered[i] {
            continue;
        }
        for a in [samples[i], neg(&samples[i])] {
            for j in index.within(&a, reach) {
                covered[j] = true;
            }
            centers.push(a);
        }
        if centers.len() > max_n {
            return Err(Error::Capacity(format!("cover of Γ at δ = {delta} needs more than {max_n} balls")));
        }
    }
    BallFamily::new(centers, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionParams {
    pub delta: f64,
    pub n: usize,
    pub r: f64,
    /// `ln K`; `K` itself overflows for realistic `N`.
    pub log_k: f64,
}

impl ConstructionParams {
    /// `r = δ/2` and the smallest admissible `K = δ^{-(4N+1)}`.
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(contract(format!("δ = {delta} outside (0, 1)")));
        }
        Ok(Self { delta, n, r: delta / 2.0, log_k: -((4 * n + 1) as f64) * delta.ln() })
    }

    pub fn k(&self) -> f64 {
        self.log_k.exp()
    }
}

// ---------------------------------------------------------------- polynomials

/// Largest expanded degree of `Q` attempted before recommending the factored form.
pub const MAX_EXPANDED_DEGREE: u32 = 48;
/// Largest `K` used in expanded coefficients.
pub const MAX_EXPANDED_K: f64 = 1e12;

/// `Q_j(ξ) = (|ξ − a_j|² − r²)²`.
pub fn ball_polynomial(center: &Point, r: f64) -> Polynomial {
    let mut s = Polynomial::constant(3, -r * r);
    for (i, &a) in center.iter().enumerate() {
        let lin = Polynomial::variable(3, i).sub(&Polynomial::constant(3, a));
        s = s.add(&lin.pow(2));
    }
    s.pow(2)
}

/// Expanded `Q = ∏ Q_j`.
pub fn build_q(family: &BallFamily) -> Result<Polynomial> {
    let degree = 4 * family.len() as u32;
    if degree > MAX_EXPANDED_DEGREE {
        return Err(Error::Capacity(format!(
            "expanded Q has degree {degree} > {MAX_EXPANDED_DEGREE}; use the factored evaluation"
        )));
    }
    let mut q = Polynomial::constant(3, 1.0);
    for c in &family.centers {
        q = q.checked_mul(&ball_polynomial(c, family.radius))?;
    }
    Ok(q)
}

/// `P = (K x² Q, K y² Q, 1 + K z² Q)`.
pub fn build_p(q: &Polynomial, k: f64) -> Result<PolynomialVectorField> {
    if !(k > 0.0) {
        return Err(contract("K must be positive"));
    }
    if k > MAX_EXPANDED_K {
        return Err(Error::Capacity(format!("K = {k:e} exceeds {MAX_EXPANDED_K:e}; use the factored evaluation")));
    }
    let sq = |i| Polynomial::variable(3, i).pow(2);
    let kq = q.scale(k);
    let p3 = Polynomial::constant(3, 1.0).add(&kq.checked_mul(&sq(2))?);
    PolynomialVectorField::new(vec![kq.checked_mul(&sq(0))?, kq.checked_mul(&sq(1))?, p3])
}

pub fn homogenize(f: &Polynomial) -> Result<Polynomial> {
    f.homogenize()
}

fn cross_entries(p: &[Polynomial]) -> Vec<Vec<Polynomial>> {
    let z = Polynomial::zero(p[0].nvars());
    vec![
        vec![z.clone(), p[2].scale(-1.0), p[1].clone()],
        vec![p[2].clone(), z.clone(), p[0].scale(-1.0)],
        vec![p[1].scale(-1.0), p[0].clone(), z],
    ]
}

/// The operator whose symbol is the cross-product matrix `[P(ξ)]ₓ`, with kernel `span{P(ξ)}`.
pub fn assemble_operator(p: &PolynomialVectorField) -> Result<PDOperator> {
    if p.dim() != 3 || p.components().len() != 3 {
        return Err(contract("assembly needs a 3-component field on ℝ³"));
    }
    if p.homogeneous_degree().is_none() {
        return Err(contract("components must be homogeneous of one degree; homogenize first"));
    }
    PDOperator::from_polynomial_matrix(&cross_entries(p.components()))
}

/// The four-row variant with rows `P×e₁, (P×e₁)×e₁, P×e₂, (P×e₂)×e₂`; its kernel is generally not `span{P}`.
pub fn assemble_operator_four_row(p: &PolynomialVectorField) -> Result<PDOperator> {
    if p.homogeneous_degree().is_none() {
        return Err(contract("components must be homogeneous of one degree; homogenize first"));
    }
    let c = p.components();
    let z = Polynomial::zero(3);
    let entries = vec![
        vec![z.clone(), c[2].clone(), c[1].scale(-1.0)],
        vec![z.clone(), c[1].scale(-1.0), c[2].scale(-1.0)],
        vec![c[2].scale(-1.0), z.clone(), c[0].clone()],
        vec![c[0].scale(-1.0), z, c[2].scale(-1.0)],
    ];
    PDOperator::from_polynomial_matrix(&entries)
}

pub fn cross_matrix(p: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, -p[2], p[1], p[2], 0.0, -p[0], -p[1], p[0], 0.0])
}

// ---------------------------------------------------------------- factored bundle

/// `P` and its cross-product operator, evaluated without expanding `Q` or `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredField {
    pub centers: Vec<Point>,
    pub r: f64,
    pub log_k: f64,
}

impl FactoredField {
    pub fn new(family: &BallFamily, params: &ConstructionParams) -> Self {
        Self { centers: family.centers.clone(), r: family.radius, log_k: params.log_k }
    }

    /// `s_j(ξ) = |ξ − a_j|² − r²` at the projection of `ξ` to the sphere.
    pub fn ball_values(&self, xi: &[f64]) -> Vec<f64> {
        let x = normalize(&[xi[0], xi[1], xi[2]]);
        self.centers.iter().map(|a| sphere::distance(&x, a).powi(2) - self.r * self.r).collect()
    }

    /// `ln K + ln Q` at the projection of `ξ` to the sphere (`−∞` on a circle `T_j`).
    pub fn log_kq(&self, xi: &[f64]) -> f64 {
        self.log_k + self.ball_values(xi).iter().map(|s| 2.0 * s.abs().ln()).sum::<f64>()
    }

    /// `P(ξ̂)` divided by `max(1, KQ)`.
    pub fn scaled_p(&self, xi: &[f64]) -> Point {
        let x = normalize(&[xi[0], xi[1], xi[2]]);
        let l = self.log_kq(&x);
        let (x2, y2, z2) = (x[0] * x[0], x[1] * x[1], x[2] * x[2]);
        if l > 0.0 {
            [x2, y2, z2 + (-l).exp()]
        } else {
            let s = l.exp();
            [s * x2, s * y2, 1.0 + s * z2]
        }
    }

    /// `1/(KQ)` at `ξ̂`.
    pub fn epsilon(&self, xi: &[f64]) -> f64 {
        (-self.log_kq(xi)).exp()
    }
}

impl LineBundle for FactoredField {
    fn dim(&self) -> usize {
        3
    }

    fn direction(&self, xi: &[f64]) -> Vec<f64> {
        self.scaled_p(xi).to_vec()
    }
}

impl SymbolField for FactoredField {
    fn dim(&self) -> usize {
        3
    }

    fn shape(&self) -> (usize, usize) {
        (3, 3)
    }

    fn symbol(&self, xi: &[f64]) -> DMatrix<f64> {
        cross_matrix(&self.scaled_p(xi))
    }

    /// For `w ∥ e₃`: a zero of any `s_j` makes `Q` vanish, so `P = e₃` and `[P]ₓ w = 0`.
    fn certificates(&self, w: &[f64], xi: &[f64]) -> Vec<f64> {
        if w[0] != 0.0 || w[1] != 0.0 {
            return Vec::new();
        }
        self.ball_values(xi)
    }

    fn sweep_hints(&self, w: &[f64], u1: &[f64], u2: &[f64]) -> Vec<f64> {
        if w[0] != 0.0 || w[1] != 0.0 {
            return Vec::new();
        }
        let (u1, u2) = ([u1[0], u1[1], u1[2]], [u2[0], u2[1], u2[2]]);
        self.centers
            .iter()
            .flat_map(|a| {
                let t = dot(a, &u2).atan2(dot(a, &u1));
                [t, t + std::f64::consts::PI]
            })
            .collect()
    }
}

// ---------------------------------------------------------------- neighborhoods

/// Normalized `(±√|v₁|, ±√|v₂|, ±√|v₃|)`: the level set of `span{(x², y², z²)}` at `|v|`.
pub fn square_root_points(v: &Point) -> Vec<Point> {
    let base = [v[0].abs().sqrt(), v[1].abs().sqrt(), v[2].abs().sqrt()];
    let mut out: Vec<Point> = Vec::new();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                let p = normalize(&[sx * base[0], sy * base[1], sz * base[2]]);
                if !out.iter().any(|q| sphere::distance(q, &p) < 1e-12) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn point_caps(v: &Point, delta: f64) -> Vec<Cap> {
    let rad = chord_to_angle(delta);
    let mut caps = vec![Cap::new(E3, rad), Cap::new(neg(&E3), rad)];
    for p in square_root_points(v) {
        if !caps.iter().any(|c| sphere::distance(&c.center, &p) < 1e-12) {
            caps.push(Cap::new(p, rad));
        }
    }
    caps
}

/// `Γ_δ(v) = ⋃ B(a_i, 4δ) ∪ ⋃ B(p_i, δ) ∪ B(±e₃, δ)` as caps.
pub fn gamma_delta_neighborhood(v: &Point, params: &ConstructionParams, family: &BallFamily) -> Result<CapFamily> {
    if sphere::norm(v) == 0.0 {
        return Err(contract("v must be nonzero"));
    }
    let big = chord_to_angle(4.0 * params.delta);
    let mut caps: Vec<Cap> = family.centers.iter().map(|a| Cap::new(*a, big)).collect();
    caps.extend(point_caps(v, params.delta));
    Ok(CapFamily::new(caps))
}

/// Lower bound for `ln K + ln Q` over points at Euclidean distance at least `rho` from every center.
pub fn log_kq_lower_bound(field: &FactoredField, rho: f64) -> f64 {
    let r2 = field.r * field.r;
    if rho <= field.r {
        return f64::NEG_INFINITY;
    }
    let n = field.centers.len();
    if n == 0 {
        return field.log_k;
    }
    // distance d to the nearest center a_i; every other center is at least max(d, |a_i − a_j| − d) away
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|k| rho * (2.0 / rho).powf(k as f64 / steps as f64)).collect();
    let mut worst = f64::INFINITY;
    for (i, a) in field.centers.iter().enumerate() {
        let gaps: Vec<f64> =
            field.centers.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| sphere::distance(a, b)).collect();
        for w in grid.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut bound = 2.0 * (lo * lo - r2).ln();
            for &g in &gaps {
                let m = (g / 2.0).clamp(lo, hi);
                let t = m.max(g - m);
                bound += 2.0 * (t * t - r2).ln();
            }
            worst = worst.min(bound);
        }
    }
    field.log_k + worst
}

/// Smallest Euclidean radius `ρ ∈ (r, 4δ]` with `1/(KQ) ≤ target` outside `⋃ B(a_i, ρ)`, by bisection.
pub fn enclosure_radius(field: &FactoredField, target_epsilon: f64, max_radius: f64) -> Result<f64> {
    let need = -target_epsilon.ln();
    if log_kq_lower_bound(field, max_radius) < need {
        return Err(Error::Precondition(format!(
            "1/(KQ) ≤ {target_epsilon:e} does not hold outside balls of radius {max_radius}"
        )));
    }
    let (mut lo, mut hi) = (field.r, max_radius);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if log_kq_lower_bound(field, mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Cap family containing `φ⁻¹(v)`: balls of radius `enclosure` at the `a_i` and radius `δ` at the `p_i` and `±e₃`.
pub fn level_set_enclosure(v: &Point, delta: f64, family: &BallFamily, enclosure: f64) -> CapFamily {
    let rad = chord_to_angle(enclosure);
    let mut caps: Vec<Cap> = family.centers.iter().map(|a| Cap::new(*a, rad)).collect();
    caps.extend(point_caps(v, delta));
    CapFamily::new(caps)
}

// ---------------------------------------------------------------- the assembled construction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub params: ConstructionParams,
    pub gamma: GammaCurve,
    pub family: BallFamily,
    pub field: FactoredField,
}

pub const DEFAULT_MAX_BALLS: usize = 20_000;

/// Condition (C) stops searching rotations for a given `v` once this cap-disjointness margin is reached.
pub const PREFERRED_MARGIN: f64 = 1e-3;

impl Construction {
    pub fn new(delta: f64, gamma: &GammaCurve) -> Result<Self> {
        let family = cover_gamma(gamma, delta, DEFAULT_MAX_BALLS)?;
        Self::from_family(delta, gamma, family)
    }

    pub fn from_family(delta: f64, gamma: &GammaCurve, family: BallFamily) -> Result<Self> {
        let params = ConstructionParams::new(delta, family.len())?;
        let field = FactoredField::new(&family, &params);
        Ok(Self { params, gamma: gamma.clone(), family, field })
    }

    pub fn shipped(delta: f64) -> Result<Self> {
        Self::new(delta, &build_gamma(&GammaParams::shipped())?)
    }

    /// The exact expanded `P`, homogenized, when the sizes allow it.
    pub fn expanded_p(&self) -> Result<PolynomialVectorField> {
        let q = build_q(&self.family)?;
        build_p(&q, self.params.k())?.homogenize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub nonvanishing_samples: usize,
    pub plane_samples: usize,
    pub v_samples: usize,
    /// Spacing of the cubic grid of rotation vectors `ω` defining the candidates `exp(ω) ∘ R^{±1}`.
    pub candidate_spacing: f64,
    /// Only `|ω|` up to this angle is used.
    pub candidate_reach: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            nonvanishing_samples: 100_000,
            plane_samples: 10_000,
            v_samples: 200,
            candidate_spacing: 0.015,
            candidate_reach: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionA {
    pub pass: bool,
    pub degree: u32,
    pub samples: usize,
    pub min_third_component: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionB {
    pub pass: bool,
    pub gamma_crossing: CrossingReport,
    pub cover_max_distance: f64,
    pub wave_cone: WaveConeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VCertificate {
    pub v: Point,
    pub pass: bool,
    pub margin: f64,
    pub rotation: Option<[[f64; 3]; 3]>,
    /// Best margin of the `Γ_δ(v)` caps (radius 4δ at the centers) over the same candidates.
    pub gamma_delta_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionC {
    pub pass: bool,
    pub enclosure_radius: f64,
    pub candidates: usize,
    pub good_candidates: usize,
    /// One entry per base rotation.
    pub gamma_separation: Vec<GammaSeparation>,
    pub per_v: Vec<VCertificate>,
    pub failed: Vec<Point>,
    pub gamma_delta_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub delta: f64,
    pub n: usize,
    pub r: f64,
    pub log_k: f64,
    pub a: ConditionA,
    pub b: ConditionB,
    pub c: ConditionC,
    pub all_pass: bool,
    pub bound: f64,
    pub conditional_on: String,
}

fn check_a(c: &Construction, samples: usize, seed: u64) -> ConditionA {
    let s = rng::subseed(seed, "condition-a");
    let mut min3 = f64::INFINITY;
    let mut ok = true;
    for i in 0..samples {
        let x = random_unit(&mut rng::stream(s, i as u64));
        let p = c.field.scaled_p(&x);
        ok &= p.iter().all(|v| v.is_finite()) && sphere::norm(&p) > 0.0;
        min3 = min3.min(p[2]);
    }
    ConditionA { pass: ok && min3 > 0.0, degree: 4 * c.family.len() as u32 + 2, samples, min_third_component: min3 }
}

fn check_b(c: &Construction, plane_samples: usize, seed: u64) -> Result<ConditionB> {
    let crossing = verify_gamma_plane_crossing(&c.gamma, plane_samples, seed);
    let cover_max_distance = c
        .gamma
        .sample(1e-3)
        .iter()
        .map(|p| c.family.centers.iter().map(|a| sphere::distance(p, a)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let opts = WaveConeOptions { tol: 1e-8, sweep_step: 0.05, structured_planes: 180 };
    let wave = bundles::wave_cone_witness(&c.field, 2, &E3, plane_samples, seed, &opts)?;
    let pass = wave.status == WaveConeStatus::Verified && wave.sign_change_certified == wave.planes_checked;
    Ok(ConditionB { pass, gamma_crossing: crossing, cover_max_distance, wave_cone: wave })
}

/// `min angle(a_i, R a_j)` over center pairs, or `cap` if no pair is closer than `cap`.
fn center_gap(centers: &[Point], index: &PointIndex, r: &Rotation, cap: f64) -> f64 {
    let reach = angle_to_chord(cap);
    let mut best = cap;
    for a in centers {
        let ra = rotate(r, a);
        for j in index.within(&ra, reach) {
            best = best.min(angle(&ra, &centers[j]));
        }
    }
    best
}

/// Candidates `exp(ω) ∘ R` and `exp(ω) ∘ R⁻¹` for `ω` on a cubic grid with `|ω| ≤ reach`.
pub fn local_candidates(base: &Rotation, spacing: f64, reach: f64) -> Result<Vec<Rotation>> {
    if !(spacing > 0.0 && reach >= 0.0) {
        return Err(contract("candidate spacing must be positive and reach non-negative"));
    }
    let m = (reach / spacing).floor() as i64;
    let mut out = Vec::new();
    for b in [*base, base.inverse()] {
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    let w = nalgebra::Vector3::new(i as f64, j as f64, k as f64) * spacing;
                    if w.norm() <= reach {
                        out.push(Rotation::from_scaled_axis(w) * b);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_c(c: &Construction, bases: &[Rotation], opts: &VerifyOptions, seed: u64) -> Result<ConditionC> {
    let delta = c.params.delta;
    let enclosure = enclosure_radius(&c.field, delta * delta / 2.0, 4.0 * delta)?;
    let enc_angle = chord_to_angle(enclosure);
    let big_angle = chord_to_angle(4.0 * delta);
    let separation: Vec<GammaSeparation> = bases.iter().map(|r| verify_gamma_separation(&c.gamma, r)).collect();
    let mut candidates = Vec::new();
    for r in bases {
        candidates.extend(local_candidates(r, opts.candidate_spacing, opts.candidate_reach)?);
    }
    let cap = 0.3;
    let index = PointIndex::new(&c.family.centers, angle_to_chord(cap));
    let gaps: Vec<f64> = candidates.iter().map(|r| center_gap(&c.family.centers, &index, r, cap)).collect();
    let mut good: Vec<usize> = (0..candidates.len()).filter(|&i| gaps[i] > 2.0 * enc_angle).collect();
    good.sort_by(|&i, &j| gaps[j].total_cmp(&gaps[i]).then(i.cmp(&j)));
    let centers_small = CapFamily::from_points(&c.family.centers, enc_angle);
    let centers_big = CapFamily::from_points(&c.family.centers, big_angle);
    let vseed = rng::subseed(seed, "condition-c");
    let mut per_v = Vec::with_capacity(opts.v_samples);
    let mut failed = Vec::new();
    let mut gamma_delta_pass = true;
    for i in 0..opts.v_samples {
        let v = random_unit(&mut rng::stream(vseed, i as u64));
        let pts = CapFamily::new(point_caps(&v, delta));
        let margin_for = |k: usize, centers: &CapFamily, rad: f64| {
            let r = &candidates[k];
            let mut m = gaps[k] - 2.0 * rad;
            m = m.min(pair_margin(centers, &pts, r, f64::NEG_INFINITY));
            m = m.min(pair_margin(&pts, centers, r, f64::NEG_INFINITY));
            m.min(pair_margin(&pts, &pts, r, f64::NEG_INFINITY))
        };
        // prefer a comfortable margin, fall back to the best positive one
        let mut found: Option<(usize, f64)> = None;
        for &k in &good {
            let m = margin_for(k, &centers_small, enc_angle);
            if m > found.map_or(0.0, |f| f.1) {
                found = Some((k, m));
                if m >= PREFERRED_MARGIN {
                    break;
                }
            }
        }
        let gd = (0..candidates.len())
            .filter(|&k| gaps[k] > 2.0 * big_angle)
            .map(|k| margin_for(k, &centers_big, big_angle))
            .fold(f64::NEG_INFINITY, f64::max);
        gamma_delta_pass &= gd > 0.0;
        let cert = match found {
            Some((k, m)) => VCertificate {
                v,
                pass: true,
                margin: m,
                rotation: Some(sphere::rotation_to_matrix(&candidates[k])),
                gamma_delta_margin: gd,
            },
            None => {
                failed.push(v);
                let best = good
                    .iter()
                    .map(|&k| margin_for(k, &centers_small, enc_angle))
                    .fold(f64::NEG_INFINITY, f64::max);
                VCertificate { v, pass: false, margin: best, rotation: None, gamma_delta_margin: gd }
            }
        };
        per_v.push(cert);
    }
    Ok(ConditionC {
        pass: failed.is_empty(),
        enclosure_radius: enclosure,
        candidates: candidates.len(),
        good_candidates: good.len(),
        gamma_separation: separation,
        per_v,
        failed,
        gamma_delta_pass,
    })
}

/// Conditions (A), (B), (C) for the assembled construction.
pub fn verify_conditions(
    c: &Construction,
    bases: &[Rotation],
    opts: &VerifyOptions,
    seed: u64,
) -> Result<ConditionsReport> {
    let a = check_a(c, opts.nonvanishing_samples, seed);
    let b = check_b(c, opts.plane_samples, seed)?;
    let cc = check_c(c, bases, opts, seed)?;
    let all_pass = a.pass && b.pass && cc.pass;
    Ok(ConditionsReport {
        delta: c.params.delta,
        n: c.family.len(),
        r: c.params.r,
        log_k: c.params.log_k,
        a,
        b,
        c: cc,
        all_pass,
        bound: crate::dimension::theorem_bound(3, 1)?,
        conditional_on: bundles::REDUCTION_NOTE.to_string(),
    })
}

// ---------------------------------------------------------------- kernels and proximity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub samples: usize,
    pub max_distance: f64,
    pub min_kernel_dim: usize,
    pub max_kernel_dim: usize,
}

/// Grassmann distance between `ker [P(ξ)]ₓ` and `span{P(ξ)}` at random `ξ`.
pub fn kernel_check(field: &FactoredField, samples: usize, seed: u64) -> Result<KernelCheck> {
    let s = rng::subseed(seed, "kernel-check");
    let mut rep = KernelCheck { samples, max_distance: 0.0, min_kernel_dim: usize::MAX, max_kernel_dim: 0 };
    for i in 0..samples {
        let x = random_unit(&mut rng::stream(s, i as u64));
        let p = field.scaled_p(&x);
        let ker = kernel_subspace(&cross_matrix(&p), 1e-10)?;
        rep.min_kernel_dim = rep.min_kernel_dim.min(ker.dim());
        rep.max_kernel_dim = rep.max_kernel_dim.max(ker.dim());
        if ker.dim() == 1 {
            let line = Subspace::span(3, &[p.to_vec()], 1e-12)?;
            rep.max_distance = rep.max_distance.max(grassmann_distance(&ker, &line)?);
        } else {
            rep.max_distance = 1.0;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityReport {
    pub delta: f64,
    pub n: usize,
    pub samples: usize,
    /// `sup dist(φ, ψ)·KQ` over samples outside the δ-neighborhood of `⋃ T_i`.
    pub constant: f64,
    /// Certified lower bound for `ln(KQ)` outside that neighborhood.
    pub log_kq_bound: f64,
    /// `1/(KQ) ≤ δ` there, so `dist(φ, ψ) ≤ constant·δ`.
    pub epsilon_within_delta: bool,
    /// Largest directly evaluated Grassmann distance over the samples.
    pub max_distance: f64,
}

/// Fits `C` in `dist(span P(ξ), span (x², y², z²)) ≤ C·δ` away from the circles `T_i`.
pub fn proximity_constant(c: &Construction, samples: usize, seed: u64) -> Result<ProximityReport> {
    let delta = c.params.delta;
    let circle = chord_to_angle(c.family.radius);
    let s = rng::subseed(seed, "proximity");
    let mut constant: f64 = 0.0;
    let mut max_distance: f64 = 0.0;
    let mut used = 0;
    let mut i = 0u64;
    while used < samples {
        let x = random_unit(&mut rng::stream(s, i));
        i += 1;
        if c.family.centers.iter().any(|a| (angle(&x, a) - circle).abs() < delta) {
            continue;
        }
        used += 1;
        let u = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
        let eps = c.field.epsilon(&x);
        let a = [u[0], u[1], u[2] + eps];
        // dist = ε·|u × e₃| / (|u + εe₃||u|)
        let ratio = sphere::norm(&cross(&u, &E3)) / (sphere::norm(&a) * sphere::norm(&u));
        constant = constant.max(ratio);
        let d = grassmann_distance(
            &Subspace::span(3, &[c.field.scaled_p(&x).to_vec()], 1e-15)?,
            &Subspace::span(3, &[u.to_vec()], 1e-15)?,
        )?;
        max_distance = max_distance.max(d);
    }
    let log_kq_bound = log_kq_lower_bound(&c.field, angle_to_chord(circle + delta));
    Ok(ProximityReport {
        delta,
        n: c.family.len(),
        samples,
        constant,
        log_kq_bound,
        epsilon_within_delta: log_kq_bound >= -delta.ln(),
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::level_set;
    use crate::sphere::SphereGrid;

    fn equator_with_holes(w: f64) -> GammaCurve {
        build_gamma(&GammaParams { hole_half_width: w, blocking: Vec::new() }).unwrap()
    }

    #[test]
    fn equator_examples() {
        let eq = build_gamma(&GammaParams::equator()).unwrap();
        assert!((eq.length() - std::f64::consts::TAU).abs() < 1e-12);
        let touching = verify_gamma_plane_crossing(&GammaCurve { arcs: eq.arcs.clone() }, 0, 1);
        assert!(touching.pass);
        let all = verify_gamma_plane_crossing(&eq, 2000, 1);
        assert!(all.pass && all.worst_margin.abs() < 1e-12);
        let holes = equator_with_holes(std::f64::consts::FRAC_PI_8);
        let rep = verify_gamma_plane_crossing(&holes, 100, 1);
        assert!(!rep.pass);
        assert!(holes.segments().iter().all(|a| a.crossing_margin(&E1) < 0.0));
        assert!(build_gamma(&GammaParams { hole_half_width: 0.8, blocking: Vec::new() }).is_err());
    }

    #[test]
    fn separation_examples() {
        let eq = build_gamma(&GammaParams::equator()).unwrap();
        assert!(verify_gamma_separation(&eq, &Rotation::identity()).sampled_distance < 1e-12);
        let s = verify_gamma_separation(&eq, &quarter_turn_rotation());
        assert!(s.sampled_distance < 1e-3, "{s:?}");
        let q = quarter_turn_rotation();
        assert!(sphere::distance(&rotate(&q, &E1), &E2) < 1e-15);
        assert!(sphere::distance(&rotate(&q, &E2), &E3) < 1e-15);
    }

    #[test]
    fn shipped_gamma_passes_both_verifiers() {
        let g = build_gamma(&GammaParams::shipped()).unwrap();
        let cross = verify_gamma_plane_crossing(&g, 10_000, 7);
        assert!(cross.pass && cross.worst_margin > 0.01, "{cross:?}");
        let sep = verify_gamma_separation(&g, &shipped_rotation());
        assert!(sep.margin > 0.1, "{sep:?}");
    }

    #[test]
    fn arc_distance_matches_sampling() {
        let g = build_gamma(&GammaParams::shipped()).unwrap();
        let pts = g.sample(1e-4);
        let mut s = rng::stream(3, 0);
        for _ in 0..50 {
            let p = random_unit(&mut s);
            let exact = g.distance_to(&p);
            let sampled = pts.iter().map(|q| angle(&p, q)).fold(f64::INFINITY, f64::min);
            assert!(sampled >= exact - 1e-12 && sampled - exact < 1e-4);
        }
    }

    #[test]
    fn covers() {
        let eq = build_gamma(&GammaParams::equator()).unwrap();
        let f = cover_gamma(&eq, 1.0, 100).unwrap();
        assert!(f.len() <= 14 && f.len() % 2 == 0, "{}", f.len());
        let g = build_gamma(&GammaParams::shipped()).unwrap();
        let mut last = usize::MAX;
        for d in [0.025, 0.05, 0.1, 0.2, 0.4] {
            let fam = cover_gamma(&g, d, 100_000).unwrap();
            assert!(fam.len() <= last);
            last = fam.len();
            let worst = g
                .sample(1e-4)
                .iter()
                .map(|p| fam.centers.iter().map(|a| sphere::distance(p, a)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            assert!(worst < fam.radius, "δ = {d}: {worst}");
        }
        assert!(matches!(cover_gamma(&g, 0.05, 10), Err(Error::Capacity(_))));
        assert!(BallFamily::new(vec![E1], 0.1).is_err());
    }

    #[test]
    fn q_examples() {
        let fam = BallFamily::new(vec![E3, neg(&E3)], 0.5).unwrap();
        let q = build_q(&fam).unwrap();
        let expect = (1.0 / 16.0) * (4.0f64 - 0.25).powi(2);
        assert!((q.eval(&E3) - expect).abs() < 1e-12);
        let z = 1.0 - 0.125f64;
        let on_t = [(1.0 - z * z).sqrt(), 0.0, z];
        assert!((sphere::distance(&on_t, &E3) - 0.5).abs() < 1e-12);
        assert!(q.eval(&on_t).abs() < 1e-12);
        assert!(q.is_even(1e-12));
        let mut s = rng::stream(9, 0);
        for _ in 0..200 {
            let x: Point = [s_range(&mut s), s_range(&mut s), s_range(&mut s)];
            assert!(q.eval(&x) >= -1e-12);
            assert!((q.eval(&x) - q.eval(&neg(&x))).abs() <= 1e-12 * q.eval(&x).abs().max(1.0));
        }
        let p = build_p(&q, 2.0).unwrap();
        for _ in 0..1000 {
            let x = random_unit(&mut s);
            assert!(p.eval(&x)[2] >= 1.0);
        }
        assert!(matches!(build_p(&q, 1e13), Err(Error::Capacity(_))));
        let big = BallFamily::new((0..14).map(|i| if i % 2 == 0 { E1 } else { neg(&E1) }).collect(), 0.1).unwrap();
        assert!(matches!(build_q(&big), Err(Error::Capacity(_))));
    }

    fn s_range(s: &mut rng::Stream) -> f64 {
        use rand::Rng;
        s.random_range(-2.0..2.0)
    }

    #[test]
    fn expanded_and_factored_agree() {
        let fam = BallFamily::new(vec![normalize(&[1.0, 0.2, 0.1]), normalize(&[-1.0, -0.2, -0.1])], 0.3).unwrap();
        let params = ConstructionParams { delta: 0.6, n: 2, r: 0.3, log_k: 5f64.ln() };
        let p = build_p(&build_q(&fam).unwrap(), 5.0).unwrap().homogenize().unwrap();
        assert_eq!(p.homogeneous_degree(), Some(10));
        let field = FactoredField::new(&fam, &params);
        let op = assemble_operator(&p).unwrap();
        let mut s = rng::stream(2, 0);
        for _ in 0..200 {
            let x = random_unit(&mut s);
            let exact = p.eval(&x);
            let fac = field.scaled_p(&x);
            let l = Subspace::span(3, &[exact.clone()], 1e-14).unwrap();
            let m = Subspace::span(3, &[fac.to_vec()], 1e-14).unwrap();
            assert!(grassmann_distance(&l, &m).unwrap() < 1e-10);
            let sym = op.symbol(&x);
            assert!((&sym * DMatrix::from_column_slice(3, 1, &exact)).norm() < 1e-9 * sym.norm());
            assert!((&sym + sym.transpose()).norm() == 0.0);
        }
    }

    #[test]
    fn operator_assembly() {
        let e3 = PolynomialVectorField::new(vec![
            Polynomial::zero(3),
            Polynomial::zero(3),
            Polynomial::squared_norm(3),
        ])
        .unwrap();
        let op = assemble_operator(&e3).unwrap();
        let s = op.symbol(&E3);
        assert_eq!(s, DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let k = kernel_subspace(&s, 1e-12).unwrap();
        assert_eq!(k.dim(), 1);
        assert!(k.contains(&E3, 1e-12));
        let four = assemble_operator_four_row(&e3).unwrap();
        let ap = four.symbol(&E3) * DMatrix::from_column_slice(3, 1, &E3);
        assert_eq!(ap.as_slice(), &[0.0, -1.0, 0.0, -1.0]);
        let non_h = PolynomialVectorField::new(vec![
            Polynomial::constant(3, 1.0),
            Polynomial::zero(3),
            Polynomial::squared_norm(3),
        ])
        .unwrap();
        assert!(assemble_operator(&non_h).is_err());
    }

    #[test]
    fn neighborhoods() {
        let c = Construction::shipped(0.1).unwrap();
        let n = c.family.len();
        let pole = gamma_delta_neighborhood(&E3, &c.params, &c.family).unwrap();
        assert_eq!(pole.len(), n + 2);
        let diag = gamma_delta_neighborhood(&normalize(&[1.0, 1.0, 1.0]), &c.params, &c.family).unwrap();
        assert_eq!(diag.len(), n + 10);
        assert!(gamma_delta_neighborhood(&[0.0; 3], &c.params, &c.family).is_err());
    }

    #[test]
    fn enclosure_contains_level_sets() {
        let c = Construction::shipped(0.1).unwrap();
        let delta = c.params.delta;
        let rho = enclosure_radius(&c.field, delta * delta / 2.0, 4.0 * delta).unwrap();
        assert!(rho > c.params.r && rho < 4.0 * delta);
        let grid = SphereGrid::new(0.02).unwrap();
        let mut s = rng::stream(11, 0);
        for i in 0..6 {
            let v = if i == 0 { E3 } else { random_unit(&mut s) };
            let enc = level_set_enclosure(&v, delta, &c.family, rho);
            let gd = gamma_delta_neighborhood(&v, &c.params, &c.family).unwrap();
            for p in level_set(&c.field, &v, &grid, 1e-7).unwrap() {
                assert!(enc.contains(&p), "v = {v:?}, p = {p:?}");
                assert!(gd.contains(&p));
            }
        }
    }

    #[test]
    fn empty_family_fails_b() {
        let g = build_gamma(&GammaParams::shipped()).unwrap();
        let c = Construction::from_family(0.1, &g, BallFamily { centers: Vec::new(), radius: 0.05 }).unwrap();
        let rep = check_b(&c, 50, 1).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.wave_cone.status, WaveConeStatus::Refuted);
    }

    #[test]
    fn enlarging_the_family_keeps_b() {
        let c = Construction::shipped(0.1).unwrap();
        assert!(check_b(&c, 300, 2).unwrap().pass);
        let mut centers = c.family.centers.clone();
        centers.extend([normalize(&[0.3, 0.4, 0.5]), normalize(&[-0.3, -0.4, -0.5])]);
        let bigger = Construction::from_family(0.1, &c.gamma, BallFamily::new(centers, c.family.radius).unwrap()).unwrap();
        assert!(check_b(&bigger, 300, 2).unwrap().pass);
    }

    #[test]
    fn full_equator_fails_c() {
        let eq = build_gamma(&GammaParams::equator()).unwrap();
        let c = Construction::new(0.1, &eq).unwrap();
        let opts = VerifyOptions { v_samples: 3, candidate_spacing: 0.02, ..Default::default() };
        let rep = check_c(&c, &separating_rotations(), &opts, 1).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.good_candidates, 0);
    }

    #[test]
    fn kernels_match_p() {
        let c = Construction::shipped(0.1).unwrap();
        let k = kernel_check(&c.field, 200, 5).unwrap();
        assert_eq!((k.min_kernel_dim, k.max_kernel_dim), (1, 1));
        assert!(k.max_distance < 1e-8);
    }
}
