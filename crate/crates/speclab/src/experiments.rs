//! Named, seeded experiments with JSON reports.
//!
//! Each experiment reads a JSON object, runs one pipeline of the library and
//! returns a [`ReportEnvelope`] with the results and a list of pass/fail
//! checks. Reports are deterministic for a fixed config and seed; only the
//! `timing` field varies between runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bundles::{self, CertifyOptions, LineBundle, PDOperator, SymbolField, WaveConeOptions, WaveConeStatus};
use crate::configurations::{
    count_triples_brute, count_triples_fft, extract_spectrum, growth_exponent, has_nontrivial_progression,
    trivial_triple_count, ConfigFamily,
};
use crate::construction::{self, Construction, GammaParams, VerifyOptions};
use crate::dimension::{certify_corollary, default_radii, measure_dimension, triadic_radii};
use crate::error::{contract, Error, Result};
use crate::forms::{
    auto_frequency_grid, auto_time_grid, exact_time_order, multilinear_frequency, multilinear_time, scaling_experiment,
    trilinear_frequency, trilinear_time, SchwartzSurrogate, TrigPolynomial,
};
use crate::measures::{fourier_coefficients, MeasureModel, RieszProductMeasure, SelfSimilarMeasure1D};
use crate::poly::PolynomialVectorField;
use crate::rng;
use crate::sphere::{self, SphereGrid};

pub const SCHEMA_VERSION: &str = "v1";

pub const EXPERIMENTS: [&str; 11] = [
    "coeffs",
    "spectrum",
    "count3ap",
    "growth",
    "dual-check",
    "dimension",
    "corollary",
    "scaling",
    "wavecone",
    "construction-verify",
    "certify-bound",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), pass: value <= tolerance, value, tolerance }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), pass: value >= threshold, value, tolerance: threshold }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self { name: name.to_string(), pass, value: if pass { 1.0 } else { 0.0 }, tolerance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub schema: String,
    pub speclab: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema: String,
    pub experiment: String,
    pub seed: u64,
    pub config: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    pub versions: Versions,
    pub timing: Timing,
}

impl ReportEnvelope {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// The report without its timing, serialized; equal across runs with the same config and seed.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(m) = &mut v {
            m.remove("timing");
        }
        Ok(serde_json::to_string(&v)?)
    }
}

/// A CSV file produced alongside a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: ReportEnvelope,
    pub artifacts: Vec<Artifact>,
}

// ---------------------------------------------------------------- configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Lebesgue,
    Dirac {
        #[serde(default)]
        point: f64,
    },
    Cantor,
    Ninths,
    SelfSimilar {
        ratio: f64,
        translations: Vec<f64>,
        weights: Vec<f64>,
    },
    Riesz {
        frequencies: Vec<u64>,
        #[serde(default)]
        amplitudes: Option<Vec<f64>>,
    },
    RieszGeometric {
        base: u64,
        depth: usize,
    },
}

impl MeasureConfig {
    pub fn model(&self) -> Result<MeasureModel> {
        let m = match self {
            MeasureConfig::Lebesgue => MeasureModel::Lebesgue,
            MeasureConfig::Dirac { point } => MeasureModel::Atom { point: *point },
            MeasureConfig::Cantor => MeasureModel::cantor(),
            MeasureConfig::Ninths => MeasureModel::SelfSimilar(SelfSimilarMeasure1D::ninths()),
            MeasureConfig::SelfSimilar { ratio, translations, weights } => {
                MeasureModel::SelfSimilar(SelfSimilarMeasure1D::new(*ratio, translations.clone(), weights.clone())?)
            }
            MeasureConfig::Riesz { frequencies, amplitudes } => {
                let a = amplitudes.clone().unwrap_or_else(|| vec![1.0; frequencies.len()]);
                MeasureModel::Riesz(RieszProductMeasure::new(frequencies.clone(), a)?)
            }
            MeasureConfig::RieszGeometric { base, depth } => {
                MeasureModel::Riesz(RieszProductMeasure::geometric(*base, *depth)?)
            }
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffsConfig {
    measure: MeasureConfig,
    window: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumConfig {
    measure: MeasureConfig,
    window: usize,
    #[serde(default)]
    tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CountMode {
    Fft,
    Brute,
}

fn both_modes() -> Vec<CountMode> {
    vec![CountMode::Fft, CountMode::Brute]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Count3apConfig {
    measure: MeasureConfig,
    window: usize,
    #[serde(default)]
    tau: f64,
    #[serde(default = "both_modes")]
    modes: Vec<CountMode>,
    /// Extra random subsets of `[-window, window]` checked against the brute-force count.
    #[serde(default)]
    random_sets: usize,
    /// Windows `n` whose full interval is checked against `2n² + 2n + 1` and `4n + 1`.
    #[serde(default)]
    full_intervals: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrowthConfig {
    measure: MeasureConfig,
    windows: Vec<u64>,
    #[serde(default)]
    tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DualSuite {
    Trilinear,
    Multilinear,
    Both,
}

fn default_suite() -> DualSuite {
    DualSuite::Both
}
fn default_degree() -> i64 {
    64
}
fn default_trials() -> usize {
    100
}
fn default_dual_tol() -> f64 {
    1e-9
}
fn default_multilinear_cases() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualCheckConfig {
    #[serde(default = "default_suite")]
    suite: DualSuite,
    #[serde(default = "default_degree")]
    degree: i64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_dual_tol")]
    tolerance: f64,
    #[serde(default = "default_multilinear_cases")]
    multilinear_cases: usize,
}

fn default_samples() -> usize {
    100
}
fn default_dim_tol() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionConfig {
    measure: MeasureConfig,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    radii: Option<Vec<f64>>,
    #[serde(default)]
    expected: Option<f64>,
    #[serde(default = "default_dim_tol")]
    tolerance: f64,
}

fn default_corollary_tol() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorollaryConfig {
    measure: MeasureConfig,
    windows: Vec<u64>,
    #[serde(default)]
    tau: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    radii: Option<Vec<f64>>,
    #[serde(default = "default_corollary_tol")]
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RadiiConfig {
    List(Vec<f64>),
    Triadic { triadic: (i32, i32) },
}

fn default_family() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingConfig {
    measure: MeasureConfig,
    /// Scalars `b_j` of the family `{x, b_1 x, …}`.
    #[serde(default = "default_family")]
    family: Vec<f64>,
    alpha: f64,
    radii: RadiiConfig,
    #[serde(default = "default_corollary_tol")]
    tolerance: f64,
    /// Compare the fitted slope with this value as well.
    #[serde(default)]
    expected_slope: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum OperatorConfig {
    Construction { delta: f64 },
    Divergence { n: usize },
    Explicit { operator: PDOperator },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Expectation {
    Verified,
    Refuted,
}

fn default_expectation() -> Expectation {
    Expectation::Verified
}
fn default_planes() -> usize {
    10_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveconeConfig {
    operator: OperatorConfig,
    k: usize,
    w: Vec<f64>,
    #[serde(default = "default_planes")]
    plane_samples: usize,
    #[serde(default = "default_expectation")]
    expect: Expectation,
}

fn default_delta() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}
fn default_v_samples() -> usize {
    200
}
fn default_kernel_samples() -> usize {
    1000
}
fn default_nonvanishing() -> usize {
    100_000
}
fn default_proximity_samples() -> usize {
    20_000
}
fn default_stability() -> f64 {
    0.2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstructionVerifyConfig {
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_true")]
    conditions: bool,
    #[serde(default = "default_v_samples")]
    v_samples: usize,
    #[serde(default = "default_planes")]
    plane_samples: usize,
    #[serde(default = "default_planes")]
    gamma_planes: usize,
    #[serde(default = "default_nonvanishing")]
    nonvanishing_samples: usize,
    #[serde(default = "default_kernel_samples")]
    kernel_samples: usize,
    #[serde(default)]
    proximity_deltas: Vec<f64>,
    #[serde(default = "default_proximity_samples")]
    proximity_samples: usize,
    #[serde(default = "default_stability")]
    proximity_stability: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BundleConfig {
    Squares,
    Construction { delta: f64 },
    Polynomial { field: PolynomialVectorField },
}

fn default_grid() -> f64 {
    0.05
}
fn default_k() -> usize {
    1
}
fn default_certify_v() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyBoundConfig {
    bundle: BundleConfig,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_grid")]
    grid_spacing: f64,
    #[serde(default = "default_certify_v")]
    v_samples: usize,
}

// ---------------------------------------------------------------- dispatch

fn parse<T: DeserializeOwned>(params: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| contract(format!("config schema: {e}")))
}

/// Runs `experiment` on a JSON config; `seed` overrides the config's `seed` field.
pub fn run(experiment: &str, config: &Value, seed: Option<u64>) -> Result<Outcome> {
    let start = Instant::now();
    let Value::Object(obj) = config else {
        return Err(contract("config must be a JSON object"));
    };
    let mut params = obj.clone();
    if let Some(name) = params.remove("experiment") {
        if name.as_str() != Some(experiment) {
            return Err(contract(format!("config names experiment {name}, not {experiment:?}")));
        }
    }
    let cfg_seed = match params.remove("seed") {
        Some(v) => Some(v.as_u64().ok_or_else(|| contract("seed must be a non-negative integer"))?),
        None => None,
    };
    let seed = seed.or(cfg_seed).ok_or_else(|| contract("a seed is required (config field or --seed)"))?;
    let (results, checks, artifacts) = match experiment {
        "coeffs" => coeffs(parse(&params)?)?,
        "spectrum" => spectrum(parse(&params)?)?,
        "count3ap" => count3ap(parse(&params)?, seed)?,
        "growth" => growth(parse(&params)?)?,
        "dual-check" => dual_check(parse(&params)?, seed)?,
        "dimension" => dimension(parse(&params)?, seed)?,
        "corollary" => corollary(parse(&params)?, seed)?,
        "scaling" => scaling(parse(&params)?)?,
        "wavecone" => wavecone(parse(&params)?, seed)?,
        "construction-verify" => construction_verify(parse(&params)?, seed)?,
        "certify-bound" => certify_bound(parse(&params)?, seed)?,
        other => return Err(contract(format!("unknown experiment {other:?}; expected one of {EXPERIMENTS:?}"))),
    };
    if checks.is_empty() {
        return Err(contract("experiment produced no checks"));
    }
    let mut echo = obj.clone();
    echo.insert("seed".into(), json!(seed));
    let report = ReportEnvelope {
        schema: SCHEMA_VERSION.into(),
        experiment: experiment.into(),
        seed,
        config: Value::Object(echo),
        results,
        checks,
        versions: Versions { schema: SCHEMA_VERSION.into(), speclab: env!("CARGO_PKG_VERSION").into() },
        timing: Timing { seconds: start.elapsed().as_secs_f64() },
    };
    Ok(Outcome { report, artifacts })
}

/// Writes `path` by writing a sibling temporary file and renaming it over.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| contract("output path has no file name"))?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `<experiment>.json` and the artifacts into `dir`; returns the report path.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        write_atomic(&dir.join(&a.file_name), &a.contents)?;
    }
    let path = dir.join(format!("{}.json", outcome.report.experiment));
    let mut text = serde_json::to_string_pretty(&outcome.report)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

type Parts = (Value, Vec<Check>, Vec<Artifact>);

fn csv_artifact(name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Artifact { file_name: name.into(), contents: buf })
}

// ---------------------------------------------------------------- experiments

fn coeffs(cfg: CoeffsConfig) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let table = fourier_coefficients(&m, cfg.window)?;
    let defect = table.conjugate_symmetry_defect();
    let mass = (table.get(0) - 1.0).norm();
    let rows: Vec<[f64; 3]> = table.iter().map(|(k, c)| [k as f64, c.re, c.im]).collect();
    let results = json!({ "measure": m.label(), "window": cfg.window, "coefficients": rows, "conjugate_symmetry_defect": defect });
    let checks =
        vec![Check::at_most("conjugate-symmetry", defect, 1e-12), Check::at_most("unit-mass", mass, 1e-12)];
    let art = csv_artifact("coeffs.csv", |b| table.write_csv(b))?;
    Ok((results, checks, vec![art]))
}

fn spectrum(cfg: SpectrumConfig) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let s = extract_spectrum(&fourier_coefficients(&m, cfg.window)?, cfg.tau)?;
    let results = json!({ "measure": m.label(), "window": cfg.window, "tau": cfg.tau, "size": s.len(), "members": s.members() });
    let checks = vec![Check::flag("symmetric", s.is_symmetric()), Check::flag("contains-zero", s.contains(0))];
    let art = csv_artifact("spectrum.csv", |b| s.write_csv(b))?;
    Ok((results, checks, vec![art]))
}

fn count3ap(cfg: Count3apConfig, seed: u64) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let s = extract_spectrum(&fourier_coefficients(&m, cfg.window)?, cfg.tau)?;
    let mut results = Map::new();
    results.insert("measure".into(), json!(m.label()));
    results.insert("window".into(), json!(cfg.window));
    results.insert("size".into(), json!(s.len()));
    let mut checks = Vec::new();
    let fft = if cfg.modes.contains(&CountMode::Fft) { Some(count_triples_fft(&s)?) } else { None };
    let brute = if cfg.modes.contains(&CountMode::Brute) { Some(count_triples_brute(&s)) } else { None };
    results.insert("fft".into(), json!(fft));
    results.insert("brute".into(), json!(brute));
    let trivial = trivial_triple_count(&s);
    results.insert("trivial".into(), json!(trivial));
    results.insert("has_nontrivial".into(), json!(has_nontrivial_progression(&s)));
    if let (Some(a), Some(b)) = (fft, brute) {
        checks.push(Check::at_most("fft-equals-brute", a.abs_diff(b) as f64, 0.0));
    }
    if let Some(c) = fft.or(brute) {
        checks.push(Check::at_least("count-at-least-trivial", c as f64, trivial as f64));
    }
    if cfg.random_sets > 0 {
        let n = cfg.window as i64;
        let rs = rng::subseed(seed, "count3ap-random");
        let mut worst = 0u64;
        for i in 0..cfg.random_sets {
            let mut r = rng::stream(rs, i as u64);
            let density: f64 = r.random_range(0.01..0.5);
            let members: Vec<i64> = (-n..=n).filter(|_| r.random::<f64>() < density).collect();
            let w = crate::configurations::SpectrumWindow::new(cfg.window, members, 0.0)?;
            worst = worst.max(count_triples_fft(&w)?.abs_diff(count_triples_brute(&w)));
        }
        results.insert("random_sets".into(), json!(cfg.random_sets));
        checks.push(Check::at_most("random-sets-fft-equals-brute", worst as f64, 0.0));
    }
    if !cfg.full_intervals.is_empty() {
        let mut rows = Vec::new();
        let (mut closed, mut triv) = (0u64, 0u64);
        for &n in &cfg.full_intervals {
            let w = crate::configurations::SpectrumWindow::full(n as usize);
            let (f, t) = (count_triples_fft(&w)?, trivial_triple_count(&w));
            closed = closed.max(f.abs_diff(crate::configurations::full_interval_count(n)));
            triv = triv.max(t.abs_diff(4 * n + 1));
            rows.push(json!({ "n": n, "count": f, "trivial": t }));
        }
        results.insert("full_intervals".into(), json!(rows));
        checks.push(Check::at_most("full-interval-closed-form", closed as f64, 0.0));
        checks.push(Check::at_most("full-interval-trivial", triv as f64, 0.0));
    }
    Ok((Value::Object(results), checks, Vec::new()))
}

fn growth(cfg: GrowthConfig) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let top = *cfg.windows.iter().max().ok_or_else(|| contract("windows must be non-empty"))?;
    let s = extract_spectrum(&fourier_coefficients(&m, top as usize)?, cfg.tau)?;
    let pairs = cfg
        .windows
        .iter()
        .map(|&n| Ok((n, count_triples_fft(&s.restrict(n as usize))?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = growth_exponent(&pairs)?;
    let checks = vec![Check::at_least("beta-nonnegative", fit.beta, -1e-9), Check::at_most("beta-at-most-2", fit.beta, 2.0 + 1e-9)];
    Ok((json!({ "measure": m.label(), "tau": cfg.tau, "fit": fit }), checks, Vec::new()))
}

fn random_real_polynomial(seed: u64, index: u64, degree: i64) -> Result<TrigPolynomial> {
    let mut r = rng::stream(seed, index);
    let mut entries = vec![(0, Complex64::new(r.random_range(-1.0..1.0), 0.0))];
    for m in 1..=degree {
        let c = Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        entries.push((m, c));
        entries.push((-m, c.conj()));
    }
    TrigPolynomial::from_entries(&entries)
}

const INV_2_SQRT_PI: f64 = 0.282_094_791_773_878_14;

fn dual_check(cfg: DualCheckConfig, seed: u64) -> Result<Parts> {
    if cfg.degree < 0 {
        return Err(contract("degree must be non-negative"));
    }
    let mut results = Map::new();
    let mut checks = Vec::new();
    if cfg.suite != DualSuite::Multilinear {
        let s = rng::subseed(seed, "dual-trilinear");
        let mut worst: f64 = 0.0;
        for t in 0..cfg.trials as u64 {
            let d = rng::stream(s, 3 * cfg.trials as u64 + t).random_range(0..=cfg.degree);
            let f = random_real_polynomial(s, 3 * t, d)?;
            let g = random_real_polynomial(s, 3 * t + 1, d)?;
            let h = random_real_polynomial(s, 3 * t + 2, d)?;
            let a = trilinear_frequency(&f, &g, &h);
            let b = trilinear_time(&f, &g, &h, exact_time_order(&f, &g, &h))?;
            worst = worst.max((a - b).norm() / a.norm().max(1.0));
        }
        let e = TrigPolynomial::exponential(1);
        let fr = trilinear_frequency(&e, &e, &e);
        let tm = trilinear_time(&e, &e, &e, exact_time_order(&e, &e, &e))?;
        results.insert("trilinear_max_relative_error".into(), json!(worst));
        results.insert("counterexample".into(), json!({ "frequency": [fr.re, fr.im], "time": [tm.re, tm.im] }));
        checks.push(Check::at_most("trilinear-duality", worst, cfg.tolerance));
        checks.push(Check::flag("complex-counterexample", fr == Complex64::new(1.0, 0.0) && tm.norm() < 1e-15));
    }
    if cfg.suite != DualSuite::Trilinear {
        let g = SchwartzSurrogate::centered(1.0, 1);
        let fs = vec![SchwartzSurrogate::centered(1.0, 1)];
        let fam = ConfigFamily::identity(1);
        let fr = multilinear_frequency(&g, &fs, &fam, &auto_frequency_grid(&g, 200))?;
        let tm = multilinear_time(&g, &fs, &fam, &auto_time_grid(&fs, 200))?;
        results.insert("unit_gaussian".into(), json!({ "frequency": fr, "time": tm, "expected": INV_2_SQRT_PI }));
        checks.push(Check::at_most("unit-gaussian-frequency", (fr.re - INV_2_SQRT_PI).abs(), 1e-8));
        checks.push(Check::at_most("unit-gaussian-time", (tm.re - INV_2_SQRT_PI).abs(), 1e-8));
        let s = rng::subseed(seed, "dual-multilinear");
        let mut cases = Vec::new();
        let mut worst: f64 = 0.0;
        for i in 0..cfg.multilinear_cases as u64 {
            let mut r = rng::stream(s, i);
            let surrogate = |r: &mut rng::Stream| {
                SchwartzSurrogate::gaussian(r.random_range(0.6..1.4), vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)])
                    .with_amplitude(r.random_range(0.5..2.0))
            };
            let g = surrogate(&mut r);
            let f = surrogate(&mut r);
            let th: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let reflect = r.random::<bool>();
            let s2 = if reflect { -1.0 } else { 1.0 };
            let b = nalgebra::DMatrix::from_row_slice(2, 2, &[th.cos(), -s2 * th.sin(), th.sin(), s2 * th.cos()]);
            let fam = ConfigFamily::new(vec![b])?;
            let fs = vec![f];
            let fr = multilinear_frequency(&g, &fs, &fam, &auto_frequency_grid(&g, 60))?;
            let tm = multilinear_time(&g, &fs, &fam, &auto_time_grid(&fs, 60))?;
            // quadrature budgets plus a roundoff floor
            let budget = fr.error + tm.error + 1e-12 * (1.0 + fr.value().norm());
            let diff = (fr.value() - tm.value()).norm();
            worst = worst.max(diff / budget);
            cases.push(json!({ "frequency": fr, "time": tm, "difference": diff, "budget": budget }));
        }
        results.insert("multilinear_cases".into(), json!(cases));
        if cfg.multilinear_cases > 0 {
            checks.push(Check::at_most("multilinear-within-budget", worst, 1.0));
        }
    }
    Ok((Value::Object(results), checks, Vec::new()))
}

fn radii_or_default(radii: Option<Vec<f64>>, m: &MeasureModel) -> Vec<f64> {
    radii.unwrap_or_else(|| default_radii(m))
}

fn dimension(cfg: DimensionConfig, seed: u64) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let radii = radii_or_default(cfg.radii, &m);
    let d = measure_dimension(&m, cfg.samples, seed, &radii)?;
    let mut checks = vec![Check::flag("estimate-finite", d.estimate.value.is_finite())];
    if let Some(e) = cfg.expected {
        checks.push(Check::at_most("matches-expected", (d.estimate.value - e).abs(), cfg.tolerance));
    }
    Ok((json!({ "measure": m.label(), "dimension": d, "expected": cfg.expected }), checks, Vec::new()))
}

fn corollary(cfg: CorollaryConfig, seed: u64) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let radii = radii_or_default(cfg.radii, &m);
    let rep = certify_corollary(&m, &cfg.windows, cfg.tau, cfg.samples, seed, &radii, cfg.tolerance)?;
    let checks = vec![Check::at_least("dimension-vs-growth-bound", rep.d_hat + rep.tolerance, rep.bound)];
    Ok((json!(rep), checks, Vec::new()))
}

fn scaling(cfg: ScalingConfig) -> Result<Parts> {
    let m = cfg.measure.model()?;
    let fam = ConfigFamily::scalar(&cfg.family);
    let radii = match cfg.radii {
        RadiiConfig::List(r) => r,
        RadiiConfig::Triadic { triadic: (a, b) } => triadic_radii(a, b),
    };
    let rep = scaling_experiment(&m, &fam, cfg.alpha, &radii, cfg.tolerance)?;
    let mut checks = vec![Check::at_most("slope-lower-bound-direction", rep.fitted_slope, rep.predicted_exponent + cfg.tolerance)];
    let mut results = Map::new();
    if let Some(s) = cfg.expected_slope {
        checks.push(Check::at_most("slope-matches-expected", (rep.fitted_slope - s).abs(), cfg.tolerance));
    }
    if matches!(m, MeasureModel::Atom { .. }) {
        // ∫ ∏ ĝ_r(b_j ξ) dξ with ĝ_r(ξ) = exp(−2π²r²ξ²)
        let energy = 1.0 + cfg.family.iter().map(|b| b * b).sum::<f64>();
        let closed: Vec<f64> =
            radii.iter().map(|r| 1.0 / (r * (2.0 * std::f64::consts::PI * energy).sqrt())).collect();
        let rel = rep.lambda_values.iter().zip(&closed).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("closed-form-agreement", rel, 1e-6));
        results.insert("closed_form".into(), json!(closed));
    }
    results.insert("measure".into(), json!(m.label()));
    results.insert("report".into(), json!(rep));
    Ok((Value::Object(results), checks, Vec::new()))
}

fn wavecone(cfg: WaveconeConfig, seed: u64) -> Result<Parts> {
    let construction;
    let explicit;
    let op: &dyn SymbolField = match cfg.operator {
        OperatorConfig::Construction { delta } => {
            construction = Construction::shipped(delta)?;
            &construction.field
        }
        OperatorConfig::Divergence { n } => {
            explicit = PDOperator::divergence(n);
            &explicit
        }
        OperatorConfig::Explicit { operator } => {
            explicit = operator;
            &explicit
        }
    };
    let rep = bundles::wave_cone_witness(op, cfg.k, &cfg.w, cfg.plane_samples, seed, &WaveConeOptions::default())?;
    let want = match cfg.expect {
        Expectation::Verified => WaveConeStatus::Verified,
        Expectation::Refuted => WaveConeStatus::Refuted,
    };
    let checks = vec![Check::flag("witness-status-as-expected", rep.status == want)];
    Ok((json!(rep), checks, Vec::new()))
}

fn construction_verify(cfg: ConstructionVerifyConfig, seed: u64) -> Result<Parts> {
    let mut results = Map::new();
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    let gamma = construction::build_gamma(&GammaParams::shipped())?;
    if cfg.conditions {
        let c = Construction::new(cfg.delta, &gamma)?;
        let crossing = construction::verify_gamma_plane_crossing(&gamma, cfg.gamma_planes, seed);
        let sep = construction::verify_gamma_separation(&gamma, &construction::shipped_rotation());
        checks.push(Check::flag("gamma-plane-crossing", crossing.pass));
        checks.push(Check::at_least("gamma-separation", sep.margin, f64::MIN_POSITIVE));
        let kernel = construction::kernel_check(&c.field, cfg.kernel_samples, seed)?;
        checks.push(Check::at_most("kernel-equals-span-p", kernel.max_distance, 1e-8));
        let opts = VerifyOptions {
            nonvanishing_samples: cfg.nonvanishing_samples,
            plane_samples: cfg.plane_samples,
            v_samples: cfg.v_samples,
            ..VerifyOptions::default()
        };
        let rep = construction::verify_conditions(&c, &construction::separating_rotations(), &opts, seed)?;
        checks.push(Check::flag("condition-a", rep.a.pass));
        checks.push(Check::flag("condition-b", rep.b.pass));
        checks.push(Check::flag("condition-c", rep.c.pass));
        checks.push(Check::at_most("bound-equals-three-halves", (rep.bound - 1.5).abs(), 0.0));
        checks.push(Check::flag("wave-cone-witness-e3", rep.b.wave_cone.status == WaveConeStatus::Verified));
        results.insert("gamma".into(), json!({ "arcs": gamma, "length": gamma.length(), "crossing": crossing, "separation": sep }));
        results.insert("cover_size".into(), json!(c.family.len()));
        results.insert("kernel".into(), json!(kernel));
        results.insert("conditions".into(), json!(rep));
        artifacts.push(csv_artifact("cover_centers.csv", |b| sphere::write_points_csv(&c.family.centers, b))?);
        artifacts.push(csv_artifact("gamma.csv", |b| sphere::write_points_csv(&gamma.sample(0.01), b))?);
    }
    if !cfg.proximity_deltas.is_empty() {
        let reps = cfg
            .proximity_deltas
            .iter()
            .map(|&d| construction::proximity_constant(&Construction::new(d, &gamma)?, cfg.proximity_samples, seed))
            .collect::<Result<Vec<_>>>()?;
        let cs: Vec<f64> = reps.iter().map(|r| r.constant).collect();
        let finite = cs.iter().all(|c| c.is_finite());
        let mut sorted = cs.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let spread = cs.iter().map(|c| ((c - median) / median).abs()).fold(0.0, f64::max);
        checks.push(Check::flag("proximity-finite", finite));
        checks.push(Check::at_most("proximity-stable", spread, cfg.proximity_stability));
        checks.push(Check::flag("proximity-epsilon-within-delta", reps.iter().all(|r| r.epsilon_within_delta)));
        results.insert("proximity".into(), json!({ "reports": reps, "median": median, "relative_spread": spread }));
    }
    if checks.is_empty() {
        return Err(contract("construction-verify needs conditions = true or non-empty proximity_deltas"));
    }
    Ok((Value::Object(results), checks, artifacts))
}

fn certify_bound(cfg: CertifyBoundConfig, seed: u64) -> Result<Parts> {
    let field;
    let construction;
    let bundle: &dyn LineBundle = match cfg.bundle {
        BundleConfig::Squares => {
            field = PolynomialVectorField::squares(3);
            &field
        }
        BundleConfig::Polynomial { field: f } => {
            field = f;
            &field
        }
        BundleConfig::Construction { delta } => {
            construction = Construction::shipped(delta)?;
            &construction.field
        }
    };
    if bundle.dim() != 3 {
        return Err(Error::Unsupported("level sets are computed on S² only".into()));
    }
    let grid = SphereGrid::new(cfg.grid_spacing)?;
    let cert = bundles::certify_dimension_bound(bundle, cfg.k, &grid, cfg.v_samples, seed, &CertifyOptions::default())?;
    let checks = vec![Check::flag("bound-certified", cert.certified)];
    Ok((json!(cert), checks, Vec::new()))
}
