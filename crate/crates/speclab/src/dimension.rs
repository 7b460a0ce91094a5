//! Local and global dimension estimates from ball masses, and the bound
//! formulas they are compared against.
//!
//! The liminf and limsup over `r → 0` are replaced by proxies on a finite
//! geometric ladder of radii. On the finest half of the ladder, every radius
//! `r_i` gives an anchored two-point slope
//! `(log μ(B(x,r_i)) - log μ(B(x,r_0))) / (log r_i - log r_0)` against the
//! coarsest radius `r_0` of the ladder. The liminf proxy is the smallest of
//! these slopes, the limsup proxy the largest, and the slope mode is the
//! least-squares line through the anchor, which is a weighted average of the
//! same slopes and so always lies between the two proxies.

use serde::{Deserialize, Serialize};

use crate::configurations::{count_triples_fft, extract_spectrum, growth_exponent, GrowthFit};
use crate::error::{contract, Error, Result};
use crate::measures::{fourier_coefficients, MeasureModel};
use crate::rng;

pub const DEFAULT_QUANTILE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LiminfProxy,
    LimsupProxy,
    Slope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub radii_range: (f64, f64),
    pub fit_residual: f64,
    pub mode: Mode,
}

/// Geometric ladder of `count` radii from `r_max` down to `r_min`.
pub fn geometric_radii(r_max: f64, r_min: f64, count: usize) -> Vec<f64> {
    let q = (r_min / r_max).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| r_max * q.powi(i as i32)).collect()
}

/// `2^{-6}` down to `2^{-40}` in steps of `2^{-2.5}`, clipped to the model's resolution.
pub fn default_radii(measure: &MeasureModel) -> Vec<f64> {
    let floor = 2.0 * measure.resolution_floor();
    let (mut r_max, r_min) = (2f64.powi(-6), 2f64.powi(-40).max(floor));
    if r_min > r_max / 2f64.powf(2.5 * 7.0) {
        r_max = 2f64.powi(-2);
    }
    let octaves = (r_max / r_min).log2();
    let count = ((octaves / 2.5).ceil() as usize + 1).max(8);
    geometric_radii(r_max, r_min, count)
}

/// Triadic ladder `3^{-k_0}, …, 3^{-k_1}`.
pub fn triadic_radii(k0: i32, k1: i32) -> Vec<f64> {
    (k0..=k1).map(|k| 3f64.powi(-k)).collect()
}

fn check_ladder(radii: &[f64]) -> Result<()> {
    if radii.len() < 8 {
        return Err(contract(format!("need at least 8 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(contract("radii must be positive and strictly decreasing"));
    }
    let ratios: Vec<f64> = radii.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if ratios.iter().any(|q| (q - mean).abs() > 1e-6 * mean) {
        return Err(contract("radii must form a geometric ladder"));
    }
    Ok(())
}

/// Proxy computation from precomputed masses (all positive).
pub fn dimension_from_masses(radii: &[f64], masses: &[f64], mode: Mode) -> Result<DimensionEstimate> {
    check_ladder(radii)?;
    if masses.len() != radii.len() {
        return Err(contract("one mass per radius"));
    }
    if let Some(i) = masses.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::UndefinedLog(format!("zero mass at radius {:e}", radii[i])));
    }
    let start = radii.len() / 2;
    let (r0, m0) = (radii[0].ln(), masses[0].ln());
    let d: Vec<f64> = radii[start..].iter().map(|r| r.ln() - r0).collect();
    let e: Vec<f64> = masses[start..].iter().map(|m| m.ln() - m0).collect();
    let slopes: Vec<f64> = d.iter().zip(&e).map(|(a, b)| b / a).collect();
    let sdd: f64 = d.iter().map(|v| v * v).sum();
    let anchored = d.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / sdd;
    let fit_residual =
        (d.iter().zip(&e).map(|(a, b)| (b - anchored * a).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    let value = match mode {
        Mode::LiminfProxy => slopes.iter().copied().fold(f64::INFINITY, f64::min),
        Mode::LimsupProxy => slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Mode::Slope => anchored,
    };
    Ok(DimensionEstimate { value, radii_range: (radii[radii.len() - 1], radii[0]), fit_residual, mode })
}

pub fn local_dimension(measure: &MeasureModel, x: f64, radii: &[f64], mode: Mode) -> Result<DimensionEstimate> {
    check_ladder(radii)?;
    let top = measure.ball_mass(x, radii[0])?;
    if !(top > 0.0) {
        return Err(Error::NotInSupport { x, radius: radii[0], mass: top });
    }
    let masses = radii.iter().map(|&r| measure.ball_mass(x, r)).collect::<Result<Vec<_>>>()?;
    if let Some(i) = masses.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::NotInSupport { x, radius: radii[i], mass: masses[i] });
    }
    dimension_from_masses(radii, &masses, mode)
}

/// Lower nearest-rank quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[((q * (v.len() - 1) as f64).floor() as usize).min(v.len() - 1)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDimension {
    pub estimate: DimensionEstimate,
    pub quantile: f64,
    pub sample_count: usize,
    pub median: f64,
    pub seed: u64,
}

/// Low quantile of liminf proxies at `μ`-distributed points.
pub fn measure_dimension(measure: &MeasureModel, sample_count: usize, seed: u64, radii: &[f64]) -> Result<MeasureDimension> {
    measure_dimension_at(measure, sample_count, seed, radii, DEFAULT_QUANTILE)
}

pub fn measure_dimension_at(
    measure: &MeasureModel,
    sample_count: usize,
    seed: u64,
    radii: &[f64],
    q: f64,
) -> Result<MeasureDimension> {
    if !measure.can_sample() {
        return Err(Error::Unsupported(format!("no sampler for {}", measure.label())));
    }
    if sample_count == 0 {
        return Err(contract("sample_count must be positive"));
    }
    check_ladder(radii)?;
    let mut values = Vec::with_capacity(sample_count);
    let mut residual = 0.0f64;
    for i in 0..sample_count {
        let x = measure.sample(&mut rng::stream(seed, i as u64))?;
        let est = local_dimension(measure, x, radii, Mode::LiminfProxy)?;
        residual = residual.max(est.fit_residual);
        values.push(est.value);
    }
    let value = quantile(&values, q);
    let median = quantile(&values, 0.5);
    Ok(MeasureDimension {
        estimate: DimensionEstimate {
            value,
            radii_range: (radii[radii.len() - 1], radii[0]),
            fit_residual: residual,
            mode: Mode::LiminfProxy,
        },
        quantile: q,
        sample_count,
        median,
        seed,
    })
}

/// `(2 - β)/3`.
pub fn corollary_bound(beta: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&beta) {
        return Err(contract(format!("β = {beta} outside [0, 2]")));
    }
    Ok((2.0 - beta) / 3.0)
}

/// `n/(k+1)`.
pub fn theorem_bound(n: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(contract("n and k must be at least 1"));
    }
    Ok(n as f64 / (k as f64 + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub measure: String,
    pub tau: f64,
    pub windows: Vec<u64>,
    pub counts: Vec<u64>,
    pub beta_hat: f64,
    pub growth: GrowthFit,
    pub d_hat: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub radii: Vec<f64>,
    pub seed: u64,
}

/// Compares the estimated dimension with the bound implied by the 3AP growth of the spectrum.
pub fn certify_corollary(
    measure: &MeasureModel,
    windows: &[u64],
    tau: f64,
    sample_count: usize,
    seed: u64,
    radii: &[f64],
    tolerance: f64,
) -> Result<CorollaryReport> {
    let top = *windows.iter().max().ok_or_else(|| contract("windows must be non-empty"))?;
    let table = fourier_coefficients(measure, top as usize)?;
    let spectrum = extract_spectrum(&table, tau)?;
    let counts = windows
        .iter()
        .map(|&n| count_triples_fft(&spectrum.restrict(n as usize)))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(u64, u64)> = windows.iter().copied().zip(counts.iter().copied()).collect();
    let growth = growth_exponent(&pairs)?;
    let beta_hat = growth.beta;
    let bound = corollary_bound(beta_hat.clamp(0.0, 2.0))?;
    let d_hat = measure_dimension(measure, sample_count, seed, radii)?.estimate.value;
    Ok(CorollaryReport {
        measure: measure.label(),
        tau,
        windows: windows.to_vec(),
        counts,
        beta_hat,
        growth,
        d_hat,
        bound,
        tolerance,
        pass: d_hat + tolerance >= bound,
        radii: radii.to_vec(),
        seed,
    })
}
