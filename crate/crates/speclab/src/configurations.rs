//! Thresholded spectra and the additive configurations inside them.
//!
//! `t_n(S)` counts pairs `(m, r)` with `m, m+r, m+2r ∈ S ∩ [-n, n]`,
//! including `r = 0`. Equivalently it counts pairs `(a, c) ∈ S²` of equal
//! parity whose midpoint lies in `S`, which is what both counters use.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::measures::FourierTable;

/// Largest integer (times a safety factor) for which FFT rounding is trusted.
const SAFE_INTEGER_BOUND: f64 = (1u64 << 50) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWindow {
    pub n: usize,
    members: Vec<i64>,
    pub threshold: f64,
}

impl SpectrumWindow {
    pub fn new(n: usize, members: impl IntoIterator<Item = i64>, threshold: f64) -> Result<Self> {
        let mut members: Vec<i64> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&m) = members.iter().find(|m| m.unsigned_abs() as usize > n) {
            return Err(contract(format!("member {m} outside [-{n}, {n}]")));
        }
        Ok(Self { n, members, threshold })
    }

    pub fn full(n: usize) -> Self {
        let k = n as i64;
        Self { n, members: (-k..=k).collect(), threshold: 0.0 }
    }

    pub fn members(&self) -> &[i64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, m: i64) -> bool {
        self.members.binary_search(&m).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.members.iter().all(|&m| self.contains(-m))
    }

    pub fn negated(&self) -> Self {
        Self { n: self.n, members: self.members.iter().rev().map(|m| -m).collect(), threshold: self.threshold }
    }

    /// The members inside a smaller window.
    pub fn restrict(&self, n: usize) -> Self {
        let k = n as i64;
        Self {
            n,
            members: self.members.iter().copied().filter(|m| m.abs() <= k).collect(),
            threshold: self.threshold,
        }
    }

    fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; 2 * self.n + 1];
        for &m in &self.members {
            ind[(m + self.n as i64) as usize] = true;
        }
        ind
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m"])?;
        for m in &self.members {
            w.write_record([m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, n: usize, threshold: f64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut members = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let m = rec
                .get(0)
                .ok_or_else(|| contract("empty CSV row"))?
                .trim()
                .parse::<i64>()
                .map_err(|e| contract(format!("bad spectrum entry: {e}")))?;
            members.push(m);
        }
        Self::new(n, members, threshold)
    }
}

pub fn extract_spectrum(table: &FourierTable, tau: f64) -> Result<SpectrumWindow> {
    if !(tau >= 0.0) {
        return Err(contract("threshold must be non-negative"));
    }
    let members = table.iter().filter(|(_, c)| c.norm() > tau).map(|(m, _)| m);
    SpectrumWindow::new(table.window(), members, tau)
}

pub fn count_triples_brute(s: &SpectrumWindow) -> u64 {
    let ind = s.indicator();
    let off = s.n as i64;
    let mut count = 0u64;
    for &a in s.members() {
        for &c in s.members() {
            if (a - c) % 2 == 0 && ind[((a + c) / 2 + off) as usize] {
                count += 1;
            }
        }
    }
    count
}

/// Same count as [`count_triples_brute`], through `Σ_b 1_S(b)(1_S ∗ 1_S)(2b)`.
pub fn count_triples_fft(s: &SpectrumWindow) -> Result<u64> {
    if s.is_empty() {
        return Ok(0);
    }
    let width = 2 * s.n + 1;
    let len = (4 * s.n + 3).next_power_of_two();
    if (width as f64) * (len as f64) > SAFE_INTEGER_BOUND {
        return Err(Error::Capacity(format!(
            "window {} too large for exact integer recovery (length {len})",
            s.n
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for &m in s.members() {
        buf[(m + s.n as i64) as usize] = Complex64::new(1.0, 0.0);
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = *z * *z;
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    let mut total = 0u64;
    for &b in s.members() {
        // Shifted indices i = a + n, j = c + n satisfy i + j = 2(b + n).
        let v = buf[2 * (b + s.n as i64) as usize].re * scale;
        let r = v.round();
        if (v - r).abs() > 0.25 {
            return Err(Error::Capacity(format!("FFT rounding residual {} too large", (v - r).abs())));
        }
        total += r as u64;
    }
    Ok(total)
}

/// Pairs with `r = 0` plus pairs whose middle term is 0, `(0,0)` counted once.
pub fn trivial_triple_count(s: &SpectrumWindow) -> u64 {
    let constant = s.len() as u64;
    if !s.contains(0) {
        return constant;
    }
    let symmetric = s.members().iter().filter(|&&r| r != 0 && s.contains(-r)).count() as u64;
    constant + symmetric
}

pub fn has_nontrivial_progression(s: &SpectrumWindow) -> bool {
    count_triples_brute(s) > trivial_triple_count(s)
}

/// Closed form `t_n([-n, n]) = 2n² + 2n + 1`.
pub fn full_interval_count(n: u64) -> u64 {
    2 * n * n + 2 * n + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub beta: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub max_residual: f64,
    pub points: Vec<(u64, u64)>,
}

/// Least-squares slope of `log t_n` against `log n`.
pub fn growth_exponent(counts: &[(u64, u64)]) -> Result<GrowthFit> {
    if counts.len() < 4 {
        return Err(contract(format!("need at least 4 samples, got {}", counts.len())));
    }
    if counts.windows(2).any(|w| w[1].0 <= w[0].0) || counts[0].0 == 0 {
        return Err(contract("n must be positive and strictly increasing"));
    }
    if let Some(&(n, _)) = counts.iter().find(|c| c.1 == 0) {
        return Err(Error::UndefinedLog(format!("t_n = 0 at n = {n}")));
    }
    let xs: Vec<f64> = counts.iter().map(|c| (c.0 as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.1 as f64).ln()).collect();
    let (beta, intercept) = least_squares(&xs, &ys);
    let res: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + beta * x)).collect();
    let residual_rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let max_residual = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok(GrowthFit { beta, intercept, residual_rms, max_residual, points: counts.to_vec() })
}

/// Slope and intercept of the least-squares line through `(x, y)`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// The matrices `B_1, …, B_k` of a configuration `{x, B_1 x, …, B_k x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct ConfigFamily {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl ConfigFamily {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| contract("family needs at least one matrix"))?;
        let dim = first.nrows();
        for m in &matrices {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(contract("all matrices must be square of the same size"));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(contract("matrix entries must be finite"));
            }
        }
        Ok(Self { dim, matrices })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrices: vec![DMatrix::identity(dim, dim)] }
    }

    pub fn scalar(values: &[f64]) -> Self {
        Self { dim: 1, matrices: values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// The `kn × n` row-concatenation `𝔹`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut out = DMatrix::zeros(self.k() * n, n);
        for (j, m) in self.matrices.iter().enumerate() {
            out.view_mut((j * n, 0), (n, n)).copy_from(m);
        }
        out
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for ConfigFamily {
    type Error = Error;
    fn try_from(raw: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let mats = raw
            .into_iter()
            .map(|rows| {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(contract("matrices must be square"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }
}

impl From<ConfigFamily> for Vec<Vec<Vec<f64>>> {
    fn from(f: ConfigFamily) -> Self {
        f.matrices
            .iter()
            .map(|m| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridHeader {
    dim: usize,
    half_width: f64,
    cells_per_axis: usize,
}

/// Indicator of a spectrum on a uniform grid of `[-L, L]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpectrum {
    dim: usize,
    half_width: f64,
    cells_per_axis: usize,
    indicator: Vec<bool>,
}

impl GridSpectrum {
    pub fn from_fn(dim: usize, half_width: f64, cells_per_axis: usize, f: impl Fn(&[f64]) -> bool) -> Result<Self> {
        if dim == 0 || cells_per_axis == 0 || !(half_width > 0.0) {
            return Err(contract("grid needs dim ≥ 1, cells ≥ 1 and L > 0"));
        }
        let total = cells_per_axis
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 30)
            .ok_or_else(|| Error::Capacity("grid has too many cells".into()))?;
        let mut g = Self { dim, half_width, cells_per_axis, indicator: Vec::with_capacity(total) };
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            g.center_into(idx, &mut x);
            g.indicator.push(f(&x));
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn members(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }

    fn center_into(&self, mut idx: usize, x: &mut [f64]) {
        let h = self.spacing();
        for xi in x.iter_mut() {
            let i = idx % self.cells_per_axis;
            idx /= self.cells_per_axis;
            *xi = -self.half_width + (i as f64 + 0.5) * h;
        }
    }

    /// Index of the cell containing `x`, or `None` outside the grid.
    pub fn nearest_cell(&self, x: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &xi in x {
            let i = ((xi + self.half_width) / h).floor();
            if !(i >= 0.0 && i < self.cells_per_axis as f64) {
                return None;
            }
            idx += i as usize * stride;
            stride *= self.cells_per_axis;
        }
        Some(idx)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.nearest_cell(x).is_some_and(|i| self.indicator[i])
    }

    /// JSON header line followed by one byte per cell.
    pub fn write_mask<W: Write>(&self, mut out: W) -> Result<()> {
        let header = GridHeader { dim: self.dim, half_width: self.half_width, cells_per_axis: self.cells_per_axis };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let bytes: Vec<u8> = self.indicator.iter().map(|&b| b as u8).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_mask<R: BufRead>(mut input: R) -> Result<Self> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let h: GridHeader = serde_json::from_str(line.trim())?;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let total = h.cells_per_axis.pow(h.dim as u32);
        if bytes.len() != total {
            return Err(contract(format!("mask has {} cells, header implies {total}", bytes.len())));
        }
        Ok(Self {
            dim: h.dim,
            half_width: h.half_width,
            cells_per_axis: h.cells_per_axis,
            indicator: bytes.into_iter().map(|b| b != 0).collect(),
        })
    }
}

/// Count of cells `ξ` in the grid spectrum with every `B_i ξ` also in it.
pub fn count_b_configurations(g: &GridSpectrum, fam: &ConfigFamily) -> Result<(u64, f64)> {
    if fam.dim() != g.dim() {
        return Err(contract(format!("family acts on ℝ^{} but grid is ℝ^{}", fam.dim(), g.dim())));
    }
    let n = g.dim();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut count = 0u64;
    for idx in 0..g.indicator.len() {
        if !g.indicator[idx] {
            continue;
        }
        g.center_into(idx, &mut x);
        let all = fam.matrices().iter().all(|b| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..n).map(|j| b[(i, j)] * x[j]).sum();
            }
            g.contains(&y)
        });
        if all {
            count += 1;
        }
    }
    Ok((count, count as f64 * g.cell_volume()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{fourier_coefficients, MeasureModel, RieszProductMeasure};
    use proptest::prelude::*;

    fn set(n: usize, m: &[i64]) -> SpectrumWindow {
        SpectrumWindow::new(n, m.iter().copied(), 0.0).unwrap()
    }

    /// Literal definition: loop over (m, r).
    fn count_by_definition(s: &SpectrumWindow) -> u64 {
        let n = s.n as i64;
        let mut c = 0;
        for m in -n..=n {
            for r in -2 * n..=2 * n {
                if s.contains(m) && s.contains(m + r) && s.contains(m + 2 * r) {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn spectra_of_simple_measures() {
        let t = fourier_coefficients(&MeasureModel::Lebesgue, 10).unwrap();
        assert_eq!(extract_spectrum(&t, 0.0).unwrap().members(), &[0]);
        let d = fourier_coefficients(&MeasureModel::dirac(), 5).unwrap();
        assert_eq!(extract_spectrum(&d, 0.0).unwrap(), SpectrumWindow::full(5));
    }

    #[test]
    fn riesz_spectrum_is_signed_sums() {
        let r = MeasureModel::Riesz(RieszProductMeasure::new(vec![4, 16, 64], vec![1.0; 3]).unwrap());
        let s = extract_spectrum(&fourier_coefficients(&r, 100).unwrap(), 0.0).unwrap();
        let mut expect = vec![0i64];
        for v in [4i64, 16, 64, 12, 20, 48, 80, 60, 68, 44, 52, 76, 84] {
            expect.push(v);
            expect.push(-v);
        }
        expect.sort();
        assert_eq!(s.members(), expect.as_slice());
        assert!(s.is_symmetric());
    }

    #[test]
    fn small_counts() {
        assert_eq!(count_triples_brute(&set(1, &[-1, 0, 1])), 5);
        assert_eq!(count_triples_brute(&SpectrumWindow::full(2)), 13);
        assert_eq!(count_triples_brute(&set(16, &[1, 4, 16])), 3);
        assert_eq!(count_triples_fft(&set(1, &[-1, 0, 1])).unwrap(), 5);
        assert_eq!(count_triples_fft(&set(7, &[])).unwrap(), 0);
    }

    #[test]
    fn full_interval_closed_form() {
        for n in [1u64, 2, 3, 10, 64] {
            let s = SpectrumWindow::full(n as usize);
            assert_eq!(count_triples_brute(&s), full_interval_count(n));
            assert_eq!(count_triples_fft(&s).unwrap(), full_interval_count(n));
            assert_eq!(count_by_definition(&s), full_interval_count(n));
            assert_eq!(trivial_triple_count(&s), 4 * n + 1);
        }
    }

    #[test]
    fn trivial_counts() {
        assert_eq!(trivial_triple_count(&set(1, &[-1, 0, 1])), 5);
        assert_eq!(trivial_triple_count(&set(8, &[2, 5, 8])), 3);
        assert!(!has_nontrivial_progression(&set(1, &[-1, 0, 1])));
        assert!(has_nontrivial_progression(&set(8, &[2, 5, 8])));
    }

    #[test]
    fn growth_of_closed_forms() {
        let full: Vec<(u64, u64)> = [64u64, 128, 256, 512].iter().map(|&n| (n, full_interval_count(n))).collect();
        assert!((growth_exponent(&full).unwrap().beta - 2.0).abs() < 0.02);
        let constant: Vec<(u64, u64)> = [4u64, 8, 16, 32].iter().map(|&n| (n, 7)).collect();
        assert!(growth_exponent(&constant).unwrap().beta.abs() < 1e-12);
        let linear: Vec<(u64, u64)> = [4u64, 8, 16, 32, 64].iter().map(|&n| (n, 5 * n)).collect();
        assert!((growth_exponent(&linear).unwrap().beta - 1.0).abs() < 1e-12);
        let zero = [(1u64, 1u64), (2, 0), (3, 1), (4, 1)];
        assert!(matches!(growth_exponent(&zero), Err(Error::UndefinedLog(_))));
        assert!(growth_exponent(&full[..3]).is_err());
    }

    #[test]
    fn capacity_error_for_huge_windows() {
        let s = SpectrumWindow::new(1 << 26, [0i64], 0.0).unwrap();
        assert!(matches!(count_triples_fft(&s), Err(Error::Capacity(_))));
    }

    #[test]
    fn disk_symmetric_configurations() {
        let g = GridSpectrum::from_fn(2, 2.0, 512, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap();
        let minus = ConfigFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        let (_, area) = count_b_configurations(&g, &minus).unwrap();
        assert!((area - std::f64::consts::PI).abs() < 0.05, "{area}");
        let (count, _) = count_b_configurations(&g, &ConfigFamily::identity(2)).unwrap();
        assert_eq!(count as usize, g.members());
    }

    #[test]
    fn half_annulus_has_no_negated_partner() {
        let g = GridSpectrum::from_fn(2, 2.0, 256, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (1.0..=4.0).contains(&r2) && x[0] > 0.0
        })
        .unwrap();
        let minus = ConfigFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        assert_eq!(count_b_configurations(&g, &minus).unwrap().0, 0);
        assert!(count_b_configurations(&g, &ConfigFamily::identity(3)).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let g = GridSpectrum::from_fn(2, 1.5, 17, |x| x[0] > x[1]).unwrap();
        let mut buf = Vec::new();
        g.write_mask(&mut buf).unwrap();
        assert_eq!(GridSpectrum::read_mask(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn family_json_and_stacking() {
        let f: ConfigFamily = serde_json::from_str("[[[1,2],[3,4]],[[0,1],[1,0]]]").unwrap();
        assert_eq!(f.k(), 2);
        let s = f.stacked();
        assert_eq!((s.nrows(), s.ncols()), (4, 2));
        assert_eq!(s[(2, 1)], 1.0);
        assert_eq!(s[(1, 0)], 3.0);
        assert!(serde_json::from_str::<ConfigFamily>("[[[1,2],[3,4]],[[1]]]").is_err());
    }

    fn arb_set(max_n: usize) -> impl Strategy<Value = SpectrumWindow> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), 2 * n + 1).prop_map(move |bits| {
                let members = bits.iter().enumerate().filter(|b| *b.1).map(|(i, _)| i as i64 - n as i64);
                SpectrumWindow::new(n, members, 0.0).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn fft_matches_brute(s in arb_set(300)) {
            prop_assert_eq!(count_triples_fft(&s).unwrap(), count_triples_brute(&s));
        }

        #[test]
        fn brute_matches_definition(s in arb_set(20)) {
            prop_assert_eq!(count_triples_brute(&s), count_by_definition(&s));
        }

        #[test]
        fn negation_symmetry(s in arb_set(200)) {
            prop_assert_eq!(count_triples_brute(&s.negated()), count_triples_brute(&s));
        }

        #[test]
        fn monotone_and_bounded(s in arb_set(100), extra in proptest::collection::vec(-100i64..=100, 0..10)) {
            let n = s.n as i64;
            let bigger = SpectrumWindow::new(
                s.n,
                s.members().iter().copied().chain(extra.into_iter().filter(|e| e.abs() <= n)),
                0.0,
            ).unwrap();
            prop_assert!(count_triples_brute(&s) <= count_triples_brute(&bigger));
            prop_assert!(count_triples_brute(&bigger) <= full_interval_count(s.n as u64));
            prop_assert!(trivial_triple_count(&s) <= 4 * s.n as u64 + 1);
            prop_assert!(trivial_triple_count(&s) <= count_triples_brute(&s));
        }
    }
}
