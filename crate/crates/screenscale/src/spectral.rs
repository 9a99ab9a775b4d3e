//! Offline shift-offset training.
//!
//! Averaged DFT energy densities of 16x16 sample blocks weight a Fourier
//! error kernel to estimate the interpolation error of the shift-linear
//! scheme as a function of its offset. A polynomial fit over a tau sweep
//! locates the minimum per content type and direction.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::ContentType;
use crate::raster::{load_image, Plane, RasterError, BLOCK_SIZE};
use crate::sli::{AxisOffsets, Direction, OffsetTable};

/// DFT bins per axis; blocks are SPECTRUM_SIZE x SPECTRUM_SIZE.
pub const SPECTRUM_SIZE: usize = BLOCK_SIZE;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("block {index} has {got} values, expected {}", SPECTRUM_SIZE * SPECTRUM_SIZE)]
    BadBlockSize { index: usize, got: usize },
    #[error("spectrum has {got} bins, expected {expected}")]
    BadSpectrumLength { got: usize, expected: usize },
    #[error("no blocks supplied")]
    EmptyCorpus,
    #[error("corpus has no {0} blocks")]
    MissingLabel(ContentType),
    #[error("angular frequency {0} outside [-pi, pi]")]
    FrequencyOutOfRange(f64),
    #[error("shift offset {0} outside [0, 0.5)")]
    OffsetOutOfRange(f64),
    #[error("weighted energy sum {0} is negative beyond rounding tolerance")]
    NegativeEnergy(f64),
    #[error("need at least {need} samples for a degree-{degree} fit, got {got}")]
    InsufficientSamples {
        need: usize,
        got: usize,
        degree: usize,
    },
    #[error("polynomial degree must be at least 2, got {0}")]
    DegreeTooLow(usize),
    #[error("rank-deficient fit: sample positions do not span the degree")]
    RankDeficient,
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
    #[error("manifest line {line}: {source}")]
    ManifestLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("block at ({x}, {y}) does not fit in {path} ({w}x{h})")]
    BlockOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        path: String,
    },
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Signed angular frequency of DFT bin `k`: 2*pi*k/16 folded into [-pi, pi).
pub fn bin_angular_frequency(k: usize) -> f64 {
    let signed = if k < SPECTRUM_SIZE / 2 {
        k as f64
    } else {
        k as f64 - SPECTRUM_SIZE as f64
    };
    2.0 * std::f64::consts::PI * signed / SPECTRUM_SIZE as f64
}

/// Averaged squared-magnitude DFT spectrum of a block corpus: the full 2-D
/// grid plus its two 1-D directional reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDensity {
    /// 16x16 row-major, indexed [k_v * 16 + k_h].
    grid: Vec<f64>,
    /// Mean over the vertical frequency axis; weights horizontal passes.
    horizontal: Vec<f64>,
    /// Mean over the horizontal frequency axis; weights vertical passes.
    vertical: Vec<f64>,
    block_count: usize,
}

impl EnergyDensity {
    /// Build from an explicit 2-D grid (row-major, 256 bins).
    pub fn from_grid(grid: Vec<f64>, block_count: usize) -> Result<Self, SpectralError> {
        if grid.len() != SPECTRUM_SIZE * SPECTRUM_SIZE {
            return Err(SpectralError::BadSpectrumLength {
                got: grid.len(),
                expected: SPECTRUM_SIZE * SPECTRUM_SIZE,
            });
        }
        if block_count == 0 {
            return Err(SpectralError::EmptyCorpus);
        }
        let mut horizontal = vec![0.0; SPECTRUM_SIZE];
        let mut vertical = vec![0.0; SPECTRUM_SIZE];
        for kv in 0..SPECTRUM_SIZE {
            for kh in 0..SPECTRUM_SIZE {
                let e = grid[kv * SPECTRUM_SIZE + kh];
                horizontal[kh] += e;
                vertical[kv] += e;
            }
        }
        for bin in horizontal.iter_mut().chain(vertical.iter_mut()) {
            *bin /= SPECTRUM_SIZE as f64;
        }
        Ok(Self {
            grid,
            horizontal,
            vertical,
            block_count,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn directional(&self, direction: Direction) -> &[f64] {
        match direction {
            Direction::Horizontal => &self.horizontal,
            Direction::Vertical => &self.vertical,
        }
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    /// Same shape with every bin multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.iter().map(|v| v * factor).collect(),
            horizontal: self.horizontal.iter().map(|v| v * factor).collect(),
            vertical: self.vertical.iter().map(|v| v * factor).collect(),
            block_count: self.block_count,
        }
    }
}

/// Averaged energy density of a set of 16x16 blocks: unnormalized forward
/// 2-D DFT, squared magnitudes, mean over blocks. The DC bin is retained;
/// the error kernel vanishes at DC, so it never contributes to eta.
pub fn block_energy_density(blocks: &[Vec<f64>]) -> Result<EnergyDensity, SpectralError> {
    if blocks.is_empty() {
        return Err(SpectralError::EmptyCorpus);
    }
    const N: usize = SPECTRUM_SIZE;
    for (index, block) in blocks.iter().enumerate() {
        if block.len() != N * N {
            return Err(SpectralError::BadBlockSize {
                index,
                got: block.len(),
            });
        }
    }
    // Twiddle table: W[k*N + n] = exp(-2i pi k n / N).
    let mut twiddle = Vec::with_capacity(N * N);
    for k in 0..N {
        for n in 0..N {
            let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / N as f64;
            twiddle.push(Complex64::from_polar(1.0, angle));
        }
    }
    let mut grid = vec![0.0f64; N * N];
    let mut rows = vec![Complex64::ZERO; N * N];
    for block in blocks {
        // Row DFTs, then column DFTs of the row spectra.
        for y in 0..N {
            for k in 0..N {
                let mut acc = Complex64::ZERO;
                for x in 0..N {
                    acc += block[y * N + x] * twiddle[k * N + x];
                }
                rows[y * N + k] = acc;
            }
        }
        for kh in 0..N {
            for kv in 0..N {
                let mut acc = Complex64::ZERO;
                for y in 0..N {
                    acc += rows[y * N + kh] * twiddle[kv * N + y];
                }
                grid[kv * N + kh] += acc.norm_sqr();
            }
        }
    }
    for bin in &mut grid {
        *bin /= blocks.len() as f64;
    }
    // Flush DFT cancellation residue: it sits ~15 orders below any real
    // content and would otherwise keep degenerate corpora from registering
    // as exactly zero off their peaks.
    let peak = grid.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak > 0.0 {
        for bin in &mut grid {
            if *bin < peak * 1e-18 {
                *bin = 0.0;
            }
        }
    }
    EnergyDensity::from_grid(grid, blocks.len())
}

fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        let p = std::f64::consts::PI * u;
        p.sin() / p
    }
}

/// Fourier error kernel of shift-linear interpolation at offset `tau` and
/// angular frequency `omega`. Zero at DC for every valid offset.
pub fn error_kernel(tau: f64, omega: f64) -> Result<f64, SpectralError> {
    if !tau.is_finite() || !(0.0..0.5).contains(&tau) {
        return Err(SpectralError::OffsetOutOfRange(tau));
    }
    if !omega.is_finite() || omega.abs() > std::f64::consts::PI + 1e-12 {
        return Err(SpectralError::FrequencyOutOfRange(omega));
    }
    // 1 - tau + tau e^{-jw}, written as 1 - tau(1 - e^{-jw}) so the kernel
    // vanishes bit-exactly at DC for every offset.
    let one_minus_exp = Complex64::new(1.0 - omega.cos(), omega.sin());
    let denom = Complex64::new(1.0, 0.0) - tau * one_minus_exp;
    let s = sinc(omega / (2.0 * std::f64::consts::PI));
    let ratio = Complex64::from_polar(1.0, -omega * tau) / denom;
    Ok(1.0 + (2.0 + omega.cos()) / (3.0 * denom.norm_sqr()) - 2.0 * s * s * ratio.re)
}

/// Directional interpolation error: eta = sqrt(sum_k S(k) E_tau(w_k) / 2pi)
/// over the 16 bin frequencies, unit pixel interval.
pub fn interpolation_error_1d(bins: &[f64], tau: f64) -> Result<f64, SpectralError> {
    if bins.len() != SPECTRUM_SIZE {
        return Err(SpectralError::BadSpectrumLength {
            got: bins.len(),
            expected: SPECTRUM_SIZE,
        });
    }
    let mut sum = 0.0;
    for (k, &s) in bins.iter().enumerate() {
        sum += s * error_kernel(tau, bin_angular_frequency(k))?;
    }
    eta_from_sum(sum)
}

/// Full 2-D interpolation error with independent offsets per direction:
/// eta = sqrt(sum |F|^2 E_tau_h(w_h) E_tau_v(w_v) / 2pi).
pub fn interpolation_error_2d(
    density: &EnergyDensity,
    tau_h: f64,
    tau_v: f64,
) -> Result<f64, SpectralError> {
    let mut kernel_h = [0.0; SPECTRUM_SIZE];
    let mut kernel_v = [0.0; SPECTRUM_SIZE];
    for k in 0..SPECTRUM_SIZE {
        kernel_h[k] = error_kernel(tau_h, bin_angular_frequency(k))?;
        kernel_v[k] = error_kernel(tau_v, bin_angular_frequency(k))?;
    }
    let mut sum = 0.0;
    for kv in 0..SPECTRUM_SIZE {
        for kh in 0..SPECTRUM_SIZE {
            sum += density.grid[kv * SPECTRUM_SIZE + kh] * kernel_h[kh] * kernel_v[kv];
        }
    }
    eta_from_sum(sum)
}

fn eta_from_sum(sum: f64) -> Result<f64, SpectralError> {
    if sum < -1e-12 {
        return Err(SpectralError::NegativeEnergy(sum));
    }
    Ok((sum.max(0.0) / (2.0 * std::f64::consts::PI)).sqrt())
}

/// Evaluate a polynomial with ascending coefficients at `x`.
pub fn polyval(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Least-squares polynomial fit with the minimizer of the fitted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Ascending coefficients, length degree + 1.
    pub coefficients: Vec<f64>,
    pub tau_star: f64,
    /// The fitted minimum sat on the span boundary, so `tau_star` fell back
    /// to the best input sample.
    pub boundary_fallback: bool,
}

/// Fit a polynomial to (tau, eta) samples and locate its minimum over the
/// sampled span: dense evaluation at step 1e-4, then bisection on the
/// derivative around the best cell. A boundary minimum falls back to the
/// discrete-sample argmin.
pub fn fit_and_minimize(samples: &[(f64, f64)], degree: usize) -> Result<PolyFit, SpectralError> {
    if degree < 2 {
        return Err(SpectralError::DegreeTooLow(degree));
    }
    if samples.len() < degree + 1 {
        return Err(SpectralError::InsufficientSamples {
            need: degree + 1,
            got: samples.len(),
            degree,
        });
    }
    let coefficients = polyfit(samples, degree)?;
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);

    const STEP: f64 = 1e-4;
    let cells = ((hi - lo) / STEP).ceil() as usize;
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..=cells {
        let x = (lo + i as f64 * STEP).min(hi);
        let v = polyval(&coefficients, x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }

    if best_i == 0 || best_i == cells {
        // Boundary minimum: fall back to the best sampled point.
        let (mut tau_star, mut best) = samples[0];
        for &(x, y) in samples {
            if y < best {
                best = y;
                tau_star = x;
            }
        }
        return Ok(PolyFit {
            coefficients,
            tau_star,
            boundary_fallback: true,
        });
    }

    let derivative: Vec<f64> = coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect();
    let mut a = (lo + (best_i - 1) as f64 * STEP).max(lo);
    let mut b = (lo + (best_i + 1) as f64 * STEP).min(hi);
    let mut tau_star = lo + best_i as f64 * STEP;
    if polyval(&derivative, a) < 0.0 && polyval(&derivative, b) > 0.0 {
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if polyval(&derivative, mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        tau_star = 0.5 * (a + b);
    }
    Ok(PolyFit {
        coefficients,
        tau_star,
        boundary_fallback: false,
    })
}

/// Normal-equation least squares; small systems only (degree <= ~8).
fn polyfit(samples: &[(f64, f64)], degree: usize) -> Result<Vec<f64>, SpectralError> {
    let m = degree + 1;
    let mut power_sums = vec![0.0f64; 2 * degree + 1];
    let mut rhs = vec![0.0f64; m];
    for &(x, y) in samples {
        let mut p = 1.0;
        for (i, sum) in power_sums.iter_mut().enumerate() {
            *sum += p;
            if i < m {
                rhs[i] += y * p;
            }
            p *= x;
        }
    }
    let mut matrix = vec![0.0f64; m * m];
    for r in 0..m {
        for c in 0..m {
            matrix[r * m + c] = power_sums[r + c];
        }
    }
    solve_linear(&mut matrix, &mut rhs, m).ok_or(SpectralError::RankDeficient)
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_linear(matrix: &mut [f64], rhs: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let scale = matrix
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let pivot_row = (col..m)
            .max_by(|&a, &b| {
                matrix[a * m + col]
                    .abs()
                    .total_cmp(&matrix[b * m + col].abs())
            })
            .unwrap();
        if matrix[pivot_row * m + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..m {
                matrix.swap(col * m + c, pivot_row * m + c);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = matrix[col * m + col];
        for row in col + 1..m {
            let f = matrix[row * m + col] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in col..m {
                matrix[row * m + c] -= f * matrix[col * m + c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut solution = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut acc = rhs[row];
        for c in row + 1..m {
            acc -= matrix[row * m + c] * solution[c];
        }
        solution[row] = acc / matrix[row * m + row];
    }
    Some(solution)
}

/// One sampled and fitted error curve for a (content type, direction) pair.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorCurve {
    pub content: ContentType,
    pub direction: Direction,
    pub tau_grid: Vec<f64>,
    pub eta: Vec<f64>,
    /// Fitted polynomial evaluated on the grid.
    pub fitted: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub tau_star: f64,
    pub boundary_fallback: bool,
}

impl ErrorCurve {
    /// CSV rows of (tau, eta, fitted_eta).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,eta,fitted_eta\n");
        for i in 0..self.tau_grid.len() {
            out.push_str(&format!(
                "{:.6},{:.9},{:.9}\n",
                self.tau_grid[i], self.eta[i], self.fitted[i]
            ));
        }
        out
    }
}

/// Sweep grid and fit settings for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingParams {
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_step: f64,
    pub poly_degree: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self {
            tau_min: 0.0,
            tau_max: 0.4,
            tau_step: 0.005,
            poly_degree: 4,
        }
    }
}

impl TrainingParams {
    pub fn validate(&self) -> Result<(), SpectralError> {
        if !(self.tau_min >= 0.0 && self.tau_min < self.tau_max && self.tau_max <= 0.45) {
            return Err(SpectralError::InvalidParams(
                "need 0 <= tau_min < tau_max <= 0.45".into(),
            ));
        }
        if !(self.tau_step > 0.0) {
            return Err(SpectralError::InvalidParams("tau_step must be > 0".into()));
        }
        if self.grid().len() < self.poly_degree + 1 {
            return Err(SpectralError::InvalidParams(format!(
                "grid has {} points, need {} for degree {}",
                self.grid().len(),
                self.poly_degree + 1,
                self.poly_degree
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.tau_max - self.tau_min) / self.tau_step).round() as usize;
        (0..=n)
            .map(|i| (self.tau_min + i as f64 * self.tau_step).min(self.tau_max))
            .collect()
    }
}

/// Sweep, fit, and minimize one directional curve.
pub fn train_curve(
    bins: &[f64],
    content: ContentType,
    direction: Direction,
    params: &TrainingParams,
) -> Result<ErrorCurve, SpectralError> {
    let tau_grid = params.grid();
    let mut eta = Vec::with_capacity(tau_grid.len());
    for &tau in &tau_grid {
        eta.push(interpolation_error_1d(bins, tau)?);
    }
    let samples: Vec<(f64, f64)> = tau_grid.iter().copied().zip(eta.iter().copied()).collect();
    let fit = fit_and_minimize(&samples, params.poly_degree)?;
    let fitted = tau_grid
        .iter()
        .map(|&t| polyval(&fit.coefficients, t))
        .collect();
    Ok(ErrorCurve {
        content,
        direction,
        tau_grid,
        eta,
        fitted,
        coefficients: fit.coefficients,
        tau_star: fit.tau_star,
        boundary_fallback: fit.boundary_fallback,
    })
}

/// Trained offsets plus the four curves they came from.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingOutput {
    pub offsets: OffsetTable,
    pub curves: Vec<ErrorCurve>,
}

impl TrainingOutput {
    /// Any curve that hit the boundary fallback marks a degenerate corpus.
    pub fn degenerate(&self) -> bool {
        self.curves.iter().any(|c| c.boundary_fallback)
    }
}

/// Train all four offsets from luma block corpora.
pub fn train_offsets_from_blocks(
    text_blocks: &[Vec<f64>],
    pictorial_blocks: &[Vec<f64>],
    params: &TrainingParams,
) -> Result<TrainingOutput, SpectralError> {
    params.validate()?;
    if text_blocks.is_empty() {
        return Err(SpectralError::MissingLabel(ContentType::Text));
    }
    if pictorial_blocks.is_empty() {
        return Err(SpectralError::MissingLabel(ContentType::Pictorial));
    }
    let text_density = block_energy_density(text_blocks)?;
    let pictorial_density = block_energy_density(pictorial_blocks)?;
    let mut curves = Vec::with_capacity(4);
    for (content, density) in [
        (ContentType::Text, &text_density),
        (ContentType::Pictorial, &pictorial_density),
    ] {
        for direction in [Direction::Horizontal, Direction::Vertical] {
            curves.push(train_curve(
                density.directional(direction),
                content,
                direction,
                params,
            )?);
        }
    }
    let tau_of = |content: ContentType, direction: Direction| {
        curves
            .iter()
            .find(|c| c.content == content && c.direction == direction)
            .map(|c| c.tau_star)
            .expect("all four curves were just trained")
    };
    let offsets = OffsetTable {
        text: AxisOffsets {
            h: tau_of(ContentType::Text, Direction::Horizontal),
            v: tau_of(ContentType::Text, Direction::Vertical),
        },
        pictorial: AxisOffsets {
            h: tau_of(ContentType::Pictorial, Direction::Horizontal),
            v: tau_of(ContentType::Pictorial, Direction::Vertical),
        },
    };
    Ok(TrainingOutput { offsets, curves })
}

/// One labeled 16x16 block inside a corpus image; (x, y) is the top-left
/// pixel of the block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub image: PathBuf,
    pub x: usize,
    pub y: usize,
    pub label: ContentType,
}

/// Corpus description loaded from JSON lines; relative image paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpectralError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SpectralError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: CorpusEntry =
                serde_json::from_str(line).map_err(|source| SpectralError::ManifestLine {
                    line: i + 1,
                    source,
                })?;
            if entry.image.is_relative() {
                entry.image = base.join(&entry.image);
            }
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpectralError> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry).expect("corpus entries serialize");
            out.push(b'\n');
        }
        let mut file = fs::File::create(path).map_err(|source| SpectralError::Io {
            path: path.display().to_string(),
            source,
        })?;
        file.write_all(&out).map_err(|source| SpectralError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn label_count(&self, label: ContentType) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }
}

/// Load the corpus images, extract the labeled luma blocks, and train.
pub fn train_offsets(
    manifest: &CorpusManifest,
    params: &TrainingParams,
) -> Result<TrainingOutput, SpectralError> {
    let mut planes: BTreeMap<&Path, Plane> = BTreeMap::new();
    for entry in &manifest.entries {
        if !planes.contains_key(entry.image.as_path()) {
            let raster = load_image(&entry.image)?;
            planes.insert(entry.image.as_path(), raster.to_luma());
        }
    }
    let mut text_blocks = Vec::new();
    let mut pictorial_blocks = Vec::new();
    for entry in &manifest.entries {
        let plane = &planes[entry.image.as_path()];
        let block = plane.block16(entry.x, entry.y).map_err(|_| {
            SpectralError::BlockOutOfBounds {
                x: entry.x,
                y: entry.y,
                w: plane.width(),
                h: plane.height(),
                path: entry.image.display().to_string(),
            }
        })?;
        match entry.label {
            ContentType::Text => text_blocks.push(block),
            ContentType::Pictorial => pictorial_blocks.push(block),
        }
    }
    train_offsets_from_blocks(&text_blocks, &pictorial_blocks, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const EPS: f64 = 1e-9;

    #[test]
    fn kernel_vanishes_at_dc() {
        for i in 0..90 {
            let tau = i as f64 * 0.005;
            assert!(error_kernel(tau, 0.0).unwrap().abs() < 1e-12, "tau={}", tau);
        }
    }

    #[test]
    fn kernel_at_nyquist_zero_offset() {
        // Closed form: 4/3 - 8/pi^2.
        let want = 4.0 / 3.0 - 8.0 / (PI * PI);
        assert!((error_kernel(0.0, PI).unwrap() - want).abs() < EPS);
    }

    #[test]
    fn kernel_matches_high_precision_references() {
        // Frozen from a 40-digit evaluation of the kernel formula.
        assert!((error_kernel(0.21, PI).unwrap() - 0.8866157151026085).abs() < 1e-12);
        assert!((error_kernel(0.21, PI / 2.0).unwrap() - 0.019367246669620054).abs() < 1e-12);
        assert!((error_kernel(0.11, PI).unwrap() - 0.5701297460722909).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_nonnegative_and_even() {
        for ti in 0..=45 {
            let tau = ti as f64 * 0.01;
            for wi in -32..=32 {
                let omega = wi as f64 * PI / 32.0;
                let e = error_kernel(tau, omega).unwrap();
                assert!(e >= -1e-12, "E({}, {}) = {}", tau, omega, e);
                let mirrored = error_kernel(tau, -omega).unwrap();
                assert!((e - mirrored).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_rejects_domain_violations() {
        assert!(error_kernel(0.5, 1.0).is_err());
        assert!(error_kernel(-0.01, 1.0).is_err());
        assert!(error_kernel(0.2, 4.0).is_err());
    }

    #[test]
    fn constant_block_energy_all_at_dc() {
        let v = 3.0;
        let block = vec![v; 256];
        let d = block_energy_density(&[block]).unwrap();
        let dc = d.grid()[0];
        assert!((dc - (256.0 * v) * (256.0 * v)).abs() < 1e-6 * dc);
        for (i, &e) in d.grid().iter().enumerate().skip(1) {
            assert!(e < 1e-6 * dc, "bin {} = {}", i, e);
        }
    }

    #[test]
    fn cosine_block_energy_at_quarter_band() {
        // cos(2 pi 4 x / 16) along rows: 8 per row at bins 4 and 12, so the
        // 2-D spectrum is 128 at (k_h=4, k_v=0) and (12, 0).
        let mut block = Vec::with_capacity(256);
        for _y in 0..16 {
            for x in 0..16 {
                block.push((2.0 * PI * 4.0 * x as f64 / 16.0).cos());
            }
        }
        let d = block_energy_density(&[block]).unwrap();
        let want = 128.0 * 128.0;
        for kv in 0..16 {
            for kh in 0..16 {
                let e = d.grid()[kv * 16 + kh];
                if kv == 0 && (kh == 4 || kh == 12) {
                    assert!((e - want).abs() < 1e-6 * want, "bin ({},{})", kh, kv);
                } else {
                    assert!(e < 1e-6 * want, "bin ({},{}) = {}", kh, kv, e);
                }
            }
        }
    }

    #[test]
    fn density_of_union_is_mean_of_densities() {
        let a: Vec<f64> = (0..256).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = (0..256).map(|i| ((i * 3) % 11) as f64 * 2.0).collect();
        let da = block_energy_density(&[a.clone()]).unwrap();
        let db = block_energy_density(&[b.clone()]).unwrap();
        let dab = block_energy_density(&[a, b]).unwrap();
        for i in 0..256 {
            let want = 0.5 * (da.grid()[i] + db.grid()[i]);
            assert!((dab.grid()[i] - want).abs() < 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn dc_only_density_has_zero_error() {
        let mut bins = vec![0.0; 16];
        bins[0] = 123.0;
        for i in 0..40 {
            let tau = i as f64 * 0.01;
            assert!(interpolation_error_1d(&bins, tau).unwrap() < 1e-9);
        }
        assert_eq!(interpolation_error_1d(&vec![0.0; 16], 0.2).unwrap(), 0.0);
    }

    #[test]
    fn separable_density_factorizes() {
        let g: Vec<f64> = (0..16).map(|k| 1.0 + (k as f64 - 4.0).powi(2)).collect();
        let hbins: Vec<f64> = (0..16).map(|k| 2.0 + (k % 5) as f64).collect();
        let mut grid = vec![0.0; 256];
        for kv in 0..16 {
            for kh in 0..16 {
                grid[kv * 16 + kh] = g[kh] * hbins[kv];
            }
        }
        let density = EnergyDensity::from_grid(grid, 1).unwrap();
        let (tau_h, tau_v) = (0.15, 0.3);
        let eta = interpolation_error_2d(&density, tau_h, tau_v).unwrap();
        let sum_g: f64 = (0..16)
            .map(|k| g[k] * error_kernel(tau_h, bin_angular_frequency(k)).unwrap())
            .sum();
        let sum_h: f64 = (0..16)
            .map(|k| hbins[k] * error_kernel(tau_v, bin_angular_frequency(k)).unwrap())
            .sum();
        let want = (sum_g * sum_h / (2.0 * PI)).sqrt();
        assert!((eta - want).abs() < 1e-9 * want.max(1.0));
    }

    #[test]
    fn symmetric_density_is_transpose_invariant() {
        let mut grid = vec![0.0; 256];
        for kv in 0..16 {
            for kh in 0..16 {
                grid[kv * 16 + kh] = ((kh * kh + kv * kv) % 13) as f64;
            }
        }
        // Symmetrize.
        for kv in 0..16 {
            for kh in 0..kv {
                let mean = 0.5 * (grid[kv * 16 + kh] + grid[kh * 16 + kv]);
                grid[kv * 16 + kh] = mean;
                grid[kh * 16 + kv] = mean;
            }
        }
        let density = EnergyDensity::from_grid(grid.clone(), 1).unwrap();
        let mut transposed = vec![0.0; 256];
        for kv in 0..16 {
            for kh in 0..16 {
                transposed[kh * 16 + kv] = grid[kv * 16 + kh];
            }
        }
        let density_t = EnergyDensity::from_grid(transposed, 1).unwrap();
        let a = interpolation_error_2d(&density, 0.2, 0.2).unwrap();
        let b = interpolation_error_2d(&density_t, 0.2, 0.2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn quadratic_samples() -> Vec<(f64, f64)> {
        (0..=80)
            .map(|i| {
                let x = i as f64 * 0.005;
                (x, (x - 0.12) * (x - 0.12) + 0.5)
            })
            .collect()
    }

    #[test]
    fn fit_recovers_quadratic_vertex() {
        let fit = fit_and_minimize(&quadratic_samples(), 2).unwrap();
        assert!(!fit.boundary_fallback);
        assert!((fit.tau_star - 0.12).abs() < 1e-6, "got {}", fit.tau_star);
    }

    #[test]
    fn fit_recovers_quartic_minimum() {
        let samples: Vec<(f64, f64)> = (0..=80)
            .map(|i| {
                let x = i as f64 * 0.005;
                let d = x - 0.2;
                (x, d.powi(4) + 2.0 * d * d + 0.25)
            })
            .collect();
        let fit = fit_and_minimize(&samples, 4).unwrap();
        assert!(!fit.boundary_fallback);
        assert!((fit.tau_star - 0.2).abs() < 1e-4, "got {}", fit.tau_star);
    }

    #[test]
    fn monotone_samples_fall_back_to_last_point() {
        let samples: Vec<(f64, f64)> = (0..=80)
            .map(|i| {
                let x = i as f64 * 0.005;
                (x, 1.0 - x)
            })
            .collect();
        let fit = fit_and_minimize(&samples, 2).unwrap();
        assert!(fit.boundary_fallback);
        assert!((fit.tau_star - 0.4).abs() < 1e-12);
    }

    #[test]
    fn degenerate_abscissae_are_rank_deficient() {
        let samples = vec![(0.1, 1.0); 10];
        assert!(matches!(
            fit_and_minimize(&samples, 2),
            Err(SpectralError::RankDeficient)
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        let samples = vec![(0.0, 1.0), (0.1, 2.0), (0.2, 3.0)];
        assert!(matches!(
            fit_and_minimize(&samples, 4),
            Err(SpectralError::InsufficientSamples { .. })
        ));
        assert!(matches!(
            fit_and_minimize(&samples, 1),
            Err(SpectralError::DegreeTooLow(1))
        ));
    }

    #[test]
    fn argmin_is_scale_invariant() {
        let bins: Vec<f64> = (0..16)
            .map(|k| if k == 0 { 5e5 } else { 1e4 / (1.0 + k as f64) })
            .collect();
        let params = TrainingParams::default();
        let base = train_curve(&bins, ContentType::Text, Direction::Horizontal, &params).unwrap();
        let scaled_bins: Vec<f64> = bins.iter().map(|v| v * 1e3).collect();
        let scaled =
            train_curve(&scaled_bins, ContentType::Text, Direction::Horizontal, &params).unwrap();
        assert!(
            (base.tau_star - scaled.tau_star).abs() < 1e-6,
            "{} vs {}",
            base.tau_star,
            scaled.tau_star
        );
    }

    #[test]
    fn constant_corpus_is_degenerate_with_boundary_tau() {
        let blocks = vec![vec![42.0; 256]; 4];
        let out = train_offsets_from_blocks(&blocks, &blocks, &TrainingParams::default()).unwrap();
        assert!(out.degenerate());
        for curve in &out.curves {
            assert!(curve.boundary_fallback);
            assert!(curve.eta.iter().all(|&e| e < 1e-9));
        }
    }

    #[test]
    fn missing_label_is_rejected() {
        let blocks = vec![vec![1.0; 256]];
        assert!(matches!(
            train_offsets_from_blocks(&blocks, &[], &TrainingParams::default()),
            Err(SpectralError::MissingLabel(ContentType::Pictorial))
        ));
    }

    #[test]
    fn manifest_round_trip_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = dir.path().join("corpus.jsonl");
        let manifest = CorpusManifest {
            entries: vec![
                CorpusEntry {
                    image: PathBuf::from("sheet.pgm"),
                    x: 0,
                    y: 16,
                    label: ContentType::Text,
                },
                CorpusEntry {
                    image: PathBuf::from("sheet.pgm"),
                    x: 16,
                    y: 0,
                    label: ContentType::Pictorial,
                },
            ],
        };
        manifest.save(&manifest_path).unwrap();
        let loaded = CorpusManifest::load(&manifest_path).unwrap();
        assert_eq!(loaded.entries.len(), 2);
        assert_eq!(loaded.entries[0].image, dir.path().join("sheet.pgm"));
        assert_eq!(loaded.label_count(ContentType::Text), 1);
    }

    #[test]
    fn out_of_bounds_block_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let image_path = dir.path().join("img.pgm");
        crate::raster::save_image(&crate::raster::Raster::filled(16, 16, 1, 7), &image_path)
            .unwrap();
        let manifest = CorpusManifest {
            entries: vec![
                CorpusEntry {
                    image: image_path.clone(),
                    x: 0,
                    y: 0,
                    label: ContentType::Text,
                },
                CorpusEntry {
                    image: image_path,
                    x: 8,
                    y: 0,
                    label: ContentType::Pictorial,
                },
            ],
        };
        assert!(matches!(
            train_offsets(&manifest, &TrainingParams::default()),
            Err(SpectralError::BlockOutOfBounds { .. })
        ));
    }
}
