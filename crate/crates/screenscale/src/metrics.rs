//! Operation counting and image quality metrics.
//!
//! The numeric kernels route every pixel-path addition and multiplication
//! through the wrappers in [`ops`], so instrumented runs tally the exact
//! arithmetic that executed. Index math (coordinates, weights, histogram
//! bookkeeping) is deliberately not counted; the cost model tracks data
//! operations on sample values only.

use serde::Serialize;
use thiserror::Error;

use crate::raster::Raster;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(usize, usize, usize, usize, usize, usize),
}

/// Exact tally of pixel-path arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub adds: u64,
    pub muls: u64,
}

impl Tally {
    pub fn merge(&mut self, other: Tally) {
        self.adds += other.adds;
        self.muls += other.muls;
    }
}

/// Instrumented arithmetic. Identical expressions to the plain operators;
/// counting must never change results.
pub(crate) mod ops {
    use super::Tally;

    #[inline(always)]
    pub fn add(t: &mut Tally, a: f64, b: f64) -> f64 {
        t.adds += 1;
        a + b
    }

    #[inline(always)]
    pub fn sub(t: &mut Tally, a: f64, b: f64) -> f64 {
        t.adds += 1;
        a - b
    }

    #[inline(always)]
    pub fn mul(t: &mut Tally, a: f64, b: f64) -> f64 {
        t.muls += 1;
        a * b
    }

    /// a + w * (b - a). Exact when a == b, which keeps constant signals
    /// bit-identical through every interpolation stage.
    #[inline(always)]
    pub fn mix(t: &mut Tally, a: f64, b: f64, w: f64) -> f64 {
        let d = sub(t, b, a);
        let m = mul(t, w, d);
        add(t, a, m)
    }

    /// Uncounted twin of [`mix`] for straight-line kernels that tally their
    /// arithmetic in bulk (2 additions and 1 multiplication per call); the
    /// per-element counters would otherwise keep the hot loops from
    /// vectorizing.
    #[inline(always)]
    pub fn mix_value(a: f64, b: f64, w: f64) -> f64 {
        a + w * (b - a)
    }
}

impl Tally {
    /// Account for `n` executed `mix` operations.
    pub(crate) fn count_mixes(&mut self, n: u64) {
        self.adds += 2 * n;
        self.muls += n;
    }
}

/// Per-phase operation counts from one instrumented scaling run, plus the
/// sizes the complexity bounds are stated against (in samples: pixels times
/// channels).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub classification: Tally,
    pub prefilter: Tally,
    pub interpolation: Tally,
    /// Input samples (width x height x channels).
    pub n_in: u64,
    /// Output samples.
    pub n_out: u64,
    /// Blocks visited by the classifier; 0 when no classification ran.
    pub n_blocks: u64,
    /// Samples consumed by the pre-filter passes (both directions).
    pub prefilter_samples: u64,
    /// Values produced by the interpolation passes (both directions).
    pub interpolation_outputs: u64,
}

impl OpCounts {
    pub fn additions(&self) -> u64 {
        self.classification.adds + self.prefilter.adds + self.interpolation.adds
    }

    pub fn multiplications(&self) -> u64 {
        self.classification.muls + self.prefilter.muls + self.interpolation.muls
    }

    /// Addition budget of the cost model: 9 N_in + 8 N_out + 4 N_b.
    pub fn addition_budget(&self) -> u64 {
        9 * self.n_in + 8 * self.n_out + 4 * self.n_blocks
    }

    /// Multiplication budget of the cost model: 4 N_in + 8 N_out.
    pub fn multiplication_budget(&self) -> u64 {
        4 * self.n_in + 8 * self.n_out
    }

    pub fn within_budget(&self) -> bool {
        self.additions() <= self.addition_budget()
            && self.multiplications() <= self.multiplication_budget()
    }
}

/// PSNR with identical images reported as a distinguished marker instead of
/// an infinite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Psnr {
    Identical,
    Decibels(f64),
}

impl Psnr {
    fn from_mse(mse: f64) -> Psnr {
        if mse == 0.0 {
            Psnr::Identical
        } else {
            Psnr::Decibels(10.0 * (255.0 * 255.0 / mse).log10())
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Identical => write!(f, "inf"),
            Psnr::Decibels(db) => write!(f, "{:.4}", db),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    /// Mean squared error pooled over all samples.
    pub mse: f64,
    /// PSNR of the pooled MSE.
    pub psnr: Psnr,
    /// Per-channel PSNR.
    pub channel_psnr: Vec<Psnr>,
    pub dimensions_checked: bool,
}

/// PSNR/MSE of `candidate` against `reference`.
pub fn psnr(reference: &Raster, candidate: &Raster) -> Result<QualityReport, MetricsError> {
    if reference.width() != candidate.width()
        || reference.height() != candidate.height()
        || reference.channels() != candidate.channels()
    {
        return Err(MetricsError::DimensionMismatch(
            reference.width(),
            reference.height(),
            reference.channels(),
            candidate.width(),
            candidate.height(),
            candidate.channels(),
        ));
    }
    let channels = reference.channels();
    let mut sq_err = vec![0u64; channels];
    for (i, (&a, &b)) in reference
        .samples()
        .iter()
        .zip(candidate.samples())
        .enumerate()
    {
        let d = i64::from(a) - i64::from(b);
        sq_err[i % channels] += (d * d) as u64;
    }
    let per_channel = reference.width() * reference.height();
    let total: u64 = sq_err.iter().sum();
    let mse = total as f64 / (per_channel * channels) as f64;
    let channel_psnr = sq_err
        .iter()
        .map(|&e| Psnr::from_mse(e as f64 / per_channel as f64))
        .collect();
    Ok(QualityReport {
        mse,
        psnr: Psnr::from_mse(mse),
        channel_psnr,
        dimensions_checked: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_report_marker() {
        let r = Raster::filled(4, 4, 3, 77);
        let q = psnr(&r, &r).unwrap();
        assert_eq!(q.psnr, Psnr::Identical);
        assert_eq!(q.mse, 0.0);
        assert!(q.channel_psnr.iter().all(|p| *p == Psnr::Identical));
    }

    #[test]
    fn unit_mse_psnr() {
        let a = Raster::filled(8, 8, 1, 0);
        let b = Raster::filled(8, 8, 1, 1);
        let q = psnr(&a, &b).unwrap();
        assert_eq!(q.mse, 1.0);
        // 10*log10(255^2), frozen from high-precision evaluation.
        match q.psnr {
            Psnr::Decibels(db) => assert!((db - 48.13080360867910).abs() < 1e-9),
            _ => panic!("expected finite psnr"),
        }
    }

    #[test]
    fn uniform_offset_sixteen() {
        let a = Raster::filled(8, 8, 1, 100);
        let b = Raster::filled(8, 8, 1, 116);
        let q = psnr(&a, &b).unwrap();
        assert_eq!(q.mse, 256.0);
        // 10*log10(255^2/256), frozen from high-precision evaluation.
        match q.psnr {
            Psnr::Decibels(db) => assert!((db - 24.04840395556061).abs() < 1e-9),
            _ => panic!("expected finite psnr"),
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Raster::filled(4, 4, 1, 0);
        let b = Raster::filled(4, 5, 1, 0);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn budgets_follow_the_cost_model() {
        let counts = OpCounts {
            n_in: 100,
            n_out: 225,
            n_blocks: 4,
            ..OpCounts::default()
        };
        assert_eq!(counts.addition_budget(), 9 * 100 + 8 * 225 + 4 * 4);
        assert_eq!(counts.multiplication_budget(), 4 * 100 + 8 * 225);
        assert!(counts.within_budget());
    }
}
