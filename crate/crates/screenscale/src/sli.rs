//! Shift-linear interpolation: a causal recursive pre-filter maps samples to
//! coefficients, which are then combined with a linear B-spline displaced by
//! a shift offset tau. With tau = 0 the scheme degenerates to plain linear
//! interpolation; small positive offsets buy near-cubic quality at linear
//! cost.
//!
//! The content-adaptive scaler runs separably: horizontal pre-filter with
//! per-pixel offsets, horizontal interpolation with one global offset chosen
//! by the frame's major content type, then the same pair vertically on the
//! intermediate. Interpolated pixels inherit the content type of their
//! nearest source pixel for the vertical pre-filter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    classify_image_counted, ClassifierParams, ClassifyError, ContentMap, ContentType,
};
use crate::metrics::{ops, OpCounts, Tally};
use crate::raster::{quantize, Plane, Raster, RasterError, BLOCK_SIZE};

/// Asymptotically optimal shift offset for generic signals; used by the
/// fixed (non-adaptive) pipeline.
pub const GENERIC_OPTIMAL_TAU: f64 = 0.21;

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("shift offset {0} outside the stable range [0, 0.5)")]
    OffsetOutOfRange(f64),
    #[error("scale factor {0} must be positive and finite")]
    BadFactor(f64),
    #[error("dimension {size} x factor {factor} rounds to zero")]
    ZeroOutput { size: usize, factor: f64 },
    #[error("output dimensions overflow")]
    DimensionOverflow,
    #[error("content map is {0}x{1} but image is {2}x{3}")]
    MapMismatch(usize, usize, usize, usize),
    #[error("{0} samples but {1} shift offsets")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite interpolation position")]
    BadPosition,
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Shift offsets for the two pass directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisOffsets {
    pub h: f64,
    pub v: f64,
}

/// Shift offset per content type and direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OffsetTable {
    pub text: AxisOffsets,
    pub pictorial: AxisOffsets,
}

impl Default for OffsetTable {
    /// Trained defaults for screen content.
    fn default() -> Self {
        Self {
            text: AxisOffsets { h: 0.110, v: 0.124 },
            pictorial: AxisOffsets { h: 0.112, v: 0.114 },
        }
    }
}

impl OffsetTable {
    pub fn uniform(tau: f64) -> Self {
        Self {
            text: AxisOffsets { h: tau, v: tau },
            pictorial: AxisOffsets { h: tau, v: tau },
        }
    }

    pub fn tau(&self, content: ContentType, direction: Direction) -> f64 {
        let axis = match content {
            ContentType::Text => self.text,
            ContentType::Pictorial => self.pictorial,
        };
        match direction {
            Direction::Horizontal => axis.h,
            Direction::Vertical => axis.v,
        }
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        for tau in [self.text.h, self.text.v, self.pictorial.h, self.pictorial.v] {
            check_tau(tau)?;
        }
        Ok(())
    }
}

/// Mapping between output and input pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateConvention {
    /// x_in = x_out / factor; grids share the origin.
    #[default]
    OriginAligned,
}

/// Treatment of coefficients referenced beyond the signal ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Out-of-range coefficients replicate the nearest edge coefficient.
    #[default]
    Replicate,
}

/// A validated scaling request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleJob {
    pub factor: f64,
    pub offsets: OffsetTable,
    pub convention: CoordinateConvention,
    pub boundary: BoundaryPolicy,
}

impl ScaleJob {
    pub fn new(factor: f64, offsets: OffsetTable) -> Result<Self, ScaleError> {
        let job = Self {
            factor,
            offsets,
            convention: CoordinateConvention::OriginAligned,
            boundary: BoundaryPolicy::Replicate,
        };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        if !self.factor.is_finite() || self.factor <= 0.0 {
            return Err(ScaleError::BadFactor(self.factor));
        }
        self.offsets.validate()
    }
}

fn check_tau(tau: f64) -> Result<(), ScaleError> {
    if tau.is_finite() && (0.0..0.5).contains(&tau) {
        Ok(())
    } else {
        Err(ScaleError::OffsetOutOfRange(tau))
    }
}

/// Input coordinate an output index maps to (origin-aligned).
pub fn map_output_coordinate(output_index: usize, factor: f64) -> f64 {
    output_index as f64 / factor
}

/// Output size for one axis: round(n * factor), half away from zero.
pub fn output_dimension(n: usize, factor: f64) -> Result<usize, ScaleError> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(ScaleError::BadFactor(factor));
    }
    let out = (n as f64 * factor).round();
    if !out.is_finite() || out > f64::from(i32::MAX) {
        return Err(ScaleError::DimensionOverflow);
    }
    if out < 1.0 {
        return Err(ScaleError::ZeroOutput { size: n, factor });
    }
    Ok(out as usize)
}

/// Pre-filter a signal into interpolation coefficients with a per-sample
/// shift offset. The virtual coefficient before the signal start is seeded
/// with the first sample, which keeps constants exact and confines the
/// start-up transient to x < 1.
pub fn prefilter_1d(samples: &[f64], taus: &[f64]) -> Result<Vec<f64>, ScaleError> {
    let first = *samples.first().ok_or(ScaleError::EmptyInput)?;
    prefilter_1d_seeded(first, samples, taus)
}

/// Pre-filter with an explicit seed for the coefficient preceding the
/// signal.
pub fn prefilter_1d_seeded(
    c_prev: f64,
    samples: &[f64],
    taus: &[f64],
) -> Result<Vec<f64>, ScaleError> {
    if samples.is_empty() {
        return Err(ScaleError::EmptyInput);
    }
    if samples.len() != taus.len() {
        return Err(ScaleError::LengthMismatch(samples.len(), taus.len()));
    }
    for &tau in taus {
        check_tau(tau)?;
    }
    let mut tally = Tally::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = c_prev;
    for (&f, &tau) in samples.iter().zip(taus) {
        // c = -tau/(1-tau) * prev + f/(1-tau), in the incremental form
        // c = prev + (f - prev)/(1-tau) so constant signals are exact.
        let b = 1.0 / (1.0 - tau);
        let c = ops::mix(&mut tally, prev, f, b);
        out.push(c);
        prev = c;
    }
    Ok(out)
}

/// Evaluate the shifted linear B-spline expansion at arbitrary positions.
/// Coefficients referenced outside the signal replicate the nearest edge.
pub fn interpolate_1d(
    coefficients: &[f64],
    tau: f64,
    positions: &[f64],
) -> Result<Vec<f64>, ScaleError> {
    if coefficients.is_empty() {
        return Err(ScaleError::EmptyInput);
    }
    check_tau(tau)?;
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(ScaleError::BadPosition);
    }
    let n = coefficients.len();
    let mut tally = Tally::default();
    let out = positions
        .iter()
        .map(|&x| {
            let t = x - tau;
            let base = t.floor();
            let frac = t - base;
            let c0 = coefficients[clamp_index(base, n)];
            let c1 = coefficients[clamp_index(base + 1.0, n)];
            ops::mix(&mut tally, c0, c1, frac)
        })
        .collect();
    Ok(out)
}

fn clamp_index(i: f64, n: usize) -> usize {
    if i <= 0.0 {
        0
    } else if i >= (n - 1) as f64 {
        n - 1
    } else {
        i as usize
    }
}

/// Index of the source sample nearest to an output position; equidistant
/// ties take the smaller index.
fn nearest_source_index(output_index: usize, factor: f64, n: usize) -> usize {
    let pos = map_output_coordinate(output_index, factor);
    let base = pos.floor();
    let frac = pos - base;
    let idx = if frac > 0.5 { base + 1.0 } else { base };
    clamp_index(idx, n)
}

#[derive(Debug, Clone, Copy)]
struct InterpTap {
    i0: usize,
    i1: usize,
    frac: f64,
}

fn build_taps(n_in: usize, n_out: usize, factor: f64, tau: f64) -> Vec<InterpTap> {
    (0..n_out)
        .map(|i| {
            let t = map_output_coordinate(i, factor) - tau;
            let base = t.floor();
            InterpTap {
                i0: clamp_index(base, n_in),
                i1: clamp_index(base + 1.0, n_in),
                frac: t - base,
            }
        })
        .collect()
}

fn label_index(label: ContentType) -> usize {
    match label {
        ContentType::Text => 0,
        ContentType::Pictorial => 1,
    }
}

/// Pre-filter gains per content type for one direction: 1/(1-tau).
fn gains_for(offsets: &OffsetTable, direction: Direction) -> [f64; 2] {
    [
        1.0 / (1.0 - offsets.tau(ContentType::Text, direction)),
        1.0 / (1.0 - offsets.tau(ContentType::Pictorial, direction)),
    ]
}

/// Per-block pre-filter gains expanded to one value per sample of a row;
/// rebuilt only when the block row changes.
fn fill_gain_row(gains: &mut [f64], b_for: [f64; 2], labels: impl Fn(usize) -> ContentType) {
    for (x, g) in gains.iter_mut().enumerate() {
        *g = b_for[label_index(labels(x))];
    }
}

enum TauMode<'a> {
    Uniform { h: f64, v: f64 },
    Adaptive { map: &'a ContentMap, offsets: &'a OffsetTable },
}

#[derive(Debug, Default, Clone, Copy)]
struct PassStats {
    prefilter: Tally,
    interpolation: Tally,
    prefilter_samples: u64,
    interpolation_outputs: u64,
}

/// Streaming separable scaler for one channel.
///
/// One sweep over the source rows fuses the four stages: horizontal
/// pre-filter, horizontal interpolation, the vertical pre-filter recursion
/// (one state per intermediate column), and vertical interpolation, which
/// emits each output row as soon as the two coefficient rows it blends
/// exist. Only row-sized scratch is ever materialized, so the whole pass
/// stays in cache. Quantization is the caller's concern: values leave this
/// function at full precision.
fn scale_channel(
    w: usize,
    h: usize,
    factor: f64,
    mode: &TauMode<'_>,
    stats: &mut PassStats,
    mut read_row: impl FnMut(usize, &mut [f64]),
    mut write_row: impl FnMut(usize, &[f64]),
) -> Result<(), ScaleError> {
    let out_w = output_dimension(w, factor)?;
    let out_h = output_dimension(h, factor)?;
    let (tau_h, tau_v) = match mode {
        TauMode::Uniform { h, v } => (*h, *v),
        TauMode::Adaptive { map, offsets } => {
            let major = map.major_type();
            (
                offsets.tau(major, Direction::Horizontal),
                offsets.tau(major, Direction::Vertical),
            )
        }
    };
    let taps_h = build_taps(w, out_w, factor, tau_h);
    let taps_v = build_taps(h, out_h, factor, tau_v);

    let mut pre_t = Tally::default();
    let mut int_t = Tally::default();

    // Pre-filter gains per sample: constant for uniform offsets; otherwise
    // rebuilt when the 16-pixel block row changes. Horizontal gains follow
    // the label of each source pixel; vertical gains follow the label of
    // the source pixel nearest to each intermediate column.
    let mut hgains = vec![0.0f64; w];
    let mut vgains = vec![0.0f64; out_w];
    let adaptive = match mode {
        TauMode::Uniform { h, v } => {
            hgains.fill(1.0 / (1.0 - h));
            vgains.fill(1.0 / (1.0 - v));
            None
        }
        TauMode::Adaptive { map, offsets } => {
            let block_cols: Vec<usize> = (0..out_w)
                .map(|x| nearest_source_index(x, factor, map.width()) / BLOCK_SIZE)
                .collect();
            Some((
                *map,
                gains_for(offsets, Direction::Horizontal),
                gains_for(offsets, Direction::Vertical),
                block_cols,
            ))
        }
    };

    let mut src = vec![0.0f64; w];
    let mut hcoeffs = vec![0.0f64; w];
    // Rolling window of the vertical recursion: coefficient rows y-1 and y.
    let mut vprev = vec![0.0f64; out_w];
    let mut vcur = vec![0.0f64; out_w];
    let mut out_buf = vec![0.0f64; out_w];
    let mut next_out = 0usize;
    let mut gain_block_row = usize::MAX;

    for y in 0..h {
        if let Some((map, b_h, b_v, block_cols)) = &adaptive {
            let block_row = y / BLOCK_SIZE;
            if gain_block_row != block_row {
                let blocks_x = map.grid().blocks_x;
                let labels = &map.labels()[block_row * blocks_x..][..blocks_x];
                fill_gain_row(&mut hgains, *b_h, |x| labels[x / BLOCK_SIZE]);
                fill_gain_row(&mut vgains, *b_v, |x| labels[block_cols[x]]);
                gain_block_row = block_row;
            }
        }
        read_row(y, &mut src);

        // Horizontal pre-filter, seeded with the first sample.
        let mut prev = src[0];
        for (c, (&f, &b)) in hcoeffs.iter_mut().zip(src.iter().zip(&hgains)) {
            prev = ops::mix_value(prev, f, b);
            *c = prev;
        }
        pre_t.count_mixes(w as u64);

        // Horizontal interpolation of this source row into the vertical
        // recursion input (reusing the back buffer before it rotates).
        std::mem::swap(&mut vprev, &mut vcur);
        let hrow = &mut out_buf;
        for (tap, o) in taps_h.iter().zip(hrow.iter_mut()) {
            *o = ops::mix_value(hcoeffs[tap.i0], hcoeffs[tap.i1], tap.frac);
        }
        int_t.count_mixes(out_w as u64);

        // One step of the vertical pre-filter recursion per column. The
        // virtual row before the first seeds the recursion with itself.
        if y == 0 {
            for ((c, &f), &b) in vcur.iter_mut().zip(hrow.iter()).zip(&vgains) {
                *c = ops::mix_value(f, f, b);
            }
        } else {
            for ((c, (&f, &p)), &b) in vcur
                .iter_mut()
                .zip(hrow.iter().zip(vprev.iter()))
                .zip(&vgains)
            {
                *c = ops::mix_value(p, f, b);
            }
        }
        pre_t.count_mixes(out_w as u64);

        // Emit every output row whose taps are now available; clamped taps
        // reference the same row on both sides.
        while next_out < out_h && taps_v[next_out].i1 <= y {
            let tap = &taps_v[next_out];
            let r0: &[f64] = if tap.i0 == y { &vcur } else { &vprev };
            let r1: &[f64] = if tap.i1 == y { &vcur } else { &vprev };
            let out_row = &mut out_buf;
            for ((o, &a), &b) in out_row.iter_mut().zip(r0).zip(r1) {
                *o = ops::mix_value(a, b, tap.frac);
            }
            int_t.count_mixes(out_w as u64);
            write_row(next_out, out_row);
            next_out += 1;
        }
    }
    debug_assert_eq!(next_out, out_h);

    stats.prefilter.merge(pre_t);
    stats.interpolation.merge(int_t);
    stats.prefilter_samples += (w * h + out_w * h) as u64;
    stats.interpolation_outputs += (out_w * h + out_w * out_h) as u64;
    Ok(())
}

fn scale_plane_impl(
    plane: &Plane,
    factor: f64,
    mode: &TauMode<'_>,
    stats: &mut PassStats,
) -> Result<Plane, ScaleError> {
    let out_w = output_dimension(plane.width(), factor)?;
    let out_h = output_dimension(plane.height(), factor)?;
    let mut values = vec![0.0f64; out_w * out_h];
    scale_channel(
        plane.width(),
        plane.height(),
        factor,
        mode,
        stats,
        |y, dst| dst.copy_from_slice(plane.row(y)),
        |yo, row| values[yo * out_w..][..out_w].copy_from_slice(row),
    )?;
    Ok(Plane::from_values(out_w, out_h, values))
}

fn scale_raster(
    raster: &Raster,
    factor: f64,
    mode: &TauMode<'_>,
) -> Result<(Raster, PassStats), ScaleError> {
    let w = raster.width();
    let h = raster.height();
    let channels = raster.channels();
    let out_w = output_dimension(w, factor)?;
    let out_h = output_dimension(h, factor)?;
    let mut stats = PassStats::default();
    let mut samples = vec![0u8; out_w * out_h * channels];
    for c in 0..channels {
        let input = raster.samples();
        scale_channel(
            w,
            h,
            factor,
            mode,
            &mut stats,
            |y, dst| {
                let row = &input[y * w * channels..][..w * channels];
                for (d, px) in dst.iter_mut().zip(row[c..].iter().step_by(channels)) {
                    *d = f64::from(*px);
                }
            },
            |yo, row| {
                let out = &mut samples[yo * out_w * channels..][..out_w * channels];
                for (o, &v) in out[c..].iter_mut().step_by(channels).zip(row) {
                    *o = quantize(v);
                }
            },
        )?;
    }
    Ok((Raster::new(out_w, out_h, channels, samples)?, stats))
}

/// Content-adaptive scaling of a single plane, full precision (no output
/// quantization).
pub fn scale_plane_adaptive(
    plane: &Plane,
    job: &ScaleJob,
    map: &ContentMap,
) -> Result<Plane, ScaleError> {
    job.validate()?;
    if map.width() != plane.width() || map.height() != plane.height() {
        return Err(ScaleError::MapMismatch(
            map.width(),
            map.height(),
            plane.width(),
            plane.height(),
        ));
    }
    let mut stats = PassStats::default();
    scale_plane_impl(
        plane,
        job.factor,
        &TauMode::Adaptive {
            map,
            offsets: &job.offsets,
        },
        &mut stats,
    )
}

/// Fixed-offset scaling of a single plane, full precision.
pub fn scale_plane_fixed(plane: &Plane, factor: f64, tau: f64) -> Result<Plane, ScaleError> {
    check_tau(tau)?;
    let mut stats = PassStats::default();
    scale_plane_impl(
        plane,
        factor,
        &TauMode::Uniform { h: tau, v: tau },
        &mut stats,
    )
}

fn sample_count(raster: &Raster) -> u64 {
    (raster.width() * raster.height() * raster.channels()) as u64
}

/// Content-adaptive scaling with a precomputed content map. Quantizes once,
/// at output.
pub fn scale_adaptive(raster: &Raster, job: &ScaleJob, map: &ContentMap) -> Result<Raster, ScaleError> {
    scale_adaptive_instrumented(raster, job, map).map(|(r, _)| r)
}

/// As [`scale_adaptive`], also returning exact operation counts.
pub fn scale_adaptive_instrumented(
    raster: &Raster,
    job: &ScaleJob,
    map: &ContentMap,
) -> Result<(Raster, OpCounts), ScaleError> {
    job.validate()?;
    if map.width() != raster.width() || map.height() != raster.height() {
        return Err(ScaleError::MapMismatch(
            map.width(),
            map.height(),
            raster.width(),
            raster.height(),
        ));
    }
    let (out, stats) = scale_raster(
        raster,
        job.factor,
        &TauMode::Adaptive {
            map,
            offsets: &job.offsets,
        },
    )?;
    let counts = OpCounts {
        classification: Tally::default(),
        prefilter: stats.prefilter,
        interpolation: stats.interpolation,
        n_in: sample_count(raster),
        n_out: sample_count(&out),
        n_blocks: 0,
        prefilter_samples: stats.prefilter_samples,
        interpolation_outputs: stats.interpolation_outputs,
    };
    Ok((out, counts))
}

/// Classify, then scale adaptively: the full pipeline behind the CLI's
/// adaptive method.
pub fn classify_and_scale(
    raster: &Raster,
    factor: f64,
    offsets: &OffsetTable,
    params: &ClassifierParams,
) -> Result<(Raster, ContentMap), ScaleError> {
    classify_and_scale_instrumented(raster, factor, offsets, params).map(|(r, m, _)| (r, m))
}

/// As [`classify_and_scale`], also returning exact operation counts with the
/// classification phase included.
pub fn classify_and_scale_instrumented(
    raster: &Raster,
    factor: f64,
    offsets: &OffsetTable,
    params: &ClassifierParams,
) -> Result<(Raster, ContentMap, OpCounts), ScaleError> {
    let mut classification = Tally::default();
    let luma = raster.to_luma_counted(&mut classification);
    let map = classify_image_counted(&luma, raster, params, &mut classification)?;
    let job = ScaleJob::new(factor, *offsets)?;
    let (out, mut counts) = scale_adaptive_instrumented(raster, &job, &map)?;
    counts.classification = classification;
    counts.n_blocks = map.grid().block_count() as u64;
    Ok((out, map, counts))
}

/// Scaling with one global shift offset everywhere and no classification.
pub fn scale_fixed_sli(raster: &Raster, factor: f64, tau: f64) -> Result<Raster, ScaleError> {
    scale_fixed_sli_instrumented(raster, factor, tau).map(|(r, _)| r)
}

/// As [`scale_fixed_sli`], also returning exact operation counts.
pub fn scale_fixed_sli_instrumented(
    raster: &Raster,
    factor: f64,
    tau: f64,
) -> Result<(Raster, OpCounts), ScaleError> {
    check_tau(tau)?;
    let (out, stats) = scale_raster(raster, factor, &TauMode::Uniform { h: tau, v: tau })?;
    let counts = OpCounts {
        classification: Tally::default(),
        prefilter: stats.prefilter,
        interpolation: stats.interpolation,
        n_in: sample_count(raster),
        n_out: sample_count(&out),
        n_blocks: 0,
        prefilter_samples: stats.prefilter_samples,
        interpolation_outputs: stats.interpolation_outputs,
    };
    Ok((out, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Plane::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..=255.0)).collect()).unwrap()
    }

    #[test]
    fn prefilter_zero_tau_is_identity() {
        let f = [3.0, 1.0, 4.0];
        let c = prefilter_1d(&f, &[0.0; 3]).unwrap();
        assert_eq!(c, f);
    }

    #[test]
    fn prefilter_constant_is_fixed_point() {
        let f = [5.0; 4];
        let c = prefilter_1d(&f, &[0.2; 4]).unwrap();
        assert_eq!(c, f);
    }

    #[test]
    fn prefilter_matches_hand_recursion() {
        // tau = 0.2, f = [0, 1, 0], seeded with c_{-1} = 0.
        let c = prefilter_1d_seeded(0.0, &[0.0, 1.0, 0.0], &[0.2; 3]).unwrap();
        assert!((c[0] - 0.0).abs() < 1e-12);
        assert!((c[1] - 1.25).abs() < 1e-12);
        assert!((c[2] + 0.3125).abs() < 1e-12);
    }

    #[test]
    fn prefilter_rejects_unstable_tau() {
        assert!(matches!(
            prefilter_1d(&[1.0], &[0.5]),
            Err(ScaleError::OffsetOutOfRange(_))
        ));
        assert!(matches!(
            prefilter_1d(&[1.0], &[-0.1]),
            Err(ScaleError::OffsetOutOfRange(_))
        ));
    }

    #[test]
    fn interpolate_midpoint_with_zero_tau() {
        let v = interpolate_1d(&[0.0, 1.0], 0.0, &[0.5]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interpolate_lands_on_coefficient() {
        let c = [0.0, 1.25, -0.3125];
        // x - tau = 1.0 exactly: the value is c[1].
        let v = interpolate_1d(&c, 0.2, &[1.2]).unwrap();
        assert!((v[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn interpolate_reproduces_sample_at_integer() {
        let c = [0.0, 1.25, -0.3125];
        let v = interpolate_1d(&c, 0.2, &[1.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_reproduction_for_random_signals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for tau in [0.0, 0.11, 0.124, 0.21, 0.45] {
            let f: Vec<f64> = (0..64).map(|_| rng.gen_range(-100.0..355.0)).collect();
            let c = prefilter_1d(&f, &vec![tau; 64]).unwrap();
            let positions: Vec<f64> = (0..64).map(|i| i as f64).collect();
            let v = interpolate_1d(&c, tau, &positions).unwrap();
            for (i, (&got, &want)) in v.iter().zip(&f).enumerate() {
                assert!(
                    (got - want).abs() < 1e-9,
                    "tau={} i={} got={} want={}",
                    tau,
                    i,
                    got,
                    want
                );
            }
        }
    }

    #[test]
    fn prefilter_output_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for tau in [0.1, 0.21] {
            let rho = tau / (1.0 - tau);
            let bound = 255.0 / (1.0 - tau) / (1.0 - rho);
            for _ in 0..20 {
                let f: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..=255.0)).collect();
                let c = prefilter_1d(&f, &vec![tau; 256]).unwrap();
                let max = c.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                assert!(max <= bound + 1e-9, "tau={} max={} bound={}", tau, max, bound);
            }
        }
    }

    #[test]
    fn coordinate_mapping() {
        assert_eq!(map_output_coordinate(0, 1.5), 0.0);
        assert_eq!(map_output_coordinate(3, 1.5), 2.0);
        assert!((map_output_coordinate(1919, 1.5) - 1279.3333333333333).abs() < 1e-9);
    }

    #[test]
    fn output_dimensions_round_half_away() {
        assert_eq!(output_dimension(1280, 1.5).unwrap(), 1920);
        assert_eq!(output_dimension(768, 1.5).unwrap(), 1152);
        assert_eq!(output_dimension(3, 0.5).unwrap(), 2); // 1.5 rounds away from zero
        assert!(matches!(
            output_dimension(2, 0.1),
            Err(ScaleError::ZeroOutput { .. })
        ));
        assert!(matches!(
            output_dimension(10, -1.0),
            Err(ScaleError::BadFactor(_))
        ));
    }

    #[test]
    fn nearest_source_ties_take_smaller_index() {
        // factor 0.5: output 1 maps to source 2.0 (exact), output coordinates
        // x/2 land on halves for odd x with factor 2.
        assert_eq!(nearest_source_index(1, 2.0, 8), 0); // 0.5 -> ties to 0
        assert_eq!(nearest_source_index(3, 2.0, 8), 1); // 1.5 -> ties to 1
        assert_eq!(nearest_source_index(2, 2.0, 8), 1); // 1.0 exact
        assert_eq!(nearest_source_index(9, 2.0, 4), 3); // clamped
    }

    #[test]
    fn constant_image_stays_constant_exactly() {
        let plane = Plane::filled(23, 17, 93.0);
        for factor in [0.5, 1.0, 1.5, 2.7] {
            let out = scale_plane_fixed(&plane, factor, 0.21).unwrap();
            assert!(out.values().iter().all(|&v| v == 93.0), "factor {}", factor);
        }
        let map = ContentMap::uniform(23, 17, ContentType::Text);
        let job = ScaleJob::new(1.5, OffsetTable::default()).unwrap();
        let out = scale_plane_adaptive(&plane, &job, &map).unwrap();
        assert!(out.values().iter().all(|&v| v == 93.0));
    }

    #[test]
    fn factor_one_uniform_type_is_identity() {
        let plane = random_plane(40, 30, 3);
        let map = ContentMap::uniform(40, 30, ContentType::Pictorial);
        let job = ScaleJob::new(1.0, OffsetTable::default()).unwrap();
        let out = scale_plane_adaptive(&plane, &job, &map).unwrap();
        for (got, want) in out.values().iter().zip(plane.values()) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn raster_dimensions_scale_and_quantize_once() {
        let raster = Raster::filled(64, 48, 3, 200);
        let out = scale_fixed_sli(&raster, 1.5, GENERIC_OPTIMAL_TAU).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (96, 72, 3));
        assert!(out.samples().iter().all(|&s| s == 200));
    }

    /// Independent reference: compose the public 1-D operations directly,
    /// column by column, without the engine's transposes or tap tables.
    fn reference_adaptive(plane: &Plane, factor: f64, map: &ContentMap, offsets: &OffsetTable) -> Plane {
        let (w, h) = (plane.width(), plane.height());
        let out_w = output_dimension(w, factor).unwrap();
        let out_h = output_dimension(h, factor).unwrap();
        let major = map.major_type();
        let tau_h = offsets.tau(major, Direction::Horizontal);
        let tau_v = offsets.tau(major, Direction::Vertical);
        // Horizontal stage.
        let mut mid = vec![0.0; out_w * h];
        let positions: Vec<f64> = (0..out_w).map(|x| map_output_coordinate(x, factor)).collect();
        for y in 0..h {
            let taus: Vec<f64> = (0..w)
                .map(|x| offsets.tau(map.label_at_pixel(x, y), Direction::Horizontal))
                .collect();
            let coeffs = prefilter_1d(plane.row(y), &taus).unwrap();
            let vals = interpolate_1d(&coeffs, tau_h, &positions).unwrap();
            mid[y * out_w..(y + 1) * out_w].copy_from_slice(&vals);
        }
        // Vertical stage.
        let mut out = vec![0.0; out_w * out_h];
        let positions: Vec<f64> = (0..out_h).map(|y| map_output_coordinate(y, factor)).collect();
        for x in 0..out_w {
            let nearest = nearest_source_index(x, factor, w);
            let column: Vec<f64> = (0..h).map(|y| mid[y * out_w + x]).collect();
            let taus: Vec<f64> = (0..h)
                .map(|y| offsets.tau(map.label_at_pixel(nearest, y), Direction::Vertical))
                .collect();
            let coeffs = prefilter_1d(&column, &taus).unwrap();
            let vals = interpolate_1d(&coeffs, tau_v, &positions).unwrap();
            for y in 0..out_h {
                out[y * out_w + x] = vals[y];
            }
        }
        Plane::new(out_w, out_h, out).unwrap()
    }

    #[test]
    fn engine_matches_composed_1d_operations() {
        let plane = random_plane(48, 33, 21);
        // Mixed labels: top-left text, elsewhere pictorial.
        let stripes: Vec<u8> = (0..48 * 33)
            .map(|i| {
                let (x, y) = (i % 48, i / 48);
                if x < 24 && y < 16 && x % 2 == 0 {
                    0
                } else {
                    230
                }
            })
            .collect();
        let labeled = Raster::new(48, 33, 1, stripes).unwrap();
        let map = crate::classify::classify_image(
            &labeled.to_luma(),
            &labeled,
            &ClassifierParams::default(),
        )
        .unwrap();
        assert!(map.labels().contains(&ContentType::Text));
        assert!(map.labels().contains(&ContentType::Pictorial));
        let offsets = OffsetTable::default();
        for factor in [0.75, 1.5, 2.0] {
            let job = ScaleJob::new(factor, offsets).unwrap();
            let engine = scale_plane_adaptive(&plane, &job, &map).unwrap();
            let reference = reference_adaptive(&plane, factor, &map, &offsets);
            assert_eq!(engine.width(), reference.width());
            assert_eq!(engine.height(), reference.height());
            for (a, b) in engine.values().iter().zip(reference.values()) {
                assert!((a - b).abs() < 1e-9, "factor {}: {} vs {}", factor, a, b);
            }
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<u8> = (0..80 * 64 * 3).map(|_| rng.gen()).collect();
        let raster = Raster::new(80, 64, 3, samples).unwrap();
        let params = ClassifierParams::default();
        let offsets = OffsetTable::default();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let (a, _, counts_a) = single
            .install(|| classify_and_scale_instrumented(&raster, 1.5, &offsets, &params))
            .unwrap();
        let (b, _, counts_b) =
            classify_and_scale_instrumented(&raster, 1.5, &offsets, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(counts_a, counts_b);
    }

    #[test]
    fn instrumented_and_plain_runs_agree() {
        let raster = Raster::filled(40, 40, 1, 10);
        let map = ContentMap::uniform(40, 40, ContentType::Text);
        let job = ScaleJob::new(1.5, OffsetTable::default()).unwrap();
        let plain = scale_adaptive(&raster, &job, &map).unwrap();
        let (instrumented, counts) = scale_adaptive_instrumented(&raster, &job, &map).unwrap();
        assert_eq!(plain, instrumented);
        assert!(counts.prefilter.muls > 0);
    }

    #[test]
    fn map_mismatch_is_rejected() {
        let raster = Raster::filled(32, 32, 1, 0);
        let map = ContentMap::uniform(16, 16, ContentType::Text);
        let job = ScaleJob::new(1.5, OffsetTable::default()).unwrap();
        assert!(matches!(
            scale_adaptive(&raster, &job, &map),
            Err(ScaleError::MapMismatch(..))
        ));
    }

    #[test]
    fn offset_table_serde_round_trip() {
        let table = OffsetTable::default();
        let json = serde_json::to_string(&table).unwrap();
        assert!(json.contains("\"text\"") && json.contains("\"pictorial\""));
        let back: OffsetTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
        // Field shape: {text:{h,v}, pictorial:{h,v}}.
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(parsed["text"]["h"].is_number());
        assert!(parsed["pictorial"]["v"].is_number());
    }

    proptest! {
        #[test]
        fn dc_preservation_is_exact(
            value in 0.0f64..=255.0,
            tau in 0.0f64..0.499,
            factor in 0.3f64..3.0,
            w in 2usize..20,
            h in 2usize..20,
        ) {
            let plane = Plane::filled(w, h, value);
            let out = scale_plane_fixed(&plane, factor, tau).unwrap();
            prop_assert!(out.values().iter().all(|&v| v == value));
        }

        #[test]
        fn sample_reproduction_property(seed in any::<u64>(), tau in 0.0f64..0.499) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..32).map(|_| rng.gen_range(-255.0..255.0)).collect();
            let c = prefilter_1d(&f, &vec![tau; 32]).unwrap();
            let positions: Vec<f64> = (0..32).map(|i| i as f64).collect();
            let v = interpolate_1d(&c, tau, &positions).unwrap();
            for (&got, &want) in v.iter().zip(&f) {
                prop_assert!((got - want).abs() < 1e-9);
            }
        }

        #[test]
        fn separable_passes_commute_for_uniform_tau(
            seed in any::<u64>(),
            tau in 0.0f64..0.45,
            factor in 0.5f64..2.5,
        ) {
            let plane = random_plane(13, 9, seed);
            // The engine runs rows first; transposing the input (and the
            // result) makes it run columns first.
            let rows_first = scale_plane_fixed(&plane, factor, tau).unwrap();
            let cols_first = scale_plane_fixed(&plane.transposed(), factor, tau)
                .unwrap()
                .transposed();
            prop_assert_eq!(rows_first.width(), cols_first.width());
            prop_assert_eq!(rows_first.height(), cols_first.height());
            for (a, b) in rows_first.values().iter().zip(cols_first.values()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
