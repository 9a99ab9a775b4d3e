//! Reference scalers: bilinear and Keys cubic convolution (a = -0.5), both
//! evaluated per output pixel from the source neighborhood under the same
//! origin-aligned coordinate convention and edge replication as the
//! shift-linear pipeline.

use rayon::prelude::*;

use crate::metrics::{ops, OpCounts, Tally};
use crate::raster::{round_to_raster, Plane, Raster};
use crate::sli::{map_output_coordinate, output_dimension, ScaleError};

#[derive(Debug, Clone, Copy)]
struct LinearTap {
    i0: usize,
    i1: usize,
    frac: f64,
}

fn linear_taps(n_in: usize, n_out: usize, factor: f64) -> Vec<LinearTap> {
    (0..n_out)
        .map(|i| {
            let pos = map_output_coordinate(i, factor);
            let base = pos.floor();
            LinearTap {
                i0: clamp(base, n_in),
                i1: clamp(base + 1.0, n_in),
                frac: pos - base,
            }
        })
        .collect()
}

fn clamp(i: f64, n: usize) -> usize {
    if i <= 0.0 {
        0
    } else if i >= (n - 1) as f64 {
        n - 1
    } else {
        i as usize
    }
}

/// Bilinear scaling of one plane, full precision. Each output pixel blends
/// its four source neighbors; constants are preserved exactly.
pub fn scale_plane_bilinear(plane: &Plane, factor: f64) -> Result<Plane, ScaleError> {
    scale_plane_bilinear_counted(plane, factor, &mut Tally::default())
}

fn scale_plane_bilinear_counted(
    plane: &Plane,
    factor: f64,
    tally: &mut Tally,
) -> Result<Plane, ScaleError> {
    let (w, h) = (plane.width(), plane.height());
    let out_w = output_dimension(w, factor)?;
    let out_h = output_dimension(h, factor)?;
    let taps_x = linear_taps(w, out_w, factor);
    let taps_y = linear_taps(h, out_h, factor);
    let mut values = vec![0.0f64; out_w * out_h];
    let tallies: Vec<Tally> = values
        .par_chunks_mut(out_w)
        .enumerate()
        .map(|(yo, out_row)| {
            let mut t = Tally::default();
            let ty = &taps_y[yo];
            let row0 = plane.row(ty.i0);
            let row1 = plane.row(ty.i1);
            for (tx, out) in taps_x.iter().zip(out_row.iter_mut()) {
                let top = ops::mix_value(row0[tx.i0], row0[tx.i1], tx.frac);
                let bottom = ops::mix_value(row1[tx.i0], row1[tx.i1], tx.frac);
                *out = ops::mix_value(top, bottom, ty.frac);
            }
            t.count_mixes(3 * out_w as u64);
            t
        })
        .collect();
    for t in tallies {
        tally.merge(t);
    }
    Ok(Plane::from_values(out_w, out_h, values))
}

/// Bilinear scaling with output quantization.
pub fn scale_bilinear(raster: &Raster, factor: f64) -> Result<Raster, ScaleError> {
    scale_bilinear_instrumented(raster, factor).map(|(r, _)| r)
}

/// As [`scale_bilinear`], also returning exact operation counts.
pub fn scale_bilinear_instrumented(
    raster: &Raster,
    factor: f64,
) -> Result<(Raster, OpCounts), ScaleError> {
    scale_baseline(raster, factor, scale_plane_bilinear_counted)
}

/// Keys cubic-convolution weights (a = -0.5) for the taps at offsets
/// -1, 0, +1, +2 around the fractional position s in [0, 1).
fn keys_weights(s: f64) -> [f64; 4] {
    let k_inner = |t: f64| (1.5 * t - 2.5) * t * t + 1.0;
    let k_outer = |t: f64| -0.5 * (((t - 5.0) * t + 8.0) * t - 4.0);
    [k_outer(1.0 + s), k_inner(s), k_inner(1.0 - s), k_outer(2.0 - s)]
}

#[derive(Debug, Clone, Copy)]
struct CubicTap {
    idx: [usize; 4],
    /// Weights of the non-center taps (-1, +1, +2); the center weight is
    /// implied so constants pass through exactly.
    w: [f64; 3],
}

fn cubic_taps(n_in: usize, n_out: usize, factor: f64) -> Vec<CubicTap> {
    (0..n_out)
        .map(|i| {
            let pos = map_output_coordinate(i, factor);
            let base = pos.floor();
            let s = pos - base;
            let w = keys_weights(s);
            CubicTap {
                idx: [
                    clamp(base - 1.0, n_in),
                    clamp(base, n_in),
                    clamp(base + 1.0, n_in),
                    clamp(base + 2.0, n_in),
                ],
                w: [w[0], w[2], w[3]],
            }
        })
        .collect()
}

/// c1 + w0*(c0-c1) + w1*(c2-c1) + w2*(c3-c1): the weights sum to one, so
/// folding the center weight keeps constants exact. 6 additions and 3
/// multiplications; callers tally in bulk.
#[inline(always)]
fn cubic_blend(c: [f64; 4], w: [f64; 3]) -> f64 {
    let acc = w[0] * (c[0] - c[1]) + w[1] * (c[2] - c[1]) + w[2] * (c[3] - c[1]);
    c[1] + acc
}

/// Keys bicubic scaling of one plane, full precision, edge replication.
pub fn scale_plane_bicubic(plane: &Plane, factor: f64) -> Result<Plane, ScaleError> {
    scale_plane_bicubic_counted(plane, factor, &mut Tally::default())
}

fn scale_plane_bicubic_counted(
    plane: &Plane,
    factor: f64,
    tally: &mut Tally,
) -> Result<Plane, ScaleError> {
    let (w, h) = (plane.width(), plane.height());
    let out_w = output_dimension(w, factor)?;
    let out_h = output_dimension(h, factor)?;
    let taps_x = cubic_taps(w, out_w, factor);
    let taps_y = cubic_taps(h, out_h, factor);
    let mut values = vec![0.0f64; out_w * out_h];
    let tallies: Vec<Tally> = values
        .par_chunks_mut(out_w)
        .enumerate()
        .map(|(yo, out_row)| {
            let mut t = Tally::default();
            let ty = &taps_y[yo];
            let rows = [
                plane.row(ty.idx[0]),
                plane.row(ty.idx[1]),
                plane.row(ty.idx[2]),
                plane.row(ty.idx[3]),
            ];
            for (tx, out) in taps_x.iter().zip(out_row.iter_mut()) {
                let col = [
                    cubic_blend(gather(rows[0], tx), tx.w),
                    cubic_blend(gather(rows[1], tx), tx.w),
                    cubic_blend(gather(rows[2], tx), tx.w),
                    cubic_blend(gather(rows[3], tx), tx.w),
                ];
                *out = cubic_blend(col, ty.w);
            }
            // 5 difference-form blends per output.
            t.adds += 30 * out_w as u64;
            t.muls += 15 * out_w as u64;
            t
        })
        .collect();
    for t in tallies {
        tally.merge(t);
    }
    Ok(Plane::from_values(out_w, out_h, values))
}

#[inline(always)]
fn gather(row: &[f64], tap: &CubicTap) -> [f64; 4] {
    [
        row[tap.idx[0]],
        row[tap.idx[1]],
        row[tap.idx[2]],
        row[tap.idx[3]],
    ]
}

/// Keys bicubic scaling with output quantization.
pub fn scale_bicubic(raster: &Raster, factor: f64) -> Result<Raster, ScaleError> {
    scale_bicubic_instrumented(raster, factor).map(|(r, _)| r)
}

/// As [`scale_bicubic`], also returning exact operation counts.
pub fn scale_bicubic_instrumented(
    raster: &Raster,
    factor: f64,
) -> Result<(Raster, OpCounts), ScaleError> {
    scale_baseline(raster, factor, scale_plane_bicubic_counted)
}

fn scale_baseline(
    raster: &Raster,
    factor: f64,
    kernel: fn(&Plane, f64, &mut Tally) -> Result<Plane, ScaleError>,
) -> Result<(Raster, OpCounts), ScaleError> {
    let mut tally = Tally::default();
    let planes: Vec<Plane> = (0..raster.channels())
        .map(|c| kernel(&raster.channel_plane(c), factor, &mut tally))
        .collect::<Result<_, _>>()?;
    let out = round_to_raster(&planes)?;
    let n_out = (out.width() * out.height() * out.channels()) as u64;
    let counts = OpCounts {
        classification: Tally::default(),
        prefilter: Tally::default(),
        interpolation: tally,
        n_in: (raster.width() * raster.height() * raster.channels()) as u64,
        n_out,
        n_blocks: 0,
        prefilter_samples: 0,
        interpolation_outputs: n_out,
    };
    Ok((out, counts))
}
