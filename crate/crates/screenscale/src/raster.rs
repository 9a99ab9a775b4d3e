//! Image buffers, binary PNM (P5/P6) file I/O, luma conversion, and 16x16
//! block partitioning shared by every processing stage.
//!
//! All numeric work happens on real-valued [`Plane`]s; 8-bit quantization
//! happens exactly once, at output, via [`round_to_raster`].

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::metrics::Tally;

/// Side length of the classification/training blocks.
pub const BLOCK_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad magic {found:?}: expected \"P5\" or \"P6\"")]
    BadMagic { found: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported max sample value {0}: only 255 is supported")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0}: expected 1 or 3")]
    BadChannelCount(usize),
    #[error("sample buffer holds {got} bytes, expected {expected}")]
    BadSampleCount { got: usize, expected: usize },
    #[error("plane holds {got} values, expected {expected}")]
    BadPlaneLength { got: usize, expected: usize },
    #[error("non-finite value in plane at index {0}")]
    NonFinite(usize),
    #[error("planes disagree on dimensions")]
    PlaneMismatch,
}

/// An 8-bit image, 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<u8>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(RasterError::BadChannelCount(channels));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(RasterError::BadSampleCount {
                got: samples.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    /// Constant-valued image, useful for fixtures.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("filled raster dimensions must be valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn sample(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.samples[(y * self.width + x) * self.channels + channel]
    }

    /// Pixel as an RGB triplet; gray images replicate the single channel.
    pub fn pixel_rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let base = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            [
                self.samples[base],
                self.samples[base + 1],
                self.samples[base + 2],
            ]
        } else {
            let v = self.samples[base];
            [v, v, v]
        }
    }

    /// One channel as a real-valued plane.
    pub fn channel_plane(&self, channel: usize) -> Plane {
        let mut values = Vec::with_capacity(self.width * self.height);
        values.extend(
            self.samples[channel..]
                .iter()
                .step_by(self.channels)
                .map(|&s| f64::from(s)),
        );
        Plane::from_values(self.width, self.height, values)
    }

    /// BT.601 luma plane. Gray inputs are copied through unchanged.
    ///
    /// Computed as `b + 0.299(r-b) + 0.587(g-b)`, algebraically equal to
    /// `0.299r + 0.587g + 0.114b` but exact on gray pixels.
    pub fn to_luma(&self) -> Plane {
        self.to_luma_counted(&mut Tally::default())
    }

    pub(crate) fn to_luma_counted(&self, tally: &mut Tally) -> Plane {
        if self.channels == 1 {
            return self.channel_plane(0);
        }
        let mut values = Vec::with_capacity(self.width * self.height);
        for px in self.samples.chunks_exact(3) {
            let (r, g, b) = (f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
            values.push(b + 0.299 * (r - b) + 0.587 * (g - b));
        }
        // Counted in bulk: 2 subtractions, 2 multiplications, 2 additions
        // per pixel.
        tally.adds += 4 * values.len() as u64;
        tally.muls += 2 * values.len() as u64;
        Plane::from_values(self.width, self.height, values)
    }

    pub fn block_grid(&self) -> BlockGrid {
        BlockGrid::of(self.width, self.height)
    }
}

/// A single-channel real-valued image plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Plane {
    /// Validating constructor: dimensions and finiteness are enforced.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions { width, height });
        }
        if values.len() != width * height {
            return Err(RasterError::BadPlaneLength {
                got: values.len(),
                expected: width * height,
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFinite(idx));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn transposed(&self) -> Plane {
        let mut values = vec![0.0; self.values.len()];
        for y in 0..self.height {
            let row = self.row(y);
            for (x, &v) in row.iter().enumerate() {
                values[x * self.height + y] = v;
            }
        }
        Plane::from_values(self.height, self.width, values)
    }

    /// Copy out a `BLOCK_SIZE`-square block whose top-left pixel is (x0, y0).
    pub fn block16(&self, x0: usize, y0: usize) -> Result<Vec<f64>, RasterError> {
        if x0 + BLOCK_SIZE > self.width || y0 + BLOCK_SIZE > self.height {
            return Err(RasterError::BadDimensions {
                width: self.width,
                height: self.height,
            });
        }
        let mut out = Vec::with_capacity(BLOCK_SIZE * BLOCK_SIZE);
        for y in y0..y0 + BLOCK_SIZE {
            out.extend_from_slice(&self.row(y)[x0..x0 + BLOCK_SIZE]);
        }
        Ok(out)
    }

    pub fn block_grid(&self) -> BlockGrid {
        BlockGrid::of(self.width, self.height)
    }
}

/// How pixels left over at the right/bottom edges are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgePolicy {
    /// Edge blocks are truncated to the pixels that exist; classification
    /// thresholds scale with the block's pixel count.
    #[default]
    Truncated,
}

/// Partition of an image into non-overlapping 16x16 blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub width: usize,
    pub height: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub edge_policy: EdgePolicy,
}

impl BlockGrid {
    pub fn of(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            blocks_x: width.div_ceil(BLOCK_SIZE),
            blocks_y: height.div_ceil(BLOCK_SIZE),
            edge_policy: EdgePolicy::Truncated,
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    /// Pixel rectangle (x0, y0, w, h) of block (bx, by); edge blocks shrink.
    pub fn block_rect(&self, bx: usize, by: usize) -> (usize, usize, usize, usize) {
        let x0 = bx * BLOCK_SIZE;
        let y0 = by * BLOCK_SIZE;
        let w = BLOCK_SIZE.min(self.width - x0);
        let h = BLOCK_SIZE.min(self.height - y0);
        (x0, y0, w, h)
    }

    pub fn block_of_pixel(&self, x: usize, y: usize) -> (usize, usize) {
        (x / BLOCK_SIZE, y / BLOCK_SIZE)
    }
}

/// Round half away from zero, then clamp to the 8-bit range.
pub fn quantize(value: f64) -> u8 {
    // Equivalent to value.round().clamp(0, 255) for all finite inputs, but
    // clamping first keeps the rounding a plain truncating cast: for v >= 0,
    // half-away-from-zero is floor(v + 0.5), and the cast truncates a
    // nonnegative value.
    (value.clamp(0.0, 255.0) + 0.5) as u8
}

/// Quantize one plane per channel into an 8-bit raster.
pub fn round_to_raster(planes: &[Plane]) -> Result<Raster, RasterError> {
    let first = planes.first().ok_or(RasterError::BadChannelCount(0))?;
    if planes.len() != 1 && planes.len() != 3 {
        return Err(RasterError::BadChannelCount(planes.len()));
    }
    if planes
        .iter()
        .any(|p| p.width != first.width || p.height != first.height)
    {
        return Err(RasterError::PlaneMismatch);
    }
    let channels = planes.len();
    let mut samples = vec![0u8; first.width * first.height * channels];
    if channels == 1 {
        for (s, &v) in samples.iter_mut().zip(&planes[0].values) {
            *s = quantize(v);
        }
    } else {
        for (i, px) in samples.chunks_exact_mut(channels).enumerate() {
            for (c, plane) in planes.iter().enumerate() {
                px[c] = quantize(plane.values[i]);
            }
        }
    }
    Raster::new(first.width, first.height, channels, samples)
}

/// Load a binary PGM (P5) or PPM (P6) image.
pub fn load_image(path: impl AsRef<Path>) -> Result<Raster, RasterError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_pnm(&bytes)
}

/// Save as binary PGM (1 channel) or PPM (3 channels), maxval 255.
pub fn save_image(raster: &Raster, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(raster)).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Decode a binary PNM byte stream. Accepts `#` comments between header
/// tokens; requires maxval 255 and a complete payload.
pub fn decode_pnm(bytes: &[u8]) -> Result<Raster, RasterError> {
    if bytes.len() < 2 {
        return Err(RasterError::MalformedHeader("file too short".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(RasterError::BadMagic {
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    let mut pos = 2;
    let width = read_header_number(bytes, &mut pos)?;
    let height = read_header_number(bytes, &mut pos)?;
    let maxval = read_header_number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(RasterError::MalformedHeader(
                "missing whitespace before payload".into(),
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(RasterError::BadDimensions { width, height });
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(RasterError::BadDimensions { width, height })?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(RasterError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    Raster::new(width, height, channels, payload[..expected].to_vec())
}

/// Encode as binary PNM with a single whitespace after each header token.
pub fn encode_pnm(raster: &Raster) -> Vec<u8> {
    let magic = if raster.channels == 1 { "P5" } else { "P6" };
    let header = format!("{}\n{} {}\n255\n", magic, raster.width, raster.height);
    let mut out = Vec::with_capacity(header.len() + raster.samples.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&raster.samples);
    out
}

fn read_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize, RasterError> {
    // Skip whitespace and '#' comment lines.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => {
                return Err(RasterError::MalformedHeader(
                    "unexpected end of header".into(),
                ))
            }
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_digit() {
            *pos += 1;
        } else {
            break;
        }
    }
    if start == *pos {
        return Err(RasterError::MalformedHeader(format!(
            "expected digit at byte {}",
            start
        )));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| RasterError::MalformedHeader("number out of range".into()))
}
