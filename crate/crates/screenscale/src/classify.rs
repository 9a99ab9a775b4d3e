//! Two-step 16x16 block classification of screen content into text and
//! pictorial regions.
//!
//! Step 1 sends blocks with few high-gradient pixels straight to pictorial.
//! Step 2 inspects how strongly pixel colors concentrate around the block's
//! base color, with the threshold raised when the left, upper, and
//! upper-left neighbors are all pictorial. Per-pixel labels are inherited
//! from the containing block; the frame's major type is the modal block
//! label.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Tally;
use crate::raster::{BlockGrid, Plane, Raster, BLOCK_SIZE};

/// Step-2 comparison direction: a block is text when N_BC exceeds L2.
/// A single named constant so the opposite polarity can be tried in
/// experiments.
pub const TEXT_WHEN_BASE_COLORS_DOMINATE: bool = true;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid classifier parameters: {0}")]
    InvalidParams(String),
    #[error("luma plane is {0}x{1} but raster is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Text,
    Pictorial,
}

impl std::fmt::Display for ContentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContentType::Text => write!(f, "text"),
            ContentType::Pictorial => write!(f, "pictorial"),
        }
    }
}

/// Thresholds of the two classification steps, stated per full 256-pixel
/// block; partial edge blocks scale them by their pixel count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    /// Gradient magnitude above which a pixel counts as high-gradient.
    pub gradient_threshold: f64,
    /// Step 1: blocks with fewer high-gradient pixels than this are pictorial.
    pub l1: u32,
    /// Step 2 threshold when any of the three causal neighbors is text or absent.
    pub l2_low: u32,
    /// Step 2 threshold when the left, upper, and upper-left blocks are all pictorial.
    pub l2_high: u32,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            gradient_threshold: 32.0,
            l1: 20,
            l2_low: 100,
            l2_high: 160,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.gradient_threshold > 0.0) {
            return Err(ClassifyError::InvalidParams(
                "gradient threshold must be > 0".into(),
            ));
        }
        if self.l1 == 0 || self.l1 > 256 {
            return Err(ClassifyError::InvalidParams("L1 must be in 1..=256".into()));
        }
        if self.l2_low == 0 || self.l2_low >= self.l2_high || self.l2_high > 256 {
            return Err(ClassifyError::InvalidParams(
                "need 0 < L2_low < L2_high <= 256".into(),
            ));
        }
        Ok(())
    }
}

/// Labels of the causal neighbors of a block; `None` where the neighbor
/// falls outside the image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NeighborLabels {
    pub left: Option<ContentType>,
    pub upper: Option<ContentType>,
    pub upper_left: Option<ContentType>,
}

impl NeighborLabels {
    /// Absent neighbors count as not-all-pictorial.
    pub fn all_pictorial(&self) -> bool {
        self.left == Some(ContentType::Pictorial)
            && self.upper == Some(ContentType::Pictorial)
            && self.upper_left == Some(ContentType::Pictorial)
    }
}

/// Per-block labels plus the frame's modal ("major") type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentMap {
    width: usize,
    height: usize,
    grid: BlockGrid,
    labels: Vec<ContentType>,
    major: ContentType,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContentSummary<'a> {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub labels: &'a [ContentType],
    pub major_type: ContentType,
    pub params: ClassifierParams,
}

impl ContentMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    /// Block labels in raster-scan order.
    pub fn labels(&self) -> &[ContentType] {
        &self.labels
    }

    pub fn block_label(&self, bx: usize, by: usize) -> ContentType {
        self.labels[by * self.grid.blocks_x + bx]
    }

    /// Every pixel carries the label of its containing block.
    pub fn label_at_pixel(&self, x: usize, y: usize) -> ContentType {
        self.block_label(x / BLOCK_SIZE, y / BLOCK_SIZE)
    }

    pub fn major_type(&self) -> ContentType {
        self.major
    }

    /// Map with a single label everywhere.
    pub fn uniform(width: usize, height: usize, label: ContentType) -> Self {
        let grid = BlockGrid::of(width, height);
        Self {
            width,
            height,
            grid,
            labels: vec![label; grid.block_count()],
            major: label,
        }
    }

    /// One pixel per block: text = 255, pictorial = 0.
    pub fn to_mask_raster(&self) -> Raster {
        let samples = self
            .labels
            .iter()
            .map(|l| match l {
                ContentType::Text => 255u8,
                ContentType::Pictorial => 0u8,
            })
            .collect();
        Raster::new(self.grid.blocks_x, self.grid.blocks_y, 1, samples)
            .expect("mask dimensions are valid by construction")
    }

    pub fn summary(&self, params: ClassifierParams) -> ContentSummary<'_> {
        ContentSummary {
            blocks_x: self.grid.blocks_x,
            blocks_y: self.grid.blocks_y,
            labels: &self.labels,
            major_type: self.major,
            params,
        }
    }
}

/// Number of pixels whose forward-difference gradient magnitude exceeds the
/// threshold. The magnitude is max(|horizontal|, |vertical|); boundary
/// pixels use whichever neighbor exists.
pub fn count_high_gradient(values: &[f64], width: usize, height: usize, threshold: f64) -> usize {
    count_high_gradient_counted(values, width, height, threshold, &mut Tally::default())
}

fn count_high_gradient_counted(
    values: &[f64],
    width: usize,
    height: usize,
    threshold: f64,
    tally: &mut Tally,
) -> usize {
    debug_assert_eq!(values.len(), width * height);
    let mut count = 0;
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut magnitude = 0.0f64;
            if x + 1 < width {
                magnitude = (values[i + 1] - values[i]).abs();
            }
            if y + 1 < height {
                magnitude = magnitude.max((values[i + width] - values[i]).abs());
            }
            if magnitude > threshold {
                count += 1;
            }
        }
    }
    // Counted in bulk: one forward difference per pixel and direction where
    // the neighbor exists.
    tally.adds += ((width - 1) * height + width * (height - 1)) as u64;
    count
}

/// Base color (modal exact gray value, smallest value on ties) and the
/// number of pixels within +/-2 of it.
pub fn base_color_count_gray(pixels: &[u8]) -> (u8, usize) {
    debug_assert!(!pixels.is_empty());
    let mut histogram = [0u32; 256];
    for &p in pixels {
        histogram[p as usize] += 1;
    }
    let mut base = 0usize;
    for v in 1..256 {
        if histogram[v] > histogram[base] {
            base = v;
        }
    }
    let lo = base.saturating_sub(2);
    let hi = (base + 2).min(255);
    let n_bc = histogram[lo..=hi].iter().sum::<u32>() as usize;
    (base as u8, n_bc)
}

/// Base color (modal exact RGB color, channel-lexicographically smallest on
/// ties) and the number of pixels with every channel within +/-2 of it.
pub fn base_color_count_rgb(pixels: &[[u8; 3]]) -> ([u8; 3], usize) {
    base_color_count_rgb_counted(pixels, &mut Tally::default())
}

fn pack_rgb(p: &[u8]) -> u32 {
    (u32::from(p[0]) << 16) | (u32::from(p[1]) << 8) | u32::from(p[2])
}

fn base_color_count_rgb_counted(pixels: &[[u8; 3]], tally: &mut Tally) -> ([u8; 3], usize) {
    debug_assert!(!pixels.is_empty());
    let mut keys: Vec<u32> = pixels.iter().map(|p| pack_rgb(p)).collect();
    base_color_from_keys(&mut keys, tally)
}

/// Modal color (ties to the smallest packed key) plus the +/-2 box count
/// over packed RGB keys. Blocks dominated by a few colors resolve in one
/// linear pass; diverse blocks fall back to a sort.
fn base_color_from_keys(keys: &mut [u32], tally: &mut Tally) -> ([u8; 3], usize) {
    const SMALL: usize = 32;
    let mut entries = [(0u32, 0u32); SMALL];
    let mut len = 0usize;
    let mut best_key = 0u32;
    let mut overflowed = false;
    'counting: {
        for &k in keys.iter() {
            match entries[..len].iter_mut().find(|e| e.0 == k) {
                Some(e) => e.1 += 1,
                None => {
                    if len == SMALL {
                        overflowed = true;
                        break 'counting;
                    }
                    entries[len] = (k, 1);
                    len += 1;
                }
            }
        }
        let mut best = (0u32, u32::MAX);
        for &(key, count) in &entries[..len] {
            if count > best.0 || (count == best.0 && key < best.1) {
                best = (count, key);
            }
        }
        best_key = best.1;
    }
    if overflowed {
        keys.sort_unstable();
        let mut best_len = 0usize;
        let mut run_start = 0usize;
        for i in 1..=keys.len() {
            if i == keys.len() || keys[i] != keys[run_start] {
                // Strictly longer runs win; the sort makes the first winner
                // the lexicographically smallest color.
                if i - run_start > best_len {
                    best_len = i - run_start;
                    best_key = keys[run_start];
                }
                run_start = i;
            }
        }
    }
    let base = [
        (best_key >> 16) as u8,
        (best_key >> 8) as u8,
        best_key as u8,
    ];
    let near = |a: u32, b: u32| a.abs_diff(b) <= 2;
    let n_bc = keys
        .iter()
        .filter(|&&k| {
            near(k >> 16, best_key >> 16)
                & near((k >> 8) & 0xff, (best_key >> 8) & 0xff)
                & near(k & 0xff, best_key & 0xff)
        })
        .count();
    // Counted in bulk: three per-channel differences per pixel.
    tally.adds += 3 * keys.len() as u64;
    (base, n_bc)
}

/// Block pixels for the base-color criterion: gray uses a scalar +/-2
/// interval, RGB a per-channel +/-2 box.
#[derive(Debug, Clone, Copy)]
pub enum BlockPixels<'a> {
    Gray(&'a [u8]),
    Rgb(&'a [[u8; 3]]),
}

impl BlockPixels<'_> {
    fn base_color_count(&self, tally: &mut Tally) -> usize {
        match self {
            BlockPixels::Gray(px) => {
                let (_, n) = base_color_count_gray(px);
                n
            }
            BlockPixels::Rgb(px) => {
                let (_, n) = base_color_count_rgb_counted(px, tally);
                n
            }
        }
    }
}

/// Classify a single block given the labels of its causal neighbors.
///
/// Thresholds scale proportionally for blocks smaller than 256 pixels.
pub fn classify_block(
    luma: &[f64],
    pixels: BlockPixels<'_>,
    width: usize,
    height: usize,
    params: &ClassifierParams,
    neighbors: NeighborLabels,
) -> ContentType {
    let mut tally = Tally::default();
    let features = block_features(luma, pixels, width, height, params, &mut tally);
    label_from_features(&features, params, neighbors)
}

/// Step-1/step-2 statistics of one block. N_BC is computed lazily: it is
/// only needed for blocks that survive step 1.
#[derive(Debug, Clone, Copy)]
struct BlockFeatures {
    pixel_count: usize,
    n_bc: Option<usize>,
}

fn block_features(
    luma: &[f64],
    pixels: BlockPixels<'_>,
    width: usize,
    height: usize,
    params: &ClassifierParams,
    tally: &mut Tally,
) -> BlockFeatures {
    let pixel_count = width * height;
    let n_hg = count_high_gradient_counted(luma, width, height, params.gradient_threshold, tally);
    let n_bc = if (n_hg as f64) < scaled_threshold(params.l1, pixel_count) {
        None
    } else {
        Some(pixels.base_color_count(tally))
    };
    BlockFeatures { pixel_count, n_bc }
}

fn scaled_threshold(per_256: u32, pixel_count: usize) -> f64 {
    f64::from(per_256) * pixel_count as f64 / 256.0
}

fn label_from_features(
    features: &BlockFeatures,
    params: &ClassifierParams,
    neighbors: NeighborLabels,
) -> ContentType {
    let n_bc = match features.n_bc {
        // Step 1: too few high-gradient pixels.
        None => return ContentType::Pictorial,
        Some(n) => n,
    };
    let l2 = if neighbors.all_pictorial() {
        params.l2_high
    } else {
        params.l2_low
    };
    let dominated = (n_bc as f64) > scaled_threshold(l2, features.pixel_count);
    let is_text = if TEXT_WHEN_BASE_COLORS_DOMINATE {
        dominated
    } else {
        !dominated
    };
    if is_text {
        ContentType::Text
    } else {
        ContentType::Pictorial
    }
}

/// Classify every block of an image.
///
/// Block features are computed in parallel; labels are then assigned in
/// raster-scan order so the neighbor-adaptive threshold sees final labels.
/// Results are bit-identical for any thread count.
pub fn classify_image(
    luma: &Plane,
    rgb: &Raster,
    params: &ClassifierParams,
) -> Result<ContentMap, ClassifyError> {
    classify_image_counted(luma, rgb, params, &mut Tally::default())
}

pub(crate) fn classify_image_counted(
    luma: &Plane,
    rgb: &Raster,
    params: &ClassifierParams,
    tally: &mut Tally,
) -> Result<ContentMap, ClassifyError> {
    params.validate()?;
    if luma.width() != rgb.width() || luma.height() != rgb.height() {
        return Err(ClassifyError::DimensionMismatch(
            luma.width(),
            luma.height(),
            rgb.width(),
            rgb.height(),
        ));
    }
    let grid = luma.block_grid();
    let features: Vec<(BlockFeatures, Tally)> = (0..grid.block_count())
        .into_par_iter()
        .map(|i| {
            let (bx, by) = (i % grid.blocks_x, i / grid.blocks_x);
            let (x0, y0, w, h) = grid.block_rect(bx, by);
            let mut block_luma = Vec::with_capacity(w * h);
            for y in y0..y0 + h {
                block_luma.extend_from_slice(&luma.row(y)[x0..x0 + w]);
            }
            let mut local = Tally::default();
            let f = if rgb.channels() == 1 {
                let mut px = Vec::with_capacity(w * h);
                for y in y0..y0 + h {
                    px.extend_from_slice(&rgb.samples()[y * rgb.width() + x0..][..w]);
                }
                block_features(&block_luma, BlockPixels::Gray(&px), w, h, params, &mut local)
            } else {
                let mut px = Vec::with_capacity(w * h);
                for y in y0..y0 + h {
                    let row = &rgb.samples()[(y * rgb.width() + x0) * 3..][..w * 3];
                    px.extend(row.chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
                }
                block_features(&block_luma, BlockPixels::Rgb(&px), w, h, params, &mut local)
            };
            (f, local)
        })
        .collect();

    for (_, local) in &features {
        tally.merge(*local);
    }

    let mut labels = Vec::with_capacity(grid.block_count());
    for by in 0..grid.blocks_y {
        for bx in 0..grid.blocks_x {
            let at = |bx: usize, by: usize| -> ContentType { labels[by * grid.blocks_x + bx] };
            let neighbors = NeighborLabels {
                left: (bx > 0).then(|| at(bx - 1, by)),
                upper: (by > 0).then(|| at(bx, by - 1)),
                upper_left: (bx > 0 && by > 0).then(|| at(bx - 1, by - 1)),
            };
            let i = by * grid.blocks_x + bx;
            labels.push(label_from_features(&features[i].0, params, neighbors));
        }
    }

    let text_blocks = labels.iter().filter(|l| **l == ContentType::Text).count();
    let pictorial_blocks = labels.len() - text_blocks;
    // Tie resolves to text: text clarity takes priority.
    let major = if text_blocks >= pictorial_blocks {
        ContentType::Text
    } else {
        ContentType::Pictorial
    };

    Ok(ContentMap {
        width: luma.width(),
        height: luma.height(),
        grid,
        labels,
        major,
    })
}
