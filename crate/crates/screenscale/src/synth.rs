//! Deterministic synthetic screen-content fixtures: stroke-glyph text
//! blocks, smooth pictorial blocks, labeled composites, and training corpora
//! with manifests. All generators are seeded and reproducible.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::ContentType;
use crate::raster::{save_image, Raster, RasterError, BLOCK_SIZE};
use crate::spectral::{CorpusEntry, CorpusManifest, SpectralError};

const N: usize = BLOCK_SIZE;

/// Cap on stroke pixels per text block so the background stays the dominant
/// base color by a wide margin.
const STROKE_BUDGET: usize = 90;

fn paint_vertical(block: &mut [u8], col: usize, row0: usize, len: usize, thick: usize, fg: u8) -> usize {
    let mut painted = 0;
    for y in row0..(row0 + len).min(N) {
        for c in col..(col + thick).min(N) {
            let i = y * N + c;
            if block[i] != fg {
                block[i] = fg;
                painted += 1;
            }
        }
    }
    painted
}

fn paint_horizontal(block: &mut [u8], row: usize, col0: usize, len: usize, thick: usize, fg: u8) -> usize {
    let mut painted = 0;
    for x in col0..(col0 + len).min(N) {
        for r in row..(row + thick).min(N) {
            let i = r * N + x;
            if block[i] != fg {
                block[i] = fg;
                painted += 1;
            }
        }
    }
    painted
}

/// Grayscale glyph-like block: a light constant background with a few crisp
/// dark strokes. Two vertical strokes in separate column bands plus one
/// horizontal stroke guarantee well over the default high-gradient
/// threshold; the stroke budget keeps the background the base color.
pub fn text_block_gray(rng: &mut impl Rng) -> Vec<u8> {
    let bg: u8 = rng.gen_range(220..=250);
    let fg: u8 = rng.gen_range(10..=60);
    let mut block = vec![bg; N * N];
    let mut painted = 0;
    for col_range in [2..=6usize, 9..=13usize] {
        let col = rng.gen_range(col_range);
        let row0 = rng.gen_range(0..=2);
        let len = rng.gen_range(8..=14);
        let thick = rng.gen_range(1..=2);
        painted += paint_vertical(&mut block, col, row0, len, thick, fg);
    }
    let row = rng.gen_range(2..=13);
    let col0 = rng.gen_range(0..=2);
    let len = rng.gen_range(8..=14);
    painted += paint_horizontal(&mut block, row, col0, len, 1, fg);
    if painted + 28 <= STROKE_BUDGET {
        if rng.gen_bool(0.5) {
            let col = rng.gen_range(0..N);
            let row0 = rng.gen_range(0..=8);
            paint_vertical(&mut block, col, row0, rng.gen_range(6..=12), 1, fg);
        } else {
            let row = rng.gen_range(0..N);
            let col0 = rng.gen_range(0..=8);
            paint_horizontal(&mut block, row, col0, rng.gen_range(6..=12), 1, fg);
        }
    }
    block
}

/// Smooth grayscale block: gentle ramp plus a low-frequency sinusoid. Local
/// differences stay far below the default gradient threshold, so these
/// blocks always classify as pictorial.
pub fn pictorial_block_gray(rng: &mut impl Rng) -> Vec<u8> {
    let base: f64 = rng.gen_range(96.0..160.0);
    let slope_x: f64 = rng.gen_range(-3.0..3.0);
    let slope_y: f64 = rng.gen_range(-3.0..3.0);
    let amplitude: f64 = rng.gen_range(0.0..12.0);
    let frequency: f64 = rng.gen_range(0.05..0.25);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut block = Vec::with_capacity(N * N);
    for y in 0..N {
        for x in 0..N {
            let wave = amplitude
                * (std::f64::consts::TAU * frequency * (x + y) as f64 / 2.0 + phase).sin();
            let v = base + slope_x * x as f64 + slope_y * y as f64 + wave;
            block.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    block
}

/// Seeded luma corpora for offset training: (text blocks, pictorial blocks)
/// as real-valued 256-sample rows.
pub fn corpus_blocks(
    n_text: usize,
    n_pictorial: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = (0..n_text)
        .map(|_| text_block_gray(&mut rng).iter().map(|&v| f64::from(v)).collect())
        .collect();
    let pictorial = (0..n_pictorial)
        .map(|_| {
            pictorial_block_gray(&mut rng)
                .iter()
                .map(|&v| f64::from(v))
                .collect()
        })
        .collect();
    (text, pictorial)
}

/// A generated image with per-block ground-truth labels.
#[derive(Debug, Clone)]
pub struct Composite {
    pub raster: Raster,
    /// Ground truth per block, raster-scan order.
    pub truth: Vec<ContentType>,
    pub blocks_x: usize,
    pub blocks_y: usize,
}

/// RGB composite: dense text glyphs on the left half, a smooth global
/// gradient on the right half. Dimensions must be multiples of 16.
pub fn composite_text_gradient(
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Composite, RasterError> {
    if width % N != 0 || height % N != 0 || width < 2 * N {
        return Err(RasterError::BadDimensions { width, height });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks_x = width / N;
    let blocks_y = height / N;
    let text_cols = blocks_x / 2;
    let mut samples = vec![0u8; width * height * 3];
    let mut truth = Vec::with_capacity(blocks_x * blocks_y);

    // Smooth per-channel gradient parameters for the pictorial half.
    let grad_base: [f64; 3] = [
        rng.gen_range(90.0..150.0),
        rng.gen_range(90.0..150.0),
        rng.gen_range(90.0..150.0),
    ];
    let grad_slope: [(f64, f64); 3] = [
        (rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)),
        (rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)),
        (rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)),
    ];

    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let (x0, y0) = (bx * N, by * N);
            if bx < text_cols {
                truth.push(ContentType::Text);
                let mask = text_block_gray(&mut rng);
                let bg: [u8; 3] = [
                    rng.gen_range(200..=250),
                    rng.gen_range(200..=250),
                    rng.gen_range(200..=250),
                ];
                let fg: [u8; 3] = [
                    rng.gen_range(10..=70),
                    rng.gen_range(10..=70),
                    rng.gen_range(10..=70),
                ];
                // The gray mask only distinguishes background from strokes.
                let mask_bg = mask[0];
                for dy in 0..N {
                    for dx in 0..N {
                        let color = if mask[dy * N + dx] == mask_bg { bg } else { fg };
                        let base = ((y0 + dy) * width + x0 + dx) * 3;
                        samples[base..base + 3].copy_from_slice(&color);
                    }
                }
            } else {
                truth.push(ContentType::Pictorial);
                for dy in 0..N {
                    for dx in 0..N {
                        let (x, y) = ((x0 + dx) as f64 / 16.0, (y0 + dy) as f64 / 16.0);
                        let base = ((y0 + dy) * width + x0 + dx) * 3;
                        for c in 0..3 {
                            let v = grad_base[c]
                                + grad_slope[c].0 * x * 16.0 / 8.0
                                + grad_slope[c].1 * y * 16.0 / 8.0;
                            samples[base + c] = v.round().clamp(0.0, 255.0) as u8;
                        }
                    }
                }
            }
        }
    }
    Ok(Composite {
        raster: Raster::new(width, height, 3, samples)?,
        truth,
        blocks_x,
        blocks_y,
    })
}

/// Grayscale text-heavy page: every block is a glyph block. Dimensions must
/// be multiples of 16.
pub fn text_sheet(width: usize, height: usize, seed: u64) -> Result<Raster, RasterError> {
    sheet(width, height, seed, text_block_gray)
}

/// Grayscale smooth page: every block is a pictorial block.
pub fn pictorial_sheet(width: usize, height: usize, seed: u64) -> Result<Raster, RasterError> {
    sheet(width, height, seed, pictorial_block_gray)
}

fn sheet(
    width: usize,
    height: usize,
    seed: u64,
    block_fn: fn(&mut ChaCha8Rng) -> Vec<u8>,
) -> Result<Raster, RasterError> {
    if width % N != 0 || height % N != 0 {
        return Err(RasterError::BadDimensions { width, height });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0u8; width * height];
    for by in 0..height / N {
        for bx in 0..width / N {
            let block = block_fn(&mut rng);
            for dy in 0..N {
                let row = (by * N + dy) * width + bx * N;
                samples[row..row + N].copy_from_slice(&block[dy * N..(dy + 1) * N]);
            }
        }
    }
    Raster::new(width, height, 1, samples)
}

/// Paths produced by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub text_sheet: PathBuf,
    pub pictorial_sheet: PathBuf,
}

/// Write a training corpus to disk: one PGM sheet per label holding the
/// blocks in a grid, plus a JSON-lines manifest addressing each block.
pub fn write_corpus(
    dir: &Path,
    n_text: usize,
    n_pictorial: usize,
    seed: u64,
) -> Result<CorpusFiles, SpectralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_text + n_pictorial);
    let text_path = dir.join("text_sheet.pgm");
    let pictorial_path = dir.join("pictorial_sheet.pgm");

    for (count, label, path, block_fn) in [
        (
            n_text,
            ContentType::Text,
            &text_path,
            text_block_gray as fn(&mut ChaCha8Rng) -> Vec<u8>,
        ),
        (
            n_pictorial,
            ContentType::Pictorial,
            &pictorial_path,
            pictorial_block_gray as fn(&mut ChaCha8Rng) -> Vec<u8>,
        ),
    ] {
        if count == 0 {
            continue;
        }
        let cols = count.min(20);
        let rows = count.div_ceil(cols);
        let (width, height) = (cols * N, rows * N);
        let mut samples = vec![128u8; width * height];
        for i in 0..count {
            let (bx, by) = (i % cols, i / cols);
            let block = block_fn(&mut rng);
            for dy in 0..N {
                let row = (by * N + dy) * width + bx * N;
                samples[row..row + N].copy_from_slice(&block[dy * N..(dy + 1) * N]);
            }
            entries.push(CorpusEntry {
                image: PathBuf::from(path.file_name().expect("sheet paths have names")),
                x: bx * N,
                y: by * N,
                label,
            });
        }
        let sheet = Raster::new(width, height, 1, samples)?;
        save_image(&sheet, path)?;
    }

    let manifest_path = dir.join("manifest.jsonl");
    CorpusManifest { entries }.save(&manifest_path)?;
    Ok(CorpusFiles {
        manifest: manifest_path,
        text_sheet: text_path,
        pictorial_sheet: pictorial_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{
        base_color_count_gray, classify_image, count_high_gradient, ClassifierParams,
    };

    #[test]
    fn text_blocks_meet_the_classifier_guarantees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let block = text_block_gray(&mut rng);
            let luma: Vec<f64> = block.iter().map(|&v| f64::from(v)).collect();
            let n_hg = count_high_gradient(&luma, 16, 16, 32.0);
            assert!(n_hg >= 20, "text block with only {} high-gradient pixels", n_hg);
            let (_, n_bc) = base_color_count_gray(&block);
            assert!(n_bc > 160, "text block with N_BC {}", n_bc);
        }
    }

    #[test]
    fn pictorial_blocks_have_no_high_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let block = pictorial_block_gray(&mut rng);
            let luma: Vec<f64> = block.iter().map(|&v| f64::from(v)).collect();
            assert_eq!(count_high_gradient(&luma, 16, 16, 32.0), 0);
        }
    }

    #[test]
    fn composite_matches_its_ground_truth() {
        let composite = composite_text_gradient(256, 128, 7).unwrap();
        let map = classify_image(
            &composite.raster.to_luma(),
            &composite.raster,
            &ClassifierParams::default(),
        )
        .unwrap();
        let agree = map
            .labels()
            .iter()
            .zip(&composite.truth)
            .filter(|(a, b)| a == b)
            .count();
        assert_eq!(
            agree,
            composite.truth.len(),
            "composite construction should classify perfectly"
        );
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = composite_text_gradient(64, 64, 42).unwrap();
        let b = composite_text_gradient(64, 64, 42).unwrap();
        assert_eq!(a.raster, b.raster);
        let c = composite_text_gradient(64, 64, 43).unwrap();
        assert_ne!(a.raster, c.raster);
    }

    #[test]
    fn corpus_files_load_and_train() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_corpus(dir.path(), 24, 24, 5).unwrap();
        let manifest = CorpusManifest::load(&files.manifest).unwrap();
        assert_eq!(manifest.label_count(ContentType::Text), 24);
        assert_eq!(manifest.label_count(ContentType::Pictorial), 24);
        let params = crate::spectral::TrainingParams::default();
        let out = crate::spectral::train_offsets(&manifest, &params).unwrap();
        assert!(!out.degenerate());
    }

    #[test]
    fn rejects_unaligned_dimensions() {
        assert!(composite_text_gradient(100, 64, 1).is_err());
        assert!(text_sheet(100, 64, 1).is_err());
    }
}
