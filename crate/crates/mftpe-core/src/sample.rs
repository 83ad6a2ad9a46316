//! Built-in test inputs: a deterministic 512x512 photo-like image, the
//! published two-block worked example, and a constructor for pairs of
//! distinct images that collide on the plain thumbnail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{partition, Image};

/// Deterministic 512x512 RGB test image. No network or dataset needed.
///
/// Period-16 triangle waves give strong adjacent-pixel correlation while
/// summing to a constant over every 16x16 block, a faint diagonal
/// gradient varies the thumbnail, and coarse 2x2 grain adds texture that
/// keeps the plaintext compressible but not degenerate.
pub fn bundled_image() -> Image {
    fn tri16(u: u32) -> f64 {
        let m = (u % 16) as i32;
        ((m - 8).abs() as f64) / 4.0 - 1.0
    }
    fn grain(c: u8, x: u32, y: u32) -> f64 {
        let mut h = (x / 2) as u64 ^ ((y / 2) as u64) << 21 ^ (c as u64) << 42;
        h = h.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= h >> 29;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 32;
        (h % 13) as f64 - 6.0
    }
    Image::from_fn(512, 512, 3, |c, x, y| {
        let grad = ((x + y) as f64 / 1022.0 - 0.5) * 24.0;
        let v = 128.0
            + 55.0 * tri16(x + 3 * c as u32)
            + 45.0 * tri16(y + 5 * c as u32)
            + grad
            + grain(c, x, y);
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("static dimensions are valid")
}

/// The published two-block worked example: one channel, two blocks of six
/// pixels each.
pub fn golden_blocks() -> [[u8; 6]; 2] {
    [[25, 175, 163, 254, 51, 58], [18, 199, 87, 85, 204, 173]]
}

/// Two distinct images with identical per-block sums (hence identical
/// plain thumbnails) but different block products, so their extended
/// thumbnails under the geometric-mean profile differ.
///
/// The second image moves one unit between two pixels of each block,
/// picking a pair whose values don't differ by exactly one (that keeps
/// the product change nonzero).
pub fn sum_colliding_pair(
    width: u32,
    height: u32,
    block_size: u16,
    seed: u64,
) -> Result<(Image, Image)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = Image::from_fn(width, height, 1, |_, _, _| rng.gen())?;
    let grid = partition(&first, block_size)?;
    let mut second = first.clone();
    for idx in 0..grid.blocks_per_channel() {
        let mut block = grid.read_block(&first, 0, idx);
        'search: for i in 0..block.len() {
            for j in 0..block.len() {
                if i == j {
                    continue;
                }
                let (p, q) = (block[i], block[j]);
                if p < 255 && q > 0 && q as i32 - p as i32 != 1 {
                    block[i] = p + 1;
                    block[j] = q - 1;
                    grid.write_block(&mut second, 0, idx, &block);
                    break 'search;
                }
            }
        }
    }
    Ok((first, second))
}
