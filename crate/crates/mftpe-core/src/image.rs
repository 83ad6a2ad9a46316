//! Image representation, block partitioning, pixel grouping and thumbnails.
//!
//! Pixels are stored channel-planar, row-major within each plane. A block
//! is a `B x B` view into one channel; blocks are indexed row-major per
//! channel. The thumbnail maps every block to the floor of its pixel mean,
//! and the extended thumbnail additionally records the per-block secondary
//! factor that the active profile keeps invariant.

use num_bigint::BigUint;
use num_traits::One;

use crate::cipher::FactorProfile;
use crate::combinatorics::ln_biguint;
use crate::error::{Error, Result};

/// 8-bit image with 1 (gray) or 3 (RGB) channels, channel-planar layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedFormat(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::DataSizeMismatch {
                width,
                height,
                channels,
                actual: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Build from a per-sample function; convenient for synthetic inputs.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u8, u32, u32) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Image::new(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn channel_plane(&self, c: u8) -> &[u8] {
        let plane = self.width as usize * self.height as usize;
        &self.data[c as usize * plane..(c as usize + 1) * plane]
    }

    pub fn sample(&self, c: u8, x: u32, y: u32) -> u8 {
        let plane = self.width as usize * self.height as usize;
        self.data[c as usize * plane + y as usize * self.width as usize + x as usize]
    }

    pub fn set_sample(&mut self, c: u8, x: u32, y: u32, v: u8) {
        let plane = self.width as usize * self.height as usize;
        self.data[c as usize * plane + y as usize * self.width as usize + x as usize] = v;
    }

    /// Decode an 8-bit gray or RGB PNG.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let decoded = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)
            .map_err(|e| Error::Png(e.to_string()))?;
        let (w, h) = (decoded.width(), decoded.height());
        match decoded {
            ::image::DynamicImage::ImageLuma8(img) => {
                Image::new(w, h, 1, img.into_raw())
            }
            ::image::DynamicImage::ImageRgb8(img) => {
                let interleaved = img.into_raw();
                let plane = w as usize * h as usize;
                let mut data = vec![0u8; plane * 3];
                for (i, px) in interleaved.chunks_exact(3).enumerate() {
                    data[i] = px[0];
                    data[plane + i] = px[1];
                    data[2 * plane + i] = px[2];
                }
                Image::new(w, h, 3, data)
            }
            other => Err(Error::UnsupportedFormat(format!(
                "{:?} (expected 8-bit gray or RGB)",
                other.color()
            ))),
        }
    }

    /// Encode as PNG (gray or RGB to match the channel count). Fixed
    /// encoder settings keep equal images byte-identical and make
    /// compressed-size comparisons meaningful.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let encoder = ::image::codecs::png::PngEncoder::new_with_quality(
            &mut out,
            ::image::codecs::png::CompressionType::Best,
            ::image::codecs::png::FilterType::Adaptive,
        );
        let (color, interleaved) = match self.channels {
            1 => (::image::ExtendedColorType::L8, self.data.clone()),
            _ => {
                let plane = self.width as usize * self.height as usize;
                let mut buf = vec![0u8; plane * 3];
                for i in 0..plane {
                    buf[3 * i] = self.data[i];
                    buf[3 * i + 1] = self.data[plane + i];
                    buf[3 * i + 2] = self.data[2 * plane + i];
                }
                (::image::ExtendedColorType::Rgb8, buf)
            }
        };
        ::image::ImageEncoder::write_image(encoder, &interleaved, self.width, self.height, color)
            .map_err(|e| Error::Png(e.to_string()))?;
        Ok(out)
    }
}

/// Geometry of the block partition of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_size: u16,
    pub blocks_x: u32,
    pub blocks_y: u32,
    pub channels: u8,
}

impl BlockGrid {
    pub fn blocks_per_channel(&self) -> u32 {
        self.blocks_x * self.blocks_y
    }

    pub fn block_pixels(&self) -> usize {
        self.block_size as usize * self.block_size as usize
    }

    /// Top-left pixel coordinate of block `index` (row-major).
    pub fn block_origin(&self, index: u32) -> (u32, u32) {
        let bx = index % self.blocks_x;
        let by = index / self.blocks_x;
        (bx * self.block_size as u32, by * self.block_size as u32)
    }

    /// Copy out block `index` of channel `c`, row-major within the block.
    pub fn read_block(&self, image: &Image, c: u8, index: u32) -> Vec<u8> {
        let (x0, y0) = self.block_origin(index);
        let b = self.block_size as u32;
        let mut out = Vec::with_capacity(self.block_pixels());
        for y in y0..y0 + b {
            for x in x0..x0 + b {
                out.push(image.sample(c, x, y));
            }
        }
        out
    }

    pub fn write_block(&self, image: &mut Image, c: u8, index: u32, pixels: &[u8]) {
        debug_assert_eq!(pixels.len(), self.block_pixels());
        let (x0, y0) = self.block_origin(index);
        let b = self.block_size as u32;
        let mut it = pixels.iter();
        for y in y0..y0 + b {
            for x in x0..x0 + b {
                image.set_sample(c, x, y, *it.next().unwrap());
            }
        }
    }
}

/// Split an image into `B x B` blocks per channel.
pub fn partition(image: &Image, block_size: u16) -> Result<BlockGrid> {
    if block_size < 2 {
        return Err(Error::BlockTooSmall(block_size));
    }
    let b = block_size as u32;
    if !image.width().is_multiple_of(b) || !image.height().is_multiple_of(b) {
        return Err(Error::NonDivisibleBlockSize {
            block: block_size,
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(BlockGrid {
        block_size,
        blocks_x: image.width() / b,
        blocks_y: image.height() / b,
        channels: image.channels(),
    })
}

/// Split a block into consecutive row-major groups of `n` pixels plus the
/// `len mod n` trailing leftovers, which bypass substitution.
pub fn group_pixels(pixels: &[u8], n: usize) -> (Vec<Vec<u8>>, Vec<u8>) {
    assert!(n == 2 || n == 3, "group size must be 2 or 3");
    let groups = pixels.chunks_exact(n).map(|c| c.to_vec()).collect();
    let leftover = pixels.chunks_exact(n).remainder().to_vec();
    (groups, leftover)
}

/// Block-mean thumbnail: one sample per block, `floor(sum / B^2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thumbnail {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub samples: Vec<u8>,
}

impl Thumbnail {
    pub fn to_image(&self) -> Image {
        Image::new(
            self.width,
            self.height,
            self.channels,
            self.samples.clone(),
        )
        .expect("thumbnail dimensions are valid by construction")
    }
}

pub fn thumbnail(image: &Image, block_size: u16) -> Result<Thumbnail> {
    let grid = partition(image, block_size)?;
    let area = grid.block_pixels() as u64;
    let mut samples = Vec::with_capacity(
        grid.blocks_per_channel() as usize * image.channels() as usize,
    );
    for c in 0..image.channels() {
        for idx in 0..grid.blocks_per_channel() {
            let sum: u64 = grid
                .read_block(image, c, idx)
                .iter()
                .map(|&x| x as u64)
                .sum();
            samples.push((sum / area) as u8);
        }
    }
    Ok(Thumbnail {
        width: grid.blocks_x,
        height: grid.blocks_y,
        channels: image.channels(),
        samples,
    })
}

/// Per-block secondary record kept by the extended thumbnail.
///
/// Only factors that survive both substitution and the within-block
/// shuffle can be recorded per block: the pixel product for the geometric
/// mean profile and the extremes for the range profile. The weighted
/// profile preserves its factor per group, not per block, so it carries no
/// block-level record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecondaryFactors {
    None,
    /// Product of all block pixels, channel-major block order.
    Products(Vec<BigUint>),
    /// (min, max) of each block, channel-major block order.
    Extremes(Vec<(u8, u8)>),
}

/// Thumbnail plus the profile's per-block invariant; equality is
/// structural over both parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedThumbnail {
    pub primary: Thumbnail,
    pub secondary: SecondaryFactors,
}

pub fn extended_thumbnail(
    image: &Image,
    block_size: u16,
    profile: &FactorProfile,
) -> Result<ExtendedThumbnail> {
    let primary = thumbnail(image, block_size)?;
    let grid = partition(image, block_size)?;
    let secondary = match profile {
        FactorProfile::SumOnly { .. } | FactorProfile::SumWeightedMean { .. } => {
            SecondaryFactors::None
        }
        FactorProfile::SumGeoMean => {
            let mut products = Vec::new();
            for c in 0..image.channels() {
                for idx in 0..grid.blocks_per_channel() {
                    let mut p = BigUint::one();
                    for &px in &grid.read_block(image, c, idx) {
                        p *= BigUint::from(px as u32);
                    }
                    products.push(p);
                }
            }
            SecondaryFactors::Products(products)
        }
        FactorProfile::SumRange => {
            let mut extremes = Vec::new();
            for c in 0..image.channels() {
                for idx in 0..grid.blocks_per_channel() {
                    let block = grid.read_block(image, c, idx);
                    let min = *block.iter().min().unwrap();
                    let max = *block.iter().max().unwrap();
                    extremes.push((min, max));
                }
            }
            SecondaryFactors::Extremes(extremes)
        }
    };
    Ok(ExtendedThumbnail { primary, secondary })
}

impl ExtendedThumbnail {
    /// Render the secondary record as a grayscale map for inspection: the
    /// rounded geometric mean per block (`block_pixels` = `B^2`) for
    /// product records, or the block range for extremes. `None` for
    /// profiles without a block-level record.
    pub fn render_secondary(&self, block_pixels: usize) -> Option<Image> {
        let t = &self.primary;
        let samples: Vec<u8> = match &self.secondary {
            SecondaryFactors::None => return None,
            SecondaryFactors::Products(products) => products
                .iter()
                .map(|p| {
                    let ln = ln_biguint(p);
                    if ln == f64::NEG_INFINITY {
                        0
                    } else {
                        (ln / block_pixels as f64).exp().round().min(255.0) as u8
                    }
                })
                .collect(),
            SecondaryFactors::Extremes(extremes) => {
                extremes.iter().map(|(lo, hi)| hi - lo).collect()
            }
        };
        Some(
            Image::new(t.width, t.height, t.channels, samples)
                .expect("secondary map matches thumbnail dimensions"),
        )
    }
}
