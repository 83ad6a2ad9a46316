//! Multi-round encrypt/decrypt pipeline: partition, substitute, permute.
//!
//! Each round walks every block of every channel, substitutes the
//! row-major pixel groups with per-group subkeys, then shuffles all block
//! pixels with a keyed Fisher-Yates pass. Every keystream context is
//! derived from (key, nonce, round, channel, block, group), so the whole
//! transform is a deterministic function of key, nonce and plaintext, and
//! blocks are independent of one another.

use crate::cipher::{
    desubstitute_group, substitute_group, BlockContext, EnumCache, FactorProfile,
};
use crate::error::{Error, Result};
use crate::image::{partition, Image};
use crate::keystream::{KeyMaterial, Keystream};

const ENVELOPE_MAGIC: &[u8; 4] = b"MFTP";
const ENVELOPE_VERSION: u8 = 1;
const PIXEL_MAX: u8 = 255;

/// Everything that parameterizes one encryption: profile, block size,
/// round count, master key and public nonce.
#[derive(Clone)]
pub struct CipherParams {
    pub key: [u8; 32],
    pub nonce: [u8; 16],
    pub block_size: u16,
    pub rounds: u16,
    pub profile: FactorProfile,
}

impl CipherParams {
    pub fn new(
        key: [u8; 32],
        nonce: [u8; 16],
        block_size: u16,
        rounds: u16,
        profile: FactorProfile,
    ) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::ZeroRounds);
        }
        if block_size < 2 {
            return Err(Error::BlockTooSmall(block_size));
        }
        Ok(CipherParams {
            key,
            nonce,
            block_size,
            rounds,
            profile,
        })
    }
}

/// Weighted-mean weights fixed by (key, nonce); used when the caller does
/// not supply explicit weights.
pub fn derive_weights(key: &[u8; 32], nonce: &[u8; 16]) -> [u8; 3] {
    KeyMaterial::new(*key, *nonce).derive_weights()
}

/// Serialized ciphertext: public parameters in the clear plus the
/// PNG-encoded ciphertext image.
///
/// Layout (little-endian): magic `MFTP`, version u8, profile id u8,
/// block size u16, rounds u16, 16-byte nonce, weight count u8, weights,
/// then the PNG payload to end of buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiphertextEnvelope {
    pub profile: FactorProfile,
    pub block_size: u16,
    pub rounds: u16,
    pub nonce: [u8; 16],
    pub payload_png: Vec<u8>,
}

impl CiphertextEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let weights = self.profile.weights();
        let mut out = Vec::with_capacity(27 + self.payload_png.len());
        out.extend_from_slice(ENVELOPE_MAGIC);
        out.push(ENVELOPE_VERSION);
        out.push(self.profile.id());
        out.extend_from_slice(&self.block_size.to_le_bytes());
        out.extend_from_slice(&self.rounds.to_le_bytes());
        out.extend_from_slice(&self.nonce);
        match weights {
            Some(w) => {
                out.push(3);
                out.extend_from_slice(&w);
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.payload_png);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if bytes.len() < n {
                Err(Error::MalformedEnvelope(format!(
                    "truncated at {} bytes",
                    bytes.len()
                )))
            } else {
                Ok(())
            }
        };
        need(27)?;
        if &bytes[0..4] != ENVELOPE_MAGIC {
            return Err(Error::MalformedEnvelope("bad magic".into()));
        }
        if bytes[4] != ENVELOPE_VERSION {
            return Err(Error::MalformedEnvelope(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let profile_id = bytes[5];
        let block_size = u16::from_le_bytes([bytes[6], bytes[7]]);
        let rounds = u16::from_le_bytes([bytes[8], bytes[9]]);
        let nonce: [u8; 16] = bytes[10..26].try_into().unwrap();
        let weight_count = bytes[26] as usize;
        need(27 + weight_count)?;
        let weights = &bytes[27..27 + weight_count];
        let profile = FactorProfile::from_id(profile_id, weights)
            .map_err(|e| Error::MalformedEnvelope(e.to_string()))?;
        let expected_weights = if profile.weights().is_some() { 3 } else { 0 };
        if weight_count != expected_weights {
            return Err(Error::ParamMismatch(format!(
                "profile {} carries {} weights, expected {}",
                profile.name(),
                weight_count,
                expected_weights
            )));
        }
        if rounds == 0 {
            return Err(Error::ParamMismatch("zero rounds".into()));
        }
        if block_size < 2 {
            return Err(Error::ParamMismatch(format!(
                "block size {block_size} below minimum"
            )));
        }
        let payload_png = bytes[27 + weight_count..].to_vec();
        if payload_png.is_empty() {
            return Err(Error::MalformedEnvelope("missing payload".into()));
        }
        Ok(CiphertextEnvelope {
            profile,
            block_size,
            rounds,
            nonce,
            payload_png,
        })
    }

    /// Decode the ciphertext image and check it against the declared
    /// parameters.
    pub fn decode_payload(&self) -> Result<Image> {
        let img = Image::from_png_bytes(&self.payload_png)?;
        let b = self.block_size as u32;
        if img.width() % b != 0 || img.height() % b != 0 {
            return Err(Error::ParamMismatch(format!(
                "payload {}x{} not divisible by block size {}",
                img.width(),
                img.height(),
                self.block_size
            )));
        }
        Ok(img)
    }
}

/// Shuffle block pixels with Fisher-Yates, swap indices drawn from the
/// keyed stream.
pub fn permute_block(pixels: &mut [u8], stream: &mut Keystream) {
    for i in (1..pixels.len()).rev() {
        let j = stream.next_below(i as u32 + 1) as usize;
        pixels.swap(i, j);
    }
}

/// Invert `permute_block` for the same stream context: regenerate the
/// swap indices, then apply them in reverse order.
pub fn inverse_permute_block(pixels: &mut [u8], stream: &mut Keystream) {
    let n = pixels.len();
    if n < 2 {
        return;
    }
    let swaps: Vec<u32> = (1..n).rev().map(|i| stream.next_below(i as u32 + 1)).collect();
    for i in 1..n {
        pixels.swap(i, swaps[n - 1 - i] as usize);
    }
}

fn round_indices(rounds: u16) -> impl DoubleEndedIterator<Item = u32> {
    1..=rounds as u32
}

/// One forward round over every channel and block.
fn apply_round(
    image: &mut Image,
    material: &KeyMaterial,
    profile: &FactorProfile,
    block_size: u16,
    round: u32,
    cache: &mut EnumCache,
) -> Result<()> {
    let grid = partition(image, block_size)?;
    let n = profile.group_size();
    let needs_ctx = matches!(profile, FactorProfile::SumRange);
    for c in 0..image.channels() {
        for idx in 0..grid.blocks_per_channel() {
            let mut pixels = grid.read_block(image, c, idx);
            let ctx = needs_ctx.then(|| BlockContext::of(&pixels));
            let block_key = material.block_key(round, c, idx);
            for (g, chunk) in pixels.chunks_exact_mut(n).enumerate() {
                substitute_group(chunk, profile, ctx, block_key.subkey(g as u32), cache)?;
            }
            permute_block(&mut pixels, &mut block_key.permutation_stream());
            grid.write_block(image, c, idx, &pixels);
        }
    }
    Ok(())
}

/// One inverse round; undoes `apply_round` for the same round index.
fn invert_round(
    image: &mut Image,
    material: &KeyMaterial,
    profile: &FactorProfile,
    block_size: u16,
    round: u32,
    cache: &mut EnumCache,
) -> Result<()> {
    let grid = partition(image, block_size)?;
    let n = profile.group_size();
    let needs_ctx = matches!(profile, FactorProfile::SumRange);
    for c in 0..image.channels() {
        for idx in 0..grid.blocks_per_channel() {
            let mut pixels = grid.read_block(image, c, idx);
            let block_key = material.block_key(round, c, idx);
            inverse_permute_block(&mut pixels, &mut block_key.permutation_stream());
            // Substitution preserves the block extremes, so the context
            // recomputed here matches the forward round exactly.
            let ctx = needs_ctx.then(|| BlockContext::of(&pixels));
            for (g, chunk) in pixels.chunks_exact_mut(n).enumerate() {
                desubstitute_group(chunk, profile, ctx, block_key.subkey(g as u32), cache)?;
            }
            grid.write_block(image, c, idx, &pixels);
        }
    }
    Ok(())
}

/// Encrypt an image. Deterministic: the same image and parameters yield a
/// byte-identical envelope.
pub fn encrypt(image: &Image, params: &CipherParams) -> Result<CiphertextEnvelope> {
    partition(image, params.block_size)?;
    let material = KeyMaterial::new(params.key, params.nonce);
    let mut cache = EnumCache::new(PIXEL_MAX);
    let mut work = image.clone();
    for round in round_indices(params.rounds) {
        apply_round(
            &mut work,
            &material,
            &params.profile,
            params.block_size,
            round,
            &mut cache,
        )?;
    }
    Ok(CiphertextEnvelope {
        profile: params.profile.clone(),
        block_size: params.block_size,
        rounds: params.rounds,
        nonce: params.nonce,
        payload_png: work.to_png_bytes()?,
    })
}

/// Exact plaintext recovery: inverse rounds in reverse order.
pub fn decrypt(envelope: &CiphertextEnvelope, key: &[u8; 32]) -> Result<Image> {
    let mut work = envelope.decode_payload()?;
    let material = KeyMaterial::new(*key, envelope.nonce);
    let mut cache = EnumCache::new(PIXEL_MAX);
    for round in round_indices(envelope.rounds).rev() {
        invert_round(
            &mut work,
            &material,
            &envelope.profile,
            envelope.block_size,
            round,
            &mut cache,
        )?;
    }
    Ok(work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{extended_thumbnail, thumbnail};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_key() -> [u8; 32] {
        let mut k = [0u8; 32];
        for (i, b) in k.iter_mut().enumerate() {
            *b = (i * 7 + 3) as u8;
        }
        k
    }

    fn test_nonce(tag: u8) -> [u8; 16] {
        let mut n = [tag; 16];
        n[0] = 0x42;
        n
    }

    fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32, c: u8) -> Image {
        let data = (0..w as usize * h as usize * c as usize)
            .map(|_| rng.gen())
            .collect();
        Image::new(w, h, c, data).unwrap()
    }

    fn all_profiles() -> Vec<FactorProfile> {
        vec![
            FactorProfile::SumOnly { group_size: 2 },
            FactorProfile::SumOnly { group_size: 3 },
            FactorProfile::SumGeoMean,
            FactorProfile::SumRange,
            FactorProfile::sum_weighted([3, 1, 5]).unwrap(),
        ]
    }

    #[test]
    fn roundtrip_all_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = random_image(&mut rng, 16, 16, 3);
        for profile in all_profiles() {
            for rounds in [1u16, 3] {
                let params =
                    CipherParams::new(test_key(), test_nonce(1), 8, rounds, profile.clone())
                        .unwrap();
                let env = encrypt(&img, &params).unwrap();
                let back = decrypt(&env, &test_key()).unwrap();
                assert_eq!(back, img, "profile {} rounds {}", profile.name(), rounds);
            }
        }
    }

    #[test]
    fn thumbnails_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 64, 32, 1);
        for profile in all_profiles() {
            for block in [8u16, 16, 32] {
                let params =
                    CipherParams::new(test_key(), test_nonce(2), block, 2, profile.clone())
                        .unwrap();
                let env = encrypt(&img, &params).unwrap();
                let cipher_img = env.decode_payload().unwrap();
                assert_eq!(
                    thumbnail(&img, block).unwrap(),
                    thumbnail(&cipher_img, block).unwrap(),
                    "profile {} B={block}",
                    profile.name()
                );
                assert_eq!(
                    extended_thumbnail(&img, block, &profile).unwrap(),
                    extended_thumbnail(&cipher_img, block, &profile).unwrap(),
                    "profile {} B={block}",
                    profile.name()
                );
            }
        }
    }

    #[test]
    fn ciphertext_differs_from_plaintext_and_tracks_nonce() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = random_image(&mut rng, 16, 16, 1);
        let params =
            CipherParams::new(test_key(), test_nonce(3), 8, 1, FactorProfile::SumGeoMean).unwrap();
        let env1 = encrypt(&img, &params).unwrap();
        assert_ne!(env1.decode_payload().unwrap(), img);

        // Same everything replays byte-identically.
        let env1b = encrypt(&img, &params).unwrap();
        assert_eq!(env1.to_bytes(), env1b.to_bytes());

        // Distinct nonces diverge.
        let mut diffs = 0;
        for t in 0..100u8 {
            let p2 = CipherParams::new(
                test_key(),
                test_nonce(t.wrapping_add(10)),
                8,
                1,
                FactorProfile::SumGeoMean,
            )
            .unwrap();
            if encrypt(&img, &p2).unwrap().payload_png != env1.payload_png {
                diffs += 1;
            }
        }
        assert!(diffs >= 99);
    }

    #[test]
    fn wrong_key_garbles_but_keeps_thumbnail() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = random_image(&mut rng, 16, 16, 1);
        let params =
            CipherParams::new(test_key(), test_nonce(4), 8, 3, FactorProfile::SumRange).unwrap();
        let env = encrypt(&img, &params).unwrap();
        let mut wrong = test_key();
        wrong[0] ^= 0xFF;
        let out = decrypt(&env, &wrong).unwrap();
        assert_ne!(out, img);
        assert_eq!(thumbnail(&out, 8).unwrap(), thumbnail(&img, 8).unwrap());
    }

    #[test]
    fn rounds_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let img = random_image(&mut rng, 8, 8, 1);
        let profile = FactorProfile::SumOnly { group_size: 2 };
        let params = CipherParams::new(test_key(), test_nonce(5), 4, 2, profile.clone()).unwrap();
        let env = encrypt(&img, &params).unwrap();

        let material = KeyMaterial::new(test_key(), test_nonce(5));
        let mut cache = EnumCache::new(PIXEL_MAX);
        let mut manual = img.clone();
        for round in [1u32, 2] {
            apply_round(&mut manual, &material, &profile, 4, round, &mut cache).unwrap();
        }
        assert_eq!(manual, env.decode_payload().unwrap());
    }

    #[test]
    fn odd_block_size_with_leftover_pixels() {
        // 3x3 blocks leave one pixel per block outside the pair/triple
        // grouping; it must still mix and still decrypt exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let img = random_image(&mut rng, 9, 9, 1);
        for profile in all_profiles() {
            let params =
                CipherParams::new(test_key(), test_nonce(9), 3, 3, profile.clone()).unwrap();
            let env = encrypt(&img, &params).unwrap();
            let cipher_img = env.decode_payload().unwrap();
            assert_eq!(
                thumbnail(&img, 3).unwrap(),
                thumbnail(&cipher_img, 3).unwrap(),
                "profile {}",
                profile.name()
            );
            assert_eq!(decrypt(&env, &test_key()).unwrap(), img, "profile {}", profile.name());
        }
    }

    #[test]
    fn zero_rounds_rejected() {
        assert!(matches!(
            CipherParams::new(test_key(), test_nonce(0), 8, 0, FactorProfile::SumRange),
            Err(Error::ZeroRounds)
        ));
    }

    #[test]
    fn block_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let img = random_image(&mut rng, 24, 24, 1);
        let params =
            CipherParams::new(test_key(), test_nonce(6), 8, 3, FactorProfile::SumGeoMean).unwrap();
        let env = encrypt(&img, &params).unwrap();

        let mut corrupted_img = env.decode_payload().unwrap();
        // Damage exactly block 4 (block row 1, col 1).
        for y in 8..16 {
            for x in 8..16 {
                let v = corrupted_img.sample(0, x, y);
                corrupted_img.set_sample(0, x, y, v.wrapping_add(1 + (x % 3) as u8));
            }
        }
        let corrupted_env = CiphertextEnvelope {
            payload_png: corrupted_img.to_png_bytes().unwrap(),
            ..env.clone()
        };
        let out = decrypt(&corrupted_env, &test_key()).unwrap();
        let mut changed_blocks = Vec::new();
        for by in 0..3u32 {
            for bx in 0..3u32 {
                let mut same = true;
                for y in by * 8..(by + 1) * 8 {
                    for x in bx * 8..(bx + 1) * 8 {
                        if out.sample(0, x, y) != img.sample(0, x, y) {
                            same = false;
                        }
                    }
                }
                if !same {
                    changed_blocks.push(by * 3 + bx);
                }
            }
        }
        assert_eq!(changed_blocks, vec![4]);
    }

    #[test]
    fn permutation_inverse_and_histogram() {
        let material = KeyMaterial::new(test_key(), test_nonce(7));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..1000u32 {
            let len = 4 + (trial % 61) as usize;
            let original: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let bk = material.block_key(1, 0, trial);
            let mut work = original.clone();
            permute_block(&mut work, &mut bk.permutation_stream());
            let mut sorted_a = original.clone();
            let mut sorted_b = work.clone();
            sorted_a.sort_unstable();
            sorted_b.sort_unstable();
            assert_eq!(sorted_a, sorted_b);
            inverse_permute_block(&mut work, &mut bk.permutation_stream());
            assert_eq!(work, original);
        }

        let mut constant = vec![9u8; 64];
        let bk = material.block_key(2, 0, 0);
        permute_block(&mut constant, &mut bk.permutation_stream());
        assert_eq!(constant, vec![9u8; 64]);
    }

    #[test]
    fn envelope_layout_is_bit_exact() {
        let img = Image::from_fn(4, 4, 1, |_, x, y| (x + y) as u8).unwrap();
        let profile = FactorProfile::sum_weighted([2, 7, 1]).unwrap();
        let params = CipherParams::new([1u8; 32], [9u8; 16], 2, 4, profile).unwrap();
        let env = encrypt(&img, &params).unwrap();
        let bytes = env.to_bytes();
        assert_eq!(&bytes[0..4], b"MFTP");
        assert_eq!(bytes[4], 1); // version
        assert_eq!(bytes[5], 4); // weighted profile id
        assert_eq!(&bytes[6..8], &2u16.to_le_bytes()); // block size
        assert_eq!(&bytes[8..10], &4u16.to_le_bytes()); // rounds
        assert_eq!(&bytes[10..26], &[9u8; 16]); // nonce
        assert_eq!(bytes[26], 3); // weight count
        assert_eq!(&bytes[27..30], &[2, 7, 1]); // weights
        assert_eq!(&bytes[30..34], b"\x89PNG"); // payload begins

        let parsed = CiphertextEnvelope::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, env);
        assert_eq!(parsed.to_bytes(), bytes);
    }

    #[test]
    fn envelope_rejects_malformed_input() {
        assert!(matches!(
            CiphertextEnvelope::from_bytes(b"nope"),
            Err(Error::MalformedEnvelope(_))
        ));
        let img = Image::from_fn(4, 4, 1, |_, x, _| x as u8).unwrap();
        let params = CipherParams::new(
            [0u8; 32],
            [0u8; 16],
            2,
            1,
            FactorProfile::SumOnly { group_size: 2 },
        )
        .unwrap();
        let env = encrypt(&img, &params).unwrap();
        let mut bytes = env.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            CiphertextEnvelope::from_bytes(&bytes),
            Err(Error::MalformedEnvelope(_))
        ));
        let mut bytes = env.to_bytes();
        bytes[8] = 0;
        bytes[9] = 0;
        assert!(matches!(
            CiphertextEnvelope::from_bytes(&bytes),
            Err(Error::ParamMismatch(_))
        ));
        // Declared block size inconsistent with the payload dimensions.
        let mut bytes = env.to_bytes();
        bytes[6] = 3;
        let parsed = CiphertextEnvelope::from_bytes(&bytes).unwrap();
        assert!(matches!(
            parsed.decode_payload(),
            Err(Error::ParamMismatch(_))
        ));
    }

    #[test]
    fn non_divisible_inputs_rejected() {
        let img = Image::from_fn(10, 10, 1, |_, _, _| 0).unwrap();
        let params = CipherParams::new(
            test_key(),
            test_nonce(8),
            8,
            1,
            FactorProfile::SumOnly { group_size: 2 },
        )
        .unwrap();
        assert!(matches!(
            encrypt(&img, &params),
            Err(Error::NonDivisibleBlockSize { .. })
        ));
    }
}
