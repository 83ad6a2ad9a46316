//! Rank-then-encipher substitution for pixel groups.
//!
//! A group is mapped to its serial number inside the constrained vector
//! set it belongs to, the serial number is shifted by a keyed offset
//! modulo the set size, and the result is mapped back. Which set is used
//! depends on the factor profile: sum only, sum and product, sum and
//! block range, or sum and weighted sum. Every path is an exact bijection
//! on its set, so the inverse shift recovers the input bit for bit.

use std::collections::HashMap;
use std::rc::Rc;

use crate::combinatorics::{
    enumerate_sum_product, enumerate_sum_weighted, pair_first_bounds, psi_pair, sum_range_window,
};
use crate::error::{Error, Result};

/// Which per-group invariants substitution preserves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FactorProfile {
    /// Baseline: only the group sum is preserved.
    SumOnly { group_size: usize },
    /// Sum and product of a three-pixel group.
    SumGeoMean,
    /// Pair sum, with both outputs confined between the block extremes.
    SumRange,
    /// Sum and fixed-weight weighted sum of a three-pixel group.
    SumWeightedMean { weights: [u8; 3] },
}

impl FactorProfile {
    pub fn sum_only(group_size: usize) -> Result<Self> {
        if group_size != 2 && group_size != 3 {
            return Err(Error::InvalidProfile(format!(
                "sum-only group size must be 2 or 3, got {group_size}"
            )));
        }
        Ok(FactorProfile::SumOnly { group_size })
    }

    pub fn sum_weighted(weights: [u8; 3]) -> Result<Self> {
        if weights.contains(&0) {
            return Err(Error::InvalidProfile(
                "weighted-mean weights must be positive".into(),
            ));
        }
        Ok(FactorProfile::SumWeightedMean { weights })
    }

    /// Pixels consumed per substitution group.
    pub fn group_size(&self) -> usize {
        match self {
            FactorProfile::SumOnly { group_size } => *group_size,
            FactorProfile::SumGeoMean => 3,
            FactorProfile::SumRange => 2,
            FactorProfile::SumWeightedMean { .. } => 3,
        }
    }

    /// Wire identifier used in the ciphertext envelope.
    pub fn id(&self) -> u8 {
        match self {
            FactorProfile::SumOnly { group_size: 2 } => 0,
            FactorProfile::SumOnly { .. } => 1,
            FactorProfile::SumGeoMean => 2,
            FactorProfile::SumRange => 3,
            FactorProfile::SumWeightedMean { .. } => 4,
        }
    }

    pub fn from_id(id: u8, weights: &[u8]) -> Result<Self> {
        match id {
            0 => Ok(FactorProfile::SumOnly { group_size: 2 }),
            1 => Ok(FactorProfile::SumOnly { group_size: 3 }),
            2 => Ok(FactorProfile::SumGeoMean),
            3 => Ok(FactorProfile::SumRange),
            4 => {
                let w: [u8; 3] = weights
                    .try_into()
                    .map_err(|_| Error::InvalidProfile("weighted profile needs 3 weights".into()))?;
                FactorProfile::sum_weighted(w)
            }
            other => Err(Error::InvalidProfile(format!("unknown profile id {other}"))),
        }
    }

    pub fn weights(&self) -> Option<[u8; 3]> {
        match self {
            FactorProfile::SumWeightedMean { weights } => Some(*weights),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FactorProfile::SumOnly { group_size: 2 } => "sum-only-2",
            FactorProfile::SumOnly { .. } => "sum-only-3",
            FactorProfile::SumGeoMean => "sum-geomean",
            FactorProfile::SumRange => "sum-range",
            FactorProfile::SumWeightedMean { .. } => "sum-weighted",
        }
    }
}

/// Block extremes consulted by the sum-range profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockContext {
    pub min: u8,
    pub max: u8,
}

impl BlockContext {
    pub fn of(pixels: &[u8]) -> Self {
        let min = pixels.iter().copied().min().unwrap_or(0);
        let max = pixels.iter().copied().max().unwrap_or(0);
        BlockContext { min, max }
    }
}

/// Index of a group inside its constrained set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SerialNumber {
    pub value: u64,
    pub modulus: u64,
}

impl SerialNumber {
    pub fn new(value: u64, modulus: u64) -> Self {
        debug_assert!(modulus >= 1 && value < modulus);
        SerialNumber { value, modulus }
    }

    /// `(value + k) mod modulus`.
    pub fn encipher(self, k: u128) -> u64 {
        ((self.value as u128 + k % self.modulus as u128) % self.modulus as u128) as u64
    }

    /// `(value - k) mod modulus`.
    pub fn decipher(self, k: u128) -> u64 {
        let m = self.modulus as u128;
        let k = k % m;
        ((self.value as u128 + m - k) % m) as u64
    }
}

/// Per-run cache of constrained-set enumerations.
///
/// Keys repeat heavily inside one image, so each distinct (sum, product)
/// or (sum, weighted value) set is enumerated once. The sum-only triple
/// path keeps prefix-sum tables instead of materialized lists.
type TripleList = Rc<Vec<[u8; 3]>>;

pub struct EnumCache {
    d: u8,
    geo: HashMap<(u16, u64), TripleList>,
    weighted: HashMap<(u16, u32, [u8; 3]), TripleList>,
    triple_sum: HashMap<u16, Rc<TripleSumIndex>>,
}

impl EnumCache {
    pub fn new(d: u8) -> Self {
        EnumCache {
            d,
            geo: HashMap::new(),
            weighted: HashMap::new(),
            triple_sum: HashMap::new(),
        }
    }

    pub fn d(&self) -> u8 {
        self.d
    }

    pub fn sum_product(&mut self, s: u16, p: u64) -> TripleList {
        let d = self.d;
        Rc::clone(
            self.geo
                .entry((s, p))
                .or_insert_with(|| Rc::new(enumerate_sum_product(d, s, p))),
        )
    }

    pub fn sum_weighted(&mut self, s: u16, v: u32, w: [u8; 3]) -> TripleList {
        let d = self.d;
        Rc::clone(
            self.weighted
                .entry((s, v, w))
                .or_insert_with(|| Rc::new(enumerate_sum_weighted(d, s, v, w))),
        )
    }

    fn triple_sum_index(&mut self, s: u16) -> Rc<TripleSumIndex> {
        let d = self.d;
        Rc::clone(
            self.triple_sum
                .entry(s)
                .or_insert_with(|| Rc::new(TripleSumIndex::new(d, s))),
        )
    }
}

/// Rank support for the lexicographic triple sum set: `cum[i]` counts the
/// triples whose first element is below `lo + i`.
struct TripleSumIndex {
    d: u8,
    s: u16,
    lo: u16,
    cum: Vec<u64>,
}

impl TripleSumIndex {
    fn new(d: u8, s: u16) -> Self {
        let lo = s.saturating_sub(2 * d as u16);
        let hi = (d as u16).min(s);
        let mut cum = Vec::with_capacity((hi - lo + 2) as usize);
        cum.push(0);
        for i in lo..=hi {
            let last = *cum.last().unwrap();
            cum.push(last + psi_pair(d, s - i));
        }
        TripleSumIndex { d, s, lo, cum }
    }

    fn total(&self) -> u64 {
        *self.cum.last().unwrap()
    }

    fn rank(&self, g: [u8; 3]) -> u64 {
        let i = g[0] as u16 - self.lo;
        let (pair_lo, _) = pair_first_bounds(self.d, self.s - g[0] as u16);
        self.cum[i as usize] + (g[1] as u16 - pair_lo) as u64
    }

    fn unrank(&self, sn: u64) -> [u8; 3] {
        debug_assert!(sn < self.total());
        // Largest i with cum[i] <= sn.
        let i = match self.cum.binary_search(&sn) {
            Ok(mut idx) => {
                while idx + 1 < self.cum.len() && self.cum[idx + 1] == sn {
                    idx += 1;
                }
                idx
            }
            Err(idx) => idx - 1,
        };
        let first = self.lo + i as u16;
        let rest = self.s - first;
        let (pair_lo, _) = pair_first_bounds(self.d, rest);
        let second = pair_lo as u64 + (sn - self.cum[i]);
        let third = rest as u64 - second;
        [first as u8, second as u8, third as u8]
    }
}

fn group_sum(group: &[u8]) -> u16 {
    group.iter().map(|&x| x as u16).sum()
}

fn check_arity(group: &[u8], profile: &FactorProfile) -> Result<()> {
    let expected = profile.group_size();
    if group.len() != expected {
        return Err(Error::ArityMismatch {
            expected,
            actual: group.len(),
        });
    }
    Ok(())
}

fn rank_in_list(list: &[[u8; 3]], g: [u8; 3]) -> u64 {
    list.binary_search(&g)
        .expect("group must be a member of its own constrained set") as u64
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

/// Encrypt one pixel group in place.
pub fn substitute_group(
    group: &mut [u8],
    profile: &FactorProfile,
    ctx: Option<BlockContext>,
    subkey: u128,
    cache: &mut EnumCache,
) -> Result<()> {
    apply(group, profile, ctx, subkey, cache, Direction::Forward)
}

/// Invert `substitute_group` under the same profile, context and subkey.
pub fn desubstitute_group(
    group: &mut [u8],
    profile: &FactorProfile,
    ctx: Option<BlockContext>,
    subkey: u128,
    cache: &mut EnumCache,
) -> Result<()> {
    apply(group, profile, ctx, subkey, cache, Direction::Backward)
}

fn apply(
    group: &mut [u8],
    profile: &FactorProfile,
    ctx: Option<BlockContext>,
    subkey: u128,
    cache: &mut EnumCache,
    dir: Direction,
) -> Result<()> {
    check_arity(group, profile)?;
    debug_assert!(group.iter().all(|&x| x <= cache.d()));
    let s = group_sum(group);
    match profile {
        FactorProfile::SumOnly { group_size: 2 } => {
            let (lo, _) = pair_first_bounds(cache.d(), s);
            let m = psi_pair(cache.d(), s);
            let sn = SerialNumber::new((group[0] as u16 - lo) as u64, m);
            let shifted = shift(sn, subkey, dir);
            group[0] = (lo as u64 + shifted) as u8;
            group[1] = (s - group[0] as u16) as u8;
        }
        FactorProfile::SumOnly { .. } => {
            let idx = cache.triple_sum_index(s);
            let sn = SerialNumber::new(idx.rank([group[0], group[1], group[2]]), idx.total());
            let out = idx.unrank(shift(sn, subkey, dir));
            group.copy_from_slice(&out);
        }
        FactorProfile::SumGeoMean => {
            let p = group.iter().map(|&x| x as u64).product();
            let list = cache.sum_product(s, p);
            let sn = SerialNumber::new(
                rank_in_list(&list, [group[0], group[1], group[2]]),
                list.len() as u64,
            );
            group.copy_from_slice(&list[shift(sn, subkey, dir) as usize]);
        }
        FactorProfile::SumWeightedMean { weights } => {
            let v = group
                .iter()
                .zip(weights)
                .map(|(&x, &w)| x as u32 * w as u32)
                .sum();
            let list = cache.sum_weighted(s, v, *weights);
            let sn = SerialNumber::new(
                rank_in_list(&list, [group[0], group[1], group[2]]),
                list.len() as u64,
            );
            group.copy_from_slice(&list[shift(sn, subkey, dir) as usize]);
        }
        FactorProfile::SumRange => {
            let ctx = ctx.ok_or(Error::MissingBlockContext)?;
            let (a, b) = (group[0], group[1]);
            if a == ctx.min || a == ctx.max || b == ctx.min || b == ctx.max {
                // Pairs touching an extreme swap positions and skip the
                // keyed shift; the swap is its own inverse.
                group.swap(0, 1);
            } else {
                let w = sum_range_window(s, ctx.min, ctx.max);
                debug_assert!(w.contains(a));
                let sn = SerialNumber::new((a as i32 - w.alpha) as u64, w.size() as u64);
                let shifted = shift(sn, subkey, dir);
                group[0] = (w.alpha as u64 + shifted) as u8;
                group[1] = (s - group[0] as u16) as u8;
            }
        }
    }
    Ok(())
}

fn shift(sn: SerialNumber, subkey: u128, dir: Direction) -> u64 {
    match dir {
        Direction::Forward => sn.encipher(subkey),
        Direction::Backward => sn.decipher(subkey),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sub(group: &[u8], profile: &FactorProfile, ctx: Option<BlockContext>, k: u128) -> Vec<u8> {
        let mut g = group.to_vec();
        let mut cache = EnumCache::new(255);
        substitute_group(&mut g, profile, ctx, k, &mut cache).unwrap();
        g
    }

    fn desub(group: &[u8], profile: &FactorProfile, ctx: Option<BlockContext>, k: u128) -> Vec<u8> {
        let mut g = group.to_vec();
        let mut cache = EnumCache::new(255);
        desubstitute_group(&mut g, profile, ctx, k, &mut cache).unwrap();
        g
    }

    #[test]
    fn sum_range_swap_rule() {
        let ctx = Some(BlockContext { min: 10, max: 100 });
        assert_eq!(sub(&[100, 12], &FactorProfile::SumRange, ctx, 77), [12, 100]);
        // Applied in reverse the swap restores the original.
        assert_eq!(desub(&[12, 100], &FactorProfile::SumRange, ctx, 77), [100, 12]);
    }

    #[test]
    fn sum_range_normal_path() {
        let ctx = Some(BlockContext { min: 10, max: 100 });
        assert_eq!(sub(&[50, 60], &FactorProfile::SumRange, ctx, 0), [50, 60]);
        assert_eq!(sub(&[50, 60], &FactorProfile::SumRange, ctx, 1), [51, 59]);
        assert_eq!(desub(&[51, 59], &FactorProfile::SumRange, ctx, 1), [50, 60]);
    }

    #[test]
    fn geomean_examples() {
        assert_eq!(sub(&[1, 2, 3], &FactorProfile::SumGeoMean, None, 0), [1, 2, 3]);
        // Rank 0 shifted by 2 inside the lexicographic (s=6, p=6) list.
        assert_eq!(sub(&[1, 2, 3], &FactorProfile::SumGeoMean, None, 2), [2, 1, 3]);
        assert_eq!(desub(&[2, 1, 3], &FactorProfile::SumGeoMean, None, 2), [1, 2, 3]);
    }

    #[test]
    fn weighted_example() {
        let profile = FactorProfile::sum_weighted([1, 2, 3]).unwrap();
        assert_eq!(sub(&[2, 2, 2], &profile, None, 1), [3, 0, 3]);
        assert_eq!(desub(&[3, 0, 3], &profile, None, 1), [2, 2, 2]);
    }

    #[test]
    fn singleton_sets_are_fixed_points() {
        for profile in [
            FactorProfile::SumOnly { group_size: 3 },
            FactorProfile::SumGeoMean,
            FactorProfile::sum_weighted([2, 5, 1]).unwrap(),
        ] {
            assert_eq!(sub(&[0, 0, 0], &profile, None, u128::MAX), [0, 0, 0]);
        }
        let ctx = Some(BlockContext { min: 5, max: 5 });
        assert_eq!(sub(&[5, 5], &FactorProfile::SumRange, ctx, 9), [5, 5]);
    }

    #[test]
    fn arity_and_context_errors() {
        let mut cache = EnumCache::new(255);
        let mut g = vec![1u8, 2, 3];
        let err = substitute_group(&mut g, &FactorProfile::SumRange, None, 0, &mut cache);
        assert!(matches!(err, Err(Error::ArityMismatch { .. })));
        let mut g = vec![1u8, 2];
        let err = substitute_group(&mut g, &FactorProfile::SumRange, None, 0, &mut cache);
        assert!(matches!(err, Err(Error::MissingBlockContext)));
    }

    #[test]
    fn profile_validation() {
        assert!(FactorProfile::sum_only(4).is_err());
        assert!(FactorProfile::sum_weighted([1, 0, 2]).is_err());
        assert!(FactorProfile::from_id(9, &[]).is_err());
        assert!(FactorProfile::from_id(4, &[1, 2]).is_err());
    }

    #[test]
    fn triple_sum_rank_unrank_roundtrip() {
        for d in [7u8, 255] {
            for s in [0u16, 1, 5, 2 * d as u16, 3 * d as u16 - 1] {
                let idx = TripleSumIndex::new(d, s);
                for sn in 0..idx.total().min(500) {
                    let g = idx.unrank(sn);
                    assert_eq!(group_sum(&g), s);
                    assert!(g.iter().all(|&x| x <= d));
                    assert_eq!(idx.rank(g), sn);
                }
            }
        }
    }

    #[test]
    fn roundtrip_ten_thousand_random_groups_per_profile() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x514);
        let mut cache = EnumCache::new(255);
        for profile in profiles_under_test() {
            let n = profile.group_size();
            for _ in 0..10_000 {
                let group: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
                let ctx = matches!(profile, FactorProfile::SumRange).then(|| {
                    let lo = group.iter().copied().min().unwrap();
                    let hi = group.iter().copied().max().unwrap();
                    // Widen the block extremes around the pair sometimes.
                    BlockContext {
                        min: lo.saturating_sub(rng.gen_range(0..20)),
                        max: hi.saturating_add(rng.gen_range(0..20)),
                    }
                });
                let k: u128 = rng.gen();
                let mut work = group.clone();
                substitute_group(&mut work, &profile, ctx, k, &mut cache).unwrap();
                desubstitute_group(&mut work, &profile, ctx, k, &mut cache).unwrap();
                assert_eq!(work, group, "profile {}", profile.name());
            }
        }
    }

    fn profiles_under_test() -> Vec<FactorProfile> {
        vec![
            FactorProfile::SumOnly { group_size: 2 },
            FactorProfile::SumOnly { group_size: 3 },
            FactorProfile::SumGeoMean,
            FactorProfile::SumRange,
            FactorProfile::sum_weighted([1, 2, 3]).unwrap(),
            FactorProfile::sum_weighted([4, 4, 4]).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

        #[test]
        fn roundtrip_and_invariants(
            raw in proptest::collection::vec(0u8..=255, 3),
            extra in proptest::collection::vec(0u8..=255, 16),
            k in any::<u128>(),
            which in 0usize..6,
        ) {
            let profile = profiles_under_test()[which].clone();
            let n = profile.group_size();
            let mut block = extra.clone();
            block.extend_from_slice(&raw);
            let group: Vec<u8> = raw[..n].to_vec();
            let ctx = if matches!(profile, FactorProfile::SumRange) {
                // Group members must live inside the block.
                let mut pixels = block.clone();
                pixels.extend_from_slice(&group);
                Some(BlockContext::of(&pixels))
            } else {
                None
            };

            let out = sub(&group, &profile, ctx, k);
            prop_assert_eq!(group_sum(&out), group_sum(&group));
            match &profile {
                FactorProfile::SumGeoMean => {
                    let p_in: u64 = group.iter().map(|&x| x as u64).product();
                    let p_out: u64 = out.iter().map(|&x| x as u64).product();
                    prop_assert_eq!(p_in, p_out);
                }
                FactorProfile::SumWeightedMean { weights } => {
                    let wv = |g: &[u8]| -> u32 {
                        g.iter().zip(weights).map(|(&x, &w)| x as u32 * w as u32).sum()
                    };
                    prop_assert_eq!(wv(&group), wv(&out));
                }
                FactorProfile::SumRange => {
                    let c = ctx.unwrap();
                    prop_assert!(out.iter().all(|&x| x >= c.min && x <= c.max));
                }
                _ => {}
            }

            let back = desub(&out, &profile, ctx, k);
            prop_assert_eq!(back, group);
        }
    }
}
