//! Exact and log-space collision-probability analysis for thumbnails.
//!
//! The analyzer evaluates the collision formulas for fixed and random
//! blocks and images, in both notational readings of the ambiguous count
//! `A^2_psi` (the plain power `psi^2` and the falling factorial
//! `psi (psi - 1)`), and checks them against brute-force oracles that
//! enumerate the raw pixel space. The oracle never touches the `psi`
//! recurrence, so formula/oracle agreement is meaningful evidence.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::cipher::{BlockContext, FactorProfile};
use crate::combinatorics::{ln_biguint, sum_range_window, PsiTable};
use crate::error::{Error, Result};
use crate::image::{partition, Image};

/// Past this many total numerator+denominator bits, probabilities are
/// carried in log space only.
const EXACT_BIT_LIMIT: u64 = 1_000_000;

/// State-count guard for the brute-force oracles.
const ORACLE_STATE_LIMIT: u128 = 10_000_000;

/// A probability carried exactly as a reduced rational whenever its size
/// permits, with a natural-log value always available. The two views agree
/// to 1e-12 relative error wherever both exist.
#[derive(Debug, Clone)]
pub struct Probability {
    exact: Option<BigRational>,
    log_p: f64,
}

impl Probability {
    pub fn from_counts(num: BigUint, den: BigUint) -> Self {
        assert!(!den.is_zero());
        let log_p = ln_biguint(&num) - ln_biguint(&den);
        let exact = if num.bits() + den.bits() <= EXACT_BIT_LIMIT {
            Some(BigRational::new(BigInt::from(num), BigInt::from(den)))
        } else {
            None
        };
        Probability { exact, log_p }
    }

    pub fn from_ratio(ratio: BigRational) -> Self {
        debug_assert!(!ratio.is_negative());
        let log_p = ln_biguint(ratio.numer().magnitude()) - ln_biguint(ratio.denom().magnitude());
        let exact = if ratio.numer().bits() + ratio.denom().bits() <= EXACT_BIT_LIMIT {
            Some(ratio)
        } else {
            None
        };
        Probability { exact, log_p }
    }

    pub fn from_log(log_p: f64) -> Self {
        Probability { exact: None, log_p }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Natural log of the probability.
    pub fn ln(&self) -> f64 {
        self.log_p
    }

    pub fn to_f64(&self) -> f64 {
        match &self.exact {
            Some(r) => r.to_f64().unwrap_or_else(|| self.log_p.exp()),
            None => self.log_p.exp(),
        }
    }

    /// Reduced `num/den` form when the exact view exists.
    pub fn ratio_string(&self) -> Option<String> {
        self.exact
            .as_ref()
            .map(|r| format!("{}/{}", r.numer(), r.denom()))
    }

    /// Exact equality when both sides carry rationals, otherwise relative
    /// f64 agreement within `tol`.
    pub fn agrees_with(&self, other: &Probability, tol: f64) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if a == b {
                    return true;
                }
                (a - b).abs() <= tol * a.abs().max(b.abs())
            }
        }
    }

    /// JSON-friendly view.
    pub fn report(&self) -> ValueReport {
        ValueReport {
            rational: self.ratio_string(),
            value: self.to_f64(),
            ln: self.log_p,
            exact: self.is_exact(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueReport {
    pub rational: Option<String>,
    pub value: f64,
    pub ln: f64,
    pub exact: bool,
}

fn pow_big(base: u64, exp: u64) -> BigUint {
    BigUint::from(base).pow(u32::try_from(exp).expect("exponent fits u32"))
}

/// Collision probability of a fixed block with sum `s1` against one
/// uniformly random block: `psi(s1, n) / (d+1)^n`.
pub fn p_block_fixed_vs_random(psi: &PsiTable, d: u8, n: u32, s1: u64) -> Probability {
    Probability::from_counts(psi.psi(d, s1, n), pow_big(d as u64 + 1, n as u64))
}

/// The two readings of the two-random-blocks formula.
#[derive(Debug, Clone)]
pub struct TwoRandomReadings {
    /// `sum_s psi^2 / (d+1)^{2n}`; the reading the oracle confirms.
    pub psi_power: Probability,
    /// `(2 + sum_{s=1}^{dn-1} psi (psi - 1)) / (d+1)^{2n}`, the literal
    /// permutation-count reading. Reported for comparison; it disagrees
    /// with exhaustive enumeration (4/16 vs 6/16 at d=1, n=2).
    pub permutation: Probability,
}

fn two_random_numerators(psi: &PsiTable, d: u8, n: u32) -> (BigUint, BigUint) {
    let row = psi.row(d, n);
    let top = d as u64 * n as u64;
    let mut power = BigUint::zero();
    let mut falling = BigUint::from(2u32);
    for (s, count) in row.iter().enumerate() {
        power += count * count;
        if s >= 1 && (s as u64) < top && *count >= BigUint::from(2u32) {
            falling += count * (count - BigUint::one());
        }
    }
    (power, falling)
}

/// Collision probability of two uniformly random blocks of `n` pixels.
pub fn p_block_two_random(psi: &PsiTable, d: u8, n: u32) -> TwoRandomReadings {
    let (power, falling) = two_random_numerators(psi, d, n);
    let den = pow_big(d as u64 + 1, 2 * n as u64);
    TwoRandomReadings {
        psi_power: Probability::from_counts(power, den.clone()),
        permutation: Probability::from_counts(falling, den),
    }
}

/// Three random blocks: probability that at least two share a sum.
#[derive(Debug, Clone)]
pub struct ThreeBlockReadings {
    /// Inclusion-exclusion over the sum distribution:
    /// `3 sum q^2 - 2 sum q^3` with `q_s = psi(s, n) / (d+1)^n`.
    pub inclusion_exclusion: Probability,
    /// The literal published form
    /// `(2 + sum psi (psi-1) (psi-2)) / (d+1)^{2n}`, dimensionally odd for
    /// three blocks; reported as written, unverified.
    pub as_written: Probability,
}

pub fn p_block_three_any_pair(psi: &PsiTable, d: u8, n: u32) -> ThreeBlockReadings {
    let row = psi.row(d, n);
    let top = d as u64 * n as u64;
    let d1 = pow_big(d as u64 + 1, n as u64);
    let mut sum_sq = BigUint::zero();
    let mut sum_cu = BigUint::zero();
    let mut falling3 = BigUint::from(2u32);
    for (s, count) in row.iter().enumerate() {
        sum_sq += count * count;
        sum_cu += count * count * count;
        if s >= 1 && (s as u64) < top && *count >= BigUint::from(3u32) {
            falling3 += count * (count - BigUint::one()) * (count - BigUint::from(2u32));
        }
    }
    // 3 sum q^2 - 2 sum q^3 over the common denominator (d+1)^{3n}.
    let num = BigUint::from(3u32) * &sum_sq * &d1 - BigUint::from(2u32) * sum_cu;
    ThreeBlockReadings {
        inclusion_exclusion: Probability::from_counts(num, pow_big(d as u64 + 1, 3 * n as u64)),
        as_written: Probability::from_counts(falling3, pow_big(d as u64 + 1, 2 * n as u64)),
    }
}

/// Fixed image (per-block sums given) against one random image:
/// `prod_i psi(s_i, n) / (d+1)^{mn}`.
pub fn p_image_fixed_vs_random(psi: &PsiTable, d: u8, n: u32, sums: &[u64]) -> Probability {
    let mut num = BigUint::one();
    for &s in sums {
        num *= psi.psi(d, s, n);
    }
    Probability::from_counts(num, pow_big(d as u64 + 1, sums.len() as u64 * n as u64))
}

/// Two random images of `m` blocks each, both readings.
pub fn p_image_two_random(psi: &PsiTable, d: u8, n: u32, m: u32) -> TwoRandomReadings {
    let (power, falling) = two_random_numerators(psi, d, n);
    let den = pow_big(d as u64 + 1, 2 * m as u64 * n as u64);
    TwoRandomReadings {
        psi_power: Probability::from_counts(power.pow(m), den.clone()),
        permutation: Probability::from_counts(falling.pow(m), den),
    }
}

fn image_weight(psi: &PsiTable, d: u8, n: u32, sums: &[u64]) -> BigUint {
    sums.iter().map(|&s| psi.psi(d, s, n)).product()
}

/// Three images, the first two with given per-block sums, as published:
/// `1 - (1 - S1/D)(1 - S1 S2/D)` with `D = (d+1)^{mn}`.
///
/// The second factor divides a two-image count by a one-image state
/// space, so it can exceed one; that case errors instead of clamping.
pub fn p_image_three(
    psi: &PsiTable,
    d: u8,
    n: u32,
    s1: &[u64],
    s2: &[u64],
) -> Result<Probability> {
    assert_eq!(s1.len(), s2.len());
    let m = s1.len() as u64;
    let den = pow_big(d as u64 + 1, m * n as u64);
    let w1 = image_weight(psi, d, n, s1);
    let w12 = &w1 * image_weight(psi, d, n, s2);
    if w12 > den {
        return Err(Error::ProbabilityOverUnity(format!("S1*S2/D = {w12}/{den}")));
    }
    let d_rat = BigRational::from(BigInt::from(den));
    let f1 = BigRational::from(BigInt::from(w1)) / &d_rat;
    let f2 = BigRational::from(BigInt::from(w12)) / &d_rat;
    let one = BigRational::one();
    Ok(Probability::from_ratio(&one - (&one - f1) * (&one - f2)))
}

/// Collision probability across `N` images with given per-block sums.
#[derive(Debug, Clone)]
pub struct ChainCollision {
    /// Birthday chain with per-step normalization: survival factors
    /// `1 - prod_{j<=i} (S_j / D)` for `i = 1 .. N-1`. At `N = 2` this
    /// equals the fixed-image formula exactly.
    pub normalized: Probability,
    /// The literal published chain: factors `prod_{j<=i} S_j / D` for
    /// `i = 1 ..= N` over the constant denominator. `None` when a factor
    /// exceeds one, with the offending factor recorded.
    pub as_written: Option<Probability>,
    pub over_unity: Option<String>,
}

pub fn p_image_n(psi: &PsiTable, d: u8, n: u32, sums: &[Vec<u64>]) -> ChainCollision {
    assert!(sums.len() >= 2, "need at least two images");
    let m = sums[0].len() as u64;
    assert!(sums.iter().all(|s| s.len() as u64 == m));
    let den = pow_big(d as u64 + 1, m * n as u64);
    let weights: Vec<BigUint> = sums.iter().map(|s| image_weight(psi, d, n, s)).collect();

    let exact_ok = den.bits().saturating_mul(sums.len() as u64 * 4) <= EXACT_BIT_LIMIT;
    let ln_d = ln_biguint(&den);

    // Normalized chain: the i-th factor carries denominator D^i.
    let normalized = {
        let mut survival_exact = exact_ok.then(BigRational::one);
        let mut ln_acc = NeumaierSum::new();
        let mut running = BigUint::one();
        let mut ln_running = 0.0f64;
        for (i, w) in weights.iter().take(sums.len() - 1).enumerate() {
            running *= w;
            ln_running += ln_biguint(w);
            ln_acc.add(ln_1m_exp(ln_running - ln_d * (i as f64 + 1.0)));
            if let Some(acc) = survival_exact.as_mut() {
                let f = BigRational::new(
                    BigInt::from(running.clone()),
                    BigInt::from(den.pow(i as u32 + 1)),
                );
                *acc *= BigRational::one() - f;
            }
        }
        finish_chain(survival_exact, ln_acc.total())
    };

    // As-written chain: constant denominator D, factors for i = 1 ..= N.
    let mut as_written = None;
    let mut over_unity = None;
    {
        let mut survival_exact = exact_ok.then(BigRational::one);
        let mut ln_acc = NeumaierSum::new();
        let mut running = BigUint::one();
        let mut ln_running = 0.0f64;
        for w in weights.iter() {
            running *= w;
            ln_running += ln_biguint(w);
            if running > den {
                over_unity = Some(format!("{running}/{den}"));
                break;
            }
            ln_acc.add(ln_1m_exp(ln_running - ln_d));
            if let Some(acc) = survival_exact.as_mut() {
                let f =
                    BigRational::new(BigInt::from(running.clone()), BigInt::from(den.clone()));
                *acc *= BigRational::one() - f;
            }
        }
        if over_unity.is_none() {
            as_written = Some(finish_chain(survival_exact, ln_acc.total()));
        }
    }

    ChainCollision {
        normalized,
        as_written,
        over_unity,
    }
}

fn finish_chain(survival_exact: Option<BigRational>, ln_survival: f64) -> Probability {
    match survival_exact {
        Some(surv) => Probability::from_ratio(BigRational::one() - surv),
        None => {
            // 1 - exp(ln_survival), stably, then back to log space.
            let p = -f64::exp_m1(ln_survival);
            Probability::from_log(p.max(f64::MIN_POSITIVE).ln())
        }
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
fn ln_1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-f64::exp_m1(x)).ln()
    } else {
        f64::ln_1p(-x.exp())
    }
}

/// Neumaier-compensated accumulator.
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn new() -> Self {
        NeumaierSum { sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// What the brute-force oracle enumerates.
#[derive(Debug, Clone)]
pub enum OracleMode {
    /// Two random images; probability of equal per-block sum vectors.
    Pair,
    /// Three random images; probability that at least two collide.
    Triple,
    /// Fixed per-block sums against one random image.
    Fixed(Vec<u64>),
}

fn enumerate_sum_vectors(d: u8, n: u32, m: u32) -> Result<Vec<Vec<u16>>> {
    let digits = (m * n) as usize;
    let base = d as u128 + 1;
    let states = base.checked_pow(digits as u32).unwrap_or(u128::MAX);
    if states > ORACLE_STATE_LIMIT {
        return Err(Error::InstanceTooLarge {
            states,
            limit: ORACLE_STATE_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(states as usize);
    let mut pixels = vec![0u8; digits];
    loop {
        let sums: Vec<u16> = pixels
            .chunks(n as usize)
            .map(|block| block.iter().map(|&x| x as u16).sum())
            .collect();
        out.push(sums);
        let mut pos = 0;
        loop {
            if pos == digits {
                return Ok(out);
            }
            if (pixels[pos] as u128) + 1 < base {
                pixels[pos] += 1;
                break;
            }
            pixels[pos] = 0;
            pos += 1;
        }
    }
}

/// Exhaustive collision count over the raw pixel state space.
pub fn brute_force_collision(d: u8, n: u32, m: u32, mode: OracleMode) -> Result<Probability> {
    let vectors = enumerate_sum_vectors(d, n, m)?;
    let v = vectors.len() as u128;
    match mode {
        OracleMode::Fixed(target) => {
            let t: Vec<u16> = target.iter().map(|&s| s as u16).collect();
            let hits = vectors.iter().filter(|sv| **sv == t).count() as u64;
            Ok(Probability::from_counts(
                BigUint::from(hits),
                BigUint::from(v),
            ))
        }
        OracleMode::Pair => {
            if v * v <= ORACLE_STATE_LIMIT {
                let mut hits = 0u64;
                for a in &vectors {
                    for b in &vectors {
                        if a == b {
                            hits += 1;
                        }
                    }
                }
                Ok(Probability::from_counts(
                    BigUint::from(hits),
                    BigUint::from(v * v),
                ))
            } else {
                // Tally identical sum vectors instead of the quadratic scan.
                let mut counts: HashMap<&[u16], u64> = HashMap::new();
                for sv in &vectors {
                    *counts.entry(sv.as_slice()).or_default() += 1;
                }
                let hits: BigUint = counts.values().map(|&c| BigUint::from(c) * c).sum();
                Ok(Probability::from_counts(hits, BigUint::from(v * v)))
            }
        }
        OracleMode::Triple => {
            if v * v * v <= ORACLE_STATE_LIMIT {
                let mut hits = 0u64;
                for a in &vectors {
                    for b in &vectors {
                        for c in &vectors {
                            if a == b || a == c || b == c {
                                hits += 1;
                            }
                        }
                    }
                }
                Ok(Probability::from_counts(
                    BigUint::from(hits),
                    BigUint::from(v * v * v),
                ))
            } else {
                let mut counts: HashMap<&[u16], u64> = HashMap::new();
                for sv in &vectors {
                    *counts.entry(sv.as_slice()).or_default() += 1;
                }
                // All-distinct ordered triples from the tallies.
                let p1 = BigUint::from(v);
                let p2: BigUint = counts.values().map(|&c| BigUint::from(c) * c).sum();
                let p3: BigUint = counts.values().map(|&c| BigUint::from(c) * c * c).sum();
                let distinct = p1.pow(3) + BigUint::from(2u32) * p3 - BigUint::from(3u32) * &p1 * p2;
                let total = BigUint::from(v).pow(3);
                Ok(Probability::from_counts(&total - distinct, total))
            }
        }
    }
}

/// Exhaustive three-image oracle with the first two images' sums fixed:
/// enumerates every third image and counts any pairwise collision.
pub fn brute_force_three_fixed(
    d: u8,
    n: u32,
    m: u32,
    s1: &[u64],
    s2: &[u64],
) -> Result<Probability> {
    let vectors = enumerate_sum_vectors(d, n, m)?;
    let v = vectors.len() as u64;
    let t1: Vec<u16> = s1.iter().map(|&s| s as u16).collect();
    let t2: Vec<u16> = s2.iter().map(|&s| s as u16).collect();
    let hits = if t1 == t2 {
        v
    } else {
        vectors.iter().filter(|sv| **sv == t1 || **sv == t2).count() as u64
    };
    Ok(Probability::from_counts(
        BigUint::from(hits),
        BigUint::from(v),
    ))
}

/// Sum, over every pixel group of the given blocks, of the size of the
/// group's constrained set under the profile.
///
/// For the range profile this is the `alpha..beta` window size of each
/// pair, computed from the block extremes; that convention reproduces the
/// published two-block total of 642.
pub fn mftpe_group_totals(blocks: &[Vec<u8>], profile: &FactorProfile, psi: &PsiTable) -> BigUint {
    const D: u8 = 255;
    let n = profile.group_size();
    let mut total = BigUint::zero();
    for block in blocks {
        let ctx = BlockContext::of(block);
        for group in block.chunks_exact(n) {
            let s: u16 = group.iter().map(|&x| x as u16).sum();
            total += match profile {
                FactorProfile::SumOnly { .. } => psi.psi(D, s as u64, n as u32),
                FactorProfile::SumGeoMean => {
                    let p: u64 = group.iter().map(|&x| x as u64).product();
                    BigUint::from(crate::combinatorics::enumerate_sum_product(D, s, p).len())
                }
                FactorProfile::SumRange => {
                    BigUint::from(sum_range_window(s, ctx.min, ctx.max).size())
                }
                FactorProfile::SumWeightedMean { weights } => {
                    let v: u32 = group
                        .iter()
                        .zip(weights)
                        .map(|(&x, &w)| x as u32 * w as u32)
                        .sum();
                    BigUint::from(
                        crate::combinatorics::enumerate_sum_weighted(D, s, v, *weights).len(),
                    )
                }
            };
        }
    }
    total
}

/// `mftpe_group_totals` over the real blocks of an image.
pub fn mftpe_set_size_totals(
    image: &Image,
    block_size: u16,
    profile: &FactorProfile,
    psi: &PsiTable,
) -> Result<BigUint> {
    let grid = partition(image, block_size)?;
    let mut blocks = Vec::new();
    for c in 0..image.channels() {
        for idx in 0..grid.blocks_per_channel() {
            blocks.push(grid.read_block(image, c, idx));
        }
    }
    Ok(mftpe_group_totals(&blocks, profile, psi))
}
