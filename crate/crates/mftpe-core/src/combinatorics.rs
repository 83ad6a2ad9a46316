//! Exact counting and ordered enumeration of bounded pixel vectors.
//!
//! `psi(d, s, n)` counts length-`n` vectors over `[0, d]` with element sum
//! `s`. The enumerators list the constrained vector sets used by the
//! substitution ciphers (fixed sum and product, fixed sum and weighted sum,
//! and the in-range window for sum/range pairs) in strict lexicographic
//! order, which is the canonical rank order throughout the crate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// Memoized table of vector counts, keyed by `(d, n)` rows.
///
/// Row `n` is derived from row `n - 1` by the convolution
/// `psi(s, n) = sum_{i=0}^{min(s, d)} psi(s - i, n - 1)`, evaluated as a
/// sliding window over prefix sums. Values are arbitrary precision; the
/// counts grow past 64 bits once block products over many groups are taken.
type RowCache = HashMap<(u8, u32), Arc<Vec<BigUint>>>;

pub struct PsiTable {
    rows: Mutex<RowCache>,
}

impl PsiTable {
    pub fn new() -> Self {
        PsiTable {
            rows: Mutex::new(HashMap::new()),
        }
    }

    /// Number of vectors in `[0, d]^n` with element sum `s`.
    ///
    /// Out-of-range sums return 0.
    pub fn psi(&self, d: u8, s: u64, n: u32) -> BigUint {
        assert!(n >= 1, "vector length must be at least 1");
        if s > d as u64 * n as u64 {
            return BigUint::zero();
        }
        let row = self.row(d, n);
        row[s as usize].clone()
    }

    /// `psi` narrowed to u64; `None` when the count does not fit.
    pub fn psi_u64(&self, d: u8, s: u64, n: u32) -> Option<u64> {
        self.psi(d, s, n).to_u64()
    }

    /// Full row of counts for sums `0 ..= d * n`.
    pub fn row(&self, d: u8, n: u32) -> Arc<Vec<BigUint>> {
        assert!(n >= 1);
        let mut rows = self.rows.lock().unwrap();
        if let Some(row) = rows.get(&(d, n)) {
            return Arc::clone(row);
        }
        // Build every missing row from 1 up to n.
        let mut prev: Option<Arc<Vec<BigUint>>> = None;
        for k in 1..=n {
            if let Some(row) = rows.get(&(d, k)) {
                prev = Some(Arc::clone(row));
                continue;
            }
            let row = match &prev {
                None => {
                    debug_assert_eq!(k, 1);
                    Arc::new(vec![BigUint::from(1u32); d as usize + 1])
                }
                Some(prev_row) => {
                    let len = d as usize * k as usize + 1;
                    let mut prefix = Vec::with_capacity(prev_row.len() + 1);
                    prefix.push(BigUint::zero());
                    for v in prev_row.iter() {
                        let last = prefix.last().unwrap().clone();
                        prefix.push(last + v);
                    }
                    let mut row = Vec::with_capacity(len);
                    for s in 0..len {
                        let hi = s.min(prev_row.len() - 1);
                        let mut val = prefix[hi + 1].clone();
                        if s > d as usize {
                            val -= &prefix[s - d as usize];
                        }
                        row.push(val);
                    }
                    Arc::new(row)
                }
            };
            rows.insert((d, k), Arc::clone(&row));
            prev = Some(row);
        }
        Arc::clone(rows.get(&(d, n)).unwrap())
    }
}

impl Default for PsiTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Inclusive bounds of the first element over pairs in `[0, d]^2` summing
/// to `s`. The pair set enumerated lexicographically is
/// `(lo, s - lo), (lo + 1, s - lo - 1), ...`.
pub fn pair_first_bounds(d: u8, s: u16) -> (u16, u16) {
    (s.saturating_sub(d as u16), (d as u16).min(s))
}

/// Closed-form `psi(d, s, 2)`.
pub fn psi_pair(d: u8, s: u16) -> u64 {
    if s > 2 * d as u16 {
        return 0;
    }
    let (lo, hi) = pair_first_bounds(d, s);
    (hi - lo + 1) as u64
}

/// All triples `(i, j, k)` in `[0, d]^3` with `i + j + k = s` and
/// `i * j * k = p`, in lexicographic `(i, j)` order.
///
/// For `p > 0` the inner loop collapses: given `i | p`, the remaining two
/// elements are the roots of `x^2 - (s - i) x + p / i`, so each `i`
/// contributes at most two triples. For `p = 0` at least one element is
/// zero, which is equally direct. Empty when no solution exists.
pub fn enumerate_sum_product(d: u8, s: u16, p: u64) -> Vec<[u8; 3]> {
    let d16 = d as u16;
    let mut out = Vec::new();
    if s > 3 * d16 {
        return out;
    }
    let i_hi = d16.min(s);
    if p == 0 {
        for i in 0..=i_hi {
            let t = s - i;
            if i == 0 {
                let (j_lo, j_hi) = pair_first_bounds(d, t);
                for j in j_lo..=j_hi {
                    out.push([0, j as u8, (t - j) as u8]);
                }
            } else if t <= d16 {
                out.push([i as u8, 0, t as u8]);
                if t != 0 {
                    out.push([i as u8, t as u8, 0]);
                }
            }
        }
    } else {
        for i in 1..=i_hi {
            if !p.is_multiple_of(i as u64) {
                continue;
            }
            let q = p / i as u64;
            // j * k = q with j, k <= d caps the feasible q.
            if q > d as u64 * d as u64 {
                continue;
            }
            let t = (s - i) as u64;
            if t * t < 4 * q {
                continue;
            }
            let disc = t * t - 4 * q;
            let r = disc.isqrt();
            if r * r != disc || !(t - r).is_multiple_of(2) {
                continue;
            }
            let j = (t - r) / 2;
            let k = (t + r) / 2;
            if k > d as u64 {
                continue;
            }
            out.push([i as u8, j as u8, k as u8]);
            if j != k {
                out.push([i as u8, k as u8, j as u8]);
            }
        }
    }
    out
}

/// All triples `(i, j, k)` in `[0, d]^3` with `i + j + k = s` and
/// `i*w1 + j*w2 + k*w3 = v`, in lexicographic `(i, j)` order.
///
/// With `i` fixed, `j (w2 - w3) = v - i w1 - (s - i) w3` pins `j` unless
/// `w2 = w3`, in which case either every split of the remainder works or
/// none does.
pub fn enumerate_sum_weighted(d: u8, s: u16, v: u32, w: [u8; 3]) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    if s > 3 * d as u16 {
        return out;
    }
    let (w1, w2, w3) = (w[0] as i64, w[1] as i64, w[2] as i64);
    for i in 0..=(d as u16).min(s) {
        let t = (s - i) as i64;
        let rem = v as i64 - i as i64 * w1 - t * w3;
        let j_lo = (t - d as i64).max(0);
        let j_hi = (d as i64).min(t);
        if w2 == w3 {
            if rem == 0 {
                for j in j_lo..=j_hi {
                    out.push([i as u8, j as u8, (t - j) as u8]);
                }
            }
        } else {
            let dw = w2 - w3;
            if rem % dw == 0 {
                let j = rem / dw;
                if j >= j_lo && j <= j_hi {
                    out.push([i as u8, j as u8, (t - j) as u8]);
                }
            }
        }
    }
    out
}

/// The in-range window for a pair with sum `s` inside a block whose
/// extremes are `block_min` and `block_max`.
///
/// A first element `a` with both `a` and `s - a` strictly between the block
/// extremes satisfies `alpha <= a <= beta`. The window is empty
/// (`beta < alpha`) exactly when every pair with this sum touches an
/// extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeWindow {
    pub alpha: i32,
    pub beta: i32,
}

impl RangeWindow {
    pub fn size(&self) -> u32 {
        if self.beta < self.alpha {
            0
        } else {
            (self.beta - self.alpha + 1) as u32
        }
    }

    pub fn contains(&self, a: u8) -> bool {
        (a as i32) >= self.alpha && (a as i32) <= self.beta
    }
}

pub fn sum_range_window(s: u16, block_min: u8, block_max: u8) -> RangeWindow {
    debug_assert!(block_min <= block_max);
    let alpha = (block_min as i32 + 1).max(s as i32 - block_max as i32 + 1);
    let beta = (s as i32 - block_min as i32 - 1).min(block_max as i32 - 1);
    RangeWindow { alpha, beta }
}

/// Natural log of an arbitrary-precision integer, usable far past the f64
/// range. `ln(0)` is negative infinity.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}
