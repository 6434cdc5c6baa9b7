//! Counting helpers and index-tuple enumeration.

use crate::error::{Error, Result};

/// Largest number of kernel evaluations a single exact enumeration may perform.
pub const MAX_ENUMERATION: u128 = 100_000_000;

/// Largest tuple arity accepted by ordered-tuple enumeration.
pub const MAX_ORDERED_ARITY: usize = 6;

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial_exact(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Binomial coefficient as a float. Exact whenever the value fits in 53 bits.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round_if_integral()
}

/// Falling factorial n!/(n-r)!, `None` on overflow.
pub fn falling_factorial_exact(n: usize, r: usize) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    (0..r).try_fold(1u128, |acc, i| acc.checked_mul((n - i) as u128))
}

/// Falling factorial n!/(n-r)! as a float.
pub fn falling_factorial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64)
}

pub fn factorial(r: usize) -> f64 {
    (1..=r).fold(1.0, |acc, i| acc * i as f64)
}

trait RoundIfIntegral {
    fn round_if_integral(self) -> Self;
}

impl RoundIfIntegral for f64 {
    fn round_if_integral(self) -> Self {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

/// Refuses enumerations above [`MAX_ENUMERATION`] terms.
pub(crate) fn guard_combinations(n: usize, m: usize) -> Result<u128> {
    match binomial_exact(n, m) {
        Some(c) if c <= MAX_ENUMERATION => Ok(c),
        _ => Err(Error::ResourceLimit(format!(
            "C({n},{m}) exceeds the enumeration limit of {MAX_ENUMERATION} evaluations"
        ))),
    }
}

/// Lexicographic iterator over the `k`-subsets of `0..n`, yielding index
/// slices in increasing order.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            first: true,
            done: k > n,
        }
    }

    /// Advances to the next subset and returns it, or `None` when exhausted.
    pub fn next_subset(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
        self.done = true;
        None
    }
}

/// Visits every ordered tuple of `r` distinct indices from `0..n`.
pub fn for_each_ordered_distinct(n: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(
        n: usize,
        r: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == r {
            visit(cur);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, r, used, cur, visit);
                cur.pop();
                used[i] = false;
            }
        }
    }
    if r > n {
        return;
    }
    let mut used = vec![false; n];
    let mut cur = Vec::with_capacity(r);
    rec(n, r, &mut used, &mut cur, &mut visit);
}

/// Visits every tuple in `0..base` of length `len` (mixed radix, first
/// coordinate most significant) together with its linear index.
pub fn for_each_grid_point(base: usize, len: usize, mut visit: impl FnMut(usize, &[usize])) {
    let total = base.pow(len as u32);
    let mut digits = vec![0usize; len];
    for lin in 0..total {
        visit(lin, &digits);
        for d in (0..len).rev() {
            digits[d] += 1;
            if digits[d] < base {
                break;
            }
            digits[d] = 0;
        }
    }
}
