//! Exact Hoeffding-type expansions of the product statistics `h*` and `h**`
//! over finite supports, the degenerate-sum variance bound, and Monte Carlo
//! negligibility trends for the remainder terms of the jackknife sum.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, falling_factorial, for_each_grid_point, Combinations};
use crate::engine::{check_data, u_statistic, u_statistic_fast_product};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, TruncationRule};
use crate::sampler::{replication_seed, sample, Distribution};
use crate::summation::{pairwise_sum_iter, PairwiseSum};

/// Absolute tolerance for "conditional mean is zero".
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Absolute tolerance for pointwise reconstruction.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const MAX_LAB_SUPPORT: usize = 6;
pub const MAX_LAB_ORDER: usize = 3;

/// `h(x_1, x_2..x_m) * h(x_1..x_s, x_{m+1}..x_{2m-s})`: two kernel
/// evaluations sharing their leading `s` arguments.
#[derive(Debug, Clone)]
pub struct ProductStatistic {
    base: Kernel,
    shared: usize,
}

impl ProductStatistic {
    pub fn new(base: Kernel, shared: usize) -> Result<Self> {
        if shared == 0 || shared > base.order() {
            return Err(Error::InvalidArgument(format!(
                "shared count {shared} must lie in 1..={}",
                base.order()
            )));
        }
        Ok(Self { base, shared })
    }

    /// `h*`, arity `2m - 1`.
    pub fn h_star(base: Kernel) -> Self {
        Self { base, shared: 1 }
    }

    /// `h**`, arity `2m - 2`.
    pub fn h_double_star(base: Kernel) -> Result<Self> {
        Self::new(base, 2)
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn m(&self) -> usize {
        self.base.order()
    }

    pub fn shared(&self) -> usize {
        self.shared
    }

    pub fn arity(&self) -> usize {
        2 * self.m() - self.shared
    }

    fn in_first(&self, pos: usize) -> bool {
        pos < self.m()
    }

    fn in_second(&self, pos: usize) -> bool {
        pos < self.shared || pos >= self.m()
    }

    pub fn eval(&self, points: &[f64]) -> Result<f64> {
        if points.len() != self.arity() {
            return Err(Error::InvalidArgument(format!(
                "product statistic has arity {} but received {} points",
                self.arity(),
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite argument {bad}")));
        }
        Ok(self.eval_unchecked(points))
    }

    fn eval_unchecked(&self, points: &[f64]) -> f64 {
        let m = self.m();
        let first = self.base.eval_unchecked(&points[..m]);
        let mut second = Vec::with_capacity(m);
        second.extend_from_slice(&points[..self.shared]);
        second.extend_from_slice(&points[m..]);
        first * self.base.eval_unchecked(&second)
    }
}

/// One term `V_S` of the expansion: the alternating sum over nonempty
/// `D ⊆ S` of centred conditional expectations given `X_D`.
#[derive(Debug, Clone)]
pub struct VTerm {
    /// Conditioning positions, zero-based and increasing.
    pub positions: Vec<usize>,
    /// `(|S ∩ first factor|, |S ∩ second factor|)` for product statistics.
    pub shared_counts: Option<(usize, usize)>,
    support: Arc<[f64]>,
    /// Values over `support^|S|`, first position most significant.
    table: Vec<f64>,
}

impl VTerm {
    pub fn order(&self) -> usize {
        self.positions.len()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Value at the given support indices.
    pub fn eval_indices(&self, digits: &[usize]) -> f64 {
        self.table[linear_index(digits, self.support.len())]
    }

    /// Value at support points; errors when a point is off the support.
    pub fn eval(&self, points: &[f64]) -> Result<f64> {
        if points.len() != self.order() {
            return Err(Error::InvalidArgument(format!(
                "term of order {} received {} points",
                self.order(),
                points.len()
            )));
        }
        let digits = points
            .iter()
            .map(|x| {
                self.support
                    .iter()
                    .position(|s| s == x)
                    .ok_or_else(|| Error::Domain(format!("{x} is not a support point")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.eval_indices(&digits))
    }
}

#[derive(Debug, Clone)]
pub struct VExpansion {
    pub arity: usize,
    /// `E f(X_1..X_arity)`.
    pub mean: f64,
    /// One term per nonempty position subset, ordered by subset bitmask.
    pub terms: Vec<VTerm>,
    support: Arc<[f64]>,
    probs: Vec<f64>,
    values: Vec<f64>,
}

fn linear_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

fn mask_positions(mask: usize, arity: usize) -> Vec<usize> {
    (0..arity).filter(|j| mask >> j & 1 == 1).collect()
}

fn finite_law(dist: &Distribution) -> Result<(&[f64], &[f64])> {
    dist.finite_parts()
        .ok_or_else(|| Error::Unsupported(format!("{} is not a finite-support law", dist.name())))
}

/// Conditional expectations `E(f | X_D)` for every position subset `D`,
/// indexed by bitmask, each over `support^|D|`.
fn conditional_tables(values: &[f64], arity: usize, probs: &[f64]) -> Vec<Vec<f64>> {
    let k = probs.len();
    let mut tables = Vec::with_capacity(1 << arity);
    for mask in 0..(1usize << arity) {
        let len = k.pow(mask.count_ones());
        let mut acc = vec![0.0; len];
        for_each_grid_point(k, arity, |lin, digits| {
            let mut w = 1.0;
            let mut idx = 0;
            for (j, &d) in digits.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    idx = idx * k + d;
                } else {
                    w *= probs[d];
                }
            }
            acc[idx] += w * values[lin];
        });
        tables.push(acc);
    }
    tables
}

/// Largest `|E(g | X_T)|` over proper subsets `T` of the coordinates of `g`,
/// the empty set included.
fn max_proper_conditional_mean(table: &[f64], order: usize, probs: &[f64]) -> f64 {
    if order == 0 {
        return 0.0;
    }
    let full = (1usize << order) - 1;
    conditional_tables(table, order, probs)
        .iter()
        .enumerate()
        .filter(|&(mask, _)| mask != full)
        .flat_map(|(_, t)| t.iter())
        .fold(0.0, |a, v| a.max(v.abs()))
}

/// Expansion of an arbitrary function of `arity` arguments under a finite
/// law, by exact enumeration.
pub fn expand_function(
    f: impl Fn(&[f64]) -> f64,
    arity: usize,
    dist: &Distribution,
) -> Result<VExpansion> {
    let (support, probs) = finite_law(dist)?;
    let k = support.len();
    if arity == 0 || k.checked_pow(arity as u32).is_none_or(|c| c > 1_000_000) {
        return Err(Error::ResourceLimit(format!(
            "expansion over {k}^{arity} support tuples exceeds the limit"
        )));
    }
    let mut values = vec![0.0; k.pow(arity as u32)];
    let mut point = vec![0.0; arity];
    for_each_grid_point(k, arity, |lin, digits| {
        for (slot, &d) in point.iter_mut().zip(digits) {
            *slot = support[d];
        }
        values[lin] = f(&point);
    });
    let tables = conditional_tables(&values, arity, probs);
    let mean = tables[0][0];
    let support: Arc<[f64]> = support.into();
    let mut terms = Vec::with_capacity((1 << arity) - 1);
    for mask in 1..(1usize << arity) {
        let positions = mask_positions(mask, arity);
        let c = positions.len();
        let mut table = vec![0.0; k.pow(c as u32)];
        let mut sub = Vec::with_capacity(c);
        for_each_grid_point(k, c, |lin, digits| {
            let mut acc = PairwiseSum::new();
            // Nonempty submasks of `mask`.
            let mut d = mask;
            while d != 0 {
                sub.clear();
                for (slot, &pos) in positions.iter().enumerate() {
                    if d >> pos & 1 == 1 {
                        sub.push(digits[slot]);
                    }
                }
                let sign = if (c - d.count_ones() as usize).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                acc.push(sign * (tables[d][linear_index(&sub, k)] - mean));
                d = (d - 1) & mask;
            }
            table[lin] = acc.total();
        });
        terms.push(VTerm {
            positions,
            shared_counts: None,
            support: support.clone(),
            table,
        });
    }
    Ok(VExpansion {
        arity,
        mean,
        terms,
        support,
        probs: probs.to_vec(),
        values,
    })
}

/// Expansion of `h*` or `h**` with each term tagged by how many of its
/// positions fall in each kernel factor.
pub fn build_v_expansion(ps: &ProductStatistic, dist: &Distribution) -> Result<VExpansion> {
    let (support, _) = finite_law(dist)?;
    if support.len() > MAX_LAB_SUPPORT {
        return Err(Error::ResourceLimit(format!(
            "support of size {} exceeds the limit {MAX_LAB_SUPPORT}",
            support.len()
        )));
    }
    if ps.m() > MAX_LAB_ORDER {
        return Err(Error::ResourceLimit(format!(
            "kernel order {} exceeds the limit {MAX_LAB_ORDER}",
            ps.m()
        )));
    }
    let mut exp = expand_function(|x| ps.eval_unchecked(x), ps.arity(), dist)?;
    for term in &mut exp.terms {
        let s = term.positions.iter().filter(|&&p| ps.in_first(p)).count();
        let t = term.positions.iter().filter(|&&p| ps.in_second(p)).count();
        term.shared_counts = Some((s, t));
    }
    Ok(exp)
}

impl VExpansion {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// `max |f(x) - E f - sum_S V_S(x_S)|` over every support tuple.
    pub fn max_reconstruction_error(&self) -> f64 {
        let k = self.support.len();
        let mut worst = 0.0f64;
        let mut sub = Vec::with_capacity(self.arity);
        for_each_grid_point(k, self.arity, |lin, digits| {
            let mut acc = PairwiseSum::new();
            acc.push(self.mean);
            for term in &self.terms {
                sub.clear();
                sub.extend(term.positions.iter().map(|&p| digits[p]));
                acc.push(term.eval_indices(&sub));
            }
            worst = worst.max((acc.total() - self.values[lin]).abs());
        });
        worst
    }

    /// Largest proper-subset conditional mean of `term`.
    pub fn term_conditional_mean(&self, term: &VTerm) -> f64 {
        max_proper_conditional_mean(&term.table, term.order(), &self.probs)
    }
}

/// True iff every proper-subset conditional mean of the term vanishes within
/// [`DEGENERACY_TOL`].
pub fn check_degeneracy(term: &VTerm, dist: &Distribution) -> Result<bool> {
    let (support, probs) = finite_law(dist)?;
    if support != &term.support[..] {
        return Err(Error::InvalidArgument(
            "term was built over a different support".into(),
        ));
    }
    Ok(max_proper_conditional_mean(&term.table, term.order(), probs) <= DEGENERACY_TOL)
}

/// Whether `L - mu` is degenerate: all conditional means given proper subsets
/// of its `r` arguments vanish.
pub fn check_function_degeneracy(
    l: impl Fn(&[f64]) -> f64,
    r: usize,
    mu: f64,
    dist: &Distribution,
) -> Result<bool> {
    Ok(function_conditional_mean(&l, r, mu, dist)? <= DEGENERACY_TOL)
}

fn function_table(l: &impl Fn(&[f64]) -> f64, r: usize, mu: f64, support: &[f64]) -> Vec<f64> {
    let k = support.len();
    let mut table = vec![0.0; k.pow(r as u32)];
    let mut point = vec![0.0; r];
    for_each_grid_point(k, r, |lin, digits| {
        for (slot, &d) in point.iter_mut().zip(digits) {
            *slot = support[d];
        }
        table[lin] = l(&point) - mu;
    });
    table
}

fn function_conditional_mean(
    l: &impl Fn(&[f64]) -> f64,
    r: usize,
    mu: f64,
    dist: &Distribution,
) -> Result<f64> {
    let (support, probs) = finite_law(dist)?;
    Ok(max_proper_conditional_mean(
        &function_table(l, r, mu, support),
        r,
        probs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub id: usize,
    /// One-based tuple positions.
    pub conditioning_set: Vec<usize>,
    pub shared_counts: Option<(usize, usize)>,
    pub max_conditional_mean: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub m: usize,
    pub shared: usize,
    pub arity: usize,
    pub support: Vec<f64>,
    pub mean: f64,
    pub terms: Vec<TermReport>,
    pub all_degenerate: bool,
    pub max_reconstruction_error: f64,
    pub reconstruction_pass: bool,
}

/// Builds the expansion and checks degeneracy and reconstruction.
pub fn verify_expansion(ps: &ProductStatistic, dist: &Distribution) -> Result<DecompositionReport> {
    let exp = build_v_expansion(ps, dist)?;
    let terms: Vec<TermReport> = exp
        .terms
        .iter()
        .enumerate()
        .map(|(id, t)| {
            let worst = exp.term_conditional_mean(t);
            TermReport {
                id,
                conditioning_set: t.positions.iter().map(|p| p + 1).collect(),
                shared_counts: t.shared_counts,
                max_conditional_mean: worst,
                degenerate: worst <= DEGENERACY_TOL,
            }
        })
        .collect();
    let err = exp.max_reconstruction_error();
    Ok(DecompositionReport {
        m: ps.m(),
        shared: ps.shared(),
        arity: ps.arity(),
        support: exp.support().to_vec(),
        mean: exp.mean,
        all_degenerate: terms.iter().all(|t| t.degenerate),
        terms,
        max_reconstruction_error: err,
        reconstruction_pass: err <= RECONSTRUCTION_TOL,
    })
}

/// Exact comparison of `E([n]^{-r} sum (L - mu))^2` over distinct ordered
/// `r`-tuples with `[n]^{-r} E(L - mu)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateSumReport {
    pub n: usize,
    pub r: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; absent when both vanish.
    pub ratio: Option<f64>,
    /// Constant in the bound `lhs <= C rhs` as usually stated.
    pub stated_constant: f64,
    /// `r!`, attained by symmetric `L`.
    pub corrected_constant: f64,
    pub symmetric: bool,
    pub satisfies_stated_bound: bool,
    pub satisfies_corrected_bound: bool,
}

pub const DEGENERATE_SUM_MAX_ARITY: usize = 3;
pub const DEGENERATE_SUM_MAX_N: usize = 8;
pub const DEGENERATE_SUM_MAX_SUPPORT: usize = 4;

pub fn degenerate_sum_bound(
    l: impl Fn(&[f64]) -> f64,
    r: usize,
    mu: f64,
    dist: &Distribution,
    n: usize,
) -> Result<DegenerateSumReport> {
    let (support, probs) = finite_law(dist)?;
    let k = support.len();
    if r == 0 || r > DEGENERATE_SUM_MAX_ARITY {
        return Err(Error::InvalidArgument(format!(
            "arity must lie in 1..={DEGENERATE_SUM_MAX_ARITY}"
        )));
    }
    if n < r {
        return Err(Error::InsufficientData { needed: r, got: n });
    }
    if n > DEGENERATE_SUM_MAX_N || k > DEGENERATE_SUM_MAX_SUPPORT {
        return Err(Error::ResourceLimit(format!(
            "exact enumeration needs n <= {DEGENERATE_SUM_MAX_N} and support <= {DEGENERATE_SUM_MAX_SUPPORT}"
        )));
    }
    let table = function_table(&l, r, mu, support);
    let worst = max_proper_conditional_mean(&table, r, probs);
    if worst > DEGENERACY_TOL {
        return Err(Error::PreconditionViolation(format!(
            "L - mu is not degenerate: a proper conditional mean reaches {worst:e}"
        )));
    }
    let count = falling_factorial(n, r);
    // Every ordered tuple of distinct positions, flattened.
    let mut tuples = Vec::new();
    crate::combinatorics::for_each_ordered_distinct(n, r, |idx| tuples.extend_from_slice(idx));

    let mut lhs = PairwiseSum::new();
    let mut digits_r = vec![0usize; r];
    for_each_grid_point(k, n, |_, outcome| {
        let w: f64 = outcome.iter().map(|&d| probs[d]).product();
        if w == 0.0 {
            return;
        }
        let mut s = PairwiseSum::new();
        for tuple in tuples.chunks_exact(r) {
            for (slot, &pos) in digits_r.iter_mut().zip(tuple) {
                *slot = outcome[pos];
            }
            s.push(table[linear_index(&digits_r, k)]);
        }
        let mean = s.total() / count;
        lhs.push(w * mean * mean);
    });
    let lhs = lhs.total();

    let mut second = PairwiseSum::new();
    let mut symmetric = true;
    let mut perm_digits = vec![0usize; r];
    for_each_grid_point(k, r, |lin, digits| {
        let w: f64 = digits.iter().map(|&d| probs[d]).product();
        second.push(w * table[lin] * table[lin]);
        // Symmetry under every adjacent transposition.
        for j in 0..r.saturating_sub(1) {
            perm_digits.copy_from_slice(digits);
            perm_digits.swap(j, j + 1);
            let other = table[linear_index(&perm_digits, k)];
            if (other - table[lin]).abs() > 1e-14 * table[lin].abs().max(1.0) {
                symmetric = false;
            }
        }
    });
    let rhs = second.total() / count;
    let corrected = factorial(r);
    let slack = |bound: f64| lhs <= bound * rhs * (1.0 + 1e-12) + 1e-15;
    Ok(DegenerateSumReport {
        n,
        r,
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
        stated_constant: 1.0,
        corrected_constant: corrected,
        symmetric,
        satisfies_stated_bound: slack(1.0),
        satisfies_corrected_bound: slack(corrected),
    })
}

/// Remainder statistics of the jackknife sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegligibilityStatistic {
    /// `(U_n - theta)^2`.
    #[serde(rename = "P1_UN_SQ")]
    P1UnSq,
    /// `[n]^{-2m+1}` times the sum of `h^2` over distinct ordered `m`-tuples.
    #[serde(rename = "P3_DIAG_SQUARE")]
    P3DiagSquare,
    /// `[n]^{-2m+1}` times the sum over distinct ordered `(2m-2)`-tuples of
    /// `h(x_1, x_2, x_3..x_m) h(x_1, x_2, x_{m+1}..x_{2m-2})`, for `m = 3`.
    #[serde(rename = "P4_SHARED_J")]
    P4SharedJ,
}

impl NegligibilityStatistic {
    pub fn id(self) -> &'static str {
        match self {
            Self::P1UnSq => "P1_UN_SQ",
            Self::P3DiagSquare => "P3_DIAG_SQUARE",
            Self::P4SharedJ => "P4_SHARED_J",
        }
    }
}

/// Largest sample size per kernel order for the trend runs.
pub fn negligibility_max_n(m: usize) -> Option<usize> {
    match m {
        1 | 2 => Some(400),
        3 => Some(60),
        _ => None,
    }
}

/// Value of `stat` on one sample. `theta` is used only by `P1UnSq`.
pub fn negligibility_statistic(
    stat: NegligibilityStatistic,
    kernel: &Kernel,
    theta: f64,
    data: &[f64],
) -> Result<f64> {
    let m = kernel.order();
    let n = data.len();
    match stat {
        NegligibilityStatistic::P1UnSq => {
            let u = if kernel.is_product() {
                u_statistic_fast_product(data, m)?
            } else {
                u_statistic(kernel, data)?
            };
            Ok((u - theta) * (u - theta))
        }
        NegligibilityStatistic::P3DiagSquare => {
            check_data(data, m)?;
            let sum_sq = if kernel.is_product() {
                let squares: Vec<f64> = data.iter().map(|x| x * x).collect();
                u_statistic_fast_product(&squares, m)? * crate::combinatorics::binomial(n, m)
            } else {
                let sq = Kernel::custom("h^2", m, {
                    let k = kernel.clone();
                    move |x| {
                        let h = k.eval_unchecked(x);
                        h * h
                    }
                })?;
                u_statistic(&sq, data)? * crate::combinatorics::binomial(n, m)
            };
            Ok(factorial(m) * sum_sq / falling_factorial(n, 2 * m - 1))
        }
        NegligibilityStatistic::P4SharedJ => {
            if m != 3 {
                return Err(Error::InvalidArgument(format!(
                    "the shared-pair statistic is defined for m = 3, got m = {m}"
                )));
            }
            check_data(data, 4)?;
            // For each ordered pair (i, j) with A = sum_k h(i, j, k) and
            // B = sum_k h(i, j, k)^2 over k outside {i, j}, the sum over
            // distinct (k, l) of h(i, j, k) h(i, j, l) is A^2 - B.
            let mut total = PairwiseSum::new();
            let mut point = [0.0; 3];
            for i in 0..n {
                for j in (i + 1)..n {
                    let (mut a, mut b) = (PairwiseSum::new(), PairwiseSum::new());
                    point[0] = data[i];
                    point[1] = data[j];
                    for (kk, &x) in data.iter().enumerate() {
                        if kk == i || kk == j {
                            continue;
                        }
                        point[2] = x;
                        let h = kernel.eval_unchecked(&point);
                        a.push(h);
                        b.push(h * h);
                    }
                    let a = a.total();
                    // The ordered pairs (i, j) and (j, i) contribute equally.
                    total.push(2.0 * (a * a - b.total()));
                }
            }
            Ok(total.total() / falling_factorial(n, 5))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub statistic: String,
    pub rows: Vec<TrendRow>,
    /// First-grid mean divided by last-grid mean.
    pub first_to_last: f64,
    /// The mean drops by at least a factor of two across the grid.
    pub decreasing: bool,
}

pub const TREND_FACTOR: f64 = 2.0;

impl TrendTable {
    fn new(statistic: String, rows: Vec<TrendRow>) -> Self {
        let first = rows.first().map_or(0.0, |r| r.mean);
        let last = rows.last().map_or(0.0, |r| r.mean);
        let first_to_last = first / last;
        Self {
            statistic,
            decreasing: first > 0.0 && last * TREND_FACTOR <= first,
            first_to_last,
            rows,
        }
    }
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum_iter(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = pairwise_sum_iter(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_grid(n_grid: &[usize], replications: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "n_grid must be nonempty and strictly ascending".into(),
        ));
    }
    if replications < 2 {
        return Err(Error::InvalidArgument(
            "need at least two replications".into(),
        ));
    }
    Ok(())
}

/// Runs `stat` for `replications` seeded samples at each grid size.
/// Replication `r` at grid index `g` uses seed index `g * replications + r`.
fn replicate(
    dist: &Distribution,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
    stat: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<Vec<TrendRow>> {
    n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let values = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let idx = (g * replications + r) as u64;
                    let data = sample(dist, n, replication_seed(seed, idx))?;
                    stat(&data).map(f64::abs)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, se) = mean_se(&values);
            Ok(TrendRow { n, mean, se })
        })
        .collect()
}

/// Monte Carlo mean of `|stat|` along `n_grid`.
pub fn negligibility_trend(
    stat: NegligibilityStatistic,
    kernel: &Kernel,
    dist: &Distribution,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<TrendTable> {
    check_grid(n_grid, replications)?;
    let m = kernel.order();
    let cap = negligibility_max_n(m).ok_or_else(|| {
        Error::ResourceLimit(format!("negligibility runs support m <= 3, got m = {m}"))
    })?;
    if let Some(&big) = n_grid.iter().find(|&&n| n > cap) {
        return Err(Error::ResourceLimit(format!(
            "n = {big} exceeds {cap} for m = {m}"
        )));
    }
    let theta = match stat {
        NegligibilityStatistic::P1UnSq => kernel.bind(dist)?.theta().ok_or_else(|| {
            Error::Unsupported(format!(
                "theta unknown for {} under {}",
                kernel.name(),
                dist.name()
            ))
        })?,
        _ => 0.0,
    };
    let rows = replicate(dist, n_grid, replications, seed, |data| {
        negligibility_statistic(stat, kernel, theta, data)
    })?;
    Ok(TrendTable::new(stat.id().into(), rows))
}

/// Whether some `m`-subset of `data` has `|h| > n^{3m/5}`.
pub fn truncation_changes_sample(kernel: &Kernel, data: &[f64]) -> Result<bool> {
    let m = kernel.order();
    check_data(data, m)?;
    let c = TruncationRule::full_m(data.len()).threshold(m)?;
    if kernel.is_product() {
        // The largest |product| over m-subsets uses the m largest |x|.
        let mut abs: Vec<f64> = data.iter().map(|x| x.abs()).collect();
        abs.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
        return Ok(abs[..m].iter().product::<f64>() > c);
    }
    crate::combinatorics::guard_combinations(data.len(), m)?;
    let mut point = vec![0.0; m];
    let mut combos = Combinations::new(data.len(), m);
    while let Some(idx) = combos.next_subset() {
        for (slot, &i) in point.iter_mut().zip(idx) {
            *slot = data[i];
        }
        if kernel.eval_unchecked(&point).abs() > c {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Monte Carlo frequency with which the full-order truncation alters some
/// evaluated tuple, along `n_grid`.
pub fn truncation_coupling_trend(
    kernel: &Kernel,
    dist: &Distribution,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<TrendTable> {
    check_grid(n_grid, replications)?;
    let rows = replicate(dist, n_grid, replications, seed, |data| {
        Ok(if truncation_changes_sample(kernel, data)? {
            1.0
        } else {
            0.0
        })
    })?;
    Ok(TrendTable::new("TRUNCATION_COUPLING".into(), rows))
}
