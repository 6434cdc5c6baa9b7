//! Leave-one-out U-statistics and the jackknife variance estimator.
//!
//! The canonical path makes one pass over the `C(n,m)` subsets, crediting each
//! kernel value to the `m` observations it involves. From those accumulators
//! `q_i` the sum of squares follows as
//! `(n-1) sum (U^i - U_n)^2 = m^2 (n-1) / (n-m)^2 * sum (q_i - U_n)^2`.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, guard_combinations, Combinations};
use crate::engine::{check_data, u_statistic, ElementarySymmetric};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::summation::{pairwise_sum_iter, PairwiseSum};

/// Relative spread of the `q_i` below which the sample counts as degenerate.
pub const DEGENERACY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackknifeSummary {
    pub n: usize,
    pub m: usize,
    pub u_n: f64,
    /// `U^i_{n-1}`, the statistic with observation `i` removed.
    pub leave_one_out: Vec<f64>,
    /// `C(n-1,m-1)^{-1}` times the sum of `h` over subsets containing `i`.
    pub q: Vec<f64>,
    /// `(n-1) sum_i (U^i - U_n)^2`.
    pub sum_sq: f64,
    /// `sum_sq / m^2`.
    pub variance_estimator: f64,
}

impl JackknifeSummary {
    fn from_q(n: usize, m: usize, u_n: f64, q: Vec<f64>, leave_one_out: Vec<f64>) -> Self {
        let centred = pairwise_sum_iter(q.iter().map(|&qi| (qi - u_n) * (qi - u_n)));
        let (nf, mf) = (n as f64, m as f64);
        // Ordered so that m = 1 reduces to centred / (n - 1) without extra rounding.
        let sum_sq = mf * mf * (nf - 1.0) / (nf - mf) * centred / (nf - mf);
        Self {
            n,
            m,
            u_n,
            leave_one_out,
            q,
            sum_sq,
            variance_estimator: sum_sq / (mf * mf),
        }
    }

    /// True when every observation carries the same share of the statistic,
    /// so all leave-one-out values coincide up to rounding.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.q.iter().fold(self.u_n.abs(), |a, q| a.max(q.abs()));
        let spread = self
            .q
            .iter()
            .fold(0.0f64, |a, q| a.max((q - self.u_n).abs()));
        spread.is_nan() || spread <= DEGENERACY_REL_TOL * scale || !self.sum_sq.is_finite()
    }

    /// `sqrt(n (n-1) sum (U^i - U_n)^2)`, the studentizing scale.
    pub fn jack_scale(&self) -> f64 {
        (self.n as f64 * self.sum_sq).sqrt()
    }
}

fn check_jackknife_data(data: &[f64], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "kernel order must be positive".into(),
        ));
    }
    check_data(data, m + 1)
}

/// `U^i_{n-1}` for each `i` by re-enumerating the reduced sample. This is
/// `n` times the work of [`jackknife_closed_form`].
pub fn leave_one_out(kernel: &Kernel, data: &[f64]) -> Result<Vec<f64>> {
    check_jackknife_data(data, kernel.order())?;
    let mut reduced = Vec::with_capacity(data.len() - 1);
    (0..data.len())
        .map(|i| {
            reduced.clear();
            reduced.extend(
                data.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &x)| x),
            );
            u_statistic(kernel, &reduced)
        })
        .collect()
}

/// `(n-1) sum (U^i - U_n)^2` straight from the definition.
pub fn naive_sum_sq(kernel: &Kernel, data: &[f64]) -> Result<f64> {
    let loo = leave_one_out(kernel, data)?;
    let u_n = u_statistic(kernel, data)?;
    let n = data.len() as f64;
    Ok((n - 1.0) * pairwise_sum_iter(loo.iter().map(|&u| (u - u_n) * (u - u_n))))
}

/// Jackknife summary from a single enumeration of all `m`-subsets.
pub fn jackknife_closed_form(kernel: &Kernel, data: &[f64]) -> Result<JackknifeSummary> {
    let m = kernel.order();
    check_jackknife_data(data, m)?;
    let n = data.len();
    guard_combinations(n, m)?;
    let mut total = PairwiseSum::new();
    let mut per_obs = vec![PairwiseSum::new(); n];
    let mut point = vec![0.0; m];
    let mut combos = Combinations::new(n, m);
    while let Some(idx) = combos.next_subset() {
        for (slot, &i) in point.iter_mut().zip(idx) {
            *slot = data[i];
        }
        let h = kernel.eval_unchecked(&point);
        total.push(h);
        for &i in idx {
            per_obs[i].push(h);
        }
    }
    let total = total.total();
    let containing = binomial(n - 1, m - 1);
    let avoiding = binomial(n - 1, m);
    let u_n = total / binomial(n, m);
    let sums: Vec<f64> = per_obs.iter().map(PairwiseSum::total).collect();
    let q = sums.iter().map(|s| s / containing).collect();
    let loo = sums.iter().map(|s| (total - s) / avoiding).collect();
    Ok(JackknifeSummary::from_q(n, m, u_n, q, loo))
}

/// Product-kernel summary in `O(n m)` using prefix and suffix elementary
/// symmetric polynomials: the sum over subsets containing `i` is
/// `x_i e_{m-1}(x without x_i)`.
pub fn jackknife_fast_product(data: &[f64], m: usize) -> Result<JackknifeSummary> {
    check_jackknife_data(data, m)?;
    let n = data.len();
    let width = m + 1;
    // prefix[i] = e(x_0..x_{i-1}), suffix[i] = e(x_i..x_{n-1}).
    let mut prefix = vec![0.0; (n + 1) * width];
    let mut suffix = vec![0.0; (n + 1) * width];
    let mut e = ElementarySymmetric::new(m);
    prefix[..width].copy_from_slice(e.coefficients());
    for (i, &x) in data.iter().enumerate() {
        e.push(x);
        prefix[(i + 1) * width..(i + 2) * width].copy_from_slice(e.coefficients());
    }
    let e_m_all = e.top();
    let mut e = ElementarySymmetric::new(m);
    suffix[n * width..].copy_from_slice(e.coefficients());
    for i in (0..n).rev() {
        e.push(data[i]);
        suffix[i * width..(i + 1) * width].copy_from_slice(e.coefficients());
    }
    let without = |i: usize, deg: usize| -> f64 {
        let p = &prefix[i * width..(i + 1) * width];
        let s = &suffix[(i + 1) * width..(i + 2) * width];
        (0..=deg).map(|j| p[j] * s[deg - j]).sum()
    };
    let containing = binomial(n - 1, m - 1);
    let avoiding = binomial(n - 1, m);
    let u_n = e_m_all / binomial(n, m);
    let q = (0..n)
        .map(|i| data[i] * without(i, m - 1) / containing)
        .collect();
    let loo = (0..n).map(|i| without(i, m) / avoiding).collect();
    Ok(JackknifeSummary::from_q(n, m, u_n, q, loo))
}

/// Closed-form summary, taking the product fast path when it applies.
pub fn jackknife_summary(kernel: &Kernel, data: &[f64]) -> Result<JackknifeSummary> {
    if kernel.is_product() {
        jackknife_fast_product(data, kernel.order())
    } else {
        jackknife_closed_form(kernel, data)
    }
}

/// `(n-1)/m^2 sum (U^i - U_n)^2`, consistent for `E h1^2` when `E h^2` is
/// finite.
pub fn arvesen_estimator(summary: &JackknifeSummary) -> f64 {
    summary.variance_estimator
}
