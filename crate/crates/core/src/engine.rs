//! Exact U-statistics by enumeration, their prefix processes, and the
//! elementary-symmetric fast path for product kernels.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial, falling_factorial, falling_factorial_exact, for_each_ordered_distinct,
    guard_combinations, Combinations, MAX_ENUMERATION, MAX_ORDERED_ARITY,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::summation::PairwiseSum;

pub(crate) fn check_data(data: &[f64], needed: usize) -> Result<()> {
    if data.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: data.len(),
        });
    }
    if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite observation {bad}")));
    }
    Ok(())
}

/// `C(n,m)^{-1}` times the sum of `h` over all `m`-subsets of `data`.
pub fn u_statistic(kernel: &Kernel, data: &[f64]) -> Result<f64> {
    let m = kernel.order();
    check_data(data, m)?;
    guard_combinations(data.len(), m)?;
    let mut acc = PairwiseSum::new();
    let mut point = vec![0.0; m];
    let mut combos = Combinations::new(data.len(), m);
    while let Some(idx) = combos.next_subset() {
        for (slot, &i) in point.iter_mut().zip(idx) {
            *slot = data[i];
        }
        acc.push(kernel.eval_unchecked(&point));
    }
    Ok(acc.total() / binomial(data.len(), m))
}

/// `U_k` for every prefix length `k = m..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UPrefixValues {
    pub m: usize,
    /// `values[i]` is `U_{m+i}`.
    pub values: Vec<f64>,
}

impl UPrefixValues {
    pub fn n(&self) -> usize {
        self.m + self.values.len() - 1
    }

    /// `U_k`, or `None` when `k < m` or `k > n`.
    pub fn at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.m)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("prefix values are never empty")
    }
}

/// All prefix U-statistics in one pass: observation `k` contributes the
/// `C(k-1, m-1)` subsets that contain it.
pub fn u_prefix_process(kernel: &Kernel, data: &[f64]) -> Result<UPrefixValues> {
    let m = kernel.order();
    check_data(data, m)?;
    guard_combinations(data.len(), m)?;
    let mut acc = PairwiseSum::new();
    let mut point = vec![0.0; m];
    let mut values = Vec::with_capacity(data.len() - m + 1);
    for k in 1..=data.len() {
        point[m - 1] = data[k - 1];
        let mut combos = Combinations::new(k - 1, m - 1);
        while let Some(idx) = combos.next_subset() {
            for (slot, &i) in point.iter_mut().zip(idx) {
                *slot = data[i];
            }
            acc.push(kernel.eval_unchecked(&point));
        }
        if k >= m {
            values.push(acc.total() / binomial(k, m));
        }
    }
    Ok(UPrefixValues { m, values })
}

/// Elementary symmetric polynomials `e_0..=e_m`, updated one observation at a
/// time in `O(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementarySymmetric {
    e: Vec<f64>,
    count: usize,
}

impl ElementarySymmetric {
    pub fn new(m: usize) -> Self {
        let mut e = vec![0.0; m + 1];
        e[0] = 1.0;
        Self { e, count: 0 }
    }

    pub fn push(&mut self, x: f64) {
        let top = self.e.len() - 1;
        for j in (1..=top.min(self.count + 1)).rev() {
            self.e[j] += x * self.e[j - 1];
        }
        self.count += 1;
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.e
    }

    pub fn top(&self) -> f64 {
        self.e[self.e.len() - 1]
    }
}

/// Product-kernel U-statistic `e_m(data) / C(n,m)`.
pub fn u_statistic_fast_product(data: &[f64], m: usize) -> Result<f64> {
    Ok(u_prefix_fast_product(data, m)?.last())
}

/// Product-kernel prefix process via the elementary symmetric recursion.
pub fn u_prefix_fast_product(data: &[f64], m: usize) -> Result<UPrefixValues> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "kernel order must be positive".into(),
        ));
    }
    check_data(data, m)?;
    let mut e = ElementarySymmetric::new(m);
    let mut values = Vec::with_capacity(data.len() - m + 1);
    for (i, &x) in data.iter().enumerate() {
        e.push(x);
        let k = i + 1;
        if k >= m {
            values.push(e.top() / binomial(k, m));
        }
    }
    Ok(UPrefixValues { m, values })
}

/// Prefix process using the fast path whenever the kernel is a plain product.
pub fn prefix_values(kernel: &Kernel, data: &[f64]) -> Result<UPrefixValues> {
    if kernel.is_product() {
        u_prefix_fast_product(data, kernel.order())
    } else {
        u_prefix_process(kernel, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderedTupleSum {
    pub arity: usize,
    pub total: f64,
    /// `n! / (n - r)!`.
    pub count: u128,
}

impl OrderedTupleSum {
    /// `[n]^{-r}` times the total.
    pub fn mean(&self) -> f64 {
        self.total / self.count as f64
    }
}

/// Sums `f` over every ordered `r`-tuple of distinct indices.
pub fn ordered_distinct_sum(
    f: impl Fn(&[f64]) -> f64,
    data: &[f64],
    r: usize,
) -> Result<OrderedTupleSum> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "tuple arity must be positive".into(),
        ));
    }
    check_data(data, r)?;
    if r > MAX_ORDERED_ARITY {
        return Err(Error::ResourceLimit(format!(
            "ordered tuples of arity {r} exceed the limit {MAX_ORDERED_ARITY}"
        )));
    }
    let count = falling_factorial_exact(data.len(), r)
        .filter(|&c| c <= MAX_ENUMERATION)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "{} ordered tuples exceed the enumeration limit",
                falling_factorial(data.len(), r)
            ))
        })?;
    let mut acc = PairwiseSum::new();
    let mut point = vec![0.0; r];
    for_each_ordered_distinct(data.len(), r, |idx| {
        for (slot, &i) in point.iter_mut().zip(idx) {
            *slot = data[i];
        }
        acc.push(f(&point));
    });
    Ok(OrderedTupleSum {
        arity: r,
        total: acc.total(),
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert_eq!(
            u_statistic(&Kernel::identity(), &[1.0, 2.0, 3.0]).unwrap(),
            2.0
        );
        assert_eq!(u_statistic(&Kernel::variance(), &[0.0, 2.0]).unwrap(), 2.0);
        let p2 = Kernel::product(2).unwrap();
        assert_relative_eq!(
            u_statistic(&p2, &[1.0, 2.0, 3.0]).unwrap(),
            11.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn insufficient_data() {
        let p3 = Kernel::product(3).unwrap();
        assert_eq!(
            u_statistic(&p3, &[1.0, 2.0]),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        );
        assert!(u_prefix_process(&p3, &[1.0]).is_err());
        assert!(u_statistic_fast_product(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn enumeration_guard() {
        let p = Kernel::product(5).unwrap();
        let data = vec![1.0; 200];
        assert!(matches!(
            u_statistic(&p, &data),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn prefix_examples() {
        let p2 = Kernel::product(2).unwrap();
        let pre = u_prefix_process(&p2, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pre.at(2), Some(2.0));
        assert_relative_eq!(pre.at(3).unwrap(), 11.0 / 3.0, max_relative = 1e-15);
        assert_eq!(pre.at(1), None);
        assert_eq!(pre.n(), 3);

        let v = Kernel::variance();
        let pre = u_prefix_process(&v, &[4.0, 1.0]).unwrap();
        assert_eq!(pre.values, vec![4.5]);

        let pre = u_prefix_process(&Kernel::identity(), &[5.0, 1.0]).unwrap();
        assert_eq!(pre.values, vec![5.0, 3.0]);
    }

    #[test]
    fn fast_product_examples() {
        assert_relative_eq!(
            u_statistic_fast_product(&[1.0, 2.0, 3.0], 2).unwrap(),
            11.0 / 3.0,
            max_relative = 1e-15
        );
        assert_eq!(u_statistic_fast_product(&[1.0; 4], 3).unwrap(), 1.0);
        let mut e = ElementarySymmetric::new(2);
        for x in [1.0, 2.0, 3.0] {
            e.push(x);
        }
        assert_eq!(e.coefficients(), &[1.0, 6.0, 11.0]);
    }

    #[test]
    fn ordered_sum_examples() {
        let s = ordered_distinct_sum(|x| x[0] * x[1], &[1.0, 2.0], 2).unwrap();
        assert_eq!((s.total, s.count), (4.0, 2));
        let s = ordered_distinct_sum(|_| 1.0, &[0.0; 4], 3).unwrap();
        assert_eq!((s.total, s.count), (24.0, 24));
        let s = ordered_distinct_sum(|x| x[0], &[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(s.total, 12.0);
        assert!(matches!(
            ordered_distinct_sum(|_| 1.0, &[0.0; 8], 7),
            Err(Error::ResourceLimit(_))
        ));
        assert!(matches!(
            ordered_distinct_sum(|_| 1.0, &[0.0; 2], 3),
            Err(Error::InsufficientData { .. })
        ));
    }

    fn kernel_for(choice: usize, m: usize) -> Kernel {
        match choice {
            0 => Kernel::product(m).unwrap(),
            1 if m == 2 => Kernel::variance(),
            1 if m == 1 => Kernel::identity(),
            _ => Kernel::custom("sum-of-squares", m, |x| {
                x.iter().map(|v| v * v).sum::<f64>()
            })
            .unwrap(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn prefix_final_matches_direct(
            data in prop::collection::vec(-5f64..5.0, 3..=20),
            m in 1usize..=3,
            choice in 0usize..3,
        ) {
            let k = kernel_for(choice, m);
            let pre = u_prefix_process(&k, &data).unwrap();
            let direct = u_statistic(&k, &data).unwrap();
            prop_assert!((pre.last() - direct).abs() <= 1e-10 * direct.abs().max(1e-300));
            // Every prefix agrees with a fresh enumeration.
            for kk in m..=data.len() {
                let d = u_statistic(&k, &data[..kk]).unwrap();
                prop_assert!((pre.at(kk).unwrap() - d).abs() <= 1e-10 * d.abs().max(1e-12));
            }
        }

        #[test]
        fn fast_product_matches_enumeration(
            data in prop::collection::vec(-3f64..3.0, 4..=15),
            m in 1usize..=4,
        ) {
            let direct = u_statistic(&Kernel::product(m).unwrap(), &data).unwrap();
            let fast = u_statistic_fast_product(&data, m).unwrap();
            // Cancellation can make the statistic tiny; measure against the
            // mean absolute product as well.
            let scale = u_statistic(&Kernel::custom("abs", m, |x| x.iter().product::<f64>().abs()).unwrap(), &data).unwrap();
            prop_assert!((fast - direct).abs() <= 1e-10 * direct.abs().max(scale));
        }

        #[test]
        fn fast_product_relative_on_positive_data(
            data in prop::collection::vec(0.1f64..3.0, 4..=15),
            m in 1usize..=4,
        ) {
            let direct = u_statistic(&Kernel::product(m).unwrap(), &data).unwrap();
            let fast = u_statistic_fast_product(&data, m).unwrap();
            prop_assert!((fast - direct).abs() <= 1e-10 * direct.abs());
        }

        #[test]
        fn ordered_sum_is_factorial_times_unordered(
            data in prop::collection::vec(-4f64..4.0, 3..=9),
            r in 1usize..=3,
        ) {
            let k = kernel_for(0, r);
            let ordered = ordered_distinct_sum(|x| k.eval_unchecked(x), &data, r).unwrap();
            let unordered = u_statistic(&k, &data).unwrap() * binomial(data.len(), r);
            let want = crate::combinatorics::factorial(r) * unordered;
            let scale = ordered_distinct_sum(|x| k.eval_unchecked(x).abs(), &data, r).unwrap().total;
            prop_assert!((ordered.total - want).abs() <= 1e-10 * scale.max(1e-300));
        }
    }
}
