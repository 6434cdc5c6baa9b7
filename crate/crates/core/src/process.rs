//! Pseudo-selfnormalized and Studentized prefix processes as step paths on
//! the grid `t = k/n`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{prefix_values, UPrefixValues};
use crate::error::{Error, Result};
use crate::jackknife::{jackknife_summary, JackknifeSummary};
use crate::kernel::Kernel;
use crate::summation::pairwise_sum_iter;

/// Right-continuous step path with `values[k]` at `t = k/n`, zero for `k < m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProcess {
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
}

impl StepProcess {
    /// Path value at time `t` in `[0, 1]`, i.e. `values[floor(n t)]`.
    pub fn at_time(&self, t: f64) -> f64 {
        let k = ((self.n as f64 * t.clamp(0.0, 1.0)).floor() as usize).min(self.n);
        self.values[k]
    }

    pub fn last(&self) -> f64 {
        self.values[self.n]
    }

    /// CSV with header `k,t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.n + 2));
        out.push_str("k,t,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{v}", k as f64 / self.n as f64);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    /// `sqrt(sum h1(X_i)^2)`.
    pub v_n: f64,
    /// `sqrt(n (n-1) sum (U^i - U_n)^2)`.
    pub jack_scale: f64,
}

pub fn v_n(projections: &[f64]) -> f64 {
    pairwise_sum_iter(projections.iter().map(|p| p * p)).sqrt()
}

pub fn normalizers(kernel: &Kernel, data: &[f64], projections: &[f64]) -> Result<Normalizers> {
    Ok(Normalizers {
        v_n: v_n(projections),
        jack_scale: jackknife_summary(kernel, data)?.jack_scale(),
    })
}

/// `(k/m) (U_k - theta) / V_n` for `k >= m`.
pub fn pseudo_selfnormalized_path(
    kernel: &Kernel,
    data: &[f64],
    theta: f64,
    projections: &[f64],
) -> Result<StepProcess> {
    if projections.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "{} projections for {} observations",
            projections.len(),
            data.len()
        )));
    }
    let prefix = prefix_values(kernel, data)?;
    pseudo_selfnormalized_from_parts(&prefix, theta, v_n(projections))
}

pub fn pseudo_selfnormalized_from_parts(
    prefix: &UPrefixValues,
    theta: f64,
    v_n: f64,
) -> Result<StepProcess> {
    if !(v_n > 0.0 && v_n.is_finite()) {
        return Err(Error::DegenerateNormalizer(format!(
            "V_n = {v_n}: every projection vanishes"
        )));
    }
    let m = prefix.m as f64;
    Ok(build_path(prefix, |k, u| (k / m) * (u - theta) / v_n))
}

/// How the Studentized path is scaled. Both choices give the same path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentizedScaling {
    /// `k (U_k - theta) / sqrt(n (n-1) sum (U^i - U_n)^2)`.
    #[default]
    FullSample,
    /// `(k / sqrt(n)) (U_k - theta) / sqrt((n-1) sum (U^i - U_n)^2)`.
    RootNMultiplier,
}

/// Studentized path with the full-sample jackknife scale.
pub fn studentized_path(kernel: &Kernel, data: &[f64], theta: f64) -> Result<StepProcess> {
    studentized_path_with(kernel, data, theta, StudentizedScaling::default())
}

pub fn studentized_path_with(
    kernel: &Kernel,
    data: &[f64],
    theta: f64,
    scaling: StudentizedScaling,
) -> Result<StepProcess> {
    let summary = jackknife_summary(kernel, data)?;
    let prefix = prefix_values(kernel, data)?;
    studentized_from_parts(&prefix, &summary, theta, scaling)
}

/// Studentized path from a precomputed prefix process and jackknife summary
/// of the same sample. The scale is never recomputed on prefixes.
pub fn studentized_from_parts(
    prefix: &UPrefixValues,
    summary: &JackknifeSummary,
    theta: f64,
    scaling: StudentizedScaling,
) -> Result<StepProcess> {
    if prefix.n() != summary.n || prefix.m != summary.m {
        return Err(Error::InvalidArgument(
            "prefix process and jackknife summary disagree".into(),
        ));
    }
    if summary.is_degenerate() {
        return Err(Error::DegenerateNormalizer(
            "all leave-one-out statistics coincide".into(),
        ));
    }
    Ok(match scaling {
        StudentizedScaling::FullSample => {
            let scale = summary.jack_scale();
            build_path(prefix, |k, u| k * (u - theta) / scale)
        }
        StudentizedScaling::RootNMultiplier => {
            let root_n = (summary.n as f64).sqrt();
            let scale = summary.sum_sq.sqrt();
            build_path(prefix, |k, u| (k / root_n) * (u - theta) / scale)
        }
    })
}

fn build_path(prefix: &UPrefixValues, value: impl Fn(f64, f64) -> f64) -> StepProcess {
    let (m, n) = (prefix.m, prefix.n());
    let mut values = vec![0.0; n + 1];
    for (i, &u) in prefix.values.iter().enumerate() {
        let k = m + i;
        values[k] = value(k as f64, u);
    }
    StepProcess { n, m, values }
}

/// Signed supremum over the grid, `t = 0` included.
pub fn sup_functional(path: &StepProcess) -> f64 {
    path.values.iter().copied().fold(0.0, f64::max)
}

pub fn sup_abs(path: &StepProcess) -> f64 {
    path.values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::u_statistic;
    use crate::kernel::project_h1;
    use crate::sampler::{sample, Distribution};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn pseudo_m1_example() {
        let k = Kernel::identity();
        let p = pseudo_selfnormalized_path(&k, &[1.0, -1.0], 0.0, &[1.0, -1.0]).unwrap();
        assert_eq!(p.values.len(), 3);
        assert_eq!(p.values[0], 0.0);
        assert_relative_eq!(p.values[1], FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_eq!(p.values[2], 0.0);
        assert_relative_eq!(sup_functional(&p), FRAC_1_SQRT_2, max_relative = 1e-15);
    }

    #[test]
    fn pseudo_degenerate() {
        let k = Kernel::identity();
        let err = pseudo_selfnormalized_path(&k, &[1.0, 2.0], 0.0, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateNormalizer(_)));
    }

    #[test]
    fn pseudo_final_value_example() {
        let d = Distribution::example(2.0).unwrap();
        let x = sample(&d, 50, 17).unwrap();
        let k = Kernel::product(2).unwrap();
        let proj: Vec<f64> = x
            .iter()
            .map(|&xi| project_h1(&k, xi, &d, None).unwrap().value)
            .collect();
        let path = pseudo_selfnormalized_path(&k, &x, 4.0, &proj).unwrap();
        let u = u_statistic(&k, &x).unwrap();
        let vn = proj.iter().map(|p| p * p).sum::<f64>().sqrt();
        assert_relative_eq!(path.last(), 25.0 * (u - 4.0) / vn, max_relative = 1e-10);
        assert_eq!(path.values[..2], [0.0, 0.0]);
    }

    #[test]
    fn studentized_examples() {
        let k = Kernel::identity();
        let p = studentized_path(&k, &[0.0, 2.0], 1.0).unwrap();
        assert_eq!(p.last(), 0.0);
        let p = studentized_path(&k, &[0.0, 2.0], 0.0).unwrap();
        assert_relative_eq!(p.last(), 1.0, max_relative = 1e-15);
        let c = Kernel::constant(2.0, 2).unwrap();
        assert!(matches!(
            studentized_path(&c, &[1.0, 2.0, 3.0], 2.0),
            Err(Error::DegenerateNormalizer(_))
        ));
        let p2 = Kernel::product(2).unwrap();
        assert!(matches!(
            studentized_path(&p2, &[3.0; 10], 4.0),
            Err(Error::DegenerateNormalizer(_))
        ));
    }

    #[test]
    fn sup_examples() {
        let path = |values: Vec<f64>| StepProcess {
            n: values.len() - 1,
            m: 1,
            values,
        };
        assert_eq!(sup_functional(&path(vec![0.0, 0.0, 0.0])), 0.0);
        assert_eq!(sup_functional(&path(vec![0.0, -1.0, -2.0])), 0.0);
        assert_eq!(sup_abs(&path(vec![0.0, -1.0, -2.0])), 2.0);
    }

    #[test]
    fn csv_layout() {
        let p = StepProcess {
            n: 2,
            m: 1,
            values: vec![0.0, 0.5, -1.0],
        };
        assert_eq!(p.to_csv(), "k,t,value\n0,0,0\n1,0.5,0.5\n2,1,-1\n");
        assert_eq!(p.at_time(0.49), 0.0);
        assert_eq!(p.at_time(0.5), 0.5);
        assert_eq!(p.at_time(1.0), -1.0);
    }

    proptest! {
        #[test]
        fn m1_final_value_is_t_statistic(
            data in prop::collection::vec(-10f64..10.0, 3..=60),
            theta in -2f64..2.0,
        ) {
            let p = studentized_path(&Kernel::identity(), &data, theta).unwrap();
            let n = data.len() as f64;
            let mean = data.iter().sum::<f64>() / n;
            let s = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let t = n.sqrt() * (mean - theta) / s;
            prop_assert!((p.last() - t).abs() <= 1e-10 * t.abs().max(1.0));
        }

        #[test]
        fn studentized_scale_invariance(
            data in prop::collection::vec(-10f64..10.0, 3..=40),
            theta in -2f64..2.0,
            c in 0.01f64..100.0,
        ) {
            let k = Kernel::identity();
            let a = studentized_path(&k, &data, theta).unwrap();
            let scaled: Vec<f64> = data.iter().map(|x| c * x).collect();
            let b = studentized_path(&k, &scaled, c * theta).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn scalings_agree_and_leading_zeros(
            data in prop::collection::vec(0.1f64..5.0, 4..=30),
            m in 1usize..=3,
        ) {
            let k = Kernel::product(m).unwrap();
            let a = studentized_path_with(&k, &data, 1.0, StudentizedScaling::FullSample).unwrap();
            let b = studentized_path_with(&k, &data, 1.0, StudentizedScaling::RootNMultiplier).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
            prop_assert!(a.values[..m].iter().all(|&v| v == 0.0));
            prop_assert!(sup_functional(&a) >= 0.0);
        }
    }
}
