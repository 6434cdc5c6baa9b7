//! Symmetric kernels, their projections, and the indicator truncations used
//! to couple a statistic with integrable surrogates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::combinatorics::{for_each_grid_point, MAX_ENUMERATION};
use crate::error::{Error, Result};
use crate::sampler::{rng_from_seed, sample_with, Distribution};
use crate::summation::{pairwise_sum_iter, PairwiseSum};

pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ProjectionFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `h(x) = x`, order 1.
    Identity,
    /// `h(x_1..x_m) = x_1 * ... * x_m`.
    Product,
    /// `h(x, y) = (x - y)^2 / 2`.
    Variance,
    Constant(f64),
    Custom,
    Truncated,
}

/// An order-`m` symmetric kernel. Cheap to clone and safe to share between
/// threads; evaluation is pure.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    order: usize,
    family: KernelFamily,
    eval: KernelFn,
    theta: Option<f64>,
    projection: Option<ProjectionFn>,
    declared_mean: Option<f64>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("family", &self.family)
            .field("theta", &self.theta)
            .field("has_projection", &self.projection.is_some())
            .finish()
    }
}

fn product_symmetric(x: &[f64]) -> f64 {
    match x.len() {
        0 => 1.0,
        1 => x[0],
        2 => x[0] * x[1],
        len if len <= 8 => {
            // Float multiplication is commutative but not associative; a
            // canonical order makes the result permutation invariant.
            let mut buf = [0.0f64; 8];
            buf[..len].copy_from_slice(x);
            buf[..len].sort_unstable_by(f64::total_cmp);
            buf[..len].iter().product()
        }
        _ => {
            let mut v = x.to_vec();
            v.sort_unstable_by(f64::total_cmp);
            v.iter().product()
        }
    }
}

impl Kernel {
    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            order: 1,
            family: KernelFamily::Identity,
            eval: Arc::new(|x| x[0]),
            theta: None,
            projection: None,
            declared_mean: None,
        }
    }

    pub fn product(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "kernel order must be positive".into(),
            ));
        }
        Ok(Self {
            name: format!("product:m={m}"),
            order: m,
            family: KernelFamily::Product,
            eval: Arc::new(product_symmetric),
            theta: None,
            projection: None,
            declared_mean: None,
        })
    }

    /// Product kernel with the observation mean fixed at `a`, giving
    /// `theta = a^m` and `h1(x) = x a^(m-1) - a^m` without a distribution.
    pub fn product_with_mean(m: usize, a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mean must be finite, got {a}"
            )));
        }
        let mut k = Self::product(m)?;
        k.name = format!("product:m={m},a={a}");
        k.declared_mean = Some(a);
        let (theta, proj) = linear_binding(m, a);
        k.theta = Some(theta);
        k.projection = Some(proj);
        Ok(k)
    }

    pub fn variance() -> Self {
        Self {
            name: "variance".into(),
            order: 2,
            family: KernelFamily::Variance,
            eval: Arc::new(|x| 0.5 * (x[0] - x[1]) * (x[0] - x[1])),
            theta: None,
            projection: None,
            declared_mean: None,
        }
    }

    pub fn constant(c: f64, m: usize) -> Result<Self> {
        if m == 0 || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "constant kernel needs m >= 1 and finite c, got m={m}, c={c}"
            )));
        }
        Ok(Self {
            name: format!("constant:c={c},m={m}"),
            order: m,
            family: KernelFamily::Constant(c),
            eval: Arc::new(move |_| c),
            theta: Some(c),
            projection: Some(Arc::new(|_| 0.0)),
            declared_mean: None,
        })
    }

    /// User kernel. The caller guarantees symmetry; it is not enforced.
    pub fn custom(
        name: impl Into<String>,
        order: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "kernel order must be positive".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            order,
            family: KernelFamily::Custom,
            eval: Arc::new(eval),
            theta: None,
            projection: None,
            declared_mean: None,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_projection(
        mut self,
        projection: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.projection = Some(Arc::new(projection));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub(crate) fn declared_mean(&self) -> Option<f64> {
        self.declared_mean
    }

    pub fn is_product(&self) -> bool {
        self.family == KernelFamily::Product
    }

    /// The attached projection `h1`, if any.
    pub fn analytic_projection(&self, x: f64) -> Option<f64> {
        self.projection.as_ref().map(|p| p(x))
    }

    pub fn projection_fn(&self) -> Option<ProjectionFn> {
        self.projection.clone()
    }

    /// Evaluates `h` after checking arity and finiteness.
    pub fn eval(&self, points: &[f64]) -> Result<f64> {
        if points.len() != self.order {
            return Err(Error::InvalidArgument(format!(
                "kernel {} has order {} but received {} points",
                self.name,
                self.order,
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite kernel argument {bad}")));
        }
        Ok((self.eval)(points))
    }

    /// Evaluates `h` without validation. `points.len()` must equal the order.
    #[inline]
    pub fn eval_unchecked(&self, points: &[f64]) -> f64 {
        debug_assert_eq!(points.len(), self.order);
        (self.eval)(points)
    }

    /// `c` such that `h1(x) = c (x - E X)`, for the families where the
    /// projection is linear.
    pub fn linear_projection_coefficient(&self, dist: &Distribution) -> Option<f64> {
        let mu = self.declared_mean.or_else(|| dist.mean())?;
        match self.family {
            KernelFamily::Identity => Some(1.0),
            KernelFamily::Product => Some(mu.powi(self.order as i32 - 1)),
            KernelFamily::Constant(_) => Some(0.0),
            _ => None,
        }
    }

    /// Closed-form `(theta, h1)` for the built-in families under `dist`.
    fn analytic_binding(&self, dist: &Distribution) -> Option<(f64, ProjectionFn)> {
        match self.family {
            KernelFamily::Constant(c) => Some((c, Arc::new(|_| 0.0))),
            KernelFamily::Identity => {
                let mu = self.declared_mean.or_else(|| dist.mean())?;
                Some((mu, Arc::new(move |x| x - mu)))
            }
            KernelFamily::Product => {
                let mu = self.declared_mean.or_else(|| dist.mean())?;
                Some(linear_binding(self.order, mu))
            }
            KernelFamily::Variance => {
                let mu = dist.mean()?;
                let s2 = dist.variance()?;
                Some((s2, Arc::new(move |x| 0.5 * ((x - mu) * (x - mu) - s2))))
            }
            KernelFamily::Custom | KernelFamily::Truncated => None,
        }
    }

    /// Attaches `theta` and `h1` for `dist`: closed forms for the built-in
    /// families, exact enumeration for finite laws. Values already attached
    /// are kept.
    pub fn bind(&self, dist: &Distribution) -> Result<Kernel> {
        let mut out = self.clone();
        if out.theta.is_some() && out.projection.is_some() {
            return Ok(out);
        }
        if let Some((theta, proj)) = self.analytic_binding(dist) {
            out.theta.get_or_insert(theta);
            if out.projection.is_none() {
                out.projection = Some(proj);
            }
            return Ok(out);
        }
        if dist.finite_parts().is_some() {
            let theta = match out.theta {
                Some(t) => t,
                None => exact_theta(self, dist)?,
            };
            out.theta = Some(theta);
            if out.projection.is_none() {
                let first = conditional_first_mean(self, dist)?;
                out.projection = Some(Arc::new(move |x| first(x) - theta));
            }
        }
        Ok(out)
    }
}

fn linear_binding(m: usize, mu: f64) -> (f64, ProjectionFn) {
    let lead = mu.powi(m as i32 - 1);
    let theta = lead * mu;
    (theta, Arc::new(move |x| x * lead - theta))
}

const KERNEL_REGISTRY: &str = "identity, variance, product:m=<m>[,a=<a>], constant:c=<c>,m=<m>";

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let bad = |why: &str| {
            Error::Config(format!(
                "cannot parse kernel '{s}': {why} (registry: {KERNEL_REGISTRY})"
            ))
        };
        let mut m: Option<usize> = None;
        let mut a: Option<f64> = None;
        let mut c: Option<f64> = None;
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(&format!("expected key=value, got '{part}'")))?;
            let num = || {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("'{value}' is not a number")))
            };
            match key.trim() {
                "m" => {
                    m = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| bad("m must be a positive integer"))?,
                    )
                }
                "a" => a = Some(num()?),
                "c" => c = Some(num()?),
                other => return Err(bad(&format!("unknown parameter '{other}'"))),
            }
        }
        let kernel = match head {
            "identity" => Ok(Kernel::identity()),
            "variance" => Ok(Kernel::variance()),
            "product" => {
                let m = m.ok_or_else(|| bad("product needs m"))?;
                match a {
                    Some(a) => Kernel::product_with_mean(m, a),
                    None => Kernel::product(m),
                }
            }
            "constant" => Kernel::constant(c.unwrap_or(1.0), m.unwrap_or(2)),
            _ => return Err(bad("unknown kernel")),
        };
        kernel.map_err(|e| bad(&e.to_string()))
    }
}

fn finite_law(dist: &Distribution) -> Result<(&[f64], &[f64])> {
    dist.finite_parts()
        .ok_or_else(|| Error::Unsupported(format!("{} is not a finite-support law", dist.name())))
}

fn guard_grid(k: usize, len: usize) -> Result<()> {
    match (k as u128).checked_pow(len as u32) {
        Some(c) if c <= MAX_ENUMERATION => Ok(()),
        _ => Err(Error::ResourceLimit(format!(
            "enumerating {k}^{len} support tuples exceeds the limit"
        ))),
    }
}

/// `E h(X_1..X_m)` by summing over every support tuple.
pub fn exact_theta(kernel: &Kernel, dist: &Distribution) -> Result<f64> {
    let (support, probs) = finite_law(dist)?;
    let m = kernel.order();
    guard_grid(support.len(), m)?;
    let mut acc = PairwiseSum::new();
    let mut point = vec![0.0; m];
    for_each_grid_point(support.len(), m, |_, digits| {
        let mut w = 1.0;
        for (slot, &d) in point.iter_mut().zip(digits) {
            *slot = support[d];
            w *= probs[d];
        }
        acc.push(w * kernel.eval_unchecked(&point));
    });
    Ok(acc.total())
}

/// `x -> E(h | X_1 = x)` by exact enumeration over the other `m - 1`
/// coordinates. No centring.
pub fn conditional_first_mean(kernel: &Kernel, dist: &Distribution) -> Result<ProjectionFn> {
    let (support, probs) = finite_law(dist)?;
    let m = kernel.order();
    guard_grid(support.len(), m - 1)?;
    let support = support.to_vec();
    let probs = probs.to_vec();
    let kernel = kernel.clone();
    Ok(Arc::new(move |x| {
        let mut acc = PairwiseSum::new();
        let mut point = vec![0.0; m];
        point[0] = x;
        for_each_grid_point(support.len(), m - 1, |_, digits| {
            let mut w = 1.0;
            for (slot, &d) in point[1..].iter_mut().zip(digits) {
                *slot = support[d];
                w *= probs[d];
            }
            acc.push(w * kernel.eval_unchecked(&point));
        });
        acc.total()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    Analytic,
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionEstimate {
    pub value: f64,
    /// Present only for Monte Carlo estimates.
    pub std_error: Option<f64>,
    pub method: ProjectionMethod,
}

/// Draw budget for Monte Carlo projections. There is deliberately no default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McBudget {
    pub draws: usize,
    pub seed: u64,
}

/// `h1(x) = E(h - theta | X_1 = x)`: analytic when available, exact for
/// finite laws, otherwise Monte Carlo within `budget`.
pub fn project_h1(
    kernel: &Kernel,
    x: f64,
    dist: &Distribution,
    budget: Option<McBudget>,
) -> Result<ProjectionEstimate> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite projection argument {x}")));
    }
    let analytic = |value| ProjectionEstimate {
        value,
        std_error: None,
        method: ProjectionMethod::Analytic,
    };
    if let Some(v) = kernel.analytic_projection(x) {
        return Ok(analytic(v));
    }
    if kernel.order() == 1 {
        if let Some(theta) = kernel.theta() {
            return Ok(analytic(kernel.eval_unchecked(&[x]) - theta));
        }
    }
    if let Some((_, proj)) = kernel.analytic_binding(dist) {
        return Ok(analytic(proj(x)));
    }
    if dist.finite_parts().is_some() {
        return Ok(ProjectionEstimate {
            value: projection_exact_finite(kernel, x, dist)?,
            std_error: None,
            method: ProjectionMethod::ExactEnumeration,
        });
    }
    match budget {
        Some(b) => projection_monte_carlo(kernel, x, dist, b),
        None => Err(Error::Unsupported(format!(
            "no analytic projection for {} under {} and no Monte Carlo budget given",
            kernel.name(),
            dist.name()
        ))),
    }
}

/// Exact `h1(x)` for a finite law.
pub fn projection_exact_finite(kernel: &Kernel, x: f64, dist: &Distribution) -> Result<f64> {
    let theta = match kernel.theta() {
        Some(t) => t,
        None => exact_theta(kernel, dist)?,
    };
    Ok(conditional_first_mean(kernel, dist)?(x) - theta)
}

/// Monte Carlo `h1(x)`: averages `h(x, Y_2..Y_m)` over `budget.draws`
/// draws. When `theta` is unknown it is estimated from an independent batch
/// of the same size and its error folded into the reported standard error.
pub fn projection_monte_carlo(
    kernel: &Kernel,
    x: f64,
    dist: &Distribution,
    budget: McBudget,
) -> Result<ProjectionEstimate> {
    if budget.draws < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo projection needs at least 2 draws".into(),
        ));
    }
    let m = kernel.order();
    let mut rng = rng_from_seed(budget.seed);
    let mut point = vec![0.0; m];
    point[0] = x;
    let mut values = Vec::with_capacity(budget.draws);
    for _ in 0..budget.draws {
        let rest = sample_with(dist, m - 1, &mut rng);
        point[1..].copy_from_slice(&rest);
        values.push(kernel.eval_unchecked(&point));
    }
    let (mean, se) = mean_and_se(&values);
    let (theta, theta_se) = match kernel.theta() {
        Some(t) => (t, 0.0),
        None => {
            let mut thetas = Vec::with_capacity(budget.draws);
            for _ in 0..budget.draws {
                let pt = sample_with(dist, m, &mut rng);
                thetas.push(kernel.eval_unchecked(&pt));
            }
            mean_and_se(&thetas)
        }
    };
    Ok(ProjectionEstimate {
        value: mean - theta,
        std_error: Some((se * se + theta_se * theta_se).sqrt()),
        method: ProjectionMethod::MonteCarlo,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum_iter(values.iter().copied()) / n;
    let var = pairwise_sum_iter(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Which indicator truncation to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationMode {
    /// `|h| <= n^(3m/5)`.
    FullM,
    /// `|h| <= n^(3j/5)`, `1 <= j <= m - 1`.
    LevelJ(usize),
    /// `|h| <= ln n`, `n >= 2`.
    Log,
    /// `|h1^(m)(x_1)| <= sqrt(n) l(n)`, on top of the `FullM` truncation.
    ProjectionEll { ell_of_n: f64 },
}

#[derive(Clone)]
pub struct TruncationRule {
    pub mode: TruncationMode,
    pub n: usize,
    evaluator: Option<ProjectionFn>,
}

impl fmt::Debug for TruncationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationRule")
            .field("mode", &self.mode)
            .field("n", &self.n)
            .field("has_evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl TruncationRule {
    pub fn new(mode: TruncationMode, n: usize) -> Self {
        Self {
            mode,
            n,
            evaluator: None,
        }
    }

    pub fn full_m(n: usize) -> Self {
        Self::new(TruncationMode::FullM, n)
    }

    pub fn level_j(j: usize, n: usize) -> Self {
        Self::new(TruncationMode::LevelJ(j), n)
    }

    pub fn log(n: usize) -> Self {
        Self::new(TruncationMode::Log, n)
    }

    /// `evaluator` computes the centred projection of the full-order truncated
    /// kernel, `x -> E(h^(m) | X_1 = x) - E h^(m)`.
    pub fn projection_ell(n: usize, ell_of_n: f64, evaluator: Option<ProjectionFn>) -> Self {
        Self {
            mode: TruncationMode::ProjectionEll { ell_of_n },
            n,
            evaluator,
        }
    }

    /// Threshold for a kernel of order `m`. Always strictly positive.
    pub fn threshold(&self, m: usize) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("truncation needs n >= 1".into()));
        }
        let n = self.n as f64;
        let c = match self.mode {
            TruncationMode::FullM => n.powf(3.0 * m as f64 / 5.0),
            TruncationMode::LevelJ(j) => {
                if j == 0 || j >= m {
                    return Err(Error::InvalidArgument(format!(
                        "level truncation needs 1 <= j <= m-1, got j={j}, m={m}"
                    )));
                }
                n.powf(3.0 * j as f64 / 5.0)
            }
            TruncationMode::Log => {
                if self.n < 2 {
                    return Err(Error::InvalidArgument("log truncation needs n >= 2".into()));
                }
                n.ln()
            }
            TruncationMode::ProjectionEll { ell_of_n } => {
                if !(ell_of_n > 0.0 && ell_of_n.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "l(n) must be positive, got {ell_of_n}"
                    )));
                }
                n.sqrt() * ell_of_n
            }
        };
        Ok(c)
    }
}

/// Returns the kernel `h * 1(|h| <= c)`; for the projection rule the
/// indicator is `1(|h1^(m)(x_1)| <= sqrt(n) l(n))` applied to `h^(m)`,
/// conditioning on the first argument.
pub fn truncate_kernel(kernel: &Kernel, rule: &TruncationRule) -> Result<Kernel> {
    let m = kernel.order();
    let c = rule.threshold(m)?;
    let base = kernel.eval.clone();
    let eval: KernelFn = match rule.mode {
        TruncationMode::ProjectionEll { .. } => {
            let proj = rule.evaluator.clone().ok_or_else(|| {
                Error::Unsupported(
                    "projection truncation needs an evaluator for E(h^(m) | X_1 = x)".into(),
                )
            })?;
            let full = TruncationRule::full_m(rule.n).threshold(m)?;
            Arc::new(move |x: &[f64]| {
                let h = base(x);
                if h.abs() <= full && proj(x[0]).abs() <= c {
                    h
                } else {
                    0.0
                }
            })
        }
        _ => Arc::new(move |x: &[f64]| {
            let h = base(x);
            if h.abs() <= c {
                h
            } else {
                0.0
            }
        }),
    };
    Ok(Kernel {
        name: format!("trunc[{:?},n={}]({})", rule.mode, rule.n, kernel.name),
        order: m,
        family: KernelFamily::Truncated,
        eval,
        theta: None,
        projection: None,
        declared_mean: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(
            Kernel::product(3).unwrap().eval(&[1.0, 2.0, 3.0]).unwrap(),
            6.0
        );
        assert_eq!(Kernel::variance().eval(&[0.0, 2.0]).unwrap(), 2.0);
        let p = Kernel::product(2).unwrap();
        assert_eq!(p.eval(&[3.0, 5.0]).unwrap(), 15.0);
        assert_eq!(p.eval(&[5.0, 3.0]).unwrap(), 15.0);
    }

    #[test]
    fn eval_errors() {
        let p = Kernel::product(2).unwrap();
        assert!(matches!(p.eval(&[1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(p.eval(&[1.0, f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(
            p.eval(&[1.0, f64::INFINITY]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn product_projection_example() {
        let d = Distribution::example(2.0).unwrap();
        let k = Kernel::product(2).unwrap();
        let p = project_h1(&k, 3.0, &d, None).unwrap();
        assert_eq!(p.value, 2.0);
        assert_eq!(p.method, ProjectionMethod::Analytic);
        // With the mean declared on the kernel itself.
        let k = Kernel::product_with_mean(2, 2.0).unwrap();
        assert_eq!(k.analytic_projection(3.0), Some(2.0));
    }

    #[test]
    fn order_one_projection_is_centred_kernel() {
        let k = Kernel::custom("square", 1, |x| x[0] * x[0])
            .unwrap()
            .with_theta(4.0);
        let d = Distribution::pareto(3.0, 1.0).unwrap();
        let p = project_h1(&k, 3.0, &d, None).unwrap();
        assert_eq!(p.value, 5.0);
    }

    #[test]
    fn projection_needs_theta_or_budget() {
        let k = Kernel::custom("max", 2, |x| x[0].max(x[1])).unwrap();
        let d = Distribution::normal(0.0, 1.0).unwrap();
        assert!(matches!(
            project_h1(&k, 0.5, &d, None),
            Err(Error::Unsupported(_))
        ));
        let est = project_h1(
            &k,
            0.5,
            &d,
            Some(McBudget {
                draws: 1000,
                seed: 3,
            }),
        )
        .unwrap();
        assert_eq!(est.method, ProjectionMethod::MonteCarlo);
        assert!(est.std_error.unwrap() > 0.0);
    }

    #[test]
    fn variance_kernel_monte_carlo_matches_closed_form() {
        // Oracle: E[(x - Y)^2 / 2] - 1/2 under N(0,1), 1e6 draws, 3 SE.
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let k = Kernel::variance().with_theta(1.0);
        for (i, &x) in [-1.5, 0.0, 0.7, 2.0].iter().enumerate() {
            let est = projection_monte_carlo(
                &k,
                x,
                &d,
                McBudget {
                    draws: 1_000_000,
                    seed: 11 + i as u64,
                },
            )
            .unwrap();
            let exact = (x * x - 1.0) / 2.0;
            let se = est.std_error.unwrap();
            assert!(
                (est.value - exact).abs() <= 3.0 * se,
                "x={x}: {} vs {exact} (se {se})",
                est.value
            );
            assert_eq!(
                project_h1(&Kernel::variance(), x, &d, None).unwrap().value,
                exact
            );
        }
    }

    #[test]
    fn finite_enumeration_matches_analytic() {
        let d = Distribution::finite(vec![-1.0, 0.5, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for k in [
            Kernel::identity(),
            Kernel::product(2).unwrap(),
            Kernel::product(3).unwrap(),
            Kernel::variance(),
        ] {
            let analytic = k.bind(&d).unwrap();
            for &x in &[-1.0, 0.5, 2.0, 3.0, 7.25] {
                let exact = projection_exact_finite(&k, x, &d).unwrap();
                let closed = analytic.analytic_projection(x).unwrap();
                assert!(
                    (exact - closed).abs() <= 1e-12,
                    "{}: {exact} vs {closed}",
                    k.name()
                );
            }
            assert!((exact_theta(&k, &d).unwrap() - analytic.theta().unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn finite_bind_for_custom_kernel() {
        let d = Distribution::uniform_finite(vec![0.0, 1.0, 2.0]).unwrap();
        let k = Kernel::custom("max", 2, |x| x[0].max(x[1])).unwrap();
        let b = k.bind(&d).unwrap();
        // E max = (0 + 1*3 + 2*5) / 9.
        assert!((b.theta().unwrap() - 13.0 / 9.0).abs() < 1e-15);
        assert!((b.analytic_projection(2.0).unwrap() - (2.0 - 13.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn full_m_truncation_example() {
        let k = Kernel::product(2).unwrap();
        let rule = TruncationRule::full_m(16);
        let c = rule.threshold(2).unwrap();
        assert_eq!(c, 16f64.powf(1.2));
        assert!((c - 27.857618).abs() < 1e-5);
        let t = truncate_kernel(&k, &rule).unwrap();
        assert_eq!(t.eval(&[5.0, 5.0]).unwrap(), 25.0);
        assert_eq!(t.eval(&[6.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn log_truncation_kills_constant_one() {
        let k = Kernel::constant(1.0, 2).unwrap();
        let rule = TruncationRule::log(2);
        assert!((rule.threshold(2).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(
            truncate_kernel(&k, &rule)
                .unwrap()
                .eval(&[0.0, 0.0])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn bounded_kernel_truncation_is_identity() {
        let k = Kernel::custom("sin", 2, |x| (x[0] + x[1]).sin()).unwrap();
        let t = truncate_kernel(&k, &TruncationRule::level_j(1, 4)).unwrap();
        for &(a, b) in &[(0.1, 0.2), (3.0, -1.0), (100.0, 7.0)] {
            assert_eq!(t.eval(&[a, b]).unwrap(), k.eval(&[a, b]).unwrap());
        }
    }

    #[test]
    fn truncation_rule_validation() {
        assert!(TruncationRule::level_j(2, 10).threshold(2).is_err());
        assert!(TruncationRule::level_j(0, 10).threshold(3).is_err());
        assert!(TruncationRule::log(1).threshold(2).is_err());
        assert!(TruncationRule::projection_ell(10, 0.0, None)
            .threshold(2)
            .is_err());
        let k = Kernel::product(2).unwrap();
        let err = truncate_kernel(&k, &TruncationRule::projection_ell(10, 1.0, None)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn projection_ell_conditions_on_first_argument() {
        let k = Kernel::product(2).unwrap();
        let d = Distribution::uniform_finite(vec![1.0, 2.0, 10.0]).unwrap();
        let n = 4;
        let full = truncate_kernel(&k, &TruncationRule::full_m(n)).unwrap();
        let first = conditional_first_mean(&full, &d).unwrap();
        let mean = exact_theta(&full, &d).unwrap();
        // n^(6/5) ~ 5.28 keeps the products 1, 2, 2, 4 out of nine, so the
        // truncated mean is 1 and the projection is 0 at x = 1, 1 at x = 2.
        assert!((mean - 1.0).abs() < 1e-15);
        assert!((first(1.0) - mean).abs() < 1e-15);
        assert!((first(2.0) - mean - 1.0).abs() < 1e-15);
        let centred: ProjectionFn = Arc::new(move |x| first(x) - mean);
        // sqrt(4) * 0.4 = 0.8 admits x_1 = 1 but not x_1 = 2.
        let rule = TruncationRule::projection_ell(n, 0.4, Some(centred));
        let t = truncate_kernel(&k, &rule).unwrap();
        assert_eq!(t.eval(&[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(t.eval(&[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(t.eval(&[1.0, 10.0]).unwrap(), 0.0);
    }

    #[test]
    fn registry() {
        let k: Kernel = "product:m=2,a=2".parse().unwrap();
        assert_eq!(k.order(), 2);
        assert_eq!(k.theta(), Some(4.0));
        assert_eq!("variance".parse::<Kernel>().unwrap().order(), 2);
        assert_eq!("identity".parse::<Kernel>().unwrap().order(), 1);
        let c: Kernel = "constant:c=3,m=3".parse().unwrap();
        assert_eq!(c.eval(&[0.0, 1.0, 2.0]).unwrap(), 3.0);
        let err = "kendall".parse::<Kernel>().unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("registry")));
    }

    fn builtins() -> Vec<Kernel> {
        vec![
            Kernel::identity(),
            Kernel::product(2).unwrap(),
            Kernel::product(3).unwrap(),
            Kernel::product(5).unwrap(),
            Kernel::variance(),
            Kernel::constant(2.5, 3).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn builtin_kernels_are_exactly_symmetric(
            xs in prop::collection::vec(-1e3f64..1e3, 5),
            perm_seed in any::<u64>(),
        ) {
            for k in builtins() {
                let pts = &xs[..k.order()];
                let mut perm = pts.to_vec();
                // Deterministic Fisher-Yates driven by the seed.
                let mut s = perm_seed;
                for i in (1..perm.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    perm.swap(i, (s >> 33) as usize % (i + 1));
                }
                prop_assert_eq!(k.eval(pts).unwrap().to_bits(), k.eval(&perm).unwrap().to_bits());
            }
        }

        #[test]
        fn truncation_idempotent_and_monotone(
            x in -50f64..50.0, y in -50f64..50.0, n in 2usize..200,
        ) {
            let k = Kernel::product(2).unwrap();
            let rule = TruncationRule::full_m(n);
            let once = truncate_kernel(&k, &rule).unwrap();
            let twice = truncate_kernel(&once, &rule).unwrap();
            prop_assert_eq!(once.eval(&[x, y]).unwrap(), twice.eval(&[x, y]).unwrap());
            let lower = truncate_kernel(&k, &TruncationRule::level_j(1, n)).unwrap();
            prop_assert!(lower.eval(&[x, y]).unwrap().abs() <= once.eval(&[x, y]).unwrap().abs());
            let log = truncate_kernel(&k, &TruncationRule::log(n)).unwrap();
            prop_assert!(log.eval(&[x, y]).unwrap().abs() <= lower.eval(&[x, y]).unwrap().abs());
        }
    }
}
