//! Reference laws, goodness-of-fit distances, and the replication harness.

use std::f64::consts::SQRT_2;
use std::time::Instant;

pub use crate::sampler::replication_seed;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    mean_se, negligibility_max_n, negligibility_statistic, NegligibilityStatistic,
};
use crate::engine::prefix_values;
use crate::error::{Error, Result};
use crate::jackknife::jackknife_summary;
use crate::kernel::Kernel;
use crate::process::{studentized_from_parts, sup_functional, StudentizedScaling};
use crate::sampler::{
    estimate_ell, estimate_ell_with, projection_variance, sample, Distribution, EllMethod,
    ProjectionVariance,
};

/// Standard normal CDF, `0.5 erfc(-x / sqrt 2)`. The erfc implementation is
/// accurate to a few ulps, far inside 1e-9 absolute.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `P(sup_{0<=t<=1} W(t) <= x) = 2 Phi(x) - 1` for `x >= 0`, zero below.
pub fn wiener_sup_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        (2.0 * normal_cdf(x) - 1.0).max(0.0)
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `cdf`. Returns NaN for an empty sample.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

pub const CONFIG_VERSION: u32 = 1;
pub const MIN_REPLICATIONS: usize = 50;
/// Largest fraction of replications that may be dropped for a degenerate
/// normalizer before a record fails.
pub const MAX_DROP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    /// `[n t0] U^stu_{[n t0]}` against `N(0, t0)`.
    CltT0,
    /// Signed supremum of the Studentized path against `sup W`.
    FcltSup,
    /// `V_n^2 / (n l^2(n))` against 1.
    Raikov,
    /// `(n-1) / (m^2 l^2(n)) sum (U^i - U_n)^2` against 1.
    JackRaikov,
    /// `(n-1) / m^2 sum (U^i - U_n)^2` against `E h1^2`.
    Arvesen,
    /// Mean absolute remainder statistic, which must halve across the grid.
    Negligibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest acceptable KS distance.
    pub ks: f64,
    /// Largest acceptable `|mean - target| / |target|`.
    pub rel_mean: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks: 0.06,
            rel_mean: 0.05,
        }
    }
}

fn default_t0() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    /// Kernel registry name, e.g. `product:m=2`.
    pub kernel: String,
    /// Distribution registry name, e.g. `normal:1,1`.
    pub distribution: String,
    /// Defaults to the value known for the kernel under the distribution.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub scaling: StudentizedScaling,
    /// Overrides the automatic choice of `l(n)`.
    #[serde(default)]
    pub ell_method: Option<EllMethod>,
    /// Required for `NEGLIGIBILITY`.
    #[serde(default)]
    pub statistic: Option<NegligibilityStatistic>,
    /// Whether the trend along the grid counts towards the overall verdict.
    #[serde(default)]
    pub require_trend: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks invariants and resolves the registry names.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            ));
        }
        if !(self.t0 > 0.0 && self.t0 <= 1.0) {
            return bad(format!("t0 must lie in (0, 1], got {}", self.t0));
        }
        if self.replications < MIN_REPLICATIONS {
            return bad(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            ));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be nonempty and strictly ascending".into());
        }
        if !(self.tolerances.ks > 0.0 && self.tolerances.rel_mean > 0.0) {
            return bad("tolerances must be positive".into());
        }
        let kernel: Kernel = self.kernel.parse()?;
        let dist: Distribution = self.distribution.parse()?;
        let kernel = kernel
            .bind(&dist)
            .map_err(|e| Error::Config(e.to_string()))?;
        let m = kernel.order();
        if self.n_grid[0] < m + 1 {
            return bad(format!("every n must exceed the kernel order {m}"));
        }
        let theta = self.theta.or(kernel.theta());
        let mut target = None;
        match self.experiment {
            ExperimentKind::CltT0 | ExperimentKind::FcltSup => {
                if theta.is_none() {
                    return bad(format!(
                        "theta is not given and not known for {} under {}",
                        kernel.name(),
                        dist.name()
                    ));
                }
            }
            ExperimentKind::Raikov | ExperimentKind::JackRaikov => {
                if kernel.projection_fn().is_none() {
                    return bad(format!(
                        "no projection known for {} under {}",
                        kernel.name(),
                        dist.name()
                    ));
                }
                target = Some(1.0);
            }
            ExperimentKind::Arvesen => match projection_variance(&dist, &kernel) {
                ProjectionVariance::Finite(v) => target = Some(v),
                _ => {
                    return bad(format!(
                        "ARVESEN needs a finite projection variance; {} under {} has none",
                        kernel.name(),
                        dist.name()
                    ))
                }
            },
            ExperimentKind::Negligibility => {
                let stat = self
                    .statistic
                    .ok_or_else(|| Error::Config("NEGLIGIBILITY needs a statistic".into()))?;
                let cap = negligibility_max_n(m).ok_or_else(|| {
                    Error::Config(format!("NEGLIGIBILITY supports m <= 3, got {m}"))
                })?;
                if self.n_grid.iter().any(|&n| n > cap) {
                    return bad(format!("NEGLIGIBILITY allows n <= {cap} for m = {m}"));
                }
                if stat == NegligibilityStatistic::P4SharedJ && m != 3 {
                    return bad("P4_SHARED_J needs a kernel of order 3".into());
                }
                if stat == NegligibilityStatistic::P1UnSq && theta.is_none() {
                    return bad("P1_UN_SQ needs theta".into());
                }
            }
        }
        Ok(ResolvedConfig {
            config: self.clone(),
            kernel,
            dist,
            theta: theta.unwrap_or(0.0),
            target,
        })
    }
}

/// A validated config with its kernel and distribution resolved.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub kernel: Kernel,
    pub dist: Distribution,
    pub theta: f64,
    /// Reference value for the mean-based experiments.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: usize,
    pub statistic: String,
    pub target: Option<f64>,
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    pub median: f64,
    pub ks: Option<f64>,
    pub ell_sq: Option<f64>,
    pub ell_method: Option<EllMethod>,
    /// Replications discarded for a degenerate normalizer.
    pub dropped: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// `ks`, `abs_mean_error`, `variance` or `mean`.
    pub metric: String,
    pub values: Vec<f64>,
    /// Last grid value below the first; for `mean` by at least a factor 2.
    pub decreasing: bool,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: u32,
    pub experiment: ExperimentKind,
    pub kernel: String,
    pub distribution: String,
    pub theta: f64,
    pub t0: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub tolerances: Tolerances,
    pub records: Vec<Record>,
    pub trend: Option<Trend>,
    /// The configuration has a zero normalizer or zero projection.
    pub degenerate: bool,
    pub overall_pass: bool,
    pub note: String,
    /// Wall-clock time; the only field that varies between identical runs.
    pub runtime_ms: u64,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }
}

/// A report together with the per-replication statistics, one vector per
/// grid point in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ConvergenceReport,
    pub values: Vec<Vec<f64>>,
}

const NOTE: &str = "Tolerances are engineering choices: the limit theorems carry no rates. \
KS thresholds allow finite-n bias above the Kolmogorov 95% quantile.";

fn statistic_label(kind: ExperimentKind, cfg: &ExperimentConfig) -> String {
    match kind {
        ExperimentKind::CltT0 => format!("studentized_at_t0={}", cfg.t0),
        ExperimentKind::FcltSup => "studentized_sup".into(),
        ExperimentKind::Raikov => "vn_sq_over_n_ell_sq".into(),
        ExperimentKind::JackRaikov => "jackknife_over_ell_sq".into(),
        ExperimentKind::Arvesen => "arvesen".into(),
        ExperimentKind::Negligibility => cfg.statistic.map_or("negligibility", |s| s.id()).into(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let len = v.len();
    if len % 2 == 1 {
        v[len / 2]
    } else {
        0.5 * (v[len / 2 - 1] + v[len / 2])
    }
}

/// One replication's statistic, or `None` when its normalizer vanishes.
fn replicate_one(rc: &ResolvedConfig, data: &[f64], ell_sq: Option<f64>) -> Result<Option<f64>> {
    let cfg = &rc.config;
    let kernel = &rc.kernel;
    let n = data.len();
    let m = kernel.order() as f64;
    Ok(match cfg.experiment {
        ExperimentKind::CltT0 | ExperimentKind::FcltSup => {
            let summary = jackknife_summary(kernel, data)?;
            if summary.is_degenerate() {
                return Ok(None);
            }
            let prefix = prefix_values(kernel, data)?;
            let path = studentized_from_parts(&prefix, &summary, rc.theta, cfg.scaling)?;
            Some(if cfg.experiment == ExperimentKind::CltT0 {
                path.at_time(cfg.t0)
            } else {
                sup_functional(&path)
            })
        }
        ExperimentKind::Raikov => {
            let proj = kernel.projection_fn().expect("checked when resolving");
            let v_sq: f64 = crate::summation::pairwise_sum_iter(data.iter().map(|&x| {
                let p = proj(x);
                p * p
            }));
            Some(v_sq / (n as f64 * ell_sq.expect("set for RAIKOV")))
        }
        ExperimentKind::JackRaikov => {
            let s = jackknife_summary(kernel, data)?;
            Some(s.sum_sq / (m * m * ell_sq.expect("set for JACK_RAIKOV")))
        }
        ExperimentKind::Arvesen => Some(jackknife_summary(kernel, data)?.variance_estimator),
        ExperimentKind::Negligibility => Some(
            negligibility_statistic(cfg.statistic.expect("checked"), kernel, rc.theta, data)?.abs(),
        ),
    })
}

/// Runs the configured experiment on `workers` threads (0 picks the number
/// of available cores). The report content depends only on the config.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport> {
    run_experiment_with_values(config, workers).map(|o| o.report)
}

pub fn run_experiment_with_values(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentOutput> {
    let rc = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_resolved(&rc))
}

fn run_resolved(rc: &ResolvedConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let cfg = &rc.config;
    let kind = cfg.experiment;
    let reps = cfg.replications;
    let mut records = Vec::with_capacity(cfg.n_grid.len());
    let mut all_values = Vec::with_capacity(cfg.n_grid.len());
    let mut degenerate = false;

    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let ell = match kind {
            ExperimentKind::Raikov | ExperimentKind::JackRaikov => {
                let est = match cfg.ell_method {
                    Some(method) => estimate_ell_with(&rc.dist, &rc.kernel, n, method),
                    None => estimate_ell(&rc.dist, &rc.kernel, n),
                };
                match est {
                    Ok(e) => Some(e),
                    Err(Error::DegenerateNormalizer(_)) => {
                        degenerate = true;
                        None
                    }
                    Err(e) => return Err(Error::Config(e.to_string())),
                }
            }
            _ => None,
        };
        if degenerate && ell.is_none() {
            // A zero projection makes the normalized ratio meaningless; the
            // raw estimator is still reported against zero.
            let values = vec![0.0; reps];
            records.push(Record {
                n,
                statistic: statistic_label(kind, cfg),
                target: rc.target,
                mean: 0.0,
                se: 0.0,
                variance: 0.0,
                median: 0.0,
                ks: None,
                ell_sq: None,
                ell_method: None,
                dropped: 0,
                pass: false,
            });
            all_values.push(values);
            continue;
        }
        let ell_sq = ell.map(|e| e.ell_sq);
        let outcomes = (0..reps)
            .into_par_iter()
            .map(|r| {
                let idx = (g * reps + r) as u64;
                let data = sample(&rc.dist, n, replication_seed(cfg.base_seed, idx))?;
                replicate_one(rc, &data, ell_sq)
            })
            .collect::<Result<Vec<Option<f64>>>>()?;
        let values: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let dropped = reps - values.len();
        if values.len() < 2 {
            degenerate = true;
        }
        let (mean, se) = if values.is_empty() {
            (0.0, 0.0)
        } else {
            mean_se(&values)
        };
        let variance = se * se * values.len() as f64;
        let ks = match kind {
            ExperimentKind::CltT0 if !values.is_empty() => {
                let sd = cfg.t0.sqrt();
                Some(ks_distance(&values, |x| normal_cdf(x / sd)))
            }
            ExperimentKind::FcltSup if !values.is_empty() => {
                Some(ks_distance(&values, wiener_sup_cdf))
            }
            _ => None,
        };
        let within = match (kind, ks, rc.target) {
            (ExperimentKind::CltT0 | ExperimentKind::FcltSup, Some(d), _) => d <= cfg.tolerances.ks,
            (ExperimentKind::Negligibility, _, _) => mean.is_finite(),
            (_, _, Some(t)) => (mean - t).abs() <= cfg.tolerances.rel_mean * t.abs(),
            _ => false,
        };
        let drops_ok = dropped as f64 <= MAX_DROP_FRACTION * reps as f64;
        records.push(Record {
            n,
            statistic: statistic_label(kind, cfg),
            target: rc.target,
            mean,
            se: if se.is_finite() { se } else { 0.0 },
            variance: if variance.is_finite() { variance } else { 0.0 },
            median: if values.is_empty() {
                0.0
            } else {
                median(&values)
            },
            ks,
            ell_sq,
            ell_method: ell.map(|e| e.method),
            dropped,
            pass: within && drops_ok && !values.is_empty(),
        });
        all_values.push(values);
    }

    let trend = trend_for(kind, &records, cfg.require_trend);
    let trend_ok = trend.as_ref().is_none_or(|t| !t.required || t.decreasing);
    let overall_pass = !degenerate && trend_ok && records.iter().all(|r| r.pass);
    let report = ConvergenceReport {
        version: CONFIG_VERSION,
        experiment: kind,
        kernel: cfg.kernel.clone(),
        distribution: cfg.distribution.clone(),
        theta: rc.theta,
        t0: cfg.t0,
        replications: reps,
        base_seed: cfg.base_seed,
        tolerances: cfg.tolerances,
        records,
        trend,
        degenerate,
        overall_pass,
        note: NOTE.into(),
        runtime_ms: start.elapsed().as_millis() as u64,
    };
    Ok(ExperimentOutput {
        report,
        values: all_values,
    })
}

fn trend_for(kind: ExperimentKind, records: &[Record], required: bool) -> Option<Trend> {
    if records.len() < 2 {
        return None;
    }
    let (metric, values): (&str, Vec<f64>) = match kind {
        ExperimentKind::CltT0 | ExperimentKind::FcltSup => (
            "ks",
            records
                .iter()
                .map(|r| r.ks.unwrap_or(f64::INFINITY))
                .collect(),
        ),
        ExperimentKind::Arvesen => (
            "abs_mean_error",
            records
                .iter()
                .map(|r| (r.mean - r.target.unwrap_or(0.0)).abs())
                .collect(),
        ),
        ExperimentKind::Raikov | ExperimentKind::JackRaikov => {
            ("variance", records.iter().map(|r| r.variance).collect())
        }
        ExperimentKind::Negligibility => ("mean", records.iter().map(|r| r.mean).collect()),
    };
    let (first, last) = (values[0], values[values.len() - 1]);
    let decreasing = if kind == ExperimentKind::Negligibility {
        first > 0.0 && 2.0 * last <= first
    } else {
        last < first
    };
    Some(Trend {
        metric: metric.into(),
        values,
        decreasing,
        required: required || kind == ExperimentKind::Negligibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Inverse of [`normal_cdf`] by bisection.
    fn normal_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Composite Simpson rule for the standard normal density on [a, b].
    fn simpson_density(a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = phi(a) + phi(b);
        for i in 1..steps {
            s += phi(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for x in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(normal_cdf(-x), 1.0 - normal_cdf(x), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(normal_cdf(1.959964), 0.975, epsilon = 1e-6);
        for x in [-3.0, -1.2, 0.3, 1.959964, 4.0] {
            let quad = 0.5 + simpson_density(0.0, x, 20_000);
            assert_abs_diff_eq!(normal_cdf(x), quad, epsilon = 1e-9);
        }
    }

    #[test]
    fn wiener_sup_values() {
        assert_eq!(wiener_sup_cdf(0.0), 0.0);
        assert_eq!(wiener_sup_cdf(-1.0), 0.0);
        assert_abs_diff_eq!(wiener_sup_cdf(1.959964), 0.95, epsilon = 2e-6);
        assert_abs_diff_eq!(wiener_sup_cdf(40.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_examples() {
        let n = 200;
        let q: Vec<f64> = (1..=n)
            .map(|i| normal_quantile((i as f64 - 0.5) / n as f64))
            .collect();
        assert_abs_diff_eq!(ks_distance(&q, normal_cdf), 0.5 / n as f64, epsilon = 1e-12);
        assert_eq!(ks_distance(&[0.0], normal_cdf), 0.5);
    }

    #[test]
    fn ks_uniform_sample() {
        use rand::Rng;
        let mut rng = crate::sampler::rng_from_seed(99);
        let u: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_distance(&u, |x| x.clamp(0.0, 1.0)) < 0.061);
    }

    #[test]
    fn replication_seed_rule() {
        assert_eq!(replication_seed(12345, 0), 12345);
        assert_eq!(replication_seed(0, 1), 0x9E37_79B9_7F4A_7C15);
        let mut seen: Vec<u64> = (0..1_000_000u64)
            .map(|i| replication_seed(0xABCD, i))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 1_000_000);
    }

    fn config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            version: 1,
            experiment: kind,
            kernel: "product:m=2".into(),
            distribution: "normal:1,1".into(),
            theta: None,
            t0: 1.0,
            n_grid: vec![40, 80],
            replications: 60,
            base_seed: 7,
            tolerances: Tolerances {
                ks: 0.3,
                rel_mean: 0.3,
            },
            scaling: StudentizedScaling::FullSample,
            ell_method: None,
            statistic: None,
            require_trend: false,
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config(ExperimentKind::CltT0);
        c.replications = 10;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let mut c = config(ExperimentKind::CltT0);
        c.t0 = 0.0;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let mut c = config(ExperimentKind::CltT0);
        c.kernel = "kendall".into();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let mut c = config(ExperimentKind::Arvesen);
        c.distribution = "example:a=2".into();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let c = config(ExperimentKind::Negligibility);
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"version": 1, "bogus": 3}"#),
            Err(Error::Config(_))
        ));
        let c = config(ExperimentKind::CltT0);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(c.resolve().unwrap().theta, 1.0);
    }

    #[test]
    fn small_runs_are_deterministic_across_workers() {
        for kind in [
            ExperimentKind::CltT0,
            ExperimentKind::FcltSup,
            ExperimentKind::Raikov,
            ExperimentKind::JackRaikov,
            ExperimentKind::Arvesen,
        ] {
            let c = config(kind);
            let mut a = run_experiment(&c, 1).unwrap();
            let mut b = run_experiment(&c, 4).unwrap();
            a.runtime_ms = 0;
            b.runtime_ms = 0;
            assert_eq!(a.to_json(), b.to_json(), "{kind:?}");
            assert_eq!(ConvergenceReport::from_json(&a.to_json()).unwrap(), a);
        }
    }

    #[test]
    fn degenerate_jackknife_raikov() {
        let mut c = config(ExperimentKind::JackRaikov);
        c.kernel = "constant:c=1,m=2".into();
        let r = run_experiment(&c, 2).unwrap();
        assert!(r.degenerate);
        assert!(!r.overall_pass);
        assert!(r.records.iter().all(|rec| rec.mean == 0.0));
    }

    #[test]
    fn dropped_replications_fail_the_report() {
        let mut c = config(ExperimentKind::CltT0);
        c.distribution = "finite:[1,2];[0.97,0.03]".into();
        c.n_grid = vec![3];
        c.theta = Some(1.0);
        c.kernel = "identity".into();
        let r = run_experiment(&c, 2).unwrap();
        assert!(r.records[0].dropped > 0);
        assert!(!r.overall_pass);
    }

    #[test]
    fn negligibility_run() {
        let mut c = config(ExperimentKind::Negligibility);
        c.kernel = "variance".into();
        c.distribution = "normal:0,1".into();
        c.statistic = Some(NegligibilityStatistic::P1UnSq);
        c.n_grid = vec![20, 200];
        let r = run_experiment(&c, 2).unwrap();
        let t = r.trend.unwrap();
        assert!(t.required && t.decreasing, "{t:?}");
        assert!(r.overall_pass);
    }
}
