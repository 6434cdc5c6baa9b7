use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use serde::Serialize;
use ustat_core::decomposition::{
    degenerate_sum_bound, verify_expansion, DecompositionReport, DegenerateSumReport,
    ProductStatistic,
};
use ustat_core::jackknife::JackknifeSummary;
use ustat_core::montecarlo::run_experiment_with_values;
use ustat_core::process::StudentizedScaling;
use ustat_core::sampler::replication_seed;
use ustat_core::{
    jackknife_closed_form, jackknife_summary, naive_sum_sq, project_h1, pseudo_selfnormalized_path,
    sample, studentized_path_with, Distribution, Error, ExperimentConfig, Kernel,
};

use crate::{svg, Command, ProcessKind, Scaling};

/// Line to stdout; a closed pipe (e.g. `| head`) is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Largest relative discrepancy accepted by `verify-identity`.
const IDENTITY_TOL: f64 = 1e-9;

/// 2 for configuration and argument problems, 3 for a degenerate
/// normalizer, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::DegenerateNormalizer(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Path {
            kernel,
            dist,
            theta,
            n,
            seed,
            process,
            scaling,
            out,
            svg,
        } => cmd_path(
            &kernel,
            &dist,
            theta,
            n,
            seed,
            process,
            scaling,
            &out,
            svg.as_deref(),
        ),
        Command::Jackknife {
            kernel,
            dist,
            n,
            seed,
            naive,
            out,
        } => cmd_jackknife(&kernel, &dist, n, seed, naive, out.as_deref()),
        Command::Study {
            config,
            out,
            workers,
        } => cmd_study(&config, &out, workers),
        Command::Decomp {
            kernel,
            dist,
            shared,
            bound_n,
            out,
        } => cmd_decomp(&kernel, &dist, shared, bound_n, out.as_deref()),
        Command::VerifyIdentity {
            kernel,
            dist,
            n,
            trials,
            seed,
        } => cmd_verify_identity(&kernel, &dist, n, trials, seed),
    }
}

fn resolve(kernel: &str, dist: &str) -> Result<(Kernel, Distribution)> {
    let kernel: Kernel = kernel.parse()?;
    let dist: Distribution = dist.parse()?;
    let bound = kernel.bind(&dist)?;
    Ok((bound, dist))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_path(
    kernel: &str,
    dist: &str,
    theta: Option<f64>,
    n: usize,
    seed: u64,
    process: ProcessKind,
    scaling: Scaling,
    out: &Path,
    svg_out: Option<&Path>,
) -> Result<ExitCode> {
    let (kernel, dist) = resolve(kernel, dist)?;
    let theta = theta.or(kernel.theta()).ok_or_else(|| {
        Error::Config(format!(
            "--theta is required: no known mean for {} under {}",
            kernel.name(),
            dist.name()
        ))
    })?;
    if n < kernel.order() {
        return Err(Error::InsufficientData {
            needed: kernel.order(),
            got: n,
        }
        .into());
    }
    let data = sample(&dist, n, seed)?;
    let path = match process {
        ProcessKind::Studentized => {
            let scaling = match scaling {
                Scaling::FullSample => StudentizedScaling::FullSample,
                Scaling::RootNMultiplier => StudentizedScaling::RootNMultiplier,
            };
            studentized_path_with(&kernel, &data, theta, scaling)?
        }
        ProcessKind::Pseudo => {
            let proj = data
                .iter()
                .map(|&x| project_h1(&kernel, x, &dist, None).map(|p| p.value))
                .collect::<ustat_core::Result<Vec<f64>>>()?;
            pseudo_selfnormalized_path(&kernel, &data, theta, &proj)?
        }
    };
    write(out, &path.to_csv())?;
    if let Some(svg_out) = svg_out {
        write(svg_out, &svg::step_path_svg(&path))?;
    }
    out!(
        "wrote {} grid points to {}",
        path.values.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct JackknifeOutput<'a> {
    kernel: &'a str,
    distribution: &'a str,
    seed: u64,
    summary: &'a JackknifeSummary,
    naive_sum_sq: Option<f64>,
    relative_discrepancy: Option<f64>,
}

fn cmd_jackknife(
    kernel: &str,
    dist: &str,
    n: usize,
    seed: u64,
    naive: bool,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let (k, d) = resolve(kernel, dist)?;
    let data = sample(&d, n, seed)?;
    let summary = jackknife_summary(&k, &data)?;
    let naive_value = if naive {
        Some(naive_sum_sq(&k, &data)?)
    } else {
        None
    };
    let output = JackknifeOutput {
        kernel: k.name(),
        distribution: d.name(),
        seed,
        summary: &summary,
        naive_sum_sq: naive_value,
        relative_discrepancy: naive_value.map(|v| relative_gap(v, summary.sum_sq)),
    };
    let json = serde_json::to_string_pretty(&output)?;
    match out {
        Some(path) => write(path, &json)?,
        None => out!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn cmd_study(config: &Path, out: &Path, workers: usize) -> Result<ExitCode> {
    let text = fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    cfg.resolve()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let output = run_experiment_with_values(&cfg, workers)?;
    let report = &output.report;
    write(&out.join("report.json"), &report.to_json())?;

    let mut csv = String::from("n,statistic,mean,se,ks,pass\n");
    for r in &report.records {
        let ks = r.ks.map(|k| k.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.statistic, r.mean, r.se, ks, r.pass
        ));
        out!(
            "n={:<6} mean={:.6} se={:.6} ks={:<10} dropped={} {}",
            r.n,
            r.mean,
            r.se,
            if ks.is_empty() {
                "-".to_string()
            } else {
                format!("{:.4}", r.ks.unwrap())
            },
            r.dropped,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    write(&out.join("study.csv"), &csv)?;
    for (r, values) in report.records.iter().zip(&output.values) {
        let mut body = String::from("replication,value\n");
        for (i, v) in values.iter().enumerate() {
            body.push_str(&format!("{i},{v}\n"));
        }
        write(&out.join(format!("values_n{}.csv", r.n)), &body)?;
    }
    if let Some(t) = &report.trend {
        out!(
            "trend ({}): {}",
            t.metric,
            if t.decreasing {
                "decreasing"
            } else {
                "not decreasing"
            }
        );
    }
    if report.degenerate {
        out!("degenerate configuration: the normalizer vanishes");
    }
    out!(
        "overall: {}",
        if report.overall_pass { "PASS" } else { "FAIL" }
    );
    Ok(if report.overall_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct DecompOutput {
    expansion: DecompositionReport,
    degenerate_sum: Option<DegenerateSumReport>,
}

fn cmd_decomp(
    kernel: &str,
    dist: &str,
    shared: usize,
    bound_n: Option<usize>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let (k, d) = resolve(kernel, dist)?;
    let ps = ProductStatistic::new(k.clone(), shared)?;
    let expansion = verify_expansion(&ps, &d)?;
    let degenerate_sum = match bound_n {
        Some(n) => {
            let mu = k
                .theta()
                .ok_or_else(|| Error::Config("kernel mean unknown".into()))?;
            Some(degenerate_sum_bound(
                |x| k.eval_unchecked(x),
                k.order(),
                mu,
                &d,
                n,
            )?)
        }
        None => None,
    };
    let ok = expansion.all_degenerate && expansion.reconstruction_pass;
    out!(
        "{} terms, all degenerate: {}, max reconstruction error: {:e}",
        expansion.terms.len(),
        expansion.all_degenerate,
        expansion.max_reconstruction_error
    );
    if let Some(l) = &degenerate_sum {
        out!(
            "degenerate sum: lhs={} rhs={} ratio={} (stated constant {}, corrected {})",
            l.lhs,
            l.rhs,
            l.ratio.map_or("undefined".into(), |r| r.to_string()),
            l.stated_constant,
            l.corrected_constant
        );
    }
    let json = serde_json::to_string_pretty(&DecompOutput {
        expansion,
        degenerate_sum,
    })?;
    if let Some(path) = out {
        write(path, &json)?;
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify_identity(
    kernel: &str,
    dist: &str,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ExitCode> {
    let (k, d) = resolve(kernel, dist)?;
    if n <= k.order() {
        return Err(Error::InsufficientData {
            needed: k.order() + 1,
            got: n,
        }
        .into());
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("--trials must be positive".into()).into());
    }
    let mut worst = 0.0f64;
    for t in 0..trials {
        let data = sample(&d, n, replication_seed(seed, t as u64))?;
        let naive = naive_sum_sq(&k, &data)?;
        let closed = jackknife_closed_form(&k, &data)?.sum_sq;
        worst = worst.max(relative_gap(naive, closed));
    }
    out!("max relative discrepancy over {trials} trials: {worst:e}");
    Ok(if worst <= IDENTITY_TOL {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
