use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use robrec::certificates::Certificate;
use robrec::data::{format_matrix, read_matrix, write_matrix, DatasetDescriptor};
use robrec::experiment::report_csv;
use robrec::nalgebra::DMatrix;
use robrec::{
    emit_report, error_bound, gen_regressors, ground_truth_matrix, inject_noise, load_dataset, normalize_columns,
    normalize_regressors, recovery_threshold, run_experiment, sigma_lower_bound, solve_regression, xi_amplitude,
    DatasetFormat, ExperimentConfig, ExperimentKind, NoiseSpec, Regime, ReportFormat,
};

use crate::config::{read_json, EstimateConfig, GenerateConfig};
use crate::{Format, Regressors, EXIT_NUMERICAL, EXIT_VIOLATION};

fn report_format(f: Format) -> ReportFormat {
    match f {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn load_x(source: &Regressors, normalize: bool) -> Result<DMatrix<f64>> {
    let x = match (&source.data, &source.x) {
        (Some(path), _) => load_dataset(path, DatasetFormat::from_path(path))?.into_parts().1,
        (None, Some(path)) => read_matrix(path)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    Ok(if normalize { normalize_regressors(&x)? } else { x })
}

pub fn generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<u8> {
    let mut cfg: GenerateConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.generator.seed = s;
        if let Some(noise) = cfg.noise.as_mut() {
            noise.seed = s;
        }
    }
    cfg.validate()?;

    let gen = gen_regressors(&cfg.generator)?;
    let x = if cfg.normalize { normalize_regressors(&gen.x)? } else { gen.x };
    let noise = cfg.noise.unwrap_or(NoiseSpec {
        outlier_fraction: 0.0,
        outlier_amplitude: 1e6,
        dense_bound: 0.0,
        seed: cfg.generator.seed,
    });
    let a0 = ground_truth_matrix(cfg.m, x.nrows(), noise.seed)?;
    let data = inject_noise(&x, &a0, &noise)?;

    create_dir(out)?;
    for (name, m) in [("X.csv", &x), ("Y.csv", &data.y), ("E.csv", &data.e), ("F.csv", &data.f), ("A0.csv", &a0)] {
        write_matrix(out.join(name), m)?;
    }
    let descriptor = DatasetDescriptor {
        y: "Y.csv".into(),
        x: "X.csv".into(),
    };
    write_text(&out.join("dataset.json"), &pretty(&descriptor)?)?;
    let sidecar = json!({
        "generator": cfg.generator,
        "noise": noise,
        "m": cfg.m,
        "normalize": cfg.normalize,
        "outliers": data.sc,
        "retries": gen.retries,
        "files": {"x": "X.csv", "y": "Y.csv", "e": "E.csv", "f": "F.csv", "a0": "A0.csv"},
    });
    write_text(&out.join("spec.json"), &pretty(&sidecar)?)?;
    println!("{}", out.join("dataset.json").display());
    Ok(0)
}

pub fn estimate(data: &Path, config: Option<&Path>, out: Option<&Path>, seed: Option<u64>, format: Format) -> Result<u8> {
    let mut cfg: EstimateConfig = match config {
        Some(p) => read_json(p)?,
        None => EstimateConfig::default(),
    };
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    let mut d = load_dataset(data, DatasetFormat::from_path(data))?;
    if cfg.normalize {
        d = normalize_columns(&d)?;
    }
    let res = solve_regression(&d, &cfg.loss, &cfg.solver)?;
    let text = match format {
        Format::Json => pretty(&res)?,
        Format::Csv => format_matrix(&res.a_star),
    };
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_matrix(dir.join("A_star.csv"), &res.a_star)?;
            write_text(&dir.join("estimate.json"), &pretty(&res)?)?;
        }
        None => print!("{text}{}", if text.ends_with('\n') { "" } else { "\n" }),
    }
    if !res.converged {
        eprintln!(
            "error: solver stopped after {} iterations without meeting its tolerances",
            res.iterations
        );
        return Ok(EXIT_NUMERICAL);
    }
    Ok(0)
}

fn curve_csv(c: &Certificate) -> String {
    let mut s = String::from("r,outlier_pct,B,regime\n");
    for p in &c.bound_curve {
        let pct = 100.0 * (c.big_n - p.r) as f64 / c.big_n as f64;
        let b = p.value.finite().map(|v| v.to_string()).unwrap_or_default();
        let regime = match p.value.regime() {
            Regime::Stable => "stable",
            Regime::Unstable => "unstable",
        };
        s.push_str(&format!("{},{pct},{b},{regime}\n", p.r));
    }
    s
}

pub fn certify(source: &Regressors, normalize: bool, out: Option<&Path>, format: Format) -> Result<u8> {
    let x = load_x(source, normalize)?;
    let cert = Certificate::compute(&x)?;
    let (text, name) = match format {
        Format::Json => (pretty(&cert)?, "certificate.json"),
        Format::Csv => (curve_csv(&cert), "bound_curve.csv"),
    };
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join(name), &text)?;
        }
        None => println!("{}", text.trim_end()),
    }
    Ok(0)
}

pub fn bound(source: &Regressors, outliers: usize, sigma: Option<f64>, normalize: bool) -> Result<u8> {
    let x = load_x(source, normalize)?;
    let big_n = x.ncols();
    if outliers > big_n {
        return Err(robrec::Error::InvalidArgument(format!("{outliers} outliers exceed N = {big_n}")).into());
    }
    let t = recovery_threshold(xi_amplitude(&x)?.xi)?;
    let sigma = sigma.unwrap_or_else(|| sigma_lower_bound(&x));
    let r = big_n - outliers;
    let b = error_bound(r, big_n, t, sigma)?;
    let out = json!({
        "r": r,
        "outliers": outliers,
        "B": b.finite(),
        "regime": b.regime(),
        "T": t,
        "sigma_lb": sigma,
        "N": big_n,
    });
    println!("{}", pretty(&out)?);
    Ok(0)
}

pub fn experiment(
    kind: ExperimentKind,
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    format: Format,
) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        // Sweep point i gets seed s + i + 1 so points stay independent.
        cfg.generator.seed = s;
        for (i, point) in cfg.sweep.iter_mut().enumerate() {
            point.seed = s.wrapping_add(i as u64 + 1);
        }
    }
    let report = run_experiment(kind, &cfg)?;
    let fmt = report_format(format);

    let mut written: Vec<PathBuf> = Vec::new();
    if let Some(dir) = out {
        create_dir(dir)?;
        let path = dir.join(format!("report.{fmt}"));
        emit_report(&report, &path, fmt)?;
        written.push(path);
    } else {
        for (path, f) in [(&cfg.outputs.json, ReportFormat::Json), (&cfg.outputs.csv, ReportFormat::Csv)] {
            if let Some(p) = path {
                emit_report(&report, p, f)?;
                written.push(p.clone());
            }
        }
    }
    if written.is_empty() {
        match fmt {
            ReportFormat::Json => println!("{}", pretty(&report)?),
            ReportFormat::Csv => print!("{}", report_csv(&report)),
        }
    } else {
        for p in &written {
            eprintln!("wrote {}", p.display());
        }
    }
    if report.violations > 0 {
        eprintln!("error: {} bound violation(s) detected", report.violations);
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}
