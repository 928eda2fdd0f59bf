//! Experiment orchestration and CSV artifacts.
//!
//! Artifacts are written under a `.partial` name and renamed once complete,
//! so a failed run never leaves a file that looks finished. The run
//! manifest is written last, success or not, and records the status.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use riscov::coverage::AnalyticModel;
use riscov::distributions::{cascaded_length_dist, nearest_los_bs_dist, nearest_vlos_bs_dist, DistanceDistribution};
use riscov::association::direct_wins;
use riscov::geometry::LinkMode;
use riscov::sinr::{coverage_from_samples, rate_pair_from_samples, simulate_link_distances, simulate_samples, Uncertainty};
use riscov::stats::ks_distance;
use riscov::units::db_to_linear;
use serde::Serialize;

use crate::config::{artifact_columns, ExperimentConfig, Mode, Point};
use crate::error::{CliError, Result};

pub const COVERAGE_CSV: &str = "coverage.csv";
pub const DISTRIBUTIONS_CSV: &str = "distributions.csv";
pub const RATEPAIR_CSV: &str = "ratepair.csv";
pub const VALIDATION_CSV: &str = "validation.csv";
pub const MANIFEST: &str = "run_manifest.toml";

pub const COVERAGE_COLUMNS: &[&str] =
    &["eps1_db", "eps2_db", "p_mc", "ci", "p_analytic", "err_budget", "zeta_d", "zeta_v"];
pub const DISTRIBUTION_COLUMNS: &[&str] = &["distribution", "x_m", "pdf_analytic", "pdf_empirical"];
pub const RATEPAIR_COLUMNS: &[&str] = &[
    "lambda_b_per_km2",
    "lambda_r_per_km2",
    "lambda_l_per_km2",
    "comm_rate_bps",
    "comm_rate_se",
    "sens_rate_bps",
    "sens_rate_se",
    "trials",
];
pub const VALIDATION_COLUMNS: &[&str] = &["point", "check", "value", "tolerance", "pass"];

const KS_TOLERANCE: f64 = 0.02;
const ASSOCIATION_TOLERANCE: f64 = 0.01;
const COVERAGE_TOLERANCE: f64 = 0.03;
const HISTOGRAM_BINS: usize = 200;
const CDF_TABLE_POINTS: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Analyze,
    Sweep,
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

/// A CSV file that only receives its final name on [`Artifact::finish`].
struct Artifact {
    writer: csv::Writer<File>,
    partial: PathBuf,
    path: PathBuf,
}

impl Artifact {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let path = dir.join(name);
        let partial = dir.join(format!("{name}.partial"));
        let file = File::create(&partial).map_err(|e| CliError::io(&partial, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer, partial, path })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.partial, e))?;
        fs::rename(&self.partial, &self.path).map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    tool_version: &'static str,
    command: &'static str,
    status: String,
    seed: u64,
    artifacts: Vec<String>,
    columns: std::collections::BTreeMap<String, Vec<String>>,
    config: &'a ExperimentConfig,
}

/// Artifacts written so far and a sink for progress lines.
pub struct Summary<'a> {
    pub artifacts: Vec<PathBuf>,
    log: &'a mut dyn FnMut(&str),
}

impl Summary<'_> {
    fn line(&mut self, text: String) {
        (self.log)(&text);
    }
}

/// Runs `command`, reporting progress through `log`, then writes the
/// manifest whatever the outcome. Returns the finished artifacts.
pub fn run(command: Command, cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Vec<PathBuf>> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut summary = Summary { artifacts: Vec::new(), log };
    let result = dispatch(command, cfg, &mut summary);
    let manifest = Manifest {
        manifest_version: 1,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        status: match &result {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        },
        seed: cfg.seed,
        artifacts: summary
            .artifacts
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
            .collect(),
        columns: artifact_columns(),
        config: cfg,
    };
    let path = out.join(MANIFEST);
    let text = toml::to_string(&manifest).expect("manifest serialises");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    result.map(|()| summary.artifacts)
}

fn dispatch(command: Command, cfg: &ExperimentConfig, summary: &mut Summary<'_>) -> Result<()> {
    let points = cfg.points()?;
    match command {
        Command::Simulate => coverage_runs(cfg, &points, Mode::Simulate, summary),
        Command::Analyze => coverage_runs(cfg, &points, Mode::Analyze, summary),
        Command::Sweep => {
            if cfg.sweep.is_none() {
                return Err(CliError::Config {
                    field: "sweep".into(),
                    reason: "the sweep command needs a [sweep] table".into(),
                });
            }
            coverage_runs(cfg, &points, cfg.mode, summary)
        }
        Command::Validate => validate(cfg, &points, summary),
    }
}

fn point_dir(cfg: &ExperimentConfig, point: &Point) -> Result<PathBuf> {
    let dir = match &point.label {
        Some(l) => cfg.output_dir.join(l),
        None => cfg.output_dir.clone(),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn describe(point: &Point) -> String {
    match &point.label {
        None => "base scenario".into(),
        Some(l) => {
            let a: Vec<String> = point.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{l} ({})", a.join(", "))
        }
    }
}

fn coverage_runs(cfg: &ExperimentConfig, points: &[Point], mode: Mode, summary: &mut Summary<'_>) -> Result<()> {
    if mode.simulates() && cfg.trials == 0 {
        return Err(CliError::Config {
            field: "trials".into(),
            reason: "must be at least 1 when simulating".into(),
        });
    }
    let link_mode: LinkMode = cfg.blockage_mode.into();
    let mut rates = if mode.simulates() {
        Some(Artifact::create(&cfg.output_dir, RATEPAIR_CSV, RATEPAIR_COLUMNS)?)
    } else {
        None
    };
    for point in points {
        let dir = point_dir(cfg, point)?;
        let samples = if mode.simulates() {
            Some(simulate_samples(&point.params, link_mode, cfg.trials, cfg.seed)?)
        } else {
            None
        };
        let model = if mode.analyzes() {
            Some(AnalyticModel::new(&point.params)?)
        } else {
            None
        };
        let mut csv = Artifact::create(&dir, COVERAGE_CSV, COVERAGE_COLUMNS)?;
        for &[e1, e2] in &cfg.thresholds_db {
            let (eps1, eps2) = (db_to_linear(e1), db_to_linear(e2));
            let mc = samples.as_ref().map(|s| coverage_from_samples(s, eps1, eps2));
            let an = model.as_ref().map(|m| m.marginal_coverage(eps1, eps2)).transpose()?;
            let blank = String::new;
            let (p_mc, ci) = match &mc {
                Some(r) => match r.uncertainty {
                    Uncertainty::MonteCarlo { ci_halfwidth, .. } => (num(r.p_cs), num(ci_halfwidth)),
                    Uncertainty::Analytic { .. } => unreachable!("Monte Carlo estimator"),
                },
                None => (blank(), blank()),
            };
            let (p_an, budget) = match &an {
                Some(r) => (num(r.p_cs), num(r.tolerance())),
                None => (blank(), blank()),
            };
            // analytic association when available, case frequencies otherwise
            let split = an.as_ref().or(mc.as_ref()).map(|r| r.breakdown.clone());
            let (zd, zv) = split.map_or((blank(), blank()), |b| (num(b.zeta_d), num(b.zeta_v)));
            csv.row([e1.to_string(), e2.to_string(), p_mc, ci, p_an, budget, zd, zv])?;
        }
        summary.artifacts.push(csv.finish()?);
        if let (Some(rates), Some(samples)) = (rates.as_mut(), samples.as_ref()) {
            let r = rate_pair_from_samples(samples, point.params.bandwidth_w);
            rates.row([
                point.spec.lambda_b_per_km2.to_string(),
                point.spec.lambda_r_per_km2.to_string(),
                point.spec.lambda_l_per_km2.to_string(),
                num(r.comm_rate),
                num(r.comm_se),
                num(r.sens_rate),
                num(r.sens_se),
                r.n_trials.to_string(),
            ])?;
        }
        summary.line(format!("{}: {} thresholds", describe(point), cfg.thresholds_db.len()));
    }
    if let Some(rates) = rates {
        summary.artifacts.push(rates.finish()?);
    }
    Ok(())
}

/// Histogram density of the finite samples, normalised by the total count
/// so that defective laws compare directly.
fn empirical_pdf(samples: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0u64; edges.len() - 1];
    let width = edges[1] - edges[0];
    for &s in samples.iter().filter(|s| s.is_finite()) {
        let k = ((s - edges[0]) / width).floor();
        if k >= 0.0 && (k as usize) < counts.len() {
            counts[k as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    counts.iter().map(|&c| c as f64 / (n * width)).collect()
}

fn upper_edge(samples: &[f64]) -> f64 {
    let mut finite: Vec<f64> = samples.iter().copied().filter(|s| s.is_finite()).collect();
    if finite.is_empty() {
        return 1.0;
    }
    finite.sort_by(f64::total_cmp);
    finite[((finite.len() - 1) as f64 * 0.995) as usize].max(1e-9)
}

struct Check {
    name: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn validate(cfg: &ExperimentConfig, points: &[Point], summary: &mut Summary<'_>) -> Result<()> {
    if cfg.trials == 0 {
        return Err(CliError::Config {
            field: "trials".into(),
            reason: "validation needs at least 1 trial".into(),
        });
    }
    let link_mode: LinkMode = cfg.blockage_mode.into();
    let mut report = Artifact::create(&cfg.output_dir, VALIDATION_CSV, VALIDATION_COLUMNS)?;
    let mut failed = 0;
    for point in points {
        let dir = point_dir(cfg, point)?;
        let p = &point.params;
        let draws = simulate_link_distances(p, link_mode, cfg.trials, cfg.seed)?;
        let laws: [(DistanceDistribution, Vec<f64>); 3] = [
            (nearest_los_bs_dist(p)?, draws.iter().map(|d| d.los_bs).collect()),
            (nearest_vlos_bs_dist(p)?, draws.iter().map(|d| d.vlos_bs).collect()),
            (cascaded_length_dist(p)?, draws.iter().map(|d| d.cascaded).collect()),
        ];
        let mut csv = Artifact::create(&dir, DISTRIBUTIONS_CSV, DISTRIBUTION_COLUMNS)?;
        let mut checks = Vec::new();
        for (law, mut samples) in laws {
            let hi = upper_edge(&samples);
            let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| hi * i as f64 / HISTOGRAM_BINS as f64).collect();
            let empirical = empirical_pdf(&samples, &edges);
            for (k, emp) in empirical.iter().enumerate() {
                let x = 0.5 * (edges[k] + edges[k + 1]);
                let analytic = law.try_pdf(x)?;
                csv.row([law.kind().name().to_string(), num(x), num(analytic), num(*emp)])?;
            }
            let cdf = law.tabulated_cdf(CDF_TABLE_POINTS);
            checks.push(Check {
                name: format!("ks_{}", law.kind().name()),
                value: ks_distance(&mut samples, |x| cdf.eval(x)),
                tolerance: KS_TOLERANCE,
            });
        }
        summary.artifacts.push(csv.finish()?);

        let model = AnalyticModel::new(p)?;
        let assoc = model.association()?;
        let n = draws.len() as f64;
        let direct = |d: &riscov::association::LinkDistances| {
            d.los_bs.is_finite() && (!d.cascaded.is_finite() || direct_wins(d.los_bs, d.cascaded, p))
        };
        let zd = draws.iter().filter(|d| direct(d)).count() as f64 / n;
        let zv = draws.iter().filter(|d| d.cascaded.is_finite() && !direct(d)).count() as f64 / n;
        checks.push(Check {
            name: "zeta_d".into(),
            value: (assoc.zeta_d - zd).abs(),
            tolerance: ASSOCIATION_TOLERANCE,
        });
        checks.push(Check {
            name: "zeta_v".into(),
            value: (assoc.zeta_v - zv).abs(),
            tolerance: ASSOCIATION_TOLERANCE,
        });

        if cfg.mode.analyzes() && !cfg.thresholds_db.is_empty() {
            let samples = simulate_samples(p, link_mode, cfg.trials, cfg.seed)?;
            for &[e1, e2] in &cfg.thresholds_db {
                let (eps1, eps2) = (db_to_linear(e1), db_to_linear(e2));
                let mc = coverage_from_samples(&samples, eps1, eps2).p_cs;
                let an = model.marginal_coverage(eps1, eps2)?.p_cs;
                checks.push(Check {
                    name: format!("coverage_{e1}_{e2}"),
                    value: (an - mc).abs(),
                    tolerance: COVERAGE_TOLERANCE,
                });
            }
        }

        let label = point.label.clone().unwrap_or_else(|| "base".into());
        for c in &checks {
            failed += usize::from(!c.pass());
            report.row([label.clone(), c.name.clone(), num(c.value), num(c.tolerance), c.pass().to_string()])?;
            summary.line(format!(
                "{label} {}: {:.4} (tolerance {}) {}",
                c.name,
                c.value,
                c.tolerance,
                if c.pass() { "ok" } else { "FAILED" }
            ));
        }
    }
    summary.artifacts.push(report.finish()?);
    if failed > 0 {
        return Err(CliError::ValidationFailed { failed });
    }
    Ok(())
}
