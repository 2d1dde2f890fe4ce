//! Job execution and output writing.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use sha2::{Digest, Sha256};

use super::config::{Job, OracleJob, RunConfig, SeriesKind};
use crate::error::Error;
use crate::evaluator::evaluate_configuration;
use crate::flow::FlowProblem;
use crate::graphs::{connected_components, enumerate_configurations, is_connected, is_vacuum};
use crate::noise::FlowWindow;
use crate::oracle::{
    count_chi_square, exp_series_check, linear_closed_form, mc_correlation, partition_transform_check, McOptions,
};
use crate::series::Series;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One file produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    fn new(name: impl Into<String>, contents: String) -> Self {
        OutputFile {
            name: name.into(),
            contents,
        }
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.contents.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub job: &'static str,
    pub directory: PathBuf,
    pub files: Vec<OutputFile>,
    /// Short `key: value` lines for the terminal.
    pub summary: Vec<String>,
    /// Not part of any output file, so digests stay reproducible.
    pub wall_time: Duration,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Plain decimal with 17 significant digits, no exponent.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    if out.contains('.') {
        let trimmed = out.trim_end_matches('0').trim_end_matches('.');
        out = trimmed.to_string();
    }
    out
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(comments: &[String], columns: &[&str]) -> Self {
        let mut text = String::new();
        for c in comments {
            text.push_str("# ");
            text.push_str(c);
            text.push('\n');
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    /// Cells containing commas or quotes are quoted.
    fn row(&mut self, cells: &[String]) {
        let quoted: Vec<String> = cells
            .iter()
            .map(|c| {
                if c.contains(',') || c.contains('"') {
                    format!("\"{}\"", c.replace('"', "\"\""))
                } else {
                    c.clone()
                }
            })
            .collect();
        self.text.push_str(&quoted.join(","));
        self.text.push('\n');
    }
}

fn window_comment(w: FlowWindow) -> String {
    match w.mode {
        crate::noise::CumulantMode::Incremental => {
            format!("window: incremental t={} t0={}", format_number(w.t), format_number(w.t0))
        }
        crate::noise::CumulantMode::Absolute => format!("window: absolute t0={}", format_number(w.t0)),
    }
}

fn plotdata(name: &str, points: &[(f64, f64, f64)]) -> OutputFile {
    let mut s = String::from("# x y err\n");
    for &(x, y, e) in points {
        let _ = writeln!(s, "{} {} {}", format_number(x), format_number(y), format_number(e));
    }
    OutputFile::new(format!("{name}.dat"), s)
}

fn series_csv(comments: &[String], s: &Series<f64>) -> String {
    let mut csv = Csv::new(comments, &["order", "value", "error", "graphs"]);
    for (m, t) in s.terms().iter().enumerate() {
        csv.row(&[
            m.to_string(),
            format_number(t.value),
            format_number(t.error),
            t.graph_count.to_string(),
        ]);
    }
    csv.text
}

fn series_points(s: &Series<f64>) -> Vec<(f64, f64, f64)> {
    s.terms()
        .iter()
        .enumerate()
        .map(|(m, t)| (m as f64, t.value, t.error))
        .collect()
}

/// Computes every output in memory. Nothing touches the file system.
pub fn compute(cfg: &RunConfig) -> Result<RunReport, Error> {
    let start = Instant::now();
    let mut report = compute_files(cfg).map_err(|e| e.context(format!("job {}", cfg.job.name())))?;
    report.wall_time = start.elapsed();
    Ok(report)
}

fn compute_files(cfg: &RunConfig) -> Result<RunReport, Error> {
    let spec = cfg.numerics.spec;
    let m = cfg.numerics.max_order;
    let problem = FlowProblem::new(cfg.kernels.clone(), cfg.model.clone(), cfg.field.clone(), spec)?;
    let mut base = vec![
        format!("job: {}", cfg.job.name()),
        format!("scheme: {}", spec.scheme.name()),
    ];
    if let Some(seed) = cfg.numerics.seed {
        base.push(format!("seed: {seed}"));
    }
    let mut files = Vec::new();
    let mut summary = Vec::new();
    match &cfg.job {
        Job::Enumerate { degrees, filter } => {
            let mut csv = Csv::new(&base, &["index", "graph", "connected", "vacuum", "components"]);
            let mut n = 0usize;
            for (i, c) in enumerate_configurations(degrees, *filter)?.enumerate() {
                csv.row(&[
                    i.to_string(),
                    c.to_string(),
                    is_connected(&c).to_string(),
                    is_vacuum(&c).to_string(),
                    connected_components(&c).num_blocks().to_string(),
                ]);
                n += 1;
            }
            summary.push(format!("configurations: {n}"));
            files.push(OutputFile::new("configurations.csv", csv.text));
        }
        Job::Evaluate { graphs, window } => {
            let mut comments = base.clone();
            comments.push(window_comment(*window));
            let mut csv = Csv::new(&comments, &["graph", "value", "error", "method", "evaluations"]);
            for c in graphs {
                let r = evaluate_configuration(c, &cfg.kernels, &cfg.model, &cfg.field, *window, &spec)?;
                summary.push(format!("{c}: {}", format_number(r.value)));
                csv.row(&[
                    c.to_string(),
                    format_number(r.value),
                    format_number(r.error_estimate),
                    r.scheme.to_string(),
                    r.evaluations.to_string(),
                ]);
            }
            files.push(OutputFile::new("evaluations.csv", csv.text));
        }
        Job::Series { kind, window } => {
            let mut comments = base.clone();
            comments.push(format!("series: {}", kind.name()));
            comments.push(window_comment(*window));
            let s = match kind {
                SeriesKind::Partition => problem.partition_function_series(*window, m)?,
                SeriesKind::Effective => problem.effective_action_series(*window, m)?,
                SeriesKind::Correlation => problem.correlation_functional(window.t0, m)?,
                SeriesKind::Renormalized => {
                    let r = problem.renormalized_correlation(window.t0, m)?;
                    let mut csv = Csv::new(
                        &comments,
                        &["order", "subtracted", "subtracted_error", "dropped", "dropped_error", "counterterm"],
                    );
                    for k in 0..=m {
                        let (a, b, c) = (r.subtracted.terms()[k], r.dropped.terms()[k], r.counterterm.terms()[k]);
                        csv.row(&[
                            k.to_string(),
                            format_number(a.value),
                            format_number(a.error),
                            format_number(b.value),
                            format_number(b.error),
                            format_number(c.value),
                        ]);
                    }
                    summary.push(format!("subtracted_total: {}", format_number(r.subtracted.total().0)));
                    summary.push(format!("dropped_total: {}", format_number(r.dropped.total().0)));
                    files.push(OutputFile::new("series.csv", csv.text));
                    if cfg.output.plotdata {
                        files.push(plotdata("series_subtracted", &series_points(&r.subtracted)));
                        files.push(plotdata("series_dropped", &series_points(&r.dropped)));
                    }
                    return Ok(RunReport {
                        job: cfg.job.name(),
                        directory: cfg.output.directory.clone(),
                        files,
                        summary,
                        wall_time: Duration::ZERO,
                    });
                }
            };
            let (total, err) = s.total();
            summary.push(format!("total: {} +- {}", format_number(total), format_number(err)));
            files.push(OutputFile::new("series.csv", series_csv(&comments, &s)));
            if cfg.output.plotdata {
                files.push(plotdata("series", &series_points(&s)));
            }
        }
        Job::Counterterm { t0 } => {
            let mut comments = base.clone();
            comments.push(format!("t0: {}", format_number(*t0)));
            let s = problem.vacuum_counterterm(*t0, m)?;
            summary.push(format!("total: {}", format_number(s.total().0)));
            files.push(OutputFile::new("counterterm.csv", series_csv(&comments, &s)));
            if cfg.output.plotdata {
                files.push(plotdata("counterterm", &series_points(&s)));
            }
        }
        Job::Scan { t0, quantity } => {
            let r = problem.td_limit_scan(t0, quantity)?;
            let mut comments = base.clone();
            comments.push(format!("quantity: {}", r.quantity));
            let mut csv = Csv::new(&comments, &["t0", "value", "error"]);
            for row in &r.rows {
                csv.row(&[format_number(row.t0), format_number(row.value), format_number(row.error)]);
            }
            files.push(OutputFile::new("scan.csv", csv.text));
            files.push(OutputFile::new("scan_fit.txt", r.summary()));
            if cfg.output.plotdata {
                let pts: Vec<_> = r.rows.iter().map(|row| (row.t0, row.value, row.error)).collect();
                files.push(plotdata("scan", &pts));
            }
            summary.extend(r.summary().lines().map(str::to_string));
        }
        Job::Oracle(o) => {
            let mut comments = base.clone();
            comments.push(format!("check: {}", o.name()));
            let mut csv = Csv::new(&comments, &["key", "value"]);
            let mut put = |k: &str, v: String, summary: &mut Vec<String>| {
                summary.push(format!("{k}: {v}"));
                csv.row(&[k.to_string(), v]);
            };
            let seed = cfg.numerics.seed.unwrap_or(0);
            match o {
                OracleJob::McCorrelation { t, samples } => {
                    let est = mc_correlation(&cfg.model, &cfg.kernels, &cfg.field, *t, &McOptions::new(*samples, seed))?;
                    let pert = problem.correlation_functional(*t, m)?;
                    let (p, pe) = pert.total();
                    put("mc_mean", format_number(est.mean), &mut summary);
                    put("mc_std_error", format_number(est.std_error), &mut summary);
                    put("samples", est.samples.to_string(), &mut summary);
                    put("series_total", format_number(p), &mut summary);
                    put("series_error", format_number(pe), &mut summary);
                    put("difference", format_number(est.mean - p), &mut summary);
                }
                OracleJob::LinearClosedForm { t, samples } => {
                    let est = mc_correlation(&cfg.model, &cfg.kernels, &cfg.field, *t, &McOptions::new(*samples, seed))?;
                    let exact = linear_closed_form(&cfg.model, &cfg.kernels, &cfg.field, *t, &spec)?;
                    put("mc_mean", format_number(est.mean), &mut summary);
                    put("mc_std_error", format_number(est.std_error), &mut summary);
                    put("closed_form", format_number(exact), &mut summary);
                    let z = if est.std_error > 0.0 {
                        (est.mean - exact) / est.std_error
                    } else {
                        0.0
                    };
                    put("z_score", format_number(z), &mut summary);
                }
                OracleJob::CountChiSquare { t, draws } => {
                    let r = count_chi_square(&cfg.model, *t, *draws, seed)?;
                    put("draws", r.draws.to_string(), &mut summary);
                    put("mean_count", format_number(r.mean_count), &mut summary);
                    put("expected_mean", format_number(r.expected_mean), &mut summary);
                    put("statistic", format_number(r.statistic), &mut summary);
                    put("degrees_of_freedom", r.degrees_of_freedom.to_string(), &mut summary);
                    put("p_value", format_number(r.p_value), &mut summary);
                }
                OracleJob::PartitionTransform { n_max } => {
                    let r = partition_transform_check(*n_max, seed)?;
                    put("sequences", r.sequences.to_string(), &mut summary);
                    put("comparisons", r.comparisons.to_string(), &mut summary);
                    put("mismatches", r.mismatches.to_string(), &mut summary);
                    put("max_roundtrip_error", format_number(r.max_roundtrip_error), &mut summary);
                }
                OracleJob::ExpSeries { window } => {
                    let connected = problem.effective_action_series(*window, m)?;
                    let full = problem.partition_function_series(*window, m)?;
                    let r = exp_series_check(&connected, &full, m)?;
                    for row in &r.rows {
                        put(&format!("order_{}_exp_connected", row.order), format_number(row.exp_connected), &mut summary);
                        put(&format!("order_{}_full", row.order), format_number(row.full), &mut summary);
                    }
                    put("max_rel_deviation", format_number(r.max_rel_deviation()), &mut summary);
                }
            }
            files.push(OutputFile::new("oracle.csv", csv.text));
        }
    }
    Ok(RunReport {
        job: cfg.job.name(),
        directory: cfg.output.directory.clone(),
        files,
        summary,
        wall_time: Duration::ZERO,
    })
}

fn manifest(cfg_digest: &str, report: &RunReport) -> OutputFile {
    let mut s = format!("job: {}\nconfig_sha256: {cfg_digest}\n", report.job);
    for f in &report.files {
        let _ = writeln!(s, "{}  {}", f.sha256(), f.name);
    }
    OutputFile::new("manifest.txt", s)
}

fn write_atomic(dir: &Path, file: &OutputFile) -> io::Result<PathBuf> {
    let target = dir.join(&file.name);
    let tmp = dir.join(format!(".{}.tmp", file.name));
    fs::write(&tmp, file.contents.as_bytes())?;
    if let Err(e) = fs::rename(&tmp, &target) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    Ok(target)
}

/// Writes the report files and a manifest. Files written before a failure
/// are removed.
pub fn write_outputs(report: &mut RunReport, config_text: &str) -> Result<(), RunError> {
    let dir = report.directory.clone();
    fs::create_dir_all(&dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let digest = hex(&Sha256::digest(config_text.as_bytes()));
    let m = manifest(&digest, report);
    report.files.push(m);
    let mut written = Vec::new();
    for f in &report.files {
        match write_atomic(&dir, f) {
            Ok(p) => {
                info!("wrote {}", p.display());
                written.push(p);
            }
            Err(source) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(RunError::Io {
                    path: dir.join(&f.name),
                    source,
                });
            }
        }
    }
    Ok(())
}

/// Computes and writes everything for a validated configuration.
pub fn execute(cfg: &RunConfig, config_text: &str) -> Result<RunReport, RunError> {
    let mut report = compute(cfg)?;
    write_outputs(&mut report, config_text)?;
    Ok(report)
}
