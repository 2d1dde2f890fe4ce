//! Run configuration: a TOML tree validated into typed jobs. Validation
//! collects every problem it finds, each tagged with the path of the
//! offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::evaluator::{QuadratureSpec, Scheme};
use crate::field::{FieldBump, TestField};
use crate::flow::ScanQuantity;
use crate::graphs::{Configuration, GraphFilter};
use crate::kernels::{Cutoff, VertexKernelSet};
use crate::noise::{
    ChargeMeasure, CovarianceFamily, CumulantMode, FlowWindow, GaussianCovariance, IntensityProfile, NoiseModel,
    ProfileShape,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Partition,
    Effective,
    Correlation,
    Renormalized,
}

impl SeriesKind {
    pub fn name(self) -> &'static str {
        match self {
            SeriesKind::Partition => "partition",
            SeriesKind::Effective => "effective",
            SeriesKind::Correlation => "correlation",
            SeriesKind::Renormalized => "renormalized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleJob {
    /// Monte Carlo correlation functional against the perturbative series.
    McCorrelation { t: f64, samples: u64 },
    /// Particle counts against the Poisson law.
    CountChiSquare { t: f64, draws: u64 },
    /// Moment transform against brute-force enumeration.
    PartitionTransform { n_max: usize },
    /// Monte Carlo against the closed form for linear potentials.
    LinearClosedForm { t: f64, samples: u64 },
    /// Formal exponential of the connected series against the full series.
    ExpSeries { window: FlowWindow },
}

impl OracleJob {
    pub fn name(&self) -> &'static str {
        match self {
            OracleJob::McCorrelation { .. } => "mc_correlation",
            OracleJob::CountChiSquare { .. } => "count_chi_square",
            OracleJob::PartitionTransform { .. } => "partition_transform",
            OracleJob::LinearClosedForm { .. } => "linear_closed_form",
            OracleJob::ExpSeries { .. } => "exp_series",
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(
            self,
            OracleJob::McCorrelation { .. } | OracleJob::CountChiSquare { .. } | OracleJob::LinearClosedForm { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Enumerate {
        degrees: Vec<usize>,
        filter: Option<GraphFilter>,
    },
    Evaluate {
        graphs: Vec<Configuration>,
        window: FlowWindow,
    },
    Series {
        kind: SeriesKind,
        window: FlowWindow,
    },
    Counterterm {
        t0: f64,
    },
    Scan {
        t0: Vec<f64>,
        quantity: ScanQuantity,
    },
    Oracle(OracleJob),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Enumerate { .. } => "enumerate",
            Job::Evaluate { .. } => "evaluate",
            Job::Series { .. } => "series",
            Job::Counterterm { .. } => "counterterm",
            Job::Scan { .. } => "scan",
            Job::Oracle(_) => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub spec: QuadratureSpec,
    pub max_order: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub plotdata: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: NoiseModel,
    pub kernels: VertexKernelSet,
    pub field: TestField,
    pub job: Job,
    pub numerics: Numerics,
    pub output: OutputConfig,
}

/// Accumulates errors while walking the tree.
struct Walker {
    errors: Vec<ConfigError>,
}

impl Walker {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_keys(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(join(path, k), "unknown key");
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, path: &str, key: &str, required: bool) -> Option<&'a Table> {
        match t.get(key) {
            Some(Value::Table(x)) => Some(x),
            Some(_) => {
                self.err(join(path, key), "expected a table");
                None
            }
            None => {
                if required {
                    self.err(join(path, key), "missing required table");
                }
                None
            }
        }
    }

    fn float(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            Some(v) => {
                let x = as_float(v);
                if x.is_none() {
                    self.err(join(path, key), "expected a number");
                }
                x
            }
            None => None,
        }
    }

    fn req_float(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(join(path, key), "missing required number");
        }
        self.float(t, path, key)
    }

    fn positive(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<f64> {
        let x = if required {
            self.req_float(t, path, key)
        } else {
            self.float(t, path, key)
        }?;
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.err(join(path, key), "must be positive");
            None
        }
    }

    fn uint(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<u64> {
        match t.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => {
                self.err(join(path, key), "expected a non-negative integer");
                None
            }
            None => {
                if required {
                    self.err(join(path, key), "missing required integer");
                }
                None
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, path: &str, key: &str, required: bool) -> Option<&'a str> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(join(path, key), "expected a string");
                None
            }
            None => {
                if required {
                    self.err(join(path, key), "missing required string");
                }
                None
            }
        }
    }

    fn float_list(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<Vec<f64>> {
        match t.get(key) {
            Some(Value::Array(a)) => {
                let xs: Option<Vec<f64>> = a.iter().map(as_float).collect();
                if xs.is_none() {
                    self.err(join(path, key), "expected a list of numbers");
                }
                xs
            }
            Some(_) => {
                self.err(join(path, key), "expected a list of numbers");
                None
            }
            None => {
                if required {
                    self.err(join(path, key), "missing required list");
                }
                None
            }
        }
    }

    fn uint_list(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<usize>> {
        match t.get(key) {
            Some(Value::Array(a)) => {
                let xs: Option<Vec<usize>> = a
                    .iter()
                    .map(|v| match v {
                        Value::Integer(i) if *i >= 0 => Some(*i as usize),
                        _ => None,
                    })
                    .collect();
                if xs.is_none() {
                    self.err(join(path, key), "expected a list of non-negative integers");
                }
                xs
            }
            Some(_) => {
                self.err(join(path, key), "expected a list of non-negative integers");
                None
            }
            None => {
                self.err(join(path, key), "missing required list");
                None
            }
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn parse_model(w: &mut Walker, t: &Table) -> Option<NoiseModel> {
    let p = "model";
    let kind = w.string(t, p, "kind", true);
    let dimension = w.uint(t, p, "dimension", true).and_then(|d| {
        if (1..=3).contains(&d) {
            Some(d as usize)
        } else {
            w.err(join(p, "dimension"), "must be 1, 2 or 3");
            None
        }
    });
    match kind {
        Some("poisson") => {
            w.check_keys(t, p, &["kind", "dimension", "charges", "charge_bound", "profile", "amplitude"]);
            let atoms = match t.get("charges") {
                Some(Value::Array(a)) => {
                    let mut atoms = Vec::new();
                    for (i, v) in a.iter().enumerate() {
                        match v {
                            Value::Array(pair) if pair.len() == 2 => match (as_float(&pair[0]), as_float(&pair[1])) {
                                (Some(s), Some(wt)) => atoms.push((s, wt)),
                                _ => w.err(format!("model.charges[{i}]"), "expected [charge, weight] numbers"),
                            },
                            _ => w.err(format!("model.charges[{i}]"), "expected [charge, weight]"),
                        }
                    }
                    Some(atoms)
                }
                Some(_) => {
                    w.err("model.charges", "expected a list of [charge, weight] pairs");
                    None
                }
                None => {
                    w.err("model.charges", "missing required list");
                    None
                }
            };
            let bound = w.positive(t, p, "charge_bound", false);
            let shape = match w.string(t, p, "profile", false) {
                None => Some(ProfileShape::Bump),
                Some(name) => {
                    let s = ProfileShape::from_name(name);
                    if s.is_none() {
                        w.err("model.profile", format!("unknown profile `{name}` (expected bump or cos2)"));
                    }
                    s
                }
            };
            let amplitude = if t.contains_key("amplitude") {
                w.positive(t, p, "amplitude", true)
            } else {
                Some(1.0)
            };
            let (atoms, shape, amplitude, d) = (atoms?, shape?, amplitude?, dimension?);
            let bound = bound.unwrap_or_else(|| atoms.iter().fold(0.0f64, |b, a| b.max(a.0.abs())));
            let charges = match ChargeMeasure::new(atoms, bound) {
                Ok(c) => Some(c),
                Err(e) => {
                    w.err("model.charges", e.to_string());
                    None
                }
            };
            let profile = IntensityProfile::new(shape, amplitude, d).ok()?;
            Some(NoiseModel::poisson(charges?, profile))
        }
        Some("gaussian") => {
            w.check_keys(t, p, &["kind", "dimension", "covariance", "length"]);
            let family = match w.string(t, p, "covariance", false) {
                None => Some(CovarianceFamily::Heat),
                Some(name) => {
                    let f = CovarianceFamily::from_name(name);
                    if f.is_none() {
                        w.err("model.covariance", format!("unknown covariance `{name}` (expected heat or heat_inverse)"));
                    }
                    f
                }
            };
            let length = if t.contains_key("length") {
                w.positive(t, p, "length", true)
            } else {
                Some(1.0)
            };
            GaussianCovariance::new(family?, length?, dimension?).ok().map(NoiseModel::gaussian)
        }
        Some(other) => {
            w.err("model.kind", format!("unknown model `{other}` (expected poisson or gaussian)"));
            None
        }
        None => None,
    }
}

fn parse_kernels(w: &mut Walker, t: &Table, dimension: Option<usize>) -> Option<VertexKernelSet> {
    let p = "kernels";
    w.check_keys(t, p, &["constant", "cutoff_plateau", "cutoff_shoulder", "vertex"]);
    let constant = w.float(t, p, "constant").unwrap_or(0.0);
    let plateau = w.positive(t, p, "cutoff_plateau", true);
    let shoulder = if t.contains_key("cutoff_shoulder") {
        w.positive(t, p, "cutoff_shoulder", true)
    } else {
        Some(1.0)
    };
    let mut entries = Vec::new();
    match t.get("vertex") {
        Some(Value::Array(a)) => {
            for (i, v) in a.iter().enumerate() {
                let vp = format!("kernels.vertex[{i}]");
                let Value::Table(e) = v else {
                    w.err(vp, "expected a table");
                    continue;
                };
                w.check_keys(e, &vp, &["degree", "coupling", "width"]);
                let degree = w.uint(e, &vp, "degree", true);
                let coupling = w.req_float(e, &vp, "coupling");
                let width = w.positive(e, &vp, "width", true);
                if degree == Some(0) {
                    w.err(join(&vp, "degree"), "degree 0 is set with kernels.constant");
                    continue;
                }
                if let (Some(dg), Some(c), Some(wd)) = (degree, coupling, width) {
                    if entries.iter().any(|&(d, _, _)| d == dg as usize) {
                        w.err(join(&vp, "degree"), format!("degree {dg} is defined twice"));
                    }
                    entries.push((dg as usize, c, wd));
                }
            }
        }
        Some(_) => w.err("kernels.vertex", "expected an array of tables"),
        None => {}
    }
    let cutoff = Cutoff::new(plateau?, shoulder?).ok()?;
    let mut k = VertexKernelSet::new(dimension?, cutoff).with_constant(constant);
    for (d, c, wd) in entries {
        k.insert(d, c, wd).ok()?;
    }
    Some(k)
}

fn parse_field(w: &mut Walker, t: Option<&Table>, dimension: Option<usize>) -> Option<TestField> {
    let d = dimension?;
    let Some(t) = t else {
        return Some(TestField::zero(d));
    };
    w.check_keys(t, "field", &["bump"]);
    let mut bumps = Vec::new();
    match t.get("bump") {
        Some(Value::Array(a)) => {
            for (i, v) in a.iter().enumerate() {
                let bp = format!("field.bump[{i}]");
                let Value::Table(b) = v else {
                    w.err(bp, "expected a table");
                    continue;
                };
                w.check_keys(b, &bp, &["center", "width", "height"]);
                let center = w.float_list(b, &bp, "center", true);
                let width = w.positive(b, &bp, "width", true);
                let height = w.req_float(b, &bp, "height");
                if let Some(c) = &center {
                    if c.len() != d {
                        w.err(join(&bp, "center"), format!("expected {d} coordinates"));
                        continue;
                    }
                }
                if let (Some(center), Some(width), Some(height)) = (center, width, height) {
                    bumps.push(FieldBump { center, width, height });
                }
            }
        }
        Some(_) => w.err("field.bump", "expected an array of tables"),
        None => {}
    }
    TestField::new(d, bumps).ok()
}

fn parse_window(w: &mut Walker, t: &Table, path: &str) -> Option<FlowWindow> {
    let mode = match w.string(t, path, "mode", false) {
        None | Some("incremental") => CumulantMode::Incremental,
        Some("absolute") => CumulantMode::Absolute,
        Some(other) => {
            w.err(join(path, "mode"), format!("unknown mode `{other}` (expected incremental or absolute)"));
            return None;
        }
    };
    let t0 = w.positive(t, path, "t0", true);
    match mode {
        CumulantMode::Absolute => {
            if t.contains_key("t") {
                w.err(join(path, "t"), "absolute mode uses t0 only");
            }
            Some(FlowWindow::absolute(t0?))
        }
        CumulantMode::Incremental => {
            let s = w.req_float(t, path, "t");
            if let Some(s) = s {
                if !(s >= 0.0) {
                    w.err(join(path, "t"), "must be non-negative");
                    return None;
                }
            }
            Some(FlowWindow::incremental(s?, t0?))
        }
    }
}

fn check_degrees(w: &mut Walker, path: &str, degrees: &[usize], kernels: Option<&VertexKernelSet>) {
    let Some(k) = kernels else { return };
    for &p in degrees {
        if p == 0 {
            w.err(path, "degrees must be positive");
        } else if k.kernel(p).is_err() {
            w.err(path, format!("degree {p} has no kernel entry in kernels.vertex"));
        }
    }
}

fn parse_graph(w: &mut Walker, path: &str, s: &str, kernels: Option<&VertexKernelSet>) -> Option<Configuration> {
    match s.parse::<Configuration>() {
        Ok(c) => {
            check_degrees(w, path, c.degrees(), kernels);
            Some(c)
        }
        Err(e) => {
            w.err(path, e.to_string());
            None
        }
    }
}

fn parse_job(w: &mut Walker, jobs: &Table, kernels: Option<&VertexKernelSet>) -> Option<Job> {
    let names: Vec<&String> = jobs.keys().collect();
    if names.len() != 1 {
        w.err("job", format!("exactly one job is required, found {}", names.len()));
        return None;
    }
    let name = names[0].as_str();
    let path = format!("job.{name}");
    let Some(Value::Table(t)) = jobs.get(name) else {
        w.err(path, "expected a table");
        return None;
    };
    match name {
        "enumerate" => {
            w.check_keys(t, &path, &["degrees", "filter"]);
            let degrees = w.uint_list(t, &path, "degrees");
            if let Some(d) = &degrees {
                check_degrees(w, &join(&path, "degrees"), d, kernels);
            }
            let filter = match w.string(t, &path, "filter", false) {
                None | Some("all") => Some(None),
                Some("connected") => Some(Some(GraphFilter::connected())),
                Some("connected_vacuum") => Some(Some(GraphFilter::connected_vacuum())),
                Some(other) => {
                    w.err(join(&path, "filter"), format!("unknown filter `{other}`"));
                    None
                }
            };
            Some(Job::Enumerate {
                degrees: degrees?,
                filter: filter?,
            })
        }
        "evaluate" => {
            w.check_keys(t, &path, &["graphs", "t", "t0", "mode"]);
            let window = parse_window(w, t, &path);
            let graphs = match t.get("graphs") {
                Some(Value::Array(a)) => {
                    let mut out = Vec::new();
                    for (i, g) in a.iter().enumerate() {
                        let gp = format!("{path}.graphs[{i}]");
                        match g {
                            Value::String(s) => {
                                if let Some(c) = parse_graph(w, &gp, s, kernels) {
                                    out.push(c);
                                }
                            }
                            _ => w.err(gp, "expected a graph id string"),
                        }
                    }
                    Some(out)
                }
                _ => {
                    w.err(join(&path, "graphs"), "expected a list of graph id strings");
                    None
                }
            };
            Some(Job::Evaluate {
                graphs: graphs?,
                window: window?,
            })
        }
        "series" => {
            w.check_keys(t, &path, &["kind", "t", "t0", "mode"]);
            let kind = match w.string(t, &path, "kind", true) {
                Some("partition") => Some(SeriesKind::Partition),
                Some("effective") => Some(SeriesKind::Effective),
                Some("correlation") => Some(SeriesKind::Correlation),
                Some("renormalized") => Some(SeriesKind::Renormalized),
                Some(other) => {
                    w.err(join(&path, "kind"), format!("unknown series `{other}`"));
                    None
                }
                None => None,
            };
            let window = match kind {
                Some(SeriesKind::Correlation) | Some(SeriesKind::Renormalized) => {
                    if t.contains_key("t") || t.contains_key("mode") {
                        w.err(&path, "correlation series take t0 only (absolute mode)");
                    }
                    w.positive(t, &path, "t0", true).map(FlowWindow::absolute)
                }
                _ => parse_window(w, t, &path),
            };
            Some(Job::Series {
                kind: kind?,
                window: window?,
            })
        }
        "counterterm" => {
            w.check_keys(t, &path, &["t0"]);
            Some(Job::Counterterm {
                t0: w.positive(t, &path, "t0", true)?,
            })
        }
        "scan" => {
            w.check_keys(t, &path, &["t0", "quantity"]);
            let t0 = w.float_list(t, &path, "t0", true);
            if let Some(v) = &t0 {
                if v.len() < 4 {
                    w.err(join(&path, "t0"), "a scan needs at least four values");
                }
                if v.windows(2).any(|p| !(p[0] < p[1])) || v.iter().any(|&x| !(x > 0.0)) {
                    w.err(join(&path, "t0"), "values must be positive and strictly increasing");
                }
            }
            let quantity = match w.string(t, &path, "quantity", true) {
                Some("vacuum") => Some(ScanQuantity::Vacuum),
                Some(id) => parse_graph(w, &join(&path, "quantity"), id, kernels).map(ScanQuantity::Graph),
                None => None,
            };
            Some(Job::Scan {
                t0: t0?,
                quantity: quantity?,
            })
        }
        "oracle" => {
            let check = w.string(t, &path, "check", true);
            let job = match check {
                Some("mc_correlation") | Some("linear_closed_form") => {
                    w.check_keys(t, &path, &["check", "t", "samples"]);
                    let s = w.positive(t, &path, "t", true);
                    let samples = w.uint(t, &path, "samples", true);
                    if samples == Some(0) {
                        w.err(join(&path, "samples"), "must be positive");
                    }
                    let (s, samples) = (s?, samples?);
                    if check == Some("mc_correlation") {
                        OracleJob::McCorrelation { t: s, samples }
                    } else {
                        OracleJob::LinearClosedForm { t: s, samples }
                    }
                }
                Some("count_chi_square") => {
                    w.check_keys(t, &path, &["check", "t", "draws"]);
                    let s = w.positive(t, &path, "t", true);
                    let draws = w.uint(t, &path, "draws", true);
                    OracleJob::CountChiSquare { t: s?, draws: draws? }
                }
                Some("partition_transform") => {
                    w.check_keys(t, &path, &["check", "n_max"]);
                    let n = w.uint(t, &path, "n_max", true)?;
                    if !(1..=10).contains(&n) {
                        w.err(join(&path, "n_max"), "must be between 1 and 10");
                    }
                    OracleJob::PartitionTransform { n_max: n as usize }
                }
                Some("exp_series") => {
                    w.check_keys(t, &path, &["check", "t", "t0", "mode"]);
                    OracleJob::ExpSeries {
                        window: parse_window(w, t, &path)?,
                    }
                }
                Some(other) => {
                    w.err(join(&path, "check"), format!("unknown oracle check `{other}`"));
                    return None;
                }
                None => return None,
            };
            Some(Job::Oracle(job))
        }
        other => {
            w.err(format!("job.{other}"), "unknown job (expected enumerate, evaluate, series, counterterm, scan or oracle)");
            None
        }
    }
}

fn parse_numerics(w: &mut Walker, t: Option<&Table>) -> Option<Numerics> {
    let mut spec = QuadratureSpec::default();
    let Some(t) = t else {
        return Some(Numerics {
            spec,
            max_order: 1,
            seed: None,
        });
    };
    let p = "numerics";
    w.check_keys(t, p, &["scheme", "tol", "rel_tol", "mc_rel_tol", "max_evaluations", "max_order", "seed"]);
    if let Some(name) = w.string(t, p, "scheme", false) {
        match Scheme::from_name(name) {
            Some(s) => spec.scheme = s,
            None => w.err("numerics.scheme", format!("unknown scheme `{name}` (expected auto, tensor or monte_carlo)")),
        }
    }
    if let Some(x) = w.positive(t, p, "tol", false) {
        spec.abs_tol = x;
    }
    if let Some(x) = w.float(t, p, "rel_tol") {
        if x >= 0.0 {
            spec.rel_tol = x;
        } else {
            w.err("numerics.rel_tol", "must be non-negative");
        }
    }
    if let Some(x) = w.positive(t, p, "mc_rel_tol", false) {
        spec.mc_rel_tol = x;
    }
    if let Some(x) = w.uint(t, p, "max_evaluations", false) {
        spec.max_evaluations = x.max(1);
    }
    let max_order = w.uint(t, p, "max_order", false).unwrap_or(1) as usize;
    if max_order > 6 {
        w.err("numerics.max_order", "orders above 6 exceed the enumeration limits");
    }
    let seed = w.uint(t, p, "seed", false);
    if let Some(s) = seed {
        spec.seed = s;
    }
    Some(Numerics { spec, max_order, seed })
}

fn parse_output(w: &mut Walker, t: Option<&Table>, base: &Path) -> OutputConfig {
    let mut out = OutputConfig {
        directory: base.join("out"),
        plotdata: true,
    };
    let Some(t) = t else { return out };
    w.check_keys(t, "output", &["directory", "formats"]);
    if let Some(d) = w.string(t, "output", "directory", false) {
        out.directory = base.join(d);
    }
    match t.get("formats") {
        Some(Value::Array(a)) => {
            let mut plot = false;
            for (i, v) in a.iter().enumerate() {
                match v.as_str() {
                    Some("csv") => {}
                    Some("plotdata") => plot = true,
                    _ => w.err(format!("output.formats[{i}]"), "expected `csv` or `plotdata`"),
                }
            }
            out.plotdata = plot;
        }
        Some(_) => w.err("output.formats", "expected a list of strings"),
        None => {}
    }
    out
}

/// Parses and validates a configuration. Relative output directories are
/// resolved against `base`.
pub fn parse_config_at(text: &str, base: &Path) -> Result<RunConfig, Vec<ConfigError>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        vec![ConfigError {
            path: "<document>".into(),
            message: e.to_string().trim().to_string(),
        }]
    })?;
    let mut w = Walker { errors: Vec::new() };
    w.check_keys(&root, "", &["model", "kernels", "field", "job", "numerics", "output"]);
    let model = w.table(&root, "", "model", true).and_then(|t| parse_model(&mut w, t));
    let dimension = model.as_ref().map(NoiseModel::dimension).or_else(|| {
        root.get("model")
            .and_then(|m| m.get("dimension"))
            .and_then(Value::as_integer)
            .map(|d| d as usize)
    });
    let kernels = w
        .table(&root, "", "kernels", true)
        .and_then(|t| parse_kernels(&mut w, t, dimension));
    let field_table = w.table(&root, "", "field", false);
    let field = parse_field(&mut w, field_table, dimension);
    let job = w
        .table(&root, "", "job", true)
        .and_then(|t| parse_job(&mut w, t, kernels.as_ref()));
    let numerics_table = w.table(&root, "", "numerics", false);
    let numerics = parse_numerics(&mut w, numerics_table);
    let output_table = w.table(&root, "", "output", false);
    let output = parse_output(&mut w, output_table, base);

    if let (Some(n), Some(j), Some(d)) = (&numerics, &job, dimension) {
        let mc = n.spec.scheme == Scheme::MonteCarlo || (n.spec.scheme == Scheme::Auto && d >= 2);
        let integrates = !matches!(j, Job::Enumerate { .. } | Job::Oracle(OracleJob::PartitionTransform { .. }));
        let stochastic = matches!(j, Job::Oracle(o) if o.is_stochastic());
        if n.seed.is_none() && ((mc && integrates) || stochastic) {
            w.err("numerics.seed", "a seed is required for stochastic schemes and sampling oracles");
        }
    }
    if let (Some(m), Some(j)) = (&model, &job) {
        let needs_poisson = matches!(
            j,
            Job::Oracle(OracleJob::McCorrelation { .. })
                | Job::Oracle(OracleJob::CountChiSquare { .. })
                | Job::Oracle(OracleJob::LinearClosedForm { .. })
        );
        if needs_poisson && !m.is_poisson() {
            w.err("model.kind", "this oracle check needs the poisson model");
        }
    }
    if let (Some(k), Some(Job::Oracle(OracleJob::LinearClosedForm { .. }))) = (&kernels, &job) {
        if k.active_degrees().iter().any(|&p| p != 1) {
            w.err("kernels.vertex", "the linear closed form allows only a degree-1 kernel");
        }
    }

    if !w.errors.is_empty() {
        return Err(w.errors);
    }
    match (model, kernels, field, job, numerics) {
        (Some(model), Some(kernels), Some(field), Some(job), Some(numerics)) => Ok(RunConfig {
            model,
            kernels,
            field,
            job,
            numerics,
            output,
        }),
        _ => Err(vec![ConfigError {
            path: "<document>".into(),
            message: "configuration is incomplete".into(),
        }]),
    }
}

/// [`parse_config_at`] with outputs relative to the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    parse_config_at(text, Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
kind = "gaussian"
dimension = 1

[kernels]
cutoff_plateau = 5.0

[[kernels.vertex]]
degree = 2
coupling = 0.1
width = 0.5

[job.series]
kind = "effective"
t = 0.5
t0 = 1.0

[numerics]
max_order = 1
"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert!(matches!(c.job, Job::Series { kind: SeriesKind::Effective, .. }));
        assert_eq!(c.numerics.max_order, 1);
        assert!(c.field.is_zero());
    }

    #[test]
    fn missing_kernel_degree_is_named() {
        let text = MINIMAL.replace(
            "[job.series]\nkind = \"effective\"\nt = 0.5\nt0 = 1.0",
            "[job.enumerate]\ndegrees = [2, 3]",
        );
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "job.enumerate.degrees" && e.message.contains("degree 3")), "{errs:?}");
    }

    #[test]
    fn two_jobs_are_rejected() {
        let text = format!("{MINIMAL}\n[job.counterterm]\nt0 = 1.0\n");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "job" && e.message.contains("exactly one job")), "{errs:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = r#"
[model]
kind = "poisson"
dimension = 1
charges = [[1.0, 0.5], [-1.0, 0.25]]
colour = "red"

[kernels]
cutoff_plateau = -1.0

[job.scan]
t0 = [1.0, 2.0]
quantity = "vacuum"
"#;
        let errs = parse_config(text).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        for p in ["model.colour", "model.charges", "kernels.cutoff_plateau", "job.scan.t0"] {
            assert!(paths.contains(&p), "{p} not in {paths:?}");
        }
    }

    #[test]
    fn seed_is_required_for_monte_carlo() {
        let text = MINIMAL.replace("max_order = 1", "max_order = 1\nscheme = \"monte_carlo\"");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "numerics.seed"));
    }
}
