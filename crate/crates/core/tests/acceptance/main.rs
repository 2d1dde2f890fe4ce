//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Criteria can be selected by number:
//! `cargo test --test acceptance -- 4 7`.

mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use levyflow::cli::{compute, parse_config_at, RunConfig};
use levyflow::combinatorics::bell_number;
use levyflow::evaluator::SchemeUsed;
use levyflow::flow::ScanQuantity;
use levyflow::graphs::enumerate_configurations;
use levyflow::noise::{
    check_conditional_positivity, ChargeMeasure, IntensityProfile, ProfileShape, RequiredSign,
};
use levyflow::oracle::{exp_series_check, linear_closed_form, mc_correlation, partition_transform_check, McOptions};
use levyflow::{
    evaluate_configuration, Cutoff, FlowProblem, FlowWindow, NoiseModel, QuadratureSpec, TestField,
    VertexKernelSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toml::{Table, Value};

use oracles::{MollifiedGraphs, PoissonSetup};

type Outcome = Result<(bool, String), String>;

struct Manifest {
    root: PathBuf,
    table: Table,
}

impl Manifest {
    fn load() -> Self {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/acceptance");
        let text = std::fs::read_to_string(root.join("manifest.toml")).expect("acceptance manifest");
        Manifest {
            root,
            table: text.parse().expect("manifest is valid TOML"),
        }
    }

    fn section(&self, name: &str) -> &Table {
        self.table[name].as_table().expect("manifest section")
    }

    fn f64(&self, section: &str, key: &str) -> f64 {
        match &self.section(section)[key] {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            v => panic!("{section}.{key}: not a number: {v}"),
        }
    }

    fn int(&self, section: &str, key: &str) -> u64 {
        self.section(section)[key].as_integer().expect("integer") as u64
    }

    fn floats(&self, section: &str, key: &str) -> Vec<f64> {
        self.section(section)[key]
            .as_array()
            .expect("array")
            .iter()
            .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).expect("number"))
            .collect()
    }

    fn config_path(&self, name: &str) -> PathBuf {
        self.root.join("configs").join(name)
    }

    fn config(&self, name: &str) -> RunConfig {
        let path = self.config_path(name);
        let text = std::fs::read_to_string(&path).expect("acceptance config");
        parse_config_at(&text, path.parent().unwrap()).unwrap_or_else(|e| panic!("{name}: {e:?}"))
    }

    fn problem(&self, name: &str) -> (FlowProblem, RunConfig) {
        let cfg = self.config(name);
        let p = FlowProblem::new(cfg.kernels.clone(), cfg.model.clone(), cfg.field.clone(), cfg.numerics.spec)
            .expect("valid problem");
        (p, cfg)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn moment_cumulant(m: &Manifest) -> Outcome {
    let s = "moment_cumulant";
    let r = partition_transform_check(m.int(s, "n_max") as usize, m.int(s, "seed")).map_err(err)?;
    let tol = m.f64(s, "roundtrip_tol");
    Ok((
        r.mismatches == 0 && r.sequences == 100 && r.max_roundtrip_error <= tol,
        format!(
            "{} sequences, {} exact comparisons, {} mismatches, round-trip error {:.1e} (tol {tol:.0e})",
            r.sequences, r.comparisons, r.mismatches, r.max_roundtrip_error
        ),
    ))
}

/// Ordered tuples of positive degrees with the given total.
fn compositions(total: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in compositions(total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn configuration_count(m: &Manifest) -> Outcome {
    let max_legs = m.int("configuration_count", "max_legs") as usize;
    // Bell numbers from the recurrence B(n+1) = sum_k C(n,k) B(k)
    let mut bell = vec![1u64];
    for n in 0..=max_legs {
        bell.push((0..=n).map(|k| binomial(n, k) * bell[k]).sum());
    }
    let mut tuples = 0;
    let mut failures = Vec::new();
    let mut named = BTreeMap::new();
    for total in 0..=max_legs {
        let expected: u64 = (0..=total).map(|k| binomial(total, k) * bell[total - k]).sum();
        for degrees in compositions(total) {
            let n = enumerate_configurations(&degrees, None).map_err(err)?.count() as u64;
            tuples += 1;
            if n != expected {
                failures.push(format!("{degrees:?}: {n} != {expected}"));
            }
            if degrees == [2] || degrees == [2, 2] {
                named.insert(format!("{degrees:?}"), n);
            }
        }
    }
    let lib_bell_ok = (0..=max_legs).all(|n| bell_number(n).ok() == Some(bell[n]));
    let pass = failures.is_empty() && named["[2]"] == 5 && named["[2, 2]"] == 52 && lib_bell_ok;
    Ok((
        pass,
        format!(
            "{tuples} degree tuples, counts (2)={} (2,2)={}, {} mismatches{}",
            named["[2]"],
            named["[2, 2]"],
            failures.len(),
            failures.first().map(|f| format!(" e.g. {f}")).unwrap_or_default()
        ),
    ))
}

fn linked_cluster(m: &Manifest) -> Outcome {
    let s = "linked_cluster";
    let (p, cfg) = m.problem(m.section(s)["config"].as_str().unwrap());
    let order = m.int(s, "max_order") as usize;
    let levyflow::cli::Job::Oracle(levyflow::cli::config::OracleJob::ExpSeries { window }) = cfg.job else {
        return Err("benchmark config must hold an exp_series job".into());
    };
    let connected = p.effective_action_series(window, order).map_err(err)?;
    let full = p.partition_function_series(window, order).map_err(err)?;
    let r = exp_series_check(&connected, &full, order).map_err(err)?;
    let tol = m.f64(s, "rel_tol");
    let rows: Vec<String> = r
        .rows
        .iter()
        .skip(1)
        .map(|row| format!("m={}: rel {:.1e} budget {:.1e}", row.order, row.rel_deviation, row.budget))
        .collect();
    let pass = r.rows.iter().all(|row| row.rel_deviation <= tol);
    Ok((pass, format!("{} (tol {tol:.0e})", rows.join(", "))))
}

fn diagonal_collapse(m: &Manifest) -> Outcome {
    let s = "diagonal_collapse";
    let widths = m.floats(s, "widths");
    let tol = m.f64(s, "tol");
    let setup = PoissonSetup {
        charges: vec![(1.0, 0.6), (-0.5, 0.4)],
        amplitude: 0.5,
        t: 0.5,
        t0: 1.0,
        kernels: [(0.7, 0.5), (1.0, 0.5), (0.8, 0.7)],
        field: (0.2, 1.0, 1.5),
    };
    let model = NoiseModel::poisson(
        ChargeMeasure::new(setup.charges.clone(), 1.0).map_err(err)?,
        IntensityProfile::new(ProfileShape::Bump, setup.amplitude, 1).map_err(err)?,
    );
    // plateau 3 keeps the cutoff at 1 on the field and the weight supports
    let mut kernels = VertexKernelSet::new(1, Cutoff::new(3.0, 1.0).map_err(err)?);
    for (i, &(g, w)) in setup.kernels.iter().enumerate() {
        kernels.insert(i + 1, g, w).map_err(err)?;
    }
    let field = TestField::bump_1d(setup.field.0, setup.field.1, setup.field.2);
    let window = FlowWindow::incremental(setup.t, setup.t0);
    let spec = QuadratureSpec::tensor(m.f64(s, "evaluator_tol"), 0.0);
    let mut oracle = MollifiedGraphs::new(setup);
    let mut tuples: Vec<Vec<usize>> = (1..=3).map(|p| vec![p]).collect();
    for a in 1..=3 {
        for b in 1..=3 {
            tuples.push(vec![a, b]);
        }
    }
    let (mut n, mut zeros, mut worst, mut worst_graph) = (0, 0, 0.0f64, String::new());
    for degrees in tuples {
        for c in enumerate_configurations(&degrees, None).map_err(err)? {
            let v = evaluate_configuration(&c, &kernels, &model, &field, window, &spec).map_err(err)?;
            let o = oracle.extrapolated(&c, &widths);
            let dev = (v.value - o).abs() / o.abs().max(1.0);
            if o == 0.0 {
                zeros += 1;
            }
            if dev > worst {
                worst = dev;
                worst_graph = c.to_string();
            }
            n += 1;
        }
    }
    Ok((
        worst <= tol,
        format!("{n} configurations ({zeros} exactly zero), max deviation {worst:.1e} at {worst_graph} (tol {tol:.0e})"),
    ))
}

fn gaussian_anchor(m: &Manifest) -> Outcome {
    let s = "gaussian_anchor";
    let (p, cfg) = m.problem(m.section(s)["config"].as_str().unwrap());
    let levyflow::cli::Job::Series { window, .. } = cfg.job else {
        return Err("anchor config must hold a series job".into());
    };
    let tol = m.f64(s, "tol");
    let v = p.effective_action_series(window, 1).map_err(err)?.value(1);
    let k = cfg.kernels.kernel(2).map_err(err)?;
    let (cutoff, length) = (cfg.kernels.cutoff(), 1.0);
    let reference = oracles::gaussian_first_order(
        k.coupling,
        k.width,
        cutoff.plateau,
        cutoff.shoulder,
        length,
        window.t,
        window.t0,
        1e-13,
    );
    let dev = (v - reference).abs();
    // higher Gaussian cumulants vanish: every block of size != 2 gives 0
    let field = TestField::bump_1d(0.3, 1.0, 1.0);
    let (mut checked, mut nonzero) = (0, 0);
    for degrees in [vec![1], vec![2], vec![3], vec![1, 3], vec![2, 3], vec![3, 3], vec![1, 2], vec![2, 2]] {
        let mut k = VertexKernelSet::new(1, *cfg.kernels.cutoff());
        for &d in &degrees {
            k.insert(d, 1.0, 0.5).map_err(err)?;
        }
        for c in enumerate_configurations(&degrees, None).map_err(err)? {
            if c.blocks().block_sizes().all(|n| n == 2) {
                continue;
            }
            let r = evaluate_configuration(&c, &k, &cfg.model, &field, window, &p.spec).map_err(err)?;
            checked += 1;
            if r.value != 0.0 || r.scheme != SchemeUsed::Exact {
                nonzero += 1;
            }
        }
    }
    Ok((
        dev <= tol && nonzero == 0,
        format!(
            "order-1 value {v:.12e} vs reference {reference:.12e}, deviation {dev:.1e} (tol {tol:.0e}); {checked} non-pair graphs, {nonzero} nonzero"
        ),
    ))
}

fn renormalization(m: &Manifest) -> Outcome {
    let s = "renormalization";
    let (p, cfg) = m.problem(m.section(s)["config"].as_str().unwrap());
    let levyflow::cli::Job::Series { window, .. } = cfg.job else {
        return Err("renormalization config must hold a series job".into());
    };
    let order = cfg.numerics.max_order;
    let (res_tol, dual_tol) = (m.f64(s, "residual_tol"), m.f64(s, "dual_tol"));
    let at_zero = p
        .with_field(TestField::zero(1))
        .renormalized_correlation(window.t0, order)
        .map_err(err)?;
    let residual = (0..=order)
        .map(|k| (at_zero.subtracted.value(k) - if k == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let r = p.renormalized_correlation(window.t0, order).map_err(err)?;
    let dual = (0..=order)
        .map(|k| (r.subtracted.value(k) - r.dropped.value(k)).abs())
        .fold(0.0, f64::max);
    Ok((
        residual < res_tol && dual < dual_tol,
        format!(
            "M={order}: max residual of rho(0) {residual:.1e} (tol {res_tol:.0e}), dual-path deviation {dual:.1e} (tol {dual_tol:.0e})"
        ),
    ))
}

fn thermodynamic_limit(m: &Manifest) -> Outcome {
    let s = "thermodynamic_limit";
    let names: Vec<String> = m.section(s)["configs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in &names {
        let (p, cfg) = m.problem(name);
        let levyflow::cli::Job::Scan { t0, quantity } = &cfg.job else {
            return Err(format!("{name} must hold a scan job"));
        };
        let r = p.td_limit_scan(t0, quantity).map_err(err)?;
        match quantity {
            ScanQuantity::Vacuum => {
                let d = cfg.model.dimension();
                let tol = if d == 1 {
                    m.f64(s, "exponent_tol_d1")
                } else {
                    m.f64(s, "exponent_tol_d2")
                };
                let Some(fit) = r.fit else {
                    pass = false;
                    parts.push(format!("d={d}: no fit"));
                    continue;
                };
                let ok = (fit.exponent - d as f64).abs() <= tol;
                pass &= ok;
                parts.push(format!(
                    "d={d} vacuum exponent {:.4} (+-{:.1e}, target {d} +- {tol})",
                    fit.exponent, fit.width
                ));
            }
            ScanQuantity::Graph(c) => {
                pass &= r.cauchy_decreasing;
                let diffs: Vec<String> = r.differences.iter().map(|d| format!("{d:.2e}")).collect();
                parts.push(format!("{c} differences [{}] decreasing: {}", diffs.join(", "), r.cauchy_decreasing));
            }
        }
    }
    Ok((pass, parts.join("; ")))
}

fn monte_carlo(m: &Manifest) -> Outcome {
    let s = "monte_carlo";
    let (p, cfg) = m.problem(m.section(s)["config"].as_str().unwrap());
    let levyflow::cli::Job::Oracle(levyflow::cli::config::OracleJob::McCorrelation { t, samples }) = cfg.job else {
        return Err("monte carlo config must hold an mc_correlation job".into());
    };
    let seed = cfg.numerics.seed.ok_or("seed missing")?;
    let order = m.int(s, "max_order") as usize;
    let k_se = m.f64(s, "std_errors");
    let base = cfg.kernels.coupling(2);
    let mut cs = Vec::new();
    let mut parts = Vec::new();
    for g in m.floats(s, "couplings") {
        let kernels = cfg.kernels.with_scaled_coupling(2, g / base);
        let est = mc_correlation(&cfg.model, &kernels, &cfg.field, t, &McOptions::new(samples, seed)).map_err(err)?;
        let pert = p.with_kernels(kernels).correlation_functional(t, order).map_err(err)?.total().0;
        let diff = (est.mean - pert).abs();
        let c = diff / g.powi(3);
        cs.push(c);
        parts.push(format!(
            "g={g}: mc {:.8} +- {:.1e}, series {pert:.8}, C={c:.3}",
            est.mean, est.std_error
        ));
    }
    let ratio = cs[0] / cs[1];
    let max_ratio = m.f64(s, "c_ratio_max");
    let stable = ratio.is_finite() && ratio <= max_ratio && ratio >= 1.0 / max_ratio;

    let (_, lin) = m.problem(m.section(s)["linear_config"].as_str().unwrap());
    let levyflow::cli::Job::Oracle(levyflow::cli::config::OracleJob::LinearClosedForm { t, samples }) = lin.job else {
        return Err("linear config must hold a linear_closed_form job".into());
    };
    let lseed = lin.numerics.seed.ok_or("seed missing")?;
    let est = mc_correlation(&lin.model, &lin.kernels, &lin.field, t, &McOptions::new(samples, lseed)).map_err(err)?;
    let exact = linear_closed_form(&lin.model, &lin.kernels, &lin.field, t, &lin.numerics.spec).map_err(err)?;
    let z = (est.mean - exact).abs() / est.std_error;
    parts.push(format!("C ratio {ratio:.3}"));
    parts.push(format!("linear closed form {exact:.8} vs mc {:.8} ({z:.2} std errors)", est.mean));
    Ok((stable && z <= k_se, parts.join("; ")))
}

fn random_field(rng: &mut ChaCha8Rng) -> TestField {
    let n = rng.random_range(1..=2);
    let mut f = TestField::zero(1);
    for _ in 0..n {
        let b = TestField::bump_1d(
            rng.random_range(-0.8..0.8),
            rng.random_range(0.3..1.0),
            rng.random_range(-1.5..1.5),
        );
        f = f.plus(&b).expect("same dimension");
    }
    f
}

fn conditional_positivity(m: &Manifest) -> Outcome {
    let s = "conditional_positivity";
    let model = NoiseModel::poisson(
        ChargeMeasure::new(vec![(1.0, 0.6), (-0.5, 0.4)], 1.0).map_err(err)?,
        IntensityProfile::new(ProfileShape::Bump, 1.0, 1).map_err(err)?,
    );
    let spec = QuadratureSpec::tensor(1e-12, 0.0);
    let (below, above, t0) = (m.f64(s, "t_below"), m.f64(s, "t_above"), m.f64(s, "t0"));
    let n_fields = m.int(s, "fields") as usize;
    let seeds = m.floats(s, "seeds");
    let (mut clean, mut flipped) = (0, 0);
    for &seed in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let fs: Vec<TestField> = (0..n_fields).map(|_| random_field(&mut rng)).collect();
        let lo = check_conditional_positivity(&model, &fs, FlowWindow::incremental(below, t0), &spec).map_err(err)?;
        let hi = check_conditional_positivity(&model, &fs, FlowWindow::incremental(above, t0), &spec).map_err(err)?;
        if !lo.violation_found && lo.required == RequiredSign::NonPositive {
            clean += 1;
        }
        let min_lo = lo.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max_hi = hi.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi.required == RequiredSign::NonNegative && !hi.violation_found && min_lo < -lo.slack && max_hi > hi.slack {
            flipped += 1;
        }
    }
    let n = seeds.len();
    Ok((
        clean == n && flipped == n,
        format!("{clean}/{n} tests with t<T0 found no violation; sign flipped for t>T0 in {flipped}/{n}"),
    ))
}

fn determinism(m: &Manifest) -> Outcome {
    let runs = m.int("determinism", "runs");
    let mut names: Vec<PathBuf> = std::fs::read_dir(m.root.join("configs"))
        .map_err(err)?
        .map(|e| e.expect("directory entry").path())
        .collect();
    names.sort();
    let mut mismatched = Vec::new();
    let mut files = 0;
    for path in &names {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let cfg = m.config(&name);
        let digests: Vec<Vec<(String, String)>> = (0..runs)
            .map(|_| {
                compute(&cfg).map(|r| r.files.iter().map(|f| (f.name.clone(), f.sha256())).collect())
            })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        files += digests[0].len();
        if digests.iter().any(|d| d != &digests[0]) {
            mismatched.push(name);
        }
    }
    Ok((
        mismatched.is_empty(),
        format!(
            "{} configs, {files} output files, {runs} runs each, {} with differing digests{}",
            names.len(),
            mismatched.len(),
            if mismatched.is_empty() { String::new() } else { format!(": {}", mismatched.join(", ")) }
        ),
    ))
}

type Criterion = (usize, &'static str, &'static str, fn(&Manifest) -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "moment-cumulant identity", "moment_cumulant", moment_cumulant),
    (2, "configuration counting", "configuration_count", configuration_count),
    (3, "linked-cluster identity", "linked_cluster", linked_cluster),
    (4, "diagonal collapse", "diagonal_collapse", diagonal_collapse),
    (5, "gaussian anchor", "gaussian_anchor", gaussian_anchor),
    (6, "renormalization", "renormalization", renormalization),
    (7, "thermodynamic limit", "thermodynamic_limit", thermodynamic_limit),
    (8, "monte carlo cross-check", "monte_carlo", monte_carlo),
    (9, "conditional positivity", "conditional_positivity", conditional_positivity),
    (10, "determinism", "determinism", determinism),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let manifest = Manifest::load();
    let mut failed = 0;
    for (n, title, section, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let budget = manifest.f64(section, "budget_s");
        let start = Instant::now();
        let outcome = run(&manifest);
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && secs <= budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {title}: {detail} [{secs:.1}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
