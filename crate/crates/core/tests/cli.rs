use std::fs;
use std::path::{Path, PathBuf};

use levyflow::cli::{self, parse_config_at};

fn fixtures(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(kind)
}

fn run(config: &Path, out: &Path) -> i32 {
    cli::main_with_args([
        "levyflow".as_ref(),
        "run".as_ref(),
        config.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
    ])
}

/// Data rows of a CSV: everything after the comments and the column line.
fn data_rows(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn toml_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn every_invalid_fixture_names_its_path() {
    let files = toml_files(&fixtures("invalid"));
    assert!(files.len() >= 10);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        let expected = text
            .lines()
            .find_map(|l| l.strip_prefix("# expect: "))
            .unwrap_or_else(|| panic!("{} has no expectation line", f.display()))
            .trim()
            .to_string();
        let errors = parse_config_at(&text, Path::new(".")).expect_err(&f.display().to_string());
        assert!(
            errors.iter().any(|e| e.path == expected),
            "{}: expected an error at {expected}, got {errors:?}",
            f.display()
        );
    }
}

#[test]
fn every_valid_fixture_parses() {
    for f in toml_files(&fixtures("valid")) {
        let text = fs::read_to_string(&f).unwrap();
        if let Err(e) = parse_config_at(&text, Path::new(".")) {
            panic!("{}: {e:?}", f.display());
        }
    }
}

#[test]
fn invalid_config_exits_with_two() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&fixtures("invalid").join("missing_kernel.toml"), out.path());
    assert_eq!(code, cli::EXIT_INVALID);
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn missing_file_exits_with_io_code() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(Path::new("/nonexistent/config.toml"), out.path()), cli::EXIT_IO);
}

#[test]
fn enumerate_quadratic_vertex_gives_five_rows() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&fixtures("valid").join("enumerate_quadratic.toml"), out.path()), 0);
    let csv = fs::read_to_string(out.path().join("configurations.csv")).unwrap();
    assert!(csv.starts_with("# job: enumerate\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r.contains("1;2;K=;I=[(1,1)(1,2)]")));
}

#[test]
fn zero_coupling_series_is_one_then_zeros() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&fixtures("valid").join("series_zero_coupling.toml"), out.path()), 0);
    let csv = fs::read_to_string(out.path().join("series.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 4);
    let values: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(values, ["1", "0", "0", "0"]);
    let plot = fs::read_to_string(out.path().join("series.dat")).unwrap();
    assert!(plot.starts_with("# x y err\n"));
    assert_eq!(plot.lines().count(), 5);
}

#[test]
fn scan_has_four_rows_and_a_fit() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&fixtures("valid").join("scan_vacuum.toml"), out.path()), 0);
    let rows = data_rows(&fs::read_to_string(out.path().join("scan.csv")).unwrap());
    assert_eq!(rows.len(), 4);
    let t0: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(t0.windows(2).all(|w| w[0] < w[1]));
    let fit = fs::read_to_string(out.path().join("scan_fit.txt")).unwrap();
    assert!(fit.contains("fit_exponent:"), "{fit}");
    let plot = fs::read_to_string(out.path().join("scan.dat")).unwrap();
    assert_eq!(plot.lines().count(), 5);
}

#[test]
fn manifest_lists_digests_and_reruns_are_identical() {
    for name in ["enumerate_quadratic.toml", "effective_gaussian.toml", "oracle_counts.toml"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let config = fixtures("valid").join(name);
        assert_eq!(run(&config, a.path()), 0, "{name}");
        assert_eq!(run(&config, b.path()), 0, "{name}");
        let ma = fs::read_to_string(a.path().join("manifest.txt")).unwrap();
        let mb = fs::read_to_string(b.path().join("manifest.txt")).unwrap();
        assert_eq!(ma, mb, "{name}");
        let digests: Vec<&str> = ma.lines().filter(|l| l.contains("  ")).collect();
        assert!(!digests.is_empty());
        for line in digests {
            let (digest, file) = line.split_once("  ").unwrap();
            assert_eq!(digest.len(), 64);
            assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap());
        }
        // no temporary files left behind
        assert!(fs::read_dir(a.path())
            .unwrap()
            .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
    }
}

#[test]
fn dry_run_writes_nothing() {
    let out = tempfile::tempdir().unwrap();
    let config = fixtures("valid").join("scan_vacuum.toml");
    let code = cli::main_with_args([
        "levyflow".as_ref(),
        "run".as_ref(),
        config.as_os_str(),
        "--out".as_ref(),
        out.path().as_os_str(),
        "--dry-run".as_ref(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tight.toml");
    let text = fs::read_to_string(fixtures("valid").join("effective_gaussian.toml"))
        .unwrap()
        .replace("tol = 1e-10", "tol = 1e-14\nmax_evaluations = 50");
    fs::write(&config, text).unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&config, &out), cli::EXIT_NUMERICAL);
    assert!(!out.join("series.csv").exists());
}

#[test]
fn unknown_subcommand_is_rejected() {
    assert_eq!(cli::main_with_args(["levyflow", "frobnicate"]), cli::EXIT_INVALID);
}
