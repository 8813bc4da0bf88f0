//! Shared helpers for the CLI integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub const TIMESTAMP: &str = "2015-06-01T00:00:00Z";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub struct Run {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Run {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let mut argv = vec!["ecm-energy"];
    argv.extend_from_slice(args);
    let code = ecm_energy_cli::run(argv, &mut stdout, &mut stderr);
    Run {
        code,
        stdout,
        stderr: String::from_utf8(stderr).expect("utf-8 diagnostics"),
    }
}

pub fn ok(args: &[&str]) -> Vec<u8> {
    let r = cli(args);
    assert_eq!(r.code, 0, "ecm-energy {}: {}", args.join(" "), r.stderr);
    r.stdout
}

/// Fits the fixture of `chip` into `dir/model.json` and returns the fit summary.
pub fn fit_fixture(chip: &str, dir: &Path) -> (PathBuf, Vec<u8>) {
    let f = fixtures().join(chip);
    let model = dir.join(format!("{chip}.json"));
    let summary = ok(&[
        "fit",
        "--machine",
        f.join("machine.json").to_str().unwrap(),
        "--kernels",
        f.join("kernels.json").to_str().unwrap(),
        "--measurements",
        f.join("measurements.csv").to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--timestamp",
        TIMESTAMP,
    ]);
    (model, summary)
}

/// `(output file, arguments)` pairs run against one fitted model.
type Commands<'a> = &'a [(&'a str, &'a [&'a str])];

/// fit, predict, zplot and optimize on both fixtures; `(relative path, bytes)`.
pub fn golden_outputs() -> Vec<(String, Vec<u8>)> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut out = Vec::new();
    let chips: [(&str, Commands); 2] = [
        (
            "snb",
            &[
                ("predict_dgemm.csv", &["predict", "--kernel", "dgemm", "--n", "8", "--f-core", "2.7"]),
                ("predict_stream.csv", &["predict", "--kernel", "stream", "--n", "4", "--f-core", "2.0"]),
                ("zplot_dgemm_fcore.csv", &["zplot", "--kernel", "dgemm", "--n", "8", "--f-core", "1.2:2.7:0.1"]),
                ("zplot_dgemm_n.csv", &["zplot", "--kernel", "dgemm", "--n", "1:8", "--f-core", "2.7"]),
                ("zplot_stream_n.csv", &["zplot", "--kernel", "stream", "--n", "1:8", "--f-core", "2.7"]),
                ("zplot_stream_fcore.csv", &["zplot", "--kernel", "stream", "--n", "8", "--f-core", "1.2:2.7:0.1"]),
            ],
        ),
        (
            "bdw",
            &[
                ("predict_dgemm.csv", &["predict", "--kernel", "dgemm", "--n", "18", "--f-core", "2.3", "--f-uncore", "1.7"]),
                ("predict_stream.csv", &["predict", "--kernel", "stream", "--n", "8", "--f-core", "1.8", "--f-uncore", "2.1"]),
                ("zplot_stream_n.csv", &["zplot", "--kernel", "stream", "--n", "1:18", "--f-core", "2.3", "--f-uncore", "2.8"]),
                ("zplot_stream_funcore.csv", &["zplot", "--kernel", "stream", "--n", "18", "--f-core", "2.3", "--f-uncore", "1.2:2.8:0.1"]),
                ("zplot_dgemm_funcore.csv", &["zplot", "--kernel", "dgemm", "--n", "18", "--f-core", "2.3", "--f-uncore", "1.2:2.8:0.1"]),
            ],
        ),
    ];
    for (chip, runs) in chips {
        let (model, summary) = fit_fixture(chip, tmp.path());
        out.push((format!("{chip}/fit.txt"), summary));
        out.push((format!("{chip}/model.json"), fs::read(&model).expect("model written")));
        let m = model.to_str().unwrap();
        for (name, args) in runs {
            let mut argv = vec![args[0], "--model", m];
            argv.extend_from_slice(&args[1..]);
            out.push((format!("{chip}/{name}"), ok(&argv)));
        }
        for kernel in ["dgemm", "stream"] {
            for objective in ["min-energy", "max-performance", "min-edp"] {
                let bytes = ok(&["optimize", "--model", m, "--kernel", kernel, "--objective", objective]);
                out.push((format!("{chip}/optimize_{kernel}_{objective}.csv"), bytes));
            }
        }
    }
    out
}

/// Compares against the committed golden files, or rewrites them when
/// `UPDATE_GOLDEN=1`. Returns the names of mismatching files.
pub fn check_golden(outputs: &[(String, Vec<u8>)]) -> Vec<String> {
    let root = golden_dir();
    let update = std::env::var("UPDATE_GOLDEN").is_ok_and(|v| v == "1");
    let mut mismatches = Vec::new();
    for (name, bytes) in outputs {
        let path = root.join(name);
        if update {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, bytes).unwrap();
            continue;
        }
        match fs::read(&path) {
            Ok(expected) if &expected == bytes => {}
            _ => mismatches.push(name.clone()),
        }
    }
    mismatches
}
