mod common;

use std::fs::{self, File};

use common::{cli, fit_fixture, fixtures, ok};
use ecm_energy::measurement::write_measurements;
use ecm_energy::synthetic;
use ecm_energy::{ModelFile, OperatingPoint, PerfUnit};

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

#[test]
fn fit_then_predict_reproduces_generator() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let truth = synthetic::snb_model();
    for (kernel, n, f) in [("dgemm", 8, 2.7), ("dgemm", 3, 1.5), ("stream", 5, 2.2), ("stream", 1, 1.2)] {
        let out = text(&ok(&[
            "predict", "--model", model.to_str().unwrap(), "--kernel", kernel, "--n", &n.to_string(), "--f-core", &f.to_string(),
        ]));
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        let p = truth.predict(kernel, OperatingPoint::new(n, f, f)).unwrap();
        let perf: f64 = row[3].parse().unwrap();
        let power: f64 = row[6].parse().unwrap();
        assert!((perf - p.performance / 1e9).abs() <= 1e-5 * perf.max(1.0), "{kernel} {out}");
        assert!((power - p.power).abs() <= 1e-5 * power, "{kernel} {out}");
    }
    let fitted = ModelFile::load(&model).unwrap().model();
    assert!((fitted.kernels["stream"].p0() - synthetic::SNB_P0).abs() <= 0.05);
}

#[test]
fn validate_reports_zero_error_on_noiseless_data() {
    let tmp = tempfile::tempdir().unwrap();
    for chip in ["snb", "bdw"] {
        let (model, _) = fit_fixture(chip, tmp.path());
        let meas = fixtures().join(chip).join("measurements.csv");
        let r = cli(&["validate", "--model", model.to_str().unwrap(), "--measurements", meas.to_str().unwrap()]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let out = text(&r.stdout);
        assert!(out.lines().count() > 100);
        for line in out.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let (ep, ew): (f64, f64) = (cols[6].parse().unwrap(), cols[9].parse().unwrap());
            assert!(ep < 1e-4 && ew < 1e-6, "{line}");
        }
        assert!(r.stderr.contains("max 0.00%"), "{}", r.stderr);
    }
}

#[test]
fn validate_on_noisy_data_stays_small() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let meas = fixtures().join("snb/measurements_noisy.csv");
    let r = cli(&["validate", "--model", model.to_str().unwrap(), "--measurements", meas.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("256 points"));
}

#[test]
fn min_edp_on_scalable_kernel_is_full_chip_at_max_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let out = text(&ok(&["optimize", "--model", model.to_str().unwrap(), "--kernel", "dgemm", "--objective", "min-edp"]));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[2..5], ["8", "2.700", "2.700"]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let m = model.to_str().unwrap();

    let usage = cli(&["optimize", "--model", m, "--kernel", "dgemm", "--objective", "fastest"]);
    assert_eq!(usage.code, 2);
    assert!(usage.stderr.contains("--objective") && usage.stderr.contains("min-energy"), "{}", usage.stderr);
    assert_eq!(cli(&["fit", "--breakpoint", "soon"]).code, 2);
    assert_eq!(cli(&["frobnicate"]).code, 2);
    assert_eq!(cli(&["--help"]).code, 0);

    let runtime = cli(&["predict", "--model", m, "--kernel", "dgemm", "--n", "8", "--f-core", "3.5"]);
    assert_eq!(runtime.code, 1);
    assert!(runtime.stderr.contains("outside"), "{}", runtime.stderr);
    assert_eq!(cli(&["predict", "--model", m, "--kernel", "nope", "--n", "1", "--f-core", "2"]).code, 1);
    assert_eq!(cli(&["predict", "--model", "/nonexistent/model.json", "--kernel", "dgemm", "--n", "1", "--f-core", "2"]).code, 1);
    let slaved = cli(&["predict", "--model", m, "--kernel", "dgemm", "--n", "1", "--f-core", "2", "--f-uncore", "1.5"]);
    assert_eq!(slaved.code, 1);
}

#[test]
fn tampered_model_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let doc = fs::read_to_string(&model).unwrap().replacen("\"w0\": 14.62", "\"w0\": 15.62", 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, doc).unwrap();
    let r = cli(&["predict", "--model", bad.to_str().unwrap(), "--kernel", "dgemm", "--n", "1", "--f-core", "2"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("integrity"), "{}", r.stderr);
}

#[test]
fn fit_writes_atomically_and_records_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("bdw", tmp.path());
    let names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["bdw.json".to_string()]);
    let file = ModelFile::load(&model).unwrap();
    let inputs: Vec<&str> = file.payload.provenance.inputs.iter().map(|i| i.path.as_str()).collect();
    assert_eq!(inputs, ["machine.json", "bandwidth.csv", "kernels.json", "measurements.csv"]);
    assert_eq!(file.payload.provenance.fitted_at, common::TIMESTAMP);
    assert_eq!(file.payload.power.baseline.segments.len(), 2);
}

#[test]
fn explicit_breakpoint_and_cutoff_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let f = fixtures().join("snb");
    let out = tmp.path().join("m.json");
    let paths = [f.join("machine.json"), f.join("kernels.json"), f.join("measurements.csv"), out.clone()];
    let [machine, kernels, meas, out_s] = paths.map(|p| p.to_string_lossy().into_owned());
    let run = |bp: &str| {
        cli(&[
            "fit", "--machine", &machine, "--kernels", &kernels, "--measurements", &meas, "--out", &out_s,
            "--timestamp", common::TIMESTAMP, "--breakpoint", bp, "--efficiency-cutoff", "0.95",
            "--baseline-kernels", "dgemm,stream",
        ])
    };
    let r = run("1.9");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = ModelFile::load(&out).unwrap();
    assert_eq!(m.payload.power.baseline.segments[0].upper_ghz, 1.9);
    let notes = &m.payload.fits["baseline/quadratic"].notes;
    assert!(notes.iter().any(|n| n.contains("skipped baseline/extrapolate/stream@2.700/2.700")));
    assert!(notes.iter().any(|n| n.contains("parallel efficiency")));

    let r = run("2.6");
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn fleet_statistics_over_fitted_chips() {
    let tmp = tempfile::tempdir().unwrap();
    let f = fixtures().join("snb");
    let unit = PerfUnit::parse("GF/s").unwrap();
    let mut models = Vec::new();
    for i in 0..10 {
        let mut truth = synthetic::snb_model();
        let seg = &mut truth.power.baseline.segments[0];
        seg.w0 += 0.05 * (i % 4) as f64;
        seg.w2 += if i == 6 { 0.5 } else { 0.01 * (i % 3) as f64 };
        let chip = format!("snb-{i:02}");
        let recs = synthetic::generate_records(&truth, &chip, &synthetic::snb_plan(), None).unwrap();
        let meas = tmp.path().join(format!("{chip}.csv"));
        write_measurements(File::create(&meas).unwrap(), &unit, &recs).unwrap();
        let out = tmp.path().join(format!("{chip}.json"));
        ok(&[
            "fit",
            "--machine", f.join("machine.json").to_str().unwrap(),
            "--kernels", f.join("kernels.json").to_str().unwrap(),
            "--measurements", meas.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--timestamp", common::TIMESTAMP,
        ]);
        models.push(out.to_string_lossy().into_owned());
    }
    let hist = tmp.path().join("hist");
    let corr = tmp.path().join("corr.csv");
    let mut args = vec!["fleet", "--histograms", hist.to_str().unwrap(), "--correlations", corr.to_str().unwrap(), "--models"];
    args.extend(models.iter().map(String::as_str));
    let r = cli(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary = text(&r.stdout);
    let w2 = summary.lines().find(|l| l.starts_with("base.w2,")).unwrap();
    assert!(w2.ends_with(",snb-06"), "{w2}");
    let w0 = summary.lines().find(|l| l.starts_with("base.w0,")).unwrap();
    assert!(w0.ends_with(','), "{w0}");
    assert!(r.stderr.contains("chip snb-06 in base.w2"), "{}", r.stderr);
    let h = fs::read_to_string(hist.join("base.w0.csv")).unwrap();
    assert_eq!(h.lines().count(), 1 + 4);
    assert!(fs::read_to_string(&corr).unwrap().starts_with("a,b,chips,pearson"));

    // chip order does not matter
    let mut reversed = vec!["fleet", "--models"];
    reversed.extend(models.iter().rev().map(String::as_str));
    assert_eq!(cli(&reversed).stdout, r.stdout);
    assert_eq!(cli(&["fleet", "--models", &models[0]]).code, 1);
}

#[test]
fn slaved_measurements_may_omit_uncore_column() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, _) = fit_fixture("snb", tmp.path());
    let full = fs::read_to_string(fixtures().join("snb/measurements.csv")).unwrap();
    let stripped: String = full
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.remove(4);
            cols.join(",") + "\n"
        })
        .collect();
    let meas = tmp.path().join("no_uncore.csv");
    fs::write(&meas, stripped).unwrap();
    let m = model.to_str().unwrap();
    let with = cli(&["validate", "--model", m, "--measurements", fixtures().join("snb/measurements.csv").to_str().unwrap()]);
    let without = cli(&["validate", "--model", m, "--measurements", meas.to_str().unwrap()]);
    assert_eq!(without.code, 0, "{}", without.stderr);
    assert_eq!(without.stdout, with.stdout);

    let bdw = fit_fixture("bdw", tmp.path()).0;
    let r = cli(&["validate", "--model", bdw.to_str().unwrap(), "--measurements", meas.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("f_uncore_ghz"), "{}", r.stderr);
}
