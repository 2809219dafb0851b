mod common;

use common::*;
use smpr::{objective, SurvivalDataset};
use smpr_cli::data::{load, ColumnMap};
use smpr_cli::report::FitReport;

fn read_report(dir: &std::path::Path) -> FitReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap()
}

fn fit_reference(dir: &std::path::Path, input: &std::path::Path, weight: &str, out: &str) -> FitReport {
    let out_dir = dir.join(out);
    let o = run(&[
        "fit",
        "--input",
        path_str(input),
        "--x-cols",
        "x1,x2",
        "--z-cols",
        "x1",
        "--weight",
        weight,
        "--m",
        "300",
        "--seed",
        "3",
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    read_report(&out_dir)
}

#[test]
fn fit_recovers_reference_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_file(dir.path(), 400, 0);
    let report = fit_reference(dir.path(), &input, "logrank", "fit");
    let inference = report.inference.unwrap();
    assert_eq!(inference.coefficients.len(), 3);
    for row in &inference.coefficients {
        let z = (row.est - 1.0) / row.se;
        assert!(z.abs() < 4.0, "{row:?}");
        assert!(row.p_value < 1e-6);
    }
    // x1 enters both components, x2 only the location.
    assert!(inference.coefficients[0].joint_p_value.is_some());
    assert!(inference.coefficients[1].joint_p_value.is_none());
    assert_eq!(inference.coefficients[0].joint_p_value, inference.coefficients[2].joint_p_value);

    let (header, rows) = read_csv(&dir.path().join("fit/coefficients.csv"));
    assert_eq!(header, ["component", "covariate", "est", "se", "p_value", "joint_p_value"]);
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[2][0].as_str(), rows[2][1].as_str()), ("scale", "x1"));
    assert_eq!(rows[1][5], "");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), inference.coefficients[0].est);
}

#[test]
fn weights_give_similar_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_file(dir.path(), 300, 1);
    let reports: Vec<FitReport> =
        ["logrank", "gehan", "normal"].iter().map(|w| fit_reference(dir.path(), &input, w, w)).collect();
    let base = reports[0].inference.as_ref().unwrap();
    for other in &reports[1..] {
        let other = other.inference.as_ref().unwrap();
        for (a, b) in base.coefficients.iter().zip(&other.coefficients) {
            assert!((a.est - b.est).abs() < a.se, "{a:?} vs {b:?}");
            assert!((a.se / b.se - 1.0).abs() < 0.3, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn fit_json_round_trips_objective() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_file(dir.path(), 150, 2);
    let report = fit_reference(dir.path(), &input, "logrank", "fit");
    let loaded = load(&input, &report.config.columns, None).unwrap();
    let again = objective(&loaded.dataset, &report.fit.theta_hat, &report.fit.estimator).unwrap();
    assert_eq!(again.to_bits(), report.fit.objective_value.to_bits());
    assert_eq!(report.n, 150);
}

#[test]
fn generated_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_file(dir.path(), 60, 3);
    let out = dir.path().join("fit");
    let o = run(&[
        "fit",
        "--input",
        path_str(&input),
        "--x-cols",
        "x1,x2",
        "--z-cols",
        "x1",
        "--m",
        "50",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let seed = read_report(&out).config.seed;
    assert!(stderr(&o).contains(&format!("generated seed {seed}")));
}

#[test]
fn zero_events_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    std::fs::write(&input, "time,event,x\n1,0,0\n2,0,1\n3,0,0\n").unwrap();
    let o = run(&["fit", "--input", path_str(&input), "--x-cols", "x", "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no events"));
}

#[test]
fn bad_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let cases = [
        ("time,event,x\n1,1,0\n2,1,abc\n", "line 3"),
        ("time,event,x\n1,1,0\n0,1,1\n", "line 3"),
        ("time,event,x\n1,1,0\n2,1,1\n3,2,1\n", "line 4"),
        ("time,event,x\n1,1,0\n2,1\n", "line: 3"),
    ];
    for (text, needle) in cases {
        std::fs::write(&input, text).unwrap();
        let o = run(&["fit", "--input", path_str(&input), "--x-cols", "x", "--out", path_str(dir.path())]);
        assert_eq!(code(&o), 2, "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    std::fs::write(&input, "time,event,x\n1,1,0\n2,1,1\n").unwrap();
    let o = run(&["fit", "--input", path_str(&input), "--x-cols", "y", "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`y` not found"));
}

#[test]
fn log_times_may_be_negative() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    std::fs::write(&input, "t,d,x\n-1,1,0\n-0.5,1,1\n0.2,0,0\n0.7,1,1\n1.3,1,0\n").unwrap();
    let args = ["fit", "--input", path_str(&input), "--time-col", "t", "--event-col", "d", "--x-cols", "x"];
    let o =
        smpr().args(args).args(["--m", "20", "--seed", "1", "--out", path_str(dir.path())]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = smpr()
        .args(args)
        .args(["--log-time", "--m", "20", "--seed", "1", "--out", path_str(dir.path())])
        .output()
        .unwrap();
    assert_ne!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn singular_design_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let mut text = String::from("time,event,x,c\n");
    for i in 1..=30 {
        text.push_str(&format!("{},{},{},1\n", i, u8::from(i % 4 != 0), i % 2));
    }
    std::fs::write(&input, text).unwrap();
    let o = run(&[
        "fit",
        "--input",
        path_str(&input),
        "--x-cols",
        "x,c",
        "--m",
        "50",
        "--seed",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_file(dir.path(), 40, 4);
    let o = smpr()
        .env("SMPR_THREADS", "zero")
        .args(["fit", "--input", path_str(&input), "--x-cols", "x1", "--out", path_str(dir.path())])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("SMPR_THREADS"));
}

fn predict_setup(dir: &std::path::Path) -> (std::path::PathBuf, SurvivalDataset) {
    let input = reference_file(dir, 200, 5);
    fit_reference(dir, &input, "logrank", "fit");
    let columns = ColumnMap {
        time: "time".into(),
        event: "event".into(),
        x: vec!["x1".into(), "x2".into()],
        z: vec!["x1".into()],
        log_time: false,
    };
    (input.clone(), load(&input, &columns, None).unwrap().dataset)
}

#[test]
fn predict_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = predict_setup(dir.path());
    let profiles = dir.path().join("profiles.csv");
    std::fs::write(&profiles, "profile,x1,x2\nbaseline,0,0\nsame,0,0\ntreated,1,1\n").unwrap();
    let out = dir.path().join("pred");
    let o = run(&[
        "predict",
        "--fit",
        path_str(&dir.path().join("fit/fit.json")),
        "--profiles",
        path_str(&profiles),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_report(&dir.path().join("fit"));

    // The baseline profile has mu = 0 and sigma = 1.
    let (_, rows) = read_csv(&out.join("survivor_baseline.csv"));
    let cumulative = report.fit.hazard.cumulative();
    assert_eq!(rows.len(), cumulative.len());
    for (row, a) in rows.iter().zip(&cumulative) {
        let s: f64 = row[1].parse().unwrap();
        assert!((s - (-a).exp()).abs() <= 1e-15, "{s} vs {}", (-a).exp());
        let (lo, hi): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!(lo <= s && s <= hi);
    }

    let (_, rows) = read_csv(&out.join("ratio_same_vs_baseline.csv"));
    assert!(!rows.is_empty());
    for row in &rows {
        let r: Vec<f64> = row[1..4].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(r, [1.0, 1.0, 1.0]);
    }

    // gamma'(z_treated - z_baseline) = gamma1 > 0: the ratio falls with pi
    // wherever the baseline quantile exceeds one.
    let gamma = report.fit.theta_hat.gamma[0];
    assert!(gamma > 0.0);
    let (_, rows) = read_csv(&out.join("ratio_treated_vs_baseline.csv"));
    let hazard = report.fit.hazard.curve();
    let above_one: Vec<f64> = rows
        .iter()
        .filter(|row| {
            let pi: f64 = row[0].parse().unwrap();
            hazard.inverse(-(-pi).ln_1p()).is_some_and(|s| s > 0.0)
        })
        .map(|row| row[1].parse().unwrap())
        .collect();
    assert!(above_one.len() > 5);
    assert!(above_one.windows(2).all(|w| w[1] <= w[0]));

    let (header, rows) = read_csv(&out.join("km_all.csv"));
    assert_eq!(header, ["time", "survival", "at_risk", "events"]);
    for row in &rows {
        let t: f64 = row[0].parse().unwrap();
        let at_risk = data.observations().iter().filter(|o| o.log_time.exp() >= t).count();
        assert_eq!(row[2], at_risk.to_string());
    }
}

#[test]
fn predict_rejects_mismatched_profiles_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = predict_setup(dir.path());
    let fit_json = dir.path().join("fit/fit.json");
    let profiles = dir.path().join("profiles.csv");
    std::fs::write(&profiles, "profile,x1\na,0\n").unwrap();
    let o = run(&[
        "predict",
        "--fit",
        path_str(&fit_json),
        "--profiles",
        path_str(&profiles),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`x2`"));

    std::fs::write(&profiles, "profile,x1,x2\na,0,0\n").unwrap();
    let other = reference_file(dir.path(), 200, 6);
    assert_ne!(other, input);
    let o = run(&[
        "predict",
        "--fit",
        path_str(&fit_json),
        "--profiles",
        path_str(&profiles),
        "--input",
        path_str(&other),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not hold the data"));
}

#[test]
fn single_replicate_simulation_has_no_se() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--n",
        "60",
        "--replicates",
        "1",
        "--m",
        "100",
        "--seed",
        "4",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(header, ["quantity", "truth", "bias", "se", "see", "coverage"]);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[3].is_empty()));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["completed"], 1);
    assert_eq!(json["scenario"]["seed"], 4);
}

#[test]
fn simulate_validates_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [["--cens", "1.5"], ["--theta", "1,1,1,1"], ["--replicates", "0"]] {
        let o = smpr()
            .args(["simulate", "--seed", "1", "--out", path_str(dir.path())])
            .args(bad)
            .output()
            .unwrap();
        assert_eq!(code(&o), 2, "{bad:?}: {}", stderr(&o));
    }
}
