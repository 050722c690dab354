mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn censreg(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_censreg")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v, stdout)
}

fn write_csv(dir: &Path, name: &str, s: &censreg::CensoredSample) -> String {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "time,status,x").unwrap();
    for i in 0..s.n() {
        writeln!(f, "{},{},{}", s.y()[i], u8::from(s.delta()[i]), s.row(i)[1]).unwrap();
    }
    path.to_str().unwrap().to_owned()
}

#[test]
fn least_squares_fit_of_uncensored_file_is_ols() {
    let dir = TempDir::new().unwrap();
    let s = common::uncensored(&common::line_sample(1, 25, 2.0, -1.0, 0.0));
    let path = write_csv(dir.path(), "d.csv", &s);
    let (code, v, _) = censreg(&["fit", &path, "--response", "time", "--estimator", "ls"]);
    assert_eq!(code, 0);
    let oracle = common::ols(s.design(), s.y(), 2);
    assert!((v["beta"]["(intercept)"].as_f64().unwrap() - oracle[0]).abs() < 1e-10);
    assert!((v["beta"]["x"].as_f64().unwrap() - oracle[1]).abs() < 1e-10);
    assert_eq!(v["n"], 25);
    assert_eq!(v["m"], 0);
    assert_eq!(v["estimator"], "ls");
}

#[test]
fn fit_output_round_trips_through_json() {
    let dir = TempDir::new().unwrap();
    let s = common::line_sample(2, 40, 0.0, 1.5, 1.0);
    let path = write_csv(dir.path(), "d.csv", &s);
    let (code, v, _) =
        censreg(&["fit", &path, "--response", "time", "--estimator", "s", "--n-candidates", "80", "--seed", "3"]);
    assert_eq!(code, 0);
    let mut o = censreg::EstimatorOptions::default();
    o.search.n_candidates = 80;
    o.search.seed = 3;
    let f = censreg::estimators::fit(&s, censreg::Estimator::S, &o).unwrap();
    let coef: Vec<f64> = v["coefficients"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
    assert_eq!(coef, f.beta);
    assert_eq!(v["scale"].as_f64().unwrap(), f.scale);
    assert_eq!(v["n_candidates_evaluated"].as_u64().unwrap() as usize, f.n_candidates_evaluated);
}

#[test]
fn missing_status_column_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "y,x\n1,2\n3,4\n").unwrap();
    let (code, v, _) = censreg(&["fit", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "invalid_input");
    assert!(v["message"].as_str().unwrap().contains("status"));
}

#[test]
fn bad_arguments_and_data_exit_with_two() {
    let (code, v, _) = censreg(&["fit"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "usage");
    let (code, _, _) = censreg(&["simulate", "--table", "4"]);
    assert_eq!(code, 2);
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "y,status,x\n1,0,2\n3,0,4\n5,0,1\n").unwrap();
    let (code, v, _) = censreg(&["fit", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "all_censored");
    let (code, _, _) = censreg(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn simulate_emits_one_record_per_estimator_and_is_reproducible() {
    let args = ["simulate", "--table", "1", "--replicates", "3", "--n-candidates", "40", "--seed", "5"];
    let (code, v, first) = censreg(&args);
    assert_eq!(code, 0);
    let recs = v["records"].as_array().unwrap();
    let names: Vec<&str> = recs.iter().map(|r| r["estimator"].as_str().unwrap()).collect();
    assert_eq!(names, ["S", "LMS", "LS", "MM", "GM", "L1"]);
    assert!(recs.iter().all(|r| r["replicates"] == 3 && r["seed"] == 5));
    let (_, _, second) = censreg(&["--threads", "2", "simulate", "--table", "1", "--replicates", "3", "--n-candidates", "40", "--seed", "5"]);
    assert_eq!(first, second);
}

#[test]
fn simulate_table_three_covers_every_slope() {
    let (code, v, _) = censreg(&["simulate", "--table", "3", "--replicates", "2", "--n-candidates", "30", "--estimators", "ls,s"]);
    assert_eq!(code, 0);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 14);
    assert!(recs.iter().all(|r| r["x0"] == 10.0));
    assert_eq!(v["censoring_rate"].as_array().unwrap().len(), 7);
}

#[test]
fn simulate_accepts_a_scenario_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, "n = 30\nreplicates = 2\nseed = 4\ncensoring = false\n").unwrap();
    let (code, v, _) = censreg(&["simulate", "--scenario", path.to_str().unwrap(), "--estimators", "ls", "--n-candidates", "20"]);
    assert_eq!(code, 0);
    assert_eq!(v["records"].as_array().unwrap().len(), 1);
    assert_eq!(v["censoring_rate"][0], 0.0);
    std::fs::write(&path, "n = 30\nwhatever = 1\n").unwrap();
    let (code, _, _) = censreg(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn breakdown_reports_the_bound() {
    let dir = TempDir::new().unwrap();
    let mut s = common::line_sample(3, 100, 0.0, 1.5, 1.0);
    // Force exactly 32 censored rows.
    let mut d = s.delta().to_vec();
    for (i, v) in d.iter_mut().enumerate() {
        *v = i >= 32;
    }
    s = censreg::CensoredSample::from_rows(s.y().to_vec(), &(0..100).map(|i| vec![s.row(i)[1]]).collect::<Vec<_>>(), d, true).unwrap();
    let path = write_csv(dir.path(), "d.csv", &s);
    let (code, v, _) = censreg(&["breakdown", &path, "--response", "time"]);
    assert_eq!(code, 0);
    assert_eq!((v["n"].as_u64(), v["m"].as_u64(), v["q"].as_u64()), (Some(100), Some(32), Some(1)));
    assert!((v["gamma_bound"].as_f64().unwrap() - 0.17).abs() < 1e-12);
    let (code, v, _) = censreg(&["breakdown", &path, "--response", "time", "--b-over-a", "0"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "invalid_input");
    let (code, v, _) =
        censreg(&["breakdown", &path, "--response", "time", "--probe", "ls", "--probe-k", "5", "--n-candidates", "20"]);
    assert_eq!(code, 0);
    assert_eq!(v["probe"]["displacements"].as_array().unwrap().len(), 3);
}

#[test]
fn curve_has_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let s = common::line_sample(4, 50, 0.0, 1.5, 1.0);
    let path = write_csv(dir.path(), "d.csv", &s);
    let (code, v, _) = censreg(&[
        "curve", &path, "--response", "time", "--grid-min", "-1", "--grid-max", "3", "--grid-steps", "3", "--n-candidates", "40",
    ]);
    assert_eq!(code, 0);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["beta"], -1.0);
    let (code, _, _) = censreg(&["curve", &path, "--response", "time", "--grid-steps", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn log_response_and_explicit_covariates() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("d.tsv");
    std::fs::write(&path, "t\td\tage\tjunk\n1\t1\t30\t9\n2\t1\t40\t8\n4\t0\t50\t7\n8\t1\t60\t6\n16\t1\t70\t5\n").unwrap();
    let (code, v, _) = censreg(&[
        "fit", path.to_str().unwrap(), "--delimiter", "\t", "--response", "t", "--status", "d", "--covariates", "age",
        "--log-response", "--estimator", "ls",
    ]);
    assert_eq!(code, 0, "{v}");
    assert!(v["beta"].get("junk").is_none());
    assert!(v["beta"]["age"].as_f64().unwrap() > 0.0);
}

#[test]
fn in_process_runner_matches_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = censreg::cli::run(["censreg", "simulate", "--replicates", "1", "--n-candidates", "20", "--estimators", "ls"], &mut out, &mut err);
    assert_eq!(code, 0);
    let (_, _, stdout) = censreg(&["simulate", "--replicates", "1", "--n-candidates", "20", "--estimators", "ls"]);
    assert_eq!(String::from_utf8(out).unwrap(), stdout);
    assert!(!err.is_empty());
}
