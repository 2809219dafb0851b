#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smpr::simharness::{calibrate_censoring, generate_dataset};
use smpr::{Scenario, SurvivalDataset, Tau, WeightSpec};

pub fn smpr() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smpr"));
    cmd.env_remove("SMPR_THREADS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    smpr().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Columns `time,event,x1,x2` on the original time scale.
pub fn dataset_csv(data: &SurvivalDataset) -> String {
    let mut s = String::from("time,event,x1,x2\n");
    for o in data.observations() {
        writeln!(s, "{:e},{},{},{:e}", o.log_time.exp(), u8::from(o.event), o.x[0], o.x[1]).unwrap();
    }
    s
}

/// One replicate of the reference design, as the CLI reads it.
pub fn reference_file(dir: &Path, n: usize, index: usize) -> PathBuf {
    let scenario = Scenario::reference(n, 0.2, Tau::Infinite, WeightSpec::LogRank, 99);
    let c = calibrate_censoring(&scenario).unwrap();
    let data = generate_dataset(&scenario, c, index).unwrap();
    let path = dir.join(format!("reference_{n}_{index}.csv"));
    std::fs::write(&path, dataset_csv(&data)).unwrap();
    path
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed CSV: header and rows of fields.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
