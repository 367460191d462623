#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isac_mi::region::pareto_frontier;
use isac_mi::{RatePointF64, RateRegionF64, ScenarioConfig};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac-mi"))
}

/// Runs the binary with `ISAC_MI_THREADS` set to `threads`.
pub fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("ISAC_MI_THREADS", n.to_string()),
        None => cmd.env_remove("ISAC_MI_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub fn write_config(dir: &Path, name: &str, sc: &ScenarioConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, sc.to_json()).unwrap();
    path
}

pub struct Csv {
    pub header: String,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn read(path: &Path) -> Csv {
        let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Csv { header, rows }
    }

    pub fn col(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r[2].as_str()).collect()
    }

    /// Pareto region of the `(cr, sr)` columns of a region CSV.
    pub fn region(&self) -> RateRegionF64 {
        let pts: Vec<RatePointF64> = self
            .col(0)
            .into_iter()
            .zip(self.col(1))
            .map(|(c, s)| RatePointF64::new(c, s))
            .collect();
        pareto_frontier(&pts).unwrap()
    }
}
