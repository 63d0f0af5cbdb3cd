//! `results.csv`: one row per trained model.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

pub const RESULTS_CSV: &str = "results.csv";
pub const HEADER: [&str; 12] = [
    "task",
    "C",
    "d_c",
    "K",
    "seed",
    "n_train",
    "n_test",
    "param_count",
    "train_err",
    "test_err",
    "baseline_trunc_err",
    "wallclock_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: String,
    #[serde(rename = "C")]
    pub c: usize,
    pub d_c: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub param_count: usize,
    pub train_err: f64,
    pub test_err: f64,
    pub baseline_trunc_err: f64,
    pub wallclock_s: f64,
}

/// Identity of a sweep cell.
pub type CellKey = (String, usize, usize, u64);

impl ResultRow {
    pub fn key(&self) -> CellKey {
        (self.task.clone(), self.c, self.k, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.test_err >= 0.0,
            "negative test error {}",
            self.test_err
        );
        ensure!(self.param_count > 0, "zero parameter count");
        Ok(())
    }

    fn record(&self) -> [String; 12] {
        [
            self.task.clone(),
            self.c.to_string(),
            self.d_c.to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            self.n_train.to_string(),
            self.n_test.to_string(),
            self.param_count.to_string(),
            format_f64(self.train_err),
            format_f64(self.test_err),
            format_f64(self.baseline_trunc_err),
            format_f64(self.wallclock_s),
        ]
    }
}

/// Seventeen significant digits, `.` decimal separator, independent of locale.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Appends `rows` with a single write; the header is written only into an
/// empty file.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    for r in rows {
        r.validate()?;
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let empty = file.metadata()?.len() == 0;
    let mut w = csv::Writer::from_writer(Vec::new());
    if empty {
        w.write_record(HEADER)?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    file.write_all(&buf)?;
    file.sync_data()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    ensure!(
        header == HEADER,
        "unexpected header {header:?} in {}",
        path.display()
    );
    r.deserialize()
        .map(|row| row.with_context(|| format!("parsing {}", path.display())))
        .collect()
}

pub fn completed_cells(path: &Path) -> Result<HashSet<CellKey>> {
    Ok(read_rows(path)?.iter().map(ResultRow::key).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(k: usize, seed: u64, err: f64) -> ResultRow {
        ResultRow {
            task: "darcy-pc".into(),
            c: 32,
            d_c: 32 / k,
            k,
            seed,
            n_train: 10,
            n_test: 5,
            param_count: 1234,
            train_err: err / 2.0,
            test_err: err,
            baseline_trunc_err: 0.1 / k as f64,
            wallclock_s: 1.5,
        }
    }

    #[test]
    fn header_once_and_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(RESULTS_CSV);
        let a = row(2, 0, 0.1 + 0.2);
        let b = row(4, 1, std::f64::consts::PI * 1e-7);
        append_rows(&p, &[a.clone()]).unwrap();
        append_rows(&p, &[b.clone()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], HEADER.join(","));
        assert!(lines[1].contains("3.0000000000000004e-1"));
        assert_eq!(read_rows(&p).unwrap(), vec![a.clone(), b]);
        assert_eq!(completed_cells(&p).unwrap().len(), 2);
        assert!(completed_cells(&p).unwrap().contains(&a.key()));
    }

    #[test]
    fn seventeen_digits() {
        for v in [0.1, 1.0 / 3.0, 12345.678, 5e-324, 0.0] {
            let s = format_f64(v);
            let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn rejects_invalid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(RESULTS_CSV);
        let mut bad = row(2, 0, 0.1);
        bad.param_count = 0;
        assert!(append_rows(&p, &[bad]).is_err());
        let mut neg = row(2, 0, 0.1);
        neg.test_err = -1.0;
        assert!(append_rows(&p, &[neg]).is_err());
        assert!(read_rows(&p).unwrap().is_empty());
    }
}
