//! CSV export of run records and Monte Carlo summaries.
//!
//! Floats are written as `{:.16e}` so a file round-trips every bit of the
//! value and byte-level comparisons are meaningful.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::runner::{McSummary, RunRecord};

fn float(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

/// Header of the per-run CSV for a parameter of dimension `dim`.
pub fn run_header(dim: usize) -> String {
    let mut h = String::from("run_id,k,err_theta,err_delta,scaled_err");
    for i in 0..dim {
        write!(h, ",theta_hat_{i}").unwrap();
    }
    h
}

/// One row per checkpoint of every record, after a single header.
pub fn runs_to_csv(records: &[RunRecord]) -> String {
    let dim = records.first().map_or(0, |r| r.theta_dim);
    let mut out = run_header(dim);
    out.push('\n');
    for r in records {
        for c in &r.checkpoints {
            write!(out, "{},{},", r.run_id, c.k).unwrap();
            float(&mut out, c.err_theta);
            out.push(',');
            float(&mut out, c.err_delta);
            out.push(',');
            float(&mut out, c.scaled_err);
            for &x in &c.theta_hat {
                out.push(',');
                float(&mut out, x);
            }
            out.push('\n');
        }
    }
    out
}

/// Summary columns; the mean and `p`-th moment of the error norm trail the
/// core schema.
pub const SUMMARY_HEADER: &str =
    "k,mean_err2_theta,k_mse,median_err,mean_err2_delta,cr_ratio,mean_err_theta,moment_err_theta";

pub fn summary_to_csv(summary: &McSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &summary.rows {
        write!(out, "{}", r.k).unwrap();
        for x in [
            r.mean_err2_theta,
            r.k_mse,
            r.median_err,
            r.mean_err2_delta,
            r.cr_ratio,
            r.mean_err_theta,
            r.moment_err_theta,
        ] {
            out.push(',');
            float(&mut out, x);
        }
        out.push('\n');
    }
    out
}

/// Raw observation stream: `k,phi_0..,s` with `k` starting at 1.
pub fn stream_to_csv(samples: &[(Vec<f64>, usize)], dim: usize) -> String {
    let mut out = String::from("k");
    for i in 0..dim {
        write!(out, ",phi_{i}").unwrap();
    }
    out.push_str(",s\n");
    for (k, (phi, s)) in samples.iter().enumerate() {
        write!(out, "{}", k + 1).unwrap();
        for &x in phi {
            out.push(',');
            float(&mut out, x);
        }
        writeln!(out, ",{s}").unwrap();
    }
    out
}

/// Writes `contents` to `path`, mapping failures to [`Error::Io`].
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_runs(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_file(path, &runs_to_csv(records))
}

pub fn write_summary(path: &Path, summary: &McSummary) -> Result<()> {
    write_file(path, &summary_to_csv(summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::runner::{Checkpoint, SummaryRow};
    use nalgebra::DVector;

    #[test]
    fn run_csv_layout() {
        let theta = DVector::from_vec(vec![1.0, 2.0]);
        let hat = DVector::from_vec(vec![1.0, 2.5]);
        let rec = RunRecord {
            run_id: 7,
            theta_dim: 2,
            checkpoints: vec![Checkpoint::new(10, &hat, &theta, 0.25)],
        };
        let csv = runs_to_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("run_id,k,err_theta,err_delta,scaled_err,theta_hat_0,theta_hat_1")
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 7);
        assert_eq!(row[0], "7");
        assert_eq!(row[1], "10");
        assert_eq!(row[2], "5.0000000000000000e-1");
        assert_eq!(row[6].parse::<f64>().unwrap(), 2.5);
    }

    #[test]
    fn empty_record_is_header_only() {
        let csv = runs_to_csv(&[RunRecord::empty(0, 3)]);
        assert_eq!(csv, format!("{}\n", run_header(3)));
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1f64 + 0.2;
        let mut s = String::new();
        float(&mut s, x);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn summary_csv_layout() {
        let row = SummaryRow {
            k: 100,
            mean_err_theta: 1.0,
            median_err: 1.0,
            mean_err2_theta: 1.0,
            k_mse: 100.0,
            moment_err_theta: 1.0,
            mean_err2_delta: 0.5,
            cr_ratio: f64::NAN,
        };
        let s = McSummary {
            replicas: 2,
            moment_order: 4,
            rows: vec![row],
        };
        let csv = summary_to_csv(&s);
        assert!(csv.starts_with(SUMMARY_HEADER));
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 8);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(5), Some("NaN"));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_file(Path::new("/nonexistent-dir/x.csv"), "a").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
