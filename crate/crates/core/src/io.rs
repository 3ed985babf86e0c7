//! Output formatting and report writing.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Result, SimError};
use crate::report::ExperimentReport;

/// Round `x` to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// `x` rounded to nine significant digits, printed in the shortest form
/// that reads back to the rounded value.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 || (1e-4..1e9).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// The report as pretty JSON with every float rounded to nine significant
/// digits.
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

/// Write `report.json` and one `<series>.csv` per series into `dir`,
/// creating it if needed. Existing files are overwritten.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut written = Vec::with_capacity(1 + report.series.len());
    let path = dir.join("report.json");
    write_file(&path, report_json(report)?.as_bytes())?;
    written.push(path);
    for s in &report.series {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| SimError::Csv(e.to_string());
        w.write_record(&s.columns).map_err(err)?;
        for row in &s.rows {
            w.write_record(row.iter().map(|x| format_sig(*x))).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::Csv(e.to_string()))?;
        let path = dir.join(format!("{}.csv", s.name));
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{Quantity, Series};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.1234567891234), "0.123456789");
        assert_eq!(format_sig(1.23456789123e-20), "1.23456789e-20");
        assert_eq!(round_sig(2.0 / 3.0), 0.666666667);
    }

    #[test]
    fn writes_report_and_series_idempotently() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentReport::new("demo", 1);
        r.output("x", Quantity::new(1.0 / 3.0, "K"));
        assert_eq!(write_outputs(&r, dir.path()).unwrap().len(), 1);
        let mut s = Series::new("curve", &["a", "b"]);
        s.push(vec![1.0, 2.0 / 3.0]);
        r.series.push(s);
        let files = write_outputs(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let first = fs::read(&files[1]).unwrap();
        write_outputs(&r, dir.path()).unwrap();
        assert_eq!(fs::read(&files[1]).unwrap(), first);
        assert_eq!(String::from_utf8(first).unwrap(), "a,b\n1,0.666666667\n");
        let json = fs::read_to_string(&files[0]).unwrap();
        assert!(json.contains("0.333333333"));
    }

    #[test]
    fn unwritable_directory_reports_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        match write_outputs(&ExperimentReport::new("x", 0), &blocker.join("sub")) {
            Err(SimError::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
    }
}
