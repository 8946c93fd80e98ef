//! CSV emission and parsing for runs, summaries and discovery curves.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use autoexplore_core::{Error, Result, StopReason};

use crate::experiment::RunRecord;
use crate::stats::SummaryRow;
use crate::verify::AxFlags;

/// Stop-reason token for runs that ended in an error.
pub const FAILED_TOKEN: &str = "FAILED";

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    io_err(path, io::Error::other(e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_runs<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let num_states = records.first().map_or(0, |r| r.hitting.len());
    let mut header: Vec<String> = ["seed", "sample_complexity", "stop_reason", "ax_l", "ax_prime", "ax_star"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..num_states).map(|s| format!("v_goal_{s}")));
    w.write_record(&header)?;
    for r in records {
        let mut fields = vec![
            r.seed.to_string(),
            r.sample_complexity.to_string(),
            r.stop_reason.map_or_else(|| FAILED_TOKEN.to_string(), |s| s.to_string()),
            flag(r.ax.ax_l).into(),
            flag(r.ax.ax_prime).into(),
            flag(r.ax.ax_star).into(),
        ];
        fields.extend(r.hitting.iter().map(|&v| fmt_opt(v)));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "mean", "ci95"])?;
    for r in rows {
        w.write_record([r.metric.clone(), r.mean.to_string(), r.ci95.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "step", "fraction_controllable"])?;
    for r in records {
        for &(step, frac) in &r.curve {
            w.write_record([r.seed.to_string(), step.to_string(), frac.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Kind of CSV table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Runs,
    Summary,
    Curve,
}

/// Writes one table to `path`, reporting failures with the path.
pub fn write_csv(path: &Path, kind: CsvKind, records: &[RunRecord], summary: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let out = io::BufWriter::new(file);
    match kind {
        CsvKind::Runs => write_runs(records, out),
        CsvKind::Summary => write_summary(summary, out),
        CsvKind::Curve => write_curve(records, out),
    }
    .map_err(|e| csv_err(path, e))
}

fn bad(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Parses a `runs` table back into records (curves are not part of it and come back empty).
pub fn read_runs<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let expected = ["seed", "sample_complexity", "stop_reason", "ax_l", "ax_prime", "ax_star"];
    if header.len() < expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(bad(1, "unexpected runs header"));
    }
    let num_states = header.len() - expected.len();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        let field = |j: usize| row.get(j).ok_or_else(|| bad(line, format!("missing column {j}")));
        let int = |j: usize| -> Result<u64> {
            let f = field(j)?;
            f.parse().map_err(|_| bad(line, format!("bad integer {f:?}")))
        };
        let bit = |j: usize| -> Result<bool> {
            match field(j)? {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(bad(line, format!("bad flag {other:?}"))),
            }
        };
        let stop = field(2)?;
        let (stop_reason, error) = if stop == FAILED_TOKEN {
            (None, Some("failed run".to_string()))
        } else {
            (Some(stop.parse::<StopReason>().map_err(|e| bad(line, e))?), None)
        };
        let mut hitting = Vec::with_capacity(num_states);
        for j in expected.len()..expected.len() + num_states {
            let f = field(j)?;
            let v: f64 = f.parse().map_err(|_| bad(line, format!("bad value {f:?}")))?;
            hitting.push(if v.is_nan() { None } else { Some(v) });
        }
        records.push(RunRecord {
            seed: int(0)?,
            sample_complexity: int(1)?,
            stop_reason,
            error,
            hitting,
            ax: AxFlags {
                ax_l: bit(3)?,
                ax_prime: bit(4)?,
                ax_star: bit(5)?,
            },
            curve: Vec::new(),
        });
    }
    Ok(records)
}

/// Reads a `runs` table from disk.
pub fn read_runs_file(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_runs(io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}
