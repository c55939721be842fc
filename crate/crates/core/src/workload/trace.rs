use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_task, Task, Workload};
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 4] = ["job_id", "task_id", "arrival_s", "cpu_gncu_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    /// `job_id,task_id,arrival_s,cpu_gncu_s`, `#` comment lines.
    #[default]
    Csv,
}

/// Loads a trace file, multiplying every arrival by `time_scale`.
pub fn load_trace(path: &Path, format: TraceFormat, time_scale: f64) -> Result<Workload> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        TraceFormat::Csv => read_trace(file, time_scale),
    }
}

/// Parses CSV trace data. Row numbers in errors are 1-based file lines.
pub fn read_trace<R: Read>(reader: R, time_scale: f64) -> Result<Workload> {
    if !(time_scale.is_finite() && time_scale > 0.0) {
        return Err(Error::config(format!("time scale must be positive, got {time_scale}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyTrace);
    }
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::MalformedRow {
            row: header.position().map_or(1, |p| p.line() as usize),
            reason: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }

    let mut tasks = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("{what} `{}` is not a decimal number", &rec[i]),
            })
        };
        let task = Task::new(
            &rec[0],
            &rec[1],
            num(2, "arrival_s")? * time_scale,
            num(3, "cpu_gncu_s")?,
        );
        if task.job_id.is_empty() || task.task_id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                reason: "empty identifier".into(),
            });
        }
        check_task(&task, row)?;
        tasks.push(task);
        rows.push(row);
    }
    if tasks.is_empty() {
        return Err(Error::EmptyTrace);
    }
    // Report duplicates with the file line rather than the position in `tasks`.
    Workload::new(tasks).map_err(|e| match e {
        Error::DuplicateTask { row, job_id, task_id } => Error::DuplicateTask {
            row: rows[row - 1],
            job_id,
            task_id,
        },
        other => other,
    })
}

/// Writes `w` in arrival order using the CSV trace schema.
pub fn write_trace(w: &Workload, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_to(w, file).map_err(|e| match e {
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => {
            let csv::ErrorKind::Io(io) = c.into_kind() else {
                unreachable!()
            };
            Error::io(path, io)
        }
        other => other,
    })
}

pub(crate) fn write_trace_to<W: Write>(w: &Workload, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(TRACE_HEADER)?;
    for t in w.tasks() {
        wtr.write_record([
            t.job_id.as_str(),
            t.task_id.as_str(),
            &t.arrival.to_string(),
            &t.cpu_demand.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
