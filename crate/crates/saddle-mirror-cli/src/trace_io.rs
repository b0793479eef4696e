//! Trace persistence. One CSV per run, all-numeric, with enough digits that
//! reading a file back reproduces every f64 bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use saddle_mirror::solvers::{IterateRecord, Trace};

use crate::CliError;

/// 17 significant digits: the round-trip guarantee for f64.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn csv_header(x_dim: usize, y_dim: usize) -> String {
    let mut cols = vec!["n".to_string(), "t".to_string(), "alpha".to_string(), "mu".to_string()];
    cols.extend((0..x_dim).map(|i| format!("x_{i}")));
    cols.extend((0..y_dim).map(|i| format!("y_{i}")));
    cols.extend(["gap", "v_star", "dist_euclid"].map(str::to_string));
    cols.join(",")
}

/// Writes the trace records of one run. Optional diagnostics appear as empty
/// fields so every row has the same column count.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let (x_dim, y_dim) = match trace.records.first() {
        Some(r) => (r.x.len(), r.y.len()),
        None => {
            return Err(CliError::Runtime(format!(
                "{}: refusing to write a trace with no records",
                path.display()
            )))
        }
    };
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", csv_header(x_dim, y_dim))?;
    for r in &trace.records {
        let mut fields = vec![r.n.to_string(), fmt(r.t), fmt(r.alpha), fmt_opt(r.mu)];
        fields.extend(r.x.iter().map(|&v| fmt(v)));
        fields.extend(r.y.iter().map(|&v| fmt(v)));
        fields.push(fmt_opt(r.gap));
        fields.push(fmt_opt(r.v_star));
        fields.push(fmt_opt(r.dist_euclid));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV back into records. The header determines the block
/// dimensions; row arity and field syntax are checked.
pub fn read_trace_csv(path: &Path) -> Result<Vec<IterateRecord>, CliError> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Parse(format!("{}: empty trace file", path.display())))??;
    let cols: Vec<&str> = header.split(',').collect();
    let x_dim = cols.iter().filter(|c| c.starts_with("x_")).count();
    let y_dim = cols.iter().filter(|c| c.starts_with("y_")).count();
    let expected = csv_header(x_dim, y_dim);
    if header != expected {
        return Err(CliError::Parse(format!(
            "{}: unrecognized trace header {header:?}",
            path.display()
        )));
    }
    let n_cols = cols.len();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(CliError::Parse(format!(
                "{}:{row}: expected {n_cols} fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let f64_at = |j: usize| -> Result<f64, CliError> {
            fields[j].parse::<f64>().map_err(|e| {
                CliError::Parse(format!("{}:{row}: field {}: {e}", path.display(), cols[j]))
            })
        };
        let opt_at = |j: usize| -> Result<Option<f64>, CliError> {
            if fields[j].is_empty() {
                Ok(None)
            } else {
                f64_at(j).map(Some)
            }
        };
        let n = fields[0]
            .parse::<u64>()
            .map_err(|e| CliError::Parse(format!("{}:{row}: field n: {e}", path.display())))?;
        let t = f64_at(1)?;
        let alpha = f64_at(2)?;
        let mu = opt_at(3)?;
        let x = (4..4 + x_dim).map(f64_at).collect::<Result<Vec<_>, _>>()?;
        let y = (4 + x_dim..4 + x_dim + y_dim).map(f64_at).collect::<Result<Vec<_>, _>>()?;
        let base = 4 + x_dim + y_dim;
        records.push(IterateRecord {
            n,
            t,
            x,
            y,
            alpha,
            mu,
            gap: opt_at(base)?,
            v_star: opt_at(base + 1)?,
            dist_euclid: opt_at(base + 2)?,
        });
    }
    Ok(records)
}
