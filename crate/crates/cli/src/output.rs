use std::fs;
use std::path::{Path, PathBuf};

use tiebias_core::tensorio::{write_report, Report, Table};

use crate::error::{usage, CliResult};

/// Writes `report` to `out`, or prints it when no path is given.
pub fn emit(report: &Report, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
            }
            write_report(report, p)?;
        }
        None => print!("{}", report.to_text()),
    }
    Ok(())
}

/// Explicit dump path, or `<out>.tokens.csv` next to the report.
pub fn dump_path(dump: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    dump.map(Path::to_path_buf)
        .or_else(|| out.map(|o| o.with_extension("tokens.csv")))
}

pub fn write_csv(table: &Table, path: &Path) -> CliResult<()> {
    let fail = |e: csv::Error| usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(fail)?;
    w.write_record(&table.columns).map_err(fail)?;
    for row in &table.rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
