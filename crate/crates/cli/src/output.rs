//! Writers for result tables, reference curves, histogram samples and the
//! JSON summary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use mlpcodes::experiment::{Report, ResultRow};

pub const VERSION: &str = env!("MLPCODES_VERSION");

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    if rows.is_empty() {
        w.write_record(ResultRow::COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds<W: Write>(report: &Report, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for row in &report.bounds {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One decimal value per line.
pub fn write_samples<W: Write>(values: &[f64], sink: W) -> io::Result<()> {
    let mut w = BufWriter::new(sink);
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()
}

pub fn summary(report: &Report) -> serde_json::Value {
    serde_json::json!({
        "version": VERSION,
        "config": report.config,
        "rows": report.rows,
        "aborts": report.aborts,
        "aborted_fraction": report.aborted_fraction,
        "histogram_samples": report.histogram.as_ref().map(|h| h.pairwise.len()),
    })
}

/// Writes every artefact of a report. With a prefix, files are
/// `<prefix>.csv`, `<prefix>.json` and, for histograms,
/// `<prefix>.pairwise.txt` plus `<prefix>.truth.txt` or
/// `<prefix>.distortion.txt`. Without one, the table goes to stdout.
pub fn emit(report: &Report, prefix: Option<&Path>) -> io::Result<Vec<PathBuf>> {
    let table = |sink: &mut dyn Write| -> io::Result<()> {
        let res = if report.bounds.is_empty() {
            write_rows(&report.rows, sink)
        } else {
            write_bounds(report, sink)
        };
        res.map_err(io::Error::other)
    };
    let Some(prefix) = prefix else {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        return table(&mut lock).map(|_| Vec::new());
    };
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    let csv_path = with_suffix(prefix, ".csv");
    table(&mut File::create(&csv_path)?)?;
    written.push(csv_path);

    let json_path = with_suffix(prefix, ".json");
    let text = serde_json::to_string_pretty(&summary(report)).map_err(io::Error::other)?;
    std::fs::write(&json_path, text + "\n")?;
    written.push(json_path);

    if let Some(h) = &report.histogram {
        for (suffix, values) in [
            (".pairwise.txt", &h.pairwise),
            (".truth.txt", &h.truth),
            (".distortion.txt", &h.distortion),
        ] {
            if values.is_empty() && suffix != ".pairwise.txt" {
                continue;
            }
            let path = with_suffix(prefix, suffix);
            write_samples(values, File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
