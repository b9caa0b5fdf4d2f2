//! CSV datasets: one point per row, optional trailing label column announced
//! by a leading `# has_labels=true` line. Further `#` lines are kept as
//! provenance in `source_meta`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::DataMatrix;
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

const LABEL_FLAG: &str = "has_labels=";

struct Header {
    has_labels: bool,
    comments: Vec<String>,
}

fn scan_header(text: &str) -> Header {
    let mut has_labels = false;
    let mut comments = Vec::new();
    for line in text.lines() {
        let Some(body) = line.trim_start().strip_prefix('#') else {
            if line.trim().is_empty() {
                continue;
            }
            break;
        };
        let body = body.trim();
        if let Some(flag) = body.strip_prefix(LABEL_FLAG) {
            has_labels = flag.trim().eq_ignore_ascii_case("true");
        } else if !body.is_empty() {
            comments.push(body.to_string());
        }
    }
    Header {
        has_labels,
        comments,
    }
}

/// Reads a row-per-point CSV into a column-per-point [`DataMatrix`].
pub fn read_csv(path: &Path) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = scan_header(&text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::parse(
                path,
                format!(
                    "line {line}: expected {expected} fields, found {}",
                    record.len()
                ),
            ));
        }
        let n_values = if header.has_labels {
            if expected < 2 {
                return Err(Error::parse(
                    path,
                    format!("line {line}: no value columns before the label"),
                ));
            }
            let raw = &record[expected - 1];
            let label: usize = raw.parse().map_err(|_| {
                Error::parse(
                    path,
                    format!("line {line}: label `{raw}` is not a non-negative integer"),
                )
            })?;
            labels.push(label);
            expected - 1
        } else {
            expected
        };
        let row = record
            .iter()
            .take(n_values)
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::parse(
                            path,
                            format!(
                                "line {line}, field {}: `{cell}` is not a finite number",
                                col + 1
                            ),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(row);
    }
    if points.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    let m1 = points[0].len();
    let data = DenseMatrix::from_fn(m1, points.len(), |i, j| points[j][i])?;
    let labels = header.has_labels.then_some(labels);
    let mut meta = format!("csv:{}", path.display());
    for c in &header.comments {
        meta.push('\n');
        meta.push_str(c);
    }
    DataMatrix::new(data, labels, meta)
}

/// Writes `d` row-per-point with 17 significant digits, so [`read_csv`]
/// recovers every value bit for bit. `comments` become `#` header lines.
pub fn write_csv(path: &Path, d: &DataMatrix, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# {LABEL_FLAG}{}\n", d.labels.is_some()));
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let (m1, m2) = d.data.shape();
    for j in 0..m2 {
        let col = d.data.column(j);
        for (i, v) in col.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        debug_assert_eq!(col.len(), m1);
        if let Some(l) = &d.labels {
            out.push_str(&format!(",{}", l[j]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes one label per line under a `label` header, preceded by `#` comments.
pub fn write_labels(path: &Path, labels: &[usize], comments: &[String]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("label\n");
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a label file written by [`write_labels`] (the `label` header is optional).
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "label" {
            continue;
        }
        let v = line
            .parse()
            .map_err(|_| Error::parse(path, format!("line {}: `{line}` is not a label", n + 1)))?;
        labels.push(v);
    }
    Ok(labels)
}
