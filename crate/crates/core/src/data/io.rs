use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::Dataset;
use crate::error::{Error, Result};

/// On-disk dataset layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Comma-separated floats, label in the last column.
    Csv,
    /// `<label> idx:val ...` with 1-based indices.
    Libsvm,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
            other => Err(Error::Domain(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(text: &str, format: DataFormat) -> Result<Dataset> {
    let rows = match format {
        DataFormat::Csv => parse_csv(text)?,
        DataFormat::Libsvm => parse_libsvm(text)?,
    };
    let dim = rows.iter().map(|(x, _)| x.len()).max().unwrap_or(0);
    let mut features = Vec::with_capacity(rows.len() * dim);
    let mut labels = Vec::with_capacity(rows.len());
    for (mut x, y) in rows {
        x.resize(dim, 0.0);
        features.extend_from_slice(&x);
        labels.push(y);
    }
    Dataset::from_parts(features, labels, dim, None)
}

fn parse_label(raw: &str, line: usize) -> Result<i8> {
    let label_err = || Error::Label { line, value: raw.to_string() };
    let v: f64 = raw.trim().parse().map_err(|_| label_err())?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1)
    } else {
        Err(label_err())
    }
}

fn parse_value(raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("cannot parse {raw:?} as a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("non-finite value {raw:?}") });
    }
    Ok(v)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_csv(text: &str) -> Result<Vec<(Vec<f64>, i8)>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected at least one feature and a label".into(),
            });
        }
        let (label, xs) = fields.split_last().expect("non-empty");
        let x = xs.iter().map(|f| parse_value(f, line)).collect::<Result<Vec<_>>>()?;
        let y = parse_label(label, line)?;
        match width {
            None => width = Some(x.len()),
            Some(w) if w != x.len() => {
                return Err(Error::Dimension { expected: w, found: x.len() });
            }
            _ => {}
        }
        rows.push((x, y));
    }
    Ok(rows)
}

fn parse_libsvm(text: &str) -> Result<Vec<(Vec<f64>, i8)>> {
    let mut rows = Vec::new();
    for (line, l) in data_lines(text) {
        let mut tokens = l.split_whitespace();
        let y = parse_label(tokens.next().expect("non-empty line"), line)?;
        let mut x: Vec<f64> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse { line, message: "feature indices are 1-based".into() });
            }
            if x.len() < idx {
                x.resize(idx, 0.0);
            }
            x[idx - 1] = parse_value(val, line)?;
        }
        rows.push((x, y));
    }
    Ok(rows)
}

/// Writes `s` as CSV with the label in the last column.
///
/// Floats use Rust's shortest round-trip formatting, so output is
/// locale-independent and re-reads to identical values.
pub fn write_csv<W: Write>(s: &Dataset, mut out: W) -> Result<()> {
    let mut line = String::new();
    for p in s.iter() {
        line.clear();
        for v in p.x {
            line.push_str(&format!("{v},"));
        }
        line.push_str(if p.y > 0 { "1\n" } else { "-1\n" });
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_basic() {
        let s = parse_dataset("1.0,0.0,+1\n-1.0,0.0,-1", DataFormat::Csv).unwrap();
        assert_eq!((s.len(), s.dim(), s.norm_bound()), (2, 2, 1.0));
        assert_eq!(s.labels(), &[1, -1]);
    }

    #[test]
    fn libsvm_densifies() {
        let s = parse_dataset("+1 1:0.5 3:0.5\n0 2:1", DataFormat::Libsvm).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.point(0).x, &[0.5, 0.0, 0.5]);
        assert_eq!(s.point(0).y, 1);
        assert_eq!(s.point(1).x, &[0.0, 1.0, 0.0]);
        assert_eq!(s.point(1).y, -1);
    }

    #[test]
    fn zero_one_labels_map_to_signs() {
        let s = parse_dataset("0.5,1\n0.25,0\n", DataFormat::Csv).unwrap();
        assert_eq!(s.labels(), &[1, -1]);
    }

    #[test]
    fn label_out_of_range() {
        let err = parse_dataset("1.0,0.0,2\n1.0,1.0,1", DataFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Label { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_dataset("1.0,1\n1.0,abc,1\n", DataFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("1 1:1\n-1 2-3\n", DataFormat::Libsvm).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn inconsistent_csv_width() {
        let err = parse_dataset("1,2,1\n1,-1\n", DataFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, found: 1 }));
    }

    #[test]
    fn csv_round_trip() {
        let s = parse_dataset("0.1,-0.3333333333333333,1\n1e-7,2.5,-1\n", DataFormat::Csv).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let back = parse_dataset(std::str::from_utf8(&buf).unwrap(), DataFormat::Csv).unwrap();
        assert_eq!(s, back);
    }
}
