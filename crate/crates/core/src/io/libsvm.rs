//! LIBSVM sparse text format: `LABEL idx:val idx:val …`, 1-based indices
//! strictly increasing within a line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::problems::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmData {
    pub features: CsrMatrix,
    /// Each `±1`.
    pub labels: Vec<f64>,
}

pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<LibsvmData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm_reader(file, None).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses from a reader. The width is the largest index seen, or `n_features`
/// when that is larger.
pub fn parse_libsvm_reader(reader: impl Read, n_features: Option<usize>) -> Result<LibsvmData> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = n_features.unwrap_or(0);
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("bad label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(parse_err(format!("bad label `{label_tok}`")));
        }
        if !raw_labels.iter().any(|l| l == label_tok) && raw_labels.len() < 16 {
            raw_labels.push(label_tok.to_string());
        }
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("token `{tok}` is not idx:val")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad index in `{tok}`")))?;
            if idx == 0 {
                return Err(parse_err(format!("index must be positive in `{tok}`")));
            }
            if idx <= last {
                return Err(parse_err(format!("index {idx} does not increase past {last}")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("bad value in `{tok}`")))?;
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite value in `{tok}`")));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        width = width.max(last);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no samples".into(),
        });
    }
    let pos = labels.iter().filter(|l| **l > 0.0).count();
    log::info!(
        "labels {:?} mapped to ±1 (positive → +1, otherwise −1): {pos} positive, {} negative",
        raw_labels,
        labels.len() - pos
    );
    Ok(LibsvmData {
        features: CsrMatrix::from_rows(width, &rows)?,
        labels,
    })
}

pub fn write_libsvm(path: impl AsRef<Path>, data: &LibsvmData) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_libsvm_to(BufWriter::new(file), data).map_err(|e| Error::io(path, e))
}

/// Values are written in shortest round-trip form, so parsing back is exact.
pub fn write_libsvm_to(mut w: impl Write, data: &LibsvmData) -> std::io::Result<()> {
    for (i, label) in data.labels.iter().enumerate() {
        write!(w, "{}", if *label > 0.0 { "+1" } else { "-1" })?;
        let (cols, vals) = data.features.row(i);
        for (c, v) in cols.iter().zip(vals) {
            write!(w, " {}:{v:?}", c + 1)?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<LibsvmData> {
        parse_libsvm_reader(s.as_bytes(), None)
    }

    #[test]
    fn single_line() {
        let d = parse("1 3:0.5 7:-1.2\n").unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.features.cols(), 7);
        assert_eq!(d.features.row(0), (&[2usize, 6][..], &[0.5, -1.2][..]));
    }

    #[test]
    fn featureless_line_and_label_mapping() {
        let d = parse("-1\n0 1:2\n2 2:1\n").unwrap();
        assert_eq!(d.labels, vec![-1.0, -1.0, 1.0]);
        assert_eq!(d.features.row(0).0.len(), 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("1 1:1\n1 2:x\n", 2),
            ("1 0:1\n", 1),
            ("1 1:1\n\n1 3:1 2:1\n", 3),
            ("1 3:1 3:2\n", 1),
            ("abc 1:1\n", 1),
            ("1 12\n", 1),
        ] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![vec![(0, 0.1), (4, -3.3e-17)], vec![], vec![(2, 1e300), (3, 7.0)]];
        let d = LibsvmData {
            features: CsrMatrix::from_rows(5, &rows).unwrap(),
            labels: vec![1.0, -1.0, 1.0],
        };
        let mut buf = Vec::new();
        write_libsvm_to(&mut buf, &d).unwrap();
        let back = parse_libsvm_reader(&buf[..], Some(5)).unwrap();
        assert_eq!(back, d);
    }
}
