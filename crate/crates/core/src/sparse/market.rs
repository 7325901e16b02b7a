use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::SparseSymMatrix;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

pub fn load_matrix_market<P: AsRef<Path>>(path: P) -> Result<SparseSymMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_matrix_market(BufReader::new(file))
}

/// Parses a coordinate Matrix Market stream.
///
/// `symmetric` files are mirrored from whichever triangle they store;
/// `general` files must be exactly symmetric after duplicate summation.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseSymMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = match lines.next() {
        Some((no, line)) => (no, line.map_err(|e| parse_err(no, e.to_string()))?),
        None => return Err(parse_err(1, "empty file")),
    };
    let symmetric = parse_header(line_no, &header)?;

    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    for (no, line) in lines {
        let line = line.map_err(|e| parse_err(no, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        match size {
            None => {
                let rows = parse_usize(no, fields.next(), "row count")?;
                let cols = parse_usize(no, fields.next(), "column count")?;
                let nnz = parse_usize(no, fields.next(), "entry count")?;
                if rows != cols {
                    return Err(Error::UnsupportedFormat(format!("non-square matrix {rows}x{cols}")));
                }
                if rows == 0 {
                    return Err(parse_err(no, "dimension must be positive"));
                }
                size = Some((rows, nnz));
                entries.reserve(nnz);
            }
            Some((n, _)) => {
                let i = parse_usize(no, fields.next(), "row index")?;
                let j = parse_usize(no, fields.next(), "column index")?;
                let v: f64 = match fields.next() {
                    Some(tok) => tok.parse().map_err(|_| parse_err(no, format!("invalid value `{tok}`")))?,
                    None => return Err(parse_err(no, "missing value")),
                };
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(parse_err(no, format!("index ({i}, {j}) outside 1..={n}")));
                }
                entries.push((i - 1, j - 1, v));
            }
        }
    }

    let (n, nnz) = size.ok_or_else(|| parse_err(line_no, "missing size line"))?;
    if entries.len() != nnz {
        return Err(parse_err(
            line_no,
            format!("size line declares {nnz} entries, found {}", entries.len()),
        ));
    }
    if symmetric {
        SparseSymMatrix::from_lower_triplets(n, entries)
    } else {
        SparseSymMatrix::from_full_triplets(n, entries)
    }
}

/// Returns whether the header declares symmetric storage.
fn parse_header(line_no: usize, header: &str) -> Result<bool> {
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(line_no, "expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    if tokens[1] != "matrix" {
        return Err(Error::UnsupportedFormat(format!("object `{}`", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("storage `{}`", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(Error::UnsupportedField(other.to_string())),
    }
    match tokens[4].as_str() {
        "symmetric" => Ok(true),
        "general" => Ok(false),
        other => Err(Error::UnsupportedFormat(format!("symmetry `{other}`"))),
    }
}

fn parse_usize(line: usize, tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Writes the lower triangle with a `real symmetric` header. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_matrix_market<W: Write>(matrix: &SparseSymMatrix, mut out: W) -> std::io::Result<()> {
    let n = matrix.dim();
    let lower: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| matrix.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
        .collect();
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{n} {n} {}", lower.len())?;
    for (i, j, v) in lower {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<SparseSymMatrix> {
        read_matrix_market(text.as_bytes())
    }

    #[test]
    fn symmetric_lower_is_mirrored() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2\n2 1 -1\n").unwrap();
        assert_eq!(m.to_dense(), vec![2.0, -1.0, -1.0, 0.0]);
        // (2,2) was not listed but is materialized
        assert_eq!(m.nnz(), 4);
    }

    #[test]
    fn one_by_one_identity() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 1\n").unwrap();
        assert_eq!(m, SparseSymMatrix::identity(1));
    }

    #[test]
    fn integer_field_is_promoted() {
        let m = parse("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 1 3\n1 2 1\n2 1 1\n").unwrap();
        assert_eq!(m.to_dense(), vec![3.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1\n1 1 1.5\n2 2 1\n").unwrap();
        assert_eq!(m.get(0, 0), 2.5);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n"),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n"),
            Err(Error::UnsupportedField(_))
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate pattern symmetric\n1 1 1\n1 1\n"),
            Err(Error::UnsupportedField(_))
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 1\n"),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(parse("garbage\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 x 1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(load_matrix_market("/nonexistent/file.mtx"), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn write_then_read_is_value_identical(
            n in 1usize..12,
            raw in proptest::collection::vec((0usize..12, 0usize..12, -1e6f64..1e6), 0..40),
        ) {
            let entries = raw.into_iter().map(|(i, j, v)| (i % n, j % n, v * 1.234567e-3));
            let m = SparseSymMatrix::from_lower_triplets(n, entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market(&m, &mut buf).unwrap();
            let back = read_matrix_market(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
