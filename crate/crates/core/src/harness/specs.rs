//! Textual operator and sequence specs accepted by the command line.
//!
//! Operators: `identity:M`, `shift-left`, `shift-right`, `perm:2,3,1`
//! (1-based images), `swap:I:J:M`, `random:M:SEED[:DENSITY[:signed]]`,
//! `matrix:FILE` (dense text, one row per line) and `json:FILE` (serialized
//! operator).
//!
//! Sequences: comma-separated values with an optional `;const=C` or
//! `;bounded=B` tail, `ones`, `e:K` (basis vector) and `json:FILE`.

use std::fs;
use std::path::Path;

use super::HarnessError;
use crate::dsop::{random_ds, DsOperator, SignMode};
use crate::seqcore::{Tail, TruncatedSequence};
use crate::sparse::SparseMatrix;

fn spec_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Spec(msg.into())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, HarnessError> {
    s.trim().parse().map_err(|_| spec_err(format!("invalid {what}: {s:?}")))
}

pub fn parse_operator(spec: &str) -> Result<DsOperator, HarnessError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let wrap = |e: crate::dsop::DsError| spec_err(format!("{spec}: {e}"));
    match head {
        "identity" => Ok(DsOperator::identity(num(rest, "dimension")?)),
        "shift-left" => Ok(DsOperator::shift_left()),
        "shift-right" => Ok(DsOperator::shift_right()),
        "perm" => {
            let images = rest.split(',').map(|v| num(v, "permutation image")).collect::<Result<Vec<usize>, _>>()?;
            DsOperator::permutation(&images).map_err(wrap)
        }
        "swap" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(spec_err("expected swap:I:J:M"));
            }
            DsOperator::transposition(num(parts[0], "index")?, num(parts[1], "index")?, num(parts[2], "dimension")?)
                .map_err(wrap)
        }
        "random" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if !(2..=4).contains(&parts.len()) {
                return Err(spec_err("expected random:M:SEED[:DENSITY[:signed]]"));
            }
            let dim: usize = num(parts[0], "dimension")?;
            let seed: u64 = num(parts[1], "seed")?;
            let density: f64 = parts.get(2).map_or(Ok(0.5), |d| num(d, "density"))?;
            let sign = match parts.get(3) {
                None | Some(&"nonnegative") => SignMode::Nonnegative,
                Some(&"signed") => SignMode::Signed,
                Some(other) => return Err(spec_err(format!("unknown sign mode {other:?}"))),
            };
            if dim == 0 || !(density > 0.0 && density <= 1.0) {
                return Err(spec_err("random operators need dim >= 1 and density in (0, 1]"));
            }
            Ok(random_ds(dim, density, sign, seed))
        }
        "matrix" => {
            let matrix = load_dense_matrix(Path::new(rest))?;
            crate::dsop::certify_ds(matrix, crate::dsop::ARITHMETIC_SLACK).map_err(wrap)
        }
        "json" => Ok(serde_json::from_str(&fs::read_to_string(rest)?)?),
        _ => Err(spec_err(format!("unknown operator spec {spec:?}"))),
    }
}

pub fn parse_sequence(spec: &str) -> Result<TruncatedSequence, HarnessError> {
    if spec == "ones" {
        return Ok(TruncatedSequence::ones());
    }
    if let Some(k) = spec.strip_prefix("e:") {
        let k: usize = num(k, "basis index")?;
        if k == 0 {
            return Err(spec_err("basis indices are 1-based"));
        }
        return Ok(TruncatedSequence::basis(k));
    }
    if let Some(path) = spec.strip_prefix("json:") {
        return Ok(serde_json::from_str(&fs::read_to_string(path)?)?);
    }
    let (body, tail) = spec.split_once(';').unwrap_or((spec, ""));
    let tail = match tail.split_once('=') {
        None if tail.is_empty() => Tail::Zero,
        Some(("const", c)) => Tail::Constant(num(c, "tail constant")?),
        Some(("bounded", b)) => Tail::Bounded(num(b, "tail bound")?),
        _ => return Err(spec_err(format!("unknown tail {tail:?}"))),
    };
    let values = if body.trim().is_empty() {
        Vec::new()
    } else {
        body.split(',').map(|v| num(v, "value")).collect::<Result<Vec<f64>, _>>()?
    };
    TruncatedSequence::new(values, tail).map_err(|e| spec_err(e.to_string()))
}

/// Parses a dense square matrix: one row per line, entries separated by
/// whitespace or commas, `#` starts a comment.
pub fn parse_dense_matrix(text: &str) -> Result<SparseMatrix, HarnessError> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| num(t, "matrix entry"))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(spec_err("empty matrix"));
    }
    SparseMatrix::from_dense(&rows).map_err(|e| spec_err(e.to_string()))
}

pub fn load_dense_matrix(path: &Path) -> Result<SparseMatrix, HarnessError> {
    parse_dense_matrix(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_specs() {
        assert_eq!(parse_operator("identity:3").unwrap().dim(), Some(3));
        assert_eq!(parse_operator("shift-left").unwrap(), DsOperator::shift_left());
        let perm = parse_operator("perm:2,1").unwrap();
        let y = perm.apply(&TruncatedSequence::finite(vec![1.0, 2.0])).unwrap();
        assert_eq!(y.values(), &[2.0, 1.0]);
        assert_eq!(parse_operator("swap:1:2:2").unwrap(), perm);
        assert_eq!(parse_operator("random:4:7").unwrap(), random_ds(4, 0.5, SignMode::Nonnegative, 7));
        assert_eq!(parse_operator("random:4:7:1:signed").unwrap(), random_ds(4, 1.0, SignMode::Signed, 7));
        for bad in ["identity:x", "perm:1,1", "random:4", "random:4:1:0", "nope", "swap:1:2"] {
            assert!(parse_operator(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sequence_specs() {
        let x = parse_sequence("1,-2.5;const=0.5").unwrap();
        assert_eq!(x.values(), &[1.0, -2.5]);
        assert_eq!(x.tail(), Tail::Constant(0.5));
        assert_eq!(parse_sequence("3;bounded=0.1").unwrap().tail(), Tail::Bounded(0.1));
        assert_eq!(parse_sequence("ones").unwrap(), TruncatedSequence::ones());
        assert_eq!(parse_sequence("e:2").unwrap(), TruncatedSequence::basis(2));
        assert_eq!(parse_sequence(";const=1").unwrap(), TruncatedSequence::ones());
        for bad in ["1,a", "1;tail=2", "e:0", "1;bounded=-1"] {
            assert!(parse_sequence(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn dense_matrix_text() {
        let m = parse_dense_matrix("# swap\n0 1\n1, 0\n").unwrap();
        assert_eq!(m.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(parse_dense_matrix("1 0\n0").is_err());
        assert!(parse_dense_matrix("").is_err());
    }
}
