//! Parsing of `--cost` and `--eval-cost` values.

use std::path::PathBuf;
use std::str::FromStr;

use badacost::data_io::read_cost_matrix;
use badacost::{CostMatrix, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum CostSpec {
    File(PathBuf),
    ZeroOne(f64),
    Samme,
    Detection(f64),
    Circular { fp: f64, fn_: f64, view: f64 },
    ImbalanceAuto,
}

fn numbers(s: &str, expected: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number '{v}' in {what}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!("{what} takes {expected} value(s), got {}", values.len()));
    }
    Ok(values)
}

impl FromStr for CostSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("zero-one", None) => Ok(CostSpec::ZeroOne(1.0)),
            ("zero-one", Some(r)) => Ok(CostSpec::ZeroOne(numbers(r, 1, "zero-one")?[0])),
            ("samme", None) => Ok(CostSpec::Samme),
            ("detection", Some(r)) => Ok(CostSpec::Detection(numbers(r, 1, "detection")?[0])),
            ("circular", Some(r)) => {
                let v = numbers(r, 3, "circular")?;
                Ok(CostSpec::Circular { fp: v[0], fn_: v[1], view: v[2] })
            }
            ("imbalance-auto", None) => Ok(CostSpec::ImbalanceAuto),
            ("file", Some(path)) if !path.is_empty() => Ok(CostSpec::File(path.into())),
            ("detection" | "circular" | "file", None) => Err(format!("'{head}' needs a value after ':'")),
            _ if s.ends_with(".csv") => Ok(CostSpec::File(s.into())),
            _ => Err(format!(
                "unknown cost source '{s}' (expected file:PATH, zero-one[:SCALE], samme, \
                 detection:BETA, circular:FP,FN,VIEW or imbalance-auto)"
            )),
        }
    }
}

impl CostSpec {
    /// The matrix for `k` classes, or `None` for [`CostSpec::ImbalanceAuto`].
    pub fn matrix(&self, k: usize) -> Result<Option<CostMatrix>> {
        let c = match self {
            CostSpec::File(path) => read_cost_matrix(path)?,
            CostSpec::ZeroOne(scale) => CostMatrix::zero_one(k, *scale)?,
            CostSpec::Samme => CostMatrix::samme(k)?,
            CostSpec::Detection(beta) => CostMatrix::detection(k.saturating_sub(1), *beta)?,
            CostSpec::Circular { fp, fn_, view } => {
                CostMatrix::circular_view(k.saturating_sub(1), *fp, *fn_, *view)?
            }
            CostSpec::ImbalanceAuto => return Ok(None),
        };
        Ok(Some(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        assert_eq!("zero-one".parse(), Ok(CostSpec::ZeroOne(1.0)));
        assert_eq!("zero-one:0.5".parse(), Ok(CostSpec::ZeroOne(0.5)));
        assert_eq!("samme".parse(), Ok(CostSpec::Samme));
        assert_eq!("detection:2".parse(), Ok(CostSpec::Detection(2.0)));
        assert_eq!(
            "circular:1,2, 0.5".parse(),
            Ok(CostSpec::Circular { fp: 1.0, fn_: 2.0, view: 0.5 })
        );
        assert_eq!("imbalance-auto".parse(), Ok(CostSpec::ImbalanceAuto));
        assert_eq!("file:c.txt".parse(), Ok(CostSpec::File("c.txt".into())));
        assert_eq!("costs/c.csv".parse(), Ok(CostSpec::File("costs/c.csv".into())));
        for bad in ["", "detection", "circular:1,2", "zero-one:x", "file:", "nope"] {
            assert!(bad.parse::<CostSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builds_matrices() {
        let c = CostSpec::Detection(3.0).matrix(3).unwrap().unwrap();
        assert_eq!(c.get(1, 0), 3.0);
        assert_eq!(c.get(0, 2), 1.0);
        assert_eq!(CostSpec::Samme.matrix(4).unwrap().unwrap().get(0, 1), 1.0 / 12.0);
        assert!(CostSpec::ImbalanceAuto.matrix(3).unwrap().is_none());
        assert!(CostSpec::Circular { fp: 1.0, fn_: 1.0, view: 1.0 }.matrix(3).is_err());
    }
}
