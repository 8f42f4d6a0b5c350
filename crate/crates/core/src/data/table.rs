//! Shared preprocessing pipeline for CSV and ARFF sources: label mapping,
//! type inference, mean imputation, one-hot encoding and z-scoring.

use std::collections::BTreeSet;

use ndarray::Array2;

use super::{Dataset, Standardizer};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ColumnKind {
    /// Numeric if every present value parses as a finite number.
    Infer,
    Numeric,
    /// Categorical with declared levels (one-hot column order).
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
pub(crate) struct RawTable {
    pub headers: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    /// `None` marks a missing cell.
    pub rows: Vec<Vec<Option<String>>>,
    /// Source line number of each row, for error messages.
    pub lines: Vec<u64>,
}

pub(crate) fn is_missing(token: &str) -> bool {
    matches!(token, "" | "?" | "NA" | "NaN" | "nan" | "null" | "NULL")
}

pub(crate) fn cell(token: &str) -> Option<String> {
    let t = token.trim();
    if is_missing(t) {
        None
    } else {
        Some(t.to_string())
    }
}

enum Encoded {
    Numeric(Vec<Option<f64>>),
    Categorical { levels: Vec<String>, codes: Vec<Option<usize>> },
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Sorts label values numerically when they are all numbers, otherwise
/// lexicographically.
fn sorted_levels(values: impl IntoIterator<Item = String>) -> Vec<String> {
    let unique: BTreeSet<String> = values.into_iter().collect();
    let mut levels: Vec<String> = unique.into_iter().collect();
    if levels.iter().all(|v| parse_number(v).is_some()) {
        levels.sort_by(|a, b| {
            parse_number(a)
                .unwrap()
                .total_cmp(&parse_number(b).unwrap())
                .then_with(|| a.cmp(b))
        });
    }
    levels
}

pub(crate) fn encode(
    name: &str,
    table: RawTable,
    label_column: &str,
    ignore: &[String],
) -> Result<Dataset> {
    let label_idx = table
        .headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Validation(format!("label column '{label_column}' not found")))?;

    let kept: Vec<usize> = (0..table.rows.len())
        .filter(|&r| table.rows[r][label_idx].is_some())
        .collect();
    if kept.is_empty() {
        return Err(Error::Validation("no rows with a label".into()));
    }

    let class_names = sorted_levels(
        kept.iter()
            .map(|&r| table.rows[r][label_idx].clone().unwrap()),
    );
    if class_names.len() < 2 {
        return Err(Error::Validation(format!(
            "label column '{label_column}' has a single class"
        )));
    }
    let labels: Vec<usize> = kept
        .iter()
        .map(|&r| {
            let v = table.rows[r][label_idx].as_ref().unwrap();
            class_names.iter().position(|c| c == v).unwrap()
        })
        .collect();

    let mut columns: Vec<(String, Encoded)> = Vec::new();
    for (j, header) in table.headers.iter().enumerate() {
        if j == label_idx || ignore.iter().any(|i| i == header) {
            continue;
        }
        let values: Vec<Option<&str>> = kept
            .iter()
            .map(|&r| table.rows[r][j].as_deref())
            .collect();
        let encoded = match &table.kinds[j] {
            ColumnKind::Numeric => {
                let mut out = Vec::with_capacity(values.len());
                for (pos, v) in values.iter().enumerate() {
                    out.push(match v {
                        None => None,
                        Some(s) => Some(parse_number(s).ok_or_else(|| Error::Parse {
                            line: table.lines[kept[pos]],
                            message: format!("non-numeric value '{s}' in numeric column '{header}'"),
                        })?),
                    });
                }
                Encoded::Numeric(out)
            }
            ColumnKind::Nominal(levels) => {
                let mut codes = Vec::with_capacity(values.len());
                for (pos, v) in values.iter().enumerate() {
                    codes.push(match v {
                        None => None,
                        Some(s) => Some(levels.iter().position(|l| l == s).ok_or_else(|| {
                            Error::Parse {
                                line: table.lines[kept[pos]],
                                message: format!("undeclared level '{s}' in column '{header}'"),
                            }
                        })?),
                    });
                }
                Encoded::Categorical {
                    levels: levels.clone(),
                    codes,
                }
            }
            ColumnKind::Infer => {
                let numeric: Vec<Option<Option<f64>>> = values
                    .iter()
                    .map(|v| match v {
                        None => Some(None),
                        Some(s) => parse_number(s).map(Some),
                    })
                    .collect();
                if numeric.iter().all(Option::is_some) {
                    Encoded::Numeric(numeric.into_iter().map(Option::unwrap).collect())
                } else {
                    let levels = sorted_levels(values.iter().flatten().map(|s| s.to_string()));
                    let codes = values
                        .iter()
                        .map(|v| v.map(|s| levels.iter().position(|l| l == s).unwrap()))
                        .collect();
                    Encoded::Categorical { levels, codes }
                }
            }
        };
        columns.push((header.clone(), encoded));
    }

    let n = kept.len();
    let mut feature_names = Vec::new();
    let mut raw_columns: Vec<Vec<f64>> = Vec::new();
    for (header, enc) in columns {
        match enc {
            Encoded::Numeric(vals) => {
                let present: Vec<f64> = vals.iter().flatten().copied().collect();
                let mean = if present.is_empty() {
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                };
                raw_columns.push(vals.iter().map(|v| v.unwrap_or(mean)).collect());
                feature_names.push(header);
            }
            Encoded::Categorical { levels, codes } => {
                let observed = codes.iter().flatten().count().max(1) as f64;
                for (l, level) in levels.iter().enumerate() {
                    let freq = codes.iter().filter(|c| **c == Some(l)).count() as f64 / observed;
                    raw_columns.push(
                        codes
                            .iter()
                            .map(|c| match c {
                                Some(code) => f64::from(u8::from(*code == l)),
                                None => freq,
                            })
                            .collect(),
                    );
                    feature_names.push(format!("{header}={level}"));
                }
            }
        }
    }
    if raw_columns.is_empty() {
        return Err(Error::Validation("no feature columns besides the label".into()));
    }

    let d = raw_columns.len();
    let mut x = Array2::<f64>::zeros((n, d));
    for (j, col) in raw_columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    let features = Standardizer::fit(&x, &[]).transform(&x);
    let n_classes = class_names.len();
    Dataset::new(name, features, labels, n_classes, feature_names, class_names)
}
