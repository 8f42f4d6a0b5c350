use std::io::Read;
use std::path::Path;

use super::table::{cell, encode, ColumnKind, RawTable};
use super::Dataset;
use crate::{Error, Result};

/// Loads a headered CSV file. The dataset is named after the file stem.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_csv(&name, file, label_column)
}

pub fn parse_csv(name: &str, reader: impl Read, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let to_parse = |e: csv::Error| Error::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    };
    let headers: Vec<String> = rdr
        .headers()
        .map_err(to_parse)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(to_parse)?;
        lines.push(record.position().map(|p| p.line()).unwrap_or(0));
        rows.push(record.iter().map(cell).collect());
    }
    let table = RawTable {
        kinds: vec![ColumnKind::Infer; headers.len()],
        headers,
        rows,
        lines,
    };
    encode(name, table, label_column, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_labels_by_sorted_value() {
        let csv = "x,y\n1,a\n2,b\n3,a\n4,b\n";
        let ds = parse_csv("t", csv.as_bytes(), "y").unwrap();
        assert_eq!(ds.n_classes, 2);
        assert_eq!(ds.labels, vec![0, 1, 0, 1]);
        assert_eq!(ds.class_names, vec!["a", "b"]);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let csv = "x,y\n1,10\n2,9\n3,10\n";
        let ds = parse_csv("t", csv.as_bytes(), "y").unwrap();
        assert_eq!(ds.labels, vec![1, 0, 1]);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let csv = "c,x,y\n5,1,a\n5,2,b\n5,3,a\n";
        let ds = parse_csv("t", csv.as_bytes(), "y").unwrap();
        assert!(ds.features.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_hot_matches_hand_encoding() {
        // 5 rows, one numeric and one 3-level categorical column.
        let csv = "num,cat,y\n1,red,p\n2,green,q\n3,blue,p\n4,red,q\n5,red,p\n";
        let ds = parse_csv("t", csv.as_bytes(), "y").unwrap();
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.feature_names, vec!["num", "cat=blue", "cat=green", "cat=red"]);

        let zscore = |col: &[f64]| -> Vec<f64> {
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            col.iter().map(|v| (v - m) / s).collect()
        };
        let expected = [
            zscore(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            zscore(&[0.0, 0.0, 1.0, 0.0, 0.0]),
            zscore(&[0.0, 1.0, 0.0, 0.0, 0.0]),
            zscore(&[1.0, 0.0, 0.0, 1.0, 1.0]),
        ];
        for (j, col) in expected.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                assert!((ds.features[[i, j]] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_values_are_mean_imputed_and_unlabeled_rows_dropped() {
        let csv = "x,y\n1,a\n?,b\n3,a\n7,\n";
        let ds = parse_csv("t", csv.as_bytes(), "y").unwrap();
        assert_eq!(ds.n_rows(), 3);
        // Imputed value equals the column mean, which standardizes to 0.
        assert!(ds.features[[1, 0]].abs() < 1e-12);
    }

    #[test]
    fn single_class_is_rejected() {
        let csv = "x,y\n1,a\n2,a\n";
        assert!(matches!(
            parse_csv("t", csv.as_bytes(), "y"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "x,y\n1,a\n2,b,extra\n";
        match parse_csv("t", csv.as_bytes(), "y") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
