//! Dense ARFF reader covering numeric, nominal and string attributes.

use std::path::Path;

use super::table::{cell, encode, ColumnKind, RawTable};
use super::Dataset;
use crate::{Error, Result};

pub fn load_arff(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arff(&text, label_column, &[])
}

/// Parses ARFF text. The relation name becomes the dataset name; columns in
/// `ignore` are dropped before encoding.
pub fn parse_arff(text: &str, label_column: &str, ignore: &[String]) -> Result<Dataset> {
    let (relation, table) = read_table(text)?;
    encode(&relation, table, label_column, ignore)
}

/// Splits on commas (or whitespace when `ws` is set) outside quotes and
/// strips one level of `'` or `"` quoting.
fn tokenize(line: &str, line_no: u64, ws: bool) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    let mut chars = line.chars().peekable();
    let is_sep = |c: char| if ws { c.is_whitespace() } else { c == ',' };
    while let Some(c) = chars.next() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) if c == '\\' => {
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            Some(_) => cur.push(c),
            None if c == '\'' || c == '"' => {
                quote = Some(c);
                was_quoted = true;
            }
            None if is_sep(c) => {
                if !ws || !cur.is_empty() || was_quoted {
                    out.push(if was_quoted { cur.clone() } else { cur.trim().to_string() });
                }
                cur.clear();
                was_quoted = false;
            }
            None => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err(Error::Parse {
            line: line_no,
            message: "unterminated quote".into(),
        });
    }
    if !ws || !cur.is_empty() || was_quoted {
        out.push(if was_quoted { cur } else { cur.trim().to_string() });
    }
    Ok(out)
}

fn parse_attribute(rest: &str, line_no: u64) -> Result<(String, ColumnKind)> {
    let rest = rest.trim();
    let (name, ty) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let end = rest[1..].find(q).ok_or_else(|| Error::Parse {
            line: line_no,
            message: "unterminated attribute name".into(),
        })?;
        (rest[1..1 + end].to_string(), rest[end + 2..].trim())
    } else {
        let mut parts = rest.splitn(2, char::is_whitespace);
        let name = parts.next().unwrap_or_default().to_string();
        (name, parts.next().unwrap_or_default().trim())
    };
    let lower = ty.to_ascii_lowercase();
    let kind = if ty.starts_with('{') {
        let inner = ty
            .strip_prefix('{')
            .and_then(|s| s.trim_end().strip_suffix('}'))
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("malformed nominal specification for '{name}'"),
            })?;
        ColumnKind::Nominal(tokenize(inner, line_no, false)?)
    } else if ["numeric", "real", "integer"].contains(&lower.as_str()) {
        ColumnKind::Numeric
    } else if lower == "string" || lower.starts_with("date") {
        ColumnKind::Infer
    } else if lower.starts_with("relational") {
        return Err(Error::UnsupportedFormat(format!(
            "relational attribute '{name}' at line {line_no}"
        )));
    } else {
        return Err(Error::Parse {
            line: line_no,
            message: format!("unknown attribute type '{ty}'"),
        });
    };
    Ok((name, kind))
}

fn read_table(text: &str) -> Result<(String, RawTable)> {
    let mut relation = String::from("dataset");
    let mut headers = Vec::new();
    let mut kinds = Vec::new();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut in_data = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if let Some(rest) = lower.strip_prefix("@relation") {
                let original = &line[line.len() - rest.len()..];
                relation = tokenize(original.trim(), line_no, true)?
                    .into_iter()
                    .next()
                    .unwrap_or(relation);
            } else if lower.starts_with("@attribute") {
                let (name, kind) = parse_attribute(&line["@attribute".len()..], line_no)?;
                headers.push(name);
                kinds.push(kind);
            } else if lower.starts_with("@data") {
                in_data = true;
            } else if lower.starts_with("@end") {
                return Err(Error::UnsupportedFormat(format!(
                    "relational block end at line {line_no}"
                )));
            } else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unexpected header line '{line}'"),
                });
            }
            continue;
        }
        if line.starts_with('{') {
            return Err(Error::UnsupportedFormat(format!(
                "sparse ARFF row at line {line_no}"
            )));
        }
        let values = tokenize(line, line_no, false)?;
        if values.len() != headers.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} values, found {}", headers.len(), values.len()),
            });
        }
        rows.push(values.iter().map(|v| cell(v)).collect());
        lines.push(line_no);
    }
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no @attribute declarations".into(),
        });
    }
    Ok((
        relation,
        RawTable {
            headers,
            kinds,
            rows,
            lines,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "% comment\n@relation 'toy-set'\n@attribute a numeric\n@attribute 'b c' {x, y, z}\n@attribute class {neg,pos}\n@data\n1.0,x,neg\n2.0,'y',pos\n?,z,neg\n4.0,x,pos\n";

    #[test]
    fn parses_dense_arff() {
        let ds = parse_arff(SMALL, "class", &[]).unwrap();
        assert_eq!(ds.name, "toy-set");
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.feature_names[1], "b c=x");
        assert_eq!(ds.labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn ignored_columns_are_dropped() {
        let ds = parse_arff(SMALL, "class", &["a".to_string()]).unwrap();
        assert_eq!(ds.n_features(), 3);
    }

    #[test]
    fn relational_attributes_are_unsupported() {
        let text = "@relation r\n@attribute bag relational\n@attribute x numeric\n@end bag\n@attribute c {a,b}\n@data\n";
        assert!(matches!(
            parse_arff(text, "c", &[]),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn sparse_rows_are_unsupported() {
        let text = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n@data\n{0 1, 1 a}\n";
        assert!(matches!(
            parse_arff(text, "c", &[]),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn wrong_arity_reports_line() {
        let text = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n@data\n1,a\n2\n";
        match parse_arff(text, "c", &[]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
