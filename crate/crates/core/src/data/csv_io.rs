use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use super::{Column, ColumnKind, Dataset, Matrix, Task};
use crate::error::{Error, Result};

/// Distinct integer-like targets at or below this count are read as class labels.
const CLASSIFICATION_MAX_DISTINCT: usize = 20;

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Loads a headered CSV file, encoding categoricals by descending frequency and
/// imputing missing values (median for numeric, mode for categorical).
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Option<Task>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from_reader(file, target_column, task)
}

pub fn load_csv_from_reader<R: Read>(
    reader: R,
    target_column: &str,
    task: Option<Task>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::data("empty file: no header row"));
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec?;
        if is_missing(rec.get(target_idx).unwrap_or("")) {
            log::warn!("dropping row with missing target");
            continue;
        }
        for (j, field) in rec.iter().enumerate() {
            raw[j].push(field.to_string());
        }
    }
    let n = raw[target_idx].len();
    if n == 0 {
        return Err(Error::data("empty file: no data rows"));
    }

    let mut columns = Vec::new();
    let mut encoded: Vec<Vec<f64>> = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let (col, values) = encode_feature(name, &raw[j])?;
        columns.push(col);
        encoded.push(values);
    }
    if columns.is_empty() {
        return Err(Error::data("no feature columns besides the target"));
    }

    let p = columns.len();
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        for col in &encoded {
            data.push(col[i]);
        }
    }
    let (target, task, class_labels) = encode_target(target_column, &raw[target_idx], task)?;
    let d = Dataset {
        features: Matrix::new(n, p, data)?,
        target,
        task,
        columns,
        target_name: target_column.to_string(),
        class_labels,
    };
    d.validate()?;
    Ok(d)
}

fn encode_feature(name: &str, raw: &[String]) -> Result<(Column, Vec<f64>)> {
    let present: Vec<&str> = raw.iter().map(|s| s.trim()).filter(|s| !is_missing(s)).collect();
    if present.is_empty() {
        return Err(Error::data(format!("column `{name}` has no non-missing values")));
    }
    let parsed: Option<Vec<f64>> = present
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    if let Some(mut vals) = parsed {
        vals.sort_by(f64::total_cmp);
        let m = vals.len();
        let median = if m % 2 == 1 {
            vals[m / 2]
        } else {
            0.5 * (vals[m / 2 - 1] + vals[m / 2])
        };
        let values = raw
            .iter()
            .map(|s| if is_missing(s) { median } else { s.trim().parse().unwrap() })
            .collect();
        return Ok((Column::numeric(name), values));
    }
    let categories = frequency_order(&present);
    let code: HashMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(c, s)| (s.as_str(), c))
        .collect();
    // Code 0 is the mode, which is also the imputed value.
    let values = raw
        .iter()
        .map(|s| {
            if is_missing(s) {
                0.0
            } else {
                code[s.trim()] as f64
            }
        })
        .collect();
    Ok((
        Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical { categories },
        },
        values,
    ))
}

/// Distinct values ordered by descending count, ties lexicographic.
fn frequency_order(values: &[&str]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut cats: Vec<(&str, usize)> = counts.into_iter().collect();
    cats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    cats.into_iter().map(|(s, _)| s.to_string()).collect()
}

fn encode_target(
    name: &str,
    raw: &[String],
    task: Option<Task>,
) -> Result<(Vec<f64>, Task, Vec<String>)> {
    let numeric: Option<Vec<f64>> = raw
        .iter()
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();

    let task = match (task, &numeric) {
        (Some(Task::Regression), None) => {
            return Err(Error::data(format!(
                "target `{name}` is not numeric but regression was requested"
            )))
        }
        (Some(t), _) => t,
        (None, None) => Task::Multiclass,
        (None, Some(vals)) => {
            let mut distinct: Vec<f64> = vals.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let integer_like = distinct.iter().all(|v| v.fract() == 0.0);
            if integer_like && distinct.len() >= 2 && distinct.len() <= CLASSIFICATION_MAX_DISTINCT {
                Task::Multiclass
            } else {
                Task::Regression
            }
        }
    };

    if task == Task::Regression {
        return Ok((numeric.expect("checked above"), Task::Regression, Vec::new()));
    }

    let labels: Vec<String> = match &numeric {
        Some(vals) => {
            let mut distinct = vals.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            distinct.iter().map(|v| format_label(*v)).collect()
        }
        None => {
            let mut distinct: Vec<String> = raw.iter().map(|s| s.trim().to_string()).collect();
            distinct.sort();
            distinct.dedup();
            distinct
        }
    };
    let code: HashMap<&str, usize> = labels.iter().enumerate().map(|(c, s)| (s.as_str(), c)).collect();
    let target = match &numeric {
        Some(vals) => vals.iter().map(|v| code[format_label(*v).as_str()] as f64).collect(),
        None => raw.iter().map(|s| code[s.trim()] as f64).collect(),
    };
    let task = match (task, labels.len()) {
        (Task::Binary, k) if k > 2 => {
            return Err(Error::data(format!(
                "target `{name}` has {k} classes but binary was requested"
            )))
        }
        (_, 2) | (Task::Binary, _) => Task::Binary,
        _ => Task::Multiclass,
    };
    Ok((target, task, labels))
}

fn format_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str, target: &str) -> Result<Dataset> {
        load_csv_from_reader(s.as_bytes(), target, None)
    }

    #[test]
    fn numeric_target_is_regression() {
        let d = load("a,y\n1,0.5\n2,1.5\n3,2.25\n4,7.125\n", "y").unwrap();
        assert_eq!(d.task, Task::Regression);
        assert_eq!(d.n_rows(), 4);
    }

    #[test]
    fn categoricals_encode_by_frequency() {
        let d = load("c,y\nb,1.5\na,2.5\na,3.5\n", "y").unwrap();
        match &d.columns[0].kind {
            ColumnKind::Categorical { categories } => assert_eq!(categories, &["a", "b"]),
            k => panic!("expected categorical, got {k:?}"),
        }
        assert_eq!(d.features.column(0).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_target_column_is_named() {
        let err = load("a,b\n1,2\n", "price").unwrap_err();
        assert!(err.to_string().contains("price"), "{err}");
    }

    #[test]
    fn empty_file_errors() {
        assert!(load("", "y").is_err());
        assert!(load("a,y\n", "y").is_err());
    }

    #[test]
    fn all_missing_column_is_named() {
        let err = load("a,b,y\n1,NA,1.5\n2,,2.5\n", "y").unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
    }

    #[test]
    fn imputes_median_and_mode() {
        let d = load("a,c,y\n1,x,1.5\nnan,NA,2.5\n3,y,3.5\n10,x,0.1\n", "y").unwrap();
        assert_eq!(d.features.get(1, 0), 3.0);
        assert_eq!(d.features.get(1, 1), 0.0);
    }

    #[test]
    fn integer_targets_become_classes() {
        let d = load("a,y\n1,0\n2,1\n3,1\n", "y").unwrap();
        assert_eq!(d.task, Task::Binary);
        let d = load("a,y\n1,3\n2,1\n3,2\n", "y").unwrap();
        assert_eq!(d.task, Task::Multiclass);
        assert_eq!(d.target, vec![2.0, 0.0, 1.0]);
        let d = load_csv_from_reader("a,y\n1,3\n2,1\n3,2\n".as_bytes(), "y", Some(Task::Regression)).unwrap();
        assert_eq!(d.task, Task::Regression);
    }

    #[test]
    fn reencoding_is_stable() {
        let s = "c,y\nq,1.5\nr,2.5\nq,3.5\ns,0.5\nr,9.0\n";
        assert_eq!(load(s, "y").unwrap(), load(s, "y").unwrap());
    }
}
