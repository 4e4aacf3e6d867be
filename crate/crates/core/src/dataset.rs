//! Tabular classification data: CSV loading, min-max normalization and a
//! seeded train/test split.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Which CSV column holds the class label.
///
/// Serialized as its display string; a bare integer is read as an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(from = "LabelRepr", into = "String")]
pub enum LabelColumn {
    /// Rightmost column.
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(if s.eq_ignore_ascii_case("last") || s.is_empty() {
            LabelColumn::Last
        } else if let Ok(i) = s.parse::<usize>() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_string())
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelRepr {
    Index(usize),
    Text(String),
}

impl From<LabelRepr> for LabelColumn {
    fn from(r: LabelRepr) -> Self {
        match r {
            LabelRepr::Index(i) => LabelColumn::Index(i),
            LabelRepr::Text(s) => s.parse().unwrap_or_default(),
        }
    }
}

impl From<LabelColumn> for String {
    fn from(l: LabelColumn) -> Self {
        l.to_string()
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

/// Per-feature range captured from the data a normalization was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    fn scale(&self, v: f64) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// Min/max statistics for every feature column.
pub type NormStats = Vec<FeatureRange>;

/// A feature matrix with integer class labels.
///
/// Features are stored row-major. Once `norm_stats` is set every feature
/// value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    feature_count: usize,
    labels: Vec<usize>,
    feature_names: Option<Vec<String>>,
    class_names: Vec<String>,
    norm_stats: Option<NormStats>,
}

impl Dataset {
    /// Builds a raw dataset from rows. Class count is `class_names.len()`.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let feature_count = rows[0].len();
        if feature_count == 0 {
            return Err(Error::InvalidArgument("dataset has no feature columns".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * feature_count);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_count {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: feature_count,
                    found: row.len(),
                });
            }
            if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell {
                    row: i,
                    column: col,
                    message: "value is not finite".into(),
                });
            }
            features.extend_from_slice(row);
        }
        if class_names.len() < 2 {
            return Err(Error::TooFewClasses(class_names.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside class range 0..{}",
                class_names.len()
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != feature_count {
                return Err(Error::InvalidArgument("feature name count mismatch".into()));
            }
        }
        Ok(Dataset {
            features,
            feature_count,
            labels,
            feature_names,
            class_names,
            norm_stats: None,
        })
    }

    /// Convenience constructor naming classes `0..=max(label)`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let names = (0..classes).map(|c| c.to_string()).collect();
        Dataset::new(rows, labels, names, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_count..(i + 1) * self.feature_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features
            .chunks_exact(self.feature_count)
            .zip(self.labels.iter().copied())
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_stats.is_some()
    }

    /// Rows selected by `indices`, in that order. Class names and
    /// normalization state carry over.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_count);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            feature_count: self.feature_count,
            labels,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            norm_stats: self.norm_stats.clone(),
        }
    }

    fn column_ranges(&self) -> NormStats {
        (0..self.feature_count)
            .map(|c| {
                let (min, max) = self
                    .features
                    .iter()
                    .skip(c)
                    .step_by(self.feature_count)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                FeatureRange { min, max }
            })
            .collect()
    }
}

/// Min-max normalizes `data` into `[0, 1]`.
///
/// With `stats == None` the ranges are fitted on `data` itself; a dataset
/// that is already normalized is returned unchanged. With explicit stats
/// (test data under training ranges) out-of-range values are clamped.
/// Constant features map to 0.
pub fn normalize(data: &Dataset, stats: Option<&NormStats>) -> Result<Dataset> {
    let stats = match stats {
        Some(s) => {
            if s.len() != data.feature_count {
                return Err(Error::DimensionMismatch {
                    expected: s.len(),
                    got: data.feature_count,
                });
            }
            s.clone()
        }
        None if data.is_normalized() => return Ok(data.clone()),
        None => data.column_ranges(),
    };
    let features = data
        .features
        .chunks_exact(data.feature_count)
        .flat_map(|row| row.iter().zip(&stats).map(|(&v, r)| r.scale(v)))
        .collect();
    Ok(Dataset {
        features,
        norm_stats: Some(stats),
        ..data.clone()
    })
}

/// A disjoint train/test partition of one source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Source row indices, in the order they appear in `train` / `test`.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Number of test rows for `n` total rows; halves round toward the test set
/// and both sides keep at least one row.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    let raw = test_fraction * n as f64;
    // absorb representation error such as 0.3 * 10 = 3.0000000000000004
    let rounded = ((raw * 1e9).round() / 1e9 + 0.5).floor() as usize;
    rounded.clamp(1, n - 1)
}

/// Seeded random train/test split.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument("split needs at least 2 rows".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Split));
    let n_test = test_size(data.len(), test_fraction);
    let test_rows = order[..n_test].to_vec();
    let train_rows = order[n_test..].to_vec();
    Ok(SplitPair {
        train: data.subset(&train_rows),
        test: data.subset(&test_rows),
        train_rows,
        test_rows,
        seed,
        test_fraction,
    })
}

/// Splits raw data, fits normalization on the training rows and applies the
/// same ranges to the test rows.
pub fn prepare(raw: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    let mut pair = split(raw, test_fraction, seed)?;
    let train = normalize(&pair.train, None)?;
    let stats = train.norm_stats().cloned().expect("normalized");
    pair.test = normalize(&pair.test, Some(&stats))?;
    pair.train = train;
    Ok(pair)
}

/// Reads a CSV file. See [`parse_csv`].
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label)
}

/// Parses comma-separated text into a raw (unnormalized) dataset.
///
/// The first row is a header iff it contains a non-numeric cell outside the
/// label column; selecting the label by name requires a header. Integer
/// labels keep their numeric order; any other labels are numbered by first
/// appearance.
pub fn parse_csv(text: &str, label: &LabelColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::EmptyDataset);
    };
    let width = first.len();
    if width < 2 {
        return Err(Error::Csv("need at least one feature column and a label column".into()));
    }

    let (label_idx, has_header) = match label {
        LabelColumn::Name(name) => {
            let idx = first
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Csv(format!("no header column named {name:?}")))?;
            (idx, true)
        }
        other => {
            let idx = match other {
                LabelColumn::Index(i) => *i,
                _ => width - 1,
            };
            if idx >= width {
                return Err(Error::Csv(format!(
                    "label column {idx} out of range for {width} columns"
                )));
            }
            let header = first
                .iter()
                .enumerate()
                .any(|(c, cell)| c != idx && cell.parse::<f64>().is_err());
            (idx, header)
        }
    };

    let feature_names = has_header.then(|| {
        first
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label_idx)
            .map(|(_, s)| s.to_string())
            .collect::<Vec<_>>()
    });
    let body = &records[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rows = Vec::with_capacity(body.len());
    let mut raw_labels = Vec::with_capacity(body.len());
    let line_offset = usize::from(has_header);
    for (r, rec) in body.iter().enumerate() {
        let row_no = r + line_offset;
        if rec.len() != width {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: width,
                found: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(width - 1);
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                if cell.is_empty() {
                    return Err(Error::Cell {
                        row: row_no,
                        column: c,
                        message: "empty label".into(),
                    });
                }
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                row: row_no,
                column: c,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: row_no,
                    column: c,
                    message: format!("{cell:?} is not finite"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    let (labels, class_names) = map_labels(&raw_labels);
    if class_names.len() < 2 {
        return Err(Error::TooFewClasses(class_names.len()));
    }
    Dataset::new(rows, labels, class_names, feature_names)
}

fn map_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(mut distinct) = ints {
        distinct.sort_unstable();
        distinct.dedup();
        names = distinct.iter().map(|v| v.to_string()).collect();
        let labels = raw
            .iter()
            .map(|s| {
                let v: i64 = s.parse().expect("checked");
                distinct.binary_search(&v).expect("present")
            })
            .collect();
        return (labels, names);
    }
    let labels = raw
        .iter()
        .map(|s| match names.iter().position(|n| n == s) {
            Some(i) => i,
            None => {
                names.push(s.clone());
                names.len() - 1
            }
        })
        .collect();
    (labels, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset {
        let rows = values.iter().map(|&v| vec![v]).collect();
        let labels = (0..values.len()).map(|i| i % 2).collect();
        Dataset::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn first_appearance_label_mapping() {
        let d = parse_csv("1.0,a\n2.0,b\n3.0,a\n", &LabelColumn::Last).unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.class_names(), &["a".to_string(), "b".to_string()]);
        assert!(d.feature_names().is_none());
    }

    #[test]
    fn integer_labels_keep_numeric_order() {
        let d = parse_csv("1,2\n2,0\n3,1\n", &LabelColumn::Last).unwrap();
        assert_eq!(d.labels(), &[2, 0, 1]);
    }

    #[test]
    fn single_class_is_rejected() {
        let err = parse_csv("1,a\n2,a\n", &LabelColumn::Last).unwrap_err();
        assert!(err.to_string().contains("fewer than 2 classes"), "{err}");
    }

    #[test]
    fn header_detection_and_named_label() {
        let text = "x,y,cls\n0.1,5,a\n0.2,6,b\n";
        let d = parse_csv(text, &LabelColumn::Name("cls".into())).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.feature_names().unwrap(), &["x".to_string(), "y".to_string()]);
        let d = parse_csv(text, &LabelColumn::Index(2)).unwrap();
        assert_eq!(d.row(1), &[0.2, 6.0]);
        // label in the first column, numeric header cells elsewhere
        let d = parse_csv("k,1,2\na,3,4\nb,5,6\n", &LabelColumn::Index(0)).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.feature_names().is_none());
    }

    #[test]
    fn label_column_serde_uses_display_form() {
        for (l, json) in [
            (LabelColumn::Last, "\"last\""),
            (LabelColumn::Index(3), "\"3\""),
            (LabelColumn::Name("cls".into()), "\"cls\""),
        ] {
            assert_eq!(serde_json::to_string(&l).unwrap(), json);
            assert_eq!(serde_json::from_str::<LabelColumn>(json).unwrap(), l);
        }
        assert_eq!(serde_json::from_str::<LabelColumn>("2").unwrap(), LabelColumn::Index(2));
    }

    #[test]
    fn name_without_header_is_an_error() {
        assert!(parse_csv("1,a\n2,b\n", &LabelColumn::Name("cls".into())).is_err());
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let err = parse_csv("f,l\n1,a\nxx,b\n", &LabelColumn::Last).unwrap_err();
        match err {
            Error::Cell { row, column, .. } => assert_eq!((row, column), (2, 0)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_csv("1,2,a\n3,b\n", &LabelColumn::Last).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 1, .. }), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv("/nonexistent/data.csv", &LabelColumn::Last).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn normalize_endpoints_and_degenerate() {
        let d = normalize(&column(&[2.0, 4.0, 6.0]), None).unwrap();
        assert_eq!(d.rows().map(|(r, _)| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        let c = normalize(&column(&[5.0, 5.0, 5.0]), None).unwrap();
        assert!(c.rows().all(|(r, _)| r[0] == 0.0));
    }

    #[test]
    fn foreign_stats_clamp() {
        let stats = vec![FeatureRange { min: 2.0, max: 6.0 }];
        let d = normalize(&column(&[8.0, 0.0, 4.0]), Some(&stats)).unwrap();
        assert_eq!(d.rows().map(|(r, _)| r[0]).collect::<Vec<_>>(), vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn split_sizes() {
        let d = column(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(split(&d, 0.3, 1).unwrap().test.len(), 3);
        let d = column(&(0..210).map(f64::from).collect::<Vec<_>>());
        assert_eq!(split(&d, 0.3, 1).unwrap().test.len(), 63);
        assert_eq!(test_size(5, 0.5), 3);
        assert_eq!(test_size(2, 0.01), 1);
    }

    #[test]
    fn split_fraction_out_of_range() {
        let d = column(&[1.0, 2.0, 3.0]);
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let d = column(&(0..50).map(f64::from).collect::<Vec<_>>());
        let a = split(&d, 0.3, 7).unwrap();
        let b = split(&d, 0.3, 7).unwrap();
        assert_eq!(a.test_rows, b.test_rows);
        assert_eq!(a.train_rows, b.train_rows);
        assert_ne!(a.test_rows, split(&d, 0.3, 8).unwrap().test_rows);
    }

    #[test]
    fn prepare_uses_train_stats_for_test() {
        let d = column(&(0..40).map(f64::from).collect::<Vec<_>>());
        let p = prepare(&d, 0.25, 3).unwrap();
        assert_eq!(p.train.norm_stats(), p.test.norm_stats());
        for (i, &src) in p.test_rows.iter().enumerate() {
            assert_eq!(p.test.label(i), d.label(src));
        }
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 2usize..120, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let d = column(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
            let p = split(&d, frac, seed).unwrap();
            let mut all: Vec<usize> = p.train_rows.iter().chain(&p.test_rows).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(p.test.len(), test_size(n, frac));
            for (i, &src) in p.train_rows.iter().enumerate() {
                prop_assert_eq!(p.train.row(i), d.row(src));
                prop_assert_eq!(p.train.label(i), d.label(src));
            }
        }

        #[test]
        fn normalize_is_idempotent_and_bounded(values in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
            let d = column(&values);
            let once = normalize(&d, None).unwrap();
            prop_assert!(once.rows().all(|(r, _)| (0.0..=1.0).contains(&r[0])));
            let twice = normalize(&once, None).unwrap();
            prop_assert_eq!(&once, &twice);
            let refit = normalize(&Dataset { norm_stats: None, ..once.clone() }, None).unwrap();
            prop_assert!(once.rows().zip(refit.rows()).all(|(a, b)| a.0 == b.0));
        }
    }
}
