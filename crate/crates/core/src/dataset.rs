//! Design matrix, responses, CSV ingestion and train/test splitting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Covariates `x` (n × d) and responses `y` (n).
///
/// Stored column-major: the split search walks one feature at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        let d = rows[0].len();
        let mut x = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                x[j * n + i] = v;
            }
        }
        Self::from_column_major(n, d, x, y)
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let d = columns.len();
        let n = y.len();
        let mut x = Vec::with_capacity(n * d);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "feature {j} has {} values, expected {n}",
                    col.len()
                )));
            }
            x.extend(col);
        }
        Self::from_column_major(n, d, x, y)
    }

    fn from_column_major(n: usize, d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::InvalidData("dataset has no features".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidData(format!(
                "{} responses for {n} rows",
                y.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, feature {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite response at row {i}"
            )));
        }
        Ok(Self {
            n,
            d,
            x,
            y,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::InvalidData(format!(
                "{} feature names for {} features",
                names.len(),
                self.d
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Same covariates with a different response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        let mut out = Self::from_column_major(self.n, self.d, self.x.clone(), y)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn feature(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.x[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|j| self.value(i, j)).collect()
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("subset of zero rows".into()));
        }
        let m = indices.len();
        let mut x = Vec::with_capacity(m * self.d);
        for j in 0..self.d {
            let col = self.feature(j);
            x.extend(indices.iter().map(|&i| col[i]));
        }
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Ok(Self {
            n: m,
            d: self.d,
            x,
            y,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Writes the dataset as CSV with the response in the last column.
    pub fn write_csv<W: Write>(&self, writer: W, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.d).map(|j| format!("x{}", j + 1)).collect(),
        };
        header.push(target_name.to_string());
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut record: Vec<String> = (0..self.d)
                .map(|j| format!("{}", self.value(i, j)))
                .collect();
            record.push(format!("{}", self.y[i]));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv writer>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, target_name: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        self.write_csv(file, target_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Plain integers select by position, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

pub fn load_csv(path: &Path, target: &TargetColumn, options: CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    read_csv(file, target, options)
}

type Table = (Option<Vec<String>>, Vec<Vec<f64>>);

fn read_table<R: std::io::Read>(reader: R, options: CsvOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::InvalidData(format!(
                "row {} has {} fields, expected {w}",
                r + 1,
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(w);
        for (c, cell) in record.iter().enumerate() {
            let column = match &header {
                Some(h) => h[c].clone(),
                None => c.to_string(),
            };
            let v: f64 = cell
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse {
                    row: r + 1,
                    column: column.clone(),
                    cell: cell.to_string(),
                    reason: e.to_string(),
                })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column,
                    cell: cell.to_string(),
                    reason: "non-finite value".into(),
                });
            }
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv contains no data rows".into()));
    }
    Ok((header, rows))
}

/// Reads a CSV of covariates only; the response is set to zero.
pub fn load_features_csv(path: &Path, options: CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    read_features_csv(file, options)
}

pub fn read_features_csv<R: std::io::Read>(reader: R, options: CsvOptions) -> Result<Dataset> {
    let (header, rows) = read_table(reader, options)?;
    let ds = Dataset::from_rows(&rows, vec![0.0; rows.len()])?;
    match header {
        Some(h) => ds.with_feature_names(h),
        None => Ok(ds),
    }
}

/// Parses CSV text into a dataset; every non-target column becomes a feature.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    target: &TargetColumn,
    options: CsvOptions,
) -> Result<Dataset> {
    let (header, rows) = read_table(reader, options)?;
    let width = rows[0].len();
    let target_idx = match target {
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => return Err(Error::MissingTarget(i.to_string())),
        TargetColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::MissingTarget(name.clone()))?,
    };
    if width < 2 {
        return Err(Error::InvalidData(
            "need at least one feature column besides the target".into(),
        ));
    }

    let y: Vec<f64> = rows.iter().map(|r| r[target_idx]).collect();
    let features: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|&(c, _)| c != target_idx)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    let ds = Dataset::from_rows(&features, y)?;
    match header {
        Some(h) => {
            let names = h
                .into_iter()
                .enumerate()
                .filter(|&(c, _)| c != target_idx)
                .map(|(_, name)| name)
                .collect();
            ds.with_feature_names(names)
        }
        None => Ok(ds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Shuffled index sets `(train, test)`; train gets ⌈fraction·n⌉ rows.
pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} outside (0, 1]",
            spec.train_fraction
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least two rows to split".into(),
        ));
    }
    // The small offset keeps e.g. 0.9 * 10 from rounding up to 10.
    let n_train = ((spec.train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_train = n_train.min(n);
    if n_train == 0 {
        return Err(Error::InvalidArgument(
            "train fraction yields an empty training set".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(spec.seed, rng::streams::SPLIT));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// Splits into (train, test). The test part is empty-free unless fraction = 1,
/// in which case it is returned as `None`.
pub fn split_train_test(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Option<Dataset>)> {
    let (train, test) = split_indices(ds.n_samples(), spec)?;
    let test = if test.is_empty() {
        None
    } else {
        Some(ds.subset(&test)?)
    };
    Ok((ds.subset(&train)?, test))
}

/// ‖v‖²_n = (1/n) Σ v_i².
pub fn empirical_norm_sq(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64
}

/// ⟨a, b⟩_n = (1/n) Σ a_i b_i.
pub fn empirical_inner(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// ‖a − b‖²_n.
pub fn empirical_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv_text(s: &str) -> std::io::Cursor<Vec<u8>> {
        std::io::Cursor::new(s.as_bytes().to_vec())
    }

    #[test]
    fn loads_three_rows() {
        let ds = read_csv(
            csv_text("a,b,target\n1,2,3\n4,5,6\n7,8,9\n"),
            &TargetColumn::Name("target".into()),
            CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.y(), &[3.0, 6.0, 9.0]);
        assert_eq!(ds.row(1), vec![4.0, 5.0]);
        assert_eq!(
            ds.feature_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn target_by_index_and_custom_delimiter() {
        let ds = read_csv(
            csv_text("t;a\n1;2\n3;4\n"),
            &TargetColumn::Index(0),
            CsvOptions {
                delimiter: b';',
                has_header: true,
            },
        )
        .unwrap();
        assert_eq!(ds.y(), &[1.0, 3.0]);
        assert_eq!(ds.feature(0), &[2.0, 4.0]);
    }

    #[test]
    fn headerless_input() {
        let ds = read_csv(
            csv_text("1,2,3\n4,5,6\n"),
            &TargetColumn::Index(2),
            CsvOptions {
                delimiter: b',',
                has_header: false,
            },
        )
        .unwrap();
        assert_eq!(ds.y(), &[3.0, 6.0]);
    }

    #[test]
    fn nan_cell_is_rejected_with_location() {
        let err = read_csv(
            csv_text("a,b,target\n1,2,3\n4,NaN,6\n"),
            &TargetColumn::Name("target".into()),
            CsvOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::Parse {
                row, column, cell, ..
            } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(cell, "NaN");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn garbage_cell_and_missing_target_and_empty() {
        let opts = CsvOptions::default();
        let t = TargetColumn::Name("target".into());
        assert!(matches!(
            read_csv(csv_text("a,target\nx,1\n"), &t, opts),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_csv(csv_text("a,b\n1,2\n"), &t, opts),
            Err(Error::MissingTarget(_))
        ));
        assert!(matches!(
            read_csv(csv_text("a,target\n"), &t, opts),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            read_csv(csv_text(""), &t, opts),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn boston_shaped_file() {
        let mut text = String::new();
        let names: Vec<String> = (0..13)
            .map(|j| format!("f{j}"))
            .chain(["medv".to_string()])
            .collect();
        text.push_str(&names.join(","));
        text.push('\n');
        for i in 0..506 {
            let row: Vec<String> = (0..14)
                .map(|j| format!("{}", (i * 14 + j) as f64 * 0.5))
                .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let ds = read_csv(
            csv_text(&text),
            &TargetColumn::Name("medv".into()),
            CsvOptions::default(),
        )
        .unwrap();
        assert_eq!((ds.n_samples(), ds.n_features()), (506, 13));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = Dataset::from_rows(
            &(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>(),
            (0..10).map(f64::from).collect(),
        )
        .unwrap();
        let spec = SplitSpec {
            train_fraction: 0.9,
            seed: 1,
        };
        let (train, test) = split_train_test(&ds, spec).unwrap();
        assert_eq!(train.n_samples(), 9);
        assert_eq!(test.unwrap().n_samples(), 1);
        assert_eq!(
            split_indices(10, spec).unwrap(),
            split_indices(10, spec).unwrap()
        );

        let (tr, te) = split_indices(
            506,
            SplitSpec {
                train_fraction: 0.9,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!((tr.len(), te.len()), (456, 50));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split_indices(
            10,
            SplitSpec {
                train_fraction: 0.0,
                seed: 0
            }
        )
        .is_err());
        assert!(split_indices(
            10,
            SplitSpec {
                train_fraction: 1.5,
                seed: 0
            }
        )
        .is_err());
        assert!(split_indices(
            1,
            SplitSpec {
                train_fraction: 0.5,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(empirical_norm_sq(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(empirical_norm_sq(&[1.0, 1.0, 1.0, 1.0]), 1.0);
        assert_eq!(empirical_norm_sq(&[3.0, 4.0]), 12.5);
    }

    #[test]
    fn rejects_non_finite_construction() {
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec![1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], vec![f64::INFINITY]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], vec![1.0, 2.0]).is_err());
        assert!(Dataset::from_rows(&[vec![]], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..300, frac in 0.05f64..1.0, seed in any::<u64>()) {
            let (train, test) = split_indices(n, SplitSpec { train_fraction: frac, seed }).unwrap();
            let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(!train.is_empty());
        }

        #[test]
        fn norm_is_quadratic(v in prop::collection::vec(-1e3f64..1e3, 1..50), a in -10f64..10.0) {
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            let lhs = empirical_norm_sq(&scaled);
            let rhs = a * a * empirical_norm_sq(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12));
        }

        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let feats: Vec<Vec<f64>> = rows.iter().map(|r| r[..2].to_vec()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let ds = Dataset::from_rows(&feats, y).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf, "target").unwrap();
            let back = read_csv(std::io::Cursor::new(buf), &TargetColumn::Name("target".into()), CsvOptions::default()).unwrap();
            prop_assert_eq!(back.y(), ds.y());
            prop_assert_eq!(back.feature(0), ds.feature(0));
            prop_assert_eq!(back.feature(1), ds.feature(1));
        }
    }
}
