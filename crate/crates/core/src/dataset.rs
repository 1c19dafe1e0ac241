//! Tabular datasets: ingestion, standardization, stratified splitting and a
//! synthetic imbalanced fixture.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Standard deviations below this are treated as constant columns.
pub const STD_FLOOR: f64 = 1e-12;

/// Feature matrix with class labels and instance identifiers that survive
/// resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    instance_ids: Vec<u64>,
    n_classes: usize,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        instance_ids: Vec<u64>,
        n_classes: usize,
    ) -> Result<Self> {
        let label_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_label_names(features, labels, instance_ids, n_classes, label_names)
    }

    pub fn with_label_names(
        features: Array2<f64>,
        labels: Vec<usize>,
        instance_ids: Vec<u64>,
        n_classes: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || instance_ids.len() != n {
            return Err(Error::InvalidData(format!(
                "{} feature rows, {} labels, {} instance ids",
                n,
                labels.len(),
                instance_ids.len()
            )));
        }
        if label_names.len() != n_classes {
            return Err(Error::InvalidData(format!(
                "{} label names for {} classes",
                label_names.len(),
                n_classes
            )));
        }
        let mut counts = vec![0usize; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::InvalidData(format!(
                    "label {y} out of range for {n_classes} classes"
                )));
            }
            counts[y] += 1;
        }
        if let Some(c) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidData(format!("class {c} has no instances")));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        if let Some(dup) = instance_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidData(format!("duplicate instance id {dup}")));
        }
        Ok(Self {
            features,
            labels,
            instance_ids,
            n_classes,
            label_names,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn instance_ids(&self) -> &[u64] {
        &self.instance_ids
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_count(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Original label values, indexed by contiguous class id.
    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Row indices of each class, ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Largest class; ties go to the lower class id.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let max = *counts.iter().max().unwrap_or(&0);
        counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    pub fn max_instance_id(&self) -> u64 {
        self.instance_ids.iter().copied().max().unwrap_or(0)
    }

    /// Rows at `indices`, in that order. Every class must remain populated.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let ids = indices.iter().map(|&i| self.instance_ids[i]).collect();
        Dataset::with_label_names(
            features,
            labels,
            ids,
            self.n_classes,
            self.label_names.clone(),
        )
    }

    /// Same labels and ids with a replacement feature matrix (e.g. latent
    /// activations). Column count may differ.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: features.nrows(),
            });
        }
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            instance_ids: self.instance_ids.clone(),
            n_classes: self.n_classes,
            label_names: self.label_names.clone(),
        })
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    /// The rightmost column.
    #[default]
    Last,
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "last" {
            return Ok(LabelColumn::Last);
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
            LabelColumn::Last => f.write_str("last"),
        }
    }
}

/// Reads a comma-separated file with one label column. A header row is
/// detected when any feature cell of the first row is non-numeric. Labels are
/// remapped to `0..N` in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    let Some(first) = records.first() else {
        return Err(Error::InvalidData("empty file".into()));
    };
    let width = first.len();

    let resolve_by_index = |i: usize| -> Result<usize> {
        if i < width {
            Ok(i)
        } else {
            Err(Error::InvalidArgument(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
    };
    let by_index = match label_column {
        LabelColumn::Index(i) => Some(resolve_by_index(*i)?),
        LabelColumn::Last => Some(width - 1),
        LabelColumn::Name(_) => None,
    };
    let (label_col, has_header) = match (label_column, by_index) {
        (_, Some(col)) => {
            let header = first
                .iter()
                .enumerate()
                .any(|(j, cell)| j != col && !cell.is_empty() && cell.parse::<f64>().is_err());
            (col, header)
        }
        (LabelColumn::Name(name), None) => {
            let col = first.iter().position(|h| h == name).ok_or_else(|| {
                Error::InvalidArgument(format!("no column named {name:?} in header"))
            })?;
            (col, true)
        }
        _ => unreachable!(),
    };
    if width < 2 {
        return Err(Error::InvalidData("need at least one feature column and a label".into()));
    }

    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let d = width - 1;
    let mut values = Vec::with_capacity(body.len() * d);
    let mut labels = Vec::with_capacity(body.len());
    let mut names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let first_line = if has_header { 2 } else { 1 };
    for (r, rec) in body.iter().enumerate() {
        for (j, cell) in rec.iter().enumerate() {
            if j == label_col {
                continue;
            }
            if cell.is_empty() {
                return Err(Error::Parse {
                    row: r + first_line,
                    column: j,
                    value: String::new(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + first_line,
                column: j,
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        let raw = rec.get(label_col).unwrap_or_default();
        if raw.is_empty() {
            return Err(Error::Parse {
                row: r + first_line,
                column: label_col,
                value: String::new(),
            });
        }
        // "1" and "1.0" name the same class.
        let key = match raw.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
            _ => raw.to_string(),
        };
        let next = names.len();
        let id = *lookup.entry(key.clone()).or_insert_with(|| {
            names.push(key);
            next
        });
        labels.push(id);
    }
    if names.len() < 2 {
        return Err(Error::InvalidData(format!(
            "label column has {} distinct value(s); at least two classes required",
            names.len()
        )));
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    let n_classes = names.len();
    Dataset::with_label_names(features, labels, (0..n as u64).collect(), n_classes, names)
}

/// Writes features as `f0..f{d-1}` followed by a `label` column holding the
/// original label names.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..data.feature_count()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.label_names()[data.labels()[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }
}

/// Column means and population standard deviations over the given rows.
/// Near-constant columns get `std = 1`.
pub fn fit_standardizer(train: &Dataset) -> ScalerParams {
    let x = train.features();
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in x.rows() {
        for j in 0..d {
            let dv = row[j] - mean[j];
            var[j] += dv * dv;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s < STD_FLOOR {
                1.0
            } else {
                s
            }
        })
        .collect();
    ScalerParams { mean, std }
}

pub fn apply_standardizer(params: &ScalerParams, data: &Dataset) -> Result<Dataset> {
    let x = params.transform(data.features())?;
    data.with_features(x)
}

/// One train/test partition of row indices (both ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub splits: Vec<Split>,
}

impl SplitPlan {
    pub fn repeats(&self) -> usize {
        self.splits.len()
    }
}

/// Repeated stratified shuffle-splits. Each class contributes
/// `round(fraction * n_c)` rows to train, clamped so both sides keep at least
/// one row of every class.
pub fn stratified_splits(
    data: &Dataset,
    repeats: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let by_class = data.class_indices();
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::TooFewInstances {
                class: c,
                count: rows.len(),
                needed: 2,
            });
        }
    }
    let splits = (0..repeats)
        .map(|r| {
            let mut rng = seeded(derive_seed(seed, &[r as u64]));
            let mut train = Vec::new();
            let mut test = Vec::new();
            for rows in &by_class {
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                let n_c = rows.len();
                let n_train = ((train_fraction * n_c as f64).round() as usize).clamp(1, n_c - 1);
                train.extend_from_slice(&rows[..n_train]);
                test.extend_from_slice(&rows[n_train..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        train_fraction,
        splits,
    })
}

/// Direction of the minority mean: harmonic weights `1/(j+1)`, normalized,
/// so a handful of leading features carry most of the signal.
pub fn fixture_direction(d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|j| 1.0 / (j as f64 + 1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// Two unit-variance isotropic Gaussian clusters. Majority (label 0) centred
/// at the origin, minority (label 1) at distance `separation` along
/// [`fixture_direction`]. Majority rows come first.
pub fn make_gaussian_imbalanced(
    n_major: usize,
    n_minor: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_major == 0 || n_minor == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "class counts and dimension must be at least 1".into(),
        ));
    }
    let mut rng = seeded(seed);
    let offset: Vec<f64> = fixture_direction(d)
        .into_iter()
        .map(|u| u * separation)
        .collect();
    let n = n_major + n_minor;
    let mut x = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let minority = i >= n_major;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = if minority { z + offset[j] } else { z };
        }
        labels.push(usize::from(minority));
    }
    Dataset::new(x, labels, (0..n as u64).collect(), 2)
}

/// Largest class count over smallest class count.
pub fn imbalance_ratio(data: &Dataset) -> f64 {
    let counts = data.class_counts();
    let max = counts.iter().copied().max().unwrap_or(1);
    let min = counts.iter().copied().min().unwrap_or(1).max(1);
    max as f64 / min as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(x: Array2<f64>, labels: Vec<usize>) -> Dataset {
        let n = labels.len() as u64;
        let k = labels.iter().max().unwrap() + 1;
        Dataset::new(x, labels, (0..n).collect(), k).unwrap()
    }

    #[test]
    fn rejects_inconsistent_lengths_and_duplicate_ids() {
        let x = array![[0.0], [1.0]];
        assert!(Dataset::new(x.clone(), vec![0], vec![0, 1], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 1], vec![3, 3], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 0], vec![0, 1], 2).is_err());
        assert!(Dataset::new(x, vec![0, 2], vec![0, 1], 2).is_err());
    }

    #[test]
    fn csv_minimal_two_rows() {
        let d = read_csv("1.5,2,0\n3,4,1\n".as_bytes(), &LabelColumn::Index(2)).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.feature_count(), 2);
        assert_eq!(d.features()[[0, 0]], 1.5);
    }

    #[test]
    fn csv_header_and_named_label_remap_by_first_appearance() {
        let text = "a,cls,b\n1,yes,2\n3,no,4\n5,yes,6\n";
        let d = read_csv(text.as_bytes(), &LabelColumn::Name("cls".into())).unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.label_names(), &["yes".to_string(), "no".to_string()]);
        assert_eq!(d.features().row(2).to_vec(), vec![5.0, 6.0]);

        let d = read_csv(text.as_bytes(), &LabelColumn::Index(1)).unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn csv_single_class_is_rejected() {
        let err = read_csv("1,0\n2,0\n".as_bytes(), &LabelColumn::Index(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn csv_reports_bad_cell_position() {
        let err = read_csv("x,y,l\n1,2,0\n3,oops,1\n".as_bytes(), &LabelColumn::Index(2))
            .unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column), (3, 1));
                assert_eq!(value, "oops");
            }
            e => panic!("unexpected {e}"),
        }
        let err = read_csv("1,,0\n3,4,1\n".as_bytes(), &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, column: 1, .. }));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv("/nonexistent/file.csv", &LabelColumn::Index(0)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn standardizer_constant_and_symmetric_columns() {
        let d = toy(array![[5.0, -1.0], [5.0, 1.0]], vec![0, 1]);
        let p = fit_standardizer(&d);
        assert_eq!(p.mean, vec![5.0, 0.0]);
        assert_eq!(p.std, vec![1.0, 1.0]);
    }

    #[test]
    fn standardizer_matches_two_pass_oracle() {
        let d = make_gaussian_imbalanced(60, 40, 3, 1.0, 11).unwrap();
        let p = fit_standardizer(&d);
        for j in 0..3 {
            let col: Vec<f64> = d.features().column(j).to_vec();
            let n = col.len() as f64;
            let mut m = 0.0;
            for v in &col {
                m += v;
            }
            m /= n;
            let mut ss = 0.0;
            for v in &col {
                ss += (v - m) * (v - m);
            }
            assert!((p.mean[j] - m).abs() < 1e-12);
            assert!((p.std[j] - (ss / n).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_self_centres_and_identity_is_noop() {
        let d = make_gaussian_imbalanced(80, 20, 4, 2.0, 3).unwrap();
        let p = fit_standardizer(&d);
        let z = apply_standardizer(&p, &d).unwrap();
        for col in z.features().columns() {
            assert!(col.mean().unwrap().abs() < 1e-9);
        }
        assert_eq!(z.labels(), d.labels());
        assert_eq!(z.instance_ids(), d.instance_ids());
        let same = apply_standardizer(&ScalerParams::identity(4), &d).unwrap();
        assert_eq!(same, d);
    }

    #[test]
    fn held_out_transform_matches_scalar_loop() {
        let d = make_gaussian_imbalanced(50, 50, 3, 1.0, 5).unwrap();
        let plan = stratified_splits(&d, 1, 0.7, 1).unwrap();
        let train = d.select(&plan.splits[0].train).unwrap();
        let test = d.select(&plan.splits[0].test).unwrap();
        let p = fit_standardizer(&train);
        let z = apply_standardizer(&p, &test).unwrap();
        for i in 0..test.len() {
            for j in 0..3 {
                let want = (test.features()[[i, j]] - p.mean[j]) / p.std[j];
                assert_eq!(z.features()[[i, j]], want);
            }
        }
    }

    #[test]
    fn standardizer_dimension_mismatch() {
        let d = toy(array![[1.0, 2.0], [3.0, 4.0]], vec![0, 1]);
        assert!(matches!(
            apply_standardizer(&ScalerParams::identity(3), &d),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn splits_are_stratified_partitions() {
        let d = make_gaussian_imbalanced(1000, 100, 2, 4.0, 9).unwrap();
        let plan = stratified_splits(&d, 5, 0.7, 42).unwrap();
        assert_eq!(plan.repeats(), 5);
        for s in &plan.splits {
            let major = s.train.iter().filter(|&&i| d.labels()[i] == 0).count();
            let minor = s.train.len() - major;
            assert!(major.abs_diff(700) <= 1);
            assert!(minor.abs_diff(70) <= 1);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
        }
        assert_ne!(plan.splits[0], plan.splits[1]);
        assert_eq!(plan, stratified_splits(&d, 5, 0.7, 42).unwrap());
    }

    #[test]
    fn splits_need_two_per_class() {
        let d = toy(array![[0.0], [1.0], [2.0]], vec![0, 0, 1]);
        assert!(matches!(
            stratified_splits(&d, 1, 0.7, 0),
            Err(Error::TooFewInstances { class: 1, .. })
        ));
        assert!(stratified_splits(&d, 1, 1.0, 0).is_err());
    }

    #[test]
    fn fixture_counts_and_ratio() {
        let d = make_gaussian_imbalanced(1000, 100, 2, 4.0, 1).unwrap();
        assert_eq!(d.class_counts(), vec![1000, 100]);
        assert_eq!(imbalance_ratio(&d), 10.0);
        assert_eq!(d.majority_class(), 0);
    }

    #[test]
    fn imbalance_ratio_cases() {
        let bal = toy(array![[0.0], [1.0]], vec![0, 1]);
        assert_eq!(imbalance_ratio(&bal), 1.0);
        let mut labels = vec![0; 90];
        labels.extend(vec![1; 9]);
        let d = toy(Array2::zeros((99, 1)), labels);
        assert_eq!(imbalance_ratio(&d), 10.0);
    }
}
