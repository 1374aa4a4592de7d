//! Tabular dataset loading, validation, standardization and splitting.
//!
//! Datasets are column-major: `columns[j][i]` is feature `j` of sample `i`.
//! Labels are dense integer class ids assigned in first-appearance order.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minimum rows accepted by `load_csv`. Synthetic in-memory datasets built
/// with `Dataset::from_columns` are not subject to this floor.
pub const MIN_CSV_ROWS: usize = 10;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// Column-major feature matrix, `n_features` columns of `num_samples` values.
    pub columns: Vec<Vec<f64>>,
    /// Dense class ids in `[0, num_classes)`.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub num_classes: usize,
}

impl Dataset {
    /// Build a dataset from column vectors. Checks shape and label density
    /// but not the CSV-ingestion row floor.
    pub fn from_columns(
        name: &str,
        columns: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("dataset needs at least one feature column".into()));
        }
        let n_samples = labels.len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_samples {
                return Err(Error::LengthMismatch { left: col.len(), right: n_samples });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse { row: i, col: j, token: format!("{}", col[i]) });
            }
        }
        let num_classes = match labels.iter().max() {
            Some(&m) => m + 1,
            None => return Err(Error::EmptyInput),
        };
        let mut seen = vec![false; num_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Label("class ids are not dense".into()));
        }
        let feature_names = feature_names
            .unwrap_or_else(|| (0..columns.len()).map(|j| format!("f{j}")).collect());
        if feature_names.len() != columns.len() {
            return Err(Error::LengthMismatch { left: feature_names.len(), right: columns.len() });
        }
        Ok(Dataset { name: name.to_string(), columns, labels, feature_names, num_classes })
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    /// Row `i` across all feature columns.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// All rows, row-major.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_samples()).map(|i| self.row(i)).collect()
    }

    /// Writes the dataset back out as a CSV with a header row; the label
    /// column (written as its dense integer id) goes last.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = fs::File::create(path)?;
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("label".to_string());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.num_samples() {
            let mut cells: Vec<String> = self.columns.iter().map(|c| format!("{}", c[i])).collect();
            cells.push(format!("{}", self.labels[i]));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Which CSV column carries the class label.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.9, seed: 0 }
    }
}

fn parse_cell(token: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| Error::Parse { row, col, token: token.to_string() })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, col, token: token.to_string() });
    }
    Ok(v)
}

/// Load a CSV file. `has_header` of `None` uses the detection heuristic:
/// the first row is a header when any cell outside the label column fails
/// to parse as a number.
pub fn load_csv(path: &Path, label: &LabelColumn, has_header: Option<bool>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.is_empty()).collect();
    if lines.is_empty() {
        return Err(Error::Schema("empty file".into()));
    }
    let rows: Vec<Vec<&str>> = lines.iter().map(|l| l.split(',').collect()).collect();
    let width = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Schema(format!(
                "row {} has {} columns, expected {}",
                i,
                r.len(),
                width
            )));
        }
    }
    if width < 3 {
        return Err(Error::Schema(format!("{} feature columns, need at least 2", width.saturating_sub(1))));
    }

    // Resolve the label column index; a name reference requires a header.
    let (label_idx, header) = match label {
        LabelColumn::Last => {
            let idx = width - 1;
            (idx, detect_header(&rows[0], idx, has_header))
        }
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(Error::Schema(format!("label column {} out of range (width {})", i, width)));
            }
            (*i, detect_header(&rows[0], *i, has_header))
        }
        LabelColumn::Name(name) => {
            if has_header == Some(false) {
                return Err(Error::Config(format!(
                    "label column named {name:?} requires a header row"
                )));
            }
            let idx = rows[0]
                .iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| Error::Schema(format!("label column {name:?} not found in header")))?;
            (idx, true)
        }
    };

    let data_rows = if header { &rows[1..] } else { &rows[..] };
    if data_rows.len() < MIN_CSV_ROWS {
        return Err(Error::Schema(format!(
            "{} data rows, need at least {}",
            data_rows.len(),
            MIN_CSV_ROWS
        )));
    }

    let feature_names: Vec<String> = if header {
        rows[0]
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_idx)
            .map(|(_, c)| c.trim().to_string())
            .collect()
    } else {
        (0..width - 1).map(|j| format!("f{j}")).collect()
    };

    let n_features = width - 1;
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(data_rows.len()); n_features];
    let mut label_tokens: Vec<String> = Vec::new();
    let mut labels: Vec<usize> = Vec::with_capacity(data_rows.len());
    for (i, r) in data_rows.iter().enumerate() {
        let mut fj = 0;
        for (j, cell) in r.iter().enumerate() {
            if j == label_idx {
                let tok = cell.trim().to_string();
                let id = match label_tokens.iter().position(|t| *t == tok) {
                    Some(p) => p,
                    None => {
                        label_tokens.push(tok);
                        label_tokens.len() - 1
                    }
                };
                labels.push(id);
            } else {
                columns[fj].push(parse_cell(cell, i, j)?);
                fj += 1;
            }
        }
    }
    if label_tokens.len() < 2 {
        return Err(Error::Label("only one class present".into()));
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::from_columns(&name, columns, labels, Some(feature_names))
}

fn detect_header(first_row: &[&str], label_idx: usize, explicit: Option<bool>) -> bool {
    if let Some(b) = explicit {
        return b;
    }
    first_row
        .iter()
        .enumerate()
        .any(|(j, c)| j != label_idx && c.trim().parse::<f64>().is_err())
}

fn select_rows(d: &Dataset, idx: &[usize], name: &str) -> Dataset {
    Dataset {
        name: name.to_string(),
        columns: d
            .columns
            .iter()
            .map(|c| idx.iter().map(|&i| c[i]).collect())
            .collect(),
        labels: idx.iter().map(|&i| d.labels[i]).collect(),
        feature_names: d.feature_names.clone(),
        num_classes: d.num_classes,
    }
}

/// Seeded uniform train/test split. Row order inside each half follows the
/// original dataset order.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction {} not in (0,1)", spec.train_fraction)));
    }
    let n = d.num_samples();
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Split(format!("split {}:{} leaves a half empty", n_train, n - n_train)));
    }
    let (train_idx, test_idx) = split_indices(n, n_train, spec.seed);
    let train = select_rows(d, &train_idx, &format!("{}-train", d.name));
    let test = select_rows(d, &test_idx, &format!("{}-test", d.name));
    let mut seen = vec![false; d.num_classes];
    for &l in &train.labels {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::Split("train half lacks two classes".into()));
    }
    Ok((train, test))
}

/// The permutation underlying `split`, exposed for determinism checks.
pub fn split_indices(n: usize, n_train: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut train: Vec<usize> = perm[..n_train].to_vec();
    let mut test: Vec<usize> = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
