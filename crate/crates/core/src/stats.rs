//! Deterministic statistical primitives: descriptive stats, Pearson
//! correlation, quantile binning and a plug-in mutual-information estimator.

use std::collections::{BTreeMap, HashMap};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Seven descriptive statistics of a column, in the fixed order
/// mean, std, min, q25, median, q75, max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn to_array(self) -> [f64; 7] {
        [self.mean, self.std, self.min, self.q25, self.median, self.q75, self.max]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BinningSpec {
    pub num_bins: usize,
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec { num_bins: 10 }
    }
}

/// Quantile by linear interpolation between order statistics of a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn describe(column: &[f64]) -> Result<ColumnStats> {
    if column.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    // population variance
    let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.max(0.0).sqrt();
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ColumnStats {
        mean,
        std,
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Pearson correlation; a constant input yields 0 rather than NaN.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Quantile-edge binning. Duplicate edges collapse, so the effective bin
/// count may be below `num_bins`; output ids are dense in `[0, effective)`.
pub fn discretize(column: &[f64], spec: &BinningSpec) -> Result<Vec<usize>> {
    if column.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bins = spec.num_bins.max(2);
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / bins as f64))
        .collect();
    edges.dedup();
    let raw: Vec<usize> = column
        .iter()
        .map(|&v| edges.iter().take_while(|&&e| v > e).count())
        .collect();
    // remap observed ids to a dense range
    let mut observed: Vec<usize> = raw.clone();
    observed.sort_unstable();
    observed.dedup();
    Ok(raw
        .into_iter()
        .map(|id| observed.binary_search(&id).unwrap())
        .collect())
}

/// Plug-in mutual information over empirical joint frequencies, in nats.
pub fn mutual_info(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut px: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in x.iter().zip(y.iter()) {
        *joint.entry((a, b)).or_insert(0.0) += 1.0;
        *px.entry(a).or_insert(0.0) += 1.0;
        *py.entry(b).or_insert(0.0) += 1.0;
    }
    // summing terms in sorted order keeps mutual_info(x, y) and
    // mutual_info(y, x) bitwise equal
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c / n;
            pab * (pab / ((px[&a] / n) * (py[&b] / n))).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok(mi.max(0.0))
}

/// Empirical entropy in nats; equals `mutual_info(x, x)`.
pub fn entropy(x: &[usize]) -> Result<f64> {
    mutual_info(x, x)
}

/// MI of each listed feature (discretized) against the labels.
pub fn mi_relevance(
    d: &Dataset,
    feature_indices: &[usize],
    bins: &BinningSpec,
) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for &i in feature_indices {
        if i >= d.n_features() {
            return Err(Error::IndexOutOfRange { index: i, len: d.n_features() });
        }
        let binned = discretize(&d.columns[i], bins)?;
        out.insert(i, mutual_info(&binned, &d.labels)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn describe_constant() {
        let s = describe(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.to_array()[2..], [1.0; 5]);
    }

    #[test]
    fn describe_two_points() {
        let s = describe(&[0.0, 10.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.min, 0.0);
        assert_eq!(s.max, 10.0);
        assert_eq!(s.median, 5.0);
    }

    #[test]
    fn describe_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let v: Vec<f64> = (0..1000).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let s = describe(&v).unwrap();
        // independent sort-based quantile oracle
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle_q = |p: f64| {
            let h = p * (sorted.len() - 1) as f64;
            let lo = h.floor() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[(h.ceil()) as usize] - sorted[lo])
        };
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.std - std).abs() < 1e-12);
        assert!((s.q25 - oracle_q(0.25)).abs() < 1e-12);
        assert!((s.median - oracle_q(0.5)).abs() < 1e-12);
        assert!((s.q75 - oracle_q(0.75)).abs() < 1e-12);
    }

    #[test]
    fn pearson_identity_and_negation() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn pearson_length_mismatch() {
        assert!(matches!(
            pearson(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn discretize_median_split() {
        let ids = discretize(&[1.0, 2.0, 3.0, 4.0], &BinningSpec { num_bins: 2 }).unwrap();
        assert_eq!(ids, vec![0, 0, 1, 1]);
    }

    #[test]
    fn discretize_constant_column() {
        let ids = discretize(&[5.0; 8], &BinningSpec::default()).unwrap();
        assert!(ids.iter().all(|&i| i == 0));
    }

    #[test]
    fn discretize_uniform_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ids = discretize(&v, &BinningSpec { num_bins: 10 }).unwrap();
        let mut counts = [0usize; 10];
        for &i in &ids {
            counts[i] += 1;
        }
        for &c in &counts {
            assert!((99..=101).contains(&c), "bin count {c} outside 100 +/- 1");
        }
    }

    #[test]
    fn mi_perfect_dependence() {
        let x = vec![0, 1, 0, 1];
        let mi = mutual_info(&x, &x).unwrap();
        assert!((mi - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn mi_independence() {
        let mi = mutual_info(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn mi_matches_table_oracle() {
        // joint counts {(0,0):3,(0,1):1,(1,0):1,(1,1):3}
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b, c) in [(0, 0, 3), (0, 1, 1), (1, 0, 1), (1, 1, 3)] {
            for _ in 0..c {
                x.push(a);
                y.push(b);
            }
        }
        let mi = mutual_info(&x, &y).unwrap();
        // direct summation over the 2x2 table
        let n = 8.0;
        let mut oracle = 0.0f64;
        let table: [(f64, f64, f64); 4] = [
            (3.0 / n, 0.5, 0.5),
            (1.0 / n, 0.5, 0.5),
            (1.0 / n, 0.5, 0.5),
            (3.0 / n, 0.5, 0.5),
        ];
        for (pab, pa, pb) in table {
            oracle += pab * (pab / (pa * pb)).ln();
        }
        assert!((mi - oracle).abs() < 1e-12);
    }

    #[test]
    fn mi_relevance_finds_defining_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400;
        let f3: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<usize> = f3.iter().map(|&v| usize::from(v > 0.5)).collect();
        let noise = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cols = vec![noise(&mut rng), noise(&mut rng), noise(&mut rng), f3.clone()];
        let d = Dataset::from_columns("t", cols, labels, None).unwrap();
        let scores = mi_relevance(&d, &[0, 1, 2, 3], &BinningSpec::default()).unwrap();
        let best = scores
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(&i, _)| i)
            .unwrap();
        assert_eq!(best, 3);
        // pure noise features stay near zero
        for i in 0..3 {
            assert!(scores[&i] < 0.05, "noise MI {} too large", scores[&i]);
        }
        // duplicated columns score identically
        let cols2 = vec![d.columns[3].clone(), d.columns[3].clone()];
        let d2 = Dataset::from_columns("t2", cols2, d.labels.clone(), None).unwrap();
        let s2 = mi_relevance(&d2, &[0, 1], &BinningSpec::default()).unwrap();
        assert_eq!(s2[&0], s2[&1]);
    }

    proptest! {
        #[test]
        fn mi_symmetry_and_nonnegativity(pairs in prop::collection::vec((0usize..4, 0usize..4), 2..60)) {
            let x: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let a = mutual_info(&x, &y).unwrap();
            let b = mutual_info(&y, &x).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn pearson_in_range(v in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 2..50)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            let r = pearson(&x, &y).unwrap();
            prop_assert!(r.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn discretize_ids_dense(v in prop::collection::vec(-100f64..100.0, 1..80), bins in 2usize..12) {
            let ids = discretize(&v, &BinningSpec { num_bins: bins }).unwrap();
            let max = *ids.iter().max().unwrap();
            for k in 0..=max {
                prop_assert!(ids.contains(&k));
            }
        }
    }

    #[test]
    fn mi_of_self_is_entropy() {
        let x = vec![0, 0, 1, 2, 2, 2];
        let h = entropy(&x).unwrap();
        let oracle = -(2.0 / 6.0f64 * (2.0 / 6.0f64).ln()
            + 1.0 / 6.0 * (1.0 / 6.0f64).ln()
            + 3.0 / 6.0 * (3.0 / 6.0f64).ln());
        assert!((h - oracle).abs() < 1e-12);
    }
}
