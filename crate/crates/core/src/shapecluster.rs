//! Agglomerative clustering of regions by signal profile, and dynamic time
//! warping between forecast and actual curves.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{PanelDataset, PanelError};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("profile `{item}` has length {got}, expected {expected}")]
    DimensionMismatch { item: String, got: usize, expected: usize },
    #[error("requested {k} clusters from {n} profiles")]
    KTooLarge { k: usize, n: usize },
    #[error("requested {count} regions from {k} clusters")]
    CountExceedsClusters { count: usize, k: usize },
    #[error("DTW needs two nonempty series")]
    EmptySeries,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Average, Linkage::Single, Linkage::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        }
    }
}

impl FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| ClusterError::Invalid(format!("unknown linkage `{s}` (expected average, single, complete)")))
    }
}

/// One merge: the two clusters (named by their smallest item index) and
/// the linkage distance between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Items in sorted order; `labels[i]` belongs to `items[i]`.
    pub items: Vec<String>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub linkage: Linkage,
    pub linkage_trace: Vec<Merge>,
}

impl ClusterAssignment {
    pub fn label_of(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|x| x == item).map(|i| self.labels[i])
    }

    pub fn by_item(&self) -> BTreeMap<String, usize> {
        self.items.iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    pub fn members(&self, label: usize) -> Vec<&str> {
        self.items
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(s, _)| s.as_str())
            .collect()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Bottom-up merging under Euclidean distance until `k` clusters remain.
///
/// Items are processed in key order, so the result does not depend on how
/// the map was built. Among equal linkage distances the pair with the
/// smallest `(min id, max id)` merges first, a cluster's id being its
/// smallest item index. Labels are numbered by first member.
pub fn agglomerate(profiles: &BTreeMap<String, Vec<f64>>, k: usize, linkage: Linkage) -> Result<ClusterAssignment> {
    let n = profiles.len();
    if k == 0 || k > n {
        return Err(ClusterError::KTooLarge { k, n });
    }
    let items: Vec<String> = profiles.keys().cloned().collect();
    let vecs: Vec<&Vec<f64>> = profiles.values().collect();
    let dim = vecs[0].len();
    for (name, v) in profiles {
        if v.len() != dim {
            return Err(ClusterError::DimensionMismatch { item: name.clone(), got: v.len(), expected: dim });
        }
    }
    let point: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| euclidean(vecs[i], vecs[j])).collect()).collect();

    // active clusters, each a sorted member list; ids are members[0]
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut trace = Vec::with_capacity(n - k);
    let linkage_dist = |a: &[usize], b: &[usize]| -> f64 {
        let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)));
        match linkage {
            Linkage::Single => pairs.map(|(i, j)| point[i][j]).fold(f64::INFINITY, f64::min),
            Linkage::Complete => pairs.map(|(i, j)| point[i][j]).fold(0.0, f64::max),
            Linkage::Average => pairs.map(|(i, j)| point[i][j]).sum::<f64>() / (a.len() * b.len()) as f64,
        }
    };
    while clusters.len() > k {
        // clusters stay sorted by id, so scanning (a < b) visits pairs in
        // lexicographic id order and strict `<` keeps the first minimum
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = linkage_dist(&clusters[a], &clusters[b]);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (d, a, b) = best;
        trace.push(Merge { i: clusters[a][0], j: clusters[b][0], distance: d });
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
    }
    let mut labels = vec![0; n];
    for (label, c) in clusters.iter().enumerate() {
        for &i in c {
            labels[i] = label;
        }
    }
    Ok(ClusterAssignment { items, labels, k, linkage, linkage_trace: trace })
}

/// Picks one item from each of `count` distinct clusters, seeded.
pub fn sample_cross_cluster(assign: &ClusterAssignment, count: usize, seed: u64) -> Result<Vec<String>> {
    if count > assign.k {
        return Err(ClusterError::CountExceedsClusters { count, k: assign.k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..assign.k).collect();
    labels.shuffle(&mut rng);
    Ok(labels[..count]
        .iter()
        .map(|&l| {
            let members = assign.members(l);
            members[rng.random_range(0..members.len())].to_string()
        })
        .collect())
}

/// How a region's signal history becomes one clustering vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// Time-averaged value of each feature (missing cells skipped).
    #[default]
    Mean,
    /// The full feature series, concatenated in date order.
    Flatten,
}

/// Per-region profile vectors over `features`.
pub fn region_profiles(
    ds: &PanelDataset,
    features: &[String],
    mode: ProfileMode,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let cols = features.iter().map(|f| ds.column_index(f)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = BTreeMap::new();
    for region in ds.regions() {
        let rows = ds.region_rows(region)?;
        let m = ds.matrix(&rows, &cols);
        let v: Vec<f64> = match mode {
            ProfileMode::Mean => m
                .columns()
                .into_iter()
                .map(|c| {
                    let (s, n) = c.iter().filter(|v| !v.is_nan()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    if n == 0 {
                        f64::NAN
                    } else {
                        s / n as f64
                    }
                })
                .collect(),
            ProfileMode::Flatten => m.iter().copied().collect(),
        };
        if v.iter().any(|x| x.is_nan()) {
            return Err(ClusterError::Invalid(format!("region `{region}` has a feature with no observations")));
        }
        out.insert(region.clone(), v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distance: f64,
    pub path: Vec<(usize, usize)>,
}

/// Unconstrained DTW with `|a_i - b_j|` cost and steps (1,0), (0,1), (1,1).
///
/// When tracing back, the diagonal predecessor wins ties, then the one
/// reached by a (1,0) step.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<DtwResult> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(ClusterError::EmptySeries);
    }
    let idx = |i: usize, j: usize| i * m + j;
    let mut d = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let cost = (a[i] - b[j]).abs();
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { d[idx(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { d[idx(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { d[idx(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            d[idx(i, j)] = cost + prev;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { d[idx(i - 1, j - 1)] } else { f64::INFINITY };
        let up = if i > 0 { d[idx(i - 1, j)] } else { f64::INFINITY };
        let left = if j > 0 { d[idx(i, j - 1)] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult { distance: d[idx(n - 1, m - 1)], path })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(points: &[&[f64]]) -> BTreeMap<String, Vec<f64>> {
        points.iter().enumerate().map(|(i, p)| (format!("r{i}"), p.to_vec())).collect()
    }

    #[test]
    fn two_obvious_groups() {
        let p = profiles(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 10.0], &[10.0, 11.0]]);
        for l in Linkage::ALL {
            let a = agglomerate(&p, 2, l).unwrap();
            assert_eq!(a.labels, vec![0, 0, 1, 1], "{l:?}");
            assert_eq!(a.linkage_trace.len(), 2);
            assert!(a.linkage_trace.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }

    #[test]
    fn boundary_cases() {
        let p = profiles(&[&[1.0], &[2.0], &[4.0]]);
        let a = agglomerate(&p, 3, Linkage::Average).unwrap();
        assert_eq!(a.labels, vec![0, 1, 2]);
        assert!(a.linkage_trace.is_empty());
        assert!(matches!(agglomerate(&p, 4, Linkage::Average), Err(ClusterError::KTooLarge { k: 4, n: 3 })));
        let twins = profiles(&[&[3.0, 3.0], &[3.0, 3.0]]);
        let a = agglomerate(&twins, 1, Linkage::Single).unwrap();
        assert_eq!(a.linkage_trace[0].distance, 0.0);
        let bad = profiles(&[&[1.0], &[1.0, 2.0]]);
        assert!(matches!(agglomerate(&bad, 1, Linkage::Average), Err(ClusterError::DimensionMismatch { .. })));
    }

    #[test]
    fn tie_break_merges_lowest_ids_first() {
        // equally spaced points: every adjacent pair is at distance 1
        let p = profiles(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let a = agglomerate(&p, 3, Linkage::Single).unwrap();
        assert_eq!((a.linkage_trace[0].i, a.linkage_trace[0].j), (0, 1));
    }

    #[test]
    fn cross_cluster_sampling() {
        let p = profiles(&[&[0.0], &[0.1], &[5.0], &[5.1], &[9.0]]);
        let a = agglomerate(&p, 3, Linkage::Average).unwrap();
        let pick = sample_cross_cluster(&a, 3, 11).unwrap();
        let mut labels: Vec<usize> = pick.iter().map(|r| a.label_of(r).unwrap()).collect();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2]);
        assert_eq!(sample_cross_cluster(&a, 3, 11).unwrap(), pick);
        assert_eq!(sample_cross_cluster(&a, 1, 0).unwrap().len(), 1);
        assert!(matches!(sample_cross_cluster(&a, 4, 0), Err(ClusterError::CountExceedsClusters { .. })));
    }

    #[test]
    fn dtw_examples() {
        let s = [1.0, 3.0, 2.0];
        let r = dtw(&s, &s).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2)]);
        let r = dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.path.first(), Some(&(0, 0)));
        assert_eq!(r.path.last(), Some(&(2, 3)));
        let r = dtw(&[0.0], &[1.0]).unwrap();
        assert_eq!((r.distance, r.path), (1.0, vec![(0, 0)]));
        assert!(matches!(dtw(&[], &[1.0]), Err(ClusterError::EmptySeries)));
    }
}
