//! Naive staged trees: every feature depth is split into exactly |C| stages
//! by k-means over the vertices' estimated conditional distributions.

use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::Dataset;
use crate::tree::StagedTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Additive smoothing of the clustered probability vectors.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 100,
            smoothing: 1.0,
            seed: 0,
        }
    }
}

/// [`kmeans_naive_staging_with`] with default iterations and Laplace smoothing.
pub fn kmeans_naive_staging(data: &Dataset, restarts: usize, seed: u64) -> Result<StagedTree> {
    kmeans_naive_staging_with(
        data,
        &KMeansConfig {
            restarts,
            seed,
            ..KMeansConfig::default()
        },
    )
}

pub fn kmeans_naive_staging_with(data: &Dataset, cfg: &KMeansConfig) -> Result<StagedTree> {
    if cfg.restarts == 0 {
        return Err(Error::Domain("k-means needs at least one restart".into()));
    }
    if !(cfg.smoothing >= 0.0 && cfg.smoothing.is_finite()) {
        return Err(Error::Domain(format!("invalid smoothing {}", cfg.smoothing)));
    }
    let schema = Arc::clone(data.schema());
    let k = schema.class_cardinality();
    let full = StagedTree::full(Arc::clone(&schema))?;
    let counts = crate::learn::stage_counts(&full, data.rows());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut labels = vec![vec![0u32]];
    for (depth, counts) in counts.iter().enumerate().skip(1) {
        let card = schema.cardinality(depth);
        let points: Vec<Vec<f64>> = counts
            .chunks_exact(card)
            .map(|c| vertex_vector(c, cfg.smoothing))
            .collect();
        let mut assign = best_of_restarts(&points, k, cfg, &mut rng);
        pad_clusters(&mut assign, k, depth);
        labels.push(assign.into_iter().map(|a| a as u32).collect());
    }
    StagedTree::from_labels(schema, labels)
}

fn vertex_vector(counts: &[u64], alpha: f64) -> Vec<f64> {
    let c = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    if total == 0 && alpha == 0.0 {
        return vec![1.0 / c; counts.len()];
    }
    let den = total as f64 + alpha * c;
    counts.iter().map(|&n| (n as f64 + alpha) / den).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding.
fn init_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[pick].clone());
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<usize>, f64) {
    let k = centers.len();
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centers);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            sizes[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            } else {
                // reseed an empty cluster at the point farthest from its center
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centers[assign[i]])))
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                centers[j] = points[far].clone();
            }
        }
    }
    let sse = points.iter().zip(&assign).map(|(p, &a)| sq_dist(p, &centers[a])).sum();
    (assign, sse)
}

fn best_of_restarts(points: &[Vec<f64>], k: usize, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if points.len() <= k {
        return (0..points.len()).collect();
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..cfg.restarts {
        let centers = init_centers(points, k, rng);
        let (assign, sse) = lloyd(points, centers, cfg.max_iter);
        if best.as_ref().is_none_or(|(_, b)| sse < *b) {
            best = Some((assign, sse));
        }
    }
    best.expect("at least one restart").0
}

/// Ensures exactly `k` non-empty clusters by splitting the largest ones.
fn pad_clusters(assign: &mut [usize], k: usize, depth: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assign.iter() {
        sizes[a] += 1;
    }
    let empty: Vec<usize> = (0..k).filter(|&j| sizes[j] == 0).collect();
    if empty.is_empty() {
        return;
    }
    warn!(
        "depth {depth}: only {} distinct clusters for {k} classes; splitting the largest",
        k - empty.len()
    );
    for target in empty {
        let largest = (0..k).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
        if sizes[largest] < 2 {
            break;
        }
        let last = assign.iter().rposition(|&a| a == largest).unwrap();
        assign[last] = target;
        sizes[largest] -= 1;
        sizes[target] += 1;
    }
}
