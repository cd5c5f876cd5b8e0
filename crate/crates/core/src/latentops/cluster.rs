use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};

const MAX_ITERS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cumulative_coverage: f64,
    pub purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    #[serde(rename = "K")]
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Per-cluster purity, indexed by cluster id (0 for empty clusters).
    pub purities: Vec<f64>,
    pub purity_curve: Vec<CurvePoint>,
    pub auc: f64,
}

impl ClusterResult {
    /// Fraction of all items that carry their cluster's majority label.
    pub fn overall_purity(&self) -> f64 {
        self.auc
    }
}

/// Plain k-means (Lloyd) with k-means++ seeding.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    if k == 0 {
        return Err(Error::InvalidK("K must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidK(format!(
            "K = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    let d = points[0].len();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut dist: Vec<f64> = points.iter().map(|p| sq(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in dist.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            // duplicates only: take any point not chosen yet
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq(p, &points[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].clone()).collect();
    let mut assignments = vec![usize::MAX; points.len()];

    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq(p, &centroids[a]).total_cmp(&sq(p, &centroids[b])))
                .unwrap();
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // re-seed an empty cluster at the point farthest from its centroid
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq(&points[a], &centroids[assignments[a]])
                            .total_cmp(&sq(&points[b], &centroids[assignments[b]]))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
            }
        }
    }
    Ok((assignments, centroids))
}

/// Purity per cluster and the purity vs. cumulative-coverage curve (clusters sorted by purity, descending).
pub fn purity_curve(assignments: &[usize], labels: &[String], k: usize) -> (Vec<f64>, Vec<CurvePoint>, f64) {
    let total = assignments.len() as f64;
    let mut per: Vec<HashMap<&str, usize>> = vec![HashMap::new(); k];
    for (&a, l) in assignments.iter().zip(labels) {
        *per[a].entry(l.as_str()).or_default() += 1;
    }
    let stats: Vec<(usize, usize)> = per
        .iter()
        .map(|m| (m.values().sum(), m.values().copied().max().unwrap_or(0)))
        .collect();
    let purities: Vec<f64> = stats
        .iter()
        .map(|&(n, maj)| if n == 0 { 0.0 } else { maj as f64 / n as f64 })
        .collect();
    let mut order: Vec<usize> = (0..k).filter(|&c| stats[c].0 > 0).collect();
    order.sort_by(|&a, &b| {
        purities[b]
            .total_cmp(&purities[a])
            .then(stats[b].0.cmp(&stats[a].0))
            .then(a.cmp(&b))
    });
    let mut covered = 0usize;
    let mut majority = 0usize;
    let mut curve = Vec::with_capacity(order.len());
    for c in order {
        covered += stats[c].0;
        majority += stats[c].1;
        curve.push(CurvePoint {
            cumulative_coverage: covered as f64 / total,
            purity: purities[c],
        });
    }
    (purities, curve, majority as f64 / total)
}

/// k-means over flattened latent codes, scored against ground-truth `labels`.
pub fn cluster(codes: &[LatentCode], labels: &[String], k: usize, seed: u64) -> Result<ClusterResult> {
    if labels.len() != codes.len() {
        return Err(Error::shape("labels must be parallel to codes"));
    }
    if let Some(first) = codes.first() {
        for c in codes {
            first.check_same_shape(c)?;
        }
    }
    let points: Vec<Vec<f64>> = codes
        .iter()
        .map(|c| c.values.iter().map(|&v| v as f64).collect())
        .collect();
    cluster_points(&points, labels, k, seed)
}

pub fn cluster_points(points: &[Vec<f64>], labels: &[String], k: usize, seed: u64) -> Result<ClusterResult> {
    let (assignments, centroids) = kmeans(points, k, seed)?;
    let (purities, purity_curve, auc) = purity_curve(&assignments, labels, k);
    Ok(ClusterResult {
        k,
        assignments,
        centroids,
        purities,
        purity_curve,
        auc,
    })
}
