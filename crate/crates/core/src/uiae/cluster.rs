//! Consumer clustering on sensitivity vectors (seeded k-means++).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Mass fraction per cluster.
    pub histogram: Vec<f64>,
    /// Set when fewer than `k` distinct clusters could be formed.
    pub reduced: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn cluster_consumers(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    if k == 0 || k > points.len() {
        return Err(Error::param(format!("k = {k} must be in 1..={}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::input("points must be finite and share one dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random_range(0.0..total);
        let mut pick = d2.iter().rposition(|d| *d > 0.0).unwrap_or(0);
        for (i, d) in d2.iter().enumerate() {
            if *d > 0.0 && r < *d {
                pick = i;
                break;
            }
            r -= d;
        }
        centers.push(points[pick].clone());
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(dist2(p, &centers[centers.len() - 1]));
        }
    }

    let mut assignment = vec![0; points.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centers);
            changed |= *a != c;
            *a = c;
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (a, p) in assignment.iter().zip(points) {
            counts[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), n) in centers.iter_mut().zip(sums).zip(&counts) {
            if *n > 0 {
                *c = s.into_iter().map(|v| v / *n as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }

    // drop empty clusters and renumber
    let mut counts = vec![0usize; centers.len()];
    for a in &assignment {
        counts[*a] += 1;
    }
    let mut remap = vec![usize::MAX; centers.len()];
    let mut kept = Vec::new();
    for (i, n) in counts.iter().enumerate() {
        if *n > 0 {
            remap[i] = kept.len();
            kept.push(i);
        }
    }
    let assignment: Vec<usize> = assignment.iter().map(|a| remap[*a]).collect();
    let n = points.len() as f64;
    let histogram = kept.iter().map(|&i| counts[i] as f64 / n).collect();
    let centers: Vec<Vec<f64>> = kept.iter().map(|&i| centers[i].clone()).collect();
    let reduced = centers.len() < k;
    if reduced {
        log::warn!("k-means reduced from {k} to {} clusters", centers.len());
    }
    Ok(Clustering { assignment, centers, histogram, reduced })
}
