use rand::Rng;
use rayon::prelude::*;

use super::{ClusterMap, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rng::keyed;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Outcome of the best restart.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub map: ClusterMap,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub trace: Vec<f64>,
    pub restart: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Restart {
    assignment: Vec<u32>,
    inertia: f64,
    trace: Vec<f64>,
}

fn plus_plus_init(e: &EmbeddingTable, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let rows = e.rows();
    let mut centers = vec![e.row(rng.random_range(0..rows)).to_vec()];
    let mut dist: Vec<f64> = (0..rows).map(|i| sq_dist(e.row(i), &centers[0])).collect();
    while centers.len() < n {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut x = rng.random::<f64>() * total;
            let mut chosen = rows - 1;
            for (i, &d) in dist.iter().enumerate() {
                if x < d {
                    chosen = i;
                    break;
                }
                x -= d;
            }
            chosen
        } else {
            rng.random_range(0..rows)
        };
        let c = e.row(pick).to_vec();
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(e.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(e: &EmbeddingTable, n: usize, seed: u64, restart: usize) -> Restart {
    let mut rng = keyed(seed, restart as u64);
    let rows = e.rows();
    let dim = e.dim();
    let mut centers = plus_plus_init(e, n, &mut rng);
    let mut assignment = vec![u32::MAX; rows];
    let mut dist = vec![0.0; rows];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for i in 0..rows {
            let mut best = (f64::INFINITY, 0u32);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(e.row(i), center);
                if d < best.0 {
                    best = (d, c as u32);
                }
            }
            changed |= assignment[i] != best.1;
            assignment[i] = best.1;
            dist[i] = best.0;
        }

        // an empty cluster takes the point farthest from its own center,
        // drawn from a cluster that can spare one
        let mut sizes = vec![0usize; n];
        for &a in &assignment {
            sizes[a as usize] += 1;
        }
        for c in 0..n {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..rows)
                .filter(|&i| sizes[assignment[i] as usize] >= 2)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("n <= rows leaves a cluster with two members");
            sizes[assignment[far] as usize] -= 1;
            sizes[c] = 1;
            assignment[far] = c as u32;
            dist[far] = 0.0;
            centers[c] = e.row(far).to_vec();
            changed = true;
        }

        let inertia: f64 = dist.iter().sum();
        trace.push(inertia);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; n];
        for i in 0..rows {
            for (s, v) in sums[assignment[i] as usize].iter_mut().zip(e.row(i)) {
                *s += v;
            }
        }
        for c in 0..n {
            centers[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
        }
    }
    Restart {
        assignment,
        inertia: *trace.last().unwrap_or(&0.0),
        trace,
    }
}

/// K-means++ seeding plus Lloyd iterations, repeated `restarts` times in
/// parallel. The lowest final inertia wins; ties go to the earlier restart.
pub fn kmeans_fit(e: &EmbeddingTable, n: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    if n == 0 || n > e.rows() {
        return Err(Error::config(format!(
            "cluster count {n} must be in 1..={}",
            e.rows()
        )));
    }
    if restarts == 0 {
        return Err(Error::config("at least one restart is required"));
    }
    let runs: Vec<Restart> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(e, n, seed, r))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.inertia < a.1.inertia { b } else { a })
        .expect("restarts > 0");
    Ok(KMeansFit {
        map: ClusterMap::new(n, best.assignment)?,
        inertia: best.inertia,
        trace: best.trace,
        restart,
    })
}

pub fn kmeans(e: &EmbeddingTable, n: usize, restarts: usize, seed: u64) -> Result<ClusterMap> {
    kmeans_fit(e, n, restarts, seed).map(|f| f.map)
}
