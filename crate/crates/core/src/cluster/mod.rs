//! Token clusters for cluster-based substitution.
//!
//! Tokens are embedded with skip-gram negative sampling and partitioned with
//! K-means; the cluster count is picked by the caller-supplied proxy
//! accuracy (the lowest accuracy wins, since a harder substitution task is
//! the goal).

mod kmeans;
mod skipgram;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kmeans::{kmeans, kmeans_fit, KMeansFit, MAX_LLOYD_ITERATIONS};
pub use skipgram::{train_skipgram, train_skipgram_ids, SkipGramConfig};

/// One real vector per vocabulary id, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingTable { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("rows of unequal width"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    /// `{"dim": d, "vectors": [[...], ...]}`, one vector per token id.
    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        let file = EmbeddingFile {
            dim: self.dim,
            vectors: self.values.chunks(self.dim).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json(reader: impl Read) -> Result<Self> {
        let file: EmbeddingFile = serde_json::from_reader(reader)?;
        if file.vectors.iter().any(|v| v.len() != file.dim) {
            return Err(Error::Format {
                format: "embedding table",
                message: format!("every vector must have {} entries", file.dim),
            });
        }
        Self::new(file.dim, file.vectors.concat())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingFile {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// A partition of the vocabulary into `n` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    n: usize,
    assignment: Vec<u32>,
    members: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct ClusterFile {
    n: usize,
    assignment: Vec<u32>,
}

impl ClusterMap {
    pub fn new(n: usize, assignment: Vec<u32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("cluster count must be positive"));
        }
        let mut members = vec![Vec::new(); n];
        for (id, &c) in assignment.iter().enumerate() {
            let slot = members.get_mut(c as usize).ok_or(Error::Range {
                what: "cluster",
                index: c as usize,
                size: n,
            })?;
            slot.push(id as u32);
        }
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(Error::Format {
                format: "cluster map",
                message: format!("cluster {c} is empty"),
            });
        }
        Ok(ClusterMap {
            n,
            assignment,
            members,
        })
    }

    /// Every id in one cluster.
    pub fn single(vocab_size: usize) -> Result<Self> {
        Self::new(1, vec![0; vocab_size])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vocab_size(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn cluster_of(&self, id: u32) -> usize {
        self.assignment[id as usize] as usize
    }

    pub fn members(&self, cluster: usize) -> &[u32] {
        &self.members[cluster]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Population variance of the cluster sizes.
    pub fn size_variance(&self) -> f64 {
        let sizes = self.sizes();
        let mean = sizes.iter().sum::<usize>() as f64 / self.n as f64;
        sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / self.n as f64
    }

    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        let file = ClusterFile {
            n: self.n,
            assignment: self.assignment.clone(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json(reader: impl Read) -> Result<Self> {
        let file: ClusterFile = serde_json::from_reader(reader)?;
        Self::new(file.n, file.assignment)
    }
}

/// Picks the candidate with the lowest proxy accuracy; ties go to the smaller
/// cluster count.
pub fn select_cluster_count(
    candidates: &[usize],
    mut proxy: impl FnMut(usize) -> Result<f64>,
) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &n in candidates {
        let acc = proxy(n)?;
        if acc.is_nan() {
            return Err(Error::Numeric(format!("proxy accuracy for n={n} is NaN")));
        }
        best = match best {
            Some((a, m)) if a < acc || (a == acc && m <= n) => Some((a, m)),
            _ => Some((acc, n)),
        };
    }
    best.map(|(_, n)| n)
        .ok_or_else(|| Error::config("no candidate cluster counts"))
}
