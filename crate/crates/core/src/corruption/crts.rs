use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_rate, draw_excluding, CorruptionOutput, TokenSpace, DEFAULT_RATE};
use crate::cluster::ClusterMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrtsConfig {
    /// Softmax temperature applied after min-max normalization.
    pub gamma: f64,
    pub rate: f64,
}

impl Default for CrtsConfig {
    fn default() -> Self {
        CrtsConfig {
            gamma: 1.0,
            rate: DEFAULT_RATE,
        }
    }
}

impl CrtsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma {} must be positive", self.gamma)));
        }
        check_rate(self.rate)
    }
}

/// Signed success/failure tally per (source cluster, target cluster).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FMatrix {
    n: usize,
    counts: Vec<i64>,
}

impl FMatrix {
    pub fn zeros(n: usize) -> Self {
        FMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_counts(n: usize, counts: Vec<i64>) -> Result<Self> {
        if counts.len() != n * n {
            return Err(Error::shape(format!(
                "{} counts for a {n}x{n} matrix",
                counts.len()
            )));
        }
        Ok(FMatrix { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> i64 {
        self.counts[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[i64] {
        &self.counts[a * self.n..(a + 1) * self.n]
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    /// Adds another tally of the same size, e.g. a per-worker delta.
    pub fn merge(&mut self, other: &FMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::shape(format!(
                "cannot merge {}x{} into {}x{}",
                other.n, other.n, self.n, self.n
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `n` as u64 followed by the n² counts as i64, all little endian.
    pub fn write_binary(&self, mut writer: impl Write) -> Result<()> {
        let io = |e| Error::io("<f matrix>", e);
        writer.write_all(&(self.n as u64).to_le_bytes()).map_err(io)?;
        for c in &self.counts {
            writer.write_all(&c.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_binary(mut reader: impl Read) -> Result<Self> {
        let bad = |m: String| Error::Format {
            format: "f matrix",
            message: m,
        };
        let mut word = [0u8; 8];
        reader
            .read_exact(&mut word)
            .map_err(|e| bad(format!("missing size: {e}")))?;
        let n = u64::from_le_bytes(word) as usize;
        let cells = n
            .checked_mul(n)
            .ok_or_else(|| bad(format!("size {n} overflows")))?;
        let mut counts = Vec::with_capacity(cells.min(1 << 24));
        for i in 0..cells {
            reader
                .read_exact(&mut word)
                .map_err(|e| bad(format!("truncated at cell {i}: {e}")))?;
            counts.push(i64::from_le_bytes(word));
        }
        if reader.read(&mut word).map_err(|e| Error::io("<f matrix>", e))? != 0 {
            return Err(bad("trailing bytes".into()));
        }
        Ok(FMatrix { n, counts })
    }
}

/// Min-max normalizes `row` to [0, 1] and applies a softmax with
/// temperature `gamma`. A constant row gives the uniform distribution.
pub fn target_cluster_distribution(row: &[i64], gamma: f64) -> Vec<f64> {
    let n = row.len();
    let (Some(&min), Some(&max)) = (row.iter().min(), row.iter().max()) else {
        return Vec::new();
    };
    if min == max {
        return vec![1.0 / n as f64; n];
    }
    let span = (max as i128 - min as i128) as f64;
    // the maximum normalized value is 1, so shifting by 1/gamma keeps every
    // exponent <= 0
    let weights: Vec<f64> = row
        .iter()
        .map(|&f| {
            let norm = (f as i128 - min as i128) as f64 / span;
            ((norm - 1.0) / gamma).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Outcome the detector assigned to a replaced position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// The detector was fooled: a sampler success.
    Original,
    /// The detector caught the replacement.
    Replaced,
}

/// Cluster-aware substitution. A selected token from cluster `a` is replaced
/// by a token from cluster `b ~ target_cluster_distribution(F[a], gamma)`,
/// uniform inside `b`. Clusters without a usable replacement are dropped
/// from the draw and the rest renormalized.
pub fn crts_corrupt<R: Rng + ?Sized>(
    ids: &[u32],
    cfg: &CrtsConfig,
    clusters: &ClusterMap,
    f: &FMatrix,
    space: &TokenSpace,
    rng: &mut R,
) -> Result<CorruptionOutput> {
    cfg.validate()?;
    if clusters.n() != f.n() {
        return Err(Error::config(format!(
            "cluster map has {} clusters but F is {}x{}",
            clusters.n(),
            f.n(),
            f.n()
        )));
    }
    if clusters.vocab_size() != space.size() as usize {
        return Err(Error::config(format!(
            "cluster map covers {} ids, vocabulary has {}",
            clusters.vocab_size(),
            space.size()
        )));
    }
    space.check(ids)?;
    let pools: Vec<Vec<u32>> = (0..clusters.n())
        .map(|c| {
            clusters
                .members(c)
                .iter()
                .copied()
                .filter(|&id| space.eligible(id))
                .collect()
        })
        .collect();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; clusters.n()];
    let mut out = CorruptionOutput::identity(ids);
    let mut prov = Vec::new();
    for (i, &id) in ids.iter().enumerate() {
        if !space.eligible(id) || !rng.random_bool(cfg.rate) {
            continue;
        }
        let a = clusters.cluster_of(id);
        let dist = rows[a].get_or_insert_with(|| target_cluster_distribution(f.row(a), cfg.gamma));
        let usable = |b: usize| pools[b].iter().any(|&t| t != id);
        let total: f64 = (0..dist.len()).filter(|&b| usable(b)).map(|b| dist[b]).sum();
        if total <= 0.0 {
            return Err(Error::config("need at least two regular tokens to substitute"));
        }
        let mut x = rng.random::<f64>() * total;
        let mut b = None;
        for (c, &p) in dist.iter().enumerate() {
            if !usable(c) {
                continue;
            }
            b = Some(c);
            if x < p {
                break;
            }
            x -= p;
        }
        let b = b.expect("at least one usable cluster");
        out.mask[i] = true;
        out.ids[i] = draw_excluding(&pools[b], id, rng).expect("usable cluster");
        prov.push((a as u32, b as u32));
    }
    out.labels = out.mask.iter().map(|&m| Some(m as u32)).collect();
    out.prov = Some(prov);
    Ok(out)
}

/// Adds `+1` to `F[a, b]` for every replacement the detector called
/// original and `-1` for every one it caught.
pub fn crts_update(f: &mut FMatrix, predictions: &[Prediction], prov: &[(u32, u32)]) -> Result<()> {
    if predictions.len() != prov.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} replacements",
            predictions.len(),
            prov.len()
        )));
    }
    for &(a, b) in prov {
        for c in [a, b] {
            if c as usize >= f.n {
                return Err(Error::Range {
                    what: "cluster",
                    index: c as usize,
                    size: f.n,
                });
            }
        }
    }
    for (p, &(a, b)) in predictions.iter().zip(prov) {
        let cell = &mut f.counts[a as usize * f.n + b as usize];
        *cell += match p {
            Prediction::Original => 1,
            Prediction::Replaced => -1,
        };
    }
    Ok(())
}
