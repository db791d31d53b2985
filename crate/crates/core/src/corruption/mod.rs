//! Token-level corruption for the MLM, RTS, SLM and C-RTS objectives.
//!
//! Every function selects each non-special position independently with the
//! configured rate. Special tokens are never selected and never drawn as
//! replacements, and a replacement always differs from the token it
//! replaces. Unselected positions are copied unchanged.

mod crts;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{SpecialIds, Vocabulary};

pub use crts::{
    crts_corrupt, crts_update, target_cluster_distribution, CrtsConfig, FMatrix, Prediction,
};

pub const DEFAULT_RATE: f64 = 0.15;

/// The id space corruption draws from.
#[derive(Debug, Clone)]
pub struct TokenSpace {
    size: u32,
    specials: SpecialIds,
    regular: Vec<u32>,
}

impl TokenSpace {
    pub fn new(size: u32, specials: SpecialIds) -> Self {
        let regular = (0..size).filter(|&id| !specials.contains(id)).collect();
        TokenSpace {
            size,
            specials,
            regular,
        }
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    /// Non-special ids, ascending.
    pub fn regular(&self) -> &[u32] {
        &self.regular
    }

    fn check(&self, ids: &[u32]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.size) {
            Some(&id) => Err(Error::Range {
                what: "token id",
                index: id as usize,
                size: self.size as usize,
            }),
            None => Ok(()),
        }
    }

    fn eligible(&self, id: u32) -> bool {
        !self.specials.contains(id)
    }

    /// Uniform regular token different from `original`.
    fn draw_other<R: Rng + ?Sized>(&self, original: u32, rng: &mut R) -> Result<u32> {
        draw_excluding(&self.regular, original, rng)
            .ok_or_else(|| Error::config("need at least two regular tokens to substitute"))
    }
}

impl From<&Vocabulary> for TokenSpace {
    fn from(v: &Vocabulary) -> Self {
        TokenSpace::new(v.len() as u32, v.specials())
    }
}

/// Uniform draw from the sorted `pool` that never returns `original`.
pub(crate) fn draw_excluding<R: Rng + ?Sized>(pool: &[u32], original: u32, rng: &mut R) -> Option<u32> {
    match pool.binary_search(&original) {
        Ok(pos) => {
            if pool.len() < 2 {
                return None;
            }
            let r = rng.random_range(0..pool.len() - 1);
            Some(pool[if r >= pos { r + 1 } else { r }])
        }
        Err(_) if pool.is_empty() => None,
        Err(_) => Some(pool[rng.random_range(0..pool.len())]),
    }
}

/// Corrupted sequence plus training targets.
///
/// `labels[i]` is the original id (MLM, SLM) at selected positions, or the
/// replaced flag `0`/`1` (RTS, C-RTS) at every position; `None` where the
/// objective predicts nothing. `prov` holds the `(source, target)` cluster of
/// every replacement, in position order, for C-RTS only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionOutput {
    pub ids: Vec<u32>,
    pub labels: Vec<Option<u32>>,
    pub mask: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prov: Option<Vec<(u32, u32)>>,
}

impl CorruptionOutput {
    fn identity(ids: &[u32]) -> Self {
        CorruptionOutput {
            ids: ids.to_vec(),
            labels: vec![None; ids.len()],
            mask: vec![false; ids.len()],
            prov: None,
        }
    }

    pub fn selected(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::config(format!("corruption rate {rate} outside [0, 1]")))
    }
}

/// Branch probabilities for selected MLM positions; the remainder stays
/// unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlmConfig {
    pub rate: f64,
    pub mask_prob: f64,
    pub random_prob: f64,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            rate: DEFAULT_RATE,
            mask_prob: 0.8,
            random_prob: 0.1,
        }
    }
}

impl MlmConfig {
    pub fn validate(&self) -> Result<()> {
        check_rate(self.rate)?;
        if !(self.mask_prob >= 0.0 && self.random_prob >= 0.0 && self.mask_prob + self.random_prob <= 1.0) {
            return Err(Error::config(format!(
                "MLM branch probabilities mask_prob {} / random_prob {} do not form a distribution",
                self.mask_prob, self.random_prob
            )));
        }
        Ok(())
    }
}

/// Selected positions become `<mask>` (80%), a different random token
/// (10%) or stay unchanged (10%); labels are the original ids.
pub fn mlm_corrupt<R: Rng + ?Sized>(
    ids: &[u32],
    cfg: &MlmConfig,
    space: &TokenSpace,
    rng: &mut R,
) -> Result<CorruptionOutput> {
    cfg.validate()?;
    space.check(ids)?;
    let mut out = CorruptionOutput::identity(ids);
    for (i, &id) in ids.iter().enumerate() {
        if !space.eligible(id) || !rng.random_bool(cfg.rate) {
            continue;
        }
        out.mask[i] = true;
        out.labels[i] = Some(id);
        let u: f64 = rng.random();
        if u < cfg.mask_prob {
            out.ids[i] = space.specials.mask;
        } else if u < cfg.mask_prob + cfg.random_prob {
            out.ids[i] = space.draw_other(id, rng)?;
        }
    }
    Ok(out)
}

fn substitute<R: Rng + ?Sized>(
    ids: &[u32],
    rate: f64,
    space: &TokenSpace,
    rng: &mut R,
) -> Result<CorruptionOutput> {
    check_rate(rate)?;
    space.check(ids)?;
    let mut out = CorruptionOutput::identity(ids);
    for (i, &id) in ids.iter().enumerate() {
        if space.eligible(id) && rng.random_bool(rate) {
            out.mask[i] = true;
            out.ids[i] = space.draw_other(id, rng)?;
        }
    }
    Ok(out)
}

/// Selected positions get a uniformly drawn different token; every position
/// is labelled `1` if replaced, `0` otherwise.
pub fn rts_corrupt<R: Rng + ?Sized>(
    ids: &[u32],
    rate: f64,
    space: &TokenSpace,
    rng: &mut R,
) -> Result<CorruptionOutput> {
    let mut out = substitute(ids, rate, space, rng)?;
    out.labels = out.mask.iter().map(|&m| Some(m as u32)).collect();
    Ok(out)
}

/// Like RTS, but selected positions are labelled with their original id.
pub fn slm_corrupt<R: Rng + ?Sized>(
    ids: &[u32],
    rate: f64,
    space: &TokenSpace,
    rng: &mut R,
) -> Result<CorruptionOutput> {
    let mut out = substitute(ids, rate, space, rng)?;
    for (i, &m) in out.mask.iter().enumerate() {
        if m {
            out.labels[i] = Some(ids[i]);
        }
    }
    Ok(out)
}
