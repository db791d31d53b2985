//! Objective-specific batches and the training loop.
//!
//! Every objective turns its examples into [`EncoderInput`]s, runs the
//! encoder, applies its head and returns a summed loss together with summed
//! gradients. The trainer divides by the number of predictions, weights the
//! objectives and takes one optimizer step.
//!
//! [`EncoderInput`]: crate::model::EncoderInput

mod data;
mod toy;
mod trainer;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use data::{bundled_toy_corpus, JointItem, PairItem, SummaryItem, TaskConfig, TrainData};
pub use toy::ToySetup;
pub use trainer::{check_compatibility, ObjectiveBatch, Trainer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainObjective {
    Mlm,
    Rts,
    Crts,
    Slm,
    Ssp,
    Sp,
    Psd,
    Mspp,
    /// Encoder stand-in for summarization: predict the bag of first-paragraph
    /// tokens from `o_0` of the remaining paragraphs.
    SdsProxy,
}

impl TrainObjective {
    pub const ALL: [TrainObjective; 9] = [
        TrainObjective::Mlm,
        TrainObjective::Rts,
        TrainObjective::Crts,
        TrainObjective::Slm,
        TrainObjective::Ssp,
        TrainObjective::Sp,
        TrainObjective::Psd,
        TrainObjective::Mspp,
        TrainObjective::SdsProxy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainObjective::Mlm => "mlm",
            TrainObjective::Rts => "rts",
            TrainObjective::Crts => "crts",
            TrainObjective::Slm => "slm",
            TrainObjective::Ssp => "ssp",
            TrainObjective::Sp => "sp",
            TrainObjective::Psd => "psd",
            TrainObjective::Mspp => "mspp",
            TrainObjective::SdsProxy => "sds",
        }
    }

    pub fn is_token_level(self) -> bool {
        matches!(
            self,
            TrainObjective::Mlm | TrainObjective::Rts | TrainObjective::Crts | TrainObjective::Slm
        )
    }
}

impl fmt::Display for TrainObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        TrainObjective::ALL
            .into_iter()
            .find(|o| o.name() == key || (key == "sdsproxy" && *o == TrainObjective::SdsProxy))
            .ok_or_else(|| Error::config(format!("unknown training objective {s:?}")))
    }
}

/// Parses `"MLM (1.0) + SSP (0.5)"`; a term without a weight counts 1.0.
/// Commas work as separators too, and `mlm:1.0` is the same as `mlm (1.0)`.
pub fn parse_weights(spec: &str) -> Result<Vec<(TrainObjective, f64)>> {
    let mut out: Vec<(TrainObjective, f64)> = Vec::new();
    for term in spec.split(['+', ',']).map(str::trim) {
        if term.is_empty() {
            return Err(Error::config(format!("empty term in objective list {spec:?}")));
        }
        let (name, weight) = match term.split_once('(') {
            Some((name, rest)) => {
                let w = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::config(format!("unclosed weight in {term:?}")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad weight in {term:?}")))?;
                (name, w)
            }
            None => match term.split_once(':') {
                Some((name, w)) => {
                    let w: f64 = w
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad weight in {term:?}")))?;
                    (name, w)
                }
                None => (term, 1.0),
            },
        };
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::config(format!("weight of {term:?} must be finite and non-negative")));
        }
        let obj: TrainObjective = name.parse()?;
        if out.iter().any(|(o, _)| *o == obj) {
            return Err(Error::config(format!("objective {obj} listed twice")));
        }
        out.push((obj, weight));
    }
    Ok(out)
}

/// One line of the loss trace. Multi-objective runs also log a `total` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub objective: String,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    /// Losses of one objective in step order.
    pub fn losses(&self, objective: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.objective == objective).map(|r| r.loss).collect()
    }

    /// `step,objective,loss,lr` with a header line.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "step,objective,loss,lr")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.step, r.objective, r.loss, r.lr)?;
        }
        Ok(())
    }
}

/// Mean of the last `tail` losses over the mean of the first `head`.
pub fn loss_ratio(losses: &[f64], head: usize, tail: usize) -> Option<f64> {
    if losses.len() < head.max(tail) || head == 0 || tail == 0 {
        return None;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Some(mean(&losses[losses.len() - tail..]) / mean(&losses[..head]))
}
