use ndarray::Array2;

use super::data::{JointItem, PairItem, SummaryItem, TaskConfig, TrainData};
use super::{LossTrace, TraceRow, TrainObjective};
use crate::corruption::{crts_corrupt, crts_update, mlm_corrupt, rts_corrupt, slm_corrupt, FMatrix, Prediction};
use crate::error::{Error, Result};
use crate::model::{
    cross_entropy_sum, gather_rows, head_binary, head_binary_backward, head_joint, head_joint_backward,
    head_lm, head_lm_backward, head_pair, head_pair_backward, scatter_rows, soft_cross_entropy_sum,
    triangular_lr, EncoderInput, Layout, Mat, Model, ModelConfig, ModelParams, Optimizer, TrainConfig,
};
use crate::rng::{keyed, sub_seed, Rng};
use rand::Rng as _;

/// Summed loss and gradients of one objective over one batch.
#[derive(Debug, Clone)]
pub struct ObjectiveBatch {
    pub loss_sum: f64,
    /// Number of predictions the loss is summed over.
    pub count: usize,
    pub grads: ModelParams,
    /// Detector verdicts and cluster pairs of every C-RTS replacement.
    pub crts: Vec<(Vec<Prediction>, Vec<(u32, u32)>)>,
}

impl ObjectiveBatch {
    pub fn loss(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.loss_sum / self.count as f64
        }
    }
}

struct Partial {
    loss: f64,
    count: usize,
}

/// Checks that the model can serve every objective: MSPP needs a
/// multi-slot layout with one prediction per candidate.
pub fn check_compatibility(
    model_cfg: &ModelConfig,
    task: &TaskConfig,
    objectives: &[(TrainObjective, f64)],
) -> Result<()> {
    if objectives.is_empty() {
        return Err(Error::config("no training objective given"));
    }
    if objectives.iter().any(|(o, _)| *o == TrainObjective::Mspp) {
        let k = task.gen.mspp_quota.k();
        if model_cfg.layout == Layout::Pairwise || model_cfg.layout.k() != k {
            return Err(Error::config(format!(
                "MSPP with {k} candidates needs a fixed or flexible model.layout with k = {k}"
            )));
        }
        if model_cfg.head.outputs(k) != k {
            return Err(Error::config(format!(
                "MSPP needs one prediction per candidate; model.head {:?} gives one in total",
                model_cfg.head
            )));
        }
    }
    Ok(())
}

pub struct Trainer {
    model: Model,
    cfg: TrainConfig,
    task: TaskConfig,
    objectives: Vec<(TrainObjective, f64)>,
    data: TrainData,
    f: Option<FMatrix>,
    opt: Optimizer,
    step: usize,
}

impl Trainer {
    pub fn new(
        model_cfg: ModelConfig,
        cfg: TrainConfig,
        task: TaskConfig,
        objectives: Vec<(TrainObjective, f64)>,
        data: TrainData,
    ) -> Result<Self> {
        model_cfg.validate()?;
        cfg.validate()?;
        task.validate()?;
        if model_cfg.vocab_size != data.vocab.len() {
            return Err(Error::config(format!(
                "model.vocab_size = {} but the vocabulary has {} tokens",
                model_cfg.vocab_size,
                data.vocab.len()
            )));
        }
        check_compatibility(&model_cfg, &task, &objectives)?;
        let has = |o| objectives.iter().any(|(x, _)| *x == o);
        let f = if has(TrainObjective::Crts) {
            let clusters = data
                .clusters
                .as_ref()
                .ok_or_else(|| Error::config("C-RTS needs a cluster map in the training data"))?;
            Some(FMatrix::zeros(clusters.n()))
        } else {
            None
        };
        for (o, _) in &objectives {
            if data.pool_size(*o) == 0 {
                return Err(Error::insufficient(format!("no {o} examples in the training data")));
            }
        }
        let model = Model::new(model_cfg)?;
        let opt = Optimizer::new(&cfg, &model.params);
        Ok(Trainer { model, cfg, task, objectives, data, f, opt, step: 0 })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn f_matrix(&self) -> Option<&FMatrix> {
        self.f.as_ref()
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    fn batch_rng(&self, obj: TrainObjective, step: usize) -> Rng {
        let index = if self.cfg.fixed_batch { 0 } else { step };
        keyed(sub_seed(self.cfg.seed, &format!("train/{obj}")), index as u64)
    }

    /// Loss and gradients of `obj` on the batch of `step`, at the current
    /// parameters and statistics matrix.
    pub fn batch(&self, obj: TrainObjective, step: usize) -> Result<ObjectiveBatch> {
        let mut rng = self.batch_rng(obj, step);
        let pool = self.data.pool_size(obj);
        let picks: Vec<usize> = (0..self.cfg.batch_size).map(|_| rng.random_range(0..pool)).collect();
        let mut out = ObjectiveBatch {
            loss_sum: 0.0,
            count: 0,
            grads: self.model.params.zeros_like(),
            crts: Vec::new(),
        };
        for i in picks {
            let part = match obj {
                o if o.is_token_level() => self.token(o, &self.data.sequences[i], &mut rng, &mut out)?,
                TrainObjective::Mspp => self.joint(&self.data.joint[i], &mut out.grads)?,
                TrainObjective::SdsProxy => self.summary(&self.data.summaries[i], &mut out.grads)?,
                o => self.pair(&self.data.pairs[&o][i], &mut out.grads)?,
            };
            out.loss_sum += part.loss;
            out.count += part.count;
        }
        Ok(out)
    }

    fn bounded(&self, ids: &[u32]) -> Vec<u32> {
        let sp = self.data.vocab.specials();
        let mut seq = Vec::with_capacity(ids.len() + 2);
        seq.push(sp.bos);
        seq.extend(ids.iter().take(self.model.cfg.max_len - 2));
        seq.push(sp.eos);
        seq
    }

    fn token(&self, obj: TrainObjective, ids: &[u32], rng: &mut Rng, out: &mut ObjectiveBatch) -> Result<Partial> {
        let seq = self.bounded(ids);
        let space = &self.data.space;
        let c = match obj {
            TrainObjective::Mlm => mlm_corrupt(&seq, &self.task.mlm, space, rng)?,
            TrainObjective::Rts => rts_corrupt(&seq, self.task.rate, space, rng)?,
            TrainObjective::Slm => slm_corrupt(&seq, self.task.rate, space, rng)?,
            _ => {
                let clusters = self.data.clusters.as_ref().expect("checked at construction");
                let f = self.f.as_ref().expect("checked at construction");
                crts_corrupt(&seq, &self.task.crts, clusters, f, space, rng)?
            }
        };
        let input = EncoderInput::plain(c.ids.clone());
        let enc = self.model.forward(&input)?;
        let params = &self.model.params;
        let mut d_hidden = Mat::zeros(enc.hidden.dim());
        let (loss, count) = match obj {
            TrainObjective::Mlm | TrainObjective::Slm => {
                let rows: Vec<usize> = (0..c.labels.len()).filter(|&i| c.labels[i].is_some()).collect();
                if rows.is_empty() {
                    return Ok(Partial { loss: 0.0, count: 0 });
                }
                let labels: Vec<Option<usize>> = rows.iter().map(|&i| c.labels[i].map(|y| y as usize)).collect();
                let h = gather_rows(&enc.hidden, &rows);
                let (loss, g, n) = cross_entropy_sum(&head_lm(&h, params)?, &labels)?;
                let dh = head_lm_backward(&h, params, &g, &mut out.grads);
                scatter_rows(&mut d_hidden, &rows, &dh);
                (loss, n)
            }
            _ => {
                let labels: Vec<Option<usize>> = c.labels.iter().map(|y| y.map(|v| v as usize)).collect();
                let logits = head_binary(&enc.hidden, params)?;
                let (loss, g, n) = cross_entropy_sum(&logits, &labels)?;
                d_hidden = head_binary_backward(&enc.hidden, params, &g, &mut out.grads);
                if let Some(prov) = c.prov {
                    let verdicts = (0..c.mask.len())
                        .filter(|&i| c.mask[i])
                        .map(|i| {
                            if logits[[i, 1]] > logits[[i, 0]] {
                                Prediction::Replaced
                            } else {
                                Prediction::Original
                            }
                        })
                        .collect();
                    out.crts.push((verdicts, prov));
                }
                (loss, n)
            }
        };
        self.model.backward(&input, &enc, d_hidden, &mut out.grads)?;
        Ok(Partial { loss, count })
    }

    fn pair(&self, item: &PairItem, grads: &mut ModelParams) -> Result<Partial> {
        let sp = self.data.vocab.specials();
        let input = EncoderInput::pairwise(&item.l, &item.r, sp, self.model.cfg.max_len)?;
        let enc = self.model.forward(&input)?;
        let o = gather_rows(&enc.hidden, &[0]);
        let logits = head_pair(&o, &self.model.params)?;
        let (loss, g, count) = cross_entropy_sum(&logits, &[Some(usize::from(item.y))])?;
        let d_o = head_pair_backward(&o, &self.model.params, &g, grads);
        let mut d_hidden = Mat::zeros(enc.hidden.dim());
        scatter_rows(&mut d_hidden, &[0], &d_o);
        self.model.backward(&input, &enc, d_hidden, grads)?;
        Ok(Partial { loss, count })
    }

    fn joint(&self, item: &JointItem, grads: &mut ModelParams) -> Result<Partial> {
        let cfg = &self.model.cfg;
        let sp = self.data.vocab.specials();
        let k = cfg.layout.k();
        let mut spans: Vec<&[u32]> = vec![&item.pivot];
        spans.extend(item.cands.iter().take(k).map(Vec::as_slice));
        let input = match cfg.layout {
            Layout::Fixed { k, slot_len } => EncoderInput::fixed(&spans, k, slot_len, sp)?,
            Layout::Flexible { total, .. } => EncoderInput::flexible(&spans, total, sp)?,
            Layout::Pairwise => return Err(Error::config("MSPP cannot use the pairwise layout")),
        };
        let enc = self.model.forward(&input)?;
        let slots = enc.slot_outputs(&input);
        let logits = head_joint(cfg.head, &slots, k, &self.model.params)?;
        // candidates missing from a short group get no prediction
        let labels: Vec<Option<usize>> = (0..logits.nrows()).map(|i| item.ys.get(i).map(|&y| y as usize)).collect();
        let (loss, g, count) = cross_entropy_sum(&logits, &labels)?;
        let d_slots = head_joint_backward(cfg.head, &slots, k, &self.model.params, &g, grads)?;
        let mut d_hidden = Mat::zeros(enc.hidden.dim());
        scatter_rows(&mut d_hidden, &input.slots, &d_slots);
        self.model.backward(&input, &enc, d_hidden, grads)?;
        Ok(Partial { loss, count })
    }

    fn summary(&self, item: &SummaryItem, grads: &mut ModelParams) -> Result<Partial> {
        let vocab = self.model.cfg.vocab_size;
        let sp = self.data.vocab.specials();
        let mut target = Array2::<f64>::zeros((1, vocab));
        let mut n = 0.0;
        for &t in item.tgt.iter().filter(|&&t| !sp.contains(t)) {
            target[[0, t as usize]] += 1.0;
            n += 1.0;
        }
        if n == 0.0 {
            return Ok(Partial { loss: 0.0, count: 0 });
        }
        target /= n;
        let input = EncoderInput::plain(self.bounded(&item.src));
        let enc = self.model.forward(&input)?;
        let o = gather_rows(&enc.hidden, &[0]);
        let (loss, g) = soft_cross_entropy_sum(&head_lm(&o, &self.model.params)?, &target)?;
        let d_o = head_lm_backward(&o, &self.model.params, &g, grads);
        let mut d_hidden = Mat::zeros(enc.hidden.dim());
        scatter_rows(&mut d_hidden, &[0], &d_o);
        self.model.backward(&input, &enc, d_hidden, grads)?;
        Ok(Partial { loss, count: 1 })
    }

    /// One optimizer step over the weighted sum of objective losses.
    pub fn step(&mut self) -> Result<Vec<TraceRow>> {
        let step = self.step;
        let lr = triangular_lr(step, &self.cfg);
        let mut total = self.model.params.zeros_like();
        let mut rows = Vec::with_capacity(self.objectives.len() + 1);
        let mut weighted = 0.0;
        let mut updates = Vec::new();
        for &(obj, w) in &self.objectives {
            let b = self.batch(obj, step)?;
            if b.count > 0 {
                total.add_scaled(&b.grads, w / b.count as f64)?;
            }
            weighted += w * b.loss();
            rows.push(TraceRow { step, objective: obj.name().to_owned(), loss: b.loss(), lr });
            updates.extend(b.crts);
        }
        if self.objectives.len() > 1 {
            rows.push(TraceRow { step, objective: "total".to_owned(), loss: weighted, lr });
        }
        self.opt.step(&mut self.model.params, &total, lr)?;
        if !self.model.params.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged at step {step}")));
        }
        if let Some(f) = &mut self.f {
            for (verdicts, prov) in &updates {
                crts_update(f, verdicts, prov)?;
            }
        }
        self.step += 1;
        Ok(rows)
    }

    /// Steps until `total_steps`.
    pub fn run(&mut self) -> Result<LossTrace> {
        let mut trace = LossTrace::default();
        while self.step < self.cfg.total_steps {
            trace.rows.extend(self.step()?);
        }
        Ok(trace)
    }
}
