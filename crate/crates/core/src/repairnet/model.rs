use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::ArchitectureConfig;
use crate::dataset::{EncodedSample, Vocabulary, FIRST_ID};
use crate::error::{Error, Result};
use crate::neural::{
    cross_entropy, dropout_backward, dropout_forward, softmax_rows, softmax_xent_backward,
    visit_child, visit_child_mut, BatchNorm, BatchNormCache, Dense, Embedding, LstmStack,
    Parameters, Real, StackCache,
};
use crate::rng::Rng;

/// Rows per forward pass at inference time.
const INFERENCE_CHUNK: usize = 512;

/// Embedding plus LSTM stack for one context direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<F> {
    pub embedding: Embedding<F>,
    pub lstm: LstmStack<F>,
}

impl<F> Parameters<F> for Branch<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        visit_child("embedding", &self.embedding, f);
        visit_child("lstm", &self.lstm, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        visit_child_mut("embedding", &mut self.embedding, f);
        visit_child_mut("lstm", &mut self.lstm, f);
    }
}

#[derive(Debug, Clone)]
struct BranchCache<F> {
    ids: Vec<Vec<usize>>,
    masks: Vec<Option<Array2<F>>>,
    lstm: StackCache<F>,
}

#[derive(Debug, Clone)]
struct AttributeCache<F> {
    ids: Vec<usize>,
    mask: Option<Array2<F>>,
}

/// Everything a training-mode forward pass keeps for `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    prefix: Option<BranchCache<F>>,
    suffix: Option<BranchCache<F>>,
    attributes: Vec<AttributeCache<F>>,
    norm: BatchNormCache<F>,
    normalized: Array2<F>,
    probs: Array2<F>,
}

impl<F> ForwardCache<F> {
    pub fn probs(&self) -> ArrayView2<'_, F> {
        self.probs.view()
    }
}

/// All trainable tensors of the repair network plus batch-norm state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairModel<F> {
    pub prefix: Option<Branch<F>>,
    pub suffix: Option<Branch<F>>,
    /// One table per attribute; empty when attributes are disabled.
    pub attributes: Vec<Embedding<F>>,
    pub norm: BatchNorm<F>,
    pub output: Dense<F>,
    pub k: usize,
    pub dropout_rate: f64,
}

impl<F: Real> RepairModel<F> {
    pub fn new(arch: &ArchitectureConfig, vocab: &Vocabulary, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let n_act = vocab.activity_count();
        let branch = |on: bool, rng: &mut Rng| {
            on.then(|| Branch {
                embedding: Embedding::new(n_act, arch.activity_embedding_dim, rng),
                lstm: LstmStack::new(arch.activity_embedding_dim, &arch.lstm_layer_sizes, rng),
            })
        };
        let prefix = branch(arch.use_prefix, rng);
        let suffix = branch(arch.use_suffix, rng);
        let mut attributes = Vec::new();
        if arch.use_attributes {
            for spec in &arch.attributes {
                let size = vocab
                    .attributes
                    .get(&spec.name)
                    .ok_or_else(|| {
                        Error::Config(format!("vocabulary has no attribute {:?}", spec.name))
                    })?
                    .size();
                attributes.push(Embedding::new(size, spec.embedding_dim, rng));
            }
        }
        let top = *arch.lstm_layer_sizes.last().expect("validated");
        let concat = top * (usize::from(arch.use_prefix) + usize::from(arch.use_suffix))
            + attributes.iter().map(Embedding::dim).sum::<usize>();
        Ok(RepairModel {
            prefix,
            suffix,
            attributes,
            norm: BatchNorm::new(concat),
            output: Dense::new(concat, n_act, rng),
            k: arch.k,
            dropout_rate: arch.dropout_rate,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.output.bias.len()
    }

    pub fn concat_dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn cast<G: Real>(&self) -> RepairModel<G> {
        let branch = |b: &Branch<F>| Branch {
            embedding: b.embedding.cast(),
            lstm: b.lstm.cast(),
        };
        RepairModel {
            prefix: self.prefix.as_ref().map(branch),
            suffix: self.suffix.as_ref().map(branch),
            attributes: self.attributes.iter().map(Embedding::cast).collect(),
            norm: self.norm.cast(),
            output: self.output.cast(),
            k: self.k,
            dropout_rate: self.dropout_rate,
        }
    }

    fn check_batch(&self, batch: &[&EncodedSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        for s in batch {
            if s.prefix_ids.len() != self.k || s.suffix_ids.len() != self.k {
                return Err(Error::Encoding(format!(
                    "sample {:?} has context lengths {}/{}, model expects {}",
                    s.origin,
                    s.prefix_ids.len(),
                    s.suffix_ids.len(),
                    self.k
                )));
            }
            if s.attribute_ids.len() < self.attributes.len() {
                return Err(Error::Encoding(format!(
                    "sample {:?} has {} attributes, model uses {}",
                    s.origin,
                    s.attribute_ids.len(),
                    self.attributes.len()
                )));
            }
        }
        Ok(())
    }

    fn branch_forward(
        &self,
        branch: &Branch<F>,
        batch: &[&EncodedSample],
        ids_of: fn(&EncodedSample) -> &[usize],
        mut rng: Option<&mut Rng>,
    ) -> Result<(Array2<F>, BranchCache<F>)> {
        let mut ids = Vec::with_capacity(self.k);
        let mut masks = Vec::with_capacity(self.k);
        let mut inputs = Vec::with_capacity(self.k);
        for t in 0..self.k {
            let step: Vec<usize> = batch.iter().map(|s| ids_of(s)[t]).collect();
            let emb = branch.embedding.forward(&step)?;
            let (x, mask) = match rng.as_deref_mut() {
                Some(r) => dropout_forward(&emb, self.dropout_rate, true, r)?,
                None => (emb, None),
            };
            ids.push(step);
            masks.push(mask);
            inputs.push(x);
        }
        let (h, lstm) = branch.lstm.forward(&inputs)?;
        Ok((h, BranchCache { ids, masks, lstm }))
    }

    /// Concatenated features before batch norm. Dropout is applied when
    /// `rng` is given.
    #[allow(clippy::type_complexity)]
    fn features(
        &self,
        batch: &[&EncodedSample],
        mut rng: Option<&mut Rng>,
    ) -> Result<(
        Array2<F>,
        Option<BranchCache<F>>,
        Option<BranchCache<F>>,
        Vec<AttributeCache<F>>,
    )> {
        self.check_batch(batch)?;
        let mut parts: Vec<Array2<F>> = Vec::new();
        let mut prefix_cache = None;
        let mut suffix_cache = None;
        if let Some(b) = &self.prefix {
            let (h, c) = self.branch_forward(b, batch, |s| &s.prefix_ids, rng.as_deref_mut())?;
            parts.push(h);
            prefix_cache = Some(c);
        }
        if let Some(b) = &self.suffix {
            let (h, c) = self.branch_forward(b, batch, |s| &s.suffix_ids, rng.as_deref_mut())?;
            parts.push(h);
            suffix_cache = Some(c);
        }
        let mut attr_caches = Vec::with_capacity(self.attributes.len());
        for (a, table) in self.attributes.iter().enumerate() {
            let ids: Vec<usize> = batch.iter().map(|s| s.attribute_ids[a]).collect();
            let emb = table.forward(&ids)?;
            let (x, mask) = match rng.as_deref_mut() {
                Some(r) => dropout_forward(&emb, self.dropout_rate, true, r)?,
                None => (emb, None),
            };
            parts.push(x);
            attr_caches.push(AttributeCache { ids, mask });
        }
        let views: Vec<ArrayView2<'_, F>> = parts.iter().map(|p| p.view()).collect();
        let concat = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
        Ok((concat, prefix_cache, suffix_cache, attr_caches))
    }

    /// Training-mode forward pass: dropout on, batch statistics, running
    /// statistics updated. Needs at least two samples.
    pub fn forward_train(
        &mut self,
        batch: &[&EncodedSample],
        rng: &mut Rng,
    ) -> Result<(Array2<F>, ForwardCache<F>)> {
        let (concat, prefix, suffix, attributes) = self.features(batch, Some(rng))?;
        let (normalized, norm) = self.norm.forward_train(&concat)?;
        let probs = softmax_rows(&self.output.forward(&normalized)?);
        let cache = ForwardCache {
            prefix,
            suffix,
            attributes,
            norm,
            normalized,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Inference-mode probabilities, one row per sample.
    pub fn predict_proba(&self, samples: &[EncodedSample]) -> Result<Array2<F>> {
        let mut out = Array2::zeros((samples.len(), self.num_classes()));
        for (i, chunk) in samples.chunks(INFERENCE_CHUNK).enumerate() {
            let refs: Vec<&EncodedSample> = chunk.iter().collect();
            let probs = self.forward_infer(&refs)?;
            let start = i * INFERENCE_CHUNK;
            out.slice_mut(s![start..start + chunk.len(), ..])
                .assign(&probs);
        }
        Ok(out)
    }

    pub fn forward_infer(&self, batch: &[&EncodedSample]) -> Result<Array2<F>> {
        let (concat, ..) = self.features(batch, None)?;
        let normalized = self.norm.forward_infer(&concat)?;
        Ok(softmax_rows(&self.output.forward(&normalized)?))
    }

    /// Most probable real activity per sample; ties go to the lowest id.
    pub fn predict(&self, samples: &[EncodedSample]) -> Result<Vec<usize>> {
        let probs = self.predict_proba(samples)?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|row| argmax_label(row.as_slice().expect("row-major")))
            .collect())
    }

    /// Gradients of the batch-mean cross-entropy for a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<F>, labels: &[usize]) -> RepairModel<F> {
        let mut grad = self.zeroed();
        let d_logits = softmax_xent_backward(&cache.probs, labels);
        let d_norm = self
            .output
            .backward(&cache.normalized, &d_logits, &mut grad.output);
        let d_concat = self.norm.backward(&cache.norm, &d_norm, &mut grad.norm);

        let mut col = 0;
        let mut take = |width: usize| {
            let part = d_concat.slice(s![.., col..col + width]).to_owned();
            col += width;
            part
        };
        if let (Some(b), Some(c), Some(g)) = (&self.prefix, &cache.prefix, grad.prefix.as_mut()) {
            let d = take(b.lstm.output_size());
            branch_backward(b, c, &d, g);
        }
        if let (Some(b), Some(c), Some(g)) = (&self.suffix, &cache.suffix, grad.suffix.as_mut()) {
            let d = take(b.lstm.output_size());
            branch_backward(b, c, &d, g);
        }
        for ((table, c), g) in self
            .attributes
            .iter()
            .zip(&cache.attributes)
            .zip(grad.attributes.iter_mut())
        {
            let d = take(table.dim());
            let d = dropout_backward(&d, c.mask.as_ref());
            table.backward(&c.ids, d.view(), g);
        }
        grad
    }

    /// Mean cross-entropy of a labeled batch and its gradient, in training
    /// mode.
    pub fn loss_and_grad(
        &mut self,
        batch: &[&EncodedSample],
        rng: &mut Rng,
    ) -> Result<(F, RepairModel<F>)> {
        let labels = labels_of(batch)?;
        let (probs, cache) = self.forward_train(batch, rng)?;
        let loss = mean_loss(&probs, &labels);
        Ok((loss, self.backward(&cache, &labels)))
    }
}

fn branch_backward<F: Real>(
    branch: &Branch<F>,
    cache: &BranchCache<F>,
    d_h: &Array2<F>,
    grad: &mut Branch<F>,
) {
    let d_inputs = branch.lstm.backward(&cache.lstm, d_h, &mut grad.lstm);
    for ((d, mask), ids) in d_inputs.iter().zip(&cache.masks).zip(&cache.ids) {
        let d = dropout_backward(d, mask.as_ref());
        branch
            .embedding
            .backward(ids, d.view(), &mut grad.embedding);
    }
}

pub(crate) fn labels_of(batch: &[&EncodedSample]) -> Result<Vec<usize>> {
    batch
        .iter()
        .map(|s| {
            s.label_id
                .ok_or_else(|| Error::Training(format!("sample {:?} has no label", s.origin)))
        })
        .collect()
}

pub(crate) fn mean_loss<F: Real>(probs: &Array2<F>, labels: &[usize]) -> F {
    let total = probs
        .rows()
        .into_iter()
        .zip(labels)
        .fold(F::zero(), |acc, (row, &y)| acc + cross_entropy(row, y));
    total / F::of(labels.len() as f64)
}

/// Index of the largest probability among non-reserved ids.
pub(crate) fn argmax_label<F: Real>(row: &[F]) -> usize {
    let mut best = FIRST_ID;
    for (i, &p) in row.iter().enumerate().skip(FIRST_ID + 1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

impl<F> Parameters<F> for RepairModel<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[F])) {
        if let Some(b) = &self.prefix {
            visit_child("prefix", b, f);
        }
        if let Some(b) = &self.suffix {
            visit_child("suffix", b, f);
        }
        for (i, a) in self.attributes.iter().enumerate() {
            visit_child(&format!("attribute{i}"), a, f);
        }
        visit_child("norm", &self.norm, f);
        visit_child("output", &self.output, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [F])) {
        if let Some(b) = &mut self.prefix {
            visit_child_mut("prefix", b, f);
        }
        if let Some(b) = &mut self.suffix {
            visit_child_mut("suffix", b, f);
        }
        for (i, a) in self.attributes.iter_mut().enumerate() {
            visit_child_mut(&format!("attribute{i}"), a, f);
        }
        visit_child_mut("norm", &mut self.norm, f);
        visit_child_mut("output", &mut self.output, f);
    }
}
