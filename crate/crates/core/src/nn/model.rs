use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::{
    concat_embedding, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    dropout_mask, temporal_downsample, temporal_downsample_backward,
};
use crate::nn::{cross_entropy, ModelConfig, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Name and shape of one parameter array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One gradient array per parameter array, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<F> {
    pub grads: Vec<Vec<F>>,
}

impl<F: Scalar> GradientSet<F> {
    pub fn zeros_like(params: &[Vec<F>]) -> Self {
        Self {
            grads: params.iter().map(|p| vec![F::zero(); p.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|v| v.is_finite())
    }

    fn scale(&mut self, s: F) {
        self.grads.iter_mut().flatten().for_each(|v| *v *= s);
    }
}

/// Dilated causal conv stack, pooled and flattened into a two-layer dense
/// head, with an optional subject embedding table.
///
/// Parameters are kept as flat arrays in a fixed order: for each conv layer
/// its weight (`out × in × k`) and bias, then the hidden dense weight and
/// bias, the output dense weight and bias, and finally the `S × E`
/// embedding table when `E > 0`. Bias arrays are empty when `bias` is off.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenetClassifier<F> {
    config: ModelConfig,
    params: Vec<Vec<F>>,
}

/// Activations of one example kept for the reverse pass.
struct Cache<F> {
    /// Input of each conv layer (`layer_inputs(l) × T`).
    inputs: Vec<Vec<F>>,
    /// Pre-activation of each conv layer.
    pre: Vec<Vec<F>>,
    masks: Vec<Option<Vec<F>>>,
    flat: Vec<F>,
    fc_pre: Vec<F>,
    fc_mask: Option<Vec<F>>,
    hidden: Vec<F>,
    logits: Vec<F>,
}

impl<F: Scalar> WavenetClassifier<F> {
    /// Fresh model: weights `U(±√(3/fan_in))`, biases `U(±1/√fan_in)`,
    /// embeddings `N(0, 1/E)`.
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let specs = Self::specs_for(&config);
        let mut params = Vec::with_capacity(specs.len());
        for spec in &specs {
            let n = spec.len();
            let values: Vec<F> = if spec.name == "embedding" {
                let normal = Normal::new(0.0, (1.0 / config.embedding_size as f64).sqrt())
                    .expect("positive std");
                (0..n).map(|_| F::from_f64(normal.sample(rng))).collect()
            } else if n == 0 {
                Vec::new()
            } else {
                let fan_in = Self::fan_in(&config, &spec.name);
                let bound = if spec.name.ends_with("bias") {
                    1.0 / (fan_in as f64).sqrt()
                } else {
                    (3.0 / fan_in as f64).sqrt()
                };
                let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                (0..n).map(|_| F::from_f64(u.sample(rng))).collect()
            };
            params.push(values);
        }
        Ok(Self { config, params })
    }

    /// All parameters zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Self::specs_for(&config)
            .iter()
            .map(|s| vec![F::zero(); s.len()])
            .collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: Vec<Vec<F>>) -> Result<Self> {
        config.validate()?;
        let specs = Self::specs_for(&config);
        if specs.len() != params.len()
            || specs.iter().zip(&params).any(|(s, p)| s.len() != p.len())
        {
            return Err(Error::Shape("parameter arrays do not match the config".into()));
        }
        Ok(Self { config, params })
    }

    fn fan_in(config: &ModelConfig, name: &str) -> usize {
        let k = config.kernel_size;
        if let Some(rest) = name.strip_prefix("conv") {
            let layer: usize = rest.split('.').next().unwrap().parse().unwrap();
            config.layer_inputs(layer) * k
        } else if name.starts_with("fc1") {
            config.flat_len()
        } else {
            config.fc_hidden
        }
    }

    pub fn specs_for(config: &ModelConfig) -> Vec<ParamSpec> {
        let b = |n: usize| if config.bias { vec![n] } else { vec![0] };
        let (h, k) = (config.hidden_channels, config.kernel_size);
        let mut out = Vec::new();
        for l in 0..config.n_conv_layers {
            out.push(ParamSpec {
                name: format!("conv{l}.weight"),
                shape: vec![h, config.layer_inputs(l), k],
            });
            out.push(ParamSpec {
                name: format!("conv{l}.bias"),
                shape: b(h),
            });
        }
        out.push(ParamSpec {
            name: "fc1.weight".into(),
            shape: vec![config.fc_hidden, config.flat_len()],
        });
        out.push(ParamSpec {
            name: "fc1.bias".into(),
            shape: b(config.fc_hidden),
        });
        out.push(ParamSpec {
            name: "fc2.weight".into(),
            shape: vec![config.n_classes, config.fc_hidden],
        });
        out.push(ParamSpec {
            name: "fc2.bias".into(),
            shape: b(config.n_classes),
        });
        if config.embedding_size > 0 {
            out.push(ParamSpec {
                name: "embedding".into(),
                shape: vec![config.n_subjects, config.embedding_size],
            });
        }
        out
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        Self::specs_for(&self.config)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Vec<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<F>] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().flatten().all(|v| v.is_finite())
    }

    fn conv_weight(&self, l: usize) -> &[F] {
        &self.params[2 * l]
    }

    fn conv_bias(&self, l: usize) -> &[F] {
        &self.params[2 * l + 1]
    }

    fn fc_index(&self) -> usize {
        2 * self.config.n_conv_layers
    }

    fn embedding_index(&self) -> Option<usize> {
        (self.config.embedding_size > 0).then(|| self.fc_index() + 4)
    }

    /// The `S × E` embedding table, or `None` when `E = 0`.
    pub fn embeddings(&self) -> Option<&[F]> {
        self.embedding_index().map(|i| self.params[i].as_slice())
    }

    pub fn embedding_row(&self, subject: usize) -> Result<&[F]> {
        let e = self.config.embedding_size;
        let table = self
            .embeddings()
            .ok_or_else(|| Error::InvalidArgument("model has no subject embeddings".into()))?;
        if subject >= self.config.n_subjects {
            return Err(Error::InvalidArgument(format!(
                "subject index {subject} outside embedding table of {} rows",
                self.config.n_subjects
            )));
        }
        Ok(&table[subject * e..(subject + 1) * e])
    }

    pub fn set_embedding_row(&mut self, subject: usize, row: &[F]) -> Result<()> {
        let e = self.config.embedding_size;
        self.embedding_row(subject)?;
        if row.len() != e {
            return Err(Error::Shape(format!("embedding row of {} values, expected {e}", row.len())));
        }
        let idx = self.embedding_index().expect("checked above");
        self.params[idx][subject * e..(subject + 1) * e].copy_from_slice(row);
        Ok(())
    }

    /// Grow the embedding table to `n_subjects` rows; new rows are drawn
    /// from `N(0, 1/E)`.
    pub fn extend_subjects(&mut self, n_subjects: usize, rng: &mut impl Rng) -> Result<()> {
        let idx = self
            .embedding_index()
            .ok_or_else(|| Error::InvalidArgument("model has no subject embeddings".into()))?;
        let e = self.config.embedding_size;
        if n_subjects < self.config.n_subjects {
            return Err(Error::InvalidArgument("cannot shrink the embedding table".into()));
        }
        let normal = Normal::new(0.0, (1.0 / e as f64).sqrt()).expect("positive std");
        let extra = (n_subjects - self.config.n_subjects) * e;
        self.params[idx].extend((0..extra).map(|_| F::from_f64(normal.sample(rng))));
        self.config.n_subjects = n_subjects;
        Ok(())
    }

    /// Redraw one embedding row from `N(0, 1/E)`.
    pub fn reset_embedding_row(&mut self, subject: usize, rng: &mut impl Rng) -> Result<()> {
        let e = self.config.embedding_size;
        self.embedding_row(subject)?;
        let normal = Normal::new(0.0, (1.0 / e as f64).sqrt()).expect("positive std");
        let row: Vec<F> = (0..e).map(|_| F::from_f64(normal.sample(rng))).collect();
        self.set_embedding_row(subject, &row)
    }

    pub fn cast<G: Scalar>(&self) -> WavenetClassifier<G> {
        WavenetClassifier {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.iter().map(|&v| G::from_f64(v.to_f64())).collect())
                .collect(),
        }
    }

    /// Network input for a trial of `subject`: the trial rows followed by
    /// that subject's embedding as constant rows.
    pub fn input_for(&self, data: &[F], subject: usize) -> Result<Vec<F>> {
        let emb = if self.config.embedding_size > 0 {
            self.embedding_row(subject)?
        } else {
            &[]
        };
        self.input_with_embedding(data, emb)
    }

    pub fn input_with_embedding(&self, data: &[F], embedding: &[F]) -> Result<Vec<F>> {
        if embedding.len() != self.config.embedding_size {
            return Err(Error::Shape(format!(
                "embedding of {} values, model expects {}",
                embedding.len(),
                self.config.embedding_size
            )));
        }
        concat_embedding(data, self.config.n_input_channels, self.config.n_timesteps, embedding)
    }

    fn forward_cached<R: Rng>(&self, x: Vec<F>, mut rng: Option<&mut R>) -> Result<Cache<F>> {
        let cfg = &self.config;
        let (t, h, k) = (cfg.n_timesteps, cfg.hidden_channels, cfg.kernel_size);
        if x.len() != cfg.first_layer_inputs() * t {
            return Err(Error::Shape(format!(
                "input has {} values, expected {}×{t}",
                x.len(),
                cfg.first_layer_inputs()
            )));
        }
        let p = cfg.dropout;
        let mut inputs = Vec::with_capacity(cfg.n_conv_layers);
        let mut pre = Vec::with_capacity(cfg.n_conv_layers);
        let mut masks = Vec::with_capacity(cfg.n_conv_layers);
        let mut cur = x;
        for l in 0..cfg.n_conv_layers {
            let mut z = vec![F::zero(); h * t];
            conv1d_forward(
                &cur,
                cfg.layer_inputs(l),
                t,
                self.conv_weight(l),
                self.conv_bias(l),
                h,
                k,
                cfg.dilation(l),
                &mut z,
            );
            let act = cfg.activation_at(l);
            let mut a: Vec<F> = z.iter().map(|&v| act.apply(v)).collect();
            let mask = match rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let m = dropout_mask::<F>(a.len(), p, r)?;
                    a.iter_mut().zip(&m).for_each(|(v, &mv)| *v *= mv);
                    Some(m)
                }
                _ => None,
            };
            inputs.push(cur);
            pre.push(z);
            masks.push(mask);
            cur = a;
        }
        let flat = temporal_downsample(&cur, h, t, cfg.receptive_field(), cfg.downsample)?;
        inputs.push(cur);

        let fi = self.fc_index();
        let mut fc_pre = vec![F::zero(); cfg.fc_hidden];
        dense_forward(&flat, &self.params[fi], &self.params[fi + 1], cfg.fc_hidden, &mut fc_pre);
        let act = cfg.activation_at(cfg.n_conv_layers);
        let mut hidden: Vec<F> = fc_pre.iter().map(|&v| act.apply(v)).collect();
        let fc_mask = match rng {
            Some(r) if p > 0.0 => {
                let m = dropout_mask::<F>(hidden.len(), p, r)?;
                hidden.iter_mut().zip(&m).for_each(|(v, &mv)| *v *= mv);
                Some(m)
            }
            _ => None,
        };
        let mut logits = vec![F::zero(); cfg.n_classes];
        dense_forward(&hidden, &self.params[fi + 2], &self.params[fi + 3], cfg.n_classes, &mut logits);
        Ok(Cache {
            inputs,
            pre,
            masks,
            flat,
            fc_pre,
            fc_mask,
            hidden,
            logits,
        })
    }

    /// Accumulate the gradient of `Σ dlogits · logits` into `grads`.
    fn backward(&self, cache: &Cache<F>, dlogits: &[F], subject: usize, grads: &mut GradientSet<F>) {
        let cfg = &self.config;
        let (t, h, k) = (cfg.n_timesteps, cfg.hidden_channels, cfg.kernel_size);
        let fi = self.fc_index();

        let mut dhidden = vec![F::zero(); cfg.fc_hidden];
        {
            let (dw, rest) = grads.grads[fi + 2..].split_at_mut(1);
            dense_backward(&cache.hidden, &self.params[fi + 2], dlogits, &mut dw[0], &mut rest[0], Some(&mut dhidden));
        }
        if let Some(m) = &cache.fc_mask {
            dhidden.iter_mut().zip(m).for_each(|(d, &mv)| *d *= mv);
        }
        let act = cfg.activation_at(cfg.n_conv_layers);
        for (d, &z) in dhidden.iter_mut().zip(&cache.fc_pre) {
            *d *= act.derivative(z);
        }
        let mut dflat = vec![F::zero(); cache.flat.len()];
        {
            let (dw, rest) = grads.grads[fi..].split_at_mut(1);
            dense_backward(&cache.flat, &self.params[fi], &dhidden, &mut dw[0], &mut rest[0], Some(&mut dflat));
        }
        let mut dcur = temporal_downsample_backward(&dflat, h, t, cfg.receptive_field(), cfg.downsample);

        let e = cfg.embedding_size;
        let c = cfg.n_input_channels;
        for l in (0..cfg.n_conv_layers).rev() {
            if let Some(m) = &cache.masks[l] {
                dcur.iter_mut().zip(m).for_each(|(d, &mv)| *d *= mv);
            }
            let act = cfg.activation_at(l);
            for (d, &z) in dcur.iter_mut().zip(&cache.pre[l]) {
                *d *= act.derivative(z);
            }
            let c_in = cfg.layer_inputs(l);
            let mut dx = vec![F::zero(); if l > 0 || e > 0 { c_in * t } else { 0 }];
            let rows = if l > 0 { 0..c_in } else { c..c + e };
            let dx_arg = (!dx.is_empty()).then_some((dx.as_mut_slice(), rows));
            let (dw, rest) = grads.grads[2 * l..].split_at_mut(1);
            conv1d_backward(
                &cache.inputs[l],
                c_in,
                t,
                self.conv_weight(l),
                h,
                k,
                cfg.dilation(l),
                &dcur,
                &mut dw[0],
                &mut rest[0],
                dx_arg,
            );
            if l == 0 {
                if let Some(ei) = self.embedding_index() {
                    let demb = &mut grads.grads[ei][subject * e..(subject + 1) * e];
                    for (j, g) in demb.iter_mut().enumerate() {
                        *g += dx[(c + j) * t..(c + j + 1) * t].iter().copied().sum::<F>();
                    }
                }
            }
            dcur = dx;
        }
    }

    /// Eval-mode logits for one trial (`C × T`, row-major) of `subject`.
    pub fn logits(&self, data: &[F], subject: usize) -> Result<Vec<F>> {
        let x = self.input_for(data, subject)?;
        Ok(self.forward_cached::<rand_chacha::ChaCha8Rng>(x, None)?.logits)
    }

    /// Eval-mode logits with an explicit embedding vector in place of the
    /// subject's table row.
    pub fn logits_with_embedding(&self, data: &[F], embedding: &[F]) -> Result<Vec<F>> {
        let x = self.input_with_embedding(data, embedding)?;
        Ok(self.forward_cached::<rand_chacha::ChaCha8Rng>(x, None)?.logits)
    }

    /// Logits for a batch; train mode draws dropout masks from `rng`.
    pub fn forward<R: Rng>(
        &self,
        batch: &[(&[F], usize)],
        mode: Mode,
        rng: Option<&mut R>,
    ) -> Result<Vec<Vec<F>>> {
        let mut rng = match mode {
            Mode::Train => rng,
            Mode::Eval => None,
        };
        batch
            .iter()
            .map(|&(data, s)| {
                let x = self.input_for(data, s)?;
                Ok(self.forward_cached(x, rng.as_deref_mut())?.logits)
            })
            .collect()
    }

    pub fn predict(&self, data: &[F], subject: usize) -> Result<usize> {
        Ok(argmax(&self.logits(data, subject)?))
    }

    /// Post-activation output (`H × T`) of conv layer `layer`, eval mode.
    pub fn layer_output(&self, x: &[F], layer: usize) -> Result<Vec<F>> {
        if layer >= self.config.n_conv_layers {
            return Err(Error::InvalidArgument(format!(
                "layer {layer} outside [0, {})",
                self.config.n_conv_layers
            )));
        }
        let cfg = &self.config;
        let (t, h) = (cfg.n_timesteps, cfg.hidden_channels);
        if x.len() != cfg.first_layer_inputs() * t {
            return Err(Error::Shape(format!(
                "input has {} values, expected {}×{t}",
                x.len(),
                cfg.first_layer_inputs()
            )));
        }
        let mut cur = x.to_vec();
        for l in 0..=layer {
            let mut z = vec![F::zero(); h * t];
            conv1d_forward(
                &cur,
                cfg.layer_inputs(l),
                t,
                self.conv_weight(l),
                self.conv_bias(l),
                h,
                cfg.kernel_size,
                cfg.dilation(l),
                &mut z,
            );
            let act = cfg.activation_at(l);
            z.iter_mut().for_each(|v| *v = act.apply(*v));
            cur = z;
        }
        Ok(cur)
    }

    /// Mean cross-entropy over `batch` (trial, subject, label) and its
    /// gradient. Passing `rng` enables dropout.
    pub fn loss_and_grad<R: Rng>(
        &self,
        batch: &[(&[F], usize, usize)],
        mut rng: Option<&mut R>,
    ) -> Result<(F, GradientSet<F>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grads = GradientSet::zeros_like(&self.params);
        let mut loss = F::zero();
        for &(data, subject, label) in batch {
            let x = self.input_for(data, subject)?;
            let cache = self.forward_cached(x, rng.as_deref_mut())?;
            let (l, g) = cross_entropy(std::slice::from_ref(&cache.logits), &[label])?;
            loss += l;
            self.backward(&cache, &g[0], subject, &mut grads);
        }
        let inv = F::from_f64(1.0 / batch.len() as f64);
        grads.scale(inv);
        Ok((loss * inv, grads))
    }
}

pub fn argmax<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
