use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Downsample};

/// Architecture of a [`WavenetClassifier`](crate::nn::WavenetClassifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Data channels `C` (embedding rows are added on top).
    pub n_input_channels: usize,
    pub n_classes: usize,
    pub n_timesteps: usize,
    pub n_conv_layers: usize,
    pub kernel_size: usize,
    pub hidden_channels: usize,
    pub fc_hidden: usize,
    pub dropout: f64,
    /// Subject embedding size `E`; 0 disables the embedding table.
    pub embedding_size: usize,
    pub n_subjects: usize,
    pub activation: Activation,
    /// Optional per-layer switch (conv layers, then the dense hidden layer);
    /// `false` replaces the activation by the identity for that layer.
    pub activation_mask: Option<Vec<bool>>,
    pub downsample: Downsample,
    pub bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_input_channels: 306,
            n_classes: 118,
            n_timesteps: 256,
            n_conv_layers: 6,
            kernel_size: 2,
            hidden_channels: 128,
            fc_hidden: 512,
            dropout: 0.4,
            embedding_size: 10,
            n_subjects: 15,
            activation: Activation::Asinh,
            activation_mask: None,
            downsample: Downsample::Mean,
            bias: true,
        }
    }
}

impl ModelConfig {
    /// Span of input samples seen by one conv-block output:
    /// `1 + (k − 1)(2^L − 1)`, i.e. `2^L` for `k = 2`.
    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel_size - 1) * ((1usize << self.n_conv_layers) - 1)
    }

    pub fn dilation(&self, layer: usize) -> usize {
        1 << layer
    }

    /// Samples per channel after temporal downsampling.
    pub fn pooled_len(&self) -> usize {
        self.n_timesteps / self.receptive_field()
    }

    pub fn flat_len(&self) -> usize {
        self.hidden_channels * self.pooled_len()
    }

    /// Rows of the first conv layer's input: `C + E`.
    pub fn first_layer_inputs(&self) -> usize {
        self.n_input_channels + self.embedding_size
    }

    pub fn layer_inputs(&self, layer: usize) -> usize {
        if layer == 0 {
            self.first_layer_inputs()
        } else {
            self.hidden_channels
        }
    }

    /// Activation of conv layer `layer`, or of the dense hidden layer when
    /// `layer == n_conv_layers`.
    pub fn activation_at(&self, layer: usize) -> Activation {
        match &self.activation_mask {
            Some(mask) if !mask[layer] => Activation::Identity,
            _ => self.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("model config: {m}")));
        if self.n_input_channels == 0 || self.n_classes < 2 || self.n_timesteps == 0 {
            return bad("need channels, at least two classes and samples".into());
        }
        if self.n_conv_layers == 0 || self.n_conv_layers > 16 {
            return bad(format!("{} conv layers", self.n_conv_layers));
        }
        if self.kernel_size == 0 || self.hidden_channels == 0 || self.fc_hidden == 0 {
            return bad("kernel size and widths must be positive".into());
        }
        let rf = self.receptive_field();
        if !self.n_timesteps.is_multiple_of(rf) {
            return bad(format!(
                "receptive field {rf} does not divide {} timesteps",
                self.n_timesteps
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.embedding_size > 0 && self.n_subjects == 0 {
            return bad("embeddings need at least one subject".into());
        }
        if let Some(mask) = &self.activation_mask {
            if mask.len() != self.n_conv_layers + 1 {
                return bad(format!(
                    "activation mask has {} entries, expected {}",
                    mask.len(),
                    self.n_conv_layers + 1
                ));
            }
        }
        Ok(())
    }
}
