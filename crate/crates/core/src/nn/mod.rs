//! Encoders, classifier heads, analytic gradients, gradient checking and
//! the Adam optimizer.
//!
//! A [`Model`] is an encoder (GCN, SGC or MLP) followed by a single linear
//! classifier. Encoders map node features to embeddings; the classifier maps
//! either an embedding or the concatenation of a node embedding with its
//! cluster embedding to logits. Gradients are derived by hand per layer and
//! verified numerically with [`grad_check`].

mod adam;
mod checkpoint;
mod encoder;
mod gradcheck;
mod linear;

pub use adam::{Adam, AdamConfig};
pub use encoder::{encoder_backward, encoder_forward, EncoderTape, ModelInput};
pub use gradcheck::{grad_check, GRAD_CHECK_MAX_PARAMS};
pub use linear::{linear_backward, linear_forward};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Graph convolution: `Â · drop(z) · W` per layer.
    Gcn,
    /// Parameter-free propagation `Â^K X`; the linear map is the classifier.
    Sgc,
    /// Per-node `ReLU(drop(z) · W + b)` per layer, no graph.
    Mlp,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Sgc => "sgc",
            EncoderKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(EncoderKind::Gcn),
            "sgc" => Ok(EncoderKind::Sgc),
            "mlp" => Ok(EncoderKind::Mlp),
            _ => Err(Error::invalid(format!("unknown encoder {s:?} (expected gcn, sgc or mlp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    /// `c` logits from a node embedding.
    Independent,
    /// `c * c` logits from `[z_i, z̄_m]`, read as a joint label table.
    Joint,
    /// `4 * c` logits from `[z_i, z̄_m]`: one 2x2 joint table per binary task.
    JointMultilabel,
    /// `c` logits from `[z_i, z̄_m]`.
    InContext,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Independent => "independent",
            ClassifierKind::Joint => "joint",
            ClassifierKind::JointMultilabel => "joint-multilabel",
            ClassifierKind::InContext => "in-context",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ClassifierKind::Independent),
            "joint" => Ok(ClassifierKind::Joint),
            "joint-multilabel" => Ok(ClassifierKind::JointMultilabel),
            "in-context" => Ok(ClassifierKind::InContext),
            _ => Err(Error::invalid(format!("unknown classifier {s:?}"))),
        }
    }

    /// Whether the classifier reads `[z_i, z̄_m]` rather than `z_i`.
    pub fn uses_cluster(self) -> bool {
        !matches!(self, ClassifierKind::Independent)
    }
}

/// Architecture of an encoder plus classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub encoder: EncoderKind,
    /// Number of encoder layers (propagation steps for SGC).
    pub layers: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Probability of zeroing each input of a linear map during training.
    pub dropout: f64,
    pub classifier: ClassifierKind,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let min_layers = if self.encoder == EncoderKind::Sgc { 0 } else { 1 };
        if self.layers < min_layers {
            return Err(Error::invalid(format!(
                "{} needs at least {min_layers} layer(s)",
                self.encoder.name()
            )));
        }
        if self.hidden == 0 || self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the encoder output.
    pub fn embed_dim(&self) -> usize {
        match self.encoder {
            EncoderKind::Sgc => self.input_dim,
            _ => self.hidden,
        }
    }

    pub fn classifier_in(&self) -> usize {
        if self.classifier.uses_cluster() {
            2 * self.embed_dim()
        } else {
            self.embed_dim()
        }
    }

    pub fn classifier_out(&self) -> usize {
        let c = self.num_classes;
        match self.classifier {
            ClassifierKind::Independent | ClassifierKind::InContext => c,
            ClassifierKind::Joint => c * c,
            ClassifierKind::JointMultilabel => 4 * c,
        }
    }

    /// Names and shapes of all parameter tensors, encoder first.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        let mut fan_in = self.input_dim;
        match self.encoder {
            EncoderKind::Gcn => {
                for l in 0..self.layers {
                    out.push((format!("gcn{l}.weight"), (fan_in, self.hidden)));
                    fan_in = self.hidden;
                }
            }
            EncoderKind::Mlp => {
                for l in 0..self.layers {
                    out.push((format!("mlp{l}.weight"), (fan_in, self.hidden)));
                    out.push((format!("mlp{l}.bias"), (1, self.hidden)));
                    fan_in = self.hidden;
                }
            }
            EncoderKind::Sgc => {}
        }
        out.push(("classifier.weight".into(), (self.classifier_in(), self.classifier_out())));
        out.push(("classifier.bias".into(), (1, self.classifier_out())));
        out
    }
}

/// A named parameter tensor. Bias vectors are stored as `1 x k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub value: Array2<f64>,
}

/// Ordered list of parameter (or gradient) tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    value: Array2::zeros(t.value.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Array2<f64> {
        &self.tensors[i].value
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.tensors[i].value
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    /// Scalar at flat position `k` (tensor order, then row-major).
    pub fn get_flat(&self, mut k: usize) -> f64 {
        for t in &self.tensors {
            if k < t.value.len() {
                return t.value.as_slice().expect("standard layout")[k];
            }
            k -= t.value.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut k: usize, v: f64) {
        for t in &mut self.tensors {
            if k < t.value.len() {
                t.value.as_slice_mut().expect("standard layout")[k] = v;
                return;
            }
            k -= t.value.len();
        }
        panic!("flat index out of range")
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Params) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.value += &b.value;
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &Params) -> Result<()> {
        let same = self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.value.dim() == b.value.dim());
        if same {
            Ok(())
        } else {
            Err(Error::dims("parameter set", self.shape_summary(), other.shape_summary()))
        }
    }

    fn shape_summary(&self) -> String {
        let parts: Vec<String> = self
            .tensors
            .iter()
            .map(|t| format!("{}{:?}", t.name, t.value.dim()))
            .collect();
        parts.join(",")
    }
}

/// Architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Params,
}

impl Model {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = spec
            .param_shapes()
            .into_iter()
            .map(|(name, (rows, cols))| {
                let value = if name.ends_with(".bias") {
                    Array2::zeros((rows, cols))
                } else {
                    let limit = (6.0 / (rows + cols) as f64).sqrt();
                    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
                };
                Tensor { name, value }
            })
            .collect();
        Ok(Self {
            spec,
            params: Params::new(tensors),
        })
    }

    /// Index of the classifier weight; the bias follows it.
    pub fn classifier_index(&self) -> usize {
        self.params.len() - 2
    }

    pub fn classifier_weight(&self) -> &Array2<f64> {
        self.params.tensor(self.classifier_index())
    }

    pub fn classifier_bias(&self) -> &Array2<f64> {
        self.params.tensor(self.classifier_index() + 1)
    }
}
