//! Encoder forward passes and their hand-derived backward passes.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncoderKind, Model, ModelSpec, Params};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, spmm, CsrMatrix, FeatureMatrix, Graph, NormAdj};

/// Features at or below this fraction of nonzeros use the sparse layer-0
/// product.
const SPARSE_DENSITY: f64 = 0.5;

/// Everything an encoder needs besides its parameters, prepared once per
/// dataset: the normalized adjacency, the features (sparse when that pays
/// off) and, for SGC, the propagated features `Â^K X`.
#[derive(Debug, Clone)]
pub struct ModelInput {
    encoder: EncoderKind,
    adj: Option<NormAdj>,
    features: Array2<f64>,
    sparse: Option<SparseFeatures>,
    propagated: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
struct SparseFeatures {
    csr: CsrMatrix,
    /// Transpose of `csr` and, per transposed entry, its index in `csr`.
    transposed: CsrMatrix,
    map: Vec<usize>,
}

impl ModelInput {
    pub fn new(spec: &ModelSpec, graph: &Graph, features: &FeatureMatrix) -> Result<Self> {
        spec.validate()?;
        if features.dim() != spec.input_dim {
            return Err(Error::dims("model input features", spec.input_dim, features.dim()));
        }
        if features.num_rows() != graph.num_nodes() {
            return Err(Error::dims("model input rows", graph.num_nodes(), features.num_rows()));
        }
        let adj = match spec.encoder {
            EncoderKind::Mlp => None,
            _ => Some(normalize_adjacency(graph)),
        };
        let propagated = match spec.encoder {
            EncoderKind::Sgc => {
                let a = adj.as_ref().expect("sgc builds an adjacency");
                let mut x = features.values().clone();
                for _ in 0..spec.layers {
                    x = spmm(a, x.view())?;
                }
                Some(x)
            }
            _ => None,
        };
        let sparse = if spec.encoder != EncoderKind::Sgc && features.density() <= SPARSE_DENSITY {
            let csr = features.to_csr();
            let (transposed, map) = csr.transpose_with_map();
            Some(SparseFeatures { csr, transposed, map })
        } else {
            None
        };
        Ok(Self {
            encoder: spec.encoder,
            adj,
            features: features.values().clone(),
            sparse,
            propagated,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn adjacency(&self) -> Option<&NormAdj> {
        self.adj.as_ref()
    }
}

/// Activations cached by [`encoder_forward`]; consumed by
/// [`encoder_backward`], so each forward pass is back-propagated at most once.
#[derive(Debug)]
pub struct EncoderTape {
    layers: Vec<LayerTape>,
    /// Inverted-dropout scale applied to the encoder output.
    out_mask: Option<Array2<f64>>,
}

#[derive(Debug)]
struct LayerTape {
    input: LayerInput,
    /// Output before the nonlinearity (`Â·D·W` or `D·W + b`).
    pre: Array2<f64>,
    relu: bool,
}

#[derive(Debug)]
enum LayerInput {
    /// Dropped dense input and the dropout scale that produced it.
    Dense {
        dropped: Array2<f64>,
        mask: Option<Array2<f64>>,
    },
    /// Sparse features with one dropout scale per stored entry.
    Sparse { scale: Option<Vec<f64>> },
}

fn keep_scale(rng: &mut ChaCha8Rng, keep: f64) -> f64 {
    if rng.random::<f64>() < keep {
        1.0 / keep
    } else {
        0.0
    }
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), keep: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || keep_scale(rng, keep))
}

fn check_finite(x: &Array2<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} activations")))
    }
}

/// Runs the encoder. In training mode each linear map's input, including the
/// classifier input (the returned embeddings), is dropped with inverted
/// scaling using masks drawn from `seed`; in evaluation mode no dropout is
/// applied.
pub fn encoder_forward(model: &Model, input: &ModelInput, train: bool, seed: u64) -> Result<(Array2<f64>, EncoderTape)> {
    let spec = &model.spec;
    if input.encoder != spec.encoder || input.features.ncols() != spec.input_dim {
        return Err(Error::Incompatible("model input was prepared for a different model".into()));
    }
    let drop = train && spec.dropout > 0.0;
    let keep = 1.0 - spec.dropout;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();

    let mut z = match spec.encoder {
        EncoderKind::Sgc => input.propagated.clone().expect("sgc input is propagated"),
        EncoderKind::Gcn | EncoderKind::Mlp => {
            let per_layer = if spec.encoder == EncoderKind::Gcn { 1 } else { 2 };
            let mut z: Option<Array2<f64>> = None;
            for l in 0..spec.layers {
                let w = model.params.tensor(per_layer * l);
                let (mut pre, layer_input) = match (&z, &input.sparse) {
                    (None, Some(sp)) => {
                        let scale = drop.then(|| (0..sp.csr.nnz()).map(|_| keep_scale(&mut rng, keep)).collect::<Vec<_>>());
                        let p = sp.csr.matmul_scaled(scale.as_deref(), w.view())?;
                        (p, LayerInput::Sparse { scale })
                    }
                    _ => {
                        let src = z.as_ref().unwrap_or(&input.features);
                        let mask = drop.then(|| dropout_mask(&mut rng, src.dim(), keep));
                        let dropped = match &mask {
                            Some(m) => src * m,
                            None => src.clone(),
                        };
                        let p = dropped.dot(w);
                        (p, LayerInput::Dense { dropped, mask })
                    }
                };
                match spec.encoder {
                    EncoderKind::Gcn => {
                        let adj = input.adj.as_ref().expect("gcn input has an adjacency");
                        pre = spmm(adj, pre.view())?;
                    }
                    _ => pre += model.params.tensor(per_layer * l + 1),
                }
                check_finite(&pre, spec.encoder.name())?;
                let relu = spec.encoder == EncoderKind::Mlp || l + 1 < spec.layers;
                let out = if relu { pre.mapv(|v| v.max(0.0)) } else { pre.clone() };
                layers.push(LayerTape {
                    input: layer_input,
                    pre,
                    relu,
                });
                z = Some(out);
            }
            z.expect("at least one layer")
        }
    };

    let out_mask = drop.then(|| dropout_mask(&mut rng, z.dim(), keep));
    if let Some(m) = &out_mask {
        z *= m;
    }
    Ok((z, EncoderTape { layers, out_mask }))
}

/// Parameter gradients of the encoder given the gradient of the loss with
/// respect to the returned embeddings. Classifier entries are left at zero.
pub fn encoder_backward(model: &Model, input: &ModelInput, tape: EncoderTape, d_embed: ArrayView2<'_, f64>) -> Result<Params> {
    let spec = &model.spec;
    let mut grads = model.params.zeros_like();
    let expected = (input.num_nodes(), spec.embed_dim());
    if d_embed.dim() != expected {
        return Err(Error::dims("embedding gradient", format!("{expected:?}"), format!("{:?}", d_embed.dim())));
    }
    let mut dz = d_embed.to_owned();
    if let Some(m) = &tape.out_mask {
        dz *= m;
    }
    let per_layer = if spec.encoder == EncoderKind::Gcn { 1 } else { 2 };
    for (l, layer) in tape.layers.into_iter().enumerate().rev() {
        // Through the nonlinearity.
        let mut dpre = dz;
        if layer.relu {
            Zip::from(&mut dpre).and(&layer.pre).for_each(|d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        // Through propagation (Â is symmetric) or the bias.
        let dp = match spec.encoder {
            EncoderKind::Gcn => {
                let adj = input.adj.as_ref().expect("gcn input has an adjacency");
                spmm(adj, dpre.view())?
            }
            _ => {
                *grads.tensor_mut(per_layer * l + 1) = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
                dpre
            }
        };
        let w = model.params.tensor(per_layer * l);
        match &layer.input {
            LayerInput::Sparse { scale } => {
                let sp = input.sparse.as_ref().expect("sparse layer has sparse features");
                let tscale: Option<Vec<f64>> = scale.as_ref().map(|s| sp.map.iter().map(|&k| s[k]).collect());
                *grads.tensor_mut(per_layer * l) = sp.transposed.matmul_scaled(tscale.as_deref(), dp.view())?;
                dz = Array2::zeros((0, 0));
            }
            LayerInput::Dense { dropped, mask } => {
                *grads.tensor_mut(per_layer * l) = dropped.t().dot(&dp);
                dz = if l > 0 {
                    let mut d = dp.dot(&w.t());
                    if let Some(m) = mask {
                        d *= m;
                    }
                    d
                } else {
                    Array2::zeros((0, 0))
                };
            }
        }
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("encoder gradients".into()));
    }
    Ok(grads)
}
