//! Plain-text model checkpoints.
//!
//! A header of `key value` lines records the architecture, followed by one
//! block per tensor: `tensor <name> <rows> <cols>` and then `rows` lines of
//! values. Reals are written in their shortest round-trip form, so loading a
//! saved model reproduces it bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{ClassifierKind, EncoderKind, Model, ModelSpec, Params, Tensor};
use crate::error::{Error, Result};

const MAGIC: &str = "jcsl-checkpoint 1";

impl Model {
    pub fn to_checkpoint_string(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "encoder {}", s.encoder.name()).unwrap();
        writeln!(out, "layers {}", s.layers).unwrap();
        writeln!(out, "hidden {}", s.hidden).unwrap();
        writeln!(out, "input_dim {}", s.input_dim).unwrap();
        writeln!(out, "num_classes {}", s.num_classes).unwrap();
        writeln!(out, "dropout {}", s.dropout).unwrap();
        writeln!(out, "classifier {}", s.classifier.name()).unwrap();
        writeln!(out, "tensors {}", self.params.len()).unwrap();
        for t in self.params.tensors() {
            let (r, c) = t.value.dim();
            writeln!(out, "tensor {} {r} {c}", t.name).unwrap();
            for row in t.value.rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_checkpoint_str(&text, path)
    }

    /// Parses checkpoint text; `origin` names the source in error messages.
    pub fn from_checkpoint_str(text: &str, origin: &Path) -> Result<Model> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, msg: String| Error::Parse {
            file: origin.to_path_buf(),
            line,
            msg,
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of checkpoint, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic != MAGIC {
            return Err(err(ln, "not a checkpoint file".into()));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((ln, v.to_string())),
                _ => Err(err(ln, format!("expected \"{key} <value>\""))),
            }
        };
        fn num<T: std::str::FromStr>(v: (usize, String), err: &dyn Fn(usize, String) -> Error) -> Result<T> {
            v.1.parse().map_err(|_| err(v.0, format!("bad value {:?}", v.1)))
        }
        let encoder = {
            let (ln, v) = field("encoder")?;
            EncoderKind::parse(&v).map_err(|e| err(ln, e.to_string()))?
        };
        let layers = num(field("layers")?, &err)?;
        let hidden = num(field("hidden")?, &err)?;
        let input_dim = num(field("input_dim")?, &err)?;
        let num_classes = num(field("num_classes")?, &err)?;
        let dropout = num(field("dropout")?, &err)?;
        let classifier = {
            let (ln, v) = field("classifier")?;
            ClassifierKind::parse(&v).map_err(|e| err(ln, e.to_string()))?
        };
        let count: usize = num(field("tensors")?, &err)?;
        let spec = ModelSpec {
            encoder,
            layers,
            hidden,
            input_dim,
            num_classes,
            dropout,
            classifier,
        };
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != count {
            return Err(err(0, format!("architecture needs {} tensors, file has {count}", shapes.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, (rows, cols)) in shapes {
            let (ln, line) = next("tensor header")?;
            let expected = format!("tensor {name} {rows} {cols}");
            if line != expected {
                return Err(err(ln, format!("expected {expected:?}")));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = next("tensor row")?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(ln, "bad number in tensor row".into()))?;
                if row.len() != cols {
                    return Err(err(ln, format!("expected {cols} values, found {}", row.len())));
                }
                values.extend(row);
            }
            let value = Array2::from_shape_vec((rows, cols), values).expect("shape");
            tensors.push(Tensor { name, value });
        }
        let params = Params::new(tensors);
        if !params.all_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(Model { spec, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn save_and_load_round_trip() {
        let spec = ModelSpec {
            encoder: EncoderKind::Mlp,
            layers: 2,
            hidden: 5,
            input_dim: 3,
            num_classes: 4,
            dropout: 0.25,
            classifier: ClassifierKind::JointMultilabel,
        };
        let mut m = Model::init(spec, 17).unwrap();
        m.params.set_flat(0, 1e-300);
        m.params.set_flat(1, -123_456_789.123_456_78);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        m.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap(), m);
    }

    #[test]
    fn corrupted_checkpoint_reports_line() {
        let spec = ModelSpec {
            encoder: EncoderKind::Sgc,
            layers: 1,
            hidden: 2,
            input_dim: 2,
            num_classes: 2,
            dropout: 0.0,
            classifier: ClassifierKind::Independent,
        };
        let text = Model::init(spec, 0).unwrap().to_checkpoint_string();
        let broken = text.replacen("tensor classifier.bias 1 2", "tensor classifier.bias 1 3", 1);
        match Model::from_checkpoint_str(&broken, Path::new("x")) {
            Err(Error::Parse { line, .. }) => assert!(line > 9),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 6)) {
            let spec = ModelSpec {
                encoder: EncoderKind::Sgc,
                layers: 1,
                hidden: 1,
                input_dim: 1,
                num_classes: 2,
                dropout: 0.5,
                classifier: ClassifierKind::InContext,
            };
            let mut m = Model::init(spec, 0).unwrap();
            for (k, v) in values.iter().enumerate() {
                m.params.set_flat(k, *v);
            }
            let back = Model::from_checkpoint_str(&m.to_checkpoint_string(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
