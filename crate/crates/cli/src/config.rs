//! Flat `key = value` experiment configuration.
//!
//! A configuration file holds one `key = value` pair per line; blank lines
//! and lines starting with `#` are ignored. Keys are the training keys of
//! [`TrainConfig`] plus `dataset`, `out` and `seeds`. Relative paths in a
//! file are resolved against the file's directory; relative paths given on
//! the command line are resolved against the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use jcsl::trainer::TrainConfig;
use jcsl::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: None,
            out: None,
            seeds: 1,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidInput(msg)
}

impl ExperimentConfig {
    /// Applies one setting; `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), Error> {
        let resolved = || {
            let p = Path::new(value);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        match key {
            "dataset" => self.dataset = Some(resolved()),
            "out" => self.out = Some(resolved()),
            "seeds" => {
                self.seeds = value
                    .parse()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| invalid(format!("seeds must be a positive integer, got {value:?}")))?
            }
            "partition_file" => self.train.set(key, &resolved().display().to_string())?,
            _ => self.train.set(key, value)?,
        }
        Ok(())
    }

    /// Reads settings from a configuration file on top of the current ones.
    pub fn load_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                file: path.to_path_buf(),
                line: k + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected \"key = value\"".into()))?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value, base).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    /// Applies command-line overrides, resolved against the working
    /// directory.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), Error> {
        for (key, value) in overrides {
            self.set(key, value, Path::new("."))?;
        }
        Ok(())
    }

    /// The dataset directory, which every training command needs.
    pub fn dataset(&self) -> Result<&Path, Error> {
        self.dataset
            .as_deref()
            .ok_or_else(|| invalid("no dataset given (set `dataset` or pass --dataset)".into()))
    }

    pub fn out(&self) -> Result<&Path, Error> {
        self.out
            .as_deref()
            .ok_or_else(|| invalid("no output path given (set `out` or pass --out)".into()))
    }

    /// Echo of every setting in `key = value` form.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.dataset {
            out.push_str(&format!("dataset = {}\n", d.display()));
        }
        out.push_str(&format!("seeds = {}\n", self.seeds));
        for (k, v) in self.train.pairs() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jcsl::trainer::LossKind;

    #[test]
    fn file_values_are_parsed_and_paths_resolved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        fs::write(&path, "# experiment\nloss = jc\n\ndataset = data/cora\nseeds=3\nnum_clusters = 7\n").unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.train.loss, LossKind::Jc);
        assert_eq!(cfg.train.num_clusters, 7);
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.dataset.as_deref(), Some(dir.path().join("data/cora").as_path()));
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        fs::write(&path, "loss = jc\nepochs = 10\n").unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.load_file(&path).unwrap();
        cfg.apply_overrides(&[("epochs".into(), "20".into())]).unwrap();
        assert_eq!(cfg.train.epochs, 20);
        assert_eq!(cfg.train.loss, LossKind::Jc);

        fs::write(&path, "loss = jc\nlearning_rate = 0.1\n").unwrap();
        match ExperimentConfig::default().load_file(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "loss jc\n").unwrap();
        assert!(ExperimentConfig::default().load_file(&path).is_err());
        assert!(ExperimentConfig::default().apply_overrides(&[("seeds".into(), "0".into())]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[("loss".into(), "mixup".into()), ("beta".into(), "0.25".into())]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.conf");
        fs::write(&path, cfg.echo()).unwrap();
        let mut back = ExperimentConfig::default();
        back.load_file(&path).unwrap();
        assert_eq!(back, cfg);
    }
}
