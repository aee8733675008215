//! Plain-text dataset directory format.
//!
//! A dataset directory holds four space-separated files:
//!
//! * `graph.txt` — header `n m`, then `m` lines `u v` (0-indexed, `u != v`);
//! * `features.txt` — header `n d`, then `n` rows of `d` reals;
//! * `labels.txt` — header `n c kind` with kind `s` or `m`, then `n` lines
//!   holding either a class index or `c` binary flags;
//! * `masks.txt` — lines `train: …`, `val: …`, `test: …`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use super::{Dataset, FeatureMatrix, Graph, LabelKind, LabelSet, SplitMasks};
use crate::error::{Error, Result};

/// Line-oriented reader that attaches file and line numbers to errors.
struct TextFile {
    path: PathBuf,
    lines: Vec<String>,
    next: usize,
}

impl TextFile {
    fn open(path: PathBuf) -> Result<Self> {
        let text = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let lines = text.lines().map(str::to_owned).collect();
        Ok(Self { path, lines, next: 0 })
    }

    /// 1-based number of the line most recently returned.
    fn line_no(&self) -> usize {
        self.next
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.path.clone(),
            line: self.line_no(),
            msg: msg.into(),
        }
    }

    /// Next non-empty line, or an error naming what was expected.
    fn next_line(&mut self, what: &str) -> Result<String> {
        while self.next < self.lines.len() {
            let line = self.lines[self.next].trim().to_owned();
            self.next += 1;
            if !line.is_empty() {
                return Ok(line);
            }
        }
        self.next += 1;
        Err(self.error(format!("unexpected end of file, expected {what}")))
    }

    fn expect_end(&mut self) -> Result<()> {
        while self.next < self.lines.len() {
            let line = self.lines[self.next].trim();
            self.next += 1;
            if !line.is_empty() {
                return Err(self.error("unexpected trailing content"));
            }
        }
        Ok(())
    }

    fn parse<T: FromStr>(&self, token: &str, what: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.error(format!("cannot parse {what} from {token:?}")))
    }

    /// Parses exactly `count` whitespace-separated tokens.
    fn fields<T: FromStr>(&self, line: &str, count: usize, what: &str) -> Result<Vec<T>> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != count {
            return Err(self.error(format!(
                "expected {count} {what} values, found {}",
                tokens.len()
            )));
        }
        tokens.iter().map(|t| self.parse(t, what)).collect()
    }
}

/// Reads a dataset directory, validating every invariant.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let graph = read_graph(dir.join("graph.txt"))?;
    let n = graph.num_nodes();
    let features = read_features(dir.join("features.txt"), n)?;
    let labels = read_labels(dir.join("labels.txt"), n)?;
    let masks = read_masks(dir.join("masks.txt"), n)?;
    Dataset::new(graph, features, labels, masks)
}

fn read_graph(path: PathBuf) -> Result<Graph> {
    let mut f = TextFile::open(path)?;
    let header = f.next_line("header \"n m\"")?;
    let hv: Vec<usize> = f.fields(&header, 2, "header")?;
    let (n, m) = (hv[0], hv[1]);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let line = f.next_line("edge line")?;
        let e: Vec<usize> = f.fields(&line, 2, "node index")?;
        if e[0] >= n || e[1] >= n {
            return Err(f.error(format!("edge ({}, {}) out of range for {n} nodes", e[0], e[1])));
        }
        if e[0] == e[1] {
            return Err(f.error(format!("self-loop on node {}", e[0])));
        }
        edges.push((e[0], e[1]));
    }
    f.expect_end()?;
    Graph::from_edges(n, edges)
}

fn read_features(path: PathBuf, n: usize) -> Result<FeatureMatrix> {
    let mut f = TextFile::open(path)?;
    let header = f.next_line("header \"n d\"")?;
    let hv: Vec<usize> = f.fields(&header, 2, "header")?;
    if hv[0] != n {
        return Err(f.error(format!("feature file has {} rows but graph has {n} nodes", hv[0])));
    }
    let d = hv[1];
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let line = f.next_line("feature row")?;
        let row: Vec<f64> = f.fields(&line, d, "feature")?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(f.error("non-finite feature value"));
        }
        values.extend(row);
    }
    f.expect_end()?;
    let values = Array2::from_shape_vec((n, d), values).expect("shape");
    FeatureMatrix::new(values)
}

fn read_labels(path: PathBuf, n: usize) -> Result<LabelSet> {
    let mut f = TextFile::open(path)?;
    let header = f.next_line("header \"n c kind\"")?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(f.error("expected header \"n c kind\""));
    }
    let rows: usize = f.parse(tokens[0], "node count")?;
    let c: usize = f.parse(tokens[1], "class count")?;
    if rows != n {
        return Err(f.error(format!("label file has {rows} rows but graph has {n} nodes")));
    }
    if c == 0 {
        return Err(f.error("class count must be positive"));
    }
    let labels = match tokens[2] {
        "s" => {
            let mut classes = Vec::with_capacity(n);
            for _ in 0..n {
                let line = f.next_line("class index")?;
                let v: Vec<usize> = f.fields(&line, 1, "class index")?;
                if v[0] >= c {
                    return Err(f.error(format!("class {} out of range for {c} classes", v[0])));
                }
                classes.push(v[0]);
            }
            LabelSet::single(c, classes)?
        }
        "m" => {
            let mut values = Vec::with_capacity(n * c);
            for _ in 0..n {
                let line = f.next_line("label flags")?;
                let row: Vec<u8> = f.fields(&line, c, "label flag")?;
                if row.iter().any(|&v| v > 1) {
                    return Err(f.error("multi-label flags must be 0 or 1"));
                }
                values.extend(row.into_iter().map(f64::from));
            }
            LabelSet::multi(Array2::from_shape_vec((n, c), values).expect("shape"))?
        }
        other => return Err(f.error(format!("unknown label kind {other:?}, expected s or m"))),
    };
    f.expect_end()?;
    Ok(labels)
}

fn read_masks(path: PathBuf, n: usize) -> Result<SplitMasks> {
    let mut f = TextFile::open(path)?;
    let mut owner: Vec<Option<&str>> = vec![None; n];
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(3);
    for name in ["train", "val", "test"] {
        let line = f.next_line(&format!("\"{name}:\" line"))?;
        let rest = line
            .strip_prefix(name)
            .and_then(|r| r.strip_prefix(':'))
            .ok_or_else(|| f.error(format!("expected line starting with \"{name}:\"")))?;
        let mut set = Vec::new();
        for tok in rest.split_whitespace() {
            let i: usize = f.parse(tok, "node index")?;
            if i >= n {
                return Err(f.error(format!("node {i} out of range for {n} nodes")));
            }
            if let Some(prev) = owner[i] {
                return Err(f.error(format!("node {i} already listed in {prev}")));
            }
            owner[i] = Some(name);
            set.push(i);
        }
        sets.push(set);
    }
    f.expect_end()?;
    let test = sets.pop().unwrap();
    let val = sets.pop().unwrap();
    let train = sets.pop().unwrap();
    if train.is_empty() {
        return Err(f.error("train split is empty"));
    }
    SplitMasks::new(n, train, val, test)
}

fn write_file(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

/// Writes `data` in the directory format; reals use the shortest
/// representation that parses back to the same value, so
/// `load_dataset(write_dataset(d))` reproduces `d` exactly.
pub fn write_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let n = data.num_nodes();

    let mut s = format!("{} {}\n", n, data.graph.num_edges());
    for (u, v) in data.graph.edges() {
        writeln!(s, "{u} {v}").unwrap();
    }
    write_file(dir.join("graph.txt"), &s)?;

    let x = data.features.view();
    let mut s = format!("{} {}\n", n, x.ncols());
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    write_file(dir.join("features.txt"), &s)?;

    let labels = &data.labels;
    let mut s = format!("{} {} {}\n", n, labels.num_classes(), labels.kind().code());
    match labels.kind() {
        LabelKind::Single => {
            for &c in labels.classes() {
                writeln!(s, "{c}").unwrap();
            }
        }
        LabelKind::Multi => {
            for row in labels.matrix().rows() {
                let cells: Vec<&str> = row.iter().map(|&v| if v == 1.0 { "1" } else { "0" }).collect();
                s.push_str(&cells.join(" "));
                s.push('\n');
            }
        }
    }
    write_file(dir.join("labels.txt"), &s)?;

    let mut s = String::new();
    for (name, set) in [
        ("train", &data.masks.train),
        ("val", &data.masks.val),
        ("test", &data.masks.test),
    ] {
        s.push_str(name);
        s.push(':');
        for i in set {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    write_file(dir.join("masks.txt"), &s)
}
