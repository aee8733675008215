//! End-to-end tests of the `jcsl` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn jcsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcsl"))
        .args(args)
        .output()
        .expect("failed to launch jcsl")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "jcsl failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small, well-separated SBM written to `<dir>/data`.
fn small_dataset(dir: &Path, seed: u64) -> PathBuf {
    let data = dir.join("data");
    let out = jcsl(&[
        "gen-sbm",
        "--blocks",
        "3",
        "--nodes-per-block",
        "15",
        "--p-in",
        "0.4",
        "--p-out",
        "0.02",
        "--feat-dim",
        "6",
        "--seed",
        &seed.to_string(),
        "--out",
        s(&data),
    ]);
    assert_ok(&out);
    data
}

/// Two disconnected 4-cliques, labelled by clique.
fn two_cliques(dir: &Path) -> PathBuf {
    let data = dir.join("cliques");
    fs::create_dir_all(&data).unwrap();
    let mut graph = String::from("8 12\n");
    for base in [0, 4] {
        for u in 0..4 {
            for v in u + 1..4 {
                graph.push_str(&format!("{} {}\n", base + u, base + v));
            }
        }
    }
    fs::write(data.join("graph.txt"), graph).unwrap();
    let features: String = (0..8).map(|i| format!("{} 1\n", i % 3)).collect();
    fs::write(data.join("features.txt"), format!("8 2\n{features}")).unwrap();
    let labels: String = (0..8).map(|i| format!("{}\n", i / 4)).collect();
    fs::write(data.join("labels.txt"), format!("8 2 s\n{labels}")).unwrap();
    fs::write(data.join("masks.txt"), "train: 0 4\nval: 1 5\ntest: 2 3 6 7\n").unwrap();
    data
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key}= in {line:?}"))
}

#[test]
fn generated_dataset_trains_and_reports_metrics() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("sbm");
    assert_ok(&jcsl(&["gen-sbm", "--out", s(&data)]));
    let run = tmp.path().join("run");
    let out = jcsl(&[
        "train", "--dataset", s(&data), "--out", s(&run), "--epochs", "5", "--hidden", "8",
    ]);
    assert_ok(&out);
    let line = stdout(&out);
    let acc: f64 = field(&line, "test_acc").parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    field(&line, "f1_micro");
    field(&line, "ece");
    for file in ["result.txt", "curves.csv", "model.ckpt"] {
        assert!(run.join(file).is_file(), "missing {file}");
    }
    let result = fs::read_to_string(run.join("result.txt")).unwrap();
    assert!(result.contains("loss = ce"));
    assert!(result.contains("test_acc = "));
}

#[test]
fn different_generator_seeds_give_different_graphs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let ga = fs::read(small_dataset(a.path(), 1).join("graph.txt")).unwrap();
    let gb = fs::read(small_dataset(b.path(), 2).join("graph.txt")).unwrap();
    assert_ne!(ga, gb);
    let again = TempDir::new().unwrap();
    assert_eq!(fs::read(small_dataset(again.path(), 1).join("graph.txt")).unwrap(), ga);
}

#[test]
fn generator_rejects_inverted_probabilities() {
    let tmp = TempDir::new().unwrap();
    let out = jcsl(&["gen-sbm", "--p-in", "0.01", "--p-out", "0.2", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metis_like_separates_two_cliques() {
    let tmp = TempDir::new().unwrap();
    let data = two_cliques(tmp.path());
    let assign = tmp.path().join("assign.txt");
    let out = jcsl(&["partition", "--dataset", s(&data), "--clusters", "2", "--out", s(&assign)]);
    assert_ok(&out);
    let line = stdout(&out);
    assert_eq!(field(&line, "between"), "0");
    assert_eq!(field(&line, "within"), "12");
    assert!(assign.is_file());
}

#[test]
fn single_cluster_has_no_between_links() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    for method in ["metis-like", "kmeans", "random"] {
        let out = jcsl(&[
            "partition", "--dataset", s(&data), "--method", method, "--clusters", "1", "--out",
            s(&tmp.path().join("a.txt")),
        ]);
        assert_ok(&out);
        assert_eq!(field(&stdout(&out), "between"), "0", "{method}");
    }
}

#[test]
fn bad_cluster_count_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let data = two_cliques(tmp.path());
    let out = jcsl(&["partition", "--dataset", s(&data), "--clusters", "0", "--out", s(&tmp.path().join("a"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = jcsl(&["partition", "--dataset", s(&data), "--clusters", "9", "--out", s(&tmp.path().join("a"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = jcsl(&[
        "train", "--dataset", s(&tmp.path().join("nope")), "--out", s(&tmp.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = jcsl(&["train", "--out", s(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    let conf = tmp.path().join("exp.conf");
    fs::write(&conf, "dataset = data\nlearning_rate = 0.1\n").unwrap();
    let out = jcsl(&["train", "--config", s(&conf), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = jcsl(&[
        "train", "--dataset", s(&data), "--out", s(&tmp.path().join("run")), "--set", "momentum=0.9",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path(), 0);
    let conf = tmp.path().join("exp.conf");
    fs::write(&conf, "# relative to this file\ndataset = data\nloss = jc\nepochs = 50\nhidden = 8\nnum_clusters = 3\n").unwrap();
    let run = tmp.path().join("run");
    assert_ok(&jcsl(&["train", "--config", s(&conf), "--out", s(&run), "--epochs", "3", "--set", "beta=0.5"]));
    let result = fs::read_to_string(run.join("result.txt")).unwrap();
    assert!(result.contains("epochs = 3\n"), "{result}");
    assert!(result.contains("loss = jc\n"));
    assert!(result.contains("num_clusters = 3\n"));
    assert!(result.contains("beta = 0.5\n"));
    assert_eq!(fs::read_to_string(run.join("curves.csv")).unwrap().lines().count(), 1 + 4);
}

#[test]
fn ce_and_jc_configs_differ_only_in_loss() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    let mut results = Vec::new();
    for loss in ["ce", "jc"] {
        let run = tmp.path().join(loss);
        assert_ok(&jcsl(&[
            "train", "--dataset", s(&data), "--out", s(&run), "--epochs", "3", "--hidden", "8", "--loss", loss,
        ]));
        let text = fs::read_to_string(run.join("result.txt")).unwrap();
        let config: Vec<String> = text.lines().take_while(|l| !l.starts_with("best_epoch")).map(String::from).collect();
        results.push(config);
    }
    let diff: Vec<_> = results[0].iter().zip(&results[1]).filter(|(a, b)| a != b).collect();
    assert_eq!(diff, vec![(&"loss = ce".to_string(), &"loss = jc".to_string())]);
}

#[test]
fn training_twice_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 3);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        let out = jcsl(&[
            "train", "--dataset", s(&data), "--out", s(&run), "--epochs", "10", "--hidden", "8", "--loss", "jc",
            "--num-clusters", "3", "--seeds", "2",
        ]);
        assert_ok(&out);
        let files: Vec<Vec<u8>> = ["summary.txt", "seed-0/result.txt", "seed-0/curves.csv", "seed-1/model.ckpt"]
            .iter()
            .map(|f| fs::read(run.join(f)).unwrap())
            .collect();
        outputs.push((stdout(&out), files));
    }
    assert_eq!(outputs[0], outputs[1]);
    let summary = String::from_utf8(outputs[0].1[0].clone()).unwrap();
    assert!(summary.contains("seeds = 2\n") && summary.contains("test_acc_mean = "));
}

#[test]
fn divergent_training_is_a_runtime_failure() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    let out = jcsl(&[
        "train", "--dataset", s(&data), "--out", s(&tmp.path().join("run")), "--epochs", "5", "--lr", "1e300",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

fn attack(data: &Path, out: &Path, ratios: &str) -> Output {
    jcsl(&[
        "attack", "--dataset", s(data), "--out", s(out), "--ratios", ratios, "--epochs", "4", "--hidden", "8",
        "--num-clusters", "3",
    ])
}

#[test]
fn attack_at_zero_gives_one_row_per_loss() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    let csv = tmp.path().join("sweep.csv");
    let out = attack(&data, &csv, "0");
    assert_ok(&out);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(stdout(&out), text);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,ce,") && rows[1].starts_with("0,jc,"));
}

#[test]
fn full_attack_sweep_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(tmp.path(), 0);
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    let ratios = "0.2,0.4,0.6,0.8,1.0";
    assert_ok(&attack(&data, &a, ratios));
    assert_ok(&attack(&data, &b, ratios));
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(text).unwrap().lines().count(), 1 + 10);
    assert_eq!(attack(&data, &a, "0.5,0.2").status.code(), Some(2));
}
