//! `jcsl`: partition graphs, train node classifiers, run robustness sweeps
//! and generate synthetic datasets.
//!
//! Exit codes: 0 on success, 1 when a run fails numerically, 2 on invalid
//! usage or input.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use jcsl::attack::{robustness_sweep, sweep_csv};
use jcsl::graph::{gen_sbm, load_dataset, write_dataset, SbmParams};
use jcsl::partition::edge_cut_stats;
use jcsl::trainer::{multi_seed, partition_for, LossKind, PartitionMethod, RunResult, TrainConfig};

#[derive(Parser)]
#[command(name = "jcsl", version, about = "Node classification with joint node-cluster supervision")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a dataset's graph and report within/between-cluster links.
    Partition(PartitionArgs),
    /// Train (over one or more seeds) and write results, curves and checkpoints.
    Train(TrainArgs),
    /// Retrain CE and JC models on randomly perturbed graphs.
    Attack(AttackArgs),
    /// Generate a stochastic block model dataset.
    GenSbm(GenArgs),
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// metis-like, kmeans or random.
    #[arg(long, default_value = "metis-like")]
    method: String,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the assignment.
    #[arg(long)]
    out: PathBuf,
}

/// Flags mirroring configuration keys; each overrides the config file.
#[derive(Args)]
struct ConfigFlags {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    partition_file: Option<String>,
    #[arg(long)]
    num_clusters: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    #[arg(long)]
    adam_eps: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    detach_clusters: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Any configuration key as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigFlags {
    fn overrides(&self) -> Result<Vec<(String, String)>, jcsl::Error> {
        let named = [
            ("dataset", &self.dataset),
            ("out", &self.out),
            ("seeds", &self.seeds),
            ("encoder", &self.encoder),
            ("layers", &self.layers),
            ("hidden", &self.hidden),
            ("dropout", &self.dropout),
            ("loss", &self.loss),
            ("partition", &self.partition),
            ("partition_file", &self.partition_file),
            ("num_clusters", &self.num_clusters),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("adam_eps", &self.adam_eps),
            ("epochs", &self.epochs),
            ("eval_every", &self.eval_every),
            ("seed", &self.seed),
            ("detach_clusters", &self.detach_clusters),
            ("beta", &self.beta),
        ];
        let mut out: Vec<(String, String)> = Vec::new();
        for raw in &self.set {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| jcsl::Error::InvalidInput(format!("--set expects KEY=VALUE, got {raw:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        out.extend(named.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        Ok(out)
    }

    fn resolve(&self) -> Result<ExperimentConfig, jcsl::Error> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        cfg.apply_overrides(&self.overrides()?)?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Comma-separated fake-to-real edge ratios, ascending.
    #[arg(long, default_value = "0.2,0.4,0.6,0.8,1.0")]
    ratios: String,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 50)]
    nodes_per_block: usize,
    #[arg(long, default_value_t = 0.2)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    feat_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    feat_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let data = load_dataset(&args.dataset)?;
    let method = PartitionMethod::parse(&args.method)?;
    if method == PartitionMethod::File {
        return Err(jcsl::Error::InvalidInput("partition needs a method other than file".into()).into());
    }
    let cfg = TrainConfig {
        partition: method,
        num_clusters: args.clusters,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let assign = partition_for(&cfg, &data)?;
    assign.write(&args.out)?;
    let stats = edge_cut_stats(&data.graph, &assign)?;
    println!(
        "clusters={} empty={} within={} between={} rate={}",
        assign.num_clusters(),
        assign.empty_clusters(),
        stats.within,
        stats.between,
        stats.rate
    );
    Ok(())
}

/// Writes `result.txt` (dataset line plus the run's configuration and
/// metrics), `curves.csv` and `model.ckpt` into `dir`.
fn write_run(dir: &Path, dataset: &Path, run: &RunResult) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let result = format!("dataset = {}\n{}", dataset.display(), run.to_result_string());
    write(&dir.join("result.txt"), &result)?;
    write(&dir.join("curves.csv"), &run.curves_csv())?;
    run.model.save(&dir.join("model.ckpt"))?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let data = load_dataset(cfg.dataset()?)?;
    let out = cfg.out()?.to_path_buf();
    let summary = multi_seed(&cfg.train, &data, cfg.seeds)?;
    let dataset = cfg.dataset()?;
    if let [run] = summary.runs.as_slice() {
        write_run(&out, dataset, run)?;
    } else {
        for run in &summary.runs {
            write_run(&out.join(format!("seed-{}", run.config.seed)), dataset, run)?;
        }
        let mut text = cfg.echo();
        for (name, s) in [
            ("test_acc", summary.accuracy),
            ("test_f1_micro", summary.f1_micro),
            ("test_f1_macro", summary.f1_macro),
            ("test_f1_weighted", summary.f1_weighted),
            ("test_ece", summary.ece),
        ] {
            text.push_str(&format!("{name}_mean = {}\n{name}_std = {}\n", s.mean, s.std));
        }
        write(&out.join("summary.txt"), &text)?;
    }
    println!(
        "test_acc={:.4} f1_micro={:.4} ece={:.4}",
        summary.accuracy.mean, summary.f1_micro.mean, summary.ece.mean
    );
    if cfg.seeds > 1 {
        println!("test_acc_std={:.4} seeds={}", summary.accuracy.std, cfg.seeds);
    }
    Ok(())
}

fn parse_ratios(text: &str) -> Result<Vec<f64>, jcsl::Error> {
    text.split(',')
        .map(|r| {
            r.trim()
                .parse::<f64>()
                .map_err(|_| jcsl::Error::InvalidInput(format!("bad attack ratio {r:?}")))
        })
        .collect()
}

fn cmd_attack(args: AttackArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let ratios = parse_ratios(&args.ratios)?;
    let data = load_dataset(cfg.dataset()?)?;
    let out = cfg.out()?.to_path_buf();
    let ce = TrainConfig { loss: LossKind::Ce, ..cfg.train.clone() };
    let jc = TrainConfig { loss: LossKind::Jc, ..cfg.train.clone() };
    let rows = robustness_sweep(&data, &ratios, &ce, &jc, cfg.seeds)?;
    let csv = sweep_csv(&rows);
    write(&out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let params = SbmParams {
        blocks: args.blocks,
        nodes_per_block: args.nodes_per_block,
        p_in: args.p_in,
        p_out: args.p_out,
        feat_dim: args.feat_dim,
        feat_noise: args.feat_noise,
        seed: args.seed,
    };
    let data = gen_sbm(&params)?;
    write_dataset(&data, &args.out)?;
    println!(
        "nodes={} edges={} classes={} train={} val={} test={}",
        data.num_nodes(),
        data.graph.num_edges(),
        data.num_classes(),
        data.masks.train.len(),
        data.masks.val.len(),
        data.masks.test.len()
    );
    Ok(())
}

/// 2 for invalid input, 1 for failures during a run.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<jcsl::Error>() {
        Some(e) if !e.is_input_error() => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Partition(a) => cmd_partition(a),
        Command::Train(a) => cmd_train(a),
        Command::Attack(a) => cmd_attack(a),
        Command::GenSbm(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
