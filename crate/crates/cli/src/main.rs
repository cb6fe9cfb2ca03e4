mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use dtnml::analysis::{lambda_update_demo, regressor_coefficients, suppression_exponent_fit};
use dtnml::bayes::stinespring_witness;
use dtnml::data::{load_or_prepare, prepare, DatasetName, DatasetSpec, FeatureKind, GroupingKind, PreparedDataset};
use dtnml::experiment::{render_svg, run_sweep_with, trend_slope, write_csv, SweepSpec};
use dtnml::network::{load_checkpoint, save_checkpoint};
use dtnml::train::{default_hyper, gradient_self_test, train_with, TrainConfig};
use dtnml::{AncillaScheme, Error, ModelKind, Network, NetworkTopology, Route};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dtnml", version, about = "Dephased tensor-network classifiers")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the IDX files (optionally under mnist/, kmnist/, fashion/).
    #[arg(long, global = true, env = "DTNML_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Encoded-dataset cache; defaults to <data-dir>/cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a dataset split and write the cache.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one network and write its checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        ancillas: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every (p, ancillas, run) cell and write CSV, JSON and SVG.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opt: OptArgs,
        /// Comma-separated ancilla counts.
        #[arg(long, value_delimiter = ',')]
        ancillas: Option<Vec<usize>>,
        /// Comma-separated dephasing rates.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed from which every cell seed is derived.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Test accuracy of a checkpoint on the density-matrix route.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Test accuracy of a checkpoint evaluated as a Bayesian network.
    Bayes {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Regression-coefficient report for one node.
    Analyze {
        /// Checkpoint to read; without it an identity network is built from the model flags.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        ancillas: Option<usize>,
        #[arg(long, default_value_t = 0)]
        node: usize,
        /// Rate for the coefficient report (default: the network's own).
        #[arg(long)]
        p: Option<f64>,
        /// Features for the lambda update demo on the chosen node.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Also emit the Stinespring witness.
        #[arg(long)]
        stinespring: bool,
    },
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    #[arg(long, value_parser = parse_enum::<DatasetName>)]
    dataset: Option<DatasetName>,
    /// even-odd, fashion, three-five or identity.
    #[arg(long, value_parser = parse_enum::<GroupingKind>)]
    grouping: Option<GroupingKind>,
    /// compressed or pca.
    #[arg(long, value_parser = parse_enum::<FeatureKind>)]
    features: Option<FeatureKind>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    val_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Shorthand for the 3-vs-5 MNIST task with 5000/2000 samples.
    #[arg(long)]
    three_five: bool,
    /// Train on the first N samples only.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long, value_parser = parse_enum::<ModelKind>)]
    model: Option<ModelKind>,
    #[arg(long, value_parser = parse_enum::<AncillaScheme>)]
    scheme: Option<AncillaScheme>,
    /// Leave the data qubits undephased.
    #[arg(long)]
    no_dephase_data: bool,
}

#[derive(Args, Debug, Default)]
struct OptArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.three_five {
            cfg.data = DatasetSpec::mnist_three_five();
        }
        let d = &mut cfg.data;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { d.$f = v; })* };
        }
        set!(dataset, grouping, features, train_size, val_size, split_seed);
        if self.test_size.is_some() {
            d.test_size = self.test_size;
        }
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if self.no_dephase_data {
            cfg.dephase_data_layer = false;
        }
    }
}

impl OptArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        cfg.learning_rate = self.lr.or(cfg.learning_rate);
        cfg.init_std = self.init_std.or(cfg.init_std);
    }
}

struct Ctx {
    data_dir: PathBuf,
    cache_dir: PathBuf,
    out: PathBuf,
}

impl Ctx {
    fn load(&self, spec: &DatasetSpec, subsample: Option<usize>) -> anyhow::Result<PreparedDataset> {
        let mut data = load_or_prepare(spec, &self.data_dir, &self.cache_dir)?;
        if let Some(n) = subsample {
            data.train.truncate(n);
        }
        Ok(data)
    }

    fn out_dir(&self) -> anyhow::Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Io { path: self.out.clone(), source: e })?;
        Ok(&self.out)
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        Ok(path)
    }
}

fn hyper(cfg: &RunConfig, k: usize, p: f64) -> anyhow::Result<(f64, f64)> {
    match (cfg.learning_rate, cfg.init_std) {
        (Some(lr), Some(std)) => Ok((lr, std)),
        (lr, std) => {
            let h = default_hyper(
                cfg.data.dataset,
                cfg.data.grouping,
                cfg.model,
                cfg.scheme,
                k,
                p,
                cfg.dephase_data_layer,
            )?;
            Ok((lr.unwrap_or(h.learning_rate), std.unwrap_or(h.init_std)))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        cache_dir: cli.cache_dir.clone().unwrap_or_else(|| cli.data_dir.join("cache")),
        data_dir: cli.data_dir,
        out: cli.out,
    };

    match cli.command {
        Command::Prepare { data } => {
            data.apply(&mut cfg);
            let prepared = prepare(&cfg.data, &ctx.data_dir)?;
            let paths = prepared.save(&ctx.cache_dir, &cfg.data.stem())?;
            println!("train {}", prepared.train.len());
            println!("validation {}", prepared.validation.len());
            println!("test {}", prepared.test.len());
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Train { data, model, opt, ancillas, p, seed } => {
            data.apply(&mut cfg);
            model.apply(&mut cfg);
            opt.apply(&mut cfg);
            cfg.ancillas = ancillas.unwrap_or(cfg.ancillas);
            cfg.p = p.unwrap_or(cfg.p);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let prepared = ctx.load(&cfg.data, data.subsample)?;
            let (learning_rate, init_std) = hyper(&cfg, cfg.ancillas, cfg.p)?;
            let tc = TrainConfig {
                learning_rate,
                init_std,
                batch_size: cfg.batch_size,
                epochs: cfg.epochs,
                seed: cfg.seed,
                p: cfg.p,
                dephase_data_layer: cfg.dephase_data_layer,
            };
            let topo = NetworkTopology::build(cfg.model, prepared.feature_count, cfg.ancillas, cfg.scheme)?;
            let mut net = Network::new(topo)?;
            let report = train_with(&mut net, &prepared, &tc, |e| {
                eprintln!("epoch {:>3}  loss {:.5}  val {:.4}", e.epoch, e.train_loss, e.val_accuracy);
            })?;
            let ckpt = ctx.out_dir()?.join("model.ckpt");
            save_checkpoint(&net, &ckpt)?;
            ctx.write("train.json", &serde_json::to_string_pretty(&report)?)?;
            println!(
                "{}",
                json!({
                    "test_accuracy": report.test_accuracy,
                    "best_val_accuracy": report.best_val_accuracy,
                    "best_epoch": report.best_epoch,
                    "checkpoint": ckpt,
                })
            );
        }
        Command::Sweep { data, model, opt, ancillas, p, runs, seed } => {
            data.apply(&mut cfg);
            model.apply(&mut cfg);
            opt.apply(&mut cfg);
            cfg.k_list = ancillas.unwrap_or(cfg.k_list);
            cfg.p_grid = p.unwrap_or(cfg.p_grid);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.seed = seed.unwrap_or(cfg.seed);
            if let Some(n) = data.subsample {
                cfg.data.train_size = n;
            }
            let prepared = ctx.load(&cfg.data, None)?;
            let err = gradient_self_test(cfg.seed)?;
            eprintln!("gradient self-test: relative error {err:.2e}");
            let hyper_override = match (cfg.learning_rate, cfg.init_std) {
                (None, None) => None,
                _ => Some(dtnml::train::Hyper {
                    learning_rate: cfg.learning_rate.unwrap_or(0.005),
                    init_std: cfg.init_std.unwrap_or(0.05),
                }),
            };
            let spec = SweepSpec {
                model: cfg.model,
                scheme: cfg.scheme,
                data: cfg.data.clone(),
                p_grid: cfg.p_grid.clone(),
                k_list: cfg.k_list.clone(),
                runs: cfg.runs,
                base_seed: cfg.seed,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                dephase_data_layer: cfg.dephase_data_layer,
                hyper_override,
                ..SweepSpec::default()
            };
            let result = run_sweep_with(&spec, &prepared, |r| {
                eprintln!(
                    "p={} k={} run={} seed={} acc={:.4} ({:?})",
                    r.p, r.k, r.run, r.seed, r.test_accuracy, r.status
                );
            })?;
            let csv = ctx.out_dir()?.join("results.csv");
            write_csv(&result.records, &csv)?;
            ctx.write(
                "summary.json",
                &serde_json::to_string_pretty(&json!({ "spec": spec, "cells": result.summaries }))?,
            )?;
            let title = format!(
                "{} {} {} ({})",
                spec.model.name(),
                spec.data.dataset.dir_name(),
                spec.data.grouping.name(),
                spec.scheme.name()
            );
            ctx.write("accuracy.svg", &render_svg(&result.summaries, &title))?;
            for s in &result.summaries {
                println!(
                    "p={:<4} k={} mean={:.4} stderr={:.4} n={} diverged={}",
                    s.p, s.k, s.mean, s.stderr, s.completed, s.diverged
                );
            }
            for &k in &spec.k_list {
                if let Some(slope) = trend_slope(&result.summaries, k) {
                    println!("k={k} slope={slope:.4}");
                }
            }
            println!("wrote {}", csv.display());
        }
        Command::Eval { data, checkpoint } => evaluate(&ctx, &mut cfg, &data, &checkpoint, Route::Dense)?,
        Command::Bayes { data, checkpoint } => evaluate(&ctx, &mut cfg, &data, &checkpoint, Route::Classical)?,
        Command::Analyze { checkpoint, model, ancillas, node, p, lambda, stinespring } => {
            model.apply(&mut cfg);
            let net = match &checkpoint {
                Some(path) => load_checkpoint(path)?,
                None => {
                    let m = cfg.data.feature_count();
                    let topo = NetworkTopology::build(cfg.model, m, ancillas.unwrap_or(cfg.ancillas), cfg.scheme)?;
                    Network::new(topo)?
                }
            };
            let count = net.topology().nodes.len();
            let h = net.params().get(node).ok_or(Error::IndexOutOfRange { index: node, len: count })?;
            let u = dtnml::linalg::hermitian_expm(h)?;
            let rate = p.unwrap_or(net.topology().p);
            let report = regressor_coefficients(&u, rate)?;
            let d = u.dim();
            let fits: Vec<serde_json::Value> = (0..d)
                .flat_map(|j| (0..=j).map(move |k| (j, k)))
                .map(|(j, k)| match suppression_exponent_fit(&u, (j, k)) {
                    Ok(f) => serde_json::to_value(f).expect("serializable"),
                    Err(e) => json!({ "j": j, "k": k, "exponent": null, "error": e.to_string() }),
                })
                .collect();
            print!("{}", report.to_table());
            let mut doc = json!({ "node": node, "report": report, "fits": fits });
            if let Some(x) = lambda {
                doc["lambda"] = serde_json::to_value(lambda_update_demo(&x, &u)?)?;
            }
            if stinespring {
                doc["stinespring"] = serde_json::to_value(stinespring_witness())?;
            }
            let path = ctx.write(&format!("analysis-node{node}.json"), &serde_json::to_string_pretty(&doc)?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, cfg: &mut RunConfig, data: &DataArgs, checkpoint: &Path, route: Route) -> anyhow::Result<()> {
    data.apply(cfg);
    let net = load_checkpoint(checkpoint)?;
    let prepared = ctx.load(&cfg.data, None)?;
    let compiled = net.compile()?;
    let preds = compiled.predict_all_with(&prepared.test, route)?;
    let correct = preds.iter().zip(&prepared.test).filter(|(p, s)| p.predicted_class == s.label).count();
    let accuracy = if preds.is_empty() { 0.0 } else { correct as f64 / preds.len() as f64 };
    let t = net.topology();
    println!(
        "{}",
        json!({
            "route": if route == Route::Dense { "density-matrix" } else { "bayesian-network" },
            "model": t.kind.name(), "ancillas": t.k, "scheme": t.scheme.name(), "p": t.p,
            "samples": preds.len(), "test_accuracy": accuracy,
        })
    );
    Ok(())
}

/// 2 for configuration errors, 3 for data errors, 4 for numerical failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::CountMismatch { .. }
            | Error::InvalidDataset(_)
            | Error::Format(_)
            | Error::Io { .. }
            | Error::FeatureCount { .. }
            | Error::FeatureOutOfRange(_)
            | Error::DegenerateCovariance { .. },
        ) => 3,
        Some(
            Error::Diverged { .. }
            | Error::Eigensolver
            | Error::GradientCheck(_)
            | Error::NotUnitary(_)
            | Error::NotHermitian(_)
            | Error::BadTrace(_)
            | Error::NotPositive(_)
            | Error::ZeroCoefficient { .. },
        ) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
