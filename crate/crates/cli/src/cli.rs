//! The `gnce` binary: argument parsing, subcommand dispatch, output files.
//!
//! Conventions shared by every subcommand:
//! - one JSON summary object on stdout (the only place wall-clock times
//!   appear); progress and warnings go to stderr,
//! - artifacts land in the `--out` directory, along with a
//!   `resolved_config.json` snapshot that reproduces the run when passed
//!   back via `--config`,
//! - exit codes: 0 success, 1 usage problems, 2 missing/corrupt data,
//!   3 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use gnce_core::gnn::ModelParams;
use gnce_core::graph::GraphTopology;
use gnce_core::grid::PilotPattern;

use crate::bler::{bler_report, build_estimators, run_bler};
use crate::checkpoint::{load_checkpoint, save_checkpoint, LoadedModel};
use crate::config::{apply_overrides, load_config, write_resolved_config, WorkbenchConfig};
use crate::dataset::{generate_dataset, load_dataset, write_dataset};
use crate::eval::evaluate;
use crate::trainer::train;
use crate::{io_err, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "gnce",
    version,
    about = "Channel-estimation workbench: synthetic OFDM datasets, a graph-network estimator, classical baselines, MSE and BLER benchmarks"
)]
struct Cli {
    /// Config file (a bare config or a resolved_config.json snapshot).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Dotted-key config override, e.g. `train.lr=0.003` (repeatable).
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads for data generation and evaluation (default: all
    /// cores). Results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fading dataset.
    Generate {
        /// Output directory (dataset.bin + dataset.json).
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for --override generate.count=N.
        #[arg(long)]
        count: Option<usize>,
        /// Shorthand for --override generate.seed=N.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the graph estimator on a dataset.
    Train {
        /// Dataset to train on (.bin or .json path).
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (checkpoint.json/.bin + train_log.jsonl).
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for --override train.epochs=N.
        #[arg(long)]
        epochs: Option<usize>,
        /// Shorthand for --override train.seed=N.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score estimators on a dataset (MSE vs SNR, noise-estimate quality).
    EvalMse {
        /// Dataset to score on (.bin or .json path).
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint for the graph estimator (required if it is evaluated).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory (mse_report.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep block error rate through the 16QAM demodulation chain.
    EvalBler {
        /// Checkpoint for the graph estimator (required if it is evaluated).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory (bler_report.csv).
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for --override bler.seed=N.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report pilot-graph structure for the configured grid.
    InspectGraph {
        /// Optional output directory (edges.csv + graph_stats.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show model and checkpoint facts.
    Info {
        /// Checkpoint to describe (defaults to the configured model).
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

/// Entry point behind `main`: returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit 0; everything else
            // is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let invocation: Vec<String> = argv.iter().skip(1).cloned().collect();
    match execute(cli, &invocation) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, invocation: &[String]) -> Result<Value> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::usage("--threads must be >= 1"));
        }
        // Ignore failure: the global pool can only be built once per
        // process, and results do not depend on its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let base = match &cli.config {
        Some(path) => load_config(path)?,
        None => WorkbenchConfig::default(),
    };
    let mut overrides = cli.overrides.clone();
    overrides.extend(sugar_overrides(&cli.command));
    let cfg = apply_overrides(&base, &overrides)?;
    cfg.validate()?;

    match &cli.command {
        Command::Generate { out, .. } => generate(&cfg, out, invocation),
        Command::Train { dataset, out, .. } => run_train(&cfg, dataset, out, invocation),
        Command::EvalMse { dataset, model, out } => {
            eval_mse(&cfg, dataset, model.as_deref(), out, invocation)
        }
        Command::EvalBler { model, out, .. } => {
            eval_bler(&cfg, model.as_deref(), out, invocation)
        }
        Command::InspectGraph { out } => inspect_graph(&cfg, out.as_deref(), invocation),
        Command::Info { model } => info(&cfg, model.as_deref()),
    }
}

/// Convenience flags expand to overrides applied after `--override`s, so
/// the more specific spelling wins.
fn sugar_overrides(command: &Command) -> Vec<String> {
    let mut out = Vec::new();
    match command {
        Command::Generate { count, seed, .. } => {
            if let Some(c) = count {
                out.push(format!("generate.count={c}"));
            }
            if let Some(s) = seed {
                out.push(format!("generate.seed={s}"));
            }
        }
        Command::Train { epochs, seed, .. } => {
            if let Some(e) = epochs {
                out.push(format!("train.epochs={e}"));
            }
            if let Some(s) = seed {
                out.push(format!("train.seed={s}"));
            }
        }
        Command::EvalBler { seed, .. } => {
            if let Some(s) = seed {
                out.push(format!("bler.seed={s}"));
            }
        }
        _ => {}
    }
    out
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn load_model_arg(path: Option<&Path>) -> Result<Option<LoadedModel>> {
    path.map(load_checkpoint).transpose()
}

fn generate(cfg: &WorkbenchConfig, out: &Path, invocation: &[String]) -> Result<Value> {
    ensure_dir(out)?;
    let started = Instant::now();
    let ds = generate_dataset(
        &cfg.grid,
        cfg.pilot_seed,
        &cfg.ranges,
        cfg.generate.count,
        cfg.generate.seed,
    )?;
    let (bin_path, json_path) = write_dataset(out, "dataset", &ds)?;
    write_resolved_config(out, cfg, invocation)?;
    eprintln!("generated {} samples -> {}", ds.len(), bin_path.display());
    Ok(json!({
        "command": "generate",
        "samples": ds.len(),
        "dataset": bin_path,
        "manifest": json_path,
        "wall_ms": started.elapsed().as_millis() as u64,
    }))
}

fn run_train(
    cfg: &WorkbenchConfig,
    dataset: &Path,
    out: &Path,
    invocation: &[String],
) -> Result<Value> {
    ensure_dir(out)?;
    let started = Instant::now();
    let ds = load_dataset(dataset)?;
    if ds.manifest.grid != cfg.grid {
        eprintln!("note: dataset grid differs from the configured grid; using the dataset's");
    }
    let topo = GraphTopology::from_config(&ds.manifest.grid, cfg.k_nearest)?;

    let log_path = out.join("train_log.jsonl");
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?,
    );
    let epochs = cfg.train.epochs;
    let outcome = train(&ds, &topo, &cfg.model, &cfg.train, |record, quantized| {
        save_checkpoint(
            out,
            "checkpoint",
            quantized,
            &ds.manifest.grid,
            ds.manifest.pilot_seed,
            cfg.k_nearest,
            cfg.train.noise_label,
        )?;
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(log, "{line}").map_err(|e| io_err(&log_path, e))?;
        eprintln!(
            "epoch {:>3}/{}: loss {:.6} (checkpoint {:.6})",
            record.epoch, epochs, record.mean_loss, record.checkpoint_loss
        );
        Ok(())
    })?;
    log.flush().map_err(|e| io_err(&log_path, e))?;
    write_resolved_config(out, cfg, invocation)?;

    let first = outcome.records.first().expect("at least the baseline record");
    let last = outcome.records.last().expect("at least the baseline record");
    Ok(json!({
        "command": "train",
        "epochs": epochs,
        "train_samples": first.samples,
        "initial_loss": first.mean_loss,
        "final_loss": last.mean_loss,
        "checkpoint": out.join("checkpoint.json"),
        "log": log_path,
        "wall_ms": started.elapsed().as_millis() as u64,
    }))
}

fn eval_mse(
    cfg: &WorkbenchConfig,
    dataset: &Path,
    model: Option<&Path>,
    out: &Path,
    invocation: &[String],
) -> Result<Value> {
    ensure_dir(out)?;
    let started = Instant::now();
    let ds = load_dataset(dataset)?;
    let model = load_model_arg(model)?;
    let outcome = evaluate(&ds, &cfg.eval.estimators, model.as_ref(), &cfg.practical)?;
    for snr in &outcome.empty_buckets {
        eprintln!("warning: no samples at {snr} dB; bucket missing from the report");
    }
    let report_path = out.join("mse_report.csv");
    std::fs::write(&report_path, outcome.report.to_csv()).map_err(|e| io_err(&report_path, e))?;
    write_resolved_config(out, cfg, invocation)?;
    let noise_corr: serde_json::Map<String, Value> = outcome
        .noise_corr
        .iter()
        .map(|(name, corr)| (name.clone(), json!(corr)))
        .collect();
    Ok(json!({
        "command": "eval-mse",
        "samples": ds.len(),
        "estimators": cfg.eval.estimators,
        "report": report_path,
        "noise_corr": noise_corr,
        "empty_buckets": outcome.empty_buckets,
        "wall_ms": started.elapsed().as_millis() as u64,
    }))
}

fn eval_bler(
    cfg: &WorkbenchConfig,
    model: Option<&Path>,
    out: &Path,
    invocation: &[String],
) -> Result<Value> {
    ensure_dir(out)?;
    let started = Instant::now();
    let model = load_model_arg(model)?;
    let estimators = build_estimators(&cfg.bler.estimators, &cfg.grid, &cfg.practical, model.as_ref())?;
    let pilots = PilotPattern::generate(&cfg.grid, cfg.pilot_seed)?;
    let points = run_bler(&cfg.grid, &pilots, &cfg.bler, &estimators)?;
    let report_path = out.join("bler_report.csv");
    std::fs::write(&report_path, bler_report(&points).to_csv())
        .map_err(|e| io_err(&report_path, e))?;
    write_resolved_config(out, cfg, invocation)?;
    Ok(json!({
        "command": "eval-bler",
        "snr_points_db": cfg.bler.snr_points_db,
        "blocks_per_snr": cfg.bler.blocks_per_snr,
        "estimators": cfg.bler.estimators,
        "report": report_path,
        "wall_ms": started.elapsed().as_millis() as u64,
    }))
}

fn inspect_graph(
    cfg: &WorkbenchConfig,
    out: Option<&Path>,
    invocation: &[String],
) -> Result<Value> {
    let started = Instant::now();
    let topo = GraphTopology::from_config(&cfg.grid, cfg.k_nearest)?;
    let build_ms = started.elapsed().as_millis() as u64;
    let out_degrees = topo.pilot_out_degrees();
    let stats = json!({
        "nodes": topo.num_nodes(),
        "edges": topo.num_edges(),
        "in_degree": topo.degree(),
        "pilots": topo.num_pilots(),
        "pilot_out_degree_min": out_degrees.iter().min().copied().unwrap_or(0),
        "pilot_out_degree_max": out_degrees.iter().max().copied().unwrap_or(0),
    });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let edges_path = dir.join("edges.csv");
        let mut text = String::from("source_pilot_node,destination_node\n");
        for (src, dst) in topo.edges() {
            text.push_str(&format!("{src},{dst}\n"));
        }
        std::fs::write(&edges_path, text).map_err(|e| io_err(&edges_path, e))?;
        let stats_path = dir.join("graph_stats.json");
        let mut stats_text =
            serde_json::to_string_pretty(&stats).expect("stats serialize");
        stats_text.push('\n');
        std::fs::write(&stats_path, stats_text).map_err(|e| io_err(&stats_path, e))?;
        write_resolved_config(dir, cfg, invocation)?;
    }
    let mut summary = stats;
    summary["command"] = json!("inspect-graph");
    summary["build_ms"] = json!(build_ms);
    Ok(summary)
}

fn info(cfg: &WorkbenchConfig, model: Option<&Path>) -> Result<Value> {
    match model {
        Some(path) => {
            let loaded = load_checkpoint(path)?;
            let m = &loaded.manifest;
            Ok(json!({
                "command": "info",
                "checkpoint": path,
                "model": m.model,
                "param_count": loaded.params.param_count(),
                "payload_bytes": m.payload_bytes,
                "tensors": m.tensors.len(),
                "grid_subcarriers": m.grid.num_subcarriers(),
                "grid_symbols": m.grid.num_symbols,
                "pilot_seed": m.pilot_seed,
                "k_nearest": m.k_nearest,
                "noise_label": m.noise_label,
            }))
        }
        None => {
            let params = ModelParams::zeros_like(&cfg.model);
            let param_count = params.param_count();
            Ok(json!({
                "command": "info",
                "model": cfg.model,
                "param_count": param_count,
                "payload_bytes": 4 * param_count,
                "grid_subcarriers": cfg.grid.num_subcarriers(),
                "grid_symbols": cfg.grid.num_symbols,
                "pilot_seed": cfg.pilot_seed,
                "k_nearest": cfg.k_nearest,
                "noise_label": cfg.train.noise_label,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("gnce").chain(args.iter().copied()).map(String::from).collect()
    }

    fn exec(args: &[&str]) -> Result<Value> {
        let all = argv(args);
        let cli = Cli::try_parse_from(&all).expect("parses");
        let invocation: Vec<String> = all[1..].to_vec();
        execute(cli, &invocation)
    }

    /// Overrides shrinking everything so tests stay fast.
    fn small(extra: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = [
            "--override",
            "grid.num_prb=2",
            "--override",
            "grid.dmrs_subcarrier_offsets=[0,6]",
            "--override",
            "generate.count=6",
            "--override",
            "train.epochs=1",
            "--override",
            "model.hidden_dim=8",
        ]
        .map(String::from)
        .to_vec();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    #[test]
    fn help_and_version_exit_zero_and_bad_flags_exit_one() {
        assert_eq!(run(argv(&["--help"])), 0);
        assert_eq!(run(argv(&["--version"])), 0);
        assert_eq!(run(argv(&["generate", "--help"])), 0);
        assert_eq!(run(argv(&["no-such-command"])), 1);
        assert_eq!(run(argv(&["generate"])), 1); // missing --out
        assert_eq!(run(argv(&[])), 1);
    }

    #[test]
    fn misuse_maps_to_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        // Bad override -> usage (1).
        let err = exec(&[
            "generate",
            "--out",
            out.to_str().unwrap(),
            "--override",
            "train.lr=-1",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        // Missing dataset -> data (2).
        let err = exec(&[
            "train",
            "--dataset",
            dir.path().join("missing.bin").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // Zero threads -> usage (1).
        let err = exec(&["info", "--threads", "0"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn full_pipeline_round_trip_on_a_small_grid() {
        let dir = tempfile::tempdir().unwrap();
        let data_dir = dir.path().join("data");
        let run_dir = dir.path().join("run");
        let eval_dir = dir.path().join("eval");

        let extra = small(&[]);
        let extra: Vec<&str> = extra.iter().map(String::as_str).collect();

        let mut gen_args = vec!["generate", "--out", data_dir.to_str().unwrap()];
        gen_args.extend(&extra);
        let summary = exec(&gen_args).unwrap();
        assert_eq!(summary["samples"], 6);
        let dataset = data_dir.join("dataset.bin");
        assert!(dataset.exists());
        assert!(data_dir.join("resolved_config.json").exists());

        let mut train_args = vec![
            "train",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            run_dir.to_str().unwrap(),
        ];
        train_args.extend(&extra);
        let summary = exec(&train_args).unwrap();
        assert!(summary["final_loss"].as_f64().unwrap().is_finite());
        let checkpoint = run_dir.join("checkpoint.json");
        assert!(checkpoint.exists());
        let log = std::fs::read_to_string(run_dir.join("train_log.jsonl")).unwrap();
        assert_eq!(log.lines().count(), 2); // baseline + 1 epoch

        let mut eval_args = vec![
            "eval-mse",
            "--dataset",
            dataset.to_str().unwrap(),
            "--model",
            checkpoint.to_str().unwrap(),
            "--out",
            eval_dir.to_str().unwrap(),
        ];
        eval_args.extend(&extra);
        let summary = exec(&eval_args).unwrap();
        let report = std::fs::read_to_string(eval_dir.join("mse_report.csv")).unwrap();
        assert!(report.starts_with("estimator,snr_db,metric,value,count"));
        assert!(report.contains("graphnet"));
        assert!(summary["noise_corr"].is_object());

        // eval-bler on a tiny sweep, reusing the trained checkpoint.
        let bler_dir = dir.path().join("bler");
        let mut bler_args = vec![
            "eval-bler",
            "--model",
            checkpoint.to_str().unwrap(),
            "--out",
            bler_dir.to_str().unwrap(),
            "--override",
            "bler.snr_points_db=[0,10]",
            "--override",
            "bler.blocks_per_snr=4",
            "--override",
            "bler.estimators=[\"ls\",\"graphnet\"]",
        ];
        bler_args.extend(&extra);
        exec(&bler_args).unwrap();
        let report = std::fs::read_to_string(bler_dir.join("bler_report.csv")).unwrap();
        assert_eq!(report.lines().count(), 1 + 2 * 2 * 2); // header + 2 metrics x 2 est x 2 snr
    }

    #[test]
    fn inspect_graph_and_info_report_structure() {
        let summary = exec(&["inspect-graph"]).unwrap();
        assert_eq!(summary["nodes"], 8568);
        assert_eq!(summary["edges"], 25704);
        assert_eq!(summary["in_degree"], 3);
        assert_eq!(summary["pilots"], 408);

        let summary = exec(&["info"]).unwrap();
        assert_eq!(summary["param_count"], 2307);
        assert_eq!(summary["payload_bytes"], 9228);

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g");
        let summary = exec(&[
            "inspect-graph",
            "--out",
            out.to_str().unwrap(),
            "--override",
            "grid.num_prb=1",
        ])
        .unwrap();
        assert_eq!(summary["nodes"], 168);
        let edges = std::fs::read_to_string(out.join("edges.csv")).unwrap();
        assert_eq!(edges.lines().count(), 1 + 168 * 3);
        assert!(out.join("graph_stats.json").exists());
    }

    #[test]
    fn resolved_config_reproduces_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("first");
        let again = dir.path().join("again");

        let extra = small(&[]);
        let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
        let mut args = vec!["generate", "--out", first.to_str().unwrap()];
        args.extend(&extra);
        exec(&args).unwrap();

        // Rerun purely from the snapshot, no overrides.
        let snapshot = first.join("resolved_config.json");
        exec(&[
            "generate",
            "--config",
            snapshot.to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ])
        .unwrap();
        let a = std::fs::read(first.join("dataset.bin")).unwrap();
        let b = std::fs::read(again.join("dataset.bin")).unwrap();
        assert_eq!(a, b);
        let a = std::fs::read(first.join("dataset.json")).unwrap();
        let b = std::fs::read(again.join("dataset.json")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sugar_flags_override_config_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let mut args = vec![
            "generate",
            "--out",
            out.to_str().unwrap(),
            "--count",
            "3",
            "--seed",
            "55",
            "--override",
            "generate.count=9",
        ];
        let extra = small(&[]);
        let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
        args.extend(&extra);
        let summary = exec(&args).unwrap();
        // --count wins over --override generate.count.
        assert_eq!(summary["samples"], 3);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("dataset.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["master_seed"], 55);
    }
}
