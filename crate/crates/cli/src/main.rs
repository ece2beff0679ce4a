use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use glue_core::config::RunConfig;
use glue_core::dataio::{prepare, save_dataset, Manifest, RawTable};
use glue_core::evaluation::{prf1, MetricsSummary};
use glue_core::experiment::{
    anomaly_rate, band_plots, compare, detect_forecaster, head_mode_name, load_prepared, loss_plot,
    train_forecaster,
};
use glue_core::graph::{export_embeddings, export_graph};
use glue_core::model::{load_checkpoint, save_checkpoint, HeadMode};
use glue_core::synthetic::{homoscedastic_pair, planted_dependencies, sinusoid_toy, PlantedConfig};
use glue_core::training::objective_name;

#[derive(Parser)]
#[command(name = "glue", version, about = "Graph-attention forecasting for sensor anomaly detection")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for scoring (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, normalise and persist a dataset described by a manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for the prepared dataset.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the forecaster and write a checkpoint.
    Train {
        /// Overrides `model.head_mode`.
        #[arg(long, value_enum)]
        head: Option<Head>,
    },
    /// Score the test split with a trained checkpoint.
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Recompute detection metrics from a `scores.csv`.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Run every model in `compare.models` and tabulate the results.
    Compare,
    /// Write embeddings, their 2-D projection and the neighbour graph.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Generate a synthetic dataset with a manifest.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Planted)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Head {
    Gaussian,
    Point,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SynthKind {
    /// Five sensors, four planted dependencies, level-shift anomalies.
    Planted,
    /// Two sensors with known homoscedastic noise.
    Pair,
    /// Three sinusoid-driven sensors.
    Sinusoid,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.sync_seed();
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn cmd_preprocess(manifest: &Path, out: &Path) -> Result<()> {
    let m = Manifest::load(manifest)?;
    let ds = prepare(&m)?;
    save_dataset(&ds, out)?;
    let data = &ds.dataset;
    if !data.dropped_sensors.is_empty() {
        info!("dropped zero-variance sensors: {:?}", data.dropped_sensors);
    }
    println!(
        "prepared {} sensors, {} train rows, {} test rows -> {}",
        data.n_sensors(),
        data.train_range().len(),
        data.test_range().len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, head: Option<Head>) -> Result<()> {
    let mode = match head {
        Some(Head::Gaussian) => HeadMode::Gaussian,
        Some(Head::Point) => HeadMode::Point,
        None => cfg.model.head_mode,
    };
    let ds = load_prepared(cfg)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let mut outcome = train_forecaster(&ds, cfg, mode)?;
    let path = out.join("checkpoint.bin");
    let data = &ds.dataset;
    let ckpt = outcome.checkpoint(data.sensor_names.clone(), Some(data.norm_stats.clone()), cfg.seed);
    save_checkpoint(&ckpt, &path)?;
    outcome.report.checkpoint_path = Some(path.clone());
    let report = &outcome.report;
    report.write_loss_csv(out.join("loss_history.csv"))?;
    report.write_timing_csv(out.join("timings.csv"))?;
    fs::write(out.join("loss.svg"), loss_plot(&report.loss_history, objective_name(mode)))?;
    write_config(cfg, out)?;
    println!(
        "trained {} for {} epochs ({} steps), final {} {:.6} -> {}",
        head_mode_name(mode),
        report.loss_history.len(),
        report.steps,
        objective_name(mode),
        report.loss_history.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

fn write_bands(dir: &Path, det: &glue_core::experiment::ForecastDetection, names: &[String]) -> Result<()> {
    let plots = band_plots(&det.test_forecast, &det.test_windows, names);
    if plots.is_empty() {
        return Ok(());
    }
    let bands = dir.join("bands");
    fs::create_dir_all(&bands)?;
    let fc = &det.test_forecast;
    let sigma2 = fc.sigma2.as_ref().expect("bands imply a variance head");
    for (i, (name, svg)) in plots.iter().enumerate() {
        fs::write(bands.join(format!("{name}.svg")), svg)?;
        let mut f = std::io::BufWriter::new(fs::File::create(bands.join(format!("{name}.csv")))?);
        writeln!(f, "timestep,observed,mu,sigma2")?;
        for b in 0..fc.len() {
            writeln!(
                f,
                "{},{},{},{}",
                det.test_windows.target_times[b],
                det.test_windows.targets.get(b, i),
                fc.mu.get(b, i),
                sigma2.get(b, i)
            )?;
        }
        f.flush()?;
    }
    Ok(())
}

fn cmd_detect(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let ds = load_prepared(cfg)?;
    let data = &ds.dataset;
    ckpt.check_sensors(&data.sensor_names)?;
    if ckpt.params.config.w != ds.window {
        bail!(
            "checkpoint window {} differs from dataset window {}",
            ckpt.params.config.w,
            ds.window
        );
    }
    let rate = anomaly_rate(cfg, &ds)?;
    let name = head_mode_name(ckpt.params.config.head_mode);
    let det = detect_forecaster(name, &ckpt.params, &ckpt.adjacency, &ds, rate)?;
    let out = &cfg.out_dir;
    det.report.write_all(out)?;
    write_bands(out, &det, &data.sensor_names)?;
    print_detection(&det.report);
    Ok(())
}

fn print_detection(report: &glue_core::scoring::AnomalyReport) {
    print!(
        "{}: threshold {:.6}, flagged {}/{}",
        report.model,
        report.threshold,
        report.flagged(),
        report.test_scores.len()
    );
    match &report.metrics {
        Some(m) => println!(" precision {:.4} recall {:.4} f1 {:.4}", m.precision, m.recall, m.f1),
        None => println!(),
    }
}

fn cmd_evaluate(scores: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(scores).with_context(|| format!("reading {}", scores.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column `{name}`", scores.display()))
    };
    let (pi, ti) = (col("predicted")?, col("truth")?);
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<u8> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}: bad label", scores.display(), row + 2))
        };
        pred.push(parse(pi)?);
        truth.push(parse(ti)?);
    }
    let summary = MetricsSummary::new(prf1(&pred, &truth)?, None);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let ds = load_prepared(cfg)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let result = compare(&ds, cfg)?;
    for run in &result.runs {
        run.write_all(out.join(&run.model))?;
    }
    result.report.write(out)?;
    write_config(cfg, out)?;
    print!("{}", result.report.table());
    Ok(())
}

fn cmd_export(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let v = &ckpt.params.embeddings;
    export_embeddings(&ckpt.sensor_names, v, out)?;
    let edges = export_graph(&ckpt.sensor_names, v, &ckpt.adjacency, out.join("graph.csv"))?;
    println!(
        "exported {} embeddings (d = {}) and {edges} edges -> {}",
        v.rows(),
        v.cols(),
        out.display()
    );
    Ok(())
}

fn cmd_synth(kind: SynthKind, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let (train, test, rate, edges): (RawTable, RawTable, Option<f64>, Vec<(usize, usize)>) = match kind {
        SynthKind::Planted => {
            let d = planted_dependencies(&PlantedConfig {
                seed,
                ..PlantedConfig::default()
            });
            (d.train, d.test, None, d.edges)
        }
        SynthKind::Pair => {
            let d = homoscedastic_pair(3000, 1000, [1.0, 0.5], seed);
            (d.train, d.test, Some(0.05), d.edges)
        }
        SynthKind::Sinusoid => {
            let mut all = sinusoid_toy(1500, seed);
            let split = 1000;
            let test = RawTable {
                sensor_names: all.sensor_names.clone(),
                columns: all.columns.iter_mut().map(|c| c.split_off(split)).collect(),
                labels: None,
                trajectories: None,
                timestamps: None,
            };
            (all, test, Some(0.05), Vec::new())
        }
    };
    train.write_csv(out.join("train.csv"))?;
    test.write_csv(out.join("test.csv"))?;
    let mut manifest = String::from("kind = \"generic\"\ntrain = \"train.csv\"\ntest = \"test.csv\"\nwindow = 5\n");
    manifest.push_str("time_column = \"timestamp\"\n");
    if train.labels.is_some() {
        manifest.push_str("label_column = \"label\"\n");
    }
    if let Some(r) = rate {
        manifest.push_str(&format!("anomaly_rate = {r}\n"));
    }
    fs::write(out.join("manifest.toml"), manifest)?;
    let mut f = fs::File::create(out.join("edges.csv"))?;
    writeln!(f, "src,dst")?;
    for (s, d) in &edges {
        writeln!(f, "{},{}", train.sensor_names[*s], train.sensor_names[*d])?;
    }
    println!("wrote synthetic dataset -> {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Preprocess { manifest, out } => cmd_preprocess(manifest, out),
        Command::Train { head } => cmd_train(&load_config(&cli)?, *head),
        Command::Detect { checkpoint } => cmd_detect(&load_config(&cli)?, checkpoint),
        Command::Evaluate { scores } => cmd_evaluate(scores),
        Command::Compare => cmd_compare(&load_config(&cli)?),
        Command::Export { checkpoint } => cmd_export(&load_config(&cli)?, checkpoint),
        Command::Synth { kind, out } => cmd_synth(*kind, cli.seed.unwrap_or(7), out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
