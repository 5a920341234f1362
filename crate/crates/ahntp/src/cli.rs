//! The `ahntp` command line.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ahntp_core::autodiff::gradcheck::{is_piecewise, op_suite, DEFAULT_STEP};
use ahntp_core::data::{adjacency, make_split, LoadReport, SplitPlan, TrustDataset};
use ahntp_core::motif::{basic_pagerank, motif_pagerank};
use ahntp_core::synthetic::{planted_community, toy, PlantedConfig};
use ahntp_core::train::{build_structures, loss_gradient_check, toy_config, Ablation, Trainer};
use anyhow::{ensure, Context};
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::formats::{hypergraph_tsv, ratings_tsv, scores_tsv, trust_tsv};
use crate::metrics::{DatasetSummary, MetricsReport, SplitSummary, Timing};

#[derive(Debug, Parser)]
#[command(name = "ahntp", version, about = "Hypergraph trust prediction", propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured ablation
    #[arg(long, global = true, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    /// Trust TSV, overriding trust_path
    #[arg(long, global = true, value_name = "FILE")]
    pub trust: Option<PathBuf>,
    /// Ratings TSV, overriding ratings_path
    #[arg(long, global = true, value_name = "FILE")]
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank users by motif-based (default) or plain PageRank over all trust edges
    Pagerank {
        /// Plain PageRank on the trust graph instead of the motif-weighted one
        #[arg(long)]
        basic: bool,
        /// Output file (default: stdout)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Dump every hyperedge of the four hypergroup families
    BuildHypergraph {
        /// Build from the training split only, as the model sees it
        #[arg(long)]
        train_only: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Train and write metrics.json and checkpoint.bin to the output directory
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Leave wall-clock timings out of metrics.json
        #[arg(long)]
        no_timing: bool,
        /// No per-epoch progress on stderr
        #[arg(long)]
        quiet: bool,
    },
    /// Score the held-out split with a saved checkpoint
    Evaluate {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Output file for the metrics JSON (default: stdout)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every differentiable op and the full loss
    Gradcheck {
        /// Random instances per op
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Print the effective run configuration as JSON
    ShowConfig,
    /// Write a planted-community dataset and a config that points at it
    Synthetic {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// The six-user toy graph instead
        #[arg(long)]
        toy: bool,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 4)]
        communities: usize,
    },
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::from_name(s).ok_or_else(|| format!("expected one of full, nompr, noatt, nocon; got {s:?}"))
}

impl GlobalArgs {
    /// The configuration file (or defaults) with command-line overrides.
    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(a) = self.ablation {
            cfg.train.ablation = a;
        }
        if let Some(p) = &self.trust {
            cfg.trust_path = Some(p.clone());
        }
        if let Some(p) = &self.ratings {
            cfg.ratings_path = Some(p.clone());
        }
        Ok(cfg)
    }
}

pub fn load_run_dataset(cfg: &RunConfig) -> anyhow::Result<(TrustDataset, LoadReport)> {
    let (ds, report) = load_dataset(cfg.trust_path()?, cfg.ratings_path.as_deref())?;
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
    Ok((ds, report))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub report: MetricsReport,
}

/// Trains `cfg` on `ds` and reports per-epoch progress to `on_epoch`.
pub fn train(
    cfg: &RunConfig,
    ds: &TrustDataset,
    load: &LoadReport,
    timing: bool,
    mut on_epoch: impl FnMut(&ahntp_core::train::EpochRecord),
) -> anyhow::Result<TrainOutcome> {
    let mut trainer = Trainer::new(ds, &cfg.train).context("setting up training")?;
    let mut seconds = Vec::new();
    let start = Instant::now();
    let mut last = start;
    let records = trainer
        .fit(|r| {
            let now = Instant::now();
            seconds.push((now - last).as_secs_f64());
            last = now;
            on_epoch(r);
        })
        .context("training")?;
    let total = start.elapsed().as_secs_f64();
    let test = match records.last() {
        Some(r) => r.test,
        None => trainer.evaluate_test().context("evaluating")?,
    };
    let mut report = MetricsReport::new(
        "train",
        &cfg.train,
        DatasetSummary::new(ds, load),
        SplitSummary::from(trainer.split()),
        &records,
        test,
    );
    if timing {
        report.timing = Some(Timing { seconds_per_epoch: seconds, total_seconds: total });
    }
    let checkpoint =
        Checkpoint { run: cfg.clone(), state: trainer.state().clone(), adam: trainer.optimizer().clone() };
    Ok(TrainOutcome { checkpoint, report })
}

/// Rebuilds the checkpoint's split of `ds` and scores its held-out pairs.
pub fn evaluate(checkpoint: &Checkpoint, ds: &TrustDataset, load: &LoadReport) -> anyhow::Result<MetricsReport> {
    let train = checkpoint.run.train.effective();
    ensure!(
        checkpoint.n_users() == ds.n_users(),
        "checkpoint was trained on {} users but the dataset has {}",
        checkpoint.n_users(),
        ds.n_users()
    );
    let split = make_split(ds, &train.split_config()).context("splitting")?;
    let summary = SplitSummary::from(&split);
    let trainer = Trainer::with_state(ds, &train, split, checkpoint.state.clone(), Some(checkpoint.adam.clone()))
        .context("restoring the model")?;
    let test = trainer.evaluate_test().context("evaluating")?;
    Ok(MetricsReport::new("evaluate", &checkpoint.run.train, DatasetSummary::new(ds, load), summary, &[], test))
}

/// Worst relative error per check and whether it is within tolerance:
/// every op under its own tolerance, then the full loss for each ablation.
pub fn gradient_checks(seed: u64, trials: usize) -> anyhow::Result<Vec<(String, f64, f64)>> {
    let mut rows = Vec::new();
    for (op, err) in op_suite(seed, trials)? {
        rows.push((op.to_string(), err, if is_piecewise(op) { 1e-3 } else { 1e-4 }));
    }
    let ds = toy().dataset()?;
    for ablation in Ablation::ALL {
        let trainer = Trainer::new(&ds, &toy_config(ablation))?;
        let report = loss_gradient_check(&trainer, &trainer.split().train_batch(), DEFAULT_STEP)?;
        rows.push((format!("loss[{}]", ablation.name()), report.max_rel_error, 1e-3));
    }
    Ok(rows)
}

fn all_edges_plan(ds: &TrustDataset) -> SplitPlan {
    SplitPlan {
        seed: 0,
        negatives_per_positive: 0,
        train_pos: ds.trust_edges().to_vec(),
        test_pos: Vec::new(),
        train_neg: Vec::new(),
        test_neg: Vec::new(),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pagerank { basic, out } => {
            let cfg = cli.global.run_config()?;
            let (ds, _) = load_run_dataset(&cfg)?;
            let r = adjacency(ds.n_users(), ds.trust_edges());
            let scores =
                if basic { basic_pagerank(&r, &cfg.train.mpr)? } else { motif_pagerank(&r, &cfg.train.mpr)?.motif_score };
            emit(out.as_deref(), &scores_tsv(ds.user_ids(), scores.as_slice()))
        }
        Command::BuildHypergraph { train_only, out } => {
            let cfg = cli.global.run_config()?;
            let (ds, _) = load_run_dataset(&cfg)?;
            let train = cfg.train.effective();
            let plan = if train_only { make_split(&ds, &train.split_config())? } else { all_edges_plan(&ds) };
            let s = build_structures(&ds, &plan, &train).context("building hypergroups")?;
            emit(out.as_deref(), &hypergraph_tsv(&ds, &s.hypergraphs))
        }
        Command::Train { epochs, output_dir, no_timing, quiet } => {
            let mut cfg = cli.global.run_config()?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let (ds, load) = load_run_dataset(&cfg)?;
            let outcome = train(&cfg, &ds, &load, !no_timing, |r| {
                if !quiet {
                    eprintln!(
                        "epoch {:>4}  loss {:.6}  test acc {:.4}  f1 {:.4}",
                        r.epoch, r.loss, r.test.accuracy, r.test.f1
                    );
                }
            })?;
            let dir = &cfg.output_dir;
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let metrics = dir.join("metrics.json");
            fs::write(&metrics, outcome.report.to_json())
                .with_context(|| format!("cannot write {}", metrics.display()))?;
            outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
            if !quiet {
                eprintln!(
                    "test accuracy {:.4}, f1 {:.4}; wrote {}",
                    outcome.report.accuracy,
                    outcome.report.f1,
                    dir.display()
                );
            }
            Ok(())
        }
        Command::Evaluate { checkpoint, out } => {
            ensure!(
                cli.global.config.is_none() && cli.global.seed.is_none() && cli.global.ablation.is_none(),
                "evaluate takes its configuration from the checkpoint; only --trust and --ratings apply"
            );
            let ckpt = Checkpoint::load(&checkpoint)?;
            // dataset paths default to those the checkpoint was trained with
            let mut cfg = ckpt.run.clone();
            if let Some(p) = &cli.global.trust {
                cfg.trust_path = Some(p.clone());
            }
            if let Some(p) = &cli.global.ratings {
                cfg.ratings_path = Some(p.clone());
            }
            let (ds, load) = load_run_dataset(&cfg)?;
            let report = evaluate(&ckpt, &ds, &load)?;
            emit(out.as_deref(), &report.to_json())
        }
        Command::ShowConfig => {
            let cfg = cli.global.run_config()?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
        Command::Gradcheck { trials } => {
            let seed = cli.global.seed.unwrap_or(0);
            let rows = gradient_checks(seed, trials)?;
            let mut failed = Vec::new();
            for (name, err, tol) in &rows {
                let ok = err < tol;
                println!("{:<20} {err:.3e}  (< {tol:.0e})  {}", name, if ok { "ok" } else { "FAILED" });
                if !ok {
                    failed.push(name.as_str());
                }
            }
            ensure!(failed.is_empty(), "gradient check failed for {}", failed.join(", "));
            Ok(())
        }
        Command::Synthetic { out, toy: use_toy, users, communities } => {
            let seed = cli.global.seed.unwrap_or(0);
            let planted = if use_toy {
                toy()
            } else {
                planted_community(&PlantedConfig { n_users: users, n_communities: communities, seed, ..PlantedConfig::default() })
            };
            write_synthetic(&out, &planted.trust, &planted.ratings)
        }
    }
}

/// Writes `trust.tsv`, `ratings.tsv` and a `config.json` referring to them.
pub fn write_synthetic(
    dir: &Path,
    trust: &[(u64, u64)],
    ratings: &[ahntp_core::data::RatingRecord],
) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    };
    write("trust.tsv", trust_tsv(trust))?;
    write("ratings.tsv", ratings_tsv(ratings))?;
    let cfg = serde_json::json!({
        "trust_path": "trust.tsv",
        "ratings_path": "ratings.tsv",
        "output_dir": "out",
    });
    write("config.json", serde_json::to_string_pretty(&cfg)? + "\n")
}
