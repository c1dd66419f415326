use std::io::{IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fullscan::synth::{ClusteredSpec, CorpusSpec, PlantedSpec};
use fullscan_cli::commands::{bench, build, links, synth, train};
use fullscan_cli::config::{set, ConfigFile};
use fullscan_cli::server;

#[derive(Parser)]
#[command(name = "fullscan", version, about = "Full-scan hybrid retrieval: build, serve, learn links, train, evaluate, benchmark")]
struct Cli {
    /// TOML file with [build], [serve], [links], [train] and [bench] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index file from line-delimited JSON documents.
    Build(BuildFlags),
    /// Serve queries over HTTP.
    Serve(ServeFlags),
    /// Learn seeker/job links and export them for indexing.
    Links(LinksFlags),
    /// Train a two-tower model.
    Train(TrainFlags),
    /// Print recall@k of a trained model.
    Eval(EvalFlags),
    /// Measure latency and throughput.
    Bench(BenchFlags),
    /// Write synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args)]
struct BuildFlags {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    num_bits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ServeFlags {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_batch: Option<usize>,
    #[arg(long)]
    default_k: Option<usize>,
    #[arg(long)]
    quant_k_multiplier: Option<usize>,
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long)]
    max_granularity: Option<usize>,
    #[arg(long)]
    queue_depth: Option<usize>,
}

#[derive(Args)]
struct LinksFlags {
    /// Labelled pairs (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Held-out pairs for the report; otherwise split from --train.
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Known links (JSONL) to score recovery against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// `seeker_attr=job_attr`; repeat for several templates.
    #[arg(long = "template")]
    templates: Vec<String>,
    /// `l1` or `ratio`.
    #[arg(long)]
    scoring: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    min_support: Option<u32>,
    #[arg(long)]
    max_meta_links: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Jobs for easy negatives (JSONL of {job_id, features}); defaults to
    /// the training jobs.
    #[arg(long)]
    inventory: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    /// Also save the checkpoint at the end of stage 1.
    #[arg(long)]
    stage1_out: Option<PathBuf>,
    /// Per-evaluation history (JSONL).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Feature hash buckets per tower.
    #[arg(long)]
    hash_buckets: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Easy negatives sampled per group of batches.
    #[arg(long)]
    easy_negatives: Option<usize>,
    /// Batches the easy negatives are spread over.
    #[arg(long)]
    easy_groups: Option<usize>,
    /// Columns kept per row in stage 2, positive included.
    #[arg(long)]
    hard_k: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Stage-2 learning rate as a multiple of the stage-1 rate.
    #[arg(long)]
    stage2_lr_factor: Option<f64>,
    #[arg(long)]
    stage1_steps: Option<usize>,
    #[arg(long)]
    stage2_steps: Option<usize>,
    /// Pull of stage-2 weights towards the stage-1 checkpoint.
    #[arg(long)]
    consolidation: Option<f64>,
    /// Steps between validation recall evaluations.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Cutoff for validation recall.
    #[arg(long)]
    eval_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalFlags {
    #[arg(long)]
    model: PathBuf,
    /// Engagement pairs (JSONL); label-1 pairs are the targets.
    #[arg(long)]
    data: PathBuf,
    /// Extra jobs for the KNN pool, on top of the evaluated jobs.
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Cutoffs, repeatable or comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
}

#[derive(Args)]
struct BenchFlags {
    /// Benchmark an existing index with match-all queries.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    docs: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pass_rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Option<Vec<usize>>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    topk_items: Option<usize>,
    #[arg(long)]
    topk_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    granularities: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Documents with clustered embeddings (docs.jsonl, schema.json).
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        docs: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        clusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Labelled pairs with planted links (pairs.jsonl, truth.jsonl).
    Links {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        num_links: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Clustered engagement pairs (train/validation/inventory JSONL).
    Engagements {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        train_pairs: usize,
        #[arg(long, default_value_t = 2_560)]
        validation_pairs: usize,
        #[arg(long, default_value_t = 5_000)]
        inventory: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Writes to stdout; a reader that went away (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn run(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Build(f) => {
            let mut config = file.build;
            set(&mut config.num_bits, f.num_bits);
            set(&mut config.seed, f.seed);
            print_json(&build::run(&build::BuildArgs {
                input: f.input,
                schema: f.schema,
                output: f.output,
                config,
            })?)
        }
        Command::Serve(f) => {
            let mut config = file.serve;
            config.index = f.index.or(config.index);
            set(&mut config.listen, f.listen);
            set(&mut config.workers, f.workers);
            set(&mut config.max_batch, f.max_batch);
            set(&mut config.default_k, f.default_k);
            set(&mut config.quant_k_multiplier, f.quant_k_multiplier);
            set(&mut config.granularity, f.granularity);
            set(&mut config.max_granularity, f.max_granularity);
            set(&mut config.queue_depth, f.queue_depth);
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(server::serve(
                config,
                |addr| {
                    // scripts and tests read the bound address from here
                    let _ = emit(&format!("listening on {addr}\n"));
                },
                server::shutdown_signal(),
            ))
        }
        Command::Links(f) => {
            let mut config = file.links;
            if !f.templates.is_empty() {
                config.templates = f.templates;
            }
            set(&mut config.scoring, f.scoring);
            set(&mut config.lambda, f.lambda);
            set(&mut config.min_support, f.min_support);
            set(&mut config.max_meta_links, f.max_meta_links);
            set(&mut config.threshold, f.threshold);
            set(&mut config.theta, f.theta);
            set(&mut config.holdout_fraction, f.holdout_fraction);
            set(&mut config.sweep, f.sweep);
            set(&mut config.seed, f.seed);
            print_json(&links::run(&links::LinksArgs {
                train: f.train,
                holdout: f.holdout,
                truth: f.truth,
                out_dir: f.out_dir,
                config,
            })?)
        }
        Command::Train(f) => {
            let mut config = file.train;
            set(&mut config.model.hash_buckets, f.hash_buckets);
            set(&mut config.model.embed_dim, f.embed_dim);
            set(&mut config.model.out_dim, f.out_dim);
            set(&mut config.batch_size, f.batch_size);
            set(&mut config.easy_negatives, f.easy_negatives);
            set(&mut config.easy_groups, f.easy_groups);
            set(&mut config.hard_k, f.hard_k);
            set(&mut config.learning_rate, f.learning_rate);
            set(&mut config.stage2_lr_factor, f.stage2_lr_factor);
            set(&mut config.stage1_steps, f.stage1_steps);
            set(&mut config.stage2_steps, f.stage2_steps);
            set(&mut config.consolidation, f.consolidation);
            set(&mut config.eval_every, f.eval_every);
            set(&mut config.eval_k, f.eval_k);
            set(&mut config.seed, f.seed);
            print_json(&train::run_train(&train::TrainArgs {
                train: f.train,
                validation: f.validation,
                inventory: f.inventory,
                model_out: f.model_out,
                stage1_out: f.stage1_out,
                metrics_out: f.metrics_out,
                config,
            })?)
        }
        Command::Eval(f) => {
            let lines = train::run_eval(&train::EvalArgs {
                model: f.model,
                data: f.data,
                inventory: f.inventory,
                ks: f.k,
                batch_size: f.batch_size,
            })?;
            let mut text = String::new();
            for line in lines {
                text.push_str(&serde_json::to_string(&line)?);
                text.push('\n');
            }
            emit(&text)
        }
        Command::Bench(f) => {
            let mut config = file.bench;
            set(&mut config.docs, f.docs);
            set(&mut config.dim, f.dim);
            set(&mut config.pass_rates, f.pass_rates);
            set(&mut config.batch_sizes, f.batch_sizes);
            set(&mut config.queries, f.queries);
            set(&mut config.rounds, f.rounds);
            set(&mut config.k, f.k);
            set(&mut config.topk_items, f.topk_items);
            set(&mut config.topk_k, f.topk_k);
            set(&mut config.granularities, f.granularities);
            set(&mut config.seed, f.seed);
            let report = bench::run(&bench::BenchArgs {
                index: f.index,
                config,
            })?;
            if f.json {
                print_json(&report)
            } else {
                emit(&bench::render(&report))
            }
        }
        Command::Synth(s) => {
            let summary = match s {
                SynthCommand::Corpus {
                    out,
                    docs,
                    dim,
                    clusters,
                    seed,
                } => synth::corpus(
                    &out,
                    CorpusSpec {
                        num_docs: docs,
                        dim,
                        clusters,
                        seed,
                        ..CorpusSpec::default()
                    },
                )?,
                SynthCommand::Links {
                    out,
                    num_links,
                    seed,
                } => synth::links(
                    &out,
                    &PlantedSpec {
                        num_links,
                        seed,
                        ..PlantedSpec::default()
                    },
                )?,
                SynthCommand::Engagements {
                    out,
                    train_pairs,
                    validation_pairs,
                    inventory,
                    seed,
                } => synth::engagements(
                    &out,
                    &ClusteredSpec {
                        train_pairs,
                        validation_pairs,
                        inventory,
                        seed,
                        ..ClusteredSpec::default()
                    },
                )?,
            };
            print_json(&summary)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
