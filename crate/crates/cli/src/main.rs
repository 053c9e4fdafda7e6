//! `kgllm`: knowledge-graph prompt pipeline driver.
//!
//! Settings come from `--config <file.toml>` and are overridden by flags.
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 endpoint transport error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kgllm_core::baselines::ModelKind;
use kgllm_core::client::{EnvelopeKind, StubPolicy};
use kgllm_core::config::RunConfig;
use kgllm_core::pipeline;
use kgllm_core::promptgen::{Icl, Style, Task};

#[derive(Parser, Debug)]
#[command(name = "kgllm", version, about = "Knowledge-graph prompt datasets, embedding baselines and evaluation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load an OpenKE dataset directory and check its counts.
    Ingest {
        #[arg(long)]
        dataset_dir: Option<PathBuf>,
        /// Merge train/valid/test triple files (default) or load train only.
        #[arg(long)]
        merge_splits: Option<bool>,
    },
    /// Split nodes, enumerate and label paths, balance, and write instances.
    Sample {
        #[arg(long)]
        min_nodes: Option<usize>,
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Paths per root before the walk stops (0 = unlimited).
        #[arg(long)]
        per_root_cap: Option<usize>,
        /// Instances per (hops, label) cell (0 = unlimited).
        #[arg(long)]
        cell_cap: Option<usize>,
    },
    /// Render prompt records for one task/style/ICL combination.
    Genprompts {
        #[command(flatten)]
        prompts: PromptArgs,
        /// Estimated-token ceiling per assembled prompt (0 = unlimited).
        #[arg(long)]
        token_limit: Option<usize>,
        /// Relations listed as options in relation-task instructions (0 = all).
        #[arg(long)]
        max_options: Option<usize>,
    },
    /// Train an embedding baseline on the graph minus evaluated edges.
    TrainBaseline {
        #[command(flatten)]
        baseline: BaselineArgs,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        negatives: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Calibrate a threshold on validation instances and score test instances.
    EvalBaseline {
        #[command(flatten)]
        baseline: BaselineArgs,
        /// Checkpoint header written by train-baseline.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Query a completion endpoint (or a stub) with the test prompts and score the answers.
    Eval {
        #[command(flatten)]
        prompts: PromptArgs,
        /// Answer locally: oracle, constant_no, constant_yes or echo.
        #[arg(long)]
        stub: Option<StubPolicy>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Environment variable holding a bearer token.
        #[arg(long)]
        auth_env: Option<String>,
        /// completion or chat.
        #[arg(long, value_parser = parse_envelope)]
        envelope: Option<EnvelopeKind>,
        #[arg(long)]
        in_flight: Option<usize>,
        #[arg(long)]
        max_retries: Option<u32>,
        #[arg(long)]
        timeout_secs: Option<f64>,
        #[arg(long)]
        max_parse_failure_rate: Option<f64>,
        /// Name of the eval/<run> directory.
        #[arg(long)]
        run_name: Option<String>,
    },
    /// Compare outcome files scored on the same records.
    Report {
        #[arg(required = true)]
        outcomes: Vec<PathBuf>,
        /// Highest hop count listed (default: from the sampler settings).
        #[arg(long)]
        max_hops: Option<usize>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct PromptArgs {
    /// link or relation.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// kgllm or ablation.
    #[arg(long, value_parser = parse_style)]
    style: Option<Style>,
    /// none or one_shot.
    #[arg(long, value_parser = parse_icl)]
    icl: Option<Icl>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    /// transe, distmult or complex.
    #[arg(long)]
    kind: Option<ModelKind>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "link" => Ok(Task::Link),
        "relation" => Ok(Task::Relation),
        _ => Err(format!("expected link or relation, got {s:?}")),
    }
}

fn parse_style(s: &str) -> Result<Style, String> {
    match s {
        "kgllm" => Ok(Style::Kgllm),
        "ablation" => Ok(Style::Ablation),
        _ => Err(format!("expected kgllm or ablation, got {s:?}")),
    }
}

fn parse_icl(s: &str) -> Result<Icl, String> {
    match s {
        "none" => Ok(Icl::None),
        "one_shot" | "one-shot" => Ok(Icl::OneShot),
        _ => Err(format!("expected none or one_shot, got {s:?}")),
    }
}

fn parse_envelope(s: &str) -> Result<EnvelopeKind, String> {
    match s {
        "completion" => Ok(EnvelopeKind::Completion),
        "chat" => Ok(EnvelopeKind::Chat),
        _ => Err(format!("expected completion or chat, got {s:?}")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl PromptArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.prompts.task, self.task);
        set(&mut cfg.prompts.style, self.style);
        set(&mut cfg.prompts.icl, self.icl);
    }
}

/// Flag values override the file, which overrides the defaults.
fn effective_config(cli: &mut Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.out_dir, cli.out.take());
    set(&mut cfg.seed, cli.seed);
    match &mut cli.command {
        Command::Ingest { dataset_dir, merge_splits } => {
            if let Some(d) = dataset_dir.take() {
                cfg.dataset_dir = Some(d);
            }
            set(&mut cfg.ingest.merge_splits, *merge_splits);
        }
        Command::Sample {
            min_nodes,
            max_nodes,
            per_root_cap,
            cell_cap,
        } => {
            set(&mut cfg.sampler.min_nodes, *min_nodes);
            set(&mut cfg.sampler.max_nodes, *max_nodes);
            set(&mut cfg.sampler.per_root_cap, *per_root_cap);
            set(&mut cfg.sampler.cell_cap, *cell_cap);
        }
        Command::Genprompts {
            prompts,
            token_limit,
            max_options,
        } => {
            PromptArgs {
                task: prompts.task,
                style: prompts.style,
                icl: prompts.icl,
            }
            .apply(&mut cfg);
            set(&mut cfg.prompts.token_limit, *token_limit);
            set(&mut cfg.prompts.max_options, *max_options);
        }
        Command::TrainBaseline {
            baseline,
            dim,
            epochs,
            learning_rate,
            margin,
            negatives,
            batch_size,
        } => {
            set(&mut cfg.baseline.kind, baseline.kind);
            set(&mut cfg.baseline.dim, *dim);
            set(&mut cfg.baseline.epochs, *epochs);
            set(&mut cfg.baseline.learning_rate, *learning_rate);
            set(&mut cfg.baseline.margin, *margin);
            set(&mut cfg.baseline.negatives, *negatives);
            set(&mut cfg.baseline.batch_size, *batch_size);
        }
        Command::EvalBaseline { baseline, .. } => set(&mut cfg.baseline.kind, baseline.kind),
        Command::Eval {
            prompts,
            stub,
            endpoint,
            model,
            auth_env,
            envelope,
            in_flight,
            max_retries,
            timeout_secs,
            max_parse_failure_rate,
            ..
        } => {
            PromptArgs {
                task: prompts.task,
                style: prompts.style,
                icl: prompts.icl,
            }
            .apply(&mut cfg);
            if stub.is_some() {
                cfg.eval.stub = *stub;
            }
            set(&mut cfg.client.endpoint, endpoint.take());
            set(&mut cfg.client.model, model.take());
            if auth_env.is_some() {
                cfg.client.auth_env = auth_env.take();
            }
            set(&mut cfg.client.envelope, *envelope);
            set(&mut cfg.client.max_in_flight, *in_flight);
            set(&mut cfg.client.max_retries, *max_retries);
            set(&mut cfg.client.timeout_secs, *timeout_secs);
            set(&mut cfg.eval.max_parse_failure_rate, *max_parse_failure_rate);
        }
        Command::Report { .. } => {}
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn run(mut cli: Cli) -> Result<()> {
    let cfg = effective_config(&mut cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    match cli.command {
        Command::Ingest { .. } => {
            let s = pipeline::run_ingest(&cfg)?;
            let d = &s.dataset;
            println!("dataset   {}", d.name);
            println!("entities  {}", d.entities);
            println!("relations {}", d.relations);
            println!("triples   {} ({} duplicates collapsed)", d.triples, d.duplicates_collapsed);
            if let Some(r) = &s.reference {
                println!(
                    "published {} / {} / {} -> {}",
                    r.entities,
                    r.relations,
                    r.triples,
                    if s.reference_mismatches.is_empty() { "match" } else { "MISMATCH" }
                );
                for m in &s.reference_mismatches {
                    println!("  {m}");
                }
            }
        }
        Command::Sample { .. } => {
            let s = pipeline::run_sample(&cfg)?;
            println!("nodes: {} train, {} test", s.train_nodes, s.test_nodes);
            for (split, n) in &s.instances {
                println!("{split:<10} {n} instances");
            }
            for (name, st) in [("train", &s.train), ("test", &s.test)] {
                println!(
                    "{name}: {} paths from {}/{} roots ({} truncated), {} dropped by cell cap",
                    st.paths_enumerated, st.roots_visited, st.roots, st.truncated_roots, st.dropped_by_cell_cap
                );
            }
        }
        Command::Genprompts { .. } => {
            let s = pipeline::run_genprompts(&cfg)?;
            println!("prompt set {}", s.prompt_set);
            for (split, n) in &s.kept {
                println!("{split:<10} {n} records ({} over budget)", s.dropped_over_budget[split]);
            }
            if let Some(id) = &s.icl_example {
                println!("in-context example {id}");
            }
        }
        Command::TrainBaseline { .. } => {
            let s = pipeline::run_train_baseline(&cfg)?;
            println!(
                "{} trained on {} triples ({} held out)",
                s.kind.name(),
                s.training_triples,
                s.held_out_triples
            );
            for (epoch, loss) in s.epoch_losses.iter().enumerate() {
                println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
            }
            println!("checkpoint {}", cfg.out_dir.join(&s.checkpoint).display());
        }
        Command::EvalBaseline { checkpoint, .. } => {
            let s = pipeline::run_eval_baseline(&cfg, checkpoint.as_deref())?;
            println!("threshold {}", fmt_opt(s.threshold));
            print!("{}", s.report.table());
        }
        Command::Eval { run_name, .. } => {
            let s = match run_name {
                Some(name) => {
                    let (records, _) = pipeline::load_eval_records(&cfg)?;
                    match cfg.eval.stub {
                        Some(p) => pipeline::run_eval_with(
                            &cfg,
                            &kgllm_core::client::StubCompleter::for_records(p, &records),
                            &name,
                        )?,
                        None => {
                            let c = kgllm_core::client::HttpCompleter::new(cfg.client.clone())
                                .map_err(kgllm_core::Error::from)?;
                            pipeline::run_eval_with(&cfg, &c, &name)?
                        }
                    }
                }
                None => pipeline::run_eval(&cfg)?,
            };
            println!("run {} ({} records, {} transport failures)", s.run, s.records, s.transport_failures);
            print!("{}", s.report.table());
        }
        Command::Report { outcomes, max_hops, json } => {
            let comparison = pipeline::build_comparison(&outcomes, max_hops.unwrap_or(cfg.max_hops()))?;
            print!("{}", comparison.table());
            if let Some(path) = json {
                kgllm_core::io::write_json(&path, &comparison)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use kgllm_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(e) if e.is_transport() => 3,
        Some(E::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
