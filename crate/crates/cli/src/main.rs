use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use veracity::commands;
use veracity::service::{router, AppState};
use veracity::setup::{assemble, PipelineOptions};
use veracity_core::{GatePolicy, RunStore};
use veracity_eval::store::load_records;
use veracity_eval::workbench::{token_hash, TaskSet, Workbench};
use veracity_eval::{assign_tasks, report, AnnotationStore, Overlap, ReportOptions, Weighting};

#[derive(Parser)]
#[command(name = "veracity", version, about = "Evidence-based corrections for social media posts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline and provider settings (TOML or JSON).
    #[arg(long, global = true, env = "VERACITY_CONFIG")]
    config: Option<PathBuf>,
    /// Publisher credibility registry (CSV or JSON).
    #[arg(long, global = true, env = "VERACITY_REGISTRY")]
    registry: Option<PathBuf>,
    /// Replay provider calls from this cassette.
    #[arg(long, global = true)]
    cassette: Option<PathBuf>,
    /// Record live provider calls into this cassette.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    /// `post-time`, `none`, an RFC 3339 timestamp or `before:<ts>[:<N>m]`.
    #[arg(long, global = true, default_value = "post-time")]
    cutoff: GatePolicy,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

impl Global {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            config: self.config.clone(),
            registry: self.registry.clone(),
            cassette: self.cassette.clone(),
            record: self.record.clone(),
            parallelism: self.parallelism,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate corrections for one post or a JSON array of posts.
    Respond {
        /// Post JSON file, `-` for stdin.
        input: PathBuf,
        /// Print full run records instead of responses.
        #[arg(long)]
        run_record: bool,
        /// Also persist records to this run store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Describe, search, filter and rank evidence pages for a post.
    Retrieve { input: PathBuf },
    /// Extract evidence from ranked pages.
    Extract {
        input: PathBuf,
        /// Page list or `retrieve` output.
        #[arg(long)]
        pages: PathBuf,
    },
    /// Informative description of one image.
    DescribeImage { uri: String },
    /// Serve the run API, the annotation API and the UI bundle.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, default_value = "runs")]
        store: PathBuf,
        /// Annotation task set; enables the annotation endpoints.
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long, default_value = "annotations.jsonl")]
        annotations: PathBuf,
        /// Directory with the annotation UI build.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Grouped annotation report, or a summary of a run store.
    Report {
        #[arg(long, conflicts_with = "runs", required_unless_present = "runs")]
        annotations: Option<PathBuf>,
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        group_by: Option<String>,
        /// Comma separated criterion ids.
        #[arg(long)]
        criteria: Option<String>,
        #[arg(long)]
        csv: bool,
    },
    /// Weighted mean and SD per approach and criterion.
    Evaluate {
        annotations: PathBuf,
        #[arg(long)]
        criteria: Option<String>,
    },
    /// Inter-annotator agreement per criterion.
    Agreement {
        annotations: PathBuf,
        #[arg(long, default_value = "linear")]
        weights: Weighting,
        #[arg(long)]
        criteria: Option<String>,
    },
    /// Assign tasks to annotator pairs.
    Assign {
        /// File with one task id per line.
        tasks: PathBuf,
        /// Annotator pairs as `a:b`.
        #[arg(long = "pair", required = true, value_parser = parse_pair)]
        pairs: Vec<(String, String)>,
        #[arg(long, conflicts_with = "fraction")]
        shared: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify crowd-note helpfulness scores.
    ClassifyHelpfulness { input: PathBuf },
    /// SHA-256 of an annotator token, for task sets.
    HashToken { token: String },
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.into(), b.into())),
        _ => Err(format!("expected a:b, got {s:?}")),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let g = &cli.global;
    match cli.command {
        Command::Respond { input, run_record, store } => {
            let assembled = assemble(&g.options())?;
            let posts = commands::parse_posts(&commands::read_input(&input)?)?;
            let store = store.map(RunStore::open).transpose()?;
            let records = commands::respond(&assembled.pipeline, posts, &g.cutoff, store.as_ref()).await?;
            assembled.finish()?;
            println!("{}", commands::respond_output(&records, run_record)?);
        }
        Command::Retrieve { input } => {
            let assembled = assemble(&g.options())?;
            let raw = serde_json::from_str(&commands::read_input(&input)?)?;
            let retrieval = commands::retrieve(&assembled.pipeline, raw, &g.cutoff).await?;
            assembled.finish()?;
            print_json(&retrieval)?;
        }
        Command::Extract { input, pages } => {
            let assembled = assemble(&g.options())?;
            let raw = serde_json::from_str(&commands::read_input(&input)?)?;
            let pages = commands::parse_pages(&commands::read_input(&pages)?)?;
            let outcome = commands::extract(&assembled.pipeline, raw, &pages).await?;
            assembled.finish()?;
            print_json(&outcome)?;
        }
        Command::DescribeImage { uri } => {
            let assembled = assemble(&g.options())?;
            let description = commands::describe_image(&assembled.pipeline, &uri).await?;
            assembled.finish()?;
            print_json(&description)?;
        }
        Command::Serve {
            bind,
            store,
            tasks,
            annotations,
            assets,
        } => {
            let assembled = assemble(&g.options())?;
            let mut state = AppState::new(assembled.pipeline.clone(), RunStore::open(store)?, g.cutoff.clone());
            if let Some(tasks) = tasks {
                let set = TaskSet::load(&tasks)?;
                let workbench = Workbench::new(set, AnnotationStore::open(annotations)?)?;
                state = state.with_workbench(Arc::new(workbench));
            }
            let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
            tracing::info!("listening on {bind}");
            axum::serve(listener, router(Arc::new(state), assets))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
            assembled.finish()?;
        }
        Command::Report {
            annotations,
            runs,
            group_by,
            criteria,
            csv,
        } => {
            if let Some(runs) = runs {
                return print_json(&commands::summarize_runs(&RunStore::open(runs)?)?);
            }
            let records = load_records(&annotations.expect("clap requires one source"))?;
            let options = ReportOptions {
                group_by,
                criteria: commands::parse_criteria(criteria.as_deref())?,
                ..ReportOptions::default()
            };
            let report = report(&records, &options)?;
            if csv {
                print!("{}", report.to_csv());
            } else {
                print_json(&report)?;
            }
        }
        Command::Evaluate { annotations, criteria } => {
            let records = load_records(&annotations)?;
            print_json(&commands::evaluate(&records, &commands::parse_criteria(criteria.as_deref())?)?)?;
        }
        Command::Agreement {
            annotations,
            weights,
            criteria,
        } => {
            let records = load_records(&annotations)?;
            let criteria = commands::parse_criteria(criteria.as_deref())?;
            print_json(&commands::agreement(&records, &criteria, weights))?;
        }
        Command::Assign {
            tasks,
            pairs,
            shared,
            fraction,
            seed,
        } => {
            let ids: Vec<String> = commands::read_input(&tasks)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            let overlap = match (shared, fraction) {
                (Some(n), _) => Overlap::Count(n),
                (None, Some(f)) => Overlap::Fraction(f),
                (None, None) => anyhow::bail!("pass --shared or --fraction"),
            };
            print_json(&assign_tasks(&ids, &pairs, overlap, seed)?)?;
        }
        Command::ClassifyHelpfulness { input } => {
            print_json(&commands::classify_scores(&commands::read_input(&input)?)?)?;
        }
        Command::HashToken { token } => println!("{}", token_hash(&token)),
    }
    Ok(())
}
