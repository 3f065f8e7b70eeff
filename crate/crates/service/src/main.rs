use std::fs::File;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kgforge_core::eval::{load_dataset, run_evaluation};
use kgforge_core::index::{IndexBuilder, Namespaces, RecordKind};
use kgforge_core::model::to_ntriples;
use kgforge_service::api::{serve, AppState};
use kgforge_service::app::{build_pipeline, offline_config};
use kgforge_service::config::AppConfig;
use kgforge_service::session::SessionStore;

#[derive(Parser)]
#[command(name = "kgforge", version, about = "Build knowledge graphs from text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the retrieval index.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Build a graph from a text file and write it as N-Triples.
    Construct {
        #[arg(long)]
        index: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to `<index>/gazetteer.tsv`.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Score the pipeline against an annotated dataset.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Written as JSON when the name ends in `.json`, as a table otherwise.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Ingest entity and property dumps into an index directory.
    Build {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        properties: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Copied into the index directory for the reference recognizer.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
}

fn build_index(entities: &Path, properties: &Path, out: &Path, gazetteer: Option<&Path>) -> Result<()> {
    let mut builder = IndexBuilder::new(Namespaces::default());
    for (path, kind, name) in
        [(entities, RecordKind::Entity, "entities"), (properties, RecordKind::Property, "properties")]
    {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let stats =
            builder.ingest(BufReader::new(file), kind).with_context(|| format!("reading {}", path.display()))?;
        println!("{name}: {stats}");
    }
    builder.build().save(out).with_context(|| format!("writing index to {}", out.display()))?;
    if let Some(g) = gazetteer {
        std::fs::copy(g, out.join("gazetteer.tsv")).with_context(|| format!("copying {}", g.display()))?;
    }
    Ok(())
}

fn construct(
    index: &Path,
    input: &Path,
    out: Option<&Path>,
    gazetteer: Option<&Path>,
    patterns: Option<&Path>,
) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let pipeline = build_pipeline(&offline_config(index, gazetteer, patterns))?;
    let graph = pipeline.construct(&text)?;
    let doc = to_ntriples(&graph)?;
    match out {
        Some(path) => std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(doc.as_bytes())?,
    }
    log::info!("{} triples", graph.len());
    Ok(())
}

fn evaluate(
    index: &Path,
    dataset: &Path,
    report: &Path,
    gazetteer: Option<&Path>,
    patterns: Option<&Path>,
) -> Result<()> {
    let pipeline = build_pipeline(&offline_config(index, gazetteer, patterns))?;
    let data = load_dataset(dataset, pipeline.index().namespaces())?;
    if data.skipped > 0 {
        eprintln!("skipped {} malformed records", data.skipped);
    }
    let result = run_evaluation(&data.records, &pipeline)?;
    let table = result.render_table();
    let body = if report.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(&result)?
    } else {
        table.clone()
    };
    std::fs::write(report, body).with_context(|| format!("writing {}", report.display()))?;
    print!("{table}");
    Ok(())
}

async fn run_server(config_path: &Path) -> Result<()> {
    let config = AppConfig::load(config_path)?;
    let pipeline = Arc::new(build_pipeline(&config)?);
    let store = Arc::new(SessionStore::open(&config.session_dir)?);
    let listener =
        tokio::net::TcpListener::bind(config.listen).await.with_context(|| format!("binding {}", config.listen))?;
    log::info!("listening on {}", listener.local_addr()?);
    let state = AppState { pipeline, store, max_text_len: config.max_text_len };
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Index { command: IndexCommand::Build { entities, properties, out, gazetteer } } => {
            build_index(&entities, &properties, &out, gazetteer.as_deref())
        }
        Command::Construct { index, input, out, gazetteer, patterns } => {
            construct(&index, &input, out.as_deref(), gazetteer.as_deref(), patterns.as_deref())
        }
        Command::Eval { index, dataset, report, gazetteer, patterns } => {
            evaluate(&index, &dataset, &report, gazetteer.as_deref(), patterns.as_deref())
        }
        Command::Serve { config } => tokio::runtime::Runtime::new()?.block_on(run_server(&config)),
    }
}
