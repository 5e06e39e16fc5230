//! phrasex command line: build, search, bench, stats, verify.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use phrasex::bench::run_bench;
use phrasex::indexer::{ingest, verify};
use phrasex::{Error, Index, IngestConfig, QueryOptions, ReadStats};

#[derive(Parser)]
#[command(
    name = "phrasex",
    about = "Phrase search over stop-phrase, expanded-pair, and multi-stream basic indexes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index directory from a corpus.
    Build {
        /// Corpus: a directory of text files or a line-delimited archive.
        #[arg(long)]
        corpus: PathBuf,
        /// Output index directory (must be empty or absent).
        #[arg(long)]
        out: PathBuf,
        /// Flat key=value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one query and print matches.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        /// Disable the distance-free retry.
        #[arg(long)]
        no_fallback: bool,
        /// Keep only matches with the words consecutive in query order.
        #[arg(long)]
        exact_order: bool,
        #[arg(long)]
        max_results: Option<usize>,
    },
    /// Run the seeded benchmark against the baseline.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// Also write the machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print index component sizes.
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
    /// Re-check every index invariant against the corpus.
    Verify {
        #[arg(long)]
        index: PathBuf,
        /// Corpus location; defaults to the path recorded at build time.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Error>()
                .is_some_and(|e| matches!(e, Error::UnsupportedQuery(_)))
            {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Build {
            corpus,
            out,
            config,
        } => {
            let cfg = match config {
                Some(path) => IngestConfig::load(&path)
                    .with_context(|| format!("loading config {}", path.display()))?,
                None => IngestConfig::default(),
            };
            let summary = ingest(&corpus, &out, &cfg)?;
            println!(
                "indexed {} documents, {} tokens (stop list {}, frequent list {}, {} segments)",
                summary.documents,
                summary.tokens,
                summary.stop_size,
                summary.frequent_size,
                summary.segment_count
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Search {
            index,
            query,
            no_fallback,
            exact_order,
            max_results,
        } => {
            let index = Index::open(&index)?;
            let opts = QueryOptions {
                fallback: !no_fallback,
                exact_order,
                max_results,
                ..QueryOptions::default()
            };
            let mut stats = ReadStats::new();
            let matches = index.search(&query, &opts, &mut stats)?;
            for m in &matches {
                let span = m.span.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                let positions = m
                    .positions
                    .iter()
                    .map(|p| p.map(|p| p.to_string()).unwrap_or_else(|| "-".into()))
                    .collect::<Vec<_>>()
                    .join(",");
                println!("{}\t{span}\t{positions}", m.doc);
            }
            println!(
                "# matches={} postings_read={} keys_probed={} bytes_read={}",
                matches.len(),
                stats.postings_read,
                stats.keys_probed,
                stats.bytes_read
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            index,
            seed,
            queries,
            report,
        } => {
            let index = Index::open(&index)?;
            if !index.config().build_baseline {
                anyhow::bail!("bench needs an index built with build_baseline=true");
            }
            let bench = run_bench(&index, queries, seed)?;
            print!("{}", bench.render_table());
            if !bench.consistent() {
                anyhow::bail!("bench report failed its own consistency checks");
            }
            if let Some(path) = report {
                std::fs::write(&path, bench.to_tsv())
                    .with_context(|| format!("writing report {}", path.display()))?;
                println!("report written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { index } => {
            let index = Index::open(&index)?;
            let sizes = index.component_sizes();
            println!("{:<42} {:>14} {:>10}", "component", "bytes", "entries");
            for (name, bytes, entries) in [
                (
                    "stop-phrase index (keys + streams)",
                    sizes.stop_phrase_bytes,
                    sizes.stop_phrase_keys,
                ),
                (
                    "expanded word-pair index (keys + streams)",
                    sizes.expanded_bytes,
                    sizes.expanded_keys,
                ),
                (
                    "basic index (three-stream)",
                    sizes.basic_bytes,
                    sizes.basic_words,
                ),
                ("baseline index", sizes.baseline_bytes, sizes.baseline_words),
            ] {
                println!("{name:<42} {bytes:>14} {entries:>10}");
            }
            println!("{:<42} {:>14}", "total segment bytes", sizes.segment_bytes);
            println!(
                "documents: {}   tokens: {}",
                index.manifest().docs.len(),
                index.manifest().total_tokens
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { index, corpus } => {
            let index = Index::open(&index)?;
            let report = verify(&index, corpus.as_deref())?;
            for check in &report.checks {
                if check.pass {
                    println!("PASS {}", check.name);
                } else {
                    println!("FAIL {} — {}", check.name, check.details);
                }
            }
            if report.all_pass() {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
