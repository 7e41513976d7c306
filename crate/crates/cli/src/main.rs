mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqlforge_core::dataset::SeedFormat;

#[derive(Parser, Debug)]
#[command(name = "sqlforge", version, about = "Template-driven text-to-SQL data synthesis")]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Format of seed corpora given on the command line; also overrides the config.
    #[arg(long, global = true)]
    seed_format: Option<SeedFormat>,
    /// Answer model calls from a recorded exchange log instead of a live backend.
    #[arg(long, global = true, value_name = "LOG")]
    replay: Option<PathBuf>,
    /// Append every model exchange to this log.
    #[arg(long, global = true, value_name = "LOG")]
    record: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// -v for debug, -vv for trace.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the deduplicated templates of a statement file or seed corpus as JSON lines.
    Templatize {
        /// Statement file (one per line), seed corpus directory, or `-` for stdin.
        #[arg(default_value = "-")]
        input: String,
    },
    /// Run seeded random crossovers over a template pool.
    Crossover {
        #[arg(default_value = "-")]
        input: String,
        #[arg(long, default_value_t = 500)]
        count: usize,
    },
    /// Run the exploration phase only.
    Explore,
    /// Ask for one domain-specific query following a template.
    Generate {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        template: String,
    },
    /// Produce a schema for a query, from the model or by local inference.
    Schema {
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        sql: String,
        /// Infer locally instead of calling the model.
        #[arg(long)]
        infer: bool,
    },
    /// Ask for the question a query answers.
    Translate {
        #[arg(long)]
        sql: String,
        /// DDL file for the query's schema.
        #[arg(long)]
        schema: PathBuf,
    },
    /// Re-validate an emitted dataset and report the executable rate.
    Validate {
        dataset: PathBuf,
        /// Template pool to match against; defaults to templates.jsonl next to the dataset.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Recompute run statistics from an output directory.
    Stats { dir: Option<PathBuf> },
    /// Run the whole pipeline, resuming from any ledger in the output directory.
    Run {
        /// Stop after this many phase-2 samples; a later run resumes.
        #[arg(long, hide = true)]
        stop_after: Option<u32>,
    },
}

fn init_tracing(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).with_target(false).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_tracing(cli.verbose);
    match commands::dispatch(&cli) {
        Ok(()) | Err(commands::CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn globals_follow_the_subcommand() {
        let cli = Cli::try_parse_from(["sqlforge", "run", "--workers", "2", "--seed-format", "bird", "-vv"]).unwrap();
        assert_eq!(cli.workers, Some(2));
        assert_eq!(cli.seed_format, Some(SeedFormat::Bird));
        assert_eq!(cli.verbose, 2);
    }
}
