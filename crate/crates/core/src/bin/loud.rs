//! Command-line front end: run a problem file, consult the exhaustive
//! oracle, or drive the bundled benchmark pack.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use loud::io::{self, RunMode, RunOverrides};
use loud::model::Mode;
use loud::{oracle, pack};

#[derive(Debug, Parser)]
#[command(name = "loud", version, about = "strongest-consequence / weakest-implicant synthesis over finite domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Over,
    Under,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a best conjunction and/or disjunction for a problem file.
    Run {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Time budget in milliseconds (0 = none).
        #[arg(long)]
        timeout: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        /// Validate every result against the exhaustive oracle.
        #[arg(long)]
        oracle_check: bool,
        /// Disable reuse of hidden-variable instances across CEGQI calls.
        #[arg(long)]
        no_h_cache: bool,
        /// Disable canonical determinism (seed then permutes candidate order).
        #[arg(long)]
        no_deterministic: bool,
        /// Worker threads for example scans.
        #[arg(long, default_value = "1")]
        threads: usize,
    },
    /// Print the oracle's best conjunction/disjunction by full enumeration.
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Run a bundled benchmark pack and verify its acceptance assertions.
    Bench {
        pack: String,
        #[arg(long)]
        oracle_check: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            file,
            mode,
            timeout,
            seed,
            format,
            oracle_check,
            no_h_cache,
            no_deterministic,
            threads,
        } => {
            let src = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let ov = RunOverrides {
                mode: mode.map(|m| match m {
                    ModeArg::Over => RunMode::Over,
                    ModeArg::Under => RunMode::Under,
                    ModeArg::Both => RunMode::Both,
                }),
                timeout_ms: timeout,
                seed,
                h_cache: if no_h_cache { Some(false) } else { None },
                oracle_check,
                deterministic: if no_deterministic { Some(false) } else { None },
                threads: Some(threads),
            };
            let outcome = io::run_file(&src, &ov)?;
            for (doc, report) in &outcome.reports {
                match format {
                    FormatArg::Json => println!("{}", doc.to_json()),
                    FormatArg::Text => print!("{}", doc.to_text(report.wall_millis)),
                }
            }
            Ok(if outcome.any_partial { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Oracle { file, mode } => {
            let src = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let problem = match io::parse_problem_file(&src)? {
                io::ProblemFile::Plain(p) => p,
                io::ProblemFile::Transformer { name, spec } => spec.encode(&name)?.0,
            };
            let modes = match mode {
                Some(ModeArg::Over) => vec![Mode::Over],
                Some(ModeArg::Under) => vec![Mode::Under],
                Some(ModeArg::Both) | None => {
                    let mut m = Vec::new();
                    if problem.grammar_over.is_some() {
                        m.push(Mode::Over);
                    }
                    if problem.grammar_under.is_some() {
                        m.push(Mode::Under);
                    }
                    m
                }
            };
            for m in modes {
                let grammar = match m {
                    Mode::Over => problem.grammar_over.as_ref(),
                    Mode::Under => problem.grammar_under.as_ref(),
                }
                .ok_or_else(|| anyhow!("problem has no grammar for mode {m}"))?;
                let set = match m {
                    Mode::Over => oracle::oracle_strongest_consequences(&problem, grammar)?,
                    Mode::Under => oracle::oracle_weakest_implicants(&problem, grammar)?,
                };
                println!("oracle {m} ({} properties):", set.len());
                for p in set {
                    println!("  {}", io::pretty_property(&p.ast));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { pack, oracle_check } => {
            let lines = pack::bench(&pack, oracle_check)?;
            let mut failed = 0;
            for line in &lines {
                let status = if line.passed { "pass" } else { "FAIL" };
                if !line.passed {
                    failed += 1;
                }
                println!("{status}  {:<14} {:>7} ms  {}", line.name, line.millis, line.detail);
            }
            println!("{}/{} pass", lines.len() - failed, lines.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
