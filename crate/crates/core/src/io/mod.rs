//! Problem-file parsing, report emission, and run orchestration.

mod lex;
mod parse;
mod pretty;
mod report;
mod run;

pub use parse::{
    parse_expr_str, parse_problem, parse_problem_file, validate_problem, ParseError, ProblemFile,
};
pub use pretty::pretty_property;
pub use report::{
    PreconditionSection, ReportDocument, ReportProperty, ReportStats, SCHEMA_VERSION,
};
pub use run::{combined_semantics, run_file, run_mode, validate_report, CliError, RunMode, RunOutcome, RunOverrides};
