//! Machine-readable report documents. The JSON form is stable and
//! deterministic for fixed inputs and seed; wall-clock time is reported only
//! in the human-readable rendering so machine reports stay byte-identical
//! across runs.

use serde::{Deserialize, Serialize};

use super::pretty::pretty_property;
use crate::cegis::{RunStatus, SynthesisReport};
use crate::lang::Expr;
use crate::model::Mode;
use crate::search::Stats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProperty {
    pub text: String,
    pub ast: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportStats {
    pub synthesize_calls: u64,
    pub check_implication_calls: u64,
    pub check_strongest_calls: u64,
    pub check_weakest_calls: u64,
    pub cegqi_instances: u64,
    pub full_hidden_scans: u64,
    pub cache_hits: u64,
    pub query_faults: u64,
}

impl From<&Stats> for ReportStats {
    fn from(s: &Stats) -> Self {
        ReportStats {
            synthesize_calls: s.synthesize_calls,
            check_implication_calls: s.check_implication_calls,
            check_strongest_calls: s.check_strongest_calls,
            check_weakest_calls: s.check_weakest_calls,
            cegqi_instances: s.cegqi_instances,
            full_hidden_scans: s.full_hidden_scans,
            cache_hits: s.cache_hits,
            query_faults: s.query_faults,
        }
    }
}

/// The user-facing disjunctive precondition derived from a wlp run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionSection {
    pub disjuncts: Vec<ReportProperty>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: u32,
    pub problem: String,
    pub mode: String,
    pub status: String,
    pub seed: u64,
    pub properties: Vec<ReportProperty>,
    pub stats: ReportStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precondition: Option<PreconditionSection>,
}

pub fn status_str(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Best => "best",
        RunStatus::PartialTimeout => "partial-timeout",
    }
}

impl ReportDocument {
    pub fn from_report(problem_name: &str, r: &SynthesisReport) -> Self {
        ReportDocument {
            schema: SCHEMA_VERSION,
            problem: problem_name.to_string(),
            mode: r.mode.to_string(),
            status: status_str(r.status).to_string(),
            seed: r.seed,
            properties: r
                .properties
                .iter()
                .map(|p| ReportProperty { text: pretty_property(&p.ast), ast: p.ast.clone() })
                .collect(),
            stats: ReportStats::from(&r.stats),
            diagnostics: r.diagnostics.clone(),
            precondition: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Human-readable rendering; includes wall time, so not byte-stable.
    pub fn to_text(&self, wall_millis: u64) -> String {
        let mut out = String::new();
        let connective = if self.mode == Mode::Over.to_string() { "/\\" } else { "\\/" };
        out.push_str(&format!(
            "problem {} ({}): {}, {} propert{}, {} ms\n",
            self.problem,
            self.mode,
            self.status,
            self.properties.len(),
            if self.properties.len() == 1 { "y" } else { "ies" },
            wall_millis,
        ));
        for (i, p) in self.properties.iter().enumerate() {
            let lead = if i == 0 { "   " } else { connective };
            out.push_str(&format!("  {lead} {}\n", p.text));
        }
        if let Some(pre) = &self.precondition {
            out.push_str(&format!("  precondition: {}\n", pre.text));
        }
        for d in &self.diagnostics {
            out.push_str(&format!("  note: {d}\n"));
        }
        out.push_str(&format!(
            "  stats: synthesize={} check_implication={} check_strongest={} check_weakest={} cegqi_instances={} hidden_scans={} cache_hits={}\n",
            self.stats.synthesize_calls,
            self.stats.check_implication_calls,
            self.stats.check_strongest_calls,
            self.stats.check_weakest_calls,
            self.stats.cegqi_instances,
            self.stats.full_hidden_scans,
            self.stats.cache_hits,
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_form_round_trips() {
        let doc = ReportDocument {
            schema: SCHEMA_VERSION,
            problem: "p".into(),
            mode: "over".into(),
            status: "best".into(),
            seed: 7,
            properties: vec![ReportProperty {
                text: "0 <= y".into(),
                ast: crate::io::parse_expr_str("0 <= y").unwrap(),
            }],
            stats: ReportStats {
                synthesize_calls: 1,
                check_implication_calls: 2,
                check_strongest_calls: 3,
                check_weakest_calls: 0,
                cegqi_instances: 4,
                full_hidden_scans: 5,
                cache_hits: 6,
                query_faults: 0,
            },
            diagnostics: vec![],
            precondition: None,
        };
        let json = doc.to_json();
        let back = ReportDocument::from_json(&json).unwrap();
        // spans are display metadata and are not serialized; parse-produced
        // spans differ, so compare through a re-serialization
        assert_eq!(json, back.to_json());
    }
}
