//! Machine-readable run reports and their text rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use piis_core::cutoff::{CutoffReport, ExpandReport, SweepTable};
use piis_core::simrel::Violation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub outcome: Outcome,
    pub timings: Timings,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Outcome {
    Check { reports: Vec<CutoffReport> },
    Sweep { table: SweepTable },
    Stats(StatsReport),
    Simcheck(SimcheckReport),
    Expand { report: ExpandReport },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    /// Instance size; `None` for a fixed system.
    pub n: Option<usize>,
    pub agents: usize,
    pub states: usize,
    pub transitions: usize,
    pub build_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    /// `"projection"` (T(n) simulated by T(k)) or `"lift"` (T(k) by T(n)).
    pub relation: String,
    pub left_agents: usize,
    pub right_agents: usize,
    pub pairs: usize,
    pub passed: bool,
    pub violation_count: usize,
    /// At most [`MAX_LISTED_VIOLATIONS`] entries.
    pub violations: Vec<Violation>,
}

pub const MAX_LISTED_VIOLATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimcheckReport {
    pub k: usize,
    pub n: usize,
    pub small_states: usize,
    pub big_states: usize,
    pub directions: Vec<DirectionReport>,
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    match &r.outcome {
        Outcome::Check { reports } => {
            for c in reports {
                let _ = writeln!(out, "{}: {}", c.formula, c.property);
                let inst = match c.cutoff {
                    Some(k) => format!("T({k})"),
                    None => "the system".into(),
                };
                if let Some(k) = c.cutoff {
                    let _ = write!(out, "  cutoff {k}, ");
                } else {
                    out.push_str("  ");
                }
                let _ = writeln!(
                    out,
                    "checked {} on {inst}: {} states, {} transitions",
                    c.reduced, c.instance.states, c.instance.transitions
                );
                let _ = writeln!(out, "  verdict: {}", c.verdict);
                let _ = writeln!(out, "  {}", c.claim);
                if !c.witness_text.is_empty() {
                    out.push_str("  witness:\n");
                    for l in &c.witness_text {
                        let _ = writeln!(out, "    {l}");
                    }
                }
            }
        }
        Outcome::Sweep { table } => {
            let _ = writeln!(
                out,
                "{} (cutoff {}, checking {})",
                table.formula, table.cutoff, table.reduced
            );
            let _ = writeln!(out, "  {:>3}  {:<7}  {:>10}  {:>12}  {:>10}", "n", "verdict", "states", "transitions", "ms");
            for row in &table.rows {
                let cell = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
                let verdict = row.verdict.map_or("-".to_string(), |v| v.to_string());
                let _ = write!(
                    out,
                    "  {:>3}  {:<7}  {:>10}  {:>12}  {:>10.1}",
                    row.n,
                    verdict,
                    cell(row.states),
                    cell(row.transitions),
                    row.ms
                );
                if let Some(note) = &row.note {
                    let _ = write!(out, "  ({note}; table truncated)");
                }
                out.push('\n');
            }
            let _ = writeln!(out, "verdicts constant: {}", yes_no(table.constant()));
        }
        Outcome::Stats(s) => {
            let name = s.n.map_or("system".to_string(), |n| format!("T({n})"));
            let _ = writeln!(
                out,
                "{name}: {} agent{}, {} reachable states, {} transitions, built in {:.1} ms",
                s.agents,
                if s.agents == 1 { "" } else { "s" },
                s.states,
                s.transitions,
                s.build_ms
            );
        }
        Outcome::Simcheck(s) => {
            let _ = writeln!(out, "T({}): {} states; T({}): {} states", s.k, s.small_states, s.n, s.big_states);
            for d in &s.directions {
                let _ = writeln!(
                    out,
                    "{} T({}) by T({}): {} ({} pairs, {} violations)",
                    d.relation,
                    d.left_agents,
                    d.right_agents,
                    if d.passed { "pass" } else { "FAIL" },
                    d.pairs,
                    d.violation_count
                );
                for v in &d.violations {
                    let _ = writeln!(out, "  {v:?}");
                }
            }
        }
        Outcome::Expand { report } => {
            let _ = writeln!(
                out,
                "{} on T({}): {} conjuncts; reduced={}; expanded={}",
                report.formula, report.n, report.conjuncts, report.reduced, report.expanded
            );
        }
    }
    out
}
