//! Deterministic report assembly and rendering.

use crate::checks::Outcome;
use crate::scenario::RunConfig;
use coarse_core::{Tolerances, Verdict};
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub samples: usize,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub outcomes: usize,
    pub matched: usize,
    pub mismatched: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<usize>,
    /// Set when `--fail-fast` stopped the run early.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub stopped_early: bool,
}

/// Excluded unless requested, so default reports are byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub scenario: String,
    pub schema: u32,
    pub config: ConfigEcho,
    pub outcomes: Vec<Outcome>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    pub fn new(
        command: &str,
        scenario: &str,
        config: RunConfig,
        outcomes: Vec<Outcome>,
        stopped_early: bool,
    ) -> Self {
        let matched = outcomes.iter().filter(|o| o.matched).count();
        Report {
            command: command.to_string(),
            scenario: scenario.to_string(),
            schema: crate::scenario::SCHEMA_VERSION,
            config: ConfigEcho {
                seed: config.seed,
                samples: config.samples,
                tolerances: config.tol,
            },
            summary: Summary {
                outcomes: outcomes.len(),
                matched,
                mismatched: outcomes.len() - matched,
                first_mismatch: outcomes.iter().find(|o| !o.matched).map(|o| o.index),
                stopped_early,
            },
            outcomes,
            timing: None,
        }
    }

    pub fn all_matched(&self) -> bool {
        self.summary.mismatched == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let t = &c.tolerances;
        let _ = writeln!(
            out,
            "{} {} (schema {})",
            self.command, self.scenario, self.schema
        );
        let _ = writeln!(
            out,
            "seed {} samples {} eq_tol {:e} fd_tol {:e} fd_step {:e} form_tol {:e}",
            c.seed, c.samples, t.eq_tol, t.fd_tol, t.fd_step, t.form_tol
        );
        for o in &self.outcomes {
            let status = match (&o.expected, o.matched) {
                (None, _) => "info",
                (Some(_), true) => "ok",
                (Some(_), false) => "MISMATCH",
            };
            let count = o.count.map(|n| format!(" count={n}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "[{}] {:<8} {} {}: {}{}",
                o.index,
                status,
                o.op,
                o.subject,
                verdict_line(&o.verdict),
                count
            );
            if let Some(m) = &o.mismatch {
                let _ = writeln!(out, "    {m}");
            }
            for (k, v) in &o.details {
                let _ = writeln!(out, "    {k}: {v}");
            }
        }
        let s = &self.summary;
        let _ = write!(out, "{}/{} matched", s.matched, s.outcomes);
        if let Some(i) = s.first_mismatch {
            let _ = write!(out, ", first mismatch at [{i}]");
        }
        if s.stopped_early {
            let _ = write!(out, ", stopped early");
        }
        out.push('\n');
        if let Some(tm) = &self.timing {
            let _ = writeln!(out, "wall clock {:.1} ms", tm.wall_clock_ms);
        }
        out
    }
}

fn verdict_line(v: &Verdict) -> String {
    match v {
        Verdict::Pass => "pass".into(),
        Verdict::Unknown { reason } => format!("unknown ({reason})"),
        Verdict::Refuted(r) => format!("refuted: {r}"),
    }
}
