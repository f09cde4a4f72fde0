//! Run reports: a JSON document that carries everything needed to re-check a
//! run, plus fixed-width human tables.
//!
//! Timings live in a separate `timings` map; every other field is a pure
//! function of the input file, the flags and the seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cjsr_core::{
    BoundsMethod, BoundsReport, CycleReport, DualCertificate, GrowthReport, SosPrimalReport, SwitchingWord,
};
use serde::{Deserialize, Serialize};

use crate::system::SystemFile;

pub type Timings = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub system: SystemFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<Generation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_check: Option<WordCheck>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub timings: Timings,
}

impl RunReport {
    pub fn new(command: &str, args: Vec<String>, system: SystemFile) -> Self {
        Self {
            command: command.to_string(),
            args,
            system,
            bounds: None,
            generation: None,
            bench: None,
            word_check: None,
            checks: Vec::new(),
            timings: Timings::new(),
        }
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSection {
    pub reports: Vec<BoundsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal: Option<SosPrimalReport>,
    /// Tightest combined bracket.
    pub lower: f64,
    pub upper: f64,
    pub lower_method: BoundsMethod,
    pub upper_method: BoundsMethod,
    /// Canonical word whose averaged spectral radius is `lower`.
    pub witness_word: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Dual,
    Gripenberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub algo: Algo,
    pub seed: u64,
    /// Total degree `2d` (dual only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Requested word length `k` (dual) or search depth `t` (Gripenberg).
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DualCertificate>,
    pub word: SwitchingWord,
    pub canonical_word: Vec<usize>,
    pub cycles: Vec<CycleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSection {
    pub target: f64,
    pub runs: usize,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// `dual 2d=2 h=3` or `gripenberg eps=0.01 t=12`.
    pub label: String,
    pub algo: Algo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub successes: usize,
    pub success_percent: f64,
    pub outcomes: Vec<BenchRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub seed: u64,
    pub canonical_word: Vec<usize>,
    pub best_cycle: Vec<usize>,
    pub best_value: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCheck {
    pub word: Vec<usize>,
    pub accepted: bool,
    pub repeatable: bool,
    /// `ρ(A-product)^{1/T}`.
    pub value: f64,
    pub lifted_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<cjsr_core::AcceptancePath>,
}

/// One named verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

fn word(w: &[usize]) -> String {
    w.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

fn method(m: BoundsMethod) -> &'static str {
    match m {
        BoundsMethod::Brute => "brute",
        BoundsMethod::Gripenberg => "gripenberg",
        BoundsMethod::SosPrimal => "sos-primal",
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8}")
    } else {
        format!("{v}")
    }
}

/// Fixed-width human rendering; all real numbers carry 8 decimals.
pub fn render(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} on {}", report.command, report.system.name);
    if let Some(b) = &report.bounds {
        let _ = writeln!(out, "{:<12} {:>12} {:>12} {:>12} {:>6}  witness", "method", "lower", "upper", "budget", "depth");
        for r in &b.reports {
            let _ = writeln!(
                out,
                "{:<12} {:>12} {:>12} {:>12} {:>6}  {}",
                method(r.method),
                num(r.lower),
                num(r.upper),
                r.budget_used,
                r.depth,
                word(&r.witness_word)
            );
        }
        let _ = writeln!(
            out,
            "bracket      [{}, {}]  (lower: {}, upper: {})",
            num(b.lower),
            num(b.upper),
            method(b.lower_method),
            method(b.upper_method)
        );
    }
    if let Some(g) = &report.generation {
        if let Some(gamma) = g.gamma {
            let _ = writeln!(out, "gamma        {}", num(gamma));
        }
        let _ = writeln!(out, "word         {}", word(&g.canonical_word));
        let _ = writeln!(out, "{:<4} {:>12} {:>12} {:>6}  cycle", "rank", "value", "lifted", "length");
        for (i, c) in g.cycles.iter().take(10).enumerate() {
            let _ = writeln!(
                out,
                "{:<4} {:>12} {:>12} {:>6}  {}",
                i + 1,
                num(c.value),
                num(c.lifted_value),
                c.length,
                word(&c.cycle)
            );
        }
        if let Some(gr) = &g.growth {
            let _ = writeln!(
                out,
                "floor        {}  best cycle {}  {}",
                num(gr.floor),
                num(gr.best_cycle_value),
                if gr.satisfied { "met" } else { "missed" }
            );
        }
    }
    if let Some(b) = &report.bench {
        let _ = writeln!(out, "target {}, {} runs", num(b.target), b.runs);
        let _ = writeln!(out, "{:<32} {:>12} {:>24}", "setting", "gamma", "success (mean time)");
        for row in &b.rows {
            let mean = report
                .timings
                .get(&format!("bench.{}.mean_run", row.label))
                .copied()
                .unwrap_or(f64::NAN);
            let gamma = row.gamma.map_or_else(|| "-".to_string(), num);
            let _ = writeln!(
                out,
                "{:<32} {:>12} {:>24}",
                row.label,
                gamma,
                format!("{:.0}% ({:.3}s)", row.success_percent, mean)
            );
        }
    }
    if let Some(w) = &report.word_check {
        let _ = writeln!(out, "word         {}", word(&w.word));
        let _ = writeln!(out, "accepted     {}", w.accepted);
        let _ = writeln!(out, "repeatable   {}", w.repeatable);
        let _ = writeln!(out, "value        {}", num(w.value));
        let _ = writeln!(out, "lifted value {}", num(w.lifted_value));
        if let Some(p) = &w.path {
            let states = p.states.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ");
            let _ = writeln!(out, "path         {states}");
        }
    }
    if !report.checks.is_empty() {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(out, "checks: {} passed, {failed} failed", report.checks.len() - failed);
        for c in report.checks.iter().filter(|c| !c.passed) {
            let _ = writeln!(out, "  FAIL {}: {}", c.name, c.detail);
        }
    }
    out
}
