//! The four subcommands, independent of argument parsing.

use std::time::Instant;

use cjsr_core::seqgen::{check_theta_recursion, SUCCESS_TOL};
use cjsr_core::{
    alg1_generate, alg2_generate, brute_force_rho_k, extract_cycles, find_cycle_path, find_path, gripenberg_bounds,
    growth_report, is_accepted, is_repeatable_cycle, max_feasible_gamma, sos_primal_upper, verify_certificate,
    word_value, BoundsReport, DualCertificate,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::report::{
    Algo, BenchRow, BenchRun, BenchSection, BoundsSection, Check, Generation, RunReport, Timings, WordCheck,
};
use crate::system::{validate, System};

/// Relative tolerance for the per-block `θ` recursion.
pub const THETA_REL_TOL: f64 = 1e-8;
/// Recomputed spectral values must agree with reported ones to this.
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Brute,
    Gripenberg,
    SosPrimal,
    All,
}

#[derive(Debug, Clone)]
pub struct BoundsOptions {
    pub method: MethodChoice,
    pub epsilon: f64,
    pub depth: usize,
    /// Word length for exhaustive enumeration.
    pub brute_length: usize,
    /// Total degree `2d` for the primal SOS program.
    pub degree: usize,
    pub bisect_tol: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            method: MethodChoice::Gripenberg,
            epsilon: 1e-3,
            depth: 20,
            brute_length: 8,
            degree: 2,
            bisect_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub algo: Algo,
    pub degree: usize,
    pub horizon: usize,
    /// Word length; `None` means 24 blocks of the horizon.
    pub length: Option<usize>,
    pub seed: u64,
    pub epsilon: f64,
    pub depth: usize,
    pub max_cycle_len: usize,
    pub bisect_tol: f64,
    pub elide_certificate: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            algo: Algo::Dual,
            degree: 2,
            horizon: 3,
            length: None,
            seed: 1,
            epsilon: 0.01,
            depth: 12,
            max_cycle_len: cjsr_core::seqgen::DEFAULT_MAX_CYCLE_LEN,
            bisect_tol: 1e-4,
            elide_certificate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchSetting {
    Dual { degree: usize, horizon: usize },
    Gripenberg { epsilon: f64, depth: usize },
}

impl BenchSetting {
    pub fn label(&self) -> String {
        match self {
            Self::Dual { degree, horizon } => format!("dual 2d={degree} h={horizon}"),
            Self::Gripenberg { epsilon, depth } => format!("gripenberg eps={epsilon} t={depth}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub target: f64,
    pub runs: usize,
    pub settings: Vec<BenchSetting>,
    pub workers: usize,
    pub max_cycle_len: usize,
    pub bisect_tol: f64,
}

fn elapsed(timings: &mut Timings, key: &str, start: Instant) {
    timings.insert(key.to_string(), start.elapsed().as_secs_f64());
}

fn half_degree(degree: usize) -> Result<usize, CliError> {
    if degree == 0 || degree % 2 != 0 {
        return Err(CliError::Invalid(format!("--degree must be a positive even number, got {degree}")));
    }
    Ok(degree / 2)
}

pub fn cmd_bounds(sys: &System, opts: &BoundsOptions, timings: &mut Timings) -> Result<BoundsSection, CliError> {
    let phis = sys.lifted.phis();
    let mut reports: Vec<BoundsReport> = Vec::new();
    let mut primal = None;
    let want = |m: MethodChoice| opts.method == m || opts.method == MethodChoice::All;

    if want(MethodChoice::Brute) {
        let start = Instant::now();
        let r = brute_force_rho_k(phis, opts.brute_length, None).map_err(|e| CliError::from_core("brute", e))?;
        elapsed(timings, "bounds.brute", start);
        reports.push(r);
    }
    if want(MethodChoice::Gripenberg) {
        let start = Instant::now();
        let r = gripenberg_bounds(phis, opts.epsilon, opts.depth).map_err(|e| CliError::from_core("gripenberg", e))?;
        elapsed(timings, "bounds.gripenberg", start);
        reports.push(r);
    }
    if want(MethodChoice::SosPrimal) {
        let start = Instant::now();
        let d = half_degree(opts.degree)?;
        let p = sos_primal_upper(phis, d, opts.bisect_tol).map_err(|e| CliError::from_core("sos-primal", e))?;
        elapsed(timings, "bounds.sos_primal", start);
        reports.push(p.to_bounds_report(phis).map_err(|e| CliError::from_core("sos-primal", e))?);
        primal = Some(p);
    }

    let best_lower = reports
        .iter()
        .max_by(|a, b| a.lower.total_cmp(&b.lower))
        .expect("at least one method runs");
    let best_upper = reports
        .iter()
        .min_by(|a, b| a.upper.total_cmp(&b.upper))
        .expect("at least one method runs");
    Ok(BoundsSection {
        lower: best_lower.lower,
        upper: best_upper.upper,
        lower_method: best_lower.method,
        upper_method: best_upper.method,
        witness_word: best_lower.witness_word.clone(),
        reports: reports.clone(),
        primal,
    })
}

/// `γ` and certificate for the dual generator.
fn solve_gamma(sys: &System, degree: usize, tol: f64) -> Result<cjsr_core::GammaSearch, CliError> {
    let d = half_degree(degree)?;
    max_feasible_gamma(&sys.lifted, d, tol).map_err(|e| CliError::from_core("dual program", e))
}

fn dual_length(horizon: usize, length: Option<usize>) -> Result<usize, CliError> {
    if horizon == 0 {
        return Err(CliError::Invalid("--horizon must be at least 1".into()));
    }
    let k = length.unwrap_or(24 * horizon);
    if k == 0 || k % horizon != 0 {
        return Err(CliError::Invalid(format!(
            "word length {k} must be a positive multiple of the horizon {horizon}"
        )));
    }
    Ok(k)
}

fn run_dual(
    sys: &System,
    cert: &DualCertificate,
    degree: usize,
    horizon: usize,
    k: usize,
    seed: u64,
    max_cycle_len: usize,
) -> Result<Generation, CliError> {
    let word = alg1_generate(&sys.lifted, cert, horizon, k, seed).map_err(|e| CliError::from_core("generator", e))?;
    let cycles =
        extract_cycles(&word, &sys.tsm, &sys.modes, max_cycle_len).map_err(|e| CliError::from_core("cycles", e))?;
    let growth = growth_report(&word, &sys.lifted, cert.gamma, degree / 2)
        .map_err(|e| CliError::from_core("growth", e))?;
    Ok(Generation {
        algo: Algo::Dual,
        seed,
        degree: Some(degree),
        horizon: Some(horizon),
        epsilon: None,
        length: k,
        gamma: Some(cert.gamma),
        certificate: Some(cert.clone()),
        canonical_word: word.canonical(),
        word,
        cycles,
        growth: Some(growth),
    })
}

fn run_gripenberg(sys: &System, epsilon: f64, depth: usize, seed: u64, max_cycle_len: usize) -> Result<Generation, CliError> {
    let word = alg2_generate(&sys.lifted, epsilon, depth).map_err(|e| CliError::from_core("generator", e))?;
    let cycles =
        extract_cycles(&word, &sys.tsm, &sys.modes, max_cycle_len).map_err(|e| CliError::from_core("cycles", e))?;
    Ok(Generation {
        algo: Algo::Gripenberg,
        seed,
        degree: None,
        horizon: None,
        epsilon: Some(epsilon),
        length: depth,
        gamma: None,
        certificate: None,
        canonical_word: word.canonical(),
        word,
        cycles,
        growth: None,
    })
}

pub fn cmd_generate(sys: &System, opts: &GenerateOptions, timings: &mut Timings) -> Result<Generation, CliError> {
    let mut generation = match opts.algo {
        Algo::Dual => {
            let k = dual_length(opts.horizon, opts.length)?;
            let start = Instant::now();
            let search = solve_gamma(sys, opts.degree, opts.bisect_tol)?;
            elapsed(timings, "generate.gamma", start);
            let start = Instant::now();
            let g = run_dual(sys, &search.certificate, opts.degree, opts.horizon, k, opts.seed, opts.max_cycle_len)?;
            elapsed(timings, "generate.run", start);
            g
        }
        Algo::Gripenberg => {
            let start = Instant::now();
            let g = run_gripenberg(sys, opts.epsilon, opts.depth, opts.seed, opts.max_cycle_len)?;
            elapsed(timings, "generate.run", start);
            g
        }
    };
    if opts.elide_certificate {
        generation.certificate = None;
    }
    Ok(generation)
}

pub fn cmd_bench(sys: &System, opts: &BenchOptions, timings: &mut Timings) -> Result<BenchSection, CliError> {
    if opts.runs == 0 {
        return Err(CliError::Invalid("--runs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {} workers: {e}", opts.workers)))?;
    let seeds: Vec<u64> = (1..=opts.runs as u64).collect();
    let mut rows = Vec::new();
    for setting in &opts.settings {
        let label = setting.label();
        let (algo, degree, horizon, epsilon, length, cert) = match *setting {
            BenchSetting::Dual { degree, horizon } => {
                let k = dual_length(horizon, None)?;
                let start = Instant::now();
                let search = solve_gamma(sys, degree, opts.bisect_tol)?;
                elapsed(timings, &format!("bench.{label}.gamma"), start);
                (Algo::Dual, Some(degree), Some(horizon), None, k, Some(search.certificate))
            }
            BenchSetting::Gripenberg { epsilon, depth } => (Algo::Gripenberg, None, None, Some(epsilon), depth, None),
        };
        let start = Instant::now();
        let results: Vec<Result<(BenchRun, f64), CliError>> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    let t0 = Instant::now();
                    let g = match (&cert, setting) {
                        (Some(c), _) => run_dual(sys, c, degree.unwrap(), horizon.unwrap(), length, seed, opts.max_cycle_len)?,
                        (None, BenchSetting::Gripenberg { epsilon, depth }) => {
                            run_gripenberg(sys, *epsilon, *depth, seed, opts.max_cycle_len)?
                        }
                        (None, BenchSetting::Dual { .. }) => unreachable!("dual settings carry a certificate"),
                    };
                    let best = g.cycles.first();
                    let best_value = best.map_or(0.0, |c| c.value);
                    Ok((
                        BenchRun {
                            seed,
                            canonical_word: g.canonical_word,
                            best_cycle: best.map(|c| c.cycle.clone()).unwrap_or_default(),
                            best_value,
                            success: best_value >= opts.target - SUCCESS_TOL,
                        },
                        t0.elapsed().as_secs_f64(),
                    ))
                })
                .collect()
        });
        elapsed(timings, &format!("bench.{label}.total"), start);
        let mut outcomes = Vec::with_capacity(results.len());
        let mut total_time = 0.0;
        for r in results {
            let (run, secs) = r?;
            total_time += secs;
            outcomes.push(run);
        }
        timings.insert(format!("bench.{label}.mean_run"), total_time / opts.runs as f64);
        let successes = outcomes.iter().filter(|r| r.success).count();
        rows.push(BenchRow {
            label,
            algo,
            degree,
            horizon,
            epsilon,
            length,
            gamma: cert.as_ref().map(|c| c.gamma),
            successes,
            success_percent: 100.0 * successes as f64 / opts.runs as f64,
            outcomes,
        });
    }
    Ok(BenchSection {
        target: opts.target,
        runs: opts.runs,
        rows,
    })
}

/// Acceptance, repeatability and value of a single canonical word.
pub fn check_word(sys: &System, word: &[usize]) -> Result<WordCheck, CliError> {
    let accepted = is_accepted(&sys.tsm, word).map_err(|e| CliError::from_core("word", e))?;
    let repeatable = is_repeatable_cycle(&sys.tsm, word).map_err(|e| CliError::from_core("word", e))?;
    let value = word_value(sys.modes.modes(), word).map_err(|e| CliError::from_core("word", e))?;
    let lifted_value = word_value(sys.lifted.phis(), word).map_err(|e| CliError::from_core("word", e))?;
    let path = if repeatable {
        find_cycle_path(&sys.dfa, word)
    } else {
        find_path(&sys.dfa, word)
    };
    Ok(WordCheck {
        word: word.to_vec(),
        accepted,
        repeatable,
        value,
        lifted_value,
        path,
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Re-derives every claim in a report from its embedded system and data.
pub fn verify_report(report: &RunReport) -> Vec<Check> {
    let mut checks = Vec::new();
    let sys = match validate(report.system.clone()) {
        Ok(s) => s,
        Err(e) => {
            checks.push(Check::new("system", false, e.to_string()));
            return checks;
        }
    };
    if let Some(b) = &report.bounds {
        verify_bounds(&sys, b, &mut checks);
    }
    if let Some(g) = &report.generation {
        verify_generation(&sys, g, "generation", &mut checks);
    }
    if let Some(b) = &report.bench {
        verify_bench(&sys, b, &mut checks);
    }
    if let Some(w) = &report.word_check {
        match check_word(&sys, &w.word) {
            Ok(fresh) => {
                checks.push(Check::new(
                    "word.accepted",
                    fresh.accepted == w.accepted && fresh.repeatable == w.repeatable,
                    format!("recomputed accepted={} repeatable={}", fresh.accepted, fresh.repeatable),
                ));
                checks.push(Check::new(
                    "word.value",
                    close(fresh.value, w.value, VALUE_TOL),
                    format!("reported {:.8}, recomputed {:.8}, tolerance {VALUE_TOL:e}", w.value, fresh.value),
                ));
            }
            Err(e) => checks.push(Check::new("word", false, e.to_string())),
        }
    }
    checks
}

fn verify_bounds(sys: &System, b: &BoundsSection, checks: &mut Vec<Check>) {
    let phis = sys.lifted.phis();
    for r in &b.reports {
        let name = format!("bounds.{:?}", r.method).to_lowercase();
        checks.push(Check::new(
            format!("{name}.bracket"),
            r.lower <= r.upper,
            format!("lower {:.8}, upper {:.8}", r.lower, r.upper),
        ));
        match word_value(phis, &r.witness_word) {
            Ok(v) => checks.push(Check::new(
                format!("{name}.witness"),
                close(v, r.lower, VALUE_TOL),
                format!("witness value {v:.10}, reported lower {:.10}, tolerance {VALUE_TOL:e}", r.lower),
            )),
            Err(e) => checks.push(Check::new(format!("{name}.witness"), false, e.to_string())),
        }
    }
    let lower = b.reports.iter().map(|r| r.lower).fold(f64::NEG_INFINITY, f64::max);
    let upper = b.reports.iter().map(|r| r.upper).fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "bounds.combined",
        lower == b.lower && upper == b.upper && b.lower <= b.upper,
        format!("combined [{:.8}, {:.8}], from reports [{lower:.8}, {upper:.8}]", b.lower, b.upper),
    ));
}

fn verify_certificate_check(sys: &System, cert: &DualCertificate, name: &str, checks: &mut Vec<Check>) {
    match verify_certificate(sys.lifted.phis(), cert) {
        Ok(c) => {
            let worst_moment = c
                .moment_min_eigs
                .iter()
                .zip(&c.moment_traces)
                .map(|(m, t)| m / t.abs().max(f64::MIN_POSITIVE))
                .fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                format!("{name}.moments_psd"),
                c.moments_psd,
                format!("smallest eigenvalue / trace {worst_moment:e}, tolerance -1e-9"),
            ));
            checks.push(Check::new(
                format!("{name}.coupling_psd"),
                c.coupling_psd,
                format!(
                    "smallest eigenvalue {:e}, tolerance {:e}",
                    c.coupling_min_eig,
                    -1e-9 * c.coupling_scale
                ),
            ));
            checks.push(Check::new(
                format!("{name}.normalized"),
                c.normalized,
                format!("residual {:e}, tolerance 1e-8", c.normalization_residual),
            ));
        }
        Err(e) => checks.push(Check::new(format!("{name}.shape"), false, e.to_string())),
    }
}

fn verify_generation(sys: &System, g: &Generation, name: &str, checks: &mut Vec<Check>) {
    let cw = g.word.canonical();
    checks.push(Check::new(
        format!("{name}.canonical_word"),
        cw == g.canonical_word,
        "canonical word matches the generation order",
    ));
    match is_accepted(&sys.tsm, &cw) {
        Ok(ok) => checks.push(Check::new(
            format!("{name}.accepted"),
            ok,
            format!("word of length {} {}", cw.len(), if ok { "accepted" } else { "rejected" }),
        )),
        Err(e) => checks.push(Check::new(format!("{name}.accepted"), false, e.to_string())),
    }
    for (i, c) in g.cycles.iter().enumerate() {
        let cname = format!("{name}.cycle[{i}]");
        let repeatable = is_repeatable_cycle(&sys.tsm, &c.cycle).unwrap_or(false);
        let path_ok = c.path.word == c.cycle && c.path.is_valid_for(&sys.dfa) && c.path.states.first() == c.path.states.last();
        checks.push(Check::new(
            format!("{cname}.repeatable"),
            repeatable && path_ok,
            format!("diagonal criterion {repeatable}, path valid {path_ok}"),
        ));
        let value = word_value(sys.modes.modes(), &c.cycle);
        let lifted = word_value(sys.lifted.phis(), &c.cycle);
        match (value, lifted) {
            (Ok(v), Ok(l)) => checks.push(Check::new(
                format!("{cname}.value"),
                close(v, c.value, VALUE_TOL) && close(l, c.lifted_value, VALUE_TOL),
                format!(
                    "reported {:.8}/{:.8}, recomputed {v:.8}/{l:.8}, tolerance {VALUE_TOL:e}",
                    c.value, c.lifted_value
                ),
            )),
            (Err(e), _) | (_, Err(e)) => checks.push(Check::new(format!("{cname}.value"), false, e.to_string())),
        }
    }
    if g.algo != Algo::Dual {
        return;
    }
    let (Some(gamma), Some(degree), Some(h)) = (g.gamma, g.degree, g.horizon) else {
        checks.push(Check::new(format!("{name}.parameters"), false, "dual run without gamma, degree or horizon"));
        return;
    };
    if let Some(cert) = &g.certificate {
        checks.push(Check::new(
            format!("{name}.certificate.gamma"),
            cert.gamma == gamma && cert.degree() == degree,
            format!("certificate gamma {:.8} degree {}, run gamma {gamma:.8} degree {degree}", cert.gamma, cert.degree()),
        ));
        verify_certificate_check(sys, cert, &format!("{name}.certificate"), checks);
    }
    let m = sys.lifted.num_modes();
    let floor = gamma / (m as f64).powf(1.0 / degree as f64);
    let best = g.cycles.first().map_or(0.0, |c| c.value);
    checks.push(Check::new(
        format!("{name}.growth_floor"),
        best >= floor - SUCCESS_TOL,
        format!("best cycle {best:.8}, floor {floor:.8}, tolerance {SUCCESS_TOL:e}"),
    ));
    let (slack, ok) = check_theta_recursion(&g.word.log_theta, gamma, degree, h, m, THETA_REL_TOL);
    checks.push(Check::new(
        format!("{name}.theta_recursion"),
        ok && g.word.log_theta.len() == g.word.len() / h + 1,
        format!(
            "{} blocks, worst log slack {slack:e}, tolerance ln(1 - {THETA_REL_TOL:e})",
            g.word.log_theta.len().saturating_sub(1)
        ),
    ));
}

fn verify_bench(sys: &System, b: &BenchSection, checks: &mut Vec<Check>) {
    for row in &b.rows {
        let successes = row.outcomes.iter().filter(|r| r.success).count();
        checks.push(Check::new(
            format!("bench.{}.count", row.label),
            successes == row.successes && row.outcomes.len() == b.runs,
            format!("{successes} successes in {} outcomes", row.outcomes.len()),
        ));
        for run in &row.outcomes {
            let rname = format!("bench.{}.seed[{}]", row.label, run.seed);
            if !is_accepted(&sys.tsm, &run.canonical_word).unwrap_or(false) {
                checks.push(Check::new(format!("{rname}.accepted"), false, "word rejected"));
            }
            if run.best_cycle.is_empty() {
                if run.success || run.best_value != 0.0 {
                    checks.push(Check::new(format!("{rname}.value"), false, "no cycle but a nonzero value"));
                }
                continue;
            }
            let v = word_value(sys.modes.modes(), &run.best_cycle).unwrap_or(f64::NAN);
            let repeatable = is_repeatable_cycle(&sys.tsm, &run.best_cycle).unwrap_or(false);
            let ok = repeatable
                && close(v, run.best_value, VALUE_TOL)
                && run.success == (run.best_value >= b.target - SUCCESS_TOL);
            if !ok {
                checks.push(Check::new(
                    format!("{rname}.value"),
                    false,
                    format!("reported {:.8}, recomputed {v:.8}, repeatable {repeatable}", run.best_value),
                ));
            }
        }
    }
}

/// Verification of `RunReport`s written by `generate`: same checks as `verify --report`.
pub fn self_check(report: &mut RunReport) {
    report.checks = verify_report(report);
}

