use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cjsr_cli::commands::self_check;
use cjsr_cli::report::Algo;
use cjsr_cli::{
    cmd_bench, cmd_bounds, cmd_generate, check_word, exit, load_system, render, verify_report, BenchOptions,
    BenchSetting, BoundsOptions, CliError, GenerateOptions, MethodChoice, RunReport,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cjsr", version, about = "Bounds and high-growth switching sequences for constrained switching systems")]
struct Cli {
    /// Write the JSON report to this path ("-" prints it instead of the table).
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bracket the constrained joint spectral radius.
    Bounds(BoundsArgs),
    /// Generate an accepted high-growth switching sequence and extract cycles.
    Generate(GenerateArgs),
    /// Repeat generation over seeds 1..=runs and report success rates.
    Bench(BenchArgs),
    /// Check a word, or re-check a saved report.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Brute,
    Gripenberg,
    SosPrimal,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dual,
    Gripenberg,
}

#[derive(Args)]
struct BoundsArgs {
    system: PathBuf,
    #[arg(long, value_enum, default_value = "gripenberg")]
    method: Method,
    #[arg(long = "eps", default_value_t = 1e-3)]
    epsilon: f64,
    /// Maximum product length for the branch-and-bound search.
    #[arg(long, default_value_t = 20)]
    depth: usize,
    /// Word length for exhaustive enumeration.
    #[arg(short = 'k', long, default_value_t = 8)]
    length: usize,
    /// Total degree 2d of the SOS program.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 1e-4)]
    bisect_tol: f64,
}

#[derive(Args)]
struct GenerateArgs {
    system: PathBuf,
    #[arg(long, value_enum, default_value = "dual")]
    algo: AlgoArg,
    /// Total degree 2d of the dual program.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// Word length for the dual generator (default 24 blocks).
    #[arg(short = 'k', long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long = "eps", default_value_t = 0.01)]
    epsilon: f64,
    /// Search depth for the branch-and-bound generator.
    #[arg(short = 't', long = "depth", default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 12)]
    max_cycle_len: usize,
    #[arg(long, default_value_t = 1e-4)]
    bisect_tol: f64,
    /// Leave the moment vectors out of the report.
    #[arg(long)]
    elide_certificate: bool,
}

#[derive(Args)]
struct BenchArgs {
    system: PathBuf,
    /// A run succeeds when its best cycle reaches this value (less 1e-6).
    #[arg(long)]
    target: f64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Dual setting DEGREE:HORIZON, e.g. 2:3 (repeatable).
    #[arg(long = "dual", value_name = "DEGREE:HORIZON", value_parser = parse_dual)]
    dual: Vec<BenchSetting>,
    /// Branch-and-bound setting EPS:DEPTH, e.g. 0.01:12 (repeatable).
    #[arg(long = "gripenberg", value_name = "EPS:DEPTH", value_parser = parse_gripenberg)]
    gripenberg: Vec<BenchSetting>,
    #[arg(long, env = "CJSR_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 12)]
    max_cycle_len: usize,
    #[arg(long, default_value_t = 1e-4)]
    bisect_tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// System file; optional with --report, which embeds its system.
    system: Option<PathBuf>,
    /// Comma-separated canonical word, e.g. 1,1,2,1,2,3,1,1.
    #[arg(long, value_delimiter = ',', conflicts_with = "report")]
    word: Option<Vec<usize>>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(&str, &str), String> {
    s.split_once(':').ok_or_else(|| format!("expected A:B, got `{s}`"))
}

fn parse_dual(s: &str) -> Result<BenchSetting, String> {
    let (a, b) = parse_pair(s)?;
    Ok(BenchSetting::Dual {
        degree: a.parse().map_err(|e| format!("degree `{a}`: {e}"))?,
        horizon: b.parse().map_err(|e| format!("horizon `{b}`: {e}"))?,
    })
}

fn parse_gripenberg(s: &str) -> Result<BenchSetting, String> {
    let (a, b) = parse_pair(s)?;
    Ok(BenchSetting::Gripenberg {
        epsilon: a.parse().map_err(|e| format!("epsilon `{a}`: {e}"))?,
        depth: b.parse().map_err(|e| format!("depth `{b}`: {e}"))?,
    })
}

fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn run(cli: Cli, argv: Vec<String>) -> Result<RunReport, CliError> {
    match cli.command {
        Command::Bounds(a) => {
            let sys = load_system(&a.system)?;
            let opts = BoundsOptions {
                method: match a.method {
                    Method::Brute => MethodChoice::Brute,
                    Method::Gripenberg => MethodChoice::Gripenberg,
                    Method::SosPrimal => MethodChoice::SosPrimal,
                    Method::All => MethodChoice::All,
                },
                epsilon: a.epsilon,
                depth: a.depth,
                brute_length: a.length,
                degree: a.degree,
                bisect_tol: a.bisect_tol,
            };
            let mut report = RunReport::new("bounds", argv, sys.file.clone());
            report.bounds = Some(cmd_bounds(&sys, &opts, &mut report.timings)?);
            self_check(&mut report);
            Ok(report)
        }
        Command::Generate(a) => {
            let sys = load_system(&a.system)?;
            let opts = GenerateOptions {
                algo: match a.algo {
                    AlgoArg::Dual => Algo::Dual,
                    AlgoArg::Gripenberg => Algo::Gripenberg,
                },
                degree: a.degree,
                horizon: a.horizon,
                length: a.length,
                seed: a.seed,
                epsilon: a.epsilon,
                depth: a.depth,
                max_cycle_len: a.max_cycle_len,
                bisect_tol: a.bisect_tol,
                elide_certificate: a.elide_certificate,
            };
            let mut report = RunReport::new("generate", argv, sys.file.clone());
            report.generation = Some(cmd_generate(&sys, &opts, &mut report.timings)?);
            self_check(&mut report);
            Ok(report)
        }
        Command::Bench(a) => {
            let sys = load_system(&a.system)?;
            let mut settings = a.dual;
            settings.extend(a.gripenberg);
            if settings.is_empty() {
                settings = vec![
                    BenchSetting::Dual { degree: 2, horizon: 3 },
                    BenchSetting::Gripenberg { epsilon: 0.01, depth: 12 },
                ];
            }
            let opts = BenchOptions {
                target: a.target,
                runs: a.runs,
                settings,
                workers: a.workers,
                max_cycle_len: a.max_cycle_len,
                bisect_tol: a.bisect_tol,
            };
            let mut report = RunReport::new("bench", argv, sys.file.clone());
            report.bench = Some(cmd_bench(&sys, &opts, &mut report.timings)?);
            self_check(&mut report);
            Ok(report)
        }
        Command::Verify(a) => match (a.report, a.word) {
            (Some(path), _) => {
                let saved = read_report(&path)?;
                let mut checks = verify_report(&saved);
                if let Some(sys_path) = &a.system {
                    let sys = load_system(sys_path)?;
                    checks.push(cjsr_cli::report::Check::new(
                        "system.matches",
                        sys.file == saved.system,
                        "given system file equals the one embedded in the report",
                    ));
                }
                let mut report = RunReport::new("verify", argv, saved.system);
                report.checks = checks;
                Ok(report)
            }
            (None, Some(word)) => {
                let sys_path = a
                    .system
                    .ok_or_else(|| CliError::Invalid("verify --word needs a system file".into()))?;
                let sys = load_system(&sys_path)?;
                let mut report = RunReport::new("verify", argv, sys.file.clone());
                let w = check_word(&sys, &word)?;
                report.word_check = Some(w);
                self_check(&mut report);
                let w = report.word_check.as_ref().expect("set above");
                report.checks.push(cjsr_cli::report::Check::new(
                    "word.in_language",
                    w.accepted,
                    format!("F-product of the word is {}", if w.accepted { "nonzero" } else { "zero" }),
                ));
                Ok(report)
            }
            (None, None) => Err(CliError::Invalid("verify needs --word or --report".into())),
        },
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let json = cli.json.clone();
    match run(cli, argv) {
        Ok(report) => {
            let to_stdout = json.as_deref() == Some(Path::new("-"));
            if let Some(path) = json.as_deref().filter(|_| !to_stdout) {
                if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
                    eprintln!("error[io]: cannot write {}: {e}", path.display());
                    return ExitCode::from(exit::INPUT as u8);
                }
            }
            if to_stdout {
                println!("{}", report.to_json());
            } else {
                print!("{}", render(&report));
            }
            if report.all_checks_passed() {
                ExitCode::from(exit::OK as u8)
            } else {
                ExitCode::from(exit::VERIFICATION_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
