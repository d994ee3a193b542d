//! Offline batch interface to the stakeweigh pipeline.
//!
//! [`run`] takes the argument vector and returns the exit code together with
//! everything that would be written to stdout and stderr, which keeps the
//! binary a thin shell and makes every subcommand testable in-process.
//!
//! Exit codes: 0 on success, 1 on domain errors and unreadable inputs, 2 on
//! usage errors.

pub mod input;
mod table;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use stakeweigh_core::consensus::{
    aggregate_aip, concordance, ranking_conflicts, Ranking, StakeholderWeight,
};
use stakeweigh_core::utility::{
    build_utility, MetricSample, PreferenceFunction, UtilityFunction, UtilityMode,
};
use stakeweigh_core::{
    canonical, consistency, principal_eigen, random_index, AttributeId, ComparisonMatrix,
    ConsistencyOptions, PriorityVector,
};

use input::{load, InputError, RankingEntry, VectorEntry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            stdout: String::new(),
            stderr: format!("error: {}\n", message.into()),
        }
    }
}

impl From<InputError> for Outcome {
    fn from(e: InputError) -> Self {
        Outcome::domain(e.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Canonical JSON: sorted keys, 12 significant digits.
    #[default]
    Json,
    /// Aligned text, 3 decimals.
    Table,
}

#[derive(Parser)]
#[command(
    name = "stakeweigh",
    version,
    about = "Quality-attribute prioritization toolkit"
)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal-eigenvector priorities of a comparison matrix.
    Priorities {
        matrix: PathBuf,
        /// Fail with exit code 1 when the consistency ratio exceeds 0.10.
        #[arg(long)]
        require_consistent: bool,
    },
    /// Consistency index, ratio and offending triples.
    Consistency {
        matrix: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        triple_threshold: f64,
        /// Random index to use instead of the built-in table.
        #[arg(long)]
        ri: Option<f64>,
    },
    /// Monte-Carlo random index for matrices of order n.
    Ri {
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Kendall's coefficient of concordance.
    Concordance {
        rankings: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
    },
    /// Attribute pairs ordered differently by different stakeholders.
    Conflicts { rankings: PathBuf },
    /// Weighted arithmetic mean of individual priorities.
    Aggregate { vectors: PathBuf, weights: PathBuf },
    /// Build, evaluate or export a utility function.
    #[command(subcommand)]
    Utility(UtilityCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    PreferenceNormalized,
    RawLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExportArg {
    CanonicalJson,
    Expression,
}

#[derive(Subcommand)]
enum UtilityCommand {
    /// Pairs priorities with per-attribute preference functions.
    Build {
        priorities: PathBuf,
        preferences: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::PreferenceNormalized)]
        mode: ModeArg,
    },
    /// Utility of one metric sample.
    Evaluate { utility: PathBuf, sample: PathBuf },
    /// Writes a utility document in one of the export forms.
    Export {
        utility: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportArg::CanonicalJson)]
        to: ExportArg,
    },
}

/// Runs one invocation. `args[0]` is the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Outcome::ok(text)
                }
                _ => Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    match execute(cli.command, cli.format) {
        Ok(outcome) | Err(outcome) => outcome,
    }
}

fn json_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = canonical::to_string(value).expect("output serializes");
    s.push('\n');
    s
}

fn emit<T: Serialize + ?Sized>(
    format: Format,
    value: &T,
    table: impl FnOnce() -> String,
) -> Outcome {
    Outcome::ok(match format {
        Format::Json => json_line(value),
        Format::Table => table(),
    })
}

fn execute(command: Command, format: Format) -> Result<Outcome, Outcome> {
    Ok(match command {
        Command::Priorities {
            matrix,
            require_consistent,
        } => {
            let m: ComparisonMatrix = load(&matrix)?;
            let (lambda_max, priorities) =
                principal_eigen(&m).map_err(|e| Outcome::domain(e.to_string()))?;
            let doc = json!({ "lambda_max": lambda_max, "priorities": priorities });
            let mut out = emit(format, &doc, || {
                table::priorities(&priorities, Some(lambda_max))
            });
            if require_consistent {
                let report = consistency(&m, &ConsistencyOptions::default())
                    .map_err(|e| Outcome::domain(e.to_string()))?;
                if !report.consistent {
                    out.code = 1;
                    out.stderr = format!(
                        "error: matrix is inconsistent: CR = {} exceeds {}\n",
                        canonical::format_f64(report.cr),
                        ConsistencyOptions::default().cr_limit
                    );
                }
            }
            out
        }
        Command::Consistency {
            matrix,
            triple_threshold,
            ri,
        } => {
            let m: ComparisonMatrix = load(&matrix)?;
            let mut options = ConsistencyOptions::default().with_triple_threshold(triple_threshold);
            if let Some(ri) = ri {
                options = options.with_random_index(ri);
            }
            let report = consistency(&m, &options).map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &report, || table::consistency(&m, &report))
        }
        Command::Ri { n, samples, seed } => {
            let ri = random_index(n, samples, seed).map_err(|e| Outcome::domain(e.to_string()))?;
            let doc = json!({ "n": n, "ri": ri, "samples": samples, "seed": seed });
            emit(format, &doc, || {
                format!("RI({n}) = {ri:.3}  ({samples} samples, seed {seed})\n")
            })
        }
        Command::Concordance {
            rankings,
            threshold,
        } => {
            let labeled = load_rankings(&rankings)?;
            let rankings: Vec<Ranking> = labeled.into_iter().map(|(_, r)| r).collect();
            let report =
                concordance(&rankings, threshold).map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &report, || table::concordance(&rankings, &report))
        }
        Command::Conflicts { rankings } => {
            let labeled = load_rankings(&rankings)?;
            let conflicts =
                ranking_conflicts(&labeled).map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &conflicts, || table::conflicts(&conflicts))
        }
        Command::Aggregate { vectors, weights } => {
            let entries: Vec<VectorEntry> = load(&vectors)?;
            let weights: Vec<StakeholderWeight> = load(&weights)?;
            let abstentions: Vec<_> = entries
                .iter()
                .flat_map(|e| {
                    e.abstentions
                        .iter()
                        .map(|a| (e.stakeholder_id.clone(), a.clone()))
                })
                .collect();
            let vectors: Vec<_> = entries
                .into_iter()
                .map(|e| (e.stakeholder_id, e.priorities))
                .collect();
            let aggregate = aggregate_aip(&vectors, &weights, &abstentions)
                .map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &aggregate, || table::priorities(&aggregate, None))
        }
        Command::Utility(UtilityCommand::Build {
            priorities,
            preferences,
            mode,
        }) => {
            let priorities: PriorityVector = load(&priorities)?;
            let preferences: BTreeMap<AttributeId, PreferenceFunction> = load(&preferences)?;
            let mode = match mode {
                ModeArg::PreferenceNormalized => UtilityMode::PreferenceNormalized,
                ModeArg::RawLinear => UtilityMode::RawLinear,
            };
            let u = build_utility(&priorities, &preferences, mode)
                .map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &u, || table::utility(&u))
        }
        Command::Utility(UtilityCommand::Evaluate { utility, sample }) => {
            let u: UtilityFunction = load(&utility)?;
            let sample: MetricSample = load(&sample)?;
            let value = u
                .evaluate(&sample)
                .map_err(|e| Outcome::domain(e.to_string()))?;
            emit(format, &json!({ "utility": value }), || {
                format!("U(m) = {value:.3}\n")
            })
        }
        Command::Utility(UtilityCommand::Export { utility, to }) => {
            let u: UtilityFunction = load(&utility)?;
            let mut text = match to {
                ExportArg::CanonicalJson => u.to_canonical_json(),
                ExportArg::Expression => u.to_expression(),
            };
            text.push('\n');
            Outcome::ok(text)
        }
    })
}

fn load_rankings(path: &std::path::Path) -> Result<Vec<(String, Ranking)>, Outcome> {
    let entries: Vec<RankingEntry> = load(path)?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let label = e.stakeholder.unwrap_or_else(|| format!("#{}", i + 1));
            Ranking::new(e.attribute_ids, e.ranks)
                .map(|r| (label, r))
                .map_err(|err| Outcome::domain(format!("{}: ranking [{i}]: {err}", path.display())))
        })
        .collect()
}
