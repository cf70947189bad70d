use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use mmsa::error::{AppError, Result};
use mmsa::formats::load_model;
use mmsa::ops::{self, Context};
use mmsa::service::{self, AppState};
use mmsa::session::{SchemeField, Session};
use mmsa_core::covariation::Scheme;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "mmsa", version, about = "Sensitivity analysis for monomial models")]
struct Cli {
    /// Model file (Bayesian network, staged tree, classifier or raw monomial model)
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Variation {
    /// `key=value`; the key is a parameter label, alias or 0-based index. Repeatable.
    #[arg(long = "vary", value_name = "KEY=VALUE")]
    vary: Vec<String>,

    #[arg(long, default_value = "proportional")]
    scheme: Scheme,

    /// `key=scheme`: scheme for the block holding parameter `key`. Repeatable.
    #[arg(long = "block-scheme", value_name = "KEY=SCHEME")]
    block_scheme: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check parameters, multilinearity and regularity; exit 1 on any problem
    Validate,
    /// Print the compiled monomial model
    Compile,
    /// Probability of an event, optionally after a variation
    Prob {
        #[arg(long)]
        event: String,
        #[command(flatten)]
        variation: Variation,
    },
    /// Apply a covariation scheme
    Covary {
        #[command(flatten)]
        variation: Variation,
    },
    /// Sensitivity curves of an event
    Sensitivity {
        /// Parameter key; give once or twice.
        #[arg(long = "vary", required = true)]
        vary: Vec<String>,
        #[arg(long)]
        event: String,
        #[arg(long, value_delimiter = ',', default_value = "proportional,uniform,order_preserving")]
        schemes: Vec<Scheme>,
        /// Grid resolution; defaults to MMSA_GRID_DEFAULT or 99
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Divergences between the model and a varied or given parameter vector
    Divergence {
        #[command(flatten)]
        variation: Variation,
        /// Comparison parameter vector, comma separated
        #[arg(long, value_delimiter = ',')]
        theta_b: Option<Vec<f64>>,
        /// kl, cd or phi:<name>
        #[arg(long, value_delimiter = ',', default_value = "kl,cd")]
        metrics: Vec<String>,
    },
    /// Classify a multi-parameter analysis and test the Pythagorean identity
    Analyze {
        #[arg(long = "vary", value_name = "KEY=VALUE", required = true)]
        vary: Vec<String>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail when the oracle search space is too large
        #[arg(long, conflicts_with = "no_oracle")]
        oracle: bool,
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        grid: Option<usize>,
        /// Add a proportional sensitivity curve for this event
        #[arg(long)]
        event: Option<String>,
    },
    /// Grid search for the I-projection onto the sensitivity slice
    Project {
        #[arg(long = "vary", value_name = "KEY=VALUE", required = true)]
        vary: Vec<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of model files that uploads may name
        #[arg(long)]
        model_dir: Option<PathBuf>,
    },
}

fn parse_pairs(items: &[String]) -> Result<BTreeMap<String, String>> {
    items
        .iter()
        .map(|item| {
            item.rsplit_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| AppError::invalid("MalformedVary", format!("`{item}` is not KEY=VALUE")))
        })
        .collect()
}

fn parse_targets(items: &[String]) -> Result<BTreeMap<String, f64>> {
    parse_pairs(items)?
        .into_iter()
        .map(|(k, v)| {
            let x = v
                .parse()
                .map_err(|_| AppError::invalid("MalformedVary", format!("`{v}` is not a number")))?;
            Ok((k, x))
        })
        .collect()
}

impl Variation {
    fn targets(&self) -> Result<BTreeMap<String, f64>> {
        parse_targets(&self.vary)
    }

    fn scheme(&self) -> Result<SchemeField> {
        if self.block_scheme.is_empty() {
            return Ok(SchemeField::Single(self.scheme));
        }
        let mut map = BTreeMap::from([("default".to_string(), self.scheme)]);
        for (k, v) in parse_pairs(&self.block_scheme)? {
            let s = v.parse().map_err(|e: String| AppError::invalid("UnknownScheme", e))?;
            map.insert(k, s);
        }
        Ok(SchemeField::PerBlock(map))
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn session(path: &Option<PathBuf>) -> Result<Session> {
    let path = path
        .as_ref()
        .ok_or_else(|| AppError::invalid("NoModel", "--model <path> is required"))?;
    load_model(path)
}

/// Runs one command; returns the text to print and whether it succeeded.
fn execute(cli: &Cli, ctx: &Context) -> Result<(String, bool)> {
    let csv = cli.format == Format::Csv;
    let text = match &cli.command {
        Command::Validate => {
            let path = cli
                .model
                .as_ref()
                .ok_or_else(|| AppError::invalid("NoModel", "--model <path> is required"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::invalid("Io", format!("{}: {e}", path.display())))?;
            let outcome = match serde_json::from_str(&text) {
                Ok(value) => ops::validate(&value),
                Err(e) => {
                    let e = AppError::from(e);
                    ops::ValidationOutcome {
                        clean: false,
                        source: None,
                        problems: vec![ops::Problem { code: e.code, message: e.message }],
                        multilinear: None,
                        regular_strict: None,
                        regular_weak: None,
                    }
                }
            };
            let out = if csv {
                mmsa::csv::table(
                    &["code", "message"],
                    outcome
                        .problems
                        .iter()
                        .map(|p| vec![p.code.to_string(), p.message.to_string()]),
                )
            } else {
                json(&outcome)?
            };
            return Ok((out, outcome.clean));
        }
        Command::Compile => {
            let s = session(&cli.model)?;
            if csv {
                ops::compile_csv(&s)
            } else {
                json(&ops::compile(&s))?
            }
        }
        Command::Prob { event, variation } => {
            let s = session(&cli.model)?;
            let req = ops::ProbRequest { event: event.clone(), vary: variation.targets()?, scheme: variation.scheme()? };
            let r = ops::prob(&s, &req)?;
            if csv { ops::prob_csv(&r) } else { json(&r)? }
        }
        Command::Covary { variation } => {
            let s = session(&cli.model)?;
            let req = ops::VaryRequest { vary: variation.targets()?, scheme: variation.scheme()? };
            let r = ops::covary(&s, &req)?;
            if csv { ops::covary_csv(&r) } else { json(&r)? }
        }
        Command::Sensitivity { vary, event, schemes, grid } => {
            let s = session(&cli.model)?;
            let req = ops::SensitivityRequest {
                vary: vary.clone(),
                event: event.clone(),
                schemes: schemes.clone(),
                grid: *grid,
            };
            let r = ops::sensitivity(&s, &req, ctx)?;
            if csv { ops::sensitivity_csv(&r) } else { json(&r)? }
        }
        Command::Divergence { variation, theta_b, metrics } => {
            let s = session(&cli.model)?;
            let req = ops::DivergenceRequest {
                metrics: metrics.clone(),
                theta_a: None,
                theta_b: theta_b.clone(),
                vary: variation.targets()?,
                scheme: variation.scheme()?,
            };
            let r = ops::divergence(&s, &req, ctx)?;
            if csv { ops::divergence_csv(&r) } else { json(&r)? }
        }
        Command::Analyze { vary, samples, seed, oracle, no_oracle, grid, event } => {
            if csv {
                return Err(ops::csv_unavailable("analyze"));
            }
            let s = session(&cli.model)?;
            let req = ops::AnalyzeRequest {
                vary: parse_targets(vary)?,
                samples: *samples,
                seed: *seed,
                oracle: if *oracle { Some(true) } else if *no_oracle { Some(false) } else { None },
                grid: *grid,
                event: event.clone(),
            };
            let r = ops::analyze(&s, &req, ctx)?;
            eprintln!("{}", r.verdict());
            json(&r)?
        }
        Command::Project { vary, grid } => {
            if csv {
                return Err(ops::csv_unavailable("project"));
            }
            let s = session(&cli.model)?;
            let req = ops::ProjectRequest { vary: parse_targets(vary)?, grid: *grid };
            json(&ops::project(&s, &req, ctx)?)?
        }
        Command::Serve { .. } => unreachable!("serve is handled before execute"),
    };
    Ok((text, true))
}

fn serve(cli: &Cli, ctx: Context, port: u16, model_dir: Option<PathBuf>) -> Result<()> {
    let initial = match &cli.model {
        Some(_) => Some(session(&cli.model)?),
        None => None,
    };
    let state = Arc::new(AppState::new(ctx, initial, model_dir));
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| AppError::invalid("Io", e.to_string()))?;
    runtime
        .block_on(service::serve(state, port))
        .map_err(|e| AppError::invalid("Io", e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match Context::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Serve { port, model_dir } = &cli.command {
        return match serve(&cli, ctx, *port, model_dir.clone()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    match execute(&cli, &ctx) {
        Ok((text, ok)) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: Io: {e}");
                return ExitCode::FAILURE;
            }
            if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
