//! Thin command-line front end over the library pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use specdiff::filter::OracleBackendConfig;
use specdiff::gen::TestMix;
use specdiff::harness::fleet_to_json;
use specdiff::mock::{spawn_fleet, FleetScenario};
use specdiff::pipeline::{
    cmd_annotate, cmd_facts, cmd_generate, cmd_replay, cmd_run, ClassifierChoice, FleetSource,
    OracleMode, PipelineError, RunSettings,
};

#[derive(Parser)]
#[command(name = "specdiff", version, about = "Specification-guided differential API testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct OracleArgs {
    /// Oracle mode: external | stub_false | stub_lookup:<file> | unavailable
    #[arg(long)]
    oracle_mode: Option<String>,
    /// Chat-completions base URL for the external oracle
    #[arg(long)]
    oracle_base_url: Option<String>,
    /// Model name for the external oracle
    #[arg(long)]
    oracle_model: Option<String>,
    /// Sampling temperature (0 keeps answers deterministic)
    #[arg(long)]
    oracle_temperature: Option<f64>,
    /// Environment variable holding the oracle API key (never logged)
    #[arg(long)]
    oracle_key_env: Option<String>,
}

#[derive(Args, Clone)]
struct FleetArgs {
    /// Fleet config file: JSON array of endpoints
    #[arg(long, conflicts_with = "scenario")]
    fleet: Option<PathBuf>,
    /// Mock-fleet scenario file to spawn for the run
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl FleetArgs {
    fn source(&self) -> Result<FleetSource, PipelineError> {
        match (&self.fleet, &self.scenario) {
            (Some(path), None) => Ok(FleetSource::File(path.clone())),
            (None, Some(path)) => Ok(FleetSource::Scenario(path.clone())),
            _ => Err(PipelineError::Config(
                "exactly one of --fleet or --scenario is required".to_string(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a spec's result fields with consistency policies
    Annotate {
        #[arg(long)]
        spec: PathBuf,
        /// Classifier: rule | oracle
        #[arg(long, default_value = "rule")]
        classifier: String,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract facts from the reference endpoint and print the store
    Facts {
        #[command(flatten)]
        fleet: FleetArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Write the fact store here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a request batch as JSON Lines
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Mix as invalid,valid,semantic
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Serialized fact store for semantic enrichment
        #[arg(long)]
        facts: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full pipeline and write reports
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        fleet: FleetArgs,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        report_dir: Option<PathBuf>,
        #[arg(long)]
        threshold_epochs: Option<u64>,
        #[arg(long)]
        timeout_ms: Option<u64>,
        #[arg(long)]
        skip_readiness: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-dispatch a logged round and re-run the filter
    Replay {
        #[arg(long)]
        roundlog: PathBuf,
        #[command(flatten)]
        fleet: FleetArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        report_dir: Option<PathBuf>,
        #[arg(long)]
        skip_readiness: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Spawn a standalone mock fleet and wait for Ctrl-C
    Mockfleet {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the endpoint list here as a fleet config
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Optional config file; CLI flags win over it, it wins over defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    mix: Option<String>,
    seed: Option<u64>,
    threshold_epochs: Option<u64>,
    timeout_ms: Option<u64>,
    oracle_mode: Option<String>,
    oracle_base_url: Option<String>,
    oracle_model: Option<String>,
    oracle_temperature: Option<f64>,
    oracle_key_env: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig, PipelineError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| PipelineError::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| PipelineError::Json {
                context: path.display().to_string(),
                message: e.to_string(),
            })
        }
    }
}

fn resolve_oracle(args: &OracleArgs, config: &FileConfig) -> Result<OracleMode, PipelineError> {
    let defaults = OracleBackendConfig::default();
    let backend = OracleBackendConfig {
        base_url: args
            .oracle_base_url
            .clone()
            .or_else(|| std::env::var("ORACLE_BASE_URL").ok())
            .or_else(|| config.oracle_base_url.clone())
            .unwrap_or(defaults.base_url),
        auth_env: args
            .oracle_key_env
            .clone()
            .or_else(|| config.oracle_key_env.clone())
            .unwrap_or(defaults.auth_env),
        model: args
            .oracle_model
            .clone()
            .or_else(|| std::env::var("ORACLE_MODEL").ok())
            .or_else(|| config.oracle_model.clone())
            .unwrap_or(defaults.model),
        temperature: args
            .oracle_temperature
            .or(config.oracle_temperature)
            .unwrap_or(defaults.temperature),
        timeout_ms: defaults.timeout_ms,
    };
    let mode_text = args
        .oracle_mode
        .clone()
        .or_else(|| std::env::var("ORACLE_MODE").ok())
        .or_else(|| config.oracle_mode.clone())
        .unwrap_or_else(|| "stub_false".to_string());
    OracleMode::parse(&mode_text, backend)
}

fn resolve_mix(flag: Option<&str>, config: &FileConfig) -> Result<TestMix, PipelineError> {
    let text = match flag {
        Some(text) => Some(text.to_string()),
        None => config.mix.clone(),
    };
    match text {
        None => Ok(TestMix::default()),
        Some(text) => TestMix::parse(&text)
            .ok_or_else(|| PipelineError::Config(format!("bad --mix {text:?}; expected a,b,c"))),
    }
}

fn run() -> Result<i32, PipelineError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Annotate { spec, classifier, oracle, config } => {
            let config = load_config(config.as_ref())?;
            let choice = match classifier.as_str() {
                "rule" => ClassifierChoice::Rule,
                "oracle" => {
                    let OracleMode::External(backend) = resolve_oracle(
                        &OracleArgs {
                            oracle_mode: Some("external".to_string()),
                            ..oracle.clone()
                        },
                        &config,
                    )?
                    else {
                        unreachable!("mode pinned to external")
                    };
                    ClassifierChoice::Oracle(backend)
                }
                other => {
                    return Err(PipelineError::Config(format!(
                        "unknown classifier {other:?}; expected rule or oracle"
                    )))
                }
            };
            let (path, summary) = cmd_annotate(&spec, choice)?;
            print!("{}", summary.render());
            println!("annotated spec written to {}", path.display());
            Ok(0)
        }
        Command::Facts { fleet, rules, spec, out } => {
            let loaded_spec = match &spec {
                Some(path) => Some(specdiff::pipeline::load_spec(path, None)?),
                None => None,
            };
            let (store, warnings) =
                cmd_facts(&fleet.source()?, rules.as_deref(), loaded_spec.as_ref())?;
            for warning in &warnings {
                eprintln!("warning: {warning}");
            }
            let rendered = serde_json::to_string_pretty(&store)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(&path, rendered + "\n")
                    .map_err(|source| PipelineError::Io { path, source })?,
                None => println!("{rendered}"),
            }
            Ok(0)
        }
        Command::Generate { spec, sidecar, mix, seed, facts, out, config } => {
            let config = load_config(config.as_ref())?;
            let mix = resolve_mix(mix.as_deref(), &config)?;
            let seed = seed.or(config.seed).unwrap_or(0);
            let (batch, jsonl) =
                cmd_generate(&spec, sidecar.as_deref(), mix, seed, facts.as_deref())?;
            for warning in &batch.warnings {
                eprintln!("warning: {warning}");
            }
            match out {
                Some(path) => std::fs::write(&path, jsonl)
                    .map_err(|source| PipelineError::Io { path, source })?,
                None => print!("{jsonl}"),
            }
            Ok(0)
        }
        Command::Run {
            spec,
            fleet,
            sidecar,
            rules,
            mix,
            seed,
            oracle,
            report_dir,
            threshold_epochs,
            timeout_ms,
            skip_readiness,
            config,
        } => {
            let config = load_config(config.as_ref())?;
            let settings = RunSettings {
                spec_path: spec,
                sidecar_path: sidecar,
                rules_path: rules,
                fleet: fleet.source()?,
                mix: resolve_mix(mix.as_deref(), &config)?,
                seed: seed.or(config.seed).unwrap_or(0),
                oracle: resolve_oracle(&oracle, &config)?,
                report_dir,
                threshold_epochs: threshold_epochs.or(config.threshold_epochs).unwrap_or(5),
                skip_readiness,
                timeout_ms: timeout_ms.or(config.timeout_ms),
            };
            let outcome = cmd_run(&settings)?;
            for warning in &outcome.report.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "{} requests, {} divergence groups, {} genuine findings",
                outcome.report.total_requests,
                outcome.report.divergence_groups,
                outcome.report.findings.len()
            );
            for path in &outcome.report_paths {
                println!("wrote {}", path.display());
            }
            if outcome.report_paths.is_empty() {
                print!("{}", outcome.report_markdown);
            }
            Ok(outcome.exit_code)
        }
        Command::Replay {
            roundlog,
            fleet,
            spec,
            sidecar,
            oracle,
            report_dir,
            skip_readiness,
            config,
        } => {
            let config = load_config(config.as_ref())?;
            let mode = resolve_oracle(&oracle, &config)?;
            let outcome = cmd_replay(
                &roundlog,
                &fleet.source()?,
                &spec,
                sidecar.as_deref(),
                &mode,
                skip_readiness,
                report_dir.as_deref(),
            )?;
            for diff in &outcome.replay_diffs {
                eprintln!("replay diff: {diff}");
            }
            println!(
                "replayed {} requests, {} genuine findings",
                outcome.report.total_requests,
                outcome.report.findings.len()
            );
            Ok(outcome.exit_code)
        }
        Command::Mockfleet { scenario, out } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|source| PipelineError::Io { path: scenario.clone(), source })?;
            let scenario = FleetScenario::from_json(&text)?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .expect("tokio runtime builds");
            let handle = rt.block_on(spawn_fleet(&scenario))?;
            let rendered = fleet_to_json(&handle.endpoints);
            match out {
                Some(path) => std::fs::write(&path, &rendered)
                    .map_err(|source| PipelineError::Io { path, source })?,
                None => print!("{rendered}"),
            }
            eprintln!("mock fleet is up; press Ctrl-C to stop");
            rt.block_on(async {
                let _ = tokio::signal::ctrl_c().await;
            });
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
