use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roteval::aggregation::Averaging;
use roteval::pipeline::{self, EndpointDescriptor, PipelineError, RunConfig};
use roteval::reliability::Selection;
use roteval::scoring::BoxFormat;

#[derive(Parser)]
#[command(
    version,
    about = "Rotation-consistent evaluation and reliability decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the four realized manifests and rotated image copies
    Rotate(Common),
    /// Query a chat-completion endpoint for every realized question
    Collect(Common),
    /// Score responses against the realized questions
    Score(Common),
    /// Reduce outcomes to RE, VE0, VE-bar and MA per category
    Aggregate(Common),
    /// Fit (theta, r, g) for every aggregated group
    Solve(Common),
    /// Emit report.csv and report.txt
    Report(Common),
    /// Cross-check the solver against the brute-force grid oracle
    Verify {
        #[command(flatten)]
        common: Common,
        /// Grid steps per axis
        #[arg(long, default_value_t = 500)]
        resolution: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override it
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    canvas: Option<f64>,
    /// corners, xywh or auto
    #[arg(long)]
    box_format: Option<BoxFormat>,
    /// Accept 3-decimal statistics and fall back to a least-squares fit
    #[arg(long)]
    reconcile: bool,
    /// macro or micro
    #[arg(long)]
    averaging: Option<Averaging>,
    /// max-theta or fail
    #[arg(long)]
    selection: Option<Selection>,
    #[arg(long)]
    endpoint_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API token
    #[arg(long)]
    auth_env: Option<String>,
    #[arg(long)]
    max_concurrent: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

impl Common {
    /// Stages after aggregation never read the manifest, so it may be absent.
    fn into_config(self, needs_manifest: bool) -> Result<RunConfig, PipelineError> {
        let mut cfg = match (&self.config, &self.manifest) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(m)) => RunConfig::new(m.clone(), "out"),
            (None, None) if !needs_manifest => RunConfig::new(PathBuf::new(), "out"),
            (None, None) => {
                return Err(PipelineError::Config(
                    "--manifest or --config is required".into(),
                ))
            }
        };
        if let Some(v) = self.manifest {
            cfg.manifest = v;
        }
        if let Some(v) = self.responses {
            cfg.responses = Some(v);
            cfg.endpoint = None;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.canvas {
            cfg.canvas = Some(v);
        }
        if let Some(v) = self.box_format {
            cfg.box_format = v;
        }
        if self.reconcile {
            cfg.reconcile = true;
        }
        if let Some(v) = self.averaging {
            cfg.averaging = v;
        }
        if let Some(v) = self.selection {
            cfg.selection = v;
        }
        if let Some(url) = self.endpoint_url {
            let model = self
                .model
                .clone()
                .or_else(|| cfg.endpoint.as_ref().map(|e| e.model.clone()))
                .ok_or_else(|| PipelineError::Config("--endpoint-url needs --model".into()))?;
            cfg.endpoint = Some(EndpointDescriptor::new(url, model));
            cfg.responses = None;
        }
        if let Some(ep) = cfg.endpoint.as_mut() {
            if let Some(v) = self.model {
                ep.model = v;
            }
            if let Some(v) = self.auth_env {
                ep.auth_env = Some(v);
            }
            if let Some(v) = self.max_concurrent {
                ep.max_concurrent = v;
            }
            if let Some(v) = self.retries {
                ep.retry_budget = v;
            }
            if let Some(v) = self.timeout_secs {
                ep.timeout_secs = v;
            }
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<ExitCode, PipelineError> {
    match command {
        Command::Rotate(c) => {
            let cfg = c.into_config(true)?;
            let s = pipeline::cmd_rotate(&cfg)?;
            println!(
                "realized {} question(s) x 4 orientations, {} image file(s) written",
                s.questions, s.images_written
            );
        }
        Command::Collect(c) => {
            let cfg = c.into_config(false)?;
            let s = pipeline::cmd_collect(&cfg, None)?;
            println!(
                "{} pending, {} already answered, {} written, {} request(s)",
                s.pending, s.skipped, s.written, s.requests
            );
            if !s.failures.is_empty() {
                eprintln!(
                    "{} item(s) failed; see {}",
                    s.failures.len(),
                    cfg.out(pipeline::files::FAILURES).display()
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::Score(c) => {
            let cfg = c.into_config(false)?;
            let s = pipeline::cmd_score(&cfg)?;
            println!(
                "scored {} answer(s): {} correct, {} unparsed, {} unanswered",
                s.scored, s.correct, s.unparsed, s.unanswered
            );
        }
        Command::Aggregate(c) => {
            let cfg = c.into_config(true)?;
            let s = pipeline::cmd_aggregate(&cfg)?;
            println!(
                "{} group row(s); {} incomplete question(s) excluded",
                s.rows.len(),
                s.excluded_incomplete
            );
        }
        Command::Solve(c) => {
            let cfg = c.into_config(false)?;
            for row in pipeline::cmd_solve(&cfg)? {
                let fmt = |f: fn(&roteval::reliability::ReliabilityParams) -> f64| {
                    pipeline::format_fraction(row.params.as_ref().map(f))
                };
                println!(
                    "{:<24} {:<14} theta {} r {} g {}",
                    row.group,
                    row.classification,
                    fmt(|p| p.theta),
                    fmt(|p| p.r),
                    fmt(|p| p.g)
                );
            }
        }
        Command::Report(c) => {
            let cfg = c.into_config(false)?;
            pipeline::cmd_report(&cfg)?;
            let text =
                std::fs::read_to_string(cfg.out(pipeline::files::REPORT_TXT)).unwrap_or_default();
            print!("{text}");
        }
        Command::Verify { common, resolution } => {
            let cfg = common.into_config(false)?;
            let rows = pipeline::cmd_verify(&cfg, resolution)?;
            let mut disagreements = 0;
            for r in &rows {
                let verdict = match r.agree {
                    Some(true) => "agree",
                    Some(false) => {
                        disagreements += 1;
                        "DISAGREE"
                    }
                    None => "skipped",
                };
                println!(
                    "{:<24} solver {:<14} oracle {:<14} {verdict}",
                    r.group,
                    r.solver
                        .map_or_else(|| "inconsistent".into(), |c| c.to_string()),
                    format!("{:?}", r.oracle).to_lowercase()
                );
            }
            if disagreements > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
