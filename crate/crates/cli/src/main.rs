//! `rosarch`: scan, recover, evaluate and render ROS 2 architecture models.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rosarch_core::eval::{format_decimal, EvalError, EvalReport};
use rosarch_core::extract::ScanError;
use rosarch_core::pipeline::{run_evaluate, run_recover, run_scan, JobConfig, Mode, PipelineError};
use rosarch_core::synthesis::{HttpChatClient, LlmClient, ReplayClient};

#[derive(Parser)]
#[command(name = "rosarch", version, about = "Architecture recovery for ROS 2 repositories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect node classes and endpoints; writes scan.json.
    Scan(ScanArgs),
    /// Scan, then write component and system diagrams.
    Recover(RecoverArgs),
    /// Score generated diagrams against references.
    Evaluate(EvaluateArgs),
    /// Render diagrams to PNG with an external PlantUML renderer.
    Render(RenderArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML job configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Job directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Repository root.
    repo: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
    /// Source glob to include (repeatable). Replaces the default set.
    #[arg(long)]
    include: Vec<String>,
    /// Source glob to exclude (repeatable). Added to the configured set.
    #[arg(long)]
    exclude: Vec<String>,
    /// Maximum inheritance edges between a class and a node base.
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Deterministic,
    Llm,
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    scan: ScanArgs,
    /// Skip launch files; only component diagrams are written.
    #[arg(long)]
    no_launch: bool,
    /// Launch file (relative to the repository) to emit a system diagram for.
    #[arg(long = "launch-root")]
    launch_roots: Vec<String>,
    /// Launch argument override, `name=value`.
    #[arg(long = "arg", value_parser = key_value)]
    launch_args: Vec<(String, String)>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Chat completions URL.
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Answer synthesis requests from recorded transcripts in this directory.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    max_retries: Option<usize>,
    /// Parallel synthesis requests.
    #[arg(long)]
    concurrency: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of generated diagrams, usually a job directory.
    generated: PathBuf,
    /// Directory of reference diagrams with the same layout.
    reference: PathBuf,
    /// Where report.json and report.md go. Defaults to the generated directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Score unpaired models against an empty set instead of failing.
    #[arg(long)]
    missing_as_empty: bool,
    /// Also score publisher/subscriber connections.
    #[arg(long)]
    connectivity: bool,
    /// Explicit pairing `generated_key=reference_key`, e.g. `system/a=system/b`.
    #[arg(long = "pair", value_parser = key_value)]
    pairs: Vec<(String, String)>,
}

#[derive(Args)]
struct RenderArgs {
    /// Directory searched recursively for `.puml` files.
    dir: PathBuf,
    /// Renderer command; defaults to $ROSARCH_PLANTUML, then `plantuml`.
    #[arg(long)]
    renderer: Option<String>,
    /// Re-render files whose PNG is up to date.
    #[arg(long)]
    force: bool,
}

fn key_value(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected name=value, got `{s}`")),
    }
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Scan(ScanError::MissingRoot(_) | ScanError::Glob { .. }) => 2,
            PipelineError::NoOutputs => 3,
            PipelineError::Eval(EvalError::Unpaired { .. } | EvalError::Empty(_)) => 4,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<JobConfig, Failure> {
    let Some(path) = path else { return Ok(JobConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn apply_scan(args: &ScanArgs, config: &mut JobConfig) {
    if let Some(repo) = &args.repo {
        config.repo_root = repo.clone();
    }
    if let Some(out) = &args.common.out {
        config.output_dir = out.clone();
    }
    if !args.include.is_empty() {
        config.scan.include = args.include.clone();
    }
    config.scan.exclude.extend(args.exclude.iter().cloned());
    if let Some(d) = args.max_depth {
        config.scan.max_inheritance_depth = d;
    }
}

fn apply_recover(args: &RecoverArgs, config: &mut JobConfig) {
    apply_scan(&args.scan, config);
    if args.no_launch {
        config.launch.enabled = false;
    }
    if !args.launch_roots.is_empty() {
        config.launch.roots = args.launch_roots.clone();
    }
    config.launch.resolve.launch_args.extend(args.launch_args.iter().cloned());
    if let Some(m) = args.mode {
        config.mode = match m {
            ModeArg::Deterministic => Mode::Deterministic,
            ModeArg::Llm => Mode::Llm,
        };
    }
    if let Some(e) = &args.llm_endpoint {
        config.llm.endpoint = Some(e.clone());
    }
    if let Some(m) = &args.llm_model {
        config.llm.model = m.clone();
    }
    if let Some(r) = &args.replay {
        config.llm.replay_dir = Some(r.display().to_string());
    }
    if let Some(n) = args.max_retries {
        config.llm.max_retries = n;
    }
    if let Some(n) = args.concurrency {
        config.llm.max_concurrency = n;
    }
}

/// Records the effective configuration in the job directory.
fn write_job_file(config: &JobConfig) -> Result<(), Failure> {
    let text = toml::to_string_pretty(config).map_err(|e| Failure::new(1, format!("job.toml: {e}")))?;
    let path = config.output_dir.join("job.toml");
    std::fs::create_dir_all(&config.output_dir)
        .and_then(|_| std::fs::write(&path, text))
        .map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn scan(args: ScanArgs) -> Result<(), Failure> {
    let mut config = load_config(args.common.config.as_deref())?;
    apply_scan(&args, &mut config);
    let scan = run_scan(&config).map_err(|e| match e {
        PipelineError::Io { .. } => Failure::new(2, e.to_string()),
        e => e.into(),
    })?;
    write_job_file(&config)?;
    print_warnings(&scan.warnings);
    println!(
        "{} node classes; wrote {}",
        scan.nodes.len(),
        config.output_dir.join("scan.json").display()
    );
    Ok(())
}

fn llm_client(config: &JobConfig) -> Result<Option<Box<dyn LlmClient>>, Failure> {
    if config.mode != Mode::Llm {
        return Ok(None);
    }
    if let Some(dir) = &config.llm.replay_dir {
        let client = ReplayClient::from_dir(Path::new(dir)).map_err(|e| Failure::new(1, e))?;
        return Ok(Some(Box::new(client)));
    }
    let Some(endpoint) = &config.llm.endpoint else {
        return Err(PipelineError::LlmNotConfigured.into());
    };
    let token = std::env::var(&config.llm.token_env).ok();
    let client = HttpChatClient::new(endpoint.clone(), token, Duration::from_secs(config.llm.timeout_secs))
        .map_err(|e| Failure::new(1, e.to_string()))?;
    Ok(Some(Box::new(client)))
}

fn recover(args: RecoverArgs) -> Result<(), Failure> {
    let mut config = load_config(args.scan.common.config.as_deref())?;
    apply_recover(&args, &mut config);
    let client = llm_client(&config)?;
    write_job_file(&config)?;
    let outcome = run_recover(&config, client.as_deref())?;
    print_warnings(&outcome.warnings);
    for f in &outcome.fallbacks {
        eprintln!("fallback: {f} uses the deterministic diagram");
    }
    println!(
        "{} component and {} system diagrams in {}",
        outcome.components.len(),
        outcome.systems.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn summary(report: &EvalReport) {
    for (level, s) in &report.averages {
        println!(
            "{} average: P={} R={} F1={}",
            level.as_str(),
            format_decimal(s.precision, 2),
            format_decimal(s.recall, 2),
            format_decimal(s.f1, 2)
        );
    }
}

fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref())?;
    if args.missing_as_empty {
        config.report.missing_as_empty = true;
    }
    if args.connectivity {
        config.report.connectivity = true;
    }
    config.report.pairs.extend(args.pairs.iter().cloned());
    let out = args.out.clone().unwrap_or_else(|| args.generated.clone());
    let report = run_evaluate(&args.generated, &args.reference, &out, &config)?;
    summary(&report);
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan(a) => scan(a),
        Command::Recover(a) => recover(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Render(a) => render::render(&a.dir, a.renderer.as_deref(), a.force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
