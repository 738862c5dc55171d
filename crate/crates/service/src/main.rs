use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use marginalia_core::export::{
    agreement_csv, consistency_csv, export_annotated, export_records, render_page,
};
use marginalia_core::lint::lint_rubric_with;
use marginalia_core::model::{AssignmentId, EssayId, ReviewerId, RunId, Verdict};
use marginalia_core::pipeline::PipelineMode;
use marginalia_core::records::Corpus;
use marginalia_core::review::{ActionKind, Rater, ReviewAction, RunStatus, Store};
use marginalia_service::runner::{enqueue, execute};
use marginalia_service::{ops, AppState, Config, DefaultFactory, GatewayFactory, ProviderKind, RunRequest};

#[derive(Parser)]
#[command(name = "marginalia", version, about = "Rubric-based essay feedback: batch CLI and review API")]
struct Cli {
    /// Config file (defaults to ./marginalia.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Event log to use instead of the configured storage_path.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load rubrics, assignments and essays from JSONL files into the store.
    Ingest { files: Vec<PathBuf> },
    /// Check the rubrics in JSONL files without storing anything.
    Lint {
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 when any warning is raised.
        #[arg(long)]
        strict: bool,
    },
    /// Generate feedback for an assignment and store the results.
    Run(RunArgs),
    /// Annotated view of one essay.
    Export {
        #[arg(long)]
        essay: String,
        #[arg(long, value_enum, default_value_t = ExportFormat::Html)]
        format: ExportFormat,
        /// Use this run's comments instead of the latest.
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record a review action on a generated comment.
    Review {
        #[arg(long)]
        comment: String,
        #[arg(long)]
        reviewer: String,
        /// accept_ai, accept_historic, edit, flip_judgment or dismiss
        #[arg(long, value_parser = parse_action)]
        action: ActionKind,
        #[arg(long)]
        text: Option<String>,
        /// met or missed
        #[arg(long, value_parser = parse_verdict)]
        verdict: Option<Verdict>,
    },
    /// Agreement and consistency reports.
    #[command(subcommand)]
    Report(Report),
    /// Start the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    assignment: String,
    /// Essays to grade; all essays of the assignment when omitted.
    #[arg(long = "essay")]
    essays: Vec<String>,
    #[arg(long, value_enum, default_value_t = ProviderKind::Mock)]
    provider: ProviderKind,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PipelineMode>,
    #[arg(long)]
    run_id: Option<String>,
    /// Write the run's records (JSONL) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Report {
    /// Cohen's kappa between two raters ("AI" or a reviewer id).
    Agreement {
        #[arg(long)]
        assignment: String,
        #[arg(long, default_value = "AI")]
        rater_a: String,
        #[arg(long)]
        rater_b: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// How one reviewer dispositioned each rubric.
    Consistency {
        #[arg(long)]
        assignment: String,
        #[arg(long)]
        reviewer: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Html,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    PipelineMode::parse(s).ok_or_else(|| format!("expected full_ai or judgment_plus_historic, got {s}"))
}

fn parse_action(s: &str) -> Result<ActionKind, String> {
    serde_json::from_value(s.into()).map_err(|_| format!("unknown action {s}"))
}

fn parse_verdict(s: &str) -> Result<Verdict, String> {
    serde_json::from_value(s.into()).map_err(|_| format!("expected met or missed, got {s}"))
}

fn emit(out: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn read_corpus(files: &[PathBuf]) -> anyhow::Result<Corpus> {
    if files.is_empty() {
        bail!("no input files given");
    }
    let mut corpus = Corpus::default();
    for f in files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let part = Corpus::parse(&text).with_context(|| format!("in {}", f.display()))?;
        corpus.rubrics.extend(part.rubrics);
        corpus.assignments.extend(part.assignments);
        corpus.essays.extend(part.essays);
    }
    Ok(corpus)
}

fn open_store(config: &Config) -> anyhow::Result<Store> {
    let store = Store::open(&config.storage_path)
        .with_context(|| format!("opening store {}", config.storage_path.display()))?;
    Ok(store.with_lint_config(config.lint.clone()))
}

fn run(config: &Config, args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut store = open_store(config)?;
    let assignment = AssignmentId::from(args.assignment.as_str());
    let essay_ids: Vec<EssayId> = if args.essays.is_empty() {
        store
            .essays()
            .filter(|e| e.assignment_id == assignment)
            .map(|e| e.id.clone())
            .collect()
    } else {
        args.essays.iter().map(|e| EssayId::from(e.as_str())).collect()
    };
    let mut pipeline = config.pipeline.clone();
    if let Some(mode) = args.mode {
        pipeline.mode = mode;
    }
    let run_id = RunId::from(args.run_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string()));
    let factory = DefaultFactory::new(config)?;
    factory.check(args.provider).map_err(anyhow::Error::msg)?;

    let request = RunRequest {
        assignment_id: assignment,
        essay_ids,
        config: Some(pipeline),
        provider: args.provider,
    };
    let job = enqueue(&mut store, request, &config.pipeline, run_id.clone())?;
    store.set_run_status(&run_id, RunStatus::Running, None)?;
    let gateway = match factory.build(args.provider) {
        Ok(g) => g,
        Err(e) => {
            store.set_run_status(&run_id, RunStatus::Failed, Some(e.clone()))?;
            bail!(e);
        }
    };
    let output = execute(&job, gateway, config.execution);
    let status = store.finish_run(output)?;

    let comments = store.comments_for_run(&run_id);
    let failures = store.failures_for_run(&run_id);
    eprintln!(
        "run {run_id}: {}, {} comments, {} failures",
        status.as_str(),
        comments.len(),
        failures.len()
    );
    for f in failures {
        eprintln!("  {}/{} failed at {}: {}", f.essay_id, f.rubric_id, f.step.as_str(), f.error);
    }
    if let Some(out) = &args.out {
        emit(Some(out), &export_records(&comments, failures))?;
    }
    Ok(if status == RunStatus::Failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn report(config: &Config, which: Report) -> anyhow::Result<()> {
    let store = open_store(config)?;
    match which {
        Report::Agreement {
            assignment,
            rater_a,
            rater_b,
            format,
            out,
        } => {
            let r = store.agreement(
                &assignment.as_str().into(),
                Rater::parse(&rater_a),
                Rater::parse(&rater_b),
            )?;
            let text = match format {
                ReportFormat::Csv => agreement_csv(&r),
                ReportFormat::Json => serde_json::to_string_pretty(&r)? + "\n",
            };
            emit(out.as_deref(), &text)
        }
        Report::Consistency {
            assignment,
            reviewer,
            format,
            out,
        } => {
            let r = store.consistency(&ReviewerId::from(reviewer.as_str()), &assignment.as_str().into())?;
            let text = match format {
                ReportFormat::Csv => consistency_csv(&r),
                ReportFormat::Json => serde_json::to_string_pretty(&r)? + "\n",
            };
            emit(out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let mut config = Config::discover(cli.config.as_deref())?;
    if let Some(store) = cli.store {
        config.storage_path = store;
    }

    match cli.command {
        Command::Ingest { files } => {
            let corpus = read_corpus(&files)?;
            let mut store = open_store(&config)?;
            let summary = ops::ingest(&mut store, corpus)?;
            for w in &summary.warnings {
                eprintln!("warning: {} {}: {}", w.rubric_id, w.dimension.as_str(), w.message);
            }
            eprintln!(
                "ingested {} rubrics, {} assignments, {} essays",
                summary.rubrics, summary.assignments, summary.essays
            );
        }
        Command::Lint { files, out, strict } => {
            let corpus = read_corpus(&files)?;
            let warnings: Vec<_> = corpus
                .rubrics
                .iter()
                .flat_map(|r| lint_rubric_with(r, &config.lint))
                .collect();
            let mut text = String::new();
            for w in &warnings {
                text.push_str(&serde_json::to_string(w)?);
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            eprintln!("{} rubrics checked, {} warnings", corpus.rubrics.len(), warnings.len());
            if strict && !warnings.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Run(args) => return run(&config, args),
        Command::Export {
            essay,
            format,
            run_id,
            out,
        } => {
            let store = open_store(&config)?;
            let essay = store
                .essay(&EssayId::from(essay.as_str()))
                .with_context(|| format!("unknown essay {essay}"))?;
            let run_id = run_id.map(|r| RunId::from(r.as_str()));
            let comments = store.essay_comments(&essay.id, run_id.as_ref());
            let rubrics = store.rubrics_for(&essay.assignment_id)?;
            let doc = export_annotated(essay, &comments, store.actions(), &rubrics);
            let text = match format {
                ExportFormat::Html => render_page(&doc, essay.id.as_str()),
                ExportFormat::Json => serde_json::to_string_pretty(&doc)? + "\n",
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Review {
            comment,
            reviewer,
            action,
            text,
            verdict,
        } => {
            let mut store = open_store(&config)?;
            let mut a = ReviewAction::new(comment.as_str().into(), reviewer.as_str().into(), action);
            a.final_text = text;
            a.final_verdict = verdict;
            let before = store.actions().len();
            let id = store.record_action(a)?;
            if store.actions().len() == before {
                eprintln!("unchanged: identical to action {id}");
            } else {
                eprintln!("recorded action {id}");
            }
        }
        Command::Report(which) => report(&config, which)?,
        Command::Serve { port } => {
            if let Some(p) = port {
                config.port = p;
            }
            let store = open_store(&config)?;
            let factory = Arc::new(DefaultFactory::new(&config)?);
            let state = AppState::new(store, config, factory);
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(marginalia_service::serve(state))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
