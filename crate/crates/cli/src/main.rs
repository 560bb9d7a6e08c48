//! `pcr`: synthesis, draft/critique/revise inference, RL batch generation,
//! toy GRPO checks and evaluation from one JSON config.

mod rundir;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pcr_core::grpo::{gradient_check, toy_train, ToyObjective, ToyTrainConfig};
use pcr_core::metrics::evaluate_run;
use pcr_core::seed::{derive_seed, stream};
use pcr_core::structio::PromptSet;
use pcr_core::{BackendSpec, DraftStyle, Report, RoundSelector, Sample};
use pcr_engine::io::{load_dataset, write_json};
use pcr_engine::{
    build_backend, execute_plan, load_drafts, mutual_refinement_schedule, synthesize, Pipeline, PipelineError,
};
use serde_json::json;

use rundir::{Manifest, RunDir};
use settings::Settings;

const CHECK_SEEDS: u64 = 20;
const CHECK_H: f64 = 1e-5;
const CHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "pcr", version, about = "Proposal/critic reasoning pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Revision rounds for `dcr`; the round to score for `eval`.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Drafting prompt.
    #[arg(long, global = true, value_enum)]
    template: Option<Template>,
    /// Config override on a dotted path, e.g. `--set decode.proposal.temperature=0.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Template {
    Dynamic,
    Fixed,
    Generic,
}

impl From<Template> for DraftStyle {
    fn from(t: Template) -> Self {
        match t {
            Template::Dynamic => DraftStyle::Dynamic,
            Template::Fixed => DraftStyle::Fixed,
            Template::Generic => DraftStyle::Generic,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the SFT corpora: flattened correct trajectories and revision triples.
    Synthesize,
    /// Drafts only.
    Draft,
    /// Draft, then critique/revise for `--rounds` rounds.
    Dcr,
    /// Reward-annotated draft and revision groups for proposal RL.
    RlBatchProposal,
    /// Reward-annotated critique groups for critic RL.
    RlBatchCritic,
    /// Plan and run the alternating critic/proposal stages.
    Schedule,
    /// Analytic vs finite-difference gradient of the toy dual-stage loss.
    ToyGrpoCheck,
    /// Train the toy policy and write a CSV trace.
    ToyGrpoTrain,
    /// Metrics over a DCR results file.
    Eval {
        /// Results JSONL, one DCR record per line.
        results: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Draft => "draft",
            Command::Dcr => "dcr",
            Command::RlBatchProposal => "rl-batch-proposal",
            Command::RlBatchCritic => "rl-batch-critic",
            Command::Schedule => "schedule",
            Command::ToyGrpoCheck => "toy-grpo-check",
            Command::ToyGrpoTrain => "toy-grpo-train",
            Command::Eval { .. } => "eval",
        }
    }

    /// Commands that talk to models and read a dataset.
    fn uses_models(&self) -> bool {
        !matches!(self, Command::ToyGrpoCheck | Command::ToyGrpoTrain | Command::Eval { .. })
    }

    fn uses_drafts(&self) -> bool {
        matches!(self, Command::RlBatchCritic | Command::Schedule)
    }
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => format!("{e:#}"),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

trait Classify<T> {
    fn usage(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Configuration problems exit 1, everything else 2.
fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::MissingEndpoint(_) | PipelineError::TooManyRounds { .. } | PipelineError::Render(_) => {
            Failure::Usage(e.into())
        }
        _ => Failure::Runtime(e.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome<ExitCode> {
    let name = cli.command.name();
    if cli.command.uses_models() && cli.config.is_none() {
        return Err(Failure::Usage(anyhow!("`{name}` needs --config")));
    }
    let mut settings = settings::load(cli.config.as_deref(), &cli.set).usage()?;
    let cfg = &mut settings.cfg;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.template {
        cfg.draft_style = t.into();
    }
    if let (Some(r), Command::Dcr) = (cli.rounds, &cli.command) {
        cfg.revision_rounds = r;
    }
    cfg.validate().usage()?;

    let manifest = Manifest {
        command: name.into(),
        status: String::new(),
        started_at: String::new(),
        finished_at: None,
        config_path: settings.path.as_ref().map(|p| p.display().to_string()),
        config_hash: settings.hash(),
        overrides: cli.set.clone(),
        seeds: json!({ "root": settings.cfg.seed }),
        inputs: inputs(&settings, &cli.command),
        outputs: Vec::new(),
        error: None,
    };
    let mut run = RunDir::create(&cli.out, settings.cfg.seed, manifest).runtime()?;
    println!("run directory: {}", run.path().display());

    let result = dispatch(&cli, &settings, &mut run);
    let finished = match &result {
        Ok(true) => run.finish("ok", None),
        Ok(false) => run.finish("check_failed", None),
        Err(f) => run.finish("failed", Some(f.message())),
    };
    let passed = result?;
    finished.runtime()?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn inputs(settings: &Settings, command: &Command) -> Vec<String> {
    let cfg = &settings.cfg;
    let mut out: Vec<String> = settings.path.iter().map(|p| p.display().to_string()).collect();
    let mut add = |p: &str| out.push(settings.resolve(p).display().to_string());
    if command.uses_models() {
        if let Some(d) = &cfg.dataset {
            add(d);
        }
        if let Some(d) = &cfg.prompt_dir {
            add(d);
        }
        for spec in [&cfg.agents.proposal, &cfg.agents.critic, &cfg.agents.teacher].into_iter().flatten() {
            if let BackendSpec::Scripted { path: Some(p), .. } = spec {
                add(p);
            }
        }
    }
    if command.uses_drafts() {
        if let Some(d) = &cfg.draft_file {
            add(d);
        }
    }
    if let Command::Eval { results } = command {
        out.push(results.display().to_string());
    }
    out
}

/// `Ok(false)` when the command ran but its check did not pass.
fn dispatch(cli: &Cli, settings: &Settings, run: &mut RunDir) -> Outcome<bool> {
    let cfg = &settings.cfg;
    match &cli.command {
        Command::Synthesize => {
            let samples = samples(settings)?;
            let endpoint = |spec: &Option<BackendSpec>, role: &str| {
                let spec = spec.as_ref().ok_or_else(|| Failure::Usage(anyhow!("no {role} endpoint configured")))?;
                build_backend(spec, cfg.workers, Some(&settings.base_dir)).usage()
            };
            let teacher = endpoint(&cfg.agents.teacher, "teacher")?;
            let critic = endpoint(&cfg.agents.critic, "critic")?;
            let prompt_dir = cfg.prompt_dir.as_deref().map(|d| settings.resolve(d));
            let prompts = PromptSet::load(prompt_dir.as_deref()).usage()?;
            let summary =
                synthesize(&samples, teacher.as_ref(), critic.as_ref(), &prompts, cfg, run.path()).runtime()?;
            for p in &summary.outputs {
                run.add_output(file_name(p));
            }
            let s = &summary.stats;
            println!(
                "{} samples: {} correct trajectories, {} revision triples, {} discarded",
                s.samples,
                s.correct_flattened,
                s.triples,
                s.discards.values().sum::<u64>()
            );
        }
        Command::Draft | Command::Dcr => {
            let rounds = if matches!(cli.command, Command::Draft) { 0 } else { cfg.revision_rounds };
            let samples = samples(settings)?;
            let pipeline = Pipeline::from_config(cfg, Some(&settings.base_dir)).map_err(pipeline_failure)?;
            let path = run.file("results.jsonl");
            run.add_output("results.jsonl");
            let records = pipeline.run_dcr_file(&samples, rounds, &path).map_err(pipeline_failure)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                log::warn!("{failed} of {} samples recorded an error", records.len());
            }
            if samples.iter().all(|s| s.gold().is_some()) {
                let contents = std::fs::read_to_string(&path).runtime()?;
                let selector = if rounds == 0 { RoundSelector::Draft } else { RoundSelector::All };
                let report = evaluate_run(&contents, selector).runtime()?;
                write_report(run, &report)?;
            } else {
                println!("{} records written; dataset has unlabeled samples, no report", records.len());
            }
        }
        Command::RlBatchProposal => {
            let samples = samples(settings)?;
            let pipeline = Pipeline::from_config(cfg, Some(&settings.base_dir)).map_err(pipeline_failure)?;
            run.add_output("proposal_rl.jsonl");
            let batch = pipeline
                .generate_proposal_rl_batch(&samples, &run.file("proposal_rl.jsonl"))
                .map_err(pipeline_failure)?;
            write_batch_summary(run, &[("proposal_rl.jsonl", &batch.summary)])?;
        }
        Command::RlBatchCritic => {
            let samples = samples(settings)?;
            let drafts = drafts(settings)?;
            let pipeline = Pipeline::from_config(cfg, Some(&settings.base_dir)).map_err(pipeline_failure)?;
            run.add_output("critic_rl.jsonl");
            let summary = pipeline
                .generate_critic_rl_batch(&samples, drafts.as_ref(), &run.file("critic_rl.jsonl"))
                .map_err(pipeline_failure)?;
            write_batch_summary(run, &[("critic_rl.jsonl", &summary)])?;
        }
        Command::Schedule => {
            let plan = mutual_refinement_schedule(cfg).map_err(pipeline_failure)?;
            write_json(run.file("plan.json"), &plan).runtime()?;
            run.add_output("plan.json");
            let samples = samples(settings)?;
            let drafts = drafts(settings)?;
            let pipeline = Pipeline::from_config(cfg, Some(&settings.base_dir)).map_err(pipeline_failure)?;
            for stage in &plan.stages {
                run.add_output(stage.batch_file.clone());
            }
            let done =
                execute_plan(&plan, &pipeline, &samples, drafts.as_ref(), run.path()).map_err(pipeline_failure)?;
            let named: Vec<_> = plan.stages.iter().map(|s| s.batch_file.as_str()).zip(&done).collect();
            write_batch_summary(run, &named)?;
        }
        Command::ToyGrpoCheck => {
            let obj = ToyObjective { clip_eps: cfg.clip_epsilon, kl_beta: cfg.kl_beta_proposal, lambda: cfg.lambda };
            let seeds: Vec<u64> = (0..CHECK_SEEDS).map(|i| derive_seed(cfg.seed, "gradient-check", i)).collect();
            run.set_seeds(json!({ "root": cfg.seed, "gradient_check": seeds })).runtime()?;
            let errors = (0..CHECK_SEEDS)
                .map(|i| gradient_check(&mut stream(cfg.seed, "gradient-check", i), obj, CHECK_H))
                .collect::<Result<Vec<f64>, _>>()
                .runtime()?;
            let max = errors.iter().copied().fold(0.0, f64::max);
            let passed = max < CHECK_TOLERANCE;
            write_json(
                run.file("gradcheck.json"),
                &json!({ "h": CHECK_H, "tolerance": CHECK_TOLERANCE, "errors": errors, "max": max, "passed": passed }),
            )
            .runtime()?;
            run.add_output("gradcheck.json");
            println!("max relative gradient error: {max:.3e} over {CHECK_SEEDS} seeds (tolerance {CHECK_TOLERANCE:e})");
            if !passed {
                eprintln!("error: gradient check failed");
            }
            return Ok(passed);
        }
        Command::ToyGrpoTrain => {
            let tc = ToyTrainConfig::from_engine(cfg);
            let trace = toy_train(&tc, cfg.seed).usage()?;
            let path = run.file("trace.csv");
            let mut w = csv::Writer::from_path(&path).runtime()?;
            for row in &trace {
                w.serialize(row).runtime()?;
            }
            w.flush().runtime()?;
            run.add_output("trace.csv");
            if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
                println!(
                    "mean draft reward {:.4} -> {:.4}, mean revise reward {:.4} -> {:.4} over {} iterations",
                    first.mean_draft_reward,
                    last.mean_draft_reward,
                    first.mean_revise_reward,
                    last.mean_revise_reward,
                    last.iteration
                );
            }
        }
        Command::Eval { results } => {
            let contents =
                std::fs::read_to_string(results).with_context(|| format!("reading {}", results.display())).runtime()?;
            let selector = cli.rounds.map_or(RoundSelector::All, RoundSelector::Round);
            let report = evaluate_run(&contents, selector)
                .with_context(|| format!("evaluating {}", results.display()))
                .runtime()?;
            write_report(run, &report)?;
        }
    }
    Ok(true)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn samples(settings: &Settings) -> Outcome<Vec<Sample>> {
    let rel = settings.cfg.dataset.as_deref().ok_or_else(|| Failure::Usage(anyhow!("config has no dataset")))?;
    let path = settings.resolve(rel);
    let samples = load_dataset(&path).with_context(|| format!("loading dataset {}", path.display())).runtime()?;
    if samples.is_empty() {
        return Err(Failure::Runtime(anyhow!("dataset {} is empty", path.display())));
    }
    Ok(samples)
}

fn drafts(settings: &Settings) -> Outcome<Option<std::collections::HashMap<String, pcr_core::ReasoningOutput>>> {
    settings.cfg.draft_file.as_deref().map(|f| load_drafts(&settings.resolve(f))).transpose().map_err(pipeline_failure)
}

fn write_report(run: &mut RunDir, report: &Report) -> Outcome<()> {
    let table = report.to_table();
    std::fs::write(run.file("report.txt"), &table).runtime()?;
    std::fs::write(run.file("report.json"), format!("{}\n", report.to_json())).runtime()?;
    run.add_output("report.txt");
    run.add_output("report.json");
    print!("{table}");
    Ok(())
}

fn write_batch_summary(run: &mut RunDir, batches: &[(&str, &pcr_engine::BatchSummary)]) -> Outcome<()> {
    let rows: Vec<_> = batches
        .iter()
        .map(|(file, s)| {
            println!("{file}: {} samples, {} lines, {} skipped", s.samples, s.lines, s.skipped.len());
            json!({
                "file": file,
                "samples": s.samples,
                "lines": s.lines,
                "skipped": s.skipped.iter().map(|(id, why)| json!({"id": id, "reason": why})).collect::<Vec<_>>(),
            })
        })
        .collect();
    write_json(run.file("summary.json"), &rows).runtime()?;
    run.add_output("summary.json");
    Ok(())
}
