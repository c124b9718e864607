//! The `cqw` command line. [`run`] returns the process exit code: 0 on
//! success, 1 on a domain error, 2 on a usage error.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::analysis::{build_report, StudyData};
use crate::corpus::{corpus_stats, load_corpus, load_ontology, Difficulty, Label};
use crate::difficulty::{classify_difficulty, CqFormalization};
use crate::harness::{
    aggregate_runs, baseline_row, predictions_from_results, random_baseline, read_run_file, render_table, score_run,
    write_run_file, TableRow,
};
use crate::judge::{
    backend_for, BackendKind, CompletionCache, Judge, JudgeOutcome, JudgeResult, ModelConfig,
};
use crate::sampler::{condense_corpus, sample_small, SamplingConstraints};
use crate::sparql::{verify_query, VerifyOptions};
use crate::study::{
    build_assignment_with_limit, freeze_suggestions, read_events, AppState, EventLog, Participant, StudyBundle,
    SuggestionCard, SystemClock, DEFAULT_CONDITION_LIMIT,
};

#[derive(Debug, Parser)]
#[command(name = "cqw", version, about = "Competency-question verification workbench")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `judge`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// TOML config file; flags win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BackendOpts {
    /// stub, replay or remote-http.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// Directory of recorded completions for the replay backend.
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    /// Persist completions under this directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "stub" => Ok(BackendKind::Stub),
        "replay" => Ok(BackendKind::Replay),
        "remote-http" | "remote_http" | "remote" => Ok(BackendKind::RemoteHttp),
        _ => Err(format!("unknown backend {s:?} (stub, replay, remote-http)")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a manifest, rate difficulty from formalizations, write it back.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus summary table.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Simple/Complex rating for a formalization or every record of a corpus.
    Classify {
        #[arg(long, conflicts_with = "formalization")]
        corpus: Option<PathBuf>,
        /// JSON: {"classes": [...], "slots": [[...], ...]}
        #[arg(long)]
        formalization: Option<String>,
    },
    /// Ask the LLM judge about every record and write a run file.
    Judge {
        #[arg(long)]
        corpus: PathBuf,
        /// Run file (JSON Lines). With --runs > 1, `.N` is inserted before the extension.
        #[arg(long)]
        out: PathBuf,
        /// Full results with suggestions (JSON), for `plan --results`.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        run_index: u32,
        #[arg(long, default_value_t = 1)]
        runs: u32,
        #[command(flatten)]
        backend: BackendOpts,
    },
    /// Parse, ground and optionally execute a SPARQL query against an ontology.
    Verify {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long, conflicts_with = "query_file")]
        query: Option<String>,
        #[arg(long)]
        query_file: Option<PathBuf>,
        #[arg(long)]
        no_exec: bool,
    },
    /// Score run files against gold labels.
    Score {
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        /// Small evaluation set; its accuracy fills the last column.
        #[arg(long)]
        small: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// Random-guess baseline, closed form and Monte Carlo.
    Baseline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        json: bool,
    },
    /// Draw a small balanced evaluation set.
    Sample {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Prior run file, needed for a correctness profile.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill in one-line story summaries.
    Condense {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendOpts,
    },
    /// Counterbalanced session plans, optionally packed into a study bundle.
    Plan {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON list of {"id": ..., "expertise": "expert" | "non_expert"}.
        #[arg(long, conflicts_with = "participant_count")]
        participants: Option<PathBuf>,
        #[arg(long)]
        participant_count: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CONDITION_LIMIT.as_secs_f64())]
        limit_secs: f64,
        /// Write plans.json here when no bundle is requested.
        #[arg(long, required_unless_present = "bundle")]
        out: Option<PathBuf>,
        /// Write a complete study bundle into this directory.
        #[arg(long, requires = "results")]
        bundle: Option<PathBuf>,
        /// Judge results (from `judge --results`) to freeze as suggestions.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Serve the study API for a bundle.
    Serve {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Event log; defaults to events.jsonl in the bundle.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Study statistics from an exported event log.
    Report {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Suggestion cards; defaults to suggestions.json next to the manifest.
        #[arg(long)]
        suggestions: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Optional TOML configuration.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub quiet: Option<bool>,
    pub model: Option<ModelConfig>,
    pub replay_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

struct Ctx {
    seed: u64,
    seed_given: bool,
    jobs: usize,
    quiet: bool,
    file: FileConfig,
}

impl Ctx {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn model_config(&self, b: &BackendOpts) -> Result<ModelConfig> {
        let mut cfg = self.file.model.clone().unwrap_or_default();
        if let Some(k) = b.backend {
            cfg.backend = k;
        }
        if let Some(m) = &b.model {
            cfg.model_name = m.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn judge(&self, b: &BackendOpts) -> Result<Judge> {
        let cfg = self.model_config(b)?;
        let replay = b.replay_dir.clone().or_else(|| self.file.replay_dir.clone());
        let backend = backend_for(&cfg, replay.as_deref())?;
        let cache = match b.cache_dir.clone().or_else(|| self.file.cache_dir.clone()) {
            Some(d) => CompletionCache::persistent(d),
            None => CompletionCache::new(),
        };
        Ok(Judge::new(cfg, backend).with_cache(Arc::new(cache)))
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file: FileConfig = match &cli.global.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.global.seed.or(file.seed).unwrap_or(0),
        seed_given: cli.global.seed.is_some() || file.seed.is_some(),
        jobs: cli.global.jobs.or(file.jobs).unwrap_or(4).max(1),
        quiet: cli.global.quiet || file.quiet.unwrap_or(false),
        file,
    };
    match cli.command {
        Command::Ingest { corpus, out } => ingest(&ctx, &corpus, out.as_deref()),
        Command::Stats { corpus, json } => {
            let c = load_corpus(&corpus)?;
            let s = corpus_stats(&c);
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                print!("{s}");
            }
            Ok(())
        }
        Command::Classify { corpus, formalization } => classify(corpus.as_deref(), formalization.as_deref()),
        Command::Judge { corpus, out, results, run_index, runs, backend } => {
            judge(&ctx, &corpus, &out, results.as_deref(), run_index, runs, &backend)
        }
        Command::Verify { ontology, query, query_file, no_exec } => {
            let text = match (query, query_file) {
                (Some(q), _) => q,
                (None, Some(f)) => std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?,
                (None, None) => bail!("give --query or --query-file"),
            };
            let o = load_ontology(&ontology)?;
            let v = verify_query(&text, &o, VerifyOptions { execute: !no_exec });
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(())
        }
        Command::Score { runs, corpus, small, model, json } => score(&corpus, &runs, small.as_deref(), &model, json),
        Command::Baseline { corpus, trials, json } => {
            let c = load_corpus(&corpus)?;
            let b = random_baseline(&c, trials, ctx.seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&b)?);
            } else {
                println!("n = {}, trials = {}, seed = {}", b.n, b.trials, b.seed);
                println!("closed-form macro-F1 = {:.4}", b.closed_form.macro_f1);
                println!("Monte Carlo macro-F1 = {:.4}", b.monte_carlo.macro_f1);
                println!("Monte Carlo accuracy = {:.4}", b.monte_carlo.accuracy);
            }
            Ok(())
        }
        Command::Sample { corpus, constraints, prior, out } => sample(&ctx, &corpus, constraints.as_deref(), prior.as_deref(), &out),
        Command::Condense { corpus, out, backend } => {
            let mut c = load_corpus(&corpus)?;
            let cfg = ctx.model_config(&backend)?;
            let replay = backend.replay_dir.clone().or_else(|| ctx.file.replay_dir.clone());
            let b = backend_for(&cfg, replay.as_deref())?;
            let n = condense_corpus(&mut c, &cfg, b.as_ref())?;
            c.write_manifest(&out)?;
            ctx.progress(format!("summarised {n} stories; wrote {}", out.display()));
            Ok(())
        }
        Command::Plan { corpus, participants, participant_count, limit_secs, out, bundle, results } => plan(
            &ctx,
            &corpus,
            participants.as_deref(),
            participant_count,
            limit_secs,
            out.as_deref(),
            bundle.as_deref(),
            results.as_deref(),
        ),
        Command::Serve { bundle, port, host, events } => serve(&ctx, &bundle, &host, port, events),
        Command::Report { events, corpus, suggestions, json } => report(&corpus, &events, suggestions, json.as_deref()),
    }
}

fn ingest(ctx: &Ctx, path: &Path, out: Option<&Path>) -> Result<()> {
    let mut c = load_corpus(path)?;
    let mut changed = 0;
    for r in &mut c.records {
        if let Some(f) = &r.formalization {
            let d = Difficulty::from(classify_difficulty(f));
            if r.difficulty != Difficulty::Unrated && r.difficulty != d {
                ctx.progress(format!("{}: annotated {:?}, formalization gives {:?}", r.id, r.difficulty, d));
            }
            if r.difficulty != d {
                r.difficulty = d;
                changed += 1;
            }
        }
    }
    println!(
        "{} records, {} ontologies; difficulty set from formalization on {changed}",
        c.len(),
        c.ontologies.len()
    );
    if let Some(out) = out {
        c.write_manifest(out)?;
        ctx.progress(format!("wrote {}", out.display()));
    }
    Ok(())
}

fn classify(corpus: Option<&Path>, formalization: Option<&str>) -> Result<()> {
    match (corpus, formalization) {
        (_, Some(json)) => {
            let f: CqFormalization = serde_json::from_str(json).context("parsing formalization")?;
            f.validate()?;
            println!("{:?}", classify_difficulty(&f));
        }
        (Some(p), None) => {
            let c = load_corpus(p)?;
            let (mut rated, mut agree) = (0, 0);
            for r in &c.records {
                let Some(f) = &r.formalization else { continue };
                let d = Difficulty::from(classify_difficulty(f));
                rated += 1;
                agree += (d == r.difficulty) as usize;
                println!("{}\t{:?}\t(annotated {:?})", r.id, d, r.difficulty);
            }
            println!("{rated} formalized records, {agree} agree with the annotation");
        }
        (None, None) => bail!("give --corpus or --formalization"),
    }
    Ok(())
}

fn run_path(out: &Path, run: u32, runs: u32) -> PathBuf {
    if runs <= 1 {
        return out.to_owned();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{run}"),
    };
    out.with_file_name(name)
}

fn judge(
    ctx: &Ctx,
    corpus: &Path,
    out: &Path,
    results_path: Option<&Path>,
    run_index: u32,
    runs: u32,
    backend: &BackendOpts,
) -> Result<()> {
    let c = load_corpus(corpus)?;
    let judge = ctx.judge(backend)?;
    let total = c.len();
    let mut all_results: Vec<JudgeResult> = Vec::new();
    for k in 0..runs.max(1) {
        if k > 0 {
            if let (BackendKind::RemoteHttp, Some(d)) = (judge.config.backend, judge.config.run_spacing()) {
                ctx.progress(format!("waiting {:.0}s before the next run", d.as_secs_f64()));
                std::thread::sleep(d);
            }
        }
        let run = run_index + k;
        let done = AtomicUsize::new(0);
        let results = judge.judge_corpus_with_progress(&c, run, ctx.jobs, |r| {
            let i = done.fetch_add(1, Ordering::Relaxed) + 1;
            if !ctx.quiet {
                let what = match &r.outcome {
                    JudgeOutcome::Suggestion(s) => s.label.to_string(),
                    JudgeOutcome::Failure(f) => format!("failure: {f}"),
                };
                let mut err = std::io::stderr().lock();
                let _ = writeln!(err, "[run {run}] {i}/{total} {} {what}", r.record_id);
            }
        });
        let path = run_path(out, run, runs);
        write_run_file(&path, &predictions_from_results(&results))?;
        let failures = results.iter().filter(|r| r.suggestion().is_none()).count();
        println!("run {run}: {total} records, {failures} failures; wrote {}", path.display());
        all_results.extend(results);
    }
    if let Some(p) = results_path {
        std::fs::write(p, serde_json::to_string_pretty(&all_results)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn score(corpus: &Path, runs: &[PathBuf], small: Option<&Path>, model: &str, json: bool) -> Result<()> {
    let c = load_corpus(corpus)?;
    let small_c = small.map(load_corpus).transpose()?;
    let mut full_reports = Vec::new();
    let mut small_reports = Vec::new();
    for p in runs {
        let preds = read_run_file(p)?;
        full_reports.push(score_run(&preds, &c)?);
        if let Some(s) = &small_c {
            small_reports.push(score_run(&preds, s)?);
        }
    }
    let full = aggregate_runs(&full_reports)?;
    let small_agg = if small_reports.is_empty() { None } else { Some(aggregate_runs(&small_reports)?) };
    if json {
        let v = serde_json::json!({"runs": full_reports, "aggregate": full, "small": small_agg});
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    if let [only] = full_reports.as_slice() {
        print!("{only}");
    } else {
        println!("runs = {}", full.runs);
        println!("macro-F1 = {}", full.macro_f1);
        println!("accuracy = {}", full.accuracy);
    }
    println!();
    let rows = vec![
        TableRow::from_aggregates(model, Some(&full), small_agg.as_ref()),
        baseline_row(&c, small_c.as_ref()),
    ];
    print!("{}", render_table(&rows));
    Ok(())
}

fn sample(ctx: &Ctx, corpus: &Path, constraints: Option<&Path>, prior: Option<&Path>, out: &Path) -> Result<()> {
    let c = load_corpus(corpus)?;
    let mut cons: SamplingConstraints = match constraints {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SamplingConstraints::default(),
    };
    if ctx.seed_given {
        cons.seed = ctx.seed;
    }
    let prior = prior.map(read_run_file).transpose()?;
    let outcome = sample_small(&c, &cons, prior.as_deref())?;
    outcome.corpus.write_manifest(out)?;
    let s = &outcome.summary;
    println!(
        "sampled {} records (seed {}): {} human-curated, {} LLM-generated, {} modelled, {} not modelled, {} projects, violation {:.3}",
        s.size,
        cons.seed,
        s.human_curated,
        s.llm_generated,
        s.modelled,
        s.not_modelled,
        s.projects.len(),
        s.violation
    );
    ctx.progress(format!("wrote {}", out.display()));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn plan(
    ctx: &Ctx,
    corpus: &Path,
    participants: Option<&Path>,
    count: Option<usize>,
    limit_secs: f64,
    out: Option<&Path>,
    bundle: Option<&Path>,
    results: Option<&Path>,
) -> Result<()> {
    let c = load_corpus(corpus)?;
    let people: Vec<Participant> = match (participants, count) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        (None, Some(n)) => (1..=n).map(|i| Participant::new(format!("p{i:02}"), Default::default())).collect(),
        (None, None) => bail!("give --participants or --participant-count"),
    };
    if !(limit_secs.is_finite() && limit_secs > 0.0) {
        bail!("--limit-secs must be positive");
    }
    let ids: Vec<String> = c.records.iter().map(|r| r.id.clone()).collect();
    let plans = build_assignment_with_limit(&people, &ids, ctx.seed, std::time::Duration::from_secs_f64(limit_secs))?;
    match bundle {
        Some(dir) => {
            let path = results.expect("clap enforces --results");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let res: Vec<JudgeResult> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            // One frozen card per record: the first run that produced one.
            let mut seen = std::collections::BTreeSet::new();
            let first: Vec<JudgeResult> = res
                .into_iter()
                .filter(|r| r.suggestion().is_some() && seen.insert(r.record_id.clone()))
                .collect();
            let cards = freeze_suggestions(&c, &first, VerifyOptions { execute: true });
            let b = StudyBundle::write(dir, &c, &cards, &plans)?;
            println!("bundle {}: {} records, {} suggestions, {} plans", dir.display(), b.corpus.len(), cards.len(), plans.len());
        }
        None => {
            let out = out.expect("clap enforces --out");
            std::fs::write(out, serde_json::to_string_pretty(&plans)? + "\n")
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} plans for {} records; wrote {}", plans.len(), ids.len(), out.display());
        }
    }
    Ok(())
}

fn serve(ctx: &Ctx, bundle: &Path, host: &str, port: u16, events: Option<PathBuf>) -> Result<()> {
    let b = StudyBundle::load(bundle)?;
    let events = events.unwrap_or_else(|| bundle.join("events.jsonl"));
    let log = EventLog::open(&events).with_context(|| format!("opening {}", events.display()))?;
    let state = AppState::new(b, log, Arc::new(SystemClock::new()), ctx.seed);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        ctx.progress(format!("serving on http://{}; events in {}", listener.local_addr()?, events.display()));
        crate::study::serve(state, listener).await?;
        Ok(())
    })
}

fn report(corpus: &Path, events: &Path, suggestions: Option<PathBuf>, json: Option<&Path>) -> Result<()> {
    let c = load_corpus(corpus)?;
    let ev = read_events(events)?;
    let data = StudyData::from_events(&ev)?;
    let spath = suggestions.unwrap_or_else(|| corpus.with_file_name("suggestions.json"));
    let cards: Vec<SuggestionCard> = if spath.is_file() {
        serde_json::from_str(&std::fs::read_to_string(&spath)?).with_context(|| format!("parsing {}", spath.display()))?
    } else {
        return Err(anyhow!("no suggestions file at {}", spath.display()));
    };
    let labels: BTreeMap<String, Label> = cards.into_iter().map(|s| (s.record_id, s.label)).collect();
    let r = build_report(&data, &c, &labels)?;
    if let Some(p) = json {
        std::fs::write(p, serde_json::to_string_pretty(&r)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{}", r.render_text());
    Ok(())
}
