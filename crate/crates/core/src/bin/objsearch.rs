//! Command-line front end: single trials, benchmark suites, single plans, report
//! recomputation and scene validation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use objsearch::bench::{
    compute_osr, compute_rates, path_stats, read_rows_csv, run_benchmark, BenchReport, RankerBackend, SceneSource,
    SuiteConfig, DEFAULT_WEIGHTS,
};
use objsearch::config::Config;
use objsearch::error::{ConfigError, MetricsError, PlanError, SceneError, SemanticsError};
use objsearch::geometry::Feature;
use objsearch::planner::{ChassisPose, SortingMode};
use objsearch::scene::{build_flat, generate_scene, load_scene, validate_scene, GenerationConfig, PlanCache, Scene, World};
use objsearch::search::{run_trial, SearchContext, Strategy, StrategyConfig, Trace};
use objsearch::semantics::{
    HttpCompletion, LlmEndpoint, LlmRanker, MockRanker, Ranker, ReplayCompletion, TranscriptLog,
};

#[derive(Parser)]
#[command(name = "objsearch", version, about = "Hierarchical semantic object search simulator and benchmark")]
struct Cli {
    /// TOML file with [robot], [camera], [planner], [time-model] and [semantics] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search trial and print its summary.
    Search(SearchArgs),
    /// Run a benchmark suite and write a JSON report and a CSV table.
    Bench(BenchArgs),
    /// Plan one carrier feature and print the pose plan as JSON.
    Plan(PlanArgs),
    /// Recompute aggregates from a report or a CSV table.
    Report(ReportArgs),
    /// Check a scene file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RankerKind {
    Mock,
    Llm,
}

#[derive(Args)]
struct RankerArgs {
    #[arg(long, value_enum, default_value = "mock")]
    ranker: RankerKind,
    /// Chat-completions URL for the llm ranker.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct SearchArgs {
    /// `flat`, `gen:SEED` or a scene file.
    #[arg(long)]
    scene: String,
    /// Item label to find; defaults to the generated target for `gen:` scenes.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = "godhs")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "both")]
    sorting: SortingMode,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Rate weights w1,w2,w3 for the overall search rate.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    #[command(flatten)]
    ranker: RankerArgs,
    /// Transcript written by the llm ranker.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Replay llm replies from a transcript instead of calling the endpoint.
    #[arg(long, conflicts_with = "transcript")]
    replay: Option<PathBuf>,
    /// Write the trace (JSON lines) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Built-in suite (smoke, strategies, ablation) or a suite TOML file.
    #[arg(long)]
    suite: String,
    /// Output directory for report.json and rows.csv.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    #[arg(long)]
    noise: Option<f64>,
    #[command(flatten)]
    ranker: RankerArgs,
    /// Replay llm replies from transcripts in this directory.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scene: String,
    /// Carrier id.
    #[arg(long)]
    carrier: String,
    #[arg(long)]
    feature: Feature,
    #[arg(long, default_value = "both")]
    sorting: SortingMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json or a rows CSV.
    input: PathBuf,
    /// Write the recomputed report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// `flat`, `fixtures/flat`, `gen:SEED` or a scene file.
    #[arg(long)]
    scene: String,
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad weight `{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let w: [f64; 3] = parts.try_into().map_err(|_| "expected three comma-separated weights".to_string())?;
    objsearch::bench::check_weights(w).map_err(|e| e.to_string())?;
    Ok(w)
}

/// Failure categories and their exit codes.
fn exit_code(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if cause.is::<SceneError>() {
            return (3, "scene");
        }
        if cause.is::<ConfigError>() {
            return (4, "config");
        }
        if cause.is::<PlanError>() {
            return (5, "plan");
        }
        if cause.is::<SemanticsError>() {
            return (6, "semantics");
        }
        if cause.is::<MetricsError>() {
            return (7, "metrics");
        }
        if cause.is::<std::io::Error>() {
            return (8, "io");
        }
    }
    (1, "error")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, category) = exit_code(&e);
            eprintln!("error[{category}]: {}", describe(&e));
            ExitCode::from(code)
        }
    }
}

/// The error chain, skipping causes a message already spells out.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let c = cause.to_string();
        if text.is_empty() {
            text = c;
        } else if !text.contains(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Search(a) => search(&config, a),
        Command::Bench(a) => bench(&config, a),
        Command::Plan(a) => plan(&config, a),
        Command::Report(a) => report(a),
        Command::Validate(a) => validate(&config, a),
    }
}

/// `flat` and `fixtures/flat[.json]` name the bundled flat; `gen:SEED` a generated scene.
fn resolve_scene(name: &str, config: &Config) -> Result<(Scene, Option<String>)> {
    let bare = name.trim_end_matches(".json");
    if bare == "flat" || bare.ends_with("fixtures/flat") && !Path::new(name).is_file() {
        return Ok((build_flat(&config.setup()), None));
    }
    if let Some(seed) = name.strip_prefix("gen:") {
        let seed: u64 = seed.parse().map_err(|_| anyhow!("bad generated-scene seed `{seed}`"))?;
        let gen = GenerationConfig { setup: config.setup(), ..GenerationConfig::default() };
        let g = generate_scene(&gen, seed)?;
        return Ok((g.scene, Some(g.target)));
    }
    Ok((load_scene(name)?, None))
}

fn endpoint(config: &Config, args: &RankerArgs) -> LlmEndpoint {
    let mut ep = config.semantics.endpoint.clone();
    if let Some(u) = &args.endpoint {
        ep.url = u.clone();
    }
    if let Some(m) = &args.model {
        ep.model = m.clone();
    }
    ep
}

fn search(config: &Config, a: SearchArgs) -> Result<()> {
    let (scene, generated_target) = resolve_scene(&a.scene, config)?;
    let target = a.target.or(generated_target).ok_or_else(|| anyhow!("--target is required for this scene"))?;
    let weights = a.weights.unwrap_or(DEFAULT_WEIGHTS);
    let cfg = StrategyConfig { strategy: a.strategy, seed: a.seed, time: config.time_model.clone(), noise: a.noise, sorting: a.sorting };
    cfg.validate().map_err(ConfigError::Invalid)?;
    let kb = Arc::new(config.knowledge_base()?);
    let world = World::new(scene)?;
    let plans = PlanCache::new(&world, config.setup());
    let ctx = SearchContext::new(&plans, &kb);
    let mock = MockRanker::new(kb.clone());
    let mut ranker: Box<dyn Ranker> = match (a.ranker.ranker, &a.replay) {
        (_, Some(path)) => {
            let mut r = LlmRanker::new(ReplayCompletion::from_file(path)?, mock, TranscriptLog::in_memory());
            r.retry_budget = config.semantics.retry_budget;
            r.transport_retries = config.semantics.transport_retries;
            Box::new(r)
        }
        (RankerKind::Llm, None) => {
            let log = match &a.transcript {
                Some(p) => {
                    let _ = std::fs::remove_file(p);
                    TranscriptLog::to_file(p)?
                }
                None => TranscriptLog::in_memory(),
            };
            let mut r = LlmRanker::new(HttpCompletion::new(endpoint(config, &a.ranker)), mock, log);
            r.retry_budget = config.semantics.retry_budget;
            r.transport_retries = config.semantics.transport_retries;
            Box::new(r)
        }
        (RankerKind::Mock, None) => Box::new(mock),
    };
    let trace = run_trial(&ctx, &target, ranker.as_mut(), &cfg);
    if let Some(path) = &a.out {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        trace.write_jsonl(&mut w)?;
        w.flush()?;
    }
    print!("{}", summary(&trace, &world, weights)?);
    Ok(())
}

fn summary(trace: &Trace, world: &World, weights: [f64; 3]) -> Result<String> {
    use std::fmt::Write as _;
    let h = &trace.header;
    let totals = trace.totals();
    let rates = compute_rates(trace, world)?;
    let osr = compute_osr(&rates, weights)?;
    let stats = path_stats(trace, None)?;
    let found_at = trace.events.iter().find_map(|e| match &e.event {
        objsearch::search::Event::TargetFound { carrier, feature } => Some(format!("{carrier} {feature}")),
        _ => None,
    });
    let mut s = String::new();
    writeln!(s, "scene      {}", h.scene)?;
    writeln!(s, "target     {}", h.target)?;
    writeln!(s, "strategy   {}", h.strategy.map_or("none", |s| s.as_str()))?;
    writeln!(s, "ranker     {}", h.ranker)?;
    writeln!(s, "seed       {}", h.config.seed)?;
    writeln!(s, "sorting    {}", h.config.sorting.as_str())?;
    writeln!(s, "found      {}", found_at.as_deref().unwrap_or("no"))?;
    writeln!(s, "events     {}", trace.events.len())?;
    writeln!(
        s,
        "rates      rooms {}/{} ({:.2}%)  carriers {}/{} ({:.2}%)  placements {}/{} ({:.2}%)",
        rates.rooms.num, rates.rooms.den, rates.r_r, rates.carriers.num, rates.carriers.den, rates.r_c,
        rates.placements.num, rates.placements.den, rates.r_i
    )?;
    writeln!(s, "osr        {osr:.2}%")?;
    writeln!(s, "chassis    {:.3} m", totals.chassis_length)?;
    writeln!(s, "camera     {:.3} m over {} poses", totals.ee_length, totals.ee_poses)?;
    let ratio = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.3}"));
    writeln!(s, "ratios     ee {}  ch {}", ratio(stats.ee_ratio), ratio(stats.ch_ratio))?;
    writeln!(s, "time       {:.2} s", totals.time)?;
    Ok(s)
}

fn bench(config: &Config, a: BenchArgs) -> Result<()> {
    let mut suite = SuiteConfig::resolve(&a.suite)?;
    if a.suite.ends_with(".toml") || Path::new(&a.suite).is_file() {
        // Suite files carry their own setup.
    } else {
        suite.setup = config.setup();
        suite.time = config.time_model.clone();
    }
    if let Some(w) = a.weights {
        suite.weights = w;
    }
    if let Some(n) = a.noise {
        suite.noise = n;
    }
    suite.ranker = match (a.ranker.ranker, a.replay) {
        (_, Some(dir)) => RankerBackend::Replay { transcripts: dir },
        (RankerKind::Llm, None) => {
            RankerBackend::Llm { endpoint: endpoint(config, &a.ranker), transcripts: a.out.join("transcripts") }
        }
        (RankerKind::Mock, None) => suite.ranker,
    };
    if suite.scenes.iter().any(|s| matches!(s, SceneSource::Flat)) && suite.target.is_none() {
        suite.target = Some("orange".into());
    }
    let kb = config.knowledge_base()?;
    let report = run_benchmark(&suite, &kb)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    std::fs::write(a.out.join("report.json"), report.to_json())?;
    report.write_csv(File::create(a.out.join("rows.csv"))?)?;
    print!("{}", aggregate_table(&report));
    println!("wrote {} and {}", a.out.join("report.json").display(), a.out.join("rows.csv").display());
    Ok(())
}

fn aggregate_table(report: &BenchReport) -> String {
    let cell = |s: &Option<objsearch::bench::Stat>| s.map_or("-".to_string(), |s| format!("{:.3}", s.mean));
    let mut out = format!(
        "{:<10} {:>5} {:>6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "group", "rows", "found", "crash", "osr", "ee", "ch", "time_r", "time"
    );
    for a in &report.aggregates {
        out += &format!(
            "{:<10} {:>5} {:>6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            a.group,
            a.rows,
            a.found,
            a.crashed,
            cell(&a.osr),
            cell(&a.ee_ratio),
            cell(&a.ch_ratio),
            cell(&a.time_ratio),
            cell(&a.time)
        );
    }
    out
}

fn plan(config: &Config, a: PlanArgs) -> Result<()> {
    let (scene, _) = resolve_scene(&a.scene, config)?;
    let world = World::new(scene)?;
    let ci = world.scene.carrier_index(&a.carrier).ok_or_else(|| anyhow!("no carrier `{}` in scene", a.carrier))?;
    let report = world.plan(ci, a.feature, &config.setup())?;
    let c = world.rooms[world.carrier_room[ci]].center;
    let plan = report.plan.sorted(a.sorting, &ChassisPose::new(c.x, c.y, 0.0));
    let doc = serde_json::json!({
        "carrier": a.carrier,
        "feature": a.feature,
        "sorting": a.sorting,
        "candidates": report.candidates,
        "ee_selected": report.ee_selected,
        "covered_fraction": report.covered_fraction,
        "saturated": report.saturated,
        "uncoverable": report.uncoverable,
        "ik_dropped": report.ik_dropped,
        "plan": plan,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let is_csv = a.input.extension().is_some_and(|e| e == "csv");
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let report = if is_csv {
        let rows = read_rows_csv(BufReader::new(file))?;
        BenchReport::new(SuiteConfig::default(), rows)
    } else {
        let text = std::io::read_to_string(file)?;
        let stored = BenchReport::from_json(&text)?;
        stored.verify()?;
        println!("stored aggregates match their rows");
        stored
    };
    print!("{}", aggregate_table(&report));
    if let Some(p) = &a.out {
        std::fs::write(p, report.to_json())?;
    }
    Ok(())
}

fn validate(config: &Config, a: ValidateArgs) -> Result<()> {
    let (scene, _) = resolve_scene(&a.scene, config)?;
    let problems = validate_scene(&scene);
    if !problems.is_empty() {
        bail!(SceneError::Invalid(problems));
    }
    let world = World::new(scene)?;
    println!(
        "{}: ok ({} rooms, {} doors, {} carriers, {} items, {} placements)",
        world.scene.name,
        world.scene.rooms.len(),
        world.scene.doors.len(),
        world.scene.carriers.len(),
        world.scene.items.len(),
        world.placements().len()
    );
    Ok(())
}
