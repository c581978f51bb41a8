use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{classify_failure, compute_osr, compute_rates, path_stats, FailureCategory, DEFAULT_WEIGHTS};
use super::report::{BenchReport, Row, RowKind};
use crate::error::{ConfigError, MetricsError, SceneError};
use crate::geometry::Feature;
use crate::planner::{ChassisPose, SortingMode};
use crate::scene::{build_flat, generate_scene, load_scene, GenerationConfig, PlanCache, Scene, SimSetup, World};
use crate::search::{run_plan, run_trial, SearchContext, Strategy, StrategyConfig, TimeModel, Trace};
use crate::semantics::{HttpCompletion, KnowledgeBase, LlmEndpoint, LlmRanker, MockRanker, Ranker, ReplayCompletion, TranscriptLog};

/// Where a suite scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum SceneSource {
    /// The bundled seven-room flat.
    Flat,
    File { path: PathBuf },
    Generated { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "backend")]
pub enum RankerBackend {
    Mock,
    /// Live endpoint; one transcript per trial is written under `transcripts`.
    Llm { endpoint: LlmEndpoint, transcripts: PathBuf },
    /// Replies read back from transcripts written by an earlier `llm` run.
    Replay { transcripts: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    /// Full trials per scene, strategy and seed.
    Trials,
    /// Single feature plans executed under each sorting mode, each against its unsorted twin.
    Ablation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub kind: SuiteKind,
    pub scenes: Vec<SceneSource>,
    /// Used for generated scenes.
    pub generation: GenerationConfig,
    /// Overrides the target a scene was generated for; required for file and flat scenes.
    pub target: Option<String>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub ranker: RankerBackend,
    pub weights: [f64; 3],
    pub noise: f64,
    pub setup: SimSetup,
    pub time: TimeModel,
    /// Ablation: plan instances to draw across the scenes (all eligible when fewer).
    pub instances: usize,
    /// Ablation: modes run per instance; `none` is always run as the baseline.
    pub modes: Vec<SortingMode>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            kind: SuiteKind::Trials,
            scenes: Vec::new(),
            generation: GenerationConfig::default(),
            target: None,
            strategies: Strategy::ALL.to_vec(),
            seeds: vec![1],
            ranker: RankerBackend::Mock,
            weights: DEFAULT_WEIGHTS,
            noise: 0.0,
            setup: SimSetup::default(),
            time: TimeModel::default(),
            instances: 60,
            modes: SortingMode::ALL.to_vec(),
        }
    }
}

/// Names accepted by [`SuiteConfig::builtin`].
pub const BUILTIN_SUITES: [&str; 3] = ["smoke", "strategies", "ablation"];

fn generated(n: u64) -> Vec<SceneSource> {
    (1..=n).map(|seed| SceneSource::Generated { seed }).collect()
}

impl SuiteConfig {
    pub fn builtin(name: &str) -> Option<Self> {
        let base = Self { name: name.into(), ..Self::default() };
        Some(match name {
            "smoke" => Self { scenes: vec![SceneSource::Flat, SceneSource::Generated { seed: 1 }], seeds: vec![7], ..base },
            "strategies" => Self { scenes: generated(20), seeds: vec![1, 2, 3], ..base },
            "ablation" => Self { kind: SuiteKind::Ablation, scenes: generated(10), seeds: vec![1], ..base },
            _ => return None,
        })
    }

    /// A built-in name or a TOML suite file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        if let Some(s) = Self::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(ConfigError::Invalid(format!(
                "unknown suite `{name_or_path}` (built-in: {}; or a path to a suite file)",
                BUILTIN_SUITES.join(", ")
            )));
        }
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let suite: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.scenes.is_empty() {
            return invalid("suite lists no scenes".into());
        }
        if self.kind == SuiteKind::Trials && (self.strategies.is_empty() || self.seeds.is_empty()) {
            return invalid("suite needs at least one strategy and one seed".into());
        }
        if self.kind == SuiteKind::Ablation && self.instances == 0 {
            return invalid("ablation suite needs at least one instance".into());
        }
        super::metrics::check_weights(self.weights).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = StrategyConfig { noise: self.noise, time: self.time.clone(), ..StrategyConfig::default() };
        cfg.validate().map_err(ConfigError::Invalid)?;
        if self.target.is_none() && self.scenes.iter().any(|s| !matches!(s, SceneSource::Generated { .. })) {
            return invalid("flat and file scenes need an explicit target".into());
        }
        Ok(())
    }

    fn trial_config(&self, strategy: Strategy, seed: u64, sorting: SortingMode) -> StrategyConfig {
        StrategyConfig { strategy, seed, time: self.time.clone(), noise: self.noise, sorting }
    }
}

/// A scene ready to search, with the target it is searched for.
pub struct LoadedScene {
    pub world: World,
    pub target: String,
}

pub fn load_source(source: &SceneSource, suite: &SuiteConfig) -> Result<LoadedScene, SceneError> {
    let (scene, target): (Scene, Option<String>) = match source {
        SceneSource::Flat => (build_flat(&suite.setup), None),
        SceneSource::File { path } => (load_scene(path)?, None),
        SceneSource::Generated { seed } => {
            let mut gen = suite.generation.clone();
            if let Some(t) = &suite.target {
                gen.target = t.clone();
            }
            gen.setup = suite.setup.clone();
            let g = generate_scene(&gen, *seed)?;
            (g.scene, Some(g.target))
        }
    };
    let target = suite.target.clone().or(target).unwrap_or_default();
    Ok(LoadedScene { world: World::new(scene)?, target })
}

fn transcript_path(dir: &Path, scene: &str, strategy: Strategy, seed: u64) -> PathBuf {
    dir.join(format!("{scene}-{}-{seed}.jsonl", strategy.as_str()))
}

/// The ranker for one trial; LLM backends get their own transcript file.
pub fn make_ranker(
    backend: &RankerBackend,
    kb: &Arc<KnowledgeBase>,
    scene: &str,
    strategy: Strategy,
    seed: u64,
) -> Result<Box<dyn Ranker>, String> {
    let mock = MockRanker::new(kb.clone());
    Ok(match backend {
        RankerBackend::Mock => Box::new(mock),
        RankerBackend::Llm { endpoint, transcripts } => {
            std::fs::create_dir_all(transcripts).map_err(|e| e.to_string())?;
            let path = transcript_path(transcripts, scene, strategy, seed);
            let _ = std::fs::remove_file(&path);
            let log = TranscriptLog::to_file(&path).map_err(|e| e.to_string())?;
            Box::new(LlmRanker::new(HttpCompletion::new(endpoint.clone()), mock, log))
        }
        RankerBackend::Replay { transcripts } => {
            let path = transcript_path(transcripts, scene, strategy, seed);
            let client = ReplayCompletion::from_file(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            Box::new(LlmRanker::new(client, mock, TranscriptLog::in_memory()))
        }
    })
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| e.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

fn crash_row(base: Row, error: String) -> Row {
    Row { failure: Some(FailureCategory::Crash), error: Some(error), ..base }
}

/// Metrics for one finished trial.
pub fn trial_row(trace: &Trace, world: &World, weights: [f64; 3], scene_index: usize) -> Result<Row, MetricsError> {
    let rates = compute_rates(trace, world)?;
    let osr = compute_osr(&rates, weights)?;
    let stats = path_stats(trace, None)?;
    let totals = trace.totals();
    let cfg = &trace.header.config;
    Ok(Row {
        kind: RowKind::Trial,
        scene_index,
        scene: trace.header.scene.clone(),
        group: trace.header.strategy.map(|s| s.as_str().to_string()).unwrap_or_default(),
        seed: cfg.seed,
        target: trace.header.target.clone(),
        found: Some(rates.found),
        r_r: Some(rates.r_r),
        r_c: Some(rates.r_c),
        r_i: Some(rates.r_i),
        osr: Some(osr),
        ee_ratio: stats.ee_ratio,
        ch_ratio: stats.ch_ratio,
        time: Some(totals.time),
        chassis_length: Some(totals.chassis_length),
        ee_length: Some(totals.ee_length),
        ee_poses: Some(totals.ee_poses),
        failure: classify_failure(trace, world),
        ..Row::default()
    })
}

fn run_scene_trials(suite: &SuiteConfig, kb: &Arc<KnowledgeBase>, si: usize) -> Vec<Row> {
    let source = &suite.scenes[si];
    let mut keys: Vec<(Strategy, u64)> =
        suite.strategies.iter().flat_map(|&s| suite.seeds.iter().map(move |&seed| (s, seed))).collect();
    keys.sort();
    keys.dedup();
    let label = |s: Strategy, seed: u64| Row {
        kind: RowKind::Trial,
        scene_index: si,
        scene: scene_label(source),
        group: s.as_str().into(),
        seed,
        target: suite.target.clone().unwrap_or_default(),
        ..Row::default()
    };
    let loaded = match load_source(source, suite) {
        Ok(l) => l,
        Err(e) => return keys.iter().map(|&(s, seed)| crash_row(label(s, seed), e.to_string())).collect(),
    };
    let plans = PlanCache::new(&loaded.world, suite.setup.clone());
    let ctx = SearchContext::new(&plans, kb);
    let name = loaded.world.scene.name.clone();
    keys.iter()
        .map(|&(strategy, seed)| {
            let base = Row { scene: name.clone(), target: loaded.target.clone(), ..label(strategy, seed) };
            let mut ranker = match make_ranker(&suite.ranker, kb, &name, strategy, seed) {
                Ok(r) => r,
                Err(e) => return crash_row(base, e),
            };
            let cfg = suite.trial_config(strategy, seed, SortingMode::Both);
            let result =
                catch_unwind(AssertUnwindSafe(|| run_trial(&ctx, &loaded.target, ranker.as_mut(), &cfg)));
            match result {
                Ok(trace) => trial_row(&trace, &loaded.world, suite.weights, si).unwrap_or_else(|e| crash_row(base, e.to_string())),
                Err(e) => crash_row(base, panic_message(e)),
            }
        })
        .collect()
}

fn scene_label(source: &SceneSource) -> String {
    match source {
        SceneSource::Flat => "flat".into(),
        SceneSource::File { path } => path.display().to_string(),
        SceneSource::Generated { seed } => format!("gen-{seed}"),
    }
}

/// A feature plan used by the sorting ablation, with the pose execution starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanInstance {
    pub scene_index: usize,
    pub carrier: usize,
    pub feature: Feature,
    pub start: ChassisPose,
}

/// Ablation label that never matches an item, so each plan runs to completion.
const NO_TARGET: &str = "";

/// Feature plans with at least two camera poses, in scene, carrier and feature order.
/// Execution starts at the centre of the carrier's room facing +x.
pub fn plan_instances(plans: &PlanCache<'_>, scene_index: usize) -> Vec<PlanInstance> {
    let world = plans.world();
    let placements = world.placements();
    let eligible: Vec<bool> = placements
        .par_iter()
        .map(|&(ci, f)| plans.get(ci, f).is_ok_and(|r| r.plan.ee_count() >= 2))
        .collect();
    placements
        .into_iter()
        .zip(eligible)
        .filter(|(_, ok)| *ok)
        .map(|((ci, feature), _)| {
            let c = world.rooms[world.carrier_room[ci]].center;
            PlanInstance { scene_index, carrier: ci, feature, start: ChassisPose::new(c.x, c.y, 0.0) }
        })
        .collect()
}

fn ablation_rows(suite: &SuiteConfig, plans: &PlanCache<'_>, kb: &KnowledgeBase, inst: &PlanInstance) -> Vec<Row> {
    let ctx = SearchContext::new(plans, kb);
    let world = plans.world();
    let seed = suite.seeds.first().copied().unwrap_or(0);
    let run = |mode| run_plan(&ctx, inst.carrier, inst.feature, inst.start, NO_TARGET, &suite.trial_config(Strategy::Godhs, seed, mode));
    let baseline = run(SortingMode::None);
    let mut modes = vec![SortingMode::None];
    modes.extend(suite.modes.iter().copied().filter(|m| *m != SortingMode::None));
    modes
        .into_iter()
        .map(|mode| {
            let trace = if mode == SortingMode::None { baseline.clone() } else { run(mode) };
            let base = Row {
                kind: RowKind::Plan,
                scene_index: inst.scene_index,
                scene: world.scene.name.clone(),
                group: mode.as_str().into(),
                seed,
                carrier: Some(world.scene.carriers[inst.carrier].id.clone()),
                feature: Some(inst.feature),
                ..Row::default()
            };
            match path_stats(&trace, Some(&baseline)) {
                Ok(s) => {
                    let totals = trace.totals();
                    Row {
                        ee_ratio: s.ee_ratio,
                        ch_ratio: s.ch_ratio,
                        time_ratio: s.time_ratio,
                        time: Some(totals.time),
                        chassis_length: Some(totals.chassis_length),
                        ee_length: Some(totals.ee_length),
                        ee_poses: Some(totals.ee_poses),
                        ..base
                    }
                }
                Err(e) => crash_row(base, e.to_string()),
            }
        })
        .collect()
}

/// Runs every trial of the suite. Scenes are processed in parallel; rows come back
/// ordered by (scene, strategy, seed) for trials and (scene, instance, mode) for the
/// ablation, independent of completion order.
pub fn run_benchmark(suite: &SuiteConfig, kb: &KnowledgeBase) -> Result<BenchReport, ConfigError> {
    suite.validate()?;
    kb.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let kb = Arc::new(kb.clone());
    let rows: Vec<Row> = match suite.kind {
        SuiteKind::Trials => {
            (0..suite.scenes.len()).into_par_iter().flat_map_iter(|si| run_scene_trials(suite, &kb, si)).collect()
        }
        SuiteKind::Ablation => {
            // Scenes are taken in order until enough instances are collected; plans within
            // a scene are computed in parallel.
            let mut rows = Vec::new();
            let mut taken = 0;
            for si in 0..suite.scenes.len() {
                if taken >= suite.instances {
                    break;
                }
                let loaded = match load_source(&suite.scenes[si], suite) {
                    Ok(l) => l,
                    Err(e) => {
                        let base = Row { kind: RowKind::Plan, scene_index: si, scene: scene_label(&suite.scenes[si]), ..Row::default() };
                        rows.push(crash_row(base, e.to_string()));
                        continue;
                    }
                };
                let plans = PlanCache::new(&loaded.world, suite.setup.clone());
                let mut instances = plan_instances(&plans, si);
                instances.truncate(suite.instances - taken);
                taken += instances.len();
                let chunks: Vec<Vec<Row>> = instances.par_iter().map(|inst| ablation_rows(suite, &plans, &kb, inst)).collect();
                rows.extend(chunks.into_iter().flatten());
            }
            rows
        }
    };
    Ok(BenchReport::new(suite.clone(), rows))
}
