//! Room, carrier and feature decisions: a deterministic knowledge-base ranker and an
//! LLM-backed ranker with prompt construction, output validation and mock fallback.

mod llm;
mod prompt;

pub use llm::{
    Completion, HttpCompletion, LlmEndpoint, LlmRanker, ReplayCompletion, ScriptedCompletion, TranscriptLog,
    TranscriptRecord,
};
pub use prompt::{build_prompt, parse_and_correct, tokenize, Parsed, PromptSet, PromptTemplate};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SemanticsError;
use crate::geometry::Feature;

const KB_JSON: &str = include_str!("../../data/kb.json");

/// Returned by room-type inference when no observed object carries evidence.
pub const UNKNOWN_ROOM: &str = "unknown";

/// Order used when a carrier has no feature list.
pub const DEFAULT_FEATURES: [Feature; 4] = [Feature::Top, Feature::Inside, Feature::Sides, Feature::Bottom];

/// Wildcard target key in `carrier_feature_priors`.
pub const ANY_TARGET: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub version: u32,
    pub room_types: Vec<String>,
    /// Object label → room type → association score.
    pub room_inference: BTreeMap<String, BTreeMap<String, f64>>,
    /// Target → room type → score.
    pub room_priors: BTreeMap<String, BTreeMap<String, f64>>,
    /// Target → carrier label → score.
    pub carrier_priors: BTreeMap<String, BTreeMap<String, f64>>,
    /// Carrier label → target (or `*`) → features, most plausible first.
    pub carrier_feature_priors: BTreeMap<String, BTreeMap<String, Vec<Feature>>>,
}

impl KnowledgeBase {
    pub fn shipped() -> Self {
        Self::from_json(KB_JSON).expect("bundled knowledge base is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SemanticsError> {
        let kb: Self = serde_json::from_str(text).map_err(|e| SemanticsError::KnowledgeBase(e.to_string()))?;
        kb.validate()?;
        Ok(kb)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SemanticsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SemanticsError> {
        let bad = |what: &str| Err(SemanticsError::KnowledgeBase(what.to_string()));
        let tables = [&self.room_inference, &self.room_priors, &self.carrier_priors];
        for t in tables {
            for (k, row) in t {
                if let Some((j, s)) = row.iter().find(|(_, s)| !s.is_finite()) {
                    return bad(&format!("non-finite score {s} at {k}/{j}"));
                }
            }
        }
        for (carrier, rows) in &self.carrier_feature_priors {
            for (target, list) in rows {
                let unique: BTreeSet<_> = list.iter().collect();
                if unique.len() != list.len() {
                    return bad(&format!("duplicate feature for {carrier}/{target}"));
                }
            }
        }
        if self.room_types.iter().any(|r| r == UNKNOWN_ROOM) {
            return bad("`unknown` is reserved");
        }
        Ok(())
    }

    pub fn room_prior(&self, target: &str, room_type: &str) -> f64 {
        self.room_priors.get(target).and_then(|r| r.get(room_type)).copied().unwrap_or(0.0)
    }

    pub fn carrier_prior(&self, target: &str, carrier: &str) -> f64 {
        self.carrier_priors.get(target).and_then(|r| r.get(carrier)).copied().unwrap_or(0.0)
    }

    /// Target-specific list, then the wildcard list; `None` for unknown carriers.
    pub fn features_for(&self, carrier: &str, target: &str) -> Option<&[Feature]> {
        let rows = self.carrier_feature_priors.get(carrier)?;
        rows.get(target).or_else(|| rows.get(ANY_TARGET)).map(|v| v.as_slice())
    }

    /// Summed association per room type; zero-score rooms omitted.
    pub fn room_scores<'a>(&self, observed: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, f64> {
        let mut scores: BTreeMap<String, f64> = BTreeMap::new();
        for o in observed {
            if let Some(row) = self.room_inference.get(o) {
                for (room, s) in row {
                    *scores.entry(room.clone()).or_default() += s;
                }
            }
        }
        scores.retain(|_, s| *s > 0.0);
        scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankLevel {
    RoomType,
    Room,
    CarrierClassify,
    CarrierRank,
    Feature,
}

impl RankLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RankLevel::RoomType => "room-type",
            RankLevel::Room => "room",
            RankLevel::CarrierClassify => "carrier-classify",
            RankLevel::CarrierRank => "carrier-rank",
            RankLevel::Feature => "feature",
        }
    }
}

impl fmt::Display for RankLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRequest {
    pub level: RankLevel,
    pub target: String,
    /// Closed answer vocabulary for this request.
    pub candidates: Vec<String>,
    /// Observed objects (room-type), the room type (carrier levels) or the carrier label (feature).
    pub context: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankResponse {
    /// Ordered, duplicate-free subset of the request candidates.
    pub labels: Vec<String>,
    /// Raw replies in request order (empty for the mock ranker).
    pub raw: Vec<String>,
    pub valid: bool,
    pub retries: usize,
    /// The LLM answer was unusable and the mock ranking was substituted.
    pub fallback: bool,
    /// No knowledge was available and a fixed default was returned.
    pub defaulted: bool,
}

pub trait Ranker {
    fn name(&self) -> &str;
    fn rank(&mut self, request: &RankRequest) -> RankResponse;
}

fn stable_desc(candidates: &[String], score: impl Fn(&str) -> f64) -> Vec<String> {
    let mut v: Vec<(usize, f64)> = candidates.iter().enumerate().map(|(i, c)| (i, score(c))).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(i, _)| candidates[i].clone()).collect()
}

/// Deterministic ranker backed by the knowledge base.
#[derive(Debug, Clone)]
pub struct MockRanker {
    kb: Arc<KnowledgeBase>,
}

impl MockRanker {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        Self { kb }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }
}

impl Ranker for MockRanker {
    fn name(&self) -> &str {
        "mock"
    }

    fn rank(&mut self, req: &RankRequest) -> RankResponse {
        let kb = &self.kb;
        let t = req.target.as_str();
        let mut defaulted = false;
        let labels = match req.level {
            RankLevel::RoomType => {
                let scores = kb.room_scores(req.context.iter().map(|s| s.as_str()));
                // BTreeMap iteration is by name, so the first maximum wins ties.
                let best = req
                    .candidates
                    .iter()
                    .filter_map(|c| scores.get(c).map(|s| (c, *s)))
                    .fold(None::<(&String, f64)>, |acc, (c, s)| match acc {
                        Some((bc, bs)) if bs > s || (bs == s && bc <= c) => Some((bc, bs)),
                        _ => Some((c, s)),
                    });
                best.map(|(c, _)| vec![c.clone()]).unwrap_or_default()
            }
            RankLevel::Room => stable_desc(&req.candidates, |r| kb.room_prior(t, r)),
            RankLevel::CarrierClassify => {
                let mut seen = BTreeSet::new();
                req.candidates
                    .iter()
                    .filter(|c| kb.carrier_prior(t, c) > 0.0 && seen.insert(c.as_str()))
                    .cloned()
                    .collect()
            }
            RankLevel::CarrierRank => stable_desc(&req.candidates, |c| kb.carrier_prior(t, c)),
            RankLevel::Feature => {
                let carrier = req.context.first().map(|s| s.as_str()).unwrap_or("");
                let list = match kb.features_for(carrier, t) {
                    Some(l) if !l.is_empty() => l.to_vec(),
                    _ => {
                        defaulted = true;
                        DEFAULT_FEATURES.to_vec()
                    }
                };
                list.iter()
                    .map(|f| f.as_str().to_string())
                    .filter(|f| req.candidates.contains(f))
                    .collect()
            }
        };
        RankResponse { labels, raw: Vec::new(), valid: true, retries: 0, fallback: false, defaulted }
    }
}

fn dedup(labels: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    labels.iter().filter(|l| seen.insert(l.as_str())).cloned().collect()
}

pub fn room_type_request(observed: &[String], room_types: &[String]) -> RankRequest {
    RankRequest { level: RankLevel::RoomType, target: String::new(), candidates: room_types.to_vec(), context: observed.to_vec() }
}

/// Room category from observed objects; [`UNKNOWN_ROOM`] when nothing is informative.
pub fn infer_room_type(observed: &[String], room_types: &[String], ranker: &mut dyn Ranker) -> (String, RankResponse) {
    let resp = ranker.rank(&room_type_request(observed, room_types));
    let label = resp.labels.first().cloned().unwrap_or_else(|| UNKNOWN_ROOM.to_string());
    (label, resp)
}

pub fn rooms_request(rooms: &[String], target: &str) -> RankRequest {
    RankRequest { level: RankLevel::Room, target: target.into(), candidates: dedup(rooms), context: vec![] }
}

pub fn rank_rooms(rooms: &[String], target: &str, ranker: &mut dyn Ranker) -> RankResponse {
    ranker.rank(&rooms_request(rooms, target))
}

pub fn classify_request(objects: &[String], target: &str, room_type: &str) -> RankRequest {
    RankRequest {
        level: RankLevel::CarrierClassify,
        target: target.into(),
        candidates: dedup(objects),
        context: vec![room_type.to_string()],
    }
}

/// Carrier labels among `objects`; an empty object list is answered without a query.
pub fn classify_carriers(objects: &[String], target: &str, room_type: &str, ranker: &mut dyn Ranker) -> RankResponse {
    let req = classify_request(objects, target, room_type);
    if req.candidates.is_empty() {
        return RankResponse { valid: true, ..Default::default() };
    }
    ranker.rank(&req)
}

pub fn carriers_request(carriers: &[String], target: &str, room_type: &str) -> RankRequest {
    RankRequest {
        level: RankLevel::CarrierRank,
        target: target.into(),
        candidates: dedup(carriers),
        context: vec![room_type.to_string()],
    }
}

pub fn rank_carriers(carriers: &[String], target: &str, room_type: &str, ranker: &mut dyn Ranker) -> RankResponse {
    ranker.rank(&carriers_request(carriers, target, room_type))
}

pub fn features_request(carrier: &str, target: &str) -> RankRequest {
    RankRequest {
        level: RankLevel::Feature,
        target: target.into(),
        candidates: Feature::ALL.iter().map(|f| f.as_str().to_string()).collect(),
        context: vec![carrier.to_string()],
    }
}

/// Ordered features to inspect; never empty (falls back to [`DEFAULT_FEATURES`]).
pub fn rank_features(carrier: &str, target: &str, ranker: &mut dyn Ranker) -> (Vec<Feature>, RankResponse) {
    let mut resp = ranker.rank(&features_request(carrier, target));
    let mut out: Vec<Feature> = resp.labels.iter().filter_map(|l| l.parse().ok()).collect();
    if out.is_empty() {
        out = DEFAULT_FEATURES.to_vec();
        resp.defaulted = true;
    }
    (out, resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> MockRanker {
        MockRanker::new(Arc::new(KnowledgeBase::shipped()))
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn room_type_examples() {
        let kb = KnowledgeBase::shipped();
        let mut m = mock();
        assert_eq!(infer_room_type(&s(&["bed", "dressing table"]), &kb.room_types, &mut m).0, "bedroom");
        assert_eq!(infer_room_type(&s(&["fridge"]), &kb.room_types, &mut m).0, "kitchen");
        assert_eq!(infer_room_type(&s(&["spaceship"]), &kb.room_types, &mut m).0, UNKNOWN_ROOM);
    }

    #[test]
    fn room_type_argmax_matches_table() {
        // Independent recomputation from the shipped table for every single object.
        let kb = KnowledgeBase::shipped();
        let mut m = mock();
        for (obj, row) in &kb.room_inference {
            let mut best: Option<(&String, f64)> = None;
            for room in &kb.room_types {
                let sc = row.get(room).copied().unwrap_or(0.0);
                if sc > 0.0 && best.is_none_or(|(_, b)| sc > b) {
                    best = Some((room, sc));
                }
            }
            let expect = best.map(|b| b.0.clone()).unwrap_or_else(|| UNKNOWN_ROOM.into());
            assert_eq!(infer_room_type(&[obj.clone()], &kb.room_types, &mut m).0, expect, "{obj}");
        }
    }

    #[test]
    fn orange_rooms_living_then_kitchen() {
        let mut m = mock();
        let r = rank_rooms(&s(&["bedroom", "kitchen", "living room"]), "orange", &mut m);
        assert_eq!(r.labels, s(&["living room", "kitchen", "bedroom"]));
        assert_eq!(rank_rooms(&s(&["office"]), "orange", &mut m).labels, s(&["office"]));
        let tie = rank_rooms(&s(&["hallway", "bathroom"]), "orange", &mut m);
        assert_eq!(tie.labels, s(&["hallway", "bathroom"]));
    }

    #[test]
    fn classify_and_rank_carriers() {
        let mut m = mock();
        let c = classify_carriers(&s(&["fridge", "wall", "chair"]), "orange", "kitchen", &mut m);
        assert_eq!(c.labels, s(&["fridge"]));
        assert!(classify_carriers(&[], "orange", "kitchen", &mut m).labels.is_empty());
        assert!(classify_carriers(&s(&["wall", "window"]), "orange", "kitchen", &mut m).labels.is_empty());
        let r = rank_carriers(&s(&["coffee table", "fridge"]), "orange", "kitchen", &mut m);
        assert_eq!(r.labels, s(&["fridge", "coffee table"]));
        assert_eq!(r, rank_carriers(&s(&["coffee table", "fridge"]), "orange", "kitchen", &mut m));
    }

    #[test]
    fn feature_examples() {
        let mut m = mock();
        let (f, _) = rank_features("fridge", "orange", &mut m);
        let pos = |x: Feature| f.iter().position(|y| *y == x).unwrap_or(usize::MAX);
        assert!(pos(Feature::Inside) < pos(Feature::Bottom));
        assert_eq!(rank_features("bathtub", "keys", &mut m).0[0], Feature::Top);
        let (f, r) = rank_features("spaceship", "orange", &mut m);
        assert_eq!(f, DEFAULT_FEATURES.to_vec());
        assert!(r.defaulted);
    }

    #[test]
    fn kb_validation_rejects_bad_tables() {
        let mut kb = KnowledgeBase::shipped();
        kb.carrier_feature_priors
            .entry("x".into())
            .or_default()
            .insert("*".into(), vec![Feature::Top, Feature::Top]);
        assert!(kb.validate().is_err());
        let mut kb = KnowledgeBase::shipped();
        kb.room_priors.entry("x".into()).or_default().insert("kitchen".into(), f64::NAN);
        assert!(kb.validate().is_err());
    }
}
