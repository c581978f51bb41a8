use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RankLevel, RankRequest};
use crate::error::SemanticsError;

const PROMPTS_JSON: &str = include_str!("../../data/prompts.json");

/// Accepted as an explicit empty answer where empty answers are legal.
pub const NONE_TOKEN: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// May reference `{target}` and `{context}`.
    pub task: String,
    pub example: String,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub version: u32,
    /// Appended to a prompt when a reply had no usable label.
    pub correction: String,
    pub templates: BTreeMap<String, PromptTemplate>,
}

impl PromptSet {
    pub fn shipped() -> Self {
        serde_json::from_str(PROMPTS_JSON).expect("bundled prompts parse")
    }
}

pub fn build_prompt(req: &RankRequest, set: &PromptSet) -> Result<String, SemanticsError> {
    let t = set
        .templates
        .get(req.level.as_str())
        .ok_or_else(|| SemanticsError::MissingTemplate(req.level.to_string()))?;
    let context = req.context.join(", ");
    let task = t.task.replace("{target}", &req.target).replace("{context}", &context);
    let mut allowed = req.candidates.join(", ");
    if req.level == RankLevel::CarrierClassify {
        allowed.push_str(", ");
        allowed.push_str(NONE_TOKEN);
    }
    Ok(format!("{task}\nAllowed answers: {allowed}\nExample: {}\nOutput format: {}", t.example, t.format))
}

const TRIM: &[char] = &['"', '\'', '`', '*', '-', '.', ':', ';', '!', '?', '(', ')', '[', ']', '{', '}', '<', '>', '#', '_'];

fn clean(token: &str) -> String {
    let mut t = token.trim().to_lowercase();
    if let Some((_, rest)) = t.rsplit_once(':') {
        t = rest.to_string();
    }
    let t = t.trim_matches(|c: char| c.is_whitespace() || TRIM.contains(&c) || c == '•');
    // Leading list numbering such as "1." or "2)".
    let t = t.trim_start_matches(|c: char| c.is_ascii_digit());
    let t = t.trim_matches(|c: char| c.is_whitespace() || TRIM.contains(&c));
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-folded, trimmed tokens matched against `vocab`; out-of-vocabulary tokens and
/// repeats dropped. Returns the labels (vocabulary spelling) and whether `none` appeared.
pub fn tokenize(raw: &str, vocab: &[String]) -> (Vec<String>, bool) {
    let folded: Vec<String> = vocab.iter().map(|v| v.to_lowercase()).collect();
    let mut out: Vec<String> = Vec::new();
    let mut saw_none = false;
    for tok in raw.split([',', '\n', '\r']) {
        let t = clean(tok);
        if t == NONE_TOKEN {
            saw_none = true;
            continue;
        }
        if let Some(i) = folded.iter().position(|v| *v == t) {
            if !out.contains(&vocab[i]) {
                out.push(vocab[i].clone());
            }
        }
    }
    (out, saw_none)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed {
    pub labels: Vec<String>,
    pub retries: usize,
    pub valid: bool,
    /// Every reply considered, first one included.
    pub raws: Vec<String>,
}

/// Validates a reply, re-asking up to `retry_budget` times while nothing usable comes
/// back. `requery` receives the rejected reply and returns the next one; its errors
/// (transport failures) abort without consuming budget.
pub fn parse_and_correct(
    raw: &str,
    vocab: &[String],
    allow_none: bool,
    retry_budget: usize,
    requery: &mut dyn FnMut(&str) -> Result<String, SemanticsError>,
) -> Result<Parsed, SemanticsError> {
    let mut raws = vec![raw.to_string()];
    let mut retries = 0;
    loop {
        let last = raws.last().expect("non-empty");
        let (labels, saw_none) = tokenize(last, vocab);
        if !labels.is_empty() || (allow_none && saw_none) {
            return Ok(Parsed { labels, retries, valid: true, raws });
        }
        if retries >= retry_budget {
            return Ok(Parsed { labels: Vec::new(), retries, valid: false, raws });
        }
        let next = requery(last)?;
        retries += 1;
        raws.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vec<String> {
        ["top", "bottom", "sides", "inside"].iter().map(|s| s.to_string()).collect()
    }

    fn never(_: &str) -> Result<String, SemanticsError> {
        panic!("no requery expected")
    }

    #[test]
    fn normalization_and_dedup() {
        let p = parse_and_correct("Inside, top", &vocab(), false, 2, &mut never).unwrap();
        assert_eq!(p.labels, vec!["inside", "top"]);
        assert!(p.valid);
        let p = parse_and_correct("inside, inside, top", &vocab(), false, 2, &mut never).unwrap();
        assert_eq!(p.labels, vec!["inside", "top"]);
        let p = parse_and_correct("1. **Inside**\n2. Top.", &vocab(), false, 0, &mut never).unwrap();
        assert_eq!(p.labels, vec!["inside", "top"]);
    }

    #[test]
    fn scripted_retry() {
        let mut replies = vec!["inside".to_string()].into_iter();
        let mut seen = Vec::new();
        let p = parse_and_correct("the fridge interior", &vocab(), false, 2, &mut |prev| {
            seen.push(prev.to_string());
            Ok(replies.next().unwrap())
        })
        .unwrap();
        assert_eq!(p.labels, vec!["inside"]);
        assert_eq!(p.retries, 1);
        assert_eq!(seen, vec!["the fridge interior"]);
    }

    #[test]
    fn budget_exhaustion_and_none() {
        let p = parse_and_correct("nothing", &vocab(), false, 1, &mut |_| Ok("still nothing".into())).unwrap();
        assert!(!p.valid && p.labels.is_empty());
        assert_eq!(p.retries, 1);
        let p = parse_and_correct("None.", &vocab(), true, 0, &mut never).unwrap();
        assert!(p.valid && p.labels.is_empty());
        let p = parse_and_correct("none", &vocab(), false, 0, &mut never).unwrap();
        assert!(!p.valid);
    }

    #[test]
    fn transport_error_propagates_without_retry() {
        let r = parse_and_correct("??", &vocab(), false, 3, &mut |_| Err(SemanticsError::Transport("down".into())));
        assert!(matches!(r, Err(SemanticsError::Transport(_))));
    }

    #[test]
    fn prompt_contents() {
        let set = PromptSet::shipped();
        let req = RankRequest {
            level: RankLevel::Feature,
            target: "orange".into(),
            candidates: vocab(),
            context: vec!["fridge".into()],
        };
        let p = build_prompt(&req, &set).unwrap();
        for w in vocab() {
            assert!(p.contains(&w));
        }
        assert!(p.contains("Output format:"));
        assert!(p.contains("Example:"));
        assert_eq!(p, build_prompt(&req, &set).unwrap());
        let room = RankRequest {
            level: RankLevel::Room,
            target: "orange".into(),
            candidates: vec!["kitchen".into(), "office".into()],
            context: vec![],
        };
        let p = build_prompt(&room, &set).unwrap();
        assert!(p.contains("Allowed answers: kitchen, office\n"));
        let mut empty = set.clone();
        empty.templates.clear();
        assert!(matches!(build_prompt(&room, &empty), Err(SemanticsError::MissingTemplate(_))));
    }
}
