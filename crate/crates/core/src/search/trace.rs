use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Strategy, StrategyConfig, TimeModel};
use crate::geometry::Feature;
use crate::planner::EEPose;
use crate::scene::SimSetup;
use crate::semantics::{RankLevel, RankRequest, RankResponse};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Exploration,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    /// Room to room while mapping.
    Explore,
    /// Room to room while searching.
    Room,
    /// To a chassis pose of a feature plan.
    Plan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    EmptyFeatureMap,
    EmptyPlan,
    NotOpenable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    RoomEntered {
        room: String,
        phase: Phase,
    },
    RoomTypeInferred {
        room: String,
        room_type: String,
        observed: Vec<String>,
    },
    Ranking {
        level: RankLevel,
        target: String,
        candidates: Vec<String>,
        context: Vec<String>,
        labels: Vec<String>,
        raw: Vec<String>,
        valid: bool,
        retries: usize,
        fallback: bool,
        defaulted: bool,
    },
    CarrierInspected {
        carrier: String,
        label: String,
    },
    FeatureInspected {
        carrier: String,
        feature: Feature,
        chassis_poses: usize,
        ee_poses: usize,
    },
    FeatureSkipped {
        carrier: String,
        feature: Feature,
        reason: SkipReason,
    },
    /// Planar travel; `to` is (x, y, heading). `ee_home` is the stowed camera position
    /// at the destination, where the next camera tour starts.
    ChassisMove {
        kind: MoveKind,
        from: [f64; 2],
        to: [f64; 3],
        length: f64,
        ee_home: [f64; 3],
    },
    EeMove {
        to: EEPose,
        length: f64,
    },
    OpenAction {
        carrier: String,
        success: bool,
    },
    DetectionCheck {
        carrier: String,
        feature: Feature,
        hit: bool,
    },
    /// Where the target really is; it may have been seen while inspecting a neighbour.
    TargetFound {
        carrier: String,
        feature: Feature,
    },
    TargetNotFound,
}

impl Event {
    pub fn ranking(req: &RankRequest, resp: &RankResponse) -> Self {
        Event::Ranking {
            level: req.level,
            target: req.target.clone(),
            candidates: req.candidates.clone(),
            context: req.context.clone(),
            labels: resp.labels.clone(),
            raw: resp.raw.clone(),
            valid: resp.valid,
            retries: resp.retries,
            fallback: resp.fallback,
            defaulted: resp.defaulted,
        }
    }
}

/// An event with its position in the trace and the wall-model clock after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: usize,
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub scene: String,
    pub target: String,
    /// `None` for a bare plan execution.
    pub strategy: Option<Strategy>,
    pub ranker: String,
    pub config: StrategyConfig,
    pub setup: SimSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub found: bool,
    pub chassis_length: f64,
    pub ee_length: f64,
    pub ee_poses: usize,
    pub opens: usize,
    pub time: f64,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

impl Trace {
    pub fn found(&self) -> bool {
        self.events.iter().any(|e| matches!(e.event, Event::TargetFound { .. }))
    }

    /// Path sums and the time they imply, summed in event order.
    pub fn totals(&self) -> TraceTotals {
        let (mut ch, mut ee, mut poses, mut opens) = (0.0, 0.0, 0, 0);
        for e in &self.events {
            match &e.event {
                Event::ChassisMove { length, .. } => ch += length,
                Event::EeMove { length, .. } => {
                    ee += length;
                    poses += 1;
                }
                Event::OpenAction { success: true, .. } => opens += 1,
                _ => {}
            }
        }
        let time = self.header.config.time.total(ch, ee, poses, opens);
        TraceTotals { found: self.found(), chassis_length: ch, ee_length: ee, ee_poses: poses, opens, time }
    }

    /// Header line, then one event per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &HeaderLine { header: self.header.clone() })?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, serde_json::Error> {
        let mut lines = r.lines().map(|l| l.map_err(serde_json::Error::io));
        let first = lines.next().transpose()?.unwrap_or_default();
        let header = serde_json::from_str::<HeaderLine>(&first)?.header;
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                events.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { header, events })
    }
}

impl TimeModel {
    /// Travel at constant speeds plus fixed inspection and opening times.
    pub fn total(&self, chassis_length: f64, ee_length: f64, ee_poses: usize, opens: usize) -> f64 {
        chassis_length / self.base_speed
            + ee_length / self.ee_speed
            + ee_poses as f64 * self.inspect_seconds
            + opens as f64 * self.open_seconds
    }
}
