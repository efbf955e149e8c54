//! Studies, judges and judgement events, and the in-memory state rebuilt from
//! a study's event log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use btties_core::dataset::{ComparisonDataset, Judgement, Outcome};
use btties_core::WardGraph;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use crate::error::{ServiceError, ServiceResult};

pub const DEFAULT_TARGET_COMPARISONS: u32 = 30;

fn default_target() -> u32 {
    DEFAULT_TARGET_COMPARISONS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardDefinition {
    pub label: String,
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Value>,
}

/// Payload of `POST /studies`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyDefinition {
    pub name: String,
    pub wards: Vec<WardDefinition>,
    /// Neighbouring ward pairs by label. Required before a fit can run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<(String, String)>>,
    /// FeatureCollection whose features carry a `name` property matching a
    /// ward label; merged into the ward geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geojson: Option<Value>,
    #[serde(default = "default_target")]
    pub target_comparisons: u32,
    /// Retrying a creation with the same token and payload returns the
    /// original study instead of a new one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_token: Option<String>,
}

impl StudyDefinition {
    pub fn validate(&self) -> ServiceResult<()> {
        if self.name.trim().is_empty() {
            return Err(ServiceError::Validation("study name is empty".into()));
        }
        if self.wards.is_empty() {
            return Err(ServiceError::Validation("ward table is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for w in &self.wards {
            if w.label.trim().is_empty() {
                return Err(ServiceError::Validation("ward label is empty".into()));
            }
            if w.region.trim().is_empty() {
                return Err(ServiceError::Validation(format!("ward `{}` has no region", w.label)));
            }
            if !seen.insert(w.label.as_str()) {
                return Err(ServiceError::Validation(format!("duplicate ward label `{}`", w.label)));
            }
        }
        if self.target_comparisons == 0 {
            return Err(ServiceError::Validation("target comparisons must be positive".into()));
        }
        if let Some(edges) = &self.adjacency {
            for (a, b) in edges {
                for label in [a, b] {
                    if !seen.contains(label.as_str()) {
                        return Err(ServiceError::Validation(format!("adjacency names unknown ward `{label}`")));
                    }
                }
                if a == b {
                    return Err(ServiceError::Validation(format!("ward `{a}` is listed as its own neighbour")));
                }
            }
        }
        if let Some(geo) = &self.geojson {
            if !geo.get("features").is_some_and(Value::is_array) {
                return Err(ServiceError::Validation("geojson must be a FeatureCollection".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyStatus {
    Active,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: Uuid,
    pub created_at: String,
    pub status: StudyStatus,
    pub definition: StudyDefinition,
}

impl Study {
    pub fn new(definition: StudyDefinition, created_at: String) -> ServiceResult<Self> {
        definition.validate()?;
        Ok(Self {
            id: Uuid::new_v4(),
            created_at,
            status: StudyStatus::Active,
            definition,
        })
    }

    pub fn n_wards(&self) -> usize {
        self.definition.wards.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.definition.wards.iter().map(|w| w.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.definition.wards.iter().position(|w| w.label == label)
    }

    /// Distinct regions in order of first appearance.
    pub fn regions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for w in &self.definition.wards {
            if !out.contains(&w.region) {
                out.push(w.region.clone());
            }
        }
        out
    }

    /// Indices of the wards lying in any of `regions`, ascending.
    pub fn wards_in(&self, regions: &[String]) -> Vec<usize> {
        self.definition
            .wards
            .iter()
            .enumerate()
            .filter(|(_, w)| regions.contains(&w.region))
            .map(|(k, _)| k)
            .collect()
    }

    /// Ward graph with geometry attached: inline ward geometry first, then
    /// any features of the study's FeatureCollection. Without an adjacency
    /// list the graph has no edges.
    pub fn graph(&self) -> ServiceResult<WardGraph> {
        let edges = match &self.definition.adjacency {
            Some(list) => list
                .iter()
                .map(|(a, b)| (self.index_of(a).expect("validated"), self.index_of(b).expect("validated")))
                .collect(),
            None => Vec::new(),
        };
        let mut graph = WardGraph::from_edges(self.labels(), edges)?;
        let inline: Vec<Value> = self
            .definition
            .wards
            .iter()
            .filter_map(|w| {
                w.geometry.as_ref().map(|g| {
                    serde_json::json!({ "type": "Feature", "properties": { "name": w.label }, "geometry": g })
                })
            })
            .collect();
        graph.attach_geojson(&serde_json::json!({ "features": inline }))?;
        if let Some(geo) = &self.definition.geojson {
            graph.attach_geojson(geo)?;
        }
        Ok(graph)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Judge {
    pub id: Uuid,
    pub study_id: Uuid,
    pub familiar_regions: Vec<String>,
    pub comparisons_made: u64,
    pub registered_at: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgementEvent {
    pub seq: u64,
    pub study_id: Uuid,
    pub judge_id: Uuid,
    pub ward_i: usize,
    pub ward_j: usize,
    pub outcome: Outcome,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

/// One line of a study's event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    StudyCreated { seq: u64, study: Study },
    JudgeRegistered { seq: u64, judge: Judge },
    JudgementRecorded { event: JudgementEvent },
}

impl LogEvent {
    pub fn seq(&self) -> u64 {
        match self {
            LogEvent::StudyCreated { seq, .. } | LogEvent::JudgeRegistered { seq, .. } => *seq,
            LogEvent::JudgementRecorded { event } => event.seq,
        }
    }
}

/// Everything known about a study, as a fold over its log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyState {
    pub study: Study,
    pub judges: BTreeMap<Uuid, Judge>,
    pub events: Vec<JudgementEvent>,
    /// Idempotency key to position in `events`.
    pub keys: HashMap<String, usize>,
    pub last_seq: u64,
}

impl StudyState {
    /// State right after creation; the creation event is sequence 1.
    pub fn new(study: Study) -> Self {
        Self {
            study,
            judges: BTreeMap::new(),
            events: Vec::new(),
            keys: HashMap::new(),
            last_seq: 1,
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq + 1
    }

    pub fn judge(&self, id: Uuid) -> ServiceResult<&Judge> {
        self.judges.get(&id).ok_or(ServiceError::NotFound(format!("judge {id}")))
    }

    /// Familiar ward indices of a judge.
    pub fn familiar_wards(&self, judge: Uuid) -> ServiceResult<Vec<usize>> {
        Ok(self.study.wards_in(&self.judge(judge)?.familiar_regions))
    }

    /// Applies one log line. Sequence numbers must increase.
    pub fn apply(&mut self, entry: LogEvent) -> ServiceResult<()> {
        let seq = entry.seq();
        if seq <= self.last_seq {
            return Err(ServiceError::Corrupt(format!("sequence {seq} after {}", self.last_seq)));
        }
        match entry {
            LogEvent::StudyCreated { .. } => {
                return Err(ServiceError::Corrupt("study created twice".into()));
            }
            LogEvent::JudgeRegistered { judge, .. } => {
                self.judges.insert(judge.id, judge);
            }
            LogEvent::JudgementRecorded { event } => {
                let judge = self
                    .judges
                    .get_mut(&event.judge_id)
                    .ok_or_else(|| ServiceError::Corrupt(format!("event {seq} names unknown judge")))?;
                judge.comparisons_made += 1;
                if let Some(key) = &event.idempotency_key {
                    self.keys.insert(key.clone(), self.events.len());
                }
                self.events.push(event);
            }
        }
        self.last_seq = seq;
        Ok(())
    }

    /// Raw events in the core representation, judge ids as strings.
    pub fn judgements(&self) -> Vec<Judgement> {
        self.events
            .iter()
            .map(|e| Judgement {
                judge_id: e.judge_id.to_string(),
                ward_i: e.ward_i,
                ward_j: e.ward_j,
                outcome: e.outcome,
                timestamp: e.timestamp.clone(),
            })
            .collect()
    }

    /// The likelihood dataset: a fold over the events in log order.
    pub fn dataset(&self) -> ServiceResult<ComparisonDataset> {
        Ok(ComparisonDataset::from_judgements(self.study.n_wards(), self.judgements())?)
    }

    pub fn export(&self) -> ServiceResult<ExportSummary> {
        let data = self.dataset()?;
        let n = data.n_wards();
        let wins: Vec<Vec<u32>> = (0..n).map(|i| (0..n).map(|j| data.wins(i, j)).collect()).collect();
        let ties: Vec<Vec<u32>> = (0..n).map(|i| (0..n).map(|j| data.ties(i, j)).collect()).collect();
        let comparisons = data.n_comparisons();
        let tie_events = data.tie_events();
        let tie_share = if comparisons == 0 { 0.0 } else { tie_events as f64 / comparisons as f64 };
        Ok(ExportSummary {
            study_id: self.study.id,
            labels: self.study.labels(),
            total_events: self.events.len() as u64,
            comparisons,
            tie_events,
            skips: data.skips(),
            tie_share,
            tie_percentage: format!("{:.1}%", 100.0 * tie_share),
            wins,
            ties,
            events: self.events.clone(),
        })
    }
}

/// JSON export: count matrices, totals and the raw events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub study_id: Uuid,
    pub labels: Vec<String>,
    pub total_events: u64,
    /// Judgements entering the likelihood (wins and ties, not skips).
    pub comparisons: u64,
    pub tie_events: u64,
    pub skips: u64,
    pub tie_share: f64,
    pub tie_percentage: String,
    pub wins: Vec<Vec<u32>>,
    pub ties: Vec<Vec<u32>>,
    pub events: Vec<JudgementEvent>,
}
