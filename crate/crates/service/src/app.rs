//! Study operations, independent of the HTTP layer.
//!
//! Each study has one writer (a mutex around its log) and an immutable
//! snapshot of its state behind an `Arc`. Readers clone the `Arc` and never
//! wait on a write in progress; writers append, fsync, then publish a new
//! snapshot.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use btties_core::dataset::Outcome;
use btties_core::{build_spatial_covariance, run_gibbs, summarize, PosteriorSummary, SamplerConfig};
use chrono::{SecondsFormat, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use crate::domain::{Judge, JudgementEvent, LogEvent, Study, StudyDefinition, StudyState, StudyStatus};
use crate::error::{ServiceError, ServiceResult};
use crate::scheduler;
use crate::store::{self, StudyLog, RESULTS_FILE};

pub const DEFAULT_COMPACT_EVERY: usize = 1000;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Seeds the pair scheduler; entropy when absent.
    pub seed: Option<u64>,
    /// Log lines between snapshot compactions; 0 disables compaction.
    pub compact_every: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            seed: None,
            compact_every: DEFAULT_COMPACT_EVERY,
        }
    }
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyInfo {
    pub id: Uuid,
    pub name: String,
    pub status: StudyStatus,
    pub created_at: String,
    pub n_wards: usize,
    pub regions: Vec<String>,
    pub target_comparisons: u32,
    pub has_adjacency: bool,
    pub n_judges: usize,
    pub n_events: usize,
}

impl StudyInfo {
    fn from_state(state: &StudyState) -> Self {
        let study = &state.study;
        Self {
            id: study.id,
            name: study.definition.name.clone(),
            status: study.status,
            created_at: study.created_at.clone(),
            n_wards: study.n_wards(),
            regions: study.regions(),
            target_comparisons: study.definition.target_comparisons,
            has_adjacency: study.definition.adjacency.is_some(),
            n_judges: state.judges.len(),
            n_events: state.events.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisterJudge {
    pub familiar_regions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeInfo {
    #[serde(flatten)]
    pub judge: Judge,
    pub target_comparisons: u32,
    pub familiar_wards: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WardCard {
    pub index: usize,
    pub label: String,
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Value>,
}

/// A pair to show a judge. `presentation_id` doubles as the idempotency key
/// for the judgement that answers it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPresentation {
    pub presentation_id: Uuid,
    pub left: WardCard,
    pub right: WardCard,
    pub comparisons_made: u64,
    pub target_comparisons: u32,
}

/// Payload of a judgement. Wards are labels; `ward_i` is the left card and
/// the outcome is relative to `(ward_i, ward_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitJudgement {
    pub ward_i: String,
    pub ward_j: String,
    pub outcome: Outcome,
    #[serde(default, alias = "presentation_id")]
    pub idempotency_key: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgementAck {
    pub seq: u64,
    pub comparisons_made: u64,
    pub target_comparisons: u32,
    /// True when the key had already been recorded and nothing was appended.
    pub duplicate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    #[serde(default)]
    pub config: SamplerConfig,
}

/// A fit and, once done, its summaries. Persisted to `results.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub fit_id: Uuid,
    pub study_id: Uuid,
    pub status: FitStatus,
    pub config: SamplerConfig,
    /// Last log sequence number included in the fitted dataset.
    pub dataset_seq: u64,
    pub n_comparisons: u64,
    pub started_at: String,
    #[serde(default)]
    pub finished_at: Option<String>,
    #[serde(default)]
    pub elapsed_secs: Option<f64>,
    #[serde(default)]
    pub summary: Option<PosteriorSummary>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug)]
struct StudyHandle {
    dir: PathBuf,
    snapshot: RwLock<Arc<StudyState>>,
    writer: Mutex<StudyLog>,
    fit: Mutex<Option<FitRecord>>,
}

impl StudyHandle {
    fn snapshot(&self) -> Arc<StudyState> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Applies an entry already on disk and publishes the new state.
    fn publish(&self, entry: LogEvent) -> ServiceResult<Arc<StudyState>> {
        let mut guard = self.snapshot.write().expect("snapshot lock");
        Arc::make_mut(&mut guard).apply(entry)?;
        Ok(guard.clone())
    }

    fn persist_fit(&self, record: &FitRecord) -> ServiceResult<()> {
        store::write_atomic(&self.dir.join(RESULTS_FILE), record)
    }
}

/// Shared service state; cheap to clone.
#[derive(Clone, Debug)]
pub struct App {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    config: ServiceConfig,
    studies: RwLock<HashMap<Uuid, Arc<StudyHandle>>>,
    creating: Mutex<()>,
    rng: Mutex<ChaCha8Rng>,
}

impl App {
    /// Opens `data_dir`, replaying every study found under `studies/`.
    pub fn open(config: ServiceConfig) -> ServiceResult<Self> {
        let root = config.data_dir.join("studies");
        fs::create_dir_all(&root)?;
        let mut studies = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            let (state, log) = StudyLog::open(&dir, config.compact_every)?;
            let fit = load_fit(&dir)?;
            let handle = StudyHandle {
                dir,
                snapshot: RwLock::new(Arc::new(state)),
                writer: Mutex::new(log),
                fit: Mutex::new(fit),
            };
            let id = handle.snapshot().study.id;
            studies.insert(id, Arc::new(handle));
        }
        tracing::info!(studies = studies.len(), data_dir = %config.data_dir.display(), "service state loaded");
        let rng = match config.seed {
            Some(seed) => ChaCha8Rng::seed_from_u64(seed),
            None => ChaCha8Rng::from_os_rng(),
        };
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                studies: RwLock::new(studies),
                creating: Mutex::new(()),
                rng: Mutex::new(rng),
            }),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.config.data_dir
    }

    fn handle(&self, id: Uuid) -> ServiceResult<Arc<StudyHandle>> {
        self.inner
            .studies
            .read()
            .expect("study table lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("study {id}")))
    }

    /// Latest published state of a study.
    pub fn state(&self, id: Uuid) -> ServiceResult<Arc<StudyState>> {
        Ok(self.handle(id)?.snapshot())
    }

    pub fn list_studies(&self) -> Vec<StudyInfo> {
        let table = self.inner.studies.read().expect("study table lock");
        let mut out: Vec<StudyInfo> = table.values().map(|h| StudyInfo::from_state(&h.snapshot())).collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        out
    }

    pub fn study_info(&self, id: Uuid) -> ServiceResult<StudyInfo> {
        Ok(StudyInfo::from_state(self.state(id)?.as_ref()))
    }

    /// Creates a study. Returns the study and whether it is new; a repeat of
    /// an earlier request (same client token, same payload) is not.
    pub fn create_study(&self, definition: StudyDefinition) -> ServiceResult<(StudyInfo, bool)> {
        definition.validate()?;
        let _creating = self.inner.creating.lock().expect("creation lock");
        if let Some(token) = &definition.client_token {
            let table = self.inner.studies.read().expect("study table lock");
            for handle in table.values() {
                let state = handle.snapshot();
                if state.study.definition.client_token.as_ref() == Some(token) {
                    if state.study.definition == definition {
                        return Ok((StudyInfo::from_state(&state), false));
                    }
                    return Err(ServiceError::Conflict(format!(
                        "client token `{token}` was used for a different study definition"
                    )));
                }
            }
        }
        let study = Study::new(definition, now())?;
        let dir = self.inner.config.data_dir.join("studies").join(study.id.to_string());
        let state = StudyState::new(study);
        let log = StudyLog::create(&dir, &state, self.inner.config.compact_every)?;
        let info = StudyInfo::from_state(&state);
        let handle = StudyHandle {
            dir,
            snapshot: RwLock::new(Arc::new(state)),
            writer: Mutex::new(log),
            fit: Mutex::new(None),
        };
        self.inner.studies.write().expect("study table lock").insert(info.id, Arc::new(handle));
        tracing::info!(study = %info.id, wards = info.n_wards, "study created");
        Ok((info, true))
    }

    pub fn register_judge(&self, study_id: Uuid, request: RegisterJudge) -> ServiceResult<JudgeInfo> {
        let handle = self.handle(study_id)?;
        let mut log = handle.writer.lock().expect("writer lock");
        let state = handle.snapshot();
        let known = state.study.regions();
        let mut familiar: Vec<String> = Vec::new();
        for region in request.familiar_regions {
            if !known.contains(&region) {
                return Err(ServiceError::Validation(format!("unknown region `{region}`")));
            }
            if !familiar.contains(&region) {
                familiar.push(region);
            }
        }
        if familiar.is_empty() {
            return Err(ServiceError::Validation("a judge must be familiar with at least one region".into()));
        }
        let judge = Judge {
            id: Uuid::new_v4(),
            study_id,
            familiar_regions: familiar,
            comparisons_made: 0,
            registered_at: now(),
        };
        let entry = LogEvent::JudgeRegistered {
            seq: state.next_seq(),
            judge: judge.clone(),
        };
        log.append(&entry)?;
        let state = handle.publish(entry)?;
        compact_quietly(&mut log, &state);
        judge_info(&state, judge.id)
    }

    pub fn judge(&self, study_id: Uuid, judge_id: Uuid) -> ServiceResult<JudgeInfo> {
        judge_info(self.state(study_id)?.as_ref(), judge_id)
    }

    pub fn next_pair(&self, study_id: Uuid, judge_id: Uuid) -> ServiceResult<PairPresentation> {
        let state = self.state(study_id)?;
        let judge = state.judge(judge_id)?;
        let familiar = state.familiar_wards(judge_id)?;
        let pair = {
            let mut rng = self.inner.rng.lock().expect("scheduler lock");
            scheduler::next_pair(&familiar, &mut *rng)?
        };
        let card = |k: usize| {
            let w = &state.study.definition.wards[k];
            WardCard {
                index: k,
                label: w.label.clone(),
                region: w.region.clone(),
                geometry: w.geometry.clone(),
            }
        };
        Ok(PairPresentation {
            presentation_id: Uuid::new_v4(),
            left: card(pair.left),
            right: card(pair.right),
            comparisons_made: judge.comparisons_made,
            target_comparisons: state.study.definition.target_comparisons,
        })
    }

    /// Records a judgement durably. A repeated idempotency key returns the
    /// original acknowledgement without appending.
    pub fn record_judgement(
        &self,
        study_id: Uuid,
        judge_id: Uuid,
        request: SubmitJudgement,
    ) -> ServiceResult<JudgementAck> {
        let handle = self.handle(study_id)?;
        let mut log = handle.writer.lock().expect("writer lock");
        let state = handle.snapshot();
        let judge = state.judge(judge_id)?;
        let target_comparisons = state.study.definition.target_comparisons;
        let resolve = |label: &str| {
            state
                .study
                .index_of(label)
                .ok_or_else(|| ServiceError::Validation(format!("unknown ward `{label}`")))
        };
        let (ward_i, ward_j) = (resolve(&request.ward_i)?, resolve(&request.ward_j)?);

        if let Some(key) = &request.idempotency_key {
            if let Some(&pos) = state.keys.get(key) {
                let prior = &state.events[pos];
                if prior.judge_id != judge_id
                    || prior.ward_i != ward_i
                    || prior.ward_j != ward_j
                    || prior.outcome != request.outcome
                {
                    return Err(ServiceError::Conflict(format!(
                        "idempotency key `{key}` was used for a different judgement"
                    )));
                }
                return Ok(JudgementAck {
                    seq: prior.seq,
                    comparisons_made: judge.comparisons_made,
                    target_comparisons,
                    duplicate: true,
                });
            }
        }

        if ward_i == ward_j {
            return Err(ServiceError::Validation("a ward cannot be compared with itself".into()));
        }
        let familiar = state.study.wards_in(&judge.familiar_regions);
        for (k, label) in [(ward_i, &request.ward_i), (ward_j, &request.ward_j)] {
            if !familiar.contains(&k) {
                return Err(ServiceError::Validation(format!(
                    "ward `{label}` is outside the judge's familiar regions"
                )));
            }
        }

        let event = JudgementEvent {
            seq: state.next_seq(),
            study_id,
            judge_id,
            ward_i,
            ward_j,
            outcome: request.outcome,
            timestamp: now(),
            idempotency_key: request.idempotency_key,
        };
        let seq = event.seq;
        let entry = LogEvent::JudgementRecorded { event };
        log.append(&entry)?;
        let state = handle.publish(entry)?;
        compact_quietly(&mut log, &state);
        Ok(JudgementAck {
            seq,
            comparisons_made: state.judge(judge_id)?.comparisons_made,
            target_comparisons,
            duplicate: false,
        })
    }

    pub fn export(&self, study_id: Uuid) -> ServiceResult<crate::domain::ExportSummary> {
        self.state(study_id)?.export()
    }

    /// Raw events as judgement CSV, wards by label.
    pub fn export_csv(&self, study_id: Uuid) -> ServiceResult<Vec<u8>> {
        let state = self.state(study_id)?;
        let mut out = Vec::new();
        btties_core::dataset::write_judgements_csv(&mut out, &state.judgements(), &state.study.labels())?;
        Ok(out)
    }

    /// Labels, regions and a FeatureCollection for the map cards.
    pub fn wards(&self, study_id: Uuid) -> ServiceResult<Value> {
        let state = self.state(study_id)?;
        let study = &state.study;
        let mut geojson = study.graph()?.to_geojson();
        if let Some(features) = geojson.get_mut("features").and_then(Value::as_array_mut) {
            for (feature, ward) in features.iter_mut().zip(&study.definition.wards) {
                feature["properties"]["region"] = Value::String(ward.region.clone());
            }
        }
        let wards: Vec<Value> = study
            .definition
            .wards
            .iter()
            .map(|w| serde_json::json!({ "label": w.label, "region": w.region }))
            .collect();
        Ok(serde_json::json!({
            "study_id": study.id,
            "wards": wards,
            "regions": study.regions(),
            "geojson": geojson,
        }))
    }

    /// Validates a fit request against the current dataset and marks the
    /// study's fit slot as running. The returned job does the work.
    pub fn start_fit(&self, study_id: Uuid, request: FitRequest) -> ServiceResult<(FitRecord, FitJob)> {
        let handle = self.handle(study_id)?;
        let mut slot = handle.fit.lock().expect("fit lock");
        if slot.as_ref().is_some_and(|f| f.status == FitStatus::Running) {
            return Err(ServiceError::Conflict("a fit is already running for this study".into()));
        }
        let state = handle.snapshot();
        if state.study.definition.adjacency.is_none() {
            return Err(ServiceError::Validation("the study has no adjacency list".into()));
        }
        let dataset = state.dataset()?;
        if dataset.n_comparisons() == 0 {
            return Err(ServiceError::Validation("the study has no comparisons to fit".into()));
        }
        request.config.validate().map_err(|e| ServiceError::Validation(e.to_string()))?;
        let graph = state.study.graph()?;
        let record = FitRecord {
            fit_id: Uuid::new_v4(),
            study_id,
            status: FitStatus::Running,
            config: request.config.clone(),
            dataset_seq: state.last_seq,
            n_comparisons: dataset.n_comparisons(),
            started_at: now(),
            finished_at: None,
            elapsed_secs: None,
            summary: None,
            error: None,
        };
        handle.persist_fit(&record)?;
        *slot = Some(record.clone());
        drop(slot);
        let job = FitJob {
            handle,
            record: record.clone(),
            dataset,
            graph,
        };
        Ok((record, job))
    }

    pub fn results(&self, study_id: Uuid) -> ServiceResult<FitRecord> {
        let handle = self.handle(study_id)?;
        let slot = handle.fit.lock().expect("fit lock");
        slot.clone()
            .ok_or_else(|| ServiceError::NotFound(format!("no fit has been run for study {study_id}")))
    }
}

/// Fits one dataset snapshot; run it on a blocking thread.
pub struct FitJob {
    handle: Arc<StudyHandle>,
    record: FitRecord,
    dataset: btties_core::ComparisonDataset,
    graph: btties_core::WardGraph,
}

impl FitJob {
    pub fn run(self) -> FitRecord {
        let FitJob {
            handle,
            mut record,
            dataset,
            graph,
        } = self;
        let outcome = build_spatial_covariance(&graph, 1.0)
            .and_then(|prior| run_gibbs(&dataset, &prior, &record.config))
            .map(|samples| (summarize(&samples, graph.labels()), samples.elapsed_secs));
        record.finished_at = Some(now());
        match outcome {
            Ok((summary, elapsed)) => {
                record.status = FitStatus::Completed;
                record.elapsed_secs = Some(elapsed);
                record.summary = Some(summary);
            }
            Err(e) => {
                tracing::warn!(study = %record.study_id, error = %e, "fit failed");
                record.status = FitStatus::Failed;
                record.error = Some(e.to_string());
            }
        }
        if let Err(e) = handle.persist_fit(&record) {
            tracing::error!(study = %record.study_id, error = %e, "could not persist fit results");
        }
        *handle.fit.lock().expect("fit lock") = Some(record.clone());
        record
    }
}

fn judge_info(state: &StudyState, judge_id: Uuid) -> ServiceResult<JudgeInfo> {
    let judge = state.judge(judge_id)?.clone();
    let familiar_wards = state.study.wards_in(&judge.familiar_regions).len();
    Ok(JudgeInfo {
        judge,
        target_comparisons: state.study.definition.target_comparisons,
        familiar_wards,
    })
}

/// The entry is already durable, so a failed compaction is only logged.
fn compact_quietly(log: &mut StudyLog, state: &StudyState) {
    if let Err(e) = log.maybe_compact(state) {
        tracing::warn!(dir = %log.dir().display(), error = %e, "snapshot compaction failed");
    }
}

/// A fit left running by a previous process cannot finish; mark it failed.
fn load_fit(dir: &Path) -> ServiceResult<Option<FitRecord>> {
    let path = dir.join(RESULTS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let mut record: FitRecord = serde_json::from_slice(&fs::read(&path)?)?;
    if record.status == FitStatus::Running {
        record.status = FitStatus::Failed;
        record.error = Some("interrupted by a service restart".into());
        store::write_atomic(&path, &record)?;
    }
    Ok(Some(record))
}
