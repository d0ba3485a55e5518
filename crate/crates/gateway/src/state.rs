//! Mutable server state: sessions, read events, surveys and opinions, each
//! behind its own lock so appends to one file are serialized, plus a map
//! cache whose rebuilds are exclusive per topic.

use crate::api::ApiError;
use crate::engine::Engine;
use crate::store::{JsonlStore, Session, UserOpinion};
use crate::GatewayError;
use hearhere_core::corpus::Comment;
use hearhere_core::feed::{consumption_report, FeedError, ReadEvent, ReadKind, ReadLog};
use hearhere_core::opinion_map::OpinionMap;
use hearhere_core::study::{
    declared_stances, study_report, Demographics, Phase, StudyError, StudyReport, SurveyLog,
    SurveyRecord,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const READS_FILE: &str = "reads.jsonl";
pub const SURVEYS_FILE: &str = "surveys.jsonl";
pub const OPINIONS_FILE: &str = "opinions.jsonl";
/// Binary stance of every served article, for offline consumption reports.
pub const ARTICLE_STANCES_FILE: &str = "article_stances.json";

/// Complete pre/post pairs needed before a report is produced.
pub const MIN_REPORT_PAIRS: usize = 2;

/// A session as shown to its owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub participant: String,
    pub created: u64,
    pub demographics: Option<Demographics>,
    pub pre_survey: bool,
    pub post_survey: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    /// Bearer token for the session header.
    pub session_id: String,
    pub participant: String,
    pub created: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionAck {
    pub opinion: UserOpinion,
    pub map: OpinionMap,
}

struct Sessions {
    store: JsonlStore<StoredSession>,
    by_token: HashMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredSession {
    token: String,
    #[serde(flatten)]
    session: Session,
}

struct Reads {
    log: ReadLog,
    last: u64,
}

type MapKey = (String, String);

pub struct AppState {
    engine: Arc<Engine>,
    sessions: Mutex<Sessions>,
    reads: Mutex<Reads>,
    surveys: Mutex<SurveyLog>,
    opinions: Mutex<JsonlStore<UserOpinion>>,
    maps: Mutex<HashMap<MapKey, Arc<OpinionMap>>>,
    community_maps: Mutex<HashMap<String, Arc<OpinionMap>>>,
    topic_locks: BTreeMap<String, tokio::sync::Mutex<()>>,
    read_kind: ReadKind,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AppState {
    /// Opens (creating if needed) the data directory and replays its logs.
    pub fn open(
        engine: Arc<Engine>,
        data_dir: &Path,
        read_kind: ReadKind,
    ) -> Result<Arc<Self>, GatewayError> {
        std::fs::create_dir_all(data_dir)?;
        let store = JsonlStore::<StoredSession>::open(&data_dir.join(SESSIONS_FILE))?;
        let by_token = store
            .items()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.token.clone(), i))
            .collect();
        let log = ReadLog::open(data_dir.join(READS_FILE))?;
        let last = log.events().iter().map(|e| e.timestamp).max().unwrap_or(0);
        let surveys = SurveyLog::open(data_dir.join(SURVEYS_FILE))?;
        let opinions = JsonlStore::open(&data_dir.join(OPINIONS_FILE))?;
        let stances = serde_json::to_string_pretty(engine.article_stances())?;
        let tmp = data_dir.join(format!("{ARTICLE_STANCES_FILE}.tmp"));
        std::fs::write(&tmp, stances)?;
        std::fs::rename(&tmp, data_dir.join(ARTICLE_STANCES_FILE))?;
        let topic_locks = engine
            .topics()
            .iter()
            .map(|t| (t.topic.id.clone(), tokio::sync::Mutex::new(())))
            .collect();
        Ok(Arc::new(Self {
            engine,
            sessions: Mutex::new(Sessions { store, by_token }),
            reads: Mutex::new(Reads { log, last }),
            surveys: Mutex::new(surveys),
            opinions: Mutex::new(opinions),
            maps: Mutex::new(HashMap::new()),
            community_maps: Mutex::new(HashMap::new()),
            topic_locks,
            read_kind,
        }))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn create_session(&self) -> Result<NewSession, ApiError> {
        let mut s = lock(&self.sessions);
        let token = uuid::Uuid::new_v4().simple().to_string();
        let participant = format!("p{:04}", s.store.items().len() + 1);
        let session = Session {
            id: participant.clone(),
            created: now_ms(),
        };
        s.store.append(StoredSession {
            token: token.clone(),
            session: session.clone(),
        })?;
        let idx = s.store.items().len() - 1;
        s.by_token.insert(token.clone(), idx);
        Ok(NewSession {
            session_id: token,
            participant,
            created: session.created,
        })
    }

    /// Participant id behind a session token.
    pub fn participant(&self, token: &str) -> Result<Session, ApiError> {
        let s = lock(&self.sessions);
        s.by_token
            .get(token)
            .map(|&i| s.store.items()[i].session.clone())
            .ok_or_else(|| ApiError::unauthorized("unknown session"))
    }

    pub fn session_view(&self, session: &Session) -> SessionView {
        let surveys = lock(&self.surveys);
        let demographics = surveys
            .records()
            .iter()
            .find(|r| r.participant_id == session.id && r.phase == Phase::Pre)
            .and_then(|r| r.demographics.clone());
        SessionView {
            participant: session.id.clone(),
            created: session.created,
            demographics,
            pre_survey: surveys.has(&session.id, Phase::Pre),
            post_survey: surveys.has(&session.id, Phase::Post),
        }
    }

    pub fn record_read(
        &self,
        participant: &str,
        article_id: &str,
        kind: ReadKind,
    ) -> Result<ReadEvent, ApiError> {
        let article = self
            .engine
            .article(article_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown article {article_id}")))?;
        let mut reads = lock(&self.reads);
        let timestamp = now_ms().max(reads.last);
        let event = ReadEvent {
            session_id: participant.to_string(),
            article_id: article.id.clone(),
            topic_id: article.topic_id.clone(),
            timestamp,
            kind,
        };
        reads
            .log
            .record(event.clone(), |id| self.engine.article(id).is_some())
            .map_err(|e| match e {
                FeedError::UnknownArticle(_) => ApiError::not_found(e.to_string()),
                other => ApiError::internal(other.to_string()),
            })?;
        reads.last = timestamp;
        Ok(event)
    }

    pub fn submit_survey(
        &self,
        participant: &str,
        phase: Phase,
        answers: [u8; 5],
        demographics: Option<Demographics>,
    ) -> Result<SurveyRecord, ApiError> {
        let mut surveys = lock(&self.surveys);
        if surveys.has(participant, phase) {
            return Err(ApiError::conflict(
                format!("{phase:?} survey already submitted").to_lowercase(),
            ));
        }
        if phase == Phase::Post && !surveys.has(participant, Phase::Pre) {
            return Err(ApiError::conflict("the pre-survey must be submitted first"));
        }
        let record = SurveyRecord {
            participant_id: participant.to_string(),
            phase,
            answers,
            demographics,
        };
        surveys.record(record.clone()).map_err(|e| match e {
            StudyError::BadLikert { .. }
            | StudyError::MissingDemographics(_)
            | StudyError::Invalid(_) => ApiError::unprocessable(e.to_string()),
            StudyError::Duplicate { .. } => ApiError::conflict(e.to_string()),
            other => ApiError::internal(other.to_string()),
        })?;
        Ok(record)
    }

    pub fn report(&self, alpha: f64) -> Result<StudyReport, ApiError> {
        let records = lock(&self.surveys).records().to_vec();
        let events = lock(&self.reads).log.events().to_vec();
        let complete = records
            .iter()
            .filter(|r| r.phase == Phase::Post)
            .filter(|r| {
                records
                    .iter()
                    .any(|p| p.phase == Phase::Pre && p.participant_id == r.participant_id)
            })
            .count();
        if complete < MIN_REPORT_PAIRS {
            return Err(ApiError::conflict(format!(
                "a report needs at least {MIN_REPORT_PAIRS} complete pre/post pairs, have {complete}"
            )));
        }
        let consumption = consumption_report(
            &events,
            &declared_stances(&records),
            self.engine.article_stances(),
            self.read_kind,
        );
        study_report(&records, alpha, Some(consumption)).map_err(|e| match e {
            StudyError::Domain(_) => ApiError::bad_request(e.to_string()),
            other => ApiError::internal(other.to_string()),
        })
    }

    fn user_comments(&self, topic: &str, participant: &str) -> Result<Vec<Comment>, ApiError> {
        let opinions = lock(&self.opinions);
        opinions
            .items()
            .iter()
            .filter(|o| o.topic == topic && o.session == participant)
            .map(|o| o.to_comment().map_err(ApiError::from))
            .collect()
    }

    fn topic_lock(&self, topic: &str) -> Result<&tokio::sync::Mutex<()>, ApiError> {
        if !self.engine.is_available(topic) {
            return Err(ApiError::not_found(format!("unknown topic {topic}")));
        }
        Ok(&self.topic_locks[topic])
    }

    async fn build(
        self: &Arc<Self>,
        topic: &str,
        user: Vec<Comment>,
    ) -> Result<Arc<OpinionMap>, ApiError> {
        let state = Arc::clone(self);
        let topic = topic.to_string();
        let map = tokio::task::spawn_blocking(move || state.engine.map(&topic, &user))
            .await
            .map_err(|e| ApiError::internal(format!("map build panicked: {e}")))??;
        Ok(Arc::new(map))
    }

    /// The topic map with this participant's opinions, or the community-only
    /// map when there is no participant.
    pub async fn map(
        self: &Arc<Self>,
        topic: &str,
        participant: Option<&str>,
    ) -> Result<Arc<OpinionMap>, ApiError> {
        let guard = self.topic_lock(topic)?.lock().await;
        let user = match participant {
            Some(p) => self.user_comments(topic, p)?,
            None => Vec::new(),
        };
        let map = if user.is_empty() {
            if let Some(m) = lock(&self.community_maps).get(topic) {
                return Ok(Arc::clone(m));
            }
            let m = self.build(topic, user).await?;
            lock(&self.community_maps).insert(topic.to_string(), Arc::clone(&m));
            m
        } else {
            let key = (
                topic.to_string(),
                participant
                    .expect("user comments imply a participant")
                    .to_string(),
            );
            if let Some(m) = lock(&self.maps).get(&key) {
                return Ok(Arc::clone(m));
            }
            let m = self.build(topic, user).await?;
            lock(&self.maps).insert(key, Arc::clone(&m));
            m
        };
        drop(guard);
        Ok(map)
    }

    /// Stores an opinion and returns the participant's rebuilt map.
    pub async fn submit_opinion(
        self: &Arc<Self>,
        topic: &str,
        participant: &str,
        text: Option<String>,
        example_id: Option<String>,
    ) -> Result<OpinionAck, ApiError> {
        let guard = self.topic_lock(topic)?.lock().await;
        let text = match (text, &example_id) {
            (Some(_), Some(_)) => {
                return Err(ApiError::bad_request(
                    "give either text or example_id, not both",
                ))
            }
            (Some(t), None) => t,
            (None, Some(id)) => self
                .engine
                .example(topic, id)
                .ok_or_else(|| {
                    ApiError::not_found(format!("unknown example {id} for topic {topic}"))
                })?
                .text
                .clone(),
            (None, None) => return Err(ApiError::bad_request("text or example_id is required")),
        };
        if text.trim().is_empty() {
            return Err(ApiError::bad_request("opinion text is empty"));
        }
        let opinion = {
            let mut opinions = lock(&self.opinions);
            let stored = opinions.items().iter().filter(|o| o.topic == topic).count();
            if stored >= self.engine.max_comments_per_topic() {
                return Err(ApiError::conflict(format!(
                    "topic {topic} holds the maximum of {stored} opinions"
                )));
            }
            let opinion = UserOpinion {
                id: format!("user-{:06}", opinions.items().len() + 1),
                topic: topic.to_string(),
                session: participant.to_string(),
                text,
                example_id,
            };
            opinion
                .to_comment()
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            opinions.append(opinion)?.clone()
        };
        let user = self.user_comments(topic, participant)?;
        let map = self.build(topic, user).await?;
        lock(&self.maps).insert(
            (topic.to_string(), participant.to_string()),
            Arc::clone(&map),
        );
        drop(guard);
        Ok(OpinionAck {
            opinion,
            map: (*map).clone(),
        })
    }
}
