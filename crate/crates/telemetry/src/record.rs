//! Session payloads, their validation, and the stored record.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use teamtime_core::sim::{Batch, EventKind, SessionTrace};

/// Event kinds accepted from clients: the simulator's kinds plus the game's drag events.
pub const EVENT_KINDS: [&str; 9] = [
    "OrderStart",
    "ItemPacked",
    "PackRejected",
    "RobotArrived",
    "RobotPickedUp",
    "OrderSent",
    "SessionEnd",
    "DragStart",
    "DragDrop",
];

/// Orders per game session; a record is complete with this many OrderSent events.
pub const ORDERS_PER_SESSION: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientEvent {
    pub t_ms: u64,
    pub kind: String,
    #[serde(default)]
    pub payload: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub id: String,
    pub score: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survey {
    pub items: Vec<SurveyItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Request body of `POST /v1/sessions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPayload {
    pub session_id: String,
    pub worker_id: String,
    pub client_version: String,
    pub events: Vec<ClientEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<Survey>,
}

impl SessionPayload {
    /// Wire form of a simulated session.
    pub fn from_trace(
        session_id: impl Into<String>,
        worker_id: impl Into<String>,
        client_version: impl Into<String>,
        trace: &SessionTrace,
        survey: Option<Survey>,
    ) -> Self {
        let events = trace
            .events
            .iter()
            .map(|e| {
                let payload = match serde_json::to_value(&e.payload) {
                    Ok(Value::Object(m)) => m,
                    _ => Map::new(),
                };
                ClientEvent {
                    t_ms: e.t_ms,
                    kind: e.kind.as_str().to_string(),
                    payload,
                }
            })
            .collect();
        Self {
            session_id: session_id.into(),
            worker_id: worker_id.into(),
            client_version: client_version.into(),
            events,
            survey,
        }
    }

    /// One payload per simulated session, ids matching [`Batch::session_id`].
    /// Each session gets its own worker and a full survey.
    pub fn from_batch(batch: &Batch, client_version: &str) -> Vec<Self> {
        batch
            .sessions
            .iter()
            .enumerate()
            .map(|(i, trace)| {
                let id = batch.session_id(i);
                let survey = Survey {
                    items: (1..=3)
                        .map(|q| SurveyItem {
                            id: format!("q{q}"),
                            score: (trace.seed % 5) as u8 + 1,
                        })
                        .collect(),
                    text: None,
                };
                Self::from_trace(id.clone(), format!("worker-{id}"), client_version, trace, Some(survey))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Every problem found in a payload, with the JSON path of the offending field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationErrors {
    pub fields: Vec<FieldError>,
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.fields.iter().map(|e| format!("{}: {}", e.field, e.message)).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str, nonempty: bool) -> Option<String> {
        match obj.get(key) {
            Some(Value::String(s)) if nonempty && s.is_empty() => {
                self.fail(key, "must not be empty");
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.fail(key, "must be a string");
                None
            }
            None => {
                self.fail(key, "is required");
                None
            }
        }
    }
}

/// Validates a raw JSON body against the telemetry schema.
pub fn validate_payload(body: &Value) -> Result<SessionPayload, ValidationErrors> {
    let mut c = Checker { errors: Vec::new() };
    let Some(obj) = body.as_object() else {
        c.fail("$", "body must be a JSON object");
        return Err(ValidationErrors { fields: c.errors });
    };
    let session_id = c.string(obj, "session_id", true);
    let worker_id = c.string(obj, "worker_id", true);
    let client_version = c.string(obj, "client_version", false);

    let mut events = Vec::new();
    match obj.get("events") {
        Some(Value::Array(list)) => {
            let mut prev = 0u64;
            for (i, e) in list.iter().enumerate() {
                let at = |f: &str| format!("events[{i}].{f}");
                let Some(e) = e.as_object() else {
                    c.fail(format!("events[{i}]"), "must be an object");
                    continue;
                };
                let t_ms = match e.get("t_ms").map(Value::as_u64) {
                    Some(Some(t)) => Some(t),
                    Some(None) => {
                        c.fail(at("t_ms"), "must be a nonnegative integer");
                        None
                    }
                    None => {
                        c.fail(at("t_ms"), "is required");
                        None
                    }
                };
                if let Some(t) = t_ms {
                    if t < prev {
                        c.fail(at("t_ms"), format!("decreases ({t} after {prev})"));
                    }
                    prev = prev.max(t);
                }
                let kind = match e.get("kind") {
                    Some(Value::String(k)) if EVENT_KINDS.contains(&k.as_str()) => Some(k.clone()),
                    Some(Value::String(k)) => {
                        c.fail(at("kind"), format!("unknown event kind `{k}` (expected one of {})", EVENT_KINDS.join(", ")));
                        None
                    }
                    Some(_) => {
                        c.fail(at("kind"), "must be a string");
                        None
                    }
                    None => {
                        c.fail(at("kind"), "is required");
                        None
                    }
                };
                let payload = match e.get("payload") {
                    None | Some(Value::Null) => Some(Map::new()),
                    Some(Value::Object(m)) => Some(m.clone()),
                    Some(_) => {
                        c.fail(at("payload"), "must be an object");
                        None
                    }
                };
                if let (Some(t_ms), Some(kind), Some(payload)) = (t_ms, kind, payload) {
                    events.push(ClientEvent { t_ms, kind, payload });
                }
            }
        }
        Some(_) => c.fail("events", "must be an array"),
        None => c.fail("events", "is required"),
    }

    let survey = match obj.get("survey") {
        None | Some(Value::Null) => None,
        Some(Value::Object(s)) => {
            let mut items = Vec::new();
            match s.get("items") {
                Some(Value::Array(list)) => {
                    for (i, item) in list.iter().enumerate() {
                        let at = |f: &str| format!("survey.items[{i}].{f}");
                        let id = match item.get("id") {
                            Some(Value::String(id)) if !id.is_empty() => Some(id.clone()),
                            _ => {
                                c.fail(at("id"), "must be a nonempty string");
                                None
                            }
                        };
                        let score = match item.get("score").and_then(Value::as_u64) {
                            Some(v @ 1..=5) => Some(v as u8),
                            _ => {
                                c.fail(at("score"), "must be an integer from 1 to 5");
                                None
                            }
                        };
                        if let (Some(id), Some(score)) = (id, score) {
                            items.push(SurveyItem { id, score });
                        }
                    }
                }
                _ => c.fail("survey.items", "must be an array"),
            }
            let text = match s.get("text") {
                None | Some(Value::Null) => None,
                Some(Value::String(t)) => Some(t.clone()),
                Some(_) => {
                    c.fail("survey.text", "must be a string");
                    None
                }
            };
            Some(Survey { items, text })
        }
        Some(_) => {
            c.fail("survey", "must be an object");
            None
        }
    };

    if !c.errors.is_empty() {
        return Err(ValidationErrors { fields: c.errors });
    }
    Ok(SessionPayload {
        session_id: session_id.unwrap_or_default(),
        worker_id: worker_id.unwrap_or_default(),
        client_version: client_version.unwrap_or_default(),
        events,
        survey,
    })
}

/// A stored session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub worker_id: String,
    pub received_at_ms: u64,
    pub client_version: String,
    pub events: Vec<ClientEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<Survey>,
    pub complete: bool,
}

impl SessionRecord {
    pub fn new(payload: SessionPayload, received_at_ms: u64) -> Self {
        let complete = is_complete(&payload.events);
        Self {
            session_id: payload.session_id,
            worker_id: payload.worker_id,
            received_at_ms,
            client_version: payload.client_version,
            events: payload.events,
            survey: payload.survey,
            complete,
        }
    }

    pub fn has_survey(&self) -> bool {
        self.survey.as_ref().is_some_and(|s| !s.items.is_empty())
    }

    fn times(&self, kind: EventKind) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().filter(move |e| e.kind == kind.as_str()).map(|e| e.t_ms)
    }

    /// Order durations in ms: the k-th OrderStart paired with the k-th OrderSent.
    pub fn order_durations_ms(&self) -> Vec<u64> {
        self.times(EventKind::OrderStart)
            .zip(self.times(EventKind::OrderSent))
            .map(|(start, sent)| sent.saturating_sub(start))
            .collect()
    }

    /// SessionEnd minus the first OrderStart, in ms.
    pub fn overall_ms(&self) -> Option<u64> {
        let first = self.times(EventKind::OrderStart).next()?;
        let end = self.times(EventKind::SessionEnd).next()?;
        Some(end.saturating_sub(first))
    }
}

/// Three OrderSent events and exactly one SessionEnd.
pub fn is_complete(events: &[ClientEvent]) -> bool {
    let count = |k: EventKind| events.iter().filter(|e| e.kind == k.as_str()).count();
    count(EventKind::OrderSent) == ORDERS_PER_SESSION && count(EventKind::SessionEnd) == 1
}
