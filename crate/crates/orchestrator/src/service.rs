//! Message handling independent of the transport.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use lanemerge_core::SafetyConfig;
use lanemerge_ml::ModelBundle;
use parking_lot::{Mutex, RwLock};
use tracing::{debug, warn};

use crate::kb::KnowledgeBase;
use crate::planner::{plan_merge, MergeTarget, Plan, PlanError};
use crate::protocol::{
    decode_message, ManeuverFeedback, Message, ProtocolError, RoadUserDescription, Subscription,
    TrajectoryRecommendation, Verdict,
};

/// Identifies one client connection.
pub type ConnId = u64;

/// Recommendations remembered for feedback.
const ISSUED_CAPACITY: usize = 65_536;

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: ConnId,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackAction {
    None,
    Recompute(TrajectoryRecommendation),
}

#[derive(Debug, Clone)]
struct Issued {
    user_id: String,
    verdict: Option<Verdict>,
}

#[derive(Default)]
struct IssuedLog {
    by_id: HashMap<String, Issued>,
    order: VecDeque<String>,
}

impl IssuedLog {
    fn insert(&mut self, id: String, user_id: String) {
        if self.order.len() == ISSUED_CAPACITY {
            if let Some(old) = self.order.pop_front() {
                self.by_id.remove(&old);
            }
        }
        self.order.push_back(id.clone());
        self.by_id.insert(
            id,
            Issued {
                user_id,
                verdict: None,
            },
        );
    }
}

/// The Traffic Orchestrator's shared state. All methods take `&self` and are
/// safe to call from many connections at once.
pub struct Orchestrator {
    kb: KnowledgeBase,
    bundle: Option<Arc<ModelBundle>>,
    safety: SafetyConfig,
    subscriptions: RwLock<HashMap<String, (Subscription, ConnId)>>,
    issued: Mutex<IssuedLog>,
    plan_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    sequence: AtomicU64,
}

impl std::fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orchestrator")
            .field("kb", &self.kb)
            .field("model_loaded", &self.bundle.is_some())
            .finish()
    }
}

impl Orchestrator {
    pub fn new(kb: KnowledgeBase, bundle: Option<Arc<ModelBundle>>, safety: SafetyConfig) -> Self {
        Self {
            kb,
            bundle,
            safety,
            subscriptions: RwLock::new(HashMap::new()),
            issued: Mutex::new(IssuedLog::default()),
            plan_locks: Mutex::new(HashMap::new()),
            sequence: AtomicU64::new(0),
        }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    /// Decodes one frame and handles it; decoding failures are answered with
    /// an error message to the sender.
    pub fn handle_frame(&self, from: ConnId, frame: &[u8]) -> Vec<Outgoing> {
        match decode_message(frame) {
            Ok(msg) => self.handle(from, msg),
            Err(e) => vec![self.protocol_error(from, &e)],
        }
    }

    pub fn protocol_error(&self, to: ConnId, e: &ProtocolError) -> Outgoing {
        debug!(conn = to, error = %e, "rejected frame");
        Outgoing {
            to,
            message: Message::from(e),
        }
    }

    pub fn handle(&self, from: ConnId, msg: Message) -> Vec<Outgoing> {
        match msg {
            Message::RudUpdate(rud) => self.on_rud(rud),
            Message::Subscribe(sub) => self.on_subscribe(from, sub),
            Message::Feedback(fb) => match self.handle_feedback(&fb) {
                Ok(FeedbackAction::None) => Vec::new(),
                Ok(FeedbackAction::Recompute(rec)) => {
                    let to = self.subscriber_of(&rec.user_id).unwrap_or(from);
                    vec![Outgoing {
                        to,
                        message: Message::Recommendation(rec),
                    }]
                }
                Err(message) => vec![Outgoing { to: from, message }],
            },
            Message::Recommendation(_) | Message::Error(_) => vec![Outgoing {
                to: from,
                message: Message::error(
                    "unexpected_message",
                    "the orchestrator does not accept this message type",
                ),
            }],
        }
    }

    fn subscriber_of(&self, user_id: &str) -> Option<ConnId> {
        self.subscriptions.read().get(user_id).map(|(_, c)| *c)
    }

    fn on_rud(&self, rud: RoadUserDescription) -> Vec<Outgoing> {
        let user = rud.user_id.clone();
        let position = rud.position;
        if !self.kb.upsert(rud) {
            return Vec::new();
        }
        let Some((sub, conn)) = self.subscriptions.read().get(&user).cloned() else {
            return Vec::new();
        };
        // Outside its subscribed region a vehicle gets no plans.
        if !sub.region.contains(position) {
            return Vec::new();
        }
        vec![self.plan_message(&sub, conn)]
    }

    fn on_subscribe(&self, from: ConnId, sub: Subscription) -> Vec<Outgoing> {
        if self.bundle.is_none() {
            return vec![Outgoing {
                to: from,
                message: Message::error(PlanError::NoModel.code(), PlanError::NoModel.to_string()),
            }];
        }
        self.subscriptions
            .write()
            .insert(sub.user_id.clone(), (sub.clone(), from));
        if self.kb.get(&sub.user_id).is_some() {
            vec![self.plan_message(&sub, from)]
        } else {
            Vec::new()
        }
    }

    fn plan_message(&self, sub: &Subscription, to: ConnId) -> Outgoing {
        let message = match self.plan(sub) {
            Ok(plan) => Message::Recommendation(plan.recommendation),
            Err(e) => {
                warn!(user = %sub.user_id, error = %e, "planning failed");
                Message::error(e.code(), e.to_string())
            }
        };
        Outgoing { to, message }
    }

    /// Plans for a subscribed vehicle on a fresh snapshot; at most one plan
    /// per vehicle runs at a time.
    pub fn plan(&self, sub: &Subscription) -> Result<Plan, PlanError> {
        let lock = self
            .plan_locks
            .lock()
            .entry(sub.user_id.clone())
            .or_default()
            .clone();
        let _guard = lock.lock();
        let snapshot = self.kb.snapshot(&sub.region);
        let based_on = snapshot
            .iter()
            .find(|r| r.user_id == sub.user_id)
            .map_or(0, |r| r.timestamp);
        let seq = self.sequence.fetch_add(1, Ordering::SeqCst);
        let target = MergeTarget {
            lane: sub.target_lane,
            lane_x: sub.target_lane_x,
        };
        let plan = plan_merge(
            &snapshot,
            &sub.user_id,
            target,
            self.bundle.as_deref(),
            &self.safety,
            format!("{}-{}-{}", sub.user_id, based_on, seq),
        )?;
        self.issued.lock().insert(
            plan.recommendation.recommendation_id.clone(),
            sub.user_id.clone(),
        );
        Ok(plan)
    }

    /// Accept is recorded; reject and abort re-plan on a fresh snapshot. A
    /// failed re-plan is logged and produces nothing. Unknown ids are an
    /// error, returned as the message to send back.
    pub fn handle_feedback(&self, fb: &ManeuverFeedback) -> Result<FeedbackAction, Message> {
        let user = {
            let mut log = self.issued.lock();
            let Some(entry) = log.by_id.get_mut(&fb.recommendation_id) else {
                return Err(Message::error(
                    "unknown_recommendation",
                    format!("no recommendation {:?}", fb.recommendation_id),
                ));
            };
            if entry.user_id != fb.user_id {
                return Err(Message::error(
                    "unknown_recommendation",
                    format!(
                        "recommendation {:?} was not issued to {:?}",
                        fb.recommendation_id, fb.user_id
                    ),
                ));
            }
            entry.verdict = Some(fb.verdict);
            entry.user_id.clone()
        };
        if fb.verdict == Verdict::Accept {
            return Ok(FeedbackAction::None);
        }
        let Some((sub, _)) = self.subscriptions.read().get(&user).cloned() else {
            warn!(user = %user, "feedback for a vehicle without subscription");
            return Ok(FeedbackAction::None);
        };
        match self.plan(&sub) {
            Ok(plan) => Ok(FeedbackAction::Recompute(plan.recommendation)),
            Err(e) => {
                warn!(user = %user, error = %e, "re-plan after feedback failed");
                Ok(FeedbackAction::None)
            }
        }
    }

    pub fn verdict_of(&self, recommendation_id: &str) -> Option<Verdict> {
        self.issued
            .lock()
            .by_id
            .get(recommendation_id)
            .and_then(|i| i.verdict)
    }

    /// Drops the subscriptions owned by a closed connection.
    pub fn disconnect(&self, conn: ConnId) {
        self.subscriptions.write().retain(|_, (_, c)| *c != conn);
    }
}
