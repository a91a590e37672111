//! Batch evaluation: scripted conversations, cluster structure reports and
//! classifier runs over gold files.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    classify_goal, evaluate, label_of, ClassifyError, MetricsReport, TopicContext, NONE_LABEL,
};
use crate::dialogue::{
    legal_transition, open, parse_utterance, respond, step, BotTurn, ChatService, DialogueState,
    Intent, IntentKind, Services, SessionContext, SessionError, TurnReply,
};
use crate::ingest::Taxonomy;
use crate::snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid script {name:?}: {reason}")]
    InvalidScript { name: String, reason: String },
    #[error("chat target failed: {0}")]
    Target(String),
    #[error("snapshot has no clusters")]
    Unclustered,
    #[error("gold item {index}: unknown topic {label:?}")]
    UnknownLabel { index: usize, label: String },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

impl From<SessionError> for EvalError {
    fn from(e: SessionError) -> Self {
        EvalError::Target(e.to_string())
    }
}

/// A check on the observable result of one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    StateEquals(DialogueState),
    SuggestionContains(String),
    /// Regex searched in each bot message; passes if any message matches.
    MessageMatches(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    /// 0 is the greeting; user turns count from 1.
    pub turn: usize,
    pub check: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationScript {
    pub name: String,
    pub turns: Vec<String>,
    #[serde(default)]
    pub expectations: Vec<Expectation>,
}

impl ConversationScript {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let script: ConversationScript =
            serde_json::from_str(text).map_err(|e| EvalError::InvalidScript {
                name: String::new(),
                reason: e.to_string(),
            })?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: String| {
            Err(EvalError::InvalidScript {
                name: self.name.clone(),
                reason,
            })
        };
        if self.turns.is_empty() {
            return bad("a script needs at least one turn".into());
        }
        for e in &self.expectations {
            if e.turn > self.turns.len() {
                return bad(format!(
                    "expectation for turn {} but only {} turns",
                    e.turn,
                    self.turns.len()
                ));
            }
            if let Predicate::MessageMatches(re) = &e.check {
                if let Err(err) = Regex::new(re) {
                    return bad(format!("bad regex {re:?}: {err}"));
                }
            }
        }
        Ok(())
    }
}

/// Something that plays conversations: the in-process service or a server.
pub trait ChatTarget {
    fn open(&self) -> Result<TurnReply, EvalError>;
    fn send(&self, session_id: &str, text: &str) -> Result<TurnReply, EvalError>;
}

impl ChatTarget for ChatService {
    fn open(&self) -> Result<TurnReply, EvalError> {
        Ok(self.create())
    }

    fn send(&self, session_id: &str, text: &str) -> Result<TurnReply, EvalError> {
        Ok(self.post_queued(session_id, text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    /// `None` for the greeting.
    pub user: Option<String>,
    pub state: DialogueState,
    pub bot_turn: BotTurn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateOutcome {
    pub turn: usize,
    pub check: Predicate,
    pub passed: bool,
    /// What was seen, for failure messages.
    pub observed: String,
}

/// Session ids are left out so reports of identical runs are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptReport {
    pub name: String,
    pub passed: bool,
    pub first_failure: Option<PredicateOutcome>,
    pub outcomes: Vec<PredicateOutcome>,
    pub transcript: Vec<TranscriptEntry>,
}

impl ScriptReport {
    pub fn final_state(&self) -> DialogueState {
        self.transcript
            .last()
            .expect("greeting is always recorded")
            .state
    }

    /// Number of user turns played.
    pub fn user_turns(&self) -> usize {
        self.transcript.len() - 1
    }
}

fn check(p: &Predicate, entry: &TranscriptEntry) -> (bool, String) {
    match p {
        Predicate::StateEquals(want) => (
            entry.state == *want,
            format!("state {}", entry.state.as_str()),
        ),
        Predicate::SuggestionContains(s) => (
            entry.bot_turn.suggestions.iter().any(|x| x == s),
            format!("suggestions {:?}", entry.bot_turn.suggestions),
        ),
        Predicate::MessageMatches(re) => {
            let re = Regex::new(re).expect("validated with the script");
            (
                entry.bot_turn.messages.iter().any(|m| re.is_match(m)),
                format!("messages {:?}", entry.bot_turn.messages),
            )
        }
    }
}

/// Plays every turn of `script`, then evaluates the expectations in turn
/// order. Every turn is played even after a failure.
pub fn run_script(
    script: &ConversationScript,
    target: &dyn ChatTarget,
) -> Result<ScriptReport, EvalError> {
    script.validate()?;
    let greeting = target.open()?;
    let session = greeting.session_id.clone();
    let mut transcript = vec![TranscriptEntry {
        turn: 0,
        user: None,
        state: greeting.state,
        bot_turn: greeting.bot_turn,
    }];
    for (i, text) in script.turns.iter().enumerate() {
        let reply = target.send(&session, text)?;
        transcript.push(TranscriptEntry {
            turn: i + 1,
            user: Some(text.clone()),
            state: reply.state,
            bot_turn: reply.bot_turn,
        });
    }
    let mut expectations: Vec<&Expectation> = script.expectations.iter().collect();
    expectations.sort_by_key(|e| e.turn);
    let outcomes: Vec<PredicateOutcome> = expectations
        .into_iter()
        .map(|e| {
            let (passed, observed) = check(&e.check, &transcript[e.turn]);
            PredicateOutcome {
                turn: e.turn,
                check: e.check.clone(),
                passed,
                observed,
            }
        })
        .collect();
    let first_failure = outcomes.iter().find(|o| !o.passed).cloned();
    Ok(ScriptReport {
        name: script.name.clone(),
        passed: first_failure.is_none(),
        first_failure,
        outcomes,
        transcript,
    })
}

/// Outcome of [`explore`].
#[derive(Debug, Clone, Default)]
pub struct WalkReport {
    pub transitions: usize,
    pub states_seen: BTreeSet<DialogueState>,
    /// First violations found, at most [`WalkReport::KEEP`].
    pub violations: Vec<String>,
    pub violation_count: usize,
    /// Turn latencies, comparisons excluded.
    pub latencies: Vec<Duration>,
}

impl WalkReport {
    pub const KEEP: usize = 20;

    fn violation(&mut self, message: String) {
        self.violation_count += 1;
        if self.violations.len() < Self::KEEP {
            self.violations.push(message);
        }
    }

    pub fn missing_states(&self) -> Vec<DialogueState> {
        DialogueState::ALL
            .into_iter()
            .filter(|s| !self.states_seen.contains(s))
            .collect()
    }

    /// 95th percentile latency; zero when nothing was timed.
    pub fn p95(&self) -> Duration {
        let mut sorted = self.latencies.clone();
        sorted.sort();
        sorted
            .get(sorted.len() * 95 / 100)
            .or(sorted.last())
            .copied()
            .unwrap_or_default()
    }
}

/// Contexts to start a walk from: a fresh session, the opened session and
/// every context along each scripted conversation.
pub fn walk_roots(services: &Services<'_>, scripts: &[ConversationScript]) -> Vec<SessionContext> {
    let fresh = SessionContext::new("walk");
    let opened = open(&fresh, services, 0).0;
    let mut roots = vec![fresh, opened.clone()];
    for script in scripts {
        let mut ctx = opened.clone();
        for turn in &script.turns {
            ctx = respond(&ctx, turn, services, 0).0;
            roots.push(ctx.clone());
        }
    }
    roots
}

fn visit(
    services: &Services<'_>,
    ctx: &SessionContext,
    probes: &[&str],
    depth: usize,
    report: &mut WalkReport,
) {
    if depth == 0 {
        return;
    }
    let mut inputs: Vec<String> = ctx.suggestion_set.clone();
    inputs.extend(probes.iter().map(|p| p.to_string()));
    for input in inputs {
        let at = format!("{input:?} in {}", ctx.state.as_str());
        let intent = parse_utterance(&input, ctx, services.graph);
        let started = Instant::now();
        let (next, turn) = respond(ctx, &input, services, 0);
        if intent.kind != IntentKind::Compare {
            report.latencies.push(started.elapsed());
        }
        report.transitions += 1;
        report.states_seen.insert(next.state);
        if let Err(e) = next.check() {
            report.violation(format!("{at}: context invariant: {e}"));
        }
        if !legal_transition(ctx.state, intent.kind, next.state) {
            report.violation(format!(
                "{at}: illegal {:?} to {}",
                intent.kind,
                next.state.as_str()
            ));
        }
        if next.suggestion_set != turn.suggestions {
            report.violation(format!("{at}: stored suggestions differ from offered ones"));
        }
        if ctx.suggestion_set.contains(&input)
            && (intent.confidence != 1.0 || intent.kind == IntentKind::OutOfScope)
        {
            report.violation(format!("{at}: suggestion parsed as {:?}", intent.kind));
        }
        for s in &turn.suggestions {
            let i = parse_utterance(s, &next, services.graph);
            if i.confidence != 1.0 || i.kind == IntentKind::OutOfScope {
                report.violation(format!(
                    "{at}: offered {s:?} does not parse in {}",
                    next.state.as_str()
                ));
            }
        }
        if next.trail.len() == ctx.trail.len() + 1 {
            let back = step(
                &next,
                &Intent::new(IntentKind::GoBack, 1.0, "back"),
                services,
            )
            .0;
            if !back.same_except_history(ctx) {
                report.violation(format!("{at}: going back does not restore the context"));
            }
        }
        visit(services, &next, probes, depth - 1, report);
    }
}

/// Plays every offered suggestion and every probe from each root, `depth`
/// turns deep, and checks after each turn that
///
/// * the context invariants and the transition table hold,
/// * every offered suggestion parses with full confidence in the next state,
/// * going back after a forward move restores the previous context.
pub fn explore(
    services: &Services<'_>,
    roots: &[SessionContext],
    probes: &[&str],
    depth: usize,
) -> WalkReport {
    let mut report = WalkReport::default();
    for root in roots {
        report.states_seen.insert(root.state);
        visit(services, root, probes, depth, &mut report);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub topic_count: usize,
    pub cluster_count: usize,
    pub leaf_count: usize,
    /// Leaf size to number of leaves of that size.
    pub leaf_size_histogram: BTreeMap<usize, usize>,
    pub max_depth: usize,
    /// Leaves with at least `leaf_max` members, flagged or not.
    pub oversize_leaf_count: usize,
    /// Oversize leaves not flagged unsplittable; 0 in a sound hierarchy.
    pub unflagged_oversize_leaf_count: usize,
    /// Display names are unique within every topic.
    pub name_uniqueness: bool,
}

/// Structure statistics of a clustered snapshot.
pub fn cluster_report(snapshot: &Snapshot, leaf_max: usize) -> Result<ClusterReport, EvalError> {
    if snapshot.clusters.is_empty() {
        return Err(EvalError::Unclustered);
    }
    let mut histogram = BTreeMap::new();
    let mut names: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut unique = true;
    let mut report = ClusterReport {
        topic_count: 0,
        cluster_count: snapshot.clusters.len(),
        leaf_count: 0,
        leaf_size_histogram: BTreeMap::new(),
        max_depth: 0,
        oversize_leaf_count: 0,
        unflagged_oversize_leaf_count: 0,
        name_uniqueness: true,
    };
    for c in &snapshot.clusters {
        report.max_depth = report.max_depth.max(c.depth);
        unique &= names
            .entry(c.topic_id.as_str())
            .or_default()
            .insert(c.display_name.as_str());
        if c.leaf {
            report.leaf_count += 1;
            *histogram.entry(c.member_ids.len()).or_insert(0) += 1;
            if c.member_ids.len() >= leaf_max {
                report.oversize_leaf_count += 1;
                if !c.unsplittable {
                    report.unflagged_oversize_leaf_count += 1;
                }
            }
        }
    }
    report.topic_count = names.len();
    report.leaf_size_histogram = histogram;
    report.name_uniqueness = unique;
    Ok(report)
}

/// One hand-labelled query. `label` is a topic id, a topic name or "None".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldItem {
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldRun {
    /// `(gold, predicted)` topic ids, "None" for out of scope.
    pub pairs: Vec<(String, String)>,
    pub report: MetricsReport,
}

fn resolve_label(taxonomy: &Taxonomy, index: usize, label: &str) -> Result<String, EvalError> {
    if label == NONE_LABEL {
        return Ok(NONE_LABEL.to_string());
    }
    taxonomy
        .get(label)
        .or_else(|| taxonomy.find_by_name(label))
        .map(|t| t.id.clone())
        .ok_or_else(|| EvalError::UnknownLabel {
            index,
            label: label.to_string(),
        })
}

/// Classifies every gold query and scores the predictions.
pub fn classify_gold(items: &[GoldItem], ctx: &TopicContext<'_>) -> Result<GoldRun, EvalError> {
    let mut pairs = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let gold = resolve_label(ctx.taxonomy, i, &item.label)?;
        let predicted = classify_goal(&item.text, ctx)?;
        pairs.push((gold, label_of(predicted.prediction.topic_id.as_deref())));
    }
    let report = evaluate(&pairs)?;
    Ok(GoldRun { pairs, report })
}
