//! The conversation state machine: utterance parsing, transitions and
//! backtracking.
//!
//! Every forward transition pushes the context it leaves onto a trail, so
//! `go_back` restores the previous context exactly. Turns that do not move
//! the conversation (help, definitions, refusals, service failures) leave
//! the context untouched apart from history.

mod parse;
mod session;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{classify_goal, TopicContext};
use crate::graph::{builtin_template, run_template, Row, ScholarGraph};
use crate::llm::{compare_papers, CompareMode, PaperSections, TextGenerator};
use crate::segment::Sections;

pub use parse::{candidates, parse_utterance, Candidate, FUZZY_MIN, KEYWORDS};
pub use session::{
    ChatService, Engine, IdSource, SessionError, SessionSnapshot, SessionStore, TurnReply,
};

/// Longest utterance, in whitespace-separated words, used for parsing.
pub const MAX_UTTERANCE_WORDS: usize = 100;

pub const BACK: &str = "Back";
pub const RESTART: &str = "Restart";
pub const HELP: &str = "Help";
pub const COMPARE: &str = "Compare these papers";
pub const LINKS: &str = "Show full-text links";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DialogueState {
    #[serde(rename = "S1_greeting")]
    Greeting,
    #[serde(rename = "S2_goal_elicitation")]
    GoalElicitation,
    #[serde(rename = "S3_topic_selection")]
    TopicSelection,
    #[serde(rename = "S4_cluster_navigation")]
    ClusterNavigation,
    #[serde(rename = "S5_paper_listing")]
    PaperListing,
    #[serde(rename = "S6_comparison")]
    Comparison,
    #[serde(rename = "S7_wrapup")]
    Wrapup,
}

impl DialogueState {
    pub const ALL: [DialogueState; 7] = [
        DialogueState::Greeting,
        DialogueState::GoalElicitation,
        DialogueState::TopicSelection,
        DialogueState::ClusterNavigation,
        DialogueState::PaperListing,
        DialogueState::Comparison,
        DialogueState::Wrapup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DialogueState::Greeting => "S1_greeting",
            DialogueState::GoalElicitation => "S2_goal_elicitation",
            DialogueState::TopicSelection => "S3_topic_selection",
            DialogueState::ClusterNavigation => "S4_cluster_navigation",
            DialogueState::PaperListing => "S5_paper_listing",
            DialogueState::Comparison => "S6_comparison",
            DialogueState::Wrapup => "S7_wrapup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    DescribeGoal,
    SelectTopic,
    SelectCluster,
    SelectPaper,
    Compare,
    ShowDefinition,
    GetLinks,
    GoBack,
    Restart,
    Help,
    OutOfScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    /// Slot name ("topic", "cluster", "paper") to graph node id.
    pub slots: BTreeMap<String, String>,
    pub confidence: f64,
    /// The utterance the intent was parsed from.
    pub text: String,
}

impl Intent {
    pub fn new(kind: IntentKind, confidence: f64, text: &str) -> Self {
        Intent {
            kind,
            slots: BTreeMap::new(),
            confidence,
            text: text.to_string(),
        }
    }

    fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }
}

/// Whether `from --kind--> to` is in the transition table.
#[allow(clippy::match_like_matches_macro)] // one arm per table row
pub fn legal_transition(from: DialogueState, kind: IntentKind, to: DialogueState) -> bool {
    use DialogueState::*;
    use IntentKind::*;
    if from == to && !matches!(kind, Restart) {
        return true;
    }
    match (from, kind, to) {
        (Greeting, _, GoalElicitation) => true,
        (_, Restart, GoalElicitation) => true,
        (GoalElicitation | TopicSelection, DescribeGoal, TopicSelection) => true,
        (TopicSelection, SelectTopic, ClusterNavigation) => true,
        (ClusterNavigation, SelectCluster, PaperListing) => true,
        (PaperListing | Comparison, Compare, Comparison) => true,
        (Comparison, GetLinks, Wrapup) => true,
        (TopicSelection, GoBack, GoalElicitation)
        | (ClusterNavigation, GoBack, TopicSelection)
        | (PaperListing, GoBack, ClusterNavigation)
        | (Comparison, GoBack, PaperListing)
        | (Wrapup, GoBack, Comparison) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker: Speaker,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub title: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BotTurn {
    pub messages: Vec<String>,
    pub suggestions: Vec<String>,
    pub links: Vec<Link>,
}

/// The restorable part of a context, saved before each forward transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub state: DialogueState,
    pub goal_text: Option<String>,
    pub topic_id: Option<String>,
    pub cluster_path: Vec<String>,
    pub listed_paper_ids: Vec<String>,
    pub selected_paper_ids: Vec<String>,
    pub suggestion_set: Vec<String>,
    pub turn: BotTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionContext {
    pub session_id: String,
    pub state: DialogueState,
    pub goal_text: Option<String>,
    pub topic_id: Option<String>,
    /// Root to current cluster.
    pub cluster_path: Vec<String>,
    pub listed_paper_ids: Vec<String>,
    /// Subset of the listed papers, in selection order, at most two.
    pub selected_paper_ids: Vec<String>,
    pub history: Vec<HistoryEntry>,
    pub suggestion_set: Vec<String>,
    /// The turn that produced the current context.
    pub last_turn: BotTurn,
    pub trail: Vec<Frame>,
}

impl SessionContext {
    pub fn new(session_id: impl Into<String>) -> Self {
        SessionContext {
            session_id: session_id.into(),
            state: DialogueState::Greeting,
            goal_text: None,
            topic_id: None,
            cluster_path: Vec::new(),
            listed_paper_ids: Vec::new(),
            selected_paper_ids: Vec::new(),
            history: Vec::new(),
            suggestion_set: Vec::new(),
            last_turn: BotTurn::default(),
            trail: Vec::new(),
        }
    }

    fn frame(&self) -> Frame {
        Frame {
            state: self.state,
            goal_text: self.goal_text.clone(),
            topic_id: self.topic_id.clone(),
            cluster_path: self.cluster_path.clone(),
            listed_paper_ids: self.listed_paper_ids.clone(),
            selected_paper_ids: self.selected_paper_ids.clone(),
            suggestion_set: self.suggestion_set.clone(),
            turn: self.last_turn.clone(),
        }
    }

    fn restore(&mut self, f: Frame) {
        self.state = f.state;
        self.goal_text = f.goal_text;
        self.topic_id = f.topic_id;
        self.cluster_path = f.cluster_path;
        self.listed_paper_ids = f.listed_paper_ids;
        self.selected_paper_ids = f.selected_paper_ids;
        self.suggestion_set = f.suggestion_set;
        self.last_turn = f.turn;
    }

    /// Equality on everything except history.
    pub fn same_except_history(&self, other: &SessionContext) -> bool {
        let mut a = self.clone();
        a.history.clear();
        let mut b = other.clone();
        b.history.clear();
        a == b
    }

    /// Checks the context invariants.
    pub fn check(&self) -> Result<(), String> {
        if !self.cluster_path.is_empty() && self.topic_id.is_none() {
            return Err("cluster path without a topic".into());
        }
        if self.selected_paper_ids.len() > 2 {
            return Err("more than two selected papers".into());
        }
        if let Some(p) = self
            .selected_paper_ids
            .iter()
            .find(|p| !self.listed_paper_ids.contains(p))
        {
            return Err(format!("selected paper {p} is not listed"));
        }
        Ok(())
    }
}

/// Read-only services a turn may call.
pub struct Services<'a> {
    pub graph: &'a ScholarGraph,
    pub topics: TopicContext<'a>,
    /// Objective and result sentences per publication.
    pub sections: &'a BTreeMap<String, Sections>,
    pub llm: &'a dyn TextGenerator,
    pub compare_mode: CompareMode,
}

fn query(graph: &ScholarGraph, template: &str, param: &str, id: &str) -> Vec<Row> {
    let t = builtin_template(template).expect("builtin template");
    let bindings = BTreeMap::from([(param.to_string(), id.to_string())]);
    run_template(graph, &t, &bindings).unwrap_or_default()
}

fn row_str<'r>(row: &'r Row, key: &str) -> &'r str {
    row.get(key).and_then(|v| v.as_str()).unwrap_or("")
}

fn node_name(graph: &ScholarGraph, id: &str) -> String {
    graph
        .node(id)
        .and_then(|n| n.name())
        .unwrap_or(id)
        .to_string()
}

fn with_nav(mut names: Vec<String>) -> Vec<String> {
    names.push(BACK.to_string());
    names.push(RESTART.to_string());
    names
}

fn greeting_turn() -> BotTurn {
    BotTurn {
        messages: vec![
            "Hello! I can help you find research publications through a short conversation.".into(),
            goal_prompt().into(),
        ],
        suggestions: vec![HELP.into()],
        links: vec![],
    }
}

fn goal_prompt() -> &'static str {
    "Please describe your search goal in a sentence or two, for example what you want to study and with which data."
}

/// Cluster rows under the current position: roots of the topic or children
/// of the last cluster on the path.
pub(crate) fn cluster_rows(graph: &ScholarGraph, ctx: &SessionContext) -> Vec<Row> {
    match (ctx.cluster_path.last(), &ctx.topic_id) {
        (Some(c), _) => query(graph, "children_of_cluster", "cluster", c),
        (None, Some(t)) => query(graph, "clusters_of_topic", "topic", t),
        (None, None) => Vec::new(),
    }
}

fn cluster_listing(graph: &ScholarGraph, ctx: &SessionContext, heading: String) -> BotTurn {
    let rows = cluster_rows(graph, ctx);
    let mut messages = vec![heading];
    let mut names = Vec::new();
    for r in &rows {
        let size = r.get("size").and_then(|v| v.as_int()).unwrap_or(0);
        messages.push(format!("- {} ({size} papers)", row_str(r, "name")));
        names.push(row_str(r, "name").to_string());
    }
    messages.push("Which cluster would you like to explore?".into());
    BotTurn {
        messages,
        suggestions: with_nav(names),
        links: vec![],
    }
}

fn paper_suggestions(graph: &ScholarGraph, ctx: &SessionContext) -> Vec<String> {
    if ctx.selected_paper_ids.len() == 2 {
        return with_nav(vec![COMPARE.to_string()]);
    }
    with_nav(
        ctx.listed_paper_ids
            .iter()
            .filter(|p| !ctx.selected_paper_ids.contains(p))
            .map(|p| node_name(graph, p))
            .collect(),
    )
}

fn topic_suggestions(graph: &ScholarGraph, services: &Services<'_>, topic: &str) -> Vec<String> {
    let mut names = vec![node_name(graph, topic)];
    let parent = services
        .topics
        .taxonomy
        .get(topic)
        .and_then(|e| e.parent_id.clone());
    if let Some(parent) = parent {
        let mut siblings: Vec<String> = services
            .topics
            .taxonomy
            .children(&parent)
            .into_iter()
            .filter(|e| e.id != topic)
            .filter(|e| !query(graph, "clusters_of_topic", "topic", &e.id).is_empty())
            .map(|e| e.name.clone())
            .collect();
        siblings.sort();
        names.extend(siblings);
    }
    with_nav(names)
}

fn links_for(graph: &ScholarGraph, ids: &[String]) -> (Vec<Link>, Vec<String>) {
    let mut links = Vec::new();
    let mut missing = Vec::new();
    for id in ids {
        let title = node_name(graph, id);
        match graph.node(id).and_then(|n| n.str_prop("url")) {
            Some(url) => links.push(Link {
                title,
                url: url.to_string(),
            }),
            None => missing.push(format!("No full-text link is recorded for \"{title}\".")),
        }
    }
    (links, missing)
}

fn help_text(state: DialogueState) -> &'static str {
    match state {
        DialogueState::Greeting | DialogueState::GoalElicitation => {
            "Describe what you want to research, for example: \"I want to study how people express their feelings on social media.\" I will suggest a matching research topic."
        }
        DialogueState::TopicSelection => {
            "Pick the suggested topic or one of its neighbours to browse its publication clusters. You can also describe your goal again, say \"definition\", \"back\" or \"restart\"."
        }
        DialogueState::ClusterNavigation => {
            "Pick a cluster to narrow down the publications. Say \"back\" to return to the previous level or \"restart\" to begin again."
        }
        DialogueState::PaperListing => {
            "Pick two papers and say \"compare\" to get a short comparison of their objectives and results."
        }
        DialogueState::Comparison => {
            "Say \"links\" to get the full texts of both papers, or \"back\" to pick different papers."
        }
        DialogueState::Wrapup => {
            "Say \"back\" to keep exploring or \"restart\" to search for something new."
        }
    }
}

/// Result of a forward or stationary step.
enum Outcome {
    /// Context fields were changed on the working copy; push the old frame.
    Forward(BotTurn),
    /// Context unchanged; show these messages with the current suggestions.
    Stay(Vec<String>, Vec<Link>),
}

/// Applies `intent` to `ctx`. The returned context differs from `ctx` only
/// by the transition; history is recorded by [`respond`].
pub fn step(
    ctx: &SessionContext,
    intent: &Intent,
    services: &Services<'_>,
) -> (SessionContext, BotTurn) {
    let mut next = ctx.clone();

    if ctx.state == DialogueState::Greeting {
        let turn = greeting_turn();
        next.state = DialogueState::GoalElicitation;
        next.suggestion_set = turn.suggestions.clone();
        next.last_turn = turn.clone();
        return (next, turn);
    }

    match intent.kind {
        IntentKind::Restart => {
            let mut fresh = SessionContext::new(ctx.session_id.clone());
            fresh.history = ctx.history.clone();
            let mut turn = greeting_turn();
            turn.messages[0] = "Let's start over.".into();
            fresh.state = DialogueState::GoalElicitation;
            fresh.suggestion_set = turn.suggestions.clone();
            fresh.last_turn = turn.clone();
            return (fresh, turn);
        }
        IntentKind::GoBack => {
            return match next.trail.pop() {
                Some(frame) => {
                    let mut turn = frame.turn.clone();
                    turn.messages.insert(0, "Going back.".into());
                    next.restore(frame);
                    (next, turn)
                }
                None => {
                    let turn = BotTurn {
                        messages: vec![
                            "We are already at the beginning.".into(),
                            goal_prompt().into(),
                        ],
                        suggestions: ctx.suggestion_set.clone(),
                        links: vec![],
                    };
                    (next, turn)
                }
            };
        }
        _ => {}
    }

    let outcome = forward(&mut next, intent, services);
    match outcome {
        Outcome::Forward(turn) => {
            next.trail.push(ctx.frame());
            next.suggestion_set = turn.suggestions.clone();
            next.last_turn = turn.clone();
            (next, turn)
        }
        Outcome::Stay(messages, links) => {
            let turn = BotTurn {
                messages,
                suggestions: ctx.suggestion_set.clone(),
                links,
            };
            (ctx.clone(), turn)
        }
    }
}

fn forward(next: &mut SessionContext, intent: &Intent, services: &Services<'_>) -> Outcome {
    use DialogueState::*;
    let graph = services.graph;
    let state = next.state;
    match (state, intent.kind) {
        (_, IntentKind::Help) => Outcome::Stay(vec![help_text(state).into()], vec![]),
        (_, IntentKind::ShowDefinition) => match &next.topic_id {
            Some(t) => {
                let rows = query(graph, "definition_of_topic", "topic", t);
                let msg = rows
                    .first()
                    .map(|r| format!("{}: {}", row_str(r, "name"), row_str(r, "definition")))
                    .unwrap_or_default();
                Outcome::Stay(vec![msg], vec![])
            }
            None => Outcome::Stay(
                vec!["No research topic has been chosen yet. Describe your goal first.".into()],
                vec![],
            ),
        },
        (GoalElicitation | TopicSelection, IntentKind::DescribeGoal) => {
            describe_goal(next, intent, services)
        }
        (TopicSelection, IntentKind::SelectTopic) => {
            let topic = intent.slot("topic").unwrap_or_default().to_string();
            let name = node_name(graph, &topic);
            next.topic_id = Some(topic);
            next.cluster_path.clear();
            if cluster_rows(graph, next).is_empty() {
                return Outcome::Stay(
                    vec![format!("There are no publication clusters for {name} yet. Please pick another topic.")],
                    vec![],
                );
            }
            next.state = ClusterNavigation;
            Outcome::Forward(cluster_listing(
                graph,
                next,
                format!("Here are the thematic clusters in {name}:"),
            ))
        }
        (ClusterNavigation, IntentKind::SelectCluster) => {
            let cluster = intent.slot("cluster").unwrap_or_default().to_string();
            let name = node_name(graph, &cluster);
            let leaf = graph
                .node(&cluster)
                .and_then(|n| n.prop("leaf"))
                .and_then(|v| v.as_bool())
                .unwrap_or(true);
            next.cluster_path.push(cluster.clone());
            if !leaf {
                return Outcome::Forward(cluster_listing(
                    graph,
                    next,
                    format!("{name} splits into these clusters:"),
                ));
            }
            let rows = query(graph, "papers_in_cluster", "cluster", &cluster);
            next.state = PaperListing;
            next.listed_paper_ids = rows.iter().map(|r| row_str(r, "id").to_string()).collect();
            next.selected_paper_ids.clear();
            let mut messages = vec![format!("Publications in {name}:")];
            for r in &rows {
                let mut line = format!("- {}", row_str(r, "title"));
                if let Some(year) = r.get("year").and_then(|v| v.as_int()) {
                    line.push_str(&format!(" ({year})"));
                }
                if let Some(tldr) = r.get("tldr").and_then(|v| v.as_str()) {
                    line.push_str(&format!(". TLDR: {tldr}"));
                }
                messages.push(line);
            }
            messages.push("Pick two papers to compare them.".into());
            Outcome::Forward(BotTurn {
                messages,
                suggestions: paper_suggestions(graph, next),
                links: vec![],
            })
        }
        (PaperListing, IntentKind::SelectPaper) => {
            let paper = intent.slot("paper").unwrap_or_default().to_string();
            let title = node_name(graph, &paper);
            if next.selected_paper_ids.contains(&paper) {
                return Outcome::Stay(vec![format!("\"{title}\" is already selected.")], vec![]);
            }
            if next.selected_paper_ids.len() == 2 {
                return Outcome::Stay(
                    vec!["You already picked two papers. Say \"compare\" or go back to choose again.".into()],
                    vec![],
                );
            }
            next.selected_paper_ids.push(paper);
            let msg = if next.selected_paper_ids.len() == 1 {
                format!("Selected \"{title}\". Pick a second paper to compare it with.")
            } else {
                let first = node_name(graph, &next.selected_paper_ids[0]);
                format!("Selected \"{title}\". Ready to compare \"{first}\" and \"{title}\".")
            };
            Outcome::Forward(BotTurn {
                messages: vec![msg],
                suggestions: paper_suggestions(graph, next),
                links: vec![],
            })
        }
        (PaperListing | Comparison, IntentKind::Compare) => compare(next, services),
        (Comparison, IntentKind::GetLinks) => {
            let (links, missing) = links_for(graph, &next.selected_paper_ids);
            next.state = Wrapup;
            let mut messages = vec!["Here are the full texts of the compared papers.".into()];
            messages.extend(missing);
            messages.push("You can go back to keep exploring or restart with a new goal.".into());
            Outcome::Forward(BotTurn {
                messages,
                suggestions: with_nav(vec![]),
                links,
            })
        }
        (PaperListing | Wrapup, IntentKind::GetLinks) => {
            let ids = if next.selected_paper_ids.is_empty() {
                &next.listed_paper_ids
            } else {
                &next.selected_paper_ids
            };
            let (links, mut messages) = links_for(graph, ids);
            messages.insert(0, "Here are the full-text links.".into());
            Outcome::Stay(messages, links)
        }
        (_, IntentKind::OutOfScope) => Outcome::Stay(
            vec![format!(
                "Sorry, I did not understand that. {}",
                help_text(state)
            )],
            vec![],
        ),
        _ => Outcome::Stay(
            vec![format!(
                "That is not available right now. {}",
                help_text(state)
            )],
            vec![],
        ),
    }
}

fn describe_goal(next: &mut SessionContext, intent: &Intent, services: &Services<'_>) -> Outcome {
    let graph = services.graph;
    let result = match classify_goal(&intent.text, &services.topics) {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!(error = %e, "goal classification failed");
            return Outcome::Stay(
                vec![
                    "Sorry, I could not analyse your goal right now. Please try again in a moment."
                        .into(),
                ],
                vec![],
            );
        }
    };
    let Some(topic) = result.prediction.topic_id else {
        return Outcome::Stay(
            vec![
                "I could not relate that to a research topic in this collection.".into(),
                "Could you describe your goal differently, for example the task or the kind of data you have in mind?".into(),
            ],
            vec![],
        );
    };
    let rows = query(graph, "definition_of_topic", "topic", &topic);
    let definition = rows.first().map(|r| row_str(r, "definition")).unwrap_or("");
    let name = node_name(graph, &topic);
    next.state = DialogueState::TopicSelection;
    next.goal_text = Some(intent.text.clone());
    next.topic_id = Some(topic.clone());
    next.cluster_path.clear();
    next.listed_paper_ids.clear();
    next.selected_paper_ids.clear();
    Outcome::Forward(BotTurn {
        messages: vec![
            format!("Your goal fits the research topic {name}."),
            format!("{name}: {definition}"),
            "Select it to browse its publication clusters, or pick a related topic.".into(),
        ],
        suggestions: topic_suggestions(graph, services, &topic),
        links: vec![],
    })
}

fn compare(next: &mut SessionContext, services: &Services<'_>) -> Outcome {
    let graph = services.graph;
    if next.selected_paper_ids.len() != 2 {
        return Outcome::Stay(
            vec!["Please pick two papers from the list first.".into()],
            vec![],
        );
    }
    let sections = |id: &str| {
        let s = services.sections.get(id).cloned().unwrap_or_default();
        PaperSections {
            id: id.to_string(),
            objectives: s.objectives,
            results: s.results,
            tldr: graph
                .node(id)
                .and_then(|n| n.str_prop("tldr"))
                .unwrap_or("")
                .to_string(),
        }
    };
    let (a, b) = (
        sections(&next.selected_paper_ids[0]),
        sections(&next.selected_paper_ids[1]),
    );
    match compare_papers(&a, &b, services.llm, services.compare_mode) {
        Ok(text) => {
            next.state = DialogueState::Comparison;
            Outcome::Forward(BotTurn {
                messages: vec![
                    format!(
                        "Comparison of \"{}\" (Paper {}) and \"{}\" (Paper {}):",
                        node_name(graph, &a.id),
                        a.id,
                        node_name(graph, &b.id),
                        b.id
                    ),
                    text,
                ],
                suggestions: with_nav(vec![LINKS.to_string()]),
                links: vec![],
            })
        }
        Err(failure) => {
            tracing::warn!(error = %failure.error, "comparison failed");
            Outcome::Stay(
                vec![
                    "Sorry, the comparison service is unavailable right now. Here are the short summaries instead:".into(),
                    failure.fallback,
                ],
                vec![],
            )
        }
    }
}

/// Truncates long input, parses it, steps and records both sides in history.
pub fn respond(
    ctx: &SessionContext,
    text: &str,
    services: &Services<'_>,
    now_ms: u64,
) -> (SessionContext, BotTurn) {
    let words: Vec<&str> = text.split_whitespace().collect();
    let truncated = words.len() > MAX_UTTERANCE_WORDS;
    let used = if truncated {
        words[..MAX_UTTERANCE_WORDS].join(" ")
    } else {
        text.trim().to_string()
    };
    let intent = parse_utterance(&used, ctx, services.graph);
    let (mut next, mut turn) = step(ctx, &intent, services);
    if truncated {
        turn.messages.insert(
            0,
            format!("Your message was long, so I only used its first {MAX_UTTERANCE_WORDS} words."),
        );
    }
    next.history.push(HistoryEntry {
        speaker: Speaker::User,
        text: text.to_string(),
        timestamp: now_ms,
    });
    next.history.push(HistoryEntry {
        speaker: Speaker::Bot,
        text: turn.messages.join("\n"),
        timestamp: now_ms,
    });
    (next, turn)
}

/// Moves a fresh context from the greeting into goal elicitation.
pub fn open(
    ctx: &SessionContext,
    services: &Services<'_>,
    now_ms: u64,
) -> (SessionContext, BotTurn) {
    let (mut next, turn) = step(ctx, &Intent::new(IntentKind::Help, 1.0, ""), services);
    next.history.push(HistoryEntry {
        speaker: Speaker::Bot,
        text: turn.messages.join("\n"),
        timestamp: now_ms,
    });
    (next, turn)
}
