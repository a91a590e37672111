//! Rule-based intent recognition with knowledge-graph entity matching.

use strsim::normalized_levenshtein;

use super::{cluster_rows, DialogueState, Intent, IntentKind, SessionContext};
use crate::graph::{NodeKind, ScholarGraph};
use crate::text::tokenize;

/// Smallest normalized edit similarity accepted as a fuzzy entity match.
pub const FUZZY_MIN: f64 = 0.85;

/// Command words in the order they win when several occur.
pub const KEYWORDS: [(&str, IntentKind); 6] = [
    ("restart", IntentKind::Restart),
    ("back", IntentKind::GoBack),
    ("help", IntentKind::Help),
    ("compare", IntentKind::Compare),
    ("definition", IntentKind::ShowDefinition),
    ("link", IntentKind::GetLinks),
];

/// Commands are only recognized in short utterances, so a goal that happens
/// to contain "back" or "compare" is still read as a goal.
const MAX_COMMAND_TOKENS: usize = 4;

/// Free text needs this many tokens to count as a goal description.
const MIN_GOAL_TOKENS: usize = 3;

/// An entity the user may name in the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub id: String,
    pub kind: IntentKind,
    pub slot: &'static str,
}

/// Entities selectable in `ctx.state`, in id order.
pub fn candidates(ctx: &SessionContext, graph: &ScholarGraph) -> Vec<Candidate> {
    let mk = |name: &str, id: &str, kind, slot| Candidate {
        name: name.to_string(),
        id: id.to_string(),
        kind,
        slot,
    };
    match ctx.state {
        DialogueState::TopicSelection => graph
            .nodes_of(NodeKind::Topic)
            .filter(|n| n.str_prop("level") == Some("sub"))
            .filter_map(|n| Some(mk(n.name()?, &n.id, IntentKind::SelectTopic, "topic")))
            .collect(),
        DialogueState::ClusterNavigation => cluster_rows(graph, ctx)
            .iter()
            .filter_map(|r| {
                let id = r.get("id")?.as_str()?;
                let name = r.get("name")?.as_str()?;
                Some(mk(name, id, IntentKind::SelectCluster, "cluster"))
            })
            .collect(),
        DialogueState::PaperListing => ctx
            .listed_paper_ids
            .iter()
            .filter_map(|id| {
                let title = graph.node(id)?.name()?;
                Some(mk(title, id, IntentKind::SelectPaper, "paper"))
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn entity_intent(c: &Candidate, confidence: f64, text: &str) -> Intent {
    let mut intent = Intent::new(c.kind, confidence, text);
    intent.slots.insert(c.slot.to_string(), c.id.clone());
    intent
}

/// Rules two to four: exact name, fuzzy name, command keyword.
fn resolve(text: &str, ctx: &SessionContext, graph: &ScholarGraph) -> Option<Intent> {
    let cands = candidates(ctx, graph);
    let lower = text.to_lowercase();
    if let Some(c) = cands.iter().find(|c| c.name.to_lowercase() == lower) {
        return Some(entity_intent(c, 1.0, text));
    }
    let mut best: Option<(&Candidate, f64)> = None;
    for c in &cands {
        let sim = normalized_levenshtein(&c.name.to_lowercase(), &lower);
        if sim >= FUZZY_MIN && best.is_none_or(|(_, s)| sim > s) {
            best = Some((c, sim));
        }
    }
    if let Some((c, sim)) = best {
        return Some(entity_intent(c, sim, text));
    }
    let tokens = tokenize(text);
    if !tokens.is_empty() && tokens.len() <= MAX_COMMAND_TOKENS {
        for (kw, kind) in KEYWORDS {
            let hit = tokens
                .iter()
                .any(|t| t == kw || t.strip_suffix('s') == Some(kw));
            if hit {
                let confidence = if tokens.len() == 1 { 1.0 } else { 0.9 };
                return Some(Intent::new(kind, confidence, text));
            }
        }
    }
    None
}

/// Maps an utterance to an intent. Never fails: anything unrecognized is
/// `out_of_scope`.
///
/// Resolution order: a verbatim suggestion (confidence 1), a
/// case-insensitive entity name, a fuzzy entity name, a command keyword,
/// and in goal elicitation (or topic selection without a match) any text of
/// three or more tokens as a goal description.
pub fn parse_utterance(text: &str, ctx: &SessionContext, graph: &ScholarGraph) -> Intent {
    let text = text.trim();
    if ctx.suggestion_set.iter().any(|s| s == text) {
        if let Some(mut intent) = resolve(text, ctx, graph) {
            intent.confidence = 1.0;
            return intent;
        }
    }
    if let Some(intent) = resolve(text, ctx, graph) {
        return intent;
    }
    let goal_state = matches!(
        ctx.state,
        DialogueState::GoalElicitation | DialogueState::TopicSelection
    );
    if goal_state && tokenize(text).len() >= MIN_GOAL_TOKENS {
        return Intent::new(IntentKind::DescribeGoal, 0.5, text);
    }
    Intent::new(IntentKind::OutOfScope, 0.0, text)
}
