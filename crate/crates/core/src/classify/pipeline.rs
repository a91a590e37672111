use std::collections::BTreeSet;

use serde::Serialize;

use super::{
    classify_by_provider, classify_by_similarity, classify_within, ClassifierConfig, ClassifyError,
    Method, QueryEncoder, TopicPrediction, TopicProvider,
};
use crate::graph::ScholarGraph;
use crate::index::VectorIndex;
use crate::ingest::{Taxonomy, TopicLevel};

/// Everything goal classification needs, borrowed from the serving state.
pub struct TopicContext<'a> {
    pub graph: &'a ScholarGraph,
    pub index: &'a VectorIndex<f64>,
    pub taxonomy: &'a Taxonomy,
    pub encoder: &'a dyn QueryEncoder,
    pub provider: Option<&'a dyn TopicProvider>,
    pub config: &'a ClassifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalClassification {
    pub main_topic: Option<String>,
    /// Prediction at the configured level (subtopics by default).
    pub prediction: TopicPrediction,
}

/// Classifies a free-text goal.
///
/// With a provider configured the provider picks the main topic and
/// similarity voting restricted to its subtopics picks the subtopic.
/// Without one, voting runs directly at the configured level.
pub fn classify_goal(
    text: &str,
    ctx: &TopicContext<'_>,
) -> Result<GoalClassification, ClassifyError> {
    let vector = ctx.encoder.encode(text).map_err(ClassifyError::Encoder)?;
    let main_cfg = ClassifierConfig {
        level: TopicLevel::Main,
        ..ctx.config.clone()
    };

    let main = match ctx.provider {
        Some(provider) => {
            let p = classify_by_provider(text, provider, ctx.taxonomy, || match &vector {
                Some(v) => classify_by_similarity(v, ctx.index, ctx.graph, &main_cfg),
                None => Ok(TopicPrediction::out_of_scope(Method::SimilarityVote)),
            })?;
            match p.topic_id {
                Some(id) => Some(id),
                None => {
                    return Ok(GoalClassification {
                        main_topic: None,
                        prediction: p,
                    })
                }
            }
        }
        None => None,
    };

    let Some(vector) = vector else {
        return Ok(GoalClassification {
            main_topic: None,
            prediction: TopicPrediction::out_of_scope(Method::SimilarityVote),
        });
    };

    let prediction = match (&main, ctx.config.level) {
        (Some(main_id), TopicLevel::Sub) => {
            let allowed: BTreeSet<String> = ctx
                .taxonomy
                .children(main_id)
                .into_iter()
                .map(|e| e.id.clone())
                .collect();
            classify_within(&vector, ctx.index, ctx.graph, ctx.config, &allowed)?
        }
        _ => classify_by_similarity(&vector, ctx.index, ctx.graph, ctx.config)?,
    };
    let main_topic = main.or_else(|| {
        let id = prediction.topic_id.as_deref()?;
        let entry = ctx.taxonomy.get(id)?;
        Some(entry.parent_id.clone().unwrap_or_else(|| entry.id.clone()))
    });
    Ok(GoalClassification {
        main_topic,
        prediction,
    })
}
