//! Rendered prompts against golden files.

use std::collections::BTreeMap;

use scholarchat_core::llm::{PromptName, PromptTemplate};

fn fixture(name: &str) -> String {
    let path = format!(
        "{}/../../fixtures/prompts/{name}",
        env!("CARGO_MANIFEST_DIR")
    );
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn rendered_prompts_are_byte_identical() {
    for (name, stem) in [
        (PromptName::ClusterName, "cluster_name"),
        (PromptName::ComparativeSummary, "comparative_summary"),
        (PromptName::TopicClassification, "topic_classification"),
    ] {
        let bindings: BTreeMap<String, String> =
            serde_json::from_str(&fixture(&format!("{stem}.bindings.json"))).unwrap();
        let rendered = PromptTemplate::get(name).render(&bindings).unwrap();
        assert_eq!(rendered, fixture(&format!("{stem}.golden.txt")), "{stem}");
    }
}
