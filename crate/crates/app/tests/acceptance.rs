//! Acceptance run: one PASS or FAIL line per criterion, nonzero exit on any
//! failure. Every check runs at its full stated size and tolerance.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use scholarchat_app::config::AppConfig;
use scholarchat_app::server::AppState;
use scholarchat_core::classify::{classify_by_similarity, evaluate, ClassifierConfig};
use scholarchat_core::cluster::{
    agglomerate, build_all, check_hierarchy, dedup_names, rank_labels, ClusterNode,
    ClusteringParams, Linkage,
};
use scholarchat_core::dialogue::DialogueState;
use scholarchat_core::eval::{explore, run_script, walk_roots, ConversationScript};
use scholarchat_core::graph::build_graph;
use scholarchat_core::llm::{PromptName, PromptTemplate};
use scholarchat_core::reference::{brute_force_top_k, naive_agglomerate, naive_evaluate};
use scholarchat_core::synth::{hierarchy_corpus, TopicBlobs};
use scholarchat_core::{EmbeddingIndex, Scalar};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Files = BTreeMap<String, Vec<u8>>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn clustering_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut merges = 0;
    for instance in 0..1000 {
        let n = rng.gen_range(1..=12);
        let dim = rng.gen_range(1..=5);
        // Every other instance sits on a small integer grid to force ties.
        let grid = instance % 2 == 1;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if grid {
                            f64::from(rng.gen_range(0..3))
                        } else {
                            rng.gen_range(-5.0..5.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let items: Vec<(String, Vec<f64>)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("x{i:02}"), p.clone()))
            .collect();
        for linkage in [Linkage::Ward, Linkage::Complete, Linkage::Average] {
            let fast = agglomerate(&items, linkage).map_err(|e| e.to_string())?;
            let slow = naive_agglomerate(&points, linkage, f64::tie_tolerance());
            ensure(fast.merges.len() == slow.len(), || {
                format!("instance {instance}: merge count")
            })?;
            for (step, (f, s)) in fast.merges.iter().zip(&slow).enumerate() {
                ensure((f.a, f.b, f.size) == (s.a, s.b, s.size), || {
                    format!("instance {instance} {linkage:?} step {step}: {f:?} vs {s:?}")
                })?;
                ensure((f.distance - s.distance).abs() <= 1e-9, || {
                    format!("instance {instance} {linkage:?} step {step}: distance")
                })?;
                merges += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 instances x 3 linkages, {merges} merges identical, {elapsed:.2?}"
    ))
}

fn hierarchy_at_scale() -> Outcome {
    let params = ClusteringParams::default();
    let corpus = hierarchy_corpus(20, 250, 32, 15, 2);
    let started = Instant::now();
    let nodes = build_all(&corpus, &params).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    check_hierarchy(&nodes, params.leaf_max).map_err(|e| e.to_string())?;
    for (topic, members) in &corpus {
        let covered: BTreeSet<&str> = nodes
            .iter()
            .filter(|n| &n.topic_id == topic && n.parent_id.is_none())
            .flat_map(|n| n.member_ids.iter().map(String::as_str))
            .collect();
        ensure(covered.len() == members.len(), || {
            format!("{topic}: roots do not cover")
        })?;
    }
    let oversize: Vec<&ClusterNode> = nodes
        .iter()
        .filter(|n| n.leaf && n.member_ids.len() >= params.leaf_max)
        .collect();
    let unflagged = oversize.iter().filter(|n| !n.unsplittable).count();
    ensure(unflagged == 0, || {
        format!("{unflagged} oversize leaves not flagged")
    })?;
    ensure(elapsed < Duration::from_secs(120), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "5000 vectors, {} nodes, 0 violations, {} flagged unsplittable leaf, {elapsed:.2?}",
        nodes.len(),
        oversize.len()
    ))
}

fn vector_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vectors: Vec<(String, Vec<f64>)> = (0..1000)
        .map(|i| {
            let v = (0..64).map(|_| rng.sample(StandardNormal)).collect();
            (format!("v{i:04}"), v)
        })
        .collect();
    let mut index = EmbeddingIndex::new(64);
    for (id, v) in &vectors {
        index.insert(id, v).map_err(|e| e.to_string())?;
    }
    let queries = 50;
    for q in 0..queries {
        let query: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
        let hits = index.top_k(&query, 100).map_err(|e| e.to_string())?;
        let oracle = brute_force_top_k(&vectors, &query, 100);
        ensure(hits.len() == 100, || {
            format!("query {q}: {} hits", hits.len())
        })?;
        for (rank, (h, (id, score))) in hits.iter().zip(&oracle).enumerate() {
            ensure(&h.id == id && (h.score - score).abs() <= 1e-9, || {
                format!(
                    "query {q} rank {rank}: {} {} vs {id} {score}",
                    h.id, h.score
                )
            })?;
        }
    }
    Ok(format!(
        "{queries} queries, top 100 of 1000 at D=64 match the full scan"
    ))
}

fn threshold() -> Outcome {
    let mut blobs = TopicBlobs::new(8, 60, 64, 0.05, 4);
    let graph = build_graph(&blobs.records, &blobs.taxonomy).map_err(|e| e.to_string())?;
    let mut index = EmbeddingIndex::new(64);
    for r in &blobs.embeddings.records {
        index.insert(&r.id, &r.vector).map_err(|e| e.to_string())?;
    }
    let cfg = ClassifierConfig::default();
    let mut none = 0;
    for _ in 0..200 {
        let q = blobs.far_query(cfg.oos_threshold);
        let p = classify_by_similarity(&q, &index, &graph, &cfg).map_err(|e| e.to_string())?;
        none += usize::from(p.topic_id.is_none());
    }
    let topics: Vec<String> = blobs.centroids.keys().cloned().collect();
    let mut correct = 0;
    for i in 0..200 {
        let t = &topics[i % topics.len()];
        let q = blobs.near_query(t);
        let p = classify_by_similarity(&q, &index, &graph, &cfg).map_err(|e| e.to_string())?;
        correct += usize::from(p.topic_id.as_deref() == Some(t.as_str()));
    }
    ensure(none == 200, || {
        format!("far queries: {none}/200 out of scope")
    })?;
    ensure(correct * 100 >= 95 * 200, || {
        format!("near queries: {correct}/200 correct")
    })?;
    Ok(format!(
        "far: 200/200 None; near held-out: {correct}/200 correct"
    ))
}

fn tfidf_naming() -> Outcome {
    let docs = vec![
        vec!["emotion detection tweets", "emotion detection posts"],
        vec!["machine translation speech"],
        vec!["question answering graphs"],
    ];
    // N = 3 and every n-gram occurs in one document: idf = ln(4/2) + 1.
    let idf = 2f64.ln() + 1.0;
    let expected: [&[(&str, f64)]; 3] = [
        &[
            ("emotion detection", 2.0 * idf),
            ("emotion detection posts", idf),
            ("emotion detection tweets", idf),
            ("detection posts", idf),
            ("detection tweets", idf),
        ],
        &[
            ("machine translation speech", idf),
            ("machine translation", idf),
            ("translation speech", idf),
        ],
        &[
            ("question answering graphs", idf),
            ("answering graphs", idf),
            ("question answering", idf),
        ],
    ];
    for (c, want) in expected.iter().enumerate() {
        let got = rank_labels(&docs, c);
        ensure(got.len() == want.len(), || format!("cluster {c}: {got:?}"))?;
        for ((g, gs), (w, ws)) in got.iter().zip(want.iter()) {
            ensure(g == w && (gs - ws).abs() <= 1e-9, || {
                format!("cluster {c}: got {g} {gs}, want {w} {ws}")
            })?;
        }
    }
    let node = |topic: &str, id: &str, labels: &[&str]| ClusterNode {
        id: id.into(),
        topic_id: topic.into(),
        parent_id: None,
        depth: 0,
        member_ids: vec![format!("{id}-p")],
        threshold_used: 10.0,
        tfidf_name: labels[0].into(),
        display_name: labels[0].into(),
        label_candidates: labels.iter().map(|s| s.to_string()).collect(),
        unsplittable: false,
        leaf: true,
    };
    let mut nodes = vec![
        node("t", "t/c3", &["a", "b", "c"]),
        node("t", "t/c0", &["a", "b", "c"]),
        node("t", "t/c1", &["a", "b", "c"]),
        node("t", "t/c2", &["a", "b", "c"]),
        node("t", "t/c4", &["a"]),
        node("t", "t/c5", &["a (2)"]),
        node("u", "u/c0", &["a", "b"]),
    ];
    dedup_names(&mut nodes);
    let names: BTreeMap<&str, &str> = nodes
        .iter()
        .map(|n| (n.id.as_str(), n.display_name.as_str()))
        .collect();
    let want = BTreeMap::from([
        ("t/c0", "a"),
        ("t/c1", "b"),
        ("t/c2", "c"),
        ("t/c3", "a (2)"),
        ("t/c4", "a (3)"),
        ("t/c5", "a (2) (2)"),
        ("u/c0", "a"),
    ]);
    ensure(names == want, || format!("dedup gave {names:?}"))?;
    let mut seen = BTreeSet::new();
    let duplicates = nodes
        .iter()
        .filter(|n| !seen.insert((n.topic_id.clone(), n.display_name.clone())))
        .count();
    ensure(duplicates == 0, || format!("{duplicates} duplicate names"))?;
    Ok("toy corpus scores match by hand to 1e-9; collision fixture left 0 duplicates".into())
}

fn metrics() -> Outcome {
    let pairs = |g: &[&str], p: &[&str]| -> Vec<(String, String)> {
        g.iter()
            .zip(p)
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    };
    let hand = evaluate(&pairs(&["A", "A", "B", "B"], &["A", "B", "B", "B"]))
        .map_err(|e| e.to_string())?;
    ensure((hand.macro_f1 - 0.7333).abs() <= 1e-4, || {
        format!("macro_f1 {}", hand.macro_f1)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels = ["A", "B", "C", "D", "E", "None"];
    for set in 0..100 {
        let n = rng.gen_range(1..=50);
        let p: Vec<(String, String)> = (0..n)
            .map(|_| {
                (
                    labels[rng.gen_range(0..labels.len())].to_string(),
                    labels[rng.gen_range(0..labels.len())].to_string(),
                )
            })
            .collect();
        let fast = evaluate(&p).map_err(|e| e.to_string())?;
        ensure(fast == naive_evaluate(&p), || {
            format!("label set {set} differs")
        })?;
    }
    Ok(format!(
        "hand example macro_f1 {:.4}; 100 random label sets identical",
        hand.macro_f1
    ))
}

fn prompt_fidelity() -> Outcome {
    let dir = common::repo_path("fixtures/prompts");
    for (name, stem) in [
        (PromptName::ClusterName, "cluster_name"),
        (PromptName::ComparativeSummary, "comparative_summary"),
        (PromptName::TopicClassification, "topic_classification"),
    ] {
        let read =
            |f: String| std::fs::read_to_string(dir.join(&f)).map_err(|e| format!("{f}: {e}"));
        let bindings: BTreeMap<String, String> =
            serde_json::from_str(&read(format!("{stem}.bindings.json"))?)
                .map_err(|e| e.to_string())?;
        let rendered = PromptTemplate::get(name)
            .render(&bindings)
            .map_err(|e| e.to_string())?;
        let golden = read(format!("{stem}.golden.txt"))?;
        ensure(rendered == golden, || {
            let at = rendered
                .bytes()
                .zip(golden.bytes())
                .position(|(a, b)| a != b)
                .unwrap_or(rendered.len().min(golden.len()));
            format!("{stem}: first difference at byte {at}")
        })?;
    }
    Ok("3 prompts byte-identical to golden files".into())
}

const PROBES: &[&str] = &[
    "back",
    "restart",
    "help",
    "compare",
    "links",
    "definition",
    "hmm",
    "quantum chromodynamics lattice simulations",
    "I want to study how people express their feelings on social media.",
    "emotion analsis",
];

fn dialogue_regression() -> Outcome {
    let config = AppConfig::default();
    let state = AppState::new(common::desk_snapshot(), &config).map_err(|e| e.to_string())?;
    let mut scripts = Vec::new();
    let mut turns = Vec::new();
    for name in ["scenario1_emotion.json", "scenario2_exam_questions.json"] {
        let path = common::repo_path(&format!("fixtures/scripts/{name}"));
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let script = ConversationScript::from_json(&text).map_err(|e| e.to_string())?;
        let report = run_script(&script, &state.service).map_err(|e| e.to_string())?;
        ensure(report.passed, || {
            format!("{name}: {:?}", report.first_failure)
        })?;
        ensure(report.final_state() == DialogueState::Wrapup, || {
            format!("{name}: ends in {}", report.final_state().as_str())
        })?;
        ensure(report.user_turns() <= 10, || {
            format!("{name}: {} turns", report.user_turns())
        })?;
        turns.push(report.user_turns());
        scripts.push(script);
    }
    let services = state.service.engine.services();
    let roots = walk_roots(&services, &scripts);
    let walk = explore(&services, &roots, PROBES, 3);
    ensure(walk.violation_count == 0, || {
        format!(
            "{} violations, first: {:?}",
            walk.violation_count, walk.violations
        )
    })?;
    ensure(walk.missing_states().is_empty(), || {
        format!("unreached {:?}", walk.missing_states())
    })?;
    let p95 = walk.p95();
    ensure(p95 <= Duration::from_millis(100), || format!("p95 {p95:?}"))?;
    Ok(format!(
        "scripts reach S7 in {turns:?} turns; {} walk transitions, 0 violations; p95 {p95:.2?}",
        walk.transitions
    ))
}

fn files(dir: &Path) -> Files {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn strip_timestamps(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timestamp");
            map.values_mut().for_each(strip_timestamps);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

fn run_bin(args: &[&str]) -> Result<(), String> {
    let out = common::cli(args);
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

/// One cold pipeline run plus the recorded API session against it.
fn cold_run(root: &Path) -> Result<(Files, Vec<String>), String> {
    let raw = root.join("raw");
    let snap = root.join("snap");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run_bin(&["synth-fixture", "--out", &s(&raw)])?;
    run_bin(&[
        "ingest",
        "--corpus",
        &s(&raw.join("publications.jsonl")),
        "--taxonomy",
        &s(&raw.join("taxonomy.json")),
        "--embeddings",
        &s(&raw.join("embeddings.jsonl")),
        "--out",
        &s(&snap),
    ])?;
    run_bin(&["cluster", "--snapshot", &s(&snap)])?;
    run_bin(&["name-clusters", "--snapshot", &s(&snap)])?;
    run_bin(&["segment", "--snapshot", &s(&snap)])?;

    let mut child = Command::new(env!("CARGO_BIN_EXE_scholarchat"))
        .args(["serve", "--snapshot", &s(&snap), "--port", "0"])
        .env("APP_SERVER__SESSION_ID_SEED", "17")
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .map_err(|e| e.to_string())?;
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or_else(|| format!("unexpected first line {line:?}"))?
        .to_string();
    let recorded: Value = serde_json::from_str(
        &std::fs::read_to_string(common::repo_path("fixtures/api/recorded_session.json"))
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let agent = common::agent();
    let mut session = String::new();
    let mut bodies = Vec::new();
    for req in recorded["requests"].as_array().unwrap() {
        let path = req["path"].as_str().unwrap().replace("{session}", &session);
        let url = format!("{base}{path}");
        let (status, mut body) = match req["method"].as_str().unwrap() {
            "GET" => common::call(agent.get(&url).call()),
            _ => common::call(agent.post(&url).send_json(req["body"].clone())),
        };
        if session.is_empty() {
            session = body["session_id"].as_str().unwrap_or_default().to_string();
        }
        strip_timestamps(&mut body);
        bodies.push(format!("{status} {body}"));
    }
    let _ = child.kill();
    let _ = child.wait();
    Ok((files(&snap), bodies))
}

fn end_to_end_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (files_a, bodies_a) = cold_run(a.path())?;
    let (files_b, bodies_b) = cold_run(b.path())?;
    let names: Vec<&String> = files_a.keys().collect();
    ensure(files_a.len() == 7, || format!("snapshot files {names:?}"))?;
    for (name, bytes) in &files_a {
        ensure(files_b.get(name) == Some(bytes), || {
            format!("{name} differs between runs")
        })?;
    }
    ensure(files_a.len() == files_b.len(), || "file sets differ".into())?;
    for (i, (x, y)) in bodies_a.iter().zip(&bodies_b).enumerate() {
        ensure(x == y, || format!("response {i} differs:\n{x}\n{y}"))?;
    }
    let statuses: HashMap<&str, usize> = bodies_a.iter().fold(HashMap::new(), |mut m, b| {
        *m.entry(&b[..3]).or_default() += 1;
        m
    });
    ensure(
        statuses.get("201") == Some(&1)
            && statuses.get("404") == Some(&1)
            && statuses.get("422") == Some(&1),
        || format!("unexpected statuses {statuses:?}"),
    )?;
    ensure(bodies_a.iter().any(|b| b.contains("S7_wrapup")), || {
        "session never reached S7".into()
    })?;
    Ok(format!(
        "{} snapshot files and {} response bodies byte-identical across two cold runs",
        files_a.len(),
        bodies_a.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("clustering oracle equivalence", clustering_oracle),
        ("hierarchy invariants at scale", hierarchy_at_scale),
        ("vector search exactness", vector_search),
        ("out-of-scope threshold", threshold),
        ("tf-idf naming and dedup", tfidf_naming),
        ("classification metrics", metrics),
        ("prompt fidelity", prompt_fidelity),
        ("dialogue regression", dialogue_regression),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
