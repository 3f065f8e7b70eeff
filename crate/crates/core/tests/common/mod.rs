//! Fixture loaders and independent oracles shared by the integration tests.
//! The oracles deliberately avoid the library's scoring code.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::{Arc, LazyLock};

use regex::Regex;

use kgforge_core::discovery::Gazetteer;
use kgforge_core::index::{IndexBuilder, IngestStats, KbIndex, Namespaces, RecordKind};
use kgforge_core::pipeline::{Backends, Pipeline, PipelineConfig};
use kgforge_core::relation::PatternTable;

pub const FIXTURE_TEXT: &str = "Weimar is a city in Germany.";
pub const WEIMAR: &str = "http://www.wikidata.org/entity/Q3955";
pub const GERMANY: &str = "http://www.wikidata.org/entity/Q183";
pub const COUNTRY: &str = "http://www.wikidata.org/prop/direct/P17";
pub const FIXTURE_LINE: &str = "<http://www.wikidata.org/entity/Q3955> <http://www.wikidata.org/prop/direct/P17> <http://www.wikidata.org/entity/Q183> .\n";

/// The core crate's fixture directory, also when compiled into another crate's tests.
pub fn fixtures() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    if here.join("fixtures").is_dir() {
        here.join("fixtures")
    } else {
        here.join("../core/fixtures")
    }
}

pub fn ingest(builder: &mut IndexBuilder, file: &str, kind: RecordKind) -> IngestStats {
    let f = File::open(fixtures().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
    builder.ingest(BufReader::new(f), kind).unwrap()
}

pub fn entity_index(file: &str) -> (KbIndex, IngestStats) {
    let mut b = IndexBuilder::new(Namespaces::default());
    let stats = ingest(&mut b, file, RecordKind::Entity);
    (b.build(), stats)
}

/// Entities and properties of the main fixture knowledge base.
pub fn kb() -> KbIndex {
    let mut b = IndexBuilder::new(Namespaces::default());
    ingest(&mut b, "kb/entities.jsonl", RecordKind::Entity);
    ingest(&mut b, "kb/properties.jsonl", RecordKind::Property);
    b.build()
}

pub fn gazetteer() -> Gazetteer {
    Gazetteer::load(&fixtures().join("kb/gazetteer.tsv")).unwrap()
}

pub fn reference_pipeline(index: Arc<KbIndex>, config: PipelineConfig) -> Pipeline {
    Pipeline::new(index, Backends::reference(gazetteer(), PatternTable::default()), config)
}

pub fn oracle_tokens(s: &str) -> Vec<String> {
    s.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Textbook BM25 over a list of documents, recomputing every statistic.
pub fn naive_bm25(query: &str, doc: &str, corpus: &[String], k1: f64, b: f64) -> f64 {
    let docs: Vec<Vec<String>> = corpus.iter().map(|d| oracle_tokens(d)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let d = oracle_tokens(doc);
    let dl = d.len() as f64;
    let mut score = 0.0;
    for q in oracle_tokens(query) {
        let df = docs.iter().filter(|toks| toks.contains(&q)).count() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let tf = d.iter().filter(|t| **t == q).count() as f64;
        if tf > 0.0 {
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
    }
    score
}

pub struct OracleRecord {
    pub iri: String,
    pub label: String,
    pub key: String,
    pub commonness: u64,
}

/// `max(alpha * bm25(label), bm25(key))` scaled by `log10(commonness + 1)`.
pub fn oracle_scores(mention: &str, records: &[OracleRecord], alpha: f64) -> Vec<(String, f64, f64)> {
    let labels: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
    let keys: Vec<String> = records.iter().map(|r| r.key.clone()).collect();
    records
        .iter()
        .map(|r| {
            let l = naive_bm25(mention, &r.label, &labels, 1.2, 0.75);
            let k = naive_bm25(mention, &r.key, &keys, 1.2, 0.75);
            let relevance = (alpha * l).max(k);
            (r.iri.clone(), relevance, relevance * ((r.commonness + 1) as f64).log10())
        })
        .collect()
}

pub fn oracle_jaccard(text: &str, label: &str) -> f64 {
    let a: HashSet<String> = oracle_tokens(text).into_iter().collect();
    let b: HashSet<String> = oracle_tokens(label).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// W3C N-Triples line grammar (ASCII blank node labels).
static NT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    let iri = r#"<(?:[^\x00-\x20<>"{}|^`\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*>"#;
    let blank = r"_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?";
    let literal = format!(
        r#""(?:[^"\\\n\r]|\\[tbnrf"'\\]|\\u[0-9A-Fa-f]{{4}}|\\U[0-9A-Fa-f]{{8}})*"(?:\^\^{iri}|@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*)?"#
    );
    Regex::new(&format!(r"^(?:{iri}|{blank})[ \t]+{iri}[ \t]+(?:{iri}|{blank}|{literal})[ \t]*\.[ \t]*$")).unwrap()
});

/// Every line matches the grammar and ends with `\n`.
pub fn valid_ntriples(doc: &str) -> Result<(), String> {
    if !doc.is_empty() && !doc.ends_with('\n') {
        return Err("missing final newline".into());
    }
    for (i, line) in doc.lines().enumerate() {
        if !NT_LINE.is_match(line) {
            return Err(format!("line {}: {line:?}", i + 1));
        }
    }
    Ok(())
}

/// Brute-force selection over `subjects × objects` with the full score
/// chain: mean score, boost for known statements, token-overlap entailment.
pub struct BruteForceCase<'a> {
    pub text: &'a str,
    /// `(iri, label, description, score)`
    pub subjects: &'a [(String, String, String, f64)],
    pub objects: &'a [(String, String, String, f64)],
    pub property: (&'a str, &'a str),
    pub known: &'a BTreeSet<(String, String)>,
    pub boost: f64,
}

impl BruteForceCase<'_> {
    pub fn best(&self) -> Option<(String, String, f64)> {
        let bracket = |label: &str, desc: &str| {
            if desc.is_empty() {
                label.to_string()
            } else {
                format!("{label} ({desc})")
            }
        };
        let mut best: Option<(String, String, f64)> = None;
        for (s, sl, sd, ss) in self.subjects {
            for (o, ol, od, os) in self.objects {
                let mut score = (ss + os) / 2.0;
                if self.known.contains(&(s.clone(), o.clone())) {
                    score *= self.boost;
                }
                let label = format!("{} {} {}", bracket(sl, sd), self.property.1, bracket(ol, od));
                score *= oracle_jaccard(self.text, &label);
                let better = match &best {
                    None => true,
                    Some((bs, bo, b)) => score > *b || (score == *b && (s, o) < (bs, bo)),
                };
                if better {
                    best = Some((s.clone(), o.clone(), score));
                }
            }
        }
        best
    }
}

pub mod fusion_case {
    use std::collections::BTreeSet;

    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    use kgforge_core::fusion::{apply_existence_boost, fuse, nli_rank, select, FusionConfig, JaccardNli};
    use kgforge_core::index::{Statement, StatementObject, StatementStore};
    use kgforge_core::model::{
        EntityType, Iri, KbRecord, LinkedMention, Mention, Node, Resolution, ScoredCandidate, Span,
    };
    use kgforge_core::relation::ExtractedRelation;

    use super::BruteForceCase;

    const WORDS: &[&str] =
        &["weimar", "germany", "city", "state", "river", "art", "school", "in", "is", "a", "country"];
    const SCORES: &[f64] = &[0.0, 0.25, 0.5, 0.75, 1.0];
    const ENTITY: &str = "http://www.wikidata.org/entity/";

    fn phrase(rng: &mut StdRng, max: usize) -> String {
        let n = rng.random_range(0..=max);
        (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
    }

    fn candidates(rng: &mut StdRng) -> Vec<(String, String, String, f64)> {
        let n = rng.random_range(1..=4);
        let mut ids: Vec<u32> = Vec::new();
        while ids.len() < n {
            let id = rng.random_range(1..10);
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids.into_iter()
            .map(|id| {
                let label = phrase(rng, 2);
                let label = if label.is_empty() { format!("item{id}") } else { label };
                (format!("{ENTITY}Q{id}"), label, phrase(rng, 3), SCORES[rng.random_range(0..SCORES.len())])
            })
            .collect()
    }

    fn mention(span: Span, list: &[(String, String, String, f64)]) -> LinkedMention {
        let mut scored: Vec<ScoredCandidate> = list
            .iter()
            .map(|(iri, label, desc, score)| ScoredCandidate {
                record: KbRecord::new(Iri::new_unchecked(iri.clone()), label.clone(), desc.clone(), vec![], 1),
                relevance: *score,
                score: *score,
            })
            .collect();
        scored.sort_by(kgforge_core::model::rank_order);
        LinkedMention {
            mention: Mention {
                span,
                surface: "x".repeat(span.len()),
                etype: EntityType::Gpe,
                source: "random".into(),
                preferred_iri: None,
            },
            resolution: Resolution::Linked { candidates: scored, selected: 0 },
        }
    }

    /// Runs one randomized relation through the library and the brute-force
    /// oracle; `Err` describes a disagreement.
    pub fn check(seed: u64, boost: f64) -> Result<(), String> {
        let mut rng = StdRng::seed_from_u64(seed);
        let subjects = candidates(&mut rng);
        let objects = candidates(&mut rng);
        let text = phrase(&mut rng, 8);
        let mut known = BTreeSet::new();
        for (s, ..) in &subjects {
            for (o, ..) in &objects {
                if rng.random_bool(0.25) {
                    known.insert((s.clone(), o.clone()));
                }
            }
        }
        let property =
            KbRecord::new(Iri::new_unchecked("http://www.wikidata.org/prop/direct/P17"), "country", "", vec![], 1);
        let store: StatementStore = known
            .iter()
            .map(|(s, o)| Statement {
                subject: Iri::new_unchecked(s.clone()),
                property: property.iri.clone(),
                object: StatementObject::Iri(Iri::new_unchecked(o.clone())),
            })
            .collect();
        let mentions = [mention(Span::new(0, 1), &subjects), mention(Span::new(2, 3), &objects)];
        let relation = ExtractedRelation {
            subject: Span::new(0, 1),
            object: Span::new(2, 3),
            predicate_surface: "country".into(),
            linked_property: Some(property.clone()),
        };
        let config = FusionConfig { boost_factor: boost, ..Default::default() };
        let mut fused = fuse(&mentions, &[relation], &config);
        let group = &mut fused.relations[0];
        if group.candidates.len() != subjects.len() * objects.len() {
            return Err(format!("seed {seed}: {} candidates", group.candidates.len()));
        }
        for c in &mut group.candidates {
            apply_existence_boost(c, &store, &config);
        }
        nli_rank(&text, &mut fused.relations, &JaccardNli, &config);
        for c in &fused.relations[0].candidates {
            let factor = if c.existence_boosted { boost } else { 1.0 };
            if (c.final_score - c.base_score * factor * c.nli_probability).abs() > 1e-12 {
                return Err(format!("seed {seed}: final score does not factorize"));
            }
        }
        let chosen = select(&fused.relations);
        let oracle = BruteForceCase {
            text: &text,
            subjects: &subjects,
            objects: &objects,
            property: ("P17", "country"),
            known: &known,
            boost,
        }
        .best()
        .unwrap();
        let got = match chosen.as_slice() {
            [t] => match (&t.subject, &t.object) {
                (Node::Entity(s), Node::Entity(o)) => (s.iri.to_string(), o.iri.to_string()),
                _ => return Err(format!("seed {seed}: non-entity triple")),
            },
            other => return Err(format!("seed {seed}: {} triples selected", other.len())),
        };
        if got != (oracle.0.clone(), oracle.1.clone()) {
            return Err(format!("seed {seed}: selected {got:?}, oracle {:?}", (oracle.0, oracle.1)));
        }
        Ok(())
    }
}

pub mod random_graph {
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    use kgforge_core::model::{
        BlankEntity, EntityRef, Iri, KnowledgeGraph, LiteralKind, LiteralValue, Node, Span, Triple,
    };

    const CHARS: &[char] =
        &['a', 'Z', '7', ' ', '"', '\\', '\n', '\r', '\t', '\u{1}', '\u{7f}', 'é', 'ß', '中', '😀', '\'', '<', '>'];
    const DATATYPES: &[&str] = &["string", "date", "dateTime", "decimal", "integer", "gYear"];

    fn entity(rng: &mut StdRng, prefix: &str) -> EntityRef {
        let local = match rng.random_range(0..3) {
            0 => format!("Q{}", rng.random_range(1..40)),
            1 => format!("Stra\u{df}e_{}", rng.random_range(1..5)),
            _ => format!("a-b.c~{}", rng.random_range(1..5)),
        };
        EntityRef::new(Iri::new_unchecked(format!("{prefix}{local}")), "", "")
    }

    fn blank(rng: &mut StdRng, anchored: &mut bool) -> Node {
        if rng.random_bool(0.5) {
            *anchored = true;
            let start = rng.random_range(0..20);
            Node::Unlinked(BlankEntity { label: "x".into(), anchor: Some(Span::new(start, start + 2)) })
        } else {
            let first = ['b', 'n', 'X', '_'][rng.random_range(0..4)];
            Node::Unlinked(BlankEntity { label: format!("{first}{}", rng.random_range(0..6)), anchor: None })
        }
    }

    fn literal(rng: &mut StdRng) -> Node {
        let len = rng.random_range(0..8);
        let lexical: String = (0..len).map(|_| CHARS[rng.random_range(0..CHARS.len())]).collect();
        let dt = DATATYPES[rng.random_range(0..DATATYPES.len())];
        Node::Literal(LiteralValue::new(LiteralKind::Temporal, lexical, dt))
    }

    /// A graph of up to 12 triples with IRIs, blank nodes and awkward
    /// literals; the flag reports whether any blank node is span-anchored.
    pub fn generate(seed: u64) -> (KnowledgeGraph, bool) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut anchored = false;
        let mut graph = KnowledgeGraph::default();
        for _ in 0..rng.random_range(0..=12) {
            let subject = if rng.random_bool(0.7) {
                Node::Entity(entity(&mut rng, "http://www.wikidata.org/entity/"))
            } else {
                blank(&mut rng, &mut anchored)
            };
            let predicate = entity(&mut rng, "http://www.wikidata.org/prop/direct/");
            let object = match rng.random_range(0..3) {
                0 => Node::Entity(entity(&mut rng, "http://www.wikidata.org/entity/")),
                1 => blank(&mut rng, &mut anchored),
                _ => literal(&mut rng),
            };
            graph.insert(Triple::new(subject, predicate, object).unwrap());
        }
        (graph, anchored)
    }
}

/// Hand-computed macro precision, recall and F1 of the reference pipeline
/// on `eval_dataset.jsonl`, in table order.
pub const EVAL_EXPECTED: [(&str, f64, f64, f64); 7] = [
    ("NER", 1.0, 14.0 / 15.0, 26.0 / 27.0),
    ("Entity Retrieval", 8.0 / 9.0, 14.0 / 15.0, 121.0 / 135.0),
    ("Entity Reranking", 1.0, 14.0 / 15.0, 26.0 / 27.0),
    ("Relation Extraction", 1.0, 7.0 / 9.0, 13.0 / 15.0),
    ("Relation Linking", 1.0, 7.0 / 9.0, 13.0 / 15.0),
    ("Knowledge Fusion", 1.0, 7.0 / 9.0, 13.0 / 15.0),
    ("NLI", 1.0, 7.0 / 9.0, 13.0 / 15.0),
];

pub fn eval_records() -> Vec<kgforge_core::eval::EvalRecord> {
    let ds = kgforge_core::eval::load_dataset(&fixtures().join("eval_dataset.jsonl"), &Namespaces::default()).unwrap();
    assert_eq!(ds.skipped, 0);
    ds.records
}

/// 30 "Springfield" records among 200 fillers; 25 have enough commonness to
/// clear the threshold.
pub fn springfield_index() -> KbIndex {
    let mut dump = String::new();
    for i in 0..30 {
        let commonness = if i < 25 { 1_000_000 } else { 10 };
        dump.push_str(&format!(
            "{{\"id\":\"Q{}\",\"label\":\"Springfield\",\"description\":\"town number {i}\",\"outgoing\":[{{\"property\":\"P17\",\"target\":\"Q30\"}}],\"commonness_override\":{commonness}}}\n",
            1000 + i
        ));
    }
    for i in 0..200 {
        dump.push_str(&format!(
            "{{\"id\":\"Q{}\",\"label\":\"Filler{i}\",\"outgoing\":[{{\"property\":\"P31\",\"target\":\"Q5\"}}]}}\n",
            5000 + i
        ));
    }
    let mut b = IndexBuilder::new(Namespaces::default());
    b.ingest(dump.as_bytes(), RecordKind::Entity).unwrap();
    b.build()
}

/// Oracle view of an index's records; the search key is rebuilt from the raw fields.
pub fn oracle_records(index: &KbIndex, kind: RecordKind) -> Vec<OracleRecord> {
    index
        .records(kind)
        .records()
        .iter()
        .map(|r| {
            let key = [r.label.as_str(), r.description.as_str()]
                .into_iter()
                .chain(r.aliases.iter().map(String::as_str))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            OracleRecord { iri: r.iri.to_string(), label: r.label.clone(), key, commonness: r.commonness }
        })
        .collect()
}

/// Queries for the scoring oracle comparison.
pub const QUERIES: &[&str] = &[
    "Weimar",
    "Germany",
    "city in Germany",
    "Bauhaus school",
    "Berlin Berlin",
    "german",
    "Central Europe country",
    "Walter Gropius",
    "DAF",
    "nothing matches this",
];
