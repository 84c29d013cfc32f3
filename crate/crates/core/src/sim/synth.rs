//! Deterministic synthetic collections with entity annotations.
//!
//! Every target entity has a full name and a short name; the short name is
//! shared with a more popular namesake, so short-name mentions are ambiguous.
//! A target's documents each focus on one of its aspects: a handful of aspect
//! keyphrases, one or two related entities, and a variable amount of noise
//! keyphrases. In a confusable pair the namesake also uses a slice of the
//! target's most common keyphrases.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::workload::{write_jsonl, CatalogEntity};
use crate::corpus::{CorpusIndex, Document, DocumentRecord, EntityMention, KeyphraseRecord};
use crate::disambig::KbEntry;
use crate::error::{Error, Result};

pub const SYNTH_CORPUS_FILE: &str = "corpus.jsonl";
pub const SYNTH_ENTITIES_FILE: &str = "entities.jsonl";
pub const SYNTH_KB_FILE: &str = "kb.jsonl";
pub const SYNTH_PARAMS_FILE: &str = "params.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_entities: usize,
    pub docs_per_entity: usize,
    pub kps_per_entity: usize,
    pub confusable_pairs: usize,
}

impl SynthParams {
    /// The shipped benchmark configuration.
    pub fn benchmark(seed: u64) -> Self {
        SynthParams {
            seed,
            n_entities: 20,
            docs_per_entity: 40,
            kps_per_entity: 80,
            confusable_pairs: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_entities == 0 || self.docs_per_entity == 0 || self.kps_per_entity == 0 {
            return Err(Error::Validation(
                "n_entities, docs_per_entity and kps_per_entity must be positive".into(),
            ));
        }
        if self.confusable_pairs > self.n_entities {
            return Err(Error::Validation(format!(
                "confusable_pairs ({}) exceeds n_entities ({})",
                self.confusable_pairs, self.n_entities
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub params: SynthParams,
    pub documents: Vec<DocumentRecord>,
    pub catalog: Vec<CatalogEntity>,
    pub kb: Vec<KbEntry>,
}

impl SynthCorpus {
    pub fn index(&self) -> Result<CorpusIndex> {
        CorpusIndex::build(
            self.documents
                .iter()
                .cloned()
                .map(DocumentRecord::into_document)
                .collect::<Result<Vec<Document>>>()?,
        )
    }

    /// Writes `corpus.jsonl`, `entities.jsonl`, `kb.jsonl` and `params.json`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(SYNTH_CORPUS_FILE), &self.documents)?;
        write_jsonl(&dir.join(SYNTH_ENTITIES_FILE), &self.catalog)?;
        write_jsonl(&dir.join(SYNTH_KB_FILE), &self.kb)?;
        let params = dir.join(SYNTH_PARAMS_FILE);
        let mut json = serde_json::to_string_pretty(&self.params)?;
        json.push('\n');
        fs::write(&params, json).map_err(|e| Error::io(&params, e))
    }
}

const FILLERS: &[&str] = &[
    "the", "of", "and", "a", "in", "to", "was", "for", "on", "with", "as", "by", "at", "from", "his", "her",
    "that", "this", "which", "also", "after", "during", "their", "were", "has", "had", "its", "into",
    "about", "when", "later", "while", "where", "over", "under", "both", "then", "is", "are", "near",
];
const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "br", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l"];

const TARGET_ASPECTS: usize = 5;
const NAMESAKE_ASPECTS: usize = 3;
const RELATED_PER_ASPECT: usize = 5;
/// Chance that a document using a target keyphrase also uses a paraphrase of it
/// that is not in the reference set.
const VARIANT_RATE: f64 = 0.35;
/// Share of a target's reference keyphrases that never occur in the collection.
const HIDDEN_SHARE: f64 = 0.2;
/// Share of a confusable namesake's keyphrases borrowed from its target.
const SHARED_SHARE: f64 = 0.4;
const ASPECT_WEIGHTS: &[f64] = &[0.40, 0.22, 0.16, 0.12, 0.10];

struct Words {
    used: HashSet<String>,
}

impl Words {
    fn new() -> Self {
        Words {
            used: FILLERS.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn word(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).expect("non-empty"));
                w.push_str(VOWELS.choose(rng).expect("non-empty"));
            }
            w.push_str(CODAS.choose(rng).expect("non-empty"));
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn keyphrase(&mut self, rng: &mut ChaCha8Rng) -> String {
        let n = match rng.gen_range(0..20) {
            0..=4 => 1,
            5..=15 => 2,
            _ => 3,
        };
        (0..n).map(|_| self.word(rng)).collect::<Vec<_>>().join(" ")
    }

    fn name(&mut self, rng: &mut ChaCha8Rng) -> String {
        capitalize(&self.word(rng))
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone)]
struct Related {
    id: String,
    mention: String,
}

#[derive(Debug, Clone)]
struct Aspect {
    /// Ordered by popularity.
    keyphrases: Vec<String>,
    related: Vec<Related>,
}

#[derive(Debug, Clone)]
struct Entity {
    id: String,
    /// Mention surfaces: index 0 is the preferred one.
    surfaces: Vec<String>,
    aspects: Vec<Aspect>,
    /// Keyphrases borrowed from the target (namesakes of confusable pairs).
    shared: Vec<String>,
    /// Unlisted paraphrase of a reference keyphrase.
    variants: BTreeMap<String, String>,
    reference: Vec<String>,
    confusable_with: Option<String>,
    popular: bool,
}

fn make_related(words: &mut Words, rng: &mut ChaCha8Rng) -> Related {
    let a = words.name(rng);
    let b = words.name(rng);
    Related {
        id: format!("{a}_{b}"),
        mention: format!("{a} {b}"),
    }
}

fn make_aspects(
    words: &mut Words,
    rng: &mut ChaCha8Rng,
    n_aspects: usize,
    keyphrases: Vec<String>,
) -> Vec<Aspect> {
    let n_aspects = n_aspects.min(keyphrases.len()).max(1);
    let mut aspects: Vec<Aspect> = (0..n_aspects)
        .map(|_| Aspect {
            keyphrases: Vec::new(),
            related: (0..RELATED_PER_ASPECT).map(|_| make_related(words, rng)).collect(),
        })
        .collect();
    for (i, k) in keyphrases.into_iter().enumerate() {
        aspects[i % n_aspects].keyphrases.push(k);
    }
    aspects
}

/// Zipf-like weight of the keyphrase at popularity rank `r`.
fn zipf(r: usize) -> f64 {
    1.0 / ((r + 1) as f64).powf(0.8)
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    WeightedIndex::new(weights).expect("positive weights").sample(rng)
}

/// Up to `n` distinct positions in `0..len`, each drawn with Zipf weight.
fn zipf_positions(rng: &mut ChaCha8Rng, len: usize, n: usize, skip: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).filter(|&i| !skip(i)).collect();
    let mut out = Vec::new();
    while out.len() < n && !pool.is_empty() {
        let weights: Vec<f64> = pool.iter().map(|&r| zipf(r)).collect();
        out.push(pool.remove(weighted_index(rng, &weights)));
    }
    out
}

/// Draws up to `n` distinct items, each with Zipf weight by position.
fn zipf_sample(rng: &mut ChaCha8Rng, items: &[String], n: usize, out: &mut BTreeSet<String>) {
    for i in zipf_positions(rng, items.len(), n, |i| out.contains(&items[i])) {
        out.insert(items[i].clone());
    }
}

/// Noise keyphrases in a document. Pages about popular namesakes are longer
/// and carry more incidental keyphrases.
fn noise_count(rng: &mut ChaCha8Rng, popular: bool) -> usize {
    if popular {
        rng.gen_range(3..=16)
    } else if rng.gen_bool(0.6) {
        rng.gen_range(0..=3)
    } else {
        rng.gen_range(4..=14)
    }
}

/// Relevant keyphrases per document: 4 + Binomial(8, 0.45), so 4..=12.
fn relevant_count(rng: &mut ChaCha8Rng) -> usize {
    4 + (0..8).filter(|_| rng.gen_bool(0.45)).count()
}

#[derive(Debug, Default)]
struct DraftDoc {
    keyphrases: BTreeSet<String>,
    /// (entity id, surface)
    mentions: Vec<(String, String)>,
}

impl DraftDoc {
    fn render(&self, rng: &mut ChaCha8Rng) -> (String, Vec<KeyphraseRecord>, Vec<EntityMention>) {
        enum Seg<'a> {
            Kp(&'a str),
            Mention(&'a str, &'a str),
        }
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        let mut segs: Vec<Seg> = Vec::new();
        for k in &self.keyphrases {
            let c = if rng.gen_bool(0.25) { 2 } else { 1 };
            counts.insert(k, c);
            for _ in 0..c {
                segs.push(Seg::Kp(k));
            }
        }
        let mut mentions = self.mentions.iter();
        let first = mentions.next();
        for (e, s) in mentions {
            segs.push(Seg::Mention(e, s));
        }
        segs.shuffle(rng);
        if let Some((e, s)) = first {
            segs.insert(0, Seg::Mention(e, s));
        }

        let mut words: Vec<String> = Vec::new();
        let mut entities = Vec::new();
        for seg in segs {
            for _ in 0..rng.gen_range(1..=3) {
                words.push(FILLERS.choose(rng).expect("non-empty").to_string());
            }
            match seg {
                Seg::Kp(k) => words.extend(k.split(' ').map(str::to_string)),
                Seg::Mention(e, s) => {
                    entities.push(EntityMention {
                        entity_id: e.to_string(),
                        mention: s.to_string(),
                        offset: words.len(),
                    });
                    words.extend(s.split(' ').map(str::to_string));
                }
            }
            if rng.gen_bool(0.2) {
                if let Some(last) = words.last_mut() {
                    last.push('.');
                }
            }
        }
        let mut text = words.join(" ");
        if !text.ends_with('.') {
            text.push('.');
        }
        let kps = counts
            .into_iter()
            .map(|(k, c)| KeyphraseRecord {
                text: k.to_string(),
                count: c,
            })
            .collect();
        (text, kps, entities)
    }
}

fn entity_doc(rng: &mut ChaCha8Rng, e: &Entity, aspect_weights: &[f64], noise: &[String], n_kps: usize) -> DraftDoc {
    let a = weighted_index(rng, &aspect_weights[..e.aspects.len()]);
    let aspect = &e.aspects[a];
    let mut doc = DraftDoc::default();

    // mostly the focus aspect, a little from the others
    let n_off = (0..n_kps).filter(|_| rng.gen_bool(0.15)).count();
    if !e.shared.is_empty() {
        let n_shared = (0..n_kps).filter(|_| rng.gen_bool(0.5)).count();
        zipf_sample(rng, &e.shared, n_shared, &mut doc.keyphrases);
    }
    let own = n_kps.saturating_sub(n_off + doc.keyphrases.len());
    zipf_sample(rng, &aspect.keyphrases, own, &mut doc.keyphrases);
    while doc.keyphrases.len() < n_kps {
        let before = doc.keyphrases.len();
        let other = &e.aspects[rng.gen_range(0..e.aspects.len())];
        zipf_sample(rng, &other.keyphrases, 1, &mut doc.keyphrases);
        if doc.keyphrases.len() == before && e.aspects.iter().flat_map(|a| &a.keyphrases).all(|k| doc.keyphrases.contains(k)) {
            break;
        }
    }

    let paraphrased: Vec<String> = doc
        .keyphrases
        .iter()
        .filter_map(|k| e.variants.get(k))
        .filter(|_| rng.gen_bool(VARIANT_RATE))
        .cloned()
        .collect();
    doc.keyphrases.extend(paraphrased);
    let n_noise = noise_count(rng, e.popular);
    for k in noise.choose_multiple(rng, n_noise) {
        doc.keyphrases.insert(k.clone());
    }

    let primary = if rng.gen_bool(0.3) { &e.surfaces[0] } else { &e.surfaces[1] };
    doc.mentions.push((e.id.clone(), primary.clone()));
    for _ in 0..rng.gen_range(0..=2) {
        doc.mentions.push((e.id.clone(), e.surfaces[1].clone()));
    }
    let n_related = rng.gen_range(1..=aspect.related.len().min(4));
    for i in zipf_positions(rng, aspect.related.len(), n_related, |_| false) {
        let r = &aspect.related[i];
        doc.mentions.push((r.id.clone(), r.mention.clone()));
    }
    doc
}

/// Generates the collection, its entity catalog and a knowledge base holding
/// every catalog entity.
pub fn synth_corpus(params: SynthParams) -> Result<SynthCorpus> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut words = Words::new();

    let n_hidden = ((params.kps_per_entity as f64) * HIDDEN_SHARE).floor() as usize;
    let n_visible = params.kps_per_entity - n_hidden;
    let namesake_kps = (params.kps_per_entity / 2).max(1);

    let mut targets = Vec::new();
    let mut namesakes = Vec::new();
    for i in 0..params.n_entities {
        let first = words.name(&mut rng);
        let last = words.name(&mut rng);
        let visible: Vec<String> = (0..n_visible).map(|_| words.keyphrase(&mut rng)).collect();
        let hidden: Vec<String> = (0..n_hidden).map(|_| words.keyphrase(&mut rng)).collect();
        let aspects = make_aspects(&mut words, &mut rng, TARGET_ASPECTS, visible.clone());
        let variants = visible.iter().map(|k| (k.clone(), words.keyphrase(&mut rng))).collect();
        let target_id = format!("{first}_{last}");
        let namesake_id = format!("{last}_({})", words.name(&mut rng));
        let confusable = i < params.confusable_pairs;

        let shared: Vec<String> = if confusable {
            // the most common keyphrases of the two dominant aspects
            let n = ((namesake_kps as f64) * SHARED_SHARE).round() as usize;
            let mut pool = Vec::new();
            let mut rank = 0;
            while pool.len() < n && rank < visible.len() {
                for a in aspects.iter().take(2) {
                    if let Some(k) = a.keyphrases.get(rank) {
                        if pool.len() < n {
                            pool.push(k.clone());
                        }
                    }
                }
                rank += 1;
            }
            pool
        } else {
            Vec::new()
        };
        let own: Vec<String> = (0..namesake_kps - shared.len()).map(|_| words.keyphrase(&mut rng)).collect();
        let ns_aspects = make_aspects(&mut words, &mut rng, NAMESAKE_ASPECTS, own.clone());
        let qualifier = namesake_id
            .trim_end_matches(')')
            .rsplit('(')
            .next()
            .expect("qualifier")
            .to_string();

        targets.push(Entity {
            id: target_id.clone(),
            surfaces: vec![format!("{first} {last}"), last.clone()],
            aspects,
            shared: Vec::new(),
            variants,
            reference: visible.iter().chain(&hidden).cloned().collect(),
            confusable_with: confusable.then(|| namesake_id.clone()),
            popular: false,
        });
        namesakes.push(Entity {
            id: namesake_id,
            surfaces: vec![format!("{last} {qualifier}"), last],
            aspects: ns_aspects,
            reference: shared.iter().chain(&own).cloned().collect(),
            shared,
            variants: BTreeMap::new(),
            confusable_with: confusable.then_some(target_id),
            popular: true,
        });
    }

    let noise: Vec<String> = (0..params.n_entities * 60).map(|_| words.keyphrase(&mut rng)).collect();

    let mut drafts: Vec<DraftDoc> = Vec::new();
    for t in &targets {
        let start = drafts.len();
        for _ in 0..params.docs_per_entity {
            let n = relevant_count(&mut rng);
            drafts.push(entity_doc(&mut rng, t, ASPECT_WEIGHTS, &noise, n));
        }
        place_unused(&mut rng, t, &mut drafts[start..]);
    }
    let namesake_docs = params.docs_per_entity + params.docs_per_entity.div_ceil(4);
    for n in &namesakes {
        let start = drafts.len();
        for _ in 0..namesake_docs {
            let k = rng.gen_range(4..=10);
            drafts.push(entity_doc(&mut rng, n, &[0.5, 0.3, 0.2], &noise, k));
        }
        place_unused(&mut rng, n, &mut drafts[start..]);
    }
    // background: noise, unrelated related-entity mentions, a stray topic keyphrase
    let related: Vec<&Related> = targets
        .iter()
        .chain(&namesakes)
        .flat_map(|e| e.aspects.iter().flat_map(|a| &a.related))
        .collect();
    for _ in 0..params.n_entities * 12 {
        let mut doc = DraftDoc::default();
        let n_noise = rng.gen_range(2..=10);
        for k in noise.choose_multiple(&mut rng, n_noise) {
            doc.keyphrases.insert(k.clone());
        }
        if rng.gen_bool(0.3) {
            let t = targets.choose(&mut rng).expect("non-empty");
            let a = t.aspects.choose(&mut rng).expect("non-empty");
            let n = rng.gen_range(1..=2);
            zipf_sample(&mut rng, &a.keyphrases, n, &mut doc.keyphrases);
        }
        let n_related = rng.gen_range(1..=3);
        for r in related.choose_multiple(&mut rng, n_related) {
            doc.mentions.push((r.id.clone(), r.mention.clone()));
        }
        drafts.push(doc);
    }

    drafts.shuffle(&mut rng);
    let width = drafts.len().to_string().len().max(4);
    let mut seen_text = HashSet::new();
    let mut documents = Vec::with_capacity(drafts.len());
    for (i, draft) in drafts.iter().enumerate() {
        let (mut text, keyphrases, entities) = draft.render(&mut rng);
        while !seen_text.insert(text.clone()) {
            text.push_str(&format!(" {}.", FILLERS.choose(&mut rng).expect("non-empty")));
        }
        documents.push(DocumentRecord {
            id: format!("d{i:0width$}"),
            text,
            keyphrases: Some(keyphrases),
            entities,
        });
    }

    let mut catalog: Vec<CatalogEntity> = targets
        .iter()
        .chain(&namesakes)
        .map(|e| CatalogEntity {
            id: e.id.clone(),
            names: e.surfaces.clone(),
            keyphrases: e.reference.clone(),
            confusable_with: e.confusable_with.clone(),
        })
        .collect();
    catalog.sort_by(|a, b| a.id.cmp(&b.id));
    let kb = catalog
        .iter()
        .map(|c| KbEntry {
            id: c.id.clone(),
            names: c.names.clone(),
            keyphrases: c.keyphrases.iter().map(|k| (k.clone(), 1.0)).collect(),
        })
        .collect();

    let corpus = SynthCorpus {
        params,
        documents,
        catalog,
        kb,
    };
    check_postconditions(&corpus)?;
    Ok(corpus)
}

/// Adds every aspect keyphrase that no draft used to the draft of that
/// entity with the fewest keyphrases of the same aspect, as long as it stays
/// within 12.
fn place_unused(rng: &mut ChaCha8Rng, e: &Entity, drafts: &mut [DraftDoc]) {
    let all: Vec<&String> = e.aspects.iter().flat_map(|a| &a.keyphrases).collect();
    let own: BTreeSet<&String> = all.iter().copied().chain(&e.shared).collect();
    let used: BTreeSet<String> = drafts.iter().flat_map(|d| d.keyphrases.iter().cloned()).collect();
    for k in all {
        if used.contains(k) {
            continue;
        }
        let mut order: Vec<usize> = (0..drafts.len()).collect();
        order.shuffle(rng);
        let best = order
            .into_iter()
            .map(|i| (drafts[i].keyphrases.iter().filter(|x| own.contains(x)).count(), i))
            .filter(|(n, _)| *n < 12)
            .min_by_key(|(n, _)| *n);
        if let Some((_, i)) = best {
            drafts[i].keyphrases.insert(k.clone());
        }
    }
}

fn check_postconditions(corpus: &SynthCorpus) -> Result<()> {
    let kp_sets: Vec<(&str, BTreeSet<&str>)> = corpus
        .catalog
        .iter()
        .map(|c| (c.id.as_str(), c.keyphrases.iter().map(String::as_str).collect()))
        .collect();
    if corpus.params.confusable_pairs == 0 {
        for (i, (a, ka)) in kp_sets.iter().enumerate() {
            for (b, kb) in &kp_sets[i + 1..] {
                let shared = ka.intersection(kb).count();
                let smaller = ka.len().min(kb.len()).max(1);
                if shared * 10 > smaller {
                    return Err(Error::State(format!("{a} and {b} share {shared} keyphrases")));
                }
            }
        }
    }
    for d in &corpus.documents {
        let kd: BTreeSet<&str> = d
            .keyphrases
            .iter()
            .flatten()
            .map(|k| k.text.as_str())
            .collect();
        for (id, ke) in &kp_sets {
            if ke.len() > 1 && ke.is_subset(&kd) {
                return Err(Error::State(format!("document {} holds every keyphrase of {id}", d.id)));
            }
        }
    }
    Ok(())
}
