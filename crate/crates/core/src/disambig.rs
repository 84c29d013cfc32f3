//! Extrinsic evaluation of a harvested representation: a bag-of-keyphrases
//! disambiguator links held-out gold mentions, and accuracy is the share of
//! mentions linked to the right entity.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, Document};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::session::EntityRepresentation;
use crate::text::canonical_keyphrase;

/// A known entity competing for mentions: one line of the competing-KB file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbEntry {
    pub id: String,
    pub names: Vec<String>,
    pub keyphrases: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entries: Vec<KbEntry>,
    by_name: BTreeMap<String, Vec<usize>>,
}

impl KnowledgeBase {
    pub fn new(entries: Vec<KbEntry>) -> Self {
        let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let names: BTreeSet<String> = e.names.iter().map(|n| canonical_keyphrase(n)).collect();
            for n in names {
                by_name.entry(n).or_default().push(i);
            }
        }
        KnowledgeBase { entries, by_name }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: KbEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            let line = serde_json::to_string(e)?;
            writeln!(out, "{line}").map_err(|e| Error::io("<kb writer>", e))?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&KbEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries carrying `mention` as one of their names.
    pub fn by_mention(&self, mention: &str) -> impl Iterator<Item = &KbEntry> + '_ {
        self.by_name
            .get(&canonical_keyphrase(mention))
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S> {
    pub entity_id: String,
    pub representation: EntityRepresentation<S>,
    pub prior: S,
}

/// The entities a mention may refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet<S> {
    pub mention: String,
    pub candidates: Vec<Candidate<S>>,
}

fn overlap_score<S: Scalar>(context: &BTreeMap<String, u32>, rep: &EntityRepresentation<S>) -> S {
    // iterate the smaller map
    if context.len() <= rep.keyphrases.len() {
        context
            .iter()
            .filter_map(|(k, &c)| rep.keyphrases.get(k).map(|&w| w * S::lit(c as f64)))
            .sum()
    } else {
        rep.keyphrases
            .iter()
            .filter_map(|(k, &w)| context.get(k).map(|&c| w * S::lit(c as f64)))
            .sum()
    }
}

/// Links a mention: highest context overlap wins, then higher prior, then the
/// smaller entity id.
pub fn disambiguate<S: Scalar>(context: &BTreeMap<String, u32>, cand: &CandidateSet<S>) -> Result<String> {
    if let Some(c) = cand.candidates.iter().find(|c| c.prior.is_nan() || c.prior < S::zero()) {
        return Err(Error::Validation(format!(
            "candidate {:?} has negative prior",
            c.entity_id
        )));
    }
    let best = cand
        .candidates
        .iter()
        .map(|c| (overlap_score(context, &c.representation), c))
        .reduce(|best, next| {
            let ord = next
                .0
                .partial_cmp(&best.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(next.1.prior.partial_cmp(&best.1.prior).unwrap_or(std::cmp::Ordering::Equal))
                .then(best.1.entity_id.cmp(&next.1.entity_id));
            if ord == std::cmp::Ordering::Greater {
                next
            } else {
                best
            }
        })
        .ok_or_else(|| Error::Validation(format!("mention {:?} has no candidates", cand.mention)))?;
    Ok(best.1.entity_id.clone())
}

/// A held-out document with the mentions of the target entity in it.
#[derive(Debug, Clone)]
pub struct GoldDocument<'a> {
    pub doc: &'a Document,
    pub mentions: Vec<String>,
}

/// Up to `sample` documents tagged with `entity_id`, chosen with a seeded
/// shuffle and returned in id order.
pub fn gold_documents<'a>(
    index: &'a CorpusIndex,
    entity_id: &str,
    relevant_docs: &BTreeSet<String>,
    sample: usize,
    seed: u64,
) -> Vec<GoldDocument<'a>> {
    let mut docs: Vec<&Document> = relevant_docs.iter().filter_map(|d| index.get(d)).collect();
    if docs.len() > sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        docs.shuffle(&mut rng);
        docs.truncate(sample);
        docs.sort_by(|a, b| a.id.cmp(&b.id));
    }
    docs.into_iter()
        .map(|doc| GoldDocument {
            doc,
            mentions: doc
                .entities
                .iter()
                .filter(|e| e.entity_id == entity_id)
                .map(|e| e.mention.clone())
                .collect(),
        })
        .filter(|g| !g.mentions.is_empty())
        .collect()
}

/// Document frequency of every annotated entity.
#[derive(Debug, Clone, Default)]
pub struct EntityPriors {
    df: BTreeMap<String, usize>,
}

impl EntityPriors {
    pub fn from_index(index: &CorpusIndex) -> Self {
        EntityPriors {
            df: index
                .entity_postings()
                .iter()
                .map(|(e, docs)| (e.clone(), docs.len()))
                .collect(),
        }
    }

    pub fn df(&self, entity: &str) -> usize {
        self.df.get(entity).copied().unwrap_or(0)
    }
}

/// Builds the candidate set for a mention: every KB entity carrying the
/// mention as a name (except the new entity's own KB entry, if any) plus the
/// new entity. Priors are document frequencies normalized over the set.
pub fn candidate_set<S: Scalar>(
    mention: &str,
    new_entity: &str,
    representation: &EntityRepresentation<S>,
    kb: &KnowledgeBase,
    priors: &EntityPriors,
) -> CandidateSet<S> {
    let mut raw: Vec<(String, EntityRepresentation<S>, usize)> = kb
        .by_mention(mention)
        .filter(|e| e.id != new_entity)
        .map(|e| {
            let weights = e
                .keyphrases
                .iter()
                .map(|(k, &w)| (k.clone(), S::lit(w)))
                .collect();
            (
                e.id.clone(),
                EntityRepresentation::from_weights(e.names.clone(), &weights),
                priors.df(&e.id),
            )
        })
        .collect();
    raw.push((new_entity.to_string(), representation.clone(), priors.df(new_entity)));
    let total: usize = raw.iter().map(|r| r.2).sum();
    let n = raw.len();
    CandidateSet {
        mention: mention.to_string(),
        candidates: raw
            .into_iter()
            .map(|(entity_id, representation, df)| Candidate {
                entity_id,
                representation,
                prior: if total == 0 {
                    S::one() / S::lit(n as f64)
                } else {
                    S::lit(df as f64) / S::lit(total as f64)
                },
            })
            .collect(),
    }
}

/// Percentage of gold mentions linked to `new_entity`.
pub fn disambiguation_accuracy<S: Scalar>(
    new_entity: &str,
    representation: &EntityRepresentation<S>,
    gold: &[GoldDocument<'_>],
    kb: &KnowledgeBase,
    priors: &EntityPriors,
) -> Result<f64> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for g in gold {
        for mention in &g.mentions {
            let cand = candidate_set(mention, new_entity, representation, kb, priors);
            total += 1;
            if disambiguate(&g.doc.keyphrases, &cand)? == new_entity {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("no gold mentions to disambiguate".into()));
    }
    Ok(correct as f64 * 100.0 / total as f64)
}
