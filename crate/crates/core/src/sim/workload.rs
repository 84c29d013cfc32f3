use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::text::canonical_keyphrase;

/// One entity of the annotation catalog: its names and reference keyphrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntity {
    pub id: String,
    pub names: Vec<String>,
    pub keyphrases: Vec<String>,
    /// Entity sharing a name and much of this entity's context, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusable_with: Option<String>,
}

/// One query of the workload file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub entity: String,
    pub names: Vec<String>,
    pub seed_keyphrases: Vec<String>,
    pub relevant_keyphrases: BTreeSet<String>,
    pub relevant_docs: BTreeSet<String>,
}

impl WorkloadEntry {
    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            entity_id: self.entity.clone(),
            relevant_keyphrases: self.relevant_keyphrases.clone(),
            relevant_docs: self.relevant_docs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadCriteria {
    pub max_doc_freq: usize,
    pub min_keyphrases: usize,
    pub require_ambiguous: bool,
    pub seed_count: usize,
}

impl Default for WorkloadCriteria {
    fn default() -> Self {
        WorkloadCriteria {
            max_doc_freq: 2000,
            min_keyphrases: 50,
            require_ambiguous: true,
            seed_count: 3,
        }
    }
}

/// Canonical names of every annotated entity: catalog names plus every
/// mention string tagged with it.
fn entity_names(index: &CorpusIndex, catalog: &[CatalogEntity]) -> BTreeMap<String, BTreeSet<String>> {
    let mut names: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for doc in index.documents() {
        for e in &doc.entities {
            names
                .entry(e.entity_id.clone())
                .or_default()
                .insert(canonical_keyphrase(&e.mention));
        }
    }
    for c in catalog {
        if names.contains_key(&c.id) {
            let set = names.get_mut(&c.id).expect("present");
            set.extend(c.names.iter().map(|n| canonical_keyphrase(n)));
        }
    }
    names
}

/// Selects long-tail, well-described, ambiguous entities as queries.
///
/// An entity qualifies when it is tagged in at least one and at most
/// `max_doc_freq` documents, at least `min_keyphrases` of its reference
/// keyphrases occur in the collection, and (optionally) one of its names is
/// also a name of another annotated entity. Seeds are its most frequent
/// in-collection keyphrases.
pub fn generate_workload(
    index: &CorpusIndex,
    catalog: &[CatalogEntity],
    criteria: &WorkloadCriteria,
) -> Vec<WorkloadEntry> {
    let names = entity_names(index, catalog);
    let mut sorted: Vec<&CatalogEntity> = catalog.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = Vec::new();
    for entity in sorted {
        let relevant_docs: BTreeSet<String> = index
            .docs_with_entity(&entity.id)
            .map(|o| index.doc(o).id.clone())
            .collect();
        if relevant_docs.is_empty() || relevant_docs.len() > criteria.max_doc_freq {
            continue;
        }
        let relevant_keyphrases: BTreeSet<String> = entity
            .keyphrases
            .iter()
            .map(|k| canonical_keyphrase(k))
            .filter(|k| index.keyphrase_postings().contains_key(k))
            .collect();
        if relevant_keyphrases.len() < criteria.min_keyphrases {
            continue;
        }
        let own: BTreeSet<String> = entity.names.iter().map(|n| canonical_keyphrase(n)).collect();
        if criteria.require_ambiguous {
            let ambiguous = names
                .iter()
                .filter(|(id, _)| **id != entity.id)
                .any(|(_, other)| !own.is_disjoint(other));
            if !ambiguous {
                continue;
            }
        }
        let mut by_freq: Vec<(u64, &String)> = relevant_keyphrases
            .iter()
            .map(|k| (index.keyphrase_collection_count(k), k))
            .collect();
        by_freq.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let seed_keyphrases = by_freq
            .into_iter()
            .take(criteria.seed_count)
            .map(|(_, k)| k.clone())
            .collect();
        out.push(WorkloadEntry {
            entity: entity.id.clone(),
            names: entity.names.clone(),
            seed_keyphrases,
            relevant_keyphrases,
            relevant_docs,
        });
    }
    out
}

/// Re-checks an emitted entry against the raw document annotations by a full
/// scan (no postings). Returns every violated criterion.
pub fn audit_workload_entry(
    index: &CorpusIndex,
    catalog: &[CatalogEntity],
    entry: &WorkloadEntry,
    criteria: &WorkloadCriteria,
) -> Vec<String> {
    let mut violations = Vec::new();
    let tagged: BTreeSet<&str> = index
        .documents()
        .iter()
        .filter(|d| d.entities.iter().any(|e| e.entity_id == entry.entity))
        .map(|d| d.id.as_str())
        .collect();
    if tagged.len() > criteria.max_doc_freq {
        violations.push(format!("document frequency {} > {}", tagged.len(), criteria.max_doc_freq));
    }
    if tagged.is_empty() {
        violations.push("entity is not tagged in any document".into());
    }
    if entry.relevant_docs.iter().map(String::as_str).collect::<BTreeSet<_>>() != tagged {
        violations.push("relevant documents differ from tagged documents".into());
    }

    let Some(cat) = catalog.iter().find(|c| c.id == entry.entity) else {
        violations.push("entity missing from catalog".into());
        return violations;
    };
    let in_collection = cat
        .keyphrases
        .iter()
        .map(|k| canonical_keyphrase(k))
        .filter(|k| index.documents().iter().any(|d| d.keyphrases.contains_key(k)))
        .collect::<BTreeSet<_>>();
    if in_collection.len() < criteria.min_keyphrases {
        violations.push(format!(
            "{} in-collection keyphrases < {}",
            in_collection.len(),
            criteria.min_keyphrases
        ));
    }
    if entry.relevant_keyphrases != in_collection {
        violations.push("relevant keyphrases differ from in-collection reference keyphrases".into());
    }

    if criteria.require_ambiguous {
        let own: BTreeSet<String> = cat.names.iter().map(|n| canonical_keyphrase(n)).collect();
        let shared_by_mention = index.documents().iter().any(|d| {
            d.entities
                .iter()
                .any(|e| e.entity_id != entry.entity && own.contains(&canonical_keyphrase(&e.mention)))
        });
        let shared_by_catalog = catalog.iter().any(|c| {
            c.id != entry.entity
                && index
                    .documents()
                    .iter()
                    .any(|d| d.entities.iter().any(|e| e.entity_id == c.id))
                && c.names.iter().any(|n| own.contains(&canonical_keyphrase(n)))
        });
        if !shared_by_mention && !shared_by_catalog {
            violations.push("no name is shared with another annotated entity".into());
        }
    }
    if entry.seed_keyphrases.len() > criteria.seed_count {
        violations.push("too many seed keyphrases".into());
    }
    violations
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<CatalogEntity>> {
    read_jsonl(path.as_ref())
}

pub fn save_catalog(path: impl AsRef<Path>, catalog: &[CatalogEntity]) -> Result<()> {
    write_jsonl(path.as_ref(), catalog)
}

pub fn load_workload(path: impl AsRef<Path>) -> Result<Vec<WorkloadEntry>> {
    read_jsonl(path.as_ref())
}

pub fn save_workload(path: impl AsRef<Path>, workload: &[WorkloadEntry]) -> Result<()> {
    write_jsonl(path.as_ref(), workload)
}
