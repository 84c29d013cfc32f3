use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use super::document::Document;
use crate::error::{Error, Result};
use crate::text::{count_phrase, phrase_tokens};

/// Position of a document inside a [`CorpusIndex`]. Ordinals follow ascending
/// doc id order, so comparing ordinals is comparing ids.
pub type DocOrd = u32;

/// Per-document frequency of a (possibly multi-token) phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhrasePostings {
    pub tf: BTreeMap<DocOrd, u32>,
    /// Collection frequency: sum of `tf`.
    pub cf: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollectionStats {
    pub total_tokens: u64,
    pub term_cf: HashMap<String, u64>,
}

/// Immutable, searchable view of an annotated document collection.
///
/// Phrase postings for multi-token keyphrases and names are computed on first
/// use and memoized; the memo never changes an answer, so the index behaves as
/// immutable and can be shared across threads.
#[derive(Debug, Default)]
pub struct CorpusIndex {
    documents: Vec<Document>,
    by_id: HashMap<String, DocOrd>,
    term_postings: HashMap<String, BTreeMap<DocOrd, u32>>,
    keyphrase_postings: HashMap<String, BTreeSet<DocOrd>>,
    entity_postings: HashMap<String, BTreeSet<DocOrd>>,
    stats: CollectionStats,
    phrase_cache: RwLock<HashMap<String, Arc<PhrasePostings>>>,
}

impl CorpusIndex {
    /// Builds an index. Duplicate ids and exact-text duplicates are rejected.
    pub fn build(mut documents: Vec<Document>) -> Result<Self> {
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in documents.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Conflict(format!("duplicate doc_id {:?}", pair[0].id)));
            }
        }
        let mut seen_text: HashMap<&str, &str> = HashMap::new();
        for d in &documents {
            if let Some(other) = seen_text.insert(d.text.as_str(), d.id.as_str()) {
                return Err(Error::Conflict(format!(
                    "documents {other:?} and {:?} have identical text",
                    d.id
                )));
            }
        }

        let mut index = CorpusIndex::default();
        for (ord, doc) in documents.iter().enumerate() {
            let ord = ord as DocOrd;
            index.by_id.insert(doc.id.clone(), ord);
            for tok in &doc.tokens {
                *index
                    .term_postings
                    .entry(tok.clone())
                    .or_default()
                    .entry(ord)
                    .or_insert(0) += 1;
                *index.stats.term_cf.entry(tok.clone()).or_insert(0) += 1;
            }
            index.stats.total_tokens += doc.tokens.len() as u64;
            for kp in doc.keyphrases.keys() {
                index.keyphrase_postings.entry(kp.clone()).or_default().insert(ord);
            }
            for e in &doc.entities {
                index
                    .entity_postings
                    .entry(e.entity_id.clone())
                    .or_default()
                    .insert(ord);
            }
        }
        index.documents = documents;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents in ascending id order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&o| &self.documents[o as usize])
    }

    pub fn require(&self, doc_id: &str) -> Result<&Document> {
        self.get(doc_id)
            .ok_or_else(|| Error::NotFound(format!("document {doc_id:?}")))
    }

    pub fn ord(&self, doc_id: &str) -> Option<DocOrd> {
        self.by_id.get(doc_id).copied()
    }

    pub fn doc(&self, ord: DocOrd) -> &Document {
        &self.documents[ord as usize]
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    pub fn term_postings(&self) -> &HashMap<String, BTreeMap<DocOrd, u32>> {
        &self.term_postings
    }

    pub fn keyphrase_postings(&self) -> &HashMap<String, BTreeSet<DocOrd>> {
        &self.keyphrase_postings
    }

    pub fn entity_postings(&self) -> &HashMap<String, BTreeSet<DocOrd>> {
        &self.entity_postings
    }

    /// Documents whose keyphrase annotations contain `keyphrase`.
    pub fn docs_with_keyphrase(&self, keyphrase: &str) -> impl Iterator<Item = DocOrd> + '_ {
        self.keyphrase_postings
            .get(keyphrase)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// Documents tagged with `entity_id`.
    pub fn docs_with_entity(&self, entity_id: &str) -> impl Iterator<Item = DocOrd> + '_ {
        self.entity_postings
            .get(entity_id)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// Contiguous-match postings of a phrase in the token streams.
    pub fn phrase_postings(&self, phrase: &str) -> Arc<PhrasePostings> {
        if let Some(hit) = self.phrase_cache.read().expect("phrase cache poisoned").get(phrase) {
            return Arc::clone(hit);
        }
        let computed = Arc::new(self.compute_phrase_postings(phrase));
        self.phrase_cache
            .write()
            .expect("phrase cache poisoned")
            .entry(phrase.to_string())
            .or_insert(computed)
            .clone()
    }

    fn compute_phrase_postings(&self, phrase: &str) -> PhrasePostings {
        let toks = phrase_tokens(phrase);
        let mut out = PhrasePostings::default();
        match toks.as_slice() {
            [] => {}
            [single] => {
                if let Some(p) = self.term_postings.get(single) {
                    out.tf = p.clone();
                }
            }
            _ => {
                let mut lists = Vec::with_capacity(toks.len());
                for t in &toks {
                    match self.term_postings.get(t) {
                        Some(p) => lists.push(p),
                        None => return out,
                    }
                }
                let rarest = lists.iter().min_by_key(|p| p.len()).expect("non-empty");
                for &ord in rarest.keys() {
                    if !lists.iter().all(|p| p.contains_key(&ord)) {
                        continue;
                    }
                    let n = count_phrase(&self.doc(ord).tokens, &toks) as u32;
                    if n > 0 {
                        out.tf.insert(ord, n);
                    }
                }
            }
        }
        out.cf = out.tf.values().map(|&v| v as u64).sum();
        out
    }

    /// Sum of keyphrase occurrence counts across the collection.
    pub fn keyphrase_collection_count(&self, keyphrase: &str) -> u64 {
        self.docs_with_keyphrase(keyphrase)
            .map(|o| self.doc(o).keyphrases[keyphrase] as u64)
            .sum()
    }
}
