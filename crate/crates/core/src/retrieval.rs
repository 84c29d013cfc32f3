//! Candidate retrieval and Dirichlet-smoothed query-likelihood ranking.
//!
//! Query terms are phrases: a multi-token keyphrase or name counts as one term
//! whose frequency is the number of contiguous matches in the token stream.
//! For a document `d` and term `t`,
//!
//! ```text
//! p(t|d) = (tf(t,d) + mu * p(t|C)) / (|d| + mu)
//! ```
//!
//! and the score is `sum_t w(t) * ln p(t|d)` over the positively weighted
//! terms. Terms unseen in the collection use the floor probability
//! [`OOV_PROBABILITY`] instead of zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocOrd};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::text::canonical_keyphrase;

pub const DEFAULT_MU: f64 = 1000.0;
pub const OOV_PROBABILITY: f64 = 1e-9;

/// Weighted query over keyphrases and terms, plus the entity names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVector<S> {
    weights: BTreeMap<String, S>,
    names: Vec<String>,
}

impl<S: Scalar> QueryVector<S> {
    pub fn new<N: AsRef<str>>(names: &[N]) -> Self {
        QueryVector {
            weights: BTreeMap::new(),
            names: names.iter().map(|n| canonical_keyphrase(n.as_ref())).collect(),
        }
    }

    /// Sets a weight; zero removes the entry.
    pub fn set(&mut self, term: &str, weight: S) {
        let key = canonical_keyphrase(term);
        if weight == S::zero() {
            self.weights.remove(&key);
        } else {
            self.weights.insert(key, weight);
        }
    }

    /// Adds to a weight; an entry that cancels to zero is dropped.
    pub fn add(&mut self, term: &str, delta: S) {
        let current = self.get(term);
        self.set(term, current + delta);
    }

    pub fn get(&self, term: &str) -> S {
        self.weights
            .get(&canonical_keyphrase(term))
            .copied()
            .unwrap_or_else(S::zero)
    }

    pub fn weights(&self) -> &BTreeMap<String, S> {
        &self.weights
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn positive_terms(&self) -> impl Iterator<Item = (&str, S)> + '_ {
        self.weights
            .iter()
            .filter(|(_, &w)| w > S::zero())
            .map(|(k, &w)| (k.as_str(), w))
    }

    pub fn scaled(&self, factor: S) -> Self {
        let mut out = QueryVector {
            weights: BTreeMap::new(),
            names: self.names.clone(),
        };
        for (k, &w) in &self.weights {
            out.set(k, w * factor);
        }
        out
    }
}

/// Documents ordered by score descending, then doc id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredList<S> {
    entries: Vec<(String, S)>,
}

impl<S: Scalar> ScoredList<S> {
    /// Sorts into canonical order. Duplicate ids keep their first occurrence.
    pub fn from_unsorted(mut entries: Vec<(String, S)>) -> Self {
        let mut seen = BTreeSet::new();
        entries.retain(|(id, _)| seen.insert(id.clone()));
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
        ScoredList { entries }
    }

    /// Wraps entries already in emission order (e.g. a greedy selection).
    pub(crate) fn from_ordered(entries: Vec<(String, S)>) -> Self {
        ScoredList { entries }
    }

    pub fn entries(&self) -> &[(String, S)] {
        &self.entries
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|(d, _)| d.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&str> {
        self.entries.first().map(|(d, _)| d.as_str())
    }

    pub fn truncated(mut self, depth: usize) -> Self {
        self.entries.truncate(depth);
        self
    }
}

/// Candidate ordinals: every document matching a name or a positively
/// weighted query phrase (disjunctive).
pub fn retrieve_candidate_ords<S: Scalar>(
    index: &CorpusIndex,
    query: &QueryVector<S>,
) -> BTreeSet<DocOrd> {
    let mut out = BTreeSet::new();
    for name in query.names() {
        out.extend(index.phrase_postings(name).tf.keys().copied());
    }
    for (term, _) in query.positive_terms() {
        out.extend(index.docs_with_keyphrase(term));
        out.extend(index.phrase_postings(term).tf.keys().copied());
    }
    out
}

pub fn retrieve_candidates<S: Scalar>(
    index: &CorpusIndex,
    query: &QueryVector<S>,
) -> BTreeSet<String> {
    retrieve_candidate_ords(index, query)
        .into_iter()
        .map(|o| index.doc(o).id.clone())
        .collect()
}

struct TermModel<S> {
    weight: S,
    collection_prob: S,
    postings: std::sync::Arc<crate::corpus::PhrasePostings>,
}

fn term_models<S: Scalar>(index: &CorpusIndex, query: &QueryVector<S>) -> Vec<TermModel<S>> {
    let total = index.stats().total_tokens;
    query
        .positive_terms()
        .map(|(term, weight)| {
            let postings = index.phrase_postings(term);
            let collection_prob = if total == 0 {
                S::zero()
            } else {
                S::lit(postings.cf as f64) / S::lit(total as f64)
            };
            TermModel {
                weight,
                collection_prob,
                postings,
            }
        })
        .collect()
}

fn score_with<S: Scalar>(index: &CorpusIndex, ord: DocOrd, models: &[TermModel<S>], mu: S) -> S {
    let doc_len = S::lit(index.doc(ord).len() as f64);
    models
        .iter()
        .map(|m| {
            let p = if m.collection_prob == S::zero() {
                S::lit(OOV_PROBABILITY)
            } else {
                let tf = S::lit(m.postings.tf.get(&ord).copied().unwrap_or(0) as f64);
                (tf + mu * m.collection_prob) / (doc_len + mu)
            };
            m.weight * p.ln()
        })
        .sum()
}

fn check_mu<S: Scalar>(mu: S) -> Result<()> {
    if mu > S::zero() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("mu must be positive, got {mu}")))
    }
}

/// Query log-likelihood of one document.
pub fn lm_score<S: Scalar>(
    index: &CorpusIndex,
    doc_id: &str,
    query: &QueryVector<S>,
    mu: S,
) -> Result<S> {
    check_mu(mu)?;
    let ord = index
        .ord(doc_id)
        .ok_or_else(|| Error::NotFound(format!("document {doc_id:?}")))?;
    Ok(score_with(index, ord, &term_models(index, query), mu))
}

pub(crate) fn rank_ords<S: Scalar>(
    index: &CorpusIndex,
    candidates: impl IntoIterator<Item = DocOrd>,
    query: &QueryVector<S>,
    mu: S,
) -> ScoredList<S> {
    let models = term_models(index, query);
    let entries = candidates
        .into_iter()
        .map(|o| (index.doc(o).id.clone(), score_with(index, o, &models, mu)))
        .collect();
    ScoredList::from_unsorted(entries)
}

/// Scores every candidate and sorts by score, breaking ties by id.
pub fn rank_lm<S: Scalar, I, D>(
    index: &CorpusIndex,
    candidates: I,
    query: &QueryVector<S>,
    mu: S,
) -> Result<ScoredList<S>>
where
    I: IntoIterator<Item = D>,
    D: AsRef<str>,
{
    check_mu(mu)?;
    let ords = candidates
        .into_iter()
        .map(|d| {
            index
                .ord(d.as_ref())
                .ok_or_else(|| Error::NotFound(format!("document {:?}", d.as_ref())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_ords(index, ords, query, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(docs: &[(&str, &str, &[&str])]) -> CorpusIndex {
        CorpusIndex::build(
            docs.iter()
                .map(|(id, text, kps)| {
                    let kps = kps.iter().map(|k| (k.to_string(), 1)).collect();
                    Document::new(*id, *text, Some(kps), vec![]).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn abc() -> CorpusIndex {
        corpus(&[("d1", "a b a", &[]), ("d2", "b c", &[])])
    }

    #[test]
    fn hand_computed_dirichlet_score() {
        let idx = abc();
        let mut q = QueryVector::<f64>::new(&["a"]);
        q.set("a", 1.0);
        // p(a|C) = 2/5, p(a|d1) = (2 + 0.4) / (3 + 1) = 0.6
        let s = lm_score(&idx, "d1", &q, 1.0).unwrap();
        assert!((s - 0.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn absent_term_uses_floor_probability() {
        let idx = abc();
        let mut q = QueryVector::<f64>::new(&["zzz"]);
        q.set("zzz", 1.0);
        let s = lm_score(&idx, "d1", &q, 1000.0).unwrap();
        assert_eq!(s, OOV_PROBABILITY.ln());
    }

    #[test]
    fn empty_positive_query_scores_zero() {
        let idx = abc();
        let mut q = QueryVector::<f64>::new(&["a"]);
        q.set("a", -1.0);
        assert_eq!(lm_score(&idx, "d2", &q, 1000.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_mu_and_unknown_doc() {
        let idx = abc();
        let q = QueryVector::<f64>::new(&["a"]);
        assert!(matches!(lm_score(&idx, "d1", &q, 0.0), Err(Error::Validation(_))));
        assert!(matches!(lm_score(&idx, "nope", &q, 1.0), Err(Error::NotFound(_))));
    }

    #[test]
    fn rank_orders_by_score_then_id() {
        let idx = abc();
        let mut q = QueryVector::<f64>::new(&["a"]);
        q.set("a", 1.0);
        let r = rank_lm(&idx, ["d2", "d1"], &q, 1.0).unwrap();
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);
        // d2: (0 + 0.4) / (2 + 1)
        assert!((r.entries()[1].1 - (0.4f64 / 3.0).ln()).abs() < 1e-12);

        let tie = corpus(&[("d1", "x y", &[]), ("d2", "y x", &[])]);
        let mut q = QueryVector::<f64>::new(&["x"]);
        q.set("x", 1.0);
        let r = rank_lm(&tie, ["d2", "d1"], &q, 1.0).unwrap();
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);

        let empty: [&str; 0] = [];
        assert!(rank_lm(&idx, empty, &q, 1.0).unwrap().is_empty());
    }

    #[test]
    fn candidates_are_a_union() {
        let idx = corpus(&[
            ("a", "jericho one", &[]),
            ("b", "jericho two pro wrestling", &["pro wrestling"]),
            ("c", "three pro wrestling", &["pro wrestling"]),
            ("d", "nothing", &[]),
        ]);
        let mut q = QueryVector::<f64>::new(&["Jericho"]);
        q.set("pro wrestling", 0.5);
        let c = retrieve_candidates(&idx, &q);
        assert_eq!(c, ["a", "b", "c"].iter().map(|s| s.to_string()).collect());

        let mut neg = QueryVector::<f64>::new(&["nobody"]);
        neg.set("pro wrestling", -0.5);
        assert!(retrieve_candidates(&idx, &neg).is_empty());
    }

    #[test]
    fn zero_weights_are_not_stored() {
        let mut q = QueryVector::<f32>::new(&["x"]);
        q.set("k", 0.5);
        q.add("k", -0.5);
        assert!(q.weights().is_empty());
        q.set("Pro  Wrestling", 1.0);
        assert_eq!(q.get("pro wrestling"), 1.0);
    }

    #[test]
    fn works_in_single_precision() {
        let idx = abc();
        let mut q = QueryVector::<f32>::new(&["a"]);
        q.set("a", 1.0);
        let s = lm_score(&idx, "d1", &q, 1.0f32).unwrap();
        assert!((s - 0.6f32.ln()).abs() < 1e-6);
    }
}
