//! Entity-addition episodes.
//!
//! A [`Session`] starts from the entity names and optional seed keyphrases,
//! shows one document at a time through its ranking strategy and folds each
//! judgment into the accepted set `K`, the rejected set `K⁻` and the covered
//! aspects. Finishing yields the entity's keyphrase representation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, Document};
use crate::diversify::{aspect_of, AspectSpace, CoveredSet};
use crate::error::{Error, Result};
use crate::metrics::{EngagementTrace, GroundTruth};
use crate::num::Scalar;
use crate::retrieval::{retrieve_candidates, QueryVector, DEFAULT_MU};
use crate::strategy::{build_strategy, Strategy, StrategyName};
use crate::text::canonical_keyphrase;

/// Default number of static-list documents an interleaved strategy draws from.
pub const DEFAULT_STATIC_DEPTH: usize = 20;

/// Rocchio coefficients for the original query, relevant and non-relevant
/// documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocchioParams<S> {
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
}

impl<S: Scalar> Default for RocchioParams<S> {
    fn default() -> Self {
        RocchioParams {
            alpha: S::lit(1.0),
            beta: S::lit(0.75),
            gamma: S::lit(0.15),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions<S> {
    pub rocchio: RocchioParams<S>,
    pub mu: S,
    pub static_depth: usize,
}

impl<S: Scalar> Default for SessionOptions<S> {
    fn default() -> Self {
        SessionOptions {
            rocchio: RocchioParams::default(),
            mu: S::lit(DEFAULT_MU),
            static_depth: DEFAULT_STATIC_DEPTH,
        }
    }
}

/// The user's verdict on one shown document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub doc_id: String,
    pub relevant: bool,
    pub accepted_keyphrases: BTreeSet<String>,
    /// Whether the accepted keyphrases added anything new to `K`.
    pub consequential: bool,
}

/// Feedback state of a session, shared read-only with ranking strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState<S> {
    pub names: Vec<String>,
    pub seed_keyphrases: Vec<String>,
    /// `K`: keyphrase -> weight. Seeds start at weight 1.
    pub accepted: BTreeMap<String, S>,
    /// `K⁻`, always disjoint from `K`.
    pub rejected: BTreeSet<String>,
    pub judgments: Vec<Judgment>,
    /// Shown but not yet judged.
    pub current: Option<String>,
    /// Every doc id ever shown, judged or pending.
    pub shown: BTreeSet<String>,
    pub covered: CoveredSet,
    /// Aspect space `covered` is kept in, if the strategy diversifies.
    pub covered_space: Option<AspectSpace>,
    /// `D_cand` retrieved for the seed query.
    pub candidate_pool: BTreeSet<String>,
    pub exhausted: bool,
}

impl<S: Scalar> SessionState<S> {
    /// The initial query: every name and every seed keyphrase at weight 1.
    pub fn seed_query(&self) -> QueryVector<S> {
        let mut q = QueryVector::new(&self.names);
        for n in &self.names {
            q.set(n, S::one());
        }
        for k in &self.seed_keyphrases {
            q.set(k, S::one());
        }
        q
    }

    pub fn relevant_judgments(&self) -> impl Iterator<Item = &Judgment> + '_ {
        self.judgments.iter().filter(|j| j.relevant)
    }

    /// Keyphrases selected from documents (seeds excluded unless re-selected).
    pub fn selected_keyphrases(&self) -> BTreeSet<String> {
        self.judgments
            .iter()
            .flat_map(|j| j.accepted_keyphrases.iter().cloned())
            .collect()
    }

    pub fn engagement_trace(&self) -> EngagementTrace {
        EngagementTrace::new(self.judgments.iter().map(|j| j.consequential).collect())
    }

    pub fn is_shown(&self, doc_id: &str) -> bool {
        self.shown.contains(doc_id)
    }
}

/// Names plus L1-normalized keyphrase weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRepresentation<S> {
    pub names: Vec<String>,
    pub keyphrases: BTreeMap<String, S>,
}

impl<S: Scalar> EntityRepresentation<S> {
    /// Normalizes positive weights to sum to one; non-positive entries are dropped.
    pub fn from_weights(names: Vec<String>, weights: &BTreeMap<String, S>) -> Self {
        let total: S = weights.values().copied().filter(|w| *w > S::zero()).sum();
        let keyphrases = if total > S::zero() {
            weights
                .iter()
                .filter(|(_, w)| **w > S::zero())
                .map(|(k, &w)| (k.clone(), w / total))
                .collect()
        } else {
            BTreeMap::new()
        };
        EntityRepresentation { names, keyphrases }
    }

    pub fn empty(names: Vec<String>) -> Self {
        EntityRepresentation {
            names,
            keyphrases: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keyphrases.is_empty()
    }
}

/// Rocchio expansion over judged documents.
///
/// `q' = alpha*q0 + beta/|R| * sum_{d in R} v_acc(d) - gamma/|N| * sum_{d in N} v(d)`
/// where `v(d)` holds normalized keyphrase frequencies of `d` and `v_acc(d)`
/// keeps only the keyphrases the user accepted from `d`. Rejected keyphrases
/// are clamped to non-positive weight.
pub fn rocchio_expand_from<S: Scalar>(
    seed_query: &QueryVector<S>,
    judged: &[(&Document, &Judgment)],
    rejected: &BTreeSet<String>,
    params: RocchioParams<S>,
) -> QueryVector<S> {
    if judged.is_empty() {
        return seed_query.clone();
    }
    let mut q = seed_query.scaled(params.alpha);
    let n_rel = judged.iter().filter(|(_, j)| j.relevant).count();
    let n_non = judged.len() - n_rel;

    for (doc, j) in judged {
        let total: u32 = doc.keyphrases.values().sum();
        if total == 0 {
            continue;
        }
        let total = S::lit(total as f64);
        if j.relevant {
            let coef = params.beta / S::lit(n_rel as f64);
            for k in &j.accepted_keyphrases {
                if let Some(&c) = doc.keyphrases.get(k) {
                    q.add(k, coef * S::lit(c as f64) / total);
                }
            }
        } else {
            let coef = params.gamma / S::lit(n_non as f64);
            for (k, &c) in &doc.keyphrases {
                q.add(k, -(coef * S::lit(c as f64) / total));
            }
        }
    }
    for k in rejected {
        if q.get(k) > S::zero() {
            q.set(k, S::zero());
        }
    }
    q
}

/// One entity-addition episode.
pub struct Session<S: Scalar = f64> {
    index: Arc<CorpusIndex>,
    options: SessionOptions<S>,
    state: SessionState<S>,
    strategy: Strategy<S>,
}

impl<S: Scalar> std::fmt::Debug for Session<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("strategy", &self.strategy.name())
            .field("state", &self.state)
            .finish()
    }
}

impl<S: Scalar> Session<S> {
    /// Starts a session. `truth` is only needed by the oracle strategy.
    pub fn start<N: AsRef<str>, K: AsRef<str>>(
        index: Arc<CorpusIndex>,
        names: &[N],
        seed_keyphrases: &[K],
        strategy: StrategyName,
        options: SessionOptions<S>,
        truth: Option<&GroundTruth>,
    ) -> Result<Self> {
        let names: Vec<String> = names
            .iter()
            .map(|n| canonical_keyphrase(n.as_ref()))
            .filter(|n| !n.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Validation("at least one entity name is required".into()));
        }
        if options.static_depth == 0 {
            return Err(Error::Validation("static depth must be >= 1".into()));
        }
        let mut seeds: Vec<String> = Vec::new();
        for k in seed_keyphrases {
            let k = canonical_keyphrase(k.as_ref());
            if !k.is_empty() && !seeds.contains(&k) {
                seeds.push(k);
            }
        }
        let mut state = SessionState {
            names,
            accepted: seeds.iter().map(|k| (k.clone(), S::one())).collect(),
            seed_keyphrases: seeds,
            rejected: BTreeSet::new(),
            judgments: Vec::new(),
            current: None,
            shown: BTreeSet::new(),
            covered: CoveredSet::new(),
            covered_space: strategy.aspect_space(),
            candidate_pool: BTreeSet::new(),
            exhausted: false,
        };
        state.candidate_pool = retrieve_candidates(&index, &state.seed_query());
        let strategy = build_strategy(strategy, &index, &state, &options, truth)?;
        Ok(Session {
            index,
            options,
            state,
            strategy,
        })
    }

    pub fn state(&self) -> &SessionState<S> {
        &self.state
    }

    pub fn index(&self) -> &Arc<CorpusIndex> {
        &self.index
    }

    pub fn options(&self) -> &SessionOptions<S> {
        &self.options
    }

    pub fn strategy(&self) -> &Strategy<S> {
        &self.strategy
    }

    pub fn strategy_name(&self) -> StrategyName {
        self.strategy.name()
    }

    pub fn current(&self) -> Option<&str> {
        self.state.current.as_deref()
    }

    pub fn is_exhausted(&self) -> bool {
        self.state.exhausted
    }

    /// Shows the next document. A pending (unjudged) document is returned
    /// again; `None` means the strategy has nothing left to show.
    pub fn next_document(&mut self) -> Result<Option<String>> {
        if let Some(cur) = &self.state.current {
            return Ok(Some(cur.clone()));
        }
        if self.state.exhausted {
            return Ok(None);
        }
        match self.strategy.next(&self.index, &self.state, &self.options)? {
            Some(doc_id) => {
                debug_assert!(!self.state.shown.contains(&doc_id));
                self.state.shown.insert(doc_id.clone());
                self.state.current = Some(doc_id.clone());
                Ok(Some(doc_id))
            }
            None => {
                self.state.exhausted = true;
                Ok(None)
            }
        }
    }

    /// Folds the user's verdict on the current document into the session.
    pub fn apply_judgment<K: AsRef<str>>(
        &mut self,
        doc_id: &str,
        relevant: bool,
        accepted_keyphrases: &[K],
    ) -> Result<&Judgment> {
        match &self.state.current {
            Some(cur) if cur == doc_id => {}
            _ if self.state.judgments.iter().any(|j| j.doc_id == doc_id) => {
                return Err(Error::State(format!("document {doc_id:?} was already judged")));
            }
            _ => {
                return Err(Error::State(format!(
                    "document {doc_id:?} is not the document currently shown"
                )));
            }
        }
        let doc = self.index.require(doc_id)?;
        let accepted: BTreeSet<String> = accepted_keyphrases
            .iter()
            .map(|k| canonical_keyphrase(k.as_ref()))
            .collect();
        if !relevant && !accepted.is_empty() {
            return Err(Error::Validation(
                "an irrelevant document cannot contribute keyphrases".into(),
            ));
        }
        if let Some(bad) = accepted.iter().find(|k| !doc.keyphrases.contains_key(*k)) {
            return Err(Error::Validation(format!(
                "keyphrase {bad:?} does not occur in document {doc_id:?}"
            )));
        }

        let state = &mut self.state;
        let mut consequential = false;
        if relevant {
            for k in &accepted {
                let w = S::lit(doc.normalized_keyphrase_frequency(k));
                match state.accepted.get_mut(k) {
                    Some(existing) => *existing += w,
                    None => {
                        state.accepted.insert(k.clone(), w);
                        consequential = true;
                    }
                }
                state.rejected.remove(k);
            }
        }
        for k in doc.keyphrases.keys() {
            if !accepted.contains(k) && !state.accepted.contains_key(k) {
                state.rejected.insert(k.clone());
            }
        }
        if let Some(space) = state.covered_space {
            state.covered.extend(aspect_of(doc, space));
        }
        state.current = None;
        state.judgments.push(Judgment {
            doc_id: doc_id.to_string(),
            relevant,
            accepted_keyphrases: accepted,
            consequential,
        });
        Ok(self.state.judgments.last().expect("just pushed"))
    }

    /// Rocchio-expanded query for the current feedback.
    pub fn rocchio_expand(&self, params: RocchioParams<S>) -> QueryVector<S> {
        expand_state(&self.index, &self.state, params)
    }

    /// The representation built from `K`; the session may be finished at any time.
    pub fn finish(&self) -> EntityRepresentation<S> {
        EntityRepresentation::from_weights(self.state.names.clone(), &self.state.accepted)
    }
}

pub(crate) fn expand_state<S: Scalar>(
    index: &CorpusIndex,
    state: &SessionState<S>,
    params: RocchioParams<S>,
) -> QueryVector<S> {
    let judged: Vec<(&Document, &Judgment)> = state
        .judgments
        .iter()
        .filter_map(|j| index.get(&j.doc_id).map(|d| (d, j)))
        .collect();
    rocchio_expand_from(&state.seed_query(), &judged, &state.rejected, params)
}
