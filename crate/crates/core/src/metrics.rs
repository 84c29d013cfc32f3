//! Coverage, engagement, win/loss and the oracle ranking.
//!
//! The counting metrics are generic over [`Real`], so they can be evaluated in
//! floating point for reporting or over rationals for exact checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::diversify::greedy_select;
use crate::error::{Error, Result};
use crate::num::{Real, Scalar};
use crate::retrieval::ScoredList;

/// Consequential (`true`) / inconsequential (`false`) flag per judged document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementTrace {
    pub flags: Vec<bool>,
}

impl EngagementTrace {
    pub fn new(flags: Vec<bool>) -> Self {
        EngagementTrace { flags }
    }

    /// Parses `+`/`-` notation, e.g. `"+-+-"`. Other characters are ignored.
    pub fn from_signs(signs: &str) -> Self {
        EngagementTrace {
            flags: signs
                .chars()
                .filter_map(|c| match c {
                    '+' => Some(true),
                    '-' => Some(false),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn push(&mut self, consequential: bool) {
        self.flags.push(consequential);
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn prefix(&self, i: usize) -> EngagementTrace {
        EngagementTrace {
            flags: self.flags[..i.min(self.flags.len())].to_vec(),
        }
    }

    /// Maximal runs as `(flag, length)` in order.
    pub fn runs(&self) -> Vec<(bool, usize)> {
        let mut runs: Vec<(bool, usize)> = Vec::new();
        for &f in &self.flags {
            match runs.last_mut() {
                Some((flag, len)) if *flag == f => *len += 1,
                _ => runs.push((f, 1)),
            }
        }
        runs
    }

    pub fn signs(&self) -> String {
        self.flags.iter().map(|&f| if f { '+' } else { '-' }).collect()
    }
}

/// Ground truth for one entity query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub entity_id: String,
    pub relevant_keyphrases: BTreeSet<String>,
    pub relevant_docs: BTreeSet<String>,
}

/// Fraction of the relevant keyphrases that were selected.
pub fn coverage_at<'a, R, I>(selected: I, truth: &GroundTruth) -> Result<R>
where
    R: Real,
    I: IntoIterator<Item = &'a String>,
{
    if truth.relevant_keyphrases.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "entity {:?} has no relevant keyphrases",
            truth.entity_id
        )));
    }
    let hits = selected
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|k| truth.relevant_keyphrases.contains(*k))
        .count();
    Ok(R::from_count(hits) / R::from_count(truth.relevant_keyphrases.len()))
}

/// Engagement after `i = trace.len()` documents: every inconsequential run of
/// length `l` contributes `1/(1+l)`, every consequential document contributes
/// 1, and the sum is divided by `i`.
pub fn engagement_at<R: Real>(trace: &EngagementTrace) -> Result<R> {
    if trace.is_empty() {
        return Err(Error::UndefinedMetric("engagement of an empty trace".into()));
    }
    let total = trace
        .runs()
        .into_iter()
        .fold(R::zero(), |acc, (consequential, len)| {
            if consequential {
                acc + R::from_count(len)
            } else {
                acc + R::one() / (R::one() + R::from_count(len))
            }
        });
    Ok(total / R::from_count(trace.len()))
}

/// Greedy maximum coverage of the relevant keyphrases over the relevant
/// candidates. Candidates outside `relevant_docs` (and candidates whose
/// relevant keyphrases are already covered) follow in doc id order.
pub fn ideal_ranking<S: Scalar, I, D>(
    index: &CorpusIndex,
    candidates: I,
    truth: &GroundTruth,
    depth: usize,
) -> Result<ScoredList<S>>
where
    I: IntoIterator<Item = D>,
    D: AsRef<str>,
{
    if depth == 0 {
        return Err(Error::Validation("ideal ranking depth must be >= 1".into()));
    }
    let mut items = Vec::new();
    for id in candidates {
        let doc = index.require(id.as_ref())?;
        let aspects: BTreeSet<String> = if truth.relevant_docs.contains(&doc.id) {
            doc.keyphrases
                .keys()
                .filter(|k| truth.relevant_keyphrases.contains(*k))
                .cloned()
                .collect()
        } else {
            BTreeSet::new()
        };
        items.push((doc.id.clone(), aspects));
    }
    let picks = greedy_select(items, &BTreeSet::new(), depth);
    Ok(ScoredList::from_ordered(
        picks
            .into_iter()
            .map(|(id, gain)| (id, S::lit(gain as f64)))
            .collect(),
    ))
}

/// Wins and losses of a strategy against a baseline; ties count for neither.
pub fn win_loss<K, R: PartialOrd>(per_query: &BTreeMap<K, (R, R)>) -> (usize, usize) {
    per_query.values().fold((0, 0), |(w, l), (s, b)| {
        if s > b {
            (w + 1, l)
        } else if s < b {
            (w, l + 1)
        } else {
            (w, l)
        }
    })
}
