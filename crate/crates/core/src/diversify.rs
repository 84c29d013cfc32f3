//! Greedy maximum-coverage ranking over an aspect space.
//!
//! Each pick is the candidate with the largest number of aspects not yet
//! covered (ties go to the smaller doc id); after a pick every aspect of the
//! picked document counts as covered. Documents with no marginal gain are still
//! emitted, after the positive-gain ones, so a session never stalls on a
//! coverage plateau.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, Document};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::retrieval::ScoredList;
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectSpace {
    Keyphrase,
    Entity,
}

impl fmt::Display for AspectSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AspectSpace::Keyphrase => "keyphrase",
            AspectSpace::Entity => "entity",
        })
    }
}

impl FromStr for AspectSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "keyphrase" | "kp" => Ok(AspectSpace::Keyphrase),
            "entity" | "ent" => Ok(AspectSpace::Entity),
            _ => Err(Error::Config(format!("unknown aspect space {s:?}"))),
        }
    }
}

/// Aspects already covered in a session. Only grows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveredSet {
    aspects: BTreeSet<String>,
}

impl CoveredSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn aspects(&self) -> &BTreeSet<String> {
        &self.aspects
    }

    pub fn contains(&self, aspect: &str) -> bool {
        self.aspects.contains(aspect)
    }

    pub fn len(&self) -> usize {
        self.aspects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn extend<I: IntoIterator<Item = String>>(&mut self, aspects: I) {
        self.aspects.extend(aspects);
    }
}

impl<S: Into<String>> FromIterator<S> for CoveredSet {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        CoveredSet {
            aspects: iter.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn aspect_of(doc: &Document, space: AspectSpace) -> BTreeSet<String> {
    match space {
        AspectSpace::Keyphrase => doc.keyphrases.keys().cloned().collect(),
        AspectSpace::Entity => doc.entities.iter().map(|e| e.entity_id.clone()).collect(),
    }
}

/// Adds every aspect of a judged document, relevant or not.
pub fn update_covered(mut covered: CoveredSet, judged: &Document, space: AspectSpace) -> CoveredSet {
    covered.extend(aspect_of(judged, space));
    covered
}

/// Greedy max-coverage selection over `(id, aspects)` items.
///
/// Returns up to `budget` picks with their marginal gain at pick time.
pub fn greedy_select(
    mut items: Vec<(String, BTreeSet<String>)>,
    covered: &BTreeSet<String>,
    budget: usize,
) -> Vec<(String, usize)> {
    items.sort_by(|a, b| a.0.cmp(&b.0));
    items.dedup_by(|a, b| a.0 == b.0);
    // drop what is already covered so gains are plain set sizes
    for (_, aspects) in items.iter_mut() {
        aspects.retain(|a| !covered.contains(a));
    }

    let mut picks = Vec::with_capacity(budget.min(items.len()));
    let mut remaining: Vec<Option<(String, BTreeSet<String>)>> = items.into_iter().map(Some).collect();
    while picks.len() < budget {
        let mut best: Option<(usize, usize)> = None;
        for (i, slot) in remaining.iter().enumerate() {
            let Some((_, aspects)) = slot else { continue };
            let gain = aspects.len();
            // strict > keeps the earliest (smallest id) on ties
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else { break };
        let (id, picked) = remaining[i].take().expect("slot is live");
        if gain > 0 {
            for (_, aspects) in remaining.iter_mut().flatten() {
                aspects.retain(|a| !picked.contains(a));
            }
        }
        picks.push((id, gain));
    }
    picks
}

/// Greedy diversified ranking of `candidates`; the score of each entry is its
/// marginal gain when it was picked.
pub fn greedy_diverse_rank<S: Scalar, I, D>(
    index: &CorpusIndex,
    candidates: I,
    space: AspectSpace,
    covered: &CoveredSet,
    budget: usize,
) -> Result<ScoredList<S>>
where
    I: IntoIterator<Item = D>,
    D: AsRef<str>,
{
    if budget == 0 {
        return Err(Error::Validation("diversification budget must be >= 1".into()));
    }
    let items = candidates
        .into_iter()
        .map(|id| {
            let doc = index.require(id.as_ref())?;
            Ok((doc.id.clone(), aspect_of(doc, space)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(greedy_head_list(items, covered.aspects(), budget))
}

pub(crate) fn greedy_head_list<S: Scalar>(
    items: Vec<(String, BTreeSet<String>)>,
    covered: &BTreeSet<String>,
    budget: usize,
) -> ScoredList<S> {
    ScoredList::from_ordered(
        greedy_select(items, covered, budget)
            .into_iter()
            .map(|(id, g)| (id, S::lit(g as f64)))
            .collect(),
    )
}

/// Next document of a `Div_*-Feedback` session: re-retrieves under the
/// expanded query, drops shown documents, seeds the covered set with the
/// session's covered aspects (and `K ∪ K⁻` for keyphrase space) and returns
/// the greedy head. `None` when the pool is exhausted.
pub fn diversify_with_feedback<S: Scalar>(session: &Session<S>, space: AspectSpace) -> Option<String> {
    crate::strategy::diversified_feedback_head(session.index(), session.state(), space, session.options())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityMention;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn item(id: &str, aspects: &[&str]) -> (String, BTreeSet<String>) {
        (id.to_string(), set(aspects))
    }

    fn ids(picks: &[(String, usize)]) -> Vec<&str> {
        picks.iter().map(|(id, _)| id.as_str()).collect()
    }

    #[test]
    fn picks_largest_gain_then_breaks_ties_by_id() {
        let items = vec![item("d1", &["a", "b"]), item("d2", &["b", "c", "d"]), item("d3", &["e"])];
        let picks = greedy_select(items, &BTreeSet::new(), 2);
        assert_eq!(picks, vec![("d2".to_string(), 3), ("d1".to_string(), 1)]);
    }

    #[test]
    fn single_candidate() {
        let picks = greedy_select(vec![item("x", &[])], &BTreeSet::new(), 3);
        assert_eq!(ids(&picks), ["x"]);
    }

    #[test]
    fn fully_covered_candidates_come_in_id_order() {
        let items = vec![item("c", &["a"]), item("a", &["a", "b"]), item("b", &["b"])];
        let picks = greedy_select(items, &set(&["a", "b"]), 3);
        assert_eq!(ids(&picks), ["a", "b", "c"]);
        assert!(picks.iter().all(|(_, g)| *g == 0));
    }

    #[test]
    fn zero_gain_documents_follow_positive_ones() {
        let items = vec![item("a", &["x"]), item("b", &["y"]), item("c", &["x", "y"])];
        let picks = greedy_select(items, &BTreeSet::new(), 3);
        assert_eq!(picks, vec![("c".into(), 2), ("a".into(), 0), ("b".into(), 0)]);
    }

    fn doc(id: &str, kps: &[&str], ents: &[&str]) -> Document {
        let text = format!("{id} {} {}", kps.join(" "), ents.join(" "));
        let entities = ents
            .iter()
            .map(|e| EntityMention {
                entity_id: e.to_string(),
                mention: e.to_string(),
                offset: 0,
            })
            .collect();
        Document::new(id, text, Some(kps.iter().map(|k| (k.to_string(), 1)).collect()), entities).unwrap()
    }

    #[test]
    fn aspects_per_space() {
        let d = doc("d", &["k1", "k2"], &["e7"]);
        assert_eq!(aspect_of(&d, AspectSpace::Keyphrase), set(&["k1", "k2"]));
        assert_eq!(aspect_of(&d, AspectSpace::Entity), set(&["e7"]));
        let bare = doc("b", &[], &[]);
        assert!(aspect_of(&bare, AspectSpace::Entity).is_empty());
    }

    #[test]
    fn covered_grows_regardless_of_relevance() {
        let covered: CoveredSet = ["a"].into_iter().collect();
        let c = update_covered(covered, &doc("d", &["a", "b"], &[]), AspectSpace::Keyphrase);
        assert_eq!(c.aspects(), &set(&["a", "b"]));
        let c = update_covered(c, &doc("i", &["c"], &[]), AspectSpace::Keyphrase);
        assert!(c.contains("c"));
        let before = c.clone();
        let c = update_covered(c, &doc("n", &[], &[]), AspectSpace::Keyphrase);
        assert_eq!(c, before);
    }

    #[test]
    fn rank_over_index_reports_gains() {
        let idx = CorpusIndex::build(vec![
            doc("d1", &["a", "b"], &[]),
            doc("d2", &["b", "c", "d"], &[]),
            doc("d3", &["e"], &[]),
        ])
        .unwrap();
        let r: ScoredList<f64> =
            greedy_diverse_rank(&idx, ["d1", "d2", "d3"], AspectSpace::Keyphrase, &CoveredSet::new(), 2)
                .unwrap();
        assert_eq!(r.entries(), &[("d2".to_string(), 3.0), ("d1".to_string(), 1.0)]);
        assert!(greedy_diverse_rank::<f64, _, _>(&idx, ["d1"], AspectSpace::Entity, &CoveredSet::new(), 0).is_err());
    }

    #[test]
    fn space_names_parse() {
        assert_eq!("Entity".parse::<AspectSpace>().unwrap(), AspectSpace::Entity);
        assert!("topic".parse::<AspectSpace>().is_err());
    }
}
