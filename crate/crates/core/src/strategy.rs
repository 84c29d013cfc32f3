//! Ranking strategies and their canonical names.
//!
//! | name | behaviour |
//! |------|-----------|
//! | `Lm` | language-model ranking of the seed candidates, computed once |
//! | `Lm-Feedback` | re-expands and re-ranks after every relevant judgment |
//! | `Div_Kp`, `Div_Ent` | greedy coverage of keyphrase / entity aspects |
//! | `Div_Kp-Feedback`, `Div_Ent-Feedback` | re-retrieves under the expanded query after every judgment, keeps the covered set |
//! | `I(static,dynamic)` | see [`crate::interleave`] |
//! | `Ideal` | greedy coverage of ground-truth keyphrases (needs ground truth) |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocOrd};
use crate::diversify::{aspect_of, greedy_select, AspectSpace};
use crate::error::{Error, Result};
use crate::interleave::InterleaveState;
use crate::metrics::{ideal_ranking, GroundTruth};
use crate::num::Scalar;
use crate::retrieval::{rank_ords, retrieve_candidate_ords};
use crate::session::{expand_state, SessionOptions, SessionState};

/// A single (non-interleaved) ranking approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankerKind {
    Lm,
    LmFeedback,
    Div(AspectSpace),
    DivFeedback(AspectSpace),
    Ideal,
}

impl RankerKind {
    pub fn uses_feedback(self) -> bool {
        matches!(self, RankerKind::LmFeedback | RankerKind::DivFeedback(_))
    }

    pub fn aspect_space(self) -> Option<AspectSpace> {
        match self {
            RankerKind::Div(s) | RankerKind::DivFeedback(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let space = |s: &AspectSpace| match s {
            AspectSpace::Keyphrase => "Kp",
            AspectSpace::Entity => "Ent",
        };
        match self {
            RankerKind::Lm => write!(f, "Lm"),
            RankerKind::LmFeedback => write!(f, "Lm-Feedback"),
            RankerKind::Div(s) => write!(f, "Div_{}", space(s)),
            RankerKind::DivFeedback(s) => write!(f, "Div_{}-Feedback", space(s)),
            RankerKind::Ideal => write!(f, "Ideal"),
        }
    }
}

impl FromStr for RankerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Lm" => RankerKind::Lm,
            "Lm-Feedback" => RankerKind::LmFeedback,
            "Div_Kp" => RankerKind::Div(AspectSpace::Keyphrase),
            "Div_Kp-Feedback" => RankerKind::DivFeedback(AspectSpace::Keyphrase),
            "Div_Ent" => RankerKind::Div(AspectSpace::Entity),
            "Div_Ent-Feedback" => RankerKind::DivFeedback(AspectSpace::Entity),
            "Ideal" => RankerKind::Ideal,
            other => return Err(Error::Config(format!("unknown strategy {other:?}"))),
        })
    }
}

/// A strategy identifier as used by the CLI, the HTTP API and result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyName {
    Single(RankerKind),
    /// `I(fixed,dynamic)`: a frozen list without feedback and a feedback list.
    Interleaved { fixed: RankerKind, dynamic: RankerKind },
}

/// The twelve strategies compared in the benchmark, in report order.
pub const BENCHMARK_STRATEGIES: [&str; 12] = [
    "Lm",
    "Lm-Feedback",
    "Div_Kp",
    "Div_Kp-Feedback",
    "Div_Ent",
    "Div_Ent-Feedback",
    "I(Lm,Lm-Feedback)",
    "I(Div_Kp,Div_Kp-Feedback)",
    "I(Lm,Div_Kp-Feedback)",
    "I(Div_Ent,Div_Ent-Feedback)",
    "I(Lm,Div_Ent-Feedback)",
    "Ideal",
];

impl StrategyName {
    pub fn is_interleaved(self) -> bool {
        matches!(self, StrategyName::Interleaved { .. })
    }

    /// Space of the session's covered set: the feedback side's, if any.
    pub fn aspect_space(self) -> Option<AspectSpace> {
        match self {
            StrategyName::Single(k) => k.aspect_space(),
            StrategyName::Interleaved { fixed, dynamic } => {
                dynamic.aspect_space().or(fixed.aspect_space())
            }
        }
    }

    pub fn needs_ground_truth(self) -> bool {
        self == StrategyName::Single(RankerKind::Ideal)
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyName::Single(k) => write!(f, "{k}"),
            StrategyName::Interleaved { fixed, dynamic } => write!(f, "I({fixed},{dynamic})"),
        }
    }
}

impl FromStr for StrategyName {
    type Err = Error;
    fn from_str(raw: &str) -> Result<Self> {
        let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(inner) = s.strip_prefix("I(").and_then(|r| r.strip_suffix(')')) {
            let bad = || Error::Config(format!("unknown strategy {raw:?}"));
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let fixed: RankerKind = a.parse().map_err(|_| bad())?;
            let dynamic: RankerKind = b.parse().map_err(|_| bad())?;
            let fixed_ok = matches!(fixed, RankerKind::Lm | RankerKind::Div(_));
            if !fixed_ok || !dynamic.uses_feedback() {
                return Err(bad());
            }
            return Ok(StrategyName::Interleaved { fixed, dynamic });
        }
        s.parse::<RankerKind>()
            .map(StrategyName::Single)
            .map_err(|_| Error::Config(format!("unknown strategy {raw:?}")))
    }
}

impl Serialize for StrategyName {
    fn serialize<Se: serde::Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Next-document provider for a single ranking approach.
#[derive(Debug, Clone)]
pub enum Ranker {
    /// A ranking fixed at construction time (`Lm`, `Div_*` seen statically, `Ideal`).
    Fixed { kind: RankerKind, ranking: Vec<String> },
    LmFeedback {
        relevant_seen: usize,
        ranking: Vec<String>,
    },
    Div { space: AspectSpace },
    DivFeedback { space: AspectSpace },
}

fn first_unshown<S: Scalar>(ranking: &[String], state: &SessionState<S>) -> Option<String> {
    ranking.iter().find(|d| !state.is_shown(d)).cloned()
}

/// Aspects covered so far in `space`.
fn covered_in<S: Scalar>(index: &CorpusIndex, state: &SessionState<S>, space: AspectSpace) -> BTreeSet<String> {
    if state.covered_space == Some(space) {
        return state.covered.aspects().clone();
    }
    state
        .judgments
        .iter()
        .filter_map(|j| index.get(&j.doc_id))
        .flat_map(|d| aspect_of(d, space))
        .collect()
}

fn greedy_head(
    index: &CorpusIndex,
    pool: impl IntoIterator<Item = DocOrd>,
    space: AspectSpace,
    covered: &BTreeSet<String>,
    skip: impl Fn(&str) -> bool,
) -> Option<String> {
    let items: Vec<_> = pool
        .into_iter()
        .map(|o| index.doc(o))
        .filter(|d| !skip(&d.id))
        .map(|d| (d.id.clone(), aspect_of(d, space)))
        .collect();
    greedy_select(items, covered, 1).into_iter().next().map(|(id, _)| id)
}

/// Head of the feedback-diversified ranking: re-retrieve under the expanded
/// query, drop shown documents, and seed the covered set with the session's
/// covered aspects (plus `K ∪ K⁻` in keyphrase space).
pub(crate) fn diversified_feedback_head<S: Scalar>(
    index: &CorpusIndex,
    state: &SessionState<S>,
    space: AspectSpace,
    options: &SessionOptions<S>,
) -> Option<String> {
    let query = expand_state(index, state, options.rocchio);
    let pool = retrieve_candidate_ords(index, &query);
    let mut covered = covered_in(index, state, space);
    if space == AspectSpace::Keyphrase {
        covered.extend(state.accepted.keys().cloned());
        covered.extend(state.rejected.iter().cloned());
    }
    greedy_head(index, pool, space, &covered, |d| state.is_shown(d))
}

fn pool_ords<S: Scalar>(index: &CorpusIndex, state: &SessionState<S>) -> Vec<DocOrd> {
    state
        .candidate_pool
        .iter()
        .filter_map(|d| index.ord(d))
        .collect()
}

impl Ranker {
    pub(crate) fn build<S: Scalar>(
        kind: RankerKind,
        index: &CorpusIndex,
        state: &SessionState<S>,
        options: &SessionOptions<S>,
        truth: Option<&GroundTruth>,
    ) -> Result<Ranker> {
        Ok(match kind {
            RankerKind::Lm => Ranker::Fixed {
                kind,
                ranking: static_ranking(kind, index, state, options, usize::MAX)?,
            },
            RankerKind::Ideal => {
                let truth = truth.ok_or_else(|| {
                    Error::Config("the Ideal strategy needs ground truth".into())
                })?;
                // every relevant document is reachable by some feedback
                // strategy, so the oracle draws from all of them
                let candidates: BTreeSet<&String> = state
                    .candidate_pool
                    .iter()
                    .chain(truth.relevant_docs.iter().filter(|d| index.get(d).is_some()))
                    .collect();
                let ranking = ideal_ranking::<S, _, _>(index, &candidates, truth, candidates.len().max(1))?;
                Ranker::Fixed {
                    kind,
                    ranking: ranking.doc_ids().map(String::from).collect(),
                }
            }
            RankerKind::LmFeedback => Ranker::LmFeedback {
                relevant_seen: 0,
                ranking: static_ranking(RankerKind::Lm, index, state, options, usize::MAX)?,
            },
            RankerKind::Div(space) => Ranker::Div { space },
            RankerKind::DivFeedback(space) => Ranker::DivFeedback { space },
        })
    }

    pub fn kind(&self) -> RankerKind {
        match self {
            Ranker::Fixed { kind, .. } => *kind,
            Ranker::LmFeedback { .. } => RankerKind::LmFeedback,
            Ranker::Div { space } => RankerKind::Div(*space),
            Ranker::DivFeedback { space } => RankerKind::DivFeedback(*space),
        }
    }

    /// The next unshown document, or `None` when nothing is left.
    pub(crate) fn next<S: Scalar>(
        &mut self,
        index: &CorpusIndex,
        state: &SessionState<S>,
        options: &SessionOptions<S>,
    ) -> Option<String> {
        match self {
            Ranker::Fixed { ranking, .. } => first_unshown(ranking, state),
            Ranker::LmFeedback {
                relevant_seen,
                ranking,
            } => {
                let n_rel = state.relevant_judgments().count();
                if n_rel != *relevant_seen {
                    let query = expand_state(index, state, options.rocchio);
                    let pool = retrieve_candidate_ords(index, &query);
                    *ranking = rank_ords(index, pool, &query, options.mu)
                        .doc_ids()
                        .map(String::from)
                        .collect();
                    *relevant_seen = n_rel;
                }
                first_unshown(ranking, state)
            }
            Ranker::Div { space } => {
                let covered = covered_in(index, state, *space);
                greedy_head(index, pool_ords(index, state), *space, &covered, |d| {
                    state.is_shown(d)
                })
            }
            Ranker::DivFeedback { space } => {
                diversified_feedback_head(index, state, *space, options)
            }
        }
    }
}

/// Ranking of the seed candidate pool without any feedback, cut at `depth`.
pub(crate) fn static_ranking<S: Scalar>(
    kind: RankerKind,
    index: &CorpusIndex,
    state: &SessionState<S>,
    options: &SessionOptions<S>,
    depth: usize,
) -> Result<Vec<String>> {
    let pool = pool_ords(index, state);
    Ok(match kind {
        RankerKind::Lm => rank_ords(index, pool, &state.seed_query(), options.mu)
            .truncated(depth)
            .doc_ids()
            .map(String::from)
            .collect(),
        RankerKind::Div(space) => {
            let items = pool
                .into_iter()
                .map(|o| {
                    let d = index.doc(o);
                    (d.id.clone(), aspect_of(d, space))
                })
                .collect();
            greedy_select(items, &BTreeSet::new(), depth)
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        }
        other => {
            return Err(Error::Config(format!(
                "{other} cannot serve as a static list"
            )))
        }
    })
}

/// A strategy instance wired to one session.
#[derive(Debug, Clone)]
pub enum Strategy<S> {
    Single(Ranker),
    Interleaved(InterleaveState<S>),
}

impl<S: Scalar> Strategy<S> {
    pub fn name(&self) -> StrategyName {
        match self {
            Strategy::Single(r) => StrategyName::Single(r.kind()),
            Strategy::Interleaved(s) => StrategyName::Interleaved {
                fixed: s.static_kind(),
                dynamic: s.dynamic_kind(),
            },
        }
    }

    pub fn interleave_state(&self) -> Option<&InterleaveState<S>> {
        match self {
            Strategy::Interleaved(s) => Some(s),
            Strategy::Single(_) => None,
        }
    }

    pub(crate) fn next(
        &mut self,
        index: &CorpusIndex,
        state: &SessionState<S>,
        options: &SessionOptions<S>,
    ) -> Result<Option<String>> {
        Ok(match self {
            Strategy::Single(r) => r.next(index, state, options),
            Strategy::Interleaved(s) => crate::interleave::interleave_next(s, index, state, options)?,
        })
    }
}

/// Wires the named strategy to a freshly started session.
pub fn build_strategy<S: Scalar>(
    name: StrategyName,
    index: &CorpusIndex,
    state: &SessionState<S>,
    options: &SessionOptions<S>,
    truth: Option<&GroundTruth>,
) -> Result<Strategy<S>> {
    Ok(match name {
        StrategyName::Single(kind) => Strategy::Single(Ranker::build(kind, index, state, options, truth)?),
        StrategyName::Interleaved { fixed, dynamic } => {
            let static_list = static_ranking(fixed, index, state, options, options.static_depth)?;
            let dynamic = Ranker::build(dynamic, index, state, options, truth)?;
            Strategy::Interleaved(InterleaveState::new(fixed, static_list, dynamic))
        }
    })
}
