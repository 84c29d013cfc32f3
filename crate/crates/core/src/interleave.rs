//! Consequentiality-driven interleaving of a static and a dynamic list.
//!
//! The first document comes from the static list. Afterwards the controller
//! stays on the list it served from while the user's judgments keep adding
//! keyphrases, and switches to the other list after an inconsequential one.
//! The static list is frozen at session start; the dynamic list is recomputed
//! from the session state at every draw. Documents already shown are skipped
//! on either side without costing a turn. When the active list has nothing
//! left, the other list serves in its place.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusIndex;
use crate::error::Result;
use crate::num::Scalar;
use crate::session::{SessionOptions, SessionState};
use crate::strategy::{Ranker, RankerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListSide {
    Static,
    Dynamic,
}

impl ListSide {
    pub fn other(self) -> Self {
        match self {
            ListSide::Static => ListSide::Dynamic,
            ListSide::Dynamic => ListSide::Static,
        }
    }
}

/// One emitted document: which list was active and which list served it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub doc_id: String,
    pub active: ListSide,
    pub source: ListSide,
}

#[derive(Debug, Clone)]
pub struct InterleaveState<S> {
    static_kind: RankerKind,
    static_list: Vec<String>,
    static_cursor: usize,
    active: ListSide,
    last_consequential: Option<bool>,
    dynamic: Ranker,
    history: Vec<Draw>,
    _scalar: std::marker::PhantomData<S>,
}

impl<S: Scalar> InterleaveState<S> {
    pub fn new(static_kind: RankerKind, static_list: Vec<String>, dynamic: Ranker) -> Self {
        InterleaveState {
            static_kind,
            static_list,
            static_cursor: 0,
            active: ListSide::Static,
            last_consequential: None,
            dynamic,
            history: Vec::new(),
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn static_kind(&self) -> RankerKind {
        self.static_kind
    }

    pub fn dynamic_kind(&self) -> RankerKind {
        self.dynamic.kind()
    }

    pub fn static_list(&self) -> &[String] {
        &self.static_list
    }

    pub fn static_cursor(&self) -> usize {
        self.static_cursor
    }

    pub fn active(&self) -> ListSide {
        self.active
    }

    pub fn last_consequential(&self) -> Option<bool> {
        self.last_consequential
    }

    /// Every emission so far, in order.
    pub fn history(&self) -> &[Draw] {
        &self.history
    }

    fn draw_static(&mut self, state: &SessionState<S>) -> Option<String> {
        while self.static_cursor < self.static_list.len() {
            let d = &self.static_list[self.static_cursor];
            self.static_cursor += 1;
            if !state.is_shown(d) {
                return Some(d.clone());
            }
        }
        None
    }
}

/// Picks the next document of an interleaved session.
pub fn interleave_next<S: Scalar>(
    st: &mut InterleaveState<S>,
    index: &CorpusIndex,
    state: &SessionState<S>,
    options: &SessionOptions<S>,
) -> Result<Option<String>> {
    if !st.history.is_empty() {
        let consequential = state.judgments.last().map(|j| j.consequential).unwrap_or(false);
        st.last_consequential = Some(consequential);
        if !consequential {
            st.active = st.active.other();
        }
    }
    let active = st.active;
    for side in [active, active.other()] {
        let drawn = match side {
            ListSide::Static => st.draw_static(state),
            ListSide::Dynamic => st.dynamic.next(index, state, options),
        };
        if let Some(doc_id) = drawn {
            st.history.push(Draw {
                doc_id: doc_id.clone(),
                active,
                source: side,
            });
            return Ok(Some(doc_id));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::Document;
    use crate::session::Session;
    use crate::strategy::StrategyName;

    fn corpus() -> Arc<CorpusIndex> {
        let docs = (1..=8)
            .map(|i| {
                let kps = vec![(format!("alpha{i}"), 1), (format!("beta{i}"), 1)];
                let text = format!("Rey met alpha{i} and beta{i} {}", "rey ".repeat(i % 3));
                Document::new(format!("d{i}"), text, Some(kps), vec![]).unwrap()
            })
            .collect();
        Arc::new(CorpusIndex::build(docs).unwrap())
    }

    fn session(depth: usize) -> Session<f64> {
        let options = SessionOptions {
            static_depth: depth,
            ..SessionOptions::default()
        };
        let name: StrategyName = "I(Lm,Lm-Feedback)".parse().unwrap();
        Session::start(corpus(), &["rey"], &[] as &[&str], name, options, None).unwrap()
    }

    fn judge(s: &mut Session<f64>, consequential: bool) -> Draw {
        let d = s.next_document().unwrap().unwrap();
        let kp = s.index().get(&d).unwrap().keyphrases.keys().next().unwrap().clone();
        if consequential {
            s.apply_judgment(&d, true, &[kp]).unwrap();
        } else {
            s.apply_judgment::<&str>(&d, false, &[]).unwrap();
        }
        last_draw(s)
    }

    fn last_draw(s: &Session<f64>) -> Draw {
        s.strategy().interleave_state().unwrap().history().last().unwrap().clone()
    }

    #[test]
    fn stays_on_static_while_consequential() {
        let mut s = session(20);
        assert_eq!(judge(&mut s, true).active, ListSide::Static);
        assert_eq!(judge(&mut s, true).active, ListSide::Static);
        s.next_document().unwrap();
        assert_eq!(last_draw(&s).active, ListSide::Static);
        assert_eq!(s.strategy().interleave_state().unwrap().static_cursor(), 3);
    }

    #[test]
    fn inconsequential_first_document_switches_to_dynamic() {
        let mut s = session(20);
        let first = judge(&mut s, false);
        assert_eq!(first.active, ListSide::Static);
        s.next_document().unwrap();
        let second = last_draw(&s);
        assert_eq!((second.active, second.source), (ListSide::Dynamic, ListSide::Dynamic));
        assert_ne!(first.doc_id, second.doc_id);
    }

    #[test]
    fn dynamic_serves_once_static_prefix_is_used_up() {
        let mut s = session(2);
        judge(&mut s, true);
        judge(&mut s, true);
        let mut shown = vec![];
        while let Some(d) = s.next_document().unwrap() {
            let draw = last_draw(&s);
            assert_eq!(draw.source, ListSide::Dynamic);
            shown.push(d.clone());
            s.apply_judgment::<&str>(&d, false, &[]).unwrap();
        }
        assert_eq!(shown.len(), 6);
        assert!(s.is_exhausted());
        let history = s.strategy().interleave_state().unwrap().history();
        let unique: std::collections::BTreeSet<_> = history.iter().map(|d| &d.doc_id).collect();
        assert_eq!(unique.len(), 8);
    }

    #[test]
    fn switches_back_to_static_after_an_inconsequential_dynamic_document() {
        let mut s = session(20);
        judge(&mut s, false);
        assert_eq!(judge(&mut s, false).active, ListSide::Dynamic);
        s.next_document().unwrap();
        assert_eq!(last_draw(&s).active, ListSide::Static);
    }
}
