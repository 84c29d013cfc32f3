use serde::{Deserialize, Serialize};

use super::index::CorpusIndex;
use crate::error::{Error, Result};
use crate::text::{match_positions, phrase_tokens};

pub const DEFAULT_SNIPPET_WINDOW: usize = 25;

/// A window of text around a name occurrence: an entity-in-context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EicSnippet {
    pub doc_id: String,
    /// Token range `[start, end)` of the window in the document.
    pub start: usize,
    pub end: usize,
    /// Original-case tokens of the window joined by single spaces.
    pub window_text: String,
    /// The matched name, in the casing it appears in the document.
    pub mention: String,
    pub highlighted_keyphrases: Vec<String>,
}

/// One snippet per name occurrence, with overlapping windows merged.
pub fn make_snippets<S: AsRef<str>>(
    index: &CorpusIndex,
    doc_id: &str,
    names: &[S],
    window: usize,
) -> Result<Vec<EicSnippet>> {
    let doc = index.require(doc_id)?;
    if window == 0 {
        return Err(Error::Validation("snippet window must be >= 1".into()));
    }
    let len = doc.tokens.len();

    // (window start, window end, match start, match len)
    let mut hits: Vec<(usize, usize, usize, usize)> = Vec::new();
    for name in names {
        let toks = phrase_tokens(name.as_ref());
        for pos in match_positions(&doc.tokens, &toks) {
            let end = pos + toks.len();
            hits.push((pos.saturating_sub(window), (end + window).min(len), pos, toks.len()));
        }
    }
    hits.sort();

    let mut merged: Vec<(usize, usize, usize, usize)> = Vec::new();
    for h in hits {
        match merged.last_mut() {
            Some(last) if h.0 < last.1 => last.1 = last.1.max(h.1),
            _ => merged.push(h),
        }
    }

    let kp_tokens: Vec<(&String, Vec<String>)> = doc
        .keyphrases
        .keys()
        .map(|k| (k, phrase_tokens(k)))
        .collect();

    Ok(merged
        .into_iter()
        .map(|(lo, hi, pos, n)| {
            let highlighted = kp_tokens
                .iter()
                .filter(|(_, toks)| {
                    match_positions(&doc.tokens, toks).any(|p| p >= lo && p + toks.len() <= hi)
                })
                .map(|(k, _)| (*k).clone())
                .collect();
            EicSnippet {
                doc_id: doc.id.clone(),
                start: lo,
                end: hi,
                window_text: doc.original[lo..hi].join(" "),
                mention: doc.original[pos..pos + n].join(" "),
                highlighted_keyphrases: highlighted,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn index_of(text: &str, kps: &[&str]) -> CorpusIndex {
        let kps = kps.iter().map(|k| (k.to_string(), 1)).collect();
        CorpusIndex::build(vec![Document::new("d", text, Some(kps), vec![]).unwrap()]).unwrap()
    }

    #[test]
    fn window_is_clamped_at_document_start() {
        let idx = index_of("Rey a b c d e f g h i", &[]);
        let s = make_snippets(&idx, "d", &["rey"], 2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].start, s[0].end), (0, 3));
        assert_eq!(s[0].window_text, "Rey a b");
        assert_eq!(s[0].mention, "Rey");
    }

    #[test]
    fn no_match_means_no_snippets() {
        let idx = index_of("a b c", &[]);
        assert!(make_snippets(&idx, "d", &["rey"], 25).unwrap().is_empty());
    }

    #[test]
    fn nearby_matches_merge() {
        let idx = index_of("Rey x y Rey z", &[]);
        let s = make_snippets(&idx, "d", &["rey"], 25).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].start, s[0].end), (0, 5));
    }

    #[test]
    fn distant_matches_stay_separate() {
        let idx = index_of("Rey a b c d e f Rey", &[]);
        let s = make_snippets(&idx, "d", &["rey"], 1).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn highlights_only_keyphrases_inside_window() {
        let idx = index_of("jedi knight Rey a b c d star wars", &["jedi knight", "star wars"]);
        let s = make_snippets(&idx, "d", &["Rey"], 2).unwrap();
        assert_eq!(s[0].highlighted_keyphrases, vec!["jedi knight".to_string()]);
    }

    #[test]
    fn unknown_doc_is_not_found() {
        let idx = index_of("a", &[]);
        assert!(matches!(
            make_snippets(&idx, "zz", &["a"], 3),
            Err(Error::NotFound(_))
        ));
    }
}
