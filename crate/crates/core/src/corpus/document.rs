use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::extract::fallback_extract_keyphrases;
use crate::error::{Error, Result};
use crate::text::{canonical_keyphrase, split_tokens};

/// An entity annotation: `entity_id` was tagged on `mention` starting at token `offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    #[serde(rename = "id")]
    pub entity_id: String,
    pub mention: String,
    pub offset: usize,
}

/// A judged unit: tokenized text with its keyphrase occurrences and entity tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Lowercased tokens.
    pub tokens: Vec<String>,
    /// Original-case form of each token, aligned with `tokens`.
    pub original: Vec<String>,
    /// Canonical keyphrase -> occurrence count (always >= 1).
    pub keyphrases: BTreeMap<String, u32>,
    pub entities: Vec<EntityMention>,
}

impl Document {
    /// Builds a document, validating offsets and canonicalizing keyphrases.
    ///
    /// When `keyphrases` is `None` the fallback extractor runs over the text
    /// and the annotated mention spans.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        keyphrases: Option<Vec<(String, u32)>>,
        entities: Vec<EntityMention>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let original: Vec<String> = split_tokens(&text).into_iter().map(String::from).collect();
        let tokens: Vec<String> = original.iter().map(|t| t.to_lowercase()).collect();
        if tokens.is_empty() {
            return Err(Error::Validation(format!("document {id:?} has no tokens")));
        }
        if id.is_empty() {
            return Err(Error::Validation("document id is empty".into()));
        }
        for e in &entities {
            if e.offset >= tokens.len() {
                return Err(Error::Validation(format!(
                    "document {id:?}: entity {:?} offset {} outside {} tokens",
                    e.entity_id,
                    e.offset,
                    tokens.len()
                )));
            }
        }

        let keyphrases = match keyphrases {
            Some(list) => {
                let mut map = BTreeMap::new();
                for (raw, count) in list {
                    let key = canonical_keyphrase(&raw);
                    if key.is_empty() {
                        return Err(Error::Validation(format!(
                            "document {id:?}: empty keyphrase"
                        )));
                    }
                    if count == 0 {
                        return Err(Error::Validation(format!(
                            "document {id:?}: keyphrase {key:?} has zero count"
                        )));
                    }
                    *map.entry(key).or_insert(0) += count;
                }
                map
            }
            None => {
                let mut map = fallback_extract_keyphrases(&original);
                for e in &entities {
                    let key = canonical_keyphrase(&e.mention);
                    if key.is_empty() || map.contains_key(&key) {
                        continue;
                    }
                    let n = entities
                        .iter()
                        .filter(|o| canonical_keyphrase(&o.mention) == key)
                        .count() as u32;
                    map.insert(key, n);
                }
                map
            }
        };

        Ok(Document {
            id,
            text,
            tokens,
            original,
            keyphrases,
            entities,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct annotated entity ids.
    pub fn entity_ids(&self) -> BTreeSet<&str> {
        self.entities.iter().map(|e| e.entity_id.as_str()).collect()
    }

    pub fn is_tagged_with(&self, entity_id: &str) -> bool {
        self.entities.iter().any(|e| e.entity_id == entity_id)
    }

    /// Keyphrase frequencies divided by their sum.
    pub fn normalized_keyphrase_frequency(&self, keyphrase: &str) -> f64 {
        let total: u32 = self.keyphrases.values().sum();
        match self.keyphrases.get(keyphrase) {
            Some(&c) if total > 0 => c as f64 / total as f64,
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_token_list() {
        let err = Document::new("d", " ,; ", Some(vec![]), vec![]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_offsets_past_the_end() {
        let m = EntityMention {
            entity_id: "e".into(),
            mention: "x".into(),
            offset: 3,
        };
        assert!(Document::new("d", "a b c", None, vec![m]).is_err());
    }

    #[test]
    fn canonicalizes_and_merges_keyphrase_keys() {
        let d = Document::new(
            "d",
            "Pro wrestling is pro wrestling",
            Some(vec![("Pro  Wrestling".into(), 1), ("pro wrestling".into(), 1)]),
            vec![],
        )
        .unwrap();
        assert_eq!(d.keyphrases.get("pro wrestling"), Some(&2));
        assert!(Document::new("d", "a", Some(vec![("a".into(), 0)]), vec![]).is_err());
    }

    #[test]
    fn fallback_adds_annotated_spans() {
        let m = EntityMention {
            entity_id: "e1".into(),
            mention: "jedi knight".into(),
            offset: 2,
        };
        let d = Document::new("d", "meet the jedi knight Rey", None, vec![m]).unwrap();
        assert_eq!(d.keyphrases.get("rey"), Some(&1));
        assert_eq!(d.keyphrases.get("jedi knight"), Some(&1));
    }

    #[test]
    fn normalized_frequency_divides_by_total() {
        let d = Document::new(
            "d",
            "x y",
            Some(vec![("x".into(), 1), ("y".into(), 3)]),
            vec![],
        )
        .unwrap();
        assert_eq!(d.normalized_keyphrase_frequency("y"), 0.75);
        assert_eq!(d.normalized_keyphrase_frequency("z"), 0.0);
    }
}
