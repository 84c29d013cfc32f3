use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::document::{Document, EntityMention};
use super::index::CorpusIndex;
use crate::error::{Error, Result};

/// File name of the canonical corpus inside an index directory.
pub const INDEX_CORPUS_FILE: &str = "corpus.jsonl";
/// File name of the summary statistics inside an index directory.
pub const INDEX_STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyphraseRecord {
    pub text: String,
    #[serde(default = "one")]
    pub count: u32,
}

fn one() -> u32 {
    1
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyphrases: Option<Vec<KeyphraseRecord>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<EntityMention>,
}

impl DocumentRecord {
    pub fn into_document(self) -> Result<Document> {
        let kps = self
            .keyphrases
            .map(|v| v.into_iter().map(|k| (k.text, k.count)).collect());
        Document::new(self.id, self.text, kps, self.entities)
    }
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            id: d.id.clone(),
            text: d.text.clone(),
            keyphrases: Some(
                d.keyphrases
                    .iter()
                    .map(|(k, &c)| KeyphraseRecord {
                        text: k.clone(),
                        count: c,
                    })
                    .collect(),
            ),
            entities: d.entities.clone(),
        }
    }
}

/// Parses JSONL documents; blank lines are skipped.
pub fn read_documents<R: Read>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let doc = rec.into_document().map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn ingest_reader<R: Read>(reader: R) -> Result<CorpusIndex> {
    CorpusIndex::build(read_documents(reader)?)
}

/// Loads a JSONL corpus file into an index.
pub fn ingest_corpus(path: impl AsRef<Path>) -> Result<CorpusIndex> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file)
}

/// Writes the documents of `index` as canonical JSONL (ascending id).
pub fn write_corpus<W: Write>(index: &CorpusIndex, mut out: W) -> Result<()> {
    for d in index.documents() {
        let line = serde_json::to_string(&DocumentRecord::from(d))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<corpus writer>", e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexSummary {
    v: u32,
    documents: usize,
    total_tokens: u64,
    distinct_terms: usize,
    distinct_keyphrases: usize,
    distinct_entities: usize,
}

/// Persists an index directory: canonical corpus plus summary statistics.
pub fn save_index_dir(index: &CorpusIndex, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let corpus_path = dir.join(INDEX_CORPUS_FILE);
    let mut buf = Vec::new();
    write_corpus(index, &mut buf)?;
    fs::write(&corpus_path, buf).map_err(|e| Error::io(&corpus_path, e))?;
    let summary = IndexSummary {
        v: 1,
        documents: index.len(),
        total_tokens: index.stats().total_tokens,
        distinct_terms: index.term_postings().len(),
        distinct_keyphrases: index.keyphrase_postings().len(),
        distinct_entities: index.entity_postings().len(),
    };
    let stats_path = dir.join(INDEX_STATS_FILE);
    fs::write(&stats_path, serde_json::to_string_pretty(&summary)? + "\n")
        .map_err(|e| Error::io(&stats_path, e))?;
    Ok(())
}

/// Loads an index from either an index directory or a corpus file.
pub fn load_index(path: impl AsRef<Path>) -> Result<CorpusIndex> {
    let path = path.as_ref();
    if path.is_dir() {
        ingest_corpus(path.join(INDEX_CORPUS_FILE))
    } else {
        ingest_corpus(path)
    }
}
