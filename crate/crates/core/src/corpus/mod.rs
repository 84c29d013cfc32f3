//! Annotated document collections: ingest, indexing, entity-in-context snippets
//! and corpus statistics.

mod document;
mod extract;
mod histogram;
mod index;
mod ingest;
mod snippet;

pub use document::{Document, EntityMention};
pub use extract::fallback_extract_keyphrases;
pub use histogram::{cooccurrence_histogram, histogram_mode};
pub use index::{CollectionStats, CorpusIndex, DocOrd, PhrasePostings};
pub use ingest::{
    ingest_corpus, ingest_reader, load_index, read_documents, save_index_dir, write_corpus,
    DocumentRecord, KeyphraseRecord, INDEX_CORPUS_FILE, INDEX_STATS_FILE,
};
pub use snippet::{make_snippets, EicSnippet, DEFAULT_SNIPPET_WINDOW};
