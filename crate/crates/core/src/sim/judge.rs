use std::collections::BTreeSet;

use crate::corpus::Document;
use crate::metrics::GroundTruth;

/// The simulated user: a document is relevant iff it is tagged with the
/// entity, and on relevant documents every ground-truth keyphrase present is
/// accepted.
pub fn simulated_judge(doc: &Document, truth: &GroundTruth) -> (bool, BTreeSet<String>) {
    let relevant = truth.relevant_docs.contains(&doc.id);
    if !relevant {
        return (false, BTreeSet::new());
    }
    let accepted = doc
        .keyphrases
        .keys()
        .filter(|k| truth.relevant_keyphrases.contains(*k))
        .cloned()
        .collect();
    (true, accepted)
}
