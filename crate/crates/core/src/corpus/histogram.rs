use std::collections::BTreeMap;

use super::index::CorpusIndex;
use crate::metrics::GroundTruth;

/// Distribution of co-occurring relevant keyphrases per relevant document.
///
/// For every ground-truth relevant document, counts `|K_d ∩ K_e|` over the
/// whole document, then returns the fraction of documents in each bucket.
pub fn cooccurrence_histogram<'a, I>(index: &CorpusIndex, truths: I) -> BTreeMap<usize, f64>
where
    I: IntoIterator<Item = &'a GroundTruth>,
{
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for truth in truths {
        for doc_id in &truth.relevant_docs {
            let Some(doc) = index.get(doc_id) else { continue };
            let n = doc
                .keyphrases
                .keys()
                .filter(|k| truth.relevant_keyphrases.contains(*k))
                .count();
            *counts.entry(n).or_insert(0) += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|(bucket, c)| (bucket, c as f64 / total as f64))
        .collect()
}

/// Bucket with the largest share; the smallest bucket wins ties.
pub fn histogram_mode(hist: &BTreeMap<usize, f64>) -> Option<usize> {
    hist.iter()
        .fold(None, |best: Option<(usize, f64)>, (&b, &f)| match best {
            Some((_, bf)) if bf >= f => best,
            _ => Some((b, f)),
        })
        .map(|(b, _)| b)
}
