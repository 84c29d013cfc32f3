use std::collections::BTreeMap;

const MAX_PHRASE_TOKENS: usize = 4;

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

/// Naive keyphrase extraction for records that carry no keyphrase annotations.
///
/// Every maximal run of capitalized tokens becomes one keyphrase; runs longer
/// than four tokens are cut into consecutive chunks of at most four. An
/// immediately repeated token starts a new run.
pub fn fallback_extract_keyphrases<S: AsRef<str>>(original: &[S]) -> BTreeMap<String, u32> {
    let mut out = BTreeMap::new();
    let mut run: Vec<String> = Vec::new();
    let mut flush = |run: &mut Vec<String>| {
        for chunk in run.chunks(MAX_PHRASE_TOKENS) {
            *out.entry(chunk.join(" ")).or_insert(0) += 1;
        }
        run.clear();
    };
    for tok in original {
        let tok = tok.as_ref();
        if is_capitalized(tok) {
            let lower = tok.to_lowercase();
            if run.last() == Some(&lower) {
                flush(&mut run);
            }
            run.push(lower);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    out
}
