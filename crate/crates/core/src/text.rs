//! Tokenization and keyphrase canonicalization.

/// Splits text on whitespace and punctuation, keeping the original casing.
///
/// A token is a maximal run of alphanumeric characters.
pub fn split_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Lowercased tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    split_tokens(text).into_iter().map(str::to_lowercase).collect()
}

/// Lowercases and collapses internal whitespace. No stemming.
pub fn canonical_keyphrase(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Tokens a keyphrase or name matches against in a document token stream.
pub fn phrase_tokens(phrase: &str) -> Vec<String> {
    tokenize(phrase)
}

/// Number of contiguous occurrences of `phrase` in `tokens` (overlaps allowed).
pub fn count_phrase(tokens: &[String], phrase: &[String]) -> usize {
    match_positions(tokens, phrase).count()
}

/// Start offsets of every contiguous occurrence of `phrase` in `tokens`.
pub fn match_positions<'a>(
    tokens: &'a [String],
    phrase: &'a [String],
) -> impl Iterator<Item = usize> + 'a {
    let n = phrase.len();
    let upper = if n == 0 || n > tokens.len() {
        0
    } else {
        tokens.len() - n + 1
    };
    (0..upper).filter(move |&i| tokens[i..i + n] == *phrase)
}
