//! Non-destructive tokenizer.
//!
//! Tokens are maximal runs of alphanumeric characters or single
//! non-whitespace, non-alphanumeric characters. Whitespace is never part of a
//! token, so the original text is recovered by interleaving tokens with the
//! gaps between them.

use serde::{Deserialize, Serialize};

/// A token with character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Token positions in both byte and character coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TokenPos {
    pub byte_start: usize,
    pub byte_end: usize,
    pub char_start: usize,
    pub char_end: usize,
}

impl TokenPos {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.byte_start..self.byte_end]
    }
}

pub(crate) fn token_positions(text: &str) -> Vec<TokenPos> {
    let mut out = Vec::new();
    let mut run: Option<TokenPos> = None;
    for (char_idx, (byte_idx, ch)) in text.char_indices().enumerate() {
        let byte_end = byte_idx + ch.len_utf8();
        if ch.is_alphanumeric() {
            match run.as_mut() {
                Some(r) => {
                    r.byte_end = byte_end;
                    r.char_end = char_idx + 1;
                }
                None => {
                    run = Some(TokenPos {
                        byte_start: byte_idx,
                        byte_end,
                        char_start: char_idx,
                        char_end: char_idx + 1,
                    })
                }
            }
            continue;
        }
        if let Some(r) = run.take() {
            out.push(r);
        }
        if !ch.is_whitespace() {
            out.push(TokenPos {
                byte_start: byte_idx,
                byte_end,
                char_start: char_idx,
                char_end: char_idx + 1,
            });
        }
    }
    if let Some(r) = run {
        out.push(r);
    }
    out
}

pub fn tokenize(text: &str) -> Vec<Token> {
    token_positions(text)
        .into_iter()
        .map(|p| Token {
            text: p.text(text).to_string(),
            start: p.char_start,
            end: p.char_end,
        })
        .collect()
}

/// Rebuilds the source from its tokens and the untouched gaps between them.
pub fn reconstruct(text: &str, tokens: &[Token]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for t in tokens {
        out.extend(&chars[cursor..t.start]);
        out.push_str(&t.text);
        cursor = t.end;
    }
    out.extend(&chars[cursor..]);
    out
}
