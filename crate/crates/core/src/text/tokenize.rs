//! Tokenizers.
//!
//! [`tokenize_13a`] follows the `13a` rule set used by BLEU tooling. The
//! character classes are listed in the book chapter on tokenization.

use std::sync::LazyLock;

use regex::Regex;

use super::Lang;

/// Pluggable tokenizer used by the scorers.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Tokenizer13a;

#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for Tokenizer13a {
    fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize_13a(text)
    }
    fn name(&self) -> &'static str {
        "13a"
    }
}

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        whitespace_tokenize(text)
    }
    fn name(&self) -> &'static str {
        "whitespace"
    }
}

/// Japanese has no morphological analyzer here and falls back to whitespace.
pub fn tokenizer_for(lang: &Lang) -> &'static dyn Tokenizer {
    match lang.as_str() {
        "ja" => &WhitespaceTokenizer,
        _ => &Tokenizer13a,
    }
}

pub fn tokenizer_by_name(name: &str) -> Option<&'static dyn Tokenizer> {
    match name {
        "13a" => Some(&Tokenizer13a),
        "none" | "whitespace" => Some(&WhitespaceTokenizer),
        _ => None,
    }
}

static RULES_13A: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        // ASCII symbols except - . , and '
        (Regex::new(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])").unwrap(), " $1 "),
        // period and comma unless preceded by a digit
        (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
        // period and comma unless followed by a digit
        (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
        // dash preceded by a digit
        (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
    ]
});

pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line: String = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .collect();
    if line.contains('&') {
        line = line.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RULES_13A.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    whitespace_tokenize(&line)
}

pub fn whitespace_tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// A word or punctuation token with its byte offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordToken<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl WordToken<'_> {
    pub fn is_word(&self) -> bool {
        self.text.chars().next().is_some_and(is_word_char)
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '¿' | '¡'
                | '«'
                | '»'
                | '„'
                | '“'
                | '”'
                | '‘'
                | '’'
                | '‚'
                | '…'
                | '–'
                | '—'
                | '·'
                | '、'
                | '。'
                | '！'
                | '？'
                | '「'
                | '」'
                | '।'
        )
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !is_punct(c)
}

/// Splits text into maximal runs of word characters and single punctuation
/// characters. Used by the rule labeler, which needs word boundaries that do
/// not depend on ASCII punctuation classes.
pub fn word_tokens(text: &str) -> Vec<WordToken<'_>> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = word_start.take() {
            out.push(WordToken { text: &text[s..i], start: s, end: i });
        }
        if !c.is_whitespace() {
            let e = i + c.len_utf8();
            out.push(WordToken { text: &text[i..e], start: i, end: e });
        }
    }
    if let Some(s) = word_start {
        out.push(WordToken { text: &text[s..], start: s, end: text.len() });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<String> {
        tokenize_13a(s)
    }

    #[test]
    fn examples_13a() {
        assert!(t("").is_empty());
        assert_eq!(t("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(t("Magst du Legos?"), ["Magst", "du", "Legos", "?"]);
    }

    #[test]
    fn digits_keep_separators() {
        assert_eq!(t("It costs 1,000.50 dollars."), ["It", "costs", "1,000.50", "dollars", "."]);
        assert_eq!(t("pages 3-4"), ["pages", "3", "-", "4"]);
        assert_eq!(t("well-known"), ["well-known"]);
        assert_eq!(t("that's"), ["that's"]);
    }

    #[test]
    fn entities_and_unicode_spaces() {
        assert_eq!(t("a &amp; b"), ["a", "&", "b"]);
        assert_eq!(t("x\u{00a0}y\u{2003}z"), ["x", "y", "z"]);
        assert_eq!(t("<skipped> ok"), ["ok"]);
    }

    #[test]
    fn whitespace_examples() {
        assert_eq!(whitespace_tokenize("a b"), ["a", "b"]);
        assert_eq!(whitespace_tokenize("a  b "), ["a", "b"]);
        assert!(whitespace_tokenize("").is_empty());
    }

    #[test]
    fn word_tokens_split_punctuation() {
        let toks: Vec<_> = word_tokens("¿Cuándo nació?").into_iter().map(|t| t.text).collect();
        assert_eq!(toks, ["¿", "Cuándo", "nació", "?"]);
        let toks: Vec<_> = word_tokens("dell'anno, sì").into_iter().map(|t| t.text).collect();
        assert_eq!(toks, ["dell", "'", "anno", ",", "sì"]);
    }

    #[test]
    fn not_idempotent_around_digits() {
        // a known property of 13a: re-tokenizing can split ".0" further
        assert_eq!(tokenize_13a("..0"), [".", ".0"]);
        assert_eq!(tokenize_13a(". .0"), [".", ".", "0"]);
    }

    proptest! {
        #[test]
        fn idempotent_13a_without_digits(s in "[ a-zA-Z.,;:!?&'\"()\\-<>/äöüßñ]{0,40}") {
            let once = tokenize_13a(&s);
            let twice = tokenize_13a(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_nonempty_and_spaceless(s in "\\PC{0,30}") {
            for t in tokenize_13a(&s) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn extra_spacing_is_ignored(words in prop::collection::vec("[a-z0-9.,!?]{1,6}", 0..6)) {
            prop_assert_eq!(tokenize_13a(&words.join(" ")), tokenize_13a(&words.join("   ")));
        }
    }
}
