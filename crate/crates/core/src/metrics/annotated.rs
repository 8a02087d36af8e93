use std::fmt;

use serde::{Deserialize, Serialize};

const OPEN: &str = "[F]";
const CLOSE: &str = "[/F]";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MarkupError {
    #[error("`[/F]` at byte {0} has no opening tag")]
    UnopenedClose(usize),
    #[error("`[F]` at byte {0} is never closed")]
    Unclosed(usize),
    #[error("nested `[F]` at byte {0}")]
    Nested(usize),
    #[error("empty span at byte {0}")]
    EmptySpan(usize),
    #[error("span {0:?} is out of bounds, unordered or not on a character boundary")]
    BadSpan((usize, usize)),
}

/// A reference translation with its contrastive formality phrases marked as
/// byte spans into the plain text.
///
/// On the wire a reference is written with inline markup:
///
/// ```
/// use fsmt_core::metrics::AnnotatedReference;
///
/// let r = AnnotatedReference::parse("[F]Mögen Sie[/F] Legos?").unwrap();
/// assert_eq!(r.text(), "Mögen Sie Legos?");
/// assert_eq!(r.spans(), &[(0, 10)]);
/// assert_eq!(r.to_markup(), "[F]Mögen Sie[/F] Legos?");
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AnnotatedReference {
    text: String,
    spans: Vec<(usize, usize)>,
}

impl AnnotatedReference {
    pub fn parse(markup: &str) -> Result<Self, MarkupError> {
        let mut text = String::with_capacity(markup.len());
        let mut spans = Vec::new();
        let mut open: Option<(usize, usize)> = None; // (markup pos, text pos)
        let mut rest = markup;
        let mut pos = 0;
        while !rest.is_empty() {
            if rest.starts_with(OPEN) {
                if open.is_some() {
                    return Err(MarkupError::Nested(pos));
                }
                open = Some((pos, text.len()));
                rest = &rest[OPEN.len()..];
                pos += OPEN.len();
            } else if rest.starts_with(CLOSE) {
                let (at, start) = open.take().ok_or(MarkupError::UnopenedClose(pos))?;
                if start == text.len() {
                    return Err(MarkupError::EmptySpan(at));
                }
                spans.push((start, text.len()));
                rest = &rest[CLOSE.len()..];
                pos += CLOSE.len();
            } else {
                let c = rest.chars().next().expect("non-empty");
                text.push(c);
                rest = &rest[c.len_utf8()..];
                pos += c.len_utf8();
            }
        }
        if let Some((at, _)) = open {
            return Err(MarkupError::Unclosed(at));
        }
        Ok(AnnotatedReference { text, spans })
    }

    /// Builds a reference from plain text and sorted, disjoint, non-empty spans.
    pub fn new(text: impl Into<String>, spans: Vec<(usize, usize)>) -> Result<Self, MarkupError> {
        let text = text.into();
        let mut prev_end = 0;
        for &(s, e) in &spans {
            let ok = s >= prev_end && s < e && e <= text.len() && text.is_char_boundary(s) && text.is_char_boundary(e);
            if !ok {
                return Err(MarkupError::BadSpan((s, e)));
            }
            prev_end = e;
        }
        Ok(AnnotatedReference { text, spans })
    }

    pub fn plain(text: impl Into<String>) -> Self {
        AnnotatedReference { text: text.into(), spans: Vec::new() }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn to_markup(&self) -> String {
        let mut out = String::with_capacity(self.text.len() + 7 * self.spans.len());
        let mut last = 0;
        for &(s, e) in &self.spans {
            out.push_str(&self.text[last..s]);
            out.push_str(OPEN);
            out.push_str(&self.text[s..e]);
            out.push_str(CLOSE);
            last = e;
        }
        out.push_str(&self.text[last..]);
        out
    }
}

impl TryFrom<String> for AnnotatedReference {
    type Error = MarkupError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        AnnotatedReference::parse(&s)
    }
}

impl From<AnnotatedReference> for String {
    fn from(r: AnnotatedReference) -> String {
        r.to_markup()
    }
}

impl fmt::Display for AnnotatedReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_markup())
    }
}

/// The contrastive phrases of a reference, in text order.
pub fn phi(reference: &AnnotatedReference) -> Vec<String> {
    reference.spans.iter().map(|&(s, e)| reference.text[s..e].to_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_examples() {
        let r = AnnotatedReference::parse("[F]Mögen Sie[/F] Legos?").unwrap();
        assert_eq!(phi(&r), ["Mögen Sie"]);
        assert!(phi(&AnnotatedReference::parse("Legos?").unwrap()).is_empty());
        let two =
            AnnotatedReference::parse("[F]Mögen Sie[/F] Legos? [F]Haben Sie[/F] jemals als Kind mit ihnen gespielt?")
                .unwrap();
        assert_eq!(phi(&two), ["Mögen Sie", "Haben Sie"]);
    }

    #[test]
    fn markup_errors() {
        assert_eq!(AnnotatedReference::parse("a [/F]"), Err(MarkupError::UnopenedClose(2)));
        assert_eq!(AnnotatedReference::parse("[F]a"), Err(MarkupError::Unclosed(0)));
        assert_eq!(AnnotatedReference::parse("[F]a [F]b[/F][/F]"), Err(MarkupError::Nested(5)));
        assert_eq!(AnnotatedReference::parse("x [F][/F]"), Err(MarkupError::EmptySpan(2)));
    }

    #[test]
    fn span_validation() {
        assert!(AnnotatedReference::new("abc", vec![(0, 1), (1, 3)]).is_ok());
        assert!(AnnotatedReference::new("abc", vec![(1, 3), (0, 1)]).is_err());
        assert!(AnnotatedReference::new("abc", vec![(0, 4)]).is_err());
        assert!(AnnotatedReference::new("ö", vec![(0, 1)]).is_err());
    }

    proptest! {
        #[test]
        fn markup_round_trip(parts in prop::collection::vec(("[a-zäöü ]{0,6}", "[a-zäöü ]{1,6}"), 0..5), tail in "[a-z ]{0,5}") {
            let mut markup = String::new();
            for (plain, marked) in &parts {
                markup.push_str(plain);
                markup.push_str("[F]");
                markup.push_str(marked);
                markup.push_str("[/F]");
            }
            markup.push_str(&tail);
            let r = AnnotatedReference::parse(&markup).unwrap();
            prop_assert_eq!(r.to_markup(), markup);
            prop_assert_eq!(phi(&r).len(), parts.len());
            let stripped = r.to_markup().replace("[F]", "").replace("[/F]", "");
            prop_assert_eq!(stripped, r.text());
        }
    }
}
