use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::text::Lang;

pub const UNK: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;

/// Shared source/target word vocabulary with `<unk>`, `<s>`, `</s>` and one
/// `<2xx>` tag per target language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub fn lang_tag(lang: &Lang) -> String {
    format!("<2{lang}>")
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Collects whitespace tokens of `texts`, sorted for reproducibility.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, langs: impl IntoIterator<Item = Lang>) -> Self {
        let mut tokens: Vec<String> = vec!["<unk>".into(), "<s>".into(), "</s>".into()];
        let tags: BTreeSet<String> = langs.into_iter().map(|l| lang_tag(&l)).collect();
        tokens.extend(tags);
        let words: BTreeSet<&str> = texts.into_iter().flat_map(str::split_whitespace).collect();
        tokens.extend(words.into_iter().map(str::to_owned));
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or("<unk>", String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// Source ids: the language tag followed by the words.
    pub fn encode_source(&self, text: &str, target_lang: &Lang) -> Vec<usize> {
        let mut ids = vec![self.id(&lang_tag(target_lang))];
        ids.extend(self.encode(text));
        ids
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let xx = Lang::new("xx").unwrap();
        let v = Vocab::build(["b a", "c a"], [xx.clone()]);
        assert_eq!(v.len(), 7);
        assert_eq!(v.encode("a b c"), [4, 5, 6]);
        assert_eq!(v.encode_source("a zz", &xx), [3, 4, UNK]);
        assert_eq!(v.decode(&[4, 6]), "a c");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
