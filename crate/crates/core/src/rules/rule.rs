use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::WordToken;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleLevel {
    Formal,
    Informal,
    /// Counted on the formal side when labeling.
    Ambiguous,
}

impl RuleLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleLevel::Formal => "FORMAL",
            RuleLevel::Informal => "INFORMAL",
            RuleLevel::Ambiguous => "AMBIGUOUS",
        }
    }
}

impl fmt::Display for RuleLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    PronounLexicon,
    VerbAgreementPattern,
    SuffixPattern,
}

/// Morphological feature names a rule may be annotated with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Person,
    Number,
    Form,
    PronType,
}

impl Feature {
    pub fn parse(name: &str) -> Option<Feature> {
        Some(match name {
            "Person" => Feature::Person,
            "Number" => Feature::Number,
            "Form" => Feature::Form,
            "PronType" => Feature::PronType,
            _ => return None,
        })
    }
}

/// Where the anchor token of a match may sit within its sentence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    #[default]
    Any,
    Initial,
    Medial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    /// Any listed form, as a whole word.
    Lexicon { forms: Vec<String> },
    /// A word ending in one of `suffixes` directly before or after one of
    /// `pronouns`. The pronoun is the anchor.
    VerbAgreement { suffixes: Vec<String>, pronouns: Vec<String> },
    /// A word ending in one of `suffixes`.
    Suffix { suffixes: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerRule {
    pub level: RuleLevel,
    pub pattern: Pattern,
    pub position: Position,
    pub case_fold: bool,
    /// Stem characters a suffix match must leave in front of the suffix.
    pub min_stem: usize,
    /// Whole words never matched by a suffix pattern.
    pub except: Vec<String>,
    /// The anchor must be directly followed by this token.
    pub before: Option<String>,
    /// The anchor must directly follow one of these words.
    pub after: Vec<String>,
    pub features: BTreeMap<Feature, String>,
    /// 1-based line in the rule file.
    pub line: usize,
}

impl MarkerRule {
    pub fn kind(&self) -> RuleKind {
        match self.pattern {
            Pattern::Lexicon { .. } => RuleKind::PronounLexicon,
            Pattern::VerbAgreement { .. } => RuleKind::VerbAgreementPattern,
            Pattern::Suffix { .. } => RuleKind::SuffixPattern,
        }
    }

    fn norm<'a>(&self, s: &'a str) -> std::borrow::Cow<'a, str> {
        if self.case_fold {
            std::borrow::Cow::Owned(s.to_lowercase())
        } else {
            std::borrow::Cow::Borrowed(s)
        }
    }

    fn in_list(&self, word: &str, list: &[String]) -> bool {
        let w = self.norm(word);
        list.iter().any(|f| *self.norm(f) == *w)
    }

    fn has_suffix(&self, word: &str, suffixes: &[String]) -> bool {
        let w = self.norm(word);
        suffixes.iter().any(|s| {
            let s = self.norm(s);
            w.ends_with(&*s) && w.chars().count() >= s.chars().count() + self.min_stem
        })
    }

    /// Indices of anchor tokens at which this rule fires.
    pub(crate) fn matches(&self, tokens: &[WordToken<'_>], initial: &[bool]) -> Vec<usize> {
        let mut hits = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            if !tok.is_word() {
                continue;
            }
            let lexical = match &self.pattern {
                Pattern::Lexicon { forms } => self.in_list(tok.text, forms),
                Pattern::Suffix { suffixes } => {
                    self.has_suffix(tok.text, suffixes) && !self.in_list(tok.text, &self.except)
                }
                Pattern::VerbAgreement { suffixes, pronouns } => {
                    self.in_list(tok.text, pronouns) && {
                        let neighbour = |j: Option<usize>| {
                            j.and_then(|j| tokens.get(j))
                                .is_some_and(|t| t.is_word() && self.has_suffix(t.text, suffixes))
                        };
                        neighbour(i.checked_sub(1)) || neighbour(Some(i + 1))
                    }
                }
            };
            if !lexical {
                continue;
            }
            let placed = match self.position {
                Position::Any => true,
                Position::Initial => initial[i],
                Position::Medial => !initial[i],
            };
            let before_ok = self.before.as_ref().is_none_or(|b| tokens.get(i + 1).is_some_and(|t| t.text == b));
            let after_ok = self.after.is_empty()
                || i.checked_sub(1).and_then(|j| tokens.get(j)).is_some_and(|t| self.in_list(t.text, &self.after));
            if placed && before_ok && after_ok {
                hits.push(i);
            }
        }
        hits
    }
}

const SENTENCE_END: &[&str] = &[".", "!", "?", "…", ":", "。", "！", "？"];
const OPENERS: &[&str] = &["\"", "'", "(", "[", "«", "„", "“", "‘", "‚", "¿", "¡", "-", "–", "—"];

/// For each token, whether it starts a sentence. Opening quotes, brackets
/// and inverted marks are skipped when looking back.
pub(crate) fn sentence_initial(tokens: &[WordToken<'_>]) -> Vec<bool> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut at_start = true;
    for t in tokens {
        out.push(at_start);
        if OPENERS.contains(&t.text) {
            continue;
        }
        at_start = SENTENCE_END.contains(&t.text);
    }
    out
}
