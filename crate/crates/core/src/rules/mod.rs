//! Rule-based grammatical formality labeling for German, Spanish, Italian
//! and Russian.
//!
//! A [`RuleSet`] is loaded from a plain-text rule file (see the guide for the
//! grammar) and applied to a target-language [`Segment`]. Formal and
//! ambiguous rules vote for `Formal`, informal rules for `Informal`; both
//! sides firing gives `Conflict`, neither gives `Unknown`.
//!
//! ```
//! use fsmt_core::rules::{builtin, label_formality};
//! use fsmt_core::text::{FormalityLabel, Lang, Segment};
//!
//! let de = builtin(&Lang::new("de").unwrap()).unwrap();
//! let seg = Segment::new("Woher kommen Sie?", Lang::new("de").unwrap());
//! assert_eq!(label_formality(&seg, &de).unwrap(), FormalityLabel::Formal);
//! ```

mod batch;
mod parse;
mod rule;

use std::path::Path;

pub use batch::{batch_label, BatchLabeler, LabelCounts, Labelable};
pub use rule::{Feature, MarkerRule, Pattern, Position, RuleKind, RuleLevel};

use crate::text::{word_tokens, FormalityLabel, Lang, RecordError, Segment};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RulesError {
    #[error("rule file line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("rule file line {line}: unknown feature `{name}`")]
    UnknownFeature { line: usize, name: String },
    #[error("rule set needs at least one {0} rule")]
    Incomplete(&'static str),
    #[error("no rule set for language `{0}`")]
    UnsupportedLanguage(Lang),
    #[error("segment language `{found}` does not match rule set language `{expected}`")]
    LanguageMismatch { expected: Lang, found: Lang },
    #[error("cannot read rule file: {0}")]
    Io(String),
    #[error(transparent)]
    Record(#[from] RecordError),
}

impl RulesError {
    pub fn name(&self) -> &'static str {
        match self {
            RulesError::Parse { .. } => "ParseError",
            RulesError::UnknownFeature { .. } => "UnknownFeature",
            RulesError::Incomplete(_) => "IncompleteRuleSet",
            RulesError::UnsupportedLanguage(_) => "UnsupportedLanguage",
            RulesError::LanguageMismatch { .. } => "LanguageMismatch",
            RulesError::Io(_) => "Io",
            RulesError::Record(e) => e.kind.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    lang: Lang,
    formal: Vec<MarkerRule>,
    informal: Vec<MarkerRule>,
    ambiguous: Vec<MarkerRule>,
}

impl RuleSet {
    pub fn new(lang: Lang, rules: Vec<MarkerRule>) -> Result<Self, RulesError> {
        let mut rs = RuleSet { lang, formal: vec![], informal: vec![], ambiguous: vec![] };
        for r in rules {
            match r.level {
                RuleLevel::Formal => rs.formal.push(r),
                RuleLevel::Informal => rs.informal.push(r),
                RuleLevel::Ambiguous => rs.ambiguous.push(r),
            }
        }
        if rs.formal.is_empty() {
            return Err(RulesError::Incomplete("FORMAL"));
        }
        if rs.informal.is_empty() {
            return Err(RulesError::Incomplete("INFORMAL"));
        }
        Ok(rs)
    }

    pub fn parse(src: &str) -> Result<Self, RulesError> {
        parse::parse_rules(src)
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn formal_rules(&self) -> &[MarkerRule] {
        &self.formal
    }

    pub fn informal_rules(&self) -> &[MarkerRule] {
        &self.informal
    }

    pub fn ambiguous_rules(&self) -> &[MarkerRule] {
        &self.ambiguous
    }

    pub fn rules(&self) -> impl Iterator<Item = &MarkerRule> {
        self.formal.iter().chain(&self.informal).chain(&self.ambiguous)
    }
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<RuleSet, RulesError> {
    let src = std::fs::read_to_string(path.as_ref())
        .map_err(|e| RulesError::Io(format!("{}: {e}", path.as_ref().display())))?;
    RuleSet::parse(&src)
}

pub const BUILTIN_RULES: &[(&str, &str)] = &[
    ("de", include_str!("../../rules/de.rules")),
    ("es", include_str!("../../rules/es.rules")),
    ("it", include_str!("../../rules/it.rules")),
    ("ru", include_str!("../../rules/ru.rules")),
];

/// The shipped rule set for `lang`.
pub fn builtin(lang: &Lang) -> Result<RuleSet, RulesError> {
    let (_, src) = BUILTIN_RULES
        .iter()
        .find(|(code, _)| *code == lang.as_str())
        .ok_or_else(|| RulesError::UnsupportedLanguage(lang.clone()))?;
    Ok(RuleSet::parse(src).expect("shipped rule files parse"))
}

/// One rule firing on one token.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RuleMatch {
    pub level: RuleLevel,
    /// Line of the rule in its file.
    pub rule_line: usize,
    /// Byte range of the anchor token.
    pub span: (usize, usize),
    pub text: String,
}

/// Every rule firing in `segment`, ordered by position then rule line.
pub fn explain(segment: &Segment, ruleset: &RuleSet) -> Result<Vec<RuleMatch>, RulesError> {
    if segment.lang() != ruleset.lang() {
        return Err(RulesError::LanguageMismatch { expected: ruleset.lang().clone(), found: segment.lang().clone() });
    }
    let tokens = word_tokens(segment.text());
    let initial = rule::sentence_initial(&tokens);
    let mut out = Vec::new();
    for r in ruleset.rules() {
        for i in r.matches(&tokens, &initial) {
            let t = &tokens[i];
            out.push(RuleMatch { level: r.level, rule_line: r.line, span: (t.start, t.end), text: t.text.to_owned() });
        }
    }
    out.sort_by_key(|m| (m.span, m.rule_line));
    Ok(out)
}

pub fn label_from_matches(matches: &[RuleMatch]) -> FormalityLabel {
    let formal = matches.iter().any(|m| m.level != RuleLevel::Informal);
    let informal = matches.iter().any(|m| m.level == RuleLevel::Informal);
    match (formal, informal) {
        (true, false) => FormalityLabel::Formal,
        (false, true) => FormalityLabel::Informal,
        (true, true) => FormalityLabel::Conflict,
        (false, false) => FormalityLabel::Unknown,
    }
}

/// Labels `segment` as `Formal`, `Informal`, `Conflict` or `Unknown`.
pub fn label_formality(segment: &Segment, ruleset: &RuleSet) -> Result<FormalityLabel, RulesError> {
    Ok(label_from_matches(&explain(segment, ruleset)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label(text: &str, lang: &str) -> FormalityLabel {
        let lang = Lang::new(lang).unwrap();
        label_formality(&Segment::new(text, lang.clone()), &builtin(&lang).unwrap()).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(label("Woher kommen Sie?", "de"), FormalityLabel::Formal);
        assert_eq!(label("Woher kommst du?", "de"), FormalityLabel::Informal);
        assert_eq!(label("¿Cuándo nació?", "es"), FormalityLabel::Formal);
        assert_eq!(label("Я иду домой.", "ru"), FormalityLabel::Unknown);
        assert_eq!(label("Вы знаете, что ты сказал?", "ru"), FormalityLabel::Conflict);
    }

    #[test]
    fn german_capitalisation() {
        assert_eq!(label("Ich glaube, sie kommt morgen.", "de"), FormalityLabel::Unknown);
        assert_eq!(label("Sie ist meine Schwester.", "de"), FormalityLabel::Unknown);
        assert_eq!(label("Sie kommen morgen, oder?", "de"), FormalityLabel::Formal);
        assert_eq!(label("Kann ich Ihnen helfen?", "de"), FormalityLabel::Formal);
        let amb = explain(
            &Segment::new("Sie kommen morgen.", Lang::new("de").unwrap()),
            &builtin(&Lang::new("de").unwrap()).unwrap(),
        )
        .unwrap();
        assert!(amb.iter().all(|m| m.level == RuleLevel::Ambiguous));
    }

    #[test]
    fn shipped_files() {
        let de = builtin(&Lang::new("de").unwrap()).unwrap();
        assert!(de.formal_rules().iter().any(|r| matches!(
            &r.pattern,
            Pattern::Lexicon { forms } if forms.iter().any(|f| f == "Sie")
        )));
        assert_eq!(label("Voi siete qui.", "it"), FormalityLabel::Formal);
        assert_eq!(label("Lei è molto gentile.", "it"), FormalityLabel::Formal);
        assert_eq!(label("Come stai tu?", "it"), FormalityLabel::Informal);
        assert!(matches!(builtin(&Lang::new("hi").unwrap()), Err(RulesError::UnsupportedLanguage(_))));
    }

    #[test]
    fn language_must_match() {
        let de = builtin(&Lang::new("de").unwrap()).unwrap();
        let seg = Segment::new("Tú", Lang::new("es").unwrap());
        assert!(matches!(label_formality(&seg, &de), Err(RulesError::LanguageMismatch { .. })));
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rules");
        std::fs::write(&p, "LANG de\nFORMAL PP=Sie\nINFORMAL PP=du\n").unwrap();
        assert_eq!(load_rules(&p).unwrap().formal_rules().len(), 1);
        assert!(matches!(load_rules(dir.path().join("missing")), Err(RulesError::Io(_))));
    }

    const DE_WORDS: &[&str] = &["Sie", "sie", "du", "Du", "kommen", "kommst", "Ihnen", "ich", "ist", ".", "?", ","];

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(DE_WORDS), 0..10).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn formal_plus_informal_sentence_conflicts(s in sentence()) {
            let de = builtin(&Lang::new("de").unwrap()).unwrap();
            let lang = Lang::new("de").unwrap();
            if label_formality(&Segment::new(&s, lang.clone()), &de).unwrap() == FormalityLabel::Formal {
                let joined = format!("{s}. Und du?");
                prop_assert_eq!(
                    label_formality(&Segment::new(&joined, lang), &de).unwrap(),
                    FormalityLabel::Conflict
                );
            }
        }

        #[test]
        fn label_is_deterministic(s in sentence()) {
            let de = builtin(&Lang::new("de").unwrap()).unwrap();
            let seg = Segment::new(&s, Lang::new("de").unwrap());
            prop_assert_eq!(label_formality(&seg, &de).unwrap(), label_formality(&seg, &de).unwrap());
        }
    }
}
