use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::tokenize::tokenizer_for;
use super::TextError;
use crate::metrics::AnnotatedReference;

/// Applies canonical composition (NFC).
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// A lowercase ISO-639-1 style language code.
///
/// Codes are two or three ASCII letters. The toy language shipped with the
/// intervention module uses the private code `xx`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lang(String);

impl Lang {
    pub fn new(code: &str) -> Result<Self, TextError> {
        let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(Lang(code.to_owned()))
        } else {
            Err(TextError::InvalidLanguageCode(code.to_owned()))
        }
    }

    pub fn en() -> Self {
        Lang("en".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Lang {
    type Error = TextError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Lang::new(&s)
    }
}

impl From<Lang> for String {
    fn from(l: Lang) -> String {
        l.0
    }
}

impl FromStr for Lang {
    type Err = TextError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lang::new(s)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of languages a corpus reader accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LanguageSet {
    Only(BTreeSet<Lang>),
    Any,
}

impl LanguageSet {
    /// English plus the six target languages of the formality task.
    pub fn task_languages() -> Self {
        Self::of(&["en", "de", "es", "it", "ru", "hi", "ja"])
    }

    pub fn of(codes: &[&str]) -> Self {
        LanguageSet::Only(codes.iter().map(|c| Lang::new(c).expect("static language code")).collect())
    }

    pub fn with(mut self, lang: Lang) -> Self {
        if let LanguageSet::Only(set) = &mut self {
            set.insert(lang);
        }
        self
    }

    pub fn contains(&self, lang: &Lang) -> bool {
        match self {
            LanguageSet::Only(set) => set.contains(lang),
            LanguageSet::Any => true,
        }
    }
}

impl Default for LanguageSet {
    fn default() -> Self {
        Self::task_languages()
    }
}

/// One side of a translation unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    text: String,
    lang: Lang,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<String>,
}

impl Segment {
    /// Builds a segment, normalizing `text` to NFC.
    pub fn new(text: &str, lang: Lang) -> Self {
        Segment { text: nfc(text), lang, domain: None }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    /// Token view using the scoring tokenizer for this segment's language.
    pub fn tokens(&self) -> Vec<String> {
        tokenizer_for(&self.lang).tokenize(&self.text)
    }
}

/// Grammatical formality of a target segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormalityLabel {
    Formal,
    Informal,
    /// Formal and informal renderings coincide.
    Neutral,
    Unknown,
    Conflict,
}

impl FormalityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FormalityLabel::Formal => "formal",
            FormalityLabel::Informal => "informal",
            FormalityLabel::Neutral => "neutral",
            FormalityLabel::Unknown => "unknown",
            FormalityLabel::Conflict => "conflict",
        }
    }

    /// Whether a triplet with this label may enter a training set.
    pub fn is_trainable(self) -> bool {
        matches!(self, FormalityLabel::Formal | FormalityLabel::Informal | FormalityLabel::Neutral)
    }
}

impl fmt::Display for FormalityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormalityLabel {
    type Err = TextError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "formal" | "f" => Ok(FormalityLabel::Formal),
            "informal" | "if" | "i" => Ok(FormalityLabel::Informal),
            "neutral" | "n" => Ok(FormalityLabel::Neutral),
            "unknown" => Ok(FormalityLabel::Unknown),
            "conflict" => Ok(FormalityLabel::Conflict),
            _ => Err(TextError::InvalidLabel(s.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Rule,
    Classifier,
    Gold,
}

/// A finetuning unit: source, target, and the target's formality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriplet")]
pub struct LabeledTriplet {
    pub source: Segment,
    pub target: Segment,
    pub label: FormalityLabel,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct RawTriplet {
    source: Segment,
    target: Segment,
    label: FormalityLabel,
    provenance: Provenance,
}

impl TryFrom<RawTriplet> for LabeledTriplet {
    type Error = TextError;
    fn try_from(r: RawTriplet) -> Result<Self, Self::Error> {
        LabeledTriplet::new(r.source, r.target, r.label, r.provenance)
    }
}

impl LabeledTriplet {
    /// Fails for `Unknown` and `Conflict`, which never enter training data.
    pub fn new(
        source: Segment,
        target: Segment,
        label: FormalityLabel,
        provenance: Provenance,
    ) -> Result<Self, TextError> {
        if !label.is_trainable() {
            return Err(TextError::UntrainableLabel(label));
        }
        Ok(LabeledTriplet { source, target, label, provenance })
    }
}

/// One source with a formal and an informal reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedContrastiveExample {
    pub source: Segment,
    pub formal_ref: AnnotatedReference,
    pub informal_ref: AnnotatedReference,
    pub target_lang: Lang,
    pub domain: String,
}

impl PairedContrastiveExample {
    pub fn new(
        source: Segment,
        formal_ref: AnnotatedReference,
        informal_ref: AnnotatedReference,
        target_lang: Lang,
        domain: impl Into<String>,
    ) -> Result<Self, TextError> {
        if formal_ref.text().trim().is_empty() || informal_ref.text().trim().is_empty() {
            return Err(TextError::EmptyReference);
        }
        Ok(PairedContrastiveExample { source, formal_ref, informal_ref, target_lang, domain: domain.into() })
    }

    /// True when both references are the same plain text.
    pub fn is_neutral(&self) -> bool {
        self.formal_ref.text() == self.informal_ref.text()
    }

    pub fn formal_target(&self) -> Segment {
        Segment::new(self.formal_ref.text(), self.target_lang.clone()).with_domain(self.domain.clone())
    }

    pub fn informal_target(&self) -> Segment {
        Segment::new(self.informal_ref.text(), self.target_lang.clone()).with_domain(self.domain.clone())
    }

    /// The two gold triplets of this pair.
    pub fn triplets(&self) -> [LabeledTriplet; 2] {
        [
            LabeledTriplet {
                source: self.source.clone(),
                target: self.formal_target(),
                label: FormalityLabel::Formal,
                provenance: Provenance::Gold,
            },
            LabeledTriplet {
                source: self.source.clone(),
                target: self.informal_target(),
                label: FormalityLabel::Informal,
                provenance: Provenance::Gold,
            },
        ]
    }
}
