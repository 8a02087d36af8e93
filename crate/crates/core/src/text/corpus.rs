//! Line-oriented corpus I/O.
//!
//! Every input line yields exactly one item: a record or a positioned
//! [`RecordError`]. Readers never skip lines silently, except blank lines.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{nfc, FormalityLabel, Lang, LanguageSet, PairedContrastiveExample, Segment, TextError};
use crate::metrics::AnnotatedReference;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RecordErrorKind {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("line is not valid UTF-8")]
    BadEncoding,
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl RecordErrorKind {
    pub fn name(&self) -> &'static str {
        match self {
            RecordErrorKind::MissingField(_) => "MissingField",
            RecordErrorKind::BadEncoding => "BadEncoding",
            RecordErrorKind::UnknownLanguage(_) => "UnknownLanguage",
            RecordErrorKind::InvalidJson(_) => "InvalidJson",
            RecordErrorKind::InvalidValue(_) => "InvalidValue",
            RecordErrorKind::Io(_) => "Io",
        }
    }
}

/// A per-line read failure. `line` is 1-based.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct RecordError {
    pub line: usize,
    pub kind: RecordErrorKind,
}

impl RecordError {
    pub fn is_io(&self) -> bool {
        matches!(self.kind, RecordErrorKind::Io(_))
    }
}

/// A JSONL record type: the fields it requires and how to build it.
pub trait Schema: Sized {
    const REQUIRED: &'static [&'static str];

    fn from_object(obj: Map<String, Value>, langs: &LanguageSet) -> Result<Self, RecordErrorKind>;
}

/// Raw bitext: `{source, target, lang, formality?, domain?}` plus any other
/// fields, which are carried through unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitextRecord {
    pub source: String,
    pub target: String,
    pub lang: Lang,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formality: Option<FormalityLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl BitextRecord {
    pub fn new(source: &str, target: &str, lang: Lang) -> Self {
        BitextRecord {
            source: nfc(source),
            target: nfc(target),
            lang,
            formality: None,
            domain: None,
            extra: Map::new(),
        }
    }

    pub fn source_segment(&self) -> Segment {
        let s = Segment::new(&self.source, Lang::en());
        match &self.domain {
            Some(d) => s.with_domain(d.clone()),
            None => s,
        }
    }

    pub fn target_segment(&self) -> Segment {
        let s = Segment::new(&self.target, self.lang.clone());
        match &self.domain {
            Some(d) => s.with_domain(d.clone()),
            None => s,
        }
    }

    /// The `id` field if present, as a string.
    pub fn id(&self) -> Option<String> {
        match self.extra.get("id")? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }
}

fn check_lang(obj: &Map<String, Value>, langs: &LanguageSet) -> Result<Lang, RecordErrorKind> {
    let code = obj
        .get("lang")
        .and_then(Value::as_str)
        .ok_or_else(|| RecordErrorKind::InvalidValue("`lang` must be a string".into()))?;
    let lang = Lang::new(code).map_err(|_| RecordErrorKind::UnknownLanguage(code.to_owned()))?;
    if !langs.contains(&lang) {
        return Err(RecordErrorKind::UnknownLanguage(code.to_owned()));
    }
    Ok(lang)
}

fn nfc_fields(obj: &mut Map<String, Value>, fields: &[&str]) {
    for f in fields {
        if let Some(Value::String(s)) = obj.get_mut(*f) {
            *s = nfc(s);
        }
    }
}

fn from_value<T: DeserializeOwned>(obj: Map<String, Value>) -> Result<T, RecordErrorKind> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| RecordErrorKind::InvalidValue(e.to_string()))
}

impl Schema for BitextRecord {
    const REQUIRED: &'static [&'static str] = &["source", "target", "lang"];

    fn from_object(mut obj: Map<String, Value>, langs: &LanguageSet) -> Result<Self, RecordErrorKind> {
        check_lang(&obj, langs)?;
        nfc_fields(&mut obj, &["source", "target"]);
        from_value(obj)
    }
}

/// Wire form of a [`PairedContrastiveExample`]: references use inline
/// `[F]...[/F]` markup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRecord {
    pub source: String,
    pub formal: String,
    pub informal: String,
    pub lang: Lang,
    #[serde(default)]
    pub domain: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PairedRecord {
    pub fn from_example(ex: &PairedContrastiveExample) -> Self {
        PairedRecord {
            source: ex.source.text().to_owned(),
            formal: ex.formal_ref.to_markup(),
            informal: ex.informal_ref.to_markup(),
            lang: ex.target_lang.clone(),
            domain: ex.domain.clone(),
            extra: Map::new(),
        }
    }

    pub fn to_example(&self) -> Result<PairedContrastiveExample, TextError> {
        let formal = AnnotatedReference::parse(&self.formal)?;
        let informal = AnnotatedReference::parse(&self.informal)?;
        PairedContrastiveExample::new(
            Segment::new(&self.source, Lang::en()).with_domain(self.domain.clone()),
            formal,
            informal,
            self.lang.clone(),
            self.domain.clone(),
        )
    }
}

impl Schema for PairedRecord {
    const REQUIRED: &'static [&'static str] = &["source", "formal", "informal", "lang"];

    fn from_object(mut obj: Map<String, Value>, langs: &LanguageSet) -> Result<Self, RecordErrorKind> {
        check_lang(&obj, langs)?;
        nfc_fields(&mut obj, &["source", "formal", "informal"]);
        let rec: PairedRecord = from_value(obj)?;
        rec.to_example().map_err(|e| RecordErrorKind::InvalidValue(e.to_string()))?;
        Ok(rec)
    }
}

/// Lazily parses a JSONL stream into records of type `T`.
pub struct JsonlReader<R, T> {
    reader: R,
    langs: LanguageSet,
    line_no: usize,
    buf: Vec<u8>,
    done: bool,
    _marker: std::marker::PhantomData<fn() -> T>,
}

impl<R: BufRead, T: Schema> JsonlReader<R, T> {
    pub fn new(reader: R, langs: LanguageSet) -> Self {
        JsonlReader { reader, langs, line_no: 0, buf: Vec::new(), done: false, _marker: std::marker::PhantomData }
    }

    fn parse_line(&self, bytes: &[u8]) -> Result<T, RecordErrorKind> {
        let line = std::str::from_utf8(bytes).map_err(|_| RecordErrorKind::BadEncoding)?;
        let value: Value = serde_json::from_str(line).map_err(|e| RecordErrorKind::InvalidJson(e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(RecordErrorKind::InvalidJson("record is not a JSON object".into()));
        };
        for field in T::REQUIRED {
            if !obj.contains_key(*field) {
                return Err(RecordErrorKind::MissingField((*field).to_owned()));
            }
        }
        T::from_object(obj, &self.langs)
    }
}

impl<R: BufRead, T: Schema> Iterator for JsonlReader<R, T> {
    type Item = Result<T, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            self.buf.clear();
            self.line_no += 1;
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(RecordError { line: self.line_no, kind: RecordErrorKind::Io(e.to_string()) }));
                }
            }
            let mut bytes: &[u8] = &self.buf;
            while let [rest @ .., b'\n' | b'\r'] = bytes {
                bytes = rest;
            }
            if bytes.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let line = self.line_no;
            return Some(self.parse_line(bytes).map_err(|kind| RecordError { line, kind }));
        }
    }
}

/// Opens `path` and streams records of type `T`.
pub fn read_jsonl_corpus<T: Schema>(
    path: impl AsRef<Path>,
    langs: LanguageSet,
) -> io::Result<JsonlReader<BufReader<File>, T>> {
    Ok(JsonlReader::new(BufReader::new(File::open(path)?), langs))
}

/// Streams `source<TAB>target` lines as bitext records in language `lang`.
pub fn read_tsv_bitext<R: BufRead>(reader: R, lang: Lang) -> impl Iterator<Item = Result<BitextRecord, RecordError>> {
    let mut line_no = 0;
    let mut lines = reader.split(b'\n');
    std::iter::from_fn(move || loop {
        line_no += 1;
        let raw = match lines.next()? {
            Ok(raw) => raw,
            Err(e) => return Some(Err(RecordError { line: line_no, kind: RecordErrorKind::Io(e.to_string()) })),
        };
        let line = match String::from_utf8(raw) {
            Ok(l) => l,
            Err(_) => return Some(Err(RecordError { line: line_no, kind: RecordErrorKind::BadEncoding })),
        };
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        return Some(match line.split_once('\t') {
            Some((src, tgt)) => Ok(BitextRecord::new(src, tgt, lang.clone())),
            None => Err(RecordError { line: line_no, kind: RecordErrorKind::MissingField("target".into()) }),
        });
    })
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, records: impl IntoIterator<Item = T>) -> io::Result<usize> {
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(input: &[u8]) -> Vec<Result<BitextRecord, RecordError>> {
        JsonlReader::new(Cursor::new(input.to_vec()), LanguageSet::default()).collect()
    }

    #[test]
    fn empty_file_is_empty_stream() {
        assert!(read(b"").is_empty());
    }

    #[test]
    fn order_preserved() {
        let input = br#"{"source":"a","target":"x","lang":"de"}
{"source":"b","target":"y","lang":"es"}
{"source":"c","target":"z","lang":"it"}
"#;
        let recs: Vec<_> = read(input).into_iter().map(Result::unwrap).collect();
        let srcs: Vec<_> = recs.iter().map(|r| r.source.as_str()).collect();
        assert_eq!(srcs, ["a", "b", "c"]);
    }

    #[test]
    fn malformed_line_is_positioned() {
        let input = br#"{"source":"a","target":"x","lang":"de"}
{"source":"b","lang":"de"}
{"source":"c","target":"z","lang":"de"}"#;
        let items = read(input);
        assert_eq!(items.len(), 3);
        assert_eq!(items.iter().filter(|r| r.is_ok()).count(), 2);
        let err = items[1].as_ref().unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.kind, RecordErrorKind::MissingField("target".into()));
    }

    #[test]
    fn encoding_and_language_errors() {
        let mut input = b"{\"source\":\"a\",\"target\":\"\xff\",\"lang\":\"de\"}\n".to_vec();
        input.extend_from_slice(b"{\"source\":\"a\",\"target\":\"b\",\"lang\":\"fr\"}\n");
        input.extend_from_slice(b"not json\n");
        let items = read(&input);
        let kinds: Vec<_> = items.iter().map(|r| r.as_ref().unwrap_err().kind.name()).collect();
        assert_eq!(kinds, ["BadEncoding", "UnknownLanguage", "InvalidJson"]);
    }

    #[test]
    fn unknown_fields_round_trip() {
        let line = r#"{"source":"a","target":"b","lang":"de","id":7,"score":0.5}"#;
        let rec = read(line.as_bytes()).remove(0).unwrap();
        assert_eq!(rec.id().as_deref(), Some("7"));
        let out = serde_json::to_value(&rec).unwrap();
        let orig: Value = serde_json::from_str(line).unwrap();
        assert_eq!(out, orig);
    }

    #[test]
    fn ingestion_normalizes_nfc() {
        let rec = read("{\"source\":\"a\",\"target\":\"mo\u{0308}gen\",\"lang\":\"de\"}".as_bytes()).remove(0).unwrap();
        assert_eq!(rec.target, "mögen");
    }

    #[test]
    fn tsv_import() {
        let items: Vec<_> =
            read_tsv_bitext(Cursor::new("Hello\tHallo\nbroken line\n\nBye\tTschüss\n"), Lang::new("de").unwrap())
                .collect();
        assert_eq!(items.len(), 3);
        assert_eq!(items[0].as_ref().unwrap().target, "Hallo");
        assert_eq!(items[1].as_ref().unwrap_err().line, 2);
        assert_eq!(items[2].as_ref().unwrap().source, "Bye");
    }

    #[test]
    fn paired_record_validates_markup() {
        let ok = r#"{"source":"Do you like Legos?","formal":"[F]Mögen Sie[/F] Legos?","informal":"[F]Magst du[/F] Legos?","lang":"de","domain":"topical_chat"}"#;
        let bad = r#"{"source":"x","formal":"[F]unclosed","informal":"y","lang":"de"}"#;
        let items: Vec<Result<PairedRecord, _>> =
            JsonlReader::new(Cursor::new(format!("{ok}\n{bad}\n")), LanguageSet::default()).collect();
        let ex = items[0].as_ref().unwrap().to_example().unwrap();
        assert_eq!(ex.formal_ref.text(), "Mögen Sie Legos?");
        assert_eq!(items[1].as_ref().unwrap_err().kind.name(), "InvalidValue");
    }
}
