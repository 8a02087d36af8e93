use std::collections::BTreeMap;

use super::rule::{Feature, MarkerRule, Pattern, Position, RuleLevel};
use super::{RuleSet, RulesError};
use crate::text::Lang;

struct Word<'a> {
    text: &'a str,
    column: usize,
}

fn split_words(line: &str) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    let mut col = 0;
    let mut start_col = 0;
    for (i, c) in line.char_indices() {
        col += 1;
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Word { text: &line[s..i], column: start_col });
            }
        } else if start.is_none() {
            start = Some(i);
            start_col = col;
        }
    }
    if let Some(s) = start {
        out.push(Word { text: &line[s..], column: start_col });
    }
    out
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> RulesError {
    RulesError::Parse { line, column, message: message.into() }
}

fn list(w: &Word<'_>, value: &str, line: usize) -> Result<Vec<String>, RulesError> {
    let items: Vec<String> = value.split('|').map(str::to_owned).collect();
    if items.iter().any(String::is_empty) {
        return Err(err(line, w.column, format!("empty alternative in `{}`", w.text)));
    }
    Ok(items)
}

fn suffixes(w: &Word<'_>, value: &str, line: usize) -> Result<Vec<String>, RulesError> {
    list(w, value, line)?
        .into_iter()
        .map(|s| match s.strip_prefix('-') {
            Some(rest) if !rest.is_empty() => Ok(rest.to_owned()),
            _ => Err(err(line, w.column, format!("suffix `{s}` must look like `-abc`"))),
        })
        .collect()
}

fn parse_rule(words: &[Word<'_>], line: usize) -> Result<MarkerRule, RulesError> {
    let level = match words[0].text {
        "FORMAL" => RuleLevel::Formal,
        "INFORMAL" => RuleLevel::Informal,
        "AMBIGUOUS" => RuleLevel::Ambiguous,
        other => {
            return Err(err(
                line,
                words[0].column,
                format!("expected FORMAL, INFORMAL, AMBIGUOUS or LANG, found `{other}`"),
            ))
        }
    };
    let mut rest = &words[1..];
    let Some(head) = rest.first() else {
        return Err(err(line, words[0].column + words[0].text.len(), "missing pattern"));
    };
    let pattern = if let Some(forms) = head.text.strip_prefix("PP=") {
        rest = &rest[1..];
        Pattern::Lexicon { forms: list(head, forms, line)? }
    } else if head.text == "SUFFIX" {
        let Some(spec) = rest.get(1) else {
            return Err(err(line, head.column, "SUFFIX needs `verb:` or `word:`"));
        };
        if let Some(v) = spec.text.strip_prefix("verb:") {
            let sfx = suffixes(spec, v, line)?;
            let pron = rest.get(2).and_then(|w| w.text.strip_prefix("PP=").map(|p| (w, p)));
            let Some((pw, p)) = pron else {
                return Err(err(line, spec.column, "`SUFFIX verb:` must be followed by `PP=`"));
            };
            rest = &rest[3..];
            Pattern::VerbAgreement { suffixes: sfx, pronouns: list(pw, p, line)? }
        } else if let Some(v) = spec.text.strip_prefix("word:") {
            rest = &rest[2..];
            Pattern::Suffix { suffixes: suffixes(spec, v, line)? }
        } else {
            return Err(err(line, spec.column, format!("expected `verb:` or `word:`, found `{}`", spec.text)));
        }
    } else {
        return Err(err(line, head.column, format!("expected `PP=` or `SUFFIX`, found `{}`", head.text)));
    };

    let mut rule = MarkerRule {
        level,
        pattern,
        position: Position::Any,
        case_fold: false,
        min_stem: 1,
        except: Vec::new(),
        before: None,
        after: Vec::new(),
        features: BTreeMap::new(),
        line,
    };
    for w in rest {
        if let Some((key, value)) = w.text.split_once(':') {
            match key {
                "at" => {
                    rule.position = match value {
                        "initial" => Position::Initial,
                        "medial" => Position::Medial,
                        "any" => Position::Any,
                        _ => return Err(err(line, w.column, format!("unknown position `{value}`"))),
                    }
                }
                "case" => {
                    rule.case_fold = match value {
                        "fold" => true,
                        "exact" => false,
                        _ => return Err(err(line, w.column, format!("unknown case mode `{value}`"))),
                    }
                }
                "minstem" => {
                    rule.min_stem =
                        value.parse().map_err(|_| err(line, w.column, format!("`{value}` is not a count")))?
                }
                "except" => rule.except = list(w, value, line)?,
                "after" => rule.after = list(w, value, line)?,
                "before" if !value.is_empty() => rule.before = Some(value.to_owned()),
                _ => return Err(err(line, w.column, format!("unknown modifier `{}`", w.text))),
            }
        } else if let Some((key, value)) = w.text.split_once('=') {
            let feature =
                Feature::parse(key).ok_or_else(|| RulesError::UnknownFeature { line, name: key.to_owned() })?;
            if value.is_empty() {
                return Err(err(line, w.column, format!("feature `{key}` has no value")));
            }
            rule.features.insert(feature, value.to_owned());
        } else {
            return Err(err(line, w.column, format!("unexpected `{}`", w.text)));
        }
    }
    Ok(rule)
}

pub(super) fn parse_rules(src: &str) -> Result<RuleSet, RulesError> {
    let mut lang: Option<Lang> = None;
    let mut rules = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let words = split_words(strip_comment(raw));
        let Some(first) = words.first() else { continue };
        if first.text == "LANG" {
            if lang.is_some() {
                return Err(err(line, first.column, "duplicate LANG header"));
            }
            let code = words.get(1).ok_or_else(|| err(line, first.column, "LANG needs a code"))?;
            if words.len() > 2 {
                return Err(err(line, words[2].column, "unexpected text after language code"));
            }
            lang = Some(
                Lang::new(code.text)
                    .map_err(|_| err(line, code.column, format!("invalid language code `{}`", code.text)))?,
            );
            continue;
        }
        if lang.is_none() {
            return Err(err(line, first.column, "rules must follow a `LANG` header"));
        }
        rules.push(parse_rule(&words, line)?);
    }
    let lang = lang.ok_or_else(|| err(1, 1, "missing `LANG` header"))?;
    RuleSet::new(lang, rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<RuleSet, RulesError> {
        parse_rules(&format!("LANG de\n{body}"))
    }

    #[test]
    fn full_grammar() {
        let rs = parse(
            "# comment\nFORMAL PP=Sie at:medial Person=2 Form=Polite\n\
             INFORMAL SUFFIX verb:-st PP=du case:fold  # trailing\n\
             AMBIGUOUS SUFFIX word:-ó|-io minstem:2 before:? after:dónde except:tió\n",
        )
        .unwrap();
        assert_eq!(rs.formal_rules().len(), 1);
        assert_eq!(rs.formal_rules()[0].features[&Feature::Person], "2");
        assert_eq!(rs.informal_rules()[0].line, 4);
        let amb = &rs.ambiguous_rules()[0];
        assert_eq!(amb.pattern, Pattern::Suffix { suffixes: vec!["ó".into(), "io".into()] });
        assert_eq!(amb.before.as_deref(), Some("?"));
        assert_eq!(amb.min_stem, 2);
    }

    #[test]
    fn unknown_feature() {
        let e = parse("FORMAL PP=Sie\nINFORMAL PP=du Tense=Past").unwrap_err();
        assert_eq!(e, RulesError::UnknownFeature { line: 3, name: "Tense".into() });
    }

    #[test]
    fn parse_error_positions() {
        let e = parse("FORMAL PP=Sie\nINFORMAL PP=du at:start").unwrap_err();
        assert!(matches!(e, RulesError::Parse { line: 3, column: 16, .. }), "{e:?}");
        let e = parse("FORMEL PP=Sie").unwrap_err();
        assert!(matches!(e, RulesError::Parse { line: 2, column: 1, .. }), "{e:?}");
        let e = parse("FORMAL SUFFIX verb:-en Sie").unwrap_err();
        assert!(matches!(e, RulesError::Parse { line: 2, column: 15, .. }), "{e:?}");
        let e = parse("FORMAL PP=Sie||x").unwrap_err();
        assert!(matches!(e, RulesError::Parse { line: 2, column: 8, .. }), "{e:?}");
        let e = parse_rules("FORMAL PP=Sie").unwrap_err();
        assert!(matches!(e, RulesError::Parse { line: 1, .. }), "{e:?}");
    }

    #[test]
    fn incomplete() {
        assert!(matches!(parse("FORMAL PP=Sie"), Err(RulesError::Incomplete(_))));
        assert!(matches!(parse("INFORMAL PP=du\nAMBIGUOUS PP=Sie"), Err(RulesError::Incomplete(_))));
    }
}
