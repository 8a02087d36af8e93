//! A synthetic language pair with a minimal T-V contrast.
//!
//! Sources are English-like: `you like lego book today`. Targets put the
//! verb stem first, then an agreement marker and the subject pronoun:
//!
//! | level    | target                     |
//! |----------|----------------------------|
//! | formal   | `mag +F FP lego buch heut` |
//! | informal | `mag +I IP lego buch heut` |
//!
//! The contrastive span covers `stem marker pronoun`. Sources with a third
//! person or plural subject translate the same way at both levels and form
//! the neutral pairs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::AnnotatedReference;
use crate::text::{Lang, PairedContrastiveExample, Segment};

pub const TOY_LANG: &str = "xx";
pub const DOMAINS: [&str; 2] = ["telephony", "topical_chat"];

/// Tokens that differ between the formal and informal targets.
pub const MARKERS: [&str; 4] = ["+F", "FP", "+I", "IP"];

const VERBS: [(&str, &str); 8] = [
    ("like", "mag"),
    ("see", "seh"),
    ("want", "will"),
    ("know", "kenn"),
    ("have", "hab"),
    ("take", "nehm"),
    ("make", "mach"),
    ("find", "find"),
];

const OBJECTS: [(&str, &str); 16] = [
    ("lego", "lego"),
    ("book", "buch"),
    ("dog", "hund"),
    ("cat", "katz"),
    ("car", "wagn"),
    ("tree", "baum"),
    ("house", "haus"),
    ("ball", "ball"),
    ("song", "lied"),
    ("game", "spil"),
    ("bread", "brot"),
    ("fish", "fisk"),
    ("door", "tuer"),
    ("phone", "fon"),
    ("chair", "stul"),
    ("lamp", "lamp"),
];

const ADVERBS: [(&str, &str); 4] = [("today", "heut"), ("now", "jetz"), ("often", "oft"), ("again", "wied")];

/// (source subject, target marker, target pronoun)
const NEUTRAL_SUBJECTS: [(&str, &str, &str); 4] =
    [("he", "+3", "hu"), ("she", "+3", "shi"), ("we", "+P", "wi"), ("they", "+P", "za")];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub neutral_fraction: f64,
    pub max_objects: usize,
    pub adverb_prob: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { neutral_fraction: 0.1, max_objects: 3, adverb_prob: 0.5 }
    }
}

pub fn toy_lang() -> Lang {
    Lang::new(TOY_LANG).expect("valid code")
}

pub fn gen_toylang(n: usize, seed: u64) -> Vec<PairedContrastiveExample> {
    gen_toylang_with(n, seed, &ToyConfig::default())
}

pub fn gen_toylang_with(n: usize, seed: u64, config: &ToyConfig) -> Vec<PairedContrastiveExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_pair(&mut rng, config)).collect()
}

fn gen_pair(rng: &mut ChaCha8Rng, config: &ToyConfig) -> PairedContrastiveExample {
    let neutral = rng.gen_bool(config.neutral_fraction.clamp(0.0, 1.0));
    let &(verb_en, stem) = VERBS.choose(rng).expect("non-empty");
    let n_obj = rng.gen_range(1..=config.max_objects.max(1));
    let objects: Vec<(&str, &str)> = (0..n_obj).map(|_| *OBJECTS.choose(rng).expect("non-empty")).collect();
    let adverb = rng.gen_bool(config.adverb_prob.clamp(0.0, 1.0)).then(|| *ADVERBS.choose(rng).expect("non-empty"));
    let domain = DOMAINS[rng.gen_range(0..DOMAINS.len())];

    let mut tail: Vec<&str> = objects.iter().map(|o| o.1).collect();
    tail.extend(adverb.map(|a| a.1));
    let tail = tail.join(" ");
    let mut src_tail: Vec<&str> = objects.iter().map(|o| o.0).collect();
    src_tail.extend(adverb.map(|a| a.0));
    let src_tail = src_tail.join(" ");

    let (source, formal, informal) = if neutral {
        let &(subj, marker, pron) = NEUTRAL_SUBJECTS.choose(rng).expect("non-empty");
        let t = AnnotatedReference::plain(format!("{stem} {marker} {pron} {tail}"));
        (format!("{subj} {verb_en} {src_tail}"), t.clone(), t)
    } else {
        let f = AnnotatedReference::parse(&format!("[F]{stem} +F FP[/F] {tail}")).expect("valid markup");
        let i = AnnotatedReference::parse(&format!("[F]{stem} +I IP[/F] {tail}")).expect("valid markup");
        (format!("you {verb_en} {src_tail}"), f, i)
    };
    PairedContrastiveExample::new(
        Segment::new(&source, Lang::en()).with_domain(domain),
        formal,
        informal,
        toy_lang(),
        domain,
    )
    .expect("non-empty references")
}

/// Removes the formality marker tokens.
pub fn strip_markers(text: &str) -> String {
    text.split_whitespace().filter(|t| !MARKERS.contains(t)).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::phi;

    #[test]
    fn shapes() {
        assert!(gen_toylang(0, 1).is_empty());
        assert_eq!(gen_toylang(50, 7), gen_toylang(50, 7));
        assert_ne!(gen_toylang(50, 7), gen_toylang(50, 8));
    }

    #[test]
    fn minimal_contrast() {
        let c = gen_toylang(2000, 3);
        let neutral = c.iter().filter(|p| p.is_neutral()).count();
        assert!((120..=280).contains(&neutral), "{neutral}");
        for p in &c {
            if p.is_neutral() {
                assert!(p.formal_ref.spans().is_empty());
                continue;
            }
            assert_eq!(strip_markers(p.formal_ref.text()), strip_markers(p.informal_ref.text()));
            assert_ne!(p.formal_ref.text(), p.informal_ref.text());
            let f = phi(&p.formal_ref);
            assert_eq!(f.len(), 1);
            assert!(f[0].ends_with("+F FP"));
            assert!(phi(&p.informal_ref)[0].ends_with("+I IP"));
        }
    }
}
