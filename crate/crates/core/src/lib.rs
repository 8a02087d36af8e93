pub mod classifier;
pub mod curation;
pub mod intervention;
pub mod metrics;
pub mod pool;
pub mod rules;
pub mod text;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/text.md")]
    mod text {}
    #[doc = include_str!("../../../book/src/rules.md")]
    mod rules {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/curation.md")]
    mod curation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/intervention.md")]
    mod intervention {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
