use std::fmt::Write;

use serde::{Deserialize, Serialize};

use fsmt_core::metrics::{ter, ClassCounts};
use fsmt_core::text::{tokenize_13a, tokenizer_for, PairedContrastiveExample};

use crate::RunManifest;

/// The JSON written by `score`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub target: String,
    pub size: usize,
    pub bleu: f64,
    pub acc_formal: f64,
    pub acc_informal: f64,
    pub class_counts: ClassCounts,
    pub mean_ter: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub pairs: usize,
    pub neutral: usize,
    pub mean_source_len: f64,
    pub mean_formal_len: f64,
    pub mean_informal_len: f64,
    /// Mean TER of the informal reference against the formal one.
    pub avg_ter: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn corpus_stats(pairs: &[PairedContrastiveExample]) -> CorpusStats {
    let len = |s: &str| tokenize_13a(s).len() as f64;
    CorpusStats {
        pairs: pairs.len(),
        neutral: pairs.iter().filter(|p| p.is_neutral()).count(),
        mean_source_len: mean(pairs.iter().map(|p| len(p.source.text()))),
        mean_formal_len: mean(pairs.iter().map(|p| len(p.formal_ref.text()))),
        mean_informal_len: mean(pairs.iter().map(|p| len(p.informal_ref.text()))),
        avg_ter: mean(pairs.iter().filter_map(|p| {
            let tok = tokenizer_for(&p.target_lang);
            ter(&tok.tokenize(p.informal_ref.text()), &tok.tokenize(p.formal_ref.text())).ok()
        })),
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn table(out: &mut String, corner: &str, names: &[&str], rows: &[(&str, Vec<String>)]) {
    let _ = write!(out, "| {} |", cell(corner));
    for n in names {
        let _ = write!(out, " {} |", cell(n));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(names.len()));
    out.push('\n');
    for (label, values) in rows {
        let _ = write!(out, "| {label} |");
        for v in values {
            let _ = write!(out, " {} |", cell(v));
        }
        out.push('\n');
    }
}

/// Markdown summary. Sections without inputs are omitted.
pub fn render_report(
    runs: &[(String, RunManifest)],
    scores: &[(String, ScoreSummary)],
    corpora: &[(String, Vec<PairedContrastiveExample>)],
) -> String {
    let mut out = String::from("# fsmt report\n");
    if !runs.is_empty() {
        out.push_str("\n## Runs\n\n| Manifest | Subcommand | Seed | Version | Outputs | Wall clock (s) |\n|---|---|---|---|---|---|\n");
        for (name, m) in runs {
            let outputs: Vec<String> =
                m.outputs.iter().map(|d| format!("{} ({})", d.path, &d.sha256[..d.sha256.len().min(12)])).collect();
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {:.2} |",
                cell(name),
                cell(&m.subcommand),
                m.seed,
                cell(&m.tool_version),
                cell(&outputs.join(", ")),
                m.wall_clock_secs
            );
        }
    }
    if !corpora.is_empty() {
        out.push_str("\n## Corpus statistics\n\n");
        let names: Vec<&str> = corpora.iter().map(|(n, _)| n.as_str()).collect();
        let stats: Vec<CorpusStats> = corpora.iter().map(|(_, c)| corpus_stats(c)).collect();
        let col = |f: &dyn Fn(&CorpusStats) -> String| stats.iter().map(f).collect::<Vec<_>>();
        let rows = [
            ("# Pairs", col(&|s| s.pairs.to_string())),
            ("# Neutral", col(&|s| s.neutral.to_string())),
            ("Mean source length", col(&|s| format!("{:.2}", s.mean_source_len))),
            ("Mean formal length", col(&|s| format!("{:.2}", s.mean_formal_len))),
            ("Mean informal length", col(&|s| format!("{:.2}", s.mean_informal_len))),
            ("Avg. TER", col(&|s| format!("{:.3}", s.avg_ter))),
        ];
        table(&mut out, "Statistic", &names, &rows);
    }
    if !scores.is_empty() {
        out.push_str("\n## Scores\n\n");
        let names: Vec<&str> = scores.iter().map(|(n, _)| n.as_str()).collect();
        let col = |f: &dyn Fn(&ScoreSummary) -> String| scores.iter().map(|(_, s)| f(s)).collect::<Vec<_>>();
        let rows = [
            ("Target", col(&|s| s.target.clone())),
            ("Hypotheses", col(&|s| s.size.to_string())),
            ("BLEU", col(&|s| format!("{:.2}", s.bleu))),
            ("Acc. formal (%)", col(&|s| format!("{:.1}", 100.0 * s.acc_formal))),
            ("Acc. informal (%)", col(&|s| format!("{:.1}", 100.0 * s.acc_informal))),
            ("Mean TER", col(&|s| format!("{:.3}", s.mean_ter))),
        ];
        table(&mut out, "Metric", &names, &rows);
        out.push_str("\n### Class distribution\n\n");
        let rows = [
            ("FORMAL", col(&|s| s.class_counts.formal.to_string())),
            ("INFORMAL", col(&|s| s.class_counts.informal.to_string())),
            ("NEUTRAL", col(&|s| s.class_counts.neutral.to_string())),
            ("OTHER", col(&|s| s.class_counts.other.to_string())),
        ];
        table(&mut out, "Class", &names, &rows);
    }
    out
}
