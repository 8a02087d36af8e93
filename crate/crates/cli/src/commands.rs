use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fsmt_core::classifier::{
    eval_classifier, silver_label, train_classifier, ExternalScores, LinearNGramModel, SilverPolicy,
    TrainConfig as ClassifierConfig,
};
use fsmt_core::curation::{curate, make_unpaired, CapMode, CurationConfig, Labeler, LabelerKind};
use fsmt_core::intervention::{
    evaluate_toy, gen_toylang_with, load_checkpoint, save_checkpoint, train_two_pass, ModelConfig, SecondStage,
    ToyConfig, TrainConfig as ToyTrainConfig,
};
use fsmt_core::metrics::{corpus_bleu, formality_accuracy, mean_ter, AnnotatedReference, TargetLevel};
use fsmt_core::rules::{batch_label, builtin, load_rules, RuleSet, RulesError};
use fsmt_core::text::{
    read_tsv_bitext, tokenizer_by_name, tokenizer_for, write_jsonl, BitextRecord, FormalityLabel, JsonlReader,
    LabeledTriplet, Lang, LanguageSet, PairedContrastiveExample, PairedRecord, RecordError, Segment, Tokenizer,
    Tokenizer13a,
};

use crate::config::FileConfig;
use crate::manifest::{default_path, FileDigest, RunManifest};
use crate::report::{render_report, ScoreSummary};
use crate::*;

const DEFAULT_RULE_LANGS: [&str; 4] = ["de", "es", "it", "ru"];

struct Ctx {
    file: FileConfig,
    config_path: PathBuf,
    seed: u64,
}

impl Ctx {
    fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, CliError> {
        self.file.section(name, &self.config_path)
    }

    fn workers(&self, flag: Option<usize>, section: Option<usize>) -> usize {
        flag.or(section).or(self.file.workers).unwrap_or(1).max(1)
    }
}

/// What a finished subcommand hands back for its manifest.
struct Run {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let ctx = Ctx { file, config_path: cli.config.clone().unwrap_or_default(), seed };
    let (name, run) = match cli.command {
        Command::Label(a) => ("label", label(&ctx, a)?),
        Command::Curate(a) => ("curate", curate_cmd(&ctx, a)?),
        Command::TrainClassifier(a) => ("train-classifier", train_classifier_cmd(&ctx, a)?),
        Command::Predict(a) => ("predict", predict(&ctx, a)?),
        Command::Score(a) => ("score", score(&ctx, a)?),
        Command::Ter(a) => ("ter", ter_cmd(&ctx, a)?),
        Command::Bleu(a) => ("bleu", bleu_cmd(&ctx, a)?),
        Command::ToyGen(a) => ("toy-gen", toy_gen(&ctx, a)?),
        Command::ToyTrain(a) => ("toy-train", toy_train(&ctx, a)?),
        Command::ToyEval(a) => ("toy-eval", toy_eval(&ctx, a)?),
        Command::Report(a) => ("report", report(&ctx, a)?),
    };
    let path = match (&cli.manifest, run.outputs.first()) {
        (Some(p), _) => p.clone(),
        (None, Some(primary)) => default_path(primary),
        (None, None) => return Ok(()),
    };
    let digests = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>, _>>();
    let manifest = RunManifest {
        subcommand: name.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: ctx.seed,
        config: run.config,
        inputs: digests(&run.inputs)?,
        outputs: digests(&run.outputs)?,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    manifest.write(&path)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_owned(), message: e.to_string() }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Parse { path: path.to_owned(), message: e.to_string() }
}

fn record_err(path: &Path, e: RecordError) -> CliError {
    if e.is_io() {
        CliError::Io { path: path.to_owned(), message: e.to_string() }
    } else {
        CliError::Parse { path: path.to_owned(), message: e.to_string() }
    }
}

fn lang(code: &str) -> Result<Lang, CliError> {
    Lang::new(code).map_err(|e| CliError::Usage(e.to_string()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// One entry per line; a trailing newline does not add an empty entry.
fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(path)?.lines().map(str::to_owned).collect())
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

type Records = Box<dyn Iterator<Item = Result<BitextRecord, RecordError>>>;

/// JSONL bitext, or TSV when the file ends in `.tsv` (which needs `lang`).
fn bitext(path: &Path, lang: Option<&Lang>) -> Result<Records, CliError> {
    let reader = open(path)?;
    if is_tsv(path) {
        let lang = lang.ok_or_else(|| CliError::Usage("TSV input needs exactly one --lang".into()))?;
        Ok(Box::new(read_tsv_bitext(reader, lang.clone())))
    } else {
        Ok(Box::new(JsonlReader::<_, BitextRecord>::new(reader, LanguageSet::Any)))
    }
}

fn read_paired(path: &Path) -> Result<Vec<PairedContrastiveExample>, CliError> {
    JsonlReader::<_, PairedRecord>::new(open(path)?, LanguageSet::Any)
        .map(|r| {
            let r = r.map_err(|e| record_err(path, e))?;
            r.to_example().map_err(|e| parse_err(path, e))
        })
        .collect()
}

/// Labeled records as classifier examples; unlabeled and `ambiguous`
/// records are skipped.
fn read_labeled(path: &Path, lang: Option<&Lang>) -> Result<Vec<(Segment, FormalityLabel)>, CliError> {
    let mut out = Vec::new();
    for r in bitext(path, lang)? {
        let r = r.map_err(|e| record_err(path, e))?;
        if lang.is_some_and(|l| *l != r.lang) {
            continue;
        }
        match r.formality {
            Some(l) if l.is_trainable() => out.push((r.target_segment(), l)),
            _ => {}
        }
    }
    Ok(out)
}

fn policy(formal: f64, informal: f64) -> Result<SilverPolicy, CliError> {
    Ok(SilverPolicy::new(formal, informal)?)
}

fn load_classifier(path: &Path) -> Result<LinearNGramModel, CliError> {
    Ok(LinearNGramModel::from_json(&read_text(path)?)?)
}

macro_rules! override_with {
    ($s:ident, $a:ident; $($f:ident),*) => {$(
        if let Some(v) = $a.$f {
            $s.$f = v;
        }
    )*};
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LabelSettings {
    lang: Option<String>,
    rules: Option<PathBuf>,
    workers: Option<usize>,
}

fn label(ctx: &Ctx, a: LabelArgs) -> Result<Run, CliError> {
    let mut s: LabelSettings = ctx.section("label")?;
    s.lang = a.lang.or(s.lang);
    s.rules = a.rules.or(s.rules);
    let workers = ctx.workers(a.workers, s.workers);
    s.workers = Some(workers);
    let want = s.lang.as_deref().map(lang).transpose()?;
    let ruleset: RuleSet = match (&s.rules, &want) {
        (Some(p), _) => load_rules(p)?,
        (None, Some(l)) => builtin(l)?,
        (None, None) => return Err(CliError::Usage("label needs --lang or --rules".into())),
    };
    if let Some(l) = &want {
        if l != ruleset.lang() {
            return Err(RulesError::LanguageMismatch { expected: l.clone(), found: ruleset.lang().clone() }.into());
        }
    }
    let mut out = create(&a.out)?;
    let mut malformed = 0usize;
    let mut labeler = batch_label(bitext(&a.input, Some(ruleset.lang()))?, &ruleset, workers);
    for item in labeler.by_ref() {
        match item {
            Ok((mut rec, l)) => {
                rec.formality = Some(l);
                serde_json::to_writer(&mut out, &rec).expect("record serializes");
                out.write_all(b"\n").map_err(io_err(&a.out))?;
            }
            Err(RulesError::Record(e)) if !e.is_io() => {
                log::warn!("{}: line {}: {}", a.input.display(), e.line, e.kind);
                malformed += 1;
            }
            Err(RulesError::Record(e)) => return Err(record_err(&a.input, e)),
            Err(e) => return Err(e.into()),
        }
    }
    out.flush().map_err(io_err(&a.out))?;
    println!("{}", json!({ "counts": labeler.counts(), "malformed": malformed }));
    let mut inputs = vec![a.input];
    inputs.extend(s.rules.clone());
    Ok(Run { config: json!(s), inputs, outputs: vec![a.out] })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CurateSettings {
    lang: Vec<String>,
    labeler: LabelerKind,
    rules: Vec<PathBuf>,
    model: Option<PathBuf>,
    scores: Option<PathBuf>,
    cap_per_level: usize,
    cap_mode: CapMode,
    formal_threshold: f64,
    informal_threshold: f64,
    dedup: bool,
    dev_per_domain: usize,
    workers: Option<usize>,
}

impl Default for CurateSettings {
    fn default() -> Self {
        let c = CurationConfig::default();
        let p = SilverPolicy::default();
        CurateSettings {
            lang: Vec::new(),
            labeler: c.labeler,
            rules: Vec::new(),
            model: None,
            scores: None,
            cap_per_level: c.cap_per_level,
            cap_mode: c.cap_mode,
            formal_threshold: p.formal_threshold(),
            informal_threshold: p.informal_threshold(),
            dedup: c.dedup,
            dev_per_domain: c.dev_per_domain,
            workers: None,
        }
    }
}

fn curate_cmd(ctx: &Ctx, a: CurateArgs) -> Result<Run, CliError> {
    let mut s: CurateSettings = ctx.section("curate")?;
    if !a.lang.is_empty() {
        s.lang = a.lang;
    }
    if !a.rules.is_empty() {
        s.rules = a.rules;
    }
    if let Some(l) = a.labeler {
        s.labeler = match l {
            LabelerArg::Rules => LabelerKind::Rules,
            LabelerArg::Classifier => LabelerKind::Classifier,
            LabelerArg::External => LabelerKind::External,
        };
    }
    if let Some(m) = a.cap_mode {
        s.cap_mode = match m {
            CapModeArg::First => CapMode::First,
            CapModeArg::Reservoir => CapMode::Reservoir,
        };
    }
    s.model = a.model.or(s.model);
    s.scores = a.scores.or(s.scores);
    if let Some(c) = a.cap {
        s.cap_per_level = c;
    }
    override_with!(s, a; formal_threshold, informal_threshold);
    if a.no_dedup {
        s.dedup = false;
    }
    let workers = ctx.workers(a.workers, s.workers);
    s.workers = Some(workers);

    let langs = s.lang.iter().map(|l| lang(l)).collect::<Result<Vec<_>, _>>()?;
    let mut inputs = vec![a.input.clone()];
    let labeler = match s.labeler {
        LabelerKind::Rules => {
            let sets = if s.rules.is_empty() {
                let codes: Vec<Lang> = if langs.is_empty() {
                    DEFAULT_RULE_LANGS.iter().map(|c| lang(c)).collect::<Result<_, _>>()?
                } else {
                    langs.clone()
                };
                codes.iter().map(builtin).collect::<Result<Vec<_>, _>>()?
            } else {
                inputs.extend(s.rules.iter().cloned());
                s.rules.iter().map(load_rules).collect::<Result<Vec<_>, _>>()?
            };
            Labeler::Rules(sets)
        }
        LabelerKind::Classifier => {
            let path = s.model.as_ref().ok_or_else(|| CliError::Usage("--labeler classifier needs --model".into()))?;
            inputs.push(path.clone());
            Labeler::Classifier(load_classifier(path)?, policy(s.formal_threshold, s.informal_threshold)?)
        }
        LabelerKind::External => {
            let path = s.scores.as_ref().ok_or_else(|| CliError::Usage("--labeler external needs --scores".into()))?;
            inputs.push(path.clone());
            Labeler::External(
                ExternalScores::from_reader(open(path)?)?,
                policy(s.formal_threshold, s.informal_threshold)?,
            )
        }
    };
    let tsv_lang = match langs.as_slice() {
        [l] => Some(l),
        _ => None,
    };
    let config = CurationConfig {
        cap_per_level: s.cap_per_level,
        languages: langs.clone(),
        labeler: s.labeler,
        seed: ctx.seed,
        dev_per_domain: s.dev_per_domain,
        cap_mode: s.cap_mode,
        dedup: s.dedup,
        workers,
    };
    let (triplets, report) = curate(bitext(&a.input, tsv_lang)?, &labeler, &config)?;
    write_jsonl(create(&a.out)?, &triplets).map_err(io_err(&a.out))?;
    let report_text = pretty(&report.to_json());
    let mut outputs = vec![a.out];
    match a.report {
        Some(p) => {
            write_text(&p, &(report_text + "\n"))?;
            outputs.push(p);
        }
        None => println!("{report_text}"),
    }
    Ok(Run { config: json!(s), inputs, outputs })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainClassifierSettings {
    lang: Option<String>,
    epochs: usize,
    hash_bits: u32,
    learning_rate: f64,
    n_min: usize,
    n_max: usize,
}

impl Default for TrainClassifierSettings {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        TrainClassifierSettings {
            lang: None,
            epochs: c.epochs,
            hash_bits: c.hash_bits,
            learning_rate: c.learning_rate,
            n_min: c.n_range.0,
            n_max: c.n_range.1,
        }
    }
}

fn train_classifier_cmd(ctx: &Ctx, a: TrainClassifierArgs) -> Result<Run, CliError> {
    let mut s: TrainClassifierSettings = ctx.section("train-classifier")?;
    s.lang = a.lang.or(s.lang);
    override_with!(s, a; epochs, hash_bits, learning_rate);
    let want = s.lang.as_deref().map(lang).transpose()?;
    let train = read_labeled(&a.input, want.as_ref())?;
    let config = ClassifierConfig {
        n_range: (s.n_min, s.n_max),
        hash_bits: s.hash_bits,
        seed: ctx.seed,
        epochs: s.epochs,
        learning_rate: s.learning_rate,
    };
    let (model, report) = train_classifier(&train, &config)?;
    write_text(&a.out, &model.to_json())?;
    let mut inputs = vec![a.input];
    let dev = match &a.dev {
        Some(p) => {
            inputs.push(p.clone());
            Some(eval_classifier(&model, &read_labeled(p, want.as_ref())?)?)
        }
        None => None,
    };
    println!(
        "{}",
        json!({
            "examples": train.len(),
            "effective_size": report.effective_size,
            "final_loss": report.losses.last(),
            "dev": dev,
        })
    );
    Ok(Run { config: json!(s), inputs, outputs: vec![a.out] })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PredictSettings {
    lang: Option<String>,
    formal_threshold: f64,
    informal_threshold: f64,
}

impl Default for PredictSettings {
    fn default() -> Self {
        let p = SilverPolicy::default();
        PredictSettings {
            lang: None,
            formal_threshold: p.formal_threshold(),
            informal_threshold: p.informal_threshold(),
        }
    }
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<Run, CliError> {
    let mut s: PredictSettings = ctx.section("predict")?;
    s.lang = a.lang.or(s.lang);
    override_with!(s, a; formal_threshold, informal_threshold);
    let want = s.lang.as_deref().map(lang).transpose()?;
    let policy = policy(s.formal_threshold, s.informal_threshold)?;
    let model = load_classifier(&a.model)?;
    let mut out = create(&a.out)?;
    for (i, r) in bitext(&a.input, want.as_ref())?.enumerate() {
        let r = r.map_err(|e| record_err(&a.input, e))?;
        let p = model.predict_proba(&r.target_segment());
        let row = json!({
            "id": r.id().unwrap_or_else(|| i.to_string()),
            "p_formal": p,
            "silver": silver_label(p, &policy),
        });
        writeln!(out, "{row}").map_err(io_err(&a.out))?;
    }
    out.flush().map_err(io_err(&a.out))?;
    Ok(Run { config: json!(s), inputs: vec![a.model, a.input], outputs: vec![a.out] })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MetricSettings {
    lang: Option<String>,
    tokenize: Option<String>,
}

impl MetricSettings {
    fn tokenizer(&self) -> Result<&'static dyn Tokenizer, CliError> {
        if let Some(name) = &self.tokenize {
            return tokenizer_by_name(name).ok_or_else(|| CliError::Usage(format!("unknown tokenizer `{name}`")));
        }
        Ok(match &self.lang {
            Some(l) => tokenizer_for(&lang(l)?),
            None => &Tokenizer13a,
        })
    }
}

fn read_refs(path: &Path) -> Result<Vec<AnnotatedReference>, CliError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| AnnotatedReference::parse(l).map_err(|e| parse_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<Vec<PathBuf>, CliError> {
    println!("{text}");
    match out {
        Some(p) => {
            write_text(p, &format!("{text}\n"))?;
            Ok(vec![p.clone()])
        }
        None => Ok(Vec::new()),
    }
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<Run, CliError> {
    let mut s: MetricSettings = ctx.section("score")?;
    s.lang = a.lang.or(s.lang);
    let tok = s.tokenizer()?;
    let hyps = read_lines(&a.hyp)?;
    let formal = read_refs(&a.formal_ref)?;
    let informal = read_refs(&a.informal_ref)?;
    let target = match a.target {
        TargetArg::Formal => TargetLevel::Formal,
        TargetArg::Informal => TargetLevel::Informal,
    };
    let acc = formality_accuracy(&hyps, &formal, &informal, target)?;
    let refs: Vec<&str> = match target {
        TargetLevel::Formal => formal.iter().map(|r| r.text()).collect(),
        TargetLevel::Informal => informal.iter().map(|r| r.text()).collect(),
    };
    let summary = ScoreSummary {
        target: match target {
            TargetLevel::Formal => "formal".into(),
            TargetLevel::Informal => "informal".into(),
        },
        size: acc.size,
        bleu: corpus_bleu(&hyps, &refs, tok)?.score,
        acc_formal: acc.acc_formal,
        acc_informal: acc.acc_informal,
        class_counts: acc.counts,
        mean_ter: mean_ter(&hyps, &refs, tok)?,
    };
    let outputs = emit(a.out.as_ref(), &pretty(&summary))?;
    Ok(Run { config: json!(s), inputs: vec![a.hyp, a.formal_ref, a.informal_ref], outputs })
}

fn ter_cmd(ctx: &Ctx, a: PairArgs) -> Result<Run, CliError> {
    let mut s: MetricSettings = ctx.section("ter")?;
    s.lang = a.lang.or(s.lang);
    let hyps = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    let v = mean_ter(&hyps, &refs, s.tokenizer()?)?;
    let outputs = emit(a.out.as_ref(), &json!({ "mean_ter": v, "n": hyps.len() }).to_string())?;
    Ok(Run { config: json!(s), inputs: vec![a.hyp, a.reference], outputs })
}

fn bleu_cmd(ctx: &Ctx, a: BleuArgs) -> Result<Run, CliError> {
    let mut s: MetricSettings = ctx.section("bleu")?;
    s.lang = a.pair.lang.or(s.lang);
    s.tokenize = a.tokenize.or(s.tokenize);
    let hyps = read_lines(&a.pair.hyp)?;
    let refs = read_lines(&a.pair.reference)?;
    let b = corpus_bleu(&hyps, &refs, s.tokenizer()?)?;
    let outputs = emit(a.pair.out.as_ref(), &serde_json::to_string(&b).expect("serializable"))?;
    Ok(Run { config: json!(s), inputs: vec![a.pair.hyp, a.pair.reference], outputs })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ToyGenSettings {
    n: usize,
    neutral_fraction: f64,
    max_objects: usize,
    adverb_prob: f64,
}

impl Default for ToyGenSettings {
    fn default() -> Self {
        let c = ToyConfig::default();
        ToyGenSettings {
            n: 2000,
            neutral_fraction: c.neutral_fraction,
            max_objects: c.max_objects,
            adverb_prob: c.adverb_prob,
        }
    }
}

fn toy_gen(ctx: &Ctx, a: ToyGenArgs) -> Result<Run, CliError> {
    let mut s: ToyGenSettings = ctx.section("toy-gen")?;
    override_with!(s, a; n, neutral_fraction);
    for (name, p) in [("neutral_fraction", s.neutral_fraction), ("adverb_prob", s.adverb_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage(format!("{name} {p} is outside [0, 1]")));
        }
    }
    let config =
        ToyConfig { neutral_fraction: s.neutral_fraction, max_objects: s.max_objects, adverb_prob: s.adverb_prob };
    let pairs = gen_toylang_with(s.n, ctx.seed, &config);
    write_jsonl(create(&a.out)?, pairs.iter().map(PairedRecord::from_example)).map_err(io_err(&a.out))?;
    Ok(Run { config: json!(s), inputs: Vec::new(), outputs: vec![a.out] })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Pairing {
    #[default]
    Paired,
    Unpaired,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ToyTrainSettings {
    pairing: Pairing,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    warmup_steps: usize,
    clip_norm: f64,
    mask_prob: f64,
    d_model: usize,
    layers: usize,
    heads: usize,
    d_ff: usize,
    second_epochs: usize,
    second_learning_rate: f64,
    second_mask_prob: f64,
    resample: usize,
}

impl Default for ToyTrainSettings {
    fn default() -> Self {
        let t = ToyTrainConfig::default();
        let m = ModelConfig::default();
        let s = SecondStage::default();
        ToyTrainSettings {
            pairing: Pairing::Paired,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            warmup_steps: t.warmup_steps,
            clip_norm: t.clip_norm,
            mask_prob: t.mask_prob,
            d_model: m.d_model,
            layers: m.layers,
            heads: m.heads,
            d_ff: m.d_ff,
            second_epochs: s.epochs,
            second_learning_rate: s.learning_rate,
            second_mask_prob: s.mask_prob,
            resample: s.resample,
        }
    }
}

fn paired_triplets(pairs: &[PairedContrastiveExample]) -> Vec<LabeledTriplet> {
    pairs.iter().flat_map(|p| p.triplets()).collect()
}

fn toy_train(ctx: &Ctx, a: ToyTrainArgs) -> Result<Run, CliError> {
    let mut s: ToyTrainSettings = ctx.section("toy-train")?;
    override_with!(s, a; epochs, batch_size, learning_rate, mask_prob);
    if let Some(p) = a.pairing {
        s.pairing = match p {
            PairingArg::Paired => Pairing::Paired,
            PairingArg::Unpaired => Pairing::Unpaired,
        };
    }
    let pairs = read_paired(&a.input)?;
    let first = match s.pairing {
        Pairing::Paired => paired_triplets(&pairs),
        Pairing::Unpaired => make_unpaired(&pairs, ctx.seed),
    };
    let mut inputs = vec![a.input];
    let gold = match &a.gold {
        Some(p) => {
            inputs.push(p.clone());
            paired_triplets(&read_paired(p)?)
        }
        None => Vec::new(),
    };
    let config = ToyTrainConfig {
        model: ModelConfig { d_model: s.d_model, layers: s.layers, heads: s.heads, d_ff: s.d_ff },
        batch_size: s.batch_size,
        epochs: s.epochs,
        learning_rate: s.learning_rate,
        warmup_steps: s.warmup_steps,
        clip_norm: s.clip_norm,
        mask_prob: s.mask_prob,
        seed: ctx.seed,
        two_pass: a.gold.as_ref().map(|_| SecondStage {
            epochs: s.second_epochs,
            learning_rate: s.second_learning_rate,
            mask_prob: s.second_mask_prob,
            resample: s.resample,
            full_mask_langs: Vec::new(),
        }),
    };
    let mut model = config.build_model(&[&first, &gold])?;
    let outcome = train_two_pass(&mut model, &first, &gold, &config)?;
    let mut w = create(&a.out)?;
    save_checkpoint(&model, &mut w)?;
    w.flush().map_err(io_err(&a.out))?;
    let mut outputs = vec![a.out];
    match a.metrics {
        Some(p) => {
            write_jsonl(create(&p)?, &outcome.epochs).map_err(io_err(&p))?;
            outputs.push(p);
        }
        None => {
            write_jsonl(std::io::stdout().lock(), &outcome.epochs).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    Ok(Run { config: json!(config), inputs, outputs })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ToyEvalSettings {
    max_len: usize,
}

impl Default for ToyEvalSettings {
    fn default() -> Self {
        ToyEvalSettings { max_len: 32 }
    }
}

fn toy_eval(ctx: &Ctx, a: ToyEvalArgs) -> Result<Run, CliError> {
    let mut s: ToyEvalSettings = ctx.section("toy-eval")?;
    override_with!(s, a; max_len);
    let model = load_checkpoint(open(&a.model)?)?;
    let pairs = read_paired(&a.input)?;
    let eval = evaluate_toy(&model, &pairs, s.max_len)?;
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let lines = |xs: &mut dyn Iterator<Item = String>| xs.map(|x| x + "\n").collect::<String>();
    let files = [
        ("formal.hyp.txt", lines(&mut eval.formal_outputs.iter().cloned())),
        ("informal.hyp.txt", lines(&mut eval.informal_outputs.iter().cloned())),
        ("formal.ann", lines(&mut pairs.iter().map(|p| p.formal_ref.to_markup()))),
        ("informal.ann", lines(&mut pairs.iter().map(|p| p.informal_ref.to_markup()))),
    ];
    let summary = json!({
        "acc_formal": eval.acc_formal,
        "acc_informal": eval.acc_informal,
        "bleu_formal": eval.bleu_formal,
        "bleu_informal": eval.bleu_informal,
        "contrast_ter": eval.contrast_ter,
        "marker_only": eval.marker_only,
        "neutral_match": eval.neutral_match,
        "size": pairs.len(),
    });
    let mut outputs = vec![a.out_dir.join("eval.json")];
    write_text(&outputs[0], &(pretty(&summary) + "\n"))?;
    for (name, body) in files {
        let p = a.out_dir.join(name);
        write_text(&p, &body)?;
        outputs.push(p);
    }
    println!("{}", pretty(&summary));
    Ok(Run { config: json!(s), inputs: vec![a.model, a.input], outputs })
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn report(_ctx: &Ctx, a: ReportArgs) -> Result<Run, CliError> {
    let runs =
        a.runs.iter().map(|p| Ok((display_name(p), RunManifest::read(p)?))).collect::<Result<Vec<_>, CliError>>()?;
    let scores = a
        .scores
        .iter()
        .map(|p| {
            let s: ScoreSummary = serde_json::from_str(&read_text(p)?).map_err(|e| parse_err(p, e))?;
            Ok((display_name(p), s))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let corpora =
        a.corpora.iter().map(|p| Ok((display_name(p), read_paired(p)?))).collect::<Result<Vec<_>, CliError>>()?;
    let md = render_report(&runs, &scores, &corpora);
    let inputs: Vec<PathBuf> = a.runs.iter().chain(&a.scores).chain(&a.corpora).cloned().collect();
    let outputs = match &a.out {
        Some(p) => {
            write_text(p, &md)?;
            vec![p.clone()]
        }
        None => {
            print!("{md}");
            Vec::new()
        }
    };
    Ok(Run { config: Value::Null, inputs, outputs })
}
