//! File-level commands behind the `lsp-align` binary.
//!
//! Corpora are streamed in blocks of lines; each block is processed in
//! parallel on a dedicated thread pool and written back in input order, so
//! outputs never depend on the thread count. Training reads the whole corpus
//! since EM needs several passes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    self, chomp, extract_entity_spans, parse_alignment, parse_bitext_line, Alignment, Bitext, EmbeddingTable,
    EntitySpan, TransliterationTable,
};
use crate::distance::{greedy_align, PhoneticDistance, SemanticDistance};
use crate::error::{Error, Result};
use crate::eval::{evaluate_lexicon, EvalOptions, EvaluationReport, GoldLexicon};
use crate::lexical::{em_train, gdfa_symmetrize, viterbi_align, Direction, LexicalModel, TrainConfig};
use crate::lsp::{posterior_align, sample_translation_traced, LinkCounts, LspModel, Mechanism, TranslationTable};
use crate::projection::{EntityPair, LexiconBuilder, MiningStats, ProjectionConfig};

/// Lines per parallel block.
pub const BLOCK_LINES: usize = 4096;

pub const LEXICAL_FORWARD_FILE: &str = "lexical.forward.tsv";
pub const LEXICAL_REVERSE_FILE: &str = "lexical.reverse.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn table_file(mechanism: Mechanism) -> String {
    format!("{mechanism}.tsv")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lexical,
    Semantic,
    Phonetic,
    Lsp,
}

impl Method {
    fn mechanisms(self) -> &'static [Mechanism] {
        match self {
            Method::Lexical => &[Mechanism::Lexical],
            Method::Semantic => &[Mechanism::Semantic],
            Method::Phonetic => &[Mechanism::Phonetic],
            Method::Lsp => &Mechanism::ALL,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lexical => "lexical",
            Method::Semantic => "semantic",
            Method::Phonetic => "phonetic",
            Method::Lsp => "lsp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" => Ok(Method::Lexical),
            "semantic" => Ok(Method::Semantic),
            "phonetic" => Ok(Method::Phonetic),
            "lsp" => Ok(Method::Lsp),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// In-memory aligners

/// A ready-to-use aligner for one method.
#[derive(Debug, Clone)]
pub enum Aligner {
    Lexical {
        forward: LexicalModel,
        reverse: LexicalModel,
    },
    Semantic(EmbeddingTable),
    Phonetic {
        src_to_tgt: TransliterationTable,
        tgt_to_src: TransliterationTable,
    },
    Lsp(LspModel),
}

/// Alignment of one sentence plus per-target confidences when the aligner
/// is probabilistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceAlignment {
    pub alignment: Alignment,
    pub confidence: Option<Vec<Option<f64>>>,
}

impl Aligner {
    pub fn align(&self, b: &Bitext) -> SentenceAlignment {
        let alignment = match self {
            Aligner::Lexical { forward, reverse } => {
                let f = viterbi_align(b, forward, Direction::Forward);
                let r = viterbi_align(b, reverse, Direction::Reverse);
                gdfa_symmetrize(&f, &r, b.m(), b.n()).expect("decoder links are in range")
            }
            Aligner::Semantic(emb) => greedy_align(b, &SemanticDistance { embeddings: emb }),
            Aligner::Phonetic { src_to_tgt, tgt_to_src } => greedy_align(
                b,
                &PhoneticDistance {
                    src_to_tgt,
                    tgt_to_src,
                },
            ),
            Aligner::Lsp(model) => {
                let p = posterior_align(b, model);
                return SentenceAlignment {
                    alignment: p.alignment,
                    confidence: Some(p.confidence),
                };
            }
        };
        SentenceAlignment {
            alignment,
            confidence: None,
        }
    }

    /// Align a whole corpus in parallel on the current rayon pool.
    pub fn align_corpus(&self, corpus: &[Bitext]) -> Vec<SentenceAlignment> {
        corpus.par_iter().map(|b| self.align(b)).collect()
    }
}

/// Forward and reverse lexical models.
pub fn train_lexical(corpus: &[Bitext], config: &TrainConfig) -> Result<(LexicalModel, LexicalModel)> {
    let forward = em_train(corpus, config)?;
    let swapped: Vec<Bitext> = corpus.iter().map(Bitext::swapped).collect();
    let reverse = em_train(&swapped, config)?;
    Ok((forward, reverse))
}

/// Relative-frequency table from an aligner's output over `corpus`.
pub fn estimate_from_aligner(corpus: &[Bitext], aligner: &Aligner, mechanism: Mechanism) -> Result<TranslationTable> {
    let parts: Vec<Result<LinkCounts>> = corpus
        .par_chunks(BLOCK_LINES)
        .map(|chunk| {
            let mut counts = LinkCounts::new();
            for b in chunk {
                counts.add(b, &aligner.align(b).alignment)?;
            }
            Ok(counts)
        })
        .collect();
    let mut counts = LinkCounts::new();
    for part in parts {
        counts.merge(part?);
    }
    Ok(counts.into_table(mechanism))
}

/// Everything needed to build the three single-signal aligners.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub embeddings: Option<EmbeddingTable>,
    pub translit_src: Option<TransliterationTable>,
    pub translit_tgt: Option<TransliterationTable>,
}

impl Resources {
    pub fn semantic(&self) -> Result<Aligner> {
        self.embeddings
            .clone()
            .map(Aligner::Semantic)
            .ok_or_else(|| Error::Config("semantic alignment requires --embeddings".into()))
    }

    pub fn phonetic(&self) -> Result<Aligner> {
        if self.translit_src.is_none() && self.translit_tgt.is_none() {
            return Err(Error::Config(
                "phonetic alignment requires --translit-src and/or --translit-tgt".into(),
            ));
        }
        Ok(Aligner::Phonetic {
            src_to_tgt: self.translit_src.clone().unwrap_or_default(),
            tgt_to_src: self.translit_tgt.clone().unwrap_or_default(),
        })
    }
}

/// Train whichever tables `method` needs, in memory.
pub struct TrainedTables {
    pub lexical_models: Option<(LexicalModel, LexicalModel)>,
    pub tables: Vec<TranslationTable>,
}

pub fn train_tables(
    corpus: &[Bitext],
    method: Method,
    resources: &Resources,
    config: &TrainConfig,
) -> Result<TrainedTables> {
    let mut lexical_models = None;
    let mut tables = Vec::new();
    for &mechanism in method.mechanisms() {
        let aligner = match mechanism {
            Mechanism::Lexical => {
                let (forward, reverse) = train_lexical(corpus, config)?;
                lexical_models = Some((forward.clone(), reverse.clone()));
                Aligner::Lexical { forward, reverse }
            }
            Mechanism::Semantic => resources.semantic()?,
            Mechanism::Phonetic => resources.phonetic()?,
        };
        tables.push(estimate_from_aligner(corpus, &aligner, mechanism)?);
    }
    Ok(TrainedTables { lexical_models, tables })
}

// ---------------------------------------------------------------------------
// Helpers for file commands

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::Config("threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).in_file(path))
}

/// Stream `path` in blocks of lines, calling `block` with the lines and the
/// 0-based index of the first one.
fn for_each_block<F>(path: &Path, mut block: F) -> Result<usize>
where
    F: FnMut(&[String], usize) -> Result<()>,
{
    let mut reader = corpus::open(path)?;
    let mut lines = Vec::with_capacity(BLOCK_LINES);
    let mut first = 0;
    loop {
        lines.clear();
        for _ in 0..BLOCK_LINES {
            let mut line = String::new();
            let read = reader
                .read_line(&mut line)
                .map_err(|e| Error::from(e).at(path, first + lines.len() + 1))?;
            if read == 0 {
                break;
            }
            lines.push(chomp(&line).to_owned());
        }
        if lines.is_empty() {
            return Ok(first);
        }
        block(&lines, first)?;
        first += lines.len();
    }
}

fn parse_block(path: &Path, lines: &[String], first: usize) -> Result<Vec<Bitext>> {
    lines
        .par_iter()
        .enumerate()
        .map(|(k, line)| parse_bitext_line(line, (first + k) as u64).map_err(|e| e.at(path, first + k + 1)))
        .collect()
}

fn load_table(path: &Path) -> Result<TranslationTable> {
    if !path.exists() {
        return Err(Error::Config(format!("missing table dump {}", path.display())));
    }
    TranslationTable::parse_dump(corpus::open(path)?).map_err(|e| relocate(e, path))
}

fn load_lexical(path: &Path) -> Result<LexicalModel> {
    if !path.exists() {
        return Err(Error::Config(format!("missing lexical model {}", path.display())));
    }
    LexicalModel::parse_dump(corpus::open(path)?).map_err(|e| relocate(e, path))
}

/// Replace placeholder paths in parse errors with the real file.
fn relocate(e: Error, path: &Path) -> Error {
    match e {
        Error::At { line, source, .. } => Error::At {
            path: path.into(),
            line,
            source,
        },
        Error::File { .. } => e,
        other => other.in_file(path),
    }
}

pub fn load_lsp_model(model_dir: &Path, smoothing_eps: f64) -> Result<LspModel> {
    if !(smoothing_eps >= 0.0 && smoothing_eps.is_finite()) {
        return Err(Error::Config(format!("smoothing-eps must be >= 0, got {smoothing_eps}")));
    }
    let [lex, sem, pho] = Mechanism::ALL.map(|k| load_table(&model_dir.join(table_file(k))));
    Ok(LspModel::new(lex?, sem?, pho?)?.with_smoothing(smoothing_eps))
}

fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(config)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub sentences: u64,
    pub outputs: Vec<String>,
}

fn write_manifest<T: Serialize>(path: &Path, command: &str, config: &T, sentences: u64, outputs: Vec<String>) -> Result<Manifest> {
    let manifest = Manifest {
        command: command.into(),
        config_hash: config_hash(config)?,
        config: serde_json::to_value(config)?,
        sentences,
        outputs,
    };
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    writeln!(out)?;
    out.flush()?;
    Ok(manifest)
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Resource file paths shared by several commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResourcePaths {
    pub embeddings: Option<PathBuf>,
    pub translit_src: Option<PathBuf>,
    pub translit_tgt: Option<PathBuf>,
}

impl ResourcePaths {
    fn load(&self, method: Method) -> Result<Resources> {
        let needs = method.mechanisms();
        let mut res = Resources::default();
        if needs.contains(&Mechanism::Semantic) {
            let path = self
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config(format!("method {method} requires --embeddings")))?;
            res.embeddings = Some(corpus::read_embeddings(path)?);
        }
        if needs.contains(&Mechanism::Phonetic) {
            if self.translit_src.is_none() && self.translit_tgt.is_none() {
                return Err(Error::Config(format!(
                    "method {method} requires --translit-src and/or --translit-tgt"
                )));
            }
            res.translit_src = self.translit_src.as_deref().map(corpus::read_transliteration).transpose()?;
            res.translit_tgt = self.translit_tgt.as_deref().map(corpus::read_transliteration).transpose()?;
        }
        Ok(res)
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    pub method: Method,
    pub bitext: PathBuf,
    pub model_dir: PathBuf,
    #[serde(flatten)]
    pub resources: ResourcePaths,
    pub train: TrainConfig,
    #[serde(skip)]
    pub threads: usize,
}

/// Train the tables `method` needs and write them, with a manifest, into
/// `model_dir`.
pub fn train(opts: &TrainOptions) -> Result<Manifest> {
    opts.train.validate()?;
    let pool = thread_pool(opts.threads)?;
    let resources = opts.resources.load(opts.method)?;
    let corpus = corpus::read_bitext(&opts.bitext)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.in_file(&opts.bitext));
    }
    let trained = pool.install(|| train_tables(&corpus, opts.method, &resources, &opts.train))?;

    fs::create_dir_all(&opts.model_dir).map_err(|e| Error::from(e).in_file(&opts.model_dir))?;
    let mut outputs = Vec::new();
    if let Some((forward, reverse)) = &trained.lexical_models {
        for (model, name) in [(forward, LEXICAL_FORWARD_FILE), (reverse, LEXICAL_REVERSE_FILE)] {
            let mut out = create(&opts.model_dir.join(name))?;
            model.dump(&mut out)?;
            out.flush()?;
            outputs.push(name.to_owned());
        }
    }
    for table in &trained.tables {
        let name = table_file(table.mechanism());
        let mut out = create(&opts.model_dir.join(&name))?;
        table.dump(&mut out)?;
        out.flush()?;
        outputs.push(name);
    }
    log::info!("trained {} on {} sentences", opts.method, corpus.len());
    write_manifest(
        &opts.model_dir.join(MANIFEST_FILE),
        "train",
        opts,
        corpus.len() as u64,
        outputs,
    )
}

// ---------------------------------------------------------------------------
// align

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignOptions {
    pub method: Method,
    pub bitext: PathBuf,
    pub output: PathBuf,
    /// Directory with trained dumps (lexical and lsp methods).
    pub model_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub resources: ResourcePaths,
    /// Where to write per-target confidences (lsp only).
    pub confidence: Option<PathBuf>,
    pub smoothing_eps: f64,
    #[serde(skip)]
    pub threads: usize,
}

fn build_aligner(opts: &AlignOptions) -> Result<Aligner> {
    let model_dir = || {
        opts.model_dir
            .as_deref()
            .ok_or_else(|| Error::Config(format!("method {} requires --model-dir", opts.method)))
    };
    match opts.method {
        Method::Lexical => {
            let dir = model_dir()?;
            Ok(Aligner::Lexical {
                forward: load_lexical(&dir.join(LEXICAL_FORWARD_FILE))?,
                reverse: load_lexical(&dir.join(LEXICAL_REVERSE_FILE))?,
            })
        }
        Method::Semantic => opts.resources.load(opts.method)?.semantic(),
        Method::Phonetic => opts.resources.load(opts.method)?.phonetic(),
        Method::Lsp => Ok(Aligner::Lsp(load_lsp_model(model_dir()?, opts.smoothing_eps)?)),
    }
}

fn format_confidence(conf: &[Option<f64>]) -> String {
    conf.iter()
        .map(|c| c.map_or_else(|| "-".to_owned(), |v| v.to_string()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse one confidence line: a value or `-` per target position.
pub fn parse_confidence(line: &str) -> Result<Vec<Option<f64>>> {
    line.split_whitespace()
        .map(|tok| match tok {
            "-" => Ok(None),
            v => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::NonNumericValue(v.to_owned())),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignSummary {
    pub sentences: u64,
    pub links: u64,
}

/// Write one Pharaoh line per bitext line, in input order.
pub fn align(opts: &AlignOptions) -> Result<AlignSummary> {
    let pool = thread_pool(opts.threads)?;
    if opts.confidence.is_some() && opts.method != Method::Lsp {
        return Err(Error::Config("--confidence is only produced by --method lsp".into()));
    }
    let aligner = build_aligner(opts)?;
    let mut out = create(&opts.output)?;
    let mut conf_out = opts.confidence.as_deref().map(create).transpose()?;
    let mut summary = AlignSummary::default();
    let sentences = for_each_block(&opts.bitext, |lines, first| {
        let results: Vec<SentenceAlignment> = pool.install(|| {
            let corpus = parse_block(&opts.bitext, lines, first)?;
            Ok::<_, Error>(aligner.align_corpus(&corpus))
        })?;
        for r in results {
            writeln!(out, "{}", r.alignment)?;
            summary.links += r.alignment.len() as u64;
            if let (Some(w), Some(c)) = (conf_out.as_mut(), r.confidence.as_ref()) {
                writeln!(w, "{}", format_confidence(c))?;
            }
        }
        Ok(())
    })?;
    out.flush()?;
    if let Some(w) = conf_out.as_mut() {
        w.flush()?;
    }
    summary.sentences = sentences as u64;
    write_manifest(
        &manifest_path(&opts.output),
        "align",
        opts,
        summary.sentences,
        vec![opts.output.display().to_string()],
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// project

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectOptions {
    pub bitext: PathBuf,
    pub alignments: PathBuf,
    /// Span TSV; exclusive with `tags`.
    pub spans: Option<PathBuf>,
    /// BIO tags, one line per bitext; exclusive with `spans`.
    pub tags: Option<PathBuf>,
    pub confidence: Option<PathBuf>,
    pub output: PathBuf,
    pub projection: ProjectionConfig,
    /// Drop pairs seen fewer times than this.
    pub min_count: u64,
    /// Drop pairs with a lower mean confidence.
    pub min_score: f64,
    #[serde(skip)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    #[serde(flatten)]
    pub mining: MiningStats,
    pub pairs: u64,
    pub filtered: u64,
}

fn spans_by_sentence(path: &Path) -> Result<BTreeMap<u64, Vec<EntitySpan>>> {
    let mut map: BTreeMap<u64, Vec<EntitySpan>> = BTreeMap::new();
    for span in corpus::read_spans(path)? {
        map.entry(span.sentence_id).or_default().push(span);
    }
    Ok(map)
}

fn read_block_lines<R: BufRead>(reader: &mut R, path: &Path, first: usize, count: usize) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut line = String::new();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::from(e).at(path, first + k + 1))?;
        if read == 0 {
            return Err(Error::LengthMismatch {
                expected: first + count,
                found: first + k,
            }
            .in_file(path));
        }
        out.push(chomp(&line).to_owned());
    }
    Ok(out)
}

/// Project entity spans through alignments and write the mined lexicon as
/// JSONL, sorted by descending count.
pub fn project(opts: &ProjectOptions) -> Result<ProjectSummary> {
    opts.projection.validate()?;
    let pool = thread_pool(opts.threads)?;
    let span_map = match (&opts.spans, &opts.tags) {
        (Some(p), None) => Some(spans_by_sentence(p)?),
        (None, Some(_)) => None,
        _ => return Err(Error::Config("project needs exactly one of --spans or --tags".into())),
    };
    let mut aligns = corpus::open(&opts.alignments)?;
    let mut tags = opts.tags.as_deref().map(corpus::open).transpose()?;
    let mut confs = opts.confidence.as_deref().map(corpus::open).transpose()?;

    let mut builder = LexiconBuilder::new();
    let sentences = for_each_block(&opts.bitext, |lines, first| {
        let count = lines.len();
        let align_lines = read_block_lines(&mut aligns, &opts.alignments, first, count)?;
        let tag_lines = match (tags.as_mut(), &opts.tags) {
            (Some(r), Some(p)) => Some(read_block_lines(r, p, first, count)?),
            _ => None,
        };
        let conf_lines = match (confs.as_mut(), &opts.confidence) {
            (Some(r), Some(p)) => Some(read_block_lines(r, p, first, count)?),
            _ => None,
        };
        let part = pool.install(|| {
            let corpus = parse_block(&opts.bitext, lines, first)?;
            let parts: Vec<Result<LexiconBuilder>> = corpus
                .par_iter()
                .enumerate()
                .map(|(k, b)| {
                    let lineno = first + k + 1;
                    let alignment = parse_alignment(&align_lines[k]).map_err(|e| e.at(&opts.alignments, lineno))?;
                    alignment
                        .check_range(b.m(), b.n())
                        .map_err(|e| e.at(&opts.alignments, lineno))?;
                    let spans = match (&tag_lines, &span_map) {
                        (Some(t), _) => {
                            let labels: Vec<&str> = t[k].split_whitespace().collect();
                            extract_entity_spans(&labels, b)
                                .map_err(|e| e.at(opts.tags.as_deref().unwrap_or(Path::new("")), lineno))?
                        }
                        (None, Some(map)) => map.get(&b.id).cloned().unwrap_or_default(),
                        (None, None) => Vec::new(),
                    };
                    let conf = match &conf_lines {
                        Some(c) => Some(
                            parse_confidence(&c[k])
                                .map_err(|e| e.at(opts.confidence.as_deref().unwrap_or(Path::new("")), lineno))?,
                        ),
                        None => None,
                    };
                    let mut builder = LexiconBuilder::new();
                    builder
                        .add_sentence(b, &spans, &alignment, conf.as_deref(), &opts.projection)
                        .map_err(|e| match &opts.spans {
                            Some(p) => Error::Malformed(format!("sentence {}: {e}", b.id)).in_file(p),
                            None => e,
                        })?;
                    Ok(builder)
                })
                .collect();
            let mut merged = LexiconBuilder::new();
            for p in parts {
                merged.merge(p?);
            }
            Ok::<_, Error>(merged)
        })?;
        builder.merge(part);
        Ok(())
    })?;

    // leftover lines in the aligned inputs mean the files disagree
    let mut extra = String::new();
    if aligns.read_line(&mut extra)? > 0 {
        return Err(Error::LengthMismatch {
            expected: sentences,
            found: sentences + 1,
        }
        .in_file(&opts.alignments));
    }
    if let Some(map) = &span_map {
        if let Some((&id, _)) = map.range(sentences as u64..).next() {
            return Err(Error::UnknownSentence(id).in_file(opts.spans.as_deref().unwrap()));
        }
    }

    let stats = builder.stats;
    let pairs = builder.finish();
    let total = pairs.len() as u64;
    let mut out = create(&opts.output)?;
    let mut written = 0u64;
    for pair in pairs
        .iter()
        .filter(|p| p.count >= opts.min_count && p.score >= opts.min_score)
    {
        serde_json::to_writer(&mut out, pair)?;
        writeln!(out)?;
        written += 1;
    }
    out.flush()?;
    let summary = ProjectSummary {
        mining: stats,
        pairs: written,
        filtered: total - written,
    };
    write_manifest(
        &manifest_path(&opts.output),
        "project",
        opts,
        sentences as u64,
        vec![opts.output.display().to_string()],
    )?;
    Ok(summary)
}

pub fn read_pairs(path: &Path) -> Result<Vec<EntityPair>> {
    let mut out = Vec::new();
    for (idx, line) in corpus::open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::from(e).at(path, idx + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::from(e).at(path, idx + 1))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalCommand {
    pub mined: PathBuf,
    pub gold: PathBuf,
    /// Span file used for source-entity corpus frequencies. Without it the
    /// summed mined counts per source are used.
    pub spans: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub options: EvalOptions,
}

pub fn eval(cmd: &EvalCommand) -> Result<EvaluationReport> {
    let mined = read_pairs(&cmd.mined)?;
    let gold = GoldLexicon::from_rows(corpus::read_gold_rows(&cmd.gold)?).map_err(|e| e.in_file(&cmd.gold))?;
    let mut frequency: HashMap<String, u64> = HashMap::new();
    match &cmd.spans {
        Some(p) => {
            for span in corpus::read_spans(p)? {
                *frequency.entry(span.surface).or_default() += 1;
            }
        }
        None => {
            for pair in &mined {
                *frequency.entry(pair.source_surface.clone()).or_default() += pair.count;
            }
        }
    }
    let report = evaluate_lexicon(&mined, &gold, &frequency, cmd.options);
    if let Some(path) = &cmd.output {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOptions {
    pub model_dir: PathBuf,
    pub output: PathBuf,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

/// Generate a synthetic bitext from trained tables. Source words are drawn
/// uniformly from the lexical table's source vocabulary; both lengths are
/// uniform in `[min_len, max_len]`.
pub fn sample(opts: &SampleOptions) -> Result<u64> {
    if opts.min_len == 0 || opts.min_len > opts.max_len {
        return Err(Error::Config(format!(
            "length range must satisfy 1 <= min <= max, got {}..{}",
            opts.min_len, opts.max_len
        )));
    }
    let model = load_lsp_model(&opts.model_dir, 0.0)?;
    let mut vocab: Vec<&str> = model.table(Mechanism::Lexical).source_words().collect();
    vocab.sort_unstable();
    if vocab.is_empty() && opts.sentences > 0 {
        return Err(Error::Config("lexical table has no source words to sample from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = create(&opts.output)?;
    for _ in 0..opts.sentences {
        let m = rng.gen_range(opts.min_len..=opts.max_len);
        let source: Vec<String> = (0..m).map(|_| vocab[rng.gen_range(0..vocab.len())].to_owned()).collect();
        let n = rng.gen_range(opts.min_len..=opts.max_len);
        let target: Vec<String> = sample_translation_traced(&source, &model, n, &mut rng)
            .into_iter()
            .map(|d| d.token)
            .collect();
        writeln!(out, "{}{}{}", source.join(" "), corpus::BITEXT_DELIMITER, target.join(" "))?;
    }
    out.flush()?;
    write_manifest(
        &manifest_path(&opts.output),
        "sample",
        opts,
        opts.sentences as u64,
        vec![opts.output.display().to_string()],
    )?;
    Ok(opts.sentences as u64)
}

// ---------------------------------------------------------------------------
// stats

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: u64,
    pub source_tokens: u64,
    pub target_tokens: u64,
    pub source_types: u64,
    pub target_types: u64,
    pub mean_source_len: f64,
    pub mean_target_len: f64,
    pub max_source_len: u64,
    pub max_target_len: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_spans: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_types: Option<BTreeMap<String, u64>>,
}

pub fn stats(bitext: &Path, spans: Option<&Path>) -> Result<CorpusStats> {
    let mut s = CorpusStats::default();
    let mut src_types: std::collections::HashSet<String> = Default::default();
    let mut tgt_types: std::collections::HashSet<String> = Default::default();
    for_each_block(bitext, |lines, first| {
        for b in parse_block(bitext, lines, first)? {
            s.sentences += 1;
            s.source_tokens += b.m() as u64;
            s.target_tokens += b.n() as u64;
            s.max_source_len = s.max_source_len.max(b.m() as u64);
            s.max_target_len = s.max_target_len.max(b.n() as u64);
            src_types.extend(b.source);
            tgt_types.extend(b.target);
        }
        Ok(())
    })?;
    s.source_types = src_types.len() as u64;
    s.target_types = tgt_types.len() as u64;
    if s.sentences > 0 {
        s.mean_source_len = s.source_tokens as f64 / s.sentences as f64;
        s.mean_target_len = s.target_tokens as f64 / s.sentences as f64;
    }
    if let Some(p) = spans {
        let mut types = BTreeMap::new();
        let mut count = 0;
        for span in corpus::read_spans(p)? {
            count += 1;
            *types.entry(span.entity_type).or_insert(0) += 1;
        }
        s.entity_spans = Some(count);
        s.entity_types = Some(types);
    }
    Ok(s)
}
