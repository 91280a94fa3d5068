//! Translation tables per alignment mechanism and the three-way mixture
//! model built on top of them.
//!
//! Each mechanism (lexical, semantic, phonetic) contributes a conditional
//! distribution over target words given a source word, estimated by relative
//! frequency from that mechanism's alignments. The mixture picks a latent
//! mechanism uniformly for every target position, so the alignment posterior
//! for target `t_j` is proportional to the plain average of the three tables'
//! probabilities.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{chomp, Alignment, Bitext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Lexical,
    Semantic,
    Phonetic,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Lexical, Mechanism::Semantic, Mechanism::Phonetic];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Lexical => "lexical",
            Mechanism::Semantic => "semantic",
            Mechanism::Phonetic => "phonetic",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" => Ok(Mechanism::Lexical),
            "semantic" => Ok(Mechanism::Semantic),
            "phonetic" => Ok(Mechanism::Phonetic),
            other => Err(Error::Malformed(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// String interner.
#[derive(Debug, Clone, Default)]
pub(crate) struct Vocab {
    ids: HashMap<String, u32>,
    words: Vec<String>,
}

impl Vocab {
    pub(crate) fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(word.to_owned(), id);
        self.words.push(word.to_owned());
        id
    }

    pub(crate) fn get(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub(crate) fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.words.len()
    }
}

/// Conditional distributions θ(t | s) for one mechanism, with a NULL source
/// row. Lookups of absent pairs return 0.
///
/// Rows are stored sorted by target id, so iteration and summation order are
/// fixed for a given table.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    mechanism: Mechanism,
    pub(crate) sources: Vocab,
    pub(crate) targets: Vocab,
    /// Row 0 is NULL; source id `s` lives at row `s + 1`.
    pub(crate) rows: Vec<Vec<(u32, f64)>>,
}

pub(crate) const NULL_ROW: usize = 0;

impl TranslationTable {
    pub(crate) fn with_vocab(mechanism: Mechanism, sources: Vocab, targets: Vocab, rows: Vec<Vec<(u32, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), sources.len() + 1);
        TranslationTable {
            mechanism,
            sources,
            targets,
            rows,
        }
    }

    /// Build from raw (source, target, weight) triples; each row is
    /// normalized to sum to one. `None` is the NULL source. Rows with zero
    /// total weight are left empty.
    ///
    /// Vocabulary ids are assigned in sorted order so the result does not
    /// depend on the order of `counts`.
    pub fn from_counts<I>(mechanism: Mechanism, counts: I) -> TranslationTable
    where
        I: IntoIterator<Item = (Option<String>, String, f64)>,
    {
        let mut merged: HashMap<(Option<String>, String), f64> = HashMap::new();
        for (s, t, c) in counts {
            *merged.entry((s, t)).or_insert(0.0) += c;
        }
        Self::from_merged(mechanism, merged, true)
    }

    fn from_merged(
        mechanism: Mechanism,
        merged: HashMap<(Option<String>, String), f64>,
        normalize: bool,
    ) -> TranslationTable {
        let mut entries: Vec<((Option<String>, String), f64)> =
            merged.into_iter().filter(|(_, c)| *c > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));

        let mut target_words: Vec<&str> = entries.iter().map(|((_, t), _)| t.as_str()).collect();
        target_words.sort_unstable();
        target_words.dedup();
        let mut targets = Vocab::default();
        for t in target_words {
            targets.intern(t);
        }
        let mut sources = Vocab::default();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new()];
        for ((s, t), c) in &entries {
            let row = match s {
                None => NULL_ROW,
                Some(s) => {
                    let id = sources.intern(s) as usize + 1;
                    if rows.len() <= id {
                        rows.push(Vec::new());
                    }
                    id
                }
            };
            rows[row].push((targets.get(t).expect("interned"), *c));
        }
        for row in &mut rows {
            row.sort_by_key(|&(t, _)| t);
            if normalize {
                let total: f64 = row.iter().map(|&(_, c)| c).sum();
                for e in row.iter_mut() {
                    e.1 /= total;
                }
            }
        }
        TranslationTable {
            mechanism,
            sources,
            targets,
            rows,
        }
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub(crate) fn row_index(&self, source: Option<&str>) -> Option<usize> {
        match source {
            None => Some(NULL_ROW),
            Some(s) => self.sources.get(s).map(|id| id as usize + 1),
        }
    }

    pub(crate) fn prob_ids(&self, row: usize, target: u32) -> f64 {
        let row = &self.rows[row];
        match row.binary_search_by_key(&target, |&(t, _)| t) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    /// θ(target | source); `None` is the NULL source.
    pub fn prob(&self, source: Option<&str>, target: &str) -> f64 {
        match (self.row_index(source), self.targets.get(target)) {
            (Some(r), Some(t)) => self.prob_ids(r, t),
            _ => 0.0,
        }
    }

    /// Entries of one row in target-id order.
    pub fn row(&self, source: Option<&str>) -> Vec<(&str, f64)> {
        self.row_index(source)
            .map(|r| {
                self.rows[r]
                    .iter()
                    .map(|&(t, p)| (self.targets.word(t), p))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Source words with a stored row, NULL excluded, in id order.
    pub fn source_words(&self) -> impl Iterator<Item = &str> {
        self.sources.words.iter().map(String::as_str)
    }

    pub fn target_vocab_size(&self) -> usize {
        self.targets.len()
    }

    /// Sum of every non-empty row, NULL row first.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| r.iter().map(|&(_, p)| p).sum())
            .collect()
    }

    /// Highest-probability target for a source word; ties go to the
    /// lexicographically smaller target.
    pub fn argmax(&self, source: Option<&str>) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (t, p) in self.row(source) {
            best = match best {
                Some((bt, bp)) if bp > p || (bp == p && bt <= t) => Some((bt, bp)),
                _ => Some((t, p)),
            };
        }
        best.map(|(t, _)| t)
    }

    /// Number of stored (source, target) entries.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Write `mechanism<TAB>source<TAB>target<TAB>theta` rows sorted by
    /// source, then descending θ, then target. The NULL source is written as
    /// an empty field.
    pub fn dump<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut order: Vec<(usize, &str)> = (0..self.sources.len())
            .map(|s| (s + 1, self.sources.word(s as u32)))
            .collect();
        order.sort_by(|a, b| a.1.cmp(b.1));
        order.insert(0, (NULL_ROW, ""));
        for (row, word) in order {
            let mut entries: Vec<(&str, f64)> = self.rows[row]
                .iter()
                .map(|&(t, p)| (self.targets.word(t), p))
                .collect();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            for (t, p) in entries {
                writeln!(out, "{}\t{}\t{}\t{}", self.mechanism, word, t, p)?;
            }
        }
        Ok(())
    }

    /// Read a dump written by [`TranslationTable::dump`]. Lines starting
    /// with `#` are ignored.
    pub fn parse_dump<R: BufRead>(reader: R) -> Result<TranslationTable> {
        let mut mechanism: Option<Mechanism> = None;
        let mut merged = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let ctx = |e: Error| e.at("<table>", lineno);
            let line = line.map_err(|e| ctx(e.into()))?;
            let line = chomp(&line);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [mech, src, tgt, theta] = fields[..] else {
                return Err(ctx(Error::Malformed("table row needs 4 tab-separated fields".into())));
            };
            let mech: Mechanism = mech.parse().map_err(ctx)?;
            if *mechanism.get_or_insert(mech) != mech {
                return Err(ctx(Error::Malformed("mixed mechanisms in one table".into())));
            }
            let theta: f64 = theta
                .parse()
                .map_err(|_| ctx(Error::NonNumericValue(theta.to_owned())))?;
            if !(0.0..=1.0).contains(&theta) {
                return Err(ctx(Error::Malformed(format!("probability {theta} outside [0, 1]"))));
            }
            if tgt.is_empty() {
                return Err(ctx(Error::Malformed("empty target word".into())));
            }
            let src = (!src.is_empty()).then(|| src.to_owned());
            merged.insert((src, tgt.to_owned()), theta);
        }
        let mechanism = mechanism.ok_or(Error::EmptyFile)?;
        let table = Self::from_merged(mechanism, merged, false);
        for sum in table.row_sums() {
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Malformed(format!("table row sums to {sum}, expected 1")));
            }
        }
        Ok(table)
    }
}

/// Count accumulator for relative-frequency estimation. Counts are whole
/// numbers, so merging in any order gives identical results.
#[derive(Debug, Clone, Default)]
pub struct LinkCounts {
    counts: HashMap<(Option<String>, String), f64>,
}

impl LinkCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Count every link of `a` as one (source word, target word) event and
    /// every unlinked target position as a (NULL, target word) event.
    pub fn add(&mut self, b: &Bitext, a: &Alignment) -> Result<()> {
        a.check_range(b.m(), b.n())?;
        let mut linked = vec![false; b.n()];
        for (i, j) in a.iter() {
            linked[j] = true;
            *self
                .counts
                .entry((Some(b.source[i].clone()), b.target[j].clone()))
                .or_insert(0.0) += 1.0;
        }
        for (j, _) in linked.iter().enumerate().filter(|(_, l)| !**l) {
            *self.counts.entry((None, b.target[j].clone())).or_insert(0.0) += 1.0;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: LinkCounts) {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0.0) += c;
        }
    }

    pub fn count(&self, source: Option<&str>, target: &str) -> f64 {
        self.counts
            .get(&(source.map(str::to_owned), target.to_owned()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn into_table(self, mechanism: Mechanism) -> TranslationTable {
        TranslationTable::from_merged(mechanism, self.counts, true)
    }
}

/// Relative-frequency estimate of θ(t | s) from one mechanism's alignments.
pub fn estimate_table(corpus: &[Bitext], alignments: &[Alignment], mechanism: Mechanism) -> Result<TranslationTable> {
    if corpus.len() != alignments.len() {
        return Err(Error::LengthMismatch {
            expected: corpus.len(),
            found: alignments.len(),
        });
    }
    let mut counts = LinkCounts::new();
    for (b, a) in corpus.iter().zip(alignments) {
        counts.add(b, a)?;
    }
    Ok(counts.into_table(mechanism))
}

/// The three-mechanism mixture with a uniform mechanism prior.
#[derive(Debug, Clone)]
pub struct LspModel {
    tables: [TranslationTable; 3],
    /// Additive smoothing applied to every table row at scoring time.
    pub smoothing_eps: f64,
}

impl LspModel {
    pub fn new(lexical: TranslationTable, semantic: TranslationTable, phonetic: TranslationTable) -> Result<Self> {
        for (t, want) in [&lexical, &semantic, &phonetic].iter().zip(Mechanism::ALL) {
            if t.mechanism() != want {
                return Err(Error::Config(format!(
                    "expected a {want} table, got a {} table",
                    t.mechanism()
                )));
            }
        }
        Ok(LspModel {
            tables: [lexical, semantic, phonetic],
            smoothing_eps: 0.0,
        })
    }

    pub fn with_smoothing(mut self, eps: f64) -> Self {
        self.smoothing_eps = eps;
        self
    }

    pub fn table(&self, mechanism: Mechanism) -> &TranslationTable {
        &self.tables[mechanism.index()]
    }

    pub fn tables(&self) -> &[TranslationTable; 3] {
        &self.tables
    }
}

/// Per-sentence id lookups for one table.
struct Resolved {
    rows: Vec<Option<usize>>,
    targets: Vec<Option<u32>>,
    vocab: f64,
}

fn resolve(table: &TranslationTable, b: &Bitext) -> Resolved {
    let rows = std::iter::once(Some(NULL_ROW))
        .chain(b.source.iter().map(|s| table.row_index(Some(s))))
        .map(|r| r.filter(|&r| !table.rows[r].is_empty()))
        .collect();
    let targets = b.target.iter().map(|t| table.targets.get(t)).collect();
    Resolved {
        rows,
        targets,
        vocab: table.target_vocab_size() as f64,
    }
}

/// Position-tie key shared by the lexical decoder and the posterior decoder:
/// distance of (i, j) from the diagonal, `i = 0` being NULL.
pub(crate) fn diagonal_distance(i: usize, j: usize, m: usize, n: usize) -> f64 {
    (i as f64 / m as f64 - j as f64 / n as f64).abs()
}

/// Argmax over `scores[0..=m]` for 1-based target position `j`, with ties
/// going toward the diagonal and then the smaller index. Returns `None` when
/// every score is zero.
pub(crate) fn pick_best(scores: &[f64], j: usize, m: usize, n: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s <= 0.0 {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = match s.total_cmp(&scores[b]) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => diagonal_distance(i, j, m, n) < diagonal_distance(b, j, m, n),
                };
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Mixture scores `score[i] = (1/3) Σ_k θ_k(s_i, t_j)` for every target
/// position `j` (0-based), with `i = 0` the NULL word.
pub fn posterior_scores(b: &Bitext, model: &LspModel) -> Vec<Vec<f64>> {
    let resolved: Vec<Resolved> = model.tables.iter().map(|t| resolve(t, b)).collect();
    let eps = model.smoothing_eps;
    let m = b.m();
    (0..b.n())
        .map(|j| {
            (0..=m)
                .map(|i| {
                    let mut total = 0.0;
                    for (table, r) in model.tables.iter().zip(&resolved) {
                        let Some(row) = r.rows[i] else { continue };
                        let theta = r.targets[j].map_or(0.0, |t| table.prob_ids(row, t));
                        total += if eps > 0.0 {
                            (theta + eps) / (1.0 + eps * r.vocab)
                        } else {
                            theta
                        };
                    }
                    total / 3.0
                })
                .collect()
        })
        .collect()
}

/// An alignment together with, for every target position, the normalized
/// posterior of its chosen link (`None` when unlinked).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorAlignment {
    pub alignment: Alignment,
    pub confidence: Vec<Option<f64>>,
}

/// Link every target word to its most probable source position under the
/// mixture. NULL winners and all-zero positions stay unlinked.
pub fn posterior_align(b: &Bitext, model: &LspModel) -> PosteriorAlignment {
    let (m, n) = (b.m(), b.n());
    let mut alignment = Alignment::new();
    let mut confidence = vec![None; n];
    for (j, scores) in posterior_scores(b, model).iter().enumerate() {
        if let Some(i) = pick_best(scores, j + 1, m, n).filter(|&i| i > 0) {
            let total: f64 = scores.iter().sum();
            alignment.insert(i - 1, j);
            confidence[j] = Some(scores[i] / total);
        }
    }
    PosteriorAlignment { alignment, confidence }
}

/// One generated target position.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// 0 for NULL, otherwise the 1-based source position.
    pub position: usize,
    pub mechanism: Mechanism,
    pub token: String,
}

fn draw_from_row<R: Rng>(table: &TranslationTable, row: usize, rng: &mut R) -> Option<String> {
    let entries = &table.rows[row];
    let total: f64 = entries.iter().map(|&(_, p)| p).sum();
    if entries.is_empty() || total <= 0.0 {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &(t, p) in entries {
        acc += p;
        if u < acc {
            return Some(table.targets.word(t).to_owned());
        }
    }
    entries.last().map(|&(t, _)| table.targets.word(t).to_owned())
}

/// Run the generative story for `n` target positions, recording every draw.
///
/// When the drawn (mechanism, source) row is empty the other mechanisms are
/// tried in lexical, semantic, phonetic order. If all three are empty, a NULL
/// draw is redirected to a uniformly drawn source position and a word draw
/// emits the source word itself.
pub fn sample_translation_traced<R: Rng>(source: &[String], model: &LspModel, n: usize, rng: &mut R) -> Vec<Draw> {
    assert!(!source.is_empty(), "source sentence must be non-empty");
    let m = source.len();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let position = rng.gen_range(0..=m);
        let mechanism = Mechanism::ALL[rng.gen_range(0..3)];
        let mut pos = position;
        let token = loop {
            let word = (pos > 0).then(|| source[pos - 1].as_str());
            let order = std::iter::once(mechanism).chain(Mechanism::ALL.into_iter().filter(|&k| k != mechanism));
            let found = order.into_iter().find_map(|k| {
                let table = model.table(k);
                table.row_index(word).and_then(|r| draw_from_row(table, r, rng))
            });
            match (found, word) {
                (Some(t), _) => break t,
                (None, Some(w)) => break w.to_owned(),
                (None, None) => pos = rng.gen_range(1..=m),
            }
        };
        out.push(Draw {
            position,
            mechanism,
            token,
        });
    }
    out
}

/// Sample a target sentence of length `n` for `source`, seeded.
pub fn sample_translation(source: &[String], model: &LspModel, n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_translation_traced(source, model, n, &mut rng)
        .into_iter()
        .map(|d| d.token)
        .collect()
}
