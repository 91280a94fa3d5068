//! Lexical word alignment: an IBM Model 2 variant whose distortion is a
//! single-parameter diagonal prior, trained by EM, decoded per target word
//! and symmetrized with grow-diag-final-and.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{chomp, Alignment, Bitext};
use crate::error::{Error, Result};
use crate::lsp::{pick_best, Mechanism, TranslationTable, Vocab, NULL_ROW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Diagonal tension; 0 gives a uniform distortion.
    pub lambda: f64,
    /// Prior mass of the NULL word.
    pub p0: f64,
    /// Number of contiguous corpus partitions whose expected counts are
    /// accumulated independently and merged in partition order.
    pub shards: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5,
            lambda: 4.0,
            p0: 0.08,
            shards: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.p0) {
            return Err(Error::Config(format!("p0 must be in [0, 1), got {}", self.p0)));
        }
        if self.shards == 0 {
            return Err(Error::Config("shards must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Source generates target.
    Forward,
    /// Target generates source; the model must have been trained on swapped
    /// bitexts. Links are still reported as (source, target).
    Reverse,
}

#[derive(Debug, Clone)]
pub struct LexicalModel {
    pub translation: TranslationTable,
    pub lambda: f64,
    pub p0: f64,
}

/// Unnormalized diagonal weights `exp(-λ |i/m - j/n|)` for `i = 1..=m` and
/// their sum.
struct DiagonalPrior {
    weights: Vec<f64>,
    z: f64,
}

impl DiagonalPrior {
    fn new(j: usize, m: usize, n: usize, lambda: f64) -> Self {
        let weights: Vec<f64> = (1..=m)
            .map(|i| (-lambda * crate::lsp::diagonal_distance(i, j, m, n)).exp())
            .collect();
        let z = weights.iter().sum();
        DiagonalPrior { weights, z }
    }

    /// Prior for `i` in `0..=m`.
    fn get(&self, i: usize, p0: f64) -> f64 {
        if i == 0 {
            p0
        } else {
            (1.0 - p0) * self.weights[i - 1] / self.z
        }
    }
}

/// P(a_j = i) for 1-based target position `j` and source position `i`
/// (`i = 0` is NULL).
pub fn alignment_prior(i: usize, j: usize, m: usize, n: usize, lambda: f64, p0: f64) -> Result<f64> {
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange { index: j, bound: n });
    }
    if i > m {
        return Err(Error::IndexOutOfRange { index: i, bound: m });
    }
    if i == 0 {
        return Ok(p0);
    }
    Ok(DiagonalPrior::new(j, m, n, lambda).get(i, p0))
}

/// A sentence as table coordinates: source rows (NULL first) and, per
/// source row, the offset of each target inside that row.
struct Encoded {
    rows: Vec<usize>,
    targets: Vec<u32>,
}

/// Co-occurrence structure shared by all EM iterations.
struct Cooc {
    sentences: Vec<Encoded>,
    /// Sorted target ids per row.
    row_targets: Vec<Vec<u32>>,
    /// Offset of each row in the flat parameter vector.
    offsets: Vec<usize>,
    sources: Vocab,
    targets: Vocab,
}

impl Cooc {
    fn build(corpus: &[Bitext]) -> Cooc {
        let mut sources = Vocab::default();
        let mut targets = Vocab::default();
        let sentences: Vec<Encoded> = corpus
            .iter()
            .map(|b| Encoded {
                rows: std::iter::once(NULL_ROW)
                    .chain(b.source.iter().map(|s| sources.intern(s) as usize + 1))
                    .collect(),
                targets: b.target.iter().map(|t| targets.intern(t)).collect(),
            })
            .collect();
        let mut row_targets: Vec<Vec<u32>> = vec![Vec::new(); sources.len() + 1];
        for e in &sentences {
            for &r in &e.rows {
                row_targets[r].extend_from_slice(&e.targets);
            }
        }
        for row in &mut row_targets {
            row.sort_unstable();
            row.dedup();
        }
        let mut offsets = Vec::with_capacity(row_targets.len() + 1);
        let mut acc = 0;
        for row in &row_targets {
            offsets.push(acc);
            acc += row.len();
        }
        offsets.push(acc);
        Cooc {
            sentences,
            row_targets,
            offsets,
            sources,
            targets,
        }
    }

    fn slot(&self, row: usize, target: u32) -> usize {
        let k = self.row_targets[row]
            .binary_search(&target)
            .expect("co-occurrence recorded at build time");
        self.offsets[row] + k
    }

    fn params(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

/// Expected counts and log-likelihood for one partition of the corpus.
fn e_step(cooc: &Cooc, sentences: &[Encoded], theta: &[f64], cfg: &TrainConfig) -> (Vec<f64>, f64) {
    let mut counts = vec![0.0; cooc.params()];
    let mut loglik = 0.0;
    let mut slots = Vec::new();
    let mut post = Vec::new();
    for e in sentences {
        let m = e.rows.len() - 1;
        let n = e.targets.len();
        for (jj, &t) in e.targets.iter().enumerate() {
            let prior = DiagonalPrior::new(jj + 1, m, n, cfg.lambda);
            slots.clear();
            post.clear();
            let mut total = 0.0;
            for (i, &r) in e.rows.iter().enumerate() {
                let slot = cooc.slot(r, t);
                let p = prior.get(i, cfg.p0) * theta[slot];
                slots.push(slot);
                post.push(p);
                total += p;
            }
            if total <= 0.0 {
                continue;
            }
            loglik += total.ln();
            for (&slot, &p) in slots.iter().zip(&post) {
                counts[slot] += p / total;
            }
        }
    }
    (counts, loglik)
}

fn run_e_step(cooc: &Cooc, theta: &[f64], cfg: &TrainConfig) -> (Vec<f64>, f64) {
    let per_shard = cooc.sentences.len().div_ceil(cfg.shards).max(1);
    let parts: Vec<(Vec<f64>, f64)> = cooc
        .sentences
        .par_chunks(per_shard)
        .map(|chunk| e_step(cooc, chunk, theta, cfg))
        .collect();
    // merge in partition order so the float sums are reproducible
    let mut iter = parts.into_iter();
    let (mut counts, mut loglik) = iter.next().unwrap_or_else(|| (vec![0.0; cooc.params()], 0.0));
    for (c, ll) in iter {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        loglik += ll;
    }
    (counts, loglik)
}

fn m_step(cooc: &Cooc, counts: &[f64], theta: &mut [f64]) {
    for r in 0..cooc.row_targets.len() {
        let range = cooc.offsets[r]..cooc.offsets[r + 1];
        let total: f64 = counts[range.clone()].iter().sum();
        for k in range {
            theta[k] = if total > 0.0 { counts[k] / total } else { 0.0 };
        }
    }
}

fn uniform_theta(cooc: &Cooc) -> Vec<f64> {
    let mut theta = vec![0.0; cooc.params()];
    for (r, row) in cooc.row_targets.iter().enumerate() {
        let p = 1.0 / row.len() as f64;
        theta[cooc.offsets[r]..cooc.offsets[r + 1]].fill(p);
    }
    theta
}

/// Train a lexical model and report the corpus log-likelihood before every
/// EM iteration and after the last one (`iterations + 1` values).
pub fn em_train_traced(corpus: &[Bitext], config: &TrainConfig) -> Result<(LexicalModel, Vec<f64>)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cooc = Cooc::build(corpus);
    let mut theta = uniform_theta(&cooc);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    for it in 0..config.iterations {
        let (counts, loglik) = run_e_step(&cooc, &theta, config);
        log::debug!("EM iteration {}: log-likelihood {loglik}", it + 1);
        trace.push(loglik);
        m_step(&cooc, &counts, &mut theta);
    }
    trace.push(run_e_step(&cooc, &theta, config).1);

    let rows = cooc
        .row_targets
        .iter()
        .enumerate()
        .map(|(r, targets)| {
            targets
                .iter()
                .zip(&theta[cooc.offsets[r]..cooc.offsets[r + 1]])
                .filter(|(_, &p)| p > 0.0)
                .map(|(&t, &p)| (t, p))
                .collect()
        })
        .collect();
    let translation = TranslationTable::with_vocab(Mechanism::Lexical, cooc.sources, cooc.targets, rows);
    Ok((
        LexicalModel {
            translation,
            lambda: config.lambda,
            p0: config.p0,
        },
        trace,
    ))
}

/// Train a lexical model with `config.iterations` rounds of EM.
///
/// θ starts uniform over the targets each source word (and NULL) co-occurs
/// with. Results do not depend on the number of threads; the shard count
/// only changes float summation order.
pub fn em_train(corpus: &[Bitext], config: &TrainConfig) -> Result<LexicalModel> {
    em_train_traced(corpus, config).map(|(m, _)| m)
}

/// Corpus log-likelihood `Σ_j log Σ_i prior(i, j) θ(s_i, t_j)`.
pub fn log_likelihood(corpus: &[Bitext], model: &LexicalModel) -> f64 {
    corpus
        .iter()
        .map(|b| {
            let (m, n) = (b.m(), b.n());
            let table = &model.translation;
            (1..=n)
                .map(|j| {
                    let prior = DiagonalPrior::new(j, m, n, model.lambda);
                    let t = &b.target[j - 1];
                    let total: f64 = (0..=m)
                        .map(|i| {
                            let s = (i > 0).then(|| b.source[i - 1].as_str());
                            prior.get(i, model.p0) * table.prob(s, t)
                        })
                        .sum();
                    if total > 0.0 {
                        total.ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum()
}

/// Best source position for every target word. NULL winners and unknown
/// target words produce no link.
pub fn viterbi_align(b: &Bitext, model: &LexicalModel, direction: Direction) -> Alignment {
    match direction {
        Direction::Forward => viterbi_forward(b, model),
        Direction::Reverse => viterbi_forward(&b.swapped(), model).transposed(),
    }
}

fn viterbi_forward(b: &Bitext, model: &LexicalModel) -> Alignment {
    let (m, n) = (b.m(), b.n());
    let table = &model.translation;
    let rows: Vec<Option<usize>> = std::iter::once(Some(NULL_ROW))
        .chain(b.source.iter().map(|s| table.row_index(Some(s))))
        .collect();
    let mut out = Alignment::new();
    let mut scores = vec![0.0; m + 1];
    for j in 1..=n {
        let prior = DiagonalPrior::new(j, m, n, model.lambda);
        let target = table.targets.get(&b.target[j - 1]);
        for (i, score) in scores.iter_mut().enumerate() {
            *score = match (rows[i], target) {
                (Some(r), Some(t)) => prior.get(i, model.p0) * table.prob_ids(r, t),
                _ => 0.0,
            };
        }
        if let Some(i) = pick_best(&scores, j, m, n).filter(|&i| i > 0) {
            out.insert(i - 1, j - 1);
        }
    }
    out
}

// Koehn's neighbor order: horizontal/vertical first, then diagonals.
const NEIGHBORS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// grow-diag-final-and symmetrization. Both inputs are in (source, target)
/// coordinates.
pub fn gdfa_symmetrize(forward: &Alignment, reverse: &Alignment, m: usize, n: usize) -> Result<Alignment> {
    forward.check_range(m, n)?;
    reverse.check_range(m, n)?;
    let union = forward.union(reverse);
    let mut out = forward.intersection(reverse);
    let mut src_cov = vec![false; m];
    let mut tgt_cov = vec![false; n];
    for (i, j) in out.iter() {
        src_cov[i] = true;
        tgt_cov[j] = true;
    }

    // grow-diag
    loop {
        let mut added = false;
        for j in 0..n {
            for i in 0..m {
                if !out.contains(i, j) {
                    continue;
                }
                for (di, dj) in NEIGHBORS {
                    let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                        continue;
                    };
                    if ni >= m || nj >= n {
                        continue;
                    }
                    if (!src_cov[ni] || !tgt_cov[nj]) && union.contains(ni, nj) && !out.contains(ni, nj) {
                        out.insert(ni, nj);
                        src_cov[ni] = true;
                        tgt_cov[nj] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    // final-and
    for directional in [forward, reverse] {
        for (i, j) in directional.iter() {
            if !src_cov[i] && !tgt_cov[j] {
                out.insert(i, j);
                src_cov[i] = true;
                tgt_cov[j] = true;
            }
        }
    }
    Ok(out)
}

impl LexicalModel {
    /// θ rows in the table dump format, preceded by `#lambda` and `#p0`
    /// header lines.
    pub fn dump<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "#lambda\t{}", self.lambda)?;
        writeln!(out, "#p0\t{}", self.p0)?;
        self.translation.dump(out)
    }

    pub fn parse_dump<R: BufRead>(mut reader: R) -> Result<LexicalModel> {
        let mut lambda = None;
        let mut p0 = None;
        let mut header = String::new();
        let mut lineno = 0;
        // header lines come first; peek without consuming table rows
        loop {
            let buf = reader.fill_buf()?;
            if buf.first() != Some(&b'#') {
                break;
            }
            header.clear();
            reader.read_line(&mut header)?;
            lineno += 1;
            let line = chomp(&header);
            let bad = || Error::Malformed(format!("bad header line {line:?}")).at("<lexical model>", lineno);
            match line.split_once('\t') {
                Some(("#lambda", v)) => lambda = Some(v.parse::<f64>().map_err(|_| bad())?),
                Some(("#p0", v)) => p0 = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let translation = TranslationTable::parse_dump(reader)?;
        if translation.mechanism() != Mechanism::Lexical {
            return Err(Error::Malformed("lexical model dump holds a non-lexical table".into()));
        }
        let (Some(lambda), Some(p0)) = (lambda, p0) else {
            return Err(Error::Malformed("lexical model dump lacks #lambda/#p0 header".into()));
        };
        Ok(LexicalModel { translation, lambda, p0 })
    }
}
