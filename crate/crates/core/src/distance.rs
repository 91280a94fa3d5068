//! Distance-guided word alignment.
//!
//! A [`WordDistance`] scores how far apart a source and a target word are
//! (lower is more alignable). [`greedy_align`] then links sentence positions
//! in ascending order of distance, letting the shorter side absorb the
//! length difference with extra links.

use crate::corpus::{Alignment, Bitext, EmbeddingTable, TransliterationTable};

/// Distance between a source word and a target word. Must be total and
/// deterministic.
pub trait WordDistance: Sync {
    fn distance(&self, source: &str, target: &str) -> f64;
}

impl<F> WordDistance for F
where
    F: Fn(&str, &str) -> f64 + Sync,
{
    fn distance(&self, source: &str, target: &str) -> f64 {
        self(source, target)
    }
}

fn lookup<'a>(emb: &'a EmbeddingTable, token: &str) -> Option<&'a [f32]> {
    emb.get(token).or_else(|| {
        let folded = token.to_lowercase();
        if folded != token {
            emb.get(&folded)
        } else {
            None
        }
    })
}

/// One minus the cosine similarity of the two word vectors, in `[0, 2]`.
///
/// Out-of-vocabulary words and zero vectors get 1.0, the distance of
/// orthogonal vectors.
pub fn semantic_distance(source: &str, target: &str, emb: &EmbeddingTable) -> f64 {
    let (Some(u), Some(v)) = (lookup(emb, source), lookup(emb, target)) else {
        return 1.0;
    };
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0)
}

#[derive(Debug, Clone, Copy)]
pub struct SemanticDistance<'a> {
    pub embeddings: &'a EmbeddingTable,
}

impl WordDistance for SemanticDistance<'_> {
    fn distance(&self, source: &str, target: &str) -> f64 {
        semantic_distance(source, target, self.embeddings)
    }
}

/// Edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (diag + usize::from(ca != cb)).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

/// Rewrite `word` with the table: one left-to-right pass, longest matching
/// left-hand side first, unmatched characters copied through.
pub fn transliterate(word: &str, table: &TransliterationTable) -> String {
    if table.is_identity() {
        return word.to_owned();
    }
    // byte offsets of every char boundary
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let chars = bounds.len() - 1;
    let mut out = String::with_capacity(word.len());
    let mut pos = 0;
    'outer: while pos < chars {
        let longest = table.max_lhs_chars().min(chars - pos);
        for len in (1..=longest).rev() {
            if let Some(rhs) = table.rule(&word[bounds[pos]..bounds[pos + len]]) {
                out.push_str(rhs);
                pos += len;
                continue 'outer;
            }
        }
        out.push_str(&word[bounds[pos]..bounds[pos + 1]]);
        pos += 1;
    }
    out
}

fn normalized_ld(a: &[char], b: &[char]) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    levenshtein_chars(a, b) as f64 / denom as f64
}

/// Minimum of three length-normalized edit distances: transliterated source
/// vs target, source vs transliterated target, and the raw pair. Words are
/// lowercased first. Result is in `[0, 1]`.
pub fn phonetic_distance(
    source: &str,
    target: &str,
    src_to_tgt: &TransliterationTable,
    tgt_to_src: &TransliterationTable,
) -> f64 {
    let s = source.to_lowercase();
    let t = target.to_lowercase();
    let s_chars: Vec<char> = s.chars().collect();
    let t_chars: Vec<char> = t.chars().collect();
    let ts: Vec<char> = transliterate(&s, src_to_tgt).chars().collect();
    let tt: Vec<char> = transliterate(&t, tgt_to_src).chars().collect();
    normalized_ld(&ts, &t_chars)
        .min(normalized_ld(&s_chars, &tt))
        .min(normalized_ld(&s_chars, &t_chars))
}

#[derive(Debug, Clone, Copy)]
pub struct PhoneticDistance<'a> {
    pub src_to_tgt: &'a TransliterationTable,
    pub tgt_to_src: &'a TransliterationTable,
}

impl WordDistance for PhoneticDistance<'_> {
    fn distance(&self, source: &str, target: &str) -> f64 {
        phonetic_distance(source, target, self.src_to_tgt, self.tgt_to_src)
    }
}

/// Greedy distance alignment of one bitext.
///
/// Every position of the longer side ends up with exactly one link, every
/// position of the shorter side with at least one, and the link count is
/// `max(m, n)`.
pub fn greedy_align<D: WordDistance + ?Sized>(b: &Bitext, dist: &D) -> Alignment {
    let (m, n) = (b.m(), b.n());
    let mut costs = Vec::with_capacity(m * n);
    for s in &b.source {
        for t in &b.target {
            costs.push(dist.distance(s, t));
        }
    }
    greedy_align_costs(m, n, &costs)
}

/// [`greedy_align`] over a precomputed row-major `m x n` cost matrix.
pub fn greedy_align_costs(m: usize, n: usize, costs: &[f64]) -> Alignment {
    assert_eq!(costs.len(), m * n, "cost matrix must be m x n");
    let mut order: Vec<usize> = (0..m * n).collect();
    // index order is (i, j) row-major, so a stable sort on cost alone
    // yields the (d, i, j) order
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));

    let mut aligned = Alignment::new();
    let mut covered_source = vec![false; m];
    let mut covered_target = vec![false; n];
    let mut free = m.abs_diff(n);
    for idx in order {
        let (i, j) = (idx / n, idx % n);
        if !covered_source[i] && !covered_target[j] {
            aligned.insert(i, j);
            covered_source[i] = true;
            covered_target[j] = true;
        } else if free > 0 && m < n && covered_source[i] && !covered_target[j] {
            aligned.insert(i, j);
            covered_target[j] = true;
            free -= 1;
        } else if free > 0 && m > n && covered_target[j] && !covered_source[i] {
            aligned.insert(i, j);
            covered_source[i] = true;
            free -= 1;
        }
    }
    aligned
}
