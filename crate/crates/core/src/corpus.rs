//! On-disk formats: bitext, BIO tags, entity spans, word vectors,
//! transliteration tables, Pharaoh alignments and gold lexicons.
//!
//! Every parser works on a single line or a single reader and is pure, so
//! callers are free to run them over disjoint lines in parallel.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use unicode_normalization::{is_nfc, UnicodeNormalization};

use crate::error::{Error, Result};

pub const BITEXT_DELIMITER: &str = " ||| ";

pub(crate) fn nfc(s: &str) -> String {
    if is_nfc(s) {
        s.to_owned()
    } else {
        s.nfc().collect()
    }
}

fn tokenize(side: &str) -> Vec<String> {
    side.split_whitespace().map(nfc).collect()
}

/// Strip a trailing `\n` / `\r\n`.
pub fn chomp(line: &str) -> &str {
    line.strip_suffix('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or(line)
}

/// A tokenized sentence pair. `id` is the 0-based line number in its file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitext {
    pub id: u64,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl Bitext {
    /// Build a bitext from already tokenized sides, applying the same
    /// normalization and checks as [`parse_bitext_line`].
    pub fn new<S: AsRef<str>, T: AsRef<str>>(id: u64, source: &[S], target: &[T]) -> Result<Bitext> {
        let source: Vec<String> = source.iter().flat_map(|t| tokenize(t.as_ref())).collect();
        let target: Vec<String> = target.iter().flat_map(|t| tokenize(t.as_ref())).collect();
        if source.is_empty() {
            return Err(Error::EmptySide("source"));
        }
        if target.is_empty() {
            return Err(Error::EmptySide("target"));
        }
        Ok(Bitext { id, source, target })
    }

    pub fn m(&self) -> usize {
        self.source.len()
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    /// The same pair with source and target exchanged.
    pub fn swapped(&self) -> Bitext {
        Bitext {
            id: self.id,
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

impl fmt::Display for Bitext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.source.join(" "), BITEXT_DELIMITER, self.target.join(" "))
    }
}

/// Parse one `source ||| target` line.
pub fn parse_bitext_line(line: &str, id: u64) -> Result<Bitext> {
    let (src, tgt) = chomp(line)
        .split_once(BITEXT_DELIMITER)
        .ok_or(Error::MissingDelimiter)?;
    let source = tokenize(src);
    if source.is_empty() {
        return Err(Error::EmptySide("source"));
    }
    let target = tokenize(tgt);
    if target.is_empty() {
        return Err(Error::EmptySide("target"));
    }
    Ok(Bitext { id, source, target })
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

/// Read a whole bitext file. Meant for tests and small corpora; the
/// pipeline streams instead.
pub fn read_bitext(path: &Path) -> Result<Vec<Bitext>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::from(e).at(path, idx + 1))?;
        out.push(parse_bitext_line(&line, idx as u64).map_err(|e| e.at(path, idx + 1))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Entity spans

/// A typed token span `[start, end)` on the source side of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub sentence_id: u64,
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
    pub surface: String,
}

impl EntitySpan {
    /// Build a span over `tokens`, deriving the surface.
    pub fn over(
        sentence_id: u64,
        tokens: &[String],
        start: usize,
        end: usize,
        entity_type: impl Into<String>,
    ) -> Result<EntitySpan> {
        if start >= end {
            return Err(Error::Malformed(format!("empty span {start}..{end}")));
        }
        if end > tokens.len() {
            return Err(Error::IndexOutOfRange {
                index: end,
                bound: tokens.len(),
            });
        }
        Ok(EntitySpan {
            sentence_id,
            start,
            end,
            entity_type: entity_type.into(),
            surface: tokens[start..end].join(" "),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Check range and surface against the sentence tokens.
    pub fn validate(&self, tokens: &[String]) -> Result<()> {
        let derived = EntitySpan::over(self.sentence_id, tokens, self.start, self.end, "")?;
        if derived.surface != self.surface {
            return Err(Error::SurfaceMismatch {
                expected: derived.surface,
                found: self.surface.clone(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.sentence_id, self.start, self.end, self.entity_type, self.surface
        )
    }
}

enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_bio(label: &str) -> Result<Bio<'_>> {
    if label == "O" {
        return Ok(Bio::Outside);
    }
    match label.split_once('-') {
        Some(("B", ty)) if !ty.is_empty() => Ok(Bio::Begin(ty)),
        Some(("I", ty)) if !ty.is_empty() => Ok(Bio::Inside(ty)),
        _ => Err(Error::UnknownLabel(label.to_owned())),
    }
}

/// Turn a BIO tag sequence over the source side into entity spans.
///
/// An `I-X` that does not continue an open `X` span starts a new one, as if
/// it were `B-X`.
pub fn extract_entity_spans<S: AsRef<str>>(tags: &[S], sentence: &Bitext) -> Result<Vec<EntitySpan>> {
    if tags.len() != sentence.source.len() {
        return Err(Error::LengthMismatch {
            expected: sentence.source.len(),
            found: tags.len(),
        });
    }
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (pos, tag) in tags.iter().enumerate() {
        let next = match parse_bio(tag.as_ref())? {
            Bio::Outside => None,
            Bio::Begin(ty) => Some((pos, ty)),
            Bio::Inside(ty) => match open {
                Some((start, cur)) if cur == ty => Some((start, cur)),
                _ => Some((pos, ty)),
            },
        };
        if let Some((start, ty)) = open {
            if next.is_none_or(|(s, _)| s != start) {
                spans.push(EntitySpan::over(sentence.id, &sentence.source, start, pos, ty)?);
            }
        }
        open = next;
    }
    if let Some((start, ty)) = open {
        spans.push(EntitySpan::over(sentence.id, &sentence.source, start, tags.len(), ty)?);
    }
    Ok(spans)
}

/// Parse one span TSV row. The surface is not checked here; see
/// [`EntitySpan::validate`].
pub fn parse_span_line(line: &str) -> Result<EntitySpan> {
    let fields: Vec<&str> = chomp(line).split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::Malformed(format!(
            "span row needs 5 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::NonNumericValue(s.to_owned()))
    };
    let span = EntitySpan {
        sentence_id: num(fields[0])? as u64,
        start: num(fields[1])?,
        end: num(fields[2])?,
        entity_type: fields[3].to_owned(),
        surface: nfc(fields[4]),
    };
    if span.start >= span.end {
        return Err(Error::Malformed(format!("empty span {}..{}", span.start, span.end)));
    }
    if span.entity_type.is_empty() {
        return Err(Error::Malformed("empty entity type".into()));
    }
    Ok(span)
}

pub fn read_spans(path: &Path) -> Result<Vec<EntitySpan>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::from(e).at(path, idx + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_span_line(&line).map_err(|e| e.at(path, idx + 1))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Alignments

/// Word alignment links `(source, target)`, 0-indexed, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Alignment(BTreeSet<(usize, usize)>);

impl Alignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: usize, target: usize) -> bool {
        self.0.insert((source, target))
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.0.contains(&(source, target))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.0
    }

    /// Exchange source and target of every link.
    pub fn transposed(&self) -> Alignment {
        self.iter().map(|(i, j)| (j, i)).collect()
    }

    pub fn intersection(&self, other: &Alignment) -> Alignment {
        Alignment(self.0.intersection(&other.0).copied().collect())
    }

    pub fn union(&self, other: &Alignment) -> Alignment {
        Alignment(self.0.union(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &Alignment) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn check_range(&self, m: usize, n: usize) -> Result<()> {
        match self.iter().find(|&(i, j)| i >= m || j >= n) {
            Some((i, j)) => Err(Error::LinkOutOfRange {
                source_index: i,
                target_index: j,
                m,
                n,
            }),
            None => Ok(()),
        }
    }
}

impl FromIterator<(usize, usize)> for Alignment {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Alignment(iter.into_iter().collect())
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (i, j)) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}-{j}")?;
        }
        Ok(())
    }
}

/// Parse a Pharaoh line such as `0-0 1-2`.
pub fn parse_alignment(line: &str) -> Result<Alignment> {
    line.split_whitespace()
        .map(|tok| {
            let bad = || Error::MalformedLink(tok.to_owned());
            let (i, j) = tok.split_once('-').ok_or_else(bad)?;
            let i = i.parse::<usize>().map_err(|_| bad())?;
            let j = j.parse::<usize>().map_err(|_| bad())?;
            Ok((i, j))
        })
        .collect()
}

pub fn read_alignments(path: &Path) -> Result<Vec<Alignment>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::from(e).at(path, idx + 1))?;
        out.push(parse_alignment(&line).map_err(|e| e.at(path, idx + 1))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Word vectors

/// Word vectors in a shared space, keyed by token.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    /// Build from `(token, vector)` pairs; the first vector for a token wins.
    pub fn new<I>(dimension: usize, entries: I) -> Result<EmbeddingTable>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        if dimension == 0 {
            return Err(Error::Malformed("embedding dimension must be positive".into()));
        }
        let mut map = HashMap::new();
        for (token, vec) in entries {
            if vec.len() != dimension {
                return Err(Error::DimensionMismatch {
                    token,
                    expected: dimension,
                    found: vec.len(),
                });
            }
            map.entry(nfc(&token)).or_insert(vec);
        }
        if map.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(EmbeddingTable {
            dimension,
            entries: map,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.entries.get(token).map(Vec::as_slice)
    }
}

/// Parse the text word-vector format: a `count dimension` header followed by
/// `token v1 ... vd` lines.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let (header_line, header) = loop {
        match lines.next() {
            None => return Err(Error::EmptyFile),
            Some((idx, line)) => {
                let line = line.map_err(|e| Error::from(e).at("<embeddings>", idx + 1))?;
                if !line.trim().is_empty() {
                    break (idx + 1, line);
                }
            }
        }
    };
    let mut head = header.split_whitespace();
    let parse_usize = |s: Option<&str>| -> Result<usize> {
        let s = s.ok_or_else(|| Error::Malformed("header must be 'count dimension'".into()))?;
        s.parse().map_err(|_| Error::NonNumericValue(s.to_owned()))
    };
    let declared = parse_usize(head.next()).map_err(|e| e.at("<embeddings>", header_line))?;
    let dimension = parse_usize(head.next()).map_err(|e| e.at("<embeddings>", header_line))?;
    if dimension == 0 {
        return Err(Error::Malformed("embedding dimension must be positive".into()).at("<embeddings>", header_line));
    }

    let mut entries: HashMap<String, Vec<f32>> = HashMap::with_capacity(declared.min(1 << 20));
    let mut duplicates = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::from(e).at("<embeddings>", lineno))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|v| v.parse::<f32>().map_err(|_| Error::NonNumericValue(v.to_owned())))
            .collect::<Result<Vec<f32>>>()
            .map_err(|e| e.at("<embeddings>", lineno))?;
        if values.len() != dimension {
            return Err(Error::DimensionMismatch {
                token: token.to_owned(),
                expected: dimension,
                found: values.len(),
            }
            .at("<embeddings>", lineno));
        }
        let token = nfc(token);
        match entries.entry(token) {
            std::collections::hash_map::Entry::Occupied(_) => duplicates += 1,
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(values);
            }
        }
    }
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate embedding tokens ignored (first occurrence kept)");
    }
    if entries.len() != declared {
        log::debug!("embedding header declares {declared} entries, read {}", entries.len());
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(EmbeddingTable { dimension, entries })
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings(open(path)?).map_err(|e| match e {
        Error::At { line, source, .. } => Error::At {
            path: path.into(),
            line,
            source,
        },
        other => other.in_file(path),
    })
}

// ---------------------------------------------------------------------------
// Transliteration tables

/// Grapheme rewrite rules, applied longest-match-first in a single
/// left-to-right pass.
#[derive(Debug, Clone, Default)]
pub struct TransliterationTable {
    rules: Vec<(String, String)>,
    lookup: HashMap<String, String>,
    max_lhs_chars: usize,
}

impl TransliterationTable {
    /// The identity transliterator.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new<I, L, R>(rules: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, R)>,
        L: Into<String>,
        R: Into<String>,
    {
        let mut table = Self::default();
        for (lhs, rhs) in rules {
            let (lhs, rhs) = (nfc(&lhs.into()), nfc(&rhs.into()));
            if lhs.is_empty() {
                return Err(Error::Malformed("transliteration rule with empty left-hand side".into()));
            }
            table.max_lhs_chars = table.max_lhs_chars.max(lhs.chars().count());
            // Earlier rules win over later ones with the same LHS.
            table.lookup.entry(lhs.clone()).or_insert_with(|| rhs.clone());
            table.rules.push((lhs, rhs));
        }
        Ok(table)
    }

    pub fn rules(&self) -> &[(String, String)] {
        &self.rules
    }

    pub fn is_identity(&self) -> bool {
        self.rules.is_empty()
    }

    pub(crate) fn max_lhs_chars(&self) -> usize {
        self.max_lhs_chars
    }

    pub(crate) fn rule(&self, lhs: &str) -> Option<&str> {
        self.lookup.get(lhs).map(String::as_str)
    }
}

/// Parse `lhs<TAB>rhs` rows; blank lines and lines starting with `#` are
/// skipped.
pub fn parse_transliteration<R: BufRead>(reader: R) -> Result<TransliterationTable> {
    let mut rules = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::from(e).at("<transliteration>", lineno))?;
        let line = chomp(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = line.split_once('\t').ok_or_else(|| {
            Error::Malformed("transliteration row needs 'lhs<TAB>rhs'".into()).at("<transliteration>", lineno)
        })?;
        if lhs.is_empty() {
            return Err(Error::Malformed("transliteration rule with empty left-hand side".into())
                .at("<transliteration>", lineno));
        }
        rules.push((lhs.to_owned(), rhs.to_owned()));
    }
    TransliterationTable::new(rules)
}

pub fn read_transliteration(path: &Path) -> Result<TransliterationTable> {
    parse_transliteration(open(path)?).map_err(|e| match e {
        Error::At { line, source, .. } => Error::At {
            path: path.into(),
            line,
            source,
        },
        other => other.in_file(path),
    })
}

// ---------------------------------------------------------------------------
// Gold lexicon rows

/// Parse `source_entity<TAB>target_entity` rows. Blank lines are skipped.
pub fn parse_gold_rows<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::from(e).at("<gold>", lineno))?;
        let line = chomp(&line);
        if line.trim().is_empty() {
            continue;
        }
        let row = match line.split('\t').collect::<Vec<_>>().as_slice() {
            [src, tgt] if !src.trim().is_empty() && !tgt.trim().is_empty() => {
                (nfc(src.trim()), nfc(tgt.trim()))
            }
            _ => {
                return Err(Error::Malformed("gold row needs 'source<TAB>target'".into()).at("<gold>", lineno))
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_gold_rows(path: &Path) -> Result<Vec<(String, String)>> {
    parse_gold_rows(open(path)?).map_err(|e| match e {
        Error::At { line, source, .. } => Error::At {
            path: path.into(),
            line,
            source,
        },
        other => other.in_file(path),
    })
}
