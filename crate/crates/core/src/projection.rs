//! Entity projection: carry source-side entity spans across an alignment and
//! aggregate the resulting (source, target) surface pairs into a lexicon.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Alignment, Bitext, EntitySpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Minimum fraction of aligned positions inside the projected envelope.
    pub min_coverage: f64,
    /// Longest projected span accepted, in tokens.
    pub max_span_len: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            min_coverage: 0.5,
            max_span_len: 10,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::Config(format!(
                "min-coverage must be in (0, 1], got {}",
                self.min_coverage
            )));
        }
        if self.max_span_len == 0 {
            return Err(Error::Config("max-span-len must be positive".into()));
        }
        Ok(())
    }
}

/// A mined lexicon entry. Serialized as the JSONL record
/// `{"src", "tgt", "type", "count", "score"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPair {
    #[serde(rename = "src")]
    pub source_surface: String,
    #[serde(rename = "tgt")]
    pub target_surface: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub count: u64,
    pub score: f64,
}

/// Why a span did not project.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// No link leaves the span.
    Unaligned,
    /// The envelope is too sparse or too long.
    Gated,
}

/// Target positions linked from inside `span`, sorted.
fn linked_targets(span: &EntitySpan, a: &Alignment, target_len: usize) -> Result<Vec<usize>> {
    let mut js = Vec::new();
    for (i, j) in a.iter() {
        if j >= target_len {
            return Err(Error::IndexOutOfRange {
                index: j,
                bound: target_len,
            });
        }
        if (span.start..span.end).contains(&i) {
            js.push(j);
        }
    }
    js.sort_unstable();
    js.dedup();
    Ok(js)
}

fn project_inner(
    span: &EntitySpan,
    a: &Alignment,
    target: &[String],
    cfg: &ProjectionConfig,
) -> Result<std::result::Result<(EntitySpan, Vec<usize>), Rejection>> {
    let js = linked_targets(span, a, target.len())?;
    let (Some(&lo), Some(&hi)) = (js.first(), js.last()) else {
        return Ok(Err(Rejection::Unaligned));
    };
    let width = hi - lo + 1;
    if (js.len() as f64) / (width as f64) < cfg.min_coverage || width > cfg.max_span_len {
        return Ok(Err(Rejection::Gated));
    }
    let projected = EntitySpan::over(span.sentence_id, target, lo, hi + 1, span.entity_type.clone())?;
    Ok(Ok((projected, js)))
}

/// Project one source span onto the target side: the envelope of every
/// linked target position, kept only if dense and short enough.
pub fn project_span(
    span: &EntitySpan,
    a: &Alignment,
    target: &[String],
    cfg: &ProjectionConfig,
) -> Result<Option<EntitySpan>> {
    Ok(project_inner(span, a, target, cfg)?.ok().map(|(s, _)| s))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningStats {
    pub projected: u64,
    pub rejected: u64,
    pub unaligned: u64,
}

/// Aggregates projection observations keyed by (source, target, type).
#[derive(Debug, Clone, Default)]
pub struct LexiconBuilder {
    groups: HashMap<(String, String, String), (u64, f64)>,
    pub stats: MiningStats,
}

impl LexiconBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, source: &str, target: &str, entity_type: &str, confidence: f64) {
        let e = self
            .groups
            .entry((source.to_owned(), target.to_owned(), entity_type.to_owned()))
            .or_insert((0, 0.0));
        e.0 += 1;
        e.1 += confidence;
        self.stats.projected += 1;
    }

    /// Project every span of one sentence. `confidence[j]` is the alignment
    /// confidence of target position `j`; `None` means 1.0.
    pub fn add_sentence(
        &mut self,
        b: &Bitext,
        spans: &[EntitySpan],
        a: &Alignment,
        confidence: Option<&[Option<f64>]>,
        cfg: &ProjectionConfig,
    ) -> Result<()> {
        for span in spans {
            if span.sentence_id != b.id {
                return Err(Error::Malformed(format!(
                    "span for sentence {} given with sentence {}",
                    span.sentence_id, b.id
                )));
            }
            span.validate(&b.source)?;
            match project_inner(span, a, &b.target, cfg)? {
                Ok((projected, js)) => {
                    let conf = match confidence {
                        Some(c) => js.iter().map(|&j| c.get(j).copied().flatten().unwrap_or(1.0)).sum::<f64>() / js.len() as f64,
                        None => 1.0,
                    };
                    self.observe(&span.surface, &projected.surface, &span.entity_type, conf);
                }
                Err(Rejection::Gated) => self.stats.rejected += 1,
                Err(Rejection::Unaligned) => self.stats.unaligned += 1,
            }
        }
        Ok(())
    }

    /// Fold `other` in. Merging partial builders in a fixed order gives
    /// reproducible scores.
    pub fn merge(&mut self, other: LexiconBuilder) {
        for (k, (c, s)) in other.groups {
            let e = self.groups.entry(k).or_insert((0, 0.0));
            e.0 += c;
            e.1 += s;
        }
        self.stats.projected += other.stats.projected;
        self.stats.rejected += other.stats.rejected;
        self.stats.unaligned += other.stats.unaligned;
    }

    /// Pairs sorted by descending count, then source, target and type.
    pub fn finish(self) -> Vec<EntityPair> {
        let mut pairs: Vec<EntityPair> = self
            .groups
            .into_iter()
            .map(|((s, t, ty), (count, sum))| EntityPair {
                source_surface: s,
                target_surface: t,
                entity_type: ty,
                count,
                score: sum / count as f64,
            })
            .collect();
        pairs.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| a.source_surface.cmp(&b.source_surface))
                .then_with(|| a.target_surface.cmp(&b.target_surface))
                .then_with(|| a.entity_type.cmp(&b.entity_type))
        });
        pairs
    }
}

/// Mine a lexicon from index-aligned sentences, spans and alignments, with
/// per-target confidences where the aligner provides them.
pub fn mine_pairs_scored(
    corpus: &[Bitext],
    spans: &[Vec<EntitySpan>],
    alignments: &[Alignment],
    confidences: Option<&[Vec<Option<f64>>]>,
    cfg: &ProjectionConfig,
) -> Result<(Vec<EntityPair>, MiningStats)> {
    cfg.validate()?;
    for len in [Some(spans.len()), Some(alignments.len()), confidences.map(<[_]>::len)].into_iter().flatten() {
        if len != corpus.len() {
            return Err(Error::LengthMismatch {
                expected: corpus.len(),
                found: len,
            });
        }
    }
    let mut builder = LexiconBuilder::new();
    for (k, b) in corpus.iter().enumerate() {
        let conf = confidences.map(|c| c[k].as_slice());
        builder.add_sentence(b, &spans[k], &alignments[k], conf, cfg)?;
    }
    let stats = builder.stats;
    Ok((builder.finish(), stats))
}

/// Mine a lexicon with every projection scored 1.0.
pub fn mine_pairs(
    corpus: &[Bitext],
    spans: &[Vec<EntitySpan>],
    alignments: &[Alignment],
    cfg: &ProjectionConfig,
) -> Result<Vec<EntityPair>> {
    mine_pairs_scored(corpus, spans, alignments, None, cfg).map(|(p, _)| p)
}
