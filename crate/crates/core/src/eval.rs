//! LCS-based fuzzy scoring of a mined lexicon against a gold lexicon, with a
//! breakdown by how often each source entity occurs in the corpus.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::nfc;
use crate::error::{Error, Result};
use crate::projection::EntityPair;

/// Minimum source-side fuzzy F1 for a gold entry to be joined when fuzzy
/// source joining is enabled.
pub const FUZZY_SOURCE_JOIN_THRESHOLD: f64 = 0.8;

/// Longest common subsequence length over Unicode scalar values.
pub fn lcs_length(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    lcs_chars(&a, &b)
}

fn lcs_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row = vec![0usize; b.len() + 1];
    for &ca in a {
        let mut diag = 0;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// LCS precision `|LCS|/|p|`, recall `|LCS|/|t|` and their harmonic mean.
pub fn fuzzy_f1(predicted: &str, gold: &str) -> Result<FuzzyScore> {
    let p: Vec<char> = predicted.chars().collect();
    let t: Vec<char> = gold.chars().collect();
    if p.is_empty() || t.is_empty() {
        return Err(Error::EmptyString);
    }
    let lcs = lcs_chars(&p, &t) as f64;
    let precision = lcs / p.len() as f64;
    let recall = lcs / t.len() as f64;
    let f1 = if lcs == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(FuzzyScore { precision, recall, f1 })
}

/// Gold source entity → acceptable target entities.
#[derive(Debug, Clone, Default)]
pub struct GoldLexicon {
    entries: HashMap<String, Vec<String>>,
    // sorted keys for the fuzzy source join scan
    keys: Vec<String>,
}

impl GoldLexicon {
    pub fn from_rows<I, S, T>(rows: I) -> Result<GoldLexicon>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (s, t) in rows {
            let (s, t) = (nfc(s.as_ref()), nfc(t.as_ref()));
            if s.is_empty() || t.is_empty() {
                return Err(Error::EmptyString);
            }
            let targets = entries.entry(s).or_default();
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        let mut keys: Vec<String> = entries.keys().cloned().collect();
        keys.sort();
        Ok(GoldLexicon { entries, keys })
    }

    pub fn get(&self, source: &str) -> Option<&[String]> {
        self.entries.get(source).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn casefolded(&self) -> GoldLexicon {
        let rows = self
            .keys
            .iter()
            .flat_map(|k| self.entries[k].iter().map(move |t| (k.to_lowercase(), t.to_lowercase())));
        GoldLexicon::from_rows(rows).expect("non-empty strings stay non-empty")
    }

    /// Targets for the closest gold source with fuzzy F1 at or above the
    /// threshold. Ties go to the smaller source string.
    fn fuzzy_get(&self, source: &str) -> Option<&[String]> {
        let mut best: Option<(&str, f64)> = None;
        for k in &self.keys {
            let Ok(score) = fuzzy_f1(source, k) else { continue };
            if score.f1 >= FUZZY_SOURCE_JOIN_THRESHOLD && best.is_none_or(|(_, b)| score.f1 > b) {
                best = Some((k, score.f1));
            }
        }
        best.and_then(|(k, _)| self.get(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBucket {
    Low,
    Mid,
    High,
}

impl FrequencyBucket {
    /// low = 0–3, mid = 4–10, high = 11+.
    pub fn of(frequency: u64) -> FrequencyBucket {
        match frequency {
            0..=3 => FrequencyBucket::Low,
            4..=10 => FrequencyBucket::Mid,
            _ => FrequencyBucket::High,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub f1: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Buckets {
    pub low: BucketReport,
    pub mid: BucketReport,
    pub high: BucketReport,
}

impl Buckets {
    pub fn get(&self, b: FrequencyBucket) -> &BucketReport {
        match b {
            FrequencyBucket::Low => &self.low,
            FrequencyBucket::Mid => &self.mid,
            FrequencyBucket::High => &self.high,
        }
    }

    fn get_mut(&mut self, b: FrequencyBucket) -> &mut BucketReport {
        match b {
            FrequencyBucket::Low => &mut self.low,
            FrequencyBucket::Mid => &mut self.mid,
            FrequencyBucket::High => &mut self.high,
        }
    }
}

/// Means of per-pair fuzzy metrics over the mined pairs that have a gold
/// entry. `f1` is the mean per-pair F1, so bucket F1s weighted by bucket
/// counts average back to it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub buckets: Buckets,
    pub matched: u64,
    pub unmatched: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub fuzzy_source_join: bool,
    pub casefold: bool,
}

/// Score a mined lexicon. Each pair with a gold entry for its source gets
/// the best fuzzy F1 over that entry's targets; pairs without one are only
/// counted. `frequency` gives each source entity's corpus frequency for the
/// bucket breakdown (absent = 0).
pub fn evaluate_lexicon(
    mined: &[EntityPair],
    gold: &GoldLexicon,
    frequency: &HashMap<String, u64>,
    options: EvalOptions,
) -> EvaluationReport {
    let folded;
    let gold = if options.casefold {
        folded = gold.casefolded();
        &folded
    } else {
        gold
    };
    // canonical order so sums do not depend on input order
    let mut order: Vec<&EntityPair> = mined.iter().collect();
    order.sort_by(|a, b| {
        (&a.source_surface, &a.target_surface, &a.entity_type, a.count)
            .cmp(&(&b.source_surface, &b.target_surface, &b.entity_type, b.count))
            .then_with(|| a.score.total_cmp(&b.score))
    });

    let mut report = EvaluationReport::default();
    let mut sums = (0.0, 0.0, 0.0);
    let mut bucket_sums: HashMap<FrequencyBucket, f64> = HashMap::new();
    for pair in order {
        let (src, tgt) = if options.casefold {
            (pair.source_surface.to_lowercase(), pair.target_surface.to_lowercase())
        } else {
            (pair.source_surface.clone(), pair.target_surface.clone())
        };
        let targets = gold
            .get(&src)
            .or_else(|| options.fuzzy_source_join.then(|| gold.fuzzy_get(&src)).flatten());
        let best = targets.and_then(|ts| {
            ts.iter()
                .filter_map(|g| fuzzy_f1(&tgt, g).ok())
                .fold(None, |best: Option<FuzzyScore>, s| match best {
                    Some(b) if b.f1 >= s.f1 => Some(b),
                    _ => Some(s),
                })
        });
        let Some(score) = best else {
            report.unmatched += 1;
            continue;
        };
        report.matched += 1;
        sums.0 += score.precision;
        sums.1 += score.recall;
        sums.2 += score.f1;
        let bucket = FrequencyBucket::of(frequency.get(&pair.source_surface).copied().unwrap_or(0));
        report.buckets.get_mut(bucket).count += 1;
        *bucket_sums.entry(bucket).or_insert(0.0) += score.f1;
    }
    if report.matched > 0 {
        let n = report.matched as f64;
        report.precision = sums.0 / n;
        report.recall = sums.1 / n;
        report.f1 = sums.2 / n;
    }
    for (bucket, sum) in bucket_sums {
        let b = report.buckets.get_mut(bucket);
        b.f1 = sum / b.count as f64;
    }
    report
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1")?;
        writeln!(
            f,
            "{:<10} {:>9.4} {:>9.4} {:>9.4}",
            "overall", self.precision, self.recall, self.f1
        )?;
        for (name, b) in [("low", self.buckets.low), ("mid", self.buckets.mid), ("high", self.buckets.high)] {
            writeln!(f, "{:<10} {:>9} {:>9} {:>9.4}  (n={})", name, "", "", b.f1, b.count)?;
        }
        write!(f, "matched {}  unmatched {}", self.matched, self.unmatched)
    }
}
