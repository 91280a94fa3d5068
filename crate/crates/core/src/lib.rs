//! Cross-lingual named-entity lexicon mining.
//!
//! Source-side entity spans are projected onto the target side of a bitext
//! through word alignments from three signals: lexical co-occurrence
//! ([`lexical`]), embedding distance and transliteration distance
//! ([`distance`]). The [`lsp`] mixture combines the three per-signal
//! translation tables; [`projection`] mines entity pairs and [`eval`] scores
//! them against a gold lexicon.

pub mod corpus;
pub mod distance;
pub mod error;
pub mod eval;
pub mod lexical;
pub mod lsp;
pub mod pipeline;
pub mod projection;

pub use corpus::{Alignment, Bitext, EmbeddingTable, EntitySpan, TransliterationTable};
pub use error::{Error, Result};
pub use lsp::{LspModel, Mechanism, TranslationTable};
pub use projection::{EntityPair, ProjectionConfig};
