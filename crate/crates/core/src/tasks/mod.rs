//! Downstream uses of trained code-change vectors.

pub mod bleu;
pub mod embed;
pub mod export;
pub mod metrics;
pub mod probe;
pub mod retrieval;

pub use bleu::{bleu4, corpus_bleu4, BleuStats};
pub use embed::{extract_embeddings, EmbeddingRecord};
pub use export::{export_features, read_features_jsonl, write_features, ExportFormat};
pub use metrics::{classification_metrics, roc_auc, ClassificationMetrics, Confusion};
pub use probe::{LinearProbe, ProbeConfig};
pub use retrieval::{
    nngen_all, nngen_baseline, retrieve, retrieve_all, retrieve_message, BagIndex, IndexEntry, Query,
    RetrievalIndex, RetrievalOptions, RetrievalResult, Retrieved, TermBag,
};

use crate::corpus::{PatchChange, Vocabulary};
use crate::error::Result;
use crate::model::Model;

/// Index over `patches` using `model`'s vectors. Patches with an empty
/// message cannot be retrieved and are left out.
pub fn build_index(model: &Model, patches: &[PatchChange], code_vocab: &Vocabulary) -> Result<RetrievalIndex> {
    let kept: Vec<PatchChange> = patches
        .iter()
        .filter(|p| !p.message_tokens.is_empty())
        .cloned()
        .collect();
    if kept.len() < patches.len() {
        log::warn!("{} patches with empty messages left out of the index", patches.len() - kept.len());
    }
    let records = extract_embeddings(model, &kept, code_vocab, false)?;
    RetrievalIndex::new(
        records
            .into_iter()
            .zip(kept)
            .map(|(r, p)| IndexEntry {
                id: r.id,
                vector: r.vector,
                code_tokens: p.code_tokens().cloned().collect(),
                message: p.message_tokens,
            })
            .collect(),
    )
}

pub fn build_queries(model: &Model, patches: &[PatchChange], code_vocab: &Vocabulary) -> Result<Vec<Query>> {
    let records = extract_embeddings(model, patches, code_vocab, false)?;
    Ok(records
        .into_iter()
        .zip(patches)
        .map(|(r, p)| Query {
            id: r.id,
            vector: r.vector,
            code_tokens: p.code_tokens().cloned().collect(),
        })
        .collect())
}
