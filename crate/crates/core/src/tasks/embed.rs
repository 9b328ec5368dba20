//! Code-change vectors for a corpus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PatchChange, Vocabulary};
use crate::error::Result;
use crate::model::Model;
use crate::tensorize::encode_change;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<Vec<Vec<f64>>>,
}

/// `e_p` for every patch, in input order. With `per_file`, the per-file
/// vectors are kept as well.
pub fn extract_embeddings(
    model: &Model,
    patches: &[PatchChange],
    code_vocab: &Vocabulary,
    per_file: bool,
) -> Result<Vec<EmbeddingRecord>> {
    patches
        .par_iter()
        .map(|p| {
            let x = encode_change(p, model.config.shape, code_vocab);
            let e = model.embed(&x)?;
            Ok(EmbeddingRecord {
                id: p.id.clone(),
                vector: e.vector,
                files: if per_file { e.files } else { None },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::label_width;
    use crate::synth::{overfit_corpus, toy_model_config};

    #[test]
    fn deterministic_ordered_and_sized() {
        let (patches, vc, vm) = overfit_corpus();
        let cfg = toy_model_config();
        let model = Model::init(cfg, vc.len(), label_width(&vm), 2).unwrap();
        let a = extract_embeddings(&model, &patches, &vc, true).unwrap();
        let b = extract_embeddings(&model, &patches, &vc, false).unwrap();
        assert_eq!(a.len(), patches.len());
        for ((ra, rb), p) in a.iter().zip(&b).zip(&patches) {
            assert_eq!(ra.id, p.id);
            assert_eq!(ra.vector, rb.vector);
            assert_eq!(ra.vector.len(), cfg.patch_dim());
            assert_eq!(ra.files.as_ref().unwrap().len(), cfg.shape.files);
            assert!(rb.files.is_none());
        }
    }

    #[test]
    fn empty_patches_embed_identically() {
        let (_, vc, vm) = overfit_corpus();
        let model = Model::init(toy_model_config(), vc.len(), label_width(&vm), 2).unwrap();
        let empty = |id: &str| PatchChange {
            id: id.into(),
            ..PatchChange::default()
        };
        let out = extract_embeddings(&model, &[empty("x"), empty("y")], &vc, false).unwrap();
        assert_eq!(out[0].vector, out[1].vector);
    }
}
