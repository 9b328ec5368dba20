//! Seeded synthetic corpora for tests, benchmarks and smoke runs.
//!
//! Each patch touches one "subject" (buffer, socket, ...) with one "action"
//! (add, remove, fix, ...); the message names both and the code uses
//! subject-specific identifiers, so messages are predictable from diffs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compare::ComparisonMask;
use crate::corpus::{build_vocabularies, CorpusRecord, PatchChange, RecordFile, RecordHunk, Vocabulary};
use crate::model::{Dims, ModelConfig};
use crate::tensorize::ShapeConfig;
use crate::train::TrainConfig;

const SUBJECTS: &[&str] = &[
    "buffer", "socket", "cache", "parser", "timer", "lock", "queue", "config", "index", "stream", "token", "page",
    "driver", "thread", "window", "record",
];
const ACTIONS: &[&str] = &["add", "remove", "fix", "update", "check", "rename", "handle", "avoid"];
const DETAILS: &[&str] = &[
    "leak", "overflow", "size", "order", "null", "race", "limit", "error", "path", "flag", "count", "init",
];
const FIELDS: &[&str] = &["len", "cap", "head", "tail", "ptr", "state", "refs", "mode", "next", "id"];

fn code_line(rng: &mut impl Rng, subject: &str, detail: &str) -> String {
    let field = FIELDS.choose(rng).unwrap();
    let n: u32 = rng.gen_range(0..64);
    match rng.gen_range(0..5) {
        0 => format!("{subject}->{field} = {subject}_{detail}({n});"),
        1 => format!("if ({subject}->{field} == {n}) return -1;"),
        2 => format!("{subject}_{field} += {detail}_step;"),
        3 => format!("{detail}_{subject}(&{subject}->{field}, {n});"),
        _ => format!("while ({subject}->{field} != NULL && {detail} <= {n}) {{"),
    }
}

/// `n` raw corpus records. Messages are unique when `n` is small relative to
/// the subject/action/detail grid.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let subject = SUBJECTS[(i + rng.gen_range(0..SUBJECTS.len())) % SUBJECTS.len()];
            let action = ACTIONS.choose(&mut rng).unwrap();
            let detail = DETAILS.choose(&mut rng).unwrap();
            let files = rng.gen_range(1..=2);
            let files = (0..files)
                .map(|f| {
                    let hunks = (0..rng.gen_range(1..=3))
                        .map(|_| {
                            let mut lines = |k: usize| (0..k).map(|_| code_line(&mut rng, subject, detail)).collect();
                            let (r, a) = match *action {
                                "add" => (0, 2),
                                "remove" => (2, 0),
                                _ => (1, 2),
                            };
                            RecordHunk {
                                removed: lines(r),
                                added: lines(a),
                            }
                        })
                        .collect();
                    RecordFile {
                        path: format!("src/{subject}/{f}.c"),
                        hunks,
                    }
                })
                .collect();
            CorpusRecord {
                id: format!("p{i}"),
                message: format!("{action} {subject} {detail}"),
                files,
            }
        })
        .collect()
}

pub fn synthetic_patches(n: usize, seed: u64) -> Vec<PatchChange> {
    synthetic_records(n, seed).iter().map(CorpusRecord::to_patch).collect()
}

/// Eight patches with distinct messages plus their vocabularies.
pub fn overfit_corpus() -> (Vec<PatchChange>, Vocabulary, Vocabulary) {
    let mut patches = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in synthetic_patches(64, 8) {
        if patches.len() < 8 && seen.insert(p.message_tokens.clone()) {
            patches.push(p);
        }
    }
    let (vc, vm) = build_vocabularies(&patches, 1, 1, 10_000).expect("non-empty corpus");
    (patches, vc, vm)
}

/// Toy model: F=2, H=2, L=2, W=4, d=8, g=4, z=4, hidden=8, full mask.
pub fn toy_model_config() -> ModelConfig {
    ModelConfig {
        shape: ShapeConfig::new(2, 2, 2, 4),
        dims: Dims {
            embed_dim: 8,
            gru_hidden: 4,
            ntn_slices: 4,
            hidden_dim: 8,
        },
        mask: ComparisonMask::all(),
        unshare_sides: false,
        mask_padding: false,
    }
}

/// Training settings for fast runs on the toy model: no dropout, no L2.
pub fn tiny_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        lambda: 0.0,
        dropout_rate: 0.0,
        batch_size: 4,
        epochs: 10,
        seed: 1,
        model: toy_model_config(),
        ..TrainConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_well_formed() {
        assert_eq!(synthetic_records(20, 3), synthetic_records(20, 3));
        assert_ne!(synthetic_records(20, 3), synthetic_records(20, 4));
        for p in synthetic_patches(50, 1) {
            assert_eq!(p.message_tokens.len(), 3);
            assert!(!p.files.is_empty());
            for f in &p.files {
                assert!(!f.hunks.is_empty());
                for h in &f.hunks {
                    assert!(!h.removed.is_empty() || !h.added.is_empty());
                }
            }
        }
    }

    #[test]
    fn overfit_corpus_has_eight_distinct_messages() {
        let (patches, _, vm) = overfit_corpus();
        assert_eq!(patches.len(), 8);
        let msgs: std::collections::HashSet<_> = patches.iter().map(|p| &p.message_tokens).collect();
        assert_eq!(msgs.len(), 8);
        assert!(vm.len() > 2);
    }
}
