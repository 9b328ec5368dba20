use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::PatchChange;
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabKind {
    Code,
    Message,
}

/// Bidirectional token/id map with `PAD = 0` and `OOV = 1` reserved.
///
/// Reserved ids are never produced by [`Vocabulary::id`] for a corpus token,
/// even if the corpus contains the literal strings `<pad>` or `<oov>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "VocabularyRepr", try_from = "VocabularyRepr")]
pub struct Vocabulary {
    kind: VocabKind,
    min_count: usize,
    /// id -> token; entries 0 and 1 are the reserved names.
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    kind: VocabKind,
    min_count: usize,
    tokens: Vec<String>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            kind: v.kind,
            min_count: v.min_count,
            tokens: v.tokens,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        if r.tokens.len() < 2 || r.tokens[0] != PAD_TOKEN || r.tokens[1] != OOV_TOKEN {
            return Err(Error::Vocabulary(
                "serialized vocabulary must start with <pad>, <oov>".into(),
            ));
        }
        Vocabulary::from_tokens(r.kind, r.min_count, r.tokens.into_iter().skip(2))
    }
}

impl Vocabulary {
    /// Build from non-reserved tokens in id order (first token gets id 2).
    pub fn from_tokens(
        kind: VocabKind,
        min_count: usize,
        tokens: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut all = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
        let mut index = HashMap::new();
        for tok in tokens {
            let id = all.len() as u32;
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {tok:?}")));
            }
            all.push(tok);
        }
        Ok(Vocabulary {
            kind,
            min_count,
            tokens: all,
            index,
        })
    }

    /// Keep tokens with count >= `min_count`, most frequent first, ties broken
    /// lexicographically; optionally truncated to `max_size` non-reserved entries.
    pub fn from_counts(
        kind: VocabKind,
        counts: &HashMap<String, usize>,
        min_count: usize,
        max_size: Option<usize>,
    ) -> Self {
        let mut kept: Vec<(&String, usize)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(max) = max_size {
            kept.truncate(max);
        }
        Vocabulary::from_tokens(kind, min_count, kept.into_iter().map(|(t, _)| t.clone()))
            .expect("counts keys are unique")
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Total size including the two reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Id of a corpus token, or `OOV_ID`.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.tokens[2..]
    }
}

fn require_nonempty(corpus: &[PatchChange]) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Corpus("cannot build vocabularies from an empty corpus".into()));
    }
    Ok(())
}

/// Build the code vocabulary (case-sensitive tokens) and the message
/// vocabulary (lowercased tokens of the first message line).
pub fn build_vocabularies(
    corpus: &[PatchChange],
    code_min_count: usize,
    msg_min_count: usize,
    msg_max_size: usize,
) -> Result<(Vocabulary, Vocabulary)> {
    require_nonempty(corpus)?;
    let mut code_counts: HashMap<String, usize> = HashMap::new();
    let mut msg_counts: HashMap<String, usize> = HashMap::new();
    for patch in corpus {
        for tok in patch.code_tokens() {
            *code_counts.entry(tok.clone()).or_default() += 1;
        }
        for tok in &patch.message_tokens {
            *msg_counts.entry(tok.to_lowercase()).or_default() += 1;
        }
    }
    let vc = Vocabulary::from_counts(VocabKind::Code, &code_counts, code_min_count, None);
    let vm = Vocabulary::from_counts(
        VocabKind::Message,
        &msg_counts,
        msg_min_count,
        Some(msg_max_size),
    );
    if vm.is_empty() {
        return Err(Error::Vocabulary(format!(
            "message vocabulary is empty after filtering (min_count={msg_min_count}, max_size={msg_max_size})"
        )));
    }
    Ok((vc, vm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FileChange, Hunk};
    use proptest::prelude::*;

    fn patch(code: &[&str], msg: &str) -> PatchChange {
        PatchChange {
            id: "p".into(),
            message_tokens: crate::corpus::tokenize_message(msg),
            files: vec![FileChange {
                path: "f".into(),
                hunks: vec![Hunk {
                    removed: vec![],
                    added: vec![code.iter().map(|s| s.to_string()).collect()],
                }],
            }],
        }
    }

    #[test]
    fn code_vocab_counts_and_threshold() {
        let corpus = vec![patch(&["a", "b", "a"], "fix")];
        let (vc, _) = build_vocabularies(&corpus, 1, 1, 100).unwrap();
        assert_eq!(vc.len(), 4);
        assert_eq!(vc.corpus_tokens(), ["a", "b"]);
        let (vc, _) = build_vocabularies(&corpus, 2, 1, 100).unwrap();
        assert_eq!(vc.len(), 3);
        assert_eq!(vc.corpus_tokens(), ["a"]);
        assert_eq!(vc.id("b"), OOV_ID);
    }

    #[test]
    fn message_vocab() {
        let corpus = vec![patch(&["x"], "fix leak"), patch(&["y"], "Fix race")];
        let (_, vm) = build_vocabularies(&corpus, 1, 1, 100).unwrap();
        assert_eq!(vm.kind(), VocabKind::Message);
        // fix (2) first, then leak/race lexicographically
        assert_eq!(vm.corpus_tokens(), ["fix", "leak", "race"]);
        let (_, vm) = build_vocabularies(&corpus, 1, 1, 2).unwrap();
        assert_eq!(vm.corpus_tokens(), ["fix", "leak"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_vocabularies(&[], 1, 1, 10), Err(Error::Corpus(_))));
        let corpus = vec![patch(&["x"], "fix")];
        assert!(matches!(
            build_vocabularies(&corpus, 1, 5, 10),
            Err(Error::Vocabulary(_))
        ));
    }

    #[test]
    fn reserved_names_do_not_collide() {
        let v = Vocabulary::from_tokens(VocabKind::Code, 1, ["<pad>".to_string(), "x".into()])
            .unwrap();
        assert_eq!(v.id("<pad>"), 2);
        assert_eq!(v.id("<oov>"), OOV_ID);
        assert_eq!(v.token(PAD_ID), Some(PAD_TOKEN));
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::from_tokens(VocabKind::Message, 3, ["b".to_string(), "a".into()])
            .unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert!(serde_json::from_str::<Vocabulary>(r#"{"kind":"code","min_count":1,"tokens":["a"]}"#).is_err());
    }

    proptest! {
        #[test]
        fn ids_round_trip(tokens in proptest::collection::hash_set("[a-z]{1,4}", 0..30)) {
            let v = Vocabulary::from_tokens(VocabKind::Code, 1, tokens.iter().cloned()).unwrap();
            prop_assert_eq!(v.len(), tokens.len() + 2);
            for t in &tokens {
                let id = v.id(t);
                prop_assert!(id >= 2 && (id as usize) < v.len());
                prop_assert_eq!(v.token(id), Some(t.as_str()));
            }
        }
    }
}
