//! Patch corpora: diff parsing, tokenization, vocabularies and the JSONL
//! corpus format.

mod diff;
mod tokenize;
mod vocab;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use diff::{
    parse_unified_diff, parse_unified_diff_raw, DiffWarning, ParsedDiff, RawDiff, RawFileDiff,
    RawHunk,
};
pub use tokenize::{tokenize_line, tokenize_message, MULTI_GLYPH_OPERATORS};
pub use vocab::{
    build_vocabularies, VocabKind, Vocabulary, OOV_ID, OOV_TOKEN, PAD_ID, PAD_TOKEN,
};

use crate::error::{Error, Result};

pub const DEFAULT_NEWLINE_MARKER: &str = "<nl>";

/// One token sequence per changed line.
pub type TokenLine = Vec<String>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hunk {
    pub removed: Vec<TokenLine>,
    pub added: Vec<TokenLine>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileChange {
    pub path: String,
    pub hunks: Vec<Hunk>,
}

/// A patch: its code change split per file, and the tokens of the first line
/// of its log message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchChange {
    pub id: String,
    pub message_tokens: Vec<String>,
    pub files: Vec<FileChange>,
}

impl PatchChange {
    /// All code tokens in diff order (per hunk: removed lines, then added).
    pub fn code_tokens(&self) -> impl Iterator<Item = &String> {
        self.files.iter().flat_map(|f| {
            f.hunks.iter().flat_map(|h| {
                h.removed
                    .iter()
                    .chain(h.added.iter())
                    .flat_map(|line| line.iter())
            })
        })
    }
}

/// Multi-hot vector over the non-reserved message vocabulary: entry `i`
/// corresponds to message-vocabulary id `i + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub Vec<f64>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when no word of the message is in the vocabulary; such patches
    /// contribute nothing to the training objective.
    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&y| y == 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Number of predicted words for a message vocabulary.
pub fn label_width(vm: &Vocabulary) -> usize {
    vm.len() - 2
}

pub fn message_labels(patch: &PatchChange, vm: &Vocabulary) -> LabelVector {
    debug_assert_eq!(vm.kind(), VocabKind::Message);
    let mut y = vec![0.0; label_width(vm)];
    for tok in &patch.message_tokens {
        if let Some(id) = vm.get(&tok.to_lowercase()) {
            y[id as usize - 2] = 1.0;
        }
    }
    LabelVector(y)
}

/// Canonical on-disk corpus record: raw (untokenized) changed lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(default)]
    pub id: String,
    pub message: String,
    pub files: Vec<RecordFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFile {
    pub path: String,
    pub hunks: Vec<RecordHunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordHunk {
    #[serde(default)]
    pub removed: Vec<String>,
    #[serde(default)]
    pub added: Vec<String>,
}

/// Stable 16-hex-digit id derived from message and code content.
pub fn content_hash(message: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(message.as_bytes());
    h.update([0u8]);
    h.update(body.as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

fn first_line(message: &str) -> &str {
    message.lines().next().unwrap_or("")
}

impl CorpusRecord {
    pub fn from_raw_diff(id: Option<String>, message: &str, diff: &RawDiff) -> Self {
        let files: Vec<RecordFile> = diff
            .files
            .iter()
            .map(|f| RecordFile {
                path: f.path.clone(),
                hunks: f
                    .hunks
                    .iter()
                    .map(|h| RecordHunk {
                        removed: h.removed.clone(),
                        added: h.added.clone(),
                    })
                    .collect(),
            })
            .collect();
        let mut rec = CorpusRecord {
            id: id.unwrap_or_default(),
            message: first_line(message).to_string(),
            files,
        };
        if rec.id.is_empty() {
            rec.id = rec.content_id();
        }
        rec
    }

    fn content_id(&self) -> String {
        let body = serde_json::to_string(&self.files).expect("plain data serializes");
        content_hash(first_line(&self.message), &body)
    }

    /// Tokenize into a [`PatchChange`], dropping blank lines, empty hunks and
    /// empty files.
    pub fn to_patch(&self) -> PatchChange {
        let tok = |lines: &[String]| -> Vec<TokenLine> {
            lines
                .iter()
                .filter(|l| !l.trim().is_empty())
                .map(|l| tokenize_line(l))
                .collect()
        };
        let files = self
            .files
            .iter()
            .map(|f| FileChange {
                path: f.path.clone(),
                hunks: f
                    .hunks
                    .iter()
                    .map(|h| Hunk {
                        removed: tok(&h.removed),
                        added: tok(&h.added),
                    })
                    .filter(|h| !(h.removed.is_empty() && h.added.is_empty()))
                    .collect(),
            })
            .filter(|f: &FileChange| !f.hunks.is_empty())
            .collect();
        PatchChange {
            id: if self.id.is_empty() {
                self.content_id()
            } else {
                self.id.clone()
            },
            message_tokens: tokenize_message(first_line(&self.message)),
            files,
        }
    }
}

pub fn read_jsonl_records(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Corpus(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl_records(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load a JSONL corpus and tokenize every record.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<PatchChange>> {
    let records = read_jsonl_records(path)?;
    Ok(records.par_iter().map(CorpusRecord::to_patch).collect())
}

/// Read the line-aligned diff/message layout: line `i` of each file is patch
/// `i`, with `newline_marker` standing in for newlines inside the diff.
pub fn import_paired_records(
    diff_path: impl AsRef<Path>,
    msg_path: impl AsRef<Path>,
    newline_marker: &str,
) -> Result<Vec<CorpusRecord>> {
    let diffs = std::fs::read_to_string(diff_path)?;
    let msgs = std::fs::read_to_string(msg_path)?;
    let diffs: Vec<&str> = diffs.lines().collect();
    let msgs: Vec<&str> = msgs.lines().collect();
    if diffs.len() != msgs.len() {
        return Err(Error::LineCountMismatch {
            diff_lines: diffs.len(),
            msg_lines: msgs.len(),
        });
    }
    diffs
        .par_iter()
        .zip(msgs.par_iter())
        .enumerate()
        .map(|(i, (diff, msg))| {
            let text = if newline_marker.is_empty() {
                diff.to_string()
            } else {
                diff.replace(newline_marker, "\n")
            };
            let raw = parse_unified_diff_raw(&text)
                .map_err(|e| Error::Corpus(format!("patch on line {}: {e}", i + 1)))?;
            for w in &raw.warnings {
                log::warn!("patch on line {}: {} ({})", i + 1, w.message, w.path);
            }
            Ok(CorpusRecord::from_raw_diff(None, msg, &raw))
        })
        .collect()
}

pub fn import_paired_files(
    diff_path: impl AsRef<Path>,
    msg_path: impl AsRef<Path>,
    newline_marker: &str,
) -> Result<Vec<PatchChange>> {
    let records = import_paired_records(diff_path, msg_path, newline_marker)?;
    Ok(records.iter().map(CorpusRecord::to_patch).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vm(words: &[&str]) -> Vocabulary {
        Vocabulary::from_tokens(VocabKind::Message, 1, words.iter().map(|s| s.to_string()))
            .unwrap()
    }

    fn msg_patch(msg: &str) -> PatchChange {
        PatchChange {
            id: "x".into(),
            message_tokens: tokenize_message(msg),
            files: vec![],
        }
    }

    #[test]
    fn labels_multi_hot() {
        let v = vm(&["fix", "memory", "leak", "bug"]);
        let y = message_labels(&msg_patch("fix memory leak"), &v);
        assert_eq!(y.len(), 4);
        assert_eq!(y.0.iter().sum::<f64>(), 3.0);

        let y = message_labels(&msg_patch("update docs"), &v);
        assert!(y.is_all_zero());

        let y = message_labels(&msg_patch("fix fix bug"), &v);
        assert_eq!(y.0, vec![1.0, 0.0, 0.0, 1.0]);
    }

    fn write_tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        p
    }

    #[test]
    fn paired_import() {
        let dir = tempfile::tempdir().unwrap();
        let d = write_tmp(
            &dir,
            "d.txt",
            "--- a<nl>+++ b<nl>@@<nl>-x=1<nl>+x=2\n--- a/f<nl>+++ b/f<nl>@@ -1 +1 @@<nl>-y<nl>+z\n",
        );
        let m = write_tmp(&dir, "m.txt", "Fix x\nupdate y\n");
        let patches = import_paired_files(&d, &m, DEFAULT_NEWLINE_MARKER).unwrap();
        assert_eq!(patches.len(), 2);
        assert_eq!(patches[0].files.len(), 1);
        assert_eq!(patches[0].files[0].path, "b");
        assert_eq!(patches[0].files[0].hunks[0].removed, vec![vec!["x", "=", "1"]]);
        assert_eq!(patches[0].files[0].hunks[0].added, vec![vec!["x", "=", "2"]]);
        assert_eq!(patches[0].message_tokens, ["fix", "x"]);
        assert_eq!(patches[1].message_tokens, ["update", "y"]);
        assert_ne!(patches[0].id, patches[1].id);
    }

    #[test]
    fn paired_import_line_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let d = write_tmp(&dir, "d.txt", "a\nb\nc\n");
        let m = write_tmp(&dir, "m.txt", "a\nb\n");
        let err = import_paired_files(&d, &m, "<nl>").unwrap_err();
        assert!(err.to_string().contains("3 != 2"), "{err}");
    }

    #[test]
    fn jsonl_round_trip_and_tokenize() {
        let rec = CorpusRecord {
            id: "abc".into(),
            message: "Fix Leak\nsecond line ignored".into(),
            files: vec![RecordFile {
                path: "a.c".into(),
                hunks: vec![
                    RecordHunk {
                        removed: vec!["free(p);".into(), "   ".into()],
                        added: vec![],
                    },
                    RecordHunk {
                        removed: vec![],
                        added: vec![" ".into()],
                    },
                ],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_jsonl_records(&p, std::slice::from_ref(&rec)).unwrap();
        let back = read_jsonl_records(&p).unwrap();
        assert_eq!(back, vec![rec.clone()]);
        let patch = rec.to_patch();
        assert_eq!(patch.message_tokens, ["fix", "leak"]);
        assert_eq!(patch.files[0].hunks.len(), 1);
        assert_eq!(patch.files[0].hunks[0].removed, vec![vec!["free", "(", "p", ")", ";"]]);
    }

    #[test]
    fn missing_id_gets_content_hash() {
        let json = r#"{"message":"m","files":[{"path":"f","hunks":[{"added":["x"]}]}]}"#;
        let rec: CorpusRecord = serde_json::from_str(json).unwrap();
        let a = rec.to_patch();
        let b = rec.to_patch();
        assert_eq!(a.id.len(), 16);
        assert_eq!(a.id, b.id);
    }
}
