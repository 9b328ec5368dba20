//! Unified diff ingestion.
//!
//! Only removed (`-`) and added (`+`) lines are kept; context lines,
//! `\ No newline at end of file` markers and whitespace-only changed lines
//! are dropped. Hunks are split at `@@` markers and files at `diff` headers
//! or at a `---`/`+++` header pair.

use super::tokenize::tokenize_line;
use super::{FileChange, Hunk};
use crate::error::{Error, Result};

/// One hunk before tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawHunk {
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

impl RawHunk {
    fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

/// One file's changes before tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawFileDiff {
    pub path: String,
    pub hunks: Vec<RawHunk>,
}

impl RawFileDiff {
    pub fn tokenize(&self) -> FileChange {
        let tok = |lines: &[String]| lines.iter().map(|l| tokenize_line(l)).collect();
        FileChange {
            path: self.path.clone(),
            hunks: self
                .hunks
                .iter()
                .map(|h| Hunk {
                    removed: tok(&h.removed),
                    added: tok(&h.added),
                })
                .collect(),
        }
    }
}

/// A file that was skipped while parsing, with the 1-based line of the marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffWarning {
    pub line: usize,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawDiff {
    pub files: Vec<RawFileDiff>,
    pub warnings: Vec<DiffWarning>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedDiff {
    pub files: Vec<FileChange>,
    pub warnings: Vec<DiffWarning>,
}

/// Parse a unified diff into tokenized per-file changes.
pub fn parse_unified_diff(text: &str) -> Result<ParsedDiff> {
    let raw = parse_unified_diff_raw(text)?;
    Ok(ParsedDiff {
        files: raw.files.iter().map(RawFileDiff::tokenize).collect(),
        warnings: raw.warnings,
    })
}

/// Remaining old/new line counts advertised by a hunk header.
#[derive(Debug, Clone, Copy)]
struct HunkBudget {
    old: usize,
    new: usize,
}

impl HunkBudget {
    fn exhausted(&self) -> bool {
        self.old == 0 && self.new == 0
    }
}

struct FileBuilder {
    file: RawFileDiff,
    current: Option<RawHunk>,
    binary: bool,
}

impl FileBuilder {
    fn new(path: String) -> Self {
        FileBuilder {
            file: RawFileDiff {
                path,
                hunks: Vec::new(),
            },
            current: None,
            binary: false,
        }
    }

    fn close_hunk(&mut self) {
        if let Some(h) = self.current.take() {
            if !h.is_empty() {
                self.file.hunks.push(h);
            }
        }
    }
}

fn strip_prefix_path(p: &str) -> &str {
    // `--- a/foo.c\t2020-01-01 ...` -> `foo.c`
    let p = p.split('\t').next().unwrap_or(p).trim_end();
    p.strip_prefix("a/")
        .or_else(|| p.strip_prefix("b/"))
        .unwrap_or(p)
}

fn path_from_git_header(rest: &str) -> String {
    // `diff --git a/x b/y`
    let rest = rest.trim();
    match rest.rfind(" b/") {
        Some(pos) => rest[pos + 3..].to_string(),
        None => rest
            .split_whitespace()
            .last()
            .map(|s| strip_prefix_path(s).to_string())
            .unwrap_or_default(),
    }
}

fn parse_range(s: &str) -> Option<usize> {
    // `12,7` or `12`; only the count matters.
    let mut it = s.splitn(2, ',');
    let start = it.next()?;
    start.parse::<usize>().ok()?;
    match it.next() {
        Some(count) => count.parse().ok(),
        None => Some(1),
    }
}

/// Returns `Ok(None)` for a bare `@@` marker (no ranges), `Ok(Some)` with the
/// advertised counts otherwise.
fn parse_hunk_header(line: &str, lineno: usize) -> Result<Option<HunkBudget>> {
    let rest = line[2..].trim();
    if rest.is_empty() {
        return Ok(None);
    }
    let malformed = || Error::DiffParse {
        line: lineno,
        message: format!("malformed hunk header {line:?}"),
    };
    let end = rest.find("@@").ok_or_else(malformed)?;
    let mut parts = rest[..end].split_whitespace();
    let old = parts
        .next()
        .and_then(|p| p.strip_prefix('-'))
        .and_then(parse_range)
        .ok_or_else(malformed)?;
    let new = parts
        .next()
        .and_then(|p| p.strip_prefix('+'))
        .and_then(parse_range)
        .ok_or_else(malformed)?;
    if parts.next().is_some() {
        return Err(malformed());
    }
    Ok(Some(HunkBudget { old, new }))
}

/// Parse a unified diff, keeping the raw text of removed and added lines.
pub fn parse_unified_diff_raw(text: &str) -> Result<RawDiff> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = RawDiff::default();
    let mut file: Option<FileBuilder> = None;
    let mut budget: Option<HunkBudget> = None;

    let finish = |file: Option<FileBuilder>, out: &mut RawDiff| {
        if let Some(mut fb) = file {
            fb.close_hunk();
            if !fb.binary && !fb.file.hunks.is_empty() {
                out.files.push(fb.file);
            }
        }
    };

    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;
        // body lines never start with `@` or `diff --git`, so an undercounted
        // header does not swallow the next hunk or file
        let in_counted_hunk = budget.is_some_and(|b| !b.exhausted())
            && !line.starts_with("@@")
            && !line.starts_with("diff --git ");

        if in_counted_hunk {
            let b = budget.as_mut().expect("checked above");
            let fb = file.as_mut().expect("hunk implies file");
            let hunk = fb.current.get_or_insert_with(RawHunk::default);
            if let Some(rest) = line.strip_prefix('-') {
                b.old = b.old.saturating_sub(1);
                if !rest.trim().is_empty() {
                    hunk.removed.push(rest.to_string());
                }
            } else if let Some(rest) = line.strip_prefix('+') {
                b.new = b.new.saturating_sub(1);
                if !rest.trim().is_empty() {
                    hunk.added.push(rest.to_string());
                }
            } else if line.starts_with('\\') {
                // "\ No newline at end of file"
            } else {
                // context (possibly with its leading space stripped)
                b.old = b.old.saturating_sub(1);
                b.new = b.new.saturating_sub(1);
            }
            i += 1;
            continue;
        }

        if let Some(rest) = line.strip_prefix("diff ") {
            finish(file.take(), &mut out);
            budget = None;
            let rest = rest.strip_prefix("--git ").unwrap_or(rest);
            file = Some(FileBuilder::new(path_from_git_header(rest)));
        } else if line.starts_with("--- ")
            && lines.get(i + 1).is_some_and(|n| n.starts_with("+++"))
        {
            let old_path = strip_prefix_path(&line[4..]).to_string();
            let new_line = lines[i + 1];
            let new_path = strip_prefix_path(new_line[3..].trim_start()).to_string();
            let path = if new_path == "/dev/null" || new_path.is_empty() {
                old_path
            } else {
                new_path
            };
            // a `diff` header directly above owns this ---/+++ pair
            let owned = file
                .as_ref()
                .is_some_and(|fb| fb.file.hunks.is_empty() && fb.current.is_none());
            if owned {
                let fb = file.as_mut().expect("checked");
                if !path.is_empty() {
                    fb.file.path = path;
                }
            } else {
                finish(file.take(), &mut out);
                file = Some(FileBuilder::new(path));
            }
            budget = None;
            i += 2;
            continue;
        } else if line.starts_with("@@") {
            let parsed = parse_hunk_header(line, lineno)?;
            let fb = file.get_or_insert_with(|| FileBuilder::new(String::new()));
            fb.close_hunk();
            fb.current = Some(RawHunk::default());
            budget = parsed;
        } else if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            let fb = file.get_or_insert_with(|| FileBuilder::new(String::new()));
            if !fb.binary {
                fb.binary = true;
                out.warnings.push(DiffWarning {
                    line: lineno,
                    path: fb.file.path.clone(),
                    message: "binary file skipped".to_string(),
                });
            }
        } else if let Some(fb) = file
            .as_mut()
            .filter(|fb| budget.is_none() && fb.current.is_some())
        {
            // Bare `@@` hunk: no counts, consume until the next header.
            let hunk = fb.current.as_mut().expect("filtered");
            if let Some(rest) = line.strip_prefix('-') {
                if !rest.trim().is_empty() {
                    hunk.removed.push(rest.to_string());
                }
            } else if let Some(rest) = line.strip_prefix('+') {
                if !rest.trim().is_empty() {
                    hunk.added.push(rest.to_string());
                }
            }
        }
        // Anything else (index lines, mode changes, preamble) is ignored.
        i += 1;
    }
    finish(file.take(), &mut out);
    Ok(out)
}
