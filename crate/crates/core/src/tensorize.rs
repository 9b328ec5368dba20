//! Fixed-shape integer encoding of a patch.

use serde::{Deserialize, Serialize};

use crate::corpus::{PatchChange, TokenLine, Vocabulary, PAD_ID};
use crate::error::{Error, Result};

/// Files per patch, hunks per file, lines per hunk, words per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeConfig {
    pub files: usize,
    pub hunks: usize,
    pub lines: usize,
    pub words: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            files: 5,
            hunks: 8,
            lines: 10,
            words: 32,
        }
    }
}

impl ShapeConfig {
    pub fn new(files: usize, hunks: usize, lines: usize, words: usize) -> Self {
        ShapeConfig {
            files,
            hunks,
            lines,
            words,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.files == 0 || self.hunks == 0 || self.lines == 0 || self.words == 0 {
            return Err(Error::config(format!(
                "shape dimensions must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Number of ids in one side (`H x L x W`) of one file.
    pub fn side_len(&self) -> usize {
        self.hunks * self.lines * self.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Removed = 0,
    Added = 1,
}

/// Layout `[file][side][hunk][line][word]`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeTensor {
    shape: ShapeConfig,
    ids: Vec<u32>,
}

impl ChangeTensor {
    pub fn padding(shape: ShapeConfig) -> Self {
        ChangeTensor {
            shape,
            ids: vec![PAD_ID; shape.files * 2 * shape.side_len()],
        }
    }

    /// Wrap raw ids laid out as `[file][side][hunk][line][word]`.
    pub fn from_ids(shape: ShapeConfig, ids: Vec<u32>) -> Result<Self> {
        let want = shape.files * 2 * shape.side_len();
        if ids.len() != want {
            return Err(Error::shape(format!("{} ids for a tensor of {want}", ids.len())));
        }
        Ok(ChangeTensor { shape, ids })
    }

    pub fn shape(&self) -> ShapeConfig {
        self.shape
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// The `H x L x W` block of one side of one file slot.
    pub fn side(&self, file: usize, side: Side) -> &[u32] {
        let n = self.shape.side_len();
        let start = (file * 2 + side as usize) * n;
        &self.ids[start..start + n]
    }

    fn side_mut(&mut self, file: usize, side: Side) -> &mut [u32] {
        let n = self.shape.side_len();
        let start = (file * 2 + side as usize) * n;
        &mut self.ids[start..start + n]
    }

    pub fn get(&self, file: usize, side: Side, hunk: usize, line: usize, word: usize) -> u32 {
        let s = self.shape;
        self.side(file, side)[(hunk * s.lines + line) * s.words + word]
    }

    /// Non-PAD tokens of every line, per file/side/hunk.
    pub fn decode(&self, vc: &Vocabulary) -> Vec<[Vec<Vec<Vec<String>>>; 2]> {
        let s = self.shape;
        (0..s.files)
            .map(|f| {
                [Side::Removed, Side::Added].map(|side| {
                    (0..s.hunks)
                        .map(|h| {
                            (0..s.lines)
                                .map(|l| {
                                    (0..s.words)
                                        .map(|w| self.get(f, side, h, l, w))
                                        .filter(|&id| id != PAD_ID)
                                        .map(|id| vc.token(id).unwrap_or("").to_string())
                                        .collect::<Vec<_>>()
                                })
                                .filter(|line| !line.is_empty())
                                .collect::<Vec<_>>()
                        })
                        .filter(|hunk| !hunk.is_empty())
                        .collect()
                })
            })
            .collect()
    }
}

fn fill_side(block: &mut [u32], hunks: &[&[TokenLine]], shape: ShapeConfig, vc: &Vocabulary) {
    for (h, lines) in hunks.iter().take(shape.hunks).enumerate() {
        for (l, line) in lines.iter().take(shape.lines).enumerate() {
            for (w, tok) in line.iter().take(shape.words).enumerate() {
                block[(h * shape.lines + l) * shape.words + w] = vc.id(tok);
            }
        }
    }
}

/// Pad or truncate a patch to `shape`, keeping the earliest files, hunks,
/// lines and words. Unknown tokens map to OOV; a hunk with only one side
/// present leaves its counterpart block as PAD.
pub fn encode_change(patch: &PatchChange, shape: ShapeConfig, vc: &Vocabulary) -> ChangeTensor {
    let mut t = ChangeTensor::padding(shape);
    for (f, file) in patch.files.iter().take(shape.files).enumerate() {
        let removed: Vec<&[TokenLine]> = file.hunks.iter().map(|h| h.removed.as_slice()).collect();
        let added: Vec<&[TokenLine]> = file.hunks.iter().map(|h| h.added.as_slice()).collect();
        fill_side(t.side_mut(f, Side::Removed), &removed, shape, vc);
        fill_side(t.side_mut(f, Side::Added), &added, shape, vc);
    }
    t
}
