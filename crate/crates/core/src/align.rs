//! Minimum-edit-distance alignment between reference and hypothesis tokens.
//!
//! [`align`] produces the ordered hit/substitution/deletion/insertion
//! operations plus the H/S/D/I tally every metric is built from.
//! [`project_span`] maps a reference token range onto the hypothesis range
//! the alignment associates with it, which is how annotated disfluency spans
//! are extracted from vendor output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::TokenSequence;

/// Kind of a single alignment operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Hit,
    Substitution,
    Deletion,
    Insertion,
}

/// One alignment step. Hits and substitutions carry both indices, deletions
/// only `ref_index`, insertions only `hyp_index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

/// H/S/D/I tally of an alignment.
///
/// Always satisfies `H + S + D = len(reference)`, `H + S + I =
/// len(hypothesis)`, and `S + D + I = Levenshtein distance`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl ErrorCounts {
    /// S + D + I.
    pub fn total_errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// H + S + D.
    pub fn reference_len(&self) -> usize {
        self.hits + self.substitutions + self.deletions
    }

    /// H + S + I.
    pub fn hypothesis_len(&self) -> usize {
        self.hits + self.substitutions + self.insertions
    }
}

/// Ordered edit operations plus their tally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub counts: ErrorCounts,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("span [{start}, {end}] out of bounds for reference of length {len}")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
}

/// Boundary handling for [`project_span`]. Inside-only is the single defined
/// rule: insertions at the edges of the reference span are never attributed
/// to it, only insertions strictly between two in-span anchors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryRule {
    #[default]
    InsideOnly,
}

/// Aligns `hypothesis` against `reference` with unit costs and returns the
/// minimum-total-error alignment.
///
/// Ties between equal-cost alignments are broken deterministically: the op
/// list is built scanning forward from the sequence starts, and at each
/// position the first remaining-cost-consistent choice in the preference
/// order hit > substitution > deletion > insertion is taken. The practical
/// effect is that a token keeps the earliest hypothesis match the optimum
/// allows, so e.g. aligning `a x a` against `a` matches the first `a` and
/// deletes the rest rather than skipping ahead to the last `a`.
pub fn align(reference: &TokenSequence, hypothesis: &TokenSequence) -> Alignment {
    let r = reference.tokens();
    let h = hypothesis.tokens();
    let m = r.len();
    let n = h.len();
    let width = n + 1;

    // cost[i * width + j] = edit distance between r[i..] and h[j..].
    let mut cost = vec![0u32; (m + 1) * width];
    for j in 0..=n {
        cost[m * width + j] = (n - j) as u32;
    }
    for i in (0..m).rev() {
        cost[i * width + n] = (m - i) as u32;
        for j in (0..n).rev() {
            let diagonal = cost[(i + 1) * width + j + 1];
            cost[i * width + j] = if r[i] == h[j] {
                diagonal
            } else {
                1 + diagonal
                    .min(cost[(i + 1) * width + j])
                    .min(cost[i * width + j + 1])
            };
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let mut counts = ErrorCounts::default();
    let (mut i, mut j) = (0usize, 0usize);
    while i < m || j < n {
        let here = cost[i * width + j];
        if i < m && j < n && r[i] == h[j] {
            // Taking an available hit never costs extra under unit costs.
            ops.push(EditOp {
                kind: EditKind::Hit,
                ref_index: Some(i),
                hyp_index: Some(j),
            });
            counts.hits += 1;
            i += 1;
            j += 1;
        } else if i < m && j < n && cost[(i + 1) * width + j + 1] + 1 == here {
            ops.push(EditOp {
                kind: EditKind::Substitution,
                ref_index: Some(i),
                hyp_index: Some(j),
            });
            counts.substitutions += 1;
            i += 1;
            j += 1;
        } else if i < m && cost[(i + 1) * width + j] + 1 == here {
            ops.push(EditOp {
                kind: EditKind::Deletion,
                ref_index: Some(i),
                hyp_index: None,
            });
            counts.deletions += 1;
            i += 1;
        } else {
            debug_assert!(j < n && cost[i * width + j + 1] + 1 == here);
            ops.push(EditOp {
                kind: EditKind::Insertion,
                ref_index: None,
                hyp_index: Some(j),
            });
            counts.insertions += 1;
            j += 1;
        }
    }
    Alignment { ops, counts }
}

/// Projects an inclusive reference token range `[ref_start, ref_end]` onto
/// the hypothesis: the minimal contiguous hypothesis range covering every
/// hit/substitution landing inside the span. Insertions strictly between two
/// in-span anchors fall inside the returned range by construction; edge
/// insertions are excluded per [`BoundaryRule::InsideOnly`].
///
/// Returns `Ok(None)` when every in-span reference token was deleted.
pub fn project_span(
    alignment: &Alignment,
    ref_start: usize,
    ref_end: usize,
    _boundary_rule: BoundaryRule,
) -> Result<Option<(usize, usize)>, AlignError> {
    let ref_len = alignment.counts.reference_len();
    if ref_start > ref_end || ref_end >= ref_len {
        return Err(AlignError::SpanOutOfBounds {
            start: ref_start,
            end: ref_end,
            len: ref_len,
        });
    }
    let mut range: Option<(usize, usize)> = None;
    for op in &alignment.ops {
        if !matches!(op.kind, EditKind::Hit | EditKind::Substitution) {
            continue;
        }
        let (ri, hj) = (
            op.ref_index.expect("hit/sub carries ref index"),
            op.hyp_index.expect("hit/sub carries hyp index"),
        );
        if ri < ref_start || ri > ref_end {
            continue;
        }
        range = Some(match range {
            None => (hj, hj),
            Some((lo, hi)) => (lo.min(hj), hi.max(hj)),
        });
    }
    Ok(range)
}
