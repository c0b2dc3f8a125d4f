//! Needleman-Wunsch global alignment with affine gaps (Gotoh's three-state
//! recurrence) and the identity-based similarity measure built on it.
//!
//! A gap of length `L` costs `gap_open + (L - 1) * gap_extend`; end gaps are
//! penalized. Among alignments with the optimal score the one with the most
//! identities wins, then the shortest one. Remaining ties are broken by the
//! traceback order diagonal, up, left. Because the first two criteria are
//! invariant under swapping the sequences, `similarity(x, y)` is exactly
//! symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scoring parameters, defaulting to `needle`'s DNA setup (EDNAFULL on ACGT,
/// gap open 10.0, gap extend 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    pub gap_open: f64,
    pub gap_extend: f64,
    pub match_score: f64,
    pub mismatch_score: f64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        AlignmentParams {
            gap_open: 10.0,
            gap_extend: 0.5,
            match_score: 5.0,
            mismatch_score: -4.0,
        }
    }
}

impl AlignmentParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gap_open,
            self.gap_extend,
            self.match_score,
            self.mismatch_score,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("alignment parameters must be finite".into()));
        }
        if !(self.gap_open > 0.0 && self.gap_extend > 0.0) {
            return Err(Error::Config(format!(
                "gap penalties must be positive (open {}, extend {})",
                self.gap_open, self.gap_extend
            )));
        }
        if self.match_score <= self.mismatch_score {
            return Err(Error::Config("match score must exceed mismatch score".into()));
        }
        Ok(())
    }

    #[inline]
    fn substitution(&self, a: u8, b: u8) -> f64 {
        if a == b {
            self.match_score
        } else {
            self.mismatch_score
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub score: f64,
    pub identities: usize,
    pub alignment_length: usize,
    /// `identities / alignment_length`.
    pub similarity: f64,
}

/// One alignment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignOp {
    /// `x[i]` against `y[j]`, match or mismatch.
    Diagonal,
    /// `x[i]` against a gap.
    Up,
    /// A gap against `y[j]`.
    Left,
}

/// An alignment with its column operations in forward order.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedAlignment {
    pub result: AlignmentResult,
    pub ops: Vec<AlignOp>,
}

impl TracedAlignment {
    /// Gapped rendering of both rows.
    pub fn rows(&self, x: &[u8], y: &[u8]) -> (String, String) {
        let (mut i, mut j) = (0, 0);
        let mut top = String::with_capacity(self.ops.len());
        let mut bottom = String::with_capacity(self.ops.len());
        for op in &self.ops {
            match op {
                AlignOp::Diagonal => {
                    top.push(x[i] as char);
                    bottom.push(y[j] as char);
                    i += 1;
                    j += 1;
                }
                AlignOp::Up => {
                    top.push(x[i] as char);
                    bottom.push('-');
                    i += 1;
                }
                AlignOp::Left => {
                    top.push('-');
                    bottom.push(y[j] as char);
                    j += 1;
                }
            }
        }
        (top, bottom)
    }
}

/// Best (score, identities, length) of a prefix alignment ending in a given
/// state. Ordered lexicographically: higher score, then more identities,
/// then shorter.
#[derive(Debug, Clone, Copy)]
struct Cell {
    score: f64,
    ident: u32,
    len: u32,
}

const NONE: Cell = Cell {
    score: f64::NEG_INFINITY,
    ident: 0,
    len: 0,
};

impl Cell {
    #[inline]
    fn beats(self, other: Cell) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        if self.ident != other.ident {
            return self.ident > other.ident;
        }
        self.len < other.len
    }

    #[inline]
    fn step(self, cost: f64, ident: u32) -> Cell {
        Cell {
            score: self.score + cost,
            ident: self.ident + ident,
            len: self.len + 1,
        }
    }
}

/// Index of the best candidate, earliest on full ties.
#[inline]
fn best3(c: [Cell; 3]) -> (Cell, u8) {
    let mut best = c[0];
    let mut at = 0u8;
    for (k, &cand) in c.iter().enumerate().skip(1) {
        if cand.beats(best) {
            best = cand;
            at = k as u8;
        }
    }
    (best, at)
}

fn check_inputs(x: &[u8], y: &[u8], p: &AlignmentParams) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Alignment("empty input sequence".into()));
    }
    if let Some(&b) = x
        .iter()
        .chain(y)
        .find(|b| !matches!(b, b'A' | b'C' | b'G' | b'T'))
    {
        return Err(Error::Alignment(format!("invalid nucleotide {:?}", b as char)));
    }
    p.validate().map_err(|e| Error::Alignment(e.to_string()))
}

fn finish(c: Cell) -> AlignmentResult {
    AlignmentResult {
        score: c.score,
        identities: c.ident as usize,
        alignment_length: c.len as usize,
        similarity: c.ident as f64 / c.len as f64,
    }
}

/// Optimal global alignment statistics in linear space.
pub fn align_global(x: &[u8], y: &[u8], p: &AlignmentParams) -> Result<AlignmentResult> {
    check_inputs(x, y, p)?;
    match PackedCosts::new(x.len(), y.len(), p) {
        Some(costs) => Ok(align_packed(x, y, &costs)),
        None => Ok(align_cells(x, y, p)),
    }
}

/// Bit layout of a packed key: `score * 2^SCORE_SHIFT + ident * 2^IDENT_SHIFT - len`.
/// Integer order on keys equals the (score, ident, -len) order as long as
/// ident and len stay below 2^IDENT_SHIFT and the scaled score below 2^19.
const IDENT_SHIFT: u32 = 21;
const SCORE_SHIFT: u32 = 42;
const PACKED_NONE: i64 = i64::MIN / 4;

/// Per-column key increments for [`align_packed`].
struct PackedCosts {
    hit: i64,
    miss: i64,
    open: i64,
    ext: i64,
    scale: f64,
}

impl PackedCosts {
    /// `None` when some parameter is not a multiple of 2^-10 or the
    /// sequences are long enough to overflow a field.
    fn new(n: usize, m: usize, p: &AlignmentParams) -> Option<Self> {
        let vals = [p.match_score, p.mismatch_score, p.gap_open, p.gap_extend];
        let scale = (0..=10)
            .map(|k| (1u32 << k) as f64)
            .find(|s| vals.iter().all(|v| (v * s).fract() == 0.0))?;
        let biggest = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())) * scale;
        let cols = (n + m) as f64;
        if cols >= (1u64 << IDENT_SHIFT) as f64 || cols * biggest >= (1u64 << 19) as f64 {
            return None;
        }
        let unit = |v: f64| ((v * scale) as i64) << SCORE_SHIFT;
        Some(PackedCosts {
            hit: unit(p.match_score) + (1 << IDENT_SHIFT) - 1,
            miss: unit(p.mismatch_score) - 1,
            open: -unit(p.gap_open) - 1,
            ext: -unit(p.gap_extend) - 1,
            scale,
        })
    }

    fn unpack(&self, key: i64) -> AlignmentResult {
        let field = 1i64 << IDENT_SHIFT;
        let len = (field - key.rem_euclid(field)) % field;
        let rest = (key + len) >> IDENT_SHIFT;
        let ident = rest.rem_euclid(field);
        let score = ((rest - ident) >> IDENT_SHIFT) as f64 / self.scale;
        AlignmentResult {
            score,
            identities: ident as usize,
            alignment_length: len as usize,
            similarity: ident as f64 / len as f64,
        }
    }
}

fn align_packed(x: &[u8], y: &[u8], c: &PackedCosts) -> AlignmentResult {
    let m = y.len();
    let mut diag = vec![PACKED_NONE; m + 1];
    let mut up = vec![PACKED_NONE; m + 1];
    let mut left = vec![PACKED_NONE; m + 1];
    diag[0] = 0;
    for j in 1..=m {
        left[j] = (diag[j - 1] + c.open).max(left[j - 1] + c.ext);
    }
    for &xi in x {
        let mut prev_diag = diag[0];
        let mut prev_up = up[0];
        let mut prev_left = left[0];
        diag[0] = PACKED_NONE;
        up[0] = (prev_diag + c.open).max(prev_up + c.ext).max(prev_left + c.open);
        left[0] = PACKED_NONE;
        for j in 1..=m {
            let sub = if xi == y[j - 1] { c.hit } else { c.miss };
            let (d_old, u_old, l_old) = (diag[j], up[j], left[j]);
            let d = prev_diag.max(prev_up).max(prev_left) + sub;
            let u = (d_old + c.open).max(u_old + c.ext).max(l_old + c.open);
            let l = (diag[j - 1] + c.open)
                .max(up[j - 1] + c.open)
                .max(left[j - 1] + c.ext);
            diag[j] = d;
            up[j] = u;
            left[j] = l;
            prev_diag = d_old;
            prev_up = u_old;
            prev_left = l_old;
        }
    }
    c.unpack(diag[m].max(up[m]).max(left[m]))
}

/// General path for parameters the packed keys cannot represent.
fn align_cells(x: &[u8], y: &[u8], p: &AlignmentParams) -> AlignmentResult {
    let m = y.len();
    let (open, ext) = (-p.gap_open, -p.gap_extend);

    // Row i-1 of the three matrices; `diag`/`up`/`left` end in D, U, L.
    let mut diag = vec![NONE; m + 1];
    let mut up = vec![NONE; m + 1];
    let mut left = vec![NONE; m + 1];
    diag[0] = Cell {
        score: 0.0,
        ident: 0,
        len: 0,
    };
    for j in 1..=m {
        left[j] = best3([diag[j - 1].step(open, 0), NONE, left[j - 1].step(ext, 0)]).0;
    }

    let mut ndiag = vec![NONE; m + 1];
    let mut nup = vec![NONE; m + 1];
    let mut nleft = vec![NONE; m + 1];
    for &xi in x {
        ndiag[0] = NONE;
        nup[0] = best3([diag[0].step(open, 0), up[0].step(ext, 0), left[0].step(open, 0)]).0;
        nleft[0] = NONE;
        for j in 1..=m {
            let yj = y[j - 1];
            let hit = (xi == yj) as u32;
            let sub = p.substitution(xi, yj);
            ndiag[j] = best3([
                diag[j - 1].step(sub, hit),
                up[j - 1].step(sub, hit),
                left[j - 1].step(sub, hit),
            ])
            .0;
            nup[j] = best3([diag[j].step(open, 0), up[j].step(ext, 0), left[j].step(open, 0)]).0;
            nleft[j] = best3([
                ndiag[j - 1].step(open, 0),
                nup[j - 1].step(open, 0),
                nleft[j - 1].step(ext, 0),
            ])
            .0;
        }
        std::mem::swap(&mut diag, &mut ndiag);
        std::mem::swap(&mut up, &mut nup);
        std::mem::swap(&mut left, &mut nleft);
    }
    finish(best3([diag[m], up[m], left[m]]).0)
}

/// Same optimum as [`align_global`], keeping back-pointers so the chosen
/// alignment can be recovered. Uses `|x| * |y|` bytes.
pub fn align_traced(x: &[u8], y: &[u8], p: &AlignmentParams) -> Result<TracedAlignment> {
    check_inputs(x, y, p)?;
    let (n, m) = (x.len(), y.len());
    let (open, ext) = (-p.gap_open, -p.gap_extend);
    let width = m + 1;
    // Per cell: bits 0-1 predecessor of D, 2-3 of U, 4-5 of L.
    let mut ptr = vec![0u8; (n + 1) * width];

    let mut diag = vec![NONE; width];
    let mut up = vec![NONE; width];
    let mut left = vec![NONE; width];
    diag[0] = Cell {
        score: 0.0,
        ident: 0,
        len: 0,
    };
    for j in 1..=m {
        let (c, k) = best3([diag[j - 1].step(open, 0), NONE, left[j - 1].step(ext, 0)]);
        left[j] = c;
        ptr[j] = k << 4;
    }
    let mut ndiag = vec![NONE; width];
    let mut nup = vec![NONE; width];
    let mut nleft = vec![NONE; width];
    for i in 1..=n {
        let xi = x[i - 1];
        let row = i * width;
        let (c, k) = best3([diag[0].step(open, 0), up[0].step(ext, 0), left[0].step(open, 0)]);
        ndiag[0] = NONE;
        nup[0] = c;
        nleft[0] = NONE;
        ptr[row] = k << 2;
        for j in 1..=m {
            let yj = y[j - 1];
            let hit = (xi == yj) as u32;
            let sub = p.substitution(xi, yj);
            let (d, kd) = best3([
                diag[j - 1].step(sub, hit),
                up[j - 1].step(sub, hit),
                left[j - 1].step(sub, hit),
            ]);
            let (u, ku) = best3([diag[j].step(open, 0), up[j].step(ext, 0), left[j].step(open, 0)]);
            let (l, kl) = best3([
                ndiag[j - 1].step(open, 0),
                nup[j - 1].step(open, 0),
                nleft[j - 1].step(ext, 0),
            ]);
            ndiag[j] = d;
            nup[j] = u;
            nleft[j] = l;
            ptr[row + j] = kd | (ku << 2) | (kl << 4);
        }
        std::mem::swap(&mut diag, &mut ndiag);
        std::mem::swap(&mut up, &mut nup);
        std::mem::swap(&mut left, &mut nleft);
    }
    let (end, mut state) = best3([diag[m], up[m], left[m]]);

    let mut ops = Vec::with_capacity(end.len as usize);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let bits = ptr[i * width + j];
        let next = (bits >> (2 * state)) & 0b11;
        match state {
            0 => {
                ops.push(AlignOp::Diagonal);
                i -= 1;
                j -= 1;
            }
            1 => {
                ops.push(AlignOp::Up);
                i -= 1;
            }
            _ => {
                ops.push(AlignOp::Left);
                j -= 1;
            }
        }
        state = next;
    }
    ops.reverse();
    Ok(TracedAlignment {
        result: finish(end),
        ops,
    })
}

/// The similarity measure: fraction of identical columns in the optimal
/// global alignment.
pub fn similarity(x: &[u8], y: &[u8], p: &AlignmentParams) -> Result<f64> {
    align_global(x, y, p).map(|r| r.similarity)
}
