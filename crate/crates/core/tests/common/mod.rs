//! Independent oracles shared by the integration tests. Nothing here calls
//! into the alignment or clustering code it is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use coregene::align::AlignmentParams;

/// (score, identities, alignment length) of the chosen optimal alignment.
pub type Stats = (f64, usize, usize);

/// Lexicographic preference: higher score, more identities, shorter.
fn better(a: Stats, b: Stats) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    a.2 < b.2
}

#[derive(Clone, Copy, PartialEq)]
enum Op {
    D,
    U,
    L,
}

/// Scores an explicit column list, charging open for the first column of a
/// gap run and extend for each further column of the same kind.
fn score_ops(x: &[u8], y: &[u8], ops: &[Op], p: &AlignmentParams) -> Stats {
    let (mut i, mut j) = (0, 0);
    let mut score = 0.0;
    let mut ident = 0;
    let mut prev: Option<Op> = None;
    for &op in ops {
        match op {
            Op::D => {
                if x[i] == y[j] {
                    score += p.match_score;
                    ident += 1;
                } else {
                    score += p.mismatch_score;
                }
                i += 1;
                j += 1;
            }
            Op::U | Op::L => {
                score -= if prev == Some(op) {
                    p.gap_extend
                } else {
                    p.gap_open
                };
                if op == Op::U {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }
        prev = Some(op);
    }
    (score, ident, ops.len())
}

/// Brute force over every global alignment of `x` and `y`.
pub fn enumerate_best(x: &[u8], y: &[u8], p: &AlignmentParams) -> Stats {
    fn rec(
        x: &[u8],
        y: &[u8],
        i: usize,
        j: usize,
        ops: &mut Vec<Op>,
        p: &AlignmentParams,
        best: &mut Option<Stats>,
    ) {
        if i == x.len() && j == y.len() {
            let s = score_ops(x, y, ops, p);
            if best.is_none_or(|b| better(s, b)) {
                *best = Some(s);
            }
            return;
        }
        if i < x.len() && j < y.len() {
            ops.push(Op::D);
            rec(x, y, i + 1, j + 1, ops, p, best);
            ops.pop();
        }
        if i < x.len() {
            ops.push(Op::U);
            rec(x, y, i + 1, j, ops, p, best);
            ops.pop();
        }
        if j < y.len() {
            ops.push(Op::L);
            rec(x, y, i, j + 1, ops, p, best);
            ops.pop();
        }
    }
    let mut best = None;
    rec(x, y, 0, 0, &mut Vec::new(), p, &mut best);
    best.expect("at least one alignment")
}

/// Quadratic-space reference working backwards over suffixes: `tab[s][i][j]`
/// is the best completion of `x[i..]` vs `y[j..]` given that the previous
/// column was of kind `s` (0 start, 1 diagonal, 2 up, 3 left).
pub fn reference_best(x: &[u8], y: &[u8], p: &AlignmentParams) -> Stats {
    let (n, m) = (x.len(), y.len());
    let mut tab = vec![vec![vec![(0.0f64, 0usize, 0usize); m + 1]; n + 1]; 4];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            for s in 0..4 {
                if i == n && j == m {
                    tab[s][i][j] = (0.0, 0, 0);
                    continue;
                }
                let mut best: Option<Stats> = None;
                let mut offer = |c: Stats| {
                    if best.is_none_or(|b| better(c, b)) {
                        best = Some(c);
                    }
                };
                if i < n && j < m {
                    let (sc, id, ln) = tab[1][i + 1][j + 1];
                    let hit = x[i] == y[j];
                    let sub = if hit { p.match_score } else { p.mismatch_score };
                    offer((sc + sub, id + hit as usize, ln + 1));
                }
                if i < n {
                    let (sc, id, ln) = tab[2][i + 1][j];
                    let cost = if s == 2 { p.gap_extend } else { p.gap_open };
                    offer((sc - cost, id, ln + 1));
                }
                if j < m {
                    let (sc, id, ln) = tab[3][i][j + 1];
                    let cost = if s == 3 { p.gap_extend } else { p.gap_open };
                    offer((sc - cost, id, ln + 1));
                }
                tab[s][i][j] = best.unwrap();
            }
        }
    }
    tab[0][0][0]
}

/// Partition of `0..n` under the reflexive-transitive closure of `edges`,
/// computed with Warshall's algorithm.
pub fn closure_partition(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
        reach[b][a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let via = reach[k].clone();
                for (cell, &hop) in reach[i].iter_mut().zip(&via) {
                    *cell |= hop;
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| reach[i][j]).collect())
        .collect()
}

/// Plain n-way intersection.
pub fn intersect_all(sets: &[BTreeSet<String>]) -> BTreeSet<String> {
    let mut it = sets.iter();
    let first = it.next().cloned().unwrap_or_default();
    it.fold(first, |acc, s| acc.intersection(s).cloned().collect())
}

/// A tiny Newick reader: returns (label, branch length, children) trees.
#[derive(Debug, Clone, PartialEq)]
pub struct NewickNode {
    pub label: String,
    pub length: Option<f64>,
    pub children: Vec<NewickNode>,
}

pub fn parse_newick(s: &str) -> NewickNode {
    let bytes: Vec<char> = s.trim().chars().collect();
    let mut pos = 0;
    let node = parse_node(&bytes, &mut pos);
    assert_eq!(bytes.get(pos), Some(&';'), "missing terminator in {s}");
    assert_eq!(pos + 1, bytes.len(), "trailing input in {s}");
    node
}

fn parse_node(b: &[char], pos: &mut usize) -> NewickNode {
    let mut children = Vec::new();
    if b[*pos] == '(' {
        *pos += 1;
        loop {
            children.push(parse_node(b, pos));
            match b[*pos] {
                ',' => *pos += 1,
                ')' => {
                    *pos += 1;
                    break;
                }
                c => panic!("unexpected {c:?} at {pos}"),
            }
        }
    }
    let mut label = String::new();
    if *pos < b.len() && b[*pos] == '\'' {
        *pos += 1;
        loop {
            if b[*pos] == '\'' {
                if b.get(*pos + 1) == Some(&'\'') {
                    label.push('\'');
                    *pos += 2;
                    continue;
                }
                *pos += 1;
                break;
            }
            label.push(b[*pos]);
            *pos += 1;
        }
    } else {
        while *pos < b.len() && !matches!(b[*pos], ':' | ',' | ')' | ';') {
            label.push(b[*pos]);
            *pos += 1;
        }
    }
    let mut length = None;
    if *pos < b.len() && b[*pos] == ':' {
        *pos += 1;
        let start = *pos;
        while *pos < b.len() && !matches!(b[*pos], ',' | ')' | ';') {
            *pos += 1;
        }
        let text: String = b[start..*pos].iter().collect();
        length = Some(text.parse().expect("branch length"));
    }
    NewickNode {
        label,
        length,
        children,
    }
}
