//! Alphabets, incidence matrices, admissible words and cylinders.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest word length for which path counts are tabulated.
pub const MAX_TABULATED_DEPTH: usize = 64;

/// A finite alphabet with a 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceSystem {
    n: usize,
    allowed: Vec<bool>,
    /// `counts[len][c]` = number of admissible words of length `len` starting with `c`.
    counts: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct IncidenceJson {
    alphabet: usize,
    matrix: Vec<Vec<u8>>,
}

impl IncidenceSystem {
    pub fn new(matrix: Vec<Vec<u8>>) -> Result<Self> {
        let n = matrix.len();
        if n < 2 {
            return Err(Error::InvalidSystem(format!(
                "alphabet size must be at least 2, got {n}"
            )));
        }
        let mut allowed = vec![false; n * n];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 => allowed[i * n + j] = true,
                    other => {
                        return Err(Error::InvalidSystem(format!(
                            "entry ({i}, {j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        for i in 0..n {
            if !(0..n).any(|j| allowed[i * n + j]) {
                return Err(Error::InvalidSystem(format!("row {i} has no 1")));
            }
        }
        for j in 0..n {
            if !(0..n).any(|i| allowed[i * n + j]) {
                return Err(Error::InvalidSystem(format!("column {j} has no 1")));
            }
        }
        let mut counts = vec![vec![0u64; n]; MAX_TABULATED_DEPTH + 1];
        counts[1] = vec![1; n];
        for len in 2..=MAX_TABULATED_DEPTH {
            for c in 0..n {
                let mut total = 0u64;
                for j in 0..n {
                    if allowed[c * n + j] {
                        total = total.saturating_add(counts[len - 1][j]);
                    }
                }
                counts[len][c] = total;
            }
        }
        Ok(IncidenceSystem { n, allowed, counts })
    }

    /// Parses `{"alphabet": n, "matrix": [[...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: IncidenceJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidSystem(e.to_string()))?;
        if raw.alphabet != raw.matrix.len() {
            return Err(Error::InvalidSystem(format!(
                "alphabet is {} but matrix has {} rows",
                raw.alphabet,
                raw.matrix.len()
            )));
        }
        Self::new(raw.matrix)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&IncidenceJson {
            alphabet: self.n,
            matrix: self.matrix(),
        })
        .expect("serializable")
    }

    pub fn full_shift(n: usize) -> Result<Self> {
        Self::new(vec![vec![1; n]; n])
    }

    /// `[[1,1],[1,0]]`: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("valid")
    }

    /// Free-group coding on `2g` letters; letter `i + g` is the inverse of letter `i`
    /// and a letter may not be followed by its inverse.
    pub fn schottky(g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidSystem("genus must be positive".into()));
        }
        let n = 2 * g;
        let mut m = vec![vec![1u8; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[schottky_inverse(i, g)] = 0;
        }
        Self::new(m)
    }

    pub fn alphabet_size(&self) -> usize {
        self.n
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.n + j]
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.allowed(i, j) as u8).collect())
            .collect()
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.allowed(i, j))
    }

    pub fn predecessors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.allowed(i, j))
    }

    pub fn is_admissible(&self, letters: &[usize]) -> bool {
        letters.iter().all(|&c| c < self.n) && letters.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    /// `|W^n|`, saturating.
    pub fn count_words(&self, n: usize) -> u64 {
        if n == 0 {
            return 1;
        }
        if n <= MAX_TABULATED_DEPTH {
            return self.counts[n]
                .iter()
                .fold(0u64, |a, &b| a.saturating_add(b));
        }
        u64::MAX
    }

    /// Number of depth-`n` words as a `usize`, or a capacity error above `cap`.
    pub fn checked_count(&self, n: usize, cap: usize) -> Result<usize> {
        let c = self.count_words(n);
        if c > cap as u64 {
            return Err(Error::Capacity {
                what: format!("depth-{n} enumeration"),
                requested: usize::try_from(c).unwrap_or(usize::MAX),
                cap,
            });
        }
        Ok(c as usize)
    }

    /// Calls `f` on every element of `W^n` in lexicographic order.
    pub fn visit_words(&self, n: usize, mut f: impl FnMut(&[usize])) {
        if n == 0 {
            f(&[]);
            return;
        }
        let mut buf = vec![0usize; n];
        self.visit_rec(&mut buf, 0, &mut f);
    }

    fn visit_rec(&self, buf: &mut [usize], pos: usize, f: &mut impl FnMut(&[usize])) {
        if pos == buf.len() {
            f(buf);
            return;
        }
        for c in 0..self.n {
            if pos == 0 || self.allowed(buf[pos - 1], c) {
                buf[pos] = c;
                self.visit_rec(buf, pos + 1, f);
            }
        }
    }

    /// Letter sequences of `W^n`, lexicographically ordered.
    pub fn word_letters(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.count_words(n).min(1 << 24) as usize);
        self.visit_words(n, |w| out.push(w.to_vec()));
        out
    }

    /// Position of an admissible word within the lexicographic enumeration of `W^{|w|}`.
    pub fn index_of(&self, letters: &[usize]) -> usize {
        debug_assert!(self.is_admissible(letters));
        let len = letters.len();
        let mut idx = 0u64;
        for (pos, &c) in letters.iter().enumerate() {
            let rest = len - pos;
            for smaller in 0..c {
                if pos == 0 || self.allowed(letters[pos - 1], smaller) {
                    idx += self.counts[rest][smaller];
                }
            }
        }
        idx as usize
    }

    /// True iff every letter reaches every letter through a path of positive length.
    pub fn is_irreducible(&self) -> bool {
        (0..self.n).all(|start| {
            let mut seen = vec![false; self.n];
            let mut stack: Vec<usize> = self.successors(start).collect();
            while let Some(i) = stack.pop() {
                if seen[i] {
                    continue;
                }
                seen[i] = true;
                stack.extend(self.successors(i).filter(|&j| !seen[j]));
            }
            seen.iter().all(|&s| s)
        })
    }

    /// The depth-`(|w| + |tail|)` cylinder `τ_w` maps `[tail]` onto, if the branch exists.
    pub fn inverse_branch(&self, w: &Word, tail: &Word) -> Option<Word> {
        if let (Some(&last), Some(&first)) = (w.0.last(), tail.0.first()) {
            if !self.allowed(last, first) {
                return None;
            }
        }
        let mut letters = w.0.clone();
        letters.extend_from_slice(&tail.0);
        Some(Word(letters))
    }

    /// `(w_k … w_{n-1})`, the cylinder `θ^k` pushes `[w]` onto.
    pub fn shift_cylinder(&self, w: &Word, k: usize) -> Result<Word> {
        if k >= w.len() {
            return Err(Error::InvalidWord {
                word: w.0.clone(),
                reason: format!("shift by {k} leaves no letters"),
            });
        }
        Ok(Word(w.0[k..].to_vec()))
    }
}

/// Inverse letter in the Schottky coding of genus `g`.
pub fn schottky_inverse(i: usize, g: usize) -> usize {
    (i + g) % (2 * g)
}

/// An admissible word; construction checks every consecutive pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(sys: &IncidenceSystem, letters: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&c| c >= sys.alphabet_size()) {
            return Err(Error::InvalidWord {
                word: letters,
                reason: format!("letter {bad} is outside the alphabet"),
            });
        }
        if let Some(pos) = letters.windows(2).position(|p| !sys.allowed(p[0], p[1])) {
            return Err(Error::InvalidWord {
                reason: format!(
                    "transition {} -> {} at position {pos} is forbidden",
                    letters[pos],
                    letters[pos + 1]
                ),
                word: letters,
            });
        }
        Ok(Word(letters))
    }

    /// Parses a letter string such as `"0110"` (digits, then `a`–`z` for letters 10–35).
    pub fn parse(sys: &IncidenceSystem, text: &str) -> Result<Self> {
        let letters = parse_letters(text)?;
        Word::new(sys, letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Caller guarantees admissibility.
    pub(crate) fn from_trusted(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn concat(&self, sys: &IncidenceSystem, other: &Word) -> Option<Word> {
        sys.inverse_branch(self, other)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&letters_to_string(&self.0))
    }
}

pub fn letter_char(c: usize) -> char {
    std::char::from_digit(c as u32, 36).unwrap_or('?')
}

pub fn letters_to_string(letters: &[usize]) -> String {
    letters.iter().map(|&c| letter_char(c)).collect()
}

pub fn parse_letters(text: &str) -> Result<Vec<usize>> {
    text.chars()
        .map(|ch| {
            ch.to_digit(36)
                .map(|d| d as usize)
                .ok_or_else(|| Error::InvalidWord {
                    word: Vec::new(),
                    reason: format!("cannot parse letter {ch:?} in {text:?}"),
                })
        })
        .collect()
}

/// Shift metric `d(x, y) = 2^{-k}`, `k` the first index where the sequences differ.
///
/// Arguments are finite prefixes compared on their common length; prefixes that agree
/// there are at distance 0 at this resolution.
#[derive(Clone, Copy, Debug, Default)]
pub struct CylinderMetric;

impl CylinderMetric {
    pub fn distance(&self, x: &[usize], y: &[usize]) -> f64 {
        match x.iter().zip(y).position(|(a, b)| a != b) {
            Some(k) => 0.5f64.powi(k as i32),
            None => 0.0,
        }
    }
}
