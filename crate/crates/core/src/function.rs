//! Functions constant on depth-`d` cylinders.

use std::collections::BTreeMap;

use num_traits::{Num, One, Zero};

use crate::error::{Error, Result};
use crate::symbolic::{letters_to_string, parse_letters, IncidenceSystem, Word};

/// A function on `Σ_A` constant on every depth-`d` cylinder, stored in the
/// lexicographic order of `W^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocallyConstantFunction<T> {
    depth: usize,
    values: Vec<T>,
}

impl<T: Copy> LocallyConstantFunction<T> {
    pub fn from_values(sys: &IncidenceSystem, depth: usize, values: Vec<T>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidFunction("depth must be at least 1".into()));
        }
        let expected = sys.count_words(depth);
        if values.len() as u64 != expected {
            return Err(Error::InvalidFunction(format!(
                "depth {depth} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(LocallyConstantFunction { depth, values })
    }

    pub fn from_fn(sys: &IncidenceSystem, depth: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        assert!(depth >= 1, "depth must be at least 1");
        let mut values = Vec::with_capacity(sys.count_words(depth) as usize);
        sys.visit_words(depth, |w| values.push(f(w)));
        LocallyConstantFunction { depth, values }
    }

    pub fn constant(sys: &IncidenceSystem, depth: usize, c: T) -> Self {
        Self::from_fn(sys, depth.max(1), |_| c)
    }

    /// Builds from a `word -> value` map; every word of `W^depth` must be present.
    pub fn from_word_map(
        sys: &IncidenceSystem,
        depth: usize,
        map: &BTreeMap<String, T>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidFunction("depth must be at least 1".into()));
        }
        for key in map.keys() {
            let letters = parse_letters(key)?;
            if letters.len() != depth || !sys.is_admissible(&letters) {
                return Err(Error::InvalidFunction(format!(
                    "key {key:?} is not an admissible word of length {depth}"
                )));
            }
        }
        let mut missing = None;
        let f = Self::from_fn(sys, depth, |w| {
            let key = letters_to_string(w);
            match map.get(&key) {
                Some(&v) => v,
                None => {
                    missing.get_or_insert(key);
                    *map.values().next().expect("non-empty when words exist")
                }
            }
        });
        match missing {
            Some(key) => Err(Error::InvalidFunction(format!("no value for word {key}"))),
            None => Ok(f),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value on the cylinder of the first `depth` letters of `letters`.
    pub fn value_at(&self, sys: &IncidenceSystem, letters: &[usize]) -> T {
        debug_assert!(letters.len() >= self.depth);
        self.values[sys.index_of(&letters[..self.depth])]
    }

    pub fn get(&self, sys: &IncidenceSystem, w: &Word) -> Result<T> {
        if w.len() < self.depth {
            return Err(Error::InvalidFunction(format!(
                "word {w} is shorter than the function depth {}",
                self.depth
            )));
        }
        Ok(self.value_at(sys, w.letters()))
    }

    /// The same function viewed on depth `depth ≥ self.depth()` cylinders.
    pub fn lift(&self, sys: &IncidenceSystem, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidFunction(format!(
                "cannot lift depth {} to shallower depth {depth}",
                self.depth
            )));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        Ok(Self::from_fn(sys, depth, |w| self.value_at(sys, w)))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> LocallyConstantFunction<U> {
        LocallyConstantFunction {
            depth: self.depth,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination at the common depth.
    pub fn zip_with<U: Copy, V: Copy>(
        &self,
        sys: &IncidenceSystem,
        other: &LocallyConstantFunction<U>,
        f: impl Fn(T, U) -> V,
    ) -> LocallyConstantFunction<V> {
        let depth = self.depth.max(other.depth);
        LocallyConstantFunction::from_fn(sys, depth, |w| {
            f(self.value_at(sys, w), other.value_at(sys, w))
        })
    }

    /// `f ∘ θ^m`, constant on depth `d + m` cylinders.
    pub fn compose_shift(&self, sys: &IncidenceSystem, m: usize) -> Self {
        if m == 0 {
            return self.clone();
        }
        Self::from_fn(sys, self.depth + m, |w| self.value_at(sys, &w[m..]))
    }

    /// Values keyed by the word's letter string.
    pub fn to_word_map(&self, sys: &IncidenceSystem) -> BTreeMap<String, T> {
        let mut out = BTreeMap::new();
        let mut i = 0;
        sys.visit_words(self.depth, |w| {
            out.insert(letters_to_string(w), self.values[i]);
            i += 1;
        });
        out
    }
}

impl<T: Copy + Num> LocallyConstantFunction<T> {
    pub fn zero(sys: &IncidenceSystem) -> Self {
        Self::constant(sys, 1, T::zero())
    }

    pub fn one(sys: &IncidenceSystem) -> Self {
        Self::constant(sys, 1, T::one())
    }

    /// `1_{[v]}`; the constant 1 for the empty word.
    pub fn indicator(sys: &IncidenceSystem, v: &Word) -> Self {
        if v.is_empty() {
            return Self::one(sys);
        }
        let letters = v.letters();
        Self::from_fn(sys, v.len(), |w| {
            if w == letters {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// `1_{θ^n[w]}`: points that may follow the last letter of `w`.
    pub fn image_indicator(sys: &IncidenceSystem, w: &Word) -> Self {
        match w.last() {
            None => Self::one(sys),
            Some(last) => Self::from_fn(sys, 1, |u| {
                if sys.allowed(last, u[0]) {
                    T::one()
                } else {
                    T::zero()
                }
            }),
        }
    }

    pub fn add(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        self.zip_with(sys, other, |a, b| a + b)
    }

    pub fn sub(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        self.zip_with(sys, other, |a, b| a - b)
    }

    pub fn mul(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        self.zip_with(sys, other, |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// Birkhoff sum `S_n f = Σ_{k<n} f∘θ^k`, constant on depth `d + n - 1` cylinders.
    pub fn birkhoff_sum(&self, sys: &IncidenceSystem, n: usize) -> Self {
        assert!(n >= 1, "Birkhoff sums need n >= 1");
        let depth = self.depth + n - 1;
        Self::from_fn(sys, depth, |w| {
            (0..n).fold(T::zero(), |acc, k| acc + self.value_at(sys, &w[k..]))
        })
    }

    /// `(f ∘ τ_w) · 1_{θ^n[w]}` for a non-empty word `w`.
    pub fn pullback(&self, sys: &IncidenceSystem, w: &Word) -> Self {
        let n = w.len();
        assert!(n >= 1, "pullback along the empty word is the identity");
        let last = w.last().unwrap();
        let depth = self.depth.saturating_sub(n).max(1);
        let mut buf = w.letters().to_vec();
        Self::from_fn(sys, depth, |u| {
            if !sys.allowed(last, u[0]) {
                return T::zero();
            }
            buf.truncate(n);
            buf.extend_from_slice(u);
            self.value_at(sys, &buf)
        })
    }

    /// True when every value satisfies `is_small`.
    pub fn all(&self, is_small: impl Fn(T) -> bool) -> bool {
        self.values.iter().all(|&v| is_small(v))
    }

    /// Drops to the smallest depth at which the function is still constant on cylinders.
    pub fn coarsen(&self, sys: &IncidenceSystem, same: impl Fn(T, T) -> bool) -> Self {
        let mut current = self.clone();
        while current.depth > 1 {
            let shallower = current.depth - 1;
            let mut candidate: Vec<Option<T>> = vec![None; sys.count_words(shallower) as usize];
            let mut ok = true;
            let mut i = 0;
            sys.visit_words(current.depth, |w| {
                let v = current.values[i];
                i += 1;
                let slot = &mut candidate[sys.index_of(&w[..shallower])];
                match slot {
                    None => *slot = Some(v),
                    Some(prev) => {
                        if !same(*prev, v) {
                            ok = false;
                        }
                    }
                }
            });
            if !ok {
                break;
            }
            current = LocallyConstantFunction {
                depth: shallower,
                values: candidate.into_iter().map(|v| v.unwrap()).collect(),
            };
        }
        current
    }
}

impl<T: Copy + Zero + PartialEq> LocallyConstantFunction<T> {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }
}

impl<T: Copy + One + PartialEq> LocallyConstantFunction<T> {
    pub fn is_one(&self) -> bool {
        self.values.iter().all(|v| *v == T::one())
    }
}
