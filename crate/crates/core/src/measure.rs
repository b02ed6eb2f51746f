//! Probability measures given by their masses on depth-`D` cylinders.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::scalar::Real;
use crate::symbolic::{letters_to_string, parse_letters, IncidenceSystem};

/// Data that determines masses of arbitrarily deep cylinders for a measure
/// of the form `h·μ` with `μ` conformal: `μ[jv] = e^{f[jv]} μ[v] / λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalExtension<T> {
    base_depth: usize,
    /// `e^{f} / λ` at the potential's own depth.
    weight: LocallyConstantFunction<T>,
    /// Eigenmeasure masses at `base_depth`.
    mu: Vec<T>,
    /// Density `h` at `base_depth` (all ones for the eigenmeasure itself).
    density: Vec<T>,
}

impl<T: Real> ConformalExtension<T> {
    pub(crate) fn new(
        base_depth: usize,
        potential: &LocallyConstantFunction<T>,
        lambda: T,
        mu: Vec<T>,
        density: Vec<T>,
    ) -> Self {
        debug_assert!(potential.depth() <= base_depth + 1);
        let weight = potential.map(|v| v.exp() / lambda);
        ConformalExtension {
            base_depth,
            weight,
            mu,
            density,
        }
    }

    fn mass(&self, sys: &IncidenceSystem, letters: &[usize]) -> T {
        let n = letters.len();
        let d = self.base_depth;
        debug_assert!(n >= d);
        let mut mu = self.mu[sys.index_of(&letters[n - d..])];
        for k in (0..n - d).rev() {
            mu *= self.weight.value_at(sys, &letters[k..]);
        }
        self.density[sys.index_of(&letters[..d])] * mu
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMeasure<T> {
    depth: usize,
    /// `marginals[k - 1]` holds the masses of `W^k` for `k = 1..=depth`.
    marginals: Vec<Vec<T>>,
    extension: Option<ConformalExtension<T>>,
}

impl<T: Real> CylinderMeasure<T> {
    /// Weights on `W^depth`; they must be nonnegative and sum to 1 within `1e-9`.
    pub fn from_weights(sys: &IncidenceSystem, depth: usize, weights: Vec<T>) -> Result<Self> {
        Self::build(sys, depth, weights, None)
    }

    pub fn from_word_map(
        sys: &IncidenceSystem,
        depth: usize,
        map: &BTreeMap<String, T>,
    ) -> Result<Self> {
        for key in map.keys() {
            let letters = parse_letters(key)?;
            if letters.len() != depth || !sys.is_admissible(&letters) {
                return Err(Error::InvalidMeasure(format!(
                    "key {key:?} is not an admissible word of length {depth}"
                )));
            }
        }
        let mut weights = Vec::new();
        sys.visit_words(depth, |w| {
            weights.push(map.get(&letters_to_string(w)).copied().unwrap_or(T::zero()))
        });
        Self::from_weights(sys, depth, weights)
    }

    pub(crate) fn with_extension(
        sys: &IncidenceSystem,
        depth: usize,
        weights: Vec<T>,
        extension: ConformalExtension<T>,
    ) -> Result<Self> {
        Self::build(sys, depth, weights, Some(extension))
    }

    fn build(
        sys: &IncidenceSystem,
        depth: usize,
        weights: Vec<T>,
        extension: Option<ConformalExtension<T>>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidMeasure("depth must be at least 1".into()));
        }
        if weights.len() as u64 != sys.count_words(depth) {
            return Err(Error::InvalidMeasure(format!(
                "depth {depth} needs {} weights, got {}",
                sys.count_words(depth),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|&w| !(w >= T::zero())) {
            return Err(Error::InvalidMeasure(format!(
                "weight of {} is negative or NaN",
                letters_to_string(&sys.word_letters(depth)[i])
            )));
        }
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut marginals = vec![weights];
        for k in (1..depth).rev() {
            let deeper = marginals.last().unwrap();
            let mut shallow = vec![T::zero(); sys.count_words(k) as usize];
            let mut i = 0;
            sys.visit_words(k + 1, |w| {
                shallow[sys.index_of(&w[..k])] += deeper[i];
                i += 1;
            });
            marginals.push(shallow);
        }
        marginals.reverse();
        Ok(CylinderMeasure {
            depth,
            marginals,
            extension,
        })
    }

    /// Product measure on a full shift.
    pub fn bernoulli(sys: &IncidenceSystem, probs: &[T]) -> Result<Self> {
        let n = sys.alphabet_size();
        if probs.len() != n {
            return Err(Error::InvalidMeasure(format!(
                "need {n} probabilities, got {}",
                probs.len()
            )));
        }
        if (0..n).any(|i| (0..n).any(|j| !sys.allowed(i, j))) {
            return Err(Error::InvalidMeasure(
                "Bernoulli measures need a full shift".into(),
            ));
        }
        if probs.iter().any(|&p| !(p > T::zero())) {
            return Err(Error::InvalidMeasure(
                "Bernoulli probabilities must be positive".into(),
            ));
        }
        let potential = LocallyConstantFunction::from_fn(sys, 1, |w| probs[w[0]].ln());
        let ext =
            ConformalExtension::new(1, &potential, T::one(), probs.to_vec(), vec![T::one(); n]);
        Self::with_extension(sys, 1, probs.to_vec(), ext)
    }

    /// Stationary Markov chain with transition matrix `p` and stationary vector `pi`.
    pub fn markov(sys: &IncidenceSystem, pi: &[T], p: &[Vec<T>]) -> Result<Self> {
        let n = sys.alphabet_size();
        if pi.len() != n || p.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMeasure("dimension mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let positive = p[i][j] > T::zero();
                if positive != sys.allowed(i, j) {
                    return Err(Error::InvalidMeasure(format!(
                        "transition ({i}, {j}) does not match the incidence matrix"
                    )));
                }
            }
            if !(pi[i] > T::zero()) {
                return Err(Error::InvalidMeasure(format!("pi[{i}] must be positive")));
            }
        }
        let potential = LocallyConstantFunction::from_fn(sys, 2, |w| {
            (pi[w[0]] * p[w[0]][w[1]] / pi[w[1]]).ln()
        });
        let ext = ConformalExtension::new(1, &potential, T::one(), pi.to_vec(), vec![T::one(); n]);
        let mut weights = Vec::new();
        sys.visit_words(2, |w| weights.push(pi[w[0]] * p[w[0]][w[1]]));
        Self::with_extension(sys, 2, weights, ext)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn weights(&self) -> &[T] {
        &self.marginals[self.depth - 1]
    }

    pub fn has_extension(&self) -> bool {
        self.extension.is_some()
    }

    pub fn extension(&self) -> Option<&ConformalExtension<T>> {
        self.extension.as_ref()
    }

    /// Mass of the cylinder `[letters]` (1 for the empty word).
    pub fn mass(&self, sys: &IncidenceSystem, letters: &[usize]) -> Result<T> {
        let n = letters.len();
        if n == 0 {
            return Ok(T::one());
        }
        if !sys.is_admissible(letters) {
            return Ok(T::zero());
        }
        if n <= self.depth {
            return Ok(self.marginals[n - 1][sys.index_of(letters)]);
        }
        match &self.extension {
            Some(ext) => Ok(ext.mass(sys, letters)),
            None => Err(Error::MeasureDepth {
                requested: n,
                available: self.depth,
            }),
        }
    }

    /// Masses of `W^n` in lexicographic order.
    pub fn masses_at(&self, sys: &IncidenceSystem, n: usize) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::InvalidMeasure("depth must be at least 1".into()));
        }
        if n <= self.depth {
            return Ok(self.marginals[n - 1].clone());
        }
        let ext = self.extension.as_ref().ok_or(Error::MeasureDepth {
            requested: n,
            available: self.depth,
        })?;
        let mut out = Vec::with_capacity(sys.count_words(n) as usize);
        sys.visit_words(n, |w| out.push(ext.mass(sys, w)));
        Ok(out)
    }

    /// The same measure represented at depth `n`.
    pub fn at_depth(&self, sys: &IncidenceSystem, n: usize) -> Result<Self> {
        if n == self.depth {
            return Ok(self.clone());
        }
        let weights = self.masses_at(sys, n)?;
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::build(sys, n, weights, self.extension.clone())
    }

    /// `∫ f dm`, exact at the common depth.
    pub fn integrate<V>(&self, sys: &IncidenceSystem, f: &LocallyConstantFunction<V>) -> Result<V>
    where
        V: Copy + Zero + Add<Output = V> + Mul<T, Output = V>,
    {
        let depth = f.depth().max(1);
        if depth <= self.depth {
            let masses = &self.marginals[depth - 1];
            return Ok(f
                .values()
                .iter()
                .zip(masses)
                .fold(V::zero(), |acc, (&v, &m)| acc + v * m));
        }
        let masses = self.masses_at(sys, depth)?;
        Ok(f.values()
            .iter()
            .zip(&masses)
            .fold(V::zero(), |acc, (&v, &m)| acc + v * m))
    }

    /// `(word, mass)` rows at the stored depth.
    pub fn rows(&self, sys: &IncidenceSystem) -> Vec<(String, T)> {
        let mut out = Vec::new();
        let w = self.weights();
        let mut i = 0;
        sys.visit_words(self.depth, |letters| {
            out.push((letters_to_string(letters), w[i]));
            i += 1;
        });
        out
    }

    /// Largest violation of `m[w] m[θw'] = m[w'] m[θ w]`-type Markov consistency:
    /// compares `m[abc]·m[b]` with `m[ab]·m[bc]` on depth-3 cylinders, when depth 3 is known.
    pub fn markov_defect(&self, sys: &IncidenceSystem) -> Result<Option<T>> {
        if self.depth < 3 && self.extension.is_none() {
            return Ok(None);
        }
        let m3 = self.masses_at(sys, 3)?;
        let mut worst = T::zero();
        let mut i = 0;
        let mut failure = None;
        sys.visit_words(3, |w| {
            let lhs = m3[i]
                * self.mass(sys, &w[1..2]).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    T::zero()
                });
            let rhs = self.mass(sys, &w[..2]).unwrap_or(T::zero())
                * self.mass(sys, &w[1..]).unwrap_or(T::zero());
            worst = worst.max((lhs - rhs).abs());
            i += 1;
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(Some(worst)),
        }
    }
}
