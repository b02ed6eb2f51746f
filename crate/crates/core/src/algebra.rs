//! Normal-form arithmetic in the dense subalgebra of the Cuntz–Krieger algebra
//! spanned by `f·S_v S_w*` with `f` locally constant.
//!
//! A term is kept with its coefficient on the left, its words stripped of any
//! common final letters and its coefficient restricted to the part of `[v]` on
//! which the term can be nonzero. Terms are ordered by `(|v|, |w|, v, w)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::Result;
use crate::function::LocallyConstantFunction;
use crate::measure::CylinderMeasure;
use crate::symbolic::{letters_to_string, IncidenceSystem, Word};

pub type Coefficient = LocallyConstantFunction<Complex64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    coeff: Coefficient,
    left: Word,
    right: Word,
}

impl Term {
    pub fn coeff(&self) -> &Coefficient {
        &self.coeff
    }

    pub fn left(&self) -> &Word {
        &self.left
    }

    pub fn right(&self) -> &Word {
        &self.right
    }

    pub fn is_diagonal(&self) -> bool {
        self.left.is_empty() && self.right.is_empty()
    }
}

type Key = (usize, usize, Vec<usize>, Vec<usize>);

fn key(v: &[usize], w: &[usize]) -> Key {
    (v.len(), w.len(), v.to_vec(), w.to_vec())
}

/// Finite sum of terms `f·S_v S_w*` in normal form.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AlgebraElement {
    terms: Vec<Term>,
}

/// Gauge parameters `(H, z)`: the action `α_H^z`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeParameters {
    pub h: LocallyConstantFunction<f64>,
    pub z: Complex64,
}

impl GaugeParameters {
    pub fn real(h: LocallyConstantFunction<f64>, t: f64) -> Self {
        GaugeParameters {
            h,
            z: Complex64::new(t, 0.0),
        }
    }

    /// The continuation `z = iβ` used by the KMS condition.
    pub fn imaginary(h: LocallyConstantFunction<f64>, beta: f64) -> Self {
        GaugeParameters {
            h,
            z: Complex64::new(0.0, beta),
        }
    }
}

fn complexify(f: &LocallyConstantFunction<f64>) -> Coefficient {
    f.map(|v| Complex64::new(v, 0.0))
}

/// Puts `f·S_v S_w*` in normal form; `None` when it vanishes.
fn normalize(
    sys: &IncidenceSystem,
    f: Coefficient,
    v: &[usize],
    w: &[usize],
) -> Option<(Coefficient, Vec<usize>, Vec<usize>)> {
    let mut common = 0;
    while common < v.len().min(w.len()) && v[v.len() - 1 - common] == w[w.len() - 1 - common] {
        common += 1;
    }
    let left = &v[..v.len() - common];
    let right = &w[..w.len() - common];
    let mut coeff = f;
    if !v.is_empty() {
        coeff = coeff.mul(
            sys,
            &Coefficient::indicator(sys, &Word::from_trusted(v.to_vec())),
        );
    }
    if !right.is_empty() {
        let image = Coefficient::image_indicator(sys, &Word::from_trusted(right.to_vec()));
        coeff = coeff.mul(sys, &image.compose_shift(sys, left.len()));
    }
    let coeff = coeff.coarsen(sys, |a, b| a == b);
    if coeff.is_zero() {
        return None;
    }
    Some((coeff, left.to_vec(), right.to_vec()))
}

impl AlgebraElement {
    pub fn zero() -> Self {
        AlgebraElement { terms: Vec::new() }
    }

    pub fn one(sys: &IncidenceSystem) -> Self {
        Self::from_function(sys, &Coefficient::one(sys))
    }

    pub fn scalar(sys: &IncidenceSystem, c: Complex64) -> Self {
        Self::from_function(sys, &Coefficient::constant(sys, 1, c))
    }

    pub fn from_function(sys: &IncidenceSystem, f: &Coefficient) -> Self {
        Self::from_raw(sys, vec![(f.clone(), Vec::new(), Vec::new())])
    }

    pub fn from_real_function(sys: &IncidenceSystem, f: &LocallyConstantFunction<f64>) -> Self {
        Self::from_function(sys, &complexify(f))
    }

    /// `S_v S_w*`.
    pub fn monomial(sys: &IncidenceSystem, v: &Word, w: &Word) -> Self {
        Self::term(sys, &Coefficient::one(sys), v, w)
    }

    /// `f·S_v S_w*`.
    pub fn term(sys: &IncidenceSystem, f: &Coefficient, v: &Word, w: &Word) -> Self {
        Self::from_raw(
            sys,
            vec![(f.clone(), v.letters().to_vec(), w.letters().to_vec())],
        )
    }

    /// `S_i`.
    pub fn generator(sys: &IncidenceSystem, i: usize) -> Self {
        Self::monomial(sys, &Word::from_trusted(vec![i]), &Word::empty())
    }

    /// `S_i*`.
    pub fn generator_adjoint(sys: &IncidenceSystem, i: usize) -> Self {
        Self::monomial(sys, &Word::empty(), &Word::from_trusted(vec![i]))
    }

    fn from_raw(sys: &IncidenceSystem, raw: Vec<(Coefficient, Vec<usize>, Vec<usize>)>) -> Self {
        let mut merged: BTreeMap<Key, (Coefficient, Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (f, v, w) in raw {
            if let Some((c, l, r)) = normalize(sys, f, &v, &w) {
                match merged.get_mut(&key(&l, &r)) {
                    Some(entry) => entry.0 = entry.0.add(sys, &c),
                    None => {
                        merged.insert(key(&l, &r), (c, l, r));
                    }
                }
            }
        }
        let terms = merged
            .into_values()
            .filter_map(|(c, l, r)| {
                let c = c.coarsen(sys, |a, b| a == b);
                (!c.is_zero()).then(|| Term {
                    coeff: c,
                    left: Word::from_trusted(l),
                    right: Word::from_trusted(r),
                })
            })
            .collect();
        AlgebraElement { terms }
    }

    fn into_raw(self) -> impl Iterator<Item = (Coefficient, Vec<usize>, Vec<usize>)> {
        self.terms.into_iter().map(|t| {
            (
                t.coeff,
                t.left.letters().to_vec(),
                t.right.letters().to_vec(),
            )
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        Self::from_raw(
            sys,
            self.clone()
                .into_raw()
                .chain(other.clone().into_raw())
                .collect(),
        )
    }

    pub fn scale(&self, sys: &IncidenceSystem, c: Complex64) -> Self {
        Self::from_raw(
            sys,
            self.clone()
                .into_raw()
                .map(|(f, v, w)| (f.scale(c), v, w))
                .collect(),
        )
    }

    pub fn sub(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        self.add(sys, &other.scale(sys, Complex64::new(-1.0, 0.0)))
    }

    pub fn multiply(&self, sys: &IncidenceSystem, other: &Self) -> Self {
        let mut raw = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = multiply_terms(sys, a, b) {
                    raw.push(t);
                }
            }
        }
        Self::from_raw(sys, raw)
    }

    /// `(f S_v S_w*)* = S_w S_v* f̄`, moved into normal form.
    pub fn adjoint(&self, sys: &IncidenceSystem) -> Self {
        let raw = self
            .terms
            .iter()
            .map(|t| {
                let conj = t.coeff.map(|c| c.conj());
                let moved = if t.left.is_empty() {
                    conj
                } else {
                    conj.pullback(sys, &t.left)
                };
                (
                    moved.compose_shift(sys, t.right.len()),
                    t.right.letters().to_vec(),
                    t.left.letters().to_vec(),
                )
            })
            .collect();
        Self::from_raw(sys, raw)
    }

    /// `α_H^z`: `f S_v S_w* ↦ e^{iz S_m H} f S_v S_w* e^{-iz S_n H}`.
    pub fn gauge(&self, sys: &IncidenceSystem, g: &GaugeParameters) -> Self {
        let iz = Complex64::i() * g.z;
        let h = complexify(&g.h);
        let raw = self
            .terms
            .iter()
            .map(|t| {
                let (m, n) = (t.left.len(), t.right.len());
                let mut coeff = t.coeff.clone();
                if m > 0 {
                    let left = h.birkhoff_sum(sys, m).map(|s| (iz * s).exp());
                    coeff = left.mul(sys, &coeff);
                }
                if n > 0 {
                    let right = h.birkhoff_sum(sys, n).map(|s| (-iz * s).exp());
                    coeff = coeff.mul(sys, &right.pullback(sys, &t.right).compose_shift(sys, m));
                }
                (coeff, t.left.letters().to_vec(), t.right.letters().to_vec())
            })
            .collect();
        Self::from_raw(sys, raw)
    }

    /// Largest coefficient modulus over all terms.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.coeff.values().iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, sys: &IncidenceSystem, other: &Self, tol: f64) -> bool {
        self.sub(sys, other).max_abs() <= tol
    }

    /// Text form `coeff@d {word:value, ...} S[v] S*[w] + ...`.
    pub fn to_text(&self, sys: &IncidenceSystem) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "coeff@{} {{", t.coeff.depth());
            let mut first = true;
            for (word, c) in t.coeff.to_word_map(sys) {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    out.push_str(", ");
                }
                first = false;
                let _ = write!(out, "{word}:{:.11e}{:+.11e}i", c.re, c.im);
            }
            let _ = write!(
                out,
                "}} S[{}] S*[{}]",
                letters_to_string(t.left.letters()),
                letters_to_string(t.right.letters())
            );
        }
        out
    }
}

fn multiply_terms(
    sys: &IncidenceSystem,
    a: &Term,
    b: &Term,
) -> Option<(Coefficient, Vec<usize>, Vec<usize>)> {
    let (v, w) = (a.left.letters(), a.right.letters());
    let (x, y) = (b.left.letters(), b.right.letters());
    let moved = if w.is_empty() {
        b.coeff.clone()
    } else {
        b.coeff.pullback(sys, &a.right)
    };
    let coeff = a.coeff.mul(sys, &moved.compose_shift(sys, v.len()));
    if x.starts_with(w) {
        let left: Vec<usize> = v.iter().chain(&x[w.len()..]).copied().collect();
        sys.is_admissible(&left)
            .then_some((coeff, left, y.to_vec()))
    } else if w.starts_with(x) {
        let right: Vec<usize> = y.iter().chain(&w[x.len()..]).copied().collect();
        sys.is_admissible(&right)
            .then_some((coeff, v.to_vec(), right))
    } else {
        None
    }
}

/// `σ_μ(x) = ∫ P(x) dμ`, where `P` keeps the function part of the normal form.
pub fn state_eval(
    sys: &IncidenceSystem,
    mu: &CylinderMeasure<f64>,
    x: &AlgebraElement,
) -> Result<Complex64> {
    match x.terms.iter().find(|t| t.is_diagonal()) {
        Some(t) => mu.integrate(sys, &t.coeff),
        None => Ok(Complex64::zero()),
    }
}
