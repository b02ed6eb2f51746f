//! The Radon–Nikodym representation: `s_i f = 1_{[i]} (dm∘θ/dm)^{1/2} f∘θ`
//! acting on locally constant functions in `L²(m)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{state_eval, AlgebraElement};
use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::measure::CylinderMeasure;
use crate::symbolic::{letters_to_string, IncidenceSystem, Word};

pub type GradedFunction = LocallyConstantFunction<Complex64>;

/// Largest accepted deviation from the Markov property `m[abc] m[b] = m[ab] m[bc]`.
pub const MARKOV_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RnRepContext {
    sys: IncidenceSystem,
    m: CylinderMeasure<f64>,
    /// `dm∘θ/dm` on depth-2 cylinders.
    rho: LocallyConstantFunction<f64>,
}

impl RnRepContext {
    pub fn new(sys: &IncidenceSystem, m: &CylinderMeasure<f64>) -> Result<Self> {
        for n in 1..=2 {
            let masses = m.masses_at(sys, n)?;
            let words = sys.word_letters(n);
            if let Some(i) = masses.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::ZeroMass {
                    cylinder: letters_to_string(&words[i]),
                });
            }
        }
        if let Some(defect) = m.markov_defect(sys)? {
            if defect > MARKOV_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "measure is not Markov at depth 2 (defect {defect:e})"
                )));
            }
        }
        let rho = LocallyConstantFunction::from_fn(sys, 2, |w| {
            m.mass(sys, &w[1..]).unwrap() / m.mass(sys, w).unwrap()
        });
        Ok(RnRepContext {
            sys: sys.clone(),
            m: m.clone(),
            rho,
        })
    }

    pub fn system(&self) -> &IncidenceSystem {
        &self.sys
    }

    pub fn measure(&self) -> &CylinderMeasure<f64> {
        &self.m
    }

    pub fn rho(&self) -> &LocallyConstantFunction<f64> {
        &self.rho
    }

    /// `s_i f`, one level deeper than `f`.
    pub fn apply_s(&self, i: usize, f: &GradedFunction) -> GradedFunction {
        let sys = &self.sys;
        GradedFunction::from_fn(sys, f.depth() + 1, |u| {
            if u[0] != i {
                return Complex64::new(0.0, 0.0);
            }
            f.value_at(sys, &u[1..]) * self.rho.value_at(sys, u).sqrt()
        })
    }

    /// `s_i* f`, one level shallower than `f` (at least depth 1).
    pub fn apply_s_star(&self, i: usize, f: &GradedFunction) -> GradedFunction {
        let sys = &self.sys;
        let depth = f.depth().saturating_sub(1).max(1);
        let mut buf = Vec::with_capacity(depth + 1);
        GradedFunction::from_fn(sys, depth, |u| {
            if !sys.allowed(i, u[0]) {
                return Complex64::new(0.0, 0.0);
            }
            buf.clear();
            buf.push(i);
            buf.extend_from_slice(u);
            f.value_at(sys, &buf) / self.rho.value_at(sys, &buf).sqrt()
        })
    }

    /// `⟨f, g⟩ = ∫ f̄ g dm`.
    pub fn inner(&self, f: &GradedFunction, g: &GradedFunction) -> Result<Complex64> {
        let prod = f.zip_with(&self.sys, g, |a, b| a.conj() * b);
        self.m.integrate(&self.sys, &prod)
    }

    /// `s_v s_w* f` with `s_v = s_{v_0} ⋯ s_{v_{m-1}}`.
    pub fn apply_monomial(&self, v: &Word, w: &Word, f: &GradedFunction) -> GradedFunction {
        let mut g = f.clone();
        for &j in w.letters() {
            g = self.apply_s_star(j, &g);
        }
        for &j in v.letters().iter().rev() {
            g = self.apply_s(j, &g);
        }
        g
    }

    /// `(1, x(1))_m`.
    pub fn vector_state(&self, x: &AlgebraElement) -> Result<Complex64> {
        let one = GradedFunction::one(&self.sys);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in x.terms() {
            let g = self.apply_monomial(t.left(), t.right(), &one);
            let h = t.coeff().mul(&self.sys, &g);
            acc += self.m.integrate(&self.sys, &h)?;
        }
        Ok(acc)
    }

    /// Defects of `Σ_j s_j s_j* = 1` and `s_i* s_i = Σ_j a_ij s_j s_j*` on all
    /// cylinder indicators of depth at most `depth_cap`.
    pub fn relation_residuals(&self, depth_cap: usize) -> (f64, f64) {
        let sys = &self.sys;
        let n = sys.alphabet_size();
        let mut r1: f64 = 0.0;
        let mut r2: f64 = 0.0;
        for d in 1..=depth_cap {
            for u in sys.word_letters(d) {
                let e = GradedFunction::indicator(sys, &Word::new(sys, u).unwrap());
                let projections: Vec<GradedFunction> = (0..n)
                    .map(|j| self.apply_s(j, &self.apply_s_star(j, &e)))
                    .collect();
                let mut sum = GradedFunction::zero(sys);
                for p in &projections {
                    sum = sum.add(sys, p);
                }
                r1 = r1.max(max_norm(&sum.sub(sys, &e)));
                for i in 0..n {
                    let lhs = self.apply_s_star(i, &self.apply_s(i, &e));
                    let mut rhs = GradedFunction::zero(sys);
                    for (j, p) in projections.iter().enumerate() {
                        if sys.allowed(i, j) {
                            rhs = rhs.add(sys, p);
                        }
                    }
                    r2 = r2.max(max_norm(&lhs.sub(sys, &rhs)));
                }
            }
        }
        (r1, r2)
    }

    /// Largest `|⟨f, s_i g⟩ - ⟨s_i* f, g⟩|` over random pairs.
    pub fn adjointness_residual(&self, pairs: usize, seed: u64) -> Result<f64> {
        let sys = &self.sys;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let f = random_function(sys, &mut rng, 4);
            let g = random_function(sys, &mut rng, 3);
            let i = rng.gen_range(0..sys.alphabet_size());
            let lhs = self.inner(&f, &self.apply_s(i, &g))?;
            let rhs = self.inner(&self.apply_s_star(i, &f), &g)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }

    /// Vector state against projection state on the given elements.
    pub fn compare_states(&self, samples: &[AlgebraElement]) -> Result<Vec<StateComparison>> {
        samples
            .iter()
            .map(|x| {
                let vector = self.vector_state(x)?;
                let projection = state_eval(&self.sys, &self.m, x)?;
                Ok(StateComparison {
                    element: x.to_text(&self.sys),
                    diagonal: x.terms().iter().all(|t| t.is_diagonal()),
                    vector: [vector.re, vector.im],
                    projection: [projection.re, projection.im],
                    difference: (vector - projection).norm(),
                })
            })
            .collect()
    }

    /// Default comparison set: `1`, every `S_w S_w*` with `|w| ≤ 3` and `S_0 S_1*` when admissible.
    pub fn default_comparison_samples(&self) -> Vec<AlgebraElement> {
        let sys = &self.sys;
        let mut out = vec![AlgebraElement::one(sys)];
        for d in 1..=3 {
            for u in sys.word_letters(d) {
                let w = Word::new(sys, u).unwrap();
                out.push(AlgebraElement::monomial(sys, &w, &w));
            }
        }
        out.push(AlgebraElement::monomial(
            sys,
            &Word::new(sys, vec![0]).unwrap(),
            &Word::new(sys, vec![1]).unwrap(),
        ));
        out
    }

    pub fn report(&self, depth_cap: usize, pairs: usize, seed: u64) -> Result<RnReport> {
        let (relation1_residual, relation2_residual) = self.relation_residuals(depth_cap);
        Ok(RnReport {
            relation1_residual,
            relation2_residual,
            adjointness_residual: self.adjointness_residual(pairs, seed)?,
            irreducible: self.sys.is_irreducible(),
            state_comparison: self.compare_states(&self.default_comparison_samples())?,
        })
    }
}

fn max_norm(f: &GradedFunction) -> f64 {
    f.values().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn random_function(
    sys: &IncidenceSystem,
    rng: &mut ChaCha8Rng,
    max_depth: usize,
) -> GradedFunction {
    let depth = rng.gen_range(1..=max_depth);
    GradedFunction::from_fn(sys, depth, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateComparison {
    pub element: String,
    pub diagonal: bool,
    pub vector: [f64; 2],
    pub projection: [f64; 2],
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RnReport {
    pub relation1_residual: f64,
    pub relation2_residual: f64,
    pub adjointness_residual: f64,
    pub irreducible: bool,
    pub state_comparison: Vec<StateComparison>,
}
