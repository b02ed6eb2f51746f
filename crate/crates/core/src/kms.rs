//! Sampled verification of the KMS condition and its consequences for the
//! projection state `σ_μ` of a cylinder measure.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{state_eval, AlgebraElement, Coefficient, GaugeParameters};
use crate::error::Result;
use crate::function::LocallyConstantFunction;
use crate::measure::CylinderMeasure;
use crate::symbolic::{IncidenceSystem, Word};

/// `|σ(xy) - σ(y α_H^{iβ}(x))|`.
pub fn kms_residual(
    sys: &IncidenceSystem,
    mu: &CylinderMeasure<f64>,
    h: &LocallyConstantFunction<f64>,
    beta: f64,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<f64> {
    let g = GaugeParameters::imaginary(h.clone(), beta);
    let lhs = state_eval(sys, mu, &x.multiply(sys, y))?;
    let rhs = state_eval(sys, mu, &y.multiply(sys, &x.gauge(sys, &g)))?;
    Ok((lhs - rhs).norm())
}

/// Random elements with words up to `max_len` letters.
#[derive(Clone, Debug)]
pub struct ElementSampler {
    pub max_len: usize,
    pub max_terms: usize,
    pub max_coeff_depth: usize,
    rng: ChaCha8Rng,
}

impl ElementSampler {
    pub fn new(seed: u64) -> Self {
        ElementSampler {
            max_len: 4,
            max_terms: 2,
            max_coeff_depth: 2,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn word(&mut self, sys: &IncidenceSystem, len: usize) -> Word {
        let mut letters: Vec<usize> = Vec::with_capacity(len);
        for _ in 0..len {
            let next = match letters.last() {
                None => self.rng.gen_range(0..sys.alphabet_size()),
                Some(&l) => {
                    let succ: Vec<usize> = sys.successors(l).collect();
                    succ[self.rng.gen_range(0..succ.len())]
                }
            };
            letters.push(next);
        }
        Word::new(sys, letters).expect("walk follows the incidence matrix")
    }

    pub fn function(&mut self, sys: &IncidenceSystem) -> Coefficient {
        let depth = self.rng.gen_range(1..=self.max_coeff_depth);
        let rng = &mut self.rng;
        Coefficient::from_fn(sys, depth, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn element(&mut self, sys: &IncidenceSystem) -> AlgebraElement {
        let terms = self.rng.gen_range(1..=self.max_terms);
        let mut x = AlgebraElement::zero();
        for _ in 0..terms {
            let (m, n) = (
                self.rng.gen_range(0..=self.max_len),
                self.rng.gen_range(0..=self.max_len),
            );
            let v = self.word(sys, m);
            let w = self.word(sys, n);
            let f = self.function(sys);
            x = x.add(sys, &AlgebraElement::term(sys, &f, &v, &w));
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    /// A residual that must vanish for a KMS state.
    Checked,
    /// A sampled witness of a property that cannot be checked exhaustively.
    Sampled,
    /// Skipped because the hypothesis of the property fails.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactCheck {
    pub status: CheckStatus,
    /// Largest residual, or the smallest sampled value for `faithfulness`.
    pub value: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KmsReport {
    pub beta: f64,
    pub checks: BTreeMap<String, FactCheck>,
}

impl KmsReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.checks.get(name).and_then(|c| c.value)
    }

    /// Largest residual among the `Checked` entries.
    pub fn max_residual(&self) -> f64 {
        self.checks
            .values()
            .filter(|c| c.status == CheckStatus::Checked)
            .filter_map(|c| c.value)
            .fold(0.0, f64::max)
    }

    /// `{name: value}`.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .checks
            .iter()
            .map(|(k, c)| {
                (
                    k.clone(),
                    c.value.map_or(serde_json::Value::Null, |v| v.into()),
                )
            })
            .collect();
        serde_json::Value::Object(map)
    }
}

pub const KMS_CONDITION: &str = "kms_condition";
pub const STATE_INVARIANCE: &str = "state_invariance";
pub const CENTRALISER: &str = "centraliser";
pub const FAITHFULNESS: &str = "faithfulness";
pub const CONFORMALITY_1: &str = "conformality_1";
pub const CONFORMALITY_2: &str = "conformality_2";
pub const LSTAR_INVARIANCE: &str = "lstar_invariance";
pub const GAUGE_EQUAL_LENGTH: &str = "gauge_invariance_equal_length";
pub const GAUGE_UNEQUAL_LENGTH: &str = "gauge_invariance_unequal_length";

/// Longest words used by the exhaustive conformality and gauge-invariance checks.
const EXHAUSTIVE_LEN: usize = 3;
/// Longest prefix `v` and suffix `w` in the conformality checks.
const CONFORMAL_LEN: usize = 2;

struct Tally {
    worst: f64,
    count: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            worst: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, r: f64) {
        self.worst = self.worst.max(r);
        self.count += 1;
    }

    fn checked(self) -> FactCheck {
        FactCheck {
            status: CheckStatus::Checked,
            value: Some(self.worst),
            samples: self.count,
        }
    }
}

/// Runs every check on `samples` random pairs; `X = S_0 S_0*` is always among them.
pub fn check_suite(
    sys: &IncidenceSystem,
    mu: &CylinderMeasure<f64>,
    h: &LocallyConstantFunction<f64>,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<KmsReport> {
    let mut sampler = ElementSampler::new(seed);
    let zero = Word::new(sys, vec![0])?;
    let mut xs = vec![AlgebraElement::monomial(sys, &zero, &zero)];
    while xs.len() < samples.max(1) {
        xs.push(sampler.element(sys));
    }
    let ys: Vec<AlgebraElement> = (0..xs.len()).map(|_| sampler.element(sys)).collect();
    let state = |x: &AlgebraElement| state_eval(sys, mu, x);
    let analytic = GaugeParameters::imaginary(h.clone(), beta);
    let others = [
        GaugeParameters::real(h.clone(), 0.7),
        GaugeParameters {
            h: h.clone(),
            z: Complex64::new(0.3, 0.5 * beta),
        },
        analytic.clone(),
    ];
    let exp_neg = AlgebraElement::from_real_function(sys, &h.map(|v| (-beta * v).exp()));

    let mut kms = Tally::new();
    let mut invariance = Tally::new();
    let mut centraliser = Tally::new();
    let mut lstar = Tally::new();
    let mut faithful = f64::INFINITY;
    let mut faithful_count = 0;
    for (x, y) in xs.iter().zip(&ys) {
        let lhs = state(&x.multiply(sys, y))?;
        let rhs = state(&y.multiply(sys, &x.gauge(sys, &analytic)))?;
        kms.push((lhs - rhs).norm());

        let sx = state(x)?;
        for g in &others {
            invariance.push((state(&x.gauge(sys, g))? - sx).norm());
        }

        let f = AlgebraElement::from_function(sys, &sampler.function(sys));
        centraliser.push((state(&x.multiply(sys, &f))? - state(&f.multiply(sys, x))?).norm());

        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..sys.alphabet_size() {
            let sj = AlgebraElement::generator(sys, j);
            let inner = sj
                .adjoint(sys)
                .multiply(sys, &exp_neg)
                .multiply(sys, x)
                .multiply(sys, &sj);
            sum += state(&inner)?;
        }
        lstar.push((sum - sx).norm());

        if !x.is_zero() {
            let v = state(&x.adjoint(sys).multiply(sys, x))?;
            faithful = faithful.min(v.re);
            faithful_count += 1;
        }
    }

    let mut conf1 = Tally::new();
    let mut conf2 = Tally::new();
    for m in 1..=CONFORMAL_LEN {
        let weight = h.birkhoff_sum(sys, m);
        for n in 1..=CONFORMAL_LEN {
            for v in sys.word_letters(m) {
                for w in sys.word_letters(n) {
                    let vw: Vec<usize> = v.iter().chain(&w).copied().collect();
                    if !sys.is_admissible(&vw) {
                        continue;
                    }
                    let vw = Word::new(sys, vw)?;
                    let vword = Word::new(sys, v.clone())?;
                    let w = Word::new(sys, w.clone())?;
                    let big = AlgebraElement::monomial(sys, &vw, &vw);
                    let small = AlgebraElement::monomial(sys, &w, &w);
                    let pulled = weight.map(|s| (-beta * s).exp()).pullback(sys, &vword);
                    let rhs1 =
                        AlgebraElement::from_real_function(sys, &pulled).multiply(sys, &small);
                    conf1.push((state(&big)? - state(&rhs1)?).norm());
                    let up =
                        AlgebraElement::from_real_function(sys, &weight.map(|s| (beta * s).exp()));
                    let rhs2 = up.multiply(sys, &big);
                    conf2.push((state(&small)? - state(&rhs2)?).norm());
                }
            }
        }
    }

    let mut equal = Tally::new();
    let mut unequal = Tally::new();
    let positive = h.values().iter().all(|&v| v > 0.0);
    for m in 1..=EXHAUSTIVE_LEN {
        for n in 1..=EXHAUSTIVE_LEN {
            if m != n && !positive {
                continue;
            }
            for v in sys.word_letters(m) {
                for w in sys.word_letters(n) {
                    if v == w {
                        continue;
                    }
                    let x = AlgebraElement::monomial(
                        sys,
                        &Word::new(sys, v.clone())?,
                        &Word::new(sys, w)?,
                    );
                    let r = state(&x)?.norm();
                    if m == n {
                        equal.push(r);
                    } else {
                        unequal.push(r);
                    }
                }
            }
        }
    }

    let mut checks = BTreeMap::new();
    checks.insert(KMS_CONDITION.to_string(), kms.checked());
    checks.insert(STATE_INVARIANCE.to_string(), invariance.checked());
    checks.insert(CENTRALISER.to_string(), centraliser.checked());
    checks.insert(
        FAITHFULNESS.to_string(),
        FactCheck {
            status: CheckStatus::Sampled,
            value: faithful.is_finite().then_some(faithful),
            samples: faithful_count,
        },
    );
    checks.insert(CONFORMALITY_1.to_string(), conf1.checked());
    checks.insert(CONFORMALITY_2.to_string(), conf2.checked());
    checks.insert(LSTAR_INVARIANCE.to_string(), lstar.checked());
    checks.insert(GAUGE_EQUAL_LENGTH.to_string(), equal.checked());
    checks.insert(
        GAUGE_UNEQUAL_LENGTH.to_string(),
        if positive {
            unequal.checked()
        } else {
            FactCheck {
                status: CheckStatus::NotApplicable,
                value: None,
                samples: 0,
            }
        },
    );
    Ok(KmsReport { beta, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::eigenmeasure;

    fn log2(sys: &IncidenceSystem) -> LocallyConstantFunction<f64> {
        LocallyConstantFunction::constant(sys, 1, 2f64.ln())
    }

    #[test]
    fn hand_computed_residuals() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let s0 = AlgebraElement::generator(&sys, 0);
        let s0s = AlgebraElement::generator_adjoint(&sys, 0);
        let fair = CylinderMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        assert!(kms_residual(&sys, &fair, &log2(&sys), 1.0, &s0, &s0s).unwrap() < 1e-15);
        let one = AlgebraElement::one(&sys);
        assert!(kms_residual(&sys, &fair, &log2(&sys), 1.0, &one, &s0s).unwrap() < 1e-15);
        let biased = CylinderMeasure::bernoulli(&sys, &[0.7, 0.3]).unwrap();
        let r = kms_residual(&sys, &biased, &log2(&sys), 1.0, &s0, &s0s).unwrap();
        assert!((r - 0.2).abs() < 1e-14);
    }

    #[test]
    fn eigenmeasure_passes_the_suite() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let h = log2(&sys);
        let mu = eigenmeasure(&sys, &h.scale(-1.0)).unwrap();
        let report = check_suite(&sys, &mu, &h, 1.0, 50, 7).unwrap();
        assert!(report.max_residual() < 1e-10, "{report:?}");
        assert!(report.value(FAITHFULNESS).unwrap() > 0.0);
        assert_eq!(
            report.checks[GAUGE_UNEQUAL_LENGTH].status,
            CheckStatus::Checked
        );
    }

    #[test]
    fn biased_measure_fails_lstar_invariance() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let mu = CylinderMeasure::bernoulli(&sys, &[0.7, 0.3]).unwrap();
        let report = check_suite(&sys, &mu, &log2(&sys), 1.0, 10, 1).unwrap();
        assert!(report.value(LSTAR_INVARIANCE).unwrap() >= 0.1);
    }

    #[test]
    fn nonuniform_potential_on_golden_mean() {
        let sys = IncidenceSystem::golden_mean();
        let raw = LocallyConstantFunction::from_values(&sys, 2, vec![0.2, 0.9, 0.5]).unwrap();
        let beta = 1.3;
        // Normalize so that P(-βH) = 0.
        let p = crate::transfer::pressure(&sys, &raw.scale(-beta)).unwrap();
        let h = raw.map(|v| v + p / beta);
        let mu = eigenmeasure(&sys, &h.scale(-beta)).unwrap();
        let report = check_suite(&sys, &mu, &h, beta, 40, 3).unwrap();
        assert!(report.max_residual() < 1e-10, "{report:?}");
        let json = report.to_json();
        assert!(json.get(KMS_CONDITION).unwrap().is_number());
    }

    #[test]
    fn unequal_length_check_needs_positive_potential() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let h = LocallyConstantFunction::constant(&sys, 1, 0.0);
        let mu = CylinderMeasure::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        let report = check_suite(&sys, &mu, &h, 1.0, 5, 0).unwrap();
        assert_eq!(
            report.checks[GAUGE_UNEQUAL_LENGTH].status,
            CheckStatus::NotApplicable
        );
        assert!(report.to_json()[GAUGE_UNEQUAL_LENGTH].is_null());
    }
}
