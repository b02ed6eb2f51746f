//! Bowen roots, the family `s(q)` with `P(-s(q)J) = q·h_top`, Lyapunov
//! exponents and the dimension spectrum of a positive potential `J`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::measure::CylinderMeasure;
use crate::symbolic::IncidenceSystem;
use crate::transfer::{apply_transfer, eigen_data, pressure};

type F = LocallyConstantFunction<f64>;

pub const PRESSURE_TOL: f64 = 1e-12;
/// `|s|` at which the extreme Lyapunov exponents are estimated.
pub const S_BIG: f64 = 60.0;
/// Smaller `|s|` used for the convergence flag of the extreme exponents.
pub const S_CHECK: f64 = 40.0;
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
pub const VARIANCE_INCREMENT_TOL: f64 = 1e-14;
pub const DEFAULT_K_MAX: usize = 64;

/// `P(-sJ)`.
pub fn scaled_pressure(sys: &IncidenceSystem, j: &F, s: f64) -> Result<f64> {
    pressure(sys, &j.scale(-s))
}

/// Root of a decreasing function by bisection, stopping once `|g| < tol`
/// or the bracket cannot shrink further.
fn bisect_decreasing(
    mut g: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if g_lo.abs() < tol {
        return Ok(lo);
    }
    if g_hi.abs() < tol {
        return Ok(hi);
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            f_lo: g_lo,
            f_hi: g_hi,
        });
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid)?;
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v.abs() < tol {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

fn min_value(j: &F) -> f64 {
    j.values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// The zero of `s ↦ P(-sJ)`; needs `min J > 0`.
pub fn bowen_root(sys: &IncidenceSystem, j: &F) -> Result<f64> {
    let h_top = pressure(sys, &F::zero(sys))?;
    let jmin = min_value(j);
    if !(jmin > 0.0) {
        return Err(Error::BracketFailure {
            lo: 0.0,
            hi: f64::INFINITY,
            f_lo: h_top,
            f_hi: f64::NAN,
        });
    }
    bisect_decreasing(
        |s| scaled_pressure(sys, j, s),
        0.0,
        h_top / jmin,
        PRESSURE_TOL,
    )
}

/// Range `[P(-S_BIG·J)/h_top, P(S_BIG·J)/h_top]` of attainable `q`.
pub fn q_range(sys: &IncidenceSystem, j: &F) -> Result<(f64, f64)> {
    let h_top = pressure(sys, &F::zero(sys))?;
    Ok((
        scaled_pressure(sys, j, S_BIG)? / h_top,
        scaled_pressure(sys, j, -S_BIG)? / h_top,
    ))
}

/// `s(q)` with `P(-s(q) J) = q·h_top`.
pub fn s_of_q(sys: &IncidenceSystem, j: &F, q: f64) -> Result<f64> {
    let h_top = pressure(sys, &F::zero(sys))?;
    let target = q * h_top;
    let (q_min, q_max) = q_range(sys, j)?;
    if q < q_min || q > q_max {
        return Err(Error::OutOfSpectrumRange { q, q_min, q_max });
    }
    bisect_decreasing(
        |s| Ok(scaled_pressure(sys, j, s)? - target),
        -S_BIG,
        S_BIG,
        PRESSURE_TOL,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub q: f64,
    pub s_q: f64,
    pub alpha: f64,
    pub dim: f64,
    pub pressure_residual: f64,
    /// `|dim - (s + q·h_top/α)|`.
    pub legendre_residual: f64,
    pub variance: f64,
}

/// Equilibrium measure of `-sJ`.
pub fn equilibrium(sys: &IncidenceSystem, j: &F, s: f64) -> Result<CylinderMeasure<f64>> {
    eigen_data(sys, &j.scale(-s))?.gibbs(sys)
}

pub fn spectrum_point(sys: &IncidenceSystem, j: &F, q: f64) -> Result<SpectrumPoint> {
    let h_top = pressure(sys, &F::zero(sys))?;
    let s = s_of_q(sys, j, q)?;
    point_at(sys, j, q, s, h_top)
}

fn point_at(sys: &IncidenceSystem, j: &F, q: f64, s: f64, h_top: f64) -> Result<SpectrumPoint> {
    let e = eigen_data(sys, &j.scale(-s))?;
    let p = e.log_lambda;
    let m = e.gibbs(sys)?;
    let alpha = m.integrate(sys, j)?;
    let dim = (s * alpha + p) / alpha;
    let variance = asymptotic_variance(sys, j, &m, DEFAULT_K_MAX)?.value;
    Ok(SpectrumPoint {
        q,
        s_q: s,
        alpha,
        dim,
        pressure_residual: (p - q * h_top).abs(),
        legendre_residual: (dim - (s + q * h_top / alpha)).abs(),
        variance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variance {
    pub value: f64,
    pub terms: usize,
    /// False when the correlations had not decayed below the increment tolerance at `K_max`.
    pub converged: bool,
}

/// `D = Σ_{k=0}^{K} (∫ f·f∘θ^k dm - (∫ f dm)²)` for a shift-invariant Markov measure `m`.
pub fn asymptotic_variance(
    sys: &IncidenceSystem,
    f: &F,
    m: &CylinderMeasure<f64>,
    k_max: usize,
) -> Result<Variance> {
    let n0 = f.depth().max(m.depth());
    let mean = m.integrate(sys, f)?;
    let centred = f.lift(sys, n0)?.map(|v| v - mean);
    let masses = m.masses_at(sys, n0)?;
    let deeper = m.masses_at(sys, n0 + 1)?;
    // Forward transition u -> θ(u j) with probability m[uj] / m[u].
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::with_capacity(masses.len());
    let mut idx = 0;
    let mut current: Option<Vec<usize>> = None;
    sys.visit_words(n0 + 1, |w| {
        let u = &w[..n0];
        if current.as_deref() != Some(u) {
            transitions.push(Vec::new());
            current = Some(u.to_vec());
        }
        let mu = masses[sys.index_of(u)];
        if mu > 0.0 {
            transitions
                .last_mut()
                .unwrap()
                .push((sys.index_of(&w[1..]), deeper[idx] / mu));
        }
        idx += 1;
    });
    let weighted: Vec<f64> = centred
        .values()
        .iter()
        .zip(&masses)
        .map(|(&v, &mu)| v * mu)
        .collect();
    let mut g = centred.values().to_vec();
    let mut total = 0.0;
    for k in 0..=k_max {
        let c: f64 = weighted.iter().zip(&g).map(|(a, b)| a * b).sum();
        total += c;
        if k > 0 && c.abs() < VARIANCE_INCREMENT_TOL {
            return Ok(Variance {
                value: total,
                terms: k + 1,
                converged: true,
            });
        }
        g = transitions
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * g[j]).sum())
            .collect();
    }
    Ok(Variance {
        value: total,
        terms: k_max + 1,
        converged: false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedPotential {
    pub s: f64,
    /// `P(-sJ)`.
    pub pressure: f64,
    /// `-log h` for the right eigenfunction `h` of `L_{-sJ}`.
    pub chi: F,
    /// `sJ + P(-sJ) + χ - χ∘θ`.
    pub i_s: F,
    /// `max |Σ_{θy=x} e^{-I_s(y)} - 1|`.
    pub defect: f64,
}

pub fn normalized_potential(sys: &IncidenceSystem, j: &F, s: f64) -> Result<NormalizedPotential> {
    let e = eigen_data(sys, &j.scale(-s))?;
    let chi = e.h.map(|v| -v.ln());
    let chi_shift = chi.compose_shift(sys, 1);
    let depth = chi_shift.depth().max(j.depth());
    let p = e.log_lambda;
    let i_s = F::from_fn(sys, depth, |w| {
        s * j.value_at(sys, w) + p + chi.value_at(sys, w) - chi_shift.value_at(sys, w)
    });
    let sums = apply_transfer(sys, &i_s.scale(-1.0), &F::one(sys));
    let defect = sums
        .values()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(NormalizedPotential {
        s,
        pressure: p,
        chi,
        i_s,
        defect,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub q: f64,
    pub point: Option<SpectrumPoint>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// Both extreme estimates moved by less than `1e-3` between `|s| = 40` and `|s| = 60`.
    pub endpoints_converged: bool,
    pub degenerate: bool,
    pub bowen_root: f64,
}

impl Sweep {
    pub fn successful(&self) -> impl Iterator<Item = &SpectrumPoint> {
        self.points.iter().filter_map(|p| p.point.as_ref())
    }
}

/// `∫ J dm_s`, the Lyapunov exponent of the equilibrium of `-sJ`.
pub fn lyapunov_at(sys: &IncidenceSystem, j: &F, s: f64) -> Result<f64> {
    equilibrium(sys, j, s)?.integrate(sys, j)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Spectrum points on `q_grid`, evaluated in parallel and ordered by `q`.
pub fn spectrum_sweep(sys: &IncidenceSystem, j: &F, q_grid: &[f64]) -> Result<Sweep> {
    let h_top = pressure(sys, &F::zero(sys))?;
    let delta = bowen_root(sys, j)?;
    let mmax = equilibrium(sys, j, 0.0)?;
    let degenerate = asymptotic_variance(sys, j, &mmax, DEFAULT_K_MAX)?
        .value
        .abs()
        < DEGENERATE_VARIANCE;
    let alpha_minus = lyapunov_at(sys, j, S_BIG)?;
    let alpha_plus = lyapunov_at(sys, j, -S_BIG)?;
    let endpoints_converged = (alpha_minus - lyapunov_at(sys, j, S_CHECK)?).abs() < 1e-3
        && (alpha_plus - lyapunov_at(sys, j, -S_CHECK)?).abs() < 1e-3;
    if degenerate {
        let point = point_at(sys, j, 0.0, delta, h_top)?;
        return Ok(Sweep {
            points: vec![SweepPoint {
                q: 0.0,
                point: Some(point),
                error: None,
            }],
            alpha_minus,
            alpha_plus,
            endpoints_converged,
            degenerate,
            bowen_root: delta,
        });
    }
    let mut grid = q_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let points = grid
        .par_iter()
        .map(|&q| match spectrum_point(sys, j, q) {
            Ok(p) => SweepPoint {
                q,
                point: Some(p),
                error: None,
            },
            Err(e) => SweepPoint {
                q,
                point: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Sweep {
        points,
        alpha_minus,
        alpha_plus,
        endpoints_converged,
        degenerate,
        bowen_root: delta,
    })
}
