//! Transfer operators of locally constant potentials as sparse matrices on
//! depth-`D` cylinder indicators, with Perron eigendata, pressure and Gibbs measures.

use std::ops::{Add, Mul};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::measure::{ConformalExtension, CylinderMeasure};
use crate::scalar::Real;
use crate::symbolic::{letters_to_string, IncidenceSystem};

pub const POWER_ITERATION_CAP: usize = 100_000;
pub const POWER_ITERATION_TOL: f64 = 1e-13;

/// Square nonnegative matrix stored by rows as `(column, value)` lists.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        SparseMatrix { rows }
    }

    pub fn from_dense(dense: &[Vec<T>]) -> Self {
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        SparseMatrix { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut out = vec![vec![T::zero(); n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i][j] += v;
            }
        }
        out
    }

    /// `M x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(T::zero(), |acc, &(j, v)| acc + v * x[j]))
            .collect()
    }

    /// `y M`.
    pub fn apply_left(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[j] += y[i] * v;
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n {
                    return Err(Error::InvalidFunction(format!(
                        "column {j} out of range in row {i}"
                    )));
                }
                if !(v >= T::zero()) {
                    return Err(Error::NegativeEntry { row: i, col: j });
                }
            }
        }
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if v > T::zero() {
                    forward[i].push(j);
                    backward[j].push(i);
                }
            }
        }
        if n == 0 || !reaches_all(&forward) || !reaches_all(&backward) {
            return Err(Error::NotIrreducible);
        }
        Ok(())
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Perron root with right and left eigenvectors of an irreducible nonnegative matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PerronVectors<T> {
    pub lambda: T,
    /// Right eigenvector, scaled so that `Σ right·left = 1`.
    pub right: Vec<T>,
    /// Left eigenvector, a probability vector.
    pub left: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Shifted power iteration on `M + I` from the all-ones vector.
pub fn leading_eigen<T: Real>(m: &SparseMatrix<T>) -> Result<PerronVectors<T>> {
    m.validate()?;
    let tol = T::solver_tol(POWER_ITERATION_TOL);
    let (root_r, right, it_r) = power_iterate(m.dim(), tol, |x| m.apply(x))?;
    let (root_l, mut left, it_l) = power_iterate(m.dim(), tol, |y| m.apply_left(y))?;
    let lambda = (root_r + root_l) / T::lit(2.0) - T::one();
    let total = left.iter().fold(T::zero(), |a, &b| a + b);
    left.iter_mut().for_each(|v| *v /= total);
    let pairing = right
        .iter()
        .zip(&left)
        .fold(T::zero(), |a, (&r, &l)| a + r * l);
    let right: Vec<T> = right.into_iter().map(|v| v / pairing).collect();
    let defect = |a: &[T], b: &[T]| {
        a.iter()
            .zip(b)
            .fold(T::zero(), |acc, (&x, &y)| acc.max((x - lambda * y).abs()))
    };
    let residual = defect(&m.apply(&right), &right).max(defect(&m.apply_left(&left), &left));
    Ok(PerronVectors {
        lambda,
        right,
        left,
        residual,
        iterations: it_r.max(it_l),
    })
}

/// Returns the Perron root of `A + I`, the L1-normalized eigenvector and the iteration count.
fn power_iterate<T: Real>(
    n: usize,
    tol: T,
    apply: impl Fn(&[T]) -> Vec<T>,
) -> Result<(T, Vec<T>, usize)> {
    let mut x = vec![T::one() / T::from_usize(n).unwrap(); n];
    let mut previous = T::zero();
    let mut change = T::infinity();
    for it in 1..=POWER_ITERATION_CAP {
        let mut y = apply(&x);
        y.iter_mut().zip(&x).for_each(|(a, &b)| *a += b);
        let root = y.iter().fold(T::zero(), |a, &b| a + b);
        y.iter_mut().for_each(|v| *v /= root);
        let scale = y.iter().fold(T::zero(), |a, &b| a.max(b));
        let vec_change = y
            .iter()
            .zip(&x)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
            / scale;
        change = ((root - previous) / root).abs();
        x = y;
        if change <= tol && vec_change <= tol {
            return Ok((root, x, it));
        }
        previous = root;
    }
    Err(Error::NoConvergence {
        iterations: POWER_ITERATION_CAP,
        last_change: change.to_f64_lossy(),
    })
}

/// Matrix of `L_f` on depth-`depth` locally constant functions:
/// `(L_f g)[v] = Σ_j a_{j v_0} e^{f(jv)} g[(jv)_{<D}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix<T> {
    depth: usize,
    matrix: SparseMatrix<T>,
}

impl<T: Real> TransferMatrix<T> {
    pub fn new(
        sys: &IncidenceSystem,
        f: &LocallyConstantFunction<T>,
        depth: usize,
    ) -> Result<Self> {
        Self::with_shift(sys, f, depth, T::zero())
    }

    /// Matrix of `L_{f - shift}`.
    fn with_shift(
        sys: &IncidenceSystem,
        f: &LocallyConstantFunction<T>,
        depth: usize,
        shift: T,
    ) -> Result<Self> {
        let minimum = f.depth().saturating_sub(1).max(1);
        if depth < minimum {
            return Err(Error::DepthTooSmall {
                requested: depth,
                minimum,
            });
        }
        let mut rows = Vec::with_capacity(sys.count_words(depth) as usize);
        let mut buf = Vec::with_capacity(depth + 1);
        sys.visit_words(depth, |v| {
            let mut row = Vec::new();
            for j in sys.predecessors(v[0]) {
                buf.clear();
                buf.push(j);
                buf.extend_from_slice(v);
                let col = sys.index_of(&buf[..depth]);
                row.push((col, (f.value_at(sys, &buf) - shift).exp()));
            }
            rows.push(row);
        });
        Ok(TransferMatrix {
            depth,
            matrix: SparseMatrix { rows },
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.matrix.to_dense()
    }
}

/// `L_f g` at depth `max(d_g - 1, d_f - 1, 1)`.
pub fn apply_transfer<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
    g: &LocallyConstantFunction<T>,
) -> LocallyConstantFunction<T> {
    let depth = g.depth().max(f.depth()).saturating_sub(1).max(1);
    let mut buf = Vec::with_capacity(depth + 1);
    LocallyConstantFunction::from_fn(sys, depth, |u| {
        let mut acc = T::zero();
        for j in sys.predecessors(u[0]) {
            buf.clear();
            buf.push(j);
            buf.extend_from_slice(u);
            acc += f.value_at(sys, &buf).exp() * g.value_at(sys, &buf);
        }
        acc
    })
}

/// Perron–Frobenius–Ruelle data of a potential at a fixed depth.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenData<T> {
    pub depth: usize,
    pub lambda: T,
    pub log_lambda: T,
    /// Right eigenfunction, normalized by `∫ h dμ = 1`.
    pub h: LocallyConstantFunction<T>,
    /// Left eigenmeasure, conformal and extendable to any depth.
    pub mu: CylinderMeasure<T>,
    pub residual: T,
    pub iterations: usize,
    shift: T,
    shifted_lambda: T,
    potential: LocallyConstantFunction<T>,
}

impl<T: Real> EigenData<T> {
    /// The equilibrium measure `h·μ`.
    pub fn gibbs(&self, sys: &IncidenceSystem) -> Result<CylinderMeasure<T>> {
        let weights: Vec<T> = self
            .h
            .values()
            .iter()
            .zip(self.mu.weights())
            .map(|(&h, &m)| h * m)
            .collect();
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        let weights = weights.into_iter().map(|w| w / total).collect();
        let ext = ConformalExtension::new(
            self.depth,
            &self.potential.map(|v| v - self.shift),
            self.shifted_lambda,
            self.mu.weights().to_vec(),
            self.h.values().iter().map(|&h| h / total).collect(),
        );
        CylinderMeasure::with_extension(sys, self.depth, weights, ext)
    }
}

/// Smallest depth on which `L_f` acts.
pub fn natural_depth<T: Copy>(f: &LocallyConstantFunction<T>) -> usize {
    f.depth().saturating_sub(1).max(1)
}

pub fn eigen_data<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
) -> Result<EigenData<T>> {
    eigen_data_at(sys, f, natural_depth(f))
}

pub fn eigen_data_at<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
    depth: usize,
) -> Result<EigenData<T>> {
    let shift = f.values().iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    if !shift.is_finite() {
        return Err(Error::InvalidFunction("potential is not finite".into()));
    }
    let tm = TransferMatrix::with_shift(sys, f, depth, shift)?;
    let pv = leading_eigen(tm.matrix())?;
    let scale = shift.exp();
    let shifted_potential = f.map(|v| v - shift);
    let ext = ConformalExtension::new(
        depth,
        &shifted_potential,
        pv.lambda,
        pv.left.clone(),
        vec![T::one(); pv.left.len()],
    );
    let mu = CylinderMeasure::with_extension(sys, depth, pv.left.clone(), ext)?;
    let h = LocallyConstantFunction::from_values(sys, depth, pv.right)?;
    Ok(EigenData {
        depth,
        lambda: pv.lambda * scale,
        log_lambda: pv.lambda.ln() + shift,
        h,
        mu,
        residual: pv.residual * scale,
        iterations: pv.iterations,
        shift,
        shifted_lambda: pv.lambda,
        potential: f.clone(),
    })
}

/// `P(f) = log λ(L_f)`.
pub fn pressure<T: Real>(sys: &IncidenceSystem, f: &LocallyConstantFunction<T>) -> Result<T> {
    Ok(eigen_data(sys, f)?.log_lambda)
}

pub fn pressure_at<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
    depth: usize,
) -> Result<T> {
    Ok(eigen_data_at(sys, f, depth)?.log_lambda)
}

/// Shift-invariant equilibrium measure of `f`.
pub fn gibbs_measure<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
) -> Result<CylinderMeasure<T>> {
    eigen_data(sys, f)?.gibbs(sys)
}

/// Eigenmeasure of `L*_{f - P(f)}`.
pub fn eigenmeasure<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
) -> Result<CylinderMeasure<T>> {
    Ok(eigen_data(sys, f)?.mu)
}

/// `dm∘θ/dm` on depth-`D` cylinders: `m[θw] / m[w]`.
pub fn rn_derivative<T: Real>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
) -> Result<LocallyConstantFunction<T>> {
    rn_derivative_at(sys, m, m.depth())
}

pub fn rn_derivative_at<T: Real>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
    depth: usize,
) -> Result<LocallyConstantFunction<T>> {
    let mut failure = None;
    let f = LocallyConstantFunction::from_fn(sys, depth, |w| {
        let below = m.mass(sys, w);
        let above = m.mass(sys, &w[1..]);
        match (below, above) {
            (Ok(b), Ok(a)) if b > T::zero() => a / b,
            (Ok(_), Ok(_)) => {
                failure.get_or_insert(Error::ZeroMass {
                    cylinder: letters_to_string(w),
                });
                T::zero()
            }
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
                T::zero()
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(f),
    }
}

pub const WEAK_GIBBS_CAP: usize = 1 << 22;

/// `b_n = max_{u ∈ W^{n+d-1}} |log m[u_{<n}] - S_n f(u)|` for `n = 1..=n_max`.
pub fn weak_gibbs_profile<T: Real>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
    f: &LocallyConstantFunction<T>,
    n_max: usize,
) -> Result<Vec<T>> {
    weak_gibbs_profile_capped(sys, m, f, n_max, WEAK_GIBBS_CAP)
}

pub fn weak_gibbs_profile_capped<T: Real>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
    f: &LocallyConstantFunction<T>,
    n_max: usize,
    cap: usize,
) -> Result<Vec<T>> {
    let d = f.depth();
    sys.checked_count(n_max + d - 1, cap)
        .map_err(|_| Error::Capacity {
            what: "weak Gibbs profile".into(),
            requested: sys.count_words(n_max + d - 1).min(usize::MAX as u64) as usize,
            cap,
        })?;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let masses = m.masses_at(sys, n)?;
        let mut worst = T::zero();
        let mut failure = None;
        sys.visit_words(n + d - 1, |u| {
            let mass = masses[sys.index_of(&u[..n])];
            if !(mass > T::zero()) {
                failure.get_or_insert_with(|| Error::ZeroMass {
                    cylinder: letters_to_string(&u[..n]),
                });
                return;
            }
            let sum = (0..n).fold(T::zero(), |acc, k| acc + f.value_at(sys, &u[k..]));
            worst = worst.max((mass.ln() - sum).abs());
        });
        if let Some(e) = failure {
            return Err(e);
        }
        out.push(worst);
    }
    Ok(out)
}

/// `∫ f dm`.
pub fn integrate<T, V>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
    f: &LocallyConstantFunction<V>,
) -> Result<V>
where
    T: Real,
    V: Copy + Zero + Add<Output = V> + Mul<T, Output = V>,
{
    m.integrate(sys, f)
}

/// `max_w |∫ L_f 1_[w] dm - λ m[w]|` over `w ∈ W^depth`.
pub fn lstar_residual<T: Real>(
    sys: &IncidenceSystem,
    m: &CylinderMeasure<T>,
    f: &LocallyConstantFunction<T>,
    lambda: T,
    depth: usize,
) -> Result<T> {
    let masses = m.masses_at(sys, depth)?;
    let out_depth = depth.max(f.depth()).saturating_sub(1).max(1);
    let lower = m.masses_at(sys, out_depth)?;
    let mut worst = T::zero();
    let mut i = 0;
    let mut buf = Vec::new();
    sys.visit_words(depth, |w| {
        // L_f 1_[w] is supported on [w_1..] and equals e^{f(w_0 x)} there.
        let lhs = if depth == 1 {
            let mut acc = T::zero();
            for x in sys.successors(w[0]) {
                buf.clear();
                buf.push(w[0]);
                buf.push(x);
                acc += weighted_tail(sys, f, &buf, &lower, out_depth);
            }
            acc
        } else {
            weighted_tail(sys, f, w, &lower, out_depth)
        };
        worst = worst.max((lhs - lambda * masses[i]).abs());
        i += 1;
    });
    Ok(worst)
}

/// `∫_{[w_1..]} e^{f(w_0 x)} dm(x)`, summing over depth-`out_depth` cylinders below `[w_1..]`.
fn weighted_tail<T: Real>(
    sys: &IncidenceSystem,
    f: &LocallyConstantFunction<T>,
    w: &[usize],
    masses: &[T],
    out_depth: usize,
) -> T {
    let tail = &w[1..];
    if tail.len() >= out_depth {
        return f.value_at(sys, w).exp() * masses[sys.index_of(&tail[..out_depth])];
    }
    let mut acc = T::zero();
    let mut buf = w.to_vec();
    extend_cylinders(sys, &mut buf, out_depth + 1, &mut |full| {
        acc += f.value_at(sys, full).exp() * masses[sys.index_of(&full[1..])];
    });
    acc
}

fn extend_cylinders(
    sys: &IncidenceSystem,
    buf: &mut Vec<usize>,
    len: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if buf.len() == len {
        visit(buf);
        return;
    }
    let last = *buf.last().unwrap();
    for j in sys.successors(last).collect::<Vec<_>>() {
        buf.push(j);
        extend_cylinders(sys, buf, len, visit);
        buf.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type F = LocallyConstantFunction<f64>;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn counting_matrices() {
        let full = IncidenceSystem::full_shift(2).unwrap();
        let tm = TransferMatrix::new(&full, &F::zero(&full), 1).unwrap();
        assert_eq!(tm.to_dense(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let gm = IncidenceSystem::golden_mean();
        let tm = TransferMatrix::new(&gm, &F::zero(&gm), 1).unwrap();
        // Row v lists the letters j with a_{j v} = 1.
        assert_eq!(tm.to_dense(), vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        let pv = leading_eigen(tm.matrix()).unwrap();
        assert!((pv.lambda - GOLDEN).abs() < 1e-13);
    }

    #[test]
    fn depth_below_minimum_is_rejected() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let f = F::zero(&sys).lift(&sys, 3).unwrap();
        assert!(matches!(
            TransferMatrix::new(&sys, &f, 1),
            Err(Error::DepthTooSmall { minimum: 2, .. })
        ));
    }

    #[test]
    fn dense_eigen_examples() {
        let pv = leading_eigen(&SparseMatrix::from_dense(&[
            vec![1.0f64, 1.0],
            vec![1.0, 1.0],
        ]))
        .unwrap();
        assert!((pv.lambda - 2.0).abs() < 1e-13);
        assert!(pv.left.iter().all(|&v| (v - 0.5).abs() < 1e-13));
        assert!(pv.right.iter().all(|&v| (v - 1.0).abs() < 1e-13));
        assert!(matches!(
            leading_eigen(&SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]])),
            Err(Error::NotIrreducible)
        ));
        assert!(matches!(
            leading_eigen(&SparseMatrix::from_dense(&[
                vec![1.0, -1.0],
                vec![1.0, 1.0]
            ])),
            Err(Error::NegativeEntry { row: 0, col: 1 })
        ));
    }

    #[test]
    fn periodic_matrix_converges() {
        let pv = leading_eigen(&SparseMatrix::from_dense(&[
            vec![0.0f64, 1.0],
            vec![1.0, 0.0],
        ]))
        .unwrap();
        assert!((pv.lambda - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bernoulli_potential() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let p: f64 = 0.3;
        let f = F::from_values(&sys, 1, vec![p.ln(), (1.0 - p).ln()]).unwrap();
        let e = eigen_data(&sys, &f).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-13);
        assert!(pressure(&sys, &f).unwrap().abs() < 1e-13);
        assert!((e.mu.weights()[0] - p).abs() < 1e-13);
        let m = gibbs_measure(&sys, &f).unwrap();
        let want = p * (1.0 - p) * (1.0 - p) * p;
        assert!((m.mass(&sys, &[0, 1, 1, 0]).unwrap() - want).abs() < 1e-14);
        let entropy = m.integrate(&sys, &f).unwrap();
        assert!((entropy - (p * p.ln() + (1.0 - p) * (1.0 - p).ln())).abs() < 1e-13);
    }

    #[test]
    fn full_shift_pressure_is_log_n() {
        for n in 2..6 {
            let sys = IncidenceSystem::full_shift(n).unwrap();
            let p = pressure(&sys, &F::zero(&sys)).unwrap();
            assert!((p - (n as f64).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_bernoulli_from_constant_potential() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = gibbs_measure(&sys, &F::constant(&sys, 1, -(2f64.ln()))).unwrap();
        for n in 1..=6 {
            for v in m.masses_at(&sys, n).unwrap() {
                assert!((v - 0.5f64.powi(n as i32)).abs() < 1e-15);
            }
        }
        let wg = weak_gibbs_profile(&sys, &m, &F::constant(&sys, 1, -(2f64.ln())), 8).unwrap();
        assert!(wg.iter().all(|&b| b < 1e-12));
    }

    fn parry() -> (IncidenceSystem, CylinderMeasure<f64>) {
        let sys = IncidenceSystem::golden_mean();
        let m = gibbs_measure(&sys, &F::constant(&sys, 1, -GOLDEN.ln())).unwrap();
        (sys, m)
    }

    #[test]
    fn parry_measure_closed_form() {
        let (sys, m) = parry();
        // π = (φ², 1) / (1 + φ²), P_00 = 1/φ, P_01 = 1/φ².
        let pi0 = GOLDEN * GOLDEN / (1.0 + GOLDEN * GOLDEN);
        assert!((m.mass(&sys, &[0]).unwrap() - pi0).abs() < 1e-13);
        let want = pi0 / GOLDEN * (1.0 / (GOLDEN * GOLDEN));
        assert!((m.mass(&sys, &[0, 0, 1]).unwrap() - want).abs() < 1e-13);
        let rn = rn_derivative_at(&sys, &m, 2).unwrap();
        let p = [[1.0 / GOLDEN, 1.0 / (GOLDEN * GOLDEN)], [1.0, 0.0]];
        let pi = [pi0, 1.0 - pi0];
        sys.visit_words(2, |w| {
            let want = pi[w[1]] / (pi[w[0]] * p[w[0]][w[1]]);
            assert!((rn.value_at(&sys, w) - want).abs() < 1e-12);
        });
        let wg = weak_gibbs_profile(&sys, &m, &F::constant(&sys, 1, -GOLDEN.ln()), 10).unwrap();
        assert!(wg.iter().all(|b| b.is_finite()));
        // b_n is constant from n = 3 on, up to rounding
        for n in 3..wg.len() {
            assert!(wg[n] <= wg[n - 1] + 1e-12);
        }
    }

    #[test]
    fn rn_derivative_examples() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = CylinderMeasure::bernoulli(&sys, &[0.5f64, 0.5]).unwrap();
        assert!(rn_derivative(&sys, &m)
            .unwrap()
            .all(|v| (v - 2.0).abs() < 1e-15));
        let m = CylinderMeasure::bernoulli(&sys, &[0.25f64, 0.75]).unwrap();
        let rn = rn_derivative(&sys, &m).unwrap();
        assert!((rn.values()[0] - 4.0).abs() < 1e-15);
        assert!((rn.values()[1] - 4.0 / 3.0).abs() < 1e-15);
        let m = CylinderMeasure::from_weights(&sys, 2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(
            rn_derivative(&sys, &m).unwrap_err(),
            Error::ZeroMass {
                cylinder: "10".into()
            }
        );
    }

    #[test]
    fn integrate_examples() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = CylinderMeasure::bernoulli(&sys, &[0.5f64, 0.5]).unwrap();
        let ind = F::indicator(&sys, &crate::symbolic::Word::parse(&sys, "0").unwrap());
        assert_eq!(integrate(&sys, &m, &ind).unwrap(), 0.5);
        assert!((integrate(&sys, &m, &F::constant(&sys, 3, 2.5)).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn weak_gibbs_respects_cap() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = CylinderMeasure::bernoulli(&sys, &[0.5f64, 0.5]).unwrap();
        let f = F::constant(&sys, 1, -(2f64.ln()));
        assert!(matches!(
            weak_gibbs_profile_capped(&sys, &m, &f, 20, 1000),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn f32_pressure() {
        let sys = IncidenceSystem::golden_mean();
        let f = LocallyConstantFunction::<f32>::zero(&sys);
        let p = pressure(&sys, &f).unwrap();
        assert!((p - GOLDEN.ln() as f32).abs() < 1e-5);
    }

    fn random_potential(sys: &IncidenceSystem, depth: usize, seed: &[f64]) -> F {
        let mut i = 0;
        F::from_fn(sys, depth, |_| {
            i += 1;
            seed[(i - 1) % seed.len()]
        })
    }

    fn random_system(n: usize, bits: u64) -> Option<IncidenceSystem> {
        let matrix: Vec<Vec<u8>> = (0..n)
            .map(|i| (0..n).map(|j| ((bits >> (i * n + j)) & 1) as u8).collect())
            .collect();
        IncidenceSystem::new(matrix)
            .ok()
            .filter(|s| s.is_irreducible())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pressure_is_depth_independent(
            n in 2usize..4,
            bits in any::<u64>(),
            vals in prop::collection::vec(-2.0f64..2.0, 1..12),
            d in 1usize..3,
        ) {
            if let Some(sys) = random_system(n, bits) {
                let f = random_potential(&sys, d, &vals);
                let base = natural_depth(&f);
                let p0 = pressure_at(&sys, &f, base).unwrap();
                let p1 = pressure_at(&sys, &f, base + 1).unwrap();
                prop_assert!((p0 - p1).abs() < 1e-10);
            }
        }

        #[test]
        fn eigenmeasure_is_fixed_by_dual_operator(
            n in 2usize..4,
            bits in any::<u64>(),
            vals in prop::collection::vec(-2.0f64..2.0, 1..12),
            d in 1usize..3,
        ) {
            if let Some(sys) = random_system(n, bits) {
                let f = random_potential(&sys, d, &vals);
                let e = eigen_data(&sys, &f).unwrap();
                let normalized = f.map(|v| v - e.log_lambda);
                let depth = e.depth + 1;
                let r = lstar_residual(&sys, &e.mu, &normalized, 1.0, depth).unwrap();
                prop_assert!(r < 1e-10, "residual {}", r);
                // equilibrium measure is shift invariant: m[w] = Σ_j m[jw]
                let m = e.gibbs(&sys).unwrap();
                let deep = m.masses_at(&sys, depth).unwrap();
                let mut i = 0;
                let mut worst: f64 = 0.0;
                sys.visit_words(depth, |w| {
                    let mut buf = vec![0];
                    buf.extend_from_slice(w);
                    let mut pre = 0.0;
                    for j in sys.predecessors(w[0]) {
                        buf[0] = j;
                        pre += m.mass(&sys, &buf).unwrap();
                    }
                    worst = worst.max((pre - deep[i]).abs());
                    i += 1;
                });
                prop_assert!(worst < 1e-11, "invariance defect {}", worst);
            }
        }

        #[test]
        fn conformality_ladder(
            vals in prop::collection::vec(-2.0f64..2.0, 4),
            word in prop::collection::vec(0usize..2, 2..7),
            n in 1usize..4,
        ) {
            let sys = IncidenceSystem::full_shift(2).unwrap();
            let h = F::from_values(&sys, 2, vals).unwrap();
            let e = eigen_data(&sys, &h.scale(-1.0)).unwrap();
            // log dμ∘θ^n/dμ = S_n (H + P) on cylinders deep enough
            let n = n.min(word.len() - 1);
            let mut deep = word.clone();
            deep.push(0);
            let ratio = e.mu.mass(&sys, &deep[n..]).unwrap() / e.mu.mass(&sys, &deep).unwrap();
            let sum: f64 = (0..n).map(|k| h.value_at(&sys, &deep[k..]) + e.log_lambda).sum();
            prop_assert!((ratio.ln() - sum).abs() < 1e-10);
        }

        #[test]
        fn duality(
            vals in prop::collection::vec(-1.0f64..1.0, 8),
            gvals in prop::collection::vec(-1.0f64..1.0, 20),
            dg in 1usize..4,
        ) {
            let sys = IncidenceSystem::golden_mean();
            let f = random_potential(&sys, 2, &vals);
            let e = eigen_data(&sys, &f).unwrap();
            let g = random_potential(&sys, dg, &gvals);
            let lhs = e.mu.integrate(&sys, &apply_transfer(&sys, &f, &g)).unwrap();
            let rhs = e.lambda * e.mu.integrate(&sys, &g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-11);
        }
    }
}
