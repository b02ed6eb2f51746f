//! First-return systems over a union of cylinders, Kac lifting of induced
//! invariant measures, and the Radon–Nikodym derivatives of the lift
//! expressed through the induced measure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::measure::CylinderMeasure;
use crate::symbolic::{letters_to_string, parse_letters, IncidenceSystem, Word};

type F = LocallyConstantFunction<f64>;
type M = CylinderMeasure<f64>;

pub const DEFAULT_N_MAX: usize = 40;
/// Largest reference mass of `{N > n_max}` accepted by [`build_induced`].
pub const DEFAULT_MAX_TAIL: f64 = 1e-8;
pub const DFS_NODE_CAP: usize = 1 << 22;
/// Largest defect tolerated in the coboundary hypothesis on return blocks.
pub const HYPOTHESIS_TOL: f64 = 1e-10;
/// Largest relative gap tolerated between the two evaluations of `χ`.
pub const ROUTE_TOL: f64 = 1e-9;
const RADIUS_STEPS: usize = 4096;

/// A first-return block `a` together with the words `a·b`, `b` a base word,
/// whose cylinders make up the atom of `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnBlock {
    pub block: Vec<usize>,
    pub witnesses: Vec<Vec<usize>>,
}

impl ReturnBlock {
    /// The return time `N(a)`.
    pub fn len(&self) -> usize {
        self.block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InducedSystem {
    sys: IncidenceSystem,
    base_depth: usize,
    base: Vec<Vec<usize>>,
    /// Membership of depth-`k` words in `B`, by lexicographic index.
    in_base: Vec<bool>,
    blocks: Vec<ReturnBlock>,
    n_max: usize,
    tail_mass: f64,
    base_mass: f64,
    spectral_radius: f64,
}

#[derive(Serialize, Deserialize)]
struct InducedJson {
    matrix: Vec<Vec<u8>>,
    base: Vec<String>,
    n_max: usize,
    tail_mass: f64,
    tail_bound: f64,
    base_mass: f64,
    spectral_radius: f64,
    blocks: BTreeMap<String, Vec<String>>,
}

impl InducedSystem {
    pub fn system(&self) -> &IncidenceSystem {
        &self.sys
    }

    pub fn base_depth(&self) -> usize {
        self.base_depth
    }

    pub fn base(&self) -> &[Vec<usize>] {
        &self.base
    }

    /// Return blocks ordered by length, then lexicographically.
    pub fn blocks(&self) -> &[ReturnBlock] {
        &self.blocks
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Reference mass of `B ∩ {N > n_max}`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Reference mass of `B`.
    pub fn base_mass(&self) -> f64 {
        self.base_mass
    }

    /// Spectral radius `r` of the sub-Markov chain that stays outside `B`.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// `r^{n_max} / (1 - r)`.
    pub fn tail_bound(&self) -> f64 {
        let r = self.spectral_radius;
        if r >= 1.0 {
            f64::INFINITY
        } else {
            r.powi(self.n_max as i32) / (1.0 - r)
        }
    }

    /// Whether a word of length at least `k` starts in `B`.
    pub fn in_base(&self, letters: &[usize]) -> bool {
        letters.len() >= self.base_depth
            && self.in_base[self.sys.index_of(&letters[..self.base_depth])]
    }

    /// First `i ≥ 1` with `θ^i [letters] ⊂ B`, if the word is long enough to show it.
    pub fn return_time(&self, letters: &[usize]) -> Option<usize> {
        let k = self.base_depth;
        (1..=letters.len().saturating_sub(k)).find(|&i| self.in_base(&letters[i..]))
    }

    /// Blocks `a` for which `a·x` is admissible and returns to `B` exactly at `|a|`.
    fn branches_at<'a>(&'a self, x: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        let k = self.base_depth;
        self.blocks.iter().enumerate().filter_map(move |(i, b)| {
            let a = &b.block;
            if !self.sys.allowed(*a.last().unwrap(), x[0]) {
                return None;
            }
            let mut joined = a.clone();
            joined.extend_from_slice(&x[..k]);
            (self.return_time(&joined) == Some(a.len())).then_some(i)
        })
    }

    pub fn to_json(&self) -> String {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                (
                    letters_to_string(&b.block),
                    b.witnesses.iter().map(|w| letters_to_string(w)).collect(),
                )
            })
            .collect();
        let json = InducedJson {
            matrix: self.sys.matrix(),
            base: self.base.iter().map(|b| letters_to_string(b)).collect(),
            n_max: self.n_max,
            tail_mass: self.tail_mass,
            tail_bound: self.tail_bound(),
            base_mass: self.base_mass,
            spectral_radius: self.spectral_radius,
            blocks,
        };
        serde_json::to_string_pretty(&json).expect("induced system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: InducedJson =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let sys = IncidenceSystem::new(json.matrix)?;
        let base = json
            .base
            .iter()
            .map(|b| parse_letters(b))
            .collect::<Result<Vec<_>>>()?;
        let mut ind = Self::skeleton(&sys, &base)?;
        for (block, witnesses) in &json.blocks {
            ind.blocks.push(ReturnBlock {
                block: parse_letters(block)?,
                witnesses: witnesses
                    .iter()
                    .map(|w| parse_letters(w))
                    .collect::<Result<Vec<_>>>()?,
            });
        }
        ind.sort_blocks();
        for b in &ind.blocks {
            for w in &b.witnesses {
                if !sys.is_admissible(w) || ind.return_time(w) != Some(b.len()) || !ind.in_base(w) {
                    return Err(Error::Config(format!(
                        "{} is not a first-return word",
                        letters_to_string(w)
                    )));
                }
            }
        }
        ind.n_max = json.n_max;
        ind.tail_mass = json.tail_mass;
        ind.base_mass = json.base_mass;
        ind.spectral_radius = json.spectral_radius;
        Ok(ind)
    }

    fn skeleton(sys: &IncidenceSystem, base: &[Vec<usize>]) -> Result<Self> {
        let k = match base.first() {
            Some(b) if !b.is_empty() => b.len(),
            _ => {
                return Err(Error::InvalidWord {
                    word: vec![],
                    reason: "the base needs at least one nonempty cylinder".into(),
                })
            }
        };
        let mut in_base = vec![false; sys.count_words(k) as usize];
        let mut sorted = Vec::new();
        for b in base {
            if b.len() != k {
                return Err(Error::InvalidWord {
                    word: b.clone(),
                    reason: format!("base cylinders must all have depth {k}"),
                });
            }
            Word::new(sys, b.clone())?;
            in_base[sys.index_of(b)] = true;
        }
        sys.visit_words(k, |w| {
            if in_base[sys.index_of(w)] {
                sorted.push(w.to_vec());
            }
        });
        Ok(InducedSystem {
            sys: sys.clone(),
            base_depth: k,
            base: sorted,
            in_base,
            blocks: Vec::new(),
            n_max: 0,
            tail_mass: 0.0,
            base_mass: 0.0,
            spectral_radius: 0.0,
        })
    }

    fn sort_blocks(&mut self) {
        self.blocks
            .sort_by(|a, b| (a.len(), &a.block).cmp(&(b.len(), &b.block)));
        for b in &mut self.blocks {
            b.witnesses.sort();
        }
    }
}

/// Enumerates the first-return blocks of `B` up to length `n_max`.
pub fn build_induced(
    sys: &IncidenceSystem,
    base: &[Word],
    reference: &M,
    n_max: usize,
    max_tail: f64,
) -> Result<InducedSystem> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be positive".into()));
    }
    let letters: Vec<Vec<usize>> = base.iter().map(|w| w.letters().to_vec()).collect();
    let mut ind = InducedSystem::skeleton(sys, &letters)?;
    ind.n_max = n_max;
    let k = ind.base_depth;
    let mut base_mass = 0.0;
    for b in &ind.base {
        base_mass += reference.mass(sys, b)?;
    }
    if !(base_mass > 0.0) {
        return Err(Error::ZeroMass {
            cylinder: ind
                .base
                .iter()
                .map(|b| letters_to_string(b))
                .collect::<Vec<_>>()
                .join("|"),
        });
    }
    ind.base_mass = base_mass;
    let r = complement_radius(&ind, reference)?;
    ind.spectral_radius = r;
    if r >= 1.0 - 1e-12 {
        return Err(Error::NormalizerDiverges { spectral_radius: r });
    }

    let mut grouped: BTreeMap<Vec<usize>, Vec<Vec<usize>>> = BTreeMap::new();
    let mut tail = 0.0;
    let mut nodes = 0usize;
    let mut stack: Vec<Vec<usize>> = ind.base.iter().rev().cloned().collect();
    while let Some(u) = stack.pop() {
        nodes += 1;
        if nodes > DFS_NODE_CAP {
            return Err(Error::Capacity {
                what: "return-block search".into(),
                requested: nodes,
                cap: DFS_NODE_CAP,
            });
        }
        let i = u.len() - k;
        if i >= 1 && ind.in_base(&u[i..]) {
            grouped.entry(u[..i].to_vec()).or_default().push(u);
            continue;
        }
        if i == n_max {
            tail += reference.mass(sys, &u)?;
            continue;
        }
        let last = *u.last().unwrap();
        let next: Vec<usize> = sys.successors(last).collect();
        for &j in next.iter().rev() {
            let mut v = u.clone();
            v.push(j);
            stack.push(v);
        }
    }
    ind.tail_mass = tail;
    ind.blocks = grouped
        .into_iter()
        .map(|(block, witnesses)| ReturnBlock { block, witnesses })
        .collect();
    ind.sort_blocks();
    if tail > max_tail {
        return Err(Error::Truncation {
            tail,
            bound: max_tail,
            spectral_radius: r,
        });
    }
    Ok(ind)
}

/// Growth rate of the chain on windows of length `max(k, D)` that never enter `B`,
/// with the reference measure's conditional probabilities as weights.
fn complement_radius(ind: &InducedSystem, reference: &M) -> Result<f64> {
    let sys = &ind.sys;
    let k = ind.base_depth;
    let len = k.max(reference.depth());
    let masses = reference.masses_at(sys, len)?;
    let mut states = Vec::new();
    let mut index = BTreeMap::new();
    sys.visit_words(len, |w| {
        if !ind.in_base(&w[len - k..]) && masses[sys.index_of(w)] > 0.0 {
            index.insert(w.to_vec(), states.len());
            states.push(w.to_vec());
        }
    });
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::with_capacity(states.len());
    for u in &states {
        let denom = masses[sys.index_of(u)];
        let mut row = Vec::new();
        for j in sys.successors(*u.last().unwrap()) {
            let mut uj = u.clone();
            uj.push(j);
            if let Some(&t) = index.get(&uj[1..]) {
                row.push((t, reference.mass(sys, &uj)? / denom));
            }
        }
        edges.push(row);
    }
    if states.is_empty() {
        return Ok(0.0);
    }
    let mut v = vec![1.0; states.len()];
    let mut logs = Vec::with_capacity(RADIUS_STEPS);
    for _ in 0..RADIUS_STEPS {
        let next: Vec<f64> = edges
            .iter()
            .map(|row| row.iter().map(|&(t, p)| p * v[t]).sum())
            .collect();
        let norm = next.iter().copied().fold(0.0, f64::max);
        if norm == 0.0 {
            return Ok(0.0);
        }
        logs.push(norm.ln());
        v = next.into_iter().map(|x| x / norm).collect();
    }
    let half = RADIUS_STEPS / 2;
    Ok((logs[half..].iter().sum::<f64>() / (RADIUS_STEPS - half) as f64).exp())
}

/// A measure on `B`: `ν̃[u] = m([u] ∩ B) / m(B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMeasure {
    m: M,
    base_mass: f64,
}

impl InducedMeasure {
    /// Normalized restriction of `m` to `B`.
    pub fn restrict(ind: &InducedSystem, m: &M) -> Result<Self> {
        let mut base_mass = 0.0;
        for b in &ind.base {
            base_mass += m.mass(&ind.sys, b)?;
        }
        if !(base_mass > 0.0) {
            return Err(Error::ZeroMass {
                cylinder: "B".into(),
            });
        }
        Ok(InducedMeasure {
            m: m.clone(),
            base_mass,
        })
    }

    pub fn mass(&self, ind: &InducedSystem, letters: &[usize]) -> Result<f64> {
        let k = ind.base_depth;
        if letters.len() >= k {
            if !ind.in_base(letters) {
                return Ok(0.0);
            }
            return Ok(self.m.mass(&ind.sys, letters)? / self.base_mass);
        }
        let mut acc = 0.0;
        for b in ind.base.iter().filter(|b| b.starts_with(letters)) {
            acc += self.m.mass(&ind.sys, b)?;
        }
        Ok(acc / self.base_mass)
    }

    pub fn source(&self) -> &M {
        &self.m
    }
}

/// `max_u |ν̃[u] - Σ_a ν̃[a·u]|` over base words `u` of length `depth`.
pub fn induced_invariance_residual(
    ind: &InducedSystem,
    nu: &InducedMeasure,
    depth: usize,
) -> Result<f64> {
    let depth = depth.max(ind.base_depth);
    let mut worst = 0.0f64;
    for u in ind.sys.word_letters(depth) {
        if !ind.in_base(&u) {
            continue;
        }
        let mut acc = 0.0;
        for i in ind.branches_at(&u) {
            let mut au = ind.blocks[i].block.clone();
            au.extend_from_slice(&u);
            acc += nu.mass(ind, &au)?;
        }
        worst = worst.max((nu.mass(ind, &u)? - acc).abs());
    }
    Ok(worst)
}

/// The θ-invariant probability obtained from `ν̃` by Kac's formula.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedMeasure {
    pub nu: M,
    /// `ν̃(N)`.
    pub normalizer: f64,
    /// `ν̃`-mass of `{N > n_max}`, which the lift misses.
    pub missing_mass: f64,
    pub tail_bound: f64,
    /// `max_w |ν[w] - ν(θ^{-1}[w])|` one level below the lift's depth.
    pub invariance_residual: f64,
    /// Invariance defect of `ν̃` under the induced map.
    pub induced_residual: f64,
}

/// `ν[w] = ν̃(N)^{-1} Σ_a Σ_{k < N(a)} ν̃(a ∩ θ^{-k}[w])` on depth-`depth` cylinders.
pub fn kac_lift(
    ind: &InducedSystem,
    nu_tilde: &InducedMeasure,
    depth: usize,
) -> Result<LiftedMeasure> {
    if depth == 0 {
        return Err(Error::DepthTooSmall {
            requested: 0,
            minimum: 1,
        });
    }
    if ind.spectral_radius >= 1.0 - 1e-12 {
        return Err(Error::NormalizerDiverges {
            spectral_radius: ind.spectral_radius,
        });
    }
    let sys = &ind.sys;
    let missing_mass = ind.tail_mass / ind.base_mass;
    let induced_residual = induced_invariance_residual(ind, nu_tilde, ind.base_depth + 1)?;
    if induced_residual > 1e-10 + missing_mass {
        return Err(Error::InvalidMeasure(format!(
            "induced measure is not invariant under the first-return map (defect {induced_residual:e})"
        )));
    }
    let count = sys.checked_count(depth, crate::transfer::WEAK_GIBBS_CAP)?;
    let mut weights = vec![0.0; count];
    let mut normalizer = 0.0;
    let mut failure = None;
    for b in &ind.blocks {
        let n = b.len();
        for x in &b.witnesses {
            let mass_x = nu_tilde.mass(ind, x)?;
            normalizer += n as f64 * mass_x;
            for k in 0..n {
                if k + depth <= x.len() {
                    weights[sys.index_of(&x[k..k + depth])] += mass_x;
                    continue;
                }
                let mut buf = x.clone();
                extend_all(
                    sys,
                    &mut buf,
                    k + depth,
                    &mut |full| match nu_tilde.mass(ind, full) {
                        Ok(v) => weights[sys.index_of(&full[k..])] += v,
                        Err(e) => {
                            failure.get_or_insert(e);
                        }
                    },
                );
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if !(normalizer > 0.0) {
        return Err(Error::ZeroMass {
            cylinder: "B".into(),
        });
    }
    for w in &mut weights {
        *w /= normalizer;
    }
    let nu = M::from_weights(sys, depth, weights)?;
    let invariance_residual = if depth >= 2 {
        shift_invariance_residual(sys, &nu, depth - 1)?
    } else {
        0.0
    };
    Ok(LiftedMeasure {
        nu,
        normalizer,
        missing_mass,
        tail_bound: ind.tail_bound(),
        invariance_residual,
        induced_residual,
    })
}

fn extend_all(
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
    let next: Vec<usize> = sys.successors(last).collect();
    for j in next {
        buf.push(j);
        extend_all(sys, buf, len, visit);
        buf.pop();
    }
}

/// `max_w |m[w] - Σ_j m[jw]|` over `w ∈ W^depth`.
pub fn shift_invariance_residual(sys: &IncidenceSystem, m: &M, depth: usize) -> Result<f64> {
    let lower = m.masses_at(sys, depth)?;
    let upper = m.masses_at(sys, depth + 1)?;
    let mut pre = vec![0.0; lower.len()];
    let mut i = 0;
    sys.visit_words(depth + 1, |w| {
        pre[sys.index_of(&w[1..])] += upper[i];
        i += 1;
    });
    Ok(lower
        .iter()
        .zip(&pre)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// The atoms of the induced partition attached to a cylinder: for `ω ∈ B`, the
/// inverse branches of the induced map at `ω`; off `B`, the blocks whose orbit
/// runs through `ω` before returning.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchFamily {
    pub cylinder: Vec<usize>,
    pub in_base: bool,
    /// `N(ω)`, or 0 on `B` when the value is not needed.
    pub return_time: usize,
    /// Indices into [`InducedSystem::blocks`].
    pub atoms: Vec<usize>,
}

impl BranchFamily {
    /// `θ^{N(ω)} ω` as a cylinder (`ω` itself on `B`).
    pub fn landing<'a>(&self, w: &'a [usize]) -> &'a [usize] {
        &w[self.return_time..]
    }
}

pub fn branch_family(ind: &InducedSystem, w: &[usize]) -> Result<BranchFamily> {
    let k = ind.base_depth;
    let shallow = |reason: &str| Error::ShallowCylinder {
        cylinder: letters_to_string(w),
        reason: reason.into(),
    };
    if w.len() < k {
        return Err(shallow("membership in B is not determined"));
    }
    if ind.in_base(w) {
        return Ok(BranchFamily {
            cylinder: w.to_vec(),
            in_base: true,
            return_time: 0,
            atoms: ind.branches_at(w).collect(),
        });
    }
    let n = ind
        .return_time(w)
        .ok_or_else(|| shallow("the return time is not determined"))?;
    let excursion = &w[..n];
    let x = &w[n..];
    let atoms = ind
        .branches_at(x)
        .filter(|&i| {
            let a = &ind.blocks[i].block;
            a.len() > n && a.ends_with(excursion)
        })
        .collect();
    Ok(BranchFamily {
        cylinder: w.to_vec(),
        in_base: false,
        return_time: n,
        atoms,
    })
}

/// `Σ_{a ∈ 𝒵(ω)} ν̃[a·x] / ν̃[x]` with `x = θ^{N(ω)} ω` (`x = ω` on `B`).
pub fn branch_sum(ind: &InducedSystem, nu: &InducedMeasure, w: &[usize]) -> Result<f64> {
    let fam = branch_family(ind, w)?;
    branch_sum_of(ind, nu, &fam, fam.landing(w), |_| true)
}

fn branch_sum_of(
    ind: &InducedSystem,
    nu: &InducedMeasure,
    fam: &BranchFamily,
    x: &[usize],
    keep: impl Fn(usize) -> bool,
) -> Result<f64> {
    let denom = nu.mass(ind, x)?;
    if !(denom > 0.0) {
        return Err(Error::ZeroMass {
            cylinder: letters_to_string(x),
        });
    }
    let mut acc = 0.0;
    for &i in fam.atoms.iter().filter(|&&i| keep(i)) {
        let mut ax = ind.blocks[i].block.clone();
        ax.extend_from_slice(x);
        acc += nu.mass(ind, &ax)?;
    }
    Ok(acc / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RnLift {
    /// `dν∘θ/dν` on the cylinder.
    pub value: f64,
    /// 1 when the cylinder lies in `B`, 2 otherwise.
    pub formula: u8,
    pub tail_bound: f64,
}

/// `dν∘θ/dν` of the Kac lift on the cylinder `[w]`, computed from `ν̃` alone.
pub fn rn_lift(ind: &InducedSystem, nu: &InducedMeasure, w: &[usize]) -> Result<RnLift> {
    let k = ind.base_depth;
    if w.len() < k + 1 {
        return Err(Error::ShallowCylinder {
            cylinder: letters_to_string(w),
            reason: "the shifted cylinder is not determined".into(),
        });
    }
    let n = ind.return_time(w).ok_or_else(|| Error::ShallowCylinder {
        cylinder: letters_to_string(w),
        reason: "the return time is not determined".into(),
    })?;
    let x = &w[n..];
    let shifted = branch_family(ind, &w[1..])?;
    let numerator = branch_sum_of(ind, nu, &shifted, x, |_| true)?;
    let (value, formula) = if ind.in_base(w) {
        let ratio = nu.mass(ind, x)? / nu.mass(ind, w)?;
        (numerator * ratio, 1)
    } else {
        let own = branch_family(ind, w)?;
        (numerator / branch_sum_of(ind, nu, &own, x, |_| true)?, 2)
    };
    Ok(RnLift {
        value,
        formula,
        tail_bound: ind.tail_bound(),
    })
}

/// `χ` on depth-`depth` cylinders, with both evaluations off `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiFunction {
    /// Values from the finite rewrite.
    pub chi: F,
    /// Values from the truncated sum over `Z(ω)`.
    pub chi_series: F,
    /// Largest relative gap between the two.
    pub route_gap: f64,
    /// Largest relative defect of the coboundary hypothesis on return blocks.
    pub hypothesis_defect: f64,
    pub tail_bound: f64,
}

/// Builds `χ` with `dν∘θ/dν = e^{H + log χ - log χ∘θ}` from the induced identity
/// `dν̃∘θ̃/dν̃ = e^{S_N H + log χ̃ - log χ̃∘θ̃}`.
pub fn chi_from_induced(
    ind: &InducedSystem,
    nu: &InducedMeasure,
    h: &F,
    chi_tilde: &F,
    depth: usize,
) -> Result<ChiFunction> {
    let sys = &ind.sys;
    let k = ind.base_depth;
    if depth < k + 1 || depth < chi_tilde.depth() || depth + 1 < h.depth() {
        return Err(Error::DepthTooSmall {
            requested: depth,
            minimum: (k + 1)
                .max(chi_tilde.depth())
                .max(h.depth().saturating_sub(1)),
        });
    }
    if chi_tilde.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidFunction("chi tilde must be positive".into()));
    }
    let hypothesis_defect = hypothesis_defect(ind, nu, h, chi_tilde)?;
    if let Some((block, defect)) = hypothesis_defect.worst {
        return Err(Error::Hypothesis { block, defect });
    }
    let birkhoff =
        |eta: &[usize], n: usize| (0..n).map(|t| h.value_at(sys, &eta[t..])).sum::<f64>();
    let mut series = Vec::new();
    let mut rewrite = Vec::new();
    let mut route_gap = 0.0f64;
    for w in sys.word_letters(depth) {
        if ind.in_base(&w) {
            let v = chi_tilde.value_at(sys, &w);
            series.push(v);
            rewrite.push(v);
            continue;
        }
        let fam = branch_family(ind, &w)?;
        let n = fam.return_time;
        if n + h.depth() > w.len() + 1 {
            return Err(Error::ShallowCylinder {
                cylinder: letters_to_string(&w),
                reason: "the potential is not determined along the excursion".into(),
            });
        }
        let mut sum = 0.0;
        for &i in &fam.atoms {
            let a = &ind.blocks[i].block;
            let mut eta = a[..a.len() - n].to_vec();
            let lead = eta.len();
            eta.extend_from_slice(&w);
            sum += (-birkhoff(&eta, lead) - chi_tilde.value_at(sys, &eta).ln()).exp();
        }
        let a_val = 1.0 / sum;
        let x = &w[n..];
        let landing = branch_family(ind, x)?;
        let outside: Vec<usize> = landing
            .atoms
            .iter()
            .copied()
            .filter(|i| !fam.atoms.contains(i))
            .collect();
        let complement = branch_sum_of(ind, nu, &landing, x, |i| outside.contains(&i))?;
        let b_val = (-birkhoff(&w, n) + chi_tilde.value_at(sys, x).ln()).exp() / (1.0 - complement);
        let gap = (a_val - b_val).abs() / a_val.abs().max(b_val.abs());
        if gap > ROUTE_TOL {
            return Err(Error::RouteMismatch {
                cylinder: letters_to_string(&w),
                gap,
            });
        }
        route_gap = route_gap.max(gap);
        series.push(a_val);
        rewrite.push(b_val);
    }
    Ok(ChiFunction {
        chi: F::from_values(sys, depth, rewrite)?,
        chi_series: F::from_values(sys, depth, series)?,
        route_gap,
        hypothesis_defect: hypothesis_defect.value,
        tail_bound: ind.tail_bound(),
    })
}

struct Defect {
    value: f64,
    worst: Option<(String, f64)>,
}

fn hypothesis_defect(
    ind: &InducedSystem,
    nu: &InducedMeasure,
    h: &F,
    chi_tilde: &F,
) -> Result<Defect> {
    let sys = &ind.sys;
    let k = ind.base_depth;
    let ctx = k
        .max(h.depth())
        .max(chi_tilde.depth())
        .max(nu.source().depth() + 1);
    let contexts: Vec<Vec<usize>> = sys
        .word_letters(ctx)
        .into_iter()
        .filter(|y| ind.in_base(y))
        .collect();
    let mut value = 0.0f64;
    let mut worst: Option<(String, f64)> = None;
    for b in &ind.blocks {
        let a = &b.block;
        for y in &contexts {
            let mut eta = a.clone();
            eta.extend_from_slice(y);
            if !sys.allowed(*a.last().unwrap(), y[0]) || ind.return_time(&eta) != Some(a.len()) {
                continue;
            }
            let lhs = nu.mass(ind, y)? / nu.mass(ind, &eta)?;
            let sum: f64 = (0..a.len()).map(|t| h.value_at(sys, &eta[t..])).sum();
            let rhs =
                (sum + chi_tilde.value_at(sys, &eta).ln() - chi_tilde.value_at(sys, y).ln()).exp();
            let defect = (lhs / rhs - 1.0).abs();
            value = value.max(defect);
            if defect > HYPOTHESIS_TOL && worst.as_ref().is_none_or(|(_, d)| defect > *d) {
                worst = Some((letters_to_string(a), defect));
            }
        }
    }
    Ok(Defect { value, worst })
}

/// `max_w |m[θw]/m[w] - e^{H(w)} χ(w)/χ(θw)|` over `w ∈ W^depth` with `m[w] > 0`.
pub fn coboundary_residual(
    sys: &IncidenceSystem,
    m: &M,
    h: &F,
    chi: &F,
    depth: usize,
) -> Result<f64> {
    if depth < chi.depth() + 1 || depth < h.depth() {
        return Err(Error::DepthTooSmall {
            requested: depth,
            minimum: (chi.depth() + 1).max(h.depth()),
        });
    }
    let mut worst = 0.0f64;
    for w in sys.word_letters(depth) {
        let below = m.mass(sys, &w)?;
        if !(below > 0.0) {
            continue;
        }
        let lhs = m.mass(sys, &w[1..])? / below;
        let rhs = h.value_at(sys, &w).exp() * chi.value_at(sys, &w) / chi.value_at(sys, &w[1..]);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// `max |log ν̃[θ̃ η]/ν̃[η] - Σ_{k<N} log ν[θ^{k+1} η]/ν[θ^k η]|` over block cylinders
/// extended by `extra` letters.
pub fn chain_rule_residual(
    ind: &InducedSystem,
    nu_tilde: &InducedMeasure,
    lifted: &M,
    extra: usize,
) -> Result<f64> {
    let sys = &ind.sys;
    let mut worst = 0.0f64;
    for b in &ind.blocks {
        let n = b.len();
        for x in &b.witnesses {
            let mut buf = x.clone();
            let target = (x.len() + extra).min(lifted.depth());
            if target < x.len() {
                continue;
            }
            let mut failure = None;
            extend_all(sys, &mut buf, target, &mut |eta| {
                let res = (|| -> Result<f64> {
                    let induced = (nu_tilde.mass(ind, &eta[n..])? / nu_tilde.mass(ind, eta)?).ln();
                    let mut sum = 0.0;
                    for t in 0..n {
                        sum +=
                            (lifted.mass(sys, &eta[t + 1..])? / lifted.mass(sys, &eta[t..])?).ln();
                    }
                    Ok((induced - sum).abs())
                })();
                match res {
                    Ok(v) => worst = worst.max(v),
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{eigen_data, rn_derivative_at};
    use proptest::prelude::*;

    fn parry() -> (IncidenceSystem, M, Vec<f64>, Vec<Vec<f64>>) {
        let sys = IncidenceSystem::golden_mean();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let p = vec![vec![1.0 / phi, 1.0 / (phi * phi)], vec![1.0, 0.0]];
        let pi0 = phi * phi / (1.0 + phi * phi);
        let pi = vec![pi0, 1.0 - pi0];
        let m = M::markov(&sys, &pi, &p).unwrap();
        (sys, m, pi, p)
    }

    fn base(sys: &IncidenceSystem, letters: &[&str]) -> Vec<Word> {
        letters
            .iter()
            .map(|s| Word::parse(sys, s).unwrap())
            .collect()
    }

    #[test]
    fn golden_mean_has_two_return_blocks() {
        let (sys, m, _, _) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let blocks: Vec<String> = ind
            .blocks()
            .iter()
            .map(|b| letters_to_string(&b.block))
            .collect();
        assert_eq!(blocks, ["0", "01"]);
        assert_eq!(ind.tail_mass(), 0.0);
        assert!(ind.spectral_radius() < 1e-12);
    }

    #[test]
    fn whole_space_base_is_trivial() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = M::bernoulli(&sys, &[0.3, 0.7]).unwrap();
        let ind = build_induced(&sys, &base(&sys, &["0", "1"]), &m, 10, 1e-12).unwrap();
        assert!(ind.blocks().iter().all(|b| b.len() == 1));
        let nt = InducedMeasure::restrict(&ind, &m).unwrap();
        let lift = kac_lift(&ind, &nt, 3).unwrap();
        assert!((lift.normalizer - 1.0).abs() < 1e-15);
        for (a, b) in lift.nu.weights().iter().zip(m.masses_at(&sys, 3).unwrap()) {
            assert!((a - b).abs() < 1e-15);
        }
        let w = [0, 1, 1];
        assert!((rn_lift(&ind, &nt, &w).unwrap().value - 1.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn kac_round_trip_and_normalizer() {
        let (sys, m, _, _) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let nt = InducedMeasure::restrict(&ind, &m).unwrap();
        let lift = kac_lift(&ind, &nt, 4).unwrap();
        for (a, b) in lift.nu.weights().iter().zip(m.masses_at(&sys, 4).unwrap()) {
            assert!((a - b).abs() < 1e-14);
        }
        let nu_b = lift.nu.mass(&sys, &[0]).unwrap();
        assert!((lift.normalizer * nu_b - 1.0).abs() < 1e-14);
        assert!(lift.invariance_residual < 1e-15);
        assert!(chain_rule_residual(&ind, &nt, &lift.nu, 1).unwrap() < 1e-13);
    }

    #[test]
    fn rn_lift_matches_markov_derivative() {
        let (sys, m, pi, p) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let nt = InducedMeasure::restrict(&ind, &m).unwrap();
        let mut formulas = [0, 0];
        for w in sys.word_letters(4) {
            let got = rn_lift(&ind, &nt, &w).unwrap();
            let want = pi[w[1]] / (pi[w[0]] * p[w[0]][w[1]]);
            assert!((got.value - want).abs() < 1e-12, "{w:?}");
            formulas[got.formula as usize - 1] += 1;
        }
        assert!(formulas[0] > 0 && formulas[1] > 0);
    }

    #[test]
    fn branch_sums_on_base_are_one() {
        let (sys, m, _, _) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let nt = InducedMeasure::restrict(&ind, &m).unwrap();
        for w in sys.word_letters(3).into_iter().filter(|w| w[0] == 0) {
            assert!((branch_sum(&ind, &nt, &w).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(matches!(
            branch_family(&ind, &[1]),
            Err(Error::ShallowCylinder { .. })
        ));
    }

    #[test]
    fn chi_routes_agree_for_a_gauged_potential() {
        let (sys, m, _, _) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let nt = InducedMeasure::restrict(&ind, &m).unwrap();
        let rn = rn_derivative_at(&sys, &m, 2).unwrap().map(f64::ln);
        let g = F::from_values(&sys, 1, vec![0.3, -0.2]).unwrap();
        let g_shift = g.compose_shift(&sys, 1);
        let h = F::from_fn(&sys, 2, |w| {
            rn.value_at(&sys, w) + g.value_at(&sys, w) - g_shift.value_at(&sys, w)
        });
        let chi_tilde = g.map(|v| (-v).exp());
        let chi = chi_from_induced(&ind, &nt, &h, &chi_tilde, 3).unwrap();
        assert!(chi.route_gap < 1e-12);
        assert!(chi.hypothesis_defect < 1e-12);
        for w in sys.word_letters(3) {
            let want = (-g.value_at(&sys, &w)).exp();
            assert!((chi.chi.value_at(&sys, &w) - want).abs() < 1e-12);
        }
        assert!(coboundary_residual(&sys, &m, &h, &chi.chi, 4).unwrap() < 1e-12);
        let wrong = F::constant(&sys, 2, 0.1);
        assert!(matches!(
            chi_from_induced(&ind, &nt, &wrong, &chi_tilde, 3),
            Err(Error::Hypothesis { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let (sys, m, _, _) = parry();
        let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 1e-12).unwrap();
        let back = InducedSystem::from_json(&ind.to_json()).unwrap();
        assert_eq!(back.blocks(), ind.blocks());
        assert_eq!(back.base(), ind.base());
    }

    #[test]
    fn truncation_is_reported() {
        let sys = IncidenceSystem::full_shift(2).unwrap();
        let m = M::bernoulli(&sys, &[0.5, 0.5]).unwrap();
        match build_induced(&sys, &base(&sys, &["1"]), &m, 10, 1e-8) {
            Err(Error::Truncation {
                spectral_radius, ..
            }) => {
                assert!((spectral_radius - 0.5).abs() < 1e-9)
            }
            other => panic!("expected truncation, got {other:?}"),
        }
        let ind = build_induced(&sys, &base(&sys, &["1"]), &m, 10, 1.0).unwrap();
        assert_eq!(ind.blocks().len(), 10);
        assert!((ind.tail_mass() - 0.5f64.powi(11)).abs() < 1e-15);
        assert!(ind.tail_bound() >= ind.tail_mass() / ind.base_mass());
    }

    proptest! {
        #[test]
        fn lift_of_restriction_is_identity(p0 in 0.2f64..0.8, b in 0usize..2) {
            let sys = IncidenceSystem::full_shift(2).unwrap();
            let m = M::bernoulli(&sys, &[p0, 1.0 - p0]).unwrap();
            let letter = if b == 0 { "0" } else { "1" };
            let ind = build_induced(&sys, &base(&sys, &[letter]), &m, 200, 1.0).unwrap();
            let nt = InducedMeasure::restrict(&ind, &m).unwrap();
            let lift = kac_lift(&ind, &nt, 3).unwrap();
            let nu_b = lift.nu.mass(&sys, &[b]).unwrap();
            prop_assert!((lift.normalizer * nu_b - 1.0).abs() < 1e-8);
            for (x, y) in lift.nu.weights().iter().zip(m.masses_at(&sys, 3).unwrap()) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn gibbs_lift_is_shift_invariant(c in -1.0f64..1.0) {
            let sys = IncidenceSystem::golden_mean();
            let f = F::from_values(&sys, 2, vec![c, -c, 0.4]).unwrap();
            let m = eigen_data(&sys, &f).unwrap().gibbs(&sys).unwrap();
            let ind = build_induced(&sys, &base(&sys, &["0"]), &m, 40, 0.0).unwrap();
            let nt = InducedMeasure::restrict(&ind, &m).unwrap();
            let lift = kac_lift(&ind, &nt, 4).unwrap();
            prop_assert!(lift.invariance_residual < 1e-11);
            for (x, y) in lift.nu.weights().iter().zip(m.masses_at(&sys, 4).unwrap()) {
                prop_assert!((x - y).abs() < 1e-11);
            }
        }
    }
}
