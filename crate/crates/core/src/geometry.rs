//! One-dimensional Möbius systems: Schottky maps on the circle, a parabolic
//! interval map, the potential `J = log|T'|` they induce on their coding,
//! and a box-counting oracle for their limit sets.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::spectrum::bowen_root;
use crate::symbolic::{letters_to_string, schottky_inverse, IncidenceSystem};

type F = LocallyConstantFunction<f64>;

const TWO_PI: f64 = 2.0 * PI;
/// Slack used when testing containment of computed intervals.
const CONTAINMENT_TOL: f64 = 1e-9;

/// `x ↦ (ax + b)/(cx + d)`, stored with `|ad - bc| = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusMap {
    /// Normalizes the coefficients so that the determinant is `±1`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::Geometry(format!(
                "Möbius coefficients ({a}, {b}, {c}, {d}) are degenerate"
            )));
        }
        let k = det.abs().sqrt().recip();
        Ok(MoebiusMap {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        })
    }

    pub fn identity() -> Self {
        MoebiusMap {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    /// `x ↦ kx`.
    pub fn scaling(k: f64) -> Result<Self> {
        Self::new(k, 0.0, 0.0, 1.0)
    }

    /// Rotation of the circle by `angle`, in the coordinate `x = tan(θ/2)`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        MoebiusMap {
            a: c,
            b: s,
            c: -s,
            d: c,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return if self.c == 0.0 {
                f64::INFINITY
            } else {
                self.a / self.c
            };
        }
        let den = self.c * x + self.d;
        if den == 0.0 {
            f64::INFINITY
        } else {
            (self.a * x + self.b) / den
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let den = self.c * x + self.d;
        self.det() / (den * den)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        MoebiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> Self {
        let det = self.det();
        MoebiusMap {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        }
    }

    /// Equality as maps, i.e. up to the sign of the coefficient vector.
    pub fn same_map(&self, other: &Self, tol: f64) -> bool {
        let close = |s: f64| {
            (self.a - s * other.a).abs() < tol
                && (self.b - s * other.b).abs() < tol
                && (self.c - s * other.c).abs() < tol
                && (self.d - s * other.d).abs() < tol
        };
        close(1.0) || close(-1.0)
    }

    /// Image of the angle `θ` under the induced map of the circle `x = tan(θ/2)`,
    /// reduced to `(-π, π]`.
    pub fn apply_angle(&self, theta: f64) -> f64 {
        let (p, q) = (0.5 * theta).sin_cos();
        let (p2, q2) = (self.a * p + self.b * q, self.c * p + self.d * q);
        reduce_angle(2.0 * p2.atan2(q2))
    }

    /// `|dθ'/dθ|` for the induced circle map.
    pub fn angle_derivative(&self, theta: f64) -> f64 {
        let (p, q) = (0.5 * theta).sin_cos();
        let (p2, q2) = (self.a * p + self.b * q, self.c * p + self.d * q);
        self.det().abs() / (p2 * p2 + q2 * q2)
    }
}

fn reduce_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TWO_PI);
    if t > PI {
        t -= TWO_PI;
    }
    t
}

/// How interval endpoints are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Coordinates {
    /// Points of the real line.
    Line,
    /// Angles on the circle `ℝ ∪ {∞}`, `x = tan(θ/2)`; arcs run counterclockwise from `lo` to `hi`.
    #[default]
    Circle,
}

/// A closed interval, or a counterclockwise arc with `lo < hi < lo + 2π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn contains(&self, coords: Coordinates, x: f64, tol: f64) -> bool {
        match coords {
            Coordinates::Line => x >= self.lo - tol && x <= self.hi + tol,
            Coordinates::Circle => {
                let off = (x - self.lo).rem_euclid(TWO_PI);
                off <= self.diameter() + tol || off >= TWO_PI - tol
            }
        }
    }

    fn contains_interval(&self, coords: Coordinates, other: &Interval, tol: f64) -> bool {
        match coords {
            Coordinates::Line => other.lo >= self.lo - tol && other.hi <= self.hi + tol,
            Coordinates::Circle => {
                let off = (other.lo - self.lo).rem_euclid(TWO_PI);
                let off = if off > TWO_PI - tol {
                    off - TWO_PI
                } else {
                    off
                };
                off >= -tol && off + other.diameter() <= self.diameter() + tol
            }
        }
    }

    fn distance_to(&self, coords: Coordinates, x: f64) -> f64 {
        if self.contains(coords, x, 0.0) {
            return 0.0;
        }
        match coords {
            Coordinates::Line => (self.lo - x).max(x - self.hi),
            Coordinates::Circle => {
                let d_lo = (x - self.lo).rem_euclid(TWO_PI);
                let d_hi = (x - self.hi).rem_euclid(TWO_PI);
                (TWO_PI - d_lo).min(d_hi)
            }
        }
    }
}

/// A Markov map given by Möbius inverse branches: branch `i` maps `T(I_i)`
/// back onto `I_i`, and the cylinder of `w` is `g_{w_0}(cylinder of θw)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMap {
    coordinates: Coordinates,
    sys: IncidenceSystem,
    branches: Vec<MoebiusMap>,
    intervals: Vec<Interval>,
}

/// `J = log|T'|` at cylinder midpoints, with the geometric resolution it was built at.
#[derive(Clone, Debug, PartialEq)]
pub struct BowenSeriesPotential {
    pub j: F,
    /// Cylinder diameters in lexicographic word order.
    pub diameters: Vec<f64>,
    pub max_diameter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub depth: usize,
    pub delta: f64,
    /// The same root one level deeper.
    pub delta_next: f64,
}

impl MarkovMap {
    pub fn new(
        coordinates: Coordinates,
        sys: IncidenceSystem,
        branches: Vec<MoebiusMap>,
        intervals: Vec<Interval>,
    ) -> Result<Self> {
        let n = sys.alphabet_size();
        if branches.len() != n || intervals.len() != n {
            return Err(Error::Geometry(format!(
                "need {n} branches and intervals, got {} and {}",
                branches.len(),
                intervals.len()
            )));
        }
        for (i, iv) in intervals.iter().enumerate() {
            let bad = !(iv.lo.is_finite() && iv.hi.is_finite() && iv.hi > iv.lo)
                || (coordinates == Coordinates::Circle && iv.diameter() >= TWO_PI);
            if bad {
                return Err(Error::Geometry(format!(
                    "interval {i} = [{}, {}] is malformed",
                    iv.lo, iv.hi
                )));
            }
        }
        let map = MarkovMap {
            coordinates,
            sys,
            branches,
            intervals,
        };
        map.check_separation()?;
        map.check_markov()?;
        Ok(map)
    }

    pub fn coordinates(&self) -> Coordinates {
        self.coordinates
    }

    pub fn system(&self) -> &IncidenceSystem {
        &self.sys
    }

    pub fn branches(&self) -> &[MoebiusMap] {
        &self.branches
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    fn check_separation(&self) -> Result<()> {
        let n = self.intervals.len();
        for i in 0..n {
            for k in i + 1..n {
                let (a, b) = (self.intervals[i], self.intervals[k]);
                let overlap = match self.coordinates {
                    Coordinates::Line => a.lo < b.hi && b.lo < a.hi,
                    Coordinates::Circle => {
                        let off = (b.lo - a.lo).rem_euclid(TWO_PI);
                        off < a.diameter() || off + b.diameter() > TWO_PI
                    }
                };
                if overlap {
                    return Err(Error::Geometry(format!("intervals {i} and {k} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Every allowed two-letter cylinder must land inside its first interval.
    fn check_markov(&self) -> Result<()> {
        for i in 0..self.sys.alphabet_size() {
            for j in self.sys.successors(i) {
                let iv = self.map_interval(&self.branches[i], &self.intervals[j]);
                if !self.intervals[i].contains_interval(self.coordinates, &iv, CONTAINMENT_TOL) {
                    return Err(Error::Geometry(format!(
                        "branch {i} does not map interval {j} into interval {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn map_interval(&self, g: &MoebiusMap, iv: &Interval) -> Interval {
        match self.coordinates {
            Coordinates::Line => {
                let (x, y) = (g.apply(iv.lo), g.apply(iv.hi));
                Interval::new(x.min(y), x.max(y))
            }
            Coordinates::Circle => {
                let (mut x, mut y) = (g.apply_angle(iv.lo), g.apply_angle(iv.hi));
                if g.det() < 0.0 {
                    std::mem::swap(&mut x, &mut y);
                }
                if y < x {
                    y += TWO_PI;
                }
                Interval::new(x, y)
            }
        }
    }

    /// Geometric interval of the cylinder `[letters]`.
    pub fn cylinder_interval(&self, letters: &[usize]) -> Result<Interval> {
        if letters.is_empty() || !self.sys.is_admissible(letters) {
            return Err(Error::InvalidWord {
                word: letters.to_vec(),
                reason: "not an admissible nonempty word".into(),
            });
        }
        let n = letters.len();
        let mut iv = self.intervals[letters[n - 1]];
        for &a in letters[..n - 1].iter().rev() {
            iv = self.map_interval(&self.branches[a], &iv);
        }
        Ok(iv)
    }

    pub fn cylinder_intervals(&self, depth: usize) -> Result<Vec<(Vec<usize>, Interval)>> {
        let mut out = Vec::new();
        let mut failure = None;
        self.sys
            .visit_words(depth, |w| match self.cylinder_interval(w) {
                Ok(iv) => out.push((w.to_vec(), iv)),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            });
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// `T` on the interval of `letter`.
    pub fn apply_t(&self, letter: usize, x: f64) -> f64 {
        let t = self.branches[letter].inverse();
        match self.coordinates {
            Coordinates::Line => t.apply(x),
            Coordinates::Circle => t.apply_angle(x),
        }
    }

    /// `|T'(x)|` on the interval of `letter`.
    pub fn expansion(&self, letter: usize, x: f64) -> f64 {
        let t = self.branches[letter].inverse();
        match self.coordinates {
            Coordinates::Line => t.derivative(x).abs(),
            Coordinates::Circle => t.angle_derivative(x),
        }
    }

    /// `log|(T^n)'(x)|` along the orbit of `x` coded by `letters`.
    pub fn log_derivative_along(&self, letters: &[usize], x: f64) -> f64 {
        let mut y = x;
        let mut acc = 0.0;
        for &a in letters {
            acc += self.expansion(a, y).ln();
            y = self.apply_t(a, y);
        }
        acc
    }

    /// `J(w) = log|T'|` at the midpoint of the depth-`d` cylinder of `w`.
    pub fn bowen_series_potential(&self, depth: usize) -> Result<BowenSeriesPotential> {
        if depth == 0 {
            return Err(Error::DepthTooSmall {
                requested: 0,
                minimum: 1,
            });
        }
        let cyl = self.cylinder_intervals(depth)?;
        let values: Vec<f64> = cyl
            .iter()
            .map(|(w, iv)| self.expansion(w[0], iv.midpoint()).ln())
            .collect();
        let diameters: Vec<f64> = cyl.iter().map(|(_, iv)| iv.diameter()).collect();
        let max_diameter = diameters.iter().copied().fold(0.0, f64::max);
        Ok(BowenSeriesPotential {
            j: F::from_values(&self.sys, depth, values)?,
            diameters,
            max_diameter,
        })
    }

    /// `max |J_{d+1}(w) - J_d(w_{<d})|` over depth-`(d+1)` words.
    pub fn depth_increment(&self, depth: usize) -> Result<f64> {
        let coarse = self.bowen_series_potential(depth)?.j;
        let fine = self.bowen_series_potential(depth + 1)?.j;
        let mut worst = 0.0f64;
        self.sys.visit_words(depth + 1, |w| {
            worst = worst.max((fine.value_at(&self.sys, w) - coarse.value_at(&self.sys, w)).abs());
        });
        Ok(worst)
    }

    /// How far `T` moves cylinder midpoints outside the cylinder of the shifted word.
    pub fn coding_defect(&self, depth: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for (w, iv) in self.cylinder_intervals(depth)? {
            let image = self.apply_t(w[0], iv.midpoint());
            let target = if w.len() > 1 {
                self.cylinder_interval(&w[1..])?
            } else {
                continue;
            };
            worst = worst.max(target.distance_to(self.coordinates, image));
        }
        Ok(worst)
    }

    /// Bowen root of `J_d`, reported with the root for `J_{d+1}`.
    pub fn limit_set_dimension(&self, depth: usize) -> Result<DimensionEstimate> {
        let delta = bowen_root(&self.sys, &self.bowen_series_potential(depth)?.j)?;
        let delta_next = bowen_root(&self.sys, &self.bowen_series_potential(depth + 1)?.j)?;
        Ok(DimensionEstimate {
            depth,
            delta,
            delta_next,
        })
    }

    /// Least-squares slope of `log N(ε)` against `log(1/ε)`, where `N(ε)` counts
    /// the `ε`-boxes meeting the union of depth-`d` cylinder intervals.
    pub fn boxcount_dimension(&self, depth: usize, scales: &[f64]) -> Result<f64> {
        if scales.len() < 3 {
            return Err(Error::DegenerateRegression(scales.len()));
        }
        if scales.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("box scales must be positive".into()));
        }
        let pieces = self.unrolled_pieces(depth)?;
        let points: Vec<(f64, f64)> = scales
            .iter()
            .map(|&eps| ((1.0 / eps).ln(), (count_boxes(&pieces, eps) as f64).ln()))
            .collect();
        Ok(least_squares_slope(&points))
    }

    /// Cylinder intervals as plain real ranges; arcs are reduced to `[0, 2π)` and split at `2π`.
    fn unrolled_pieces(&self, depth: usize) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for (_, iv) in self.cylinder_intervals(depth)? {
            match self.coordinates {
                Coordinates::Line => out.push((iv.lo, iv.hi)),
                Coordinates::Circle => {
                    let lo = iv.lo.rem_euclid(TWO_PI);
                    let hi = lo + iv.diameter();
                    if hi <= TWO_PI {
                        out.push((lo, hi));
                    } else {
                        out.push((lo, TWO_PI));
                        out.push((0.0, hi - TWO_PI));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Geometric scales `ε_k = ε_max * ratio^k`, `k = 0..count`.
    pub fn geometric_scales(eps_max: f64, ratio: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| eps_max * ratio.powi(k as i32)).collect()
    }

    /// Writes `word,lo,hi,diameter,J` rows for the depth-`d` cylinders.
    pub fn write_intervals_csv<W: Write>(&self, depth: usize, out: W) -> Result<()> {
        let pot = self.bowen_series_potential(depth)?;
        let mut wr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["word", "lo", "hi", "diameter", "J"])
            .map_err(io)?;
        for ((w, iv), &j) in self.cylinder_intervals(depth)?.iter().zip(pot.j.values()) {
            wr.write_record([
                letters_to_string(w),
                fmt12(iv.lo),
                fmt12(iv.hi),
                fmt12(iv.diameter()),
                fmt12(j),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Twelve significant digits in scientific notation.
pub(crate) fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn count_boxes(pieces: &[(f64, f64)], eps: f64) -> usize {
    let mut ranges: Vec<(i64, i64)> = pieces
        .iter()
        .map(|&(lo, hi)| ((lo / eps).floor() as i64, (hi / eps).floor() as i64))
        .collect();
    ranges.sort_unstable();
    let mut count = 0usize;
    let mut current: Option<(i64, i64)> = None;
    for (a, b) in ranges {
        match current {
            Some((lo, hi)) if a <= hi => current = Some((lo, hi.max(b))),
            Some((lo, hi)) => {
                count += (hi - lo + 1) as usize;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((lo, hi)) = current {
        count += (hi - lo + 1) as usize;
    }
    count
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// JSON form of a Schottky system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchottkySpec {
    /// `g_0, …, g_{𝔤-1}` followed by their inverses.
    pub generators: Vec<MoebiusMap>,
    pub intervals: Vec<[f64; 2]>,
    #[serde(default)]
    pub coordinates: Coordinates,
}

/// A Schottky group of genus `𝔤` acting on the circle, with its Bowen–Series map.
#[derive(Clone, Debug, PartialEq)]
pub struct SchottkySystem {
    genus: usize,
    map: MarkovMap,
}

impl SchottkySystem {
    pub fn from_spec(spec: &SchottkySpec) -> Result<Self> {
        let n = spec.generators.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Geometry(format!(
                "need an even, positive number of generators, got {n}"
            )));
        }
        let genus = n / 2;
        let generators = spec
            .generators
            .iter()
            .map(|g| MoebiusMap::new(g.a, g.b, g.c, g.d))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..genus {
            if !generators[i + genus].same_map(&generators[i].inverse(), 1e-9) {
                return Err(Error::Geometry(format!(
                    "generator {} is not the inverse of generator {i}",
                    i + genus
                )));
            }
        }
        let intervals = spec
            .intervals
            .iter()
            .map(|&[lo, hi]| Interval::new(lo, hi))
            .collect();
        let map = MarkovMap::new(
            spec.coordinates,
            IncidenceSystem::schottky(genus)?,
            generators,
            intervals,
        )?;
        let sch = SchottkySystem { genus, map };
        sch.check_separation_condition()?;
        Ok(sch)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SchottkySpec =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> SchottkySpec {
        SchottkySpec {
            generators: self.map.branches.clone(),
            intervals: self.map.intervals.iter().map(|iv| [iv.lo, iv.hi]).collect(),
            coordinates: self.map.coordinates,
        }
    }

    /// Two hyperbolic generators with axes at right angles; the four arcs of
    /// half-width `half_width < π/4` are centred at `0, π/2, π, 3π/2` and are the
    /// isometric circles of the generators.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < PI / 4.0) {
            return Err(Error::Geometry(format!(
                "half width {half_width} must lie in (0, π/4)"
            )));
        }
        let k = (0.5 * half_width).tan().powi(2);
        let a = MoebiusMap::scaling(k)?;
        let r = MoebiusMap::rotation(0.5 * PI);
        let b = r.compose(&a).compose(&r.inverse());
        let arc = |c: f64| [c - half_width, c + half_width];
        let spec = SchottkySpec {
            generators: vec![a, b, a.inverse(), b.inverse()],
            intervals: vec![arc(0.0), arc(0.5 * PI), arc(PI), arc(-0.5 * PI)],
            coordinates: Coordinates::Circle,
        };
        Self::from_spec(&spec)
    }

    /// The bundled example used by the dimension checks.
    pub fn example() -> Self {
        Self::symmetric(PI / 6.0).expect("bundled Schottky example is valid")
    }

    /// `g_i` maps the complement of the partner interval into `I_i`, and `T`
    /// expands at every interval midpoint.
    fn check_separation_condition(&self) -> Result<()> {
        let m = &self.map;
        let n = 2 * self.genus;
        for i in 0..n {
            let partner = m.intervals[schottky_inverse(i, self.genus)];
            let complement = Interval::new(partner.hi, partner.lo + TWO_PI);
            let samples = 16;
            for s in 0..=samples {
                let theta = complement.lo + complement.diameter() * s as f64 / samples as f64;
                let image = match m.coordinates {
                    Coordinates::Circle => m.branches[i].apply_angle(theta),
                    Coordinates::Line => m.branches[i].apply(theta),
                };
                if !m.intervals[i].contains(m.coordinates, image, CONTAINMENT_TOL) {
                    return Err(Error::Geometry(format!(
                        "generator {i} does not map the complement of interval {} into interval {i}",
                        schottky_inverse(i, self.genus)
                    )));
                }
            }
            if m.expansion(i, m.intervals[i].midpoint()) <= 1.0 {
                return Err(Error::Geometry(format!(
                    "T does not expand at the midpoint of interval {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn map(&self) -> &MarkovMap {
        &self.map
    }

    pub fn system(&self) -> &IncidenceSystem {
        &self.map.sys
    }
}

/// The middle-thirds Cantor set as a two-branch linear system on `[0, 1]`.
pub fn cantor_system() -> MarkovMap {
    let g0 = MoebiusMap::new(1.0, 0.0, 0.0, 3.0).expect("valid");
    let g1 = MoebiusMap::new(1.0, 2.0, 0.0, 3.0).expect("valid");
    MarkovMap::new(
        Coordinates::Line,
        IncidenceSystem::full_shift(2).expect("valid"),
        vec![g0, g1],
        vec![Interval::new(0.0, 1.0 / 3.0), Interval::new(2.0 / 3.0, 1.0)],
    )
    .expect("Cantor system is valid")
}

/// `x ↦ x/(1-x)` on `[0, 1/2]` and `x ↦ (1-x)/x` on `[1/2, 1]`, neutral at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FareyTypeSystem {
    map: MarkovMap,
}

impl FareyTypeSystem {
    pub fn map(&self) -> &MarkovMap {
        &self.map
    }

    pub fn system(&self) -> &IncidenceSystem {
        &self.map.sys
    }

    /// Letters of the designated inducing base: the second branch.
    pub fn base(&self) -> Vec<usize> {
        vec![1]
    }

    pub fn neutral_point(&self) -> f64 {
        0.0
    }

    /// `log|(T^{j+1})'|` at the midpoint of the cylinder `[1 0^j 1]`, i.e. the
    /// induced potential on the return block `1 0^j`.
    pub fn induced_log_derivative(&self, j: usize) -> Result<f64> {
        let mut w = vec![1];
        w.extend(std::iter::repeat_n(0, j));
        w.push(1);
        let mid = self.map.cylinder_interval(&w)?.midpoint();
        Ok(self.map.log_derivative_along(&w[..j + 1], mid))
    }
}

pub fn farey_type_system() -> FareyTypeSystem {
    let g0 = MoebiusMap::new(1.0, 0.0, 1.0, 1.0).expect("valid");
    let g1 = MoebiusMap::new(0.0, 1.0, 1.0, 1.0).expect("valid");
    let map = MarkovMap::new(
        Coordinates::Line,
        IncidenceSystem::full_shift(2).expect("valid"),
        vec![g0, g1],
        vec![Interval::new(0.0, 0.5), Interval::new(0.5, 1.0)],
    )
    .expect("Farey system is valid");
    FareyTypeSystem { map }
}
