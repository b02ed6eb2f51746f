//! Batch front end: JSON run configurations, subcommand dispatch and
//! CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::geometry::{
    cantor_system, farey_type_system, fmt12, MarkovMap, SchottkySpec, SchottkySystem,
};
use crate::inducing::{
    branch_sum, build_induced, chi_from_induced, coboundary_residual, kac_lift, rn_lift,
    InducedMeasure, DEFAULT_MAX_TAIL, DEFAULT_N_MAX,
};
use crate::kms::check_suite;
use crate::measure::CylinderMeasure;
use crate::rn_rep::RnRepContext;
use crate::spectrum::{bowen_root, equilibrium, linspace, normalized_potential, spectrum_sweep};
use crate::symbolic::{letters_to_string, IncidenceSystem, Word};
use crate::transfer::{
    eigen_data, eigenmeasure, gibbs_measure, lstar_residual, rn_derivative_at, weak_gibbs_profile,
};

type F = LocallyConstantFunction<f64>;
type M = CylinderMeasure<f64>;

#[derive(Debug, Parser)]
#[command(
    name = "ckthermo",
    version,
    about = "Thermodynamic formalism and Cuntz–Krieger checks on subshifts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts; printed to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for sampled check suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Pressure table `P(-s f)` with eigen data.
    Pressure,
    /// Bowen root, with the box-counting cross-check on geometric systems.
    Dimension,
    /// Multifractal sweep over a `q` grid.
    Spectrum,
    /// KMS check suite.
    KmsCheck,
    /// Inducing and Kac-lift verdicts.
    KacCheck,
    /// Relations of the Radon–Nikodym representation.
    CkVerify,
    /// Cylinder intervals of a geometric system.
    Schottky,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub pressure: PressureParams,
    #[serde(default)]
    pub dimension: DimensionParams,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default)]
    pub kms: KmsParams,
    #[serde(default)]
    pub kac: KacParams,
    #[serde(default)]
    pub ck_verify: CkParams,
    #[serde(default)]
    pub schottky: IntervalParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Subshift { matrix: Vec<Vec<u8>> },
    FullShift { letters: usize },
    GoldenMean,
    Schottky(SchottkySpec),
    SymmetricSchottky { half_width: f64 },
    Cantor,
    Farey,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    /// Values on `W^depth` in lexicographic order.
    Values {
        depth: usize,
        values: Vec<f64>,
    },
    Words {
        depth: usize,
        values: BTreeMap<String, f64>,
    },
    /// `log|T'|` at cylinder midpoints of a geometric system.
    BowenSeries {
        depth: usize,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Measure of maximal entropy.
    Parry,
    Bernoulli {
        probs: Vec<f64>,
    },
    Markov {
        pi: Vec<f64>,
        p: Vec<Vec<f64>>,
    },
    /// Equilibrium measure of the potential.
    Gibbs,
    /// Equilibrium measure of `-s f`.
    Equilibrium {
        s: f64,
    },
    /// Eigenmeasure of `L*_{-β f}`.
    Eigen,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureParams {
    pub s: Vec<f64>,
}

impl Default for PressureParams {
    fn default() -> Self {
        PressureParams { s: vec![0.0, 1.0] }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionParams {
    /// Depth of `J` for geometric systems.
    pub depth: usize,
    pub box_depth: usize,
    /// Box sizes; chosen from the cylinder diameters when absent.
    pub scales: Option<Vec<f64>>,
}

impl Default for DimensionParams {
    fn default() -> Self {
        DimensionParams {
            depth: 6,
            box_depth: 8,
            scales: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            q_min: -1.0,
            q_max: 1.0,
            points: 21,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmsParams {
    pub beta: f64,
    pub samples: usize,
}

impl Default for KmsParams {
    fn default() -> Self {
        KmsParams {
            beta: 1.0,
            samples: 200,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacParams {
    /// Base cylinders; the designated base of the system when absent.
    pub base: Option<Vec<String>>,
    pub n_max: usize,
    pub max_tail: f64,
    /// Depth of the lifted measure.
    pub depth: usize,
    pub tolerances: KacTolerances,
}

impl Default for KacParams {
    fn default() -> Self {
        KacParams {
            base: None,
            n_max: DEFAULT_N_MAX,
            max_tail: DEFAULT_MAX_TAIL,
            depth: 4,
            tolerances: KacTolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacTolerances {
    pub normalizer: f64,
    pub round_trip: f64,
    pub rn_lift: f64,
    pub chi_routes: f64,
    pub coboundary: f64,
    pub lstar: f64,
}

impl Default for KacTolerances {
    fn default() -> Self {
        KacTolerances {
            normalizer: 1e-12,
            round_trip: 1e-12,
            rn_lift: 1e-10,
            chi_routes: 1e-9,
            coboundary: 1e-10,
            lstar: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CkParams {
    pub depth_cap: usize,
    pub pairs: usize,
}

impl Default for CkParams {
    fn default() -> Self {
        CkParams {
            depth_cap: 4,
            pairs: 50,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalParams {
    pub depth: usize,
}

impl Default for IntervalParams {
    fn default() -> Self {
        IntervalParams { depth: 4 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let t = &self.kac.tolerances;
        positive("kac.max_tail", self.kac.max_tail)?;
        for (name, v) in [
            ("kac.tolerances.normalizer", t.normalizer),
            ("kac.tolerances.round_trip", t.round_trip),
            ("kac.tolerances.rn_lift", t.rn_lift),
            ("kac.tolerances.chi_routes", t.chi_routes),
            ("kac.tolerances.coboundary", t.coboundary),
            ("kac.tolerances.lstar", t.lstar),
        ] {
            positive(name, v)?;
        }
        if let Some(scales) = &self.dimension.scales {
            for &e in scales {
                positive("dimension.scales", e)?;
            }
        }
        if self.spectrum.points == 0 || !(self.spectrum.q_min <= self.spectrum.q_max) {
            return Err(Error::Config("spectrum grid is empty".into()));
        }
        if self.kms.samples == 0 {
            return Err(Error::Config("kms.samples must be positive".into()));
        }
        for (name, d) in [
            ("dimension.depth", self.dimension.depth),
            ("dimension.box_depth", self.dimension.box_depth),
            ("kac.depth", self.kac.depth),
            ("kac.n_max", self.kac.n_max),
            ("ck_verify.depth_cap", self.ck_verify.depth_cap),
            ("schottky.depth", self.schottky.depth),
        ] {
            if d == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// A named output: a file name under `--out`, or a block on stdout.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// A system together with its geometric realization, when it has one.
struct Resolved {
    sys: IncidenceSystem,
    geometry: Option<MarkovMap>,
    designated_base: Vec<String>,
}

fn resolve_system(spec: &SystemSpec) -> Result<Resolved> {
    let plain = |sys: IncidenceSystem| Resolved {
        sys,
        geometry: None,
        designated_base: vec!["0".into()],
    };
    let geometric = |map: MarkovMap, base: &str| Resolved {
        sys: map.system().clone(),
        geometry: Some(map),
        designated_base: vec![base.into()],
    };
    Ok(match spec {
        SystemSpec::Subshift { matrix } => plain(IncidenceSystem::new(matrix.clone())?),
        SystemSpec::FullShift { letters } => plain(IncidenceSystem::full_shift(*letters)?),
        SystemSpec::GoldenMean => plain(IncidenceSystem::golden_mean()),
        SystemSpec::Schottky(s) => geometric(SchottkySystem::from_spec(s)?.map().clone(), "0"),
        SystemSpec::SymmetricSchottky { half_width } => {
            geometric(SchottkySystem::symmetric(*half_width)?.map().clone(), "0")
        }
        SystemSpec::Cantor => geometric(cantor_system(), "0"),
        SystemSpec::Farey => geometric(farey_type_system().map().clone(), "1"),
    })
}

fn resolve_potential(cfg: &RunConfig, r: &Resolved) -> Result<F> {
    let spec = match (&cfg.potential, &r.geometry) {
        (Some(p), _) => p.clone(),
        (None, Some(_)) => PotentialSpec::BowenSeries {
            depth: cfg.dimension.depth,
        },
        (None, None) => return Err(Error::Config("this command needs a potential".into())),
    };
    match spec {
        PotentialSpec::Constant { value } => Ok(F::constant(&r.sys, 1, value)),
        PotentialSpec::Values { depth, values } => F::from_values(&r.sys, depth, values),
        PotentialSpec::Words { depth, values } => F::from_word_map(&r.sys, depth, &values),
        PotentialSpec::BowenSeries { depth } => match &r.geometry {
            Some(map) => Ok(map.bowen_series_potential(depth)?.j),
            None => Err(Error::Config(
                "bowen_series potentials need a geometric system".into(),
            )),
        },
    }
}

fn resolve_measure(spec: &MeasureSpec, cfg: &RunConfig, r: &Resolved, beta: f64) -> Result<M> {
    let sys = &r.sys;
    match spec {
        MeasureSpec::Parry => gibbs_measure(sys, &F::zero(sys)),
        MeasureSpec::Bernoulli { probs } => M::bernoulli(sys, probs),
        MeasureSpec::Markov { pi, p } => M::markov(sys, pi, p),
        MeasureSpec::Gibbs => gibbs_measure(sys, &resolve_potential(cfg, r)?),
        MeasureSpec::Equilibrium { s } => equilibrium(sys, &resolve_potential(cfg, r)?, *s),
        MeasureSpec::Eigen => eigenmeasure(sys, &resolve_potential(cfg, r)?.scale(-beta)),
    }
}

/// Rounds every float in a JSON value to 12 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            fmt12(x)
                .parse::<f64>()
                .map(Value::from)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn json_artifact(name: &str, v: Value) -> Artifact {
    let mut contents = serde_json::to_string_pretty(&round_json(v)).expect("JSON serializes");
    contents.push('\n');
    Artifact {
        name: name.into(),
        contents,
    }
}

fn csv_artifact(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(header).map_err(io)?;
    for row in rows {
        wr.write_record(&row).map_err(io)?;
    }
    let bytes = wr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(Artifact {
        name: name.into(),
        contents: String::from_utf8(bytes).expect("CSV is UTF-8"),
    })
}

fn verdict(value: f64, tolerance: f64) -> Value {
    json!({ "value": value, "tolerance": tolerance, "pass": value < tolerance })
}

/// Runs one subcommand and returns its artifacts.
pub fn run(command: Command, cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let r = resolve_system(&cfg.system)?;
    match command {
        Command::Pressure => run_pressure(cfg, &r),
        Command::Dimension => run_dimension(cfg, &r),
        Command::Spectrum => run_spectrum(cfg, &r),
        Command::KmsCheck => run_kms(cfg, &r, seed),
        Command::KacCheck => run_kac(cfg, &r),
        Command::CkVerify => run_ck(cfg, &r, seed),
        Command::Schottky => run_intervals(cfg, &r),
    }
}

fn run_pressure(cfg: &RunConfig, r: &Resolved) -> Result<Vec<Artifact>> {
    let f = resolve_potential(cfg, r)?;
    let mut rows = Vec::new();
    for &s in &cfg.pressure.s {
        let e = eigen_data(&r.sys, &f.scale(-s))?;
        rows.push(vec![
            fmt12(s),
            fmt12(e.log_lambda),
            fmt12(e.lambda),
            fmt12(e.residual),
            e.depth.to_string(),
            e.iterations.to_string(),
        ]);
    }
    Ok(vec![csv_artifact(
        "pressure.csv",
        &["s", "pressure", "lambda", "residual", "depth", "iterations"],
        rows,
    )?])
}

fn run_dimension(cfg: &RunConfig, r: &Resolved) -> Result<Vec<Artifact>> {
    let p = &cfg.dimension;
    let mut out = serde_json::Map::new();
    match (&r.geometry, &cfg.potential) {
        (Some(map), None) => {
            let est = map.limit_set_dimension(p.depth)?;
            let box_pot = map.bowen_series_potential(p.box_depth)?;
            let scales = match &p.scales {
                Some(s) => s.clone(),
                None => MarkovMap::geometric_scales(box_pot.max_diameter * 512.0, 0.5, 8),
            };
            let slope = map.boxcount_dimension(p.box_depth, &scales)?;
            out.insert("bowen_root".into(), est.delta.into());
            out.insert("depth".into(), est.depth.into());
            out.insert("bowen_root_next_depth".into(), est.delta_next.into());
            out.insert(
                "depth_difference".into(),
                (est.delta_next - est.delta).abs().into(),
            );
            out.insert(
                "box_count".into(),
                json!({
                    "depth": p.box_depth,
                    "scales": scales,
                    "slope": slope,
                    "difference": (slope - est.delta).abs(),
                }),
            );
        }
        _ => {
            let f = resolve_potential(cfg, r)?;
            let s = bowen_root(&r.sys, &f)?;
            let residual = eigen_data(&r.sys, &f.scale(-s))?.log_lambda.abs();
            out.insert("bowen_root".into(), s.into());
            out.insert("pressure_residual".into(), residual.into());
        }
    }
    Ok(vec![json_artifact("dimension.json", Value::Object(out))])
}

fn run_spectrum(cfg: &RunConfig, r: &Resolved) -> Result<Vec<Artifact>> {
    let f = resolve_potential(cfg, r)?;
    let p = &cfg.spectrum;
    let grid = linspace(p.q_min, p.q_max, p.points);
    let sweep = spectrum_sweep(&r.sys, &f, &grid)?;
    let opt = |x: Option<f64>| x.map(fmt12).unwrap_or_default();
    let rows = sweep
        .points
        .iter()
        .map(|sp| {
            let pt = sp.point.as_ref();
            vec![
                fmt12(sp.q),
                opt(pt.map(|x| x.s_q)),
                opt(pt.map(|x| x.alpha)),
                opt(pt.map(|x| x.dim)),
                opt(pt.map(|x| x.pressure_residual)),
                opt(pt.map(|x| x.legendre_residual)),
                opt(pt.map(|x| x.variance)),
                sp.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let csv = csv_artifact(
        "spectrum.csv",
        &[
            "q",
            "s_q",
            "alpha",
            "dim",
            "pressure_residual",
            "legendre_residual",
            "variance",
            "error",
        ],
        rows,
    )?;
    let summary = json!({
        "bowen_root": sweep.bowen_root,
        "alpha_minus": sweep.alpha_minus,
        "alpha_plus": sweep.alpha_plus,
        "endpoints_converged": sweep.endpoints_converged,
        "degenerate": sweep.degenerate,
    });
    Ok(vec![csv, json_artifact("spectrum_summary.json", summary)])
}

fn run_kms(cfg: &RunConfig, r: &Resolved, seed: u64) -> Result<Vec<Artifact>> {
    let h = resolve_potential(cfg, r)?;
    let beta = cfg.kms.beta;
    let spec = cfg.measure.clone().unwrap_or(MeasureSpec::Eigen);
    let mu = resolve_measure(&spec, cfg, r, beta)?;
    let report = check_suite(&r.sys, &mu, &h, beta, cfg.kms.samples, seed)?;
    let checks = serde_json::to_value(&report.checks).expect("report serializes");
    Ok(vec![json_artifact(
        "kms.json",
        json!({
            "beta": beta,
            "samples": cfg.kms.samples,
            "seed": seed,
            "max_residual": report.max_residual(),
            "checks": checks,
        }),
    )])
}

fn run_ck(cfg: &RunConfig, r: &Resolved, seed: u64) -> Result<Vec<Artifact>> {
    let spec = cfg.measure.clone().unwrap_or(MeasureSpec::Parry);
    let m = resolve_measure(&spec, cfg, r, 1.0)?;
    let ctx = RnRepContext::new(&r.sys, &m)?;
    let report = ctx.report(cfg.ck_verify.depth_cap, cfg.ck_verify.pairs, seed)?;
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["depth_cap"] = cfg.ck_verify.depth_cap.into();
    v["pairs"] = cfg.ck_verify.pairs.into();
    Ok(vec![json_artifact("ck_verify.json", v)])
}

fn run_intervals(cfg: &RunConfig, r: &Resolved) -> Result<Vec<Artifact>> {
    let map = r
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Config("the schottky command needs a geometric system".into()))?;
    let mut buf = Vec::new();
    map.write_intervals_csv(cfg.schottky.depth, &mut buf)?;
    Ok(vec![Artifact {
        name: "intervals.csv".into(),
        contents: String::from_utf8(buf).expect("CSV is UTF-8"),
    }])
}

fn run_kac(cfg: &RunConfig, r: &Resolved) -> Result<Vec<Artifact>> {
    let sys = &r.sys;
    let p = &cfg.kac;
    let t = &p.tolerances;
    let spec = cfg.measure.clone().unwrap_or(MeasureSpec::Parry);
    let m = resolve_measure(&spec, cfg, r, 1.0)?;
    let base_text = p.base.clone().unwrap_or_else(|| r.designated_base.clone());
    let base = base_text
        .iter()
        .map(|b| Word::parse(sys, b))
        .collect::<Result<Vec<_>>>()?;
    let ind = build_induced(sys, &base, &m, p.n_max, p.max_tail)?;
    let nt = InducedMeasure::restrict(&ind, &m)?;
    let depth = p.depth.max(ind.base_depth() + 2);
    let lift = kac_lift(&ind, &nt, depth)?;

    let nu_b: f64 = ind
        .base()
        .iter()
        .map(|b| lift.nu.mass(sys, b))
        .sum::<Result<f64>>()?;
    let direct = m.masses_at(sys, depth)?;
    let round_trip = lift
        .nu
        .weights()
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut rn_err = [0.0f64; 2];
    let mut rn_count = [0usize; 2];
    let mut branch_err = 0.0f64;
    for w in sys.word_letters(depth) {
        let mw = m.mass(sys, &w)?;
        if !(mw > 0.0) {
            continue;
        }
        if ind.in_base(&w) {
            branch_err = branch_err.max((branch_sum(&ind, &nt, &w)? - 1.0).abs());
        }
        match rn_lift(&ind, &nt, &w) {
            Ok(v) => {
                let want = m.mass(sys, &w[1..])? / mw;
                let i = v.formula as usize - 1;
                rn_err[i] = rn_err[i].max((v.value - want).abs());
                rn_count[i] += 1;
            }
            Err(Error::ShallowCylinder { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let h = rn_derivative_at(sys, &m, (m.depth() + 1).min(depth))?.map(f64::ln);
    let chi_tilde = F::one(sys);
    let chi_depth = (depth - 1).max(h.depth().saturating_sub(1));
    // Parabolic systems have excursions longer than any finite depth.
    let chi_checks = match chi_from_induced(&ind, &nt, &h, &chi_tilde, chi_depth) {
        Ok(chi) => {
            let cob = coboundary_residual(sys, &lift.nu, &h, &chi.chi, chi_depth + 1)?;
            json!({
                "chi_routes": verdict(chi.route_gap, t.chi_routes),
                "chi_hypothesis": chi.hypothesis_defect,
                "coboundary_identity": verdict(cob, t.coboundary),
            })
        }
        Err(Error::ShallowCylinder { cylinder, reason }) => {
            let skipped =
                json!({ "status": "not_applicable", "cylinder": cylinder, "reason": reason });
            json!({ "chi_routes": skipped, "coboundary_identity": skipped })
        }
        Err(e) => return Err(e),
    };

    let mut report = json!({
        "base": base_text,
        "n_max": p.n_max,
        "depth": depth,
        "blocks": ind.blocks().len(),
        "tail_mass": ind.tail_mass(),
        "tail_bound": ind.tail_bound(),
        "spectral_radius": ind.spectral_radius(),
        "normalizer": lift.normalizer,
        "normalizer_identity": verdict((lift.normalizer * nu_b - 1.0).abs(), t.normalizer),
        "round_trip": verdict(round_trip, t.round_trip),
        "rn_lift_formula_1": json!({ "cylinders": rn_count[0], "value": rn_err[0], "tolerance": t.rn_lift, "pass": rn_err[0] < t.rn_lift }),
        "rn_lift_formula_2": json!({ "cylinders": rn_count[1], "value": rn_err[1], "tolerance": t.rn_lift, "pass": rn_err[1] < t.rn_lift }),
        "branch_normalization": verdict(branch_err, t.rn_lift + lift.missing_mass),
        "lift_invariance_residual": lift.invariance_residual,
        "induced_invariance_residual": lift.induced_residual,
        "return_blocks": ind.blocks().iter().take(64).map(|b| letters_to_string(&b.block)).collect::<Vec<_>>(),
    });
    for (k, v) in chi_checks.as_object().expect("object").clone() {
        report[k] = v;
    }
    if let (MeasureSpec::Equilibrium { s }, Ok(f)) = (&spec, resolve_potential(cfg, r)) {
        let np = normalized_potential(sys, &f, *s)?;
        let neg = np.i_s.scale(-1.0);
        let profile = weak_gibbs_profile(sys, &lift.nu, &neg, depth)?;
        let lstar_depth = depth.saturating_sub(1).max(1);
        let lstar = lstar_residual(sys, &lift.nu, &neg, 1.0, lstar_depth)?;
        let ratios: Vec<f64> = profile
            .iter()
            .enumerate()
            .map(|(n, b)| b / (n + 1) as f64)
            .collect();
        report["weak_gibbs"] = json!({
            "s": s,
            "profile": profile,
            "ratios": ratios,
            "lstar_residual": verdict(lstar, t.lstar),
            "lstar_depth": lstar_depth,
        });
    }
    Ok(vec![json_artifact("kac.json", report)])
}

/// Entry point shared by the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("config", &e.to_string());
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "kind": kind, "message": message.trim_end() }));
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    let artifacts = run(cli.command, &cfg, cli.seed)?;
    let mut stdout = std::io::stdout().lock();
    let written = match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let mut r = Ok(());
            for a in &artifacts {
                let target = dir.join(&a.name);
                std::fs::write(&target, &a.contents)
                    .map_err(|e| Error::Io(format!("{}: {e}", target.display())))?;
                r = r.and_then(|_| writeln!(stdout, "{}", target.display()));
            }
            r
        }
        None => artifacts
            .iter()
            .try_for_each(|a| stdout.write_all(a.contents.as_bytes())),
    };
    match written.and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e.to_string())),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err =
            RunConfig::from_json(r#"{"system": {"kind": "golden_mean"}, "bogus": 1}"#).unwrap_err();
        assert!(err.is_config());
        let err =
            RunConfig::from_json(r#"{"system": {"kind": "golden_mean"}, "kac": {"max_tail": -1}}"#)
                .unwrap_err();
        assert!(err.to_string().contains("max_tail"));
    }

    #[test]
    fn pressure_table_for_constant_potential() {
        let c = cfg(&format!(
            r#"{{"system": {{"kind": "full_shift", "letters": 3}},
                "potential": {{"kind": "constant", "value": {}}},
                "pressure": {{"s": [0, 1, 2]}}}}"#,
            3f64.ln()
        ));
        let out = run(Command::Pressure, &c, 0).unwrap();
        let lines: Vec<&str> = out[0].contents.lines().collect();
        assert_eq!(lines[0], "s,pressure,lambda,residual,depth,iterations");
        let p2: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert!((p2 + 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn dimension_of_cantor_config() {
        let c = cfg(
            r#"{"system": {"kind": "cantor"}, "dimension": {"depth": 2, "box_depth": 10,
            "scales": [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125, 0.0009765625]}}"#,
        );
        let out = run(Command::Dimension, &c, 0).unwrap();
        let v: Value = serde_json::from_str(&out[0].contents).unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!((v["bowen_root"].as_f64().unwrap() - target).abs() < 1e-10);
        assert!((v["box_count"]["slope"].as_f64().unwrap() - target).abs() < 0.02);
    }

    #[test]
    fn kac_check_on_golden_mean() {
        let c = cfg(r#"{"system": {"kind": "golden_mean"}}"#);
        let out = run(Command::KacCheck, &c, 0).unwrap();
        let v: Value = serde_json::from_str(&out[0].contents).unwrap();
        for key in [
            "normalizer_identity",
            "round_trip",
            "rn_lift_formula_1",
            "rn_lift_formula_2",
            "chi_routes",
            "coboundary_identity",
        ] {
            assert_eq!(v[key]["pass"], Value::Bool(true), "{key}: {}", v[key]);
        }
        assert_eq!(v["blocks"], 2);
    }

    #[test]
    fn outputs_are_deterministic() {
        let c = cfg(r#"{"system": {"kind": "full_shift", "letters": 2},
            "potential": {"kind": "values", "depth": 1, "values": [0.6931471805599453, 1.3862943611198906]},
            "spectrum": {"q_min": -0.5, "q_max": 0.5, "points": 3}}"#);
        let a = run(Command::Spectrum, &c, 0).unwrap();
        let b = run(Command::Spectrum, &c, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].contents.lines().count(), 4);
    }

    #[test]
    fn geometric_potential_needs_geometry() {
        let c = cfg(
            r#"{"system": {"kind": "golden_mean"}, "potential": {"kind": "bowen_series", "depth": 3}}"#,
        );
        assert!(run(Command::Pressure, &c, 0).unwrap_err().is_config());
    }
}
