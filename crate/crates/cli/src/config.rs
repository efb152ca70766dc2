//! Experiment configuration.
//!
//! A config is a TOML document with a `system` block, a `potentials` block,
//! an optional `tolerances` block and one optional block per command
//! (`rates`, `ldp`, `scan`). Potential values are decimal strings keyed by
//! admissible words; see the CLI chapter of the guide for the full grammar.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use ruelle::ldp::{CutoffKind, LdpConfig, QuadratureSpec, ENUMERATION_GUARD};
use ruelle::pressure::{uniform_grid, LatticeOptions, PressureSettings, Side};
use ruelle::scan::{ScanConfig, SeedKind};
use ruelle::{validate_subshift, EigenOptions, Potential, Subshift, Symbol, ThetaMetric};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{invariant_name, CliError, ValidationError};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    #[serde(default)]
    potentials: RawPotentials,
    #[serde(default)]
    tolerances: RawTolerances,
    rates: Option<RawRates>,
    ldp: Option<RawLdp>,
    scan: Option<RawScan>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    k: usize,
    rows: Vec<Vec<u8>>,
    theta: Option<f64>,
    depth: usize,
}

type RawTable = BTreeMap<String, String>;

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotentials {
    f: Option<RawTable>,
    tau: Option<RawTable>,
    g: Option<RawTable>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    eigen_tol: Option<f64>,
    eigen_max_iters: Option<usize>,
    root_tol: Option<f64>,
    xi_tol: Option<f64>,
    fd_first: Option<f64>,
    fd_second: Option<f64>,
    t_max: Option<f64>,
    degenerate_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    a_grid: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLdp {
    a: Option<f64>,
    target_rate: Option<f64>,
    side: Option<String>,
    delta: f64,
    n_min: usize,
    n_max: usize,
    n_step: Option<usize>,
    cutoff: Option<String>,
    guard: Option<u64>,
    quadrature: Option<RawQuadrature>,
    lattice: Option<RawLattice>,
}

#[derive(Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    u_max: Option<f64>,
    step: Option<f64>,
    tol: Option<f64>,
    auto_range: Option<bool>,
    max_nodes: Option<usize>,
}

#[derive(Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    u_min: Option<f64>,
    u_max: Option<f64>,
    count: Option<usize>,
    iterations: Option<usize>,
    tol: Option<f64>,
    refine_peaks: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    a: Option<f64>,
    c: Option<f64>,
    b_grid: Vec<f64>,
    kappa_grid: Vec<f64>,
    kappa_bound: Option<f64>,
    m_max: Option<usize>,
    seed: Option<String>,
    cylinder: Option<Vec<Symbol>>,
    epsilon: Option<f64>,
    normalize: Option<bool>,
}

/// A fully validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Lowercase hex SHA-256 of the config file bytes.
    pub hash: String,
    pub shift: Subshift,
    pub metric: ThetaMetric,
    /// Largest table depth accepted for a potential.
    pub depth: usize,
    pub f: Potential<f64>,
    pub tau: Potential<f64>,
    pub g: Potential<f64>,
    pub settings: PressureSettings,
    pub rates: Option<RatesRun>,
    pub ldp: Option<LdpRun>,
    pub scan: Option<ScanRun>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatesRun {
    pub a_grid: Vec<f64>,
}

/// How the large-deviation run picks its target average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetAverage {
    Fixed(f64),
    /// The `a` on `side` of `a_star` where the rate function equals `target`.
    Rate {
        target: f64,
        side: Side,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeScan {
    pub u_min: f64,
    pub u_max: f64,
    pub count: usize,
    pub options: LatticeOptions,
}

impl LatticeScan {
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.u_min, self.u_max, self.count)
    }
}

impl Default for LatticeScan {
    fn default() -> Self {
        Self { u_min: 0.1, u_max: 50.0, count: 500, options: LatticeOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpRun {
    pub target: TargetAverage,
    pub delta: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub cutoff: CutoffKind,
    pub quadrature: QuadratureSpec,
    pub guard: u128,
    pub lattice: LatticeScan,
}

impl LdpRun {
    pub fn table_config(&self, a: f64) -> LdpConfig {
        LdpConfig {
            a,
            delta: self.delta,
            n_min: self.n_min,
            n_max: self.n_max,
            n_step: self.n_step,
            cutoff: self.cutoff,
            quadrature: self.quadrature,
            guard: self.guard,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRun {
    pub config: ScanConfig,
    /// Scan the flow-centered potential `f − Pr_{σ_τ}(F)·τ` instead of `f`.
    pub normalize: bool,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_config_bytes(&bytes)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_config_bytes(text.as_bytes())
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_config_bytes(bytes: &[u8]) -> Result<ExperimentConfig, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Parse(format!("config is not UTF-8: {e}")))?;
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(validate(raw, config_hash(bytes))?)
}

fn invalid(field: &str, invariant: &str, detail: impl Into<String>) -> ValidationError {
    ValidationError::new(field, invariant, detail)
}

fn lib_error(field: &str, e: ruelle::Error) -> ValidationError {
    invalid(field, invariant_name(&e), e.to_string())
}

fn validate(raw: RawConfig, hash: String) -> Result<ExperimentConfig, ValidationError> {
    let sys = &raw.system;
    validate_subshift(sys.k, &sys.rows).map_err(|e| lib_error("system.rows", e))?;
    let shift = Subshift::new(sys.k, &sys.rows).map_err(|e| lib_error("system.rows", e))?;
    let metric = ThetaMetric::new(sys.theta.unwrap_or(0.5)).map_err(|e| lib_error("system.theta", e))?;
    if sys.depth == 0 {
        return Err(invalid("system.depth", "positive depth", "depth must be at least 1"));
    }

    let table = |name: &str, raw: &Option<RawTable>, default: f64| -> Result<Potential<f64>, ValidationError> {
        match raw {
            None => Ok(Potential::constant(&shift, default)),
            Some(t) => parse_table(&shift, sys.depth, &format!("potentials.{name}"), t),
        }
    };
    let f = table("f", &raw.potentials.f, 0.0)?;
    let tau = table("tau", &raw.potentials.tau, 1.0)?;
    let g = table("g", &raw.potentials.g, 0.0)?;
    if let Some(v) = tau.values().iter().find(|v| !(**v > 0.0)) {
        return Err(invalid("potentials.tau", "roof positivity", format!("roof value {v} is not positive")));
    }
    let tau = tau.into_roof().map_err(|e| lib_error("potentials.tau", e))?;

    let settings = tolerances(&raw.tolerances)?;
    let rates = raw.rates.as_ref().map(rates_run).transpose()?;
    let ldp = raw.ldp.as_ref().map(ldp_run).transpose()?;
    let scan = raw.scan.as_ref().map(|s| scan_run(s, metric)).transpose()?;
    Ok(ExperimentConfig { hash, shift, metric, depth: sys.depth, f, tau, g, settings, rates, ldp, scan })
}

/// Parses a word key: a run of digits (`"01"`) or comma-separated symbols (`"0,11"`).
fn parse_word(key: &str) -> Option<Vec<Symbol>> {
    if key.contains(',') {
        key.split(',').map(|s| s.trim().parse::<Symbol>().ok()).collect()
    } else {
        key.chars().map(|c| c.to_digit(10).map(|d| d as Symbol)).collect()
    }
}

fn parse_decimal(field: &str, text: &str) -> Result<f64, ValidationError> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(invalid(field, "finite decimal", format!("{text:?} is not a finite decimal number"))),
    }
}

fn parse_table(
    shift: &Subshift,
    max_depth: usize,
    field: &str,
    t: &RawTable,
) -> Result<Potential<f64>, ValidationError> {
    if let Some(v) = t.get("*") {
        if t.len() != 1 {
            return Err(invalid(field, "table shape", "a constant table \"*\" admits no other keys"));
        }
        return Ok(Potential::constant(shift, parse_decimal(&format!("{field}.*"), v)?));
    }
    let mut entries = Vec::with_capacity(t.len());
    for (key, value) in t {
        let here = format!("{field}.{key:?}");
        let word = parse_word(key)
            .ok_or_else(|| invalid(&here, "word syntax", "expected symbols such as \"01\" or \"0,1\""))?;
        if word.iter().any(|&s| s as usize >= shift.k()) {
            return Err(invalid(&here, "symbol range", format!("symbols must be below k = {}", shift.k())));
        }
        if !shift.is_admissible(&word) {
            return Err(invalid(&here, "every referenced m-word admissible", format!("{word:?} is not admissible")));
        }
        entries.push((word, parse_decimal(&here, value)?));
    }
    let len = entries.first().map(|e| e.0.len()).ok_or_else(|| invalid(field, "table shape", "empty table"))?;
    if entries.iter().any(|e| e.0.len() != len) {
        return Err(invalid(field, "table shape", "all words must have the same length"));
    }
    if len == 0 || len > max_depth {
        return Err(invalid(field, "table depth", format!("word length {len} is outside 1..={max_depth}")));
    }
    let words = shift.word_table(len).map_err(|e| lib_error(field, e))?;
    let mut values = vec![None; words.count()];
    let mut seen = HashSet::new();
    for (word, v) in entries {
        if !seen.insert(word.clone()) {
            return Err(invalid(field, "table shape", format!("word {word:?} given twice")));
        }
        let i = words.index_of(&word).expect("admissible word of the table length");
        values[i] = Some(v);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| invalid(field, "table shape", format!("missing value for word {:?}", words.word(i))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Potential::new(shift, len, values).map_err(|e| lib_error(field, e))
}

fn positive(field: &str, v: Option<f64>, default: f64) -> Result<f64, ValidationError> {
    match v {
        None => Ok(default),
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(invalid(field, "positive", format!("{x} must be positive and finite"))),
    }
}

fn tolerances(t: &RawTolerances) -> Result<PressureSettings, ValidationError> {
    let d = PressureSettings::default();
    Ok(PressureSettings {
        eigen: EigenOptions {
            tol: positive("tolerances.eigen_tol", t.eigen_tol, d.eigen.tol)?,
            max_iters: t.eigen_max_iters.or(d.eigen.max_iters),
        },
        root_tol: positive("tolerances.root_tol", t.root_tol, d.root_tol)?,
        xi_tol: positive("tolerances.xi_tol", t.xi_tol, d.xi_tol)?,
        fd_first: positive("tolerances.fd_first", t.fd_first, d.fd_first)?,
        fd_second: positive("tolerances.fd_second", t.fd_second, d.fd_second)?,
        t_max: positive("tolerances.t_max", t.t_max, d.t_max)?,
        degenerate_tol: positive("tolerances.degenerate_tol", t.degenerate_tol, d.degenerate_tol)?,
    })
}

fn sorted(field: &str, grid: &[f64]) -> Result<(), ValidationError> {
    if grid.is_empty() {
        return Err(invalid(field, "grids sorted", "grid is empty"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(invalid(field, "grids sorted", format!("{x} is not finite")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid(field, "grids sorted", "grid must be strictly increasing"));
    }
    Ok(())
}

fn rates_run(r: &RawRates) -> Result<RatesRun, ValidationError> {
    sorted("rates.a_grid", &r.a_grid)?;
    Ok(RatesRun { a_grid: r.a_grid.clone() })
}

fn ldp_run(r: &RawLdp) -> Result<LdpRun, ValidationError> {
    let target = match (r.a, r.target_rate) {
        (Some(a), None) if a.is_finite() => TargetAverage::Fixed(a),
        (None, Some(t)) if t < 0.0 => {
            let side = match r.side.as_deref().unwrap_or("above") {
                "above" => Side::Above,
                "below" => Side::Below,
                other => {
                    return Err(invalid("ldp.side", "side", format!("{other:?} is neither \"above\" nor \"below\"")))
                }
            };
            TargetAverage::Rate { target: t, side }
        }
        (None, Some(t)) => {
            return Err(invalid("ldp.target_rate", "negative target rate", format!("{t} must be negative")))
        }
        _ => return Err(invalid("ldp", "one target", "give exactly one of `a` and `target_rate`")),
    };
    if r.a.is_some() && r.side.is_some() {
        return Err(invalid("ldp.side", "one target", "`side` only applies with `target_rate`"));
    }
    let delta = positive("ldp.delta", Some(r.delta), 0.0)?;
    let n_step = r.n_step.unwrap_or(1);
    if r.n_min == 0 || r.n_min > r.n_max || n_step == 0 {
        return Err(invalid(
            "ldp.n_min",
            "n range",
            format!("need 1 ≤ n_min ≤ n_max and n_step ≥ 1, got {}..{} step {n_step}", r.n_min, r.n_max),
        ));
    }
    let cutoff =
        r.cutoff.as_deref().unwrap_or("triangle").parse::<CutoffKind>().map_err(|e| lib_error("ldp.cutoff", e))?;
    let q = r.quadrature.unwrap_or_default();
    let dq = QuadratureSpec::default();
    let quadrature = QuadratureSpec {
        u_max: positive("ldp.quadrature.u_max", q.u_max, dq.u_max)?,
        step: positive("ldp.quadrature.step", q.step, dq.step)?,
        tol: positive("ldp.quadrature.tol", q.tol, dq.tol)?,
        auto_range: q.auto_range.unwrap_or(dq.auto_range),
        max_nodes: q.max_nodes.unwrap_or(dq.max_nodes),
    };
    if quadrature.step > quadrature.u_max {
        return Err(invalid("ldp.quadrature.step", "step below range", "step must not exceed u_max"));
    }
    let l = r.lattice.unwrap_or_default();
    let dl = LatticeScan::default();
    let lattice = LatticeScan {
        u_min: positive("ldp.lattice.u_min", l.u_min, dl.u_min)?,
        u_max: positive("ldp.lattice.u_max", l.u_max, dl.u_max)?,
        count: l.count.unwrap_or(dl.count),
        options: LatticeOptions {
            iterations: l.iterations.unwrap_or(dl.options.iterations),
            tol: positive("ldp.lattice.tol", l.tol, dl.options.tol)?,
            refine_peaks: l.refine_peaks.unwrap_or(dl.options.refine_peaks),
        },
    };
    if lattice.u_min >= lattice.u_max || lattice.count < 2 {
        return Err(invalid("ldp.lattice", "grids sorted", "need u_min < u_max and at least two points"));
    }
    Ok(LdpRun {
        target,
        delta,
        n_min: r.n_min,
        n_max: r.n_max,
        n_step,
        cutoff,
        quadrature,
        guard: r.guard.map_or(ENUMERATION_GUARD, u128::from),
        lattice,
    })
}

fn scan_run(r: &RawScan, metric: ThetaMetric) -> Result<ScanRun, ValidationError> {
    sorted("scan.b_grid", &r.b_grid)?;
    sorted("scan.kappa_grid", &r.kappa_grid)?;
    let d = ScanConfig::default();
    let seed = match (r.seed.as_deref().unwrap_or("constant_one"), &r.cylinder) {
        ("constant_one", None) => SeedKind::ConstantOne,
        ("random_unit", None) => SeedKind::RandomUnit,
        ("cylinder_indicator", Some(w)) => SeedKind::CylinderIndicator(w.clone()),
        ("cylinder_indicator", None) => {
            return Err(invalid("scan.cylinder", "seed", "cylinder_indicator needs `cylinder`"))
        }
        (_, Some(_)) => return Err(invalid("scan.cylinder", "seed", "`cylinder` only applies to cylinder_indicator")),
        (other, None) => return Err(invalid("scan.seed", "seed", format!("unknown seed {other:?}"))),
    };
    let config = ScanConfig {
        a: r.a.unwrap_or(d.a),
        c: r.c.unwrap_or(d.c),
        b_grid: r.b_grid.clone(),
        kappa_grid: r.kappa_grid.clone(),
        kappa_bound: positive("scan.kappa_bound", r.kappa_bound, d.kappa_bound)?,
        m_max: r.m_max.unwrap_or(d.m_max),
        seed,
        epsilon: positive("scan.epsilon", r.epsilon, d.epsilon)?,
        metric,
    };
    config.validate().map_err(|e| lib_error("scan", e))?;
    Ok(ScanRun { config, normalize: r.normalize.unwrap_or(true) })
}
