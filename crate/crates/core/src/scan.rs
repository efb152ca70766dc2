//! Decay of `‖L^m h‖_{β,b}` for the two-parameter family
//! `L_{f−(a+ib)τ+(c+iw)g}`, with `w = κ·b`.
//!
//! `y_m = ‖L^m h‖_{β,b} · e^{−Pm}` with `P = Pr_σ(f)`; the iterate is
//! renormalized every step and the scale carried in log space, so `y_m` is
//! exact up to rounding however fast it decays.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::linear_fit;
use crate::operator::build_operator;
use crate::operator::EigenOptions;
use crate::potential::{combine, norm_beta_b, Potential};
use crate::pressure::pressure_sigma_with;
use crate::shift::{Subshift, Symbol, ThetaMetric};

/// Seed of the random test function; fixed so that runs are reproducible.
pub const RANDOM_SEED: u64 = 0x5eed_0001;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeedKind {
    ConstantOne,
    /// Unit-modulus values with uniform phases, one per word.
    RandomUnit,
    CylinderIndicator(Vec<Symbol>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub a: f64,
    pub c: f64,
    pub b_grid: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    /// `|w| ≤ B·|b|`.
    pub kappa_bound: f64,
    pub m_max: usize,
    pub seed: SeedKind,
    pub epsilon: f64,
    pub metric: ThetaMetric,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            c: 0.0,
            b_grid: vec![10.0, 20.0, 40.0, 80.0, 160.0],
            kappa_grid: vec![-0.5, 0.0, 0.5],
            kappa_bound: 0.5,
            m_max: 60,
            seed: SeedKind::ConstantOne,
            epsilon: 0.5,
            metric: ThetaMetric::default(),
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_grid.is_empty() || self.kappa_grid.is_empty() {
            return Err(Error::InvalidInput("scan grids must be nonempty".into()));
        }
        if let Some(b) = self.b_grid.iter().find(|b| !(b.abs() >= 1.0)) {
            return Err(Error::BadFrequency(*b));
        }
        if let Some(k) = self.kappa_grid.iter().find(|k| !(k.abs() <= self.kappa_bound)) {
            return Err(Error::InvalidInput(format!("kappa {k} exceeds the bound B = {}", self.kappa_bound)));
        }
        if self.m_max < 2 {
            return Err(Error::InvalidInput("m_max must be at least 2".into()));
        }
        Ok(())
    }

    /// The κ grid with the edges `±B` added.
    pub fn kappas_with_edges(&self) -> Vec<f64> {
        let mut ks = self.kappa_grid.clone();
        ks.extend([-self.kappa_bound, self.kappa_bound]);
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        ks
    }
}

/// Potentials of a scan and the reference pressure `P = Pr_σ(f)`.
#[derive(Clone, Debug)]
pub struct ScanSystem {
    pub f: Potential<f64>,
    pub tau: Potential<f64>,
    pub g: Potential<f64>,
    pub pressure: f64,
}

impl ScanSystem {
    pub fn new(f: &Potential<f64>, tau: &Potential<f64>, g: &Potential<f64>) -> Result<Self> {
        Self::with_pressure(f, tau, g, pressure_sigma_with(f, EigenOptions::default())?)
    }

    pub fn with_pressure(f: &Potential<f64>, tau: &Potential<f64>, g: &Potential<f64>, pressure: f64) -> Result<Self> {
        if f.shift() != tau.shift() || f.shift() != g.shift() {
            return Err(Error::SpecMismatch);
        }
        Ok(Self { f: f.clone(), tau: tau.clone(), g: g.clone(), pressure })
    }

    pub fn shift(&self) -> &Subshift {
        self.f.shift()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub b: f64,
    pub w: f64,
    /// `y_m` for `m = 0..=m_max`.
    pub y: Vec<f64>,
    pub log_y: Vec<f64>,
    /// `exp` of the least-squares slope of `log y_m` over `m ∈ [m_max/2, m_max]`;
    /// zero if the iterate vanished exactly.
    pub rho_hat: f64,
    pub fit_residual: f64,
    /// Largest one-step growth `y_{m+1}/y_m · e^P` seen, a lower bound for the operator norm.
    pub max_step_ratio: f64,
}

fn seed_vector(shift: &Subshift, seed: &SeedKind, depth: usize) -> Result<(usize, Vec<Complex64>)> {
    let depth = match seed {
        SeedKind::CylinderIndicator(w) => {
            if w.is_empty() || !shift.is_admissible(w) {
                return Err(Error::InadmissibleWord { word: w.clone() });
            }
            depth.max(w.len())
        }
        _ => depth,
    };
    let table = shift.word_table(depth)?;
    let v = match seed {
        SeedKind::ConstantOne => vec![Complex64::new(1.0, 0.0); table.count()],
        SeedKind::RandomUnit => {
            let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
            (0..table.count()).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect()
        }
        SeedKind::CylinderIndicator(w) => {
            table.iter().map(|x| Complex64::new(if x.starts_with(w) { 1.0 } else { 0.0 }, 0.0)).collect()
        }
    };
    Ok((depth, v))
}

/// `‖·‖_{β,b}` is only defined for `|b| ≥ 1`; smaller frequencies use weight 1.
fn norm_frequency(b: f64) -> f64 {
    b.abs().max(1.0)
}

pub fn decay_sequence(sys: &ScanSystem, cfg: &ScanConfig, b: f64, w: f64) -> Result<DecayFit> {
    let phi = combine(&sys.f, &sys.tau, &sys.g, Complex64::new(cfg.a, b), Complex64::new(cfg.c, w))?;
    let (depth, mut v) = seed_vector(sys.shift(), &cfg.seed, phi.depth())?;
    let op = build_operator(&phi.lift(depth)?);
    let table = op.table().clone();
    let nb = norm_frequency(b);
    let mut log_scale = 0.0;
    let mut log_y = Vec::with_capacity(cfg.m_max + 1);
    for m in 0..=cfg.m_max {
        if m > 0 {
            v = op.apply(&v);
        }
        let norm = norm_beta_b(&v, &table, &cfg.metric, nb)?.combined;
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("iterate norm at m = {m}, b = {b}, w = {w}")));
        }
        if norm == 0.0 {
            log_y.push(f64::NEG_INFINITY);
            log_y.resize(cfg.m_max + 1, f64::NEG_INFINITY);
            break;
        }
        log_y.push(log_scale + norm.ln() - sys.pressure * m as f64);
        log_scale += norm.ln();
        v.iter_mut().for_each(|z| *z /= norm);
    }
    let y: Vec<f64> = log_y.iter().map(|l| l.exp()).collect();
    let lo = cfg.m_max / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=cfg.m_max).map(|m| (m as f64, log_y[m])).unzip();
    let (rho_hat, fit_residual) = if ys.iter().all(|l| l.is_finite()) {
        let (_, slope, rms) = linear_fit(&xs, &ys).expect("window has at least two points");
        (slope.exp(), rms)
    } else {
        (0.0, 0.0)
    };
    let max_step_ratio = log_y
        .windows(2)
        .filter(|p| p[0].is_finite() && p[1].is_finite())
        .map(|p| (p[1] - p[0] + sys.pressure).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit { b, w, y, log_y, rho_hat, fit_residual, max_step_ratio })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub rho_global: f64,
    /// `(|b|, M(b))` with `M(b) = max_m y_m / rho_global^m`.
    pub points: Vec<(f64, f64)>,
    /// Exponent and constant of `M(b) ≈ C·|b|^e`; `None` with fewer than two distinct `|b|`.
    pub e_fit: Option<f64>,
    pub c_fit: Option<f64>,
    pub epsilon: f64,
    pub exceeds_epsilon: bool,
    /// `rho_global ≥ 1 − 1e−6`: no decay to measure against.
    pub no_decay: bool,
}

pub fn envelope_report(fits: &[DecayFit], epsilon: f64) -> EnvelopeReport {
    let rho_global = fits.iter().map(|f| f.rho_hat).fold(0.0, f64::max);
    let ln_rho = rho_global.ln();
    let points: Vec<(f64, f64)> = fits
        .iter()
        .map(|f| {
            let log_m =
                f.log_y.iter().enumerate().map(|(m, l)| l - m as f64 * ln_rho).fold(f64::NEG_INFINITY, f64::max);
            (f.b.abs(), log_m.exp())
        })
        .collect();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let fit = if distinct.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(b, m)| (b.ln(), m.ln())).unzip();
        linear_fit(&xs, &ys).filter(|(i, s, _)| i.is_finite() && s.is_finite())
    } else {
        None
    };
    let e_fit = fit.map(|(_, s, _)| s);
    EnvelopeReport {
        rho_global,
        points,
        e_fit,
        c_fit: fit.map(|(i, _, _)| i.exp()),
        epsilon,
        exceeds_epsilon: e_fit.is_some_and(|e| e > epsilon),
        no_decay: rho_global >= 1.0 - 1e-6,
    }
}

#[derive(Clone, Debug)]
pub struct SweepMatrix {
    pub b_grid: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    /// Row-major by κ: `fits[i * b_grid.len() + j]` is `(κ_i, b_j)`.
    pub fits: Vec<DecayFit>,
}

impl SweepMatrix {
    pub fn rho_hat(&self, kappa_index: usize, b_index: usize) -> f64 {
        self.fits[kappa_index * self.b_grid.len() + b_index].rho_hat
    }

    pub fn row(&self, kappa_index: usize) -> &[DecayFit] {
        let nb = self.b_grid.len();
        &self.fits[kappa_index * nb..(kappa_index + 1) * nb]
    }

    pub fn max_rho_hat(&self) -> f64 {
        self.fits.iter().map(|f| f.rho_hat).fold(0.0, f64::max)
    }
}

/// `rho_hat` over `b_grid × κ-grid` (edges `±B` included), `w = κ·b`.
pub fn two_parameter_sweep(sys: &ScanSystem, cfg: &ScanConfig) -> Result<SweepMatrix> {
    cfg.validate()?;
    let kappas = cfg.kappas_with_edges();
    let cells: Vec<(f64, f64)> = kappas.iter().flat_map(|&k| cfg.b_grid.iter().map(move |&b| (k, b))).collect();
    let fits = cells.par_iter().map(|&(k, b)| decay_sequence(sys, cfg, b, k * b)).collect::<Result<Vec<_>>>()?;
    Ok(SweepMatrix { b_grid: cfg.b_grid.clone(), kappa_grid: kappas, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{leading_eigendata, normalize_potential};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn golden_roof() -> ScanSystem {
        let s = Subshift::full(2).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        ScanSystem::new(
            &Potential::<f64>::zero(&s),
            &Potential::roof(&s, 1, vec![1.0, phi]).unwrap(),
            &Potential::new(&s, 1, vec![0.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn normalized_potential_gives_flat_sequence() {
        let s = Subshift::golden_mean();
        let f = Potential::new(&s, 2, vec![0.2, -0.6, 0.4]).unwrap();
        let sd = leading_eigendata(&build_operator(&f), EigenOptions::default()).unwrap();
        let f0 = normalize_potential(&f, &sd, 1e-12).unwrap();
        let tau = Potential::roof(&s, 1, vec![1.0, 1.5]).unwrap();
        let sys = ScanSystem::with_pressure(&f0, &tau, &Potential::<f64>::zero(&s), 0.0).unwrap();
        let cfg = ScanConfig { m_max: 40, ..Default::default() };
        let fit = decay_sequence(&sys, &cfg, 0.0, 0.0).unwrap();
        for y in &fit.y {
            assert_abs_diff_eq!(*y, 1.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(fit.rho_hat, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn conjugate_parameters_give_identical_norms() {
        let sys = golden_roof();
        let cfg = ScanConfig { seed: SeedKind::CylinderIndicator(vec![1, 0]), ..Default::default() };
        let p = decay_sequence(&sys, &cfg, 23.0, 7.0).unwrap();
        let q = decay_sequence(&sys, &cfg, -23.0, -7.0).unwrap();
        for (x, y) in p.y.iter().zip(&q.y) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn lattice_roof_does_not_decay() {
        let s = Subshift::full(2).unwrap();
        let sys = ScanSystem::new(
            &Potential::new(&s, 1, vec![0.3, -0.2]).unwrap(),
            &Potential::roof(&s, 1, vec![1.0, 2.0]).unwrap(),
            &Potential::<f64>::zero(&s),
        )
        .unwrap();
        let fit = decay_sequence(&sys, &ScanConfig::default(), 2.0 * PI, 0.0).unwrap();
        assert_abs_diff_eq!(fit.rho_hat, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_one_decay_rate() {
        // depth-1 data on the full shift: L maps into constants, so ρ̂ = |Σ_j e^{φ_j}| / e^P
        let sys = golden_roof();
        let cfg = ScanConfig::default();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let fit = decay_sequence(&sys, &cfg, 40.0, 0.0).unwrap();
        let want = (Complex64::from_polar(0.5, -40.0) + Complex64::from_polar(0.5, -40.0 * phi)).norm();
        assert_abs_diff_eq!(fit.rho_hat, want, epsilon = 1e-10);
        assert!(fit.rho_hat < 1.0 - 1e-3);
        let seeded = decay_sequence(&sys, &ScanConfig { seed: SeedKind::RandomUnit, ..cfg }, 40.0, 0.0).unwrap();
        assert_abs_diff_eq!(seeded.rho_hat, want, epsilon = 1e-10);
    }

    #[test]
    fn sweep_shape_and_invariance() {
        let s = Subshift::full(2).unwrap();
        let sys = ScanSystem::new(
            &Potential::new(&s, 1, vec![0.1, 0.0]).unwrap(),
            &Potential::roof(&s, 2, vec![1.0, 1.2, 1.7, 1.1]).unwrap(),
            &Potential::<f64>::zero(&s),
        )
        .unwrap();
        let cfg = ScanConfig {
            b_grid: vec![10.0, 30.0],
            kappa_grid: vec![0.0, 0.3],
            kappa_bound: 0.4,
            m_max: 20,
            ..Default::default()
        };
        let sweep = two_parameter_sweep(&sys, &cfg).unwrap();
        assert_eq!(sweep.kappa_grid, vec![-0.4, 0.0, 0.3, 0.4]);
        for i in 1..sweep.kappa_grid.len() {
            for j in 0..2 {
                assert_eq!(sweep.rho_hat(i, j), sweep.rho_hat(0, j));
            }
        }
    }

    #[test]
    fn envelope_edge_cases() {
        let sys = golden_roof();
        let cfg = ScanConfig::default();
        let single = envelope_report(&[decay_sequence(&sys, &cfg, 20.0, 0.0).unwrap()], 0.5);
        assert!(single.e_fit.is_none());
        let fits: Vec<_> =
            [10.0, 20.0, 40.0].iter().map(|&b| decay_sequence(&sys, &cfg, b, 0.5 * b).unwrap()).collect();
        let rep = envelope_report(&fits, 0.5);
        assert!(rep.e_fit.is_some() && rep.rho_global < 1.0 && !rep.no_decay);
    }

    #[test]
    fn invalid_configs() {
        let bad_b = ScanConfig { b_grid: vec![0.5], ..Default::default() };
        assert!(matches!(bad_b.validate(), Err(Error::BadFrequency(_))));
        let bad_k = ScanConfig { kappa_grid: vec![0.9], ..Default::default() };
        assert!(bad_k.validate().is_err());
        assert!(ScanConfig { b_grid: vec![], ..Default::default() }.validate().is_err());
    }
}
