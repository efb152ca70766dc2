//! Pressure of the shift and of the suspension flow, the pressure curve
//! `β(t) = Pr_{σ_τ}(F + tG)`, and the large-deviation rate functions built on it.
//!
//! The flow pressure of `φ` over the roof `τ` is the unique `s` with
//! `Pr_σ(φ − sτ) = 0`. Flow averages are Abramov ratios
//! `∫g dμ / ∫τ dμ` of equilibrium states of the shift.

use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{brent, golden_section_min, richardson_first, richardson_second};
use crate::operator::{build_operator, leading_eigendata, EigenOptions, GibbsMeasure};
use crate::potential::{combine_real, Potential};

#[derive(Clone, Copy, Debug)]
pub struct PressureSettings {
    pub eigen: EigenOptions,
    /// Abscissa tolerance of every scalar root find.
    pub root_tol: f64,
    /// Accepted `|β'(ξ) − a|`.
    pub xi_tol: f64,
    pub fd_first: f64,
    pub fd_second: f64,
    /// The achievable range of flow averages is probed at `t = ±t_max`.
    pub t_max: f64,
    /// `β''` at or below this at the root is treated as a degenerate observable.
    pub degenerate_tol: f64,
}

impl Default for PressureSettings {
    fn default() -> Self {
        Self {
            eigen: EigenOptions::default(),
            root_tol: 1e-13,
            xi_tol: 1e-8,
            fd_first: 1e-4,
            fd_second: 1e-3,
            t_max: 30.0,
            degenerate_tol: 1e-8,
        }
    }
}

pub fn pressure_sigma(phi: &Potential<f64>) -> Result<f64> {
    pressure_sigma_with(phi, EigenOptions::default())
}

pub fn pressure_sigma_with(phi: &Potential<f64>, opts: EigenOptions) -> Result<f64> {
    Ok(leading_eigendata(&build_operator(phi), opts)?.pressure)
}

/// The `s` with `Pr_σ(φ − sτ) = 0`.
///
/// `s ↦ Pr_σ(φ − sτ)` has slope in `[−max τ, −min τ]`, so the root lies
/// between `Pr_σ(φ)/max τ` and `Pr_σ(φ)/min τ`.
pub fn flow_pressure_of(phi: &Potential<f64>, tau: &Potential<f64>, settings: &PressureSettings) -> Result<f64> {
    check_roof(tau)?;
    let p0 = pressure_sigma_with(phi, settings.eigen)?;
    if p0 == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = if p0 > 0.0 { (p0 / tau.max(), p0 / tau.min()) } else { (p0 / tau.min(), p0 / tau.max()) };
    let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    let root_fn =
        |s: f64| pressure_sigma_with(&combine_real(phi, tau, &Potential::zero(phi.shift()), s, 0.0)?, settings.eigen);
    brent(root_fn, lo - pad, hi + pad, settings.root_tol, 200)
}

/// `Pr_{σ_τ}(F + tG)`, i.e. the flow pressure of `f + t·g`.
pub fn pressure_flow(f: &Potential<f64>, tau: &Potential<f64>, g: &Potential<f64>, t: f64) -> Result<f64> {
    pressure_flow_with(f, tau, g, t, &PressureSettings::default())
}

pub fn pressure_flow_with(
    f: &Potential<f64>,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    t: f64,
    settings: &PressureSettings,
) -> Result<f64> {
    flow_pressure_of(&combine_real(f, tau, g, 0.0, t)?, tau, settings)
}

fn check_roof(tau: &Potential<f64>) -> Result<()> {
    if !(tau.min() > 0.0) {
        return Err(Error::InvalidInput(format!("roof positivity violated: min value {}", tau.min())));
    }
    Ok(())
}

/// `t ↦ β(t) = Pr_{σ_τ}(F + tG)` with an append-only evaluation cache.
#[derive(Debug)]
pub struct PressureCurve {
    f: Potential<f64>,
    tau: Potential<f64>,
    g: Potential<f64>,
    settings: PressureSettings,
    normalized: bool,
    /// Flow pressure of the input `f` before centering.
    shift_applied: f64,
    cache: Mutex<Vec<(f64, f64)>>,
}

impl Clone for PressureCurve {
    fn clone(&self) -> Self {
        Self {
            f: self.f.clone(),
            tau: self.tau.clone(),
            g: self.g.clone(),
            settings: self.settings,
            normalized: self.normalized,
            shift_applied: self.shift_applied,
            cache: Mutex::new(self.cache.lock().expect("cache poisoned").clone()),
        }
    }
}

impl PressureCurve {
    pub fn new(
        f: &Potential<f64>,
        tau: &Potential<f64>,
        g: &Potential<f64>,
        settings: PressureSettings,
    ) -> Result<Self> {
        if f.shift() != tau.shift() || f.shift() != g.shift() {
            return Err(Error::SpecMismatch);
        }
        check_roof(tau)?;
        Ok(Self {
            f: f.clone(),
            tau: tau.clone(),
            g: g.clone(),
            settings,
            normalized: false,
            shift_applied: 0.0,
            cache: Mutex::new(Vec::new()),
        })
    }

    /// Curve of `f − Pr_{σ_τ}(F)·τ`, for which `β(0) = 0`.
    pub fn normalized(
        f: &Potential<f64>,
        tau: &Potential<f64>,
        g: &Potential<f64>,
        settings: PressureSettings,
    ) -> Result<Self> {
        Self::new(f, tau, g, settings)?.normalize()
    }

    /// Applies the centering `f ← f − β(0)·τ`.
    pub fn normalize(&self) -> Result<Self> {
        let p = self.beta(0.0)?;
        let f = Potential::linear_combination(&[(&self.f, 1.0), (&self.tau, -p)])?;
        let mut out = Self::new(&f, &self.tau, &self.g, self.settings)?;
        out.normalized = true;
        out.shift_applied = self.shift_applied + p;
        Ok(out)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Total `Pr_{σ_τ}(F)` removed by normalization.
    pub fn normalization_shift(&self) -> f64 {
        self.shift_applied
    }

    pub fn f(&self) -> &Potential<f64> {
        &self.f
    }

    pub fn tau(&self) -> &Potential<f64> {
        &self.tau
    }

    pub fn g(&self) -> &Potential<f64> {
        &self.g
    }

    pub fn settings(&self) -> &PressureSettings {
        &self.settings
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        if let Some(&(_, v)) =
            self.cache.lock().expect("cache poisoned").iter().find(|(s, _)| s.to_bits() == t.to_bits())
        {
            return Ok(v);
        }
        let v = pressure_flow_with(&self.f, &self.tau, &self.g, t, &self.settings)?;
        self.cache.lock().expect("cache poisoned").push((t, v));
        Ok(v)
    }

    /// Equilibrium state of `f + tg − β(t)τ`, a potential of zero pressure.
    pub fn gibbs_at(&self, t: f64) -> Result<GibbsMeasure> {
        let phi = combine_real(&self.f, &self.tau, &self.g, self.beta(t)?, t)?;
        GibbsMeasure::of_potential(&phi, self.settings.eigen)
    }

    /// `∫g dμ_t / ∫τ dμ_t`.
    pub fn beta_prime(&self, t: f64) -> Result<f64> {
        let mu = self.gibbs_at(t)?;
        Ok(mu.expect(&self.g)? / mu.expect(&self.tau)?)
    }

    /// Central-difference cross-check of [`Self::beta_prime`].
    pub fn beta_prime_fd(&self, t: f64) -> Result<f64> {
        richardson_first(|s| self.beta(s), t, self.settings.fd_first)
    }

    /// `β''(t) = σ²_{m_{F+tG}}(G)`.
    pub fn variance_flow(&self, t: f64) -> Result<f64> {
        richardson_second(|s| self.beta(s), t, self.settings.fd_second)
    }

    /// `∫G dm_F`, the flow average at which the rate function vanishes.
    pub fn a_star(&self) -> Result<f64> {
        self.beta_prime(0.0)
    }

    /// `(β'(−T), β'(T))`.
    pub fn achievable_range(&self) -> Result<(f64, f64)> {
        Ok((self.beta_prime(-self.settings.t_max)?, self.beta_prime(self.settings.t_max)?))
    }

    /// The `ξ` with `β'(ξ) = a`.
    pub fn solve_xi(&self, a: f64) -> Result<f64> {
        let (lo, hi) = self.achievable_range()?;
        if !(lo < a && a < hi) {
            return Err(Error::OutOfRange { a, lo, hi });
        }
        let t_max = self.settings.t_max;
        let xi = brent(|t| Ok(self.beta_prime(t)? - a), -t_max, t_max, self.settings.root_tol, 300)?;
        let curvature = self.variance_flow(xi)?;
        if curvature <= self.settings.degenerate_tol {
            return Err(Error::LatticeDegenerate(curvature));
        }
        let residual = (self.beta_prime(xi)? - a).abs();
        if !(residual <= self.settings.xi_tol) {
            return Err(Error::BracketFailure(format!("|β'(ξ) − a| = {residual:e} at ξ = {xi}")));
        }
        Ok(xi)
    }

    /// Minimum second divided difference over cached points, thinned to a
    /// spacing of at least `1e-3`: root noise `~1e-13` over `h²` would swamp
    /// the curvature on closer points.
    pub fn min_second_divided_difference(&self) -> Option<f64> {
        let mut pts = self.cache.lock().expect("cache poisoned").clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut thinned: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            if thinned.last().is_none_or(|q| p.0 - q.0 >= 1e-3) {
                thinned.push(p);
            }
        }
        thinned
            .windows(3)
            .map(|w| {
                let d1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let d2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                2.0 * (d2 - d1) / (w[2].0 - w[0].0)
            })
            .reduce(f64::min)
    }

    /// `g_a = g − aτ`.
    pub fn g_a(&self, a: f64) -> Result<Potential<f64>> {
        Potential::linear_combination(&[(&self.g, 1.0), (&self.tau, -a)])
    }

    /// `t ↦ Pr_σ(f + t·g_a)`.
    pub fn sigma_pressure_along(&self, a: f64, t: f64) -> Result<f64> {
        pressure_sigma_with(&combine_real(&self.f, &self.tau, &self.g, a * t, t)?, self.settings.eigen)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RateDiagnostics {
    /// `|β'(ξ) − a|`.
    pub xi_residual: f64,
    /// `β''(ξ)`, the flow variance of `G`.
    pub beta_second: f64,
    /// Minimizer of `t ↦ Pr_σ(f + t·g_a)`.
    pub eta: f64,
    /// `inf_t Pr_σ(f + t·g_a)`.
    pub j_inf: f64,
    /// `J − γ·mean_tau`.
    pub identity_gap: f64,
    /// `ω / (β''·mean_tau)`.
    pub curvature_ratio: f64,
    /// `Pr_σ(f + ξ·g_a − γτ)`, zero when `γ` is exact.
    pub gamma_residual: f64,
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub a: f64,
    pub xi: f64,
    pub j: f64,
    pub gamma: f64,
    pub omega: f64,
    /// `∫τ dμ` for the equilibrium state of `f + ξ·g_a`.
    pub mean_tau: f64,
    pub a_star: f64,
    pub diagnostics: RateDiagnostics,
}

/// `J(a) = Pr_σ(f + ξ(a)·g_a)` and `γ(a) = β(ξ(a)) − ξ(a)·a` on a normalized curve.
#[allow(non_snake_case)]
pub fn rate_J(curve: &PressureCurve, a: f64) -> Result<RateReport> {
    if !curve.is_normalized() {
        return Err(Error::InvalidInput("rate functions need a curve normalized to Pr_flow(F) = 0".into()));
    }
    let s = curve.settings();
    let xi = curve.solve_xi(a)?;
    let beta_xi = curve.beta(xi)?;
    let gamma = beta_xi - xi * a;
    let phi = combine_real(curve.f(), curve.tau(), curve.g(), a * xi, xi)?;
    let mu = GibbsMeasure::of_potential(&phi, s.eigen)?;
    let j = mu.generator().pressure;
    let mean_tau = mu.expect(curve.tau())?;
    let omega = richardson_second(|t| curve.sigma_pressure_along(a, t), xi, s.fd_second)?;
    let (eta, j_inf) = golden_section_min(|t| curve.sigma_pressure_along(a, t), xi - 2.0, xi + 2.0, 1e-9)?;
    let beta_second = curve.variance_flow(xi)?;
    let gamma_residual =
        pressure_sigma_with(&combine_real(curve.f(), curve.tau(), curve.g(), a * xi + gamma, xi)?, s.eigen)?;
    Ok(RateReport {
        a,
        xi,
        j,
        gamma,
        omega,
        mean_tau,
        a_star: curve.a_star()?,
        diagnostics: RateDiagnostics {
            xi_residual: (curve.beta_prime(xi)? - a).abs(),
            beta_second,
            eta,
            j_inf,
            identity_gap: j - gamma * mean_tau,
            curvature_ratio: omega / (beta_second * mean_tau),
            gamma_residual,
        },
    })
}

/// `Pr_σ(f + ξ(a)·g_a)` alone, without the diagnostics of [`rate_J`].
pub fn rate_value(curve: &PressureCurve, a: f64) -> Result<f64> {
    let xi = curve.solve_xi(a)?;
    pressure_sigma_with(&combine_real(curve.f(), curve.tau(), curve.g(), a * xi, xi)?, curve.settings().eigen)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

/// The `a` on one side of `a_star` with `J(a) = target`, for `target < 0`.
pub fn a_for_rate(curve: &PressureCurve, target: f64, side: Side) -> Result<f64> {
    if !(target < 0.0) {
        return Err(Error::InvalidInput(format!("target rate must be negative, got {target}")));
    }
    let a_star = curve.a_star()?;
    let (lo, hi) = curve.achievable_range()?;
    let inset = 1e-6 * (hi - lo);
    let (near, far) = match side {
        Side::Above => (a_star, hi - inset),
        Side::Below => (a_star, lo + inset),
    };
    let tol = curve.settings().root_tol;
    brent(|a| Ok(rate_value(curve, a)? - target), near, far, tol, 300)
}

/// `γ(a) = β(ξ(a)) − ξ(a)·a`.
pub fn gamma_of(curve: &PressureCurve, a: f64) -> Result<f64> {
    let xi = curve.solve_xi(a)?;
    Ok(curve.beta(xi)? - xi * a)
}

/// `γ'(a)` by central differences with one Richardson step.
pub fn gamma_prime(curve: &PressureCurve, a: f64, h: f64) -> Result<f64> {
    richardson_first(|x| gamma_of(curve, x), a, h)
}

/// `ξ'(a)` by central differences with one Richardson step.
pub fn xi_prime(curve: &PressureCurve, a: f64, h: f64) -> Result<f64> {
    richardson_first(|x| curve.solve_xi(x), a, h)
}

/// Rate reports over a grid, in grid order.
pub fn rate_grid(curve: &PressureCurve, grid: &[f64]) -> Vec<Result<RateReport>> {
    grid.par_iter().map(|&a| rate_J(curve, a)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeOptions {
    pub iterations: usize,
    /// Flag when `r(u) ≥ 1 − tol` at some `u ≠ 0`.
    pub tol: f64,
    /// Golden-section refinement around the largest grid peaks.
    pub refine_peaks: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self { iterations: 200, tol: 1e-6, refine_peaks: 4 }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeReport {
    /// `(u, r(u))` over the grid, followed by refined peak locations.
    pub samples: Vec<(f64, f64)>,
    pub max_r: f64,
    pub argmax_u: f64,
    pub flagged: bool,
    pub tol: f64,
}

/// `r(u) = (‖L^{2N}1‖ / ‖L^N 1‖)^{1/N}` for `L = L_{f0 + iuψ}`, `2N` iterations.
pub fn spectral_radius_estimate(f0: &Potential<f64>, psi: &Potential<f64>, u: f64, iterations: usize) -> Result<f64> {
    let phi = combine(f0, psi, u)?;
    let op = build_operator(&phi);
    let half = (iterations / 2).max(1);
    let mut v = vec![Complex64::new(1.0, 0.0); op.dim()];
    let mut log_norm = 0.0;
    let mut log_at_half = 0.0;
    for step in 1..=2 * half {
        v = op.apply(&v);
        let norm = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("iterate norm at u = {u}")));
        }
        log_norm += norm.ln();
        v.iter_mut().for_each(|z| *z /= norm);
        if step == half {
            log_at_half = log_norm;
        }
    }
    Ok(((log_norm - log_at_half) / half as f64).exp())
}

fn combine(f0: &Potential<f64>, psi: &Potential<f64>, u: f64) -> Result<Potential<Complex64>> {
    Potential::linear_combination(&[
        (&f0.to_complex(), Complex64::new(1.0, 0.0)),
        (&psi.to_complex(), Complex64::new(0.0, u)),
    ])
}

/// Scans `r(u)` for `L_{f0 + iuψ}` over `u_grid`; evidence, not proof, of non-latticeness.
pub fn lattice_check(
    f0: &Potential<f64>,
    psi: &Potential<f64>,
    u_grid: &[f64],
    opts: LatticeOptions,
) -> Result<LatticeReport> {
    let r = |u: f64| spectral_radius_estimate(f0, psi, u, opts.iterations);
    let mut samples: Vec<(f64, f64)> = u_grid.par_iter().map(|&u| Ok((u, r(u)?))).collect::<Result<_>>()?;
    let mut peaks: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            let left = i == 0 || samples[i - 1].1 <= samples[i].1;
            let right = i + 1 == samples.len() || samples[i + 1].1 <= samples[i].1;
            left && right && samples[i].0 != 0.0
        })
        .collect();
    peaks.sort_by(|&i, &j| samples[j].1.total_cmp(&samples[i].1));
    peaks.truncate(opts.refine_peaks);
    let refined: Vec<(f64, f64)> = peaks
        .par_iter()
        .filter(|&&i| i > 0 && i + 1 < samples.len())
        .map(|&i| {
            let (lo, hi) = (samples[i - 1].0, samples[i + 1].0);
            let (u, neg) = golden_section_min(|u| Ok(-r(u)?), lo, hi, 1e-9 * (1.0 + hi.abs()))?;
            Ok((u, -neg))
        })
        .collect::<Result<_>>()?;
    samples.extend(refined.into_iter().filter(|p| p.0 != 0.0));
    let (argmax_u, max_r) = samples
        .iter()
        .filter(|p| p.0 != 0.0)
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    Ok(LatticeReport { samples, max_r, argmax_u, flagged: max_r >= 1.0 - opts.tol, tol: opts.tol })
}

/// Evenly spaced grid of `count` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::normalize_potential;
    use crate::shift::Subshift;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{LN_2, PI};

    fn s2() -> Subshift {
        Subshift::full(2).unwrap()
    }

    fn golden_ratio() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn sigma_pressure_examples() {
        for k in 2..=4 {
            let s = Subshift::full(k).unwrap();
            let p = pressure_sigma(&Potential::<f64>::zero(&s)).unwrap();
            assert_abs_diff_eq!(p, (k as f64).ln(), epsilon = 1e-12);
            let p = pressure_sigma(&Potential::constant(&s, 0.37)).unwrap();
            assert_abs_diff_eq!(p, (k as f64).ln() + 0.37, epsilon = 1e-12);
        }
        let p = pressure_sigma(&Potential::<f64>::zero(&Subshift::golden_mean())).unwrap();
        assert_abs_diff_eq!(p, golden_ratio().ln(), epsilon = 1e-12);
    }

    #[test]
    fn flow_pressure_examples() {
        let s = s2();
        let z = Potential::<f64>::zero(&s);
        let one = Potential::roof(&s, 1, vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(pressure_flow(&z, &one, &z, 0.0).unwrap(), LN_2, epsilon = 1e-12);
        let c = Potential::roof(&s, 1, vec![2.5, 2.5]).unwrap();
        assert_abs_diff_eq!(pressure_flow(&z, &c, &z, 0.0).unwrap(), LN_2 / 2.5, epsilon = 1e-12);
        let tau = Potential::roof(&s, 1, vec![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(pressure_flow(&z, &tau, &z, 0.0).unwrap(), golden_ratio().ln(), epsilon = 1e-12);
    }

    #[test]
    fn flow_pressure_handles_negative_sigma_pressure() {
        let s = s2();
        let f = Potential::new(&s, 1, vec![-2.0, -1.5]).unwrap();
        let tau = Potential::roof(&s, 1, vec![0.7, 1.9]).unwrap();
        let z = Potential::<f64>::zero(&s);
        let p = pressure_flow(&f, &tau, &z, 0.0).unwrap();
        let check = pressure_sigma(&combine_real(&f, &tau, &z, p, 0.0).unwrap()).unwrap();
        assert!(check.abs() < 1e-12);
        assert!(p < 0.0);
    }

    #[test]
    fn beta_prime_examples() {
        let s = s2();
        let f = Potential::new(&s, 1, vec![0.3, -0.2]).unwrap();
        let tau = Potential::roof(&s, 1, vec![1.0, 1.6]).unwrap();
        let g = tau.map(|x| 0.75 * x);
        let curve = PressureCurve::new(&f, &tau, &g, PressureSettings::default()).unwrap();
        for t in [-2.0, 0.0, 1.5] {
            assert_abs_diff_eq!(curve.beta_prime(t).unwrap(), 0.75, epsilon = 1e-12);
        }
        assert!(curve.variance_flow(0.5).unwrap().abs() < 1e-6);
        assert!(matches!(curve.solve_xi(0.5), Err(Error::OutOfRange { .. })));

        // swap-symmetric system: μ is swap-invariant, so the Abramov ratio is a plain average
        let f = Potential::<f64>::zero(&s);
        let tau = Potential::roof(&s, 1, vec![1.3, 1.3]).unwrap();
        let g = Potential::new(&s, 1, vec![0.2, 1.1]).unwrap();
        let curve = PressureCurve::new(&f, &tau, &g, PressureSettings::default()).unwrap();
        assert_abs_diff_eq!(curve.beta_prime(0.0).unwrap(), (0.2 + 1.1) / (1.3 + 1.3), epsilon = 1e-12);
    }

    #[test]
    fn beta_prime_matches_differences() {
        let gm = Subshift::golden_mean();
        let f = Potential::new(&gm, 2, vec![0.1, -0.4, 0.3]).unwrap();
        let tau = Potential::roof(&gm, 1, vec![1.0, 1.8]).unwrap();
        let g = Potential::new(&gm, 2, vec![0.0, 1.0, 0.5]).unwrap();
        let curve = PressureCurve::new(&f, &tau, &g, PressureSettings::default()).unwrap();
        for t in [-1.3, -0.4, 0.0, 0.7, 2.1] {
            let exact = curve.beta_prime(t).unwrap();
            let fd = curve.beta_prime_fd(t).unwrap();
            assert!((exact - fd).abs() < 1e-5, "t = {t}: {exact} vs {fd}");
        }
        assert!(curve.min_second_divided_difference().unwrap() > -1e-8);
    }

    #[test]
    fn xi_and_rates_at_center() {
        let s = s2();
        let f = Potential::<f64>::zero(&s);
        let tau = Potential::roof(&s, 1, vec![1.0, golden_ratio()]).unwrap();
        let g = Potential::new(&s, 1, vec![0.0, 1.0]).unwrap();
        let curve = PressureCurve::normalized(&f, &tau, &g, PressureSettings::default()).unwrap();
        assert!(curve.beta(0.0).unwrap().abs() < 1e-12);
        let a_star = curve.a_star().unwrap();
        assert!(curve.solve_xi(a_star).unwrap().abs() < 1e-9);
        let r = rate_J(&curve, a_star).unwrap();
        assert!(r.j.abs() < 1e-12 && r.gamma.abs() < 1e-12 && r.xi.abs() < 1e-9);
        assert!(r.omega > 0.0);

        let again = curve.normalize().unwrap();
        assert!((again.normalization_shift() - curve.normalization_shift()).abs() < 1e-12);

        let r = rate_J(&curve, a_star + 0.05).unwrap();
        assert!(r.j < 0.0 && r.gamma < 0.0 && r.xi > 0.0);
        assert!(r.j <= r.diagnostics.j_inf + 1e-12 || (r.j - r.diagnostics.j_inf).abs() < 1e-4);
        assert!(r.diagnostics.gamma_residual.abs() < 1e-10);
    }

    #[test]
    fn a_for_rate_hits_target_on_each_side() {
        let s = s2();
        let tau = Potential::roof(&s, 1, vec![1.0, golden_ratio()]).unwrap();
        let g = Potential::new(&s, 1, vec![0.0, 1.0]).unwrap();
        let curve =
            PressureCurve::normalized(&Potential::<f64>::zero(&s), &tau, &g, PressureSettings::default()).unwrap();
        let a_star = curve.a_star().unwrap();
        let above = a_for_rate(&curve, -0.03, Side::Above).unwrap();
        let below = a_for_rate(&curve, -0.03, Side::Below).unwrap();
        assert!(below < a_star && a_star < above);
        for a in [above, below] {
            assert!((rate_value(&curve, a).unwrap() + 0.03).abs() < 1e-10);
            assert!((rate_J(&curve, a).unwrap().j + 0.03).abs() < 1e-10);
        }
        assert!(matches!(a_for_rate(&curve, 0.0, Side::Above), Err(Error::InvalidInput(_))));
        assert!(matches!(a_for_rate(&curve, -50.0, Side::Above), Err(Error::BracketFailure(_))));
    }

    #[test]
    fn raw_curve_is_rejected_for_rates() {
        let s = s2();
        let tau = Potential::roof(&s, 1, vec![1.0, 2.0]).unwrap();
        let g = Potential::new(&s, 1, vec![0.0, 1.0]).unwrap();
        let curve = PressureCurve::new(&Potential::<f64>::zero(&s), &tau, &g, PressureSettings::default()).unwrap();
        assert!(matches!(rate_J(&curve, 0.4), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lattice_examples() {
        let s = s2();
        let f = Potential::<f64>::zero(&s);
        let sd = leading_eigendata(&build_operator(&f), EigenOptions::default()).unwrap();
        let f0 = normalize_potential(&f, &sd, 1e-12).unwrap();

        let rep = lattice_check(&f0, &Potential::<f64>::zero(&s), &[0.5, 1.0, 7.0], LatticeOptions::default()).unwrap();
        assert!(rep.flagged);

        // τ ≡ 1, g ∈ {0, 1}, a = 1/2: ψ = g − τ/2 has e^{2πiψ} ≡ −1, a unimodular constant
        let psi = Potential::new(&s, 1, vec![-0.5, 0.5]).unwrap();
        let r = spectral_radius_estimate(&f0, &psi, 2.0 * PI, 200).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let rep = lattice_check(&f0, &psi, &uniform_grid(0.5, 10.0, 40), LatticeOptions::default()).unwrap();
        assert!(rep.flagged);
        assert!((rep.argmax_u - 2.0 * PI).abs() < 1e-4);

        // rank-one case: r(u) = |Σ_j p_j e^{iuψ_j}| = |cos(u/2)|
        let r = spectral_radius_estimate(&f0, &psi, 1.0, 200).unwrap();
        assert_abs_diff_eq!(r, 0.5f64.cos(), epsilon = 1e-12);
    }
}
