//! The shrinking-window quantity `ρ(n) = μ{x : g_a^n(x) ∈ (−δ_n, δ_n)}`,
//! `g_a = g − aτ`, `δ_n = e^{−δn}`, computed three ways, and the Gaussian
//! asymptote it is compared against.
//!
//! * exact: sum of cylinder masses over all admissible words of length
//!   `n + d − 1`, with the window read off the Birkhoff sum;
//! * smoothed, direct: the same sum weighted by `χ(g_a^n/δ_n)`;
//! * smoothed, spectral: Fourier inversion along the shifted contour,
//!   `(δ_n/2π) ∫ ⟨L^n_{f0+(ξ+iu)g_a} 1, μ⟩ χ̂(δ_n(u − iξ)) du`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{build_operator, leading_eigendata, normalize_potential, GibbsMeasure};
use crate::potential::{combine_real, Potential};
use crate::pressure::{rate_J, PressureCurve, RateReport};
use crate::shift::Symbol;

/// Default cap on the number of enumerated cylinders.
pub const ENUMERATION_GUARD: u128 = 100_000_000;

/// Endpoint hits within this distance count as inside the window.
pub const BOUNDARY_SNAP: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutoffKind {
    Triangle,
    SmoothBump,
}

impl std::fmt::Display for CutoffKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CutoffKind::Triangle => "triangle",
            CutoffKind::SmoothBump => "smooth_bump",
        })
    }
}

impl std::str::FromStr for CutoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(CutoffKind::Triangle),
            "smooth_bump" | "bump" => Ok(CutoffKind::SmoothBump),
            other => Err(Error::InvalidInput(format!("unknown cutoff kind {other:?}"))),
        }
    }
}

const BUMP_DEGREE: usize = 2048;
const BUMP_TABLES: usize = 5;

/// Gauss–Legendre nodes on `[−1, 1]` paired with `weight · bump(node)`, for
/// degrees `128·2^i`. Degree `d` resolves `cos(zx)` to machine precision for `|z| ≤ d`.
fn bump_table(i: usize) -> &'static [(f64, f64)] {
    static TABLES: [OnceLock<Vec<(f64, f64)>>; BUMP_TABLES] = [const { OnceLock::new() }; BUMP_TABLES];
    TABLES[i].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(128 << i).unwrap());
        rule.as_node_weight_pairs().iter().map(|&(x, w)| (x, w * bump(x))).collect()
    })
}

fn bump_table_for(zw: Complex64) -> &'static [(f64, f64)] {
    let r = zw.norm();
    let i = (0..BUMP_TABLES).find(|&i| r <= (128 << i) as f64).unwrap_or(BUMP_TABLES - 1);
    bump_table(i)
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Nonnegative cut-off `χ` supported in `[−w, w]`, `w` the half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffFunction {
    pub kind: CutoffKind,
    pub half_width: f64,
    /// Constant multiplier.
    pub scale: f64,
}

impl CutoffFunction {
    pub fn new(kind: CutoffKind) -> Self {
        Self { kind, half_width: 1.0, scale: 1.0 }
    }

    /// `χ(t) = (1 − |t|)₊`.
    pub fn triangle() -> Self {
        Self::new(CutoffKind::Triangle)
    }

    /// `χ(t) = exp(1 − 1/(1 − t²))` on `(−1, 1)`.
    pub fn smooth_bump() -> Self {
        Self::new(CutoffKind::SmoothBump)
    }

    pub fn with_half_width(self, half_width: f64) -> Self {
        Self { half_width, ..self }
    }

    pub fn scaled(self, scale: f64) -> Self {
        Self { scale: self.scale * scale, ..self }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = t / self.half_width;
        self.scale
            * match self.kind {
                CutoffKind::Triangle => (1.0 - s.abs()).max(0.0),
                CutoffKind::SmoothBump => bump(s),
            }
    }

    /// `∫ χ`.
    pub fn integral(&self) -> f64 {
        self.fourier_transform(Complex64::new(0.0, 0.0)).re
    }

    /// `χ̂(z) = ∫ e^{−izt} χ(t) dt`, entire in `z`.
    pub fn fourier_transform(&self, z: Complex64) -> Complex64 {
        let w = self.half_width;
        let zw = z * w;
        let core = match self.kind {
            CutoffKind::Triangle => {
                let s = sinc(zw / 2.0);
                s * s
            }
            CutoffKind::SmoothBump => {
                // beyond the node resolution the transform is below 1e-25
                if zw.re.abs() > 0.7 * BUMP_DEGREE as f64 {
                    Complex64::new(0.0, 0.0)
                } else {
                    bump_table_for(zw).iter().map(|&(x, wb)| (zw * x).cos() * wb).sum()
                }
            }
        };
        core * (self.scale * w)
    }
}

/// Birkhoff values and masses of all cylinders of one length, reduced in a fixed order.
struct CylinderWalk<'a> {
    mu: &'a GibbsMeasure,
    ga: &'a Potential<f64>,
    n: usize,
    len: usize,
}

#[derive(Clone, Copy)]
struct WalkState {
    mass: f64,
    block: usize,
    sum: f64,
}

impl CylinderWalk<'_> {
    /// State after appending `word[p]`.
    fn advance(&self, word: &[Symbol], state: WalkState) -> Option<WalkState> {
        let p = word.len() - 1;
        let m = self.mu.depth();
        let dg = self.ga.depth();
        let mut next = state;
        if p + 1 == m {
            next.block = self.mu.table().index_of(word)?;
            next.mass = self.mu.initial()[next.block];
        } else if p + 1 > m {
            let (block, prob) = self.mu.step(state.block, word[p])?;
            next.block = block;
            next.mass *= prob;
        }
        if p + 1 >= dg && p + 1 - dg < self.n {
            next.sum += self.ga.values()[self.ga.table().index_of(&word[p + 1 - dg..])?];
        }
        Some(next)
    }

    fn descend<A>(
        &self,
        word: &mut Vec<Symbol>,
        state: WalkState,
        acc: &mut A,
        leaf: &(impl Fn(&mut A, f64, f64) + Sync),
    ) {
        if word.len() == self.len {
            leaf(acc, state.mass, state.sum);
            return;
        }
        let shift = self.mu.shift();
        let last = *word.last().expect("walk starts from a nonempty prefix");
        for x in 0..shift.k() as Symbol {
            if !shift.allows(last, x) {
                continue;
            }
            word.push(x);
            if let Some(next) = self.advance(word, state) {
                if next.mass > 0.0 {
                    self.descend(word, next, acc, leaf);
                }
            }
            word.pop();
        }
    }

    fn run<A: Send>(
        &self,
        init: impl Fn() -> A + Sync,
        leaf: impl Fn(&mut A, f64, f64) + Sync,
        merge: impl Fn(A, A) -> A,
    ) -> A {
        let shift = self.mu.shift();
        let mut split = 1;
        while split < self.len && shift.count_words(split) < 512 {
            split += 1;
        }
        let prefixes: Vec<_> = shift.admissible_words(split).collect();
        let parts: Vec<A> = prefixes
            .par_iter()
            .map(|prefix| {
                let mut acc = init();
                let mut word = Vec::with_capacity(self.len);
                let mut state = WalkState { mass: 1.0, block: 0, sum: 0.0 };
                for &x in prefix.symbols() {
                    word.push(x);
                    match self.advance(&word, state) {
                        Some(s) => state = s,
                        None => return acc,
                    }
                }
                if state.mass > 0.0 {
                    self.descend(&mut word, state, &mut acc, &leaf);
                }
                acc
            })
            .collect();
        tree_reduce(parts, &merge).unwrap_or_else(init)
    }
}

/// Pairwise reduction whose shape depends only on the number of parts.
fn tree_reduce<A>(mut parts: Vec<A>, merge: &impl Fn(A, A) -> A) -> Option<A> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

/// Outcome of one enumeration pass at a fixed `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderStats {
    pub n: usize,
    pub delta_n: f64,
    pub rho_exact: f64,
    /// Cylinders whose Birkhoff value lies within [`BOUNDARY_SNAP`] of `±δ_n`.
    pub boundary_hits: u64,
    /// `Σ mass·χ(g_a^n/δ_n)`, one entry per requested cutoff.
    pub smooth: Vec<f64>,
    pub cylinders: u128,
}

/// Admissible words enumerated for a window of length `n`.
pub fn enumeration_size(mu: &GibbsMeasure, ga: &Potential<f64>, n: usize) -> u128 {
    mu.shift().count_words(word_length(mu, ga, n))
}

fn word_length(mu: &GibbsMeasure, ga: &Potential<f64>, n: usize) -> usize {
    (n + ga.depth() - 1).max(mu.depth())
}

/// Exact and smoothed window masses in a single enumeration.
pub fn cylinder_statistics(
    mu: &GibbsMeasure,
    ga: &Potential<f64>,
    n: usize,
    delta_n: f64,
    cutoffs: &[CutoffFunction],
    guard: u128,
) -> Result<CylinderStats> {
    if n == 0 {
        return Err(Error::InvalidInput("window length n must be at least 1".into()));
    }
    if mu.shift() != ga.shift() {
        return Err(Error::SpecMismatch);
    }
    let len = word_length(mu, ga, n);
    let count = mu.shift().count_words(len);
    if count > guard {
        return Err(Error::TooLarge { count, limit: guard });
    }
    let walk = CylinderWalk { mu, ga, n, len };
    let k = cutoffs.len();
    let (rho, hits, smooth) = walk.run(
        || (0.0, 0u64, vec![0.0; k]),
        |acc, mass, value| {
            let gap = value.abs() - delta_n;
            if gap < BOUNDARY_SNAP {
                acc.0 += mass;
                if gap.abs() < BOUNDARY_SNAP {
                    acc.1 += 1;
                }
            }
            for (s, chi) in acc.2.iter_mut().zip(cutoffs) {
                *s += mass * chi.eval(value / delta_n);
            }
        },
        |mut a, b| {
            a.0 += b.0;
            a.1 += b.1;
            a.2.iter_mut().zip(b.2).for_each(|(x, y)| *x += y);
            a
        },
    );
    Ok(CylinderStats { n, delta_n, rho_exact: rho, boundary_hits: hits, smooth, cylinders: count })
}

/// Value and boundary-hit count of the exact window mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactRho {
    pub rho: f64,
    pub boundary_hits: u64,
}

/// `μ{g^n − a·τ^n ∈ (−e^{−δn}, e^{−δn})}` by enumeration.
pub fn rho_exact(
    mu: &GibbsMeasure,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    a: f64,
    delta: f64,
    n: usize,
) -> Result<ExactRho> {
    let ga = Potential::linear_combination(&[(g, 1.0), (tau, -a)])?;
    let s = cylinder_statistics(mu, &ga, n, (-delta * n as f64).exp(), &[], ENUMERATION_GUARD)?;
    Ok(ExactRho { rho: s.rho_exact, boundary_hits: s.boundary_hits })
}

/// `∫ χ(δ_n^{-1} g_a^n) dμ` by enumeration.
pub fn rho_smooth_direct(
    mu: &GibbsMeasure,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    a: f64,
    delta: f64,
    n: usize,
    chi: &CutoffFunction,
) -> Result<f64> {
    let ga = Potential::linear_combination(&[(g, 1.0), (tau, -a)])?;
    let s = cylinder_statistics(mu, &ga, n, (-delta * n as f64).exp(), std::slice::from_ref(chi), ENUMERATION_GUARD)?;
    Ok(s.smooth[0])
}

/// Trapezoid rule on `[−u_max, u_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub u_max: f64,
    pub step: f64,
    /// Accepted relative change under step halving and under range doubling.
    pub tol: f64,
    /// Double `u_max` until the tail is resolved instead of failing.
    pub auto_range: bool,
    /// Largest number of nodes tried before giving up.
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { u_max: 200.0, step: 0.01, tol: 1e-6, auto_range: true, max_nodes: 1 << 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralRho {
    pub value: f64,
    /// Imaginary part of the integral, zero in exact arithmetic.
    pub imag: f64,
    pub u_max: f64,
    pub step: f64,
    /// Relative change under the last halving of the step.
    pub step_change: f64,
    /// Relative change under the last doubling of the range.
    pub range_change: f64,
}

/// `u ↦ ⟨L^n_{f0+(ξ+iu)g_a} 1, μ⟩` at a fixed `n`.
pub struct CharacteristicFunction {
    op: crate::operator::TransferOperator<f64>,
    psi: Vec<f64>,
    masses: Vec<f64>,
    n: usize,
}

/// Reusable buffers for [`CharacteristicFunction::eval_with`].
#[derive(Default)]
pub struct Scratch {
    twist: Vec<Complex64>,
    v: Vec<Complex64>,
    w: Vec<Complex64>,
}

impl CharacteristicFunction {
    /// `f0` must be normalized and `mu` its equilibrium state.
    pub fn new(f0: &Potential<f64>, mu: &GibbsMeasure, ga: &Potential<f64>, xi: f64, n: usize) -> Result<Self> {
        let depth = f0.depth().max(ga.depth()).max(mu.depth());
        let base = combine_real(f0, ga, ga, 0.0, xi)?.lift(depth)?;
        let psi = ga.lift(depth)?.values().to_vec();
        let (table, masses) = mu.marginal(depth)?;
        debug_assert_eq!(table.count(), psi.len());
        Ok(Self { op: build_operator(&base), psi, masses, n })
    }

    pub fn eval(&self, u: f64) -> Complex64 {
        self.eval_with(u, &mut Scratch::default())
    }

    /// `L_{φ+iuψ} v = L_φ(e^{iuψ} v)`: the twist multiplies before each step.
    pub fn eval_with(&self, u: f64, s: &mut Scratch) -> Complex64 {
        let dim = self.op.dim();
        s.twist.clear();
        s.twist.extend(self.psi.iter().map(|&p| Complex64::from_polar(1.0, u * p)));
        s.v.clear();
        s.v.resize(dim, Complex64::new(1.0, 0.0));
        s.w.resize(dim, Complex64::new(0.0, 0.0));
        for _ in 0..self.n {
            s.v.iter_mut().zip(&s.twist).for_each(|(x, t)| *x *= t);
            self.op.apply_into(&s.v, &mut s.w);
            std::mem::swap(&mut s.v, &mut s.w);
        }
        s.v.iter().zip(&self.masses).map(|(x, m)| x * m).sum()
    }
}

/// `Σ F(i·step)` over `i = lo, lo + stride, … ≤ hi`, summed in fixed chunks
/// so the result does not depend on scheduling.
fn node_sum(
    f: &(impl Fn(f64, &mut Scratch) -> Complex64 + Sync),
    step: f64,
    lo: i64,
    hi: i64,
    stride: i64,
) -> Complex64 {
    if hi < lo {
        return Complex64::new(0.0, 0.0);
    }
    let count = (hi - lo) / stride + 1;
    const CHUNK: i64 = 4096;
    let chunks: Vec<Complex64> = (0..(count + CHUNK - 1) / CHUNK)
        .into_par_iter()
        .map(|c| {
            let mut scratch = Scratch::default();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in c * CHUNK..((c + 1) * CHUNK).min(count) {
                acc += f((lo + j * stride) as f64 * step, &mut scratch);
            }
            acc
        })
        .collect();
    chunks.into_iter().sum()
}

/// Running trapezoid sum on the symmetric grid `{i·step : |i| ≤ half}`.
struct Trapezoid<'a, F> {
    f: &'a F,
    step: f64,
    half: i64,
    /// `Σ_{|i| ≤ half} F(i·step)`.
    sum: Complex64,
}

impl<F: Fn(f64, &mut Scratch) -> Complex64 + Sync> Trapezoid<'_, F> {
    fn value(&self) -> Complex64 {
        let mut s = Scratch::default();
        let end = self.half as f64 * self.step;
        (self.sum - ((self.f)(-end, &mut s) + (self.f)(end, &mut s)) * 0.5) * self.step
    }

    fn nodes(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    /// Same range at half the step, reusing the existing nodes.
    fn halved(&self) -> Self {
        let mids = node_sum(self.f, self.step / 2.0, -2 * self.half + 1, 2 * self.half - 1, 2);
        Trapezoid { f: self.f, step: self.step / 2.0, half: 2 * self.half, sum: self.sum + mids }
    }

    /// Twice the range at the same step, evaluating only the new nodes.
    fn widened(&self) -> Self {
        let h = self.half;
        let outer = node_sum(self.f, self.step, -2 * h, -h - 1, 1) + node_sum(self.f, self.step, h + 1, 2 * h, 1);
        Trapezoid { f: self.f, step: self.step, half: 2 * h, sum: self.sum + outer }
    }
}

/// Fourier-path evaluation of `∫ χ(δ_n^{-1} g_a^n) dμ`, certified by step
/// halving (at the initial and at the final range) and range doubling.
#[allow(clippy::too_many_arguments)]
pub fn rho_smooth_spectral(
    f0: &Potential<f64>,
    mu: &GibbsMeasure,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    a: f64,
    xi: f64,
    delta: f64,
    n: usize,
    chi: &CutoffFunction,
    quad: &QuadratureSpec,
) -> Result<SpectralRho> {
    if !(quad.u_max > 0.0 && quad.step > 0.0 && quad.u_max >= quad.step) {
        return Err(Error::InvalidInput(format!(
            "quadrature needs 0 < step ≤ u_max, got step {}, u_max {}",
            quad.step, quad.u_max
        )));
    }
    let ga = Potential::linear_combination(&[(g, 1.0), (tau, -a)])?;
    let delta_n = (-delta * n as f64).exp();
    let phi = CharacteristicFunction::new(f0, mu, &ga, xi, n)?;
    let integrand = |u: f64, s: &mut Scratch| {
        phi.eval_with(u, s) * chi.fourier_transform(Complex64::new(delta_n * u, -delta_n * xi))
    };
    let rel = |new: Complex64, old: Complex64| (new - old).norm() / new.re.abs().max(1e-300);
    let too_many = |nodes: usize, change: f64| {
        if nodes > quad.max_nodes {
            Err(Error::QuadratureUnderresolved { change, tol: quad.tol })
        } else {
            Ok(())
        }
    };

    let half = (quad.u_max / quad.step).round().max(1.0) as i64;
    let mut trap =
        Trapezoid { f: &integrand, step: quad.step, half, sum: node_sum(&integrand, quad.step, -half, half, 1) };
    let mut step_change = f64::INFINITY;
    loop {
        too_many(2 * trap.nodes(), step_change)?;
        let finer = trap.halved();
        step_change = rel(finer.value(), trap.value());
        if step_change <= quad.tol {
            break;
        }
        trap = finer;
    }
    loop {
        let mut range_change = f64::INFINITY;
        while range_change > quad.tol {
            too_many(2 * trap.nodes(), range_change)?;
            let wider = trap.widened();
            range_change = rel(wider.value(), trap.value());
            if range_change > quad.tol && !quad.auto_range {
                return Err(Error::QuadratureUnderresolved { change: range_change, tol: quad.tol });
            }
            trap = wider;
        }
        too_many(2 * trap.nodes(), range_change)?;
        let finer = trap.halved();
        step_change = rel(finer.value(), trap.value());
        if step_change <= quad.tol {
            let v = trap.value() * (delta_n / (2.0 * PI));
            return Ok(SpectralRho {
                value: v.re,
                imag: v.im,
                u_max: trap.half as f64 * trap.step,
                step: trap.step,
                step_change,
                range_change,
            });
        }
        trap = finer;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsymptoteMode {
    Indicator,
    Smooth,
}

/// `c·δ_n e^{nJ}/√(2πωn)` with `c = 2` (indicator) or `c = ∫χ` (smooth).
pub fn asymptote(rr: &RateReport, delta: f64, n: usize, mode: AsymptoteMode, chi: &CutoffFunction) -> f64 {
    let weight = match mode {
        AsymptoteMode::Indicator => 2.0,
        AsymptoteMode::Smooth => chi.integral(),
    };
    let n = n as f64;
    weight * (-delta * n).exp() * (n * rr.j).exp() / (2.0 * PI * rr.omega * n).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaConstraintReport {
    pub delta: f64,
    pub rho_hat: f64,
    /// `−log(rho_hat)/2`.
    pub ceiling: f64,
    pub delta_ok: bool,
    /// `n·rho_hatⁿ·e^{2δn} ≤ 1` on every checked `n`.
    pub sequence_ok: bool,
    pub worst_n: Option<usize>,
    pub worst_value: f64,
}

/// Advisory check of `δ ≤ −log ρ̂ / 2` and `n·ρ̂ⁿ·e^{2δn} ≤ 1` over `ns`.
pub fn delta_constraint_check(delta: f64, rho_hat: f64, ns: impl IntoIterator<Item = usize>) -> DeltaConstraintReport {
    let ceiling = -rho_hat.ln() / 2.0;
    let (worst_n, worst_value) = ns
        .into_iter()
        .map(|n| (n, n as f64 * (n as f64 * (rho_hat.ln() + 2.0 * delta)).exp()))
        .fold((None, f64::NEG_INFINITY), |acc, (n, v)| if v > acc.1 { (Some(n), v) } else { acc });
    DeltaConstraintReport {
        delta,
        rho_hat,
        ceiling,
        delta_ok: rho_hat > 0.0 && rho_hat < 1.0 && delta <= ceiling * (1.0 + 1e-12),
        sequence_ok: worst_value <= 1.0,
        worst_n,
        worst_value,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpConfig {
    pub a: f64,
    pub delta: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub cutoff: CutoffKind,
    pub quadrature: QuadratureSpec,
    pub guard: u128,
}

impl LdpConfig {
    pub fn ns(&self) -> impl Iterator<Item = usize> {
        let step = self.n_step.max(1);
        (self.n_min..=self.n_max).step_by(step).filter(|&n| n >= 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpRow {
    pub n: usize,
    pub delta_n: f64,
    /// `None` when the enumeration guard tripped.
    pub rho_exact: Option<f64>,
    pub boundary_hits: Option<u64>,
    pub rho_smooth_direct: Option<f64>,
    pub rho_smooth_spectral: f64,
    pub spectral_imag: f64,
    pub asymptote_indicator: f64,
    pub asymptote_smooth: f64,
    pub ratio_exact: Option<f64>,
    pub ratio_smooth: Option<f64>,
    /// `n·∫τ dμ`, the flow time scale of the window.
    pub t_n: f64,
    /// `C(a) = √(β''(ξ)·∫τ dμ / ω)`.
    pub c_a: f64,
}

#[derive(Clone, Debug)]
pub struct LdpTable {
    pub rate: RateReport,
    pub cutoff: CutoffFunction,
    pub rows: Vec<LdpRow>,
    /// Values of `n` whose enumeration exceeded the guard.
    pub guard_trips: Vec<usize>,
}

/// Everything needed to evaluate windows at one target average.
pub struct LdpSystem {
    pub f0: Potential<f64>,
    pub mu: GibbsMeasure,
    pub tau: Potential<f64>,
    pub g: Potential<f64>,
    pub ga: Potential<f64>,
    pub rate: RateReport,
}

impl LdpSystem {
    /// Builds `f0` and `μ` from a normalized curve and solves the rates at `a`.
    pub fn new(curve: &PressureCurve, a: f64) -> Result<Self> {
        let rate = rate_J(curve, a)?;
        let eigen = curve.settings().eigen;
        let sd = leading_eigendata(&build_operator(curve.f()), eigen)?;
        let f0 = normalize_potential(curve.f(), &sd, eigen.tol)?.reduced(0.0);
        let mu = GibbsMeasure::of_potential(&f0, eigen)?;
        let ga = curve.g_a(a)?;
        Ok(Self { f0, mu, tau: curve.tau().clone(), g: curve.g().clone(), ga, rate })
    }
}

pub fn build_ldp_table(curve: &PressureCurve, cfg: &LdpConfig) -> Result<LdpTable> {
    let sys = LdpSystem::new(curve, cfg.a)?;
    build_ldp_table_for(&sys, cfg)
}

pub fn build_ldp_table_for(sys: &LdpSystem, cfg: &LdpConfig) -> Result<LdpTable> {
    let chi = CutoffFunction::new(cfg.cutoff);
    let rr = &sys.rate;
    let c_a = (rr.diagnostics.beta_second * rr.mean_tau / rr.omega).sqrt();
    let mut rows = Vec::new();
    let mut guard_trips = Vec::new();
    for n in cfg.ns() {
        let delta_n = (-cfg.delta * n as f64).exp();
        let stats = match cylinder_statistics(&sys.mu, &sys.ga, n, delta_n, std::slice::from_ref(&chi), cfg.guard) {
            Ok(s) => Some(s),
            Err(Error::TooLarge { .. }) => {
                guard_trips.push(n);
                None
            }
            Err(e) => return Err(e),
        };
        let spectral =
            rho_smooth_spectral(&sys.f0, &sys.mu, &sys.tau, &sys.g, cfg.a, rr.xi, cfg.delta, n, &chi, &cfg.quadrature)?;
        let asym_ind = asymptote(rr, cfg.delta, n, AsymptoteMode::Indicator, &chi);
        let asym_smooth = asymptote(rr, cfg.delta, n, AsymptoteMode::Smooth, &chi);
        let rho_exact = stats.as_ref().map(|s| s.rho_exact);
        let rho_direct = stats.as_ref().map(|s| s.smooth[0]);
        rows.push(LdpRow {
            n,
            delta_n,
            rho_exact,
            boundary_hits: stats.as_ref().map(|s| s.boundary_hits),
            rho_smooth_direct: rho_direct,
            rho_smooth_spectral: spectral.value,
            spectral_imag: spectral.imag,
            asymptote_indicator: asym_ind,
            asymptote_smooth: asym_smooth,
            ratio_exact: rho_exact.map(|r| r / asym_ind),
            ratio_smooth: rho_direct.map(|r| r / asym_smooth),
            t_n: n as f64 * rr.mean_tau,
            c_a,
        });
    }
    Ok(LdpTable { rate: rr.clone(), cutoff: chi, rows, guard_trips })
}
