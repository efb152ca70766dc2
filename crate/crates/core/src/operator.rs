//! Ruelle transfer operators restricted to depth-`m` locally constant functions.
//!
//! `L_φ v(x) = Σ_{σy = x} e^{φ(y)} v(y)` maps functions of the first `m`
//! symbols to functions of the first `m` symbols whenever `φ` has depth `m`,
//! so on that subspace the operator is an exact sparse matrix indexed by the
//! admissible `m`-words: row `w`, column `j·w[..m-1]`, entry `e^{φ(j·w[..m-1])}`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{combine, Potential, Scalar};
use crate::shift::{Subshift, Symbol, Word, WordTable};

#[derive(Clone, Debug)]
pub struct TransferOperator<T = f64> {
    potential: Potential<T>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
}

/// Operator of `phi` at the depth of `phi`.
pub fn build_operator<T: Scalar>(phi: &Potential<T>) -> TransferOperator<T> {
    let table = phi.table();
    let shift = phi.shift();
    let m = phi.depth();
    let mut row_ptr = Vec::with_capacity(table.count() + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    let mut from = vec![0 as Symbol; m];
    row_ptr.push(0);
    for w in table.iter() {
        from[1..].copy_from_slice(&w[..m - 1]);
        for j in shift.preimage_symbols(w[0]) {
            from[0] = j;
            let col = table.index_of(&from).expect("preimage word is admissible");
            cols.push(col as u32);
            weights.push(phi.values()[col].exp());
        }
        row_ptr.push(cols.len());
    }
    TransferOperator { potential: phi.clone(), row_ptr, cols, weights }
}

impl<T: Scalar> TransferOperator<T> {
    /// Operator of `phi` lifted to `depth`.
    pub fn at_depth(phi: &Potential<T>, depth: usize) -> Result<Self> {
        Ok(build_operator(&phi.lift(depth)?))
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn depth(&self) -> usize {
        self.potential.depth()
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn table(&self) -> &Arc<WordTable> {
        self.potential.table()
    }

    pub fn shift(&self) -> &Subshift {
        self.potential.shift()
    }

    /// `(row, col, entry)` triples of the nonzero entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |e| (r, self.cols[e] as usize, self.weights[e]))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.dim()]; self.dim()];
        for (r, c, v) in self.entries() {
            out[r][c] = v;
        }
        out
    }

    pub fn apply<V>(&self, v: &[V]) -> Vec<V>
    where
        V: Scalar + std::ops::Mul<T, Output = V>,
    {
        let mut out = vec![V::zero(); self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// [`Self::apply`] writing into `out`.
    pub fn apply_into<V>(&self, v: &[V], out: &mut [V])
    where
        V: Scalar + std::ops::Mul<T, Output = V>,
    {
        assert_eq!(v.len(), self.dim(), "dimension mismatch");
        assert_eq!(out.len(), self.dim(), "dimension mismatch");
        for (r, o) in out.iter_mut().enumerate() {
            *o = (self.row_ptr[r]..self.row_ptr[r + 1])
                .fold(V::zero(), |acc, e| acc + v[self.cols[e] as usize] * self.weights[e]);
        }
    }

    /// `vᵀ L`, i.e. the action of the dual operator on cylinder masses.
    pub fn apply_adjoint(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim(), "dimension mismatch");
        let mut out = vec![T::zero(); self.dim()];
        for (r, c, w) in self.entries() {
            out[c] = out[c] + v[r] * w;
        }
        out
    }
}

/// `L^iters h`, no normalization.
pub fn apply_iterated<T, V>(op: &TransferOperator<T>, h: &[V], iters: usize) -> Vec<V>
where
    T: Scalar,
    V: Scalar + std::ops::Mul<T, Output = V>,
{
    let mut v = h.to_vec();
    for _ in 0..iters {
        v = op.apply(&v);
    }
    v
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Relative eigen-residual target.
    pub tol: f64,
    /// Defaults to `max(100·dim·ln dim, 10_000)`.
    pub max_iters: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: None }
    }
}

/// Leading eigendata of a nonnegative primitive operator.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub table: Arc<WordTable>,
    pub lambda: f64,
    pub pressure: f64,
    /// Right eigenvector, normalized by `Σ h·ν̂ = 1`.
    pub h: Vec<f64>,
    /// Left eigenvector as a probability vector (eigenmeasure cylinder masses).
    pub nu_hat: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralData {
    pub fn depth(&self) -> usize {
        self.table.word_len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain power iterations before switching to the lazy operator `L + λ̂·I`.
const PLAIN_ITERS: usize = 300;

/// Power iteration on both sides with per-step renormalization; once the
/// residual reaches `tol` iteration continues while it keeps improving.
///
/// Weights that nearly force a cycle put other eigenvalues close to the circle
/// `|z| = λ`; if plain iteration has not converged after a few hundred steps it
/// continues on `L + λ̂·I`, whose only eigenvalue of modulus `λ + λ̂` is the
/// Perron one.
pub fn leading_eigendata(op: &TransferOperator<f64>, opts: EigenOptions) -> Result<SpectralData> {
    let n = op.dim();
    if op.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("operator entries must be finite and nonnegative".into()));
    }
    let default_iters = (100.0 * n as f64 * (n as f64).ln()).ceil() as usize;
    let max_iters = opts.max_iters.unwrap_or(default_iters.max(10_000));

    let mut h = vec![1.0; n];
    let mut nu = vec![1.0 / n as f64; n];
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut converged_at = None;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut lazy_mode = false;
    for it in 1..=max_iters {
        iterations = it;
        let mh = op.apply(&h);
        let nm = op.apply_adjoint(&nu);
        let lambda = dot(&nu, &mh) / dot(&nu, &h);
        let hmax = h.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let res_r = mh.iter().zip(&h).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) / (lambda * hmax);
        let res_l =
            nm.iter().zip(&nu).map(|(a, b)| (a - lambda * b).abs()).sum::<f64>() / (lambda * nu.iter().sum::<f64>());
        residual = res_r.max(res_l);
        if !residual.is_finite() {
            return Err(Error::NonFinite("power iteration residual".into()));
        }

        lazy_mode |= it > PLAIN_ITERS && converged_at.is_none();
        let lazy = if lazy_mode { lambda } else { 0.0 };
        let mh: Vec<f64> = mh.iter().zip(&h).map(|(a, b)| a + lazy * b).collect();
        let nm: Vec<f64> = nm.iter().zip(&nu).map(|(a, b)| a + lazy * b).collect();
        let scale = mh.iter().fold(0.0f64, |a, &x| a.max(x));
        h = mh.into_iter().map(|x| x / scale).collect();
        let total: f64 = nm.iter().sum();
        nu = nm.into_iter().map(|x| x / total).collect();

        if residual <= opts.tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if converged_at.is_some() {
            if residual < best * 0.999 {
                best = residual;
                stalled = 0;
            } else {
                stalled += 1;
            }
            if stalled >= 8 || residual <= 1e-15 || it - converged_at.unwrap() > 500 {
                break;
            }
        }
    }
    if converged_at.is_none() {
        return Err(Error::NoConvergence { max_iters, residual });
    }

    let mh = op.apply(&h);
    let lambda = dot(&nu, &mh) / dot(&nu, &h);
    let scale = dot(&h, &nu);
    let h: Vec<f64> = h.into_iter().map(|x| x / scale).collect();
    if h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NonFinite("eigenvector is not strictly positive".into()));
    }
    let mh = op.apply(&h);
    let nm = op.apply_adjoint(&nu);
    let res_r = mh.iter().zip(&h).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
    let res_l: f64 = nm.iter().zip(&nu).map(|(a, b)| (a - lambda * b).abs()).sum();
    Ok(SpectralData {
        table: Arc::clone(op.table()),
        lambda,
        pressure: lambda.ln(),
        h,
        nu_hat: nu,
        residual: res_r.max(res_l).max(residual * lambda),
        iterations,
    })
}

/// `f⁽⁰⁾ = f + ln h(u) − ln h(σu) − ln λ` on words one symbol longer than the
/// eigendata, checked against `‖L_{f⁽⁰⁾} 1 − 1‖_∞ ≤ 10·tol`.
pub fn normalize_potential(f: &Potential<f64>, sd: &SpectralData, tol: f64) -> Result<Potential<f64>> {
    let m = sd.depth();
    let f = f.lift(m)?;
    let shift = f.shift().clone();
    let table = &sd.table;
    let ln_lambda = sd.lambda.ln();
    let f0 = Potential::from_fn(&shift, m + 1, |y| {
        let here = table.index_of(y).expect("prefix is admissible");
        let next = table.index_of(&y[1..]).expect("suffix is admissible");
        f.values()[here] + sd.h[here].ln() - sd.h[next].ln() - ln_lambda
    })?;
    let ones = vec![1.0; f0.table().count()];
    let deviation = build_operator(&f0).apply(&ones).iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let bound = 10.0 * tol;
    if !(deviation <= bound) {
        return Err(Error::NormalizationFailed { deviation, bound });
    }
    Ok(f0)
}

/// Equilibrium state of a depth-`m` potential as an `m`-block Markov chain.
#[derive(Clone, Debug)]
pub struct GibbsMeasure {
    shift: Subshift,
    table: Arc<WordTable>,
    initial: Vec<f64>,
    /// Row-major `dim × k`: probability of appending symbol `x` to block `w`.
    transition: Vec<f64>,
    successor: Vec<u32>,
    generator: SpectralData,
}

impl GibbsMeasure {
    /// Builds the chain from `op` and its leading eigendata:
    /// `P(w → w[1..]x) = e^{φ(w)} ν̂(w[1..]x) / (λ ν̂(w))`, rows renormalized.
    pub fn new(op: &TransferOperator<f64>, sd: SpectralData) -> Result<Self> {
        let shift = op.shift().clone();
        let table = Arc::clone(op.table());
        if table.word_len() != sd.depth() {
            return Err(Error::InvalidInput("eigendata depth differs from operator depth".into()));
        }
        let k = shift.k();
        let m = table.word_len();
        let n = table.count();
        let mut transition = vec![0.0; n * k];
        let mut successor = vec![u32::MAX; n * k];
        let mut next = vec![0 as Symbol; m];
        for (r, w) in table.iter().enumerate() {
            let weight = op.potential().values()[r].exp() / (sd.lambda * sd.nu_hat[r]);
            next[..m - 1].copy_from_slice(&w[1..]);
            let mut row_sum = 0.0;
            for x in shift.successor_symbols(w[m - 1]) {
                next[m - 1] = x;
                let c = table.index_of(&next).expect("successor block is admissible");
                let p = weight * sd.nu_hat[c];
                transition[r * k + x as usize] = p;
                successor[r * k + x as usize] = c as u32;
                row_sum += p;
            }
            for p in &mut transition[r * k..(r + 1) * k] {
                *p /= row_sum;
            }
        }
        let mut initial: Vec<f64> = sd.h.iter().zip(&sd.nu_hat).map(|(a, b)| a * b).collect();
        let total: f64 = initial.iter().sum();
        initial.iter_mut().for_each(|p| *p /= total);

        let mut pushed = vec![0.0; n];
        for r in 0..n {
            for x in 0..k {
                let c = successor[r * k + x];
                if c != u32::MAX {
                    pushed[c as usize] += initial[r] * transition[r * k + x];
                }
            }
        }
        let deviation: f64 = pushed.iter().zip(&initial).map(|(a, b)| (a - b).abs()).sum();
        if !(deviation <= 1e-10) {
            return Err(Error::NotStationary(deviation));
        }
        Ok(Self { shift, table, initial, transition, successor, generator: sd })
    }

    /// Equilibrium state of `phi` at its own depth.
    pub fn of_potential(phi: &Potential<f64>, opts: EigenOptions) -> Result<Self> {
        let op = build_operator(phi);
        let sd = leading_eigendata(&op, opts)?;
        Self::new(&op, sd)
    }

    pub fn depth(&self) -> usize {
        self.table.word_len()
    }

    pub fn shift(&self) -> &Subshift {
        &self.shift
    }

    pub fn table(&self) -> &Arc<WordTable> {
        &self.table
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn generator(&self) -> &SpectralData {
        &self.generator
    }

    /// Transition from block `from` by appending `symbol`: `(next block, probability)`.
    #[inline]
    pub fn step(&self, from: usize, symbol: Symbol) -> Option<(usize, f64)> {
        let e = from * self.shift.k() + symbol as usize;
        match self.successor[e] {
            u32::MAX => None,
            c => Some((c as usize, self.transition[e])),
        }
    }

    /// Mass of the cylinder `[w]`; zero for inadmissible words.
    pub fn cylinder_mass(&self, w: &[Symbol]) -> f64 {
        let m = self.depth();
        if w.len() < m {
            return self.table.iter().zip(&self.initial).filter(|(b, _)| b.starts_with(w)).map(|(_, p)| p).sum();
        }
        let Some(mut idx) = self.table.index_of(w) else {
            return 0.0;
        };
        let mut mass = self.initial[idx];
        for &x in &w[m..] {
            match self.step(idx, x) {
                Some((next, p)) => {
                    idx = next;
                    mass *= p;
                }
                None => return 0.0,
            }
        }
        mass
    }

    /// Masses of all admissible `len`-words, in table order.
    pub fn marginal(&self, len: usize) -> Result<(Arc<WordTable>, Vec<f64>)> {
        let t = self.shift.word_table(len)?;
        let masses = t.iter().map(|w| self.cylinder_mass(w)).collect();
        Ok((t, masses))
    }

    /// `∫ φ dμ` for a potential of any depth.
    pub fn expect(&self, phi: &Potential<f64>) -> Result<f64> {
        if phi.shift() != &self.shift {
            return Err(Error::SpecMismatch);
        }
        let depth = phi.depth().max(self.depth());
        let (t, masses) = self.marginal(depth)?;
        let lifted = phi.lift(depth)?;
        debug_assert_eq!(t.count(), lifted.values().len());
        Ok(lifted.values().iter().zip(&masses).map(|(v, p)| v * p).sum())
    }

    /// `∫ v dμ` for a depth-`d` vector given over the words of `table`.
    pub fn pair<V: Scalar + std::ops::Mul<f64, Output = V>>(&self, table: &WordTable, v: &[V]) -> Result<V> {
        let (t, masses) = self.marginal(table.word_len().max(self.depth()))?;
        let mut acc = V::zero();
        for (w, p) in t.iter().zip(&masses) {
            let i = table.index_of(w).expect("prefix is admissible");
            acc = acc + v[i] * *p;
        }
        Ok(acc)
    }
}

pub fn gibbs_cylinder_mass(mu: &GibbsMeasure, w: &Word) -> f64 {
    mu.cylinder_mass(w.symbols())
}

/// `M_{ac} = L_{f_{ac}}` with `f_{ac}` the normalization of `f − aτ + cg`;
/// `M_{ac} 1 = 1` and its spectral radius is 1.
#[derive(Clone, Debug)]
pub struct NormalizedOperator {
    pub a: f64,
    pub c: f64,
    pub spectral: SpectralData,
    pub potential: Potential<f64>,
    pub operator: TransferOperator<f64>,
}

impl NormalizedOperator {
    pub fn new(
        f: &Potential<f64>,
        tau: &Potential<f64>,
        g: &Potential<f64>,
        a: f64,
        c: f64,
        opts: EigenOptions,
    ) -> Result<Self> {
        let phi = Potential::linear_combination(&[(f, 1.0), (tau, -a), (g, c)])?;
        let sd = leading_eigendata(&build_operator(&phi), opts)?;
        let potential = normalize_potential(&phi, &sd, opts.tol)?.reduced(0.0);
        let operator = build_operator(&potential);
        Ok(Self { a, c, spectral: sd, potential, operator })
    }

    pub fn lambda(&self) -> f64 {
        self.spectral.lambda
    }
}

/// Largest discrepancy between `L^m_{f−(a+ib)τ} h` and
/// `L^m_{f−(P+a+ib)τ}(e^{P τ^m} h)`, both evaluated as exact matrix expressions.
pub fn conjugation_identity_check(
    f: &Potential<f64>,
    tau: &Potential<f64>,
    a: f64,
    b: f64,
    p: f64,
    h: &Potential<Complex64>,
    m_iters: usize,
) -> Result<f64> {
    if m_iters == 0 {
        return Err(Error::InvalidInput("need at least one iterate".into()));
    }
    let depth = f.depth().max(tau.depth() + m_iters - 1).max(h.depth());
    let zero = Potential::zero(f.shift());
    let none = Complex64::new(0.0, 0.0);
    let left = TransferOperator::at_depth(&combine(f, tau, &zero, Complex64::new(a, b), none)?, depth)?;
    let right = TransferOperator::at_depth(&combine(f, tau, &zero, Complex64::new(p + a, b), none)?, depth)?;
    let h = h.lift(depth)?;
    let lhs = apply_iterated(&left, h.values(), m_iters);
    let weighted: Vec<Complex64> = h
        .table()
        .iter()
        .zip(h.values())
        .map(|(w, &v)| Ok(v * (p * tau.birkhoff_sum(w, m_iters)?).exp()))
        .collect::<Result<_>>()?;
    let rhs = apply_iterated(&right, &weighted, m_iters);
    Ok(lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}
