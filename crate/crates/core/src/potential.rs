//! Locally constant potentials and the frequency-weighted Hölder norms.

use std::fmt::Debug;
use std::sync::Arc;

use num_complex::{Complex64, ComplexFloat};

use crate::error::{Error, Result};
use crate::shift::{common_prefix, Subshift, Symbol, ThetaMetric, Word, WordTable};

/// Values a potential or a test function can take: `f64` or `Complex64`.
pub trait Scalar: ComplexFloat<Real = f64> + From<f64> + Send + Sync + Debug + 'static {}

impl<T> Scalar for T where T: ComplexFloat<Real = f64> + From<f64> + Send + Sync + Debug + 'static {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PotentialKind {
    #[default]
    Generic,
    /// Strictly positive return time.
    Roof,
    Observable,
}

/// A function of the first `depth` symbols, tabulated over the admissible
/// `depth`-words in lexicographic order.
#[derive(Clone, Debug)]
pub struct Potential<T = f64> {
    shift: Subshift,
    table: Arc<WordTable>,
    values: Vec<T>,
    kind: PotentialKind,
}

impl<T: Scalar> Potential<T> {
    pub fn new(shift: &Subshift, depth: usize, values: Vec<T>) -> Result<Self> {
        let table = shift.word_table(depth)?;
        if values.len() != table.count() {
            return Err(Error::InvalidInput(format!(
                "depth-{depth} potential needs {} values, got {}",
                table.count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential value".into()));
        }
        Ok(Self { shift: shift.clone(), table, values, kind: PotentialKind::Generic })
    }

    pub fn from_fn(shift: &Subshift, depth: usize, f: impl Fn(&[Symbol]) -> T) -> Result<Self> {
        let table = shift.word_table(depth)?;
        let values = table.iter().map(f).collect();
        Self::new(shift, depth, values)
    }

    pub fn constant(shift: &Subshift, value: T) -> Self {
        Self::from_fn(shift, 1, |_| value).expect("depth-1 table always exists")
    }

    pub fn zero(shift: &Subshift) -> Self {
        Self::constant(shift, T::zero())
    }

    pub fn with_kind(mut self, kind: PotentialKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn shift(&self) -> &Subshift {
        &self.shift
    }

    pub fn depth(&self) -> usize {
        self.table.word_len()
    }

    pub fn table(&self) -> &Arc<WordTable> {
        &self.table
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value on the cylinder of the first `depth` symbols of `symbols`.
    #[inline]
    pub fn value(&self, symbols: &[Symbol]) -> Result<T> {
        match self.table.index_of(symbols) {
            Some(i) => Ok(self.values[i]),
            None if symbols.len() < self.depth() => {
                Err(Error::WordTooShort { len: symbols.len(), needed: self.depth() })
            }
            None => Err(Error::InadmissibleWord { word: symbols.to_vec() }),
        }
    }

    /// Same function viewed at a larger depth.
    pub fn lift(&self, depth: usize) -> Result<Self> {
        if depth < self.depth() {
            return Err(Error::InvalidInput(format!("cannot lift depth {} to smaller depth {depth}", self.depth())));
        }
        if depth == self.depth() {
            return Ok(self.clone());
        }
        let table = self.shift.word_table(depth)?;
        let values =
            table.iter().map(|w| self.values[self.table.index_of(w).expect("prefix of admissible word")]).collect();
        Ok(Self { shift: self.shift.clone(), table, values, kind: self.kind })
    }

    /// Smallest depth that reproduces the table to within `tol`, with the
    /// values on the shorter words taken from the first extension.
    pub fn reduced(&self, tol: f64) -> Self {
        let mut current = self.clone();
        while current.depth() > 1 {
            let shorter = self.shift.word_table(current.depth() - 1).expect("shorter table");
            let mut values = vec![None::<T>; shorter.count()];
            let mut ok = true;
            for (w, &v) in current.table.iter().zip(&current.values) {
                let i = shorter.index_of(w).expect("prefix of admissible word");
                match values[i] {
                    None => values[i] = Some(v),
                    Some(u) if (u - v).abs() <= tol => {}
                    Some(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
            current = Self {
                shift: self.shift.clone(),
                table: shorter,
                values: values.into_iter().map(|v| v.expect("every prefix extends")).collect(),
                kind: self.kind,
            };
        }
        current
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Potential<U> {
        Potential {
            shift: self.shift.clone(),
            table: Arc::clone(&self.table),
            values: self.values.iter().map(|&v| f(v)).collect(),
            kind: self.kind,
        }
    }

    /// Pointwise `Σ c_i φ_i` at the largest depth among the terms.
    pub fn linear_combination(terms: &[(&Potential<T>, T)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidInput("empty combination".into()))?.0;
        if terms.iter().any(|(p, _)| p.shift != first.shift) {
            return Err(Error::SpecMismatch);
        }
        let depth = terms.iter().map(|(p, _)| p.depth()).max().unwrap();
        let table = first.shift.word_table(depth)?;
        let lifted: Vec<(Potential<T>, T)> =
            terms.iter().map(|(p, c)| Ok((p.lift(depth)?, *c))).collect::<Result<_>>()?;
        let values =
            (0..table.count()).map(|i| lifted.iter().fold(T::zero(), |acc, (p, c)| acc + *c * p.values[i])).collect();
        Ok(Self { shift: first.shift.clone(), table, values, kind: PotentialKind::Generic })
    }

    /// `Σ_{j<n} φ(σ^j w)`; needs `n + depth - 1` symbols.
    pub fn birkhoff_sum(&self, w: &[Symbol], n: usize) -> Result<T> {
        if n == 0 {
            return Ok(T::zero());
        }
        let needed = n + self.depth() - 1;
        if w.len() < needed {
            return Err(Error::WordTooShort { len: w.len(), needed });
        }
        (0..n).try_fold(T::zero(), |acc, j| Ok(acc + self.value(&w[j..])?))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl Potential<f64> {
    /// A roof function: real with strictly positive minimum.
    pub fn roof(shift: &Subshift, depth: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(shift, depth, values)?.into_roof()
    }

    pub fn into_roof(self) -> Result<Self> {
        let min = self.min();
        if min <= 0.0 {
            return Err(Error::InvalidInput(format!("roof positivity violated: min value {min}")));
        }
        Ok(self.with_kind(PotentialKind::Roof))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_complex(&self) -> Potential<Complex64> {
        self.map(Complex64::from)
    }
}

/// Free-function form of [`Potential::birkhoff_sum`].
pub fn birkhoff_sum<T: Scalar>(phi: &Potential<T>, w: &Word, n: usize) -> Result<T> {
    phi.birkhoff_sum(w.symbols(), n)
}

/// `f − s·τ + z·g` at the common depth.
pub fn combine(
    f: &Potential<f64>,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    s: Complex64,
    z: Complex64,
) -> Result<Potential<Complex64>> {
    Potential::linear_combination(&[
        (&f.to_complex(), Complex64::new(1.0, 0.0)),
        (&tau.to_complex(), -s),
        (&g.to_complex(), z),
    ])
}

/// Real-parameter form of [`combine`].
pub fn combine_real(
    f: &Potential<f64>,
    tau: &Potential<f64>,
    g: &Potential<f64>,
    s: f64,
    z: f64,
) -> Result<Potential<f64>> {
    Potential::linear_combination(&[(f, 1.0), (tau, -s), (g, z)])
}

/// Something that can be evaluated on sufficiently long admissible words.
pub trait WordFunction {
    fn shift(&self) -> &Subshift;
    /// Number of symbols an evaluation reads.
    fn eval_len(&self) -> usize;
    fn eval(&self, symbols: &[Symbol]) -> f64;
}

impl WordFunction for Potential<f64> {
    fn shift(&self) -> &Subshift {
        &self.shift
    }

    fn eval_len(&self) -> usize {
        self.depth()
    }

    fn eval(&self, symbols: &[Symbol]) -> f64 {
        self.value(symbols).expect("caller supplies eval_len admissible symbols")
    }
}

/// A closure reading the first `len` symbols of a word.
pub struct FnWordFunction<F> {
    shift: Subshift,
    len: usize,
    f: F,
}

impl<F: Fn(&[Symbol]) -> f64> FnWordFunction<F> {
    pub fn new(shift: &Subshift, len: usize, f: F) -> Self {
        Self { shift: shift.clone(), len, f }
    }
}

impl<F: Fn(&[Symbol]) -> f64> WordFunction for FnWordFunction<F> {
    fn shift(&self) -> &Subshift {
        &self.shift
    }

    fn eval_len(&self) -> usize {
        self.len
    }

    fn eval(&self, symbols: &[Symbol]) -> f64 {
        (self.f)(symbols)
    }
}

/// Depth-`m` approximation: each `m`-word takes the source value on its
/// lexicographically smallest admissible extension.
pub fn depth_truncate(source: &impl WordFunction, m: usize) -> Result<Potential<f64>> {
    let shift = source.shift().clone();
    let len = source.eval_len().max(m);
    Potential::from_fn(&shift, m, |w| source.eval(&shift.canonical_extension(w, len)))
}

/// `max |φ(w) − φ(w')| / θ^j` over pairs of words first differing at position `j`.
pub fn holder_seminorm_of<T: Scalar>(values: &[T], words: &WordTable, metric: &ThetaMetric) -> f64 {
    let theta = metric.theta();
    let mut best = 0.0f64;
    for i in 0..values.len() {
        let wi = words.word(i);
        for j in (i + 1)..values.len() {
            let diff = (values[i] - values[j]).abs();
            if diff == 0.0 {
                continue;
            }
            let prefix = common_prefix(wi, words.word(j));
            best = best.max(diff / theta.powi(prefix as i32));
        }
    }
    best
}

pub fn holder_seminorm<T: Scalar>(phi: &Potential<T>, metric: &ThetaMetric) -> f64 {
    holder_seminorm_of(&phi.values, &phi.table, metric)
}

/// The pieces of `‖h‖_{β,b} = ‖h‖_∞ + |h|_β / |b|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBundle {
    pub sup_norm: f64,
    pub holder_seminorm: f64,
    /// Hölder exponent with respect to `d_θ`; the exponent is absorbed into θ.
    pub beta: f64,
    pub theta: f64,
    pub b: f64,
    pub combined: f64,
}

pub fn norm_beta_b<T: Scalar>(h: &[T], words: &WordTable, metric: &ThetaMetric, b: f64) -> Result<NormBundle> {
    if !(b.abs() >= 1.0) {
        return Err(Error::BadFrequency(b));
    }
    if h.len() != words.count() {
        return Err(Error::InvalidInput("vector does not match word table".into()));
    }
    let sup_norm = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let holder = holder_seminorm_of(h, words, metric);
    Ok(NormBundle {
        sup_norm,
        holder_seminorm: holder,
        beta: 1.0,
        theta: metric.theta(),
        b,
        combined: sup_norm + holder / b.abs(),
    })
}
