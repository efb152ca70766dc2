//! One-sided subshifts of finite type at finite resolution.
//!
//! A point of the shift space is only ever seen through a finite word, so every
//! quantity of depth `d` evaluated over `n` steps is computed from words of
//! length `n + d - 1`. Words are enumerated in lexicographic order.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

pub type Symbol = u8;

/// Largest dense lookup table built for a word length (`k^len` entries).
const MAX_TABLE_CODES: usize = 1 << 24;

/// Checks that `rows` is a primitive 0/1 matrix: no empty row or column and
/// some power `A^p` with `p <= k^2 + 1` is entrywise positive.
pub fn validate_subshift(k: usize, rows: &[Vec<u8>]) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("alphabet size {k} < 2")));
    }
    if k > Symbol::MAX as usize + 1 {
        return Err(Error::InvalidInput(format!("alphabet size {k} exceeds 256")));
    }
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput(format!("transition matrix must be {k}x{k}")));
    }
    if let Some(&v) = rows.iter().flatten().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("transition entry {v} is not 0 or 1")));
    }
    for i in 0..k {
        if rows[i].iter().all(|&v| v == 0) {
            return Err(Error::EmptyRowOrColumn { axis: "row", index: i });
        }
        if rows.iter().all(|r| r[i] == 0) {
            return Err(Error::EmptyRowOrColumn { axis: "column", index: i });
        }
    }

    let a: Vec<bool> = rows.iter().flatten().map(|&v| v == 1).collect();
    let bound = k * k + 1;
    let mut power = a.clone();
    for _ in 1..=bound {
        if power.iter().all(|&v| v) {
            return Ok(());
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for l in 0..k {
                if !power[i * k + l] {
                    continue;
                }
                for j in 0..k {
                    next[i * k + j] |= a[l * k + j];
                }
            }
        }
        power = next;
    }
    Err(Error::NotIrreducibleAperiodic { power: bound })
}

/// A validated one-sided subshift of finite type. Cheap to clone.
#[derive(Clone)]
pub struct Subshift {
    inner: Arc<ShiftInner>,
}

struct ShiftInner {
    k: usize,
    allowed: Vec<bool>,
    tables: Mutex<HashMap<usize, Arc<WordTable>>>,
}

impl fmt::Debug for Subshift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subshift").field("k", &self.k()).field("rows", &self.rows()).finish()
    }
}

impl PartialEq for Subshift {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.k == other.inner.k && self.inner.allowed == other.inner.allowed)
    }
}

impl Subshift {
    pub fn new(k: usize, rows: &[Vec<u8>]) -> Result<Self> {
        validate_subshift(k, rows)?;
        Ok(Self {
            inner: Arc::new(ShiftInner {
                k,
                allowed: rows.iter().flatten().map(|&v| v == 1).collect(),
                tables: Mutex::new(HashMap::new()),
            }),
        })
    }

    /// The full shift on `k` symbols.
    pub fn full(k: usize) -> Result<Self> {
        Self::new(k, &vec![vec![1; k]; k])
    }

    /// The golden-mean shift: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        Self::new(2, &[vec![1, 1], vec![1, 0]]).expect("golden-mean matrix is primitive")
    }

    pub fn k(&self) -> usize {
        self.inner.k
    }

    #[inline]
    pub fn allows(&self, from: Symbol, to: Symbol) -> bool {
        self.inner.allowed[from as usize * self.inner.k + to as usize]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.inner.allowed.chunks(self.inner.k).map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    pub fn is_admissible(&self, symbols: &[Symbol]) -> bool {
        symbols.iter().all(|&s| (s as usize) < self.k()) && symbols.windows(2).all(|p| self.allows(p[0], p[1]))
    }

    /// All `j` with `A(j, first_symbol) = 1`, in increasing order.
    pub fn preimage_symbols(&self, first_symbol: Symbol) -> Vec<Symbol> {
        (0..self.k() as Symbol).filter(|&j| self.allows(j, first_symbol)).collect()
    }

    /// All `j` with `A(last_symbol, j) = 1`, in increasing order.
    pub fn successor_symbols(&self, last_symbol: Symbol) -> Vec<Symbol> {
        (0..self.k() as Symbol).filter(|&j| self.allows(last_symbol, j)).collect()
    }

    /// Number of admissible words of length `n`, i.e. the entry sum of `A^(n-1)`.
    pub fn count_words(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let k = self.k();
        let mut ending = vec![1u128; k];
        for _ in 1..n {
            let mut next = vec![0u128; k];
            for (i, &c) in ending.iter().enumerate() {
                for (j, slot) in next.iter_mut().enumerate() {
                    if self.allows(i as Symbol, j as Symbol) {
                        *slot = slot.saturating_add(c);
                    }
                }
            }
            ending = next;
        }
        ending.iter().fold(0u128, |acc, &c| acc.saturating_add(c))
    }

    /// Lexicographic stream of the admissible words of length `n`.
    pub fn admissible_words(&self, n: usize) -> AdmissibleWords {
        AdmissibleWords { shift: self.clone(), current: Vec::with_capacity(n), n, started: false, done: false }
    }

    /// Extends `prefix` by the lexicographically smallest admissible
    /// continuation up to length `len`.
    pub fn canonical_extension(&self, prefix: &[Symbol], len: usize) -> Vec<Symbol> {
        let mut out = prefix.to_vec();
        if out.is_empty() && len > 0 {
            out.push(0);
        }
        while out.len() < len {
            let last = *out.last().unwrap();
            let next =
                (0..self.k() as Symbol).find(|&j| self.allows(last, j)).expect("validated matrix has no empty row");
            out.push(next);
        }
        out.truncate(len.max(prefix.len()));
        out
    }

    /// Indexed table of the admissible words of length `len`, cached per shift.
    pub fn word_table(&self, len: usize) -> Result<Arc<WordTable>> {
        let mut cache = self.inner.tables.lock().expect("word table cache poisoned");
        if let Some(t) = cache.get(&len) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(WordTable::build(self, len)?);
        cache.insert(len, Arc::clone(&table));
        Ok(table)
    }
}

/// Streaming lexicographic enumeration, see [`Subshift::admissible_words`].
pub struct AdmissibleWords {
    shift: Subshift,
    current: Vec<Symbol>,
    n: usize,
    started: bool,
    done: bool,
}

impl AdmissibleWords {
    fn fill_from(&mut self, pos: usize) {
        self.current.truncate(pos + 1);
        let ext = self.shift.canonical_extension(&self.current, self.n);
        self.current = ext;
    }
}

impl Iterator for AdmissibleWords {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if self.n == 0 {
            self.done = true;
            return Some(Word(Vec::new()));
        }
        if !self.started {
            self.started = true;
            self.current = self.shift.canonical_extension(&[], self.n);
            return Some(Word(self.current.clone()));
        }
        let k = self.shift.k() as Symbol;
        for pos in (0..self.n).rev() {
            let start = self.current[pos] as usize + 1;
            let candidate = (start..k as usize)
                .map(|s| s as Symbol)
                .find(|&s| pos == 0 || self.shift.allows(self.current[pos - 1], s));
            if let Some(s) = candidate {
                self.current[pos] = s;
                self.fill_from(pos);
                return Some(Word(self.current.clone()));
            }
        }
        self.done = true;
        None
    }
}

/// A finite admissible word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(shift: &Subshift, symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput("words have length at least 1".into()));
        }
        if !shift.is_admissible(&symbols) {
            return Err(Error::InadmissibleWord { word: symbols });
        }
        Ok(Word(symbols))
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Symbol {
        self.0[0]
    }

    /// `σ^n w`: drops the first `n` symbols.
    pub fn shifted(&self, n: usize) -> Word {
        Word(self.0[n.min(self.0.len())..].to_vec())
    }

    /// `j·w`, checked for admissibility.
    pub fn prepend(&self, shift: &Subshift, j: Symbol) -> Result<Word> {
        let mut s = Vec::with_capacity(self.0.len() + 1);
        s.push(j);
        s.extend_from_slice(&self.0);
        Word::new(shift, s)
    }
}

impl AsRef<[Symbol]> for Word {
    fn as_ref(&self) -> &[Symbol] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_word(f, &self.0)
    }
}

pub(crate) fn write_word(f: &mut impl fmt::Write, symbols: &[Symbol]) -> fmt::Result {
    let wide = symbols.iter().any(|&s| s > 9);
    for (i, s) in symbols.iter().enumerate() {
        if wide && i > 0 {
            f.write_char('.')?;
        }
        write!(f, "{s}")?;
    }
    Ok(())
}

/// Admissible words of one length with a dense index.
#[derive(Debug)]
pub struct WordTable {
    len: usize,
    k: usize,
    words: Vec<Symbol>,
    lookup: Vec<u32>,
}

impl WordTable {
    fn build(shift: &Subshift, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidInput("depth must be at least 1".into()));
        }
        let k = shift.k();
        let codes = (k as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
        if codes > MAX_TABLE_CODES as u128 {
            return Err(Error::TooLarge { count: codes, limit: MAX_TABLE_CODES as u128 });
        }
        let mut lookup = vec![u32::MAX; codes as usize];
        let mut words = Vec::new();
        for (i, w) in shift.admissible_words(len).enumerate() {
            lookup[encode(k, w.symbols())] = i as u32;
            words.extend_from_slice(w.symbols());
        }
        Ok(Self { len, k, words, lookup })
    }

    /// Word length of this table.
    pub fn word_len(&self) -> usize {
        self.len
    }

    pub fn count(&self) -> usize {
        self.words.len() / self.len
    }

    pub fn word(&self, i: usize) -> &[Symbol] {
        &self.words[i * self.len..(i + 1) * self.len]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[Symbol]> {
        self.words.chunks(self.len)
    }

    /// Index of the first `word_len` symbols of `symbols`.
    #[inline]
    pub fn index_of(&self, symbols: &[Symbol]) -> Option<usize> {
        if symbols.len() < self.len || symbols[..self.len].iter().any(|&s| s as usize >= self.k) {
            return None;
        }
        match self.lookup[encode(self.k, &symbols[..self.len])] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }
}

#[inline]
fn encode(k: usize, symbols: &[Symbol]) -> usize {
    symbols.iter().fold(0usize, |acc, &s| acc * k + s as usize)
}

/// The symbolic metric `d_θ(x, y) = θ^m`, `m` the common-prefix length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaMetric {
    theta: f64,
}

impl Default for ThetaMetric {
    fn default() -> Self {
        Self { theta: 0.5 }
    }
}

impl ThetaMetric {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!("theta = {theta} not in (0, 1)")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Distance between two words; `0` when they are identical.
    pub fn distance(&self, w1: &[Symbol], w2: &[Symbol]) -> f64 {
        let common = common_prefix(w1, w2);
        if common == w1.len() && common == w2.len() {
            0.0
        } else {
            self.theta.powi(common as i32)
        }
    }
}

/// Free-function form of [`ThetaMetric::distance`].
pub fn d_theta(metric: &ThetaMetric, w1: &Word, w2: &Word) -> f64 {
    metric.distance(w1.symbols(), w2.symbols())
}

pub(crate) fn common_prefix(a: &[Symbol], b: &[Symbol]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}
