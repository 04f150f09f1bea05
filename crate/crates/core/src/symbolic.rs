//! Finite words, word-tree traversal and level-k locally constant potentials.
//!
//! Words are sequences of zero-based *local* symbols `0..ℓ` over a finite
//! alphabet whose `j`-th symbol carries the matrix `maps[j]`. Traversal is a
//! depth-first walk that keeps one partial product per depth, so each
//! visited node costs a single matrix multiply.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Default cap on visited words for a single enumeration.
pub const DEFAULT_WORD_BUDGET: u64 = 20_000_000;

/// Target number of independent subtrees for parallel traversal.
const PARALLEL_SPLIT_TARGET: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(symbols: Vec<u32>) -> Self {
        Self(symbols)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// From one-based digits, e.g. `[1, 2, 1, 1]` for the word `1211`.
    pub fn from_one_based(digits: &[usize]) -> Self {
        Self(digits.iter().map(|&d| (d - 1) as u32).collect())
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `ω|_n`
    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `T_{ω_1} ⋯ T_{ω_n}`; the empty word gives the identity.
    pub fn product(&self, maps: &[SquareMatrix]) -> SquareMatrix {
        let dim = maps[0].dim();
        let mut acc = SquareMatrix::identity(dim);
        let mut tmp = acc.clone();
        for &s in &self.0 {
            acc.mul_into(&maps[s as usize], &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
        }
        acc
    }

    /// Index of the word among all words of its length in lexicographic order.
    pub fn rank(&self, alphabet_size: usize) -> usize {
        rank_of(&self.0, alphabet_size)
    }

    pub fn from_rank(mut rank: usize, len: usize, alphabet_size: usize) -> Word {
        let mut v = vec![0u32; len];
        for slot in v.iter_mut().rev() {
            *slot = (rank % alphabet_size) as u32;
            rank /= alphabet_size;
        }
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        if self.0.iter().all(|&s| s < 9) {
            for s in &self.0 {
                write!(f, "{}", s + 1)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| (s + 1).to_string()).collect();
            f.write_str(&parts.join("-"))
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

#[inline]
pub fn rank_of(symbols: &[u32], alphabet_size: usize) -> usize {
    symbols.iter().fold(0usize, |acc, &s| acc * alphabet_size + s as usize)
}

/// `ℓ^n` as a float, for budget checks that must not overflow.
pub fn word_count(alphabet_size: usize, n: usize) -> f64 {
    (alphabet_size as f64).powi(n as i32)
}

pub fn check_budget(alphabet_size: usize, n: usize, budget: u64) -> Result<()> {
    let words = word_count(alphabet_size, n);
    if words > budget as f64 {
        return Err(Error::DepthOverflow { words, budget });
    }
    Ok(())
}

/// Depth-first walk of all length-`n` words below `prefix`.
///
/// `prune(depth, product)` is consulted at every internal node and leaf;
/// returning `true` cuts the subtree. Returns the number of visited nodes.
fn walk<P, V>(
    maps: &[SquareMatrix],
    prefix: &[u32],
    n: usize,
    prune: &P,
    budget: u64,
    visit: &mut V,
) -> Result<u64>
where
    P: Fn(usize, &SquareMatrix) -> bool + ?Sized,
    V: FnMut(&[u32], &SquareMatrix),
{
    let ell = maps.len() as u32;
    let dim = maps[0].dim();
    let root = Word::new(prefix.to_vec()).product(maps);
    if prefix.len() >= n {
        visit(prefix, &root);
        return Ok(1);
    }
    if !prefix.is_empty() && prune(prefix.len(), &root) {
        return Ok(0);
    }
    let base = prefix.len();
    let mut word: Vec<u32> = prefix.to_vec();
    word.resize(n, 0);
    // spine[j] is the product of word[..base + j]
    let mut spine: Vec<SquareMatrix> = vec![SquareMatrix::identity(dim); n - base + 1];
    spine[0] = root;
    let mut next = vec![0u32; n - base + 1];
    let mut depth = 0usize;
    let mut visited = 0u64;
    loop {
        if next[depth] == ell {
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        let sym = next[depth];
        next[depth] += 1;
        word[base + depth] = sym;
        let (head, tail) = spine.split_at_mut(depth + 1);
        head[depth].mul_into(&maps[sym as usize], &mut tail[0]);
        visited += 1;
        if visited > budget {
            return Err(Error::DepthOverflow {
                words: visited as f64,
                budget,
            });
        }
        if prune(base + depth + 1, &tail[0]) {
            continue;
        }
        if base + depth + 1 == n {
            visit(&word, &tail[0]);
        } else {
            depth += 1;
            next[depth] = 0;
        }
    }
    Ok(visited)
}

/// Visits every length-`n` word with its product `T_{ω_1}⋯T_{ω_n}`.
///
/// Without a prune the full count `ℓ^n` is checked against `budget` up
/// front; with a prune the visited-node count is enforced during the walk.
pub fn enumerate_words<V>(
    maps: &[SquareMatrix],
    n: usize,
    prune: Option<&(dyn Fn(&SquareMatrix) -> bool + Sync)>,
    budget: u64,
    mut visit: V,
) -> Result<u64>
where
    V: FnMut(&[u32], &SquareMatrix),
{
    if maps.is_empty() || n == 0 {
        return Err(Error::Invalid("need at least one map and n >= 1".into()));
    }
    match prune {
        None => {
            check_budget(maps.len(), n, budget)?;
            walk(maps, &[], n, &|_, _: &SquareMatrix| false, u64::MAX, &mut visit)
        }
        Some(p) => walk(maps, &[], n, &|_, m: &SquareMatrix| p(m), budget, &mut visit),
    }
}

/// All length-`n` words and their products, in lexicographic order.
pub fn collect_words(maps: &[SquareMatrix], n: usize, budget: u64) -> Result<Vec<(Word, SquareMatrix)>> {
    let mut out = Vec::new();
    enumerate_words(maps, n, None, budget, |w, m| out.push((Word::new(w.to_vec()), m.clone())))?;
    Ok(out)
}

/// Folds over all length-`n` words in parallel.
///
/// The tree is split into the subtrees below every prefix of a fixed small
/// length; each subtree is folded sequentially from `init()` and the
/// per-subtree accumulators are returned in lexicographic prefix order, so
/// any reduction the caller performs over them is deterministic.
pub fn par_fold_words<T, I, F>(maps: &[SquareMatrix], n: usize, budget: u64, init: I, fold: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, &[u32], &SquareMatrix) + Sync,
{
    if maps.is_empty() || n == 0 {
        return Err(Error::Invalid("need at least one map and n >= 1".into()));
    }
    let ell = maps.len();
    check_budget(ell, n, budget)?;
    let mut split = 1;
    while split < n && ell.pow(split as u32) < PARALLEL_SPLIT_TARGET {
        split += 1;
    }
    let prefixes = ell.pow(split as u32);
    (0..prefixes)
        .into_par_iter()
        .map(|r| {
            let prefix = Word::from_rank(r, split, ell);
            let mut acc = init();
            walk(
                maps,
                prefix.symbols(),
                n,
                &|_, _: &SquareMatrix| false,
                u64::MAX,
                &mut |w: &[u32], m: &SquareMatrix| fold(&mut acc, w, m),
            )?;
            Ok(acc)
        })
        .collect()
}

/// Deterministic parallel sum of `f(word, product)` over all length-`n` words.
pub fn par_sum_words<F>(maps: &[SquareMatrix], n: usize, budget: u64, f: F) -> Result<f64>
where
    F: Fn(&[u32], &SquareMatrix) -> f64 + Sync,
{
    let parts = par_fold_words(maps, n, budget, || 0.0f64, |acc, w, m| *acc += f(w, m))?;
    Ok(parts.into_iter().sum())
}

/// A vector of `N` level-k locally constant functions on `Σ = {0..ℓ}^ℕ`.
///
/// Component `i` is a table of `ℓ^k` values indexed by the rank of the
/// first `k` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelKPotential {
    level: usize,
    alphabet_size: usize,
    components: Vec<Vec<f64>>,
}

impl LevelKPotential {
    pub fn new(level: usize, alphabet_size: usize, components: Vec<Vec<f64>>) -> Result<Self> {
        if level == 0 || alphabet_size == 0 {
            return Err(Error::Invalid("potential level and alphabet size must be >= 1".into()));
        }
        if components.is_empty() {
            return Err(Error::Invalid("potential needs at least one component".into()));
        }
        let expected = alphabet_size
            .checked_pow(level as u32)
            .ok_or_else(|| Error::Invalid("potential table too large".into()))?;
        for c in &components {
            if c.len() != expected {
                return Err(Error::WrongDimension {
                    expected,
                    actual: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("potential values must be finite".into()));
            }
        }
        Ok(Self {
            level,
            alphabet_size,
            components,
        })
    }

    /// Level-1 indicator of a one-based digit: `1_{[digit]}`.
    pub fn digit_indicator(alphabet_size: usize, digit: usize) -> Self {
        let table = (0..alphabet_size).map(|j| if j + 1 == digit { 1.0 } else { 0.0 }).collect();
        Self {
            level: 1,
            alphabet_size,
            components: vec![table],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn bound(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }

    #[inline]
    pub fn value(&self, component: usize, window: &[u32]) -> f64 {
        self.components[component][rank_of(&window[..self.level], self.alphabet_size)]
    }

    /// The same functions viewed as level-`new_level` tables.
    pub fn lift(&self, new_level: usize) -> Result<Self> {
        if new_level < self.level {
            return Err(Error::Invalid(format!(
                "cannot lift a level-{} potential to level {new_level}",
                self.level
            )));
        }
        let size = self.alphabet_size.pow(new_level as u32);
        let drop = self.alphabet_size.pow((new_level - self.level) as u32);
        let components = self
            .components
            .iter()
            .map(|c| (0..size).map(|r| c[r / drop]).collect())
            .collect();
        Ok(Self {
            level: new_level,
            alphabet_size: self.alphabet_size,
            components,
        })
    }

    /// Restriction to the sub-alphabet `{0..ℓ'}`.
    pub fn restrict(&self, new_size: usize) -> Result<Self> {
        if new_size == 0 || new_size > self.alphabet_size {
            return Err(Error::Invalid(format!(
                "cannot restrict an alphabet of size {} to {new_size}",
                self.alphabet_size
            )));
        }
        let size = new_size.pow(self.level as u32);
        let components = self
            .components
            .iter()
            .map(|c| {
                (0..size)
                    .map(|r| {
                        let w = Word::from_rank(r, self.level, new_size);
                        c[w.rank(self.alphabet_size)]
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            level: self.level,
            alphabet_size: new_size,
            components,
        })
    }

    /// Appends the affine combination `c0 + Σ coeffs[i] φ_i` as a new component.
    pub fn with_affine_component(&self, c0: f64, coeffs: &[f64]) -> Self {
        let size = self.components[0].len();
        let extra = (0..size)
            .map(|r| c0 + coeffs.iter().zip(&self.components).map(|(a, c)| a * c[r]).sum::<f64>())
            .collect();
        let mut components = self.components.clone();
        components.push(extra);
        Self {
            level: self.level,
            alphabet_size: self.alphabet_size,
            components,
        }
    }

    /// Keeps only the listed components.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            level: self.level,
            alphabet_size: self.alphabet_size,
            components: indices.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }
}

/// `S_nΦ` on a finite word, extending it periodically past its end.
pub fn birkhoff_sum(phi: &LevelKPotential, word: &Word) -> Result<Vec<f64>> {
    let n = word.len();
    let k = phi.level;
    if n < k || n == 0 {
        return Err(Error::WordTooShort { len: n, level: k });
    }
    if let Some(&bad) = word.symbols().iter().find(|&&s| s as usize >= phi.alphabet_size) {
        return Err(Error::SymbolOutOfRange {
            symbol: bad as usize,
            size: phi.alphabet_size,
        });
    }
    Ok(birkhoff_sum_unchecked(phi, word.symbols()))
}

pub(crate) fn birkhoff_sum_unchecked(phi: &LevelKPotential, symbols: &[u32]) -> Vec<f64> {
    let n = symbols.len();
    let k = phi.level;
    let mut sums = vec![0.0; phi.num_components()];
    let mut window = vec![0u32; k];
    for j in 0..n {
        for (i, slot) in window.iter_mut().enumerate() {
            *slot = symbols[(j + i) % n];
        }
        let r = rank_of(&window, phi.alphabet_size);
        for (acc, table) in sums.iter_mut().zip(&phi.components) {
            *acc += table[r];
        }
    }
    sums
}
