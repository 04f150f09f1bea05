//! The coding map `π_a(ω) = Σ_j T_{ω|j-1} a_{ω_j}` and point clouds of attractors.

use std::io::{self, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{AffineIfs, Alphabet};
use crate::linalg::SquareMatrix;
use crate::measures::BernoulliMeasureK;
use crate::symbolic::Word;

/// Truncation error accepted by [`render_cloud`].
pub const RENDER_TRUNCATION: f64 = 1e-6;

/// Keeps translation streams apart from point-sampling streams under equal seeds.
const TRANSLATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub enum TranslationSource {
    /// Used cyclically: `a_i = entries[(i - 1) mod len]`.
    Explicit(Vec<Vec<f64>>),
    /// `a_i` uniform in `[0,1]^d`, drawn from stream `i` of the seed.
    Sampled(u64),
}

/// Translations `a = (a_1, a_2, …)` in `[0,1]^d`; map `i` is `x ↦ T_i x + a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationFamily {
    dim: usize,
    source: TranslationSource,
}

impl TranslationFamily {
    pub fn explicit(dim: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Invalid("need at least one translation".into()));
        }
        for e in &entries {
            if e.len() != dim {
                return Err(Error::WrongDimension {
                    expected: dim,
                    actual: e.len(),
                });
            }
            if e.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Invalid("translation coordinates must lie in [0, 1]".into()));
            }
        }
        Ok(Self {
            dim,
            source: TranslationSource::Explicit(entries),
        })
    }

    pub fn sampled(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            source: TranslationSource::Sampled(seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &TranslationSource {
        &self.source
    }

    /// `a_i` for the one-based map index `i`.
    pub fn get(&self, i: usize) -> Vec<f64> {
        debug_assert!(i >= 1);
        let idx = i - 1;
        match &self.source {
            TranslationSource::Explicit(entries) => entries[idx % entries.len()].clone(),
            TranslationSource::Sampled(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ TRANSLATION_SALT);
                rng.set_stream(idx as u64);
                (0..self.dim).map(|_| rng.gen::<f64>()).collect()
            }
        }
    }

    /// The translations of the maps in `alphabet`, in alphabet order.
    pub fn for_alphabet(&self, alphabet: &Alphabet) -> Vec<Vec<f64>> {
        alphabet.symbols().iter().map(|&s| self.get(s + 1)).collect()
    }
}

/// Largest operator norm in the list.
pub fn contraction_bound(maps: &[SquareMatrix]) -> f64 {
    maps.iter().map(SquareMatrix::norm).fold(0.0, f64::max)
}

/// `‖π_a(ω) - π_a(ω|n)‖ <= c^n √d / (1 - c)`.
pub fn truncation_bound(contraction: f64, n: usize, dim: usize) -> f64 {
    if contraction >= 1.0 {
        return f64::INFINITY;
    }
    contraction.powi(n as i32) * (dim as f64).sqrt() / (1.0 - contraction)
}

/// `Σ_{j=1}^{n} T_{ω|j-1} a_{ω_j}`; `maps[k]` and `translations[k]` belong to symbol `k`.
pub fn project_maps(word: &[u32], maps: &[SquareMatrix], translations: &[Vec<f64>]) -> Vec<f64> {
    let dim = maps[0].dim();
    let mut point = vec![0.0; dim];
    let mut prefix = SquareMatrix::identity(dim);
    let mut next = SquareMatrix::identity(dim);
    for &sym in word {
        let term = prefix.apply(&translations[sym as usize]);
        point.iter_mut().zip(term).for_each(|(p, t)| *p += t);
        prefix.mul_into(&maps[sym as usize], &mut next);
        std::mem::swap(&mut prefix, &mut next);
    }
    point
}

/// A projected point with its truncation error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub tail_bound: f64,
}

/// `π_a` of the cylinder `[word]`; `word` is over positions of `alphabet`.
pub fn project(word: &Word, ifs: &AffineIfs, alphabet: &Alphabet, a: &TranslationFamily) -> Result<Projection> {
    if word.is_empty() {
        return Err(Error::Invalid("cannot project the empty word".into()));
    }
    if a.dim() != ifs.dim() {
        return Err(Error::WrongDimension {
            expected: ifs.dim(),
            actual: a.dim(),
        });
    }
    let maps = ifs.maps_for(alphabet)?;
    if let Some(&bad) = word.symbols().iter().find(|&&s| s as usize >= maps.len()) {
        return Err(Error::SymbolOutOfRange {
            symbol: bad as usize,
            size: maps.len(),
        });
    }
    Ok(Projection {
        point: project_maps(word.symbols(), &maps, &a.for_alphabet(alphabet)),
        tail_bound: truncation_bound(contraction_bound(&maps), word.len(), ifs.dim()),
    })
}

/// Projects `count` words of length `word_len` drawn blockwise from `measure`.
///
/// Point `i` uses its own ChaCha stream of `seed`, so the output does not
/// depend on the thread count.
pub fn render_cloud(
    ifs: &AffineIfs,
    measure: &BernoulliMeasureK,
    a: &TranslationFamily,
    count: usize,
    word_len: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if a.dim() != ifs.dim() {
        return Err(Error::WrongDimension {
            expected: ifs.dim(),
            actual: a.dim(),
        });
    }
    let maps = ifs.maps_for(measure.alphabet())?;
    let translations = a.for_alphabet(measure.alphabet());
    let bound = truncation_bound(contraction_bound(&maps), word_len, ifs.dim());
    if bound > RENDER_TRUNCATION {
        return Err(Error::Invalid(format!(
            "word length {word_len} leaves a truncation error of {bound:e}"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let k = measure.level();
    let ell = measure.alphabet().len();
    let blocks: Vec<Word> = (0..measure.weights().len()).map(|r| Word::from_rank(r, k, ell)).collect();
    let sampler = WeightedIndex::new(measure.weights()).map_err(|e| Error::Invalid(e.to_string()))?;
    let n_blocks = word_len.div_ceil(k);
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut word = Vec::with_capacity(n_blocks * k);
            for _ in 0..n_blocks {
                word.extend_from_slice(blocks[sampler.sample(&mut rng)].symbols());
            }
            word.truncate(word_len);
            project_maps(&word, &maps, &translations)
        })
        .collect())
}

/// A real with 17 significant digits.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes a cloud as CSV with header `x1,…,xd` and LF line endings.
pub fn write_cloud_csv<W: Write>(mut out: W, dim: usize, points: &[Vec<f64>]) -> io::Result<()> {
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    out.write_all(header.join(",").as_bytes())?;
    out.write_all(b"\n")?;
    for p in points {
        let row: Vec<String> = p.iter().map(|&x| format_real(x)).collect();
        out.write_all(row.join(",").as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
