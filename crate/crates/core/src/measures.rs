//! Level-k Bernoulli measures and their dimension characteristics.
//!
//! A measure of level `k` assigns a weight to every block in `I^k`; the
//! cylinder of a word made of `m` blocks gets the product of their weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{AffineIfs, Alphabet};
use crate::linalg::{log_abs_dets, log_svf, log_svf_with_det, word_log_det, SquareMatrix};
use crate::pressure::{LogSumExp, QmCertificate};
use crate::symbolic::{birkhoff_sum_unchecked, check_budget, collect_words, par_fold_words, LevelKPotential, Word};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-10;

/// Bernoulli measure on `(I^k)^ℕ`; weights are indexed by block rank.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliMeasureK {
    level: usize,
    alphabet: Alphabet,
    weights: Vec<f64>,
}

impl BernoulliMeasureK {
    pub fn new(level: usize, alphabet: Alphabet, weights: Vec<f64>) -> Result<Self> {
        if level == 0 || alphabet.is_empty() {
            return Err(Error::Invalid("level and alphabet must be non-empty".into()));
        }
        let expected = alphabet.len().checked_pow(level as u32);
        if expected != Some(weights.len()) {
            return Err(Error::Invalid(format!(
                "expected {}^{} block weights, got {}",
                alphabet.len(),
                level,
                weights.len()
            )));
        }
        if weights.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Invalid("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            level,
            alphabet,
            weights,
        })
    }

    pub fn uniform(level: usize, alphabet: Alphabet) -> Result<Self> {
        let count = alphabet.len().pow(level as u32);
        Self::new(level, alphabet, vec![1.0 / count as f64; count])
    }

    /// Unit mass on the periodic point `block^∞`.
    pub fn point_mass(level: usize, alphabet: Alphabet, block: &Word) -> Result<Self> {
        if block.len() != level {
            return Err(Error::Invalid("block length must equal the level".into()));
        }
        let ell = alphabet.len();
        let mut weights = vec![0.0; ell.pow(level as u32)];
        weights[block.rank(ell)] = 1.0;
        Self::new(level, alphabet, weights)
    }

    /// Weights proportional to `exp(log_weights)`.
    pub fn from_log_weights(level: usize, alphabet: Alphabet, log_weights: &[f64]) -> Result<Self> {
        let mut lse = LogSumExp::new();
        for &x in log_weights {
            lse.push(x);
        }
        let norm = lse.value();
        if !norm.is_finite() {
            return Err(Error::Invalid("weights are all zero or non-finite".into()));
        }
        let mut weights: Vec<f64> = log_weights.iter().map(|x| (x - norm).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|p| *p /= total);
        Self::new(level, alphabet, weights)
    }

    /// `p_ω = φ^s(T_ω) / Z_k` over the blocks of `alphabet`.
    pub fn from_svf(ifs: &AffineIfs, alphabet: Alphabet, s: f64, level: usize, budget: u64) -> Result<Self> {
        let maps = ifs.maps_for(&alphabet)?;
        let logw: Vec<f64> = collect_words(&maps, level, budget)?
            .iter()
            .map(|(_, m)| log_svf(m, s))
            .collect::<Result<_>>()?;
        Self::from_log_weights(level, alphabet, &logw)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The same measure seen at level `factor·k`.
    pub fn lift(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Invalid("lift factor must be positive".into()));
        }
        let blocks = self.weights.len();
        let mut weights = vec![1.0];
        for _ in 0..factor {
            weights = weights
                .iter()
                .flat_map(|a| self.weights.iter().map(move |b| a * b))
                .collect();
        }
        debug_assert_eq!(weights.len(), blocks.pow(factor as u32));
        Ok(Self {
            level: self.level * factor,
            alphabet: self.alphabet.clone(),
            weights,
        })
    }

    /// Blocks with positive weight, as words over alphabet positions.
    pub fn support(&self) -> Vec<(Word, f64)> {
        let ell = self.alphabet.len();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(r, &p)| (Word::from_rank(r, self.level, ell), p))
            .collect()
    }
}

/// Entropy per symbol, `H(p)/k`.
pub fn entropy(mu: &BernoulliMeasureK) -> f64 {
    let h: f64 = mu.weights.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h / mu.level as f64
}

/// Block products and weights of the support.
fn support_blocks(mu: &BernoulliMeasureK, ifs: &AffineIfs) -> Result<(Vec<SquareMatrix>, Vec<f64>)> {
    let maps = ifs.maps_for(&mu.alphabet)?;
    let (words, probs): (Vec<Word>, Vec<f64>) = mu.support().into_iter().unzip();
    Ok((words.iter().map(|w| w.product(&maps)).collect(), probs))
}

/// `(1/(mk)) Σ_{ω∈Σ_{mk}} μ([ω]) log φ^s(T_ω)` at exactly `m` blocks.
pub fn lyapunov_at(mu: &BernoulliMeasureK, ifs: &AffineIfs, s: f64, m: usize, budget: u64) -> Result<f64> {
    let (blocks, probs) = support_blocks(mu, ifs)?;
    lyapunov_blocks(&blocks, &probs, s, m, mu.level, budget)
}

fn lyapunov_blocks(blocks: &[SquareMatrix], probs: &[f64], s: f64, m: usize, level: usize, budget: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Invalid("need at least one block".into()));
    }
    let ld = log_abs_dets(blocks)?;
    let parts = par_fold_words(
        blocks,
        m,
        budget,
        || Ok(0.0f64),
        |acc: &mut Result<f64>, w, t| {
            if let Ok(total) = acc {
                let p: f64 = w.iter().map(|&j| probs[j as usize]).product();
                match log_svf_with_det(t, s, word_log_det(&ld, w)) {
                    Ok(l) => *total += p * l,
                    Err(e) => *acc = Err(e),
                }
            }
        },
    )?;
    let sum: f64 = parts.into_iter().sum::<Result<f64>>()?;
    Ok(sum / (m * level) as f64)
}

/// A Lyapunov exponent estimate: the infimum over `1..=depth_blocks`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub depth_blocks: usize,
}

/// `Λ_μ(φ^s)` estimated as the infimum of the block averages over
/// `m = 1..=max_blocks`, stopping early at the word budget.
pub fn lyapunov(mu: &BernoulliMeasureK, ifs: &AffineIfs, s: f64, max_blocks: usize, budget: u64) -> Result<LyapunovEstimate> {
    let (blocks, probs) = support_blocks(mu, ifs)?;
    lyapunov_inf(&blocks, &probs, s, max_blocks, mu.level, budget)
}

fn lyapunov_inf(
    blocks: &[SquareMatrix],
    probs: &[f64],
    s: f64,
    max_blocks: usize,
    level: usize,
    budget: u64,
) -> Result<LyapunovEstimate> {
    check_budget(blocks.len(), 1, budget)?;
    let mut best = f64::INFINITY;
    let mut depth = 0;
    for m in 1..=max_blocks.max(1) {
        if check_budget(blocks.len(), m, budget).is_err() {
            break;
        }
        best = best.min(lyapunov_blocks(blocks, probs, s, m, level, budget)?);
        depth = m;
    }
    Ok(LyapunovEstimate {
        value: best,
        depth_blocks: depth,
    })
}

/// `P_μ(φ^s) = h_μ + Λ_μ(φ^s)`.
pub fn measure_pressure(mu: &BernoulliMeasureK, ifs: &AffineIfs, s: f64, max_blocks: usize, budget: u64) -> Result<f64> {
    Ok(entropy(mu) + lyapunov(mu, ifs, s, max_blocks, budget)?.value)
}

/// Bisection for the last sign change of a decreasing function on `[0, s_max]`.
fn decreasing_root<F: FnMut(f64) -> Result<f64>>(mut f: F, s_max: f64) -> Result<f64> {
    if f(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    if f(s_max)? > 0.0 {
        return Err(Error::NoRoot { s_max });
    }
    let (mut a, mut b) = (0.0, s_max);
    while b - a > ROOT_TOL {
        let mid = 0.5 * (a + b);
        if f(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `g(s) = Σ_ω p_ω log(φ^s(T_ω)/p_ω)` over the level-k blocks.
pub fn cylinder_g(mu: &BernoulliMeasureK, ifs: &AffineIfs, s: f64) -> Result<f64> {
    let (blocks, probs) = support_blocks(mu, ifs)?;
    cylinder_g_blocks(&blocks, &probs, s)
}

fn cylinder_g_blocks(blocks: &[SquareMatrix], probs: &[f64], s: f64) -> Result<f64> {
    blocks
        .iter()
        .zip(probs)
        .map(|(t, &p)| Ok(p * (log_svf(t, s)? - p.ln())))
        .sum()
}

/// `D_k(μ)`, the zero of [`cylinder_g`] on `[0, 2d]`.
pub fn cylinder_dimension_dk(mu: &BernoulliMeasureK, ifs: &AffineIfs) -> Result<f64> {
    let (blocks, probs) = support_blocks(mu, ifs)?;
    decreasing_root(|s| cylinder_g_blocks(&blocks, &probs, s), 2.0 * ifs.dim() as f64)
}

/// `D(μ)`, the zero of `s ↦ h_μ + Λ_μ(φ^s)` on `[0, 2d]`.
pub fn lyapunov_dimension(mu: &BernoulliMeasureK, ifs: &AffineIfs, max_blocks: usize, budget: u64) -> Result<f64> {
    let (blocks, probs) = support_blocks(mu, ifs)?;
    let h = entropy(mu);
    decreasing_root(
        |s| Ok(h + lyapunov_inf(&blocks, &probs, s, max_blocks, mu.level, budget)?.value),
        2.0 * ifs.dim() as f64,
    )
}

/// `∫ A_kΦ dμ = Σ_ω p_ω S_kΦ(ω)/k`, with periodic Birkhoff sums.
pub fn moment(mu: &BernoulliMeasureK, phi: &LevelKPotential) -> Result<Vec<f64>> {
    if phi.level() > mu.level {
        return Err(Error::WordTooShort {
            len: mu.level,
            level: phi.level(),
        });
    }
    if phi.alphabet_size() != mu.alphabet.len() {
        return Err(Error::Invalid(format!(
            "potential is defined on {} symbols, measure on {}",
            phi.alphabet_size(),
            mu.alphabet.len()
        )));
    }
    let k = mu.level as f64;
    let mut out = vec![0.0; phi.num_components()];
    for (w, p) in mu.support() {
        for (o, v) in out.iter_mut().zip(birkhoff_sum_unchecked(phi, w.symbols())) {
            *o += p * v / k;
        }
    }
    Ok(out)
}

/// Comparison of `w(ω) = φ^s(T_ω)e^{-nP}` with the length-`n` marginal of
/// the normalized measure on words of length `n + extension`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsDiagnostics {
    pub n: usize,
    pub extension: usize,
    /// `w(ω)` in lexicographic order.
    pub weights: Vec<f64>,
    /// `Σ_τ φ(ωτ) / Z_{n+extension}` in lexicographic order.
    pub reference: Vec<f64>,
    /// `max ρ / min ρ` with `ρ(ω) = reference(ω) / w(ω)`.
    pub spread: f64,
}

pub fn gibbs_weights(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    n: usize,
    p_estimate: f64,
    budget: u64,
) -> Result<GibbsDiagnostics> {
    gibbs_weights_ext(ifs, alphabet, s, n, n, p_estimate, budget)
}

pub fn gibbs_weights_ext(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    n: usize,
    extension: usize,
    p_estimate: f64,
    budget: u64,
) -> Result<GibbsDiagnostics> {
    let maps = ifs.maps_for(alphabet)?;
    check_budget(maps.len(), n + extension, budget)?;
    let heads = collect_words(&maps, n, budget)?;
    let ld = log_abs_dets(&maps)?;
    let tails: Vec<(f64, SquareMatrix)> = if extension == 0 {
        vec![(0.0, SquareMatrix::identity(ifs.dim()))]
    } else {
        collect_words(&maps, extension, budget)?
            .into_iter()
            .map(|(w, m)| (word_log_det(&ld, w.symbols()), m))
            .collect()
    };
    let rows: Vec<Result<(f64, f64)>> = heads
        .par_iter()
        .map(|(w, head)| {
            let head_ld = word_log_det(&ld, w.symbols());
            let lw = log_svf_with_det(head, s, head_ld)?;
            let mut lse = LogSumExp::new();
            let mut tmp = SquareMatrix::identity(head.dim());
            for (tail_ld, t) in &tails {
                head.mul_into(t, &mut tmp);
                lse.push(log_svf_with_det(&tmp, s, head_ld + tail_ld)?);
            }
            Ok((lw, lse.value()))
        })
        .collect();
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let mut total = LogSumExp::new();
    for &(_, lr) in &rows {
        total.push(lr);
    }
    let log_z = total.value();
    let shift = n as f64 * p_estimate;
    let weights: Vec<f64> = rows.iter().map(|&(lw, _)| (lw - shift).exp()).collect();
    let reference: Vec<f64> = rows.iter().map(|&(_, lr)| (lr - log_z).exp()).collect();
    let log_rho: Vec<f64> = rows.iter().map(|&(lw, lr)| lr - log_z - (lw - shift)).collect();
    let hi = log_rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = log_rho.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GibbsDiagnostics {
        n,
        extension,
        weights,
        reference,
        spread: (hi - lo).exp(),
    })
}

/// Bound `c²K·e^{2K|P|}` for the Gibbs spread under a certificate.
pub fn gibbs_spread_bound(cert: &QmCertificate, p_ub: f64) -> f64 {
    let k = cert.k as f64;
    cert.c * cert.c * k * (2.0 * k * p_ub.abs()).exp()
}
