//! Partition sums, pressure brackets and quasi-multiplicativity certificates.
//!
//! For a finite alphabet `I` and depth `n`, `Z_n = Σ_{ω∈I^n} φ^s(T_ω)`.
//! The upper bound `(1/n) log Z_n` follows from sub-additivity. The lower
//! bound needs a certificate `(c, Γ)` with
//! `φ(ω)φ(τ) <= c·φ(ωκτ)` for some `κ ∈ Γ`, which gives
//! `Z_n <= cK·max{1, e^{(K-1)P}}·e^{nP}` with `K = max|κ| + 1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{classify_maps, AffineIfs, Alphabet, IfsKind, TailEnvelope, DEFAULT_POSITIVITY_RATIO};
use crate::linalg::{
    log_abs_dets, log_singular_values_with_det, log_svf, log_svf_from_log_values, log_svf_with_det, word_log_det,
    SquareMatrix,
};
use crate::symbolic::{check_budget, par_fold_words, word_count, Word};

pub const DEFAULT_MAX_GAMMA_LEN: usize = 2;
pub const DEFAULT_CHECK_DEPTH: usize = 3;

/// Spectra tables above this many words are not materialized.
pub const MAX_CACHED_WORDS: usize = 1 << 22;

/// Streaming `log Σ e^{x_i}`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub(crate) fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `Z_n(φ^s, I) = Σ_{ω∈I^n} φ^s(T_ω)`.
pub fn partition_sum(ifs: &AffineIfs, alphabet: &Alphabet, s: f64, n: usize, budget: u64) -> Result<f64> {
    partition_sum_maps(&ifs.maps_for(alphabet)?, s, n, budget)
}

pub fn partition_sum_maps(maps: &[SquareMatrix], s: f64, n: usize, budget: u64) -> Result<f64> {
    let ld = log_abs_dets(maps)?;
    let parts = par_fold_words(
        maps,
        n,
        budget,
        || Ok(0.0f64),
        |acc: &mut Result<f64>, w, m| {
            if let Ok(total) = acc {
                match log_svf_with_det(m, s, word_log_det(&ld, w)) {
                    Ok(l) => *total += l.exp(),
                    Err(e) => *acc = Err(e),
                }
            }
        },
    )?;
    parts.into_iter().sum()
}

/// `log Z_n`, accumulated in log space so deep sums cannot underflow.
pub fn log_partition_sum(ifs: &AffineIfs, alphabet: &Alphabet, s: f64, n: usize, budget: u64) -> Result<f64> {
    log_partition_sum_maps(&ifs.maps_for(alphabet)?, s, n, budget)
}

pub fn log_partition_sum_maps(maps: &[SquareMatrix], s: f64, n: usize, budget: u64) -> Result<f64> {
    let ld = log_abs_dets(maps)?;
    let parts = par_fold_words(
        maps,
        n,
        budget,
        || Ok(LogSumExp::new()),
        |acc: &mut Result<LogSumExp>, w, m| {
            if let Ok(lse) = acc {
                match log_svf_with_det(m, s, word_log_det(&ld, w)) {
                    Ok(l) => lse.push(l),
                    Err(e) => *acc = Err(e),
                }
            }
        },
    )?;
    let mut total = LogSumExp::new();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.value())
}

/// Log singular values of every depth-`n` word, for evaluating `Z_n` at
/// many exponents without recomputing products.
#[derive(Debug, Clone)]
pub struct WordSpectra {
    dim: usize,
    depth: usize,
    log_sv: Vec<f64>,
}

impl WordSpectra {
    pub fn build(maps: &[SquareMatrix], n: usize, budget: u64) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Invalid("empty alphabet".into()));
        }
        let count = word_count(maps.len(), n);
        if count > MAX_CACHED_WORDS as f64 {
            return Err(Error::DepthOverflow {
                words: count,
                budget: MAX_CACHED_WORDS as u64,
            });
        }
        let dim = maps[0].dim();
        let ld = log_abs_dets(maps)?;
        let parts = par_fold_words(
            maps,
            n,
            budget,
            || Ok(Vec::new()),
            |acc: &mut Result<Vec<f64>>, w, m| {
                if let Ok(v) = acc {
                    match log_singular_values_with_det(m, word_log_det(&ld, w)) {
                        Ok(logs) => v.extend(logs),
                        Err(e) => *acc = Err(e),
                    }
                }
            },
        )?;
        let mut log_sv = Vec::with_capacity(count as usize * dim);
        for p in parts {
            log_sv.extend(p?);
        }
        Ok(Self { dim, depth: n, log_sv })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.log_sv.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.log_sv.is_empty()
    }

    pub fn log_partition_sum(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeExponent(s));
        }
        let d = self.dim;
        let parts: Vec<LogSumExp> = self
            .log_sv
            .par_chunks(d * 4096)
            .map(|chunk| {
                let mut lse = LogSumExp::new();
                for w in chunk.chunks(d) {
                    lse.push(log_svf_from_log_values(w, s));
                }
                lse
            })
            .collect();
        let mut total = LogSumExp::new();
        for p in &parts {
            total.merge(p);
        }
        Ok(total.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMode {
    /// `φ^s` is multiplicative on the family, so `Γ = {ε}` and `c = 1`.
    Exact,
    /// Checked on all pairs of words up to the given length.
    Enumerated(usize),
}

/// A quasi-multiplicativity certificate for `φ^s` on a finite alphabet.
///
/// Connecting words are stored over alphabet positions (symbol `j` is the
/// `j`-th entry of `alphabet`).
#[derive(Debug, Clone, PartialEq)]
pub struct QmCertificate {
    pub alphabet: Alphabet,
    pub s: f64,
    pub gamma: Vec<Word>,
    pub c: f64,
    pub k: usize,
    pub verified_depth: usize,
    pub mode: CertificateMode,
}

impl QmCertificate {
    fn exact(alphabet: &Alphabet, s: f64, verified_depth: usize) -> Self {
        Self {
            alphabet: alphabet.clone(),
            s,
            gamma: vec![Word::empty()],
            c: 1.0,
            k: 1,
            verified_depth,
            mode: CertificateMode::Exact,
        }
    }

    /// `log(cK·max{1, e^{(K-1)P}})` for an upper bound `P` of the pressure.
    pub fn log_gap(&self, p_ub: f64) -> f64 {
        (self.c * self.k as f64).ln() + (self.k as f64 - 1.0) * p_ub.max(0.0)
    }

    /// Admissible size of `|log Z_{n+m} - log Z_n - log Z_m|`.
    pub fn defect_bound(&self, p_ub: f64) -> f64 {
        (self.c * self.k as f64).ln() + self.k as f64 * p_ub.abs()
    }

    /// Connecting words with global one-based digits, for display.
    pub fn gamma_labels(&self) -> Vec<String> {
        self.gamma
            .iter()
            .map(|w| {
                if w.is_empty() {
                    return "ε".to_string();
                }
                let digits: Vec<usize> = w
                    .symbols()
                    .iter()
                    .map(|&j| self.alphabet.symbols()[j as usize] + 1)
                    .collect();
                Word::from_one_based(&digits).to_string()
            })
            .collect()
    }
}

/// Certifies quasi-multiplicativity of `φ^s` on `alphabet`.
///
/// Same-ordered diagonal families and `s >= d` are exact. Otherwise every
/// pair `ω, τ` with `1 <= |ω|, |τ| <= check_depth` is tested against all
/// connectors of length at most `max_gamma_len`, including `ε`.
pub fn certify_qm(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    max_gamma_len: usize,
    check_depth: usize,
    budget: u64,
) -> Result<QmCertificate> {
    let maps = ifs.maps_for(alphabet)?;
    certify_maps(&maps, alphabet, s, max_gamma_len, check_depth, budget)
}

pub fn certify_maps(
    maps: &[SquareMatrix],
    alphabet: &Alphabet,
    s: f64,
    max_gamma_len: usize,
    check_depth: usize,
    budget: u64,
) -> Result<QmCertificate> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeExponent(s));
    }
    if maps.is_empty() || maps.len() != alphabet.len() {
        return Err(Error::Invalid("alphabet and map list disagree".into()));
    }
    let dim = maps[0].dim();
    if s == 0.0 || s >= dim as f64 || dim == 1 || classify_maps(maps, DEFAULT_POSITIVITY_RATIO).diagonal_ordered {
        return Ok(QmCertificate::exact(alphabet, s, check_depth));
    }
    if check_depth == 0 {
        return Err(Error::Invalid("check depth must be at least 1".into()));
    }

    let words = words_up_to(maps, 1, check_depth);
    let connectors = words_up_to(maps, 0, max_gamma_len);
    let work = (words.len() as f64).powi(2) * connectors.len() as f64;
    if work > budget as f64 {
        return Err(Error::DepthOverflow { words: work, budget });
    }
    let ld = log_abs_dets(maps)?;
    let word_ld: Vec<f64> = words.iter().map(|(w, _)| word_log_det(&ld, w.symbols())).collect();
    let conn_ld: Vec<f64> = connectors.iter().map(|(w, _)| word_log_det(&ld, w.symbols())).collect();
    let log_phi: Vec<f64> = words
        .iter()
        .zip(&word_ld)
        .map(|((_, m), &l)| log_svf_with_det(m, s, l))
        .collect::<Result<_>>()?;

    // For every ω: the worst pair ratio and which connectors were optimal.
    let rows: Vec<Result<(f64, Vec<bool>)>> = (0..words.len())
        .into_par_iter()
        .map(|i| {
            let (w_om, m_om) = &words[i];
            let heads: Vec<SquareMatrix> = connectors.iter().map(|(_, k)| m_om * k).collect();
            let mut used = vec![false; connectors.len()];
            let mut worst = f64::NEG_INFINITY;
            let mut tmp = SquareMatrix::identity(dim);
            for (j, (w_tau, m_tau)) in words.iter().enumerate() {
                let mut best = f64::INFINITY;
                let mut arg = None;
                for (h, head) in heads.iter().enumerate() {
                    head.mul_into(m_tau, &mut tmp);
                    let joined = match log_svf_with_det(&tmp, s, word_ld[i] + conn_ld[h] + word_ld[j]) {
                        Ok(v) => v,
                        Err(Error::SingularMatrix { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    let ratio = log_phi[i] + log_phi[j] - joined;
                    if ratio < best {
                        best = ratio;
                        arg = Some(h);
                    }
                }
                let Some(h) = arg else {
                    return Err(Error::CertificationFailed(format!(
                        "no connector joins {} and {}",
                        w_om, w_tau
                    )));
                };
                used[h] = true;
                worst = worst.max(best);
            }
            Ok((worst, used))
        })
        .collect();

    let mut log_c = 0.0f64;
    let mut used = vec![false; connectors.len()];
    for r in rows {
        let (worst, u) = r?;
        log_c = log_c.max(worst);
        for (a, b) in used.iter_mut().zip(u) {
            *a |= b;
        }
    }
    let gamma: Vec<Word> = connectors
        .iter()
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|((w, _), _)| w.clone())
        .collect();
    let k = gamma.iter().map(Word::len).max().unwrap_or(0) + 1;
    Ok(QmCertificate {
        alphabet: alphabet.clone(),
        s,
        gamma,
        c: log_c.exp().max(1.0),
        k,
        verified_depth: check_depth,
        mode: CertificateMode::Enumerated(check_depth),
    })
}

/// All words with `min_len <= |w| <= max_len`, shortest first, with products.
fn words_up_to(maps: &[SquareMatrix], min_len: usize, max_len: usize) -> Vec<(Word, SquareMatrix)> {
    let dim = maps[0].dim();
    let mut out = Vec::new();
    let mut layer = vec![(Word::empty(), SquareMatrix::identity(dim))];
    for len in 0..=max_len {
        if len >= min_len {
            out.extend(layer.iter().cloned());
        }
        if len == max_len {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * maps.len());
        for (w, m) in &layer {
            for (j, t) in maps.iter().enumerate() {
                next.push((w.concat(&Word::new(vec![j as u32])), m * t));
            }
        }
        layer = next;
    }
    out
}

/// A two-sided bound on `P(φ^s, I)` from a single depth.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureEstimate {
    pub s: f64,
    pub alphabet: Alphabet,
    pub depth: usize,
    pub log_z: f64,
    pub upper: f64,
    pub lower: f64,
    pub certificate: QmCertificate,
}

fn check_certificate(alphabet: &Alphabet, s: f64, cert: &QmCertificate) -> Result<()> {
    if cert.alphabet != *alphabet {
        return Err(Error::Invalid("certificate was issued for a different alphabet".into()));
    }
    if cert.mode != CertificateMode::Exact && (cert.s - s).abs() > 1e-12 {
        return Err(Error::Invalid(format!(
            "certificate was issued for s = {}, not s = {}",
            cert.s, s
        )));
    }
    Ok(())
}

/// Builds the bracket from a known `log Z_n`, with `p_ub` an independent
/// upper bound for the pressure (the bracket's own upper bound is also used).
pub fn bracket_from_log_z(s: f64, depth: usize, log_z: f64, cert: &QmCertificate, p_ub: Option<f64>) -> PressureEstimate {
    let n = depth as f64;
    let upper = log_z / n;
    let p_ub = p_ub.map_or(upper, |p| p.min(upper));
    let lower = (log_z - cert.log_gap(p_ub)) / n;
    PressureEstimate {
        s,
        alphabet: cert.alphabet.clone(),
        depth,
        log_z,
        upper,
        lower: lower.min(upper),
        certificate: cert.clone(),
    }
}

pub fn pressure_bracket(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    depth: usize,
    cert: &QmCertificate,
    budget: u64,
) -> Result<PressureEstimate> {
    check_certificate(alphabet, s, cert)?;
    let log_z = log_partition_sum(ifs, alphabet, s, depth, budget)?;
    Ok(bracket_from_log_z(s, depth, log_z, cert, None))
}

/// Brackets at depths `1, 2, 4, …, <= max_depth` that fit in the budget.
///
/// Each lower bound uses the smallest upper bound seen so far.
pub fn pressure_schedule(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    max_depth: usize,
    cert: &QmCertificate,
    budget: u64,
) -> Result<Vec<PressureEstimate>> {
    check_certificate(alphabet, s, cert)?;
    let maps = ifs.maps_for(alphabet)?;
    let mut out: Vec<PressureEstimate> = Vec::new();
    let mut n = 1;
    while n <= max_depth.max(1) {
        if check_budget(maps.len(), n, budget).is_err() {
            if out.is_empty() {
                check_budget(maps.len(), n, budget)?;
            }
            break;
        }
        let log_z = log_partition_sum_maps(&maps, s, n, budget)?;
        let best = out.iter().map(|e| e.upper).fold(f64::INFINITY, f64::min);
        out.push(bracket_from_log_z(s, n, log_z, cert, Some(best)));
        n *= 2;
    }
    Ok(out)
}

/// Largest `|log Z_{n+m} - log Z_n - log Z_m|` over `n, m >= 1`, `n + m <= max_total`.
pub fn multiplicativity_defect(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    s: f64,
    max_total: usize,
    budget: u64,
) -> Result<f64> {
    let maps = ifs.maps_for(alphabet)?;
    let log_z: Vec<f64> = (1..=max_total)
        .map(|n| log_partition_sum_maps(&maps, s, n, budget))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for total in 2..=max_total {
        for n in 1..total {
            let m = total - n;
            worst = worst.max((log_z[total - 1] - log_z[n - 1] - log_z[m - 1]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub level: usize,
    pub estimate: PressureEstimate,
    /// Bound on `Σ_{i>ℓ} e(i)^s`, the first-level mass missing from `Z_1`.
    pub tail_residual: Option<f64>,
}

/// Checks `‖T_i‖ <= e(i)` for `i = 1..=upto` (one-based).
pub fn check_envelope(ifs: &AffineIfs, upto: usize) -> Result<()> {
    let IfsKind::Infinite(fam) = ifs.kind() else {
        return Ok(());
    };
    for i in 1..=upto {
        let norm = fam.generator.matrix(i).norm();
        let env = fam.envelope.eval(i);
        if norm > env * (1.0 + 1e-12) {
            return Err(Error::EnvelopeViolation {
                index: i,
                norm,
                envelope: env,
            });
        }
    }
    Ok(())
}

/// Pressure brackets on the truncations `I_ℓ = {1..ℓ}` at a fixed depth.
pub fn truncation_ladder(
    ifs: &AffineIfs,
    s: f64,
    levels: &[usize],
    depth: usize,
    max_gamma_len: usize,
    check_depth: usize,
    budget: u64,
) -> Result<Vec<LadderRung>> {
    let envelope = ifs
        .envelope()
        .ok_or_else(|| Error::Invalid("truncation ladders need an infinite family".into()))?;
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("levels must be positive and strictly increasing".into()));
    }
    check_envelope(ifs, *levels.last().unwrap())?;
    levels
        .iter()
        .map(|&level| {
            let alphabet = Alphabet::prefix(level);
            let cert = certify_qm(ifs, &alphabet, s, max_gamma_len, check_depth, budget)?;
            let estimate = pressure_bracket(ifs, &alphabet, s, depth, &cert, budget)?;
            Ok(LadderRung {
                level,
                estimate,
                tail_residual: envelope.tail_sum(level, s),
            })
        })
        .collect()
}

/// A closed interval `[lo, hi]` containing a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Probe indices for the empirical decay exponent of `φ^s(T_i)`.
const DECAY_PROBE: (usize, usize) = (1 << 10, 1 << 20);

/// Decides whether `Σ_i φ^s(T_i)` is finite. `None` when undecided.
fn series_finite(ifs: &AffineIfs, s: f64) -> Result<Option<bool>> {
    let IfsKind::Infinite(fam) = ifs.kind() else {
        return Ok(Some(true));
    };
    if s <= 0.0 {
        return Ok(Some(false));
    }
    if let TailEnvelope::Custom(_) = fam.envelope {
        return Ok(None);
    }
    if fam.envelope.tail_sum(0, s).is_some() {
        return Ok(Some(true));
    }
    // The envelope does not converge here; it only proves divergence if
    // the family itself decays no faster than 1/i.
    let (i1, i2) = DECAY_PROBE;
    let value = |i: usize| -> Result<f64> {
        match log_svf(&fam.generator.matrix(i), s) {
            Ok(v) => Ok(v),
            Err(Error::SingularMatrix { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let slope = -(value(i2)? - value(i1)?) / ((i2 as f64).ln() - (i1 as f64).ln());
    Ok(if slope <= 1.0 { Some(false) } else { None })
}

/// Brackets `s_∞ = inf{s : Σ_i φ^s(T_i) < ∞}` to within `tolerance`.
pub fn estimate_s_infinity(ifs: &AffineIfs, tolerance: f64) -> Result<Interval> {
    if ifs.is_finite() {
        return Ok(Interval { lo: 0.0, hi: 0.0 });
    }
    if !(tolerance > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let mut lo = 0.0;
    let mut hi = (ifs.dim() as f64).max(1.0);
    loop {
        match series_finite(ifs, hi)? {
            Some(true) => break,
            Some(false) => lo = hi,
            None => {}
        }
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::UndecidableTail);
        }
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        match series_finite(ifs, mid)? {
            Some(true) => hi = mid,
            Some(false) => lo = mid,
            None => return Err(Error::UndecidableTail),
        }
    }
    Ok(Interval { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionOptions {
    pub depth: usize,
    pub max_gamma_len: usize,
    pub check_depth: usize,
    pub tolerance: f64,
    pub budget: u64,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        Self {
            depth: 8,
            max_gamma_len: DEFAULT_MAX_GAMMA_LEN,
            check_depth: DEFAULT_CHECK_DEPTH,
            tolerance: 1e-10,
            budget: crate::symbolic::DEFAULT_WORD_BUDGET,
        }
    }
}

/// Root of `s ↦ P(φ^s, I)` bracketed by the two pressure bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionBracket {
    /// `lower(s_lo) >= 0`, so the root is at least `s_lo`.
    pub s_lo: f64,
    /// `upper(s_hi) <= 0`, so the root is at most `s_hi`.
    pub s_hi: f64,
    pub depth: usize,
    /// Certificate used at `s_lo`.
    pub certificate: QmCertificate,
    /// `min(d, s_hi)`.
    pub dimension: f64,
}

/// Largest depth `<= max_depth` with `ℓ^n` within the budget.
pub fn affordable_depth(alphabet_len: usize, max_depth: usize, budget: u64) -> usize {
    let mut n = max_depth.max(1);
    while n > 1 && check_budget(alphabet_len, n, budget).is_err() {
        n -= 1;
    }
    n
}

/// Bisects for the zero of the pressure on a finite alphabet.
pub fn solve_dimension(ifs: &AffineIfs, alphabet: &Alphabet, opts: &DimensionOptions) -> Result<DimensionBracket> {
    let maps = ifs.maps_for(alphabet)?;
    let n = opts.depth.max(1);
    check_budget(maps.len(), n, opts.budget)?;
    let spectra = if word_count(maps.len(), n) <= MAX_CACHED_WORDS as f64 {
        Some(WordSpectra::build(&maps, n, opts.budget)?)
    } else {
        None
    };
    let log_z = |s: f64| -> Result<f64> {
        match &spectra {
            Some(t) => t.log_partition_sum(s),
            None => log_partition_sum_maps(&maps, s, n, opts.budget),
        }
    };
    let nf = n as f64;
    let dim = ifs.dim() as f64;

    let mut hi = dim;
    while log_z(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoRoot { s_max: hi });
        }
    }

    // Upper root: keep upper(b) <= 0.
    let (mut a, mut b) = (0.0, hi);
    while b - a > opts.tolerance {
        let mid = 0.5 * (a + b);
        if log_z(mid)? / nf > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let s_hi = b;

    // Lower root: keep lower(a) >= 0 (or a = 0).
    let lower_at = |s: f64| -> Result<(f64, QmCertificate)> {
        let cert = certify_maps(&maps, alphabet, s, opts.max_gamma_len, opts.check_depth, opts.budget)?;
        let lz = log_z(s)?;
        Ok((bracket_from_log_z(s, n, lz, &cert, None).lower, cert))
    };
    let (mut a, mut b) = (0.0, s_hi);
    let mut cert_a = lower_at(0.0)?.1;
    let (lower_b, cert_b) = lower_at(b)?;
    if lower_b >= 0.0 {
        a = b;
        cert_a = cert_b;
    } else {
        while b - a > opts.tolerance {
            let mid = 0.5 * (a + b);
            let (val, cert) = lower_at(mid)?;
            if val >= 0.0 {
                a = mid;
                cert_a = cert;
            } else {
                b = mid;
            }
        }
    }
    Ok(DimensionBracket {
        s_lo: a.min(s_hi),
        s_hi,
        depth: n,
        certificate: cert_a,
        dimension: s_hi.min(dim),
    })
}
