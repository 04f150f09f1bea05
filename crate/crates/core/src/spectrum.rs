//! Birkhoff spectrum of level-k potentials via the convex dual.
//!
//! For a target `α`, the dimension of the level set is the largest `s`
//! with `min_q F_k(s, q) >= 0`, where
//! `F_k(s, q) = (1/k) log Σ_{ω∈Σ_k} φ^s(T_ω) exp⟨q, S_kΦ(ω) - kα⟩`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{AffineIfs, Alphabet};
use crate::linalg::{log_abs_dets, log_singular_values_with_det, log_svf_from_log_values, word_log_det};
use crate::measures::BernoulliMeasureK;
use crate::pressure::{Interval, LogSumExp};
use crate::symbolic::{birkhoff_sum_unchecked, collect_words, LevelKPotential, DEFAULT_WORD_BUDGET};

pub const DEFAULT_Q_CAP: f64 = 1e3;
pub const LP_TOL: f64 = 1e-9;
/// Dual values this close to zero are accepted as roots.
pub const ROOT_ACCEPT: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-11;
/// Gradient level still accepted when the line search stalls in rounding noise.
const STALL_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Interior,
    Boundary,
    Infeasible,
}

/// The dual objective for one alphabet, level, potential and target.
#[derive(Debug, Clone)]
pub struct DualProblem {
    alphabet: Alphabet,
    level: usize,
    dim: usize,
    /// Log singular values of each block, `dim` per block.
    log_sv: Vec<f64>,
    /// `S_kΦ(ω) - kα`, `n` per block.
    shifted: Vec<f64>,
    /// `A_kΦ(ω)`, `n` per block.
    averages: Vec<f64>,
    n: usize,
    alpha: Vec<f64>,
    s: f64,
}

impl DualProblem {
    pub fn new(
        ifs: &AffineIfs,
        alphabet: &Alphabet,
        phi: &LevelKPotential,
        alpha: &[f64],
        level: usize,
        s: f64,
    ) -> Result<Self> {
        if level < phi.level().max(1) {
            return Err(Error::WordTooShort {
                len: level,
                level: phi.level(),
            });
        }
        if phi.alphabet_size() != alphabet.len() {
            return Err(Error::Invalid(format!(
                "potential is defined on {} symbols, alphabet has {}",
                phi.alphabet_size(),
                alphabet.len()
            )));
        }
        if alpha.len() != phi.num_components() {
            return Err(Error::WrongDimension {
                expected: phi.num_components(),
                actual: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Invalid("targets must be finite".into()));
        }
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeExponent(s));
        }
        let maps = ifs.maps_for(alphabet)?;
        let blocks = collect_words(&maps, level, DEFAULT_WORD_BUDGET)?;
        let ld = log_abs_dets(&maps)?;
        let k = level as f64;
        let mut log_sv = Vec::with_capacity(blocks.len() * ifs.dim());
        let mut shifted = Vec::with_capacity(blocks.len() * alpha.len());
        let mut averages = Vec::with_capacity(blocks.len() * alpha.len());
        for (w, m) in &blocks {
            log_sv.extend(log_singular_values_with_det(m, word_log_det(&ld, w.symbols()))?);
            let sums = birkhoff_sum_unchecked(phi, w.symbols());
            for (x, a) in sums.iter().zip(alpha) {
                shifted.push(x - k * a);
                averages.push(x / k);
            }
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            level,
            dim: ifs.dim(),
            log_sv,
            shifted,
            averages,
            n: alpha.len(),
            alpha: alpha.to_vec(),
            s,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn num_components(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.log_sv.len() / self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn set_s(&mut self, s: f64) -> Result<()> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeExponent(s));
        }
        self.s = s;
        Ok(())
    }

    /// Level-k averages `A_kΦ(ω)`, one row per block in lexicographic order.
    pub fn moment_points(&self) -> Vec<Vec<f64>> {
        if self.n == 0 {
            return vec![Vec::new(); self.num_blocks()];
        }
        self.averages.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::WrongDimension {
                expected: self.n,
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Log weights `log φ^s(T_ω) + ⟨q, S_kΦ(ω) - kα⟩`.
    fn exponents(&self, q: &[f64]) -> Vec<f64> {
        (0..self.num_blocks())
            .map(|b| {
                let lp = log_svf_from_log_values(&self.log_sv[b * self.dim..(b + 1) * self.dim], self.s);
                let x = &self.shifted[b * self.n..(b + 1) * self.n];
                lp + q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn value(&self, q: &[f64]) -> Result<f64> {
        self.check_q(q)?;
        let mut lse = LogSumExp::new();
        for e in self.exponents(q) {
            lse.push(e);
        }
        Ok(lse.value() / self.level as f64)
    }

    /// `μ_q(ω) ∝ φ^s(T_ω) e^{⟨q, S_kΦ(ω) - kα⟩}`, normalized.
    fn probabilities(&self, q: &[f64]) -> (f64, Vec<f64>) {
        let e = self.exponents(q);
        let mut lse = LogSumExp::new();
        for &x in &e {
            lse.push(x);
        }
        let norm = lse.value();
        (norm / self.level as f64, e.iter().map(|x| (x - norm).exp()).collect())
    }

    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_q(q)?;
        Ok(self.derivatives(q).1)
    }

    pub fn hessian(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_q(q)?;
        Ok(self.derivatives(q).2)
    }

    /// Value, gradient `(1/k) E[S - kα]` and Hessian `(1/k) Cov[S]` under `μ_q`.
    fn derivatives(&self, q: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let (value, p) = self.probabilities(q);
        let mut mean = vec![0.0; n];
        for (b, &w) in p.iter().enumerate() {
            for (m, x) in mean.iter_mut().zip(&self.shifted[b * n..(b + 1) * n]) {
                *m += w * x;
            }
        }
        let mut cov = vec![vec![0.0; n]; n];
        for (b, &w) in p.iter().enumerate() {
            let x = &self.shifted[b * n..(b + 1) * n];
            for i in 0..n {
                let di = x[i] - mean[i];
                for j in 0..=i {
                    cov[i][j] += w * di * (x[j] - mean[j]);
                }
            }
        }
        let k = self.level as f64;
        for i in 0..n {
            for j in 0..i {
                cov[j][i] = cov[i][j];
            }
        }
        let grad = mean.iter().map(|m| m / k).collect();
        let hess = cov.into_iter().map(|row| row.into_iter().map(|c| c / k).collect()).collect();
        (value, grad, hess)
    }

    /// The level-k Bernoulli measure `μ_q`.
    pub fn measure(&self, q: &[f64]) -> Result<BernoulliMeasureK> {
        self.check_q(q)?;
        BernoulliMeasureK::from_log_weights(self.level, self.alphabet.clone(), &self.exponents(q))
    }

    fn select(&self, kept: &[usize]) -> Self {
        let n = self.n;
        let pick = |v: &[f64]| -> Vec<f64> {
            if n == 0 {
                return Vec::new();
            }
            v.chunks(n).flat_map(|row| kept.iter().map(move |&i| row[i])).collect()
        };
        Self {
            alphabet: self.alphabet.clone(),
            level: self.level,
            dim: self.dim,
            log_sv: self.log_sv.clone(),
            shifted: pick(&self.shifted),
            averages: pick(&self.averages),
            n: kept.len(),
            alpha: kept.iter().map(|&i| self.alpha[i]).collect(),
            s: self.s,
        }
    }
}

/// Coordinates that span the affine hull of the moment points.
#[derive(Debug, Clone)]
struct Reduction {
    kept: Vec<usize>,
    /// The target satisfies every affine relation among the points.
    consistent: bool,
}

fn reduce(points: &[Vec<f64>], alpha: &[f64]) -> Reduction {
    let n = alpha.len();
    let rows = points.len() as f64;
    let mean: Vec<f64> = (0..n).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / rows).collect();
    let column = |j: usize| -> Vec<f64> { points.iter().map(|p| p[j] - mean[j]).collect() };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut consistent = true;
    for j in 0..n {
        let c = column(j);
        let scale = dot(&c, &c).sqrt();
        let mut r = c.clone();
        for b in &basis {
            let t = dot(b, &r);
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= t * y);
        }
        let rn = dot(&r, &r).sqrt();
        if rn > LP_TOL * (1.0 + scale) {
            r.iter_mut().for_each(|x| *x /= rn);
            basis.push(r);
            kept.push(j);
            continue;
        }
        // c ≈ Σ β_i c_{kept_i}; the target must obey the same relation.
        let cols: Vec<Vec<f64>> = kept.iter().map(|&i| column(i)).collect();
        let gram: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect();
        let rhs: Vec<f64> = cols.iter().map(|a| dot(a, &c)).collect();
        let beta = if kept.is_empty() {
            Vec::new()
        } else {
            cholesky_solve(&gram, &rhs).unwrap_or_else(|| vec![0.0; kept.len()])
        };
        let predicted = mean[j]
            + kept
                .iter()
                .zip(&beta)
                .map(|(&i, b)| b * (alpha[i] - mean[i]))
                .sum::<f64>();
        if (alpha[j] - predicted).abs() > LP_TOL * (1.0 + alpha[j].abs()) {
            consistent = false;
        }
    }
    Reduction { kept, consistent }
}

/// Solves `A x = b` for symmetric positive definite `A`.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Smallest L1 distance from `alpha` to the convex hull of `points`.
fn hull_distance(points: &[Vec<f64>], alpha: &[f64]) -> Result<f64> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<_> = points.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(lambda.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for (i, &a) in alpha.iter().enumerate() {
        let up = lp.add_var(1.0, (0.0, f64::INFINITY));
        let down = lp.add_var(1.0, (0.0, f64::INFINITY));
        let mut expr: Vec<_> = lambda.iter().zip(points).map(|(&v, p)| (v, p[i])).collect();
        expr.push((up, 1.0));
        expr.push((down, -1.0));
        lp.add_constraint(expr, ComparisonOp::Eq, a);
    }
    lp.solve()
        .map(|s| s.objective())
        .map_err(|e| Error::Numerical(format!("membership LP: {e}")))
}

/// Largest `t <= 1` such that some hull point `x` has `κ_i(x_i - α_i) >= t`.
fn orthant_margin(points: &[Vec<f64>], alpha: &[f64], signs: &[f64]) -> Result<f64> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let lambda: Vec<_> = points.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    lp.add_constraint(lambda.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for (i, (&a, &k)) in alpha.iter().zip(signs).enumerate() {
        let mut expr: Vec<_> = lambda.iter().zip(points).map(|(&v, p)| (v, k * p[i])).collect();
        expr.push((t, -1.0));
        lp.add_constraint(expr, ComparisonOp::Ge, k * a);
    }
    lp.solve()
        .map(|s| s.objective())
        .map_err(|e| Error::Numerical(format!("orthant LP: {e}")))
}

/// Position of `alpha` relative to the convex hull of `points`, measured
/// relative to the affine hull of the points.
pub fn feasibility_of_points(points: &[Vec<f64>], alpha: &[f64]) -> Result<Feasibility> {
    if points.is_empty() {
        return Err(Error::Invalid("no moment points".into()));
    }
    let red = reduce(points, alpha);
    classify_reduced(points, alpha, &red)
}

fn classify_reduced(points: &[Vec<f64>], alpha: &[f64], red: &Reduction) -> Result<Feasibility> {
    if !red.consistent {
        return Ok(Feasibility::Infeasible);
    }
    let m = red.kept.len();
    if m == 0 {
        return Ok(Feasibility::Interior);
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| red.kept.iter().map(|&i| p[i]).collect()).collect();
    let a: Vec<f64> = red.kept.iter().map(|&i| alpha[i]).collect();
    if hull_distance(&pts, &a)? > LP_TOL {
        return Ok(Feasibility::Infeasible);
    }
    for mask in 0..(1usize << m) {
        let signs: Vec<f64> = (0..m).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        if orthant_margin(&pts, &a, &signs)? <= LP_TOL {
            return Ok(Feasibility::Boundary);
        }
    }
    Ok(Feasibility::Interior)
}

pub fn feasibility(problem: &DualProblem) -> Result<Feasibility> {
    feasibility_of_points(&problem.moment_points(), &problem.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    pub q_cap: f64,
    pub max_iter: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            q_cap: DEFAULT_Q_CAP,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub q: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// The iterate reached `‖q‖ = q_cap` before the gradient vanished.
    pub capped: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Damped Newton with backtracking from `q0`, stopping at `‖q‖ = q_cap`.
fn newton(problem: &DualProblem, q0: &[f64], opts: &DualOptions) -> Result<DualSolution> {
    let n = problem.n;
    let mut q = q0.to_vec();
    for it in 0..opts.max_iter {
        let (f, g, h) = problem.derivatives(&q);
        let gn = max_abs(&g);
        if gn <= GRAD_TOL {
            return Ok(DualSolution {
                q,
                value: f,
                gradient_norm: gn,
                iterations: it,
                capped: false,
            });
        }
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let trace: f64 = (0..n).map(|i| h[i][i]).sum();
        let mut dir = None;
        let mut damping = 0.0;
        for _ in 0..8 {
            let mut hd = h.clone();
            (0..n).for_each(|i| hd[i][i] += damping);
            if let Some(d) = cholesky_solve(&hd, &neg_g) {
                if d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                    dir = Some(d);
                    break;
                }
            }
            damping = if damping == 0.0 { 1e-12 * (1.0 + trace) } else { damping * 100.0 };
        }
        let dir = dir.unwrap_or(neg_g);
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut next = None;
        // Below rounding level the decrease test is meaningless; Newton is
        // in its quadratic regime there, so take the full step.
        if -slope <= 1e-14 * (1.0 + f.abs()) {
            next = Some(q.iter().zip(&dir).map(|(a, d)| a + d).collect::<Vec<f64>>());
        }
        while next.is_none() && t > 1e-20 {
            let cand: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let fc = problem.value(&cand)?;
            if fc <= f + 1e-4 * t * slope {
                next = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let next = next.filter(|c| c != &q);
        let Some(mut cand) = next else {
            if gn <= STALL_GRAD_TOL {
                return Ok(DualSolution {
                    q,
                    value: f,
                    gradient_norm: gn,
                    iterations: it,
                    capped: false,
                });
            }
            return Err(Error::Numerical(format!("line search stalled with gradient {gn:e}")));
        };
        if norm(&cand) > opts.q_cap {
            // Walk from q along the step to the cap sphere.
            let step: Vec<f64> = cand.iter().zip(&q).map(|(c, a)| c - a).collect();
            let (a2, b, c) = (
                step.iter().map(|x| x * x).sum::<f64>(),
                2.0 * q.iter().zip(&step).map(|(x, y)| x * y).sum::<f64>(),
                q.iter().map(|x| x * x).sum::<f64>() - opts.q_cap * opts.q_cap,
            );
            let tau = ((-b + (b * b - 4.0 * a2 * c).max(0.0).sqrt()) / (2.0 * a2)).clamp(0.0, 1.0);
            cand = q.iter().zip(&step).map(|(x, y)| x + tau * y).collect();
            let (value, g, _) = problem.derivatives(&cand);
            return Ok(DualSolution {
                q: cand,
                value,
                gradient_norm: max_abs(&g),
                iterations: it + 1,
                capped: true,
            });
        }
        q = cand;
    }
    Err(Error::MaxIterations(opts.max_iter))
}

/// Minimizes `F_k(s, ·)` for an interior target and returns `μ_{q*}`.
///
/// Targets on the boundary of the moment polytope have no minimizer and
/// give [`Error::DivergentRay`].
pub fn minimize_dual(problem: &DualProblem, opts: &DualOptions) -> Result<(DualSolution, BernoulliMeasureK)> {
    let points = problem.moment_points();
    let red = reduce(&points, &problem.alpha);
    match classify_reduced(&points, &problem.alpha, &red)? {
        Feasibility::Infeasible => Err(Error::Invalid("target lies outside the moment polytope".into())),
        Feasibility::Boundary => Err(Error::DivergentRay { q_cap: opts.q_cap }),
        Feasibility::Interior => {
            let reduced = problem.select(&red.kept);
            let sol = newton(&reduced, &vec![0.0; red.kept.len()], opts)?;
            if sol.capped {
                return Err(Error::DivergentRay { q_cap: opts.q_cap });
            }
            let q = lift_q(&sol.q, &red.kept, problem.n);
            let measure = problem.measure(&q)?;
            Ok((DualSolution { q, ..sol }, measure))
        }
    }
}

fn lift_q(q: &[f64], kept: &[usize], n: usize) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (&i, &v) in kept.iter().zip(q) {
        full[i] = v;
    }
    full
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumStatus {
    Interior,
    BoundaryCapped,
    Empty,
    FlooredBySInfinity,
}

impl SpectrumStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::BoundaryCapped => "boundary_capped",
            Self::Empty => "empty",
            Self::FlooredBySInfinity => "floored_by_s_infinity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub alpha: Vec<f64>,
    /// `NaN` for empty level sets.
    pub dim: f64,
    /// Root of the dual before the `s_∞` floor and the `d` cap.
    pub s_root: f64,
    pub q_star: Vec<f64>,
    pub measure: Option<BernoulliMeasureK>,
    pub status: SpectrumStatus,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub level: usize,
    pub q_cap: f64,
    pub s_infinity_floor: f64,
    /// Bisection stops once the `s` bracket is this narrow.
    pub s_tolerance: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            level: 1,
            q_cap: DEFAULT_Q_CAP,
            s_infinity_floor: 0.0,
            s_tolerance: 1e-12,
        }
    }
}

/// Dimension of the level set `{A_nΦ → α}` from level-k measures.
pub fn spectrum_at(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    phi: &LevelKPotential,
    alpha: &[f64],
    opts: &SpectrumOptions,
) -> Result<SpectrumPoint> {
    let problem = DualProblem::new(ifs, alphabet, phi, alpha, opts.level, 0.0)?;
    spectrum_for_problem(&problem, ifs.dim() as f64, opts)
}

fn spectrum_for_problem(problem: &DualProblem, d: f64, opts: &SpectrumOptions) -> Result<SpectrumPoint> {
    let points = problem.moment_points();
    let red = reduce(&points, &problem.alpha);
    let feas = classify_reduced(&points, &problem.alpha, &red)?;
    let empty = || SpectrumPoint {
        alpha: problem.alpha.clone(),
        dim: f64::NAN,
        s_root: f64::NAN,
        q_star: vec![f64::NAN; problem.n],
        measure: None,
        status: SpectrumStatus::Empty,
        level: problem.level,
    };
    if feas == Feasibility::Infeasible {
        return Ok(empty());
    }
    let dual = DualOptions {
        q_cap: opts.q_cap,
        ..Default::default()
    };
    let mut reduced = problem.select(&red.kept);
    let mut solve = |s: f64, q0: &[f64]| -> Result<DualSolution> {
        reduced.set_s(s)?;
        newton(&reduced, q0, &dual)
    };

    let zero = vec![0.0; red.kept.len()];
    let mut best = solve(0.0, &zero)?;
    let mut root = 0.0;
    let top = solve(d, &zero)?;
    if top.value >= -ROOT_ACCEPT {
        root = d;
        best = top;
    } else {
        let (mut lo, mut hi) = (0.0, d);
        while hi - lo > opts.s_tolerance {
            let mid = 0.5 * (lo + hi);
            let q0 = if best.capped { zero.clone() } else { best.q.clone() };
            let sol = solve(mid, &q0)?;
            if sol.value.abs() < ROOT_ACCEPT {
                lo = mid;
                best = sol;
                break;
            }
            if sol.value > 0.0 {
                lo = mid;
                best = sol;
            } else {
                hi = mid;
            }
        }
        root = lo.max(root);
    }

    reduced.set_s(root)?;
    let measure = reduced.measure(&best.q)?;
    let q_star = lift_q(&best.q, &red.kept, problem.n);
    let mut status = match feas {
        Feasibility::Boundary => SpectrumStatus::BoundaryCapped,
        _ => SpectrumStatus::Interior,
    };
    let mut dim = root;
    if opts.s_infinity_floor > root {
        dim = opts.s_infinity_floor;
        status = SpectrumStatus::FlooredBySInfinity;
    }
    Ok(SpectrumPoint {
        alpha: problem.alpha.clone(),
        dim: dim.min(d),
        s_root: root,
        q_star,
        measure: Some(measure),
        status,
        level: problem.level,
    })
}

/// Spectrum over a grid of targets, in grid order. Failures are per point.
pub fn spectrum_curve(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    phi: &LevelKPotential,
    grid: &[Vec<f64>],
    opts: &SpectrumOptions,
) -> Vec<Result<SpectrumPoint>> {
    grid.par_iter()
        .map(|alpha| spectrum_at(ifs, alphabet, phi, alpha, opts))
        .collect()
}

/// One spectrum curve per level `k`.
pub fn spectrum_k_table(
    ifs: &AffineIfs,
    alphabet: &Alphabet,
    phi: &LevelKPotential,
    grid: &[Vec<f64>],
    levels: &[usize],
    opts: &SpectrumOptions,
) -> Vec<(usize, Vec<Result<SpectrumPoint>>)> {
    levels
        .iter()
        .map(|&k| {
            let o = SpectrumOptions { level: k, ..*opts };
            (k, spectrum_curve(ifs, alphabet, phi, grid, &o))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumLadder {
    pub rungs: Vec<(usize, SpectrumPoint)>,
    pub s_infinity: Interval,
    /// Running maximum over the rungs, floored by the lower end of `s_∞`.
    pub dim: f64,
}

/// Spectrum on the truncations `I_ℓ = {1..ℓ}` of an infinite family.
///
/// `phi` is given on the largest truncation and restricted to each rung.
pub fn spectrum_ladder(
    ifs: &AffineIfs,
    phi: &LevelKPotential,
    levels: &[usize],
    alpha: &[f64],
    s_infinity: Interval,
    opts: &SpectrumOptions,
) -> Result<SpectrumLadder> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("levels must be strictly increasing".into()));
    }
    if *levels.last().unwrap() > phi.alphabet_size() {
        return Err(Error::Invalid("potential does not cover the largest truncation".into()));
    }
    let floor = SpectrumOptions {
        s_infinity_floor: s_infinity.lo,
        ..*opts
    };
    let mut rungs = Vec::new();
    let mut dim = s_infinity.lo.min(ifs.dim() as f64);
    for &ell in levels {
        let p = phi.restrict(ell)?;
        let point = spectrum_at(ifs, &Alphabet::prefix(ell), &p, alpha, &floor)?;
        if point.status != SpectrumStatus::Empty {
            dim = dim.max(point.dim);
        }
        rungs.push((ell, point));
    }
    Ok(SpectrumLadder { rungs, s_infinity, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMatrix;
    use crate::measures::{cylinder_dimension_dk, moment};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn moran() -> AffineIfs {
        let r = 1.0 / 3.0;
        AffineIfs::finite(vec![SquareMatrix::diag(&[r, r]); 2]).unwrap()
    }

    fn scaled_pair() -> AffineIfs {
        AffineIfs::finite(vec![
            SquareMatrix::diag(&[1.0 / 3.0, 1.0 / 30.0]),
            SquareMatrix::from_rows(&[[0.0, -1.0 / 30.0], [10.0 / 30.0, 11.0 / 30.0]]),
        ])
        .unwrap()
    }

    fn digit() -> LevelKPotential {
        LevelKPotential::digit_indicator(2, 1)
    }

    fn two() -> Alphabet {
        Alphabet::prefix(2)
    }

    fn h(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn feasibility_examples() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(feasibility_of_points(&pts, &[0.5]).unwrap(), Feasibility::Interior);
        assert_eq!(feasibility_of_points(&pts, &[1.0]).unwrap(), Feasibility::Boundary);
        assert_eq!(feasibility_of_points(&pts, &[1.2]).unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn feasibility_in_two_dimensions() {
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(feasibility_of_points(&tri, &[0.2, 0.2]).unwrap(), Feasibility::Interior);
        assert_eq!(feasibility_of_points(&tri, &[0.5, 0.5]).unwrap(), Feasibility::Boundary);
        assert_eq!(feasibility_of_points(&tri, &[0.0, 0.3]).unwrap(), Feasibility::Boundary);
        assert_eq!(feasibility_of_points(&tri, &[0.6, 0.6]).unwrap(), Feasibility::Infeasible);
        // Points on a line: interior is relative to the line.
        let seg = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(feasibility_of_points(&seg, &[0.3, 0.7]).unwrap(), Feasibility::Interior);
        assert_eq!(feasibility_of_points(&seg, &[0.3, 0.6]).unwrap(), Feasibility::Infeasible);
        assert_eq!(feasibility_of_points(&seg, &[1.0, 0.0]).unwrap(), Feasibility::Boundary);
        let pt = vec![vec![2.0], vec![2.0]];
        assert_eq!(feasibility_of_points(&pt, &[2.0]).unwrap(), Feasibility::Interior);
        assert_eq!(feasibility_of_points(&pt, &[2.1]).unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn dual_value_examples() {
        let root = 2f64.ln() / 3f64.ln();
        let p = DualProblem::new(&moran(), &two(), &digit(), &[0.5], 1, root).unwrap();
        assert!(p.value(&[0.0]).unwrap().abs() < 1e-15);
        for &q in &[0.3, 1.7, 12.0] {
            assert_relative_eq!(p.value(&[q]).unwrap(), p.value(&[-q]).unwrap(), epsilon = 1e-14);
        }
        assert!(p.gradient(&[0.0]).unwrap()[0].abs() < 1e-15);
        let shifted = DualProblem::new(&moran(), &two(), &digit(), &[0.4], 1, root).unwrap();
        assert_relative_eq!(shifted.gradient(&[0.0]).unwrap()[0], 0.1, epsilon = 1e-14);
    }

    /// Minimizer of the explicit two-term sum `3^{-s}(e^{q(1-α)} + e^{-qα})`, by scalar Newton.
    fn besicovitch_q(alpha: f64, s: f64) -> f64 {
        let df = |q: f64| {
            (1.0 - alpha) * (-s * 3f64.ln() + q * (1.0 - alpha)).exp() - alpha * (-s * 3f64.ln() - q * alpha).exp()
        };
        let mut q = 0.0;
        for _ in 0..200 {
            let h = 1e-6;
            let d2 = (df(q + h) - df(q - h)) / (2.0 * h);
            q -= df(q) / d2;
        }
        q
    }

    #[test]
    fn besicovitch_dual_minimum() {
        let s = h(0.3) / 3f64.ln();
        let p = DualProblem::new(&moran(), &two(), &digit(), &[0.3], 1, s).unwrap();
        let (sol, mu) = minimize_dual(&p, &DualOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert_relative_eq!(sol.q[0], besicovitch_q(0.3, s), epsilon = 1e-8);
        assert_relative_eq!(sol.q[0], (0.3f64 / 0.7).ln(), epsilon = 1e-9);
        assert_relative_eq!(mu.weights()[0], 0.3, epsilon = 1e-10);
        assert_relative_eq!(mu.weights()[1], 0.7, epsilon = 1e-10);

        let half = DualProblem::new(&moran(), &two(), &digit(), &[0.5], 1, 0.6).unwrap();
        let (sol, mu) = minimize_dual(&half, &DualOptions::default()).unwrap();
        assert!(sol.q[0].abs() < 1e-12);
        assert_relative_eq!(mu.weights()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn vertex_target_diverges() {
        let p = DualProblem::new(&moran(), &two(), &digit(), &[1.0], 1, 0.3).unwrap();
        assert_eq!(
            minimize_dual(&p, &DualOptions::default()).unwrap_err(),
            Error::DivergentRay { q_cap: DEFAULT_Q_CAP }
        );
    }

    #[test]
    fn spectrum_examples() {
        let opts = SpectrumOptions::default();
        let pt = spectrum_at(&moran(), &two(), &digit(), &[0.5], &opts).unwrap();
        assert_relative_eq!(pt.dim, 2f64.ln() / 3f64.ln(), epsilon = 1e-9);
        assert_eq!(pt.status, SpectrumStatus::Interior);
        let pt = spectrum_at(&moran(), &two(), &digit(), &[0.3], &opts).unwrap();
        assert_relative_eq!(pt.dim, 0.556032, epsilon = 1e-6);
        let pt = spectrum_at(&moran(), &two(), &digit(), &[1.2], &opts).unwrap();
        assert_eq!(pt.status, SpectrumStatus::Empty);
        assert!(pt.dim.is_nan());
        let pt = spectrum_at(&moran(), &two(), &digit(), &[1.0], &opts).unwrap();
        assert_eq!(pt.status, SpectrumStatus::BoundaryCapped);
        assert!(pt.dim < 1e-6);
    }

    #[test]
    fn besicovitch_curve_is_concave() {
        let grid: Vec<Vec<f64>> = (1..=9).map(|i| vec![i as f64 / 10.0]).collect();
        let curve = spectrum_curve(&moran(), &two(), &digit(), &grid, &SpectrumOptions::default());
        let dims: Vec<f64> = curve.iter().map(|p| p.as_ref().unwrap().dim).collect();
        for (i, d) in dims.iter().enumerate() {
            assert_relative_eq!(*d, h((i + 1) as f64 / 10.0) / 3f64.ln(), epsilon = 1e-9);
        }
        for w in dims.windows(3) {
            assert!(w[1] >= 0.5 * (w[0] + w[2]));
        }
        let peak = dims.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, dims[4]);
    }

    #[test]
    fn infeasible_points_do_not_disturb_the_batch() {
        let grid = vec![vec![0.3], vec![1.2], vec![0.7]];
        let curve = spectrum_curve(&moran(), &two(), &digit(), &grid, &SpectrumOptions::default());
        assert_eq!(curve[1].as_ref().unwrap().status, SpectrumStatus::Empty);
        assert_relative_eq!(curve[0].as_ref().unwrap().dim, curve[2].as_ref().unwrap().dim, epsilon = 1e-9);
    }

    #[test]
    fn redundant_component_is_eliminated() {
        let phi = digit();
        let both = phi.with_affine_component(1.0, &[-1.0]);
        let opts = SpectrumOptions::default();
        for &a in &[0.2, 0.45, 0.8] {
            let one = spectrum_at(&moran(), &two(), &phi, &[a], &opts).unwrap();
            let two_c = spectrum_at(&moran(), &two(), &both, &[a, 1.0 - a], &opts).unwrap();
            assert_eq!(two_c.status, SpectrumStatus::Interior);
            assert_relative_eq!(one.dim, two_c.dim, epsilon = 1e-8);
            let off = spectrum_at(&moran(), &two(), &both, &[a, 0.9 - a], &opts).unwrap();
            assert_eq!(off.status, SpectrumStatus::Empty);
        }
    }

    #[test]
    fn self_consistency_at_interior_points() {
        let g = scaled_pair();
        let phi = LevelKPotential::new(2, 2, vec![vec![0.0, 1.0, 0.5, 2.0], vec![1.0, 0.0, 0.0, 0.3]]).unwrap();
        let opts = SpectrumOptions {
            level: 3,
            ..Default::default()
        };
        for alpha in [[0.8, 0.35], [1.0, 0.3], [0.6, 0.45]] {
            let pt = spectrum_at(&g, &two(), &phi, &alpha, &opts).unwrap();
            assert_eq!(pt.status, SpectrumStatus::Interior, "{alpha:?}");
            let mu = pt.measure.as_ref().unwrap();
            let m = moment(mu, &phi).unwrap();
            for (x, a) in m.iter().zip(&alpha) {
                assert!((x - a).abs() <= 1e-8);
            }
            assert!((cylinder_dimension_dk(mu, &g).unwrap() - pt.dim).abs() <= 1e-8);
        }
    }

    #[test]
    fn peak_touches_level_k_pressure_root() {
        let g = scaled_pair();
        let k = 4;
        let phi = digit();
        // s with Z_k(s) = 1, by plain bisection on the explicit sum.
        let maps = g.maps_for(&two()).unwrap();
        let words = collect_words(&maps, k, 1 << 20).unwrap();
        let z = |s: f64| -> f64 { words.iter().map(|(_, m)| crate::linalg::svf(m, s).unwrap()).sum() };
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if z(mid) > 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let s_k = 0.5 * (lo + hi);
        let gibbs = BernoulliMeasureK::from_svf(&g, two(), s_k, k, 1 << 20).unwrap();
        let alpha = moment(&gibbs, &phi).unwrap();
        let opts = SpectrumOptions {
            level: k,
            ..Default::default()
        };
        let pt = spectrum_at(&g, &two(), &phi, &alpha, &opts).unwrap();
        assert_relative_eq!(pt.dim, s_k, epsilon = 1e-9);
    }

    #[test]
    fn floor_and_ladder() {
        let opts = SpectrumOptions {
            s_infinity_floor: 0.9,
            ..Default::default()
        };
        let pt = spectrum_at(&moran(), &two(), &digit(), &[0.3], &opts).unwrap();
        assert_eq!(pt.status, SpectrumStatus::FlooredBySInfinity);
        assert_eq!(pt.dim, 0.9);

        let gen = crate::ifs::Generator::DiagGeometric {
            scales: vec![0.5, 0.25],
            ratios: vec![0.5, 0.5],
        };
        let f = AffineIfs::infinite(gen.clone(), gen.default_envelope().unwrap()).unwrap();
        let phi = LevelKPotential::digit_indicator(8, 1);
        let s_inf = crate::pressure::estimate_s_infinity(&f, 1e-6).unwrap();
        let lad = spectrum_ladder(&f, &phi, &[2, 4, 8], &[0.5], s_inf, &SpectrumOptions::default()).unwrap();
        let dims: Vec<f64> = lad.rungs.iter().map(|(_, p)| p.dim).collect();
        assert!(dims.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        assert_eq!(lad.dim, dims.iter().cloned().fold(0.0, f64::max));
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> (DualProblem, usize) {
        let ell: usize = rng.gen_range(2..=3);
        let maps: Vec<SquareMatrix> = (0..ell)
            .map(|_| loop {
                let m = SquareMatrix::from_row_major(2, (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
                if m.determinant().abs() > 1e-2 {
                    break m;
                }
            })
            .collect();
        let ifs = AffineIfs::finite(maps).unwrap();
        let n = rng.gen_range(1..=3);
        let level = rng.gen_range(1..=2);
        let comps = (0..n).map(|_| (0..ell.pow(level as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let phi = LevelKPotential::new(level, ell, comps).unwrap();
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let k = level + rng.gen_range(0..=1);
        let s = rng.gen_range(0.0..2.5);
        (DualProblem::new(&ifs, &Alphabet::prefix(ell), &phi, &alpha, k, s).unwrap(), n)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (p, n) = random_problem(&mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = p.gradient(&q).unwrap();
            let hstep = 1e-6;
            for i in 0..n {
                let mut a = q.clone();
                let mut b = q.clone();
                a[i] += hstep;
                b[i] -= hstep;
                let fd = (p.value(&a).unwrap() - p.value(&b).unwrap()) / (2.0 * hstep);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (p, n) = random_problem(&mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let hm = p.hessian(&q).unwrap();
            for i in 0..n {
                let mut a = q.clone();
                let mut b = q.clone();
                a[i] += 1e-5;
                b[i] -= 1e-5;
                let ga = p.gradient(&a).unwrap();
                let gb = p.gradient(&b).unwrap();
                for j in 0..n {
                    assert!(((ga[j] - gb[j]) / 2e-5 - hm[j][i]).abs() < 1e-6);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dual_is_convex(seed in any::<u64>(), lam in 0.01f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, n) = random_problem(&mut rng);
            let q1: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let q2: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mid: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let lhs = p.value(&mid).unwrap();
            let rhs = lam * p.value(&q1).unwrap() + (1.0 - lam) * p.value(&q2).unwrap();
            prop_assert!(lhs <= rhs + 1e-10);
        }

        #[test]
        fn dual_decreasing_in_s(seed in any::<u64>(), ds in 0.01f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut p, n) = random_problem(&mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a = p.value(&q).unwrap();
            p.set_s(p.s() + ds).unwrap();
            prop_assert!(p.value(&q).unwrap() < a);
        }
    }
}
