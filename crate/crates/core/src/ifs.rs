//! The linear parts `(T_i)` of an affine iterated function system.
//!
//! A system is either an explicit finite list of matrices or an infinite
//! family produced by a generator `i ↦ T_i` (`i >= 1`) together with a
//! declared, non-increasing tail envelope `i ↦ e(i) >= ‖T_i‖`. Infinite
//! families are never enumerated; every computation works on a finite
//! [`Alphabet`] of symbols.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, SquareMatrix, DET_FLOOR};

/// Default number of generator indices checked for infinite families.
pub const DEFAULT_PROBE_DEPTH: usize = 64;

/// Default lower bound on the min/max entry ratio of a positive family.
pub const DEFAULT_POSITIVITY_RATIO: f64 = 1e-6;

/// Relative slack for the parallelism test in [`common_invariant_line_2d`].
const INVARIANT_LINE_TOL: f64 = 1e-12;

type MatrixFn = Arc<dyn Fn(usize) -> SquareMatrix + Send + Sync>;
type ScalarFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Generator of an infinite family, indexed from `i = 1`.
#[derive(Clone)]
pub enum Generator {
    /// `T_i = diag(scales[j] · ratios[j]^i)`.
    DiagGeometric { scales: Vec<f64>, ratios: Vec<f64> },
    /// `T_i = diag(scales[j] · (i + shift)^{-exponents[j]})`.
    DiagPower {
        scales: Vec<f64>,
        shift: f64,
        exponents: Vec<f64>,
    },
    Custom { dim: usize, f: MatrixFn },
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DiagGeometric { scales, ratios } => f
                .debug_struct("DiagGeometric")
                .field("scales", scales)
                .field("ratios", ratios)
                .finish(),
            Self::DiagPower {
                scales,
                shift,
                exponents,
            } => f
                .debug_struct("DiagPower")
                .field("scales", scales)
                .field("shift", shift)
                .field("exponents", exponents)
                .finish(),
            Self::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

impl Generator {
    pub fn custom(dim: usize, f: impl Fn(usize) -> SquareMatrix + Send + Sync + 'static) -> Self {
        Self::Custom { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::DiagGeometric { scales, .. } | Self::DiagPower { scales, .. } => scales.len(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    /// `T_i` for `i >= 1`.
    pub fn matrix(&self, i: usize) -> SquareMatrix {
        debug_assert!(i >= 1);
        let x = i as f64;
        match self {
            Self::DiagGeometric { scales, ratios } => {
                let entries: Vec<f64> = scales.iter().zip(ratios).map(|(c, r)| c * r.powf(x)).collect();
                SquareMatrix::diag(&entries)
            }
            Self::DiagPower {
                scales,
                shift,
                exponents,
            } => {
                let entries: Vec<f64> = scales
                    .iter()
                    .zip(exponents)
                    .map(|(c, p)| c * (x + shift).powf(-p))
                    .collect();
                SquareMatrix::diag(&entries)
            }
            Self::Custom { f, .. } => f(i),
        }
    }

    /// The tightest catalogue envelope that dominates this generator.
    pub fn default_envelope(&self) -> Option<TailEnvelope> {
        match self {
            Self::DiagGeometric { scales, ratios } => Some(TailEnvelope::Geometric {
                scale: scales.iter().fold(0.0f64, |a, c| a.max(c.abs())),
                ratio: ratios.iter().fold(0.0f64, |a, r| a.max(r.abs())),
            }),
            Self::DiagPower {
                scales,
                shift,
                exponents,
            } => Some(TailEnvelope::PowerLaw {
                scale: scales.iter().fold(0.0f64, |a, c| a.max(c.abs())),
                shift: *shift,
                exponent: exponents.iter().cloned().fold(f64::INFINITY, f64::min),
            }),
            Self::Custom { .. } => None,
        }
    }
}

/// Declared upper bound `e(i) >= ‖T_i‖`, non-increasing in `i`.
#[derive(Clone)]
pub enum TailEnvelope {
    /// `scale · ratio^i`
    Geometric { scale: f64, ratio: f64 },
    /// `scale · (i + shift)^{-exponent}`
    PowerLaw { scale: f64, shift: f64, exponent: f64 },
    Custom(ScalarFn),
}

impl fmt::Debug for TailEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric { scale, ratio } => f
                .debug_struct("Geometric")
                .field("scale", scale)
                .field("ratio", ratio)
                .finish(),
            Self::PowerLaw {
                scale,
                shift,
                exponent,
            } => f
                .debug_struct("PowerLaw")
                .field("scale", scale)
                .field("shift", shift)
                .field("exponent", exponent)
                .finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl TailEnvelope {
    pub fn custom(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, i: usize) -> f64 {
        let x = i as f64;
        match self {
            Self::Geometric { scale, ratio } => scale * ratio.powf(x),
            Self::PowerLaw {
                scale,
                shift,
                exponent,
            } => scale * (x + shift).powf(-exponent),
            Self::Custom(f) => f(i),
        }
    }

    /// Upper bound for `Σ_{i > from} e(i)^s`, or `None` when the envelope
    /// does not certify convergence.
    pub fn tail_sum(&self, from: usize, s: f64) -> Option<f64> {
        if s <= 0.0 {
            return None;
        }
        match *self {
            Self::Geometric { scale, ratio } => {
                if !(0.0..1.0).contains(&ratio) {
                    return None;
                }
                if ratio == 0.0 {
                    return Some(0.0);
                }
                let q = ratio.powf(s);
                Some(scale.powf(s) * q.powf((from + 1) as f64) / (1.0 - q))
            }
            Self::PowerLaw {
                scale,
                shift,
                exponent,
            } => {
                let p = exponent * s;
                let base = from as f64 + shift;
                if p <= 1.0 || base <= 0.0 {
                    return None;
                }
                // Σ_{i>from} (i+shift)^{-p} <= ∫_{from}^{∞} (x+shift)^{-p} dx
                Some(scale.powf(s) * base.powf(1.0 - p) / (p - 1.0))
            }
            Self::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfiniteFamily {
    pub generator: Generator,
    pub envelope: TailEnvelope,
}

#[derive(Debug, Clone)]
pub enum IfsKind {
    Finite(Vec<SquareMatrix>),
    Infinite(InfiniteFamily),
}

/// The system `(T_i)`. Symbols are zero-based: symbol `j` is the map `T_{j+1}`.
#[derive(Debug, Clone)]
pub struct AffineIfs {
    dim: usize,
    kind: IfsKind,
}

impl AffineIfs {
    pub fn finite(maps: Vec<SquareMatrix>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Invalid("a finite system needs at least one map".into()))?;
        let dim = first.dim();
        if let Some(bad) = maps.iter().find(|m| m.dim() != dim) {
            return Err(Error::WrongDimension {
                expected: dim,
                actual: bad.dim(),
            });
        }
        Ok(Self {
            dim,
            kind: IfsKind::Finite(maps),
        })
    }

    pub fn infinite(generator: Generator, envelope: TailEnvelope) -> Result<Self> {
        let dim = generator.dim();
        if dim == 0 {
            return Err(Error::Invalid("generator dimension must be at least 1".into()));
        }
        Ok(Self {
            dim,
            kind: IfsKind::Infinite(InfiniteFamily { generator, envelope }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &IfsKind {
        &self.kind
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, IfsKind::Finite(_))
    }

    /// Number of maps for finite systems, `None` for infinite families.
    pub fn len(&self) -> Option<usize> {
        match &self.kind {
            IfsKind::Finite(m) => Some(m.len()),
            IfsKind::Infinite(_) => None,
        }
    }

    pub fn envelope(&self) -> Option<&TailEnvelope> {
        match &self.kind {
            IfsKind::Finite(_) => None,
            IfsKind::Infinite(f) => Some(&f.envelope),
        }
    }

    /// The matrix for a zero-based symbol.
    pub fn map(&self, symbol: usize) -> SquareMatrix {
        match &self.kind {
            IfsKind::Finite(maps) => maps[symbol].clone(),
            IfsKind::Infinite(f) => f.generator.matrix(symbol + 1),
        }
    }

    /// The full alphabet of a finite system.
    pub fn full_alphabet(&self) -> Result<Alphabet> {
        match &self.kind {
            IfsKind::Finite(maps) => Ok(Alphabet::prefix(maps.len())),
            IfsKind::Infinite(_) => Err(Error::Invalid(
                "infinite families need an explicit finite alphabet".into(),
            )),
        }
    }

    /// Materializes the matrices of a finite alphabet, in alphabet order.
    pub fn maps_for(&self, alphabet: &Alphabet) -> Result<Vec<SquareMatrix>> {
        if let IfsKind::Finite(maps) = &self.kind {
            if let Some(&bad) = alphabet.symbols().iter().find(|&&s| s >= maps.len()) {
                return Err(Error::SymbolOutOfRange {
                    symbol: bad,
                    size: maps.len(),
                });
            }
        }
        Ok(alphabet.symbols().iter().map(|&s| self.map(s)).collect())
    }
}

/// A finite, ordered set of zero-based symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(Vec<usize>);

impl Alphabet {
    pub fn new(mut symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Invalid("alphabet must be non-empty".into()));
        }
        symbols.sort_unstable();
        symbols.dedup();
        Ok(Self(symbols))
    }

    /// `{0, …, len-1}`, i.e. the maps `T_1, …, T_len`.
    pub fn prefix(len: usize) -> Self {
        assert!(len >= 1, "alphabet must be non-empty");
        Self((0..len).collect())
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, symbol: usize) -> bool {
        self.0.binary_search(&symbol).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `sup_i ‖T_i‖` (for infinite families: probed maxima joined with the
    /// envelope beyond the probe depth).
    pub contraction_bound: f64,
    /// `contraction_bound < 1/2`, the hypothesis of the dimension results.
    pub strict_half: bool,
    pub invertible: bool,
    /// Number of maps inspected.
    pub probed: usize,
}

/// Checks invertibility and contraction; for infinite families also that
/// the envelope dominates and does not increase on `1..=probe_depth`.
///
/// Map indices in errors are one-based.
pub fn validate(ifs: &AffineIfs, probe_depth: usize) -> Result<ValidationReport> {
    let (maps, tail): (Vec<SquareMatrix>, f64) = match ifs.kind() {
        IfsKind::Finite(maps) => (maps.clone(), 0.0),
        IfsKind::Infinite(f) => {
            let maps: Vec<SquareMatrix> = (1..=probe_depth).map(|i| f.generator.matrix(i)).collect();
            let mut prev = f64::INFINITY;
            for (k, m) in maps.iter().enumerate() {
                let i = k + 1;
                let e = f.envelope.eval(i);
                if !e.is_finite() || e > prev * (1.0 + 1e-12) {
                    return Err(Error::Invalid(format!("tail envelope increases at index {i}")));
                }
                prev = e;
                let norm = m.norm();
                if norm > e * (1.0 + 1e-12) {
                    return Err(Error::EnvelopeViolation {
                        index: i,
                        norm,
                        envelope: e,
                    });
                }
            }
            (maps, f.envelope.eval(probe_depth + 1))
        }
    };
    let mut bound = tail;
    for (k, m) in maps.iter().enumerate() {
        if m.determinant().abs() < DET_FLOOR || singular_values(m).is_err() {
            return Err(Error::NonInvertible(k + 1));
        }
        let norm = m.norm();
        if norm >= 1.0 {
            return Err(Error::NotContracting { index: k + 1, norm });
        }
        bound = bound.max(norm);
    }
    if bound >= 1.0 {
        return Err(Error::NotContracting {
            index: maps.len() + 1,
            norm: bound,
        });
    }
    Ok(ValidationReport {
        contraction_bound: bound,
        strict_half: bound < 0.5,
        invertible: true,
        probed: maps.len(),
    })
}

/// Real eigen-directions of a 2×2 matrix that is not a multiple of the identity.
fn eigen_directions_2d(m: &SquareMatrix) -> Vec<[f64; 2]> {
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc < -INVARIANT_LINE_TOL * scale * scale {
        return Vec::new();
    }
    let root = disc.max(0.0).sqrt();
    let mut lambdas = vec![half_tr + root];
    if root > INVARIANT_LINE_TOL * scale {
        lambdas.push(half_tr - root);
    }
    lambdas
        .into_iter()
        .filter_map(|l| {
            // rows of (T - λI) are orthogonal to the eigenvector
            let v1 = [b, l - a];
            let v2 = [l - d, c];
            let n1 = v1[0].hypot(v1[1]);
            let n2 = v2[0].hypot(v2[1]);
            let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
            (n > 0.0).then(|| normalize_direction([v[0] / n, v[1] / n]))
        })
        .collect()
}

fn normalize_direction(v: [f64; 2]) -> [f64; 2] {
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn preserves_line(m: &SquareMatrix, v: [f64; 2]) -> bool {
    let w = m.apply(&v);
    let cross = v[0] * w[1] - v[1] * w[0];
    cross.abs() <= INVARIANT_LINE_TOL * 10.0 * m.norm()
}

fn is_scalar_2d(m: &SquareMatrix) -> bool {
    let tol = INVARIANT_LINE_TOL * m.norm();
    m.get(0, 1).abs() <= tol && m.get(1, 0).abs() <= tol && (m.get(0, 0) - m.get(1, 1)).abs() <= tol
}

/// A unit direction spanning a line fixed by every matrix, if one exists.
/// `None` certifies irreducibility of the family.
pub fn common_invariant_line_2d(matrices: &[SquareMatrix]) -> Result<Option<[f64; 2]>> {
    if matrices.is_empty() {
        return Err(Error::Invalid("matrix list must be non-empty".into()));
    }
    if let Some(bad) = matrices.iter().find(|m| m.dim() != 2) {
        return Err(Error::WrongDimension {
            expected: 2,
            actual: bad.dim(),
        });
    }
    let Some(pivot) = matrices.iter().find(|m| !is_scalar_2d(m)) else {
        // scalar matrices fix every line
        return Ok(Some([1.0, 0.0]));
    };
    Ok(eigen_directions_2d(pivot)
        .into_iter()
        .find(|&v| matrices.iter().all(|m| preserves_line(m, v))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriState {
    Yes,
    No,
    NotApplicable,
}

/// Which structural sufficient conditions for quasi-multiplicativity hold.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub irreducible_2d: TriState,
    pub positive_family: bool,
    /// Smallest min/max entry ratio over the family; `None` unless every
    /// entry is strictly positive.
    pub positivity_ratio: Option<f64>,
    pub diagonal_ordered: bool,
}

impl StructureReport {
    /// At least one of the sufficient conditions holds.
    pub fn quasi_multiplicative(&self) -> bool {
        self.irreducible_2d == TriState::Yes || self.positive_family || self.diagonal_ordered
    }
}

/// Classifies an explicit list of matrices.
pub fn classify_maps(maps: &[SquareMatrix], ratio_bound: f64) -> StructureReport {
    let dim = maps.first().map_or(0, |m| m.dim());

    let positivity_ratio = if maps.iter().all(|m| m.as_slice().iter().all(|&x| x > 0.0)) {
        maps.iter()
            .map(|m| {
                let lo = m.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = m.as_slice().iter().cloned().fold(0.0, f64::max);
                lo / hi
            })
            .reduce(f64::min)
    } else {
        None
    };
    let positive_family = dim == 2 && positivity_ratio.is_some_and(|r| r >= ratio_bound);

    let diagonal_ordered = !maps.is_empty()
        && maps.iter().all(|m| {
            m.is_diagonal() && m.diagonal().windows(2).all(|w| w[0].abs() > w[1].abs())
        });

    let irreducible_2d = if dim != 2 {
        TriState::NotApplicable
    } else {
        match common_invariant_line_2d(maps) {
            Ok(None) => TriState::Yes,
            Ok(Some(_)) => TriState::No,
            Err(_) => TriState::NotApplicable,
        }
    };

    StructureReport {
        irreducible_2d,
        positive_family,
        positivity_ratio,
        diagonal_ordered,
    }
}

/// Classifies a system; infinite families are probed on `1..=probe_depth`.
pub fn classify(ifs: &AffineIfs, probe_depth: usize, ratio_bound: f64) -> StructureReport {
    match ifs.kind() {
        IfsKind::Finite(maps) => classify_maps(maps, ratio_bound),
        IfsKind::Infinite(f) => {
            let maps: Vec<SquareMatrix> = (1..=probe_depth).map(|i| f.generator.matrix(i)).collect();
            classify_maps(&maps, ratio_bound)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_pair() -> Vec<SquareMatrix> {
        vec![
            SquareMatrix::from_rows(&[[10.0, 0.0], [0.0, 1.0]]),
            SquareMatrix::from_rows(&[[0.0, -1.0], [10.0, 11.0]]),
        ]
    }

    fn scaled_pair() -> Vec<SquareMatrix> {
        paper_pair().iter().map(|m| m.scaled(1.0 / 30.0)).collect()
    }

    #[test]
    fn validate_similarities() {
        let ifs = AffineIfs::finite(vec![SquareMatrix::diag(&[1.0 / 3.0; 2]); 2]).unwrap();
        let r = validate(&ifs, DEFAULT_PROBE_DEPTH).unwrap();
        assert!(r.strict_half);
        assert_relative_eq!(r.contraction_bound, 1.0 / 3.0);
    }

    #[test]
    fn validate_mixed_pair() {
        let t2 = SquareMatrix::from_rows(&[[0.0, -1.0], [10.0, 11.0]]).scaled(1.0 / 30.0);
        let ifs = AffineIfs::finite(vec![SquareMatrix::diag(&[0.4, 0.2]), t2]).unwrap();
        let r = validate(&ifs, DEFAULT_PROBE_DEPTH).unwrap();
        assert!(r.strict_half);
        assert_relative_eq!(r.contraction_bound, 0.49615, epsilon = 1e-5);
    }

    #[test]
    fn validate_not_half() {
        let ifs = AffineIfs::finite(vec![SquareMatrix::diag(&[0.6, 0.2])]).unwrap();
        let r = validate(&ifs, DEFAULT_PROBE_DEPTH).unwrap();
        assert!(!r.strict_half);
    }

    #[test]
    fn validate_errors() {
        let ifs = AffineIfs::finite(vec![
            SquareMatrix::diag(&[0.3, 0.2]),
            SquareMatrix::from_rows(&[[0.2, 0.4], [0.1, 0.2]]),
        ])
        .unwrap();
        assert_eq!(validate(&ifs, 8), Err(Error::NonInvertible(2)));
        let ifs = AffineIfs::finite(vec![SquareMatrix::diag(&[1.2, 0.2])]).unwrap();
        assert!(matches!(validate(&ifs, 8), Err(Error::NotContracting { index: 1, .. })));
    }

    #[test]
    fn validate_infinite_envelope() {
        let gen = Generator::DiagGeometric {
            scales: vec![0.5, 0.25],
            ratios: vec![0.5, 0.5],
        };
        let env = gen.default_envelope().unwrap();
        let ifs = AffineIfs::infinite(gen.clone(), env).unwrap();
        let r = validate(&ifs, DEFAULT_PROBE_DEPTH).unwrap();
        assert_eq!(r.probed, DEFAULT_PROBE_DEPTH);
        assert_relative_eq!(r.contraction_bound, 0.25);

        let tight = AffineIfs::infinite(
            gen,
            TailEnvelope::Geometric {
                scale: 0.4,
                ratio: 0.5,
            },
        )
        .unwrap();
        assert!(matches!(
            validate(&tight, DEFAULT_PROBE_DEPTH),
            Err(Error::EnvelopeViolation { index: 1, .. })
        ));
    }

    #[test]
    fn power_envelope_tail_sum() {
        let env = TailEnvelope::PowerLaw {
            scale: 0.5,
            shift: 1.0,
            exponent: 1.0,
        };
        assert!(env.tail_sum(10, 1.0).is_none());
        let t = env.tail_sum(10, 2.0).unwrap();
        let brute: f64 = (11..200_000).map(|i| env.eval(i).powi(2)).sum();
        assert!(t >= brute);
        assert!(t < brute * 1.2);
    }

    #[test]
    fn invariant_line_examples() {
        assert_eq!(common_invariant_line_2d(&paper_pair()).unwrap(), None);
        let sym = vec![
            SquareMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]),
            SquareMatrix::from_rows(&[[3.0, 1.0], [1.0, 3.0]]),
        ];
        let v = common_invariant_line_2d(&sym).unwrap().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(v[0], h, epsilon = 1e-12);
        assert_relative_eq!(v[1], h, epsilon = 1e-12);
        let rot = vec![SquareMatrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).scaled(1.0 / 3.0)];
        assert_eq!(common_invariant_line_2d(&rot).unwrap(), None);
        assert!(matches!(
            common_invariant_line_2d(&[SquareMatrix::identity(3)]),
            Err(Error::WrongDimension { .. })
        ));
    }

    #[test]
    fn invariant_line_jordan_and_triangular() {
        let upper = vec![
            SquareMatrix::from_rows(&[[0.3, 0.1], [0.0, 0.2]]),
            SquareMatrix::from_rows(&[[0.1, -0.2], [0.0, 0.4]]),
        ];
        let v = common_invariant_line_2d(&upper).unwrap().unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-12);
        let jordan = vec![SquareMatrix::from_rows(&[[0.3, 0.1], [0.0, 0.3]])];
        assert!(common_invariant_line_2d(&jordan).unwrap().is_some());
    }

    #[test]
    fn classify_examples() {
        let diag = vec![SquareMatrix::diag(&[0.4, 0.2]), SquareMatrix::diag(&[0.3, 0.1])];
        assert!(classify_maps(&diag, DEFAULT_POSITIVITY_RATIO).diagonal_ordered);

        let pos = classify_maps(
            &[SquareMatrix::from_rows(&[[0.2, 0.1], [0.1, 0.2]])],
            DEFAULT_POSITIVITY_RATIO,
        );
        assert!(pos.positive_family);
        assert_relative_eq!(pos.positivity_ratio.unwrap(), 0.5);

        let r = classify_maps(&scaled_pair(), DEFAULT_POSITIVITY_RATIO);
        assert_eq!(r.irreducible_2d, TriState::Yes);
        assert!(!r.positive_family);
        assert!(!r.diagonal_ordered);
        assert!(r.quasi_multiplicative());
    }

    #[test]
    fn mixed_orderings_are_not_diagonal_ordered() {
        let mixed = vec![SquareMatrix::diag(&[0.4, 0.2]), SquareMatrix::diag(&[0.2, 0.4])];
        assert!(!classify_maps(&mixed, DEFAULT_POSITIVITY_RATIO).diagonal_ordered);
        let equal = vec![SquareMatrix::diag(&[0.3, 0.3])];
        assert!(!classify_maps(&equal, DEFAULT_POSITIVITY_RATIO).diagonal_ordered);
    }

    #[test]
    fn classify_is_order_invariant() {
        let mut maps = scaled_pair();
        maps.push(SquareMatrix::from_rows(&[[0.2, 0.1], [0.05, 0.3]]));
        maps.push(SquareMatrix::diag(&[0.4, 0.1]));
        let base = classify_maps(&maps, DEFAULT_POSITIVITY_RATIO);
        maps.reverse();
        assert_eq!(classify_maps(&maps, DEFAULT_POSITIVITY_RATIO), base);
        maps.swap(0, 2);
        assert_eq!(classify_maps(&maps, DEFAULT_POSITIVITY_RATIO), base);
    }

    #[test]
    fn infinite_classify_probes_generator() {
        let gen = Generator::DiagPower {
            scales: vec![0.5, 0.25],
            shift: 1.0,
            exponents: vec![1.0, 1.0],
        };
        let env = gen.default_envelope().unwrap();
        let ifs = AffineIfs::infinite(gen, env).unwrap();
        let r = classify(&ifs, 16, DEFAULT_POSITIVITY_RATIO);
        assert!(r.diagonal_ordered);
        assert_eq!(ifs.map(0).diagonal(), vec![0.25, 0.125]);
    }
}
