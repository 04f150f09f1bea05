//! Small dense square matrices, their singular values, and the singular
//! value function.
//!
//! For `0 <= s <= d` write `s = m + δ` with `m` an integer and `0 < δ <= 1`;
//! the singular value function is
//!
//! ```text
//! φ^s(T) = γ_1(T) ⋯ γ_m(T) · γ_{m+1}(T)^δ
//! ```
//!
//! and `φ^s(T) = |det T|^{s/d}` for `s >= d`. `φ^0 = 1`.
//!
//! `2 × 2` matrices take a closed-form path; larger ones use one-sided
//! Jacobi rotations.

use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};

/// Matrices with `|det|` below this are rejected as singular.
pub const DET_FLOOR: f64 = 1e-300;

/// Off-diagonal tolerance for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 80;

/// A `d × d` real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim).collect();
        f.debug_tuple("SquareMatrix").field(&rows).finish()
    }
}

impl SquareMatrix {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::WrongDimension {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from rows; panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.as_ref().len(), dim, "rows must form a square matrix");
            data.extend_from_slice(r.as_ref());
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &e) in entries.iter().enumerate() {
            data[i * dim + i] = e;
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j];
            }
        }
        Self { dim: d, data }
    }

    /// Writes `self * rhs` into `out` without allocating.
    pub fn mul_into(&self, rhs: &SquareMatrix, out: &mut SquareMatrix) {
        let d = self.dim;
        debug_assert_eq!(d, rhs.dim);
        debug_assert_eq!(d, out.dim);
        if d == 2 {
            let a = &self.data;
            let b = &rhs.data;
            out.data[0] = a[0] * b[0] + a[1] * b[2];
            out.data[1] = a[0] * b[1] + a[1] * b[3];
            out.data[2] = a[2] * b[0] + a[3] * b[2];
            out.data[3] = a[2] * b[1] + a[3] * b[3];
            return;
        }
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.data[i * d + k] * rhs.data[k * d + j];
                }
                out.data[i * d + j] = acc;
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        debug_assert_eq!(v.len(), d);
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum())
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| i == j || self.data[i * d + j] == 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn determinant(&self) -> f64 {
        let d = self.dim;
        match d {
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => {
                let mut a = self.data.clone();
                let mut det = 1.0;
                for col in 0..d {
                    let pivot = (col..d)
                        .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                        .unwrap();
                    if a[pivot * d + col] == 0.0 {
                        return 0.0;
                    }
                    if pivot != col {
                        for j in 0..d {
                            a.swap(pivot * d + j, col * d + j);
                        }
                        det = -det;
                    }
                    let p = a[col * d + col];
                    det *= p;
                    for r in col + 1..d {
                        let f = a[r * d + col] / p;
                        for j in col..d {
                            a[r * d + j] -= f * a[col * d + j];
                        }
                    }
                }
                det
            }
        }
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() < DET_FLOOR {
            return Err(Error::SingularMatrix { det });
        }
        let d = self.dim;
        let mut a = self.data.clone();
        let mut inv = Self::identity(d).data;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .unwrap();
            if pivot != col {
                for j in 0..d {
                    a.swap(pivot * d + j, col * d + j);
                    inv.swap(pivot * d + j, col * d + j);
                }
            }
            let p = a[col * d + col];
            for j in 0..d {
                a[col * d + j] /= p;
                inv[col * d + j] /= p;
            }
            for r in 0..d {
                if r != col {
                    let f = a[r * d + col];
                    if f != 0.0 {
                        for j in 0..d {
                            a[r * d + j] -= f * a[col * d + j];
                            inv[r * d + j] -= f * inv[col * d + j];
                        }
                    }
                }
            }
        }
        Ok(Self { dim: d, data: inv })
    }

    /// Operator 2-norm, i.e. the largest singular value.
    pub fn norm(&self) -> f64 {
        if self.dim == 2 {
            return sv2(&self.data).0;
        }
        jacobi_singular_values(self)[0]
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;

    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        let mut out = SquareMatrix {
            dim: self.dim,
            data: vec![0.0; self.dim * self.dim],
        };
        self.mul_into(rhs, &mut out);
        out
    }
}

/// Singular values `γ_1 >= … >= γ_d > 0` of an invertible matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn log_svf(&self, s: f64) -> Result<f64> {
        log_svf_from_values(&self.values, s)
    }

    pub fn svf(&self, s: f64) -> Result<f64> {
        self.log_svf(s).map(f64::exp)
    }
}

/// `log φ^s` from a non-increasing list of positive singular values.
pub fn log_svf_from_values(values: &[f64], s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeExponent(s));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let d = values.len();
    let df = d as f64;
    if s >= df {
        let log_det: f64 = values.iter().map(|g| g.ln()).sum();
        return Ok(s / df * log_det);
    }
    let m = s.ceil() as usize - 1;
    let delta = s - m as f64;
    let head: f64 = values[..m].iter().map(|g| g.ln()).sum();
    Ok(head + delta * values[m].ln())
}

/// `log φ^s` from the logarithms of the singular values; `s` must be `>= 0`.
pub fn log_svf_from_log_values(log_values: &[f64], s: f64) -> f64 {
    let d = log_values.len();
    let df = d as f64;
    if s == 0.0 {
        0.0
    } else if s >= df {
        s / df * log_values.iter().sum::<f64>()
    } else {
        let m = s.ceil() as usize - 1;
        log_values[..m].iter().sum::<f64>() + (s - m as f64) * log_values[m]
    }
}

pub fn singular_values(m: &SquareMatrix) -> Result<SingularSpectrum> {
    singular_values_with_floor(m, DET_FLOOR)
}

pub fn singular_values_with_floor(m: &SquareMatrix, det_floor: f64) -> Result<SingularSpectrum> {
    let values = match m.dim {
        1 => {
            let v = m.data[0].abs();
            if v < det_floor {
                return Err(Error::SingularMatrix { det: m.data[0] });
            }
            vec![v]
        }
        2 => {
            let (g1, g2) = sv2(&m.data);
            let det = m.determinant();
            if det.abs() < det_floor || g2 <= 0.0 {
                return Err(Error::SingularMatrix { det });
            }
            vec![g1, g2]
        }
        _ => {
            let det = m.determinant();
            if det.abs() < det_floor {
                return Err(Error::SingularMatrix { det });
            }
            jacobi_singular_values(m)
        }
    };
    Ok(SingularSpectrum { values })
}

/// `φ^s(m)`.
pub fn svf(m: &SquareMatrix, s: f64) -> Result<f64> {
    log_svf(m, s).map(f64::exp)
}

/// `log φ^s(m)`; avoids heap allocation for `d <= 2`.
pub fn log_svf(m: &SquareMatrix, s: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeExponent(s));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if m.dim == 2 {
        let det = m.determinant();
        if det.abs() < DET_FLOOR {
            return Err(Error::SingularMatrix { det });
        }
        let (g1, g2) = sv2(&m.data);
        return log_svf_from_values(&[g1, g2], s);
    }
    singular_values(m)?.log_svf(s)
}

/// `log|det T_i|` for each map; fails on a singular map.
pub fn log_abs_dets(maps: &[SquareMatrix]) -> Result<Vec<f64>> {
    maps.iter()
        .map(|m| {
            let det = m.determinant();
            if det.abs() < DET_FLOOR {
                Err(Error::SingularMatrix { det })
            } else {
                Ok(det.abs().ln())
            }
        })
        .collect()
}

/// `log|det T_w|` from per-map log-determinants.
#[inline]
pub(crate) fn word_log_det(log_dets: &[f64], word: &[u32]) -> f64 {
    word.iter().map(|&i| log_dets[i as usize]).sum()
}

/// Log singular values of a product whose `log|det|` is known exactly.
///
/// The smallest value is recovered as `log|det| - Σ_{i<d} log γ_i`. This
/// stays accurate when rounding in the product has wiped out its determinant.
pub fn log_singular_values_with_det(m: &SquareMatrix, log_abs_det: f64) -> Result<Vec<f64>> {
    let mut logs: Vec<f64> = match m.dim {
        1 => return Ok(vec![log_abs_det]),
        2 => vec![sv2_largest(&m.data).ln(), 0.0],
        _ => {
            let mut v: Vec<f64> = jacobi_singular_values(m).iter().map(|g| g.ln()).collect();
            v[m.dim - 1] = 0.0;
            v
        }
    };
    let d = logs.len();
    let head: f64 = logs[..d - 1].iter().sum();
    if !head.is_finite() {
        return Err(Error::SingularMatrix { det: log_abs_det.exp() });
    }
    logs[d - 1] = log_abs_det - head;
    Ok(logs)
}

/// `log φ^s` of a product whose `log|det|` is known exactly.
pub fn log_svf_with_det(m: &SquareMatrix, s: f64, log_abs_det: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeExponent(s));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if m.dim == 2 {
        if s >= 2.0 {
            return Ok(0.5 * s * log_abs_det);
        }
        let l1 = sv2_largest(&m.data).ln();
        if !l1.is_finite() {
            return Err(Error::SingularMatrix { det: log_abs_det.exp() });
        }
        return Ok(if s <= 1.0 { s * l1 } else { l1 + (s - 1.0) * (log_abs_det - l1) });
    }
    Ok(log_svf_from_log_values(&log_singular_values_with_det(m, log_abs_det)?, s))
}

#[inline]
fn sv2_largest(m: &[f64]) -> f64 {
    let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
    (0.5 * (a + d)).hypot(0.5 * (c - b)) + (0.5 * (a - d)).hypot(0.5 * (c + b))
}

/// Closed-form singular values of a 2×2 matrix `[[a, b], [c, d]]`.
///
/// With `E = (a+d)/2`, `F = (a-d)/2`, `G = (c+b)/2`, `H = (c-b)/2` the
/// eigenvalues of `TᵀT` are `(√(E²+H²) ± √(F²+G²))²`. The smaller value is
/// recovered as `|det| / γ_1`, which keeps full relative accuracy for
/// ill-conditioned products.
#[inline]
fn sv2(m: &[f64]) -> (f64, f64) {
    let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
    if b == 0.0 && c == 0.0 {
        let (x, y) = (a.abs(), d.abs());
        return if x >= y { (x, y) } else { (y, x) };
    }
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let g1 = q + r;
    if g1 == 0.0 {
        return (0.0, 0.0);
    }
    let det = (a * d - b * c).abs();
    (g1, det / g1)
}

/// One-sided Jacobi: orthogonalize the columns, read off their norms.
fn jacobi_singular_values(m: &SquareMatrix) -> Vec<f64> {
    let d = m.dim;
    // column-major working copy
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| m.get(i, j)).collect()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn known_determinant_agrees_and_survives_cancellation() {
        let t = SquareMatrix::from_rows(&[[0.5, 0.2], [-0.1, 0.3]]);
        let t3 = SquareMatrix::from_rows(&[[0.5, 0.2, 0.0], [-0.1, 0.3, 0.1], [0.0, 0.2, 0.4]]);
        for m in [&t, &t3] {
            let ld = m.determinant().abs().ln();
            for s in [0.0, 0.4, 1.0, 1.7, 2.0, 2.5, 3.2] {
                assert_relative_eq!(log_svf_with_det(m, s, ld).unwrap(), log_svf(m, s).unwrap(), epsilon = 1e-12);
            }
        }
        // A rank-one-looking product of two invertible maps.
        let a = SquareMatrix::from_rows(&[[0.6, 0.6], [0.6, 0.6 + 1e-17]]);
        let ld = -40.0;
        let v = log_svf_with_det(&a, 1.5, ld).unwrap();
        assert_relative_eq!(v, 1.2f64.ln() + 0.5 * (ld - 1.2f64.ln()), epsilon = 1e-12);
        assert!(log_svf(&a, 1.5).is_err());
    }

    #[test]
    fn diagonal_and_identity() {
        let sv = singular_values(&SquareMatrix::diag(&[0.4, 0.2])).unwrap();
        assert_eq!(sv.values(), &[0.4, 0.2]);
        let sv = singular_values(&SquareMatrix::identity(2)).unwrap();
        assert_eq!(sv.values(), &[1.0, 1.0]);
    }

    #[test]
    fn closed_form_example_matrix() {
        // TᵀT = [[100,110],[110,122]], λ = (222 ± √48884)/2
        let t = SquareMatrix::from_rows(&[[0.0, -1.0], [10.0, 11.0]]);
        let sv = singular_values(&t).unwrap();
        let root = 48884f64.sqrt();
        let g1 = ((222.0 + root) / 2.0).sqrt();
        let g2 = ((222.0 - root) / 2.0).sqrt();
        assert_relative_eq!(sv.values()[0], g1, max_relative = 1e-13);
        assert_relative_eq!(sv.values()[1], g2, max_relative = 1e-10);
        assert_relative_eq!(sv.values()[0], 14.8846, epsilon = 1e-4);
        assert_relative_eq!(sv.values()[1], 0.671839, epsilon = 1e-6);
        assert_relative_eq!(sv.values()[0] * sv.values()[1], 10.0, max_relative = 1e-12);
    }

    #[test]
    fn singular_matrix_rejected() {
        let t = SquareMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(singular_values(&t), Err(Error::SingularMatrix { .. })));
        let t3 = SquareMatrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(singular_values(&t3), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn svf_examples() {
        let m = SquareMatrix::diag(&[0.4, 0.2]);
        assert_relative_eq!(svf(&m, 0.5).unwrap(), 0.4f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(svf(&m, 0.5).unwrap(), 0.632456, epsilon = 1e-6);
        assert_relative_eq!(svf(&m, 1.5).unwrap(), 0.178885, epsilon = 1e-6);
        assert_relative_eq!(svf(&m, 3.0).unwrap(), 0.08f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(svf(&m, 3.0).unwrap(), 0.0226274, epsilon = 1e-7);
        assert_eq!(svf(&m, 0.0).unwrap(), 1.0);
        let t = SquareMatrix::from_rows(&[[0.0, -1.0], [10.0, 11.0]]).scaled(1.0 / 30.0);
        assert_eq!(svf(&t, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn negative_exponent() {
        let m = SquareMatrix::identity(2);
        assert_eq!(svf(&m, -0.1), Err(Error::NegativeExponent(-0.1)));
    }

    #[test]
    fn jacobi_matches_closed_form_in_2d_embedding() {
        // block-diagonal embedding of a 2×2 block plus a scalar
        let t = SquareMatrix::from_rows(&[
            [0.0, -1.0, 0.0],
            [10.0, 11.0, 0.0],
            [0.0, 0.0, 3.0],
        ]);
        let sv = singular_values(&t).unwrap();
        let two = singular_values(&SquareMatrix::from_rows(&[[0.0, -1.0], [10.0, 11.0]])).unwrap();
        assert_relative_eq!(sv.values()[0], two.values()[0], max_relative = 1e-12);
        assert_relative_eq!(sv.values()[1], 3.0, max_relative = 1e-12);
        assert_relative_eq!(sv.values()[2], two.values()[1], max_relative = 1e-10);
        assert_relative_eq!(sv.values().iter().product::<f64>(), t.determinant().abs(), max_relative = 1e-12);
    }

    #[test]
    fn continuity_at_integer_junctions() {
        let t = SquareMatrix::from_rows(&[[0.3, 0.1, 0.05], [-0.1, 0.2, 0.0], [0.02, 0.07, 0.15]]);
        let sv = singular_values(&t).unwrap();
        for j in 1..3 {
            let s = j as f64;
            // left branch: m = j-1, δ = 1; right branch: m = j, δ → 0
            let left: f64 = sv.values()[..j].iter().product();
            let right: f64 = sv.values()[..j].iter().product::<f64>() * sv.values()[j].powf(1e-300);
            assert_relative_eq!(sv.svf(s).unwrap(), left, max_relative = 1e-12);
            assert_relative_eq!(left, right, max_relative = 1e-12);
            assert_relative_eq!(sv.svf(s + 1e-13).unwrap(), left, max_relative = 1e-12);
        }
        // s = d junction with the determinant branch
        assert_relative_eq!(sv.svf(3.0).unwrap(), t.determinant().abs(), max_relative = 1e-12);
        assert_relative_eq!(sv.svf(3.0 - 1e-13).unwrap(), t.determinant().abs(), max_relative = 1e-11);
    }

    fn contraction(d: usize) -> impl Strategy<Value = SquareMatrix> {
        proptest::collection::vec(-1.0f64..1.0, d * d).prop_filter_map("invertible contraction", move |v| {
            let m = SquareMatrix::from_row_major(d, v).ok()?;
            let n = m.norm();
            if m.determinant().abs() < 1e-6 {
                return None;
            }
            Some(m.scaled(0.9 / n.max(1e-12)))
        })
    }

    proptest! {
        #[test]
        fn product_equals_abs_det(m in contraction(3)) {
            let sv = singular_values(&m).unwrap();
            let prod: f64 = sv.values().iter().product();
            prop_assert!((prod - m.determinant().abs()).abs() <= 1e-12 * m.determinant().abs().max(1e-300) * 10.0);
            prop_assert!(sv.values().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn submultiplicative(a in contraction(2), b in contraction(2), s in 0.0f64..3.0) {
            let lhs = svf(&(&a * &b), s).unwrap();
            let rhs = svf(&a, s).unwrap() * svf(&b, s).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-10));
        }

        #[test]
        fn submultiplicative_3d(a in contraction(3), b in contraction(3), s in 0.0f64..4.0) {
            let lhs = svf(&(&a * &b), s).unwrap();
            let rhs = svf(&a, s).unwrap() * svf(&b, s).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-9));
        }

        #[test]
        fn monotone_in_s_for_contractions(m in contraction(2), s in 0.0f64..3.0, ds in 0.0f64..1.0) {
            prop_assert!(svf(&m, s + ds).unwrap() <= svf(&m, s).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn smallest_is_inverse_norm(m in contraction(2)) {
            let sv = singular_values(&m).unwrap();
            let inv = singular_values(&m.inverse().unwrap()).unwrap();
            let d = sv.dim();
            for i in 0..d {
                let lhs = sv.values()[i];
                let rhs = 1.0 / inv.values()[d - 1 - i];
                prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs);
            }
            prop_assert!((sv.smallest() - 1.0 / m.inverse().unwrap().norm()).abs() <= 1e-9 * sv.smallest());
        }
    }
}
