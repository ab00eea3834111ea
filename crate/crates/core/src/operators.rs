//! Hermite-domain differentiation operator and its shifted/scaled variant.
//!
//! Coefficient rows multiply the operators from the right: if `f` holds the
//! coefficients of a signal, `f · D` holds the coefficients of its derivative.
//! The truncated operator drops the coupling of order `n_max` to `n_max + 1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::error::{Error, Result};

/// Largest 1-norm condition number accepted for `D'` before integrating.
pub const MAX_OPERATOR_CONDITION: f64 = 1e12;

/// Truncated derivative operator `D` (skew-symmetric, tridiagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOperator {
    matrix: DMatrix<f64>,
}

impl DerivativeOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_c(&self) -> usize {
        self.matrix.nrows()
    }

    /// Superdiagonal entry `(n, n+1) = -sqrt((n+1)/2)`.
    fn super_entry(n: usize) -> f64 {
        -Float::sqrt((n as f64 + 1.0) / 2.0)
    }
}

pub fn derivative_operator(n_c: usize) -> Result<DerivativeOperator> {
    if n_c == 0 {
        return Err(Error::InvalidParameter("n_c must be at least 1".into()));
    }
    let mut matrix = DMatrix::zeros(n_c, n_c);
    for n in 0..n_c - 1 {
        let v = DerivativeOperator::super_entry(n);
        matrix[(n, n + 1)] = v;
        matrix[(n + 1, n)] = -v;
    }
    Ok(DerivativeOperator { matrix })
}

/// `D' = (D / alpha + beta I) / gamma`, stored densely and as three bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedOperator {
    matrix: DMatrix<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn modified_operator(
    d: &DerivativeOperator,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<ModifiedOperator> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    let n_c = d.n_c();
    let mut matrix = (&d.matrix / alpha) / gamma;
    for i in 0..n_c {
        matrix[(i, i)] = beta / gamma;
    }
    let sub = (0..n_c - 1).map(|i| matrix[(i + 1, i)]).collect();
    let sup = (0..n_c - 1).map(|i| matrix[(i, i + 1)]).collect();
    Ok(ModifiedOperator {
        matrix,
        sub,
        diag: vec![beta / gamma; n_c],
        sup,
        alpha,
        beta,
        gamma,
    })
}

impl ModifiedOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_c(&self) -> usize {
        self.diag.len()
    }

    /// `x · D'` using the band structure.
    pub fn apply_right(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_c();
        assert_eq!(x.ncols(), n, "apply_right: column mismatch");
        let mut out = DMatrix::zeros(x.nrows(), n);
        for j in 0..n {
            let mut col = x.column(j) * self.diag[j];
            if j > 0 {
                col += x.column(j - 1) * self.sup[j - 1];
            }
            if j + 1 < n {
                col += x.column(j + 1) * self.sub[j];
            }
            out.set_column(j, &col);
        }
        out
    }

    /// Factorizes `D'` once for repeated integration.
    pub fn factorize(&self) -> Result<OperatorFactorization> {
        let lu = TridiagonalLu::factor(&self.sub, &self.diag, &self.sup);
        let lu_t = TridiagonalLu::factor(&self.sup, &self.diag, &self.sub);
        let (lu, lu_t) = match (lu, lu_t) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::IllConditioned {
                    condition: f64::INFINITY,
                })
            }
        };
        let n = self.n_c();
        let norm1 = (0..n)
            .map(|j| {
                let mut s = Float::abs(self.diag[j]);
                if j > 0 {
                    s += Float::abs(self.sup[j - 1]);
                }
                if j + 1 < n {
                    s += Float::abs(self.sub[j]);
                }
                s
            })
            .fold(0.0, f64::max);
        let mut inv_norm1: f64 = 0.0;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            lu.solve_in_place(&mut e);
            inv_norm1 = inv_norm1.max(e.iter().map(|v| Float::abs(*v)).sum());
        }
        let condition = norm1 * inv_norm1;
        if !condition.is_finite() || condition > MAX_OPERATOR_CONDITION {
            return Err(Error::IllConditioned { condition });
        }
        Ok(OperatorFactorization {
            lu,
            lu_t,
            condition,
        })
    }
}

/// LU factors of `D'` and `D'^T` with the 1-norm condition number of `D'`.
#[derive(Debug, Clone)]
pub struct OperatorFactorization {
    lu: TridiagonalLu,
    lu_t: TridiagonalLu,
    condition: f64,
}

impl OperatorFactorization {
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `x · D'^{-1}`, i.e. one application of the integral-like operator to
    /// each coefficient row.
    pub fn integrate_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        let mut row = vec![0.0; x.ncols()];
        for r in 0..x.nrows() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = x[(r, c)];
            }
            self.lu_t.solve_in_place(&mut row);
            for (c, v) in row.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
        out
    }

    /// `D'^{-k}` as a dense matrix, reusing the single factorization.
    pub fn inverse_power(&self, k: usize) -> DMatrix<f64> {
        let n = self.lu.n;
        let mut m = DMatrix::<f64>::identity(n, n);
        for _ in 0..k {
            for mut col in m.column_iter_mut() {
                self.lu.solve_in_place(col.as_mut_slice());
            }
        }
        m
    }
}

/// `D'^k` (identity for `k = 0`).
pub fn operator_power(m: &ModifiedOperator, k: usize) -> DMatrix<f64> {
    let n = m.n_c();
    let mut out = DMatrix::identity(n, n);
    for _ in 0..k {
        out = m.apply_right(&out);
    }
    out
}

/// `D'^{-k}` together with the condition number of `D'`.
#[derive(Debug, Clone)]
pub struct InversePower {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
}

pub fn operator_inverse_power(m: &ModifiedOperator, k: usize) -> Result<InversePower> {
    if k == 0 {
        return Err(Error::InvalidParameter("inverse power must be >= 1".into()));
    }
    let f = m.factorize()?;
    Ok(InversePower {
        matrix: f.inverse_power(k),
        condition: f.condition(),
    })
}

/// `(A + beta I) / gamma`, the map taking the continuous-time predictor
/// matrix to the one driven by `D'`.
pub fn predictor_map(a: &DMatrix<f64>, beta: f64, gamma: f64) -> DMatrix<f64> {
    let n = a.nrows();
    (a + DMatrix::<f64>::identity(n, n) * beta) / gamma
}

/// Tridiagonal LU with partial pivoting; the factors carry a second
/// superdiagonal introduced by row interchanges.
#[derive(Debug, Clone)]
struct TridiagonalLu {
    n: usize,
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Returns `None` if an exactly zero pivot appears.
    fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if Float::abs(d[i]) >= Float::abs(dl[i]) {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d.iter().any(|v| *v == 0.0) {
            return None;
        }
        Some(Self {
            n,
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
