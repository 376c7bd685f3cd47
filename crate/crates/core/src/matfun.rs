//! Norms and analytic matrix functions `phi(X) = sum_k b_k X^k`.
//!
//! [`apply_series`] truncates the power series at the smallest order whose
//! certified tail `sum_{k > m} |b_k| r^k`, with `r = ||X||_*`, is at most
//! `eps / 2`. Since `||.||_*` is submultiplicative the truncation error is
//! bounded by the same quantity.

use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Max absolute row sum, the operator norm induced by `l_inf`.
pub fn norm_star(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    Ok(m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 1.0) || rho.is_infinite() {
        return Err(Error::InvalidNorm("rho must lie in (1, inf)"));
    }
    Ok(())
}

/// Entrywise `(sum_ij |m_ij|^rho)^(1/rho)`; not the induced operator norm.
pub fn mat_norm_rho(m: &Matrix, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(pnorm(m.iter().copied(), rho))
}

pub fn vec_norm_rho(v: &[f64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(pnorm(v.iter().copied(), rho))
}

pub fn vec_norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn pnorm(values: impl Iterator<Item = f64>, rho: f64) -> f64 {
    // Scale by the largest magnitude so large rho cannot overflow.
    let values: Vec<f64> = values.map(f64::abs).collect();
    let top = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| libm::pow(v / top, rho)).sum();
    top * libm::pow(s, 1.0 / rho)
}

/// Vector norm used for opinion gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorNorm {
    Inf,
    Rho(f64),
}

impl VectorNorm {
    pub fn rho(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self::Rho(rho))
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        match *self {
            Self::Inf => Ok(vec_norm_inf(v)),
            Self::Rho(r) => vec_norm_rho(v, r),
        }
    }

    /// Bound on `||e||` when every entry of `e` is bounded by `entry` in
    /// absolute value.
    pub fn from_entry_bound(&self, n: usize, entry: f64) -> f64 {
        match *self {
            Self::Inf => entry,
            Self::Rho(r) => entry * libm::pow(n as f64, 1.0 / r),
        }
    }
}

/// Power series coefficients `b_k`, a majorant `|b_k| <= bound(k)` and the
/// convergence radius.
#[derive(Debug, Clone)]
pub enum PowerSeriesSpec {
    /// `(I - X)^{-1}`: `b_k = 1`, radius 1.
    Resolvent,
    /// `exp(X)`: `b_k = 1 / k!`, infinite radius.
    Exponential,
    /// Finite polynomial `sum_k coeffs[k] X^k`, infinite radius.
    Polynomial(Vec<f64>),
    /// Arbitrary coefficients. `bound(k) r^k` must be positive with a
    /// non-increasing term ratio in `k` for every `r < radius`; the tail
    /// certificate relies on it.
    Custom { coeff: fn(usize) -> f64, bound: fn(usize) -> f64, radius: f64 },
}

impl PowerSeriesSpec {
    /// `X^k` alone.
    pub fn monomial(k: usize) -> Self {
        let mut c = alloc::vec![0.0; k + 1];
        c[k] = 1.0;
        Self::Polynomial(c)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        match self {
            Self::Resolvent => 1.0,
            Self::Exponential => 1.0 / factorial(k),
            Self::Polynomial(c) => c.get(k).copied().unwrap_or(0.0),
            Self::Custom { coeff, .. } => coeff(k),
        }
    }

    pub fn coeff_abs_bound(&self, k: usize) -> f64 {
        match self {
            Self::Custom { bound, .. } => bound(k),
            _ => self.coeff(k).abs(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Self::Resolvent => 1.0,
            Self::Exponential | Self::Polynomial(_) => f64::INFINITY,
            Self::Custom { radius, .. } => *radius,
        }
    }

    /// `sum_k |b_k| r^k`, an upper bound on `||phi(X)||_*` for `||X||_* <= r`.
    pub fn abs_sum(&self, r: f64) -> f64 {
        match self {
            Self::Resolvent => 1.0 / (1.0 - r),
            Self::Exponential => libm::exp(r),
            _ => {
                let m = truncation_order(self, r, 1e-12).unwrap_or(0);
                (0..=m).map(|k| self.coeff_abs_bound(k) * libm::pow(r, k as f64)).sum::<f64>() + 1e-12
            }
        }
    }

    /// Certified upper bound on `sum_{k > m} bound(k) r^k`.
    pub fn tail_bound(&self, m: usize, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        match self {
            Self::Resolvent => {
                if r >= 1.0 {
                    f64::INFINITY
                } else {
                    libm::pow(r, (m + 1) as f64) / (1.0 - r)
                }
            }
            Self::Exponential => {
                let ratio = r / (m + 2) as f64;
                if ratio >= 1.0 {
                    return f64::INFINITY;
                }
                term(self, m + 1, r) / (1.0 - ratio)
            }
            Self::Polynomial(c) => (m + 1..c.len()).map(|k| term(self, k, r)).sum(),
            Self::Custom { radius, .. } => {
                if r >= *radius {
                    return f64::INFINITY;
                }
                let first = term(self, m + 1, r);
                let ratio = term(self, m + 2, r) / first;
                if !(ratio < 1.0) {
                    return f64::INFINITY;
                }
                first / (1.0 - ratio)
            }
        }
    }
}

fn term(series: &PowerSeriesSpec, k: usize, r: f64) -> f64 {
    series.coeff_abs_bound(k) * libm::pow(r, k as f64)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

const MAX_ORDER: usize = 100_000;

/// Smallest `m` with certified tail `sum_{k > m} bound(k) r^k <= eps / 2`.
/// Polynomials are never cut: their order is the degree.
pub fn truncation_order(series: &PowerSeriesSpec, r: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive"));
    }
    if !(r >= 0.0) || r >= series.radius() {
        return Err(Error::OutsideRadius { norm: r, radius: series.radius() });
    }
    if let PowerSeriesSpec::Polynomial(c) = series {
        return Ok(c.iter().rposition(|b| *b != 0.0).unwrap_or(0));
    }
    (0..MAX_ORDER)
        .find(|&m| series.tail_bound(m, r) <= eps / 2.0)
        .ok_or(Error::InvalidArgument("series tail does not reach eps within the order limit"))
}

/// Horner evaluation of `phi(M)` truncated at
/// `truncation_order(series, ||M||_*, eps)`; within `eps` of `phi(M)` in
/// `||.||_*`.
pub fn apply_series(series: &PowerSeriesSpec, m: &Matrix, eps: f64) -> Result<Matrix> {
    let r = norm_star(m)?;
    let order = truncation_order(series, r, eps)?;
    Ok(horner(series, m, order))
}

pub(crate) fn horner(series: &PowerSeriesSpec, m: &Matrix, order: usize) -> Matrix {
    let n = m.nrows();
    let mut acc = Matrix::identity(n, n) * series.coeff(order);
    for k in (0..order).rev() {
        acc = &acc * m;
        let b = series.coeff(k);
        if b != 0.0 {
            for i in 0..n {
                acc[(i, i)] += b;
            }
        }
    }
    acc
}

/// `(I - M)^{-1}` by a dense solve; requires `||M||_* < 1`.
pub fn resolvent(m: &Matrix) -> Result<Matrix> {
    let r = norm_star(m)?;
    if r >= 1.0 {
        return Err(Error::OutsideRadius { norm: r, radius: 1.0 });
    }
    let n = m.nrows();
    let id = Matrix::identity(n, n);
    linalg::lu_solve_matrix(&id - m, &id)
}
