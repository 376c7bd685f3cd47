use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Solve `a * x = b` with partially pivoted LU.
pub(crate) fn lu_solve(a: Matrix, b: &Vector) -> Result<Vector> {
    let n = a.nrows();
    let lu = a.lu();
    // nalgebra only reports exact zero pivots; treat tiny ones as singular too.
    let u = lu.u();
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if (0..n).any(|i| u[(i, i)].abs() <= scale * 1e-14) {
        return Err(Error::Singular);
    }
    lu.solve(b).ok_or(Error::Singular)
}

pub(crate) fn lu_solve_matrix(a: Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let lu = a.lu();
    let u = lu.u();
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if (0..n).any(|i| u[(i, i)].abs() <= scale * 1e-14) {
        return Err(Error::Singular);
    }
    lu.solve(b).ok_or(Error::Singular)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
