//! Choosing a parameter from a finite set when the objective depends on the
//! random stable opinion.
//!
//! Three problems are compared for `f(x, theta) = <a(theta), x> + b(theta)`:
//! the expected objective `min E f(x(G, inf), theta)`, the mean value problem
//! `min f(E x(G, inf), theta)`, and its mean-field surrogate
//! `min f(x_bar, theta)`. Ties within [`TIE_TOLERANCE`] go to the smallest id.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{self, OpinionConfig};
use crate::matfun;
use crate::montecarlo::{self, Estimator, Executor, StableMethod};
use crate::rand_graph::{self, ErModel};
use crate::{Error, Result};

pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineObjective {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffineObjective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b
    }

    /// Lipschitz constant in the first argument with respect to `l_inf`.
    pub fn lipschitz(&self) -> f64 {
        self.a.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptDemoSpec {
    /// `theta` ids are the indices into this list.
    pub objectives: Vec<AffineObjective>,
    /// Lipschitz constant used for the certificates.
    pub lipschitz: Option<f64>,
}

impl OptDemoSpec {
    pub fn new(objectives: Vec<AffineObjective>, lipschitz: Option<f64>) -> Result<Self> {
        if objectives.len() < 2 {
            return Err(Error::InvalidConfig("need at least two parameters"));
        }
        if let Some(l) = lipschitz {
            if !(l >= 0.0) {
                return Err(Error::InvalidConfig("the Lipschitz constant must be nonnegative"));
            }
        }
        let n = objectives[0].a.len();
        if objectives.iter().any(|o| o.a.len() != n) {
            return Err(Error::InvalidConfig("all coefficient vectors must have the same length"));
        }
        Ok(Self { objectives, lipschitz })
    }

    /// Largest `||a(theta)||_1`, a valid Lipschitz constant for every member.
    pub fn lipschitz_bound(&self) -> f64 {
        self.objectives.iter().map(AffineObjective::lipschitz).fold(0.0, f64::max)
    }
}

/// Smallest value, ties broken towards the smallest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] - TIE_TOLERANCE {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptDemoReport {
    /// Argmin of `E f(x(G, inf), theta)`.
    pub theta_expected: usize,
    /// Argmin of `f(E x(G, inf), theta)`.
    pub theta_mean_value: usize,
    /// Argmin of `f(x_bar, theta)`.
    pub theta_meanfield: usize,
    pub expected_values: Vec<f64>,
    pub mean_values: Vec<f64>,
    pub meanfield_values: Vec<f64>,
    /// The first two argmins agree.
    pub coincide: bool,
    /// `f(E x, theta_meanfield) - f(E x, theta_mean_value) >= 0`.
    pub suboptimality: f64,
    /// `|min f(E x, .) - min f(x_bar, .)|`.
    pub value_difference: f64,
    /// `||E x(G, inf) - x_bar||_inf`.
    pub gap: f64,
    pub lipschitz: Option<f64>,
    /// `value_difference <= L gap`.
    pub value_certified: Option<bool>,
    /// `suboptimality <= 2 L gap`.
    pub suboptimality_certified: Option<bool>,
    /// `suboptimality <= L gap`; informative only, it can fail for valid `L`.
    pub suboptimality_within_single: Option<bool>,
}

/// Solves the three problems exactly (enumeration) or from one Monte Carlo
/// run shared by the first two.
pub fn opt_demo_affine<E: Executor>(
    exec: &E,
    model: &ErModel,
    cfg: &OpinionConfig,
    spec: &OptDemoSpec,
    estimator: &Estimator,
) -> Result<OptDemoReport> {
    let n = model.n();
    cfg.check_dim(n)?;
    if spec.objectives[0].a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: spec.objectives[0].a.len() });
    }
    let m = spec.objectives.len();
    let (mean, expected_values) = match estimator {
        Estimator::Exact => {
            let mut mean = vec![0.0; n];
            let mut values = vec![0.0; m];
            for (g, w) in rand_graph::enumerate_weighted(model)? {
                let h = dynamics::build_influence(&g, cfg)?;
                let x = dynamics::stable_solve(&h, cfg)?;
                mean.iter_mut().zip(x.iter()).for_each(|(a, v)| *a += w * v);
                for (v, o) in values.iter_mut().zip(&spec.objectives) {
                    *v += w * o.eval(x.as_slice());
                }
            }
            (mean, values)
        }
        Estimator::MonteCarlo(mc) => {
            let sum = montecarlo::mc_vector_sum(exec, n + m, mc, |s, acc| {
                let g = montecarlo::sample_graph(model, mc, s);
                let x = montecarlo::stable_of(&g, cfg, StableMethod::Auto)?;
                acc[..n].iter_mut().zip(&x).for_each(|(a, v)| *a += v);
                for (v, o) in acc[n..].iter_mut().zip(&spec.objectives) {
                    *v += o.eval(&x);
                }
                Ok(())
            })?;
            let inv = 1.0 / mc.samples as f64;
            let scaled: Vec<f64> = sum.iter().map(|v| v * inv).collect();
            (scaled[..n].to_vec(), scaled[n..].to_vec())
        }
    };
    let xbar = montecarlo::meanfield_solution(model, cfg)?;
    let mean_values: Vec<f64> = spec.objectives.iter().map(|o| o.eval(&mean)).collect();
    let meanfield_values: Vec<f64> = spec.objectives.iter().map(|o| o.eval(xbar.as_slice())).collect();
    let theta_expected = argmin(&expected_values);
    let theta_mean_value = argmin(&mean_values);
    let theta_meanfield = argmin(&meanfield_values);
    let diff: Vec<f64> = mean.iter().zip(xbar.iter()).map(|(a, b)| a - b).collect();
    let gap = matfun::vec_norm_inf(&diff);
    let suboptimality = mean_values[theta_meanfield] - mean_values[theta_mean_value];
    let value_difference = (mean_values[theta_mean_value] - meanfield_values[theta_meanfield]).abs();
    let slack = |v: f64| v + TIE_TOLERANCE;
    let lipschitz = spec.lipschitz;
    Ok(OptDemoReport {
        theta_expected,
        theta_mean_value,
        theta_meanfield,
        coincide: theta_expected == theta_mean_value,
        suboptimality,
        value_difference,
        gap,
        lipschitz,
        value_certified: lipschitz.map(|l| value_difference <= slack(l * gap)),
        suboptimality_certified: lipschitz.map(|l| suboptimality <= slack(2.0 * l * gap)),
        suboptimality_within_single: lipschitz.map(|l| suboptimality <= slack(l * gap)),
        expected_values,
        mean_values,
        meanfield_values,
    })
}
