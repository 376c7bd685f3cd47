//! Small textual rules shared by the config file and the command line, such
//! as `const:0.5`, `file:x0.csv`, `rho:2` or `power:2`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use opinion_mf_core::dynamics::OpinionConfig;
use opinion_mf_core::matfun::{PowerSeriesSpec, VectorNorm};
use opinion_mf_core::rand_graph::ErModel;
use opinion_mf_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fn split_rule(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((head, tail)) => (head.trim(), Some(tail.trim())),
        None => (s.trim(), None),
    }
}

fn number(what: &str, v: Option<&str>) -> Result<f64> {
    v.and_then(|v| v.parse().ok()).ok_or_else(|| invalid(format!("{what} needs a numeric argument")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Und,
    Dir,
}

impl ModelKind {
    pub fn is_directed(self) -> bool {
        self == Self::Dir
    }

    pub fn model(self, n: usize, p: f64) -> Result<ErModel> {
        Ok(ErModel::new(n, p, self.is_directed())?)
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "und" | "undirected" => Ok(Self::Und),
            "dir" | "directed" => Ok(Self::Dir),
            other => Err(invalid(format!("unknown model {other:?}, expected und or dir"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_directed() { "dir" } else { "und" })
    }
}

/// `const:a` gives every agent `alpha_i = a`; `uniform:a` draws
/// `alpha_i ~ U[0, a]`. Either way the bound `alpha_bar` is `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Const(f64),
    Uniform(f64),
}

impl AlphaRule {
    pub fn alpha_bar(self) -> f64 {
        match self {
            Self::Const(a) | Self::Uniform(a) => a,
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = split_rule(s);
        let rule = match head {
            "const" => Self::Const(number("const", arg)?),
            "uniform" => Self::Uniform(number("uniform", arg)?),
            other => return Err(invalid(format!("unknown alpha rule {other:?}, expected const:a or uniform:a"))),
        };
        let a = rule.alpha_bar();
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid("alpha bound must lie in (0, 1)"));
        }
        Ok(rule)
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(a) => write!(f, "const:{a}"),
            Self::Uniform(a) => write!(f, "uniform:{a}"),
        }
    }
}

/// Initial opinions: `uniform` (i.i.d. `U[0, 1]`, also spelled `random`),
/// `ones`, `const:v`, or `file:path`.
#[derive(Debug, Clone, PartialEq)]
pub enum X0Rule {
    Uniform,
    Ones,
    Const(f64),
    File(PathBuf),
}

impl FromStr for X0Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = split_rule(s);
        match head {
            "uniform" | "random" => Ok(Self::Uniform),
            "ones" => Ok(Self::Ones),
            "const" => Ok(Self::Const(number("const", arg)?)),
            "file" => match arg {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(invalid("file: needs a path")),
            },
            other => Err(invalid(format!("unknown x0 rule {other:?}, expected uniform, ones, const:v or file:path"))),
        }
    }
}

impl fmt::Display for X0Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("uniform"),
            Self::Ones => f.write_str("ones"),
            Self::Const(v) => write!(f, "const:{v}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Draws `alpha` and then `x0` for an `n`-node instance from one seed.
pub fn draw_config(n: usize, alpha: AlphaRule, x0: &X0Rule, seed: u64) -> Result<OpinionConfig> {
    let mut rng = rng::rng_from_seed(seed);
    let a = alpha.alpha_bar();
    let alphas: Vec<f64> = match alpha {
        AlphaRule::Const(_) => vec![a; n],
        AlphaRule::Uniform(_) => (0..n).map(|_| a * rng.random::<f64>()).collect(),
    };
    let x: Vec<f64> = match x0 {
        X0Rule::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        X0Rule::Ones => vec![1.0; n],
        X0Rule::Const(v) => vec![*v; n],
        X0Rule::File(path) => {
            let v = io::read_vector(path)?;
            if v.len() != n {
                return Err(invalid(format!("{} holds {} values, expected {n}", path.display(), v.len())));
            }
            v
        }
    };
    Ok(OpinionConfig::new(alphas, a, x)?)
}

/// `inf` or `rho:r` (`rho=r` is accepted too).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NormSpec {
    #[default]
    Inf,
    Rho(f64),
}

impl NormSpec {
    pub fn vector_norm(self) -> Result<VectorNorm> {
        Ok(match self {
            Self::Inf => VectorNorm::Inf,
            Self::Rho(r) => VectorNorm::rho(r)?,
        })
    }

    pub fn rho(self) -> Option<f64> {
        match self {
            Self::Inf => None,
            Self::Rho(r) => Some(r),
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once('=') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => split_rule(s),
        };
        match head {
            "inf" => Ok(Self::Inf),
            "rho" => {
                let r = number("rho", arg)?;
                VectorNorm::rho(r)?;
                Ok(Self::Rho(r))
            }
            other => Err(invalid(format!("unknown norm {other:?}, expected inf or rho:r"))),
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Inf => f.write_str("inf"),
            Self::Rho(r) => write!(f, "rho:{r}"),
        }
    }
}

/// Quantity whose mean-field gap is measured: the stable opinion, `H^k`, or
/// a matrix function (`phi:exp` or `phi:resolvent`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    #[default]
    Stable,
    Power(usize),
    Exp,
    Resolvent,
}

impl Target {
    pub fn series(self) -> Option<PowerSeriesSpec> {
        match self {
            Self::Stable => None,
            Self::Power(k) => Some(PowerSeriesSpec::monomial(k)),
            Self::Exp => Some(PowerSeriesSpec::Exponential),
            Self::Resolvent => Some(PowerSeriesSpec::Resolvent),
        }
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = split_rule(s);
        match (head, arg) {
            ("stable", None) => Ok(Self::Stable),
            ("power", Some(k)) => {
                k.parse().map(Self::Power).map_err(|_| invalid("power:k needs a non-negative integer"))
            }
            ("phi", Some("exp")) => Ok(Self::Exp),
            ("phi", Some("resolvent")) => Ok(Self::Resolvent),
            _ => Err(invalid(format!("unknown target {s:?}, expected stable, power:k, phi:exp or phi:resolvent"))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Stable => f.write_str("stable"),
            Self::Power(k) => write!(f, "power:{k}"),
            Self::Exp => f.write_str("phi:exp"),
            Self::Resolvent => f.write_str("phi:resolvent"),
        }
    }
}

string_serde!(ModelKind);
string_serde!(AlphaRule);
string_serde!(X0Rule);
string_serde!(NormSpec);
string_serde!(Target);
