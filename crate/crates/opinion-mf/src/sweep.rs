//! Concentration sweeps over a ladder of graph sizes.

use std::path::{Path, PathBuf};

use opinion_mf_core::montecarlo::{self, Estimator, Executor, Gap, McSettings};
use opinion_mf_core::rand_graph::RegimeRule;
use opinion_mf_core::rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::{self, RunMetadata};
use crate::rules::{self, AlphaRule, ModelKind, NormSpec, Target, X0Rule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub c: f64,
    pub a: f64,
}

fn default_samples() -> usize {
    2000
}

fn default_delta() -> f64 {
    1e-3
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_eps() -> f64 {
    1e-10
}

fn default_rows() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_seeds")]
    pub master_seeds: Vec<u64>,
    /// Series truncation tolerance for matrix-function targets.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Diagonal entries read per sampled graph by the exchangeable estimator.
    #[serde(default = "default_rows")]
    pub rows_per_sample: usize,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            exact: false,
            samples: default_samples(),
            delta: default_delta(),
            master_seeds: default_seeds(),
            eps: default_eps(),
            rows_per_sample: default_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub n_ladder: Vec<usize>,
    pub regime: Regime,
    pub alpha_rule: AlphaRule,
    pub x0_rule: X0Rule,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Seed for `alpha` and `x0`, drawn once per rung.
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    /// Parses a TOML document; relative `file:` and `output` paths are taken
    /// relative to `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        if let Some(base) = base {
            if let X0Rule::File(p) = &cfg.x0_rule {
                if p.is_relative() {
                    cfg.x0_rule = X0Rule::File(base.join(p));
                }
            }
            if let Some(p) = &cfg.output {
                if p.is_relative() {
                    cfg.output = Some(base.join(p));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn regime_rule(&self) -> Result<RegimeRule> {
        Ok(RegimeRule::new(self.regime.c, self.regime.a)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ladder.is_empty() {
            return Err(invalid("n_ladder must not be empty"));
        }
        if self.n_ladder[0] < 2 {
            return Err(invalid("n_ladder entries must be at least 2"));
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_ladder must be strictly increasing"));
        }
        self.regime_rule()?;
        let est = &self.estimator;
        if !est.exact {
            if est.master_seeds.is_empty() {
                return Err(invalid("estimator.master_seeds must not be empty"));
            }
            McSettings::new(est.samples, est.delta, 0)?;
        }
        if !(est.eps > 0.0) {
            return Err(invalid("estimator.eps must be positive"));
        }
        if est.rows_per_sample == 0 {
            return Err(invalid("estimator.rows_per_sample must be positive"));
        }
        if let NormSpec::Rho(_) = self.norm {
            if !self.model.is_directed() {
                return Err(invalid(
                    "rho norms are only supported on directed models: whether the stable-opinion gap \
                     vanishes in rho norms on undirected graphs is an open question",
                ));
            }
            if self.target != Target::Stable {
                return Err(invalid("rho norms apply to the stable target only"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub n: usize,
    pub p: f64,
    pub norm: String,
    pub rho: Option<f64>,
    pub samples: usize,
    pub master_seed: u64,
    pub gap: f64,
    pub ci: f64,
    pub wall_ms: f64,
}

/// Gap of one `(n, master_seed)` cell.
pub fn sweep_cell<E: Executor>(cfg: &SweepConfig, exec: &E, n: usize, master_seed: Option<u64>) -> Result<SweepRow> {
    let p = cfg.regime_rule()?.p(n)?;
    let model = cfg.model.model(n, p)?;
    let data = rules::draw_config(n, cfg.alpha_rule, &cfg.x0_rule, rng::mix(cfg.data_seed, n as u64))?;
    let est = &cfg.estimator;
    let estimator = match master_seed {
        None => Estimator::Exact,
        Some(seed) => Estimator::MonteCarlo(McSettings::new(est.samples, est.delta, seed)?),
    };
    let gap: Gap = match (cfg.target.series(), &estimator, cfg.alpha_rule) {
        (None, Estimator::MonteCarlo(mc), AlphaRule::Const(a)) => montecarlo::gap_stable_exchangeable(
            exec,
            &model,
            a,
            data.x0(),
            cfg.norm.vector_norm()?,
            est.eps,
            mc,
            est.rows_per_sample,
        )?,
        (None, _, _) => montecarlo::gap_stable(exec, &model, &data, cfg.norm.vector_norm()?, &estimator)?,
        (Some(series), Estimator::MonteCarlo(mc), AlphaRule::Const(a)) => {
            montecarlo::gap_phi_exchangeable(exec, &model, a, &series, est.eps, mc, est.rows_per_sample)?
        }
        (Some(_), _, _) => match cfg.target {
            Target::Power(k) => montecarlo::gap_power(exec, &model, &data, k, &estimator)?,
            _ => {
                let series = cfg.target.series().expect("matrix target");
                montecarlo::gap_phi(exec, &model, &data, &series, est.eps, &estimator)?
            }
        },
    };
    Ok(SweepRow {
        model: cfg.model,
        n,
        p,
        norm: match cfg.norm {
            NormSpec::Inf => "inf".into(),
            NormSpec::Rho(_) => "rho".into(),
        },
        rho: cfg.norm.rho(),
        samples: if master_seed.is_some() { est.samples } else { 0 },
        master_seed: master_seed.unwrap_or(0),
        gap: gap.value,
        ci: gap.ci,
        wall_ms: gap.wall_ms,
    })
}

/// One row per `(n, master_seed)`, or one row per rung for the exact
/// estimator.
///
/// Monte Carlo rungs with a constant `alpha` rule use the exchangeable
/// estimators, which only sample diagonal entries of the random resolvent
/// (or matrix function); other rules sample full stable opinions or matrices.
pub fn run_sweep<E: Executor>(cfg: &SweepConfig, exec: &E) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_ladder {
        if cfg.estimator.exact {
            rows.push(sweep_cell(cfg, exec, n, None)?);
        } else {
            for &seed in &cfg.estimator.master_seeds {
                rows.push(sweep_cell(cfg, exec, n, Some(seed))?);
            }
        }
    }
    Ok(rows)
}

/// Writes the rows as CSV and a `<output>.meta.json` sidecar with the run
/// metadata and the config.
pub fn write_outputs(cfg: &SweepConfig, rows: &[SweepRow], path: &Path, threads: usize) -> Result<()> {
    let file = std::fs::File::create(path)?;
    io::write_csv(rows, std::io::BufWriter::new(file))?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    let doc = serde_json::json!({ "metadata": RunMetadata::new(threads), "config": cfg });
    std::fs::write(PathBuf::from(meta_path), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    pub medians: Vec<(usize, f64)>,
    pub strictly_decreasing: bool,
    pub endpoint_ratio: f64,
}

impl TrendSummary {
    /// Strict decrease of the medians and at least a halving between the
    /// first and last rung.
    pub fn passes(&self) -> bool {
        self.medians.len() >= 2 && self.strictly_decreasing && self.endpoint_ratio <= 0.5
    }
}

/// Median gap per `n` (in ladder order) across master seeds.
pub fn trend_summary(rows: &[SweepRow]) -> TrendSummary {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    let medians: Vec<(usize, f64)> = ns
        .iter()
        .map(|&n| {
            let mut g: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.gap).collect();
            (n, median(&mut g).unwrap_or(f64::NAN))
        })
        .collect();
    let strictly_decreasing = medians.windows(2).all(|w| w[1].1 < w[0].1);
    let endpoint_ratio = match (medians.first(), medians.last()) {
        (Some(a), Some(b)) if a.1 > 0.0 => b.1 / a.1,
        _ => f64::NAN,
    };
    TrendSummary { medians, strictly_decreasing, endpoint_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use opinion_mf_core::montecarlo::Sequential;

    fn canonical(x0: X0Rule) -> SweepConfig {
        SweepConfig {
            model: ModelKind::Und,
            n_ladder: vec![2],
            regime: Regime { c: 1.0, a: 0.0 },
            alpha_rule: AlphaRule::Const(0.5),
            x0_rule: x0,
            norm: NormSpec::Inf,
            target: Target::Stable,
            estimator: EstimatorSpec { exact: true, ..Default::default() },
            data_seed: 0,
            output: None,
        }
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn ones_give_zero_gaps() {
        let mut cfg = canonical(X0Rule::Ones);
        cfg.n_ladder = vec![2, 3, 4];
        let rows = run_sweep(&cfg, &Sequential).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.gap.abs() < 1e-12));
    }

    #[test]
    fn validation() {
        let mut cfg = canonical(X0Rule::Uniform);
        cfg.n_ladder = vec![4, 4];
        assert!(cfg.validate().is_err());
        cfg.n_ladder = vec![4];
        cfg.norm = NormSpec::Rho(2.0);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("open question"), "{err}");
        cfg.model = ModelKind::Dir;
        assert!(cfg.validate().is_ok());
        cfg.target = Target::Exp;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_config() {
        let text = r#"
            model = "und"
            n_ladder = [2]
            regime = { c = 1.0, a = 0.0 }
            alpha_rule = "const:0.5"
            x0_rule = "file:two.csv"
            estimator = { exact = true }
            output = "out.csv"
        "#;
        let cfg = SweepConfig::from_toml(text, Some(Path::new("/data"))).unwrap();
        assert_eq!(cfg.x0_rule, X0Rule::File(PathBuf::from("/data/two.csv")));
        assert_eq!(cfg.output, Some(PathBuf::from("/data/out.csv")));
        assert_eq!(cfg.estimator.samples, 2000);
        assert!(SweepConfig::from_toml(&format!("{text}\nbogus = 1"), None).is_err());
    }

    #[test]
    fn trend() {
        let row = |n, gap| SweepRow {
            model: ModelKind::Und,
            n,
            p: 0.5,
            norm: "inf".into(),
            rho: None,
            samples: 1,
            master_seed: 0,
            gap,
            ci: 0.0,
            wall_ms: 0.0,
        };
        let rows = [row(4, 1.0), row(4, 3.0), row(4, 2.0), row(8, 0.5), row(8, 0.9), row(8, 0.1)];
        let t = trend_summary(&rows);
        assert_eq!(t.medians, vec![(4, 2.0), (8, 0.5)]);
        assert!(t.passes());
        let flat = trend_summary(&[row(4, 0.0), row(8, 0.0)]);
        assert!(!flat.passes());
    }
}
