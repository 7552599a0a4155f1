//! Experiment configuration from flat `key = value` files.
//!
//! ```text
//! # comments start with '#'
//! schemes = gaussian, laplace
//! sizes = 40, 100x80        # "n" means m = n
//! estimators = sc_one_step, diff_means, parametric_mle
//! etas = 0, 0.0001, 0.001, 0.01
//! replications = 500
//! seed = 12345
//! ci_level = 0.95
//! output = results.csv
//! workers = 8
//! ```
//!
//! Keys left out keep their defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lcshift::Scheme;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    ScOneStep,
    DiffMeans,
    ParametricMle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::ScOneStep,
        EstimatorKind::DiffMeans,
        EstimatorKind::ParametricMle,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::ScOneStep => "sc_one_step",
            EstimatorKind::DiffMeans => "diff_means",
            EstimatorKind::ParametricMle => "parametric_mle",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown estimator `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    /// `(m, n)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub estimators: Vec<EstimatorKind>,
    /// Truncation levels for the shape-constrained estimator.
    pub etas: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub output: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schemes: Scheme::ALL.to_vec(),
            sizes: vec![(40, 40), (100, 100), (200, 200)],
            estimators: EstimatorKind::ALL.to_vec(),
            etas: vec![0.0, 1e-4, 1e-3, 1e-2],
            replications: 500,
            seed: 20_240_101,
            ci_level: 0.95,
            output: PathBuf::from("results.csv"),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn number<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| HarnessError::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn size(raw: &str) -> Result<(usize, usize)> {
    match raw.split_once(['x', 'X']) {
        Some((m, n)) => Ok((number("sizes", m.trim())?, number("sizes", n.trim())?)),
        None => {
            let n = number("sizes", raw)?;
            Ok((n, n))
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_unchecked(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "schemes" => {
                    cfg.schemes = list(value)
                        .map(|s| {
                            s.parse()
                                .map_err(|e: lcshift::Error| HarnessError::Config(e.to_string()))
                        })
                        .collect::<Result<_>>()?
                }
                "sizes" => cfg.sizes = list(value).map(size).collect::<Result<_>>()?,
                "estimators" => cfg.estimators = list(value).map(|s| s.parse()).collect::<Result<_>>()?,
                "etas" => cfg.etas = list(value).map(|s| number(key, s)).collect::<Result<_>>()?,
                "replications" => cfg.replications = number(key, value)?,
                "seed" => cfg.seed = number(key, value)?,
                "ci_level" => cfg.ci_level = number(key, value)?,
                "output" => cfg.output = PathBuf::from(value),
                "workers" => cfg.workers = number(key, value)?,
                other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, |_| {})
    }

    /// Loads `path`, applies `overrides`, then validates the result.
    pub fn load_with(path: &Path, overrides: impl FnOnce(&mut Self)) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse_unchecked(&text)?;
        overrides(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.schemes.is_empty() || self.sizes.is_empty() || self.estimators.is_empty() {
            return fail("schemes, sizes and estimators must be non-empty".into());
        }
        if self.replications < 2 {
            return fail(format!(
                "replications must be at least 2, got {}",
                self.replications
            ));
        }
        if let Some((m, n)) = self.sizes.iter().find(|(m, n)| *m < 2 || *n < 2) {
            return fail(format!("sample sizes must be at least 2, got {m}x{n}"));
        }
        if self.estimators.contains(&EstimatorKind::ScOneStep) && self.etas.is_empty() {
            return fail("sc_one_step needs at least one eta".into());
        }
        if let Some(eta) = self.etas.iter().find(|e| !(**e >= 0.0 && **e < 0.5)) {
            return fail(format!("eta {eta} outside [0, 0.5)"));
        }
        for (i, a) in self.etas.iter().enumerate() {
            if self.etas[..i].contains(a) {
                return fail(format!("eta {a} listed twice"));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return fail(format!("ci_level {} outside (0, 1)", self.ci_level));
        }
        if self.workers == 0 {
            return fail("workers must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let cfg = ExperimentConfig::parse(
            "# desk run\n\
             schemes = gaussian, gamma\n\
             sizes = 40, 100x80\n\
             estimators = diff_means\n\
             etas = 0, 0.01   # two levels\n\
             replications = 12\n\
             seed = 99\n\
             ci_level = 0.9\n\
             output = out/x.csv\n\
             workers = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.schemes, vec![Scheme::Gaussian, Scheme::Gamma]);
        assert_eq!(cfg.sizes, vec![(40, 40), (100, 80)]);
        assert_eq!(cfg.estimators, vec![EstimatorKind::DiffMeans]);
        assert_eq!(cfg.etas, vec![0.0, 0.01]);
        assert_eq!((cfg.replications, cfg.seed, cfg.workers), (12, 99, 3));
        assert_eq!(cfg.ci_level, 0.9);
        assert_eq!(cfg.output, PathBuf::from("out/x.csv"));
    }

    #[test]
    fn defaults_are_desk_scale() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.replications, 500);
        assert_eq!(cfg.sizes, vec![(40, 40), (100, 100), (200, 200)]);
        assert_eq!(cfg.schemes.len(), 4);
    }

    #[test]
    fn rejects_invalid_input() {
        for bad in [
            "replications = 1",
            "sizes = 1",
            "etas = 0.5",
            "etas = 0.01, 0.01",
            "schemes = cauchy",
            "estimators = median",
            "colour = blue",
            "seed = -1",
            "ci_level = 1",
            "workers = 0",
            "just words",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad), Err(HarnessError::Config(_))),
                "{bad}"
            );
        }
    }
}
