//! Experiment configuration: a flat key = value text format, validated
//! against the admissible exponent ranges. Command-line flags override file
//! values by calling `set` again.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::measure::{p_range, BesselParam};
use crate::quad::QuadratureSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lambdas: Vec<f64>,
    pub ps: Vec<f64>,
    pub epsilon: f64,
    /// Battery RNG seed; a fixed seed reproduces batteries byte for byte.
    pub seed: u64,
    /// Cells per support interval when sampling smooth functions.
    pub resolution: usize,
    pub quadrature: QuadratureSpec,
    pub output_dir: PathBuf,
    /// Worker threads for batteries; 0 means all available cores.
    pub threads: usize,
    pub k_max: usize,
    pub floor_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 1.0, 2.0],
            ps: vec![0.85, 0.95, 1.0],
            epsilon: 1.0 / 16.0,
            seed: 42,
            resolution: 1 << 10,
            quadrature: QuadratureSpec::default(),
            output_dir: PathBuf::from("out"),
            threads: 0,
            k_max: 3,
            floor_tol: 1e-9,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::ConfigInvalid(format!("bad value {value:?} for key {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| parse_num(key, t))
        .collect::<Result<Vec<f64>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::ConfigInvalid(format!("empty list for {key}")))
            } else {
                Ok(v)
            }
        })
}

impl ExperimentConfig {
    /// Applies one key = value assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda_list" => self.lambdas = parse_list(key, value)?,
            "p_list" => self.ps = parse_list(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "resolution" => self.resolution = parse_num(key, value)?,
            "rel_tol" => self.quadrature.rel_tol = parse_num(key, value)?,
            "max_subdivisions" => self.quadrature.max_subdivisions = parse_num(key, value)?,
            "nodes_per_panel" => self.quadrature.nodes_per_panel = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "threads" => self.threads = parse_num(key, value)?,
            "k_max" => self.k_max = parse_num(key, value)?,
            "floor_tol" => self.floor_tol = parse_num(key, value)?,
            other => {
                return Err(Error::ConfigInvalid(format!("unknown key {other:?}")));
            }
        }
        Ok(())
    }

    /// Parses the flat key = value format; '#' starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::ConfigInvalid(format!("line {}: expected key = value", idx + 1))
            })?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for &l in &self.lambdas {
            let lam = BesselParam::new(l)
                .map_err(|e| Error::ConfigInvalid(format!("lambda_list: {e}")))?;
            let range = p_range(lam);
            for &p in &self.ps {
                if !range.contains(p) {
                    return Err(Error::ConfigInvalid(format!(
                        "p = {p} is not admissible for lambda = {l}: the range is {range}"
                    )));
                }
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.resolution == 0 || self.k_max == 0 {
            return Err(Error::ConfigInvalid(
                "resolution and k_max must be positive".into(),
            ));
        }
        self.quadrature
            .validate()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Pairs (lambda, p) in scan order.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas
            .iter()
            .flat_map(move |&l| self.ps.iter().map(move |&p| (l, p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let text = "\
# an experiment
lambda_list = 1.0, 2.0
p_list = 0.9,1
epsilon = 0.0625
seed = 7
resolution = 256
rel_tol = 1e-8
output_dir = results
threads = 2
";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.lambdas, vec![1.0, 2.0]);
        assert_eq!(cfg.ps, vec![0.9, 1.0]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.quadrature.rel_tol, 1e-8);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        // flags override file values
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pairs().count(), 4);
    }

    #[test]
    fn inadmissible_pair_rejected_with_range_in_message() {
        let err = ExperimentConfig::parse("lambda_list = 1\np_list = 0.5\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("(0.75, 1]"), "message was: {message}");
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::parse("frobnicate = 1\n").is_err());
        assert!(ExperimentConfig::parse("epsilon = pi\n").is_err());
        assert!(ExperimentConfig::parse("epsilon\n").is_err());
        assert!(ExperimentConfig::parse("epsilon = 2\n").is_err());
    }

    #[test]
    fn default_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }
}
