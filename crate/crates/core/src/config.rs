//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Recognized keys:
//!
//! | block      | keys |
//! |------------|------|
//! | grid       | `nx`, `ny`, `Lx`, `Ly` |
//! | parameters | `lambda1`, `lambda2`, `gamma`, or the two-atom form `lambda`, `tau`, `gamma` |
//! | solver     | `newton_tol`, `switch_tol`, `path_nodes`, `path_step`, `max_path_step`, `max_sweeps`, `max_newton`, `eps_start`, `eps_ratio`, `eps_min`, `r0` |
//! | analysis   | `ball_radius`, `threshold` |
//! | sweep      | `end_lambda1`, `end_lambda2`, `end_gamma`, `steps`, `sweep_mode`, `workers` |
//! | bubble scan| `scan_eps_start`, `scan_eps_ratio`, `scan_count` |
//! | output     | `output_dir` |
//!
//! Values are kept as the original text so that output headers echo exactly
//! what was supplied.

use std::collections::BTreeMap;

use crate::blowup::AnalysisConfig;
use crate::bubbles::DownhillConfig;
use crate::error::{Error, Result};
use crate::minimax::SolverConfig;
use crate::model::{atoms_to_pair, Parameters, TwoAtomMeasure};
use crate::torus::{Grid, TorusGrid};

const KNOWN_KEYS: &[&str] = &[
    "nx",
    "ny",
    "Lx",
    "Ly",
    "lambda1",
    "lambda2",
    "gamma",
    "lambda",
    "tau",
    "newton_tol",
    "switch_tol",
    "path_nodes",
    "path_step",
    "max_path_step",
    "max_sweeps",
    "max_newton",
    "eps_start",
    "eps_ratio",
    "eps_min",
    "r0",
    "ball_radius",
    "threshold",
    "end_lambda1",
    "end_lambda2",
    "end_gamma",
    "steps",
    "sweep_mode",
    "workers",
    "scan_eps_start",
    "scan_eps_ratio",
    "scan_count",
    "output_dir",
];

const DEFAULTS: &[(&str, &str)] = &[("nx", "128"), ("ny", "128"), ("Lx", "1"), ("Ly", "1")];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Sets (or overrides) one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        if value.is_empty() {
            return Err(Error::Config(format!("empty value for {key}")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .or_else(|| DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse {key} = {s:?}"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse_as(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse_as(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.parse_as(key)?
            .ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// Effective configuration, defaults included, as sorted `key=value`
    /// lines for output headers.
    pub fn echo(&self) -> Vec<String> {
        let mut all = self.entries.clone();
        for (k, v) in DEFAULTS {
            all.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
        all.into_iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        TorusGrid::new(
            self.usize_or("nx", 128)?,
            self.usize_or("ny", 128)?,
            self.f64_or("Lx", 1.0)?,
            self.f64_or("Ly", 1.0)?,
        )
    }

    pub fn gamma(&self) -> Result<f64> {
        self.require_f64("gamma")
    }

    /// Physical parameters from exactly one of the pair block
    /// (`lambda1`, `lambda2`) or the two-atom block (`lambda`, `tau`).
    pub fn parameters(&self, volume: f64) -> Result<Parameters> {
        let pair = self.has("lambda1") || self.has("lambda2");
        let atoms = self.has("lambda") || self.has("tau");
        match (pair, atoms) {
            (true, true) => Err(Error::Config(
                "give either lambda1/lambda2 or lambda/tau, not both".into(),
            )),
            (false, false) => Err(Error::Config("missing parameter block".into())),
            (true, false) => Parameters::new(
                self.require_f64("lambda1")?,
                self.require_f64("lambda2")?,
                self.gamma()?,
                volume,
            ),
            (false, true) => {
                let m = TwoAtomMeasure::new(
                    self.require_f64("lambda")?,
                    self.require_f64("tau")?,
                    self.gamma()?,
                )?;
                atoms_to_pair(&m, volume)
            }
        }
    }

    /// End point of a sweep; unspecified components keep their start value.
    pub fn end_parameters(&self, start: &Parameters, volume: f64) -> Result<Parameters> {
        Parameters::new(
            self.f64_or("end_lambda1", start.lambda1())?,
            self.f64_or("end_lambda2", start.lambda2())?,
            self.f64_or("end_gamma", start.gamma())?,
            volume,
        )
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let dh = DownhillConfig::default();
        let cfg = SolverConfig {
            path_nodes: self.usize_or("path_nodes", d.path_nodes)?,
            path_step: self.f64_or("path_step", d.path_step)?,
            max_path_step: self.f64_or("max_path_step", d.max_path_step)?,
            switch_tol: self.f64_or("switch_tol", d.switch_tol)?,
            newton_tol: self.f64_or("newton_tol", d.newton_tol)?,
            max_sweeps: self.usize_or("max_sweeps", d.max_sweeps)?,
            max_newton: self.usize_or("max_newton", d.max_newton)?,
            gmres: d.gmres,
            downhill: DownhillConfig {
                eps_start: self.f64_or("eps_start", dh.eps_start)?,
                eps_ratio: self.f64_or("eps_ratio", dh.eps_ratio)?,
                eps_min: self.f64_or("eps_min", dh.eps_min)?,
                r0: self.f64_or("r0", dh.r0)?,
                center: None,
            },
        };
        cfg.validate()?;
        for (k, v) in [
            ("eps_start", cfg.downhill.eps_start),
            ("eps_min", cfg.downhill.eps_min),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{k} must be > 0, got {v}")));
            }
        }
        Ok(cfg)
    }

    pub fn analysis(&self) -> Result<AnalysisConfig> {
        let d = AnalysisConfig::default();
        let cfg = AnalysisConfig {
            ball_radius: self.f64_or("ball_radius", d.ball_radius)?,
            threshold: self.f64_or("threshold", d.threshold)?,
            bound_tol: d.bound_tol,
        };
        if !(cfg.ball_radius > 0.0 && cfg.threshold > 0.0) {
            return Err(Error::Config(
                "ball_radius and threshold must be > 0".into(),
            ));
        }
        Ok(cfg)
    }
}
