//! Resolved run settings: defaults, then a flat `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use henon_core::nehari::{auto_grading, InitKind, SolveConfig};
use henon_core::nodal::DEFAULT_BAND;
use henon_core::Grading;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradingChoice {
    /// Origin-refined with the core scale set from `(α, p)`.
    Auto,
    Uniform,
    Boundary,
    Origin { core_scale: f64 },
}

impl GradingChoice {
    pub fn parse(s: &str) -> Result<Self, UsageError> {
        match s {
            "auto" => Ok(GradingChoice::Auto),
            "uniform" => Ok(GradingChoice::Uniform),
            "boundary" => Ok(GradingChoice::Boundary),
            _ => {
                let core = s
                    .strip_prefix("origin:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| *v > 0.0 && v.is_finite())
                    .ok_or_else(|| UsageError(format!("bad grading '{s}' (auto|uniform|boundary|origin:<scale>)")))?;
                Ok(GradingChoice::Origin { core_scale: core })
            }
        }
    }

    pub fn resolve(&self, alpha: f64, p: f64) -> henon_core::Result<Grading> {
        match *self {
            GradingChoice::Auto => auto_grading(alpha, p),
            GradingChoice::Uniform => Ok(Grading::Uniform),
            GradingChoice::Boundary => Ok(Grading::BoundaryRefined),
            GradingChoice::Origin { core_scale } => Ok(Grading::OriginRefined { core_scale }),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<usize>,
    pub nr: usize,
    pub ntheta: usize,
    pub grading: GradingChoice,
    pub init: InitKind,
    pub cycle_init: bool,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub perturbation_amplitude: f64,
    pub band_epsilon: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let s = SolveConfig::default();
        Settings {
            alpha: vec![0.0],
            p: vec![30.0],
            n: vec![2],
            nr: 192,
            ntheta: 96,
            grading: GradingChoice::Auto,
            init: s.init_kind,
            cycle_init: true,
            seed: s.random_seed,
            restarts: 3,
            max_iterations: s.max_iterations,
            residual_tolerance: s.residual_tolerance,
            perturbation_amplitude: s.perturbation_amplitude,
            band_epsilon: DEFAULT_BAND,
        }
    }
}

impl Settings {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            init_kind: self.init,
            perturbation_amplitude: self.perturbation_amplitude,
            max_iterations: self.max_iterations,
            residual_tolerance: self.residual_tolerance,
            random_seed: self.seed,
            restarts: self.restarts,
            cycle_init_kinds: self.cycle_init,
            ..SolveConfig::default()
        }
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let bad = |what: &str| UsageError(format!("bad value '{value}' for {what}"));
        match key {
            "alpha" => self.alpha = parse_real_list(value)?,
            "p" => self.p = parse_real_list(value)?,
            "n" => self.n = parse_n_range(value)?,
            "nr" => self.nr = value.parse().map_err(|_| bad(key))?,
            "ntheta" => self.ntheta = value.parse().map_err(|_| bad(key))?,
            "grading" => self.grading = GradingChoice::parse(value)?,
            "init" => self.init = value.parse().map_err(|_| bad(key))?,
            "cycle_init" => self.cycle_init = value.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "restarts" => self.restarts = value.parse().map_err(|_| bad(key))?,
            "max_iterations" => self.max_iterations = value.parse().map_err(|_| bad(key))?,
            "residual_tolerance" => self.residual_tolerance = value.parse().map_err(|_| bad(key))?,
            "perturbation_amplitude" => self.perturbation_amplitude = value.parse().map_err(|_| bad(key))?,
            "band_epsilon" => self.band_epsilon = value.parse().map_err(|_| bad(key))?,
            _ => return Err(UsageError(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        for (key, value) in parse_config(&text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(UsageError("alpha must be finite and >= 0".into()));
        }
        if self.p.iter().any(|p| !(*p > 1.0 && p.is_finite())) {
            return Err(UsageError("p must be finite and > 1".into()));
        }
        if self.n.iter().any(|&n| n == 0) {
            return Err(UsageError("n must be >= 1".into()));
        }
        if self.alpha.is_empty() || self.p.is_empty() || self.n.is_empty() {
            return Err(UsageError("empty parameter list".into()));
        }
        if !(self.band_epsilon > 0.0 && self.band_epsilon < 0.05) {
            return Err(UsageError("band_epsilon must lie in (0, 0.05)".into()));
        }
        self.solve_config().validate().map_err(|e| UsageError(e.to_string()))
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key = value", k + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Comma list of reals, or `start:stop:step` (inclusive of `stop`).
pub fn parse_real_list(s: &str) -> Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("malformed list '{s}'"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(bad());
        }
        return Ok((0..count).map(|k| start + k as f64 * step).collect());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// `a..b` (inclusive), a comma list, or a single integer.
pub fn parse_n_range(s: &str) -> Result<Vec<usize>, UsageError> {
    let bad = || UsageError(format!("malformed n range '{s}'"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect()
}
