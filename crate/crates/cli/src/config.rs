//! Flat `key = value` run configuration.
//!
//! `#` starts a comment. Unknown and repeated keys are errors so that a typo
//! in a physics parameter cannot silently fall back to its default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;
use wpcn_core::{gains_from_geometry, ChannelGains, Geometry, SchemeKind, SolverOptions, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },

    #[error("{origin}: key `{key}` given twice")]
    Duplicate { origin: String, key: String },

    #[error("{origin}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, text: String },

    #[error("{origin}: bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        origin: String,
        key: String,
        value: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(#[from] wpcn_core::Error),

    #[error("invalid configuration: `{key}` {reason}")]
    Constraint { key: &'static str, reason: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    D1,
    D2,
    Rb,
    P1,
    Nsamp,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::D1 => "d1",
            Self::D2 => "d2",
            Self::Rb => "rb",
            Self::P1 => "p1",
            Self::Nsamp => "nsamp",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "d1" => Self::D1,
            "d2" => Self::D2,
            "rb" => Self::Rb,
            "p1" => Self::P1,
            "nsamp" => Self::Nsamp,
            _ => return Err("expected one of d1, d2, rb, p1, nsamp".into()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: u32,
}

impl SweepSpec {
    /// Evenly spaced values from `start` to `stop`; a single step yields `start`.
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        let n = self.steps - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * f64::from(i) / f64::from(n)
                }
            })
            .collect()
    }
}

/// Tolerances used by `validate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidateSpec {
    /// Relative solver/grid agreement accepted regardless of the grid bound.
    pub oracle_rel_tol: f64,
    /// Multiplier on the reported grid bound.
    pub grid_bound_factor: f64,
    /// Seeded random instances checked in addition to the configured one.
    pub instances: u32,
    /// Largest accepted ratio between simulated and analytic BER.
    pub mc_factor: f64,
    /// Per-sample reflected-signal SNR at which the detector is simulated.
    pub mc_snr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub d1: f64,
    pub d2: f64,
    /// WD1-WD2 distance; collinear placement (`d1 - d2`) when absent.
    pub d12: Option<f64>,
    pub schemes: Vec<SchemeKind>,
    pub sweep: SweepSpec,
    pub solver: SolverOptions,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub delta: f64,
    pub bits: u64,
    pub n_list: Vec<u32>,
    pub validate: ValidateSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            d1: 9.0,
            d2: 3.0,
            d12: None,
            schemes: SchemeKind::ALL.to_vec(),
            sweep: SweepSpec {
                param: SweepParam::D1,
                start: 6.0,
                stop: 10.0,
                steps: 21,
            },
            solver: SolverOptions::default(),
            out: None,
            seed: 1,
            delta: 0.02,
            bits: 100_000,
            n_list: vec![10, 100, 1000],
            validate: ValidateSpec {
                oracle_rel_tol: 0.02,
                grid_bound_factor: 1.0,
                instances: 2,
                mc_factor: 3.0,
                mc_snr: 0.1,
            },
        }
    }
}

fn parse_num<T: FromStr>(origin: &str, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        origin: origin.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_list<T: FromStr>(origin: &str, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(origin, key, s))
        .collect()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "p1",
        "eta",
        "beta",
        "mu",
        "n0",
        "ns",
        "fc",
        "ga",
        "plexp",
        "rb",
        "nsamp",
        "t0",
        "d1",
        "d2",
        "d12",
        "schemes",
        "sweep_param",
        "sweep_start",
        "sweep_stop",
        "sweep_steps",
        "bisect_tol",
        "feas_tol",
        "barrier_mu0",
        "barrier_shrink",
        "newton_max_iter",
        "out",
        "seed",
        "delta",
        "bits",
        "n_list",
        "oracle_rel_tol",
        "grid_bound_factor",
        "validate_instances",
        "mc_factor",
        "mc_snr",
    ];

    /// Sets one key. `origin` labels errors (`line 4`, `--set`).
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        let f = |v: &str| parse_num::<f64>(origin, key, v);
        let p = &mut self.params;
        match key {
            "p1" => p.p1 = f(value)?,
            "eta" => p.eta = f(value)?,
            "beta" => p.beta = f(value)?,
            "mu" => p.mu = f(value)?,
            "n0" => p.n0 = f(value)?,
            "ns" => p.ns = f(value)?,
            "fc" => p.fc = f(value)?,
            "ga" => p.ga = f(value)?,
            "plexp" => p.plexp = f(value)?,
            "rb" => p.rb = f(value)?,
            "nsamp" => p.nsamp = parse_num(origin, key, value)?,
            "t0" => p.t0 = f(value)?,
            "d1" => self.d1 = f(value)?,
            "d2" => self.d2 = f(value)?,
            "d12" => self.d12 = Some(f(value)?),
            "schemes" => self.schemes = parse_list(origin, key, value)?,
            "sweep_param" => self.sweep.param = parse_num(origin, key, value)?,
            "sweep_start" => self.sweep.start = f(value)?,
            "sweep_stop" => self.sweep.stop = f(value)?,
            "sweep_steps" => self.sweep.steps = parse_num(origin, key, value)?,
            "bisect_tol" => self.solver.bisect_tol = f(value)?,
            "feas_tol" => self.solver.feas_tol = f(value)?,
            "barrier_mu0" => self.solver.barrier_mu0 = f(value)?,
            "barrier_shrink" => self.solver.barrier_shrink = f(value)?,
            "newton_max_iter" => self.solver.newton_max_iter = parse_num(origin, key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_num(origin, key, value)?,
            "delta" => self.delta = f(value)?,
            "bits" => self.bits = parse_num(origin, key, value)?,
            "n_list" => self.n_list = parse_list(origin, key, value)?,
            "oracle_rel_tol" => self.validate.oracle_rel_tol = f(value)?,
            "grid_bound_factor" => self.validate.grid_bound_factor = f(value)?,
            "validate_instances" => self.validate.instances = parse_num(origin, key, value)?,
            "mc_factor" => self.validate.mc_factor = f(value)?,
            "mc_snr" => self.validate.mc_snr = f(value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = format!("{source}:{}", i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    origin,
                    text: line.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) && Self::KEYS.contains(&key) {
                return Err(ConfigError::Duplicate {
                    origin,
                    key: key.to_string(),
                });
            }
            self.set(key, value, &origin)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text, "line")?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Self::default();
        c.apply_text(&text, &path.display().to_string())?;
        c.check()?;
        Ok(c)
    }

    /// Cross-field checks; run after every override has been applied.
    pub fn check(&self) -> Result<(), ConfigError> {
        let fail = |key, reason: &str| {
            Err(ConfigError::Constraint {
                key,
                reason: reason.to_string(),
            })
        };
        self.params.validate()?;
        self.solver.validate()?;
        self.gains()?;
        if self.schemes.is_empty() {
            return fail("schemes", "must list at least one scheme");
        }
        if !(self.sweep.start.is_finite() && self.sweep.stop.is_finite()) {
            return fail("sweep_start", "and `sweep_stop` must be finite");
        }
        if self.sweep.steps == 0 {
            return fail("sweep_steps", "must be >= 1");
        }
        if !(self.delta > 0.0 && self.delta <= 0.1) {
            return fail("delta", "must lie in (0, 0.1]");
        }
        if self.bits == 0 {
            return fail("bits", "must be >= 1");
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return fail("n_list", "must be a nonempty list of positive sample counts");
        }
        let v = &self.validate;
        for (key, x) in [
            ("oracle_rel_tol", v.oracle_rel_tol),
            ("grid_bound_factor", v.grid_bound_factor),
            ("mc_factor", v.mc_factor),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return fail(key, "must be finite and >= 0");
            }
        }
        if !(v.mc_snr.is_finite() && v.mc_snr > 0.0) {
            return fail("mc_snr", "must be finite and > 0");
        }
        Ok(())
    }

    pub fn geometry(&self) -> wpcn_core::Result<Geometry> {
        match self.d12 {
            Some(d12) => Geometry::new(self.d1, self.d2, d12),
            None => Geometry::collinear(self.d1, self.d2),
        }
    }

    pub fn gains(&self) -> wpcn_core::Result<ChannelGains> {
        gains_from_geometry(&self.geometry()?, &self.params)
    }

    /// Copy with the sweep parameter set to `value`.
    pub fn at(&self, param: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::D1 => c.d1 = value,
            SweepParam::D2 => c.d2 = value,
            SweepParam::Rb => c.params.rb = value,
            SweepParam::P1 => c.params.p1 = value,
            SweepParam::Nsamp => c.params.nsamp = value.round().max(0.0) as u32,
        }
        c
    }

    /// Every key with its effective value, in a form [`RunConfig::parse`] reads back.
    pub fn dump(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("p1", format!("{:?}", p.p1));
        kv("eta", format!("{:?}", p.eta));
        kv("beta", format!("{:?}", p.beta));
        kv("mu", format!("{:?}", p.mu));
        kv("n0", format!("{:?}", p.n0));
        kv("ns", format!("{:?}", p.ns));
        kv("fc", format!("{:?}", p.fc));
        kv("ga", format!("{:?}", p.ga));
        kv("plexp", format!("{:?}", p.plexp));
        kv("rb", format!("{:?}", p.rb));
        kv("nsamp", p.nsamp.to_string());
        kv("t0", format!("{:?}", p.t0));
        kv("d1", format!("{:?}", self.d1));
        kv("d2", format!("{:?}", self.d2));
        if let Some(d12) = self.d12 {
            kv("d12", format!("{d12:?}"));
        }
        kv(
            "schemes",
            self.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
        );
        kv("sweep_param", self.sweep.param.as_str().to_string());
        kv("sweep_start", format!("{:?}", self.sweep.start));
        kv("sweep_stop", format!("{:?}", self.sweep.stop));
        kv("sweep_steps", self.sweep.steps.to_string());
        kv("bisect_tol", format!("{:?}", self.solver.bisect_tol));
        kv("feas_tol", format!("{:?}", self.solver.feas_tol));
        kv("barrier_mu0", format!("{:?}", self.solver.barrier_mu0));
        kv("barrier_shrink", format!("{:?}", self.solver.barrier_shrink));
        kv("newton_max_iter", self.solver.newton_max_iter.to_string());
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        kv("seed", self.seed.to_string());
        kv("delta", format!("{:?}", self.delta));
        kv("bits", self.bits.to_string());
        kv(
            "n_list",
            self.n_list.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        );
        kv("oracle_rel_tol", format!("{:?}", self.validate.oracle_rel_tol));
        kv("grid_bound_factor", format!("{:?}", self.validate.grid_bound_factor));
        kv("validate_instances", self.validate.instances.to_string());
        kv("mc_factor", format!("{:?}", self.validate.mc_factor));
        kv("mc_snr", format!("{:?}", self.validate.mc_snr));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.check().unwrap();
        assert_eq!(c.params, SystemParams::default());
        assert_eq!(c.d2, 3.0);
        assert_eq!(c.sweep.values().len(), 21);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# header\n\n  beta = 0.5  # trailing\nschemes = ab_coop, no_coop\n").unwrap();
        assert_eq!(c.params.beta, 0.5);
        assert_eq!(c.schemes, vec![SchemeKind::AbCoop, SchemeKind::NoCoop]);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = RunConfig::parse("beta = 0.5\nbetta = 0.4\n").unwrap_err();
        assert_eq!(e.to_string(), "line:2: unknown key `betta`");
    }

    #[test]
    fn duplicate_and_syntax_errors() {
        assert!(matches!(
            RunConfig::parse("mu = 0.1\nmu = 0.2\n"),
            Err(ConfigError::Duplicate { .. })
        ));
        assert!(matches!(RunConfig::parse("mu 0.1\n"), Err(ConfigError::Syntax { .. })));
        let e = RunConfig::parse("nsamp = ten\n").unwrap_err();
        assert!(e.to_string().contains("`nsamp`"), "{e}");
    }

    #[test]
    fn out_of_range_names_field() {
        let e = RunConfig::parse("beta = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("`beta`"), "{e}");
        let e = RunConfig::parse("d1 = 2\nd2 = 3\n").unwrap_err();
        assert!(e.to_string().contains("`d1`"), "{e}");
        RunConfig::parse("d1 = 2\nd2 = 3\nd12 = 2.5\n").unwrap();
    }

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.params.n0 = 1.234_567_890_123_456_7e-11;
        c.d12 = Some(6.1);
        c.out = Some("x/y.csv".into());
        c.sweep.param = SweepParam::Nsamp;
        c.n_list = vec![1, 7];
        c.params.p1 = 0.1 + 0.2;
        let back = RunConfig::parse(&c.dump()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.dump(), c.dump());
    }

    #[test]
    fn sweep_values_hit_endpoints() {
        let s = SweepSpec {
            param: SweepParam::D1,
            start: 6.0,
            stop: 10.0,
            steps: 21,
        };
        let v = s.values();
        assert_eq!(v[0], 6.0);
        assert_eq!(v[20], 10.0);
        assert!((v[4] - 6.8).abs() < 1e-12);
        let one = SweepSpec { steps: 1, ..s };
        assert_eq!(one.values(), vec![6.0]);
    }
}
