//! Run configuration: a JSON file, then `LAB_SEED`, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use laguerre_lab::ensemble::{make_sigma, SigmaPreset, SigmaSpectrum};
use laguerre_lab::mc_stats::Unfolding;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;

/// `λ0` as a number or the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Lambda0 {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Lambda0Repr {
    Value(f64),
    Text(String),
}

impl Serialize for Lambda0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Lambda0::Auto => Lambda0Repr::Text("auto".into()),
            Lambda0::Value(v) => Lambda0Repr::Value(v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lambda0 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Lambda0Repr::deserialize(d)? {
            Lambda0Repr::Value(v) => Ok(Lambda0::Value(v)),
            Lambda0Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Lambda0 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Lambda0::Auto);
        }
        s.parse().map(Lambda0::Value).map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        (0..self.points).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.points - 1) as f64).collect()
    }
}

/// Everything a subcommand may read. Unset optional fields take the
/// defaults listed on [`RunConfig::default`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sigma: SigmaPreset,
    /// Number of columns of `A`; overrides `c` when both are given.
    pub m: Option<usize>,
    /// Aspect ratio `m/n`, used when `m` is absent.
    pub c: Option<f64>,
    pub lambda0: Lambda0,
    pub seed: u64,
    pub trials: usize,
    /// `λ` grid for `density`; derived from the support when absent.
    pub grid: Option<Grid>,
    /// Bulk threshold on `Im z`.
    pub eps_bulk: f64,
    /// Local grid for `kernel`: half width, step and maximal `|ξ − η|`.
    pub kernel_half_width: f64,
    pub kernel_step: f64,
    pub kernel_spread: f64,
    /// Gap and spacing grid `s = 0, s_step, ..., s_max`.
    pub s_max: f64,
    pub s_step: f64,
    /// Monte Carlo window `W` in local units.
    pub window: f64,
    pub unfolding: Unfolding,
    pub keep_full: bool,
    pub out: PathBuf,
    /// Provenance written by a previous run; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: SigmaPreset::Identity { n: 200 },
            m: None,
            c: Some(2.0),
            lambda0: Lambda0::Auto,
            seed: DEFAULT_SEED,
            trials: 20,
            grid: None,
            eps_bulk: 1e-6,
            kernel_half_width: 1.5,
            kernel_step: 0.5,
            kernel_spread: 3.0,
            s_max: 4.0,
            s_step: 0.02,
            window: 200.0,
            unfolding: Unfolding::Integrated,
            keep_full: false,
            out: PathBuf::from("lab-out"),
            manifest: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn sigma_spectrum(&self) -> laguerre_lab::Result<SigmaSpectrum> {
        make_sigma(&self.sigma)
    }

    pub fn n(&self) -> anyhow::Result<usize> {
        Ok(self.sigma_spectrum()?.n())
    }

    pub fn m(&self) -> anyhow::Result<usize> {
        let n = self.n()?;
        match (self.m, self.c) {
            (Some(m), _) => Ok(m),
            (None, Some(c)) => Ok((c * n as f64).round() as usize),
            (None, None) => bail!(invalid("either m or c must be set")),
        }
    }

    /// `c` for the limiting density: `m/n` if `m` is set, else `c`.
    pub fn ratio(&self) -> anyhow::Result<f64> {
        match (self.m, self.c) {
            (Some(m), _) => Ok(m as f64 / self.n()? as f64),
            (None, Some(c)) => Ok(c),
            (None, None) => bail!(invalid("either m or c must be set")),
        }
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.sigma_spectrum()?;
        let c = self.ratio()?;
        if c.is_nan() || c <= 1.0 || self.m()? <= self.n()? {
            return Err(laguerre_lab::LabError::UnsupportedRatio(c).into());
        }
        if let Lambda0::Value(l) = self.lambda0 {
            if !(l > 0.0 && l.is_finite()) {
                bail!(invalid(format!("lambda0 must be positive, got {l}")));
            }
        }
        if self.trials == 0 {
            bail!(invalid("trials must be at least 1"));
        }
        if let Some(g) = &self.grid {
            if !(g.lo > 0.0 && g.hi >= g.lo && g.points >= 1) {
                bail!(invalid("grid needs 0 < lo <= hi and at least one point"));
            }
        }
        for (name, v) in [
            ("eps_bulk", self.eps_bulk),
            ("kernel_half_width", self.kernel_half_width),
            ("kernel_step", self.kernel_step),
            ("kernel_spread", self.kernel_spread),
            ("s_max", self.s_max),
            ("s_step", self.s_step),
            ("window", self.window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> laguerre_lab::LabError {
    laguerre_lab::LabError::InvalidInput(msg.into())
}
