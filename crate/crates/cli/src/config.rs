//! TOML run configuration.

use std::path::{Path, PathBuf};

use fracosc::criteria::{KernelPreset, KernelSpec, Thm35Variant};
use fracosc::dde::{History, SpecText, SystemSpec};
use fracosc::expr::{Expr, Var};
use fracosc::quad::ProbeOptions;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

/// A number, or an expression string without variables (`"1/3"`, `"pi/2"`).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    pub fn value(&self, name: &str) -> Result<f64, ConfigError> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => Expr::parse(s, &[])
                .and_then(|e| e.eval_at(Var::T, 0.0))
                .map_err(|e| ConfigError::Invalid(format!("{name}: {e}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub history: Option<HistoryBlock>,
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub criteria: CriteriaBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub alpha: Number,
    pub p: String,
    pub q: String,
    pub r: String,
    pub f: String,
    pub g: String,
    pub h: String,
    pub sigma: String,
    pub tau: String,
    /// Required unless `k_range` is given.
    pub k: Option<Number>,
    /// Estimate `k` as the sampled infimum of `f(u)/u` over this range.
    pub k_range: Option<[f64; 2]>,
    pub l: Number,
    pub l_prime: Number,
    pub m_prime: Number,
    pub t0: Number,
    #[serde(rename = "T")]
    pub anchor: Option<Number>,
    /// Clamp `|u| <= f_clamp` inside `f` during simulation.
    pub f_clamp: Option<f64>,
    /// `u` values on which `f(u)/u >= k` is checked.
    pub u_check: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryBlock {
    pub u0: String,
    pub v0: String,
    pub w0: String,
    #[serde(rename = "T1")]
    pub t1: Number,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub t_end: Number,
    pub dt: f64,
    pub window: Option<[Number; 2]>,
    #[serde(default = "default_min_crossings")]
    pub min_crossings: usize,
}

fn default_min_crossings() -> usize {
    10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaBlock {
    #[serde(default = "default_rho")]
    pub rho: String,
    /// Preset name (`square`, `linear`, `log-square`) or an expression in
    /// `t` and `s`.
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_beta_min")]
    pub beta_min: f64,
    pub cauchy_rel: Option<f64>,
    pub quad_rel: Option<f64>,
    pub max_extensions: Option<usize>,
    /// Evaluation times for the averaged criteria.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_variant")]
    pub thm35_variant: Thm35Variant,
    /// Window for the trajectory-based diagnostics.
    pub window: Option<[f64; 2]>,
}

fn default_rho() -> String {
    "1".into()
}
fn default_kernel() -> String {
    "square".into()
}
fn default_horizons() -> Vec<f64> {
    vec![1e2, 1e3, 1e4, 1e5]
}
fn default_beta_min() -> f64 {
    0.05
}
fn default_variant() -> Thm35Variant {
    Thm35Variant::Delay
}

impl Default for CriteriaBlock {
    fn default() -> Self {
        CriteriaBlock {
            rho: default_rho(),
            kernel: default_kernel(),
            horizons: default_horizons(),
            beta_min: default_beta_min(),
            cauchy_rel: None,
            quad_rel: None,
            max_extensions: None,
            t_grid: Vec::new(),
            thm35_variant: default_variant(),
            window: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Trajectory CSV.
    pub trajectory: Option<PathBuf>,
    /// Oscillation class JSON.
    pub classification: Option<PathBuf>,
    /// Criteria report JSON.
    pub report: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            trajectory: None,
            classification: None,
            report: None,
            formats: default_formats(),
        }
    }
}

/// A loaded configuration with everything parsed and validated.
pub struct Loaded {
    pub raw: RunConfig,
    pub spec: SystemSpec,
    pub history: Option<History>,
    /// Directory that relative output paths are resolved against.
    pub base: PathBuf,
    pub stem: String,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

fn invalid<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> ConfigError + '_ {
    move |e| ConfigError::Invalid(format!("{what}: {e}"))
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let raw = RunConfig::from_str(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = path
        .file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    build(raw, base, stem)
}

pub fn build(raw: RunConfig, base: PathBuf, stem: String) -> Result<Loaded, ConfigError> {
    let s = &raw.system;
    let t0 = s.t0.value("t0")?;
    let mut text = SpecText {
        alpha: s.alpha.value("alpha")?,
        p: s.p.clone(),
        q: s.q.clone(),
        r: s.r.clone(),
        f: s.f.clone(),
        g: s.g.clone(),
        h: s.h.clone(),
        sigma: s.sigma.clone(),
        tau: s.tau.clone(),
        k: 1.0,
        l: s.l.value("l")?,
        l_prime: s.l_prime.value("l_prime")?,
        m_prime: s.m_prime.value("m_prime")?,
        t0,
        anchor: s.anchor.as_ref().map(|a| a.value("T")).transpose()?,
        f_clamp: s.f_clamp,
    };
    let mut spec = SystemSpec::from_text(&text).map_err(invalid("system"))?;
    text.k = match (&s.k, s.k_range) {
        (Some(k), _) => k.value("k")?,
        (None, Some([lo, hi])) => spec.estimate_k(lo, hi, 1001).map_err(invalid("k_range"))?,
        (None, None) => return Err(ConfigError::Invalid("system: give k or k_range".into())),
    };
    spec.k = text.k;
    spec.check_constants().map_err(invalid("system"))?;

    let history = match &raw.history {
        Some(h) => Some(
            History::parse(&h.u0, &h.v0, &h.w0, h.t1.value("T1")?).map_err(invalid("history"))?,
        ),
        None => None,
    };
    if let Some(sim) = &raw.simulate {
        let t_end = sim.t_end.value("t_end")?;
        if !(t_end >= t0) {
            return Err(ConfigError::Invalid(format!("simulate: t_end = {t_end} is before t0 = {t0}")));
        }
        if !(sim.dt > 0.0) {
            return Err(ConfigError::Invalid(format!("simulate: dt = {} must be positive", sim.dt)));
        }
    }
    let c = &raw.criteria;
    if c.horizons.len() < 4 || c.horizons.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ConfigError::Invalid(
            "criteria: horizons must be at least 4 increasing values".into(),
        ));
    }
    Ok(Loaded {
        raw,
        spec,
        history,
        base,
        stem,
    })
}

impl Loaded {
    /// Checks A1 (positive coefficients), A3 (delays) and, when `u_check`
    /// is set, A2 over `[t0, t_end]`.
    pub fn check_assumptions(&self, t_end: f64) -> Result<(), ConfigError> {
        let span = (t_end - self.spec.t0).max(self.spec.t0);
        let u_grid: Vec<f64> = match self.raw.system.u_check {
            Some([lo, hi]) => (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect(),
            None => Vec::new(),
        };
        let report = self.spec.check_assumptions(span, 2000, &u_grid);
        if report.ok() {
            return Ok(());
        }
        let lines: Vec<String> = report
            .violations
            .iter()
            .take(5)
            .map(|v| format!("{} violated: {}", v.assumption, v.message))
            .collect();
        Err(ConfigError::Invalid(lines.join("; ")))
    }

    pub fn rho(&self) -> Result<Expr, ConfigError> {
        Expr::parse(&self.raw.criteria.rho, &[Var::T]).map_err(invalid("criteria.rho"))
    }

    pub fn kernel(&self, rho: &Expr) -> Result<KernelSpec, ConfigError> {
        let k = &self.raw.criteria.kernel;
        match KernelPreset::from_name(k) {
            Some(p) => Ok(KernelSpec::preset(p, rho)),
            None => KernelSpec::parse(k, rho).map_err(invalid("criteria.kernel")),
        }
    }

    pub fn probe_options(&self) -> ProbeOptions {
        let c = &self.raw.criteria;
        let mut o = ProbeOptions {
            beta_min: c.beta_min,
            ..ProbeOptions::default()
        };
        if let Some(r) = c.cauchy_rel {
            o.cauchy_rel = r;
        }
        if let Some(r) = c.quad_rel {
            o.tol.rel = r;
        }
        if let Some(m) = c.max_extensions {
            o.max_extensions = m;
        }
        o
    }

    pub fn output_path(&self, given: &Option<PathBuf>, suffix: &str) -> PathBuf {
        match given {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.base.join(p),
            None => self.base.join(format!("{}{suffix}", self.stem)),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.raw.output.formats.contains(&f)
    }
}
