//! Flat `key = value` run configuration, validated before any computation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use steklov_trace::expansion::BoundaryGeometry;
use steklov_trace::fem::MeshShape;
use steklov_trace::oracle::{CutoffProfile, ModelDomain, MAX_ORACLE_DIM};
use steklov_trace::Params;
use thiserror::Error;

use crate::format::g;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandName {
    Kp,
    VerifyExtremal,
    Expand,
    Oracle,
    Steklov,
    Shapeopt,
}

impl CommandName {
    pub const ALL: [CommandName; 6] = [
        Self::Kp,
        Self::VerifyExtremal,
        Self::Expand,
        Self::Oracle,
        Self::Steklov,
        Self::Shapeopt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Kp => "kp",
            Self::VerifyExtremal => "verify-extremal",
            Self::Expand => "expand",
            Self::Oracle => "oracle",
            Self::Steklov => "steklov",
            Self::Shapeopt => "shapeopt",
        }
    }

    fn uses_fem(self) -> bool {
        matches!(self, Self::Steklov | Self::Shapeopt)
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|c| c.as_str()).collect();
                format!("unknown command `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Boundary exponent for the finite-element commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QChoice {
    /// `q = p_*`.
    Critical,
    Value(f64),
}

impl QChoice {
    pub fn resolve(self, params: &Params) -> f64 {
        match self {
            Self::Critical => params.critical_exponent(),
            Self::Value(q) => q,
        }
    }
}

impl fmt::Display for QChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Critical => f.write_str("pstar"),
            Self::Value(q) => f.write_str(&g(*q)),
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandName,
    pub n: usize,
    pub p: f64,
    pub lambdas: Vec<f64>,
    pub h0: f64,
    pub one_sided: bool,
    pub r: f64,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_per_decade: usize,
    pub rel_tol: f64,
    pub max_cells: usize,
    /// Relative bound on the discarded tail of the half-space norms.
    pub tail: f64,
    pub tolerance: f64,
    pub quotient_tolerance: f64,
    pub leading_tolerance: f64,
    pub fit_tolerance: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub p_grid: Vec<f64>,
    pub mesh: MeshShape,
    pub resolution: usize,
    pub mesh_file: Option<PathBuf>,
    pub q: QChoice,
    pub h: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub restarts: usize,
    pub residual_tol: f64,
    /// Hole measures as fractions of the mesh area.
    pub alphas: Vec<f64>,
    pub random_holes: usize,
    pub max_outer: usize,
}

const KEYS: &[&str] = &[
    "n",
    "p",
    "lambdas",
    "h0",
    "one_sided",
    "r",
    "cutoff_inner",
    "cutoff_outer",
    "eps_min",
    "eps_max",
    "eps_per_decade",
    "rel_tol",
    "max_cells",
    "tail",
    "tolerance",
    "quotient_tolerance",
    "leading_tolerance",
    "fit_tolerance",
    "n_min",
    "n_max",
    "p_grid",
    "mesh",
    "resolution",
    "mesh_file",
    "q",
    "h",
    "seed",
    "max_iters",
    "restarts",
    "residual_tol",
    "alphas",
    "random_holes",
    "max_outer",
];

/// Raw `key -> value` pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            raw.set_pair(line).map_err(|_| ConfigError::Syntax {
                origin: origin.to_string(),
                line: i + 1,
                text: line.to_string(),
            })?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin: "--set".into(),
                line: 0,
                text: pair.to_string(),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                origin: "--set".into(),
                line: 0,
                text: pair.to_string(),
            });
        }
        self.entries.insert(key.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| bad(key, v, e.to_string())),
        }
    }

    fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| v.parse().map_err(|e: T::Err| bad(key, v, e.to_string())))
            .transpose()
    }

    fn get_list(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) if v.is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| bad(key, v, e.to_string())))
                .collect(),
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| g(*x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies defaults for `command`, then validates.
    pub fn resolve(command: CommandName, raw: &RawConfig) -> Result<Self> {
        if let Some(k) = raw.entries.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let n = raw.get("n", if command.uses_fem() { 2 } else { 3 })?;
        let r = raw.get("r", 1.0)?;
        let q = match raw.entries.get("q").map(String::as_str) {
            None | Some("pstar") => QChoice::Critical,
            Some(v) => QChoice::Value(v.parse().map_err(|e: std::num::ParseFloatError| bad("q", v, e.to_string()))?),
        };
        let mesh = match raw.entries.get("mesh") {
            None => MeshShape::Disk,
            Some(v) => v.parse().map_err(|e: steklov_trace::Error| bad("mesh", v, e.to_string()))?,
        };
        let cfg = Self {
            command,
            n,
            p: raw.get("p", 1.5)?,
            lambdas: raw.get_list("lambdas", vec![0.0; n.saturating_sub(1)])?,
            h0: raw.get("h0", 0.0)?,
            one_sided: raw.get("one_sided", true)?,
            r,
            cutoff_inner: raw.get("cutoff_inner", r / 4.0)?,
            cutoff_outer: raw.get("cutoff_outer", r / 2.0)?,
            eps_min: raw.get("eps_min", 1e-3)?,
            eps_max: raw.get("eps_max", 1e-2)?,
            eps_per_decade: raw.get("eps_per_decade", 8)?,
            rel_tol: raw.get("rel_tol", 1e-10)?,
            max_cells: raw.get("max_cells", 2_000_000)?,
            tail: raw.get("tail", 1e-9)?,
            tolerance: raw.get("tolerance", 1e-6)?,
            quotient_tolerance: raw.get("quotient_tolerance", 1e-5)?,
            leading_tolerance: raw.get("leading_tolerance", 0.01)?,
            fit_tolerance: raw.get("fit_tolerance", 0.05)?,
            n_min: raw.get("n_min", 3)?,
            n_max: raw.get("n_max", 8)?,
            p_grid: raw.get_list("p_grid", vec![1.2, 1.5, 2.0, 2.5])?,
            mesh,
            resolution: raw.get("resolution", 3)?,
            mesh_file: raw.get_opt::<String>("mesh_file")?.filter(|s| !s.is_empty()).map(PathBuf::from),
            q,
            h: raw.get("h", 1.0)?,
            seed: raw.get("seed", 0)?,
            max_iters: raw.get("max_iters", 5000)?,
            restarts: raw.get("restarts", 0)?,
            residual_tol: raw.get("residual_tol", 1e-6)?,
            alphas: raw.get_list("alphas", vec![0.0, 0.05, 0.1, 0.2, 0.3])?,
            random_holes: raw.get("random_holes", 20)?,
            max_outer: raw.get("max_outer", 50)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> std::result::Result<Params, steklov_trace::Error> {
        Params::new(self.n, self.p)
    }

    pub fn geometry(&self) -> BoundaryGeometry<f64> {
        BoundaryGeometry::new(self.lambdas.clone(), self.h0, self.one_sided)
    }

    pub fn model_domain(&self) -> std::result::Result<ModelDomain, steklov_trace::Error> {
        Ok(ModelDomain::new(self.r, self.lambdas.clone())?
            .with_cutoff(CutoffProfile::new(self.cutoff_inner, self.cutoff_outer)?))
    }

    fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{key} must be positive and finite, got {v}")))
            }
        };
        for (key, v) in [
            ("rel_tol", self.rel_tol),
            ("tail", self.tail),
            ("tolerance", self.tolerance),
            ("quotient_tolerance", self.quotient_tolerance),
            ("leading_tolerance", self.leading_tolerance),
            ("fit_tolerance", self.fit_tolerance),
            ("residual_tol", self.residual_tol),
        ] {
            positive(key, v)?;
        }
        match self.command {
            CommandName::Kp => {
                if self.n_min < 2 || self.n_min > self.n_max || self.n_max > 64 {
                    return Err(invalid(format!(
                        "need 2 <= n_min <= n_max <= 64, got {}..{}",
                        self.n_min, self.n_max
                    )));
                }
                if self.p_grid.is_empty() || self.p_grid.iter().any(|&p| !(p > 1.0 && p.is_finite())) {
                    return Err(invalid("p_grid must be a non-empty list of values > 1"));
                }
            }
            CommandName::VerifyExtremal | CommandName::Expand | CommandName::Oracle => {
                self.params().map_err(|e| invalid(e.to_string()))?;
                if self.command != CommandName::Expand && self.n > MAX_ORACLE_DIM {
                    return Err(invalid(format!("{} needs N <= {MAX_ORACLE_DIM}, got {}", self.command, self.n)));
                }
                if self.command != CommandName::VerifyExtremal {
                    self.geometry().check(&self.params().expect("checked")).map_err(|e| invalid(e.to_string()))?;
                    if !(self.eps_min > 0.0 && self.eps_min < self.eps_max && self.eps_max.is_finite()) {
                        return Err(invalid("need 0 < eps_min < eps_max"));
                    }
                    if self.eps_per_decade == 0 {
                        return Err(invalid("eps_per_decade must be >= 1"));
                    }
                }
                if self.command == CommandName::Oracle {
                    self.model_domain().map_err(|e| invalid(e.to_string()))?;
                }
            }
            CommandName::Steklov | CommandName::Shapeopt => {
                if self.n != 2 {
                    return Err(invalid(format!("{} is planar: need n = 2, got {}", self.command, self.n)));
                }
                let params = self.params().map_err(|e| invalid(e.to_string()))?;
                let pstar = params.critical_exponent();
                let q = self.q.resolve(&params);
                if !(q > 1.0 && q <= pstar * (1.0 + 1e-12)) {
                    return Err(invalid(format!("need 1 < q <= p_* = {}, got {}", g(pstar), g(q))));
                }
                if !(1..=12).contains(&self.resolution) {
                    return Err(invalid(format!("resolution must be in 1..=12, got {}", self.resolution)));
                }
                if !self.h.is_finite() {
                    return Err(invalid("h must be finite"));
                }
                if self.command == CommandName::Shapeopt {
                    if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(0.0..1.0).contains(&a)) {
                        return Err(invalid("alphas must be fractions of the mesh area in [0, 1)"));
                    }
                    if self.max_outer == 0 {
                        return Err(invalid("max_outer must be >= 1"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every resolved setting as `(key, value)`, in `KEYS` order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("p", g(self.p)),
            ("lambdas", list(&self.lambdas)),
            ("h0", g(self.h0)),
            ("one_sided", self.one_sided.to_string()),
            ("r", g(self.r)),
            ("cutoff_inner", g(self.cutoff_inner)),
            ("cutoff_outer", g(self.cutoff_outer)),
            ("eps_min", g(self.eps_min)),
            ("eps_max", g(self.eps_max)),
            ("eps_per_decade", self.eps_per_decade.to_string()),
            ("rel_tol", g(self.rel_tol)),
            ("max_cells", self.max_cells.to_string()),
            ("tail", g(self.tail)),
            ("tolerance", g(self.tolerance)),
            ("quotient_tolerance", g(self.quotient_tolerance)),
            ("leading_tolerance", g(self.leading_tolerance)),
            ("fit_tolerance", g(self.fit_tolerance)),
            ("n_min", self.n_min.to_string()),
            ("n_max", self.n_max.to_string()),
            ("p_grid", list(&self.p_grid)),
            ("mesh", self.mesh.to_string()),
            ("resolution", self.resolution.to_string()),
            (
                "mesh_file",
                self.mesh_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("q", self.q.to_string()),
            ("h", g(self.h)),
            ("seed", self.seed.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("restarts", self.restarts.to_string()),
            ("residual_tol", g(self.residual_tol)),
            ("alphas", list(&self.alphas)),
            ("random_holes", self.random_holes.to_string()),
            ("max_outer", self.max_outer.to_string()),
        ]
    }
}
