use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::gamma::GammaMethod;
use crate::sampler::DistributionSpec;
use crate::tails::bounds::BoundId;
use crate::tails::curve::default_t_grid;
use crate::tails::sigma::{SearchMode, DEFAULT_P_GRID};

pub const ENV_WORKERS: &str = "LCRIP_WORKERS";
pub const ENV_OUT: &str = "LCRIP_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Isotropy,
    Sigma,
    Paouris,
    Tails,
    Gamma,
    Rip,
    Recovery,
    Bounds,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Isotropy => "isotropy",
            ExperimentKind::Sigma => "sigma",
            ExperimentKind::Paouris => "paouris",
            ExperimentKind::Tails => "tails",
            ExperimentKind::Gamma => "gamma",
            ExperimentKind::Rip => "rip",
            ExperimentKind::Recovery => "recovery",
            ExperimentKind::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    ProjectionSup,
    OrderStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Exact,
    Heuristic,
    SupportSampled,
}

impl MethodKind {
    pub fn gamma(self) -> Option<GammaMethod> {
        match self {
            MethodKind::Exact => Some(GammaMethod::Exact),
            MethodKind::Heuristic => Some(GammaMethod::Heuristic),
            MethodKind::SupportSampled => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default = "default_t_grid")]
    pub t: Vec<f64>,
    #[serde(default = "default_p_grid")]
    pub p: Vec<f64>,
    /// Optional sweep over m (recovery, rip); empty means `sizes.m` only.
    #[serde(default)]
    pub m: Vec<usize>,
    /// Optional sweep over n (rip, recovery); empty means `sizes.n` only.
    #[serde(default)]
    pub n: Vec<usize>,
}

fn default_p_grid() -> Vec<f64> {
    DEFAULT_P_GRID.to_vec()
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            t: default_t_grid(),
            p: default_p_grid(),
            m: Vec::new(),
            n: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supports: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub id: BoundId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// A reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DistributionSpec>,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSection>,
    #[serde(default)]
    pub output: Output,
}

fn field<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Config {
        field: field.to_string(),
        message: message.into(),
    })
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: 0,
            trials: None,
            spec: None,
            sizes: Sizes::default(),
            grids: Grids::default(),
            constants: BTreeMap::new(),
            options: Options::default(),
            bound: None,
            output: Output::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => Error::Config {
                    field: s.get(span.clone()).unwrap_or("?").trim().to_string(),
                    message: msg,
                },
                None => Error::Parse(msg),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Applies the worker-count and output-directory environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            let w: usize = w
                .parse()
                .map_err(|_| Error::Config { field: ENV_WORKERS.into(), message: format!("`{w}` is not a count") })?;
            self.output.workers = Some(w);
        }
        if let Ok(dir) = std::env::var(ENV_OUT) {
            self.output.dir = Some(PathBuf::from(dir));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.output.workers.unwrap_or(1).max(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn spec(&self) -> Result<&DistributionSpec> {
        let spec = match &self.spec {
            Some(s) => s,
            None => return field("spec", format!("required for kind {}", self.kind.name())),
        };
        spec.validate().or_else(|e| field("spec", e.to_string()))?;
        Ok(spec)
    }

    pub fn dimension(&self) -> Result<usize> {
        Ok(self.spec()?.dimension())
    }

    /// Fills every default the run will use and checks the sizes the chosen
    /// kind needs, so that the manifest shows the complete parameter set.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        // eq2_premise carries its own default C = e.
        let c_default = match &c.bound {
            Some(b) if c.kind == ExperimentKind::Bounds && b.id == BoundId::Eq2Premise => std::f64::consts::E,
            _ => 1.0,
        };
        for (name, default) in [("C", c_default), ("theta", 0.5), ("B", 1.0), ("b", 1.0)] {
            c.constants.entry(name.to_string()).or_insert(default);
        }
        let default_trials = match c.kind {
            ExperimentKind::Isotropy | ExperimentKind::Sigma | ExperimentKind::Paouris => 100_000,
            ExperimentKind::Tails => 10_000,
            ExperimentKind::Gamma => 500,
            ExperimentKind::Rip => 20,
            ExperimentKind::Recovery => 100,
            ExperimentKind::Bounds => 0,
        };
        c.trials.get_or_insert(default_trials);
        let trials = c.trials.unwrap_or_default();
        if c.grids.t.is_empty() || c.grids.t.windows(2).any(|w| !(w[0] < w[1])) {
            return field("grids.t", "must be non-empty and strictly increasing");
        }
        if c.grids.p.is_empty() || c.grids.p.windows(2).any(|w| !(w[0] < w[1])) || c.grids.p[0] < 1.0 {
            return field("grids.p", "must be non-empty, strictly increasing and start at p >= 1");
        }

        let need = |v: Option<usize>, name: &str| -> Result<usize> {
            match v {
                Some(x) if x >= 1 => Ok(x),
                Some(_) => field(name, "must be at least 1"),
                None => field(name, format!("required for kind {}", c.kind.name())),
            }
        };

        match c.kind {
            ExperimentKind::Isotropy => {
                c.spec()?;
                if trials < 2 {
                    return field("trials", "need at least 2 draws");
                }
            }
            ExperimentKind::Sigma | ExperimentKind::Paouris => {
                c.spec()?;
                c.options.search.get_or_insert(SearchMode::CanonicalPlusRandom);
                if trials < 1000 {
                    return field("trials", "need at least 1000 draws");
                }
            }
            ExperimentKind::Tails => {
                let dim = c.dimension()?;
                let stat = *c.options.statistic.get_or_insert(StatisticKind::ProjectionSup);
                let (name, v) = match stat {
                    StatisticKind::ProjectionSup => ("sizes.m", c.sizes.m),
                    StatisticKind::OrderStat => ("sizes.l", c.sizes.l),
                };
                let v = need(v, name)?;
                if v > dim {
                    return field(name, format!("{v} exceeds the dimension {dim}"));
                }
                if trials < 100 {
                    return field("trials", "need at least 100 trials");
                }
            }
            ExperimentKind::Gamma => {
                let dim = c.dimension()?;
                let n = need(c.sizes.n, "sizes.n")?;
                let k = need(c.sizes.k, "sizes.k")?;
                let m = need(c.sizes.m, "sizes.m")?;
                if n > dim {
                    return field("sizes.n", format!("{n} exceeds N = {dim}"));
                }
                if k > n {
                    return field("sizes.k", format!("{k} exceeds n = {n}"));
                }
                if m > dim {
                    return field("sizes.m", format!("{m} exceeds N = {dim}"));
                }
                let method = *c.options.method.get_or_insert(MethodKind::Exact);
                if method == MethodKind::SupportSampled {
                    return field("options.method", "gamma supports exact or heuristic");
                }
                let r = *c.options.restarts.get_or_insert(20);
                if method == MethodKind::Heuristic && r < 10 {
                    return field("options.restarts", "heuristic curves need at least 10 restarts");
                }
                if trials < 100 {
                    return field("trials", "need at least 100 trials");
                }
            }
            ExperimentKind::Rip | ExperimentKind::Recovery => {
                let dim = c.dimension()?;
                if c.grids.n.is_empty() {
                    c.grids.n = vec![need(c.sizes.n, "sizes.n")?];
                }
                if c.grids.m.is_empty() {
                    c.grids.m = vec![need(c.sizes.m, "sizes.m")?];
                }
                for &n in &c.grids.n {
                    if n == 0 || n > dim {
                        return field("grids.n", format!("{n} must lie in 1..={dim}"));
                    }
                }
                for &m in &c.grids.m {
                    if m == 0 || m > dim {
                        return field("grids.m", format!("{m} must lie in 1..={dim}"));
                    }
                }
                if c.kind == ExperimentKind::Rip {
                    let method = *c.options.method.get_or_insert(MethodKind::Exact);
                    if method == MethodKind::Heuristic {
                        return field("options.method", "rip supports exact or support_sampled");
                    }
                    if method == MethodKind::SupportSampled {
                        c.options.supports.get_or_insert(100_000);
                    }
                }
                if trials == 0 {
                    return field("trials", "must be at least 1");
                }
            }
            ExperimentKind::Bounds => {
                if c.bound.is_none() {
                    return field("bound", "a [bound] section with `id` is required");
                }
                if c.spec.is_some() {
                    c.spec()?;
                    c.options.search.get_or_insert(SearchMode::CanonicalPlusRandom);
                }
            }
        }
        Ok(c)
    }
}
