//! `lcrip`: command-line front end to the experiment runner.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcrip_core::metrics::{delta_m_exact, delta_m_sampled, gamma_km, GammaMethod};
use lcrip_core::tails::{evaluate_bound, BoundId, BoundQuery};
use lcrip_core::xp::{self, BoundSection, ExperimentConfig, ExperimentKind, StatisticKind};
use lcrip_core::{sample_matrix, DistributionSpec, Error, Kind, Matrix, RandomStream};

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(name = "lcrip", version, about = "Sparse-submatrix and RIP experiments for log-concave random matrices")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by --config.
    Run,
    /// Draw an n x N matrix with i.i.d. rows and print it as CSV.
    Sample(SampleArgs),
    /// Restricted isometry constant δ_m of a matrix.
    Delta(DeltaArgs),
    /// Largest k x m submatrix norm Γ_{k,m} with its certificate.
    Gamma(GammaArgs),
    /// Weak moment profile σ_X(p).
    Sigma(SigmaArgs),
    /// Empirical tail curve of a projection supremum or order statistic.
    Tails(TailsArgs),
    /// Basis pursuit recovery experiment.
    Recover(RecoverArgs),
    /// Evaluate one of the closed-form bounds.
    Bounds(BoundsArgs),
    /// Run the built-in example checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// Distribution: gaussian, laplace, cube, ball, l1ball.
    #[arg(long, default_value = "gaussian")]
    kind: Kind,
    /// Ambient dimension N.
    #[arg(long = "N")]
    big_n: Option<usize>,
}

impl SpecArgs {
    fn spec(&self) -> Result<DistributionSpec, Error> {
        let n = self.big_n.ok_or_else(|| Error::Argument("--N is required".into()))?;
        if self.kind == Kind::WeightedSum {
            return Err(Error::Argument("--kind wsum needs weights; use --config".into()));
        }
        Ok(DistributionSpec::new(self.kind, n))
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Number of rows.
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    /// Matrix CSV; when absent a Γ/√n matrix is sampled from --kind/--N.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
    /// Rows n.
    #[arg(long)]
    n: Option<usize>,
}

impl MatrixArgs {
    fn load(&self, seed: u64, scale: bool) -> Result<Matrix, Error> {
        let a = match &self.matrix {
            Some(path) => Matrix::load(path)?,
            None => {
                let n = self.n.ok_or_else(|| Error::Argument("--n is required without --matrix".into()))?;
                let a = sample_matrix(&self.spec.spec()?, n, &RandomStream::new(seed))?;
                if scale {
                    a.scaled(1.0 / (n as f64).sqrt())
                } else {
                    a
                }
            }
        };
        if let Some(n) = self.n {
            if n != a.rows() {
                return Err(Error::Argument(format!("--n {n} does not match the {} matrix rows", a.rows())));
            }
        }
        if let Some(big_n) = self.spec.big_n {
            if big_n != a.cols() {
                return Err(Error::Argument(format!("--N {big_n} does not match the {} matrix columns", a.cols())));
            }
        }
        Ok(a)
    }
}

#[derive(Args, Debug)]
struct DeltaArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[arg(long)]
    m: usize,
    /// Sample this many supports instead of enumerating all of them.
    #[arg(long)]
    supports: Option<u64>,
}

#[derive(Args, Debug)]
struct GammaArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, value_parser = ["exact", "heuristic"], default_value = "exact")]
    method: String,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct SigmaArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// p grid.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct TailsArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Projection size m (projection supremum).
    #[arg(long, conflicts_with = "l")]
    m: Option<usize>,
    /// Order-statistic rank ℓ.
    #[arg(long)]
    l: Option<usize>,
    /// t grid.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    n: usize,
    /// One or more sparsity levels.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Bound identifier (lemma1, eq2_premise, thm3, thm4, thm5, cor6, thm7, thm8_lhs, sigma_weighted).
    #[arg(long)]
    id: BoundId,
    #[arg(long = "T")]
    big_t: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "B")]
    big_b: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "N")]
    big_n: Option<f64>,
    #[arg(long = "C")]
    big_c: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "x-inf")]
    x_inf: Option<f64>,
    #[arg(long = "x-norm")]
    x_norm: Option<f64>,
    /// Use the log-concave upper profile σ(p) = p.
    #[arg(long = "sigma-upper")]
    sigma_upper: bool,
    /// Additional NAME=VALUE parameters.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not NAME=VALUE"))?;
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.to_string(), v))
}

impl BoundsArgs {
    fn params(&self) -> BTreeMap<String, f64> {
        let named = [
            ("T", self.big_t),
            ("theta", self.theta),
            ("B", self.big_b),
            ("n", self.n),
            ("m", self.m),
            ("N", self.big_n),
            ("C", self.big_c),
            ("c", self.c),
            ("t", self.t),
            ("k", self.k),
            ("l", self.l),
            ("b", self.b),
            ("p", self.p),
            ("x_inf", self.x_inf),
            ("x_norm", self.x_norm),
            ("sigma_upper", self.sigma_upper.then_some(1.0)),
        ];
        let mut map: BTreeMap<String, f64> =
            named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))).collect();
        map.extend(self.params.iter().cloned());
        map
    }
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Skip the closed-form evaluations and run the exact examples only.
    #[arg(long)]
    trivial_only: bool,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Argument(_) | Error::InvalidSpec(_) | Error::Parse(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_else(|e| format!("<unserializable: {e}>"))
}

/// Loads `--config` (if any), applies environment and global overrides.
fn load_config(cli: &Cli, fallback: impl FnOnce() -> Result<ExperimentConfig, Error>) -> Result<ExperimentConfig, Error> {
    let mut c = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => fallback()?,
    };
    c.apply_env()?;
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    if let Some(w) = cli.workers {
        c.output.workers = Some(w);
    }
    if let Some(dir) = &cli.out {
        c.output.dir = Some(dir.clone());
    }
    Ok(c)
}

fn run_config(c: &ExperimentConfig) -> Result<(), Failure> {
    let report = xp::run(c)?;
    say!("{}", report.summary);
    for f in &report.files {
        say!("wrote {}", f.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Run => {
            if cli.config.is_none() {
                return Err(Failure::Usage("--config is required for `run`".into()));
            }
            run_config(&load_config(cli, || unreachable!())?)
        }
        Command::Sample(a) => {
            let m = sample_matrix(&a.spec.spec()?, a.n, &RandomStream::new(seed))?;
            match &cli.out {
                Some(path) => m.save(path)?,
                None => m.write_csv(std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Delta(a) => {
            let m = a.matrix.load(seed, true)?;
            let report = match a.supports {
                Some(s) => delta_m_sampled(&m, a.m, s, &RandomStream::new(seed).child(1))?,
                None => delta_m_exact(&m, a.m)?,
            };
            say!("{}", report.value);
            say!("{}", json(&report));
            Ok(())
        }
        Command::Gamma(a) => {
            let m = a.matrix.load(seed, false)?;
            let method = if a.method == "heuristic" { GammaMethod::Heuristic } else { GammaMethod::Exact };
            let cert = gamma_km(&m, a.k, a.m, method, a.restarts, &RandomStream::new(seed).child(1))?;
            say!("{}", cert.value);
            say!("{}", json(&cert));
            Ok(())
        }
        Command::Sigma(a) => {
            let c = load_config(cli, || {
                let mut c = ExperimentConfig::new(ExperimentKind::Sigma);
                c.spec = Some(a.spec.spec()?);
                c.trials = Some(a.trials);
                if let Some(p) = &a.p {
                    c.grids.p = p.clone();
                }
                Ok(c)
            })?;
            run_config(&c)
        }
        Command::Tails(a) => {
            let c = load_config(cli, || {
                let mut c = ExperimentConfig::new(ExperimentKind::Tails);
                c.spec = Some(a.spec.spec()?);
                c.trials = Some(a.trials);
                c.sizes.m = a.m;
                c.sizes.l = a.l;
                c.options.statistic =
                    Some(if a.l.is_some() { StatisticKind::OrderStat } else { StatisticKind::ProjectionSup });
                if let Some(t) = &a.t {
                    c.grids.t = t.clone();
                }
                Ok(c)
            })?;
            run_config(&c)
        }
        Command::Recover(a) => {
            let c = load_config(cli, || {
                let mut c = ExperimentConfig::new(ExperimentKind::Recovery);
                c.spec = Some(a.spec.spec()?);
                c.trials = Some(a.trials);
                c.sizes.n = Some(a.n);
                c.grids.m = a.m.clone();
                Ok(c)
            })?;
            run_config(&c)
        }
        Command::Bounds(a) => {
            if cli.config.is_some() || cli.out.is_some() {
                let c = load_config(cli, || {
                    let mut c = ExperimentConfig::new(ExperimentKind::Bounds);
                    c.bound = Some(BoundSection { id: a.id, params: a.params() });
                    Ok(c)
                })?;
                return run_config(&c);
            }
            let query = BoundQuery { bound_id: a.id, parameters: a.params(), profile: None };
            let value = evaluate_bound(&query)?;
            say!("{}", value.value);
            say!("{}", json(&value));
            Ok(())
        }
        Command::Selftest(a) => {
            let checks = xp::selftest(!a.trivial_only);
            let mut out = std::io::stdout().lock();
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{status} [{:?}] {}: {}", c.tag, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Err(Failure::Compute(format!("{failed} selftest checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
