use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::gamma::GammaMethod;
use crate::recovery::experiment::{delta_m_ensemble, quantile, recovery_experiment, DeltaEnsemble, DeltaMethod, RecoveryReport};
use crate::rng::RandomStream;
use crate::sampler::{sample_many, DistributionSpec};
use crate::tails::bounds::{evaluate_bound, BoundId, BoundQuery};
use crate::tails::curve::{sample_statistic, survival_curve, TailCurve, TailStatistic};
use crate::tails::fit::{fit_constant, FitResult};
use crate::tails::sigma::{paouris_ratio, PaourisRatio, SearchMode, SigmaProfile};
use crate::xp::config::{ExperimentConfig, ExperimentKind, MethodKind, StatisticKind};

pub const TOOL: &str = "lcrip";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files written by a run plus a one-line summary.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Owns the output directory; every artifact goes through here.
struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }
}

/// The manifest: the resolved configuration minus the fields that must not
/// influence results (worker count, output location).
pub fn manifest(resolved: &ExperimentConfig) -> serde_json::Value {
    let mut config = resolved.clone();
    config.output = Default::default();
    json!({ "tool": TOOL, "version": VERSION, "config": config })
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// CSV with columns `x, value, ci_low, ci_high, trials`; zero-hit survival
/// estimates are written as `<1/trials`.
pub fn curve_csv(curve: &TailCurve) -> String {
    let mut s = String::from("t,value,ci_low,ci_high,trials\n");
    for i in 0..curve.t_grid.len() {
        let value = if curve.censored(i) {
            format!("<1/{}", curve.trials)
        } else {
            num(curve.survival[i])
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(curve.t_grid[i]),
            value,
            num(curve.ci_low[i]),
            num(curve.ci_high[i]),
            curve.trials
        );
    }
    s
}

/// Whitespace-separated columns for gnuplot; censored points carry flag 1.
pub fn curve_dat(curve: &TailCurve) -> String {
    let mut s = format!("# {}\n# trials {}\n# t threshold survival ci_low ci_high censored\n", curve.descriptor, curve.trials);
    for i in 0..curve.t_grid.len() {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            num(curve.t_grid[i]),
            num(curve.thresholds[i]),
            num(curve.survival[i]),
            num(curve.ci_low[i]),
            num(curve.ci_high[i]),
            u8::from(curve.censored(i))
        );
    }
    s
}

fn profile_csv(p: &[f64], values: &[f64], trials: usize) -> String {
    let mut s = String::from("p,value,ci_low,ci_high,trials\n");
    for (p, v) in p.iter().zip(values) {
        let _ = writeln!(s, "{},{},,,{}", num(*p), num(*v), trials);
    }
    s
}

fn profile_dat(title: &str, p: &[f64], values: &[f64]) -> String {
    let mut s = format!("# {title}\n# p value\n");
    for (p, v) in p.iter().zip(values) {
        let _ = writeln!(s, "{} {}", num(*p), num(*v));
    }
    s
}

/// Runs `config` and writes its artifacts. The manifest is written first;
/// when a later stage fails, everything completed so far stays on disk and
/// the error is returned.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let resolved = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.workers())
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    let dir = resolved.out_dir();
    let mut w = Writer::new(&dir)?;
    w.json("manifest.json", &manifest(&resolved))?;
    let summary = pool.install(|| execute(&resolved, &mut w))?;
    Ok(RunReport { dir, files: w.files, summary })
}

fn execute(c: &ExperimentConfig, w: &mut Writer) -> Result<String> {
    let root = RandomStream::new(c.seed);
    let trials = c.trials.unwrap_or_default();
    match c.kind {
        ExperimentKind::Isotropy => isotropy(c, trials, &root, w),
        ExperimentKind::Sigma => sigma(c, trials, &root, w),
        ExperimentKind::Paouris => paouris(c, trials, &root, w),
        ExperimentKind::Tails => tails(c, trials, &root, w),
        ExperimentKind::Gamma => gamma(c, trials, &root, w),
        ExperimentKind::Rip => rip(c, trials, &root, w),
        ExperimentKind::Recovery => recovery(c, trials, &root, w),
        ExperimentKind::Bounds => bounds(c, &root, w),
    }
}

fn spec(c: &ExperimentConfig) -> &DistributionSpec {
    c.spec.as_ref().expect("resolved")
}

fn isotropy(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let spec = spec(c);
    let d = spec.dimension();
    let xs = sample_many(spec, trials, root)?;
    let mut mean = vec![0.0; d];
    let mut cov = vec![0.0; d * d];
    for x in xs.chunks(d) {
        for i in 0..d {
            mean[i] += x[i];
            for j in i..d {
                cov[i * d + j] += x[i] * x[j];
            }
        }
    }
    let n = trials as f64;
    let mut max_cov = 0.0f64;
    let mut max_mean = 0.0f64;
    let mut csv = String::from("i,j,second_moment\n");
    for i in 0..d {
        mean[i] /= n;
        max_mean = max_mean.max(mean[i].abs());
        for j in i..d {
            let v = cov[i * d + j] / n;
            let target = if i == j { 1.0 } else { 0.0 };
            max_cov = max_cov.max((v - target).abs());
            let _ = writeln!(csv, "{i},{j},{}", num(v));
        }
    }
    w.text("isotropy.csv", &csv)?;
    w.json(
        "isotropy.json",
        &json!({ "N": d, "trials": trials, "max_cov_deviation": max_cov, "max_mean_deviation": max_mean }),
    )?;
    Ok(format!("max |cov - id| = {max_cov}, max |mean| = {max_mean}"))
}

fn sigma(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let search = c.options.search.unwrap_or(SearchMode::CanonicalPlusRandom);
    let profile = SigmaProfile::estimate(spec(c), &c.grids.p, trials, search, root)?;
    w.text("sigma.csv", &profile_csv(&profile.p_grid, &profile.values, trials))?;
    w.json("sigma.json", &profile)?;
    w.text("sigma.dat", &profile_dat("sigma_X(p)", &profile.p_grid, &profile.values))?;
    Ok(format!("sigma at p = {:?}: {:?}", profile.p_grid, profile.values))
}

fn paouris(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let mut rows: Vec<PaourisRatio> = Vec::new();
    let mut failure = None;
    for (i, &p) in c.grids.p.iter().enumerate() {
        match paouris_ratio(spec(c), p, trials, &root.child(i as u64)) {
            Ok(r) => rows.push(r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let fitted = ratios.iter().copied().fold(0.0f64, f64::max);
    w.text("paouris.csv", &profile_csv(&ps, &ratios, trials))?;
    w.json("paouris.json", &json!({ "trials": trials, "fitted_constant": fitted, "ratios": rows }))?;
    w.text("paouris.dat", &profile_dat("(E|X|^p)^(1/p) / ((E|X|^2)^(1/2) + sigma(p))", &ps, &ratios))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(format!("largest ratio (fitted constant) = {fitted}")),
    }
}

fn write_curve(w: &mut Writer, stem: &str, curve: &TailCurve) -> Result<()> {
    w.text(&format!("{stem}.csv"), &curve_csv(curve))?;
    w.json(&format!("{stem}.json"), curve)?;
    w.text(&format!("{stem}.dat"), &curve_dat(curve))
}

fn tails(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let spec = spec(c);
    let big_n = spec.dimension() as f64;
    let (statistic, bound, params) = match c.options.statistic.expect("resolved") {
        StatisticKind::ProjectionSup => {
            let m = c.sizes.m.expect("resolved");
            let params = BTreeMap::from([("m".to_string(), m as f64), ("N".to_string(), big_n)]);
            (TailStatistic::ProjectionSup { m }, BoundId::Thm3, params)
        }
        StatisticKind::OrderStat => {
            let l = c.sizes.l.expect("resolved");
            let params = BTreeMap::from([
                ("l".to_string(), l as f64),
                ("N".to_string(), big_n),
                ("sigma_upper".to_string(), 1.0),
            ]);
            (TailStatistic::OrderStat { l }, BoundId::Thm5, params)
        }
    };
    let samples = sample_statistic(spec, &statistic, trials, root)?;
    let scale = statistic.scale(spec.dimension())?;
    let mut curve = survival_curve(&samples, &c.grids.t, scale, statistic.describe())?;
    curve.statistic = Some(statistic);
    write_curve(w, "curve", &curve)?;
    let fit = fit_constant(&curve, bound, &params, None)?;
    w.json("fit.json", &json!({ "fit": fit, "parameters": params }))?;
    Ok(format!("{}: fitted {} constant {:?}", curve.descriptor, bound, fit.constant))
}

fn gamma(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let spec = spec(c);
    let (n, k, m) = (c.sizes.n.expect("resolved"), c.sizes.k.expect("resolved"), c.sizes.m.expect("resolved"));
    let method = c.options.method.and_then(MethodKind::gamma).unwrap_or(GammaMethod::Exact);
    let restarts = c.options.restarts.unwrap_or(20);
    let statistic = TailStatistic::GammaKm { n, k, m, method, restarts };
    let lambda = statistic.scale(spec.dimension())?;
    let values = sample_statistic(spec, &statistic, trials, root)?;
    let mut curve = survival_curve(&values, &c.grids.t, lambda, statistic.describe())?;
    curve.statistic = Some(statistic);
    write_curve(w, "curve", &curve)?;

    let mut csv = String::from("trial,value,ratio\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{}", num(*v), num(v / lambda));
    }
    w.text("gamma_values.csv", &csv)?;

    let ratios: Vec<f64> = values.iter().map(|v| v / lambda).collect();
    let q90 = quantile(&ratios, 0.9);
    let exceed3 = ratios.iter().filter(|r| **r >= 3.0).count() as f64 / trials as f64;
    let params = BTreeMap::from([
        ("k".to_string(), k as f64),
        ("m".to_string(), m as f64),
        ("n".to_string(), n as f64),
        ("N".to_string(), spec.dimension() as f64),
    ]);
    let fit: FitResult = fit_constant(&curve, BoundId::Thm7, &params, None)?;
    w.json(
        "summary.json",
        &json!({
            "lambda": lambda,
            "q90_ratio": q90,
            "p_exceed_3lambda": exceed3,
            "fit": fit,
            "lower_bound": method == GammaMethod::Heuristic,
        }),
    )?;
    Ok(format!("lambda = {lambda}, q90(Gamma/lambda) = {q90}, P(Gamma >= 3 lambda) = {exceed3}"))
}

fn rip(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let method = match c.options.method {
        Some(MethodKind::SupportSampled) => DeltaMethod::SupportSampled { supports: c.options.supports.unwrap_or(100_000) },
        _ => DeltaMethod::Exact,
    };
    let mut done: Vec<DeltaEnsemble> = Vec::new();
    let mut failure = None;
    'outer: for (a, &n) in c.grids.n.iter().enumerate() {
        for (b, &m) in c.grids.m.iter().enumerate() {
            let stream = root.child(a as u64).child(b as u64);
            match delta_m_ensemble(spec(c), n, m, trials, method, &stream) {
                Ok(e) => done.push(e),
                Err(e) => {
                    failure = Some(e);
                    break 'outer;
                }
            }
        }
    }
    let mut values = String::from("n,N,m,trial,value\n");
    let mut summary = String::from("n,N,m,trials,median,q90,lower_bound\n");
    for e in &done {
        for (t, v) in e.values.iter().enumerate() {
            let _ = writeln!(values, "{},{},{},{t},{}", e.n, e.big_n, e.m, num(*v));
        }
        let _ = writeln!(summary, "{},{},{},{},{},{},{}", e.n, e.big_n, e.m, e.values.len(), num(e.median), num(e.q90), e.lower_bound);
    }
    w.text("delta.csv", &values)?;
    w.text("summary.csv", &summary)?;
    w.json("summary.json", &done)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(done
            .iter()
            .map(|e| format!("n={} m={}: median delta = {}", e.n, e.m, e.median))
            .collect::<Vec<_>>()
            .join("; ")),
    }
}

fn recovery(c: &ExperimentConfig, trials: usize, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let mut done: Vec<RecoveryReport> = Vec::new();
    let mut failure = None;
    'outer: for (a, &n) in c.grids.n.iter().enumerate() {
        for (b, &m) in c.grids.m.iter().enumerate() {
            let stream = root.child(a as u64).child(b as u64);
            match recovery_experiment(spec(c), n, m, trials, &stream) {
                Ok(r) => done.push(r),
                Err(e) => {
                    failure = Some(e);
                    break 'outer;
                }
            }
        }
    }
    let mut jsonl = String::new();
    let mut summary = String::from("n,N,m,trials,success_rate,ci_low,ci_high\n");
    for r in &done {
        for rec in &r.records {
            jsonl.push_str(&serde_json::to_string(rec).map_err(|e| Error::Parse(e.to_string()))?);
            jsonl.push('\n');
        }
        let _ = writeln!(summary, "{},{},{},{},{},{},{}", r.n, r.big_n, r.m, r.trials, num(r.success_rate), num(r.ci_low), num(r.ci_high));
    }
    w.text("trials.jsonl", &jsonl)?;
    w.text("summary.csv", &summary)?;
    let mut dat = String::from("# n N m success_rate ci_low ci_high\n");
    for r in &done {
        let _ = writeln!(dat, "{} {} {} {} {} {}", r.n, r.big_n, r.m, num(r.success_rate), num(r.ci_low), num(r.ci_high));
    }
    w.text("summary.dat", &dat)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(done
            .iter()
            .map(|r| format!("n={} m={}: success rate {}", r.n, r.m, r.success_rate))
            .collect::<Vec<_>>()
            .join("; ")),
    }
}

fn bounds(c: &ExperimentConfig, root: &RandomStream, w: &mut Writer) -> Result<String> {
    let section = c.bound.as_ref().expect("resolved");
    let mut query = BoundQuery::new(section.id);
    for (name, v) in c.constants.iter().chain(&section.params) {
        query.parameters.insert(name.clone(), *v);
    }
    if let Some(spec) = &c.spec {
        if matches!(section.id, BoundId::Thm4 | BoundId::Thm5) {
            let trials = c.trials.unwrap_or_default().max(1000);
            let search = c.options.search.unwrap_or(SearchMode::CanonicalPlusRandom);
            query.profile = Some(SigmaProfile::estimate(spec, &c.grids.p, trials, search, root)?);
        }
    }
    let value = evaluate_bound(&query)?;
    w.json("bounds.json", &value)?;
    w.text("bounds.csv", &format!("bound_id,value\n{},{}\n", value.bound_id, num(value.value)))?;
    Ok(format!("{} = {}", value.bound_id, value.value))
}
