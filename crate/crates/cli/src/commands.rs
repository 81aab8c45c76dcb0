use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use otrank::calibration::{NullCache, TestReport};
use otrank::harness::{load_suite, run_suite, RunOptions};
use otrank::ingest::{exchangeability_report, load_price_csv, load_sample_csv, prices_to_returns};
use otrank::procedures::{
    hotelling_test, rank_mmd_test, ranksum_test, signed_rank_test, symmetry_mmd_test, CalibrationMode, Seeds,
    TestConfig,
};
use otrank::ranks::jitter;
use otrank::reference::make_grid;
use otrank::rng::{derive_seed, seeded};
use otrank::stats::{Kernel, Score};
use otrank::{Execution, Generator, Points, ReferenceGrid, SymmetryGroup};
use serde_json::{json, Value};

use crate::{Command, Common, Format};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(otrank::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<otrank::Error> for CliError {
    fn from(e: otrank::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(command: Command) -> Result<()> {
    let threads = match &command {
        Command::Ranksum { common, .. }
        | Command::RankMmd { common, .. }
        | Command::Signedrank { common, .. }
        | Command::SymmetryMmd { common, .. }
        | Command::Hotelling { common, .. }
        | Command::Power { common, .. }
        | Command::Returns { common, .. }
        | Command::MakeGrid { common, .. } => common.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ranksum { x, y, common } => two_sample("ranksum", &x, &y, &common),
        Command::RankMmd { x, y, common } => two_sample("rank-mmd", &x, &y, &common),
        Command::Signedrank { x, common } => one_sample("signedrank", &x, &common),
        Command::SymmetryMmd { x, common } => one_sample("symmetry-mmd", &x, &common),
        Command::Hotelling { x, y, common } => hotelling(&x, y.as_deref(), &common),
        Command::Power {
            suite,
            dry_run,
            reps,
            gnuplot,
            common,
        } => power(&suite, dry_run, reps, gnuplot.as_deref(), &common),
        Command::Returns { prices, common } => returns(&prices, &common),
        Command::MakeGrid { n, p, common } => grid(n, p, &common),
    }
}

fn resolve_seed(common: &Common) -> u64 {
    common.seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn load(path: &Path) -> Result<Points> {
    if !path.exists() {
        return Err(usage(format!("{}: no such file", path.display())));
    }
    Ok(load_sample_csv(path)?)
}

fn maybe_jitter(x: Points, common: &Common, seed: u64, label: &str) -> Result<Points> {
    match common.jitter {
        Some(eps) => Ok(jitter(&x, eps, &mut seeded(derive_seed(seed, label)))?),
        None => Ok(x),
    }
}

fn parse_group(common: &Common, p: usize) -> Result<Option<SymmetryGroup>> {
    common
        .group
        .as_deref()
        .map(|g| SymmetryGroup::parse(g, p))
        .transpose()
        .map_err(|e| usage(format!("--group: {e}")))
}

/// A `--reference` value naming an existing file (or ending in `.csv`) is
/// an explicit grid; anything else is a generator.
fn parse_reference(common: &Common, group: Option<&SymmetryGroup>) -> Result<(Option<Generator>, Option<ReferenceGrid>)> {
    let Some(r) = common.reference.as_deref() else {
        return Ok((None, None));
    };
    let path = Path::new(r);
    if path.extension().is_some_and(|e| e == "csv") || path.is_file() {
        if !path.exists() {
            return Err(usage(format!("{r}: no such file")));
        }
        let grid = ReferenceGrid::read_csv(path, group.cloned())?;
        return Ok((None, Some(grid)));
    }
    let g: Generator = r.parse().map_err(|e| usage(format!("--reference: {e}")))?;
    Ok((Some(g), None))
}

fn test_config(common: &Common, seed: u64, p: usize, group: Option<&SymmetryGroup>) -> Result<TestConfig> {
    let (reference, grid) = parse_reference(common, group)?;
    let score: Score = common.score.parse().map_err(|e| usage(format!("--score: {e}")))?;
    let kernel = Kernel::from_name(&common.kernel, common.sigma, p).map_err(|e| usage(format!("--kernel: {e}")))?;
    let calibration: CalibrationMode = common
        .calibration
        .parse()
        .map_err(|e| usage(format!("--calibration: {e}")))?;
    if common.b == 0 {
        return Err(usage("--B must be at least 1"));
    }
    Ok(TestConfig {
        reference,
        grid,
        score,
        kernel: Some(kernel),
        b: common.b,
        seed,
        calibration,
        execution: Execution::Parallel,
        cache: (!common.no_cache).then(|| NullCache::new(&common.cache_dir)),
        ..TestConfig::default()
    })
}

/// The settings that determine a report, plus the argument list that
/// reproduces it. Thread count, cache and output location are left out
/// since they do not change results.
fn echo(command: &str, inputs: &[&Path], common: &Common, seed: u64, extra: &[(&str, String)]) -> Value {
    let inputs: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    let mut argv: Vec<String> = vec![command.to_string()];
    argv.extend(inputs.iter().cloned());
    let mut push = |flag: &str, v: String| {
        argv.push(flag.into());
        argv.push(v);
    };
    for (k, v) in extra {
        push(&format!("--{k}"), v.clone());
    }
    if let Some(g) = &common.group {
        push("--group", g.clone());
    }
    if let Some(r) = &common.reference {
        push("--reference", r.clone());
    }
    push("--score", common.score.clone());
    push("--kernel", common.kernel.clone());
    if let Some(s) = common.sigma {
        push("--sigma", format!("{s:?}"));
    }
    push("--B", common.b.to_string());
    push("--seed", seed.to_string());
    push("--calibration", common.calibration.clone());
    if let Some(j) = common.jitter {
        push("--jitter", format!("{j:?}"));
    }
    if let Some(f) = common.format {
        push("--format", format_name(f).into());
    }
    json!({
        "command": command,
        "inputs": inputs,
        "group": common.group,
        "reference": common.reference,
        "score": common.score,
        "kernel": common.kernel,
        "sigma": common.sigma,
        "B": common.b,
        "seed": seed,
        "calibration": common.calibration,
        "jitter": common.jitter,
        "extra": extra.iter().map(|(k, v)| (k.to_string(), Value::from(v.clone()))).collect::<serde_json::Map<_, _>>(),
        "argv": argv,
    })
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_report(mut report: TestReport, config: Value, common: &Common) -> Result<()> {
    report.config = config;
    let text = match common.format.unwrap_or(Format::Json) {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    emit(&text, common.out.as_ref())
}

fn two_sample(command: &str, xp: &Path, yp: &Path, common: &Common) -> Result<()> {
    let seed = resolve_seed(common);
    let x = maybe_jitter(load(xp)?, common, seed, "jitter-x")?;
    let y = maybe_jitter(load(yp)?, common, seed, "jitter-y")?;
    if common.group.is_some() {
        return Err(usage("--group does not apply to two-sample tests"));
    }
    let cfg = test_config(common, seed, x.p(), None)?;
    let report = match command {
        "ranksum" => ranksum_test(&x, &y, &cfg)?,
        _ => rank_mmd_test(&x, &y, &cfg)?,
    };
    emit_report(report, echo(command, &[xp, yp], common, seed, &[]), common)
}

fn one_sample(command: &str, xp: &Path, common: &Common) -> Result<()> {
    let seed = resolve_seed(common);
    let x = maybe_jitter(load(xp)?, common, seed, "jitter-x")?;
    let group = parse_group(common, x.p())?.ok_or_else(|| usage(format!("{command} needs --group")))?;
    let cfg = test_config(common, seed, x.p(), Some(&group))?;
    let report = match command {
        "signedrank" => signed_rank_test(&x, &group, &cfg)?,
        _ => symmetry_mmd_test(&x, &group, &cfg)?,
    };
    emit_report(report, echo(command, &[xp], common, seed, &[]), common)
}

fn hotelling(xp: &Path, yp: Option<&Path>, common: &Common) -> Result<()> {
    let seed = resolve_seed(common);
    let x = maybe_jitter(load(xp)?, common, seed, "jitter-x")?;
    let y = yp
        .map(|p| load(p).and_then(|y| maybe_jitter(y, common, seed, "jitter-y")))
        .transpose()?;
    let cfg = TestConfig {
        seed,
        ..TestConfig::default()
    };
    let report = hotelling_test(&x, y.as_ref(), &cfg)?;
    let inputs: Vec<&Path> = std::iter::once(xp).chain(yp).collect();
    emit_report(report, echo("hotelling", &inputs, common, seed, &[]), common)
}

fn power(suite: &Path, dry_run: bool, reps: Option<usize>, gnuplot: Option<&Path>, common: &Common) -> Result<()> {
    if !suite.exists() {
        return Err(usage(format!("{}: no such file", suite.display())));
    }
    let mut scenarios = load_suite(suite)?;
    if let Some(r) = reps {
        if r == 0 {
            return Err(usage("--reps must be at least 1"));
        }
        for s in &mut scenarios {
            s.reps = r;
        }
    }
    if let Some(seed) = common.seed {
        for s in &mut scenarios {
            s.seed = seed;
        }
    }
    if dry_run {
        let mut text = String::from("scenario,family,n,p,lambda,group,tests,reps,B,seed\n");
        for s in &scenarios {
            let tests: Vec<&str> = s.tests.iter().map(|t| t.name()).collect();
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.name,
                s.family,
                s.n,
                s.p,
                s.lambda,
                s.group,
                tests.join(" "),
                s.reps,
                s.b,
                s.seed
            ));
        }
        return emit(&text, common.out.as_ref());
    }
    let opts = RunOptions {
        execution: Execution::Parallel,
        cache: (!common.no_cache).then(|| NullCache::new(&common.cache_dir)),
    };
    let run = run_suite(&scenarios, &opts)?;
    log::info!("{} cells computed, {} reused from cache", run.computed, run.reused);
    if let Some(path) = gnuplot {
        fs::write(path, run.table.to_gnuplot())?;
    }
    let text = match common.format.unwrap_or(Format::Csv) {
        Format::Csv => run.table.to_csv()?,
        Format::Json => {
            let mut extra = Vec::new();
            if let Some(r) = reps {
                extra.push(("reps", r.to_string()));
            }
            let config = echo("power", &[suite], common, common.seed.unwrap_or(0), &extra);
            serde_json::to_string_pretty(&json!({ "config": config, "scenarios": scenarios, "rows": run.table.rows }))
                .map_err(otrank::Error::from)?
                + "\n"
        }
    };
    emit(&text, common.out.as_ref())
}

fn returns(prices: &[PathBuf], common: &Common) -> Result<()> {
    let seed = resolve_seed(common);
    if let Some(g) = &common.group {
        if g != "permutation" {
            return Err(usage("returns always tests exchangeability (--group permutation)"));
        }
    }
    let mut series = Vec::with_capacity(prices.len());
    for p in prices {
        if !p.exists() {
            return Err(usage(format!("{}: no such file", p.display())));
        }
        series.push(load_price_csv(p)?);
    }
    let mut panel = prices_to_returns(&series)?;
    panel.returns = maybe_jitter(panel.returns, common, seed, "jitter-x")?;
    let group = SymmetryGroup::parse("permutation", panel.returns.p()).ok();
    let cfg = test_config(common, seed, panel.returns.p(), group.as_ref())?;
    let report = exchangeability_report(&panel, &cfg)?;
    let inputs: Vec<&Path> = prices.iter().map(PathBuf::as_path).collect();
    emit_report(report, echo("returns", &inputs, common, seed, &[]), common)
}

fn grid(n: usize, p: usize, common: &Common) -> Result<()> {
    let seed = resolve_seed(common);
    let group = parse_group(common, p)?;
    let generator = match &common.reference {
        Some(r) => r.parse().map_err(|e| usage(format!("--reference: {e}")))?,
        None => group.as_ref().map_or(Generator::Gaussian, Generator::symmetric_default),
    };
    // Same grid seed as a test run with this master seed.
    let grid = make_grid(&generator, n, p, Seeds::from_master(seed).grid)?;
    if let Some(g) = &group {
        grid.verify_fundamental_domain(g)?;
    }
    let mut buf = Vec::new();
    grid.write_csv_to(&mut buf)?;
    emit(&String::from_utf8(buf).expect("csv is utf-8"), common.out.as_ref())
}
