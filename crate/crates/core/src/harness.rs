//! Power studies over simulated scenarios.
//!
//! A suite file is a list of `[name]` sections of `key = value` lines; a
//! `[defaults]` section applies to every scenario that follows it. `lambda`
//! and `n` accept comma-separated lists, which expand into one scenario per
//! value named `name[lambda=v]`.
//!
//! ```text
//! [defaults]
//! reps = 1000
//! B = 1000
//!
//! [sp1]
//! family = gaussian_shift
//! n = 200
//! p = 2
//! lambda = 0, 0.05, 0.10
//! tests = t2, ot-wilcox, ot-mmd
//! ```
//!
//! Each scenario draws one reference grid and one null sample per test and
//! keeps them fixed across replications. Replicate `k` draws its data from
//! RNG stream `k`, so tables are identical at any thread count.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{exceeds_null_fraction, p_value, simulate_null_cached, NullCache};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::SymmetryGroup;
use crate::points::Points;
use crate::procedures::{OneSamplePlan, OneSampleStatistic, Seeds, TestConfig, TwoSamplePlan, TwoSampleStatistic};
use crate::rng::{derive_seed, stream};
use crate::stats::{hotelling_one_sample, hotelling_two_sample, HotellingResult, Score};

/// Data-generating distribution of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `N(0, I) + λ1`.
    GaussianShift,
    /// Multivariate t with one degree of freedom, `Z/|W| + λ1`.
    T1Shift,
    /// Uniform on the unit ball, plus `λ1`.
    UniformDisk,
    /// `(2Z₁, Z₂, …, Z_p)`.
    Elliptical,
    /// Gaussian with equicorrelation `ρ`.
    Correlated,
    /// Coordinates i.i.d. `χ²(1) − 1`.
    Chisq,
    /// `X, Y ~ N(0,1)`.
    H0a,
    /// `X ~ N(2,1)`, `Y ~ N(0,1)`.
    H1a,
    /// `X ~ N(1,1.5²)`, `Y ~ N(0,1)`.
    H1b,
    /// `X ~ Exp(1)`, `Y ~ N(0,1)`.
    H1c,
    /// `X ~ N(0,1)`, `Y ~ LogNormal(0,1)`.
    H1d,
    /// `X ~ N(0, I)`, `Y ~ N(λ1, I)`.
    TwoSampleShift,
    /// `X ~ N(0, I)`, `Y ~ N(0, (1+λ)² I)`.
    TwoSampleScale,
}

impl Family {
    const ALL: [(&'static str, Family); 13] = [
        ("gaussian_shift", Family::GaussianShift),
        ("t1_shift", Family::T1Shift),
        ("uniform_disk", Family::UniformDisk),
        ("elliptical", Family::Elliptical),
        ("correlated", Family::Correlated),
        ("chisq", Family::Chisq),
        ("h0a", Family::H0a),
        ("h1a", Family::H1a),
        ("h1b", Family::H1b),
        ("h1c", Family::H1c),
        ("h1d", Family::H1d),
        ("two_sample_shift", Family::TwoSampleShift),
        ("two_sample_scale", Family::TwoSampleScale),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, f)| *f == self).map(|(n, _)| *n).unwrap_or("?")
    }

    pub fn is_two_sample(self) -> bool {
        matches!(self, Family::TwoSampleShift | Family::TwoSampleScale)
    }

    fn is_bivariate(self) -> bool {
        matches!(self, Family::H0a | Family::H1a | Family::H1b | Family::H1c | Family::H1d)
    }

    fn default_group(self) -> &'static str {
        if self.is_bivariate() {
            "permutation"
        } else {
            "spherical"
        }
    }

    fn default_tests(self) -> Vec<PowerTest> {
        if self.is_two_sample() {
            vec![PowerTest::Hotelling2, PowerTest::RankSum, PowerTest::RankMmd]
        } else if self.is_bivariate() {
            vec![PowerTest::OtMmd]
        } else {
            vec![PowerTest::T2, PowerTest::OtWilcox, PowerTest::OtMmd]
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|(n, _)| *n).collect();
                Error::invalid(format!("unknown family {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A test evaluated in a power study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerTest {
    /// One-sample Hotelling T², exact F calibration.
    #[serde(rename = "t2")]
    T2,
    /// Generalized signed-rank quadratic form.
    #[serde(rename = "ot-wilcox")]
    OtWilcox,
    /// OT-MMD symmetry statistic `T_n`.
    #[serde(rename = "ot-mmd")]
    OtMmd,
    #[serde(rename = "ranksum")]
    RankSum,
    #[serde(rename = "rank-mmd")]
    RankMmd,
    /// Two-sample Hotelling T², exact F calibration.
    #[serde(rename = "hotelling2")]
    Hotelling2,
}

impl PowerTest {
    pub fn name(self) -> &'static str {
        match self {
            PowerTest::T2 => "t2",
            PowerTest::OtWilcox => "ot-wilcox",
            PowerTest::OtMmd => "ot-mmd",
            PowerTest::RankSum => "ranksum",
            PowerTest::RankMmd => "rank-mmd",
            PowerTest::Hotelling2 => "hotelling2",
        }
    }

    fn is_two_sample(self) -> bool {
        matches!(self, PowerTest::RankSum | PowerTest::RankMmd | PowerTest::Hotelling2)
    }
}

impl FromStr for PowerTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "t2" | "hotelling" => PowerTest::T2,
            "ot-wilcox" | "signedrank" => PowerTest::OtWilcox,
            "ot-mmd" | "symmetry-mmd" => PowerTest::OtMmd,
            "ranksum" => PowerTest::RankSum,
            "rank-mmd" => PowerTest::RankMmd,
            "hotelling2" => PowerTest::Hotelling2,
            other => return Err(Error::invalid(format!("unknown test {other:?}"))),
        })
    }
}

impl fmt::Display for PowerTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a Monte Carlo null turns into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionRule {
    /// Reject when the observed statistic exceeds at least a `1 − α`
    /// fraction of the null draws.
    Table,
    /// Reject when `(1 + #{null ≥ obs})/(B + 1) ≤ α`.
    #[default]
    PValue,
}

impl FromStr for RejectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table" => Ok(RejectionRule::Table),
            "pvalue" | "p_value" | "p-value" => Ok(RejectionRule::PValue),
            other => Err(Error::invalid(format!("unknown rule {other:?} (expected table or pvalue)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub family: Family,
    /// Sample size; the second sample for two-sample families.
    pub n: usize,
    /// First sample size for two-sample families (defaults to `n`).
    pub m: Option<usize>,
    pub p: usize,
    /// Shift or scale parameter of the family.
    pub lambda: f64,
    /// Equicorrelation of the `correlated` family.
    pub rho: f64,
    pub group: String,
    pub tests: Vec<PowerTest>,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Null draws per Monte Carlo-calibrated test.
    pub b: usize,
    pub rule: RejectionRule,
}

impl Scenario {
    /// A scenario with the usual defaults for `family`.
    pub fn new(name: impl Into<String>, family: Family, n: usize, p: usize) -> Self {
        Self {
            name: name.into(),
            family,
            n,
            m: None,
            p,
            lambda: 0.0,
            rho: 0.6,
            group: family.default_group().into(),
            tests: family.default_tests(),
            reps: 1000,
            alpha: 0.05,
            seed: 0,
            b: 999,
            rule: RejectionRule::PValue,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(format!("scenario {}: {msg}", self.name)));
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha {} is not in (0, 1)", self.alpha));
        }
        if self.p == 0 || self.n == 0 || self.m == Some(0) {
            return fail("n, m and p must be positive".into());
        }
        if !self.lambda.is_finite() {
            return fail("lambda must be finite".into());
        }
        if self.family.is_bivariate() && self.p != 2 {
            return fail(format!("family {} is bivariate but p = {}", self.family, self.p));
        }
        if self.family == Family::Correlated && !(self.rho > -1.0 / (self.p as f64 - 1.0).max(1.0) && self.rho < 1.0) {
            return fail(format!("rho {} does not give a positive definite equicorrelation", self.rho));
        }
        if self.family == Family::TwoSampleScale && self.lambda <= -1.0 {
            return fail("scale families need lambda > -1".into());
        }
        if self.tests.is_empty() {
            return fail("no tests listed".into());
        }
        if self.b == 0 && self.tests.iter().any(|t| !matches!(t, PowerTest::T2 | PowerTest::Hotelling2)) {
            return fail("B must be positive".into());
        }
        for t in &self.tests {
            if t.is_two_sample() != self.family.is_two_sample() {
                return fail(format!("test {t} does not apply to family {}", self.family));
            }
        }
        if !self.family.is_two_sample() {
            SymmetryGroup::parse(&self.group, self.p)
                .map_err(|e| Error::invalid(format!("scenario {}: {e}", self.name)))?;
        }
        Ok(())
    }

    fn first_size(&self) -> usize {
        self.m.unwrap_or(self.n)
    }

    /// Replicate `k`: one sample, or the pair `(x, y)`.
    pub fn draw(&self, k: u64) -> (Points, Option<Points>) {
        let mut rng = stream(derive_seed(self.seed, "data"), k);
        if self.family.is_two_sample() {
            let x = gaussian_block(self.first_size(), self.p, &mut rng);
            let mut y = gaussian_block(self.n, self.p, &mut rng);
            for v in y.as_mut_slice() {
                match self.family {
                    Family::TwoSampleShift => *v += self.lambda,
                    _ => *v *= 1.0 + self.lambda,
                }
            }
            return (x, Some(y));
        }
        let (n, p, l) = (self.n, self.p, self.lambda);
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n {
            match self.family {
                Family::GaussianShift => data.extend((0..p).map(|_| normal(&mut rng) + l)),
                Family::T1Shift => {
                    let w = normal(&mut rng).abs();
                    data.extend((0..p).map(|_| normal(&mut rng) / w + l));
                }
                Family::UniformDisk => {
                    let dir = crate::group::uniform_direction(p, &mut rng);
                    let r = rng.random::<f64>().powf(1.0 / p as f64);
                    data.extend(dir.iter().map(|d| d * r + l));
                }
                Family::Elliptical => {
                    data.push(2.0 * normal(&mut rng));
                    data.extend((1..p).map(|_| normal(&mut rng)));
                }
                Family::Correlated => {
                    // a·Z + c·Z̄·1 has covariance a²I + (2ac + c²)/p·11ᵀ.
                    let z: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
                    let mean = z.iter().sum::<f64>() / p as f64;
                    let a = (1.0 - self.rho).sqrt();
                    let c = (1.0 + (p as f64 - 1.0) * self.rho).sqrt() - a;
                    data.extend(z.iter().map(|zj| a * zj + c * mean));
                }
                Family::Chisq => data.extend((0..p).map(|_| {
                    let z = normal(&mut rng);
                    z * z - 1.0
                })),
                Family::H0a => data.extend([normal(&mut rng), normal(&mut rng)]),
                Family::H1a => data.extend([2.0 + normal(&mut rng), normal(&mut rng)]),
                Family::H1b => data.extend([1.0 + 1.5 * normal(&mut rng), normal(&mut rng)]),
                Family::H1c => {
                    let e: f64 = Exp1.sample(&mut rng);
                    data.extend([e, normal(&mut rng)]);
                }
                Family::H1d => data.extend([normal(&mut rng), normal(&mut rng).exp()]),
                Family::TwoSampleShift | Family::TwoSampleScale => unreachable!(),
            }
        }
        (Points::new(data, n, p).expect("generated data are finite"), None)
    }

    fn test_config(&self, cache: Option<&NullCache>, execution: Execution) -> TestConfig {
        TestConfig {
            score: Score::Identity,
            b: self.b,
            seed: self.seed,
            execution,
            cache: cache.cloned(),
            ..TestConfig::default()
        }
    }

    fn cell_key(&self, test: PowerTest) -> String {
        let mut h = Sha256::new();
        h.update(b"cell-v1\0");
        h.update(serde_json::to_vec(self).expect("scenario serializes"));
        h.update(test.name().as_bytes());
        hex::encode(&h.finalize()[..16])
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_block<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Points {
    Points::new((0..n * p).map(|_| normal(rng)).collect(), n, p).expect("finite")
}

/// One cell of a power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub test: String,
    pub power: f64,
    pub se: f64,
    pub reps: usize,
    /// The scenario's λ, kept for plotting.
    pub lambda: f64,
}

impl PowerRow {
    fn new(scenario: &Scenario, test: PowerTest, rejections: usize) -> Self {
        let power = rejections as f64 / scenario.reps as f64;
        Self {
            scenario: scenario.name.clone(),
            test: test.name().into(),
            power,
            se: (power * (1.0 - power) / scenario.reps as f64).sqrt(),
            reps: scenario.reps,
            lambda: scenario.lambda,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn get(&self, scenario: &str, test: &str) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.test == test)
    }

    /// `scenario,test,power,se,reps`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scenario", "test", "power", "se", "reps"])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.test.clone(),
                format!("{:.4}", r.power),
                format!("{:.4}", r.se),
                r.reps.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Long format for gnuplot: one block per test, separated by two blank
    /// lines so that `index` selects a test.
    pub fn to_gnuplot(&self) -> String {
        let mut tests: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !tests.contains(&r.test.as_str()) {
                tests.push(&r.test);
            }
        }
        let mut out = String::from("# scenario test lambda power se reps\n");
        for (i, t) in tests.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            for r in self.rows.iter().filter(|r| r.test == *t) {
                out.push_str(&format!(
                    "\"{}\" {} {} {:.4} {:.4} {}\n",
                    r.scenario, r.test, r.lambda, r.power, r.se, r.reps
                ));
            }
        }
        out
    }
}

/// Options shared by every scenario of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub execution: Execution,
    /// Null samples and finished cells are stored here; `None` disables
    /// both caches.
    pub cache: Option<NullCache>,
}

impl RunOptions {
    fn cell_path(&self, key: &str) -> Option<PathBuf> {
        self.cache.as_ref().map(|c| c.dir().join("cells").join(format!("cell-{key}.json")))
    }

    fn load_cell(&self, key: &str) -> Option<PowerRow> {
        let text = fs::read_to_string(self.cell_path(key)?).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store_cell(&self, key: &str, row: &PowerRow) -> Result<()> {
        let Some(path) = self.cell_path(key) else {
            return Ok(());
        };
        let dir = path.parent().expect("cell path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer(&mut tmp, row)?;
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

/// Outcome of [`run_suite`].
#[derive(Debug, Clone, Default)]
pub struct SuiteRun {
    pub table: PowerTable,
    /// Cells simulated in this run.
    pub computed: usize,
    /// Cells read back from the cell cache.
    pub reused: usize,
}

fn decide(observed: f64, null: &[f64], s: &Scenario) -> Result<bool> {
    Ok(match s.rule {
        RejectionRule::Table => exceeds_null_fraction(observed, null, s.alpha),
        RejectionRule::PValue => p_value(observed, null)? <= s.alpha,
    })
}

/// Hotelling decision for one replicate; a numerical failure counts as a
/// non-rejection and is tallied in `failures`.
fn hotelling_decision(r: Result<HotellingResult>, alpha: f64, failures: &AtomicUsize) -> Result<bool> {
    match r {
        Ok(h) => Ok(h.p_value <= alpha),
        Err(e) if e.is_numerical() => {
            failures.fetch_add(1, Ordering::Relaxed);
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

/// Rejection counts for `tests` in scenario `s`.
fn rejections(s: &Scenario, tests: &[PowerTest], opts: &RunOptions) -> Result<Vec<usize>> {
    let exec = opts.execution;
    let failures = AtomicUsize::new(0);
    let failures = &failures;
    let cfg = s.test_config(opts.cache.as_ref(), exec);
    let null_seed = Seeds::from_master(s.seed).null;
    let inner = Execution::Sequential;

    type Decider<'a> = Box<dyn Fn(u64) -> Result<Vec<bool>> + Sync + 'a>;
    let decide_rep: Decider = if s.family.is_two_sample() {
        let plan = TwoSamplePlan::new(s.first_size(), s.n, s.p, &cfg)?;
        let mut nulls = Vec::new();
        for t in tests {
            let which = match t {
                PowerTest::RankSum => Some(TwoSampleStatistic::RankSum),
                PowerTest::RankMmd => Some(TwoSampleStatistic::RankMmd),
                _ => None,
            };
            nulls.push(match which {
                Some(w) => Some((w, simulate_null_cached(&plan.null_model(w, s.b, null_seed), opts.cache.as_ref(), exec)?)),
                None => None,
            });
        }
        Box::new(move |k| {
            let (x, y) = s.draw(k);
            let y = y.expect("two-sample family");
            let ranks = if nulls.iter().any(Option::is_some) {
                Some(plan.ranks(&x, &y)?)
            } else {
                None
            };
            tests
                .iter()
                .zip(&nulls)
                .map(|(t, null)| match null {
                    Some((w, null)) => {
                        let (xr, yr) = ranks.as_ref().expect("ranks computed");
                        decide(plan.statistic(*w, xr, yr)?, null, s)
                    }
                    None => {
                        debug_assert_eq!(*t, PowerTest::Hotelling2);
                        hotelling_decision(hotelling_two_sample(&x, &y), s.alpha, failures)
                    }
                })
                .collect()
        })
    } else {
        let group = SymmetryGroup::parse(&s.group, s.p)?;
        let needs_plan = tests.iter().any(|t| *t != PowerTest::T2);
        let plan = if needs_plan {
            Some(OneSamplePlan::new(&group, s.n, &TestConfig { execution: inner, ..cfg.clone() })?)
        } else {
            None
        };
        let mut nulls = Vec::new();
        for t in tests {
            let which = match t {
                PowerTest::OtWilcox => Some(OneSampleStatistic::SignedRank),
                PowerTest::OtMmd => Some(OneSampleStatistic::SymmetryMmd),
                _ => None,
            };
            nulls.push(match (which, &plan) {
                (Some(w), Some(plan)) => Some((w, simulate_null_cached(&plan.null_model(w, s.b, null_seed), opts.cache.as_ref(), exec)?)),
                _ => None,
            });
        }
        let signs_seed = derive_seed(s.seed, "replicate-signs");
        Box::new(move |k| {
            let (x, _) = s.draw(k);
            let a = match &plan {
                Some(plan) => Some(plan.rank(&x, &mut stream(signs_seed, k))?),
                None => None,
            };
            tests
                .iter()
                .zip(&nulls)
                .map(|(_, null)| match null {
                    Some((w, null)) => {
                        let plan = plan.as_ref().expect("plan built");
                        let a = a.as_ref().expect("ranks computed");
                        let obs = match w {
                            OneSampleStatistic::SignedRank => plan.signed_rank(a)?.1,
                            OneSampleStatistic::SymmetryMmd => plan.symmetry_mmd(a)?,
                        };
                        decide(obs, null, s)
                    }
                    None => hotelling_decision(hotelling_one_sample(&x), s.alpha, failures),
                })
                .collect()
        })
    };

    let per_rep: Vec<Result<Vec<bool>>> = exec.map(s.reps, |k| decide_rep(k as u64));
    let mut counts = vec![0usize; tests.len()];
    for r in per_rep {
        for (c, hit) in counts.iter_mut().zip(r?) {
            *c += hit as usize;
        }
    }
    let failed = failures.load(Ordering::Relaxed);
    if failed > 0 {
        log::warn!("{}: Hotelling T² was numerically unstable in {failed} of {} replicates, counted as not rejected", s.name, s.reps);
    }
    Ok(counts)
}

/// Empirical power of every test listed in `s`.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<Vec<PowerRow>> {
    s.validate()?;
    let counts = rejections(s, &s.tests, opts)?;
    Ok(s.tests.iter().zip(counts).map(|(t, c)| PowerRow::new(s, *t, c)).collect())
}

/// Runs every scenario, reusing finished cells from the cache directory.
pub fn run_suite(scenarios: &[Scenario], opts: &RunOptions) -> Result<SuiteRun> {
    for s in scenarios {
        s.validate()?;
    }
    let mut run = SuiteRun::default();
    for (i, s) in scenarios.iter().enumerate() {
        let keys: Vec<String> = s.tests.iter().map(|t| s.cell_key(*t)).collect();
        let cached: Vec<Option<PowerRow>> = keys.iter().map(|k| opts.load_cell(k)).collect();
        let missing: Vec<PowerTest> = s
            .tests
            .iter()
            .zip(&cached)
            .filter(|(_, c)| c.is_none())
            .map(|(t, _)| *t)
            .collect();
        log::info!(
            "[{}/{}] {} ({} cached, {} to run)",
            i + 1,
            scenarios.len(),
            s.name,
            s.tests.len() - missing.len(),
            missing.len()
        );
        let mut fresh = if missing.is_empty() {
            Vec::new()
        } else {
            rejections(s, &missing, opts)?
                .into_iter()
                .zip(&missing)
                .map(|(c, t)| PowerRow::new(s, *t, c))
                .collect()
        }
        .into_iter();
        for ((t, key), c) in s.tests.iter().zip(&keys).zip(cached) {
            let row = match c {
                Some(row) => {
                    run.reused += 1;
                    row
                }
                None => {
                    let row = fresh.next().expect("one fresh row per missing test");
                    debug_assert_eq!(row.test, t.name());
                    if let Err(e) = opts.store_cell(key, &row) {
                        log::warn!("could not write cell cache for {}/{t}: {e}", s.name);
                    }
                    run.computed += 1;
                    row
                }
            };
            run.table.rows.push(row);
        }
    }
    Ok(run)
}

/// Header line, name and `(line, key, value)` entries of one suite section.
type Section = (usize, String, Vec<(usize, String, String)>);

/// Parses a suite file; `origin` names the source in error messages.
pub fn parse_suite(text: &str, origin: &str) -> Result<Vec<Scenario>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut defaults: Vec<(usize, String, String)> = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    let mut in_defaults = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "section header must end with ']'".into()))?
                .trim();
            if name.is_empty() {
                return Err(err(line_no, "empty section name".into()));
            }
            in_defaults = name == "defaults";
            if !in_defaults {
                if sections.iter().any(|(_, n, _)| n == name) {
                    return Err(err(line_no, format!("duplicate scenario {name:?}")));
                }
                let inherited = defaults.clone();
                sections.push((line_no, name.to_string(), inherited));
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, found {line:?}")))?;
        let entry = (line_no, k.trim().to_string(), v.trim().to_string());
        if in_defaults {
            defaults.push(entry);
        } else {
            sections
                .last_mut()
                .ok_or_else(|| err(line_no, "key outside of a section".into()))?
                .2
                .push(entry);
        }
    }

    let mut out = Vec::new();
    for (header_line, name, entries) in sections {
        let get = |key: &str| entries.iter().rev().find(|(_, k, _)| k.eq_ignore_ascii_case(key));
        let family_entry = get("family").ok_or_else(|| err(header_line, format!("scenario {name:?} has no family")))?;
        let family: Family = family_entry.2.parse().map_err(|e: Error| err(family_entry.0, e.to_string()))?;
        let num = |key: &str| -> Result<Option<(usize, f64)>> {
            match get(key) {
                None => Ok(None),
                Some((l, _, v)) => v
                    .parse::<f64>()
                    .map(|x| Some((*l, x)))
                    .map_err(|_| err(*l, format!("{key}: {v:?} is not a number"))),
            }
        };
        let count = |key: &str| -> Result<Option<usize>> {
            match get(key) {
                None => Ok(None),
                Some((l, _, v)) => v
                    .parse::<usize>()
                    .map(Some)
                    .map_err(|_| err(*l, format!("{key}: {v:?} is not a nonnegative integer"))),
            }
        };
        for (l, k, _) in &entries {
            const KEYS: [&str; 13] = ["family", "n", "m", "p", "lambda", "rho", "group", "tests", "reps", "alpha", "seed", "b", "rule"];
            if !KEYS.contains(&k.to_ascii_lowercase().as_str()) {
                return Err(err(*l, format!("unknown key {k:?}")));
            }
        }
        let list = |key: &str| -> Vec<(usize, String)> {
            get(key)
                .map(|(l, _, v)| v.split(',').map(|s| (*l, s.trim().to_string())).filter(|(_, s)| !s.is_empty()).collect())
                .unwrap_or_default()
        };
        let p = count("p")?.unwrap_or(2);
        let mut base = Scenario::new(name.clone(), family, 0, p);
        base.m = count("m")?;
        if let Some((_, r)) = num("rho")? {
            base.rho = r;
        }
        if let Some((_, g)) = get("group").map(|(l, _, v)| (*l, v.clone())) {
            base.group = g;
        }
        if let Some((l, _, v)) = get("tests") {
            base.tests = v
                .split(',')
                .map(|t| t.parse())
                .collect::<Result<_>>()
                .map_err(|e| err(*l, e.to_string()))?;
        }
        if let Some(r) = count("reps")? {
            base.reps = r;
        }
        if let Some((_, a)) = num("alpha")? {
            base.alpha = a;
        }
        if let Some((l, _, v)) = get("seed") {
            base.seed = v.parse().map_err(|_| err(*l, format!("seed: {v:?} is not a u64")))?;
        }
        if let Some(b) = count("b")? {
            base.b = b;
        }
        if let Some((l, _, v)) = get("rule") {
            base.rule = v.parse().map_err(|e: Error| err(*l, e.to_string()))?;
        }

        let ns = list("n");
        if ns.is_empty() {
            return Err(err(header_line, format!("scenario {name:?} has no n")));
        }
        let lambdas = {
            let l = list("lambda");
            if l.is_empty() {
                vec![(header_line, "0".to_string())]
            } else {
                l
            }
        };
        let expand_n = ns.len() > 1;
        let expand_l = lambdas.len() > 1;
        for (nl, nv) in &ns {
            let n: usize = nv.parse().map_err(|_| err(*nl, format!("n: {nv:?} is not a positive integer")))?;
            for (ll, lv) in &lambdas {
                let lambda: f64 = lv.parse().map_err(|_| err(*ll, format!("lambda: {lv:?} is not a number")))?;
                let mut s = base.clone();
                s.n = n;
                s.lambda = lambda;
                let mut tags = Vec::new();
                if expand_n {
                    tags.push(format!("n={nv}"));
                }
                if expand_l {
                    tags.push(format!("lambda={lv}"));
                }
                if !tags.is_empty() {
                    s.name = format!("{name}[{}]", tags.join(","));
                }
                s.validate().map_err(|e| err(header_line, e.to_string()))?;
                out.push(s);
            }
        }
    }
    Ok(out)
}

pub fn load_suite(path: impl AsRef<Path>) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_suite(&text, &path.display().to_string())
}
