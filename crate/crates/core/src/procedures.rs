//! End-to-end test procedures: reference grid, ranks, statistic, calibration
//! and report.
//!
//! A *plan* fixes everything that does not depend on the data (grid, kernel,
//! covariance, reference law) so that the same plan can score many samples,
//! as the power harness does.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde_json::json;

use crate::calibration::{
    asymptotic_pvalue_chisq, p_value, simulate_null_cached, Calibration, NullCache, NullModel,
    NullStatistic, NullSummary, TestReport,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{GroupKind, SymmetryGroup};
use crate::points::Points;
use crate::ranks::{pooled_rank_map, signed_rank_map_with, RankAssignment, RankOptions};
use crate::reference::{
    make_grid, symmetrized_moments, Generator, ReferenceGrid, SymmetrizedBase, SymmetrizedReference,
};
use crate::rng::{derive_seed, seeded};
use crate::stats::{
    default_sigma, erd_covariance, hotelling_one_sample, hotelling_two_sample, rank_mmd_stat,
    ranksum_stat, signed_rank_stat, symmetry_mmd_stat, CovarianceMode, Kernel,
    Precision, Score, ScoreCovariance, SymmetricLaw,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationMode {
    #[default]
    MonteCarlo,
    /// χ²_p limit; only for the quadratic-form statistics.
    Asymptotic,
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "monte_carlo" | "monte-carlo" => Ok(CalibrationMode::MonteCarlo),
            "asymptotic" | "chisq" => Ok(CalibrationMode::Asymptotic),
            _ => Err(Error::invalid(format!("unknown calibration {s:?} (expected mc or asymptotic)"))),
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationMode::MonteCarlo => "mc",
            CalibrationMode::Asymptotic => "asymptotic",
        })
    }
}

/// Settings shared by all procedures.
#[derive(Debug, Clone)]
pub struct TestConfig {
    /// Reference law; defaults to a Gaussian grid for two-sample tests and
    /// to [`Generator::symmetric_default`] for symmetry tests.
    pub reference: Option<Generator>,
    /// Explicit grid, overriding `reference`.
    pub grid: Option<ReferenceGrid>,
    pub score: Score,
    /// Defaults to the Gaussian kernel with `σ = 1/(4p)`.
    pub kernel: Option<Kernel>,
    pub b: usize,
    pub seed: u64,
    pub calibration: CalibrationMode,
    pub execution: Execution,
    pub cache: Option<NullCache>,
    /// Monte Carlo draws for covariances without a closed form.
    pub covariance_draws: usize,
    /// Monte Carlo draws representing a symmetrized reference law without
    /// closed-form kernel expectations.
    pub reference_draws: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            reference: None,
            grid: None,
            score: Score::Identity,
            kernel: None,
            b: 999,
            seed: 0,
            calibration: CalibrationMode::MonteCarlo,
            execution: Execution::default(),
            cache: None,
            covariance_draws: 100_000,
            reference_draws: 2000,
        }
    }
}

/// Independent seeds for the grid, the null simulation, the sign draws and
/// auxiliary Monte Carlo.
#[derive(Debug, Clone, Copy)]
pub struct Seeds {
    pub grid: u64,
    pub null: u64,
    pub signs: u64,
    pub aux: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            grid: derive_seed(seed, "grid"),
            null: derive_seed(seed, "null"),
            signs: derive_seed(seed, "signs"),
            aux: derive_seed(seed, "aux"),
        }
    }
}

fn resolve_grid(cfg: &TestConfig, default: Generator, n: usize, p: usize, seed: u64, group: Option<&SymmetryGroup>) -> Result<ReferenceGrid> {
    match &cfg.grid {
        Some(g) => {
            if g.n() != n || g.p() != p {
                return Err(Error::invalid(format!(
                    "reference grid is {}×{}, data needs {n}×{p}",
                    g.n(),
                    g.p()
                )));
            }
            if let Some(grp) = group {
                g.verify_fundamental_domain(grp)?;
            }
            Ok(g.clone())
        }
        None => make_grid(cfg.reference.as_ref().unwrap_or(&default), n, p, seed),
    }
}

fn resolve_kernel(cfg: &TestConfig, p: usize) -> Result<Kernel> {
    cfg.kernel
        .unwrap_or(Kernel::Gaussian { sigma: default_sigma(p) })
        .validated()
}

fn covariance_label(c: &ScoreCovariance) -> serde_json::Value {
    serde_json::to_value(&c.source).unwrap_or(serde_json::Value::Null)
}

/// Which one-sample statistic to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneSampleStatistic {
    /// `Wᵀ Σ⁻¹ W`.
    SignedRank,
    /// `T_n`.
    SymmetryMmd,
}

/// Data-independent part of a symmetry test.
#[derive(Debug, Clone)]
pub struct OneSamplePlan {
    pub group: SymmetryGroup,
    pub grid: ReferenceGrid,
    pub kernel: Kernel,
    pub law: SymmetricLaw,
    pub score: Score,
    pub covariance: ScoreCovariance,
    precision: Precision,
    execution: Execution,
}

impl OneSamplePlan {
    pub fn new(group: &SymmetryGroup, n: usize, cfg: &TestConfig) -> Result<Self> {
        let p = group.dim();
        if n == 0 {
            return Err(Error::invalid("empty sample"));
        }
        if cfg.score != Score::Identity && !group.is_componentwise() {
            return Err(Error::Unsupported(format!(
                "score {} with the {} group; only the identity score is defined for this group",
                cfg.score,
                group.name()
            )));
        }
        let seeds = Seeds::from_master(cfg.seed);
        let grid = resolve_grid(cfg, Generator::symmetric_default(group), n, p, seeds.grid, Some(group))?;
        if grid.fundamental_domain_for() != Some(group) && *group.kind() != GroupKind::Trivial {
            grid.verify_fundamental_domain(group)?;
        }
        let kernel = resolve_kernel(cfg, p)?;
        let mut aux = seeded(seeds.aux);
        let law = if matches!(kernel, Kernel::Gaussian { .. }) && grid.generator().symmetrizes_to_standard_normal(group) {
            SymmetricLaw::StandardNormal
        } else {
            let base = if grid.generator().is_random() {
                SymmetrizedBase::Analytic {
                    generator: grid.generator().clone(),
                    p,
                }
            } else {
                SymmetrizedBase::Grid(grid.clone())
            };
            let reference = SymmetrizedReference {
                base,
                group: group.clone(),
            };
            let m = symmetrized_moments(&reference, &kernel, cfg.reference_draws.max(2), &mut aux)?;
            SymmetricLaw::from_moments(&m)
        };
        let covariance = erd_covariance(&grid, cfg.score, Some(group), CovarianceMode::Auto(cfg.covariance_draws), &mut aux)?;
        let precision = covariance.precision()?;
        Ok(Self {
            group: group.clone(),
            grid,
            kernel,
            law,
            score: cfg.score,
            covariance,
            precision,
            execution: cfg.execution,
        })
    }

    pub fn rank<R: Rng + ?Sized>(&self, sample: &Points, rng: &mut R) -> Result<RankAssignment> {
        let opts = RankOptions {
            execution: self.execution,
            compute_signs: self.score != Score::Identity,
        };
        signed_rank_map_with(sample, &self.grid, &self.group, opts, rng)
    }

    /// `(W, Wᵀ Σ⁻¹ W)`.
    pub fn signed_rank(&self, a: &RankAssignment) -> Result<(Vec<f64>, f64)> {
        let w = signed_rank_stat(a, &self.group, self.score)?;
        let q = self.precision.quadratic_form(&w);
        Ok((w, q))
    }

    pub fn symmetry_mmd(&self, a: &RankAssignment) -> Result<f64> {
        symmetry_mmd_stat(&a.signed_ranks, &self.kernel, &self.law)
    }

    pub fn null_model(&self, which: OneSampleStatistic, b: usize, seed: u64) -> NullModel {
        let statistic = match which {
            OneSampleStatistic::SignedRank => NullStatistic::SignedRank {
                group: self.group.clone(),
                score: self.score,
                precision: self.precision.clone(),
            },
            OneSampleStatistic::SymmetryMmd => NullStatistic::SymmetryMmd {
                group: self.group.clone(),
                kernel: self.kernel,
                law: self.law.clone(),
            },
        };
        NullModel {
            statistic,
            grid: self.grid.clone(),
            b,
            seed,
        }
    }
}

/// Which two-sample statistic to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSampleStatistic {
    RankSum,
    RankMmd,
}

/// Data-independent part of a two-sample test.
#[derive(Debug, Clone)]
pub struct TwoSamplePlan {
    pub m: usize,
    pub grid: ReferenceGrid,
    pub score: Score,
    pub kernel: Kernel,
    pub covariance: ScoreCovariance,
    precision: Precision,
}

impl TwoSamplePlan {
    pub fn new(m: usize, n: usize, p: usize, cfg: &TestConfig) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("both samples must be nonempty"));
        }
        let seeds = Seeds::from_master(cfg.seed);
        let grid = resolve_grid(cfg, Generator::Gaussian, m + n, p, seeds.grid, None)?;
        let kernel = resolve_kernel(cfg, p)?;
        let covariance = erd_covariance(
            &grid,
            cfg.score,
            None,
            CovarianceMode::Auto(cfg.covariance_draws),
            &mut seeded(seeds.aux),
        )?;
        let precision = covariance.precision()?;
        Ok(Self {
            m,
            grid,
            score: cfg.score,
            kernel,
            covariance,
            precision,
        })
    }

    pub fn ranks(&self, x: &Points, y: &Points) -> Result<(Points, Points)> {
        if x.n() != self.m {
            return Err(Error::invalid("first sample size does not match the plan"));
        }
        pooled_rank_map(x, y, &self.grid)
    }

    pub fn statistic(&self, which: TwoSampleStatistic, xr: &Points, yr: &Points) -> Result<f64> {
        match which {
            TwoSampleStatistic::RankSum => ranksum_stat(xr, yr, self.score, &self.precision),
            TwoSampleStatistic::RankMmd => rank_mmd_stat(xr, yr, self.score, &self.kernel),
        }
    }

    pub fn null_model(&self, which: TwoSampleStatistic, b: usize, seed: u64) -> NullModel {
        let statistic = match which {
            TwoSampleStatistic::RankSum => NullStatistic::RankSum {
                m: self.m,
                score: self.score,
                precision: self.precision.clone(),
            },
            TwoSampleStatistic::RankMmd => NullStatistic::RankMmd {
                m: self.m,
                score: self.score,
                kernel: self.kernel,
            },
        };
        NullModel {
            statistic,
            grid: self.grid.clone(),
            b,
            seed,
        }
    }
}

fn monte_carlo(model: &NullModel, observed: f64, cfg: &TestConfig) -> Result<(f64, Calibration, Option<NullSummary>)> {
    let null = simulate_null_cached(model, cfg.cache.as_ref(), cfg.execution)?;
    Ok((
        p_value(observed, &null)?,
        Calibration::MonteCarlo { b: model.b },
        NullSummary::from_sample(&null),
    ))
}

fn report(test: &str, statistic: &str, value: f64, cal: (f64, Calibration, Option<NullSummary>), cfg: &TestConfig, details: serde_json::Value) -> TestReport {
    TestReport {
        test: test.into(),
        statistic: statistic.into(),
        value,
        p_value: cal.0,
        calibration: cal.1,
        null_summary: cal.2,
        seed: cfg.seed,
        details,
        config: serde_json::Value::Null,
    }
}

fn check_two(x: &Points, y: &Points) -> Result<()> {
    if x.p() != y.p() {
        return Err(Error::invalid(format!(
            "samples have dimensions {} and {}",
            x.p(),
            y.p()
        )));
    }
    Ok(())
}

/// Generalized Wilcoxon rank-sum test.
pub fn ranksum_test(x: &Points, y: &Points, cfg: &TestConfig) -> Result<TestReport> {
    check_two(x, y)?;
    let plan = TwoSamplePlan::new(x.n(), y.n(), x.p(), cfg)?;
    let (xr, yr) = plan.ranks(x, y)?;
    let t = plan.statistic(TwoSampleStatistic::RankSum, &xr, &yr)?;
    let cal = match cfg.calibration {
        CalibrationMode::MonteCarlo => {
            let model = plan.null_model(TwoSampleStatistic::RankSum, cfg.b, Seeds::from_master(cfg.seed).null);
            monte_carlo(&model, t, cfg)?
        }
        CalibrationMode::Asymptotic => {
            let df = x.p() as u32;
            (asymptotic_pvalue_chisq(t, df)?, Calibration::AsymptoticChisq { df }, None)
        }
    };
    let details = json!({
        "m": x.n(),
        "n": y.n(),
        "p": x.p(),
        "grid_hash": plan.grid.content_hash(),
        "covariance": covariance_label(&plan.covariance),
    });
    Ok(report("ranksum", "T_mn", t, cal, cfg, details))
}

/// Rank-kernel MMD two-sample test.
pub fn rank_mmd_test(x: &Points, y: &Points, cfg: &TestConfig) -> Result<TestReport> {
    check_two(x, y)?;
    if x.n() < 2 || y.n() < 2 {
        return Err(Error::invalid("rank MMD needs at least two observations per sample"));
    }
    if cfg.calibration == CalibrationMode::Asymptotic {
        return Err(Error::Unsupported("rank MMD has no chi-square limit; use --calibration mc".into()));
    }
    let plan = TwoSamplePlan::new(x.n(), y.n(), x.p(), cfg)?;
    let (xr, yr) = plan.ranks(x, y)?;
    let g = plan.statistic(TwoSampleStatistic::RankMmd, &xr, &yr)?;
    let model = plan.null_model(TwoSampleStatistic::RankMmd, cfg.b, Seeds::from_master(cfg.seed).null);
    let cal = monte_carlo(&model, g, cfg)?;
    let details = json!({
        "m": x.n(),
        "n": y.n(),
        "p": x.p(),
        "kernel": plan.kernel,
        "grid_hash": plan.grid.content_hash(),
    });
    Ok(report("rank-mmd", "gamma_mn", g, cal, cfg, details))
}

/// Generalized Wilcoxon signed-rank test of `group`-symmetry.
pub fn signed_rank_test(x: &Points, group: &SymmetryGroup, cfg: &TestConfig) -> Result<TestReport> {
    let plan = OneSamplePlan::new(group, x.n(), cfg)?;
    let seeds = Seeds::from_master(cfg.seed);
    let a = plan.rank(x, &mut seeded(seeds.signs))?;
    let (w, q) = plan.signed_rank(&a)?;
    let cal = match cfg.calibration {
        CalibrationMode::MonteCarlo => {
            let model = plan.null_model(OneSampleStatistic::SignedRank, cfg.b, seeds.null);
            monte_carlo(&model, q, cfg)?
        }
        CalibrationMode::Asymptotic => {
            let df = x.p() as u32;
            (asymptotic_pvalue_chisq(q, df)?, Calibration::AsymptoticChisq { df }, None)
        }
    };
    let details = json!({
        "n": x.n(),
        "p": x.p(),
        "group": group.to_string(),
        "w": w,
        "total_cost": a.total_cost,
        "grid_hash": plan.grid.content_hash(),
        "covariance": covariance_label(&plan.covariance),
    });
    Ok(report("signedrank", "WtSinvW", q, cal, cfg, details))
}

/// OT-MMD test of `group`-symmetry.
pub fn symmetry_mmd_test(x: &Points, group: &SymmetryGroup, cfg: &TestConfig) -> Result<TestReport> {
    if cfg.calibration == CalibrationMode::Asymptotic {
        return Err(Error::Unsupported("T_n has no chi-square limit; use --calibration mc".into()));
    }
    let plan = OneSamplePlan::new(group, x.n(), cfg)?;
    let seeds = Seeds::from_master(cfg.seed);
    let a = plan.rank(x, &mut seeded(seeds.signs))?;
    let t = plan.symmetry_mmd(&a)?;
    let model = plan.null_model(OneSampleStatistic::SymmetryMmd, cfg.b, seeds.null);
    let cal = monte_carlo(&model, t, cfg)?;
    let details = json!({
        "n": x.n(),
        "p": x.p(),
        "group": group.to_string(),
        "kernel": plan.kernel,
        "reference_law": if plan.law.is_monte_carlo() { "monte_carlo" } else { "standard_normal" },
        "total_cost": a.total_cost,
        "grid_hash": plan.grid.content_hash(),
    });
    Ok(report("symmetry-mmd", "T_n", t, cal, cfg, details))
}

/// Hotelling T²: one-sample when `y` is `None`, two-sample otherwise.
pub fn hotelling_test(x: &Points, y: Option<&Points>, cfg: &TestConfig) -> Result<TestReport> {
    let (r, test) = match y {
        Some(y) => {
            check_two(x, y)?;
            (hotelling_two_sample(x, y)?, "hotelling-two-sample")
        }
        None => (hotelling_one_sample(x)?, "hotelling-one-sample"),
    };
    let cal = (r.p_value, Calibration::ExactF { df1: r.df1, df2: r.df2 }, None);
    Ok(report(test, "T2", r.t2, cal, cfg, json!({ "f": r.f })))
}

#[cfg(test)]
pub(crate) fn covariance_is_closed(c: &ScoreCovariance) -> bool {
    c.source == crate::stats::CovarianceSource::ClosedForm
}
