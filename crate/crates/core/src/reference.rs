//! Reference grids `h_1, …, h_n` discretizing a reference law `ν`.
//!
//! A grid is drawn once and then held fixed; ranks are points of the grid.
//! For symmetry tests the grid must meet each group orbit at most once,
//! which the folded generators guarantee by construction and
//! [`ReferenceGrid::verify_fundamental_domain`] checks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{uniform_direction, GroupKind, SymmetryGroup};
use crate::points::{norm_sq, Points};
use crate::rng::{derive_seed, seeded};
use crate::stats::Kernel;

/// Law the grid discretizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `N(0, I_p)`.
    Gaussian,
    /// `Unif[0, 1]^p`.
    UniformCube,
    /// Uniform direction times an independent `Unif[0, 1]` radius.
    SphericalUniform,
    /// `(‖Z‖, 0, …, 0)` with `Z ~ N(0, I_p)`; symmetrizes to `N(0, I_p)`
    /// under the orthogonal group.
    ChiNormAxis,
    /// `N(0, I_p)` sorted coordinatewise; symmetrizes to `N(0, I_p)` under
    /// coordinate permutations.
    SortedGaussian,
    /// `N(0, I_p)` mapped to a canonical orbit representative of the group,
    /// so that the symmetrized law is again `N(0, I_p)`.
    FoldedGaussian(GroupKind),
    /// Regular center-outward grid, `n = n_r · n_s + n_0`.
    CenterOutward { n_r: usize, n_s: usize, n_0: usize },
    /// Loaded from a file.
    Custom,
}

impl Generator {
    /// The default reference for testing symmetry under `group`: a grid in a
    /// fundamental domain whose symmetrized law is `N(0, I_p)`.
    pub fn symmetric_default(group: &SymmetryGroup) -> Generator {
        match group.kind() {
            GroupKind::Trivial => Generator::Gaussian,
            GroupKind::Spherical => Generator::ChiNormAxis,
            GroupKind::Permutation => Generator::SortedGaussian,
            k => Generator::FoldedGaussian(k.clone()),
        }
    }

    /// Whether `S H`, with `H` from this generator and `S` Haar on `group`,
    /// is exactly `N(0, I_p)`.
    pub fn symmetrizes_to_standard_normal(&self, group: &SymmetryGroup) -> bool {
        match self {
            Generator::Gaussian => true,
            Generator::ChiNormAxis => *group.kind() == GroupKind::Spherical,
            Generator::SortedGaussian => *group.kind() == GroupKind::Permutation,
            Generator::FoldedGaussian(k) => k == group.kind(),
            _ => false,
        }
    }

    /// Whether the generator describes an i.i.d. law that can be sampled.
    pub fn is_random(&self) -> bool {
        !matches!(self, Generator::CenterOutward { .. } | Generator::Custom)
    }

    /// Group whose orbits the generator's output meets at most once.
    fn fundamental_domain_for(&self, p: usize) -> Result<Option<SymmetryGroup>> {
        Ok(match self {
            Generator::ChiNormAxis => Some(SymmetryGroup::new(GroupKind::Spherical, p)?),
            Generator::SortedGaussian => Some(SymmetryGroup::new(GroupKind::Permutation, p)?),
            Generator::FoldedGaussian(k) => Some(SymmetryGroup::new(k.clone(), p)?),
            _ => None,
        })
    }

    /// One i.i.d. draw from the generator's law.
    pub fn draw<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<Vec<f64>> {
        let gauss = |rng: &mut R| -> Vec<f64> { (0..p).map(|_| StandardNormal.sample(rng)).collect() };
        Ok(match self {
            Generator::Gaussian => gauss(rng),
            Generator::UniformCube => (0..p).map(|_| rng.random::<f64>()).collect(),
            Generator::SphericalUniform => {
                let r: f64 = rng.random();
                uniform_direction(p, rng).into_iter().map(|v| v * r).collect()
            }
            Generator::ChiNormAxis => {
                let mut h = vec![0.0; p];
                h[0] = norm_sq(&gauss(rng)).sqrt();
                h
            }
            Generator::SortedGaussian => {
                let mut z = gauss(rng);
                z.sort_by(f64::total_cmp);
                z
            }
            Generator::FoldedGaussian(k) => {
                SymmetryGroup::new(k.clone(), p)?.canonicalize(&gauss(rng))
            }
            Generator::CenterOutward { .. } | Generator::Custom => {
                return Err(Error::invalid(format!("generator {self} has no i.i.d. law to draw from")))
            }
        })
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Gaussian => f.write_str("gaussian"),
            Generator::UniformCube => f.write_str("uniform_cube"),
            Generator::SphericalUniform => f.write_str("spherical_uniform"),
            Generator::ChiNormAxis => f.write_str("chi_norm_axis"),
            Generator::SortedGaussian => f.write_str("sorted_gaussian"),
            Generator::FoldedGaussian(k) => {
                // Reuse the group's canonical spelling; dimension is irrelevant
                // except for the reflection vector, which carries its own.
                let p = match k {
                    GroupKind::Reflection { u } => u.len(),
                    GroupKind::Zonal { .. } => 3,
                    _ => 1,
                };
                match SymmetryGroup::new(k.clone(), p) {
                    Ok(g) => write!(f, "folded_gaussian:{g}"),
                    Err(_) => f.write_str("folded_gaussian:?"),
                }
            }
            Generator::CenterOutward { n_r, n_s, n_0 } => {
                write!(f, "center_outward:{n_r},{n_s},{n_0}")
            }
            Generator::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        Ok(match (name, arg) {
            ("gaussian", None) => Generator::Gaussian,
            ("uniform_cube", None) => Generator::UniformCube,
            ("spherical_uniform", None) => Generator::SphericalUniform,
            ("chi_norm_axis", None) => Generator::ChiNormAxis,
            ("sorted_gaussian", None) => Generator::SortedGaussian,
            ("folded_gaussian", Some(g)) => {
                // Dimension-free parse: the group description carries any vector it needs.
                let p = match g.split_once(':') {
                    Some((_, v)) => v.split(',').count(),
                    None if g.starts_with("zonal") => 3,
                    None => 1,
                };
                Generator::FoldedGaussian(SymmetryGroup::parse(g, p)?.kind().clone())
            }
            ("center_outward", Some(a)) => {
                let v: Vec<usize> = a
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| Error::invalid(format!("bad integer {t:?}"))))
                    .collect::<Result<_>>()?;
                match v[..] {
                    [n_r, n_s, n_0] => Generator::CenterOutward { n_r, n_s, n_0 },
                    _ => return Err(Error::invalid("center_outward:<n_r>,<n_s>,<n_0>")),
                }
            }
            ("custom", None) => Generator::Custom,
            _ => return Err(Error::invalid(format!("unknown reference generator {s:?}"))),
        })
    }
}

/// A fixed, immutable reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    points: Points,
    generator: Generator,
    seed: Option<u64>,
    fundamental_domain_for: Option<SymmetryGroup>,
}

/// Threshold under which two grid orbits are reported as nearly coincident.
const ORBIT_WARN: f64 = 1e-16;

impl ReferenceGrid {
    /// Wraps explicit points. Rows must be distinct; when `group` is given
    /// the one-point-per-orbit condition is verified.
    pub fn from_points(
        points: Points,
        generator: Generator,
        seed: Option<u64>,
        group: Option<SymmetryGroup>,
    ) -> Result<Self> {
        if let Some((i, j)) = points.find_duplicate_rows() {
            return Err(Error::invalid(format!("grid rows {i} and {j} coincide")));
        }
        let grid = Self {
            points,
            generator,
            seed,
            fundamental_domain_for: None,
        };
        match group {
            Some(g) => {
                grid.verify_fundamental_domain(&g)?;
                Ok(Self {
                    fundamental_domain_for: Some(g),
                    ..grid
                })
            }
            None => Ok(grid),
        }
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.n()
    }

    pub fn p(&self) -> usize {
        self.points.p()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn fundamental_domain_for(&self) -> Option<&SymmetryGroup> {
        self.fundamental_domain_for.as_ref()
    }

    /// Checks that no two rows share a `group` orbit, i.e. every pairwise
    /// orbit cost is strictly positive. Returns the smallest such cost.
    pub fn verify_fundamental_domain(&self, group: &SymmetryGroup) -> Result<f64> {
        if group.dim() != self.p() {
            return Err(Error::invalid(format!(
                "group acts on dimension {}, grid has dimension {}",
                group.dim(),
                self.p()
            )));
        }
        if self.fundamental_domain_for.as_ref() == Some(group) {
            return Ok(f64::NAN);
        }
        let n = self.n();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let c = group.orbit_cost_unchecked(self.row(i), self.row(j));
                if c <= 0.0 {
                    return Err(Error::FundamentalDomain(format!(
                        "grid points {i} and {j} lie on the same {} orbit",
                        group.name()
                    )));
                }
                min = min.min(c);
            }
        }
        if min < ORBIT_WARN {
            log::warn!(
                "grid orbits nearly coincide under {} (min pairwise orbit cost {min:.3e}); ranks may be ill-conditioned",
                group.name()
            );
        }
        Ok(min)
    }

    /// Stable content hash of the grid points, used in cache keys.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.p() as u64).to_le_bytes());
        for v in self.points.as_slice() {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Writes the grid as CSV with header `h1,…,hp`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.p()).map(|k| format!("h{k}")))?;
        for r in self.points.rows() {
            w.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a custom grid. When `group` is given, a grid that places two
    /// points on one orbit is rejected.
    pub fn read_csv(path: impl AsRef<Path>, group: Option<SymmetryGroup>) -> Result<Self> {
        let points = crate::ingest::load_sample_csv(path)?;
        Self::from_points(points, Generator::Custom, None, group)
    }
}

/// Draws `n` i.i.d. points from `generator` in dimension `p`.
pub fn make_grid(generator: &Generator, n: usize, p: usize, seed: u64) -> Result<ReferenceGrid> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("grid needs n ≥ 1 and p ≥ 1"));
    }
    if let Generator::CenterOutward { n_r, n_s, n_0 } = *generator {
        if n_r * n_s + n_0 != n {
            return Err(Error::invalid(format!(
                "center-outward factorization {n_r}·{n_s}+{n_0} does not equal n = {n}"
            )));
        }
        return center_outward_grid(n_r, n_s, n_0, p, seed);
    }
    let group = generator.fundamental_domain_for(p)?;
    let draw_all = |seed: u64| -> Result<Points> {
        let mut rng = seeded(seed);
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n {
            data.extend(generator.draw(p, &mut rng)?);
        }
        Points::new(data, n, p)
    };
    let attempt = |points: Points| {
        ReferenceGrid::from_points(points, generator.clone(), Some(seed), group.clone())
    };
    match attempt(draw_all(seed)?) {
        Ok(g) => Ok(g),
        // Duplicates have probability zero; regenerate once with a derived seed.
        Err(Error::InvalidInput(_) | Error::FundamentalDomain(_)) => {
            attempt(draw_all(derive_seed(seed, "grid-retry"))?)
        }
        Err(e) => Err(e),
    }
}

/// `n_s` unit directions spread as evenly as possible on `S^{p−1}`.
fn regular_directions(n_s: usize, p: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match p {
        2 => (0..n_s)
            .map(|s| {
                let t = 2.0 * PI * s as f64 / n_s as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice.
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n_s)
                .map(|s| {
                    let z = 1.0 - (2.0 * s as f64 + 1.0) / n_s as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let t = golden * s as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            // Halton points pushed through the Gaussian quantile function and
            // projected onto the sphere.
            let primes = first_primes(p);
            (1..=n_s)
                .map(|s| {
                    let z: Vec<f64> = primes
                        .iter()
                        .map(|&b| {
                            let u = radical_inverse(s, b);
                            -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
                        })
                        .collect();
                    let nrm = norm_sq(&z).sqrt();
                    z.into_iter().map(|v| v / nrm).collect()
                })
                .collect()
        }
    }
}

fn first_primes(k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut c = 2;
    while out.len() < k {
        if out.iter().all(|&q| c % q != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Center-outward grid: radii `r/(n_r+1)` for `r = 1..=n_r` times `n_s`
/// regular directions, plus `n_0` points at radius `1/(2(n_r+1))` on
/// directions sampled without replacement.
pub fn center_outward_grid(
    n_r: usize,
    n_s: usize,
    n_0: usize,
    p: usize,
    seed: u64,
) -> Result<ReferenceGrid> {
    if n_r == 0 || n_s == 0 {
        return Err(Error::invalid("center-outward grid needs n_r ≥ 1 and n_s ≥ 1"));
    }
    if p < 2 {
        return Err(Error::invalid("center-outward grid needs p ≥ 2"));
    }
    if n_0 > n_s {
        return Err(Error::invalid(format!(
            "cannot draw n_0 = {n_0} extra points from {n_s} directions without replacement"
        )));
    }
    let dirs = regular_directions(n_s, p);
    let scale = (n_r + 1) as f64;
    let mut data = Vec::with_capacity((n_r * n_s + n_0) * p);
    for r in 1..=n_r {
        for d in &dirs {
            data.extend(d.iter().map(|v| v * r as f64 / scale));
        }
    }
    let mut rng = seeded(seed);
    let mut extra: Vec<usize> = sample_indices(&mut rng, n_s, n_0).into_vec();
    extra.sort_unstable();
    for s in extra {
        data.extend(dirs[s].iter().map(|v| v / (2.0 * scale)));
    }
    let points = Points::new(data, n_r * n_s + n_0, p)?;
    ReferenceGrid::from_points(
        points,
        Generator::CenterOutward { n_r, n_s, n_0 },
        Some(seed),
        None,
    )
}

/// Base law before symmetrization.
#[derive(Debug, Clone)]
pub enum SymmetrizedBase {
    /// The empirical law of a grid (gives `ν_{n,S}`).
    Grid(ReferenceGrid),
    /// An analytic generator in dimension `p` (gives `ν_S`).
    Analytic { generator: Generator, p: usize },
}

/// The law of `S·H` with `S` Haar on the group and `H` from the base law.
#[derive(Debug, Clone)]
pub struct SymmetrizedReference {
    pub base: SymmetrizedBase,
    pub group: SymmetryGroup,
}

/// Monte Carlo summaries of a symmetrized reference law.
#[derive(Debug, Clone)]
pub struct SymmetrizedMoments {
    pub draws: Points,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub covariance_se: DMatrix<f64>,
    /// `E K(U, U')` from disjoint pairs of draws.
    pub kernel_mean: f64,
    pub kernel_mean_se: f64,
}

impl SymmetrizedReference {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let h = match &self.base {
            SymmetrizedBase::Grid(g) => g.row(rng.random_range(0..g.n())).to_vec(),
            SymmetrizedBase::Analytic { generator, p } => generator.draw(*p, rng)?,
        };
        Ok(self.group.sample_orbit_uniform(&h, rng))
    }
}

/// `m` i.i.d. draws from a symmetrized reference with moment estimates and
/// their standard errors.
pub fn symmetrized_moments<R: Rng + ?Sized>(
    reference: &SymmetrizedReference,
    kernel: &Kernel,
    m: usize,
    rng: &mut R,
) -> Result<SymmetrizedMoments> {
    if m < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let p = reference.group.dim();
    let mut data = Vec::with_capacity(m * p);
    for _ in 0..m {
        data.extend(reference.draw(rng)?);
    }
    let draws = Points::from_raw(data, m, p);
    let mf = m as f64;
    let mean = draws.column_means();
    let mut covariance = DMatrix::<f64>::zeros(p, p);
    let mut second = DMatrix::<f64>::zeros(p, p);
    let mut var = vec![0.0; p];
    for r in draws.rows() {
        for a in 0..p {
            let da = r[a] - mean[a];
            var[a] += da * da;
            for b in 0..p {
                let prod = da * (r[b] - mean[b]);
                covariance[(a, b)] += prod;
                second[(a, b)] += prod * prod;
            }
        }
    }
    covariance /= mf - 1.0;
    let covariance_se = DMatrix::from_fn(p, p, |a, b| {
        let e2 = second[(a, b)] / mf;
        let c = covariance[(a, b)] * (mf - 1.0) / mf;
        ((e2 - c * c).max(0.0) / mf).sqrt()
    });
    let mean_se = var.iter().map(|v| (v / (mf - 1.0) / mf).sqrt()).collect();

    let pairs = m / 2;
    let kv: Vec<f64> = (0..pairs)
        .map(|k| kernel.eval(draws.row(2 * k), draws.row(2 * k + 1)))
        .collect();
    let kernel_mean = kv.iter().sum::<f64>() / pairs as f64;
    let kernel_var = if pairs > 1 {
        kv.iter().map(|v| (v - kernel_mean).powi(2)).sum::<f64>() / (pairs - 1) as f64
    } else {
        0.0
    };
    Ok(SymmetrizedMoments {
        draws,
        mean,
        mean_se,
        covariance,
        covariance_se,
        kernel_mean,
        kernel_mean_se: (kernel_var / pairs as f64).sqrt(),
    })
}
