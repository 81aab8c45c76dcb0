use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{GroupKind, SymmetryGroup};
use crate::reference::{Generator, ReferenceGrid};

use super::kernel::Score;
use super::linalg::Precision;

/// How a score covariance was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceSource {
    ClosedForm,
    /// Estimated from `draws` Monte Carlo draws; `max_se` is the largest
    /// entrywise standard error.
    MonteCarlo { draws: usize, max_se: f64 },
}

/// Covariance of the effective reference distribution: `J(H)` for two-sample
/// statistics, `S J(H)` with `S` Haar on the group for one-sample ones.
#[derive(Debug, Clone)]
pub struct ScoreCovariance {
    pub matrix: DMatrix<f64>,
    pub source: CovarianceSource,
}

impl ScoreCovariance {
    pub fn precision(&self) -> Result<Precision> {
        Precision::new(&self.matrix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    ClosedForm,
    MonteCarlo(usize),
    /// Closed form when available, otherwise Monte Carlo with the given
    /// number of draws.
    Auto(usize),
}

fn closed_form(generator: &Generator, p: usize, score: Score, group: Option<&SymmetryGroup>) -> Option<DMatrix<f64>> {
    let id = DMatrix::<f64>::identity(p, p);
    let trivial = group.is_none_or(|g| *g.kind() == GroupKind::Trivial);
    match (generator, score) {
        (g, Score::Identity) if group.is_some_and(|grp| g.symmetrizes_to_standard_normal(grp)) => Some(id),
        (Generator::Gaussian, Score::Identity) if trivial => Some(id),
        // Φ(Z) ~ Unif(0, 1), variance 1/12.
        (Generator::Gaussian, Score::NormalCdf) if trivial => Some(id / 12.0),
        (Generator::UniformCube, Score::Identity) if trivial => Some(id / 12.0),
        // E‖X‖² = E U² = 1/3 spread evenly over p coordinates.
        (Generator::SphericalUniform, Score::Identity) if trivial => Some(id / (3.0 * p as f64)),
        _ => None,
    }
}

/// Covariance of the effective reference distribution. With `group` set this
/// is the one-sample version (law of `S J(H)`); otherwise the two-sample one
/// (law of `J(H)`). Monte Carlo draws of `H` come from the generator when it
/// has an i.i.d. law and from the grid's empirical law otherwise.
pub fn erd_covariance<R: Rng + ?Sized>(
    grid: &ReferenceGrid,
    score: Score,
    group: Option<&SymmetryGroup>,
    mode: CovarianceMode,
    rng: &mut R,
) -> Result<ScoreCovariance> {
    let p = grid.p();
    if let Some(g) = group {
        if g.dim() != p {
            return Err(Error::invalid("group and grid dimensions differ"));
        }
    }
    let closed = closed_form(grid.generator(), p, score, group);
    let draws = match (mode, closed) {
        (CovarianceMode::ClosedForm | CovarianceMode::Auto(_), Some(matrix)) => {
            return Ok(ScoreCovariance {
                matrix,
                source: CovarianceSource::ClosedForm,
            })
        }
        (CovarianceMode::ClosedForm, None) => {
            return Err(Error::Unsupported(format!(
                "no closed-form covariance for reference {} with score {score}{}",
                grid.generator(),
                group.map(|g| format!(" under the {} group", g.name())).unwrap_or_default()
            )))
        }
        (CovarianceMode::MonteCarlo(m) | CovarianceMode::Auto(m), _) => m,
    };
    if draws < 2 {
        return Err(Error::invalid("Monte Carlo covariance needs at least 2 draws"));
    }
    let iid = grid.generator().is_random();
    let mut sum = vec![0.0; p];
    let mut outer = DMatrix::<f64>::zeros(p, p);
    let mut fourth = DMatrix::<f64>::zeros(p, p);
    for _ in 0..draws {
        let h = if iid {
            grid.generator().draw(p, rng)?
        } else {
            grid.row(rng.random_range(0..grid.n())).to_vec()
        };
        let mut v = score.apply(&h);
        if let Some(g) = group {
            v = g.sample_element(rng).apply(g, &v);
        }
        for a in 0..p {
            sum[a] += v[a];
            for b in 0..p {
                let prod = v[a] * v[b];
                outer[(a, b)] += prod;
                fourth[(a, b)] += prod * prod;
            }
        }
    }
    let m = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let matrix = DMatrix::from_fn(p, p, |a, b| (outer[(a, b)] - m * mean[a] * mean[b]) / (m - 1.0));
    let max_se = (0..p)
        .flat_map(|a| (0..p).map(move |b| (a, b)))
        .map(|(a, b)| {
            let e2 = outer[(a, b)] / m;
            ((fourth[(a, b)] / m - e2 * e2).max(0.0) / m).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(ScoreCovariance {
        matrix,
        source: CovarianceSource::MonteCarlo { draws, max_se },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::make_grid;
    use crate::rng::seeded;

    #[test]
    fn closed_forms() {
        let g = make_grid(&Generator::Gaussian, 10, 2, 1).unwrap();
        let mut rng = seeded(0);
        let id = erd_covariance(&g, Score::Identity, None, CovarianceMode::ClosedForm, &mut rng).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(2, 2));
        let phi = erd_covariance(&g, Score::NormalCdf, None, CovarianceMode::ClosedForm, &mut rng).unwrap();
        assert_eq!(phi.matrix, DMatrix::identity(2, 2) / 12.0);
        let sph = SymmetryGroup::parse("spherical", 2).unwrap();
        let chi = make_grid(&Generator::ChiNormAxis, 10, 2, 1).unwrap();
        let erd1 = erd_covariance(&chi, Score::Identity, Some(&sph), CovarianceMode::ClosedForm, &mut rng).unwrap();
        assert_eq!(erd1.matrix, DMatrix::identity(2, 2));
        assert!(matches!(
            erd_covariance(&chi, Score::Identity, None, CovarianceMode::ClosedForm, &mut rng),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn monte_carlo_matches_closed_forms() {
        let mut rng = seeded(4);
        for (generator, score, expected) in [
            (Generator::Gaussian, Score::NormalCdf, 1.0 / 12.0),
            (Generator::UniformCube, Score::Identity, 1.0 / 12.0),
            (Generator::SphericalUniform, Score::Identity, 1.0 / 6.0),
        ] {
            let g = make_grid(&generator, 10, 2, 1).unwrap();
            let c = erd_covariance(&g, score, None, CovarianceMode::MonteCarlo(200_000), &mut rng).unwrap();
            let CovarianceSource::MonteCarlo { max_se, .. } = c.source else {
                panic!("expected Monte Carlo")
            };
            for a in 0..2 {
                for b in 0..2 {
                    let e = if a == b { expected } else { 0.0 };
                    assert!((c.matrix[(a, b)] - e).abs() < 4.0 * max_se + 1e-4, "{generator} {a}{b}");
                }
            }
        }
    }

    #[test]
    fn folded_reference_symmetrizes_to_identity() {
        let grp = SymmetryGroup::parse("central", 3).unwrap();
        let g = make_grid(&Generator::symmetric_default(&grp), 10, 3, 1).unwrap();
        let c = erd_covariance(&g, Score::Identity, Some(&grp), CovarianceMode::MonteCarlo(100_000), &mut seeded(2)).unwrap();
        assert!((c.matrix.clone() - DMatrix::<f64>::identity(3, 3)).amax() < 0.03);
    }
}
