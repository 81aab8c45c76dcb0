use crate::error::{Error, Result};
use crate::group::SymmetryGroup;
use crate::points::{norm_sq, Points};
use crate::ranks::RankAssignment;
use crate::reference::{ReferenceGrid, SymmetrizedMoments};

use super::kernel::{Kernel, Score};
use super::linalg::Precision;

/// `W_n = n^{−1/2} Σ Q̂ᵢ J(R_n(xᵢ))`. With the identity score this is
/// `n^{−1/2} Σ Ûᵢ`. Other scores are only accepted for groups that permute
/// or flip coordinates, and need the per-observation signs.
pub fn signed_rank_stat(assignment: &RankAssignment, group: &SymmetryGroup, score: Score) -> Result<Vec<f64>> {
    let n = assignment.signed_ranks.n();
    let p = assignment.signed_ranks.p();
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mut w = vec![0.0; p];
    match score {
        Score::Identity => {
            for u in assignment.signed_ranks.rows() {
                w.iter_mut().zip(u).for_each(|(a, b)| *a += b);
            }
        }
        _ => {
            if !group.is_componentwise() {
                return Err(Error::Unsupported(format!(
                    "score {score} is only defined for coordinate sign/permutation groups, not {}",
                    group.name()
                )));
            }
            let signs = assignment
                .signs
                .as_ref()
                .ok_or_else(|| Error::invalid("non-identity scores need the OT signs"))?;
            for (q, r) in signs.iter().zip(assignment.absolute_ranks.rows()) {
                let v = q.apply(group, &score.apply(r));
                w.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
        }
    }
    let s = (n as f64).sqrt();
    Ok(w.into_iter().map(|v| v / s).collect())
}

/// `Wᵀ Σ⁻¹ W`.
pub fn signed_rank_quadratic_form(w: &[f64], precision: &Precision) -> Result<f64> {
    if w.len() != precision.dim() {
        return Err(Error::invalid("covariance dimension does not match W"));
    }
    Ok(precision.quadratic_form(w))
}

/// `E K(u, U)` for the Gaussian kernel and `U ~ N(0, I_p)`.
pub fn gaussian_mean_embedding(u: &[f64], sigma: f64) -> f64 {
    let p = u.len() as f64;
    let a = 2.0 * sigma + 1.0;
    a.powf(-p / 2.0) * (-sigma * norm_sq(u) / a).exp()
}

/// `(p, σ)` pairs over which the closed forms are checked against Monte
/// Carlo: the default bandwidth plus a narrow and a wide one per dimension.
pub fn closed_form_sweep() -> Vec<(usize, f64)> {
    [1usize, 2, 5, 50]
        .into_iter()
        .flat_map(|p| [super::default_sigma(p), 0.5, 2.0].map(|s| (p, s)))
        .collect()
}

/// `E K(U, U')` for the Gaussian kernel and `U, U'` i.i.d. `N(0, I_p)`.
pub fn gaussian_self_expectation(sigma: f64, p: usize) -> f64 {
    (4.0 * sigma + 1.0).powf(-(p as f64) / 2.0)
}

/// The symmetrized reference law the signed-ranks are compared with.
#[derive(Debug, Clone)]
pub enum SymmetricLaw {
    /// `N(0, I_p)`; Gaussian-kernel expectations are in closed form.
    StandardNormal,
    /// Any law, represented by Monte Carlo draws and an estimate of
    /// `E K(U, U')`.
    Sampled { draws: Points, kernel_mean: f64 },
}

impl SymmetricLaw {
    pub fn from_moments(m: &SymmetrizedMoments) -> Self {
        SymmetricLaw::Sampled {
            draws: m.draws.clone(),
            kernel_mean: m.kernel_mean,
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, SymmetricLaw::Sampled { .. })
    }
}

/// `n⁻² Σᵢⱼ K(uᵢ, uⱼ)` including the diagonal.
fn gram_mean(u: &Points, kernel: &Kernel) -> f64 {
    let n = u.n();
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        let ui = u.row(i);
        diag += kernel.eval(ui, ui);
        for j in i + 1..n {
            off += kernel.eval(ui, u.row(j));
        }
    }
    (diag + 2.0 * off) / (n * n) as f64
}

/// `T_n = MMD²(n⁻¹ Σ δ_{Ûᵢ}, ν_S)` in the biased (V-statistic) form.
pub fn symmetry_mmd_stat(signed_ranks: &Points, kernel: &Kernel, law: &SymmetricLaw) -> Result<f64> {
    let n = signed_ranks.n();
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let p = signed_ranks.p();
    let (cross, self_term) = match (kernel, law) {
        (Kernel::Gaussian { sigma }, SymmetricLaw::StandardNormal) => {
            let cross: f64 = signed_ranks.rows().map(|u| gaussian_mean_embedding(u, *sigma)).sum();
            (cross / n as f64, gaussian_self_expectation(*sigma, p))
        }
        (_, SymmetricLaw::StandardNormal) => {
            return Err(Error::Unsupported(format!(
                "{} kernel has no closed-form expectation under N(0, I); use a Monte Carlo reference",
                kernel.name()
            )))
        }
        (_, SymmetricLaw::Sampled { draws, kernel_mean }) => {
            if draws.p() != p {
                return Err(Error::invalid("reference draws have the wrong dimension"));
            }
            let m = draws.n() as f64;
            let cross: f64 = signed_ranks
                .rows()
                .map(|u| draws.rows().map(|d| kernel.eval(u, d)).sum::<f64>() / m)
                .sum();
            (cross / n as f64, *kernel_mean)
        }
    };
    Ok(gram_mean(signed_ranks, kernel) + self_term - 2.0 * cross)
}

/// `n · MMD²(n⁻¹ Σ δ_{Ûᵢ}, ν_{n,S})` where `ν_{n,S}` puts equal mass on the
/// `n·|G|` points `Q hⱼ`. Only finite groups are supported; the
/// grid-only term is computed once at construction.
#[derive(Debug, Clone)]
pub struct RecenteredMmd {
    kernel: Kernel,
    atoms: Points,
    atom_term: f64,
}

impl RecenteredMmd {
    pub fn new(grid: &ReferenceGrid, group: &SymmetryGroup, kernel: Kernel) -> Result<Self> {
        if group.dim() != grid.p() {
            return Err(Error::invalid("group and grid dimensions differ"));
        }
        let elements = group.elements().map_err(|e| match e {
            Error::Unsupported(m) => Error::Unsupported(format!("recentered statistic needs a small finite group: {m}")),
            e => e,
        })?;
        let (n, p, g) = (grid.n(), grid.p(), elements.len());
        let mut data = Vec::with_capacity(n * g * p);
        for q in &elements {
            for h in grid.points().rows() {
                data.extend(q.apply(group, h));
            }
        }
        let atoms = Points::from_raw(data, n * g, p);
        let total = (n * g) as f64;
        let atom_term = if kernel.is_invariant_under(group) {
            // Σ_{Q,Q'} K(Qa, Q'b) = |G| Σ_Q K(a, Qb) for invariant kernels.
            let mut s = 0.0;
            for h in grid.points().rows() {
                for b in atoms.rows() {
                    s += kernel.eval(h, b);
                }
            }
            s * g as f64 / (total * total)
        } else {
            gram_mean(&atoms, &kernel)
        };
        Ok(Self {
            kernel,
            atoms,
            atom_term,
        })
    }

    pub fn atoms(&self) -> &Points {
        &self.atoms
    }

    pub fn stat(&self, signed_ranks: &Points) -> Result<f64> {
        let n = signed_ranks.n();
        if n == 0 || signed_ranks.p() != self.atoms.p() {
            return Err(Error::invalid("signed-ranks do not match the reference atoms"));
        }
        let na = self.atoms.n() as f64;
        let cross: f64 = signed_ranks
            .rows()
            .map(|u| self.atoms.rows().map(|a| self.kernel.eval(u, a)).sum::<f64>())
            .sum::<f64>()
            / (n as f64 * na);
        Ok(n as f64 * (gram_mean(signed_ranks, &self.kernel) - 2.0 * cross + self.atom_term))
    }
}
