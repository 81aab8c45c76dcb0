//! Empirical optimal-transport ranks, signs and signed-ranks.
//!
//! The rank map matches the `n` observations to the `n` grid points so that
//! the total squared distance is minimal. Signed-ranks quotient the cost by a
//! symmetry group: observation `i` is matched to grid point `h_{σ(i)}` at
//! cost `min_Q ‖Qᵀxᵢ − h_{σ(i)}‖²`, its sign is a minimizing `Q`, and its
//! signed-rank is `Q h_{σ(i)}`, the orbit point closest to `xᵢ`.

use rand::Rng;

use crate::assignment::{solve_assignment, solve_sorted_matching, CostMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{GroupElement, GroupKind, SymmetryGroup};
use crate::points::{norm_sq, Points};
use crate::reference::ReferenceGrid;

/// The solved transport for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RankAssignment {
    /// Observation `i` is matched to grid row `permutation[i]`.
    pub permutation: Vec<usize>,
    /// Row `i` is `R_n(xᵢ)`, a grid point.
    pub absolute_ranks: Points,
    /// Per-observation group element, when requested.
    pub signs: Option<Vec<GroupElement>>,
    /// Row `i` is `Ûᵢ`, the point of `R_n(xᵢ)`'s orbit closest to `xᵢ`.
    pub signed_ranks: Points,
    pub total_cost: f64,
}

/// Knobs for [`signed_rank_map_with`].
#[derive(Debug, Clone, Copy)]
pub struct RankOptions {
    pub execution: Execution,
    /// Draw a sign for every observation. Signed-ranks never need them, and
    /// for the orthogonal group each sign is a random `p × p` matrix.
    pub compute_signs: bool,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            compute_signs: true,
        }
    }
}

fn check_shapes(sample: &Points, grid: &ReferenceGrid) -> Result<()> {
    if sample.n() != grid.n() {
        return Err(Error::invalid(format!(
            "sample has {} rows but the reference grid has {}",
            sample.n(),
            grid.n()
        )));
    }
    if sample.p() != grid.p() {
        return Err(Error::invalid(format!(
            "sample has dimension {} but the reference grid has dimension {}",
            sample.p(),
            grid.p()
        )));
    }
    if let Some((i, j)) = sample.find_duplicate_rows() {
        return Err(Error::invalid(format!(
            "observations {} and {} are identical; ranks are undefined for tied data (see --jitter)",
            i + 1,
            j + 1
        )));
    }
    Ok(())
}

/// Plain OT rank map under squared Euclidean cost.
pub fn rank_map(sample: &Points, grid: &ReferenceGrid) -> Result<RankAssignment> {
    let trivial = SymmetryGroup::trivial(grid.p());
    // The trivial group never consumes randomness.
    let mut rng = crate::rng::seeded(0);
    signed_rank_map(sample, grid, &trivial, &mut rng)
}

/// OT signs, absolute ranks and signed-ranks of `sample` relative to `grid`
/// under `group`.
pub fn signed_rank_map<R: Rng + ?Sized>(
    sample: &Points,
    grid: &ReferenceGrid,
    group: &SymmetryGroup,
    rng: &mut R,
) -> Result<RankAssignment> {
    signed_rank_map_with(sample, grid, group, RankOptions::default(), rng)
}

pub fn signed_rank_map_with<R: Rng + ?Sized>(
    sample: &Points,
    grid: &ReferenceGrid,
    group: &SymmetryGroup,
    opts: RankOptions,
    rng: &mut R,
) -> Result<RankAssignment> {
    check_shapes(sample, grid)?;
    if group.dim() != grid.p() {
        return Err(Error::invalid(format!(
            "group acts on dimension {}, data has dimension {}",
            group.dim(),
            grid.p()
        )));
    }
    if *group.kind() != GroupKind::Trivial {
        grid.verify_fundamental_domain(group)?;
    }
    let n = sample.n();

    let assignment = if *group.kind() == GroupKind::Spherical {
        // Cost (‖x‖ − ‖h‖)² only sees norms, so matching sorted norms is optimal.
        let xs: Vec<f64> = sample.rows().map(|r| norm_sq(r).sqrt()).collect();
        let hs: Vec<f64> = grid.points().rows().map(|r| norm_sq(r).sqrt()).collect();
        solve_sorted_matching(&xs, &hs)?
    } else {
        let rows = opts.execution.map(n, |i| {
            let x = sample.row(i);
            (0..n)
                .map(|j| group.orbit_cost_unchecked(x, grid.row(j)))
                .collect::<Vec<f64>>()
        });
        let costs = CostMatrix::new(rows.into_iter().flatten().collect(), n)?;
        solve_assignment(&costs)
    };

    let p = sample.p();
    let mut absolute = Vec::with_capacity(n * p);
    let mut signed = Vec::with_capacity(n * p);
    let mut signs = opts.compute_signs.then(|| Vec::with_capacity(n));
    let mut total_cost = 0.0;
    for (i, &j) in assignment.permutation.iter().enumerate() {
        let x = sample.row(i);
        let h = grid.row(j);
        absolute.extend_from_slice(h);
        let u = group.closest_orbit_point(x, h)?;
        total_cost += group.orbit_cost_unchecked(x, h);
        if let Some(s) = signs.as_mut() {
            s.push(group.argmin_sign(x, h, rng)?);
        }
        signed.extend(u);
    }
    Ok(RankAssignment {
        permutation: assignment.permutation,
        absolute_ranks: Points::from_raw(absolute, n, p),
        signs,
        signed_ranks: Points::from_raw(signed, n, p),
        total_cost,
    })
}

/// Ranks of two samples computed jointly on the pooled sample and split back
/// into the `x` and `y` blocks.
pub fn pooled_rank_map(x: &Points, y: &Points, grid: &ReferenceGrid) -> Result<(Points, Points)> {
    let pooled = x.vstack(y)?;
    let ranks = rank_map(&pooled, grid)?;
    let m = x.n();
    let idx_x: Vec<usize> = (0..m).collect();
    let idx_y: Vec<usize> = (m..pooled.n()).collect();
    Ok((
        ranks.absolute_ranks.select(&idx_x),
        ranks.absolute_ranks.select(&idx_y),
    ))
}

/// Adds independent `Unif(−eps, eps)` noise to every entry. Breaking ties
/// this way keeps the null distribution exact only for data whose law is
/// already continuous.
pub fn jitter<R: Rng + ?Sized>(sample: &Points, eps: f64, rng: &mut R) -> Result<Points> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::invalid("jitter must be a positive finite number"));
    }
    let data = sample
        .as_slice()
        .iter()
        .map(|v| v + rng.random_range(-eps..eps))
        .collect();
    Points::new(data, sample.n(), sample.p())
}
