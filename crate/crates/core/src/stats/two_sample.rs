use crate::error::{Error, Result};
use crate::points::Points;

use super::kernel::{Kernel, Score};
use super::linalg::Precision;

fn scored(ranks: &Points, score: Score) -> Points {
    match score {
        Score::Identity => ranks.clone(),
        _ => {
            let data = ranks.rows().flat_map(|r| score.apply(r)).collect();
            Points::from_raw(data, ranks.n(), ranks.p())
        }
    }
}

fn check_blocks(x: &Points, y: &Points, min: usize) -> Result<()> {
    if x.p() != y.p() {
        return Err(Error::invalid(format!(
            "rank blocks have dimensions {} and {}",
            x.p(),
            y.p()
        )));
    }
    if x.n() < min || y.n() < min {
        return Err(Error::invalid(format!(
            "each sample needs at least {min} observations (got m = {}, n = {})",
            x.n(),
            y.n()
        )));
    }
    Ok(())
}

/// Generalized rank-sum statistic `mn/(m+n) · Δᵀ Σ⁻¹ Δ`, with `Δ` the
/// difference of the mean scored ranks of the two blocks.
pub fn ranksum_stat(x_ranks: &Points, y_ranks: &Points, score: Score, precision: &Precision) -> Result<f64> {
    check_blocks(x_ranks, y_ranks, 1)?;
    if precision.dim() != x_ranks.p() {
        return Err(Error::invalid("covariance dimension does not match the ranks"));
    }
    let mx = scored(x_ranks, score).column_means();
    let my = scored(y_ranks, score).column_means();
    let delta: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| a - b).collect();
    let (m, n) = (x_ranks.n() as f64, y_ranks.n() as f64);
    Ok(m * n / (m + n) * precision.quadratic_form(&delta))
}

/// Sum of `K(aᵢ, aⱼ)` over `i ≠ j`.
fn within_sum(a: &Points, kernel: &Kernel) -> f64 {
    let mut s = 0.0;
    for i in 0..a.n() {
        for j in i + 1..a.n() {
            s += kernel.eval(a.row(i), a.row(j));
        }
    }
    2.0 * s
}

fn cross_sum(a: &Points, b: &Points, kernel: &Kernel) -> f64 {
    a.rows()
        .map(|u| b.rows().map(|v| kernel.eval(u, v)).sum::<f64>())
        .sum()
}

/// Rank-kernel MMD statistic `mn/(m+n) · [w₁ + w₂ − b]`: within-sample
/// terms are U-statistics (diagonal excluded), the cross term averages all
/// `mn` pairs. The statistic can be slightly negative.
pub fn rank_mmd_stat(x_ranks: &Points, y_ranks: &Points, score: Score, kernel: &Kernel) -> Result<f64> {
    check_blocks(x_ranks, y_ranks, 2)?;
    let x = scored(x_ranks, score);
    let y = scored(y_ranks, score);
    let (m, n) = (x.n() as f64, y.n() as f64);
    let w1 = within_sum(&x, kernel) / (m * (m - 1.0));
    let w2 = within_sum(&y, kernel) / (n * (n - 1.0));
    let b = 2.0 * cross_sum(&x, &y, kernel) / (m * n);
    Ok(m * n / (m + n) * (w1 + w2 - b))
}
