use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::points::Points;

use super::linalg::Precision;

/// A Hotelling statistic with its exact F calibration under Gaussian data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HotellingResult {
    pub t2: f64,
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// `P(F > f)` for `F ~ F(d1, d2)`.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Sum of outer products of centered rows.
fn scatter(x: &Points, mean: &[f64]) -> DMatrix<f64> {
    let p = x.p();
    let mut s = DMatrix::<f64>::zeros(p, p);
    for r in x.rows() {
        for a in 0..p {
            let da = r[a] - mean[a];
            for b in a..p {
                s[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            s[(a, b)] = s[(b, a)];
        }
    }
    s
}

/// `T² = n x̄ᵀ S⁻¹ x̄` with `S` the sample covariance (divisor `n − 1`).
/// Under Gaussian data `(n − p)/(p(n − 1)) T² ~ F(p, n − p)`.
pub fn hotelling_one_sample(x: &Points) -> Result<HotellingResult> {
    let (n, p) = (x.n(), x.p());
    if n <= p {
        return Err(Error::invalid(format!("one-sample T² needs n > p (n = {n}, p = {p})")));
    }
    let mean = x.column_means();
    let s = scatter(x, &mean) / (n as f64 - 1.0);
    let t2 = n as f64 * Precision::new(&s)?.quadratic_form(&mean);
    let (d1, d2) = (p as f64, (n - p) as f64);
    let f = t2 * d2 / (d1 * (n as f64 - 1.0));
    Ok(HotellingResult {
        t2,
        f,
        df1: d1,
        df2: d2,
        p_value: f_upper_tail(f, d1, d2),
    })
}

/// `T² = mn/(m+n) (x̄ − ȳ)ᵀ S⁻¹ (x̄ − ȳ)` with `S` the pooled covariance.
/// Under Gaussian data `(m+n−p−1)/(p(m+n−2)) T² ~ F(p, m+n−p−1)`.
pub fn hotelling_two_sample(x: &Points, y: &Points) -> Result<HotellingResult> {
    let (m, n, p) = (x.n(), y.n(), x.p());
    if y.p() != p {
        return Err(Error::invalid("samples have different dimensions"));
    }
    if m == 0 || n == 0 || m + n <= p + 1 {
        return Err(Error::invalid(format!(
            "two-sample T² needs m + n > p + 1 (m = {m}, n = {n}, p = {p})"
        )));
    }
    let mx = x.column_means();
    let my = y.column_means();
    let s = (scatter(x, &mx) + scatter(y, &my)) / ((m + n - 2) as f64);
    let d: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| a - b).collect();
    let (mf, nf) = (m as f64, n as f64);
    let t2 = mf * nf / (mf + nf) * Precision::new(&s)?.quadratic_form(&d);
    let (d1, d2) = (p as f64, (m + n - p - 1) as f64);
    let f = t2 * d2 / (d1 * (m + n - 2) as f64);
    Ok(HotellingResult {
        t2,
        f,
        df1: d1,
        df2: d2,
        p_value: f_upper_tail(f, d1, d2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Points {
        let mut rng = seeded(seed);
        Points::new((0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect(), n, p).unwrap()
    }

    fn affine(x: &Points, a: &[[f64; 2]; 2], b: [f64; 2]) -> Points {
        let rows: Vec<[f64; 2]> = x
            .rows()
            .map(|r| {
                [
                    a[0][0] * r[0] + a[0][1] * r[1] + b[0],
                    a[1][0] * r[0] + a[1][1] * r[1] + b[1],
                ]
            })
            .collect();
        Points::from_rows(&rows).unwrap()
    }

    #[test]
    fn one_sample_hand_oracle() {
        // Rows (1,0), (0,1), (2,2), (1,1): mean (1, 1), S = [[2/3, 1/3], [1/3, 2/3]],
        // S⁻¹ = [[2, −1], [−1, 2]], T² = 4 · (1,1)S⁻¹(1,1)ᵀ = 4 · 2 = 8.
        let x = Points::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [1.0, 1.0]]).unwrap();
        let r = hotelling_one_sample(&x).unwrap();
        assert!((r.t2 - 8.0).abs() < 1e-12);
        // F = 8 · 2/(2·3) = 8/3 on (2, 2): P(F > f) = 1/(1 + f).
        assert!((r.p_value - 1.0 / (1.0 + 8.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn one_sample_zero_mean_gives_zero() {
        let x = Points::from_rows(&[[1.0, 2.0], [-1.0, -2.0], [0.5, -0.3], [-0.5, 0.3]]).unwrap();
        assert!(hotelling_one_sample(&x).unwrap().t2.abs() < 1e-24);
    }

    #[test]
    fn one_sample_linear_invariance() {
        let x = gaussian(30, 2, 1);
        let a = [[2.0, 1.0], [-0.5, 3.0]];
        let t = hotelling_one_sample(&x).unwrap().t2;
        let u = hotelling_one_sample(&affine(&x, &a, [0.0, 0.0])).unwrap().t2;
        assert!((t - u).abs() < 1e-8 * t.max(1.0));
    }

    #[test]
    fn two_sample_hand_oracle() {
        // x = {0, 2}, y = {3, 5} in p = 1: pooled variance (2 + 2)/2 = 2,
        // T² = (2·2/4)·(1 − 4)²/2 = 4.5.
        let x = Points::new(vec![0.0, 2.0], 2, 1).unwrap();
        let y = Points::new(vec![3.0, 5.0], 2, 1).unwrap();
        let r = hotelling_two_sample(&x, &y).unwrap();
        assert!((r.t2 - 4.5).abs() < 1e-12);
        // With p = 1, T² is the squared pooled t statistic on 2 df:
        // P(|t₂| > √4.5) = 1 − √(4.5/6.5).
        assert!((r.p_value - (1.0 - (4.5f64 / 6.5).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn two_sample_affine_invariance_and_equal_means() {
        let x = gaussian(20, 2, 2);
        let y = gaussian(25, 2, 3);
        let a = [[1.0, 4.0], [2.0, -1.0]];
        let t = hotelling_two_sample(&x, &y).unwrap().t2;
        let u = hotelling_two_sample(&affine(&x, &a, [3.0, -7.0]), &affine(&y, &a, [3.0, -7.0]))
            .unwrap()
            .t2;
        assert!((t - u).abs() < 1e-8 * t.max(1.0));
        let same = hotelling_two_sample(&x, &x).unwrap().t2;
        assert_eq!(same, 0.0);
    }

    #[test]
    fn singular_covariance_is_numerical_failure() {
        let x = Points::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(hotelling_one_sample(&x).unwrap_err().is_numerical());
        assert!(hotelling_one_sample(&Points::from_rows(&[[1.0, 2.0]]).unwrap()).is_err());
    }
}
