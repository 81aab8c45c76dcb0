//! Test statistics, kernels and score functions.

mod erd;
mod hotelling;
mod kernel;
mod linalg;
mod symmetry;
mod two_sample;

pub use erd::{erd_covariance, CovarianceMode, CovarianceSource, ScoreCovariance};
pub use hotelling::{f_upper_tail, hotelling_one_sample, hotelling_two_sample, HotellingResult};
pub use kernel::{default_sigma, Kernel, Score};
pub use linalg::Precision;
pub use symmetry::{
    closed_form_sweep, gaussian_mean_embedding, gaussian_self_expectation, signed_rank_quadratic_form,
    signed_rank_stat, symmetry_mmd_stat, RecenteredMmd, SymmetricLaw,
};
pub use two_sample::{rank_mmd_stat, ranksum_stat};
