//! One-dimensional Wasserstein distance, the Wilcoxon rank-sum test and
//! permutation-null calibration.

mod permutation;
mod wasserstein;
mod wilcoxon;

pub use permutation::{permutation_null, NullCalibration, Space};
pub use wasserstein::{wasserstein_1d, wasserstein_sorted, WassersteinOrder};
pub use wilcoxon::{significance_stars, wilcoxon_rank_sum, wilcoxon_rank_sum_slices, RankSumMethod, RankSumTest};
