use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::distances::DistanceDistribution;
use crate::error::{Error, Result};

/// Largest `|a|·|b|` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Mann-Whitney `U` of the first sample: `R_a - n(n+1)/2`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: RankSumMethod,
}

impl RankSumTest {
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

pub fn wilcoxon_rank_sum(a: &DistanceDistribution, b: &DistanceDistribution) -> Result<RankSumTest> {
    wilcoxon_rank_sum_slices(a.values(), b.values())
}

/// Two-sided rank-sum test.
///
/// Uses the exact null distribution of `U` when `|a|·|b| <= 10^4` and the
/// pooled sample has no ties; otherwise a normal approximation with tie
/// correction and continuity correction.
pub fn wilcoxon_rank_sum_slices(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("rank-sum sample"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("rank-sum sample"));
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_groups) = average_ranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u = rank_sum_a - (n * (n + 1)) as f64 / 2.0;

    if n * m <= EXACT_LIMIT && tie_groups.is_empty() {
        // tie-free, so U is an exact integer
        let p = exact_two_sided(u.round() as usize, n, m);
        return Ok(RankSumTest { statistic: u, p_value: p, method: RankSumMethod::Exact });
    }

    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let tie_term: f64 = tie_groups.iter().map(|&t| {
        let t = t as f64;
        t * t * t - t
    }).sum();
    let variance = if total > 1.0 {
        nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)))
    } else {
        0.0
    };
    let p = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
        // the far tail underflows to 0; keep the p-value strictly positive
        erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(RankSumTest { statistic: u, p_value: p, method: RankSumMethod::NormalApprox })
}

/// 1-based average ranks, plus the sizes of tie groups larger than one.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Null distribution of `U` for sample sizes `(n, m)`: entry `u` is `P(U = u)`.
///
/// Recurrence on the largest pooled observation: it belongs to the first
/// sample with probability `n/(n+m)` and then beats all `m` others.
pub(crate) fn exact_null_distribution(n: usize, m: usize) -> Vec<f64> {
    // prev[j] holds the distribution for (i - 1, j); cur[j] for (i, j)
    let mut prev: Vec<Vec<f64>> = (0..=m).map(|_| vec![1.0]).collect();
    for i in 1..=n {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        cur.push(vec![1.0]);
        for j in 1..=m {
            let mut dist = vec![0.0; i * j + 1];
            let wa = i as f64 / (i + j) as f64;
            let wb = j as f64 / (i + j) as f64;
            for (u, &pr) in prev[j].iter().enumerate() {
                dist[u + j] += wa * pr;
            }
            for (u, &pr) in cur[j - 1].iter().enumerate() {
                dist[u] += wb * pr;
            }
            cur.push(dist);
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

fn exact_two_sided(u: usize, n: usize, m: usize) -> f64 {
    let dist = exact_null_distribution(n, m);
    let lower: f64 = dist[..=u].iter().sum();
    let upper: f64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper)).min(1.0)
}
