//! Euclidean distance distributions within and across label classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    IntraGenuine,
    IntraHallucinated,
    InterClass,
    PointToGenuine,
    PointToHallucinated,
}

/// An empirical multiset of nonnegative distances, stored sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    values: Vec<f64>,
    kind: DistanceKind,
}

impl DistanceDistribution {
    /// Wrap raw distances; they are validated and sorted.
    pub fn from_values(mut values: Vec<f64>, kind: DistanceKind) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("distance distribution"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("distances must be nonnegative".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(DistanceDistribution { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub fn std(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    /// Linear-interpolated quantile, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return f64::NAN;
        }
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.values[lo] + (self.values[hi] - self.values[lo]) * frac
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims<P: AsRef<[f64]>>(points: &[P], expected: usize) -> Result<()> {
    for p in points {
        let found = p.as_ref().len();
        if found != expected {
            return Err(Error::Dimension { expected, found });
        }
    }
    Ok(())
}

/// All `n(n-1)/2` distances over unordered pairs `i < j`.
pub fn pairwise_intra<P: AsRef<[f64]>>(points: &[P], kind: DistanceKind) -> Result<DistanceDistribution> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    check_dims(points, points[0].as_ref().len())?;
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            values.push(euclidean(points[i].as_ref(), points[j].as_ref()));
        }
    }
    DistanceDistribution::from_values(values, kind)
}

/// All `|A|·|B|` cross distances.
pub fn pairwise_inter<P: AsRef<[f64]>, Q: AsRef<[f64]>>(points_a: &[P], points_b: &[Q]) -> Result<DistanceDistribution> {
    if points_a.is_empty() || points_b.is_empty() {
        return Err(Error::Empty("inter-class point set"));
    }
    let d = points_a[0].as_ref().len();
    check_dims(points_a, d)?;
    check_dims(points_b, d)?;
    let mut values = Vec::with_capacity(points_a.len() * points_b.len());
    for a in points_a {
        for b in points_b {
            values.push(euclidean(a.as_ref(), b.as_ref()));
        }
    }
    DistanceDistribution::from_values(values, DistanceKind::InterClass)
}

/// Distances from one point to every member of a set.
pub fn point_to_set<P: AsRef<[f64]>>(point: &[f64], set: &[P], kind: DistanceKind) -> Result<DistanceDistribution> {
    if set.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    check_dims(set, point.len())?;
    let values = set.iter().map(|s| euclidean(point, s.as_ref())).collect();
    DistanceDistribution::from_values(values, kind)
}

/// Pairwise `|z_i - z_j|` for scalar coordinates.
pub fn intra_1d(coords: &[f64], kind: DistanceKind) -> Result<DistanceDistribution> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            values.push((coords[i] - coords[j]).abs());
        }
    }
    DistanceDistribution::from_values(values, kind)
}

pub fn inter_1d(a: &[f64], b: &[f64]) -> Result<DistanceDistribution> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("inter-class point set"));
    }
    let values = a.iter().flat_map(|x| b.iter().map(move |y| (x - y).abs())).collect();
    DistanceDistribution::from_values(values, DistanceKind::InterClass)
}

pub fn point_to_set_1d(z: f64, set: &[f64], kind: DistanceKind) -> Result<DistanceDistribution> {
    if set.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("projected coordinate"));
    }
    DistanceDistribution::from_values(set.iter().map(|s| (z - s).abs()).collect(), kind)
}

/// `2·mean(D_GH) / (mean(D_GG) + mean(D_HH))`. Close to 1 when the classes are
/// entangled, large when they are well separated.
pub fn separability_ratio(
    d_gg: &DistanceDistribution,
    d_hh: &DistanceDistribution,
    d_gh: &DistanceDistribution,
) -> Result<f64> {
    if d_gg.is_empty() || d_hh.is_empty() || d_gh.is_empty() {
        return Err(Error::Empty("distance distribution"));
    }
    let intra = d_gg.mean() + d_hh.mean();
    if intra <= 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(2.0 * d_gh.mean() / intra)
}

/// The three distributions of a two-class point set.
#[derive(Debug, Clone)]
pub struct ClassDistances {
    pub gg: DistanceDistribution,
    pub hh: DistanceDistribution,
    pub gh: DistanceDistribution,
}

impl ClassDistances {
    pub fn compute<P: AsRef<[f64]>>(genuine: &[P], hallucinated: &[P]) -> Result<Self> {
        Ok(ClassDistances {
            gg: pairwise_intra(genuine, DistanceKind::IntraGenuine)?,
            hh: pairwise_intra(hallucinated, DistanceKind::IntraHallucinated)?,
            gh: pairwise_inter(genuine, hallucinated)?,
        })
    }

    pub fn compute_1d(genuine: &[f64], hallucinated: &[f64]) -> Result<Self> {
        Ok(ClassDistances {
            gg: intra_1d(genuine, DistanceKind::IntraGenuine)?,
            hh: intra_1d(hallucinated, DistanceKind::IntraHallucinated)?,
            gh: inter_1d(genuine, hallucinated)?,
        })
    }

    pub fn separability_ratio(&self) -> Result<f64> {
        separability_ratio(&self.gg, &self.hh, &self.gh)
    }
}
