use serde::{Deserialize, Serialize};

/// Mean, sample standard deviation (n - 1) and count of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub const EMPTY: Summary = Summary { n: 0, mean: f64::NAN, std: f64::NAN };

    pub fn from_values(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary::EMPTY;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { n, mean, std }
    }

    /// Pool several summaries as if their underlying values were concatenated
    /// in the given order.
    pub fn combine(parts: &[Summary]) -> Summary {
        let parts: Vec<&Summary> = parts.iter().filter(|s| s.n > 0).collect();
        let n: usize = parts.iter().map(|s| s.n).sum();
        if n == 0 {
            return Summary::EMPTY;
        }
        let mean = parts.iter().map(|s| s.mean * s.n as f64).sum::<f64>() / n as f64;
        let ss: f64 = parts
            .iter()
            .map(|s| s.std * s.std * (s.n as f64 - 1.0) + s.n as f64 * (s.mean - mean).powi(2))
            .sum();
        let std = if n < 2 { 0.0 } else { (ss / (n - 1) as f64).sqrt() };
        Summary { n, mean, std }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.n == 0 {
            write!(f, "n/a")
        } else {
            write!(f, "{:.4} ({:.4}) [n={}]", self.mean, self.std, self.n)
        }
    }
}
