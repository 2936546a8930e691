use crate::error::{Error, Result};

/// `exp(-||x - x'||^2 / (2 gamma^2))`, with `gamma` the kernel length scale.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(rbf_from_sq_dist(sq_dist(x, y), gamma))
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn rbf_from_sq_dist(d2: f64, gamma: f64) -> f64 {
    (-d2 / (2.0 * gamma * gamma)).exp()
}

/// Median pairwise Euclidean distance, used as the default length scale.
pub fn median_pairwise_distance(points: &[Vec<f64>]) -> Option<f64> {
    let mut d: Vec<f64> = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(sq_dist(&points[i], &points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let m = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    (m > 0.0).then_some(m)
}
