use crate::error::{Error, Result};
use crate::model::{BBox, Embedding, Point};
use crate::primitives::CostMatrix;

pub fn euclidean(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Cell `(i, j)` is the distance from `prev[i]` to `cur[j]`.
pub fn pairwise_distances(prev: &[Point], cur: &[Point]) -> CostMatrix {
    CostMatrix::from_fn(prev.len(), cur.len(), |i, j| euclidean(prev[i], cur[j]))
}

/// Intersection over union; zero when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// `1 - cos(u, v)`, in `[0, 2]`.
pub fn cosine_distance(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(&a, &b)| a as f64 * b as f64).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}
