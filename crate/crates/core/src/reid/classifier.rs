use serde::{Deserialize, Serialize};

use super::kernel::{median_pairwise_distance, rbf_from_sq_dist, sq_dist};
use super::smo;
use crate::error::{Error, Result};
use crate::model::{Embedding, Identity};

/// One labelled gallery embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GallerySample {
    pub label: String,
    #[serde(rename = "emb")]
    pub embedding: Embedding,
}

impl GallerySample {
    pub fn new(label: impl Into<String>, embedding: Embedding) -> Self {
        Self {
            label: label.into(),
            embedding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Kernel length scale; `None` picks the median pairwise distance.
    pub gamma: Option<f64>,
    pub c: f64,
    pub min_conf: f64,
    /// KKT tolerance for the SMO stopping rule.
    pub tol: f64,
    pub normalize: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            gamma: None,
            c: 10.0,
            min_conf: 0.35,
            tol: 1e-3,
            normalize: false,
        }
    }
}

/// One-vs-rest decision function for a single label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: String,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl ClassModel {
    fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf_from_sq_dist(sq_dist(sv, x), gamma))
            .sum::<f64>()
            + self.bias
    }
}

/// RBF-kernel one-vs-rest SVM over gallery embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSvmModel {
    pub classes: Vec<ClassModel>,
    pub dim: usize,
    pub gamma: f64,
    pub c: f64,
    pub min_conf: f64,
    pub normalize: bool,
}

impl RbfSvmModel {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.label.as_str())
    }

    pub fn with_min_conf(mut self, min_conf: f64) -> Self {
        self.min_conf = min_conf;
        self
    }

    fn prepare(&self, e: &Embedding) -> Result<Vec<f64>> {
        if e.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: e.dim(),
            });
        }
        Ok(prepare(e, self.normalize))
    }

    /// Raw one-vs-rest decision values, in class order.
    pub fn decision_scores(&self, e: &Embedding) -> Result<Vec<f64>> {
        let x = self.prepare(e)?;
        Ok(self.classes.iter().map(|c| c.decision(&x, self.gamma)).collect())
    }

    /// Softmax of the decision values, in class order.
    pub fn confidences(&self, e: &Embedding) -> Result<Vec<f64>> {
        Ok(softmax(&self.decision_scores(e)?))
    }

    /// Labels with their confidences, best first (class order on ties).
    pub fn ranked(&self, e: &Embedding) -> Result<Vec<(String, f64)>> {
        let conf = self.confidences(e)?;
        let mut out: Vec<(String, f64)> = self.labels().map(str::to_owned).zip(conf).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(out)
    }

    /// Best label when its confidence clears `min_conf`, else `Unknown`.
    pub fn classify(&self, e: &Embedding) -> Result<(Identity, f64)> {
        let ranked = self.ranked(e)?;
        let (label, conf) = ranked.into_iter().next().expect("model has classes");
        let id = if conf >= self.min_conf {
            Identity::known(label)
        } else {
            Identity::Unknown
        };
        Ok((id, conf))
    }

    pub fn classify_batch(&self, es: &[Embedding]) -> Result<Vec<(Identity, f64)>> {
        es.iter().map(|e| self.classify(e)).collect()
    }
}

fn prepare(e: &Embedding, normalize: bool) -> Vec<f64> {
    if normalize {
        e.l2_normalized().to_f64()
    } else {
        e.to_f64()
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / z).collect()
}

/// Trains one SMO-solved binary SVM per label (label vs the rest).
pub fn train_classifier(samples: &[GallerySample], params: &TrainParams) -> Result<RbfSvmModel> {
    let first = samples.first().ok_or(Error::EmptyGallery)?;
    let dim = first.embedding.dim();
    let mut labels: Vec<&str> = Vec::new();
    for s in samples {
        if s.embedding.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: s.embedding.dim(),
            });
        }
        if s.label.is_empty() {
            return Err(Error::InvalidConfig("gallery label must be non-empty".into()));
        }
        if !labels.contains(&s.label.as_str()) {
            labels.push(&s.label);
        }
    }
    if labels.len() < 2 {
        return Err(Error::SingleClass);
    }

    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| prepare(&s.embedding, params.normalize))
        .collect();
    let gamma = match params.gamma {
        Some(g) if g > 0.0 => g,
        Some(_) => return Err(Error::InvalidConfig("gamma must be > 0".into())),
        None => median_pairwise_distance(&xs).unwrap_or(1.0),
    };
    let n = xs.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf_from_sq_dist(sq_dist(&xs[i], &xs[j]), gamma);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }

    let classes = labels
        .iter()
        .map(|&label| {
            let y: Vec<f64> = samples
                .iter()
                .map(|s| if s.label == label { 1.0 } else { -1.0 })
                .collect();
            let sol = smo::solve(&gram, &y, params.c, params.tol);
            let mut support_vectors = Vec::new();
            let mut dual_coef = Vec::new();
            for (i, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    support_vectors.push(xs[i].clone());
                    dual_coef.push(a * y[i]);
                }
            }
            ClassModel {
                label: label.to_owned(),
                support_vectors,
                dual_coef,
                bias: -sol.rho,
            }
        })
        .collect();

    Ok(RbfSvmModel {
        classes,
        dim,
        gamma,
        c: params.c,
        min_conf: params.min_conf,
        normalize: params.normalize,
    })
}
