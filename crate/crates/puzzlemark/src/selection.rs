//! Suitability projection: standardize complexity features over a corpus,
//! project onto the principal component direction, squash with a sigmoid,
//! and filter carrier candidates by quantile threshold.

use serde::{Deserialize, Serialize};

use crate::error::SelectionError;

/// Fitted projection: per-feature means/stds, principal direction, and the
/// sigmoid scaling factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub features: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub direction: Vec<f64>,
    pub lambda_max: f64,
    pub gamma: f64,
    pub dim: usize,
}

/// Per-sample suitability scores plus the model that produced them.
#[derive(Debug, Clone)]
pub struct SuitabilityReport {
    pub scores: Vec<(String, f64)>,
    pub model: ProjectionModel,
    pub threshold: Option<f64>,
}

/// Sample ids retained as carrier candidates, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierSet {
    pub ids: Vec<String>,
}

impl CarrierSet {
    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }
}

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Z-score each column with the sample (N-1) standard deviation. Degenerate
/// columns (zero std) map to all-zero z-values.
pub fn standardize(
    features: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>), SelectionError> {
    let n = features.len();
    if n < 2 {
        return Err(SelectionError::DegenerateCorpus { n });
    }
    let d = features[0].len();
    let mut means = vec![0.0; d];
    for row in features {
        for (j, value) in row.iter().enumerate() {
            means[j] += value;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for row in features {
        for (j, value) in row.iter().enumerate() {
            let diff = value - means[j];
            stds[j] += diff * diff;
        }
    }
    for std in &mut stds {
        *std = (*std / (n as f64 - 1.0)).sqrt();
    }
    let z = features
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, value)| {
                    if stds[j] == 0.0 {
                        0.0
                    } else {
                        (value - means[j]) / stds[j]
                    }
                })
                .collect()
        })
        .collect();
    Ok((z, means, stds))
}

/// C = ZᵀZ / (N-1).
pub fn covariance(z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = z.len();
    let d = if n == 0 { 0 } else { z[0].len() };
    let mut c = vec![vec![0.0; d]; d];
    for row in z {
        for i in 0..d {
            for j in i..d {
                c[i][j] += row[i] * row[j];
            }
        }
    }
    let denom = (n as f64 - 1.0).max(1.0);
    for i in 0..d {
        for j in i..d {
            c[i][j] /= denom;
            c[j][i] = c[i][j];
        }
    }
    c
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Unit eigenvector of the largest eigenvalue of a symmetric matrix, by
/// power iteration on the Gershgorin-shifted matrix C + sI (which is positive
/// semidefinite with the same eigenvectors, so the iteration converges to the
/// most-positive eigenvalue rather than the largest-magnitude one).
fn top_eigenpair(c: &[Vec<f64>]) -> Result<(Vec<f64>, f64), SelectionError> {
    let d = c.len();
    let shift = c
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let shifted: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| c[i][j] + if i == j { shift } else { 0.0 })
                .collect()
        })
        .collect();

    let mut v: Vec<f64> = vec![1.0 / (d as f64).sqrt(); d];
    let mut last_residual = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITERATIONS {
        let cv = mat_vec(c, &v);
        let lambda = dot(&v, &cv);
        let residual = cv
            .iter()
            .zip(&v)
            .map(|(cvi, vi)| (cvi - lambda * vi).abs())
            .fold(0.0f64, f64::max);
        last_residual = residual;
        if residual <= EIGEN_TOLERANCE {
            return Ok((v, lambda));
        }
        let bv = mat_vec(&shifted, &v);
        let bn = norm(&bv);
        if bn < 1e-300 {
            // Zero matrix: every vector is an eigenvector of 0.
            return Ok((v, 0.0));
        }
        v = bv.into_iter().map(|x| x / bn).collect();
    }
    Err(SelectionError::ConvergenceError {
        residual: last_residual,
        iterations: EIGEN_MAX_ITERATIONS,
    })
}

/// Largest-eigenvalue direction with the sign fixed so the component for the
/// given feature index (nloc by default) is non-negative; if that component
/// is negligible, the first non-negligible component decides.
pub fn principal_direction(
    c: &[Vec<f64>],
    sign_index: usize,
) -> Result<(Vec<f64>, f64), SelectionError> {
    let (mut v, lambda) = top_eigenpair(c)?;
    let anchor = if sign_index < v.len() && v[sign_index].abs() >= 1e-12 {
        v[sign_index]
    } else {
        v.iter().copied().find(|x| x.abs() >= 1e-12).unwrap_or(1.0)
    };
    if anchor < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Ok((v, lambda))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Project each standardized row onto `w`, scale by γ = 2·std of the
/// projections, and map through 1 − sigmoid. A degenerate projection
/// (zero spread) scores every sample 0.5.
pub fn suitability_scores(z: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, f64) {
    let projections: Vec<f64> = z.iter().map(|row| dot(row, w)).collect();
    let n = projections.len();
    let mean = projections.iter().sum::<f64>() / n as f64;
    let var = projections
        .iter()
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / (n as f64 - 1.0).max(1.0);
    let std = var.sqrt();
    let gamma = 2.0 * std;
    if std == 0.0 {
        return (vec![0.5; n], gamma);
    }
    let scores = projections.iter().map(|p| 1.0 - sigmoid(p / gamma)).collect();
    (scores, gamma)
}

/// Fit the projection over a feature matrix and score every row.
pub fn fit(
    features: &[Vec<f64>],
    feature_names: &[&str],
) -> Result<(ProjectionModel, Vec<f64>), SelectionError> {
    let (z, means, stds) = standardize(features)?;
    let c = covariance(&z);
    let sign_index = feature_names.iter().position(|n| *n == "nloc").unwrap_or(0);
    let (direction, lambda_max) = principal_direction(&c, sign_index)?;
    let (scores, gamma) = suitability_scores(&z, &direction);
    let model = ProjectionModel {
        features: feature_names.iter().map(|s| s.to_string()).collect(),
        means,
        stds,
        dim: direction.len(),
        direction,
        lambda_max,
        gamma,
    };
    Ok((model, scores))
}

/// Nearest-rank lower quantile of the scores: with k = ⌊τ·N⌋ the threshold
/// is the (k+1)-th smallest score, so a fraction ≈ 1−τ is retained and ties
/// at the threshold are kept.
pub fn quantile_threshold(scores: &[f64], tau: f64) -> Result<f64, SelectionError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(SelectionError::InvalidTau(tau));
    }
    if scores.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    // The 1e-9 nudge absorbs representation error when τ·N is integral
    // (0.35 × 100 must drop exactly 35 samples).
    let k = ((tau * sorted.len() as f64) + 1e-9).floor() as usize;
    let k = k.min(sorted.len() - 1);
    Ok(sorted[k])
}

/// Retain exactly the samples with score ≥ the τ-quantile threshold.
pub fn select_carriers(
    report: &mut SuitabilityReport,
    tau: f64,
) -> Result<CarrierSet, SelectionError> {
    let values: Vec<f64> = report.scores.iter().map(|(_, s)| *s).collect();
    let threshold = quantile_threshold(&values, tau)?;
    report.threshold = Some(threshold);
    let ids = report
        .scores
        .iter()
        .filter(|(_, s)| *s >= threshold)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(CarrierSet { ids })
}

/// Precision/recall/F1 of the filtered-out (bottom-τ) fraction against
/// externally supplied suspicious-sample labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn evaluate_selection(
    report: &SuitabilityReport,
    tau: f64,
    labels: &std::collections::HashMap<String, bool>,
) -> Result<SelectionMetrics, SelectionError> {
    let known: std::collections::HashSet<&str> =
        report.scores.iter().map(|(id, _)| id.as_str()).collect();
    let unknown: Vec<String> = labels
        .keys()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        let mut unknown = unknown;
        unknown.sort();
        return Err(SelectionError::UnknownIds(unknown));
    }
    let values: Vec<f64> = report.scores.iter().map(|(_, s)| *s).collect();
    let threshold = quantile_threshold(&values, tau)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (id, score) in &report.scores {
        let predicted_positive = *score < threshold;
        let actual_positive = labels.get(id).copied().unwrap_or(false);
        match (predicted_positive, actual_positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SelectionMetrics {
        precision,
        recall,
        f1,
    })
}
