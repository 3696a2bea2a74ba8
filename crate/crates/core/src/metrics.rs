//! Evaluation metrics for monitors and steered generations. Quantities with a
//! zero denominator are `None` (serialized as `null`), never zero.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::ensure_dim;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let total = tp + fp + tn + fn_;
        Self {
            tp,
            fp,
            tn,
            fn_,
            precision,
            recall,
            f1,
            accuracy: (tp + tn) as f64 / total.max(1) as f64,
        }
    }
}

/// Confusion counts with "unsafe" as the positive class.
pub fn confusion_and_f1(predicted_unsafe: &[bool], truly_unsafe: &[bool]) -> Result<Confusion> {
    ensure_dim(truly_unsafe.len(), predicted_unsafe.len())?;
    if truly_unsafe.is_empty() {
        return Err(Error::InvalidConfig("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predicted_unsafe.iter().zip(truly_unsafe) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Confusion::from_counts(tp, fp, tn, fn_))
}

/// Fraction of initially unsafe scenarios that are safe afterwards.
pub fn safety_rate(before_unsafe: &[bool], after_unsafe: &[bool]) -> Result<Option<f64>> {
    ensure_dim(before_unsafe.len(), after_unsafe.len())?;
    let (mut unsafe_before, mut fixed) = (0usize, 0usize);
    for (&b, &a) in before_unsafe.iter().zip(after_unsafe) {
        if b {
            unsafe_before += 1;
            if !a {
                fixed += 1;
            }
        }
    }
    Ok(ratio(fixed, unsafe_before))
}

/// `prod_{n=2..4} unique_ngrams / total_ngrams`; orders with no n-grams
/// contribute a factor of one.
pub fn diversity<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    (2..=4)
        .map(|n| {
            if toks.len() < n {
                return 1.0;
            }
            let windows: Vec<&[&str]> = toks.windows(n).collect();
            let unique: HashSet<&[&str]> = windows.iter().copied().collect();
            unique.len() as f64 / windows.len() as f64
        })
        .product()
}

/// Cosine similarity; `None` when either vector is zero.
pub fn coherence(prompt: &[f64], response: &[f64]) -> Result<Option<f64>> {
    ensure_dim(prompt.len(), response.len())?;
    let dot: f64 = prompt.iter().zip(response).map(|(a, b)| a * b).sum();
    let na = prompt.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = response.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(None);
    }
    Ok(Some((dot / (na * nb)).clamp(-1.0, 1.0)))
}

pub fn mean_inference_time(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no timing samples".into()));
    }
    if samples.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidConfig("timings must be finite and non-negative".into()));
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Mean of the defined entries; `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
