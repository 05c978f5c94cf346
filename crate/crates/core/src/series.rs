//! Truncated positive series with a geometric tail bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest effective ratio used for the tail envelope.
const MIN_EFFECTIVE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub partial: f64,
    pub tail: f64,
    pub total: f64,
    pub depth: usize,
}

/// Sums `terms[k - 1]` for `k = 1..=K` and bounds the remainder.
///
/// The terms are assumed to behave like `poly(k) * ratio^k`. With
/// `rho = max(sqrt(ratio), 1/2)`, the envelope `E = max_k T_k / rho^k` is taken
/// over the computed terms and the tail is `E rho^{K+1} / (1 - rho)`. If the
/// envelope is still rising at `k = K` the series is reported as not decaying.
/// When `last_nonzero` is at most `K` the series is finite and the tail is zero.
pub fn certify(terms: &[f64], ratio: f64, last_nonzero: Option<usize>) -> Result<SeriesSum> {
    let depth = terms.len();
    if let Some(t) = terms.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::OutOfRange(format!("series term {t} is not a finite nonnegative number")));
    }
    let partial: f64 = terms.iter().sum();
    if last_nonzero.is_some_and(|d| d <= depth) || terms.iter().all(|t| *t == 0.0) {
        return Ok(SeriesSum { partial, tail: 0.0, total: partial, depth });
    }
    if !(ratio < 1.0) || ratio.is_nan() {
        return Err(Error::SeriesNotDecaying(depth));
    }
    let rho = ratio.max(0.0).sqrt().max(MIN_EFFECTIVE_RATIO);
    let mut env = 0.0_f64;
    let mut argmax = 0;
    for (i, t) in terms.iter().enumerate() {
        let k = (i + 1) as i32;
        let v = t / rho.powi(k);
        if v > env {
            env = v;
            argmax = i + 1;
        }
    }
    if argmax == depth {
        return Err(Error::SeriesNotDecaying(depth));
    }
    let tail = env * rho.powi(depth as i32 + 1) / (1.0 - rho);
    Ok(SeriesSum { partial, tail, total: partial + tail, depth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_tail_dominates_true_remainder() {
        for r in [0.1, 0.5, 0.8, 0.95] {
            let terms: Vec<f64> = (1..=60).map(|k| (k as f64).powf(1.5) * f64::powi(r, k)).collect();
            let s = certify(&terms, r, None).unwrap();
            let exact: f64 = (61..5000).map(|k| (k as f64).powf(1.5) * f64::powi(r, k)).sum();
            assert!(s.tail >= exact, "r = {r}: {} < {exact}", s.tail);
        }
    }

    #[test]
    fn finite_series_has_no_tail() {
        let s = certify(&[1.0, 2.0, 0.0], 2.0, Some(2)).unwrap();
        assert_eq!((s.partial, s.tail), (3.0, 0.0));
        assert_eq!(certify(&[0.0; 4], 5.0, None).unwrap().total, 0.0);
    }

    #[test]
    fn slow_series_rejected() {
        let terms: Vec<f64> = (1..=10).map(|k| f64::powi(0.999, k) * k as f64).collect();
        assert_eq!(certify(&terms, 0.999, None).unwrap_err(), Error::SeriesNotDecaying(10));
        assert_eq!(certify(&[1.0], 1.0, None).unwrap_err(), Error::SeriesNotDecaying(1));
    }
}
