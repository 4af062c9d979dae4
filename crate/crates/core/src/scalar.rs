//! Scalar abstraction for the numeric kernels.
//!
//! BM25 weighting, evaluator scores, posterior weights, the selection
//! objective and metric averages are written once against [`Real`] and
//! instantiated with `f32` or `f64`. The orchestration layer uses the `f64`
//! aliases exported from the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).unwrap_or_else(Self::infinity)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {}

/// Arithmetic mean; `None` on an empty slice.
pub fn mean<F: Real>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(F::zero(), |acc, &v| acc + v);
    Some(sum / F::from_usize_lossy(values.len()))
}

/// Index of the first maximal element. NaN entries never win.
pub fn argmax_first<F: Real>(values: &[F]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).or(if values.is_empty() { None } else { Some(0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_first(&[0.2, 0.9, 0.9]), Some(1));
        assert_eq!(argmax_first(&[0.5f32, 0.5, 0.5]), Some(0));
        assert_eq!(argmax_first::<f64>(&[]), None);
        assert_eq!(argmax_first(&[f64::NAN, 0.1]), Some(1));
    }

    #[test]
    fn mean_generic() {
        assert_eq!(mean(&[1.0f32, 0.0, 1.0, 1.0]), Some(0.75));
        assert_eq!(mean::<f64>(&[]), None);
    }
}
