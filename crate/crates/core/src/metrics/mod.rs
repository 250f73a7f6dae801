//! Forecast-error metrics and distribution diagnostics.
//!
//! The four error metrics operate on an actual/forecast pair of equal length.
//! MASE here is the non-seasonal variant: MAE normalized by the mean absolute
//! first difference of the actuals over the forecast window itself, so it is
//! well defined on short output windows without a seasonal naive baseline.

mod pca;
mod tsne;

pub use pca::{pca_project, PcaResult};
pub use tsne::{tsne_embed, TsneConfig};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Guard below which an actual value makes MAPE undefined.
pub const MAPE_ZERO_TOLERANCE: f64 = 1e-8;
/// Guard below which the MASE denominator makes MASE undefined.
pub const MASE_ZERO_TOLERANCE: f64 = 1e-12;

fn check_lengths(actual: &[f64], forecast: &[f64], min_len: usize) -> Result<()> {
    if actual.len() != forecast.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} actuals vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    if actual.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} points, got {}",
            actual.len()
        )));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(forecast)
        .map(|(y, yh)| (y - yh) * (y - yh))
        .sum::<f64>()
        / n)
}

/// Mean absolute error.
pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(forecast)
        .map(|(y, yh)| (y - yh).abs())
        .sum::<f64>()
        / n)
}

/// Mean absolute percentage error.
///
/// Errors with [`Error::UndefinedMape`] when any actual is within
/// [`MAPE_ZERO_TOLERANCE`] of zero; no clamping is applied.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    if actual.iter().any(|y| y.abs() <= MAPE_ZERO_TOLERANCE) {
        return Err(Error::UndefinedMape {
            tolerance: MAPE_ZERO_TOLERANCE,
        });
    }
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(forecast)
        .map(|(y, yh)| ((y - yh) / y).abs())
        .sum::<f64>()
        / n)
}

/// Mean absolute scaled error, normalized by the mean absolute first
/// difference of the actuals over the same window.
///
/// Errors with [`Error::UndefinedMase`] when the actuals are constant.
pub fn mase(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 2)?;
    let n = actual.len();
    let diff_sum: f64 = actual.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    if diff_sum <= MASE_ZERO_TOLERANCE {
        return Err(Error::UndefinedMase);
    }
    let denom = diff_sum / (n as f64 - 1.0);
    Ok(mae(actual, forecast)? / denom)
}

/// One row of forecast-error metrics. MAPE and MASE are `None` where their
/// defined-ness guards fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub mse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
    pub mase: Option<f64>,
}

impl MetricBundle {
    /// Compute all four metrics for one actual/forecast pair.
    pub fn compute(actual: &[f64], forecast: &[f64]) -> Result<Self> {
        Ok(MetricBundle {
            mse: mse(actual, forecast)?,
            mae: mae(actual, forecast)?,
            mape: match mape(actual, forecast) {
                Ok(v) => Some(v),
                Err(Error::UndefinedMape { .. }) => None,
                Err(e) => return Err(e),
            },
            mase: match mase(actual, forecast) {
                Ok(v) => Some(v),
                Err(Error::UndefinedMase) => None,
                Err(e) => return Err(e),
            },
        })
    }

    /// Average bundles over several windows. MSE/MAE average over all windows;
    /// MAPE/MASE average over the windows where they are defined and stay
    /// `None` when defined nowhere.
    pub fn mean_over(windows: &[MetricBundle]) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidArgument("no windows to average".into()));
        }
        let n = windows.len() as f64;
        let mean_opt = |sel: fn(&MetricBundle) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = windows.iter().filter_map(sel).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        Ok(MetricBundle {
            mse: windows.iter().map(|b| b.mse).sum::<f64>() / n,
            mae: windows.iter().map(|b| b.mae).sum::<f64>() / n,
            mape: mean_opt(|b| b.mape),
            mase: mean_opt(|b| b.mase),
        })
    }
}

/// Inverse-ECDF quantile (ceil rule): smallest sorted value whose rank
/// covers probability `p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Drop values strictly outside the `[fraction/2, 1 - fraction/2]` empirical
/// quantiles; `fraction = 0` is the identity.
pub fn trim_outliers(values: &[f64], fraction: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "trim fraction {fraction} outside [0, 1)"
        )));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let lo = quantile(&sorted, fraction / 2.0);
    let hi = quantile(&sorted, 1.0 - fraction / 2.0);
    Ok(values
        .iter()
        .copied()
        .filter(|v| *v >= lo && *v <= hi)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_forecast_is_zero_everywhere() {
        let y = [1.0, 3.0, 2.0, 4.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap(), 0.0);
        assert_eq!(mase(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn mse_mae_hand_example() {
        let y = [0.0, 3.0];
        let yh = [1.0, 1.0];
        assert_eq!(mse(&y, &yh).unwrap(), 2.5);
        assert_eq!(mae(&y, &yh).unwrap(), 1.5);
    }

    #[test]
    fn mase_hand_example() {
        // mae = 1, denominator = (2 + 1 + 2) / 3 = 5/3, mase = 0.6
        let y = [1.0, 3.0, 2.0, 4.0];
        let yh = [2.0, 2.0, 2.0, 2.0];
        assert_relative_eq!(mase(&y, &yh).unwrap(), 0.6, max_relative = 1e-12);
    }

    #[test]
    fn mape_hand_example() {
        let y = [1.0, 2.0, 4.0];
        let yh = [1.1, 1.8, 5.0];
        assert_relative_eq!(mape(&y, &yh).unwrap(), 0.15, max_relative = 1e-12);
    }

    #[test]
    fn constant_actuals_make_mase_undefined() {
        let y = [2.0, 2.0, 2.0];
        let yh = [1.0, 2.0, 3.0];
        assert!(matches!(mase(&y, &yh), Err(Error::UndefinedMase)));
    }

    #[test]
    fn near_zero_actual_makes_mape_undefined() {
        let y = [1.0, 1e-9, 2.0];
        let yh = [1.0, 1.0, 2.0];
        assert!(matches!(mape(&y, &yh), Err(Error::UndefinedMape { .. })));
    }

    #[test]
    fn bundle_flags_follow_guards() {
        let b = MetricBundle::compute(&[5.0, 5.0, 5.0], &[5.0, 4.0, 6.0]).unwrap();
        assert!(b.mase.is_none());
        assert!(b.mape.is_some());
    }

    #[test]
    fn trim_is_identity_for_zero_fraction_and_constant_data() {
        let v: Vec<f64> = (1..=50).map(f64::from).collect();
        assert_eq!(trim_outliers(&v, 0.0).unwrap(), v);
        let c = vec![3.0; 20];
        assert_eq!(trim_outliers(&c, 0.05).unwrap(), c);
    }

    #[test]
    fn trim_removes_at_most_two_per_tail_on_1_to_100() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let kept = trim_outliers(&v, 0.05).unwrap();
        // quantile rule: ceil(0.025 * 100) = 3rd value = 3, so 1 and 2 go;
        // upper bound is the 98th value, so 99 and 100 go.
        assert_eq!(kept.first(), Some(&3.0));
        assert_eq!(kept.last(), Some(&98.0));
        assert_eq!(kept.len(), 96);
    }

    proptest! {
        #[test]
        fn metrics_nonnegative(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..20)
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert!(mse(&y, &yh).unwrap() >= 0.0);
            prop_assert!(mae(&y, &yh).unwrap() >= 0.0);
            if let Ok(v) = mape(&y, &yh) { prop_assert!(v >= 0.0); }
            if let Ok(v) = mase(&y, &yh) { prop_assert!(v >= 0.0); }
        }

        #[test]
        fn mse_mae_mape_permutation_equivariant(
            pairs in prop::collection::vec((0.5f64..50.0, -50.0f64..50.0), 3..12),
            seed in 0u64..1000
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            // deterministic permutation from the seed
            let mut idx: Vec<usize> = (0..y.len()).collect();
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let yhp: Vec<f64> = idx.iter().map(|&i| yh[i]).collect();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
            prop_assert!(close(mse(&y, &yh).unwrap(), mse(&yp, &yhp).unwrap()));
            prop_assert!(close(mae(&y, &yh).unwrap(), mae(&yp, &yhp).unwrap()));
            prop_assert!(close(mape(&y, &yh).unwrap(), mape(&yp, &yhp).unwrap()));
        }

        #[test]
        fn mase_scale_invariant(
            pairs in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 2..10),
            alpha in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 1.5, 10.0])
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let ys: Vec<f64> = y.iter().map(|v| alpha * v).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| alpha * v).collect();
            match (mase(&y, &yh), mase(&ys, &yhs)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (Err(Error::UndefinedMase), Err(Error::UndefinedMase)) => {}
                other => prop_assert!(false, "inconsistent definedness: {other:?}"),
            }
        }
    }
}
