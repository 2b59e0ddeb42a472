use serde::{Deserialize, Serialize};

use crate::data::Horizon;
use crate::error::{Error, Result};

/// Persistence forecast: the price `offset` hours ago.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaiveModel {
    pub horizon: Horizon,
}

/// `forecast[t] = series[t - offset]`; the first `offset` entries have no
/// forecast.
pub fn naive_forecast(series: &[f64], horizon: Horizon) -> Result<Vec<Option<f64>>> {
    let offset = horizon.offset();
    if series.len() <= offset {
        return Err(Error::Sizing(format!(
            "{horizon} naive forecast needs more than {offset} prices, got {}",
            series.len()
        )));
    }
    Ok((0..series.len())
        .map(|t| t.checked_sub(offset).map(|s| series[s]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_ahead_shift() {
        let f = naive_forecast(&[5.0, 7.0, 9.0], Horizon::HourAhead).unwrap();
        assert_eq!(f, vec![None, Some(5.0), Some(7.0)]);
    }

    #[test]
    fn constant_series() {
        let f = naive_forecast(&[3.5; 40], Horizon::DayAhead).unwrap();
        assert!(f.iter().flatten().all(|&v| v == 3.5));
        assert_eq!(f.iter().flatten().count(), 16);
    }

    #[test]
    fn day_ahead_two_days() {
        let s: Vec<f64> = (0..48).map(|i| (i * i) as f64).collect();
        let f = naive_forecast(&s, Horizon::DayAhead).unwrap();
        for t in 24..48 {
            assert_eq!(f[t], Some(s[t - 24]));
        }
        assert!(f[..24].iter().all(Option::is_none));
    }

    #[test]
    fn too_short() {
        assert!(naive_forecast(&[1.0], Horizon::HourAhead).is_err());
        assert!(naive_forecast(&[1.0; 24], Horizon::DayAhead).is_err());
    }
}
