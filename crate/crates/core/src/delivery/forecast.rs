use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ForecastMethod {
    MovingAverage,
    /// Repeats the value one period back.
    SeasonalNaive { period: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    /// History window `k` for the moving average.
    pub window: usize,
    pub horizon: usize,
    /// Slots per day, the reference for percentile-of-day.
    pub day_slots: usize,
    pub method: ForecastMethod,
    /// Static key of the series, e.g. the vendor id.
    #[serde(default)]
    pub key: String,
}

impl ForecastModel {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.horizon == 0 || self.day_slots == 0 {
            return Err(Error::param("window, horizon and day_slots must be >= 1"));
        }
        if let ForecastMethod::SeasonalNaive { period } = self.method {
            if period == 0 {
                return Err(Error::param("seasonal period must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast<T> {
    pub values: Vec<T>,
    /// Midrank percentile (0..100) of each forecast within the trailing day
    /// of history plus forecasts; ties count half, so a flat day gives 50.
    pub percentile_of_day: Vec<T>,
}

/// Forecasts the next `horizon` slots of `series`.
pub fn forecast<T: Scalar>(series: &[T], model: &ForecastModel) -> Result<Forecast<T>> {
    model.validate()?;
    let need = match model.method {
        ForecastMethod::MovingAverage => model.window,
        ForecastMethod::SeasonalNaive { period } => period,
    };
    if series.len() < need {
        return Err(Error::input(format!(
            "series has {} points, the model needs {need}",
            series.len()
        )));
    }
    let n = series.len();
    let values: Vec<T> = match model.method {
        ForecastMethod::MovingAverage => {
            let tail = &series[n - model.window..];
            let mean = tail.iter().fold(T::zero(), |a, b| a + *b) / T::from_usize_lossy(model.window);
            vec![mean; model.horizon]
        }
        ForecastMethod::SeasonalNaive { period } => (1..=model.horizon)
            .map(|h| {
                // step back whole periods until inside the history
                let back = h.div_ceil(period) * period;
                series[n + h - back - 1]
            })
            .collect(),
    };
    let mut extended = series.to_vec();
    extended.extend_from_slice(&values);
    let percentile_of_day = (0..model.horizon)
        .map(|h| {
            let idx = n + h;
            let start = (idx + 1).saturating_sub(model.day_slots);
            midrank_percentile(&extended[start..=idx], extended[idx])
        })
        .collect();
    Ok(Forecast { values, percentile_of_day })
}

fn midrank_percentile<T: Scalar>(window: &[T], x: T) -> T {
    let below = window.iter().filter(|v| **v < x).count();
    let equal = window.iter().filter(|v| **v == x).count();
    T::lit(100.0) * (T::from_usize_lossy(below) + T::lit(0.5) * T::from_usize_lossy(equal))
        / T::from_usize_lossy(window.len())
}

/// Mean absolute error of one-step-ahead rolling forecasts over
/// `series[start..]`.
/// Reads one numeric column of a headed CSV; `None` takes the last column.
pub fn read_series_csv<R: Read>(r: R, column: Option<&str>) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let idx = match column {
        Some(c) => header
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::input(format!("no column `{c}` in {:?}", header.iter().collect::<Vec<_>>())))?,
        None => header.len().checked_sub(1).ok_or_else(|| Error::input("series CSV has no columns"))?,
    };
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).ok_or_else(|| Error::input(format!("row {i} is short")))?;
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("row {i}: `{cell}` is not a number")))?;
        if !v.is_finite() {
            return Err(Error::input(format!("row {i}: non-finite value")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn rolling_mae<T: Scalar>(series: &[T], model: &ForecastModel, start: usize) -> Result<T> {
    let one = ForecastModel { horizon: 1, ..model.clone() };
    if start >= series.len() {
        return Err(Error::input("evaluation start beyond the series"));
    }
    let mut total = T::zero();
    for t in start..series.len() {
        let f = forecast(&series[..t], &one)?;
        total = total + (f.values[0] - series[t]).abs();
    }
    Ok(total / T::from_usize_lossy(series.len() - start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ma(window: usize, horizon: usize) -> ForecastModel {
        ForecastModel { window, horizon, day_slots: 288, method: ForecastMethod::MovingAverage, key: String::new() }
    }

    #[test]
    fn constant_series() {
        let f = forecast(&[7.0f64; 300], &ma(12, 3)).unwrap();
        assert_eq!(f.values, vec![7.0; 3]);
        assert_eq!(f.percentile_of_day, vec![50.0; 3]);
    }

    #[test]
    fn arithmetic_mean_of_window() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(forecast(&s, &ma(5, 1)).unwrap().values, vec![8.0]);
        let s32: Vec<f32> = (1..=10).map(|v| v as f32).collect();
        assert_eq!(forecast(&s32, &ma(5, 1)).unwrap().values, vec![8.0f32]);
    }

    #[test]
    fn short_series_errors() {
        assert!(forecast(&[1.0f64, 2.0], &ma(5, 1)).is_err());
    }

    #[test]
    fn seasonal_naive_repeats_period() {
        let s: Vec<f64> = (0..8).map(f64::from).collect();
        let m = ForecastModel { method: ForecastMethod::SeasonalNaive { period: 4 }, ..ma(1, 6) };
        assert_eq!(forecast(&s, &m).unwrap().values, vec![4.0, 5.0, 6.0, 7.0, 4.0, 5.0]);
    }

    #[test]
    fn seasonal_beats_moving_average_on_a_daily_cycle() {
        let day = 288;
        let s: Vec<f64> = (0..day * 4)
            .map(|t| 500.0 + 300.0 * (2.0 * std::f64::consts::PI * t as f64 / day as f64).sin())
            .collect();
        let seasonal = ForecastModel { method: ForecastMethod::SeasonalNaive { period: day }, ..ma(12, 1) };
        let a = rolling_mae(&s, &seasonal, day * 3).unwrap();
        let b = rolling_mae(&s, &ma(12, 1), day * 3).unwrap();
        assert!(a <= b, "{a} vs {b}");
    }

    proptest! {
        #[test]
        fn moving_average_shift_equivariant(s in prop::collection::vec(-1e3f64..1e3, 12..60), c in -1e3f64..1e3) {
            let m = ma(6, 2);
            let base = forecast(&s, &m).unwrap();
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let moved = forecast(&shifted, &m).unwrap();
            for (a, b) in base.values.iter().zip(&moved.values) {
                prop_assert!((a + c - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn series_csv_columns() {
        let text = "slot,mbps\n0,1.5\n1,2\n";
        assert_eq!(read_series_csv(text.as_bytes(), None).unwrap(), vec![1.5, 2.0]);
        assert_eq!(read_series_csv(text.as_bytes(), Some("slot")).unwrap(), vec![0.0, 1.0]);
        assert!(read_series_csv(text.as_bytes(), Some("nope")).is_err());
        assert!(read_series_csv("a\nx\n".as_bytes(), None).is_err());
    }
}
