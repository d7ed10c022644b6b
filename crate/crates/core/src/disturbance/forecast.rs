use super::DisturbanceError;

/// History in, `horizon`-step series out. `history` ends at the current step.
pub trait Forecaster {
    fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, DisturbanceError>;
}

/// Repeats the value observed one period earlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalNaive {
    pub period: usize,
}

impl Forecaster for SeasonalNaive {
    fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, DisturbanceError> {
        seasonal_naive_forecast(history, horizon, self.period)
    }
}

/// `period` is the number of steps in 24 h. Element `k` of the result is
/// the forecast for the step `k + 1` after the last history sample.
pub fn seasonal_naive_forecast(history: &[f64], horizon: usize, period: usize) -> Result<Vec<f64>, DisturbanceError> {
    if period == 0 || history.len() < period {
        return Err(DisturbanceError::ShortHistory {
            got: history.len(),
            needed: period.max(1),
        });
    }
    let tail = &history[history.len() - period..];
    Ok((0..horizon).map(|k| tail[k % period]).collect())
}
