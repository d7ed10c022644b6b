use chrono::{Datelike, NaiveDateTime, TimeDelta, Timelike, Weekday};

/// Fixed-step simulation clock. Wall time is `start + t·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    dt_s: f64,
    pub t: u64,
    start: NaiveDateTime,
}

impl SimClock {
    /// Panics if `dt_s` is not strictly positive and finite.
    pub fn new(start: NaiveDateTime, dt_s: f64) -> Self {
        assert!(dt_s.is_finite() && dt_s > 0.0, "dt must be positive");
        SimClock { dt_s, t: 0, start }
    }

    pub fn dt(&self) -> f64 {
        self.dt_s
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_s / 3600.0
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn wall_time(&self) -> NaiveDateTime {
        self.at(self.t)
    }

    pub fn at(&self, t: u64) -> NaiveDateTime {
        let ms = (t as f64 * self.dt_s * 1000.0).round() as i64;
        self.start + TimeDelta::milliseconds(ms)
    }

    /// Fractional hour of day in [0, 24).
    pub fn hour_of_day(&self) -> f64 {
        let w = self.wall_time();
        w.hour() as f64 + w.minute() as f64 / 60.0 + w.second() as f64 / 3600.0
    }

    pub fn is_weekday(&self) -> bool {
        !matches!(self.wall_time().weekday(), Weekday::Sat | Weekday::Sun)
    }

    /// Steps per 24 h; `None` when dt does not divide a day.
    pub fn steps_per_day(&self) -> Option<usize> {
        let n = 86_400.0 / self.dt_s;
        (n.fract() == 0.0).then_some(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn wall_time_advances_by_dt() {
        let start = NaiveDate::from_ymd_opt(2025, 7, 30)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let mut c = SimClock::new(start, 900.0);
        c.t = 66;
        assert_eq!(c.hour_of_day(), 16.5);
        assert_eq!(c.steps_per_day(), Some(96));
        assert!(c.is_weekday());
    }
}
