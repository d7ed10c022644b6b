use super::DisturbanceError;
use crate::runtime::SimClock;

#[derive(Debug, Clone, PartialEq)]
pub enum PriceSchedule {
    /// Peak applies for hours `h` with `peak_start <= h < peak_end`.
    Tou {
        peak_start: u32,
        peak_end: u32,
        peak: f64,
        off_peak: f64,
    },
    /// One value per clock step.
    Series(Vec<f64>),
}

impl PriceSchedule {
    pub fn validate(&self) -> Result<(), DisturbanceError> {
        let bad = |m: String| Err(DisturbanceError::InvalidParams(m));
        match self {
            PriceSchedule::Tou {
                peak_start,
                peak_end,
                peak,
                off_peak,
            } => {
                if peak_start > peak_end || *peak_end > 24 {
                    return bad(format!("peak window {peak_start}..{peak_end}"));
                }
                if !(*peak >= 0.0 && *off_peak >= 0.0 && peak.is_finite() && off_peak.is_finite()) {
                    return bad("prices must be finite and nonnegative".into());
                }
            }
            PriceSchedule::Series(v) => {
                if v.is_empty() {
                    return bad("empty price series".into());
                }
                if let Some(i) = v.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
                    return bad(format!("price at step {i} is {}", v[i]));
                }
            }
        }
        Ok(())
    }
}

pub fn tou_price_at(schedule: &PriceSchedule, clock: &SimClock) -> Result<f64, DisturbanceError> {
    match schedule {
        PriceSchedule::Tou {
            peak_start,
            peak_end,
            peak,
            off_peak,
        } => {
            let h = clock.hour_of_day().floor() as u32;
            Ok(if (*peak_start..*peak_end).contains(&h) {
                *peak
            } else {
                *off_peak
            })
        }
        PriceSchedule::Series(v) => v
            .get(clock.t as usize)
            .copied()
            .ok_or(DisturbanceError::PriceOutOfRange(clock.t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn clock_at_hour(h: u32) -> SimClock {
        let start = NaiveDate::from_ymd_opt(2025, 7, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let mut c = SimClock::new(start, 900.0);
        c.t = (h * 4) as u64;
        c
    }

    #[test]
    fn peak_and_off_peak() {
        let s = PriceSchedule::Tou {
            peak_start: 16,
            peak_end: 20,
            peak: 0.30,
            off_peak: 0.10,
        };
        assert_eq!(tou_price_at(&s, &clock_at_hour(18)).unwrap(), 0.30);
        assert_eq!(tou_price_at(&s, &clock_at_hour(3)).unwrap(), 0.10);
    }

    #[test]
    fn series_passthrough() {
        let s = PriceSchedule::Series(vec![0.11, 0.12, 0.13]);
        let mut c = clock_at_hour(0);
        c.t = 2;
        assert_eq!(tou_price_at(&s, &c).unwrap(), 0.13);
        c.t = 3;
        assert!(tou_price_at(&s, &c).is_err());
    }
}
