use std::f64::consts::PI;

use super::DisturbanceError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRecord {
    /// Dry-bulb, °C
    pub t_out: f64,
    /// Global horizontal irradiance, W/m²
    pub ghi: f64,
    /// Wet-bulb, °C
    pub t_wb: Option<f64>,
    /// Dew point, °C, when the source provides one
    pub t_dew: Option<f64>,
}

impl WeatherRecord {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_out.is_finite() && self.ghi.is_finite()) {
            return Err("non-finite weather value".into());
        }
        if self.ghi < 0.0 {
            return Err(format!("negative GHI {}", self.ghi));
        }
        if let Some(wb) = self.t_wb {
            if !(wb <= self.t_out) {
                return Err(format!("wet-bulb {wb} above dry-bulb {}", self.t_out));
            }
        }
        Ok(())
    }
}

/// Parameters of the deterministic daily weather generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayParams {
    pub t_mean: f64,
    pub t_amp: f64,
    pub ghi_peak: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
    /// Dry-bulb minus wet-bulb, K
    pub wb_depression: f64,
}

impl Default for DayParams {
    fn default() -> Self {
        DayParams {
            t_mean: 28.0,
            t_amp: 5.0,
            ghi_peak: 850.0,
            sunrise_h: 6.0,
            sunset_h: 20.0,
            wb_depression: 6.0,
        }
    }
}

impl DayParams {
    pub fn validate(&self) -> Result<(), DisturbanceError> {
        let ok = self.t_amp >= 0.0
            && self.ghi_peak >= 0.0
            && self.wb_depression >= 0.0
            && (0.0..24.0).contains(&self.sunrise_h)
            && self.sunset_h > self.sunrise_h
            && self.sunset_h <= 24.0;
        if ok {
            Ok(())
        } else {
            Err(DisturbanceError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Temperature peaks at 15:00; irradiance is a half-sine between sunrise
/// and sunset and zero outside.
pub fn synth_weather(p: &DayParams, hour: f64) -> WeatherRecord {
    let t_out = p.t_mean + p.t_amp * (2.0 * PI * (hour - 9.0) / 24.0).sin();
    let ghi = if hour >= p.sunrise_h && hour <= p.sunset_h {
        p.ghi_peak * (PI * (hour - p.sunrise_h) / (p.sunset_h - p.sunrise_h)).sin().max(0.0)
    } else {
        0.0
    };
    WeatherRecord {
        t_out,
        ghi,
        t_wb: Some(t_out - p.wb_depression),
        t_dew: None,
    }
}

/// Wet-bulb from dry-bulb and dew point (Magnus RH, then Stull's fit),
/// capped at the dry-bulb.
pub fn wet_bulb_stull(t: f64, t_dew: f64) -> f64 {
    let magnus = |x: f64| (17.625 * x / (243.04 + x)).exp();
    let rh = (100.0 * magnus(t_dew) / magnus(t)).clamp(0.0, 100.0);
    let tw = t * (0.151977 * (rh + 8.313659).sqrt()).atan() + (t + rh).atan() - (rh - 1.676331).atan()
        + 0.00391838 * rh.powf(1.5) * (0.023101 * rh).atan()
        - 4.686035;
    tw.min(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn afternoon_peak() {
        let p = DayParams {
            t_mean: 28.0,
            t_amp: 4.0,
            ..Default::default()
        };
        assert!((synth_weather(&p, 15.0).t_out - 32.0).abs() < 1e-12);
    }

    #[test]
    fn no_sun_at_sunrise_or_midnight() {
        let p = DayParams::default();
        assert!(synth_weather(&p, p.sunrise_h).ghi.abs() < 1e-12);
        assert_eq!(synth_weather(&p, 0.0).ghi, 0.0);
        assert_eq!(synth_weather(&p, 23.5).ghi, 0.0);
        let noon = (p.sunrise_h + p.sunset_h) / 2.0;
        assert!((synth_weather(&p, noon).ghi - p.ghi_peak).abs() < 1e-9);
    }

    #[test]
    fn wet_bulb_bounds() {
        // saturated air: wet-bulb equals dry-bulb (within the fit's accuracy)
        assert!((wet_bulb_stull(25.0, 25.0) - 25.0).abs() < 0.5);
        let tw = wet_bulb_stull(35.0, 15.0);
        assert!(tw < 35.0 && tw > 15.0);
    }
}
