use super::DerError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvSpec {
    /// W at 1000 W/m² and 25 °C cell
    pub rated_power: f64,
    /// 1/K
    pub gamma: f64,
    pub soiling: f64,
    pub shading: f64,
    pub inverter_eff: f64,
    /// Fraction lost per year
    pub degradation: f64,
    /// Cell temperature rise per irradiance, K·m²/W
    pub k_t: f64,
}

impl Default for PvSpec {
    fn default() -> Self {
        PvSpec {
            rated_power: 5000.0,
            gamma: -0.004,
            soiling: 0.97,
            shading: 1.0,
            inverter_eff: 0.96,
            degradation: 0.005,
            k_t: 0.025,
        }
    }
}

impl PvSpec {
    pub fn validate(&self) -> Result<(), DerError> {
        let ok = self.rated_power >= 0.0
            && self.gamma.is_finite()
            && self.soiling > 0.0
            && self.soiling <= 1.0
            && (0.0..=1.0).contains(&self.shading)
            && self.inverter_eff > 0.0
            && self.inverter_eff <= 1.0
            && (0.0..1.0).contains(&self.degradation)
            && self.k_t >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(DerError::InvalidSpec(format!("PV {self:?}")))
        }
    }
}

/// AC output in W. Negative irradiance is treated as zero.
pub fn pv_power(spec: &PvSpec, ghi: f64, t_ambient: f64, years: f64) -> f64 {
    let g = ghi.max(0.0);
    let t_cell = t_ambient + spec.k_t * g;
    let p = spec.rated_power
        * (g / 1000.0)
        * (1.0 + spec.gamma * (t_cell - 25.0))
        * spec.soiling
        * spec.shading
        * spec.inverter_eff
        * (1.0 - spec.degradation).powf(years);
    p.max(0.0)
}
