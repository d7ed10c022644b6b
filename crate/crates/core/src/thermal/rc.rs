use super::{ThermalError, ZoneInputs};

/// Lumped single-capacitance zone used as the reference simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RcZoneSpec {
    /// J/K
    pub capacitance: f64,
    /// K/W
    pub resistance: f64,
    /// Effective solar aperture, m²; solar gain is `aperture · GHI`.
    pub solar_aperture: f64,
    /// W per occupant
    pub gain_per_occupant: f64,
    /// W per active appliance flag
    pub gain_per_activity: f64,
}

impl RcZoneSpec {
    pub fn new(capacitance: f64, resistance: f64) -> Result<Self, ThermalError> {
        let s = RcZoneSpec {
            capacitance,
            resistance,
            solar_aperture: 0.0,
            gain_per_occupant: 0.0,
            gain_per_activity: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.capacitance > 0.0 && self.capacitance.is_finite()) {
            return Err(ThermalError::InvalidSpec("capacitance must be > 0".into()));
        }
        if !(self.resistance > 0.0 && self.resistance.is_finite()) {
            return Err(ThermalError::InvalidSpec("resistance must be > 0".into()));
        }
        if self.solar_aperture < 0.0 || self.gain_per_occupant < 0.0 || self.gain_per_activity < 0.0 {
            return Err(ThermalError::InvalidSpec("gains must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn internal_gain(&self, occupancy: f64, activity: f64) -> f64 {
        self.gain_per_occupant * occupancy + self.gain_per_activity * activity
    }

    pub fn solar_gain(&self, ghi: f64) -> f64 {
        self.solar_aperture * ghi
    }

    /// One explicit-Euler step driven by a disturbance record.
    pub fn step(&self, t_zone: f64, d: &ZoneInputs, q_hvac: f64, dt: f64) -> f64 {
        rc_ground_truth_step(
            self,
            t_zone,
            d.t_out,
            self.internal_gain(d.occupancy, d.activity),
            self.solar_gain(d.ghi),
            q_hvac,
            dt,
        )
    }
}

/// `T' = T + (dt/C)·[(T_out − T)/R + Q_int + Q_solar + Q_hvac]`
pub fn rc_ground_truth_step(
    spec: &RcZoneSpec,
    t_zone: f64,
    t_out: f64,
    q_int: f64,
    q_solar: f64,
    q_hvac: f64,
    dt: f64,
) -> f64 {
    debug_assert!(dt > 0.0);
    let flow = (t_out - t_zone) / spec.resistance + q_int + q_solar + q_hvac;
    t_zone + dt / spec.capacitance * flow
}

/// Iterated reference rollout, `T₀` included.
pub fn rc_rollout(spec: &RcZoneSpec, t0: f64, inputs: &[ZoneInputs], q_hvac: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(t0);
    let mut t = t0;
    for (d, q) in inputs.iter().zip(q_hvac) {
        t = spec.step(t, d, *q, dt);
        out.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> RcZoneSpec {
        RcZoneSpec::new(1e7, 0.002).unwrap()
    }

    #[test]
    fn cooling_example() {
        // 24 + 9e-5·(4000 + 300 + 200 − 3000)
        let t = rc_ground_truth_step(&spec(), 24.0, 32.0, 300.0, 200.0, -3000.0, 900.0);
        assert!((t - 24.135).abs() < 1e-12);
    }

    #[test]
    fn free_float_example() {
        let t = rc_ground_truth_step(&spec(), 24.0, 32.0, 300.0, 200.0, 0.0, 900.0);
        assert!((t - 24.405).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_fixed() {
        assert_eq!(rc_ground_truth_step(&spec(), 21.3, 21.3, 0.0, 0.0, 0.0, 900.0), 21.3);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(RcZoneSpec::new(0.0, 0.002).is_err());
        assert!(RcZoneSpec::new(1e7, -1.0).is_err());
    }
}
