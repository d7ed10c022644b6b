use super::DerError;

#[derive(Debug, Clone, PartialEq)]
pub struct BatterySpec {
    /// Nameplate, kWh
    pub capacity: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    /// W
    pub p_max_charge: f64,
    /// W
    pub p_max_discharge: f64,
    /// Power-limit multiplier vs ambient °C, piecewise linear, sorted by temperature.
    pub derate: Vec<(f64, f64)>,
    /// SOH lost per full-capacity throughput
    pub k_cycle: f64,
    /// SOH lost per hour
    pub k_calendar: f64,
    pub soh_min: f64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec {
            capacity: 10.0,
            soc_min: 0.1,
            soc_max: 0.95,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            p_max_charge: 5000.0,
            p_max_discharge: 5000.0,
            derate: vec![(-10.0, 0.8), (25.0, 1.0), (45.0, 0.8)],
            k_cycle: 1e-4,
            k_calendar: 0.0,
            soh_min: 0.6,
        }
    }
}

impl BatterySpec {
    pub fn validate(&self) -> Result<(), DerError> {
        let bad = |m: &str| Err(DerError::InvalidSpec(format!("battery: {m}")));
        if !(self.capacity > 0.0) {
            return bad("capacity must be > 0");
        }
        if !(0.0 <= self.soc_min && self.soc_min <= self.soc_max && self.soc_max <= 1.0) {
            return bad("need 0 <= soc_min <= soc_max <= 1");
        }
        let eta_ok = |e: f64| e > 0.0 && e <= 1.0;
        if !eta_ok(self.eta_charge) || !eta_ok(self.eta_discharge) {
            return bad("efficiencies must lie in (0, 1]");
        }
        if !(self.p_max_charge >= 0.0 && self.p_max_discharge >= 0.0) {
            return bad("power limits must be >= 0");
        }
        if self.derate.windows(2).any(|w| w[0].0 >= w[1].0) || self.derate.iter().any(|d| !(d.1 >= 0.0)) {
            return bad("derate curve must be sorted with nonnegative multipliers");
        }
        if !(self.k_cycle >= 0.0 && self.k_calendar >= 0.0 && (0.0..=1.0).contains(&self.soh_min)) {
            return bad("degradation coefficients");
        }
        Ok(())
    }

    /// Power-limit multiplier at ambient temperature `t`, held flat beyond the curve ends.
    pub fn derate_at(&self, t: f64) -> f64 {
        let c = &self.derate;
        match c.len() {
            0 => 1.0,
            _ if t <= c[0].0 => c[0].1,
            _ if t >= c[c.len() - 1].0 => c[c.len() - 1].1,
            _ => {
                let i = c.windows(2).position(|w| t <= w[1].0).unwrap();
                let ((t0, m0), (t1, m1)) = (c[i], c[i + 1]);
                m0 + (m1 - m0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    pub soh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStep {
    pub state: BatteryState,
    /// Bus-side power actually exchanged, W
    pub p_actual: f64,
    /// Conversion loss, W
    pub p_loss: f64,
    /// Energy into the cells (negative when discharging), kWh
    pub cell_energy: f64,
}

/// `p_request` in W at the bus, `dt_h` in hours.
pub fn battery_step(
    spec: &BatterySpec,
    state: BatteryState,
    p_request: f64,
    t_ambient: f64,
    dt_h: f64,
) -> Result<BatteryStep, DerError> {
    if !(dt_h > 0.0) {
        return Err(DerError::BadStep(dt_h));
    }
    let usable = spec.capacity * state.soh;
    let derate = spec.derate_at(t_ambient);
    let (p, cell_kwh) = if p_request > 0.0 {
        let headroom = ((spec.soc_max - state.soc) * usable).max(0.0);
        let p = p_request
            .min(spec.p_max_charge * derate)
            .min(headroom * 1000.0 / (spec.eta_charge * dt_h));
        (p, spec.eta_charge * p * dt_h / 1000.0)
    } else if p_request < 0.0 {
        let available = ((state.soc - spec.soc_min) * usable).max(0.0);
        let p = p_request
            .max(-spec.p_max_discharge * derate)
            .max(-available * spec.eta_discharge * 1000.0 / dt_h);
        (p, p * dt_h / (1000.0 * spec.eta_discharge))
    } else {
        (0.0, 0.0)
    };
    let soc = (state.soc + cell_kwh / usable).clamp(spec.soc_min.min(state.soc), spec.soc_max.max(state.soc));
    let bus_kwh = p * dt_h / 1000.0;
    Ok(BatteryStep {
        state: BatteryState { soc, soh: state.soh },
        p_actual: p,
        p_loss: (bus_kwh - cell_kwh).abs() * 1000.0 / dt_h,
        cell_energy: cell_kwh,
    })
}

/// Linear cycle plus calendar fade, floored at `soh_min`.
pub fn battery_degradation_step(spec: &BatterySpec, soh: f64, throughput_kwh: f64, dt_h: f64) -> f64 {
    if soh <= spec.soh_min {
        return soh;
    }
    let next = soh - spec.k_cycle * throughput_kwh.max(0.0) / spec.capacity - spec.k_calendar * dt_h;
    next.max(spec.soh_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec10() -> BatterySpec {
        BatterySpec {
            soc_min: 0.0,
            soc_max: 1.0,
            ..Default::default()
        }
    }

    const FULL: BatteryState = BatteryState { soc: 0.5, soh: 1.0 };

    #[test]
    fn charge_and_discharge_examples() {
        let s = battery_step(&spec10(), FULL, 2000.0, 25.0, 0.25).unwrap();
        assert!((s.state.soc - 0.5475).abs() < 1e-12);
        let d = battery_step(&spec10(), FULL, -2000.0, 25.0, 0.25).unwrap();
        assert!((d.state.soc - (0.5 - 0.5 / 0.95 / 10.0)).abs() < 1e-12);
        assert!((d.state.soc - 0.447368).abs() < 1e-6);
    }

    #[test]
    fn headroom_limits_charge() {
        let s = battery_step(&spec10(), BatteryState { soc: 0.99, soh: 1.0 }, 2000.0, 25.0, 0.25).unwrap();
        assert!((s.p_actual - 421.052_631_578_947_4).abs() < 1e-6, "{}", s.p_actual);
        assert!((s.state.soc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derate_curve() {
        let b = BatterySpec::default();
        assert_eq!(b.derate_at(25.0), 1.0);
        assert!((b.derate_at(45.0) - 0.8).abs() < 1e-12);
        assert!((b.derate_at(-10.0) - 0.8).abs() < 1e-12);
        assert!((b.derate_at(35.0) - 0.9).abs() < 1e-12);
        let s = battery_step(&b, FULL, 10_000.0, 45.0, 0.25).unwrap();
        assert!((s.p_actual - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_efficiency() {
        let spec = spec10();
        let c = battery_step(&spec, FULL, 3000.0, 25.0, 0.5).unwrap();
        let bus_in = c.p_actual * 0.5 / 1000.0;
        // discharge exactly back to the starting SOC
        let cell_back = c.cell_energy;
        let p_dis = -cell_back * spec.eta_discharge * 1000.0 / 0.5;
        let d = battery_step(&spec, c.state, p_dis, 25.0, 0.5).unwrap();
        assert!((d.state.soc - 0.5).abs() < 1e-12);
        let bus_out = -d.p_actual * 0.5 / 1000.0;
        let expect = spec.eta_charge * spec.eta_discharge * bus_in;
        assert!(((bus_out - expect) / expect).abs() < 1e-9);
    }

    #[test]
    fn degradation() {
        let spec = BatterySpec {
            k_cycle: 1e-4,
            k_calendar: 0.0,
            ..Default::default()
        };
        assert!((battery_degradation_step(&spec, 1.0, 10.0, 1.0) - (1.0 - 1e-4)).abs() < 1e-15);
        assert_eq!(battery_degradation_step(&spec, 0.9, 0.0, 1.0), 0.9);
        assert_eq!(battery_degradation_step(&spec, spec.soh_min, 10.0, 1.0), spec.soh_min);
    }
}
