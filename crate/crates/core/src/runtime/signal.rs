use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{HierPath, RuntimeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataKind {
    State,
    Action,
    Disturbance,
    Observation,
}

impl DataKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataKind::State => "state",
            DataKind::Action => "action",
            DataKind::Disturbance => "disturbance",
            DataKind::Observation => "observation",
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataKind {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "state" => Ok(DataKind::State),
            "action" => Ok(DataKind::Action),
            "disturbance" => Ok(DataKind::Disturbance),
            "observation" => Ok(DataKind::Observation),
            _ => Err(RuntimeError::UnknownKind(s.to_string())),
        }
    }
}

/// Unit annotation carried by every bus value. Checked at wiring time only;
/// the sole conversion the runtime knows about is °C ↔ K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Watt,
    Celsius,
    Kelvin,
    KgPerSecond,
    KiloWattHour,
    Fraction,
    UsdPerKwh,
    WattPerM2,
    Count,
    Flag,
    Dimensionless,
}

impl Unit {
    pub fn compatible(self, other: Unit) -> bool {
        use Unit::*;
        self == other || matches!((self, other), (Celsius, Kelvin) | (Kelvin, Celsius))
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Unit::Watt => "W",
            Unit::Celsius => "degC",
            Unit::Kelvin => "K",
            Unit::KgPerSecond => "kg/s",
            Unit::KiloWattHour => "kWh",
            Unit::Fraction => "fraction",
            Unit::UsdPerKwh => "usd/kWh",
            Unit::WattPerM2 => "W/m2",
            Unit::Count => "count",
            Unit::Flag => "flag",
            Unit::Dimensionless => "-",
        }
    }
}

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + 273.15
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - 273.15
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalKey {
    pub path: HierPath,
    pub var: String,
    pub kind: DataKind,
}

impl SignalKey {
    pub fn new(path: HierPath, var: impl Into<String>, kind: DataKind) -> Self {
        SignalKey {
            path,
            var: var.into(),
            kind,
        }
    }

    /// `cluster.domain.system.component.variable.kind`
    pub fn column_name(&self) -> String {
        format!("{}.{}.{}", self.path.dotted(), self.var, self.kind)
    }
}

impl fmt::Display for SignalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}[{}]", self.path, self.var, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal {
    pub value: f64,
    pub unit: Unit,
}

/// One timestep of keyed bus values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalFrame {
    pub timestep: u64,
    entries: BTreeMap<SignalKey, Signal>,
}

impl SignalFrame {
    pub fn new(timestep: u64) -> Self {
        SignalFrame {
            timestep,
            entries: BTreeMap::new(),
        }
    }

    /// Rejects duplicate keys and non-finite values.
    pub fn insert(&mut self, key: SignalKey, value: f64, unit: Unit) -> Result<(), RuntimeError> {
        if !value.is_finite() {
            return Err(RuntimeError::NonFinite {
                path: key.path.clone(),
                key: key.to_string(),
            });
        }
        if self.entries.contains_key(&key) {
            return Err(RuntimeError::DuplicateKey(key.to_string()));
        }
        self.entries.insert(key, Signal { value, unit });
        Ok(())
    }

    pub fn get(&self, key: &SignalKey) -> Option<Signal> {
        self.entries.get(key).copied()
    }

    pub fn value(&self, key: &SignalKey) -> Option<f64> {
        self.entries.get(key).map(|s| s.value)
    }

    /// Convenience lookup by textual path.
    pub fn lookup(&self, path: &str, var: &str, kind: DataKind) -> Option<f64> {
        let path: HierPath = path.parse().ok()?;
        self.value(&SignalKey::new(path, var, kind))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SignalKey, &Signal)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of `kind` named `var` whose path lies under `prefix`.
    pub fn matching<'a>(
        &'a self,
        prefix: &'a HierPath,
        var: &'a str,
        kind: DataKind,
    ) -> impl Iterator<Item = (&'a SignalKey, &'a Signal)> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k.kind == kind && k.var == var && prefix.contains(&k.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_duplicates_and_nan() {
        let mut f = SignalFrame::new(0);
        let k = SignalKey::new("c/thermal".parse().unwrap(), "x", DataKind::State);
        f.insert(k.clone(), 1.0, Unit::Watt).unwrap();
        assert!(matches!(
            f.insert(k.clone(), 2.0, Unit::Watt),
            Err(RuntimeError::DuplicateKey(_))
        ));
        let k2 = SignalKey::new("c/thermal".parse().unwrap(), "y", DataKind::State);
        assert!(matches!(
            f.insert(k2, f64::NAN, Unit::Watt),
            Err(RuntimeError::NonFinite { .. })
        ));
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn unit_compatibility() {
        assert!(Unit::Celsius.compatible(Unit::Kelvin));
        assert!(Unit::Watt.compatible(Unit::Watt));
        assert!(!Unit::Watt.compatible(Unit::KiloWattHour));
        assert_eq!(kelvin_to_celsius(celsius_to_kelvin(21.5)), 21.5);
    }

    #[test]
    fn column_names_are_dotted() {
        let k = SignalKey::new("c/thermal/h1/zone".parse().unwrap(), "t_zone", DataKind::State);
        assert_eq!(k.column_name(), "c.thermal.h1.zone.t_zone.state");
    }
}
