use std::fmt;
use std::str::FromStr;

use super::RuntimeError;

/// Depth in the cluster tree. Declaration order gives `Component < ... < Cluster`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HierLevel {
    Component,
    SystemOrBuilding,
    Domain,
    Cluster,
}

impl HierLevel {
    /// Levels from the root downward; the order controllers are stepped in.
    pub const TOP_DOWN: [HierLevel; 4] = [
        HierLevel::Cluster,
        HierLevel::Domain,
        HierLevel::SystemOrBuilding,
        HierLevel::Component,
    ];
}

impl fmt::Display for HierLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HierLevel::Cluster => "cluster",
            HierLevel::Domain => "domain",
            HierLevel::SystemOrBuilding => "system",
            HierLevel::Component => "component",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Thermal,
    Electrical,
    Water,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Thermal => "thermal",
            Domain::Electrical => "electrical",
            Domain::Water => "water",
        }
    }
}

impl FromStr for Domain {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thermal" => Ok(Domain::Thermal),
            "electrical" => Ok(Domain::Electrical),
            "water" => Ok(Domain::Water),
            other => Err(RuntimeError::MalformedPath(format!(
                "unknown domain '{other}' (expected thermal, electrical or water)"
            ))),
        }
    }
}

/// Fully qualified address `cluster/domain/system/component`.
///
/// Later segments may only be present when every earlier one is; the level
/// is the depth of the deepest present segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HierPath {
    cluster: String,
    domain: Option<Domain>,
    system: Option<String>,
    component: Option<String>,
}

fn check_ident(kind: &str, id: &str) -> Result<(), RuntimeError> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(RuntimeError::MalformedPath(format!(
            "{kind} id '{id}' must be non-empty [A-Za-z0-9_-]"
        )))
    }
}

impl HierPath {
    pub fn new(
        cluster: &str,
        domain: Option<Domain>,
        system: Option<&str>,
        component: Option<&str>,
    ) -> Result<Self, RuntimeError> {
        check_ident("cluster", cluster)?;
        if system.is_some() && domain.is_none() {
            return Err(RuntimeError::MalformedPath("system id set without a domain".into()));
        }
        if component.is_some() && system.is_none() {
            return Err(RuntimeError::MalformedPath(
                "component id set without a system id".into(),
            ));
        }
        if let Some(s) = system {
            check_ident("system", s)?;
        }
        if let Some(c) = component {
            check_ident("component", c)?;
        }
        Ok(HierPath {
            cluster: cluster.to_string(),
            domain,
            system: system.map(str::to_string),
            component: component.map(str::to_string),
        })
    }

    pub fn cluster(id: &str) -> Result<Self, RuntimeError> {
        Self::new(id, None, None, None)
    }

    pub fn level(&self) -> HierLevel {
        if self.component.is_some() {
            HierLevel::Component
        } else if self.system.is_some() {
            HierLevel::SystemOrBuilding
        } else if self.domain.is_some() {
            HierLevel::Domain
        } else {
            HierLevel::Cluster
        }
    }

    pub fn cluster_id(&self) -> &str {
        &self.cluster
    }

    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    pub fn system_id(&self) -> Option<&str> {
        self.system.as_deref()
    }

    pub fn component_id(&self) -> Option<&str> {
        self.component.as_deref()
    }

    /// One level deeper. Errors when already at component level.
    pub fn child(&self, id: &str) -> Result<Self, RuntimeError> {
        match self.level() {
            HierLevel::Cluster => {
                let d: Domain = id.parse()?;
                Self::new(&self.cluster, Some(d), None, None)
            }
            HierLevel::Domain => Self::new(&self.cluster, self.domain, Some(id), None),
            HierLevel::SystemOrBuilding => Self::new(&self.cluster, self.domain, self.system.as_deref(), Some(id)),
            HierLevel::Component => Err(RuntimeError::MalformedPath(format!(
                "cannot nest below component path {self}"
            ))),
        }
    }

    pub fn parent(&self) -> Option<HierPath> {
        let mut p = self.clone();
        if p.component.take().is_some() {
            return Some(p);
        }
        if p.system.take().is_some() {
            return Some(p);
        }
        if p.domain.take().is_some() {
            return Some(p);
        }
        None
    }

    /// This path followed by all of its ancestors up to the cluster root.
    pub fn ancestors_inclusive(&self) -> Vec<HierPath> {
        let mut out = vec![self.clone()];
        let mut cur = self.clone();
        while let Some(p) = cur.parent() {
            out.push(p.clone());
            cur = p;
        }
        out
    }

    /// True when `other` lies in the subtree rooted at `self` (including itself).
    pub fn contains(&self, other: &HierPath) -> bool {
        if self.cluster != other.cluster {
            return false;
        }
        if self.domain.is_some() && self.domain != other.domain {
            return false;
        }
        if self.system.is_some() && self.system != other.system {
            return false;
        }
        if self.component.is_some() && self.component != other.component {
            return false;
        }
        true
    }

    fn segments(&self) -> Vec<&str> {
        let mut v = vec![self.cluster.as_str()];
        if let Some(d) = self.domain {
            v.push(d.as_str());
        }
        if let Some(s) = &self.system {
            v.push(s);
        }
        if let Some(c) = &self.component {
            v.push(c);
        }
        v
    }

    /// Dotted form used in timeseries column names.
    pub fn dotted(&self) -> String {
        self.segments().join(".")
    }
}

impl fmt::Display for HierPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments().join("/"))
    }
}

impl FromStr for HierPath {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() > 4 {
            return Err(RuntimeError::MalformedPath(format!(
                "'{s}' has more than four segments"
            )));
        }
        let domain = parts.get(1).map(|d| d.parse()).transpose()?;
        HierPath::new(parts[0], domain, parts.get(2).copied(), parts.get(3).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> HierPath {
        s.parse().unwrap()
    }

    #[test]
    fn levels_follow_depth() {
        assert_eq!(p("c").level(), HierLevel::Cluster);
        assert_eq!(p("c/thermal").level(), HierLevel::Domain);
        assert_eq!(p("c/thermal/fcu1").level(), HierLevel::SystemOrBuilding);
        assert_eq!(p("c/thermal/fcu1/fan1").level(), HierLevel::Component);
        assert!(HierLevel::Cluster > HierLevel::Domain);
        assert!(HierLevel::SystemOrBuilding > HierLevel::Component);
    }

    #[test]
    fn prefix_rule_rejects_gaps() {
        let e = HierPath::new("c", Some(Domain::Thermal), None, Some("fan1"));
        assert!(matches!(e, Err(RuntimeError::MalformedPath(_))));
        let e = HierPath::new("c", None, Some("b"), None);
        assert!(matches!(e, Err(RuntimeError::MalformedPath(_))));
        assert!("c/steam/b".parse::<HierPath>().is_err());
        assert!("c//b".parse::<HierPath>().is_err());
        assert!("a/thermal/b/c/d".parse::<HierPath>().is_err());
    }

    #[test]
    fn subtree_membership() {
        let root = p("c");
        let b = p("c/thermal/houseA");
        let z = p("c/thermal/houseA/zone");
        assert!(root.contains(&z));
        assert!(b.contains(&z));
        assert!(b.contains(&b));
        assert!(!z.contains(&b));
        assert!(!p("c/thermal/houseB").contains(&z));
        assert!(!p("c/electrical").contains(&z));
        assert!(!p("d").contains(&z));
    }

    #[test]
    fn display_roundtrip_and_dotted() {
        let z = p("c/water/h1/tank");
        assert_eq!(z.to_string(), "c/water/h1/tank");
        assert_eq!(z.dotted(), "c.water.h1.tank");
        assert_eq!(z.ancestors_inclusive().len(), 4);
        assert_eq!(z.parent().unwrap(), p("c/water/h1"));
        assert_eq!(p("c").child("thermal").unwrap(), p("c/thermal"));
    }
}
