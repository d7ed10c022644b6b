use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{AggFn, DataKind, HierLevel, HierPath, ModuleHandle, ModuleKind, SignalKey, Unit};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Action flowing to a strictly higher level than its producer.
    UpwardAction {
        producer: HierPath,
        consumer: HierPath,
        var: String,
    },
    /// Controller reading an observation outside its own subtree.
    ObservationOutOfScope {
        controller: HierPath,
        observed: HierPath,
        var: String,
    },
    UnresolvedInput {
        consumer: HierPath,
        key: SignalKey,
    },
    UnitMismatch {
        consumer: HierPath,
        key: SignalKey,
        expected: Unit,
        found: Unit,
    },
    /// Same-level controllers feeding actions to each other in a loop.
    ActionCycle {
        level: HierLevel,
        members: Vec<HierPath>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UpwardAction {
                producer,
                consumer,
                var,
            } => write!(
                f,
                "action '{var}' from {producer} ({}) to higher-level {consumer} ({})",
                producer.level(),
                consumer.level()
            ),
            Violation::ObservationOutOfScope {
                controller,
                observed,
                var,
            } => write!(
                f,
                "controller {controller} reads '{var}' at {observed}, outside its subtree"
            ),
            Violation::UnresolvedInput { consumer, key } => {
                write!(f, "{consumer} reads unresolved {key}")
            }
            Violation::UnitMismatch {
                consumer,
                key,
                expected,
                found,
            } => write!(
                f,
                "{consumer} expects {key} in {} but producer publishes {}",
                expected.symbol(),
                found.symbol()
            ),
            Violation::ActionCycle { level, members } => write!(
                f,
                "action cycle among {level}-level controllers: {}",
                members.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionEdge {
    pub producer: HierPath,
    pub consumer: HierPath,
    pub var: String,
}

/// Execution plan derived from a set of handles.
#[derive(Debug, Clone, Default)]
pub(crate) struct Plan {
    pub disturbances: Vec<usize>,
    pub controllers: Vec<usize>,
    pub dynamics: Vec<usize>,
    /// Per module, per input: read from the previous frame.
    pub delayed: Vec<Vec<bool>>,
    pub action_edges: Vec<ActionEdge>,
}

enum Resolution {
    Found { producer: Option<usize>, unit: Unit },
    Missing,
}

fn resolve(
    handles: &[&ModuleHandle],
    by_path: &BTreeMap<&HierPath, usize>,
    key: &SignalKey,
    aggregation: &BTreeMap<String, AggFn>,
) -> Resolution {
    match key.kind {
        DataKind::Observation => {
            if let Some(&i) = by_path.get(&key.path) {
                if let Some(o) = handles[i].find_output(&key.var, DataKind::Observation) {
                    return Resolution::Found {
                        producer: Some(i),
                        unit: o.unit,
                    };
                }
            }
            let aggregated = aggregation.contains_key(&key.var);
            for h in handles {
                if !key.path.contains(&h.path) {
                    continue;
                }
                if h.path != key.path && !aggregated {
                    continue;
                }
                if let Some(o) = h.find_output(&key.var, DataKind::State) {
                    return Resolution::Found {
                        producer: None,
                        unit: o.unit,
                    };
                }
            }
            Resolution::Missing
        }
        kind => match by_path.get(&key.path) {
            Some(&i) => match handles[i].find_output(&key.var, kind) {
                Some(o) => Resolution::Found {
                    producer: Some(i),
                    unit: o.unit,
                },
                None => Resolution::Missing,
            },
            None => Resolution::Missing,
        },
    }
}

/// Validates wiring and, when it is valid, derives the execution plan.
pub(crate) fn analyze(handles: &[&ModuleHandle], aggregation: &BTreeMap<String, AggFn>) -> (Vec<Violation>, Plan) {
    let by_path: BTreeMap<&HierPath, usize> = handles.iter().enumerate().map(|(i, h)| (&h.path, i)).collect();
    let mut violations = Vec::new();
    let mut plan = Plan {
        delayed: handles
            .iter()
            .map(|h| {
                h.inputs
                    .iter()
                    .map(|d| d.delayed || d.key.kind == DataKind::Observation)
                    .collect()
            })
            .collect(),
        ..Plan::default()
    };
    // (consumer, producer) same-step dependencies
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); handles.len()];

    for (ci, h) in handles.iter().enumerate() {
        for (ii, decl) in h.inputs.iter().enumerate() {
            let key = &decl.key;
            let producer = match resolve(handles, &by_path, key, aggregation) {
                Resolution::Missing => {
                    violations.push(Violation::UnresolvedInput {
                        consumer: h.path.clone(),
                        key: key.clone(),
                    });
                    continue;
                }
                Resolution::Found { producer, unit } => {
                    if !decl.unit.compatible(unit) {
                        violations.push(Violation::UnitMismatch {
                            consumer: h.path.clone(),
                            key: key.clone(),
                            expected: decl.unit,
                            found: unit,
                        });
                    }
                    producer
                }
            };
            match key.kind {
                DataKind::Action => {
                    if h.path.level() > key.path.level() {
                        violations.push(Violation::UpwardAction {
                            producer: key.path.clone(),
                            consumer: h.path.clone(),
                            var: key.var.clone(),
                        });
                    }
                    plan.action_edges.push(ActionEdge {
                        producer: key.path.clone(),
                        consumer: h.path.clone(),
                        var: key.var.clone(),
                    });
                }
                DataKind::Observation | DataKind::State
                    if h.kind == ModuleKind::Controller && !h.path.contains(&key.path) =>
                {
                    violations.push(Violation::ObservationOutOfScope {
                        controller: h.path.clone(),
                        observed: key.path.clone(),
                        var: key.var.clone(),
                    });
                }
                _ => {}
            }
            if let Some(p) = producer {
                if p != ci && !plan.delayed[ci][ii] {
                    deps[ci].insert(p);
                }
            }
        }
    }

    for (i, h) in handles.iter().enumerate() {
        if h.kind == ModuleKind::Disturbance {
            plan.disturbances.push(i);
        }
    }

    // controllers: top-down by level, same-level action deps topologically
    for level in HierLevel::TOP_DOWN {
        let members: Vec<usize> = (0..handles.len())
            .filter(|&i| handles[i].kind == ModuleKind::Controller && handles[i].path.level() == level)
            .collect();
        let (order, stuck) = kahn(&members, &deps, handles, false, &mut plan.delayed);
        plan.controllers.extend(order);
        if !stuck.is_empty() {
            violations.push(Violation::ActionCycle {
                level,
                members: stuck.iter().map(|&i| handles[i].path.clone()).collect(),
            });
        }
    }

    let dynamics: Vec<usize> = (0..handles.len()).filter(|&i| handles[i].kind.is_dynamic()).collect();
    let (order, _) = kahn(&dynamics, &deps, handles, true, &mut plan.delayed);
    plan.dynamics = order;

    (violations, plan)
}

/// Kahn's algorithm over `members`, ties broken by registration order.
///
/// With `break_cycles`, a stalled sort picks the earliest remaining module
/// and turns its same-step reads from unfinished modules into previous-step
/// reads. Without it, the stalled set is returned.
fn kahn(
    members: &[usize],
    deps: &[BTreeSet<usize>],
    handles: &[&ModuleHandle],
    break_cycles: bool,
    delayed: &mut [Vec<bool>],
) -> (Vec<usize>, Vec<usize>) {
    let member_set: BTreeSet<usize> = members.iter().copied().collect();
    let mut remaining: BTreeSet<usize> = member_set.clone();
    let mut order = Vec::with_capacity(members.len());
    loop {
        let ready = remaining.iter().copied().find(|&i| {
            deps[i]
                .iter()
                .all(|d| !member_set.contains(d) || !remaining.contains(d))
        });
        match ready {
            Some(i) => {
                remaining.remove(&i);
                order.push(i);
            }
            None if remaining.is_empty() => break,
            None if break_cycles => {
                let i = *remaining.iter().next().unwrap();
                let h = handles[i];
                for (ii, decl) in h.inputs.iter().enumerate() {
                    let from_pending = remaining.iter().any(|&r| r != i && handles[r].path == decl.key.path);
                    if from_pending {
                        delayed[i][ii] = true;
                    }
                }
                remaining.remove(&i);
                order.push(i);
            }
            None => return (order, remaining.into_iter().collect()),
        }
    }
    (order, Vec::new())
}
