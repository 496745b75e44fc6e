//! Predicate and action abstraction.
//!
//! Continuous action arguments are projected out of the model. Geometric
//! predicates over them (`collisionFree`, `reaches`, `inspects`) leave the
//! abstract precondition and become obligations of the concretization layer,
//! `batterySufficient(tr)` collapses to a zero-arity Boolean, and numeric
//! battery effects are marked unknown and treated optimistically: the abstract
//! battery never runs out.

mod generator;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;
use thiserror::Error;

use crate::lang::{
    ground_actions, Amount, Atom, Domain, GroundedAction, GroundedFact, Literal, NumericEffect,
    ParamType, Probability, Problem, BATTERY_SUFFICIENT,
};

pub use generator::{path_cost_estimate, Binding, Generator, RangeDescriptor};

/// Geometric predicate: the trajectory avoids every obstacle.
pub const COLLISION_FREE: &str = "collisionFree";
/// Geometric predicate: the trajectory ends inside the region named by the
/// object argument.
pub const REACHES: &str = "reaches";
/// Geometric predicate: the trajectory covers the component named by the
/// object argument.
pub const INSPECTS: &str = "inspects";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error("action `{action}`: geometric predicate `{predicate}` has no concrete evaluator")]
    UnsupportedGeometric { action: String, predicate: String },
    #[error("action `{action}`: continuous parameters need a `reaches` or `inspects` constraint")]
    NoGenerator { action: String },
    #[error("action `{action}` has more than one trajectory target constraint")]
    AmbiguousGenerator { action: String },
}

/// An equivalence class of concrete states: the set of true facts over the
/// retained predicates, with `batterySufficient` as a zero-arity fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AbstractState {
    facts: BTreeSet<GroundedFact>,
}

impl AbstractState {
    pub fn new(facts: impl IntoIterator<Item = GroundedFact>) -> Self {
        AbstractState {
            facts: facts.into_iter().collect(),
        }
    }

    pub fn facts(&self) -> &BTreeSet<GroundedFact> {
        &self.facts
    }

    pub fn holds(&self, fact: &GroundedFact) -> bool {
        self.facts.contains(fact)
    }

    pub fn battery_sufficient(&self) -> bool {
        self.facts.contains(&battery_fact())
    }

    /// The same state with the battery flag forced to `value`.
    pub fn with_battery_sufficient(&self, value: bool) -> Self {
        let mut out = self.clone();
        if value {
            out.facts.insert(battery_fact());
        } else {
            out.facts.remove(&battery_fact());
        }
        out
    }

    pub fn satisfies(&self, goal: &[GroundedFact]) -> bool {
        goal.iter().all(|g| self.facts.contains(g))
    }
}

impl std::fmt::Display for AbstractState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, fact) in self.facts.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{fact}")?;
        }
        f.write_str("}")
    }
}

pub fn battery_fact() -> GroundedFact {
    GroundedFact::new(BATTERY_SUFFICIENT, &[])
}

/// A concrete symbolic state: every true grounded fact plus numeric fluents.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConcreteState {
    pub facts: BTreeSet<GroundedFact>,
    pub numeric: BTreeMap<String, f64>,
}

/// How a numeric fluent is booleanized into `batterySufficient`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryFlag {
    pub fluent: String,
    /// `batterySufficient` holds when the fluent is at least this value.
    pub threshold: f64,
}

/// The retained predicate set of a predicate abstraction.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Retained {
    pub predicates: BTreeSet<String>,
    pub battery: Option<BatteryFlag>,
}

impl Retained {
    /// Every non-geometric predicate of the domain, with `batterySufficient`
    /// derived from `battery` when given.
    pub fn all_discrete(domain: &Domain, battery: Option<BatteryFlag>) -> Self {
        Retained {
            predicates: domain
                .predicates
                .iter()
                .filter(|p| !p.is_geometric())
                .map(|p| p.name.clone())
                .collect(),
            battery,
        }
    }
}

/// Projects a concrete state onto the retained predicates.
pub fn abstract_state(x: &ConcreteState, retained: &Retained) -> AbstractState {
    let mut facts: BTreeSet<GroundedFact> = x
        .facts
        .iter()
        .filter(|f| retained.predicates.contains(&f.predicate))
        .cloned()
        .collect();
    if let Some(flag) = &retained.battery {
        let level = x.numeric.get(&flag.fluent).copied().unwrap_or(f64::INFINITY);
        if level >= flag.threshold {
            facts.insert(battery_fact());
        }
    }
    AbstractState { facts }
}

/// How the concrete layer realizes an action's continuous parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Concretization {
    /// No continuous parameters: the robot stays where it is.
    Stationary,
    /// Move so the trajectory ends in the region named by this variable.
    Reach { var: String },
    /// Fly an inspection pattern around the component named by this variable.
    Inspect { var: String },
}

/// Lifted abstract action: the schema with continuous parameters dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractActionSchema {
    pub name: String,
    /// Index of the source schema in `Domain::actions`.
    pub schema: usize,
    pub precondition: Vec<Literal>,
    pub outcomes: Vec<AbstractOutcome<Atom>>,
    /// Predicates and fluents this action affects in ways the abstraction
    /// cannot determine (`?` effects).
    pub affected_unknown: BTreeSet<String>,
    pub cost: f64,
    pub concretization: Concretization,
    /// The source precondition carried `batterySufficient(tr)`.
    pub battery_guarded: bool,
    /// The battery is debited by the trajectory cost.
    pub drains_battery: bool,
    /// Sum of constant battery decrements.
    pub constant_drain: f64,
    pub restores_battery: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbstractOutcome<T> {
    pub probability: Probability,
    pub add: Vec<T>,
    pub delete: Vec<T>,
}

/// Drops the continuous arguments of `domain.actions[schema]`.
pub fn abstract_action(domain: &Domain, schema: usize) -> Result<AbstractActionSchema, AbstractionError> {
    let a = &domain.actions[schema];
    let is_continuous = |v: &str| a.param(v).is_some_and(|p| p.ty.is_continuous());
    let mut precondition = Vec::new();
    let mut battery_guarded = false;
    let mut targets = Vec::new();
    for lit in &a.precondition {
        if !lit.atom.args.iter().any(|v| is_continuous(v)) {
            precondition.push(lit.clone());
            continue;
        }
        // Lower-arity projection: keep only discrete arguments.
        let discrete: Vec<&String> = lit.atom.args.iter().filter(|v| !is_continuous(v)).collect();
        match lit.atom.predicate.as_str() {
            BATTERY_SUFFICIENT => {
                battery_guarded = lit.positive;
                precondition.push(Literal {
                    atom: Atom {
                        predicate: BATTERY_SUFFICIENT.to_string(),
                        args: Vec::new(),
                    },
                    positive: lit.positive,
                });
            }
            COLLISION_FREE => {}
            REACHES if discrete.len() == 1 => {
                targets.push(Concretization::Reach { var: discrete[0].clone() })
            }
            INSPECTS if discrete.len() == 1 => {
                targets.push(Concretization::Inspect { var: discrete[0].clone() })
            }
            other => {
                return Err(AbstractionError::UnsupportedGeometric {
                    action: a.name.clone(),
                    predicate: other.to_string(),
                });
            }
        }
    }
    let has_continuous = a.continuous_params().next().is_some();
    let concretization = match (has_continuous, targets.len()) {
        (false, _) => Concretization::Stationary,
        (true, 1) => targets.pop().expect("one target"),
        (true, 0) => return Err(AbstractionError::NoGenerator { action: a.name.clone() }),
        (true, _) => return Err(AbstractionError::AmbiguousGenerator { action: a.name.clone() }),
    };

    let mut affected_unknown = BTreeSet::new();
    let mut drains_battery = false;
    let mut constant_drain = 0.0;
    let mut restores_battery = false;
    for e in &a.numeric_effects {
        match e {
            NumericEffect::Decrease { fluent, amount } => {
                match amount {
                    Amount::TrajectoryCost(_) => drains_battery = true,
                    Amount::Constant(c) => {
                        constant_drain += num_traits::ToPrimitive::to_f64(c).unwrap_or(0.0)
                    }
                }
                affected_unknown.insert(fluent.clone());
                affected_unknown.insert(BATTERY_SUFFICIENT.to_string());
            }
            NumericEffect::Restore { .. } => restores_battery = true,
        }
    }
    let outcomes = a
        .outcomes
        .iter()
        .map(|o| {
            let mut add = o.add.clone();
            if restores_battery {
                add.push(Atom {
                    predicate: BATTERY_SUFFICIENT.to_string(),
                    args: Vec::new(),
                });
            }
            AbstractOutcome {
                probability: o.probability.clone(),
                add,
                delete: o.delete.clone(),
            }
        })
        .collect();
    if restores_battery {
        affected_unknown.remove(BATTERY_SUFFICIENT);
    }
    Ok(AbstractActionSchema {
        name: a.name.clone(),
        schema,
        precondition,
        outcomes,
        affected_unknown,
        cost: a.cost_f64(),
        concretization,
        battery_guarded,
        drains_battery,
        constant_drain,
        restores_battery,
    })
}

/// A grounded abstract action.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractAction {
    pub source: GroundedAction,
    pub precondition: Vec<(GroundedFact, bool)>,
    pub outcomes: Vec<AbstractOutcome<GroundedFact>>,
    pub affected_unknown: BTreeSet<String>,
    pub cost: f64,
    /// Object named by the concretization variable, if any.
    pub target: Option<String>,
}

impl AbstractAction {
    fn ground(lifted: &AbstractActionSchema, source: GroundedAction, domain: &Domain) -> Self {
        let binding = source.binding(domain);
        let ground_all = |atoms: &[Atom]| atoms.iter().map(|a| a.ground(&binding)).collect::<Vec<_>>();
        let target = match &lifted.concretization {
            Concretization::Stationary => None,
            Concretization::Reach { var } | Concretization::Inspect { var } => {
                binding.get(var.as_str()).map(|s| s.to_string())
            }
        };
        let precondition = lifted
            .precondition
            .iter()
            .map(|l| (l.atom.ground(&binding), l.positive))
            .collect();
        let outcomes = lifted
            .outcomes
            .iter()
            .map(|o| AbstractOutcome {
                probability: o.probability.clone(),
                add: ground_all(&o.add),
                delete: ground_all(&o.delete),
            })
            .collect();
        AbstractAction {
            source,
            precondition,
            outcomes,
            affected_unknown: lifted.affected_unknown.clone(),
            cost: lifted.cost,
            target,
        }
    }

    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn applicable(&self, s: &AbstractState) -> bool {
        self.precondition.iter().all(|(f, positive)| s.holds(f) == *positive)
    }

    /// Successor distribution. Deletes apply before adds. Zero-probability
    /// outcomes are dropped and outcomes reaching the same state are merged,
    /// keeping first-occurrence order. Unknown (`?`) effects leave their
    /// predicates untouched.
    pub fn successors(&self, s: &AbstractState) -> Vec<(Probability, AbstractState)> {
        let mut out: Vec<(Probability, AbstractState)> = Vec::with_capacity(self.outcomes.len());
        for o in self.outcomes.iter().filter(|o| !o.probability.is_zero()) {
            let mut facts = s.facts.clone();
            for d in &o.delete {
                facts.remove(d);
            }
            for a in &o.add {
                facts.insert(a.clone());
            }
            let next = AbstractState { facts };
            match out.iter_mut().find(|(_, st)| *st == next) {
                Some((p, _)) => *p += &o.probability,
                None => out.push((o.probability.clone(), next)),
            }
        }
        out
    }
}

/// The abstract model of a problem: grounded abstract actions sorted by
/// (name, arguments), the abstract initial state and the goal.
#[derive(Clone, Debug)]
pub struct AbstractModel {
    pub domain: Domain,
    pub problem: Problem,
    pub retained: Retained,
    pub schemas: Vec<AbstractActionSchema>,
    pub actions: Vec<AbstractAction>,
    pub initial: AbstractState,
    index: HashMap<GroundedAction, usize>,
}

impl AbstractModel {
    pub fn new(domain: &Domain, problem: &Problem, retained: Retained) -> Result<Self, AbstractionError> {
        let schemas = (0..domain.actions.len())
            .map(|i| abstract_action(domain, i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut grounded = ground_actions(domain, problem);
        grounded.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
        let actions: Vec<AbstractAction> = grounded
            .into_iter()
            .map(|g| {
                let lifted = &schemas[g.schema];
                AbstractAction::ground(lifted, g, domain)
            })
            .collect();
        let index = actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.source.clone(), i))
            .collect();
        let concrete = ConcreteState {
            facts: problem.init.clone(),
            numeric: problem.numeric_init.clone(),
        };
        let initial = abstract_state(&concrete, &retained);
        Ok(AbstractModel {
            domain: domain.clone(),
            problem: problem.clone(),
            retained,
            schemas,
            actions,
            initial,
            index,
        })
    }

    pub fn is_goal(&self, s: &AbstractState) -> bool {
        s.satisfies(&self.problem.goal)
    }

    pub fn schema_of(&self, action: usize) -> &AbstractActionSchema {
        &self.schemas[self.actions[action].source.schema]
    }

    pub fn action_index(&self, g: &GroundedAction) -> Option<usize> {
        self.index.get(g).copied()
    }

    /// Whether a parameter type of the source schema is continuous.
    pub fn is_continuous_param(&self, schema: usize, var: &str) -> bool {
        self.domain.actions[schema]
            .param(var)
            .is_some_and(|p| matches!(p.ty, ParamType::Pose | ParamType::Trajectory))
    }
}
