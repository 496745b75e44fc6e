//! A PPDDL-flavoured planning language whose action schemas mix discrete
//! object parameters with continuous (`Pose`, `Trajectory`) parameters.
//!
//! Domains live in `.sdom` files and problems in `.sprob` files. Both use an
//! S-expression surface syntax; see `docs/grammar.md` at the repository root
//! for the accepted forms.

mod ground;
mod parse;
mod print;
pub mod sexpr;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

pub use ground::{ground_actions, GroundedAction};
pub use parse::{parse_domain, parse_problem, parse_rational};

/// Exact outcome probability.
pub type Probability = BigRational;

/// Zero-arity battery guard. It is evaluated by the geometry layer and never
/// stored as a fact in concrete states.
pub const BATTERY_SUFFICIENT: &str = "batterySufficient";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("action `{action}`: outcome probabilities sum to {sum}, expected exactly 1")]
    ProbabilitySum { action: String, sum: String },
    #[error("undeclared type `{name}` at {line}:{col}")]
    UndeclaredType { name: String, line: usize, col: usize },
    #[error("unknown predicate `{name}` at {line}:{col}")]
    UnknownPredicate { name: String, line: usize, col: usize },
    #[error("unknown object `{name}` at {line}:{col}")]
    UnknownObject { name: String, line: usize, col: usize },
    #[error("unknown numeric fluent `{name}` at {line}:{col}")]
    UnknownFluent { name: String, line: usize, col: usize },
    #[error("`{what}` at {line}:{col}: {message}")]
    Invalid {
        what: String,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("problem horizon {0} is missing or below 1")]
    Horizon(i64),
}

impl LangError {
    pub(crate) fn syntax(pos: sexpr::Pos, message: impl Into<String>) -> Self {
        LangError::Syntax {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(what: &str, pos: sexpr::Pos, message: impl Into<String>) -> Self {
        LangError::Invalid {
            what: what.to_string(),
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

/// Parameter type. Continuous types form a closed set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamType {
    Object(String),
    Pose,
    Trajectory,
}

impl ParamType {
    pub fn is_continuous(&self) -> bool {
        !matches!(self, ParamType::Object(_))
    }

    pub(crate) fn from_name(name: &str) -> ParamType {
        match name {
            "Pose" => ParamType::Pose,
            "Trajectory" => ParamType::Trajectory,
            other => ParamType::Object(other.to_string()),
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamType::Object(t) => f.write_str(t),
            ParamType::Pose => f.write_str("Pose"),
            ParamType::Trajectory => f.write_str("Trajectory"),
        }
    }
}

/// A typed parameter; `name` is stored without the leading `?`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<Param>,
}

impl PredicateSchema {
    /// Geometric predicates constrain continuous arguments only and are
    /// checked by the concrete layer rather than stored in states.
    pub fn is_geometric(&self) -> bool {
        self.params.iter().any(|p| p.ty.is_continuous())
    }
}

/// A predicate applied to objects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundedFact {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundedFact {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundedFact {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundedFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// A predicate applied to schema variables (names without `?`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn ground(&self, binding: &BTreeMap<&str, &str>) -> GroundedFact {
        GroundedFact {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|v| binding.get(v.as_str()).copied().unwrap_or(v.as_str()).to_string())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Amount {
    /// Charge consumed by following the trajectory bound to the variable.
    TrajectoryCost(String),
    Constant(BigRational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NumericEffect {
    Decrease { fluent: String, amount: Amount },
    /// Refills the fluent to its capacity (docking).
    Restore { fluent: String },
}

impl NumericEffect {
    pub fn fluent(&self) -> &str {
        match self {
            NumericEffect::Decrease { fluent, .. } | NumericEffect::Restore { fluent } => fluent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub probability: Probability,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: Vec<Literal>,
    pub outcomes: Vec<Outcome>,
    pub numeric_effects: Vec<NumericEffect>,
    /// Positive step cost; the step reward is its negation.
    pub cost: BigRational,
}

impl ActionSchema {
    pub fn discrete_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| !p.ty.is_continuous())
    }

    pub fn continuous_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| p.ty.is_continuous())
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn cost_f64(&self) -> f64 {
        self.cost.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn probability_sum(&self) -> Probability {
        self.outcomes
            .iter()
            .fold(Probability::zero(), |acc, o| acc + &o.probability)
    }

    /// Replaces the probabilities of a two-outcome action with
    /// `1 - failure_rate` for the first outcome and `failure_rate` for the
    /// second. Single-outcome actions are left alone.
    pub fn set_failure_rate(&mut self, failure_rate: &Probability) {
        if self.outcomes.len() == 2 {
            self.outcomes[0].probability = Probability::one() - failure_rate;
            self.outcomes[1].probability = failure_rate.clone();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub types: Vec<String>,
    pub predicates: Vec<PredicateSchema>,
    pub functions: Vec<String>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Applies a symmetric failure rate to every stochastic two-outcome action.
    pub fn with_failure_rate(&self, failure_rate: &Probability) -> Domain {
        let mut out = self.clone();
        for a in &mut out.actions {
            a.set_failure_rate(failure_rate);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    /// `(object, type)` in declaration order.
    pub objects: Vec<(String, String)>,
    pub init: BTreeSet<GroundedFact>,
    pub numeric_init: BTreeMap<String, f64>,
    pub goal: Vec<GroundedFact>,
    pub horizon: usize,
}

impl Problem {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|(o, _)| o == name)
            .map(|(_, t)| t.as_str())
    }

    pub fn objects_of_type<'a>(&'a self, ty: &str) -> impl Iterator<Item = &'a str> + 'a {
        let ty = ty.to_string();
        self.objects
            .iter()
            .filter(move |(_, t)| *t == ty)
            .map(|(o, _)| o.as_str())
    }
}

pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
