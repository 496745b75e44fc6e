use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::sexpr::{read_all, Pos, Sexp};
use super::{
    rational_to_string, ActionSchema, Amount, Atom, Domain, GroundedFact, LangError, Literal,
    NumericEffect, Outcome, Param, ParamType, PredicateSchema, Problem,
};

/// Parses a non-negative decimal (`0.8`), fraction (`4/5`) or integer into an
/// exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() || n < BigInt::zero() || d < BigInt::zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    Some(BigRational::new(numer, denom))
}

fn expect_rational(s: &Sexp, what: &str) -> Result<BigRational, LangError> {
    let text = s.expect_atom(what)?;
    parse_rational(text)
        .ok_or_else(|| LangError::syntax(s.pos(), format!("expected {what}, found `{text}`")))
}

fn variable(s: &Sexp) -> Result<String, LangError> {
    let text = s.expect_atom("variable")?;
    text.strip_prefix('?')
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .ok_or_else(|| LangError::syntax(s.pos(), format!("expected `?variable`, found `{text}`")))
}

/// Splits `a b - T c - U` style typed lists. Returns `(name, type, pos)`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, Pos)>, LangError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let text = items[i].expect_atom("name")?;
        if text == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| LangError::syntax(items[i].pos(), "missing type after `-`"))?;
            let ty_name = ty.expect_atom("type name")?;
            if pending.is_empty() {
                return Err(LangError::syntax(items[i].pos(), "type without preceding names"));
            }
            for (n, p) in pending.drain(..) {
                out.push((n, ty_name.to_string(), p));
            }
            i += 2;
        } else {
            pending.push((text.to_string(), items[i].pos()));
            i += 1;
        }
    }
    if let Some((n, p)) = pending.first() {
        return Err(LangError::syntax(*p, format!("`{n}` has no type")));
    }
    Ok(out)
}

/// Validates the `(define (KIND NAME) ...)` wrapper and returns the name and body.
fn define_block<'a>(forms: &'a [Sexp], kind: &str) -> Result<(String, &'a [Sexp]), LangError> {
    let form = match forms {
        [single] => single,
        [] => return Err(LangError::syntax(Pos { line: 1, col: 1 }, "empty input")),
        [_, extra, ..] => {
            return Err(LangError::syntax(extra.pos(), "unexpected form after `define`"));
        }
    };
    let items = form.expect_list("(define ...)")?;
    if items.first().and_then(Sexp::as_atom) != Some("define") {
        return Err(LangError::syntax(form.pos(), "expected `(define ...)`"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| LangError::syntax(form.pos(), format!("missing ({kind} NAME)")))?;
    let h = header.expect_list("header")?;
    match h {
        [k, name] if k.as_atom() == Some(kind) => {
            Ok((name.expect_atom("name")?.to_string(), &items[2..]))
        }
        _ => Err(LangError::syntax(header.pos(), format!("expected ({kind} NAME)"))),
    }
}

/// Parses a domain description.
pub fn parse_domain(text: &str) -> Result<Domain, LangError> {
    let forms = read_all(text)?;
    let (name, body) = define_block(&forms, "domain")?;
    let mut domain = Domain {
        name,
        types: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
    };
    let mut action_forms = Vec::new();
    for section in body {
        let items = section.expect_list("domain section")?;
        let head = section.head().unwrap_or("");
        match head {
            ":types" => {
                for t in &items[1..] {
                    let name = t.expect_atom("type name")?;
                    if name == "Pose" || name == "Trajectory" {
                        return Err(LangError::invalid(
                            name,
                            t.pos(),
                            "continuous types are built in",
                        ));
                    }
                    if domain.types.iter().any(|x| x == name) {
                        return Err(LangError::invalid(name, t.pos(), "duplicate type"));
                    }
                    domain.types.push(name.to_string());
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let schema = parse_predicate_schema(p, &domain.types)?;
                    if domain.predicate(&schema.name).is_some() {
                        return Err(LangError::invalid(&schema.name, p.pos(), "duplicate predicate"));
                    }
                    domain.predicates.push(schema);
                }
            }
            ":functions" => {
                for f in &items[1..] {
                    let l = f.expect_list("(fluent)")?;
                    let [name] = l else {
                        return Err(LangError::syntax(f.pos(), "numeric fluents take no parameters"));
                    };
                    let name = name.expect_atom("fluent name")?;
                    if domain.functions.iter().any(|x| x == name) {
                        return Err(LangError::invalid(name, f.pos(), "duplicate fluent"));
                    }
                    domain.functions.push(name.to_string());
                }
            }
            ":action" => action_forms.push(section),
            other => {
                return Err(LangError::syntax(
                    section.pos(),
                    format!("unknown domain section `{other}`"),
                ));
            }
        }
    }
    for form in action_forms {
        let action = parse_action(form, &domain)?;
        if domain.action(&action.name).is_some() {
            return Err(LangError::invalid(&action.name, form.pos(), "duplicate action"));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

fn resolve_type(name: &str, pos: Pos, types: &[String]) -> Result<ParamType, LangError> {
    let ty = ParamType::from_name(name);
    if let ParamType::Object(t) = &ty {
        if !types.iter().any(|x| x == t) {
            return Err(LangError::UndeclaredType {
                name: t.clone(),
                line: pos.line,
                col: pos.col,
            });
        }
    }
    Ok(ty)
}

fn parse_params(items: &[Sexp], types: &[String]) -> Result<Vec<Param>, LangError> {
    let mut params: Vec<Param> = Vec::new();
    for (raw, ty, pos) in typed_list(items)? {
        let name = raw
            .strip_prefix('?')
            .filter(|v| !v.is_empty())
            .ok_or_else(|| LangError::syntax(pos, format!("expected `?variable`, found `{raw}`")))?;
        if params.iter().any(|p| p.name == name) {
            return Err(LangError::invalid(name, pos, "duplicate parameter"));
        }
        params.push(Param {
            name: name.to_string(),
            ty: resolve_type(&ty, pos, types)?,
        });
    }
    Ok(params)
}

fn parse_predicate_schema(s: &Sexp, types: &[String]) -> Result<PredicateSchema, LangError> {
    let items = s.expect_list("predicate schema")?;
    let (name, rest) = items
        .split_first()
        .ok_or_else(|| LangError::syntax(s.pos(), "empty predicate schema"))?;
    Ok(PredicateSchema {
        name: name.expect_atom("predicate name")?.to_string(),
        params: parse_params(rest, types)?,
    })
}

struct ActionCtx<'a> {
    domain: &'a Domain,
    action: String,
    params: &'a [Param],
}

impl ActionCtx<'_> {
    fn atom(&self, s: &Sexp) -> Result<Atom, LangError> {
        let items = s.expect_list("atom")?;
        let (head, args) = items
            .split_first()
            .ok_or_else(|| LangError::syntax(s.pos(), "empty atom"))?;
        let pname = head.expect_atom("predicate name")?;
        let schema = self.domain.predicate(pname).ok_or_else(|| LangError::UnknownPredicate {
            name: pname.to_string(),
            line: head.pos().line,
            col: head.pos().col,
        })?;
        if schema.params.len() != args.len() {
            return Err(LangError::invalid(
                pname,
                s.pos(),
                format!("expects {} arguments, got {}", schema.params.len(), args.len()),
            ));
        }
        let mut vars = Vec::with_capacity(args.len());
        for (arg, expected) in args.iter().zip(&schema.params) {
            let v = variable(arg)?;
            let param = self.params.iter().find(|p| p.name == v).ok_or_else(|| {
                LangError::invalid(
                    &self.action,
                    arg.pos(),
                    format!("variable `?{v}` is not a parameter"),
                )
            })?;
            if param.ty != expected.ty {
                return Err(LangError::invalid(
                    pname,
                    arg.pos(),
                    format!("`?{v}` has type {}, expected {}", param.ty, expected.ty),
                ));
            }
            vars.push(v);
        }
        Ok(Atom {
            predicate: pname.to_string(),
            args: vars,
        })
    }

    fn literal(&self, s: &Sexp) -> Result<Literal, LangError> {
        if s.head() == Some("not") {
            let items = s.as_list().unwrap_or_default();
            let [_, inner] = items else {
                return Err(LangError::syntax(s.pos(), "`not` takes one atom"));
            };
            Ok(Literal {
                atom: self.atom(inner)?,
                positive: false,
            })
        } else {
            Ok(Literal {
                atom: self.atom(s)?,
                positive: true,
            })
        }
    }

    fn conjunction(&self, s: &Sexp) -> Result<Vec<Literal>, LangError> {
        match s.head() {
            Some("and") => s.as_list().unwrap_or_default()[1..]
                .iter()
                .map(|x| self.literal(x))
                .collect(),
            _ if s.as_list().is_some_and(|l| l.is_empty()) => Ok(Vec::new()),
            _ => Ok(vec![self.literal(s)?]),
        }
    }

    /// Add/delete lists; geometric predicates cannot be effects.
    fn effect_literals(&self, s: &Sexp) -> Result<(Vec<Atom>, Vec<Atom>), LangError> {
        let mut add = Vec::new();
        let mut delete = Vec::new();
        for lit in self.conjunction(s)? {
            let schema = self.domain.predicate(&lit.atom.predicate).expect("checked by atom()");
            if schema.is_geometric() {
                return Err(LangError::invalid(
                    &lit.atom.predicate,
                    s.pos(),
                    "geometric predicates cannot appear in effects",
                ));
            }
            if lit.positive {
                add.push(lit.atom);
            } else {
                delete.push(lit.atom);
            }
        }
        Ok((add, delete))
    }

    fn fluent(&self, s: &Sexp) -> Result<String, LangError> {
        let items = s.expect_list("(fluent)")?;
        let [name] = items else {
            return Err(LangError::syntax(s.pos(), "expected `(fluent)`"));
        };
        let name = name.expect_atom("fluent name")?;
        if !self.domain.functions.iter().any(|f| f == name) {
            return Err(LangError::UnknownFluent {
                name: name.to_string(),
                line: s.pos().line,
                col: s.pos().col,
            });
        }
        Ok(name.to_string())
    }

    fn amount(&self, s: &Sexp) -> Result<Amount, LangError> {
        if let Some(text) = s.as_atom() {
            return parse_rational(text)
                .map(Amount::Constant)
                .ok_or_else(|| LangError::syntax(s.pos(), format!("bad amount `{text}`")));
        }
        let items = s.as_list().unwrap_or_default();
        match items {
            [head, var] if head.as_atom() == Some("cost") => {
                let v = variable(var)?;
                match self.params.iter().find(|p| p.name == v) {
                    Some(p) if p.ty == ParamType::Trajectory => Ok(Amount::TrajectoryCost(v)),
                    Some(_) => Err(LangError::invalid(&v, var.pos(), "`cost` needs a Trajectory")),
                    None => Err(LangError::invalid(
                        &self.action,
                        var.pos(),
                        format!("variable `?{v}` is not a parameter"),
                    )),
                }
            }
            _ => Err(LangError::syntax(s.pos(), "expected a number or `(cost ?tr)`")),
        }
    }
}

fn parse_action(form: &Sexp, domain: &Domain) -> Result<ActionSchema, LangError> {
    let items = form.expect_list("action")?;
    let name = items
        .get(1)
        .ok_or_else(|| LangError::syntax(form.pos(), "action without a name"))?
        .expect_atom("action name")?
        .to_string();
    let mut params = Vec::new();
    let mut precond_form = None;
    let mut effect_form = None;
    let mut cost = BigRational::one();
    let mut i = 2;
    while i < items.len() {
        let key = items[i].expect_atom("action keyword")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| LangError::syntax(items[i].pos(), format!("`{key}` needs a value")))?;
        match key {
            ":parameters" => params = parse_params(value.expect_list("parameter list")?, &domain.types)?,
            ":precondition" => precond_form = Some(value),
            ":effect" => effect_form = Some(value),
            ":cost" => {
                cost = expect_rational(value, "positive cost")?;
                if cost.is_zero() {
                    return Err(LangError::invalid(&name, value.pos(), "cost must be positive"));
                }
            }
            other => {
                return Err(LangError::syntax(
                    items[i].pos(),
                    format!("unknown action keyword `{other}`"),
                ));
            }
        }
        i += 2;
    }
    let ctx = ActionCtx {
        domain,
        action: name.clone(),
        params: &params,
    };
    let precondition = match precond_form {
        Some(p) => ctx.conjunction(p)?,
        None => Vec::new(),
    };

    let mut shared_add = Vec::new();
    let mut shared_del = Vec::new();
    let mut branches: Option<Vec<Outcome>> = None;
    let mut numeric_effects = Vec::new();
    if let Some(effect) = effect_form {
        let parts: Vec<&Sexp> = if effect.head() == Some("and") {
            effect.as_list().unwrap_or_default()[1..].iter().collect()
        } else if effect.as_list().is_some_and(|l| l.is_empty()) {
            Vec::new()
        } else {
            vec![effect]
        };
        for part in parts {
            match part.head() {
                Some("probabilistic") => {
                    if branches.is_some() {
                        return Err(LangError::syntax(part.pos(), "only one probabilistic block allowed"));
                    }
                    let body = &part.as_list().unwrap_or_default()[1..];
                    if body.is_empty() || body.len() % 2 != 0 {
                        return Err(LangError::syntax(part.pos(), "expected probability/effect pairs"));
                    }
                    let mut outs = Vec::new();
                    for pair in body.chunks(2) {
                        let probability = expect_rational(&pair[0], "probability")?;
                        if probability > BigRational::one() {
                            return Err(LangError::syntax(pair[0].pos(), "probability above 1"));
                        }
                        let (add, delete) = ctx.effect_literals(&pair[1])?;
                        outs.push(Outcome {
                            probability,
                            add,
                            delete,
                        });
                    }
                    branches = Some(outs);
                }
                Some("decrease") => {
                    let l = part.as_list().unwrap_or_default();
                    let [_, fluent, amount] = l else {
                        return Err(LangError::syntax(part.pos(), "expected (decrease (F) AMOUNT)"));
                    };
                    numeric_effects.push(NumericEffect::Decrease {
                        fluent: ctx.fluent(fluent)?,
                        amount: ctx.amount(amount)?,
                    });
                }
                Some("restore") => {
                    let l = part.as_list().unwrap_or_default();
                    let [_, fluent] = l else {
                        return Err(LangError::syntax(part.pos(), "expected (restore (F))"));
                    };
                    numeric_effects.push(NumericEffect::Restore {
                        fluent: ctx.fluent(fluent)?,
                    });
                }
                _ => {
                    let (add, delete) = ctx.effect_literals(part)?;
                    shared_add.extend(add);
                    shared_del.extend(delete);
                }
            }
        }
    }
    let mut outcomes = branches.unwrap_or_else(|| {
        vec![Outcome {
            probability: BigRational::one(),
            add: Vec::new(),
            delete: Vec::new(),
        }]
    });
    for o in &mut outcomes {
        o.add.splice(0..0, shared_add.iter().cloned());
        o.delete.splice(0..0, shared_del.iter().cloned());
    }
    let action = ActionSchema {
        name,
        params,
        precondition,
        outcomes,
        numeric_effects,
        cost,
    };
    let sum = action.probability_sum();
    if !sum.is_one() {
        return Err(LangError::ProbabilitySum {
            action: action.name,
            sum: rational_to_string(&sum),
        });
    }
    Ok(action)
}

/// Parses a problem against an already parsed domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, LangError> {
    let forms = read_all(text)?;
    let (name, body) = define_block(&forms, "problem")?;
    let mut problem = Problem {
        name,
        domain_name: domain.name.clone(),
        objects: Vec::new(),
        init: BTreeSet::new(),
        numeric_init: BTreeMap::new(),
        goal: Vec::new(),
        horizon: 0,
    };
    let mut init_form = None;
    let mut goal_form = None;
    let mut horizon: Option<(i64, Pos)> = None;
    for section in body {
        let items = section.expect_list("problem section")?;
        match section.head().unwrap_or("") {
            ":domain" => {
                let [_, d] = items else {
                    return Err(LangError::syntax(section.pos(), "expected (:domain NAME)"));
                };
                let d = d.expect_atom("domain name")?;
                if d != domain.name {
                    return Err(LangError::invalid(
                        d,
                        section.pos(),
                        format!("problem targets domain `{d}`, not `{}`", domain.name),
                    ));
                }
            }
            ":objects" => {
                let mut seen: HashSet<String> = problem.objects.iter().map(|(o, _)| o.clone()).collect();
                for (obj, ty, pos) in typed_list(&items[1..])? {
                    if !domain.types.contains(&ty) {
                        return Err(LangError::UndeclaredType {
                            name: ty,
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    if !seen.insert(obj.clone()) {
                        return Err(LangError::invalid(&obj, pos, "duplicate object"));
                    }
                    problem.objects.push((obj, ty));
                }
            }
            ":init" => init_form = Some(section),
            ":goal" => goal_form = Some(section),
            ":horizon" => {
                let [_, h] = items else {
                    return Err(LangError::syntax(section.pos(), "expected (:horizon N)"));
                };
                let text = h.expect_atom("horizon")?;
                let value: i64 = text
                    .parse()
                    .map_err(|_| LangError::syntax(h.pos(), format!("bad horizon `{text}`")))?;
                horizon = Some((value, h.pos()));
            }
            other => {
                return Err(LangError::syntax(
                    section.pos(),
                    format!("unknown problem section `{other}`"),
                ));
            }
        }
    }
    if let Some(init) = init_form {
        for item in &init.as_list().unwrap_or_default()[1..] {
            if item.head() == Some("=") {
                let l = item.as_list().unwrap_or_default();
                let [_, fluent, value] = l else {
                    return Err(LangError::syntax(item.pos(), "expected (= (F) VALUE)"));
                };
                let fl = fluent.expect_list("(fluent)")?;
                let fname = match fl {
                    [n] => n.expect_atom("fluent name")?,
                    _ => return Err(LangError::syntax(fluent.pos(), "expected (fluent)")),
                };
                if !domain.functions.iter().any(|f| f == fname) {
                    return Err(LangError::UnknownFluent {
                        name: fname.to_string(),
                        line: fluent.pos().line,
                        col: fluent.pos().col,
                    });
                }
                let vtext = value.expect_atom("number")?;
                let v: f64 = vtext
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| LangError::syntax(value.pos(), format!("bad number `{vtext}`")))?;
                problem.numeric_init.insert(fname.to_string(), v);
            } else {
                problem.init.insert(grounded_fact(item, domain, &problem)?);
            }
        }
    }
    if let Some(goal) = goal_form {
        let items = goal.as_list().unwrap_or_default();
        let [_, body] = items else {
            return Err(LangError::syntax(goal.pos(), "expected (:goal FORMULA)"));
        };
        let facts: Vec<&Sexp> = if body.head() == Some("and") {
            body.as_list().unwrap_or_default()[1..].iter().collect()
        } else {
            vec![body]
        };
        for f in facts {
            problem.goal.push(grounded_fact(f, domain, &problem)?);
        }
    }
    match horizon {
        Some((h, _)) if h >= 1 => problem.horizon = h as usize,
        Some((h, _)) => return Err(LangError::Horizon(h)),
        None => return Err(LangError::Horizon(0)),
    }
    Ok(problem)
}

fn grounded_fact(s: &Sexp, domain: &Domain, problem: &Problem) -> Result<GroundedFact, LangError> {
    let items = s.expect_list("fact")?;
    let (head, args) = items
        .split_first()
        .ok_or_else(|| LangError::syntax(s.pos(), "empty fact"))?;
    let pname = head.expect_atom("predicate name")?;
    let schema = domain.predicate(pname).ok_or_else(|| LangError::UnknownPredicate {
        name: pname.to_string(),
        line: head.pos().line,
        col: head.pos().col,
    })?;
    if schema.is_geometric() {
        return Err(LangError::invalid(
            pname,
            s.pos(),
            "geometric predicates cannot appear in states",
        ));
    }
    if schema.params.len() != args.len() {
        return Err(LangError::invalid(
            pname,
            s.pos(),
            format!("expects {} arguments, got {}", schema.params.len(), args.len()),
        ));
    }
    let mut out = Vec::with_capacity(args.len());
    for (arg, param) in args.iter().zip(&schema.params) {
        let obj = arg.expect_atom("object")?;
        let ty = problem.object_type(obj).ok_or_else(|| LangError::UnknownObject {
            name: obj.to_string(),
            line: arg.pos().line,
            col: arg.pos().col,
        })?;
        if ParamType::Object(ty.to_string()) != param.ty {
            return Err(LangError::invalid(
                obj,
                arg.pos(),
                format!("object has type {ty}, expected {}", param.ty),
            ));
        }
        out.push(obj.to_string());
    }
    Ok(GroundedFact {
        predicate: pname.to_string(),
        args: out,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lang::Probability;

    pub(crate) const INSPECT_DOMAIN: &str = r#"
(define (domain inspection)
  (:types Structure)
  (:predicates
    (faultLocated ?s - Structure)
    (batterySufficient ?tr - Trajectory)
    (inspects ?tr - Trajectory ?s - Structure)
    (collisionFree ?tr - Trajectory))
  (:functions (batteryLevel))
  (:action inspect
    :parameters (?s - Structure ?tr - Trajectory)
    :precondition (and (batterySufficient ?tr) (inspects ?tr ?s) (collisionFree ?tr))
    :effect (and (probabilistic 0.8 (faultLocated ?s) 0.2 (not (faultLocated ?s)))
                 (decrease (batteryLevel) (cost ?tr)))))
"#;

    fn r(s: &str) -> Probability {
        parse_rational(s).unwrap()
    }

    #[test]
    fn parses_inspect_action() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let a = d.action("inspect").unwrap();
        assert_eq!(a.outcomes.len(), 2);
        assert_eq!(a.outcomes[0].probability, r("4/5"));
        assert_eq!(a.outcomes[0].add, vec![Atom { predicate: "faultLocated".into(), args: vec!["s".into()] }]);
        assert_eq!(a.outcomes[1].probability, r("1/5"));
        assert_eq!(a.outcomes[1].delete.len(), 1);
        assert_eq!(
            a.numeric_effects,
            vec![NumericEffect::Decrease {
                fluent: "batteryLevel".into(),
                amount: Amount::TrajectoryCost("tr".into())
            }]
        );
        assert_eq!(a.continuous_params().count(), 1);
        assert_eq!(a.cost, BigRational::one());
    }

    #[test]
    fn zero_action_domain_is_valid() {
        let d = parse_domain("(define (domain empty) (:types T) (:predicates (p ?x - T)))").unwrap();
        assert!(d.actions.is_empty());
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let err = parse_domain(
            "(define (domain d) (:types T) (:predicates (p ?x - T))
               (:action a :parameters (?x - T) :effect (probabilistic 0.5 (p ?x) 0.4 (not (p ?x)))))",
        )
        .unwrap_err();
        assert_eq!(
            err,
            LangError::ProbabilitySum {
                action: "a".into(),
                sum: "9/10".into()
            }
        );
    }

    #[test]
    fn undeclared_type_is_rejected() {
        let err = parse_domain("(define (domain d) (:types T) (:predicates (p ?x - Wing)))").unwrap_err();
        assert!(matches!(err, LangError::UndeclaredType { ref name, .. } if name == "Wing"), "{err:?}");
    }

    #[test]
    fn unknown_top_level_form_is_rejected() {
        let err = parse_domain("(define (domain d) (:requirements :strips))").unwrap_err();
        assert!(matches!(err, LangError::Syntax { .. }));
        let err = parse_domain("(define (domain d)) (extra)").unwrap_err();
        assert!(matches!(err, LangError::Syntax { .. }));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_domain("(define (domain d)\n  (:types T)\n  (:predicates (p ?x - T))").unwrap_err();
        assert!(matches!(err, LangError::Syntax { line: 1, col: 1, .. }), "{err:?}");
    }

    #[test]
    fn variables_must_be_parameters() {
        let err = parse_domain(
            "(define (domain d) (:types T) (:predicates (p ?x - T))
               (:action a :parameters (?x - T) :effect (p ?y)))",
        )
        .unwrap_err();
        assert!(matches!(err, LangError::Invalid { .. }), "{err:?}");
    }

    #[test]
    fn geometric_effects_are_rejected() {
        let err = parse_domain(
            "(define (domain d) (:predicates (collisionFree ?tr - Trajectory))
               (:action a :parameters (?tr - Trajectory) :effect (collisionFree ?tr)))",
        )
        .unwrap_err();
        assert!(matches!(err, LangError::Invalid { .. }), "{err:?}");
    }

    #[test]
    fn rationals_parse_exactly() {
        assert_eq!(r("0.8"), BigRational::new(4.into(), 5.into()));
        assert_eq!(r("1"), BigRational::one());
        assert_eq!(r(".5"), BigRational::new(1.into(), 2.into()));
        assert_eq!(r("3/6"), BigRational::new(1.into(), 2.into()));
        assert!(parse_rational("-0.1").is_none());
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("abc").is_none());
        assert!(parse_rational(".").is_none());
    }

    const PROBLEM: &str = r#"
(define (problem two-faults) (:domain inspection)
  (:objects LeftWing RightWing - Structure)
  (:init (= (batteryLevel) 100))
  (:goal (and (faultLocated LeftWing) (faultLocated RightWing)))
  (:horizon 10))
"#;

    #[test]
    fn parses_problem_with_horizon() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let p = parse_problem(PROBLEM, &d).unwrap();
        assert_eq!(p.horizon, 10);
        assert_eq!(p.objects.len(), 2);
        assert_eq!(p.numeric_init["batteryLevel"], 100.0);
        assert_eq!(p.goal.len(), 2);
    }

    #[test]
    fn goal_equal_to_init_is_valid() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let p = parse_problem(
            "(define (problem done) (:domain inspection) (:objects LeftWing - Structure)
               (:init (faultLocated LeftWing)) (:goal (faultLocated LeftWing)) (:horizon 3))",
            &d,
        )
        .unwrap();
        assert!(p.goal.iter().all(|g| p.init.contains(g)));
    }

    #[test]
    fn unknown_object_is_rejected() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain inspection) (:objects LeftWing - Structure)
               (:init) (:goal (faultLocated NoseWheel)) (:horizon 3))",
            &d,
        )
        .unwrap_err();
        assert!(matches!(err, LangError::UnknownObject { ref name, .. } if name == "NoseWheel"), "{err:?}");
    }

    #[test]
    fn horizon_must_be_positive() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let missing = parse_problem("(define (problem p) (:domain inspection) (:goal (and)))", &d);
        assert!(matches!(missing, Err(LangError::Horizon(_))));
        let zero = parse_problem("(define (problem p) (:domain inspection) (:horizon 0))", &d);
        assert_eq!(zero.unwrap_err(), LangError::Horizon(0));
    }

    #[test]
    fn unknown_predicate_in_problem() {
        let d = parse_domain(INSPECT_DOMAIN).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain inspection) (:init (broken)) (:horizon 1))",
            &d,
        )
        .unwrap_err();
        assert!(matches!(err, LangError::UnknownPredicate { .. }));
    }
}
