use std::fmt::{self, Write};

use super::{rational_to_string, ActionSchema, Amount, Atom, Domain, NumericEffect, Param};

fn write_atom(out: &mut String, atom: &Atom) {
    out.push('(');
    out.push_str(&atom.predicate);
    for a in &atom.args {
        out.push_str(" ?");
        out.push_str(a);
    }
    out.push(')');
}

fn write_params(out: &mut String, params: &[Param]) {
    out.push('(');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "?{} - {}", p.name, p.ty);
    }
    out.push(')');
}

fn write_action(out: &mut String, a: &ActionSchema) {
    let _ = write!(out, "  (:action {}\n    :parameters ", a.name);
    write_params(out, &a.params);
    out.push_str("\n    :precondition (and");
    for lit in &a.precondition {
        out.push(' ');
        if lit.positive {
            write_atom(out, &lit.atom);
        } else {
            out.push_str("(not ");
            write_atom(out, &lit.atom);
            out.push(')');
        }
    }
    out.push_str(")\n    :effect (and (probabilistic");
    for o in &a.outcomes {
        let _ = write!(out, " {} (and", rational_to_string(&o.probability));
        for atom in &o.add {
            out.push(' ');
            write_atom(out, atom);
        }
        for atom in &o.delete {
            out.push_str(" (not ");
            write_atom(out, atom);
            out.push(')');
        }
        out.push(')');
    }
    out.push(')');
    for e in &a.numeric_effects {
        match e {
            NumericEffect::Decrease { fluent, amount } => {
                let amount = match amount {
                    Amount::TrajectoryCost(v) => format!("(cost ?{v})"),
                    Amount::Constant(c) => rational_to_string(c),
                };
                let _ = write!(out, " (decrease ({fluent}) {amount})");
            }
            NumericEffect::Restore { fluent } => {
                let _ = write!(out, " (restore ({fluent}))");
            }
        }
    }
    let _ = write!(out, ")\n    :cost {})\n", rational_to_string(&a.cost));
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "(define (domain {})", self.name);
        out.push_str("  (:types");
        for t in &self.types {
            out.push(' ');
            out.push_str(t);
        }
        out.push_str(")\n  (:predicates");
        for p in &self.predicates {
            out.push_str("\n    (");
            out.push_str(&p.name);
            if !p.params.is_empty() {
                out.push(' ');
                let mut buf = String::new();
                write_params(&mut buf, &p.params);
                out.push_str(&buf[1..buf.len() - 1]);
            }
            out.push(')');
        }
        out.push_str(")\n  (:functions");
        for fl in &self.functions {
            let _ = write!(out, " ({fl})");
        }
        out.push_str(")\n");
        for a in &self.actions {
            write_action(&mut out, a);
        }
        out.push_str(")\n");
        f.write_str(&out)
    }
}
