use std::collections::BTreeMap;
use std::fmt;

use super::{Domain, Problem};

/// An action schema with every discrete parameter bound to an object.
/// Continuous parameters stay symbolic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundedAction {
    pub name: String,
    /// Objects for the schema's discrete parameters, in declaration order.
    pub args: Vec<String>,
    /// Index of the schema in `Domain::actions`.
    pub schema: usize,
}

impl GroundedAction {
    /// Variable-to-object binding for the discrete parameters.
    pub fn binding<'a>(&'a self, domain: &'a Domain) -> BTreeMap<&'a str, &'a str> {
        domain.actions[self.schema]
            .discrete_params()
            .zip(&self.args)
            .map(|(p, o)| (p.name.as_str(), o.as_str()))
            .collect()
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(a)?;
        }
        f.write_str(")")
    }
}

/// Enumerates all type-compatible instantiations of each schema's discrete
/// parameters. Objects are taken in problem declaration order.
pub fn ground_actions(domain: &Domain, problem: &Problem) -> Vec<GroundedAction> {
    let mut out = Vec::new();
    for (schema_idx, schema) in domain.actions.iter().enumerate() {
        let choices: Vec<Vec<&str>> = schema
            .discrete_params()
            .map(|p| problem.objects_of_type(&p.ty.to_string()).collect())
            .collect();
        if choices.iter().any(Vec::is_empty) {
            continue;
        }
        // Odometer over the choice lists, last parameter fastest.
        let mut idx = vec![0usize; choices.len()];
        'odometer: loop {
            out.push(GroundedAction {
                name: schema.name.clone(),
                args: idx.iter().zip(&choices).map(|(&i, c)| c[i].to_string()).collect(),
                schema: schema_idx,
            });
            for k in (0..choices.len()).rev() {
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    continue 'odometer;
                }
                idx[k] = 0;
            }
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_domain, parse_problem};

    const DOMAIN: &str = r#"
(define (domain g)
  (:types Structure Location)
  (:predicates (at ?l - Location) (faultLocated ?s - Structure)
               (inspects ?tr - Trajectory ?s - Structure))
  (:action inspect :parameters (?s - Structure ?tr - Trajectory)
     :precondition (inspects ?tr ?s) :effect (faultLocated ?s))
  (:action move :parameters (?from - Location ?to - Location ?tr - Trajectory)
     :precondition (at ?from) :effect (and (at ?to) (not (at ?from))))
  (:action wait :parameters () :effect (and)))
"#;

    fn problem(objects: &str) -> String {
        format!("(define (problem p) (:domain g) (:objects {objects}) (:horizon 2))")
    }

    /// Independent enumeration: every tuple of declared objects whose types
    /// match the discrete parameters, by filtering the full Cartesian power.
    fn brute_force_count(domain: &Domain, p: &Problem) -> usize {
        domain
            .actions
            .iter()
            .map(|a| {
                let arity = a.discrete_params().count();
                let n = p.objects.len();
                let mut count = 0;
                for code in 0..n.pow(arity as u32) {
                    let mut c = code;
                    let ok = a.discrete_params().all(|param| {
                        let obj = &p.objects[c % n];
                        c /= n;
                        param.ty.to_string() == obj.1
                    });
                    if ok {
                        count += 1;
                    }
                }
                count
            })
            .sum()
    }

    #[test]
    fn inspect_grounds_once_per_structure() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&problem("LeftWing RightWing - Structure"), &d).unwrap();
        let g = ground_actions(&d, &p);
        let inspects: Vec<_> = g.iter().filter(|a| a.name == "inspect").collect();
        assert_eq!(inspects.len(), 2);
        assert_eq!(inspects[0].args, vec!["LeftWing"]);
        assert_eq!(inspects[1].args, vec!["RightWing"]);
        // Zero Location objects: no move groundings; `wait` has exactly one.
        assert_eq!(g.iter().filter(|a| a.name == "move").count(), 0);
        assert_eq!(g.iter().filter(|a| a.name == "wait").count(), 1);
    }

    #[test]
    fn counts_match_brute_force() {
        let d = parse_domain(DOMAIN).unwrap();
        for objects in [
            "LeftWing RightWing - Structure",
            "LeftWing - Structure Dock A B - Location",
            "Dock A B C - Location",
            "",
        ] {
            let p = parse_problem(&problem(objects), &d).unwrap();
            let g = ground_actions(&d, &p);
            assert_eq!(g.len(), brute_force_count(&d, &p), "objects: {objects}");
            let mut sorted = g.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), g.len());
        }
    }

    #[test]
    fn binding_maps_discrete_params() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&problem("Dock A - Location"), &d).unwrap();
        let g = ground_actions(&d, &p);
        let mv = g.iter().find(|a| a.name == "move" && a.args == ["Dock", "A"]).unwrap();
        let b = mv.binding(&d);
        assert_eq!(b["from"], "Dock");
        assert_eq!(b["to"], "A");
        assert!(!b.contains_key("tr"));
        assert_eq!(mv.to_string(), "move(Dock,A)");
    }
}
