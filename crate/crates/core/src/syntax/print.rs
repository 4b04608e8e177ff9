use std::fmt;

use super::formula::Formula;

const IFF: u8 = 1;
const IMP: u8 = 2;
const OR: u8 = 3;
const AND: u8 = 4;
const UNARY: u8 = 5;
const ATOM: u8 = 6;

/// Renders formulas in the ASCII surface syntax.
///
/// With `sugar` set, `?!p`, `!?a` and `~?!~p` are printed as `box p`,
/// `nabla a` and `dia p`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Printer {
    pub sugar: bool,
}

impl Printer {
    pub fn sugared() -> Printer {
        Printer { sugar: true }
    }

    pub fn print(&self, f: &Formula) -> String {
        self.go(f).0
    }

    fn wrap(&self, f: &Formula, min: u8) -> String {
        let (s, p) = self.go(f);
        if p < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn negated(f: &Formula) -> Option<&Formula> {
        match f {
            Formula::Imp(x, r) if **r == Formula::falsity(x.sort_of()) => Some(x),
            _ => None,
        }
    }

    fn sugar_form<'a>(&self, f: &'a Formula) -> Option<(&'static str, &'a Formula)> {
        if !self.sugar {
            return None;
        }
        if let Some(x) = Printer::negated(f) {
            if let Formula::Quest(b) = x {
                if let Formula::Bang(c) = &**b {
                    if let Some(p) = Printer::negated(c) {
                        return Some(("dia ", p));
                    }
                }
            }
        }
        match f {
            Formula::Quest(b) => match &**b {
                Formula::Bang(p) => Some(("box ", p)),
                _ => None,
            },
            Formula::Bang(b) => match &**b {
                Formula::Quest(a) => Some(("nabla ", a)),
                _ => None,
            },
            _ => None,
        }
    }

    fn go(&self, f: &Formula) -> (String, u8) {
        if let Some((kw, x)) = self.sugar_form(f) {
            return (format!("{kw}{}", self.wrap(x, UNARY)), UNARY);
        }
        if let Some((a, b)) = f.as_iff() {
            return (
                format!("{} <-> {}", self.wrap(a, IMP), self.wrap(b, IMP)),
                IFF,
            );
        }
        if let Some(x) = Printer::negated(f) {
            return (format!("~{}", self.wrap(x, UNARY)), UNARY);
        }
        match f {
            Formula::Atom(a) => {
                if a.args.is_empty() {
                    (a.name.clone(), ATOM)
                } else {
                    (format!("{}({})", a.name, a.args.join(",")), ATOM)
                }
            }
            Formula::True => ("tt".into(), ATOM),
            Formula::False => ("ff".into(), ATOM),
            Formula::Bot => ("bot".into(), ATOM),
            Formula::And(l, r) => (
                format!("{} /\\ {}", self.wrap(l, AND), self.wrap(r, UNARY)),
                AND,
            ),
            Formula::Or(l, r) => (
                format!("{} \\/ {}", self.wrap(l, OR), self.wrap(r, AND)),
                OR,
            ),
            Formula::Imp(l, r) => (
                format!("{} -> {}", self.wrap(l, OR), self.wrap(r, IMP)),
                IMP,
            ),
            Formula::Forall(v, b) => (format!("forall {v}. {}", self.wrap(b, UNARY)), UNARY),
            Formula::Exists(v, b) => (format!("exists {v}. {}", self.wrap(b, UNARY)), UNARY),
            Formula::Bang(b) => (format!("!{}", self.wrap(b, UNARY)), UNARY),
            Formula::Quest(b) => (format!("?{}", self.wrap(b, UNARY)), UNARY),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::default().print(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_inferred;

    #[test]
    fn basic_forms() {
        let p = Formula::prop("p", &[]);
        assert_eq!(Formula::imp(Formula::boxed(p.clone()), p).to_string(), "?!p -> p");
        let a = Formula::prob("a", &[]);
        assert_eq!(Formula::nabla(a.clone()).to_string(), "!?a");
        assert_eq!(Printer::sugared().print(&Formula::nabla(a)), "nabla a");
        let c = Formula::forall("x", Formula::bang(Formula::prop("cong", &["x", "x", "x", "x"])));
        assert_eq!(c.to_string(), "forall x. !cong(x,x,x,x)");
    }

    #[test]
    fn precedence_and_parens() {
        for s in [
            "p -> q -> r",
            "(p -> q) -> r",
            "p /\\ q \\/ r",
            "p /\\ (q \\/ r)",
            "~(p /\\ q)",
            "~~p",
            "?(a -> b) <-> ?!(?a -> ?b)",
            "forall x. (p(x) -> q(x))",
            "forall x. p(x) /\\ q",
            "?forall x. a(x) <-> ?!forall x. ?a(x)",
            "p \\/ (q \\/ r)",
            "(p <-> q) <-> r",
        ] {
            let f = parse_inferred(s).unwrap();
            assert_eq!(f.to_string(), s);
        }
    }

    #[test]
    fn sugar_printing() {
        let f = parse_inferred("dia p -> box q").unwrap();
        assert_eq!(f.to_string(), "~?!~p -> ?!q");
        assert_eq!(Printer::sugared().print(&f), "dia p -> box q");
        assert_eq!(parse_inferred(&Printer::sugared().print(&f)).unwrap(), f);
    }
}
