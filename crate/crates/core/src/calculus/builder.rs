use std::collections::BTreeMap;

use thiserror::Error;

use super::{schemata_named, InstValue, Justification, ProofLine, ProofScript, Theory};
use crate::syntax::{Assignment, Family, Formula, Signature, Sort};

/// Emits explicit proof lines. Every method returns the id of the line it
/// wrote; derived lemmas expand into plain axiom and rule lines.
#[derive(Clone, Debug, Default)]
pub struct ProofBuilder {
    theory: Option<String>,
    lines: Vec<ProofLine>,
    formulas: BTreeMap<u64, Formula>,
}

impl ProofBuilder {
    pub fn new(theory: Option<&str>) -> ProofBuilder {
        ProofBuilder {
            theory: theory.map(str::to_string),
            ..ProofBuilder::default()
        }
    }

    pub fn formula(&self, id: u64) -> &Formula {
        &self.formulas[&id]
    }

    pub fn last(&self) -> Option<u64> {
        self.lines.last().map(|l| l.id)
    }

    fn push(&mut self, f: Formula, by: Justification) -> u64 {
        let id = self.lines.len() as u64 + 1;
        self.lines.push(ProofLine {
            id,
            formula: f.to_string(),
            by,
        });
        self.formulas.insert(id, f);
        id
    }

    /// An instance of the named schema; the sort variant is picked by the
    /// assignment.
    pub fn axiom(&mut self, name: &str, asg: &Assignment) -> u64 {
        let f = schemata_named(name)
            .find_map(|s| s.schema.instantiate_open(asg).ok())
            .unwrap_or_else(|| panic!("no sort-correct instance of `{name}`"));
        let inst: BTreeMap<String, InstValue> = asg
            .metas
            .iter()
            .map(|(k, fam)| {
                let v = if fam.params.is_empty() {
                    InstValue::Formula(fam.body.to_string())
                } else {
                    InstValue::Family {
                        params: fam.params.clone(),
                        body: fam.body.to_string(),
                    }
                };
                (k.clone(), v)
            })
            .collect();
        let by = Justification::Axiom {
            name: name.to_string(),
            inst: (!inst.is_empty()).then_some(inst),
            terms: (!asg.terms.is_empty()).then(|| asg.terms.clone()),
        };
        self.push(f, by)
    }

    pub fn theory_entry(&mut self, name: &str, f: Formula) -> u64 {
        self.push(f, Justification::Theory { name: name.to_string() })
    }

    pub fn hyp(&mut self, f: Formula) -> u64 {
        self.push(f, Justification::Hyp)
    }

    pub fn mp(&mut self, minor: u64, major: u64) -> u64 {
        let Formula::Imp(_, r) = self.formula(major).clone() else {
            panic!("line {major} is not an implication");
        };
        self.push(*r, Justification::Mp { minor, major })
    }

    pub fn gen(&mut self, line: u64, var: &str) -> u64 {
        let f = Formula::forall(var, self.formula(line).clone());
        self.push(
            f,
            Justification::Gen {
                line,
                var: var.to_string(),
            },
        )
    }

    pub fn forall_intro(&mut self, line: u64, var: &str) -> u64 {
        let Formula::Imp(a, b) = self.formula(line).clone() else {
            panic!("line {line} is not an implication");
        };
        let f = Formula::imp(*a, Formula::forall(var, *b));
        self.push(
            f,
            Justification::ForallIntro {
                line,
                var: var.to_string(),
            },
        )
    }

    pub fn exists_elim(&mut self, line: u64, var: &str) -> u64 {
        let Formula::Imp(a, b) = self.formula(line).clone() else {
            panic!("line {line} is not an implication");
        };
        let f = Formula::imp(Formula::exists(var, *a), *b);
        self.push(
            f,
            Justification::ExistsElim {
                line,
                var: var.to_string(),
            },
        )
    }

    pub fn nec_bang(&mut self, line: u64) -> u64 {
        let f = Formula::bang(self.formula(line).clone());
        self.push(f, Justification::NecBang { line })
    }

    pub fn nec_quest(&mut self, line: u64) -> u64 {
        let f = Formula::quest(self.formula(line).clone());
        self.push(f, Justification::NecQuest { line })
    }

    fn imp_parts(&self, line: u64) -> (Formula, Formula) {
        match self.formula(line) {
            Formula::Imp(a, b) => ((**a).clone(), (**b).clone()),
            f => panic!("`{f}` is not an implication"),
        }
    }

    /// A -> A from K and S.
    pub fn identity(&mut self, a: &Formula) -> u64 {
        let aa = Formula::imp(a.clone(), a.clone());
        let s = self.axiom(
            "s",
            &Assignment::new()
                .constant("A", a.clone())
                .constant("B", aa)
                .constant("C", a.clone()),
        );
        let k1 = self.axiom(
            "k",
            &Assignment::new()
                .constant("A", a.clone())
                .constant("B", Formula::imp(a.clone(), a.clone())),
        );
        let m = self.mp(k1, s);
        let k2 = self.axiom("k", &Assignment::new().constant("A", a.clone()).constant("B", a.clone()));
        self.mp(k2, m)
    }

    /// From A -> B and B -> C, A -> C.
    pub fn hs(&mut self, ab: u64, bc: u64) -> u64 {
        let (a, b) = self.imp_parts(ab);
        let (_, c) = self.imp_parts(bc);
        let k = self.axiom(
            "k",
            &Assignment::new()
                .constant("A", self.formula(bc).clone())
                .constant("B", a.clone()),
        );
        let abc = self.mp(bc, k);
        let s = self.axiom(
            "s",
            &Assignment::new().constant("A", a).constant("B", b).constant("C", c),
        );
        let m = self.mp(abc, s);
        self.mp(ab, m)
    }

    /// From X -> Y and X -> Z, X -> Y /\ Z.
    pub fn pair(&mut self, xy: u64, xz: u64) -> u64 {
        let (x, y) = self.imp_parts(xy);
        let (_, z) = self.imp_parts(xz);
        let z_clone = z.clone();
        let i = self.axiom("and-i", &Assignment::new().constant("A", y.clone()).constant("B", z.clone()));
        let xzyz = self.hs(xy, i);
        let s = self.axiom(
            "s",
            &Assignment::new()
                .constant("A", x)
                .constant("B", z)
                .constant("C", Formula::and(y, z_clone)),
        );
        let m = self.mp(xzyz, s);
        self.mp(xz, m)
    }

    /// From A -> A' and B -> B', A /\ B -> A' /\ B'.
    pub fn and_map(&mut self, f: u64, g: u64) -> u64 {
        let (a, _) = self.imp_parts(f);
        let (b, _) = self.imp_parts(g);
        let e1 = self.axiom("and-e1", &Assignment::new().constant("A", a.clone()).constant("B", b.clone()));
        let e2 = self.axiom("and-e2", &Assignment::new().constant("A", a).constant("B", b));
        let l = self.hs(e1, f);
        let r = self.hs(e2, g);
        self.pair(l, r)
    }

    /// From A -> B, ?A -> ?B.
    pub fn mono_quest(&mut self, ab: u64) -> u64 {
        let (a, b) = self.imp_parts(ab);
        let q = self.nec_quest(ab);
        let law = self.axiom("quest-imp", &Assignment::new().constant("A", a).constant("B", b));
        self.mp(q, law)
    }

    /// From P -> Q, !P -> !Q.
    pub fn mono_bang(&mut self, pq: u64) -> u64 {
        let (p, q) = self.imp_parts(pq);
        let b = self.nec_bang(pq);
        let law = self.axiom("bang-imp", &Assignment::new().constant("P", p).constant("Q", q));
        self.mp(b, law)
    }

    /// From A(x) -> B(x), (forall x. A(x)) -> forall x. B(x).
    pub fn mono_forall(&mut self, ab: u64, var: &str) -> u64 {
        let (a, _) = self.imp_parts(ab);
        let inst = self.axiom(
            "all-e",
            &Assignment::new()
                .set("A", Family::new(&[var], a))
                .term("t", var),
        );
        let h = self.hs(inst, ab);
        self.forall_intro(h, var)
    }

    /// From a biconditional, its right-to-left half.
    pub fn iff_backward(&mut self, iff: u64) -> u64 {
        let Formula::And(l, r) = self.formula(iff).clone() else {
            panic!("line {iff} is not a biconditional");
        };
        let e2 = self.axiom("and-e2", &Assignment::new().constant("A", *l).constant("B", *r));
        self.mp(iff, e2)
    }

    /// From a biconditional, its left-to-right half.
    pub fn iff_forward(&mut self, iff: u64) -> u64 {
        let Formula::And(l, r) = self.formula(iff).clone() else {
            panic!("line {iff} is not a biconditional");
        };
        let e1 = self.axiom("and-e1", &Assignment::new().constant("A", *l).constant("B", *r));
        self.mp(iff, e1)
    }

    /// From B -> C, (A -> B) -> (A -> C).
    pub fn post_compose(&mut self, bc: u64, a: &Formula) -> u64 {
        let (b, c) = self.imp_parts(bc);
        let k = self.axiom(
            "k",
            &Assignment::new()
                .constant("A", self.formula(bc).clone())
                .constant("B", a.clone()),
        );
        let abc = self.mp(bc, k);
        let s = self.axiom(
            "s",
            &Assignment::new().constant("A", a.clone()).constant("B", b).constant("C", c),
        );
        self.mp(abc, s)
    }

    /// From X -> (Y -> Z), Y -> (X -> Z).
    pub fn permute(&mut self, xyz: u64) -> u64 {
        let (x, yz) = self.imp_parts(xyz);
        let Formula::Imp(y, z) = yz else {
            panic!("line {xyz} is not a curried implication");
        };
        let k = self.axiom("k", &Assignment::new().constant("A", (*y).clone()).constant("B", x.clone()));
        let s = self.axiom(
            "s",
            &Assignment::new().constant("A", x).constant("B", *y).constant("C", *z),
        );
        let m = self.mp(xyz, s);
        self.hs(k, m)
    }

    /// From X /\ Y -> Z, X -> (Y -> Z).
    pub fn export(&mut self, xyz: u64) -> u64 {
        let (xy, _) = self.imp_parts(xyz);
        let Formula::And(x, y) = xy else {
            panic!("line {xyz} has no conjunctive antecedent");
        };
        let i = self.axiom("and-i", &Assignment::new().constant("A", *x).constant("B", (*y).clone()));
        let post = self.post_compose(xyz, &y);
        self.hs(i, post)
    }

    /// X -> Y where every conjunct of Y is a conjunct of X.
    pub fn project(&mut self, x: &Formula, y: &Formula) -> u64 {
        if let Formula::And(l, r) = y {
            if !x.alpha_eq(y) {
                let a = self.project(x, l);
                let b = self.project(x, r);
                return self.pair(a, b);
            }
        }
        self.select(x, y)
            .unwrap_or_else(|| panic!("`{y}` is not a conjunct of `{x}`"))
    }

    fn select(&mut self, x: &Formula, y: &Formula) -> Option<u64> {
        if x.alpha_eq(y) {
            return Some(self.identity(x));
        }
        let Formula::And(l, r) = x else {
            return None;
        };
        for (side, name) in [(l, "and-e1"), (r, "and-e2")] {
            if contains_conjunct(side, y) {
                let e = self.axiom(name, &Assignment::new().constant("A", (**l).clone()).constant("B", (**r).clone()));
                if side.alpha_eq(y) {
                    return Some(e);
                }
                let rest = self.select(side, y)?;
                return Some(self.hs(e, rest));
            }
        }
        None
    }

    /// A -> ~~A.
    pub fn dn_intro(&mut self, a: &Formula) -> u64 {
        let fal = Formula::falsity(a.sort_of());
        let na = Formula::imp(a.clone(), fal.clone());
        let id = self.identity(&na);
        let s = self.axiom(
            "s",
            &Assignment::new()
                .constant("A", na.clone())
                .constant("B", a.clone())
                .constant("C", fal),
        );
        let m = self.mp(id, s);
        let k = self.axiom("k", &Assignment::new().constant("A", a.clone()).constant("B", na));
        self.hs(k, m)
    }

    /// (A -> B) -> (~B -> ~A).
    pub fn contraposition(&mut self, a: &Formula, b: &Formula) -> u64 {
        let fal = Formula::falsity(a.sort_of());
        let s = self.axiom(
            "s",
            &Assignment::new()
                .constant("A", a.clone())
                .constant("B", b.clone())
                .constant("C", fal),
        );
        let k = self.axiom(
            "k",
            &Assignment::new()
                .constant("A", Formula::not(b.clone()))
                .constant("B", a.clone()),
        );
        let h = self.hs(k, s);
        self.permute(h)
    }

    /// From A(x) -> B(x), (exists x. A(x)) -> exists x. B(x).
    pub fn mono_exists(&mut self, ab: u64, var: &str) -> u64 {
        let (_, b) = self.imp_parts(ab);
        let intro = self.axiom(
            "ex-i",
            &Assignment::new()
                .set("A", Family::new(&[var], b))
                .term("t", var),
        );
        let h = self.hs(ab, intro);
        self.exists_elim(h, var)
    }

    /// ?A /\ ?B -> ?(A /\ B).
    pub fn quest_and(&mut self, a: &Formula, b: &Formula) -> u64 {
        let i = self.axiom("and-i", &Assignment::new().constant("A", a.clone()).constant("B", b.clone()));
        let q = self.nec_quest(i);
        let bab = Formula::imp(b.clone(), Formula::and(a.clone(), b.clone()));
        let l1 = self.axiom("quest-imp", &Assignment::new().constant("A", a.clone()).constant("B", bab));
        let qa_qbab = self.mp(q, l1);
        let l2 = self.axiom(
            "quest-imp",
            &Assignment::new()
                .constant("A", b.clone())
                .constant("B", Formula::and(a.clone(), b.clone())),
        );
        let chain = self.hs(qa_qbab, l2);
        self.import(chain)
    }

    /// From X -> (Y -> Z), X /\ Y -> Z.
    pub fn import(&mut self, xyz: u64) -> u64 {
        let (x, yz) = self.imp_parts(xyz);
        let Formula::Imp(y, z) = yz else {
            panic!("line {xyz} is not a curried implication");
        };
        let xy = Formula::and(x.clone(), (*y).clone());
        let e1 = self.axiom("and-e1", &Assignment::new().constant("A", x.clone()).constant("B", (*y).clone()));
        let e2 = self.axiom("and-e2", &Assignment::new().constant("A", x).constant("B", (*y).clone()));
        let first = self.hs(e1, xyz);
        let s = self.axiom(
            "s",
            &Assignment::new().constant("A", xy).constant("B", *y).constant("C", *z),
        );
        let m = self.mp(first, s);
        self.mp(e2, m)
    }

    /// For a conjunction tree p, the formula S with each conjunct banged and
    /// a line S -> !p. `None` when p is not a conjunction (S is !p itself).
    fn split_bang(&mut self, p: &Formula) -> (Formula, Option<u64>) {
        self.split_bang_until(p, &|_| false)
    }

    /// Like the full split, but conjunctions satisfying `keep` stay whole
    /// under a single `!`.
    pub fn split_bang_until(&mut self, p: &Formula, keep: &dyn Fn(&Formula) -> bool) -> (Formula, Option<u64>) {
        let Formula::And(l, r) = p else {
            return (Formula::bang(p.clone()), None);
        };
        if keep(p) {
            return (Formula::bang(p.clone()), None);
        }
        let (sl, il) = self.split_bang_until(l, keep);
        let (sr, ir) = self.split_bang_until(r, keep);
        let (il_split, ir_split) = (il.is_some(), ir.is_some());
        let il = il.unwrap_or_else(|| self.identity(&sl));
        let ir = ir.unwrap_or_else(|| self.identity(&sr));
        let both = if il_split || ir_split {
            Some(self.and_map(il, ir))
        } else {
            None
        };
        let law = self.axiom(
            "bang-and",
            &Assignment::new()
                .constant("P", (**l).clone())
                .constant("Q", (**r).clone()),
        );
        let back = self.iff_backward(law);
        let id = match both {
            Some(b) => self.hs(b, back),
            None => back,
        };
        (Formula::and(sl, sr), Some(id))
    }

    pub fn finish(self) -> ProofScript {
        let mut sig = Signature::new();
        for f in self.formulas.values() {
            sig.merge(&Signature::of_formula(f));
        }
        ProofScript {
            theory: self.theory,
            signature: Some(sig),
            lines: self.lines,
        }
    }
}

fn contains_conjunct(x: &Formula, y: &Formula) -> bool {
    x.alpha_eq(y) || matches!(x, Formula::And(l, r) if contains_conjunct(l, y) || contains_conjunct(r, y))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("`{0}` is not a classical formula")]
    NotClassical(String),
}

/// Turns a classical formula `forall xs. (p -> q)` into a script ending in
/// `forall xs. (!p -> !q)`, with a conjunctive `p` split into banged
/// conjuncts. The formula is cited from the theory when it is an entry,
/// proved outright when it is an identity, and taken as a hypothesis
/// otherwise.
pub fn derive_intuitionistic_lift(axiom: &Formula, theory: &Theory) -> Result<ProofScript, LiftError> {
    if axiom.sort_of() != Sort::Proposition || axiom.check_sorts().is_err() {
        return Err(LiftError::NotClassical(axiom.to_string()));
    }
    let closed = if axiom.is_closed() {
        axiom.clone()
    } else {
        axiom.universal_closure()
    };
    let (vars, body) = closed.strip_foralls();
    let vars = vars.to_vec();
    let body = body.clone();
    let name = (!theory.name.is_empty()).then_some(theory.name.as_str());
    let mut b = ProofBuilder::new(name);

    let mut cur = theory
        .entries
        .iter()
        .find(|e| e.formula.alpha_eq(&closed))
        .map(|e| b.theory_entry(&e.name, e.formula.clone()));
    let open = match (&body, cur) {
        (Formula::Imp(l, r), None) if l.alpha_eq(r) => b.identity(l),
        _ => {
            let mut id = match cur.take() {
                Some(id) => id,
                None => b.hyp(closed.clone()),
            };
            for v in &vars {
                let Formula::Forall(_, inner) = b.formula(id).clone() else {
                    unreachable!()
                };
                let fam = Family::new(&[v.as_str()], *inner);
                let inst = b.axiom("all-e", &Assignment::new().set("A", fam).term("t", v));
                id = b.mp(id, inst);
            }
            id
        }
    };

    let banged = b.nec_bang(open);
    let mut last = banged;
    if let Formula::Imp(p, q) = &body {
        let law = b.axiom(
            "bang-imp",
            &Assignment::new()
                .constant("P", (**p).clone())
                .constant("Q", (**q).clone()),
        );
        last = b.mp(banged, law);
        if let (_, Some(split)) = b.split_bang(p) {
            last = b.hs(split, last);
        }
    }
    for v in vars.iter().rev() {
        last = b.gen(last, v);
    }
    Ok(b.finish())
}

/// The chain `?forall x. A -> ?forall x. !?A -> forall x. ?A` for a problem
/// `alpha` in `var`, as a closed-up implication.
pub fn quest_forall_chain(var: &str, alpha: &Formula) -> ProofScript {
    let mut b = ProofBuilder::new(None);
    let unit = b.axiom("unit", &Assignment::new().constant("A", alpha.clone()));
    let under = b.mono_forall(unit, var);
    let first = b.mono_quest(under);
    let qa = Formula::quest(alpha.clone());
    let law = b.axiom("bang-all", &Assignment::new().set("P", Family::new(&[var], qa.clone())));
    let back = b.iff_backward(law);
    let lifted = b.mono_quest(back);
    let counit = b.axiom(
        "counit",
        &Assignment::new().constant("P", Formula::forall(var, qa)),
    );
    let second = b.hs(lifted, counit);
    b.hs(first, second);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::super::{check_proof, EntryKind, Verdict};
    use super::*;
    use crate::syntax::parse_inferred;

    fn accepted(s: &ProofScript, t: &Theory) -> Formula {
        match check_proof(s, t) {
            Verdict::Accepted { conclusion, .. } => conclusion,
            v => panic!("{v}\n{}", s.to_jsonl()),
        }
    }

    #[test]
    fn lemmas_check() {
        let t = Theory::empty();
        let a = parse_inferred("?q").unwrap();
        let mut b = ProofBuilder::new(None);
        b.identity(&a);
        assert_eq!(accepted(&b.finish(), &t).to_string(), "?q -> ?q");

        let mut b = ProofBuilder::new(None);
        let x = b.hyp(parse_inferred("p -> q").unwrap());
        let y = b.hyp(parse_inferred("q -> r").unwrap());
        let z = b.hs(x, y);
        let w = b.hyp(parse_inferred("p -> s").unwrap());
        b.pair(z, w);
        assert_eq!(accepted(&b.finish(), &t).to_string(), "p -> r /\\ s");
    }

    #[test]
    fn lift_of_plain_atom_axiom() {
        let mut t = Theory::empty();
        t.name = "T".into();
        let ax = parse_inferred("forall a b. cong(a,b,b,a)").unwrap();
        t.add("1", EntryKind::Axiom, ax.clone()).unwrap();
        let s = derive_intuitionistic_lift(&ax, &t).unwrap();
        let c = accepted(&s, &t);
        assert!(c.alpha_eq(&parse_inferred("forall a b. !cong(a,b,b,a)").unwrap()), "{c}");
    }

    #[test]
    fn lift_splits_conjunctive_antecedent() {
        let mut t = Theory::empty();
        let ax = parse_inferred("forall x y a b c. (e(x,y) /\\ e(a,b) /\\ e(c,x) -> e(c,y))").unwrap();
        t.add("13", EntryKind::Axiom, ax.clone()).unwrap();
        let s = derive_intuitionistic_lift(&ax, &t).unwrap();
        let c = accepted(&s, &t);
        let want = parse_inferred("forall x y a b c. (!e(x,y) /\\ !e(a,b) /\\ !e(c,x) -> !e(c,y))").unwrap();
        assert!(c.alpha_eq(&want), "{c}");
    }

    #[test]
    fn lift_of_identity_needs_no_theory() {
        let s = derive_intuitionistic_lift(&parse_inferred("p -> p").unwrap(), &Theory::empty()).unwrap();
        let c = accepted(&s, &Theory::empty());
        assert_eq!(c.to_string(), "!p -> !p");
        assert!(derive_intuitionistic_lift(&parse_inferred("!p").unwrap(), &Theory::empty()).is_err());
    }

    #[test]
    fn coupled_chain_checks() {
        let alpha = parse_inferred("(forall y. r(x,y)) -> bot").unwrap();
        let s = quest_forall_chain("x", &alpha);
        let c = accepted(&s, &Theory::empty());
        let want = Formula::imp(
            Formula::quest(Formula::forall("x", alpha.clone())),
            Formula::forall("x", Formula::quest(alpha)),
        );
        assert!(c.alpha_eq(&want), "{c}");
    }

    #[test]
    fn combinator_lemmas_check() {
        let f = |t: &str| parse_inferred(t).unwrap();
        let t = Theory::empty();

        let mut b = ProofBuilder::new(None);
        let h = b.hyp(f("!p /\\ !q -> !r"));
        let e = b.export(h);
        let p = b.permute(e);
        b.import(p);
        assert_eq!(accepted(&b.finish(), &t).to_string(), "!q /\\ !p -> !r");

        let mut b = ProofBuilder::new(None);
        let x = f("(!a /\\ !b) /\\ (!c /\\ !d)");
        b.project(&x, &f("!d /\\ (!a /\\ !c)"));
        assert_eq!(accepted(&b.finish(), &t), f("(!a /\\ !b) /\\ (!c /\\ !d) -> !d /\\ (!a /\\ !c)"));

        let mut b = ProofBuilder::new(None);
        b.contraposition(&f("!p"), &f("!q"));
        assert_eq!(accepted(&b.finish(), &t).to_string(), "(!p -> !q) -> ~!q -> ~!p");

        let mut b = ProofBuilder::new(None);
        b.dn_intro(&f("!p"));
        assert_eq!(accepted(&b.finish(), &t).to_string(), "!p -> ~~!p");

        let mut b = ProofBuilder::new(None);
        let c = b.axiom("counit", &Assignment::new().constant("P", f("p(x)")));
        b.mono_exists(c, "x");
        assert_eq!(accepted(&b.finish(), &t).to_string(), "exists x. ?!p(x) -> exists x. p(x)");

        let mut b = ProofBuilder::new(None);
        b.quest_and(&f("!p"), &f("!q"));
        assert_eq!(accepted(&b.finish(), &t).to_string(), "?!p /\\ ?!q -> ?(!p /\\ !q)");
    }
}
