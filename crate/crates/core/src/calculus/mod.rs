//! Hilbert-style proof kernel for QHC.

mod builder;
mod theory;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::syntax::{Assignment, Family, Formula, Schema, Signature, Sort};

pub use builder::{derive_intuitionistic_lift, quest_forall_chain, LiftError, ProofBuilder};
pub use theory::{EntryKind, MacroDef, NamedFormula, Theory, TheoryEntry, TheoryError, TheoryJson};

/// A named axiom schema. Several schemata may share a name when the same law
/// is stated at both sorts.
#[derive(Clone, Debug)]
pub struct AxiomSchema {
    pub name: &'static str,
    pub schema: Schema,
}

const PA: (&str, Sort, usize) = ("A", Sort::Problem, 0);
const PB: (&str, Sort, usize) = ("B", Sort::Problem, 0);
const PC: (&str, Sort, usize) = ("C", Sort::Problem, 0);
const PA1: (&str, Sort, usize) = ("A", Sort::Problem, 1);
const CP: (&str, Sort, usize) = ("P", Sort::Proposition, 0);
const CQ: (&str, Sort, usize) = ("Q", Sort::Proposition, 0);
const CP1: (&str, Sort, usize) = ("P", Sort::Proposition, 1);

/// The base schemata stated with letters A, B, C; instantiated at both sorts.
const BASE: &[(&str, &str, usize)] = &[
    ("k", "A -> B -> A", 2),
    ("s", "(A -> B -> C) -> (A -> B) -> A -> C", 3),
    ("and-i", "A -> B -> A /\\ B", 2),
    ("and-e1", "A /\\ B -> A", 2),
    ("and-e2", "A /\\ B -> B", 2),
    ("or-i1", "A -> A \\/ B", 2),
    ("or-i2", "B -> A \\/ B", 2),
    ("or-e", "(A -> C) -> (B -> C) -> A \\/ B -> C", 3),
    ("efq", "F -> A", 1),
    ("all-e", "(forall x. A(x)) -> A(t)", 1),
    ("ex-i", "A(t) -> exists x. A(x)", 1),
];

fn build_schemata() -> Vec<AxiomSchema> {
    let mut out = Vec::new();
    for sort in [Sort::Problem, Sort::Proposition] {
        let fal = match sort {
            Sort::Problem => "bot",
            Sort::Proposition => "ff",
        };
        for &(name, text, letters) in BASE {
            let quantified = name == "all-e" || name == "ex-i";
            let metas: Vec<(&str, Sort, usize)> = ["A", "B", "C"][..letters]
                .iter()
                .map(|l| (*l, sort, usize::from(quantified)))
                .collect();
            let text = text.replace('F', fal);
            out.push(AxiomSchema {
                name,
                schema: Schema::parse(name, &text, &metas).expect("base schema parses"),
            });
        }
    }
    let laws: &[(&str, &str, &[(&str, Sort, usize)])] = &[
        ("dne", "~~P -> P", &[CP]),
        ("tt-i", "tt", &[]),
        ("quest-imp", "?(A -> B) -> ?A -> ?B", &[PA, PB]),
        ("bang-imp", "!(P -> Q) -> !P -> !Q", &[CP, CQ]),
        ("bang-bot", "!ff -> bot", &[]),
        ("counit", "?!P -> P", &[CP]),
        ("unit", "A -> !?A", &[PA]),
        ("quest-or", "?(A \\/ B) <-> ?A \\/ ?B", &[PA, PB]),
        ("quest-ex", "?(exists x. A(x)) <-> exists x. ?A(x)", &[PA1]),
        ("bang-all", "!(forall x. P(x)) <-> forall x. !P(x)", &[CP1]),
        ("bang-and", "!(P /\\ Q) <-> !P /\\ !Q", &[CP, CQ]),
        ("quest-all", "(forall x. ?A(x)) -> ?forall x. A(x)", &[PA1]),
        ("bang-ex", "(exists x. !P(x)) -> !exists x. P(x)", &[CP1]),
        ("bang-or", "!P \\/ !Q -> !(P \\/ Q)", &[CP, CQ]),
    ];
    let _ = PC;
    for &(name, text, metas) in laws {
        out.push(AxiomSchema {
            name,
            schema: Schema::parse(name, text, metas).expect("law parses"),
        });
    }
    out
}

/// Every axiom schema of the calculus.
pub fn schemata() -> &'static [AxiomSchema] {
    static TABLE: OnceLock<Vec<AxiomSchema>> = OnceLock::new();
    TABLE.get_or_init(build_schemata)
}

/// Names of the inference rules, for documentation and listing.
pub const RULES: &[&str] = &[
    "mp",
    "gen",
    "forall_intro",
    "exists_elim",
    "nec_bang",
    "nec_quest",
];

pub fn schemata_named(name: &str) -> impl Iterator<Item = &'static AxiomSchema> + '_ {
    schemata().iter().filter(move |s| s.name == name)
}

/// A metavariable instance in a script: a formula, or a family with parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstValue {
    Formula(String),
    Family { params: Vec<String>, body: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Justification {
    Axiom {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inst: Option<BTreeMap<String, InstValue>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terms: Option<BTreeMap<String, String>>,
    },
    Theory {
        name: String,
    },
    Hyp,
    Mp {
        minor: u64,
        major: u64,
    },
    Gen {
        line: u64,
        var: String,
    },
    ForallIntro {
        line: u64,
        var: String,
    },
    ExistsElim {
        line: u64,
        var: String,
    },
    NecBang {
        line: u64,
    },
    NecQuest {
        line: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofLine {
    pub id: u64,
    pub formula: String,
    pub by: Justification,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Header {
    #[serde(default)]
    theory: Option<String>,
    #[serde(default)]
    signature: Option<Signature>,
}

/// A derivation: numbered lines, each justified by earlier lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProofScript {
    pub theory: Option<String>,
    pub signature: Option<Signature>,
    pub lines: Vec<ProofLine>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum RejectReason {
    BadInstance(String),
    BadRule(String),
    FreshnessViolation(String),
    SortError(String),
    ForwardReference(String),
    Malformed(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (k, d) = match self {
            RejectReason::BadInstance(d) => ("bad-instance", d),
            RejectReason::BadRule(d) => ("bad-rule", d),
            RejectReason::FreshnessViolation(d) => ("freshness-violation", d),
            RejectReason::SortError(d) => ("sort-error", d),
            RejectReason::ForwardReference(d) => ("forward-reference", d),
            RejectReason::Malformed(d) => ("malformed", d),
        };
        write!(f, "{k}: {d}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Accepted {
        conclusion: Formula,
        hypotheses: Vec<Formula>,
    },
    Rejected {
        line: u64,
        reason: RejectReason,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted { conclusion, hypotheses } => {
                write!(f, "accepted: {conclusion}")?;
                if !hypotheses.is_empty() {
                    write!(f, " (from {} hypotheses)", hypotheses.len())?;
                }
                Ok(())
            }
            Verdict::Rejected { line, reason } => write!(f, "rejected at line {line}: {reason}"),
        }
    }
}

impl ProofScript {
    /// Parses the JSON-lines format. A first line without `id` is a header
    /// naming the theory and optionally a signature. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_jsonl(text: &str) -> Result<ProofScript, (usize, String)> {
        let mut script = ProofScript::default();
        let mut first = true;
        for (i, raw) in text.lines().enumerate() {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(l).map_err(|e| (i + 1, e.to_string()))?;
            if first && v.get("id").is_none() {
                let h: Header = serde_json::from_value(v).map_err(|e| (i + 1, e.to_string()))?;
                script.theory = h.theory;
                script.signature = h.signature;
            } else {
                script
                    .lines
                    .push(serde_json::from_value(v).map_err(|e| (i + 1, e.to_string()))?);
            }
            first = false;
        }
        Ok(script)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if self.theory.is_some() || self.signature.is_some() {
            let h = Header {
                theory: self.theory.clone(),
                signature: self.signature.clone(),
            };
            out.push_str(&serde_json::to_string(&h).expect("header serializes"));
            out.push('\n');
        }
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("line serializes"));
            out.push('\n');
        }
        out
    }
}

/// Strips up to all of the leading universal quantifiers; yields each
/// stripped form, outermost first.
fn forall_prefixes(f: &Formula) -> Vec<&Formula> {
    let mut out = vec![f];
    let mut cur = f;
    while let Formula::Forall(_, b) = cur {
        out.push(b);
        cur = b;
    }
    out
}

fn check_axiom(
    f: &Formula,
    name: &str,
    inst: &Option<BTreeMap<String, InstValue>>,
    terms: &Option<BTreeMap<String, String>>,
    theory: &Theory,
) -> Result<(), RejectReason> {
    let variants: Vec<&AxiomSchema> = schemata_named(name).collect();
    if variants.is_empty() {
        return Err(RejectReason::BadRule(format!("no axiom schema named `{name}`")));
    }
    let candidates = forall_prefixes(f);
    match inst {
        None => {
            for s in &variants {
                if candidates.iter().any(|c| s.schema.match_formula(c).is_some()) {
                    return Ok(());
                }
            }
            Err(RejectReason::BadInstance(format!("`{f}` is not an instance of `{name}`")))
        }
        Some(inst) => {
            let mut asg = Assignment::new();
            for (k, v) in inst {
                let fam = match v {
                    InstValue::Formula(text) => Family::constant(
                        theory
                            .parse(text)
                            .map_err(|e| RejectReason::SortError(format!("instance for `{k}`: {e}")))?,
                    ),
                    InstValue::Family { params, body } => Family {
                        params: params.clone(),
                        body: theory
                            .parse(body)
                            .map_err(|e| RejectReason::SortError(format!("instance for `{k}`: {e}")))?,
                    },
                };
                asg.metas.insert(k.clone(), fam);
            }
            if let Some(t) = terms {
                asg.terms = t.clone();
            }
            let mut last = None;
            for s in &variants {
                match s.schema.instantiate_open(&asg) {
                    Ok(g) => {
                        if candidates.iter().any(|c| c.alpha_eq(&g)) {
                            return Ok(());
                        }
                        last = Some(RejectReason::BadInstance(format!(
                            "instance is `{g}`, line states `{f}`"
                        )));
                    }
                    Err(e) => {
                        if last.is_none() {
                            last = Some(RejectReason::SortError(e.to_string()));
                        }
                    }
                }
            }
            Err(last.expect("at least one variant"))
        }
    }
}

/// Checks a script against a theory.
pub fn check_proof(script: &ProofScript, theory: &Theory) -> Verdict {
    let mut t = theory.clone();
    if let Some(sig) = &script.signature {
        t.signature.merge(sig);
    }
    let mut proved: BTreeMap<u64, Formula> = BTreeMap::new();
    let mut hyps: Vec<Formula> = Vec::new();
    let mut last_id: Option<u64> = None;
    let mut conclusion = None;
    for line in &script.lines {
        let reject = |reason| Verdict::Rejected {
            line: line.id,
            reason,
        };
        if last_id.is_some_and(|p| line.id <= p) {
            return reject(RejectReason::BadRule(format!(
                "line ids must increase (previous was {})",
                last_id.unwrap()
            )));
        }
        last_id = Some(line.id);
        let f = match t.parse(&line.formula) {
            Ok(f) => f,
            Err(e) => {
                let r = match e.kind {
                    crate::syntax::ParseErrorKind::Syntax(_) => RejectReason::Malformed(e.to_string()),
                    _ => RejectReason::SortError(e.to_string()),
                };
                return reject(r);
            }
        };
        let get = |id: u64| -> Result<&Formula, RejectReason> {
            proved.get(&id).ok_or_else(|| {
                RejectReason::ForwardReference(format!("line {id} is not an earlier line"))
            })
        };
        let result: Result<(), RejectReason> = (|| match &line.by {
            Justification::Axiom { name, inst, terms } => check_axiom(&f, name, inst, terms, &t),
            Justification::Theory { name } => {
                let e = t
                    .lookup(name)
                    .ok_or_else(|| RejectReason::BadRule(format!("theory has no entry `{name}`")))?;
                if e.formula.alpha_eq(&f) {
                    Ok(())
                } else {
                    Err(RejectReason::BadInstance(format!(
                        "entry `{name}` is `{}`",
                        e.formula
                    )))
                }
            }
            Justification::Hyp => {
                hyps.push(f.clone());
                Ok(())
            }
            Justification::Mp { minor, major } => {
                let a = get(*minor)?;
                let imp = get(*major)?;
                match imp {
                    Formula::Imp(l, r) if l.alpha_eq(a) && r.alpha_eq(&f) => Ok(()),
                    Formula::Imp(l, _) if !l.alpha_eq(a) => Err(RejectReason::BadRule(format!(
                        "antecedent of line {major} does not match line {minor}"
                    ))),
                    Formula::Imp(..) => Err(RejectReason::BadRule(format!(
                        "consequent of line {major} is not the stated formula"
                    ))),
                    _ => Err(RejectReason::BadRule(format!("line {major} is not an implication"))),
                }
            }
            Justification::Gen { line: i, var } => {
                let p = get(*i)?;
                if let Some(h) = hyps.iter().find(|h| h.free_var_set().contains(var)) {
                    return Err(RejectReason::FreshnessViolation(format!(
                        "`{var}` is free in hypothesis `{h}`"
                    )));
                }
                if Formula::forall(var, p.clone()).alpha_eq(&f) {
                    Ok(())
                } else {
                    Err(RejectReason::BadRule(format!("expected `forall {var}.` of line {i}")))
                }
            }
            Justification::ForallIntro { line: i, var } | Justification::ExistsElim { line: i, var } => {
                let p = get(*i)?;
                let Formula::Imp(a, b) = p else {
                    return Err(RejectReason::BadRule(format!("line {i} is not an implication")));
                };
                let forall = matches!(line.by, Justification::ForallIntro { .. });
                let (side, expected) = if forall {
                    (a, Formula::imp((**a).clone(), Formula::forall(var, (**b).clone())))
                } else {
                    (b, Formula::imp(Formula::exists(var, (**a).clone()), (**b).clone()))
                };
                if side.free_var_set().contains(var) {
                    return Err(RejectReason::FreshnessViolation(format!(
                        "`{var}` is free in `{side}`"
                    )));
                }
                if let Some(h) = hyps.iter().find(|h| h.free_var_set().contains(var)) {
                    return Err(RejectReason::FreshnessViolation(format!(
                        "`{var}` is free in hypothesis `{h}`"
                    )));
                }
                if expected.alpha_eq(&f) {
                    Ok(())
                } else {
                    Err(RejectReason::BadRule(format!("expected `{expected}`")))
                }
            }
            Justification::NecBang { line: i } => {
                let p = get(*i)?;
                if p.sort_of() != Sort::Proposition {
                    return Err(RejectReason::SortError(format!("line {i} is not a proposition")));
                }
                if Formula::bang(p.clone()).alpha_eq(&f) {
                    Ok(())
                } else {
                    Err(RejectReason::BadRule(format!("expected `!` of line {i}")))
                }
            }
            Justification::NecQuest { line: i } => {
                let p = get(*i)?;
                if p.sort_of() != Sort::Problem {
                    return Err(RejectReason::SortError(format!("line {i} is not a problem")));
                }
                if Formula::quest(p.clone()).alpha_eq(&f) {
                    Ok(())
                } else {
                    Err(RejectReason::BadRule(format!("expected `?` of line {i}")))
                }
            }
        })();
        if let Err(r) = result {
            return reject(r);
        }
        proved.insert(line.id, f.clone());
        conclusion = Some(f);
    }
    match conclusion {
        Some(c) => Verdict::Accepted {
            conclusion: c,
            hypotheses: hyps,
        },
        None => Verdict::Rejected {
            line: 0,
            reason: RejectReason::Malformed("empty script".into()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_inferred;

    fn one(name: &str, asg: Assignment) -> Formula {
        let s = schemata_named(name).find(|s| s.schema.instantiate_open(&asg).is_ok()).unwrap();
        s.schema.instantiate_open(&asg).unwrap()
    }

    #[test]
    fn named_instances() {
        let p = Formula::prop("p", &[]);
        let a = Formula::prob("a", &[]);
        assert_eq!(one("counit", Assignment::new().constant("P", p)).to_string(), "?!p -> p");
        assert_eq!(one("unit", Assignment::new().constant("A", a)).to_string(), "a -> !?a");
        let bb = one("bang-bot", Assignment::new());
        assert_eq!(bb, parse_inferred("!ff -> bot").unwrap());
    }

    #[test]
    fn every_schema_is_sort_correct() {
        for s in schemata() {
            assert!(s.schema.body.check_sorts().is_ok(), "{}", s.name);
        }
        assert_eq!(schemata_named("k").count(), 2);
    }

    fn script(lines: &str) -> ProofScript {
        ProofScript::from_jsonl(lines).unwrap()
    }

    #[test]
    fn closed_counit_instance_accepted() {
        let s = script(r#"{"id":1,"formula":"forall a b c d. (?!cong(a,b,c,d) -> cong(a,b,c,d))","by":{"rule":"axiom","name":"counit","inst":{"P":"cong(a,b,c,d)"}}}"#);
        assert!(check_proof(&s, &Theory::empty()).is_accepted());
        let s = script(r#"{"id":1,"formula":"forall a b c d. (?!cong(a,b,c,d) -> cong(a,b,c,d))","by":{"rule":"axiom","name":"counit"}}"#);
        assert!(check_proof(&s, &Theory::empty()).is_accepted());
    }

    #[test]
    fn theory_axiom_then_necessitation() {
        let mut t = Theory::empty();
        t.add("1", EntryKind::Axiom, parse_inferred("forall a b. cong(a,b,b,a)").unwrap())
            .unwrap();
        let s = script(
            r#"{"theory":"T"}
{"id":1,"formula":"forall a b. cong(a,b,b,a)","by":{"rule":"theory","name":"1"}}
{"id":2,"formula":"!forall a b. cong(a,b,b,a)","by":{"rule":"nec_bang","line":1}}"#,
        );
        let v = check_proof(&s, &t);
        assert!(v.is_accepted(), "{v}");
    }

    #[test]
    fn rejections_name_line_and_reason() {
        let t = Theory::empty();
        let s = script(r#"{"id":1,"formula":"a -> b -> b","by":{"rule":"axiom","name":"k"}}"#);
        assert!(matches!(check_proof(&s, &t), Verdict::Rejected { line: 1, reason: RejectReason::BadInstance(_) }));
        let s = script(r#"{"id":1,"formula":"p","by":{"rule":"mp","minor":2,"major":3}}"#);
        assert!(matches!(check_proof(&s, &t), Verdict::Rejected { line: 1, reason: RejectReason::ForwardReference(_) }));
        let s = script(
            r#"{"id":1,"formula":"q(x) -> q(x) \\/ r","by":{"rule":"axiom","name":"or-i1"}}
{"id":2,"formula":"q(x) -> forall x. (q(x) \\/ r)","by":{"rule":"forall_intro","line":1,"var":"x"}}"#,
        );
        let v = check_proof(&s, &t);
        assert!(matches!(v, Verdict::Rejected { line: 2, reason: RejectReason::FreshnessViolation(_) }), "{v}");
        let s = script(r#"{"id":1,"formula":"!q -> !q","by":{"rule":"axiom","name":"unit","inst":{"A":"q"}}}"#);
        assert!(matches!(check_proof(&s, &t), Verdict::Rejected { line: 1, .. }));
        let s = script(
            r#"{"id":1,"formula":"q","by":{"rule":"hyp"}}
{"id":2,"formula":"!q","by":{"rule":"nec_quest","line":1}}"#,
        );
        assert!(matches!(check_proof(&s, &t), Verdict::Rejected { line: 2, reason: RejectReason::SortError(_) }));
    }

    #[test]
    fn jsonl_round_trip() {
        let s = script(
            r#"{"theory":"T"}
{"id":1,"formula":"p","by":{"rule":"hyp"}}
{"id":2,"formula":"!p","by":{"rule":"nec_bang","line":1}}"#,
        );
        assert_eq!(ProofScript::from_jsonl(&s.to_jsonl()).unwrap(), s);
    }
}
