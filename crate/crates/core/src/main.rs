use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qhc::calculus::{check_proof, derive_intuitionistic_lift, ProofScript, Theory, Verdict};
use qhc::geometry::{self, classify_problem, classical_shadow, push_wn, pure_simple_normal_form};
use qhc::model::{Class, Model};
use qhc::principles::{self, Bounds, SearchOutcome};
use qhc::syntax::{formula_lines, parse, parse_inferred, Formula, Signature};
use qhc::transforms::{box_translate, erase_to_qc, retract_to_qh};

#[derive(Parser)]
#[command(name = "qhc", version, about = "Workbench for QHC, the joint logic of problems and propositions")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse formulas and print them with their sorts.
    Parse {
        /// A formula; omit when using --file.
        formula: Option<String>,
        /// One formula per line, `#` comments.
        #[arg(long, short)]
        file: Option<String>,
        /// Signature JSON; sorts are inferred without one.
        #[arg(long)]
        signature: Option<String>,
    },
    /// Check a proof script.
    Check {
        script: String,
        /// Theory JSON, or `geometry` for the bundled theory T.
        #[arg(long)]
        theory: Option<String>,
    },
    /// Evaluate a formula in a model.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long)]
        formula: String,
        /// Require the model to be of this class.
        #[arg(long)]
        class: Option<Class>,
    },
    /// Search for a finite countermodel to a principle.
    Countermodel {
        #[arg(long)]
        principle: String,
        #[arg(long)]
        class: Class,
        #[command(flatten)]
        bounds: BoundArgs,
    },
    /// Translate a formula into QC, QH or S4.
    Translate {
        #[arg(long)]
        to: Target,
        formula: String,
    },
    /// Apply a rewriting procedure for problems.
    Rewrite {
        #[arg(long)]
        pass: Pass,
        formula: String,
        /// Treat premise conditions as certifiable.
        #[arg(long)]
        assume_certifiable: bool,
        /// Allow `!~p` to become `~!p`.
        #[arg(long)]
        stability: bool,
    },
    /// The principle catalog.
    Principles {
        #[command(subcommand)]
        cmd: PrinciplesCmd,
    },
    /// Bundled theories.
    Theory {
        #[command(subcommand)]
        cmd: TheoryCmd,
    },
}

#[derive(clap::Args)]
struct BoundArgs {
    #[arg(long, env = "QHC_MAX_POINTS", default_value_t = 4)]
    max_points: usize,
    #[arg(long, default_value_t = 2)]
    max_domain: usize,
    #[arg(long, default_value_t = 2)]
    max_stalk: usize,
    /// Worker threads for the search.
    #[arg(long)]
    jobs: Option<usize>,
}

impl BoundArgs {
    fn bounds(&self) -> Bounds {
        Bounds {
            max_points: self.max_points,
            max_domain: self.max_domain,
            max_stalk: self.max_stalk,
        }
    }
}

#[derive(Subcommand)]
enum PrinciplesCmd {
    /// List the catalog.
    List,
    /// Expected against computed status for every principle and class.
    Status {
        #[command(flatten)]
        bounds: BoundArgs,
    },
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Run every validation and bundled derivation of a theory.
    Verify { name: TheoryName },
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryName {
    Geometry,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Qc,
    Qh,
    S4,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pass {
    PushWn,
    Shadow,
    Lift,
    PureSimple,
}

enum Fail {
    Rejected(String),
    Input(String),
    Exhausted,
    Internal(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Internal(_) => 1,
            Fail::Rejected(_) => 2,
            Fail::Input(_) => 3,
            Fail::Exhausted => 4,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Fail {
    Fail::Input(e.to_string())
}

fn read(path: &str) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Input(format!("{path}: {e}")))
}

fn parse_formula(text: &str, sig: Option<&Signature>) -> Result<Formula, Fail> {
    let f = match sig {
        Some(s) => parse(text, s),
        None => parse_inferred(text),
    }
    .map_err(|e| Fail::Input(format!("`{text}`: {e}")))?;
    f.check_sorts().map_err(input)?;
    Ok(f)
}

fn emit(json: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    let out = if json { value.to_string() } else { text() };
    let _ = writeln!(std::io::stdout(), "{out}");
}

fn load_theory(arg: &str) -> Result<Theory, Fail> {
    if arg == "geometry" {
        return geometry::load_theory().map(|g| g.theory).map_err(|e| Fail::Internal(e.to_string()));
    }
    Theory::from_json(&read(arg)?).map_err(input)
}

fn run(cli: Cli) -> Result<(), Fail> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Parse {
            formula,
            file,
            signature,
        } => {
            let sig = match &signature {
                Some(p) => Some(Signature::from_json(&read(p)?).map_err(input)?),
                None => None,
            };
            let items: Vec<(usize, String)> = match (formula, file) {
                (Some(f), None) => vec![(1, f)],
                (None, Some(p)) => formula_lines(&read(&p)?),
                _ => return Err(Fail::Input("give either a formula or --file".into())),
            };
            let mut out = Vec::new();
            for (line, text) in items {
                let f = parse_formula(&text, sig.as_ref())
                    .map_err(|e| match e {
                        Fail::Input(m) => Fail::Input(format!("line {line}: {m}")),
                        e => e,
                    })?;
                out.push((f.to_string(), f.sort_of()));
            }
            emit(
                json,
                json!(out.iter().map(|(f, s)| json!({"formula": f, "sort": s.to_string()})).collect::<Vec<_>>()),
                || out.iter().map(|(f, s)| format!("{f} : {s}")).collect::<Vec<_>>().join("\n"),
            );
        }
        Cmd::Check { script, theory } => {
            let text = read(&script)?;
            let script = ProofScript::from_jsonl(&text)
                .map_err(|(line, m)| Fail::Input(format!("{}: line {line}: {m}", script)))?;
            let theory = match theory.or_else(|| script.theory.clone().filter(|t| t == "T").map(|_| "geometry".into())) {
                Some(t) => load_theory(&t)?,
                None => Theory::empty(),
            };
            let verdict = check_proof(&script, &theory);
            match &verdict {
                Verdict::Accepted { conclusion, hypotheses } => emit(
                    json,
                    json!({
                        "verdict": "accepted",
                        "conclusion": conclusion.to_string(),
                        "hypotheses": hypotheses.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
                    }),
                    || verdict.to_string(),
                ),
                Verdict::Rejected { line, reason } => {
                    emit(json, json!({"verdict": "rejected", "line": line, "reason": reason}), || {
                        verdict.to_string()
                    });
                    return Err(Fail::Rejected(verdict.to_string()));
                }
            }
        }
        Cmd::Eval { model, formula, class } => {
            let m = Model::from_json(&read(&model)?).map_err(input)?;
            if let Some(c) = class {
                if c != m.class() {
                    return Err(Fail::Input(format!("{model} is a {} model, not {c}", m.class())));
                }
            }
            let f = parse_formula(&formula, Some(&m.signature()))?;
            if !f.is_closed() {
                return Err(Fail::Input(format!("`{f}` has free variables")));
            }
            let valid = m.valid(&f).map_err(input)?;
            let value = m.describe(&f).map_err(input)?;
            emit(
                json,
                json!({"formula": f.to_string(), "class": m.class(), "valid": valid, "value": value}),
                || format!("{}: {value}", if valid { "valid" } else { "not valid" }),
            );
        }
        Cmd::Countermodel { principle, class, bounds } => {
            let pr = principles::lookup(&principle).ok_or_else(|| {
                let names: Vec<&str> = principles::catalog().iter().map(|p| p.name).collect();
                Fail::Input(format!("unknown principle `{principle}`; known: {}", names.join(", ")))
            })?;
            let b = bounds.bounds();
            let outcome = principles::with_jobs(bounds.jobs, || principles::find_countermodel(pr, class, b));
            let (value, found) = match &outcome {
                SearchOutcome::Found { witness, census } => (
                    json!({
                        "status": "found",
                        "model": witness.model,
                        "instance": {"premises": witness.premises, "conclusion": witness.conclusion},
                        "census": census,
                    }),
                    true,
                ),
                SearchOutcome::Exhausted { census, finiteness } => (
                    json!({
                        "status": "exhausted",
                        "model": null,
                        "instance": null,
                        "census": census,
                        "finiteness": finiteness,
                    }),
                    false,
                ),
            };
            emit(json, value.clone(), || match &outcome {
                SearchOutcome::Found { witness, census } => format!(
                    "countermodel on {} points, domain {} ({} frames searched)\ninstance: {}{}\nmodel: {}",
                    witness.space.points.len(),
                    witness.domain,
                    census.frames,
                    witness.premises.iter().map(|p| format!("{p} / ")).collect::<String>(),
                    witness.conclusion,
                    witness.model
                ),
                SearchOutcome::Exhausted { census, finiteness } => format!(
                    "no countermodel: {} spaces, {} frames, {} valuations{}",
                    census.spaces,
                    census.frames,
                    census.valuations,
                    finiteness.map(|f| format!("\n{f}")).unwrap_or_default()
                ),
            });
            if !found {
                return Err(Fail::Exhausted);
            }
        }
        Cmd::Translate { to, formula } => {
            let f = parse_formula(&formula, None)?;
            let out = match to {
                Target::Qc => erase_to_qc(&f).map_err(input)?.to_string(),
                Target::Qh => retract_to_qh(&f).to_string(),
                Target::S4 => box_translate(&f).map_err(input)?.to_string(),
            };
            emit(json, json!({"formula": f.to_string(), "image": out}), || out.clone());
        }
        Cmd::Rewrite {
            pass,
            formula,
            assume_certifiable,
            stability,
        } => {
            let f = parse_formula(&formula, None)?;
            let (value, text) = match pass {
                Pass::PushWn => {
                    let p = push_wn(&f).map_err(input)?;
                    let residue: Vec<String> = p.residue.iter().map(|r| r.to_string()).collect();
                    let text = if residue.is_empty() {
                        p.formula.to_string()
                    } else {
                        format!("{}\nneeds certifiability of: {}", p.formula, residue.join(", "))
                    };
                    (json!({"formula": p.formula.to_string(), "residue": residue}), text)
                }
                Pass::Shadow => {
                    let s = classical_shadow(&f, assume_certifiable).map_err(input)?;
                    (json!({"formula": s.to_string()}), s.to_string())
                }
                Pass::PureSimple => {
                    let s = pure_simple_normal_form(&f, stability).map_err(input)?;
                    (
                        json!({"formula": s.to_string(), "class": classify_problem(&s)}),
                        s.to_string(),
                    )
                }
                Pass::Lift => {
                    let script = derive_intuitionistic_lift(&f, &Theory::empty()).map_err(input)?;
                    let jsonl = script.to_jsonl();
                    (json!({"script": jsonl}), jsonl.trim_end().to_string())
                }
            };
            emit(json, value, || text);
        }
        Cmd::Principles { cmd } => match cmd {
            PrinciplesCmd::List => {
                let rows: Vec<_> = principles::catalog()
                    .iter()
                    .map(|p| {
                        let (ps, c) = p.atomic_instance();
                        let shown = if ps.is_empty() {
                            c.to_string()
                        } else {
                            format!("{} / {c}", ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))
                        };
                        (p.name, p.title, shown)
                    })
                    .collect();
                emit(
                    json,
                    json!(rows.iter().map(|(n, t, f)| json!({"name": n, "title": t, "form": f})).collect::<Vec<_>>()),
                    || rows.iter().map(|(n, t, f)| format!("{n:<14} {t:<22} {f}")).collect::<Vec<_>>().join("\n"),
                );
            }
            PrinciplesCmd::Status { bounds } => {
                let b = bounds.bounds();
                let rows = principles::with_jobs(bounds.jobs, || principles::status_matrix(b));
                let value = serde_json::to_value(&rows).map_err(|e| Fail::Internal(e.to_string()))?;
                emit(json, value.clone(), || {
                    let mut lines = vec![format!("{:<14} {:<6} {:<18} {:<18} {}", "principle", "class", "expected", "computed", "agrees")];
                    for (r, v) in rows.iter().zip(value.as_array().into_iter().flatten()) {
                        let computed = match r.computed {
                            principles::Computed::NoCountermodel => "no-countermodel".to_string(),
                            principles::Computed::Countermodel(n) => format!("found on {n} points"),
                        };
                        lines.push(format!(
                            "{:<14} {:<6} {:<18} {:<18} {}",
                            r.principle,
                            r.class.to_string(),
                            v["expected"].as_str().unwrap_or_default(),
                            computed,
                            if r.agrees { "yes" } else { "NO" }
                        ));
                    }
                    lines.join("\n")
                });
                if rows.iter().any(|r| !r.agrees) {
                    return Err(Fail::Rejected("status matrix disagrees with the catalog".into()));
                }
            }
        },
        Cmd::Theory {
            cmd: TheoryCmd::Verify { name: TheoryName::Geometry },
        } => {
            let g = geometry::load_theory().map_err(|e| Fail::Input(e.to_string()))?;
            let report = geometry::verify(&g);
            let value = serde_json::to_value(&report).map_err(|e| Fail::Internal(e.to_string()))?;
            emit(json, value, || {
                let mut lines = vec![format!("theory T, version {}", report.version)];
                for e in &report.entries {
                    lines.push(format!("  {:<13} {:<9} {}", e.name, format!("{:?}", e.kind).to_lowercase(), e.class));
                }
                for (title, checks) in [
                    ("classical shadows", &report.shadows),
                    ("pure simple forms", &report.normal_forms),
                    ("derivations", &report.derivations),
                    ("mutants", &report.mutants),
                ] {
                    lines.push(format!("{title}:"));
                    for c in checks {
                        lines.push(format!("  [{}] {}: {}", if c.ok { "ok" } else { "FAIL" }, c.name, c.detail));
                    }
                }
                lines.join("\n")
            });
            if !report.ok() {
                return Err(Fail::Rejected("theory verification failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Fail::Rejected(m) | Fail::Input(m) | Fail::Internal(m) => eprintln!("error: {m}"),
                Fail::Exhausted => {}
            }
            ExitCode::from(f.code())
        }
    }
}
