//! One front for the three model classes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::set_models::{EvalError, ModelClass, ModelError, SetModel};
use crate::sheaf::{SheafModel, SheafModelError, Value};
use crate::syntax::{Formula, Signature, Sort};
use crate::topology::{FiniteSpace, PointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Et,
    Tk,
    Sheaf,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Et, Class::Tk, Class::Sheaf];
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Et => "et",
            Class::Tk => "tk",
            Class::Sheaf => "sheaf",
        })
    }
}

impl FromStr for Class {
    type Err = String;
    fn from_str(s: &str) -> Result<Class, String> {
        match s {
            "et" => Ok(Class::Et),
            "tk" => Ok(Class::Tk),
            "sheaf" => Ok(Class::Sheaf),
            _ => Err(format!("unknown model class `{s}` (expected et, tk or sheaf)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelFailure {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Load(#[from] ModelError),
    #[error(transparent)]
    Sheaf(#[from] SheafModelError),
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model is a {found} model, not {wanted}")]
    WrongClass { found: Class, wanted: Class },
}

#[derive(Clone, Debug)]
pub enum Model {
    Set(SetModel),
    Sheaf(SheafModel),
}

impl Model {
    /// Loads a model, dispatching on its `class` field.
    pub fn from_json(text: &str) -> Result<Model, ModelFailure> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.get("class").and_then(|c| c.as_str()) == Some("sheaf") {
            Ok(Model::Sheaf(SheafModel::from_json(text)?))
        } else {
            Ok(Model::Set(SetModel::from_json(text)?))
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Model::Set(m) => m.to_json(),
            Model::Sheaf(m) => m.to_json(),
        }
    }

    pub fn class(&self) -> Class {
        match self {
            Model::Set(m) if m.class == ModelClass::EulerTarski => Class::Et,
            Model::Set(_) => Class::Tk,
            Model::Sheaf(_) => Class::Sheaf,
        }
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        match self {
            Model::Set(m) => &m.space,
            Model::Sheaf(m) => &m.space,
        }
    }

    pub fn domain_size(&self) -> usize {
        match self {
            Model::Set(m) => m.domain.len(),
            Model::Sheaf(m) => m.domain.len(),
        }
    }

    /// The atoms the model interprets.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        let (probs, props): (Vec<(&String, usize)>, Vec<(&String, usize)>) = match self {
            Model::Set(m) => (
                m.problems.iter().map(|(k, t)| (k, t.arity)).collect(),
                m.propositions.iter().map(|(k, t)| (k, t.arity)).collect(),
            ),
            Model::Sheaf(m) => (
                m.problems.iter().map(|(k, t)| (k, t.arity)).collect(),
                m.propositions.iter().map(|(k, t)| (k, t.arity)).collect(),
            ),
        };
        for (k, a) in probs {
            sig.add(k, Sort::Problem, a);
        }
        for (k, a) in props {
            sig.add(k, Sort::Proposition, a);
        }
        sig
    }

    pub fn valid(&self, f: &Formula) -> Result<bool, ModelFailure> {
        Ok(match self {
            Model::Set(m) => m.valid(f)?,
            Model::Sheaf(m) => m.valid(f)?,
        })
    }

    /// Where `f` holds: its value for a set model, its support or extent for a
    /// sheaf model.
    pub fn extent(&self, f: &Formula, env: &BTreeMap<String, usize>) -> Result<PointSet, ModelFailure> {
        Ok(match self {
            Model::Set(m) => m.eval(f, env)?,
            Model::Sheaf(m) => m.extent(f, env)?,
        })
    }

    /// A human-readable rendering of the value of a closed formula.
    pub fn describe(&self, f: &Formula) -> Result<String, ModelFailure> {
        let env = BTreeMap::new();
        Ok(match self {
            Model::Set(m) => format!("{:?}", m.space.set_names(m.eval(f, &env)?)),
            Model::Sheaf(m) => match m.eval(f, &env)? {
                Value::Problem(s) => serde_json::to_string(&s.to_json())?,
                Value::Proposition(p) => format!("{:?}", m.space.set_names(p)),
            },
        })
    }
}
