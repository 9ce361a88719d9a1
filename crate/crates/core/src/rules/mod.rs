//! Timeline store and the three rule kinds: project rules (delayed events),
//! effect rules (event causes assert/clip/persist with probability) and
//! exogenous rules (events with Poisson spacing while a condition holds).

mod engine;
mod timeline;

pub use engine::{
    apply_effect_rules, condition_solutions, enabled_exogenous, expire_persists,
    predict_next_exogenous, random_number, random_number_via_rules, randomize_rules,
    sample_exogenous_occurrences, Delta, DurationError, ExoCandidate, Lapsed, PropositionView,
    IMMEDIATE_SPACING,
};
pub use timeline::{
    parse_timeline_jsonl, EventClass, JsonlError, Occasion, Occurrence, Side, Timeline,
    TimelineError,
};

use crate::term::{parse_term, Term};
use serde::{Deserialize, Serialize};

/// A condition literal over open occasions.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Holds(Term),
    NotHolds(Term),
    /// Both sides, after substitution, are equal ground terms.
    Eq(Term, Term),
    Neq(Term, Term),
}

impl Literal {
    pub fn from_term(t: Term) -> Literal {
        match t {
            Term::App(f, mut a) if a.len() == 1 && f == "not" => {
                Literal::NotHolds(a.pop().unwrap())
            }
            Term::App(f, mut a) if a.len() == 2 && (f == "eq" || f == "neq") => {
                let r = a.pop().unwrap();
                let l = a.pop().unwrap();
                if f == "eq" {
                    Literal::Eq(l, r)
                } else {
                    Literal::Neq(l, r)
                }
            }
            t => Literal::Holds(t),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Literal::Holds(t) => t.clone(),
            Literal::NotHolds(t) => Term::app("not", vec![t.clone()]),
            Literal::Eq(a, b) => Term::app("eq", vec![a.clone(), b.clone()]),
            Literal::Neq(a, b) => Term::app("neq", vec![a.clone(), b.clone()]),
        }
    }
}

/// Conjunction of literals; empty means always.
pub type Condition = Vec<Literal>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Effect {
    Assert(Term),
    Clip(Term),
    /// Hold for a duration (a number or a bound variable), then lapse.
    Persist {
        duration: Term,
        prop: Term,
    },
    /// Hold until an absolute date (a number or a bound variable).
    PersistUntil {
        until: Term,
        prop: Term,
    },
}

impl Effect {
    pub fn proposition(&self) -> &Term {
        match self {
            Effect::Assert(p) | Effect::Clip(p) => p,
            Effect::Persist { prop, .. } | Effect::PersistUntil { prop, .. } => prop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRule {
    pub name: String,
    pub head: Term,
    #[serde(default, rename = "if", with = "cond_serde")]
    pub condition: Condition,
    /// (delay seconds, event) pairs.
    pub events: Vec<(f64, Term)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRule {
    pub name: String,
    pub event: Term,
    #[serde(default, rename = "if", with = "cond_serde")]
    pub condition: Condition,
    #[serde(default = "one")]
    pub probability: f64,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoRule {
    pub name: String,
    #[serde(default, rename = "if", with = "cond_serde")]
    pub condition: Condition,
    /// Average spacing between occurrences, seconds.
    pub spacing: f64,
    pub event: Term,
}

fn one() -> f64 {
    1.0
}

mod cond_serde {
    use super::{Condition, Literal};
    use crate::term::Term;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Condition, s: S) -> Result<S::Ok, S::Error> {
        c.iter()
            .map(Literal::to_term)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Condition, D::Error> {
        Ok(Vec::<Term>::deserialize(d)?
            .into_iter()
            .map(Literal::from_term)
            .collect())
    }
}

/// Declarative flaw query stored alongside the rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawSpec {
    pub name: String,
    pub matcher: crate::flaw::Matcher,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    #[serde(default)]
    pub project_rules: Vec<ProjectRule>,
    #[serde(default)]
    pub effect_rules: Vec<EffectRule>,
    #[serde(default)]
    pub exo_rules: Vec<ExoRule>,
    #[serde(default)]
    pub flaws: Vec<FlawSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("rule file: {0}")]
    Parse(String),
    #[error("rule {0} both asserts and clips {1}")]
    ContradictoryEffects(String, Term),
    #[error("rule {0}: probability must lie in [0, 1]")]
    BadProbability(String),
    #[error("rule {0}: spacing must be positive")]
    BadSpacing(String),
    #[error("rule {0}: delays must be nonnegative")]
    BadDelay(String),
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), RuleError> {
        for r in &self.effect_rules {
            if !(0.0..=1.0).contains(&r.probability) {
                return Err(RuleError::BadProbability(r.name.clone()));
            }
            for a in &r.effects {
                if let Effect::Assert(p) = a {
                    if r.effects
                        .iter()
                        .any(|c| matches!(c, Effect::Clip(q) if q == p))
                    {
                        return Err(RuleError::ContradictoryEffects(r.name.clone(), p.clone()));
                    }
                }
            }
        }
        for r in &self.exo_rules {
            if !(r.spacing > 0.0 && r.spacing.is_finite()) {
                return Err(RuleError::BadSpacing(r.name.clone()));
            }
        }
        for r in &self.project_rules {
            if r.events.iter().any(|(d, _)| !(*d >= 0.0 && d.is_finite())) {
                return Err(RuleError::BadDelay(r.name.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(src: &str) -> Result<RuleSet, RuleError> {
        let rs: RuleSet = serde_json::from_str(src).map_err(|e| RuleError::Parse(e.to_string()))?;
        rs.validate()?;
        Ok(rs)
    }

    pub fn extend(&mut self, other: RuleSet) {
        self.project_rules.extend(other.project_rules);
        self.effect_rules.extend(other.effect_rules);
        self.exo_rules.extend(other.exo_rules);
        self.flaws.extend(other.flaws);
    }

    pub fn flaw(&self, name: &str) -> Option<&FlawSpec> {
        self.flaws.iter().find(|f| f.name == name)
    }
}

/// Convenience for tests and fixtures: parse a term, panicking on error.
pub fn term(s: &str) -> Term {
    parse_term(s).unwrap_or_else(|e| panic!("bad term {s:?}: {e}"))
}
