//! Probabilistic beliefs about the initial world state.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Random variable → (value → probability). Door variables are named
/// `open-<door>` with values "true"/"false"; envelope colors `color-<object>`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Beliefs {
    #[serde(default)]
    pub variables: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefError {
    #[error("beliefs file: {0}")]
    Parse(String),
    #[error("distribution of {0} must be nonnegative and sum to 1")]
    NotNormalized(String),
}

/// Draw one value from a finite distribution. Values are visited in key
/// order so the draw is reproducible.
pub fn draw<R: Rng + ?Sized>(dist: &BTreeMap<String, f64>, rng: &mut R) -> String {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (v, p) in dist {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(v);
        if u < acc {
            return v.clone();
        }
    }
    last.cloned().unwrap_or_default()
}

pub fn validate_distribution(name: &str, dist: &BTreeMap<String, f64>) -> Result<(), BeliefError> {
    let total: f64 = dist.values().sum();
    if dist.is_empty() || dist.values().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(BeliefError::NotNormalized(name.to_string()));
    }
    Ok(())
}

impl Beliefs {
    pub fn from_json(src: &str) -> Result<Beliefs, BeliefError> {
        let b: Beliefs =
            serde_json::from_str(src).map_err(|e| BeliefError::Parse(e.to_string()))?;
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        self.variables
            .iter()
            .try_for_each(|(k, d)| validate_distribution(k, d))
    }

    pub fn get(&self, var: &str) -> Option<&BTreeMap<String, f64>> {
        self.variables.get(var)
    }

    /// Two-valued door belief.
    pub fn door(p_open: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("true".to_string(), p_open),
            ("false".to_string(), 1.0 - p_open),
        ])
    }
}
