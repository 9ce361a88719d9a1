//! Flaw predicates over timelines, the sampling detector DET(f, n, k) and
//! the binomial calculators that characterize it.

use crate::lang::Plan;
use crate::projector::{project_plan, Beliefs, ProjectError, Projection, ProjectorConfig, World};
use crate::rules::{RuleSet, Timeline};
use crate::term::{match_term, Bindings, Term};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Declarative query over one timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matcher {
    /// Some occurrence's event matches the pattern.
    OccurrenceExists(Term),
    /// Some occasion's proposition matches the pattern.
    OccasionExists(Term),
    Not(Box<Matcher>),
    Any(Vec<Matcher>),
    All(Vec<Matcher>),
}

impl Matcher {
    pub fn matches(&self, tl: &Timeline) -> bool {
        let m = |pat: &Term, t: &Term| match_term(pat, t, &mut Bindings::new());
        match self {
            Matcher::OccurrenceExists(p) => tl.occurrences().iter().any(|o| m(p, &o.event)),
            Matcher::OccasionExists(p) => tl.occasions().iter().any(|o| m(p, &o.proposition)),
            Matcher::Not(x) => !x.matches(tl),
            Matcher::Any(xs) => xs.iter().any(|x| x.matches(tl)),
            Matcher::All(xs) => xs.iter().all(|x| x.matches(tl)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlawError {
    #[error("need 0 <= p <= 1 and 1 <= k <= n, got n={n}, k={k}, p={p}")]
    Domain { n: u64, k: u64, p: f64 },
    #[error("need 0 < tau < theta < 1 and 0 < beta < 1")]
    Thresholds,
    #[error("no sample size up to {0} separates theta from tau")]
    Infeasible(u64),
}

/// One sampled scenario. Projection errors are kept per scenario.
#[derive(Debug)]
pub struct Scenario {
    pub index: u64,
    pub result: Result<Projection, ProjectError>,
}

impl Scenario {
    /// The projected timeline, partial if the horizon was exceeded.
    pub fn timeline(&self) -> Option<&Timeline> {
        match &self.result {
            Ok(p) => Some(&p.timeline),
            Err(ProjectError::HorizonExceeded(p)) => Some(&p.timeline),
            Err(_) => None,
        }
    }
}

/// Project `n` scenarios in parallel. Scenario i draws from stream i of
/// `seed`, so the set does not depend on thread scheduling.
pub fn sample_scenarios(
    plan: &Plan,
    world: &World,
    beliefs: &Beliefs,
    rules: &RuleSet,
    cfg: &ProjectorConfig,
    n: u64,
    seed: u64,
) -> Vec<Scenario> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::stream(seed, i);
            Scenario {
                index: i,
                result: project_plan(plan, world, beliefs, rules, cfg, &mut rng),
            }
        })
        .collect()
}

/// DET(f, n, k): the flaw is reported iff it shows up in at least k of the
/// n scenarios.
pub fn detect_flaw(scenarios: &[Timeline], f: &Matcher, k: usize) -> bool {
    count_matches(scenarios, f) >= k
}

pub fn count_matches(scenarios: &[Timeline], f: &Matcher) -> usize {
    scenarios.iter().filter(|t| f.matches(t)).count()
}

/// Binomial(n, p) probabilities. A plain recurrence from (1-p)^n while
/// that does not underflow, log space otherwise.
fn pmf(n: u64, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[n as usize] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    if n as f64 * lq > -600.0 {
        let mut v = Vec::with_capacity(n as usize + 1);
        let mut cur = (n as f64 * lq).exp();
        for j in 0..=n {
            v.push(cur);
            cur *= (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
        }
        return v;
    }
    let mut ln_fact = vec![0.0f64; n as usize + 1];
    for i in 1..=n as usize {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    (0..=n as usize)
        .map(|j| {
            let lc = ln_fact[n as usize] - ln_fact[j] - ln_fact[n as usize - j];
            (lc + j as f64 * lp + (n as usize - j) as f64 * lq).exp()
        })
        .collect()
}

/// Upper tails: `tails[k]` = P(Y >= k), summed from the top so small tails
/// keep their precision.
fn upper_tails(n: u64, p: f64) -> Vec<f64> {
    let f = pmf(n, p);
    let mut tails = vec![0.0; f.len() + 1];
    for j in (0..f.len()).rev() {
        tails[j] = tails[j + 1] + f[j];
    }
    tails
}

/// P(DET(f, n, k) fires) when f occurs in each scenario with probability p.
pub fn detection_probability(n: u64, k: u64, p: f64) -> Result<f64, FlawError> {
    if !(0.0..=1.0).contains(&p) || k < 1 || k > n {
        return Err(FlawError::Domain { n, k, p });
    }
    Ok(upper_tails(n, p)[k as usize].min(1.0))
}

pub const MAX_SAMPLE_SIZE: u64 = 10_000;

/// Smallest n with some k such that a flaw of probability theta is
/// detected with probability at least beta while one of probability tau is
/// reported with probability at most 1 - beta. Returns (n, k), k smallest.
pub fn required_sample_size(theta: f64, tau: f64, beta: f64) -> Result<(u64, u64), FlawError> {
    if !(0.0 < tau && tau < theta && theta < 1.0 && 0.0 < beta && beta < 1.0) {
        return Err(FlawError::Thresholds);
    }
    if theta - tau <= 4.0 * f64::EPSILON * theta {
        return Err(FlawError::Infeasible(0));
    }
    for n in 1..=MAX_SAMPLE_SIZE {
        let hi = upper_tails(n, theta);
        let lo = upper_tails(n, tau);
        if let Some(k) = (1..=n).find(|&k| hi[k as usize] >= beta && lo[k as usize] <= 1.0 - beta) {
            return Ok((n, k));
        }
    }
    Err(FlawError::Infeasible(MAX_SAMPLE_SIZE))
}

pub const GRID_DETECTORS: [u64; 3] = [3, 4, 5];
pub const GRID_PROBS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const GRID_PUBLISHED: [[f64; 5]; 3] = [
    [50.0, 64.8, 78.4, 89.6, 97.2],
    [68.8, 81.2, 91.6, 97.3, 99.6],
    [81.2, 91.3, 96.9, 99.3, 99.9],
];

/// One decimal, ties to even. Values within 1e-9 of a tie count as ties,
/// which absorbs the binary representation error of exact quarter values.
pub fn round1(v: f64) -> f64 {
    let x = v * 10.0;
    let fl = x.floor();
    let r = if (x - fl - 0.5).abs() < 1e-9 {
        if fl % 2.0 == 0.0 {
            fl
        } else {
            fl + 1.0
        }
    } else {
        x.round()
    };
    r / 10.0
}

/// DET(f, n, 2) in percent, rounded to one decimal.
pub fn detector_grid() -> [[f64; 5]; 3] {
    let mut g = [[0.0; 5]; 3];
    for (i, n) in GRID_DETECTORS.iter().enumerate() {
        for (j, p) in GRID_PROBS.iter().enumerate() {
            g[i][j] = round1(detection_probability(*n, 2, *p).expect("valid") * 100.0);
        }
    }
    g
}

/// Cells where the computed grid differs from the published one:
/// (detector n, probability, computed, published).
pub fn detector_grid_mismatches() -> Vec<(u64, f64, f64, f64)> {
    let g = detector_grid();
    let mut out = Vec::new();
    for i in 0..3 {
        for j in 0..5 {
            if g[i][j] != GRID_PUBLISHED[i][j] {
                out.push((
                    GRID_DETECTORS[i],
                    GRID_PROBS[j],
                    g[i][j],
                    GRID_PUBLISHED[i][j],
                ));
            }
        }
    }
    out
}

pub fn detector_grid_table() -> String {
    let mut s = String::from("DET(f,n,2) detection probability in percent\n");
    s.push_str(&format!("{:<12}", "detector"));
    for p in GRID_PROBS {
        s.push_str(&format!("{:>8}", format!("{:.0}%", p * 100.0)));
    }
    s.push('\n');
    for (i, row) in detector_grid().iter().enumerate() {
        s.push_str(&format!(
            "{:<12}",
            format!("DET(f,{},2)", GRID_DETECTORS[i])
        ));
        for v in row {
            s.push_str(&format!("{v:>8.1}"));
        }
        s.push('\n');
    }
    for (n, p, c, published) in detector_grid_mismatches() {
        s.push_str(&format!(
            "differs from the published table: DET(f,{n},2) at {:.0}%: {c:.1} vs {published:.1}\n",
            p * 100.0
        ));
    }
    s
}

pub const SAMPLE_SIZE_THETAS: [f64; 6] = [0.01, 0.10, 0.20, 0.40, 0.60, 0.80];
pub const SAMPLE_SIZE_TAUS: [f64; 3] = [0.001, 0.01, 0.05];
/// Published sample sizes; `None` where no detector exists.
pub const SAMPLE_SIZE_PUBLISHED: [[Option<u64>; 6]; 3] = [
    [Some(1331), Some(100), Some(44), Some(17), Some(8), Some(3)],
    [None, Some(121), Some(49), Some(17), Some(8), Some(3)],
    [None, Some(392), Some(78), Some(22), Some(9), Some(3)],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeCell {
    pub theta: f64,
    pub tau: f64,
    pub computed: Option<(u64, u64)>,
    pub published: Option<u64>,
}

impl SampleSizeCell {
    pub fn matches(&self) -> bool {
        self.computed.map(|c| c.0) == self.published
    }
}

pub fn sample_size_grid(beta: f64) -> Vec<Vec<SampleSizeCell>> {
    SAMPLE_SIZE_TAUS
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            SAMPLE_SIZE_THETAS
                .iter()
                .enumerate()
                .map(|(j, &theta)| SampleSizeCell {
                    theta,
                    tau,
                    computed: required_sample_size(theta, tau, beta).ok(),
                    published: SAMPLE_SIZE_PUBLISHED[i][j],
                })
                .collect()
        })
        .collect()
}

/// Computed n (with k) next to the published n; `*` marks a mismatch and
/// `-` a missing detector.
pub fn sample_size_table(beta: f64) -> String {
    let mut s = format!(
        "sampled projections n (threshold k) at accuracy {beta}: computed / published, * = mismatch\n"
    );
    s.push_str(&format!("{:<10}", "tau\\theta"));
    for t in SAMPLE_SIZE_THETAS {
        s.push_str(&format!("{:>18}", format!("{}%", t * 100.0)));
    }
    s.push('\n');
    for row in sample_size_grid(beta) {
        s.push_str(&format!("{:<10}", format!("{}%", row[0].tau * 100.0)));
        for c in &row {
            let comp = c
                .computed
                .map_or("-".to_string(), |(n, k)| format!("{n}({k})"));
            let published = c.published.map_or("-".to_string(), |n| n.to_string());
            let mark = if c.matches() { " " } else { "*" };
            s.push_str(&format!("{:>18}", format!("{comp} / {published}{mark}")));
        }
        s.push('\n');
    }
    s
}

/// Detector settings: sample n scenarios, report at k matches. theta and
/// tau are the probabilities the report characterizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub n: u64,
    pub k: u64,
    pub theta: f64,
    pub tau: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<(), FlawError> {
        if self.k < 1 || self.k > self.n {
            return Err(FlawError::Domain {
                n: self.n,
                k: self.k,
                p: self.theta,
            });
        }
        if !(0.0 < self.tau && self.tau < self.theta && self.theta < 1.0) {
            return Err(FlawError::Thresholds);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawReport {
    pub flaw: String,
    pub n: u64,
    pub k: u64,
    pub count: u64,
    pub decision: bool,
    pub analytic_power_at_theta: f64,
    pub analytic_false_alarm_at_tau: f64,
}

pub fn report(
    flaw: &str,
    spec: &DetectorSpec,
    scenarios: &[Timeline],
    m: &Matcher,
) -> Result<FlawReport, FlawError> {
    spec.validate()?;
    let count = count_matches(scenarios, m) as u64;
    Ok(FlawReport {
        flaw: flaw.to_string(),
        n: spec.n,
        k: spec.k,
        count,
        decision: count >= spec.k,
        analytic_power_at_theta: detection_probability(spec.n, spec.k, spec.theta)?,
        analytic_false_alarm_at_tau: detection_probability(spec.n, spec.k, spec.tau)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_points() {
        assert!((detection_probability(3, 2, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((detection_probability(4, 2, 0.8).unwrap() - 0.9728).abs() < 1e-12);
        let fa = detection_probability(5, 2, 0.05).unwrap();
        assert!((fa - 0.0225925).abs() < 1e-6);
        let g = detector_grid();
        assert_eq!(g[1][0], 68.8);
        assert_eq!(g[2][0], 81.2);
        assert_eq!(g[1][3], 97.3);
    }

    #[test]
    fn sample_size() {
        assert_eq!(required_sample_size(0.8, 0.001, 0.95).unwrap(), (2, 1));
        assert!(matches!(
            required_sample_size(0.01 * (1.0 + 1e-15), 0.01, 0.95),
            Err(FlawError::Infeasible(_))
        ));
        let a = required_sample_size(0.1, 0.01, 0.95).unwrap().0;
        let b = required_sample_size(0.2, 0.01, 0.95).unwrap().0;
        assert!(a >= b);
    }

    #[test]
    fn edges_of_domain() {
        assert_eq!(detection_probability(4, 1, 0.0).unwrap(), 0.0);
        assert_eq!(detection_probability(4, 4, 1.0).unwrap(), 1.0);
        assert!(detection_probability(3, 4, 0.5).is_err());
        assert!(detection_probability(3, 0, 0.5).is_err());
        assert!(detection_probability(3, 1, 1.5).is_err());
    }
}
