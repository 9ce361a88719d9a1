use crate::geom::Point;
use crate::term::{match_term, Bindings, Term};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Co-occurring events at one date are ordered by class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventClass {
    Physical,
    SensorUpdate,
    Computational,
    Wakeup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub seq: usize,
    pub date: f64,
    pub event: Term,
    pub class: EventClass,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub opened: Vec<Term>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub closed: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl Occurrence {
    pub fn position(&self) -> Option<Point> {
        Some(Point::new(self.x?, self.y?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occasion {
    pub proposition: Term,
    pub start: f64,
    pub end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Truth over (t - d, t].
    Before,
    /// Truth over [t, t + d).
    After,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimelineError {
    #[error("occurrence dated {date} precedes the last recorded date {last}")]
    OutOfOrder { date: f64, last: f64 },
    #[error("occurrence date must be finite and nonnegative, got {0}")]
    BadDate(f64),
}

/// Dated occurrences plus occasions. Every change of an occasion is
/// attributed to the most recent occurrence, which must share its date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    occurrences: Vec<Occurrence>,
    occasions: Vec<Occasion>,
    open: BTreeMap<Term, usize>,
    persists: BTreeMap<Term, f64>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn occurrences(&self) -> &[Occurrence] {
        &self.occurrences
    }

    pub fn occasions(&self) -> &[Occasion] {
        &self.occasions
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    pub fn last_date(&self) -> f64 {
        self.occurrences.last().map_or(0.0, |o| o.date)
    }

    pub fn last_mut(&mut self) -> Option<&mut Occurrence> {
        self.occurrences.last_mut()
    }

    pub fn record(
        &mut self,
        date: f64,
        event: Term,
        class: EventClass,
    ) -> Result<usize, TimelineError> {
        if !date.is_finite() || date < 0.0 {
            return Err(TimelineError::BadDate(date));
        }
        let last = self.last_date();
        if !self.occurrences.is_empty() && date < last {
            return Err(TimelineError::OutOfOrder { date, last });
        }
        let seq = self.occurrences.len();
        self.occurrences.push(Occurrence {
            seq,
            date,
            event,
            class,
            opened: Vec::new(),
            closed: Vec::new(),
            x: None,
            y: None,
            mode: None,
        });
        Ok(seq)
    }

    fn now(&self) -> f64 {
        self.last_date()
    }

    /// Open an occasion for `p` at the current date. Returns false if it
    /// already holds.
    pub fn assert_prop(&mut self, p: Term) -> bool {
        if self.open.contains_key(&p) {
            return false;
        }
        let start = self.now();
        self.open.insert(p.clone(), self.occasions.len());
        self.occasions.push(Occasion {
            proposition: p.clone(),
            start,
            end: None,
        });
        if let Some(o) = self.occurrences.last_mut() {
            o.opened.push(p);
        }
        true
    }

    /// Close the occasion of `p` at the current date, if open.
    pub fn clip(&mut self, p: &Term) -> bool {
        let Some(i) = self.open.remove(p) else {
            return false;
        };
        self.persists.remove(p);
        let end = self.now();
        self.occasions[i].end = Some(end);
        if let Some(o) = self.occurrences.last_mut() {
            o.closed.push(p.clone());
        }
        true
    }

    /// `p` holds from now until `expiry`, then lapses.
    pub fn persist(&mut self, p: Term, expiry: f64) {
        self.assert_prop(p.clone());
        self.persists.insert(p, expiry);
    }

    pub fn persist_expiry(&self, p: &Term) -> Option<f64> {
        self.persists.get(p).copied()
    }

    /// Earliest pending persist expiry.
    pub fn next_expiry(&self) -> Option<(f64, Term)> {
        self.persists
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)))
            .map(|(p, t)| (*t, p.clone()))
    }

    /// Persisted propositions due to lapse at or before `t`.
    pub fn expiring_by(&self, t: f64) -> Vec<Term> {
        self.persists
            .iter()
            .filter(|(_, e)| **e <= t + 1e-12)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn holds(&self, p: &Term) -> bool {
        self.open.contains_key(p)
    }

    /// Open propositions matching `pattern`, with their bindings.
    pub fn matching(&self, pattern: &Term, base: &Bindings) -> Vec<Bindings> {
        self.open
            .keys()
            .filter_map(|p| {
                let mut b = base.clone();
                match_term(pattern, p, &mut b).then_some(b)
            })
            .collect()
    }

    pub fn open_propositions(&self) -> impl Iterator<Item = &Term> {
        self.open.keys()
    }

    pub fn holds_at(&self, p: &Term, t: f64, side: Side) -> bool {
        self.occasions.iter().any(|o| {
            if &o.proposition != p {
                return false;
            }
            let end = o.end.unwrap_or(f64::INFINITY);
            match side {
                Side::Before => o.start < t && t <= end,
                Side::After => o.start <= t && t < end,
            }
        })
    }

    /// Every interval of `p`, in start order.
    pub fn intervals(&self, p: &Term) -> Vec<(f64, Option<f64>)> {
        self.occasions
            .iter()
            .filter(|o| &o.proposition == p)
            .map(|o| (o.start, o.end))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for o in &self.occurrences {
            s.push_str(&serde_json::to_string(o).expect("occurrence serializes"));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("timeline line {line}: {message}")]
pub struct JsonlError {
    pub line: usize,
    pub message: String,
}

/// Parse timeline JSONL back into occurrence records.
pub fn parse_timeline_jsonl(src: &str) -> Result<Vec<Occurrence>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let o: Occurrence = serde_json::from_str(line).map_err(|e| JsonlError {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !o.date.is_finite() || o.date < 0.0 {
            return Err(JsonlError {
                line: i + 1,
                message: "bad date".into(),
            });
        }
        out.push(o);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse_term;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn interval_semantics() {
        let mut tl = Timeline::new();
        let p = t("p");
        tl.record(1.0, t("a"), EventClass::Physical).unwrap();
        tl.assert_prop(p.clone());
        tl.record(3.0, t("b"), EventClass::Physical).unwrap();
        tl.clip(&p);
        assert!(tl.holds_at(&p, 2.0, Side::Before));
        assert!(!tl.holds_at(&p, 3.0, Side::After));
        assert!(tl.holds_at(&p, 3.0, Side::Before));
        assert!(!tl.holds_at(&p, 1.0, Side::Before));
        assert!(tl.holds_at(&p, 1.0, Side::After));
        assert!(!tl.holds_at(&t("q"), 2.0, Side::Before));
    }

    #[test]
    fn out_of_order_rejected() {
        let mut tl = Timeline::new();
        tl.record(2.0, t("a"), EventClass::Physical).unwrap();
        assert!(tl.record(1.0, t("b"), EventClass::Physical).is_err());
        assert!(tl.record(f64::NAN, t("b"), EventClass::Physical).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut tl = Timeline::new();
        tl.record(0.0, t("start"), EventClass::Physical).unwrap();
        tl.assert_prop(t("door-open(A-113)"));
        tl.last_mut().unwrap().x = Some(1.5);
        tl.last_mut().unwrap().y = Some(2.0);
        let text = tl.to_jsonl();
        assert_eq!(
            text,
            "{\"seq\":0,\"date\":0.0,\"event\":\"start\",\"class\":\"physical\",\"opened\":[\"door-open(A-113)\"],\"x\":1.5,\"y\":2.0}\n"
        );
        let back = parse_timeline_jsonl(&text).unwrap();
        assert_eq!(back, tl.occurrences());
        assert!(parse_timeline_jsonl("{\"seq\":0}").is_err());
    }
}
