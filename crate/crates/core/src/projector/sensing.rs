//! Abstract sensor models for sensing actions and bumps.

use super::world::SensorModel;
use crate::fluents::Value;
use crate::geom::{distance, Point};
use crate::term::Term;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Default duration of a look-for behavior, seconds.
pub const LOOK_TIME: f64 = 2.0;
/// Door angles above this count as open.
pub const OPEN_ANGLE_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SeenObject {
    pub id: String,
    pub kind: String,
    pub at: Point,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeenDoor {
    pub id: String,
    pub center: Point,
    /// True opening angle, degrees; 0 when closed.
    pub angle: f64,
}

/// The part of the sampled world a sensor can observe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensingWorld {
    pub robot: Point,
    pub objects: Vec<SeenObject>,
    pub doors: Vec<SeenDoor>,
    pub colors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensingAction {
    LookFor {
        description: String,
        camera: String,
        look_time: f64,
    },
    EstimateDoorAngle,
    /// The robot reaches a told-about obstacle; `sonar_on` says whether
    /// the only sensor at table height is active.
    PossibleBump {
        obstacle: String,
        sonar_on: bool,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensingResult {
    /// (delay, event) pairs, delays relative to the action start.
    pub events: Vec<(f64, Term)>,
    /// Fluents set when the action completes.
    pub fluents: Vec<(String, Value)>,
    pub pulses: Vec<String>,
    /// Propositions that hold after completion.
    pub asserts: Vec<Term>,
    pub value: Option<Term>,
    pub failure: Option<String>,
    /// Completion delay.
    pub duration: f64,
}

pub fn door_fluent(door: &str) -> String {
    format!("open-{}?", door.to_lowercase())
}

fn matches_description(desc: &str, kind: &str, color: &str) -> bool {
    desc == "any" || desc == kind || desc == color || desc == format!("{color}-{kind}")
}

pub fn apply_sensing_model<R: Rng + ?Sized>(
    action: &SensingAction,
    world: &SensingWorld,
    model: &SensorModel,
    rng: &mut R,
) -> SensingResult {
    let mut r = SensingResult::default();
    match action {
        SensingAction::LookFor {
            description,
            camera,
            look_time,
        } => {
            let act = Term::app("look-for", vec![Term::sym(description), Term::sym(camera)]);
            r.events.push((0.0, Term::app("begin", vec![act.clone()])));
            r.events
                .push((*look_time, Term::app("end", vec![act.clone()])));
            r.duration = *look_time;
            let mut desigs = Vec::new();
            for ob in world
                .objects
                .iter()
                .filter(|o| distance(o.at, world.robot) <= model.range)
            {
                if rng.random::<f64>() >= model.detection_probability {
                    continue;
                }
                // with probability `noise` the color is misperceived
                let color = if model.noise > 0.0 && rng.random::<f64>() < model.noise {
                    let others: Vec<&String> =
                        world.colors.iter().filter(|c| **c != ob.color).collect();
                    if others.is_empty() {
                        ob.color.clone()
                    } else {
                        others[rng.random_range(0..others.len())].clone()
                    }
                } else {
                    ob.color.clone()
                };
                if matches_description(description, &ob.kind, &color) {
                    let d = Term::sym(format!("desig-{}", ob.id));
                    r.asserts.push(Term::app(
                        "visually-tracked",
                        vec![d.clone(), Term::sym(&ob.id)],
                    ));
                    r.asserts.push(Term::app(
                        "perceived-color",
                        vec![d.clone(), Term::sym(&color)],
                    ));
                    desigs.push(d);
                }
            }
            r.pulses.push(format!("visual-inputs-{camera}"));
            let names: Vec<String> = desigs.iter().map(|d| d.to_string()).collect();
            let listed = if names.is_empty() {
                "none".to_string()
            } else {
                names.join(",")
            };
            r.fluents
                .push((format!("obs-pos-{camera}"), Value::Symbol(listed)));
            r.value = Some(Term::app("designators", desigs));
        }
        SensingAction::EstimateDoorAngle => {
            let door = world
                .doors
                .iter()
                .filter(|d| distance(d.center, world.robot) <= model.range)
                .min_by(|a, b| {
                    distance(a.center, world.robot).total_cmp(&distance(b.center, world.robot))
                });
            r.duration = 0.5;
            match door {
                None => {
                    r.events.push((
                        0.5,
                        Term::app(
                            "end",
                            vec![Term::app("estimate-door-angle", vec![Term::sym("none")])],
                        ),
                    ));
                    r.value = Some(Term::sym("none"));
                }
                Some(d) => {
                    let reading = if rng.random::<f64>() < model.detection_probability {
                        let open = d.angle > OPEN_ANGLE_THRESHOLD;
                        let base =
                            if !open && rng.random::<f64>() < model.false_positive_probability {
                                90.0
                            } else {
                                d.angle
                            };
                        let noise = if model.noise > 0.0 {
                            Normal::new(0.0, model.noise)
                                .expect("finite sd")
                                .sample(rng)
                        } else {
                            0.0
                        };
                        Some((base + noise).clamp(0.0, 180.0))
                    } else {
                        None
                    };
                    let ev = match reading {
                        Some(a) => {
                            let a = (a * 10.0).round() / 10.0;
                            r.fluents
                                .push((door_fluent(&d.id), Value::Bool(a > OPEN_ANGLE_THRESHOLD)));
                            r.value = Some(Term::num(a));
                            Term::app("estimate-door-angle", vec![Term::sym(&d.id), Term::num(a)])
                        }
                        None => Term::app(
                            "estimate-door-angle",
                            vec![Term::sym(&d.id), Term::sym("none")],
                        ),
                    };
                    r.events.push((0.5, Term::app("end", vec![ev])));
                }
            }
        }
        SensingAction::PossibleBump { obstacle, sonar_on } => {
            if *sonar_on {
                r.failure = Some("path-blocked".into());
                r.events
                    .push((0.0, Term::app("path-blocked", vec![Term::sym(obstacle)])));
            } else {
                r.events
                    .push((0.0, Term::app("bump", vec![Term::sym(obstacle)])));
            }
        }
    }
    r
}
