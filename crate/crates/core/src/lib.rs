//! Projection of concurrent reactive robot plans.
//!
//! Plans written in a small s-expression language are interpreted as
//! probabilistic hybrid automata. Projection samples timelines of dated
//! events and occasions together with the robot's piecewise-linear motion;
//! Monte-Carlo detectors over sampled timelines flag probable plan flaws.

pub mod automaton;
pub mod courier;
pub mod flaw;
pub mod fluents;
pub mod geom;
pub mod lang;
pub mod projector;
pub mod reference;
pub mod rng;
pub mod rules;
pub mod term;
