//! Efficient projection: automata jump at analytically computed condition
//! times; plans are projected by scheduling endogenous events along paths.

pub mod beliefs;
mod hybrid;
pub mod plan;
pub mod schedule;
pub mod sensing;
pub mod world;

pub use beliefs::Beliefs;
pub use hybrid::{project_automaton, run_timeline};
pub use plan::{
    builtin_rules, project_plan, reschedule_on_new_trigger, NavPrimitiveState, ProjectError,
    Projection, ProjectorConfig,
};
pub use schedule::{
    check_against_oracle, compare_event_lists, fixed_step_events, random_oracle_fixture,
    schedule_endogenous_events, schedule_events, EndogenousEventSchedule, OracleFixture,
    ScheduleEntry, SimEvent, TriggerRegion,
};
pub use world::World;
