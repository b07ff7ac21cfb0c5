//! Table-top tool-use task planning: scene comprehension, multi-view
//! perception, a four-tuple plan language, a low-level action language,
//! task-oriented grasping, and an experiment harness over a rule-based world.

pub mod agents;
pub mod dsl;
pub mod fixtures;
pub mod geometry;
pub mod grasping;
pub mod harness;
pub mod orchestrator;
pub mod plan;
pub mod world;
pub mod perception;
pub mod seeding;
