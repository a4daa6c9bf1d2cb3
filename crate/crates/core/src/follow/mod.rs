//! Goal placement ahead of a forecast human and a 10 Hz follow-ahead
//! simulator.

pub mod controller;
pub mod goal;
pub mod pose2d;
pub mod reward;
pub mod scenario;
pub mod sim;

pub use controller::{integrate, Controller, ProportionalController};
pub use goal::{goal_from_prediction, GoalSource, GoalTracker};
pub use pose2d::{normalize_angle, Pose2D};
pub use reward::{reward, RewardConfig};
pub use scenario::{parse_key_values, scenario_matrix, HumanPath, ScenarioConfig, StartSide};
pub use sim::{run_scenarios, scripted_human, simulate, Forecaster, ScenarioResult, ScenarioSummary, StepLog};
