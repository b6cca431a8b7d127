//! Multi-agent troubleshooting for a simulated telecom network.

pub mod agents;
pub mod bus;
pub mod detect;
pub mod executor;
pub mod knowledge;
pub mod orchestrator;
pub mod pipeline;
pub mod planner;
pub mod rca;
pub mod scorer;
pub mod telemetry;
pub mod text;
pub mod time;
