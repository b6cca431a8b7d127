//! Wires the simulator, detector and agents into one runnable world.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    DisplayAgent, ExecutorAgent, PlannerAgent, RcaAgent, RetrieverAgent, DISPLAY_CAPS,
    EXECUTOR_CAPS, PLANNER_CAPS, RCA_CAPS, RETRIEVER_CAPS,
};
use crate::bus::{AgentBus, AgentDescriptor, AgentHandler, RegistrationToken};
use crate::detect::{DetectError, Detector, IntentPrompt};
use crate::executor::Executor;
use crate::knowledge::KnowledgeStore;
use crate::orchestrator::{
    IntentOptions, Orchestrator, OrchestratorAgent, OrchestratorConfig, OrchestratorError,
    Session, ORCHESTRATOR_CAPS,
};
use crate::rca::{RcaAnalyzer, RcaConfig, RcaReport};
use crate::telemetry::catalog::Topology;
use crate::telemetry::{
    DatasetSummary, FaultSpec, GroundTruth, ScenarioKind, SimConfig, Simulator, TelemetryError,
    TelemetryStore,
};
use crate::time::{SimClock, Timestamp};

#[derive(Debug, Clone, Default)]
pub struct WorldConfig {
    pub orchestrator: OrchestratorConfig,
    pub rca: RcaConfig,
}

/// One bus with the six agents registered on it.
pub struct World {
    pub bus: AgentBus,
    pub topology: Topology,
    pub store: Arc<TelemetryStore>,
    pub knowledge: Arc<KnowledgeStore>,
    pub executor: Arc<Executor>,
    pub orchestrator: Arc<Orchestrator>,
    tokens: Vec<RegistrationToken>,
}

impl World {
    pub fn new(
        store: Arc<TelemetryStore>,
        topology: Topology,
        knowledge: Arc<KnowledgeStore>,
        clock: SimClock,
        config: WorldConfig,
    ) -> Self {
        let bus = AgentBus::new(clock);
        let executor = Arc::new(Executor::new(bus.clone(), topology.clone()));
        let orchestrator = Orchestrator::new(bus.clone(), config.orchestrator);
        let mut analyzer = RcaAnalyzer::new(knowledge.patterns().to_vec(), topology.clone());
        analyzer.config = config.rca;

        let agents: Vec<(&str, Vec<&str>, Arc<dyn AgentHandler>)> = vec![
            (
                "orchestrator",
                ORCHESTRATOR_CAPS.to_vec(),
                Arc::new(OrchestratorAgent {
                    orchestrator: orchestrator.clone(),
                }),
            ),
            (
                "planner",
                PLANNER_CAPS.to_vec(),
                Arc::new(PlannerAgent::new(knowledge.clone())),
            ),
            (
                "executor",
                EXECUTOR_CAPS.to_vec(),
                Arc::new(ExecutorAgent {
                    executor: executor.clone(),
                }),
            ),
            (
                "retriever",
                RETRIEVER_CAPS.to_vec(),
                Arc::new(RetrieverAgent {
                    store: store.clone(),
                }),
            ),
            (
                "rca",
                RCA_CAPS.to_vec(),
                Arc::new(RcaAgent {
                    agent_id: "rca".to_string(),
                    bus: bus.clone(),
                    analyzer,
                }),
            ),
            ("display", DISPLAY_CAPS.to_vec(), Arc::new(DisplayAgent)),
        ];
        let tokens = agents
            .into_iter()
            .map(|(id, caps, handler)| {
                bus.register_agent(AgentDescriptor::in_process(id, caps), handler)
                    .expect("fresh bus accepts the built-in agents")
            })
            .collect();
        Self {
            bus,
            topology,
            store,
            knowledge,
            executor,
            orchestrator,
            tokens,
        }
    }

    /// Removes a built-in agent from the bus.
    pub fn deregister(&self, agent_id: &str) -> bool {
        self.tokens
            .iter()
            .find(|t| t.agent_id() == agent_id)
            .is_some_and(|t| self.bus.deregister(t))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("the detector raised no {0} trigger")]
    NoTrigger(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

/// Simulated data for one scenario and the intent the detector raised.
pub struct Prepared {
    pub spec: FaultSpec,
    pub store: TelemetryStore,
    pub topology: Topology,
    pub dataset: DatasetSummary,
    pub ground_truth: Vec<GroundTruth>,
    pub prompt: IntentPrompt,
    /// Simulated time at which the orchestrator starts.
    pub start_at: Timestamp,
}

pub fn prepare(spec: FaultSpec) -> Result<Prepared, PipelineError> {
    let mut sim = Simulator::new(SimConfig::default());
    let dataset = sim.generate_scenario(&spec)?;
    let topology = sim.topology().clone();
    let (store, ground_truth) = sim.into_parts();
    let prompts = Detector::default().scan(&store, &topology, dataset.horizon)?;
    let prompt = prompts
        .into_iter()
        .find(|p| p.context.scenario == spec.scenario)
        .ok_or_else(|| PipelineError::NoTrigger(spec.scenario.as_str().to_string()))?;
    let start_at = prompt.context.window.end + Detector::default().poll_secs;
    Ok(Prepared {
        spec,
        store,
        topology,
        dataset,
        ground_truth,
        prompt,
        start_at,
    })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub spec: FaultSpec,
    pub auto_approve: bool,
    /// Attach the injection id to the report.
    pub attach_ground_truth: bool,
    pub world: WorldConfig,
}

impl RunOptions {
    pub fn new(scenario: ScenarioKind, seed: u64) -> Self {
        Self::for_spec(FaultSpec::reference(scenario, seed))
    }

    pub fn for_spec(spec: FaultSpec) -> Self {
        Self {
            spec,
            auto_approve: true,
            attach_ground_truth: false,
            world: WorldConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub prompt: IntentPrompt,
    pub session: Session,
    pub report: Option<RcaReport>,
    pub dataset: DatasetSummary,
    pub ground_truth: Vec<GroundTruth>,
}

/// Simulates the fault in `options.spec`, detects it and runs one session to
/// completion.
pub async fn run_scenario(
    options: RunOptions,
    knowledge: Arc<KnowledgeStore>,
) -> Result<RunOutcome, PipelineError> {
    let prepared = prepare(options.spec)?;
    let world = World::new(
        Arc::new(prepared.store),
        prepared.topology,
        knowledge,
        SimClock::starting_at(prepared.start_at),
        options.world,
    );
    let session = world
        .orchestrator
        .handle_intent(
            prepared.prompt.clone(),
            IntentOptions {
                auto_approve: Some(options.auto_approve),
                backend: None,
            },
        )
        .await?;
    let mut report = session.report.clone();
    if options.attach_ground_truth {
        if let Some(r) = report.as_mut() {
            r.ground_truth_ref = prepared.ground_truth.first().map(|g| g.injection_id.clone());
        }
    }
    Ok(RunOutcome {
        prompt: prepared.prompt,
        session,
        report,
        dataset: prepared.dataset,
        ground_truth: prepared.ground_truth,
    })
}
