use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::catalog::{
    self, CounterDef, CounterKind, Domain, NfType, OperatingRange, Topology, CORE_NAMESPACE,
    INPUT_POWER_FAILURE, NRF_STATUS_PREFIX, POWER_FAILURE_COUNTER, SINGLE_HTTP_CONNECTION_LOST,
};
use super::{
    Alarm, CounterSample, FaultSpec, LogEntry, LogLevel, ScenarioKind, Severity, TelemetryError,
    TelemetryStore,
};
use crate::time::{Timestamp, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub voltage_range: OperatingRange,
    /// History generated before the earliest fault window.
    pub baseline_span_secs: i64,
    /// History generated after the latest fault window.
    pub tail_span_secs: i64,
    pub topology: Topology,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            voltage_range: OperatingRange::default(),
            baseline_span_secs: 6 * 3600,
            tail_span_secs: 3600,
            topology: Topology::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureCounts {
    pub counters: usize,
    pub alarms: usize,
    pub logs: usize,
}

impl SignatureCounts {
    pub fn total(&self) -> usize {
        self.counters + self.alarms + self.logs
    }

    fn add(&mut self, other: &SignatureCounts) {
        self.counters += other.counters;
        self.alarms += other.alarms;
        self.logs += other.logs;
    }
}

/// What was injected, where and when. Kept apart from the telemetry so tests
/// can compare analysis output against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub injection_id: String,
    pub scenario: ScenarioKind,
    pub target_nodes: Vec<String>,
    pub window: Window,
    pub magnitude: f64,
    pub description: String,
    pub signature: SignatureCounts,
}

impl GroundTruth {
    fn same_injection(&self, spec: &FaultSpec) -> bool {
        self.scenario == spec.scenario
            && self.target_nodes == spec.target_nodes
            && self.window == spec.window
            && self.magnitude == spec.magnitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub horizon: Window,
    pub counters: usize,
    pub alarms: usize,
    pub logs: usize,
    pub signature: SignatureCounts,
    pub dataset_hash: String,
}

/// Owns the stores and the ground-truth record of one simulated network.
#[derive(Debug, Clone, Default)]
pub struct Simulator {
    config: SimConfig,
    injections: Vec<GroundTruth>,
    store: TelemetryStore,
}

fn stream_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn round_to(v: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}

fn align_down(ts: Timestamp, step: i64) -> Timestamp {
    ts.div_euclid(step) * step
}

fn align_up(ts: Timestamp, step: i64) -> Timestamp {
    let down = align_down(ts, step);
    if down == ts {
        ts
    } else {
        down + step
    }
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Self {
            config,
            injections: Vec::new(),
            store: TelemetryStore::default(),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.config.topology
    }

    pub fn store(&self) -> &TelemetryStore {
        &self.store
    }

    pub fn into_parts(self) -> (TelemetryStore, Vec<GroundTruth>) {
        (self.store, self.injections)
    }

    pub fn ground_truth(&self) -> &[GroundTruth] {
        &self.injections
    }

    pub fn validate(&self, spec: &FaultSpec) -> Result<(), TelemetryError> {
        if spec.window.start >= spec.window.end {
            return Err(TelemetryError::InvalidWindow {
                start: spec.window.start,
                end: spec.window.end,
            });
        }
        if spec.target_nodes.is_empty() {
            return Err(TelemetryError::EmptyTargets);
        }
        if !spec.magnitude.is_finite() || spec.magnitude < 0.0 {
            return Err(TelemetryError::InvalidMagnitude(spec.magnitude));
        }
        let domain = spec.scenario.domain();
        for node in &spec.target_nodes {
            if self.config.topology.domain_of(node) != Some(domain) {
                return Err(TelemetryError::UnknownNode {
                    node: node.clone(),
                    scenario: spec.scenario.as_str().to_string(),
                });
            }
        }
        Ok(())
    }

    /// Records a fault to be rendered by the next generation.
    pub fn inject_fault(&mut self, spec: &FaultSpec) -> Result<GroundTruth, TelemetryError> {
        self.validate(spec)?;
        for existing in &self.injections {
            if !existing.window.overlaps(&spec.window) {
                continue;
            }
            if let Some(node) = spec
                .target_nodes
                .iter()
                .find(|n| existing.target_nodes.contains(n))
            {
                return Err(TelemetryError::OverlappingInjection {
                    node: node.clone(),
                    start: existing.window.start,
                    end: existing.window.end,
                });
            }
        }
        let description = match spec.scenario {
            ScenarioKind::RanInputPowerFailure => "power distribution interruption".to_string(),
            ScenarioKind::CorePduDegradation => {
                let nrf_targeted = spec.target_nodes.iter().any(|n| {
                    self.config
                        .topology
                        .core_node(n)
                        .is_some_and(|c| c.nf_type == NfType::Nrf)
                });
                if nrf_targeted {
                    "NRF service suspension".to_string()
                } else {
                    "SMF-NRF HTTP connectivity loss".to_string()
                }
            }
        };
        let truth = GroundTruth {
            injection_id: format!("inj-{}", self.injections.len() + 1),
            scenario: spec.scenario,
            target_nodes: spec.target_nodes.clone(),
            window: spec.window,
            magnitude: spec.magnitude,
            description,
            signature: SignatureCounts::default(),
        };
        self.injections.push(truth.clone());
        Ok(truth)
    }

    /// Regenerates the stores: baseline traffic for every node over a horizon
    /// around all fault windows, plus the signatures of every recorded
    /// injection. `spec` itself is recorded first unless already present or
    /// of zero magnitude.
    pub fn generate_scenario(&mut self, spec: &FaultSpec) -> Result<DatasetSummary, TelemetryError> {
        self.validate(spec)?;
        if spec.magnitude > 0.0 && !self.injections.iter().any(|g| g.same_injection(spec)) {
            self.inject_fault(spec)?;
        }

        let mut span = spec.window;
        for g in &self.injections {
            span = span.union(&g.window);
        }
        let horizon = Window::new(
            align_down(span.start - self.config.baseline_span_secs, catalog::RAN_ROP_SECS),
            align_up(span.end + self.config.tail_span_secs, catalog::RAN_ROP_SECS),
        );

        let mut store = TelemetryStore::default();
        let mut signatures = vec![SignatureCounts::default(); self.injections.len()];
        self.generate_counters(spec.seed, horizon, &mut store, &mut signatures);
        self.generate_baseline_events(spec.seed, horizon, &mut store);
        self.generate_fault_events(&mut store, &mut signatures);
        store.finish();

        let mut total = SignatureCounts::default();
        for (g, s) in self.injections.iter_mut().zip(&signatures) {
            g.signature = *s;
            total.add(s);
        }
        let summary = DatasetSummary {
            seed: spec.seed,
            horizon,
            counters: store.counter_count(),
            alarms: store.alarms.len(),
            logs: store.logs.len(),
            signature: total,
            dataset_hash: store.content_hash(),
        };
        self.store = store;
        Ok(summary)
    }

    fn active_fault(&self, node: &str, domain: Domain, ts: Timestamp) -> Option<(usize, f64)> {
        self.injections.iter().enumerate().find_map(|(i, g)| {
            (g.magnitude > 0.0
                && g.scenario.domain() == domain
                && g.window.contains(ts)
                && g.target_nodes.iter().any(|n| n == node))
            .then_some((i, g.magnitude))
        })
    }

    fn generate_counters(
        &self,
        seed: u64,
        horizon: Window,
        store: &mut TelemetryStore,
        signatures: &mut [SignatureCounts],
    ) {
        let topo = &self.config.topology;
        for domain in [Domain::Ran, Domain::Core] {
            let period = domain.period_secs();
            for node in topo.counter_nodes(domain) {
                for def in catalog::counters_in(domain) {
                    let object_path = topo.object_path(node, def);
                    let mut rng = stream_rng(seed, &format!("counter/{node}/{}", def.name));
                    let poisson = (def.kind == CounterKind::Cumulative && def.mean > 0.0)
                        .then(|| Poisson::new(def.mean).expect("positive rate"));
                    let mut total = 0.0;
                    let mut ts = horizon.start;
                    while ts <= horizon.end {
                        let fault = self.active_fault(node, domain, ts);
                        let (value, altered) = match def.kind {
                            CounterKind::Gauge => {
                                let z: f64 = rng.sample(StandardNormal);
                                let noise = (z * def.sd).clamp(-3.0 * def.sd, 3.0 * def.sd);
                                let clean = round_to(def.mean + noise, def.decimals);
                                let value = match fault {
                                    Some((_, m)) => round_to(
                                        self.faulted_gauge(def, noise, m).max(0.0),
                                        def.decimals,
                                    ),
                                    None => clean,
                                };
                                (value, value != clean)
                            }
                            CounterKind::Cumulative => {
                                let inc = poisson.as_ref().map_or(0.0, |p| p.sample(&mut rng));
                                let faulted = match fault {
                                    Some((_, m)) => faulted_increment(def, inc, m),
                                    None => inc,
                                };
                                total += faulted;
                                (total, faulted != inc)
                            }
                        };
                        if altered {
                            if let Some((i, _)) = fault {
                                signatures[i].counters += 1;
                            }
                        }
                        store.push_sample(CounterSample {
                            node_id: node.to_string(),
                            object_path: object_path.clone(),
                            counter: def.name.to_string(),
                            timestamp: ts,
                            value,
                        });
                        ts += period;
                    }
                }
            }
        }
    }

    fn faulted_gauge(&self, def: &CounterDef, noise: f64, m: f64) -> f64 {
        let min_v = self.config.voltage_range.min;
        let drop = (0.35 * m).min(0.9);
        match def.name {
            "pmVoltage" | "pmVoltage1" => min_v - (2.0 + 4.0 * m) + noise,
            "pmMinVoltage1" => min_v - (4.0 + 6.0 * m) + noise,
            "pmCurrent1" => def.mean * (1.0 - 0.6 * m.min(1.0)) + noise,
            "pmMinCurrent1" => def.mean * (1.0 - 0.9 * m.min(1.0)) + noise,
            "pdu_session" | "pdu_session_ipv4" | "pdu_session_ipv4v6" | "pdu_session_ipv6" => {
                (def.mean + noise) * (1.0 - drop)
            }
            "subscriber_count_5g" => (def.mean + noise) * (1.0 - drop / 3.0),
            _ => def.mean + noise,
        }
    }

    fn generate_baseline_events(&self, seed: u64, horizon: Window, store: &mut TelemetryStore) {
        let topo = &self.config.topology;
        for node in topo.rrus() {
            let mut ts = align_up(horizon.start, 3600);
            while ts <= horizon.end {
                store.logs.push(LogEntry {
                    node_id: node.to_string(),
                    namespace: None,
                    timestamp: ts,
                    level: LogLevel::Info,
                    message: "FieldReplaceableUnit=1 health check ok".to_string(),
                });
                ts += 3600;
            }
            self.background_alarms(seed, node, "Fan Speed Deviation", Severity::Minor, horizon, store);
        }
        for core in &topo.core {
            let nf = match core.nf_type {
                NfType::Smf => "SMF",
                NfType::Nrf => "NRF",
                NfType::Amf => "AMF",
            };
            let mut ts = align_up(horizon.start, 300);
            while ts <= horizon.end {
                store.logs.push(LogEntry {
                    node_id: core.node_id.clone(),
                    namespace: Some(core.namespace.clone()),
                    timestamp: ts,
                    level: LogLevel::Info,
                    message: format!("{nf} pod heartbeat ok"),
                });
                ts += 300;
            }
            if core.nf_type == NfType::Nrf {
                store.logs.push(LogEntry {
                    node_id: core.node_id.clone(),
                    namespace: Some(core.namespace.clone()),
                    timestamp: horizon.start,
                    level: LogLevel::Info,
                    message: format!("{NRF_STATUS_PREFIX} REGISTERED (nnrf-nfm)"),
                });
            }
            self.background_alarms(
                seed,
                &core.node_id,
                "Certificate Expiry Warning",
                Severity::Warning,
                horizon,
                store,
            );
        }
    }

    fn background_alarms(
        &self,
        seed: u64,
        node: &str,
        alarm_type: &str,
        severity: Severity,
        horizon: Window,
        store: &mut TelemetryStore,
    ) {
        let mut rng = stream_rng(seed, &format!("alarms/{node}"));
        let mut slot = align_down(horizon.start, 3600);
        while slot <= horizon.end {
            let fire = rng.random::<f64>() < 0.08;
            let offset = rng.random_range(0..60) * 60;
            let raised_at = slot + offset;
            if fire && horizon.contains(raised_at) {
                store.alarms.push(Alarm {
                    alarm_id: format!("ALM-{node}-{raised_at}-BG"),
                    alarm_type: alarm_type.to_string(),
                    severity,
                    managed_element: node.to_string(),
                    fru: None,
                    raised_at,
                    cleared_at: Some(raised_at + 600),
                    description: format!("{alarm_type} reported by {node}"),
                });
            }
            slot += 3600;
        }
    }

    fn generate_fault_events(&self, store: &mut TelemetryStore, signatures: &mut [SignatureCounts]) {
        let topo = &self.config.topology;
        let nrf_name = topo
            .core
            .iter()
            .find(|c| c.nf_type == NfType::Nrf)
            .map(|c| c.node_id.clone())
            .unwrap_or_else(|| "nrf".to_string());
        for (i, g) in self.injections.iter().enumerate() {
            if g.magnitude <= 0.0 {
                continue;
            }
            let w = g.window;
            for node in &g.target_nodes {
                match g.scenario {
                    ScenarioKind::RanInputPowerFailure => {
                        store.alarms.push(Alarm {
                            alarm_id: format!("ALM-{node}-{}-IPF", w.start),
                            alarm_type: INPUT_POWER_FAILURE.to_string(),
                            severity: Severity::Critical,
                            managed_element: node.clone(),
                            fru: Some("FieldReplaceableUnit=1".to_string()),
                            raised_at: w.start,
                            cleared_at: Some(w.end),
                            description: "Input voltage below operating range on FieldReplaceableUnit=1"
                                .to_string(),
                        });
                        signatures[i].alarms += 1;
                        let mut ts = w.start;
                        while ts <= w.end {
                            store.logs.push(LogEntry {
                                node_id: node.clone(),
                                namespace: None,
                                timestamp: ts,
                                level: LogLevel::Error,
                                message: format!(
                                    "FieldReplaceableUnit=1 input voltage below operating range (min {:.1} V); power supply interrupted",
                                    self.config.voltage_range.min
                                ),
                            });
                            signatures[i].logs += 1;
                            ts += catalog::RAN_ROP_SECS;
                        }
                    }
                    ScenarioKind::CorePduDegradation => {
                        let core = topo.core_node(node).expect("validated core node");
                        match core.nf_type {
                            NfType::Nrf => {
                                for (ts, level, status) in [
                                    (w.start, LogLevel::Warn, "SUSPENDED"),
                                    (w.end, LogLevel::Info, "REGISTERED"),
                                ] {
                                    store.logs.push(LogEntry {
                                        node_id: node.clone(),
                                        namespace: Some(CORE_NAMESPACE.to_string()),
                                        timestamp: ts,
                                        level,
                                        message: format!("{NRF_STATUS_PREFIX} {status} (nnrf-nfm)"),
                                    });
                                    signatures[i].logs += 1;
                                }
                            }
                            NfType::Smf | NfType::Amf => {
                                store.alarms.push(Alarm {
                                    alarm_id: format!("ALM-{node}-{}-SHCL", w.start),
                                    alarm_type: SINGLE_HTTP_CONNECTION_LOST.to_string(),
                                    severity: Severity::Major,
                                    managed_element: node.clone(),
                                    fru: None,
                                    raised_at: w.start,
                                    cleared_at: Some(w.end),
                                    description: format!("HTTP connection between {node} and {nrf_name} lost"),
                                });
                                signatures[i].alarms += 1;
                                let mut ts = w.start;
                                while ts <= w.end {
                                    store.logs.push(LogEntry {
                                        node_id: node.clone(),
                                        namespace: Some(core.namespace.clone()),
                                        timestamp: ts,
                                        level: LogLevel::Error,
                                        message: format!(
                                            "{SINGLE_HTTP_CONNECTION_LOST}: HTTP connection to {nrf_name} lost; connection establishment failed"
                                        ),
                                    });
                                    signatures[i].logs += 1;
                                    ts += catalog::CORE_SCRAPE_SECS;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn faulted_increment(def: &CounterDef, inc: f64, m: f64) -> f64 {
    match def.name {
        POWER_FAILURE_COUNTER => inc + (3.0 * m).ceil(),
        "comm_n1n2_msg_transfer_resp" => (inc * (1.0 + 2.0 * m)).round(),
        "retained_connection_failure" => inc + (20.0 * m).round(),
        _ => inc,
    }
}
