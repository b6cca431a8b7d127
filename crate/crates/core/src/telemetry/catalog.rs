//! Counter catalog and network topology for the two simulated domains.
//!
//! Magnitudes and units are synthetic.

use serde::{Deserialize, Serialize};

pub const RAN_ROP_SECS: i64 = 900;
pub const CORE_SCRAPE_SECS: i64 = 60;

pub const POWER_FAILURE_COUNTER: &str = "pmPowerFailure";

/// RRU energy-meter counters.
pub const ENERGY_METER_COUNTERS: [&str; 13] = [
    "pmVoltage",
    "pmVoltage1",
    "pmVoltage2",
    "pmMaxVoltage1",
    "pmMaxVoltage2",
    "pmMinVoltage1",
    "pmMinVoltage2",
    "pmCurrent1",
    "pmCurrent2",
    "pmMaxCurrent1",
    "pmMaxCurrent2",
    "pmMinCurrent1",
    "pmMinCurrent2",
];

/// PDU-session family gauges.
pub const PDU_SESSION_COUNTERS: [&str; 4] = [
    "pdu_session",
    "pdu_session_ipv4",
    "pdu_session_ipv4v6",
    "pdu_session_ipv6",
];

pub const CORE_COUNTERS: [&str; 12] = [
    "pdu_session",
    "pdu_session_ipv4",
    "pdu_session_ipv4v6",
    "pdu_session_ipv6",
    "subscriber_count_5g",
    "comm_n1n2_msg_transfer_resp",
    "pdu_session_create_sm_context_resp",
    "ebi_assignment_req",
    "udm_sdm_disc_req",
    "create_resp_succ",
    "retained_connection_failure",
    "session_establishment_resp_acc_rcvd",
];

pub const INPUT_POWER_FAILURE: &str = "Input Power Failure";
pub const SINGLE_HTTP_CONNECTION_LOST: &str = "SingleHttpConnectionLost";
pub const CORE_NAMESPACE: &str = "core-5g";
pub const NRF_STATUS_PREFIX: &str = "NRF service status:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Ran,
    Core,
}

impl Domain {
    /// Reporting period of the domain's counters.
    pub fn period_secs(self) -> i64 {
        match self {
            Domain::Ran => RAN_ROP_SECS,
            Domain::Core => CORE_SCRAPE_SECS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterKind {
    /// Sampled level; noise is Gaussian, clipped to three standard deviations.
    Gauge,
    /// Running total; per-period increments are Poisson.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterDef {
    pub name: &'static str,
    pub domain: Domain,
    pub kind: CounterKind,
    pub unit: &'static str,
    /// Gauge mean, or mean increment per period for cumulative counters.
    pub mean: f64,
    /// Gauge standard deviation; unused for cumulative counters.
    pub sd: f64,
    /// Decimal places kept when sampling.
    pub decimals: u32,
}

impl CounterDef {
    pub fn is_integral(&self) -> bool {
        self.decimals == 0
    }
}

const fn gauge(name: &'static str, domain: Domain, unit: &'static str, mean: f64, sd: f64, decimals: u32) -> CounterDef {
    CounterDef {
        name,
        domain,
        kind: CounterKind::Gauge,
        unit,
        mean,
        sd,
        decimals,
    }
}

const fn cumulative(name: &'static str, domain: Domain, rate: f64) -> CounterDef {
    CounterDef {
        name,
        domain,
        kind: CounterKind::Cumulative,
        unit: "count",
        mean: rate,
        sd: 0.0,
        decimals: 0,
    }
}

pub static CATALOG: [CounterDef; 26] = [
    cumulative(POWER_FAILURE_COUNTER, Domain::Ran, 0.0),
    gauge("pmVoltage", Domain::Ran, "V", 48.0, 0.3, 2),
    gauge("pmVoltage1", Domain::Ran, "V", 48.0, 0.3, 2),
    gauge("pmVoltage2", Domain::Ran, "V", 48.0, 0.3, 2),
    gauge("pmMaxVoltage1", Domain::Ran, "V", 49.5, 0.3, 2),
    gauge("pmMaxVoltage2", Domain::Ran, "V", 49.5, 0.3, 2),
    gauge("pmMinVoltage1", Domain::Ran, "V", 46.5, 0.3, 2),
    gauge("pmMinVoltage2", Domain::Ran, "V", 46.5, 0.3, 2),
    gauge("pmCurrent1", Domain::Ran, "A", 10.0, 0.4, 2),
    gauge("pmCurrent2", Domain::Ran, "A", 10.0, 0.4, 2),
    gauge("pmMaxCurrent1", Domain::Ran, "A", 12.0, 0.4, 2),
    gauge("pmMaxCurrent2", Domain::Ran, "A", 12.0, 0.4, 2),
    gauge("pmMinCurrent1", Domain::Ran, "A", 8.0, 0.4, 2),
    gauge("pmMinCurrent2", Domain::Ran, "A", 8.0, 0.4, 2),
    gauge("pdu_session", Domain::Core, "count", 12000.0, 120.0, 0),
    gauge("pdu_session_ipv4", Domain::Core, "count", 7000.0, 80.0, 0),
    gauge("pdu_session_ipv4v6", Domain::Core, "count", 3000.0, 40.0, 0),
    gauge("pdu_session_ipv6", Domain::Core, "count", 2000.0, 30.0, 0),
    gauge("subscriber_count_5g", Domain::Core, "count", 15000.0, 100.0, 0),
    cumulative("comm_n1n2_msg_transfer_resp", Domain::Core, 600.0),
    cumulative("pdu_session_create_sm_context_resp", Domain::Core, 300.0),
    cumulative("ebi_assignment_req", Domain::Core, 250.0),
    cumulative("udm_sdm_disc_req", Domain::Core, 200.0),
    cumulative("create_resp_succ", Domain::Core, 290.0),
    cumulative("retained_connection_failure", Domain::Core, 2.0),
    cumulative("session_establishment_resp_acc_rcvd", Domain::Core, 280.0),
];

pub fn counter_def(name: &str) -> Option<&'static CounterDef> {
    CATALOG.iter().find(|c| c.name == name)
}

pub fn counters_in(domain: Domain) -> impl Iterator<Item = &'static CounterDef> {
    CATALOG.iter().filter(move |c| c.domain == domain)
}

/// Configured voltage operating range for RRU input power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingRange {
    pub min: f64,
    pub max: f64,
}

impl Default for OperatingRange {
    fn default() -> Self {
        Self {
            min: 42.0,
            max: 57.0,
        }
    }
}

impl OperatingRange {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub site_id: String,
    pub rrus: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NfType {
    #[serde(rename = "SMF")]
    Smf,
    #[serde(rename = "NRF")]
    Nrf,
    #[serde(rename = "AMF")]
    Amf,
}

impl NfType {
    pub fn as_str(self) -> &'static str {
        match self {
            NfType::Smf => "SMF",
            NfType::Nrf => "NRF",
            NfType::Amf => "AMF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreNode {
    pub node_id: String,
    pub nf_type: NfType,
    pub namespace: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub sites: Vec<Site>,
    pub core: Vec<CoreNode>,
}

impl Default for Topology {
    fn default() -> Self {
        let site = |id: &str, range: std::ops::RangeInclusive<u32>| Site {
            site_id: id.to_string(),
            rrus: range.map(|i| format!("rru-{i}")).collect(),
        };
        let core = |id: &str, nf_type| CoreNode {
            node_id: id.to_string(),
            nf_type,
            namespace: CORE_NAMESPACE.to_string(),
        };
        Self {
            sites: vec![site("site-1", 1..=4), site("site-2", 5..=8)],
            core: vec![
                core("amf-1", NfType::Amf),
                core("nrf-1", NfType::Nrf),
                core("smf-1", NfType::Smf),
                core("smf-2", NfType::Smf),
            ],
        }
    }
}

impl Topology {
    pub fn rrus(&self) -> impl Iterator<Item = &str> {
        self.sites.iter().flat_map(|s| s.rrus.iter().map(String::as_str))
    }

    pub fn site_of(&self, node: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.rrus.iter().any(|r| r == node))
    }

    pub fn core_node(&self, node: &str) -> Option<&CoreNode> {
        self.core.iter().find(|c| c.node_id == node)
    }

    pub fn domain_of(&self, node: &str) -> Option<Domain> {
        if self.site_of(node).is_some() {
            Some(Domain::Ran)
        } else if self.core_node(node).is_some() {
            Some(Domain::Core)
        } else {
            None
        }
    }

    pub fn contains(&self, node: &str) -> bool {
        self.domain_of(node).is_some()
    }

    /// Root of the node's managed-object paths.
    pub fn object_root(&self, node: &str) -> String {
        match self.core_node(node) {
            Some(c) => format!("namespace={},pod={}", c.namespace, c.node_id),
            None => format!("ManagedElement={node}"),
        }
    }

    /// Object carrying `counter` on `node`.
    pub fn object_path(&self, node: &str, counter: &CounterDef) -> String {
        let root = self.object_root(node);
        match counter.domain {
            Domain::Ran if counter.name == POWER_FAILURE_COUNTER => {
                format!("{root},Equipment=1,FieldReplaceableUnit=1")
            }
            Domain::Ran => format!("{root},Equipment=1,FieldReplaceableUnit=1,EnergyMeter=1"),
            Domain::Core => root,
        }
    }

    /// Nodes that emit counters of `domain`.
    pub fn counter_nodes(&self, domain: Domain) -> Vec<&str> {
        match domain {
            Domain::Ran => self.rrus().collect(),
            Domain::Core => self
                .core
                .iter()
                .filter(|c| c.nf_type == NfType::Smf)
                .map(|c| c.node_id.as_str())
                .collect(),
        }
    }

    pub fn namespace_of(&self, node: &str) -> Option<&str> {
        self.core_node(node).map(|c| c.namespace.as_str())
    }
}
