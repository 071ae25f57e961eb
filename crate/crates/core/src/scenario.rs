//! Scenario configuration: the complete, serializable description of one
//! simulation run. Files are TOML; omitted fields take the documented
//! defaults, and `run` writes the fully resolved form next to its outputs
//! so every run is reproducible from its artifacts alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hammerstein::{HammersteinModel, InputSpec};
use crate::qos::EnergyParams;
use crate::types::{Method, ServiceId};

/// Unit-disk radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    /// Transmission range, meters. Delivery at exactly this distance
    /// succeeds.
    pub range: f64,
    /// Fixed per-hop propagation and processing delay, seconds.
    pub latency: f64,
    /// Channel bit rate, bits per second.
    pub bitrate: f64,
    /// Bernoulli loss probability applied per delivery.
    pub loss: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            range: 45.0,
            latency: 0.001,
            bitrate: 1e6,
            loss: 0.003,
        }
    }
}

/// Random-waypoint mobility parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    /// Speed range a node draws from per waypoint, meters per second.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Pause at each waypoint before drawing the next, seconds.
    pub pause: f64,
    /// Position update interval, seconds.
    pub tick: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            speed_min: 0.3,
            speed_max: 1.0,
            pause: 3.0,
            tick: 0.1,
        }
    }
}

/// Energy model parameters and the initial battery distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    /// Activation energy per bit, joules.
    pub e_act: f64,
    /// Amplifier energy per bit per square meter, joules.
    pub e_amp: f64,
    /// Initial battery drawn uniformly from this range, joules.
    pub initial_min: f64,
    pub initial_max: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            e_act: 50e-9,
            e_amp: 100e-12,
            initial_min: 0.8,
            initial_max: 1.5,
        }
    }
}

impl EnergyConfig {
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            e_act: self.e_act,
            e_amp: self.e_amp,
        }
    }
}

/// How concrete services are generated and what they advertise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Concrete service instances placed uniformly over (node, abstract
    /// type) pairs.
    pub concrete_count: u32,
    /// Intrinsic task execution time drawn uniformly from this range,
    /// seconds.
    pub task_time_min: f64,
    pub task_time_max: f64,
    /// Advertised failure rate drawn uniformly from this range, failures
    /// per second.
    pub failure_rate_min: f64,
    pub failure_rate_max: f64,
    /// Fixed non-task share of the advertised response time (protocol
    /// stack, coding and decoding), seconds.
    pub overhead: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            concrete_count: 180,
            task_time_min: 0.05,
            task_time_max: 0.4,
            failure_rate_min: 0.0,
            failure_rate_max: 0.2,
            overhead: 0.05,
        }
    }
}

/// Discovery protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Initial hop budget on flooded requests.
    pub ttl: u32,
    /// Beacon broadcast period, seconds; 0 disables beaconing.
    pub beacon_period: f64,
    /// Repository entries older than this many periods are evicted.
    pub staleness_periods: f64,
    /// How long the initiator collects replies before scoring, seconds.
    pub collect_timeout: f64,
    pub beacon_bits: u64,
    pub request_bits: u64,
    pub reply_bits: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            ttl: 5,
            beacon_period: 1.0,
            staleness_periods: 3.0,
            collect_timeout: 0.5,
            beacon_bits: 512,
            request_bits: 256,
            reply_bits: 512,
        }
    }
}

/// When composite requests are issued and how executions are supervised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    /// Abstract services per composite request; the plan is S1..Sn in
    /// order.
    pub plan_size: u32,
    /// Sim-time of the first composite request, seconds.
    pub first_request: f64,
    /// Interval between composite requests, seconds.
    pub request_interval: f64,
    /// Fixed requester node id; absent means one is drawn at setup and
    /// issues every request of the run.
    pub initiator: Option<u32>,
    /// Payload size of one handoff message, bits.
    pub handoff_bits: u64,
    /// Stage deadline = factor x (advertised response time + estimated
    /// route transit).
    pub stage_timeout_factor: f64,
    /// How many times a broken request may re-run discovery before it is
    /// abandoned.
    pub max_recompositions: u32,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            plan_size: 5,
            first_request: 5.0,
            request_interval: 5.0,
            initiator: None,
            handoff_bits: 16384,
            stage_timeout_factor: 2.0,
            max_recompositions: 3,
        }
    }
}

/// Malicious node population. A misbehaving node keeps beaconing and
/// flooding like everyone else; its damage is refusing composition work
/// handed to it and, more rarely, discarding payloads it should relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MisbehaviorConfig {
    /// Fraction of nodes that misbehave, drawn at setup.
    pub fraction: f64,
    /// Probability a misbehaving provider silently refuses a stage
    /// addressed to it.
    pub drop_probability: f64,
    /// Probability a misbehaving relay discards a unicast payload it was
    /// asked to forward.
    pub relay_drop_probability: f64,
}

impl Default for MisbehaviorConfig {
    fn default() -> Self {
        MisbehaviorConfig {
            fraction: 0.25,
            drop_probability: 0.9,
            relay_drop_probability: 0.03,
        }
    }
}

/// Trust fusion configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustConfig {
    /// The fusion model. Runs require the static configuration; dynamic
    /// lags are available through the library API only.
    pub model: HammersteinModel,
    /// Add hop count as a fifth cost input.
    pub use_hop_count: bool,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            model: HammersteinModel::static_weights(&[0.05, 0.05, 0.05, 0.5, 0.35]),
            use_hop_count: true,
        }
    }
}

/// Metric series parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Time-series bin width, seconds.
    pub bin: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { bin: 10.0 }
    }
}

/// One explicitly placed hosted service (test topologies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostedServiceConfig {
    pub service: u32,
    pub concrete: u32,
    #[serde(default = "default_task_time")]
    pub task_time: f64,
    #[serde(default)]
    pub failure_rate: f64,
}

fn default_task_time() -> f64 {
    0.3
}

/// Deterministic setup overrides for constructed topologies. Every field
/// is optional; absent fields fall back to seeded random setup.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    /// Explicit initial positions, one `[x, y]` per node.
    pub positions: Option<Vec<[f64; 2]>>,
    /// Explicit service placement, one offering list per node; replaces
    /// random placement entirely.
    pub hosted: Option<Vec<Vec<HostedServiceConfig>>>,
    /// Explicit misbehaving node ids; replaces the sampled fraction.
    pub misbehaving: Option<Vec<u32>>,
    /// Freeze every node in place regardless of mobility settings.
    pub static_nodes: bool,
    /// Fix every node's initial battery to this value, joules.
    pub initial_energy: Option<f64>,
}

/// The complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub nodes: u32,
    pub arena_width: f64,
    pub arena_height: f64,
    /// Simulation horizon, seconds.
    pub duration: f64,
    pub seed: u64,
    pub method: Method,
    pub radio: RadioConfig,
    pub mobility: MobilityConfig,
    pub energy: EnergyConfig,
    pub services: ServiceConfig,
    pub discovery: DiscoveryConfig,
    pub workload: WorkloadConfig,
    pub misbehavior: MisbehaviorConfig,
    pub trust: TrustConfig,
    pub metrics: MetricsConfig,
    pub overrides: Overrides,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            nodes: 100,
            arena_width: 300.0,
            arena_height: 300.0,
            duration: 150.0,
            seed: 1,
            method: Method::Proposed,
            radio: RadioConfig::default(),
            mobility: MobilityConfig::default(),
            energy: EnergyConfig::default(),
            services: ServiceConfig::default(),
            discovery: DiscoveryConfig::default(),
            workload: WorkloadConfig::default(),
            misbehavior: MisbehaviorConfig::default(),
            trust: TrustConfig::default(),
            metrics: MetricsConfig::default(),
            overrides: Overrides::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Fully resolved TOML, every field explicit.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Truncated SHA-256 of the resolved form; identifies a configuration
    /// in trace and summary files.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// The abstract services of every composite request, in plan order.
    pub fn plan(&self) -> Vec<ServiceId> {
        (1..=self.workload.plan_size).map(ServiceId).collect()
    }

    pub fn input_spec(&self) -> InputSpec {
        if self.trust.use_hop_count {
            InputSpec::with_hop_count()
        } else {
            InputSpec::standard_four()
        }
    }

    /// Check every field, collecting all problems rather than stopping at
    /// the first.
    pub fn validate(&self) -> Result<()> {
        fn check(problems: &mut Vec<String>, ok: bool, msg: &str) {
            if !ok {
                problems.push(msg.to_string());
            }
        }
        let mut problems = Vec::new();

        check(&mut problems, self.nodes > 0, "nodes must be > 0");
        check(
            &mut problems,
            self.arena_width > 0.0,
            "arena_width must be > 0",
        );
        check(
            &mut problems,
            self.arena_height > 0.0,
            "arena_height must be > 0",
        );
        check(&mut problems, self.duration >= 0.0, "duration must be >= 0");

        check(
            &mut problems,
            self.radio.range > 0.0,
            "radio.range must be > 0",
        );
        check(
            &mut problems,
            self.radio.latency >= 0.0,
            "radio.latency must be >= 0",
        );
        check(
            &mut problems,
            self.radio.bitrate > 0.0,
            "radio.bitrate must be > 0",
        );
        check(
            &mut problems,
            (0.0..=1.0).contains(&self.radio.loss),
            "radio.loss must lie in [0, 1]",
        );

        check(
            &mut problems,
            self.mobility.speed_min >= 0.0,
            "mobility.speed_min must be >= 0",
        );
        check(
            &mut problems,
            self.mobility.speed_min <= self.mobility.speed_max,
            "mobility.speed_min must not exceed mobility.speed_max",
        );
        check(
            &mut problems,
            self.mobility.pause >= 0.0,
            "mobility.pause must be >= 0",
        );
        check(
            &mut problems,
            self.mobility.tick > 0.0,
            "mobility.tick must be > 0",
        );

        check(
            &mut problems,
            self.energy.e_act >= 0.0,
            "energy.e_act must be >= 0",
        );
        check(
            &mut problems,
            self.energy.e_amp >= 0.0,
            "energy.e_amp must be >= 0",
        );
        check(
            &mut problems,
            self.energy.initial_min >= 0.0,
            "energy.initial_min must be >= 0",
        );
        check(
            &mut problems,
            self.energy.initial_min <= self.energy.initial_max,
            "energy.initial_min must not exceed energy.initial_max",
        );

        check(
            &mut problems,
            self.services.task_time_min >= 0.0,
            "services.task_time_min must be >= 0",
        );
        check(
            &mut problems,
            self.services.task_time_min <= self.services.task_time_max,
            "services.task_time_min must not exceed services.task_time_max",
        );
        check(
            &mut problems,
            self.services.failure_rate_min >= 0.0,
            "services.failure_rate_min must be >= 0",
        );
        check(
            &mut problems,
            self.services.failure_rate_min <= self.services.failure_rate_max,
            "services.failure_rate_min must not exceed services.failure_rate_max",
        );
        check(
            &mut problems,
            self.services.overhead >= 0.0,
            "services.overhead must be >= 0",
        );

        check(
            &mut problems,
            self.discovery.ttl >= 1,
            "discovery.ttl must be >= 1",
        );
        check(
            &mut problems,
            self.discovery.beacon_period >= 0.0,
            "discovery.beacon_period must be >= 0 (0 disables beaconing)",
        );
        check(
            &mut problems,
            self.discovery.staleness_periods > 0.0,
            "discovery.staleness_periods must be > 0",
        );
        check(
            &mut problems,
            self.discovery.collect_timeout > 0.0,
            "discovery.collect_timeout must be > 0",
        );
        check(
            &mut problems,
            self.discovery.beacon_bits >= 1,
            "discovery.beacon_bits must be >= 1",
        );
        check(
            &mut problems,
            self.discovery.request_bits >= 1,
            "discovery.request_bits must be >= 1",
        );
        check(
            &mut problems,
            self.discovery.reply_bits >= 1,
            "discovery.reply_bits must be >= 1",
        );

        check(
            &mut problems,
            self.workload.plan_size >= 1,
            "workload.plan_size must be >= 1",
        );
        check(
            &mut problems,
            self.workload.first_request >= 0.0,
            "workload.first_request must be >= 0",
        );
        check(
            &mut problems,
            self.workload.request_interval > 0.0,
            "workload.request_interval must be > 0",
        );
        if let Some(initiator) = self.workload.initiator {
            check(
                &mut problems,
                initiator < self.nodes,
                "workload.initiator must name an existing node",
            );
        }
        check(
            &mut problems,
            self.workload.handoff_bits >= 1,
            "workload.handoff_bits must be >= 1",
        );
        check(
            &mut problems,
            self.workload.stage_timeout_factor > 0.0,
            "workload.stage_timeout_factor must be > 0",
        );

        check(
            &mut problems,
            (0.0..=1.0).contains(&self.misbehavior.fraction),
            "misbehavior.fraction must lie in [0, 1]",
        );
        check(
            &mut problems,
            (0.0..=1.0).contains(&self.misbehavior.drop_probability),
            "misbehavior.drop_probability must lie in [0, 1]",
        );
        check(
            &mut problems,
            (0.0..=1.0).contains(&self.misbehavior.relay_drop_probability),
            "misbehavior.relay_drop_probability must lie in [0, 1]",
        );

        match self.trust.model.validate() {
            Err(e) => problems.push(format!("trust.model: {e}")),
            Ok(()) => {
                if !self.trust.model.is_static() {
                    problems.push(
                        "trust.model: runs require a static model (no lags); \
                         dynamic models are available through the library API"
                            .to_string(),
                    );
                }
                let needed = self.input_spec().arity();
                if self.trust.model.arity() != needed {
                    problems.push(format!(
                        "trust.model: expects {} inputs but the input set has {} \
                         (use_hop_count = {})",
                        self.trust.model.arity(),
                        needed,
                        self.trust.use_hop_count
                    ));
                }
            }
        }

        check(
            &mut problems,
            self.metrics.bin > 0.0,
            "metrics.bin must be > 0",
        );

        if let Some(positions) = &self.overrides.positions {
            if positions.len() != self.nodes as usize {
                problems.push(format!(
                    "overrides.positions has {} entries for {} nodes",
                    positions.len(),
                    self.nodes
                ));
            }
            for (i, [x, y]) in positions.iter().enumerate() {
                if !(0.0..=self.arena_width).contains(x) || !(0.0..=self.arena_height).contains(y) {
                    problems.push(format!(
                        "overrides.positions[{i}] = [{x}, {y}] lies outside the arena"
                    ));
                }
            }
        }
        if let Some(hosted) = &self.overrides.hosted {
            if hosted.len() != self.nodes as usize {
                problems.push(format!(
                    "overrides.hosted has {} entries for {} nodes",
                    hosted.len(),
                    self.nodes
                ));
            }
            for (i, offerings) in hosted.iter().enumerate() {
                for off in offerings {
                    if off.task_time < 0.0 || off.failure_rate < 0.0 {
                        problems.push(format!(
                            "overrides.hosted[{i}] concrete C{} has negative attributes",
                            off.concrete
                        ));
                    }
                }
            }
        }
        if let Some(misbehaving) = &self.overrides.misbehaving {
            for id in misbehaving {
                if *id >= self.nodes {
                    problems.push(format!(
                        "overrides.misbehaving names node N{id}, but only {} nodes exist",
                        self.nodes
                    ));
                }
            }
        }
        if let Some(initial) = self.overrides.initial_energy {
            check(
                &mut problems,
                initial >= 0.0,
                "overrides.initial_energy must be >= 0",
            );
            let _ = initial;
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hammerstein::GainFunction;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let config = ScenarioConfig::default();
        let text = config.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let config = ScenarioConfig::from_toml_str("nodes = 10\nseed = 7").unwrap();
        assert_eq!(config.nodes, 10);
        assert_eq!(config.seed, 7);
        assert_eq!(config.duration, 150.0);
        assert_eq!(config.radio.range, 45.0);
    }

    #[test]
    fn empty_toml_is_the_default() {
        assert_eq!(
            ScenarioConfig::from_toml_str("").unwrap(),
            ScenarioConfig::default()
        );
    }

    #[test]
    fn malformed_toml_reports_config_error() {
        match ScenarioConfig::from_toml_str("nodes = ") {
            Err(Error::InvalidConfig(_)) => {}
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut config = ScenarioConfig::default();
        config.nodes = 0;
        config.radio.loss = 1.5;
        config.workload.plan_size = 0;
        match config.validate() {
            Err(Error::InvalidConfig(problems)) => {
                assert!(problems.iter().any(|p| p.contains("nodes")));
                assert!(problems.iter().any(|p| p.contains("radio.loss")));
                assert!(problems.iter().any(|p| p.contains("plan_size")));
                assert_eq!(problems.len(), 3, "{problems:?}");
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn dynamic_trust_model_rejected_for_runs() {
        let mut config = ScenarioConfig::default();
        config.trust.model = HammersteinModel {
            gains: vec![GainFunction::Identity; 4],
            ar_coeffs: vec![0.5],
            ma_coeffs: vec![vec![1.0]; 4],
            noise_variance: 0.0,
        };
        match config.validate() {
            Err(Error::InvalidConfig(problems)) => {
                assert!(
                    problems.iter().any(|p| p.contains("static")),
                    "{problems:?}"
                );
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn hop_count_input_requires_matching_arity() {
        let mut config = ScenarioConfig::default();
        config.trust.use_hop_count = false;
        assert!(config.validate().is_err());
        config.trust.model = HammersteinModel::static_equal_weights(4);
        config.validate().unwrap();
    }

    #[test]
    fn override_lengths_must_match_node_count() {
        let mut config = ScenarioConfig::default();
        config.nodes = 3;
        config.overrides.positions = Some(vec![[0.0, 0.0]; 2]);
        assert!(config.validate().is_err());
        config.overrides.positions = Some(vec![[0.0, 0.0]; 3]);
        config.validate().unwrap();
    }

    #[test]
    fn positions_outside_arena_rejected() {
        let mut config = ScenarioConfig::default();
        config.nodes = 1;
        config.overrides.positions = Some(vec![[500.0, 10.0]]);
        assert!(config.validate().is_err());
    }

    #[test]
    fn misbehaving_override_must_name_existing_nodes() {
        let mut config = ScenarioConfig::default();
        config.nodes = 5;
        config.overrides.misbehaving = Some(vec![7]);
        assert!(config.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::default();
        let mut b = ScenarioConfig::default();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn plan_lists_services_in_order() {
        let config = ScenarioConfig::default();
        let plan = config.plan();
        assert_eq!(plan.len(), 5);
        assert_eq!(plan[0], ServiceId(1));
        assert_eq!(plan[4], ServiceId(5));
    }

    #[test]
    fn load_missing_file_is_io_error() {
        match ScenarioConfig::load(Path::new("/nonexistent/config.toml")) {
            Err(Error::Io(_)) => {}
            other => panic!("expected Io, got {other:?}"),
        }
    }

    #[test]
    fn hosted_override_with_custom_attributes_parses() {
        let text = r#"
nodes = 2
[overrides]
hosted = [
    [{ service = 1, concrete = 10, task_time = 0.25, failure_rate = 0.1 }],
    [],
]
"#;
        let config = ScenarioConfig::from_toml_str(text).unwrap();
        let hosted = config.overrides.hosted.as_ref().unwrap();
        assert_eq!(hosted[0][0].task_time, 0.25);
        assert!(hosted[1].is_empty());
        config.validate().unwrap();
    }
}
