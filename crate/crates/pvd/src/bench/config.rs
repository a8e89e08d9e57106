//! TOML run configuration.
//!
//! One file describes one run completely: the method, the protocol knobs, the
//! dataset and output paths, and the agent backends (seeded simulators or
//! remote endpoints). The parsed form is what gets snapshotted into every
//! transcript envelope, so a config plus its seed is sufficient to re-create
//! a run. Credentials never live here: remote endpoints name the environment
//! variable that holds the key (`api_key_env`), nothing more.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{EndpointConfig, SimProverParams, SimVerifierParams};
use crate::baselines::DebateShare;
use crate::protocol::{VerifierVariant, DEFAULT_FATIGUE_LIMIT, DEFAULT_MAX_ATTEMPTS};
use crate::simlab::SimScenario;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("agents.mode is {mode:?} but the [agents.{mode}] section is missing")]
    MissingSection { mode: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which engine answers the questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Deliberation,
    Sc,
    Usc,
    Debate,
    Reflexion,
}

impl std::fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MethodChoice::Deliberation => "deliberation",
            MethodChoice::Sc => "sc",
            MethodChoice::Usc => "usc",
            MethodChoice::Debate => "debate",
            MethodChoice::Reflexion => "reflexion",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub method: MethodChoice,
    #[serde(default = "default_variant")]
    pub verifier_variant: VerifierVariant,
    #[serde(default = "default_fatigue")]
    pub fatigue_limit: u32,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    pub seed: u64,
    pub dataset: PathBuf,
    pub output: PathBuf,
    /// Wall-clock budget per attempt, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_timeout_s: Option<u64>,
}

fn default_variant() -> VerifierVariant {
    VerifierVariant::Standard
}

fn default_fatigue() -> u32 {
    DEFAULT_FATIGUE_LIMIT
}

fn default_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentMode {
    Sim,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub mode: AgentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimAgentSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteAgentSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimAgentSettings {
    pub prover: SimProverParams,
    pub verifier: SimVerifierSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimVerifierSettings {
    pub challenge_prob: f64,
    pub slip_prob: f64,
    pub false_reject_prob: f64,
    #[serde(default = "default_detect")]
    pub detect_wrong_prob: f64,
}

fn default_detect() -> f64 {
    1.0
}

impl SimVerifierSettings {
    pub fn params(&self) -> SimVerifierParams {
        SimVerifierParams {
            challenge_prob: self.challenge_prob,
            slip_prob: self.slip_prob,
            false_reject_prob: self.false_reject_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteAgentSettings {
    pub prover: EndpointConfig,
    /// Separate verifier endpoint; defaults to the prover's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<EndpointConfig>,
}

/// Baseline-method knobs; every field has the conventional default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSettings {
    /// Sample count `k` for self-consistency and its aggregated variant.
    pub samples: u32,
    pub debate_agents: u32,
    pub debate_rounds: u32,
    pub debate_share: DebateShare,
    pub reflexion_trials: u32,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            samples: crate::baselines::DEFAULT_SAMPLES,
            debate_agents: crate::baselines::DEFAULT_DEBATE_AGENTS as u32,
            debate_rounds: crate::baselines::DEFAULT_DEBATE_ROUNDS,
            debate_share: DebateShare::Rationales,
            reflexion_trials: crate::baselines::DEFAULT_REFLEXION_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub run: RunSettings,
    pub agents: AgentsConfig,
    #[serde(default)]
    pub baseline: BaselineSettings,
    /// Scenario for the `simulate` subcommand; ignored by `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimScenario>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.agents.mode {
            AgentMode::Sim => {
                let sim = self
                    .agents
                    .sim
                    .as_ref()
                    .ok_or(ConfigError::MissingSection { mode: "sim" })?;
                sim.prover.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                sim.verifier.params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if !(0.0..=1.0).contains(&sim.verifier.detect_wrong_prob) {
                    return Err(ConfigError::Invalid(format!(
                        "detect_wrong_prob must lie in [0, 1], got {}",
                        sim.verifier.detect_wrong_prob
                    )));
                }
            }
            AgentMode::Remote => {
                if self.agents.remote.is_none() {
                    return Err(ConfigError::MissingSection { mode: "remote" });
                }
            }
        }
        if self.run.fatigue_limit == 0 {
            return Err(ConfigError::Invalid("fatigue_limit must be at least 1".into()));
        }
        if self.run.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be at least 1".into()));
        }
        if self.baseline.samples == 0 {
            return Err(ConfigError::Invalid("baseline.samples must be at least 1".into()));
        }
        if self.baseline.debate_agents < 2 {
            return Err(ConfigError::Invalid("baseline.debate_agents must be at least 2".into()));
        }
        if self.baseline.reflexion_trials == 0 {
            return Err(ConfigError::Invalid("baseline.reflexion_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Loads and validates a TOML configuration file.
pub fn load_config(path: &Path) -> Result<BenchConfig, ConfigError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: display.clone(), source })?;
    let config: BenchConfig = toml::from_str(&raw)
        .map_err(|source| ConfigError::Parse { path: display, source: Box::new(source) })?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const SIM_CONFIG: &str = r#"
[run]
method = "deliberation"
seed = 42
dataset = "questions.jsonl"
output = "out/transcripts.jsonl"

[agents]
mode = "sim"

[agents.sim.prover]
correct_prior = 0.5
revise_prob = 0.2
revise_toward_correct = 0.5

[agents.sim.verifier]
challenge_prob = 0.3
slip_prob = 0.5
false_reject_prob = 0.2
detect_wrong_prob = 0.8
"#;

    fn parse(text: &str) -> Result<BenchConfig, ConfigError> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        file.flush().unwrap();
        load_config(file.path())
    }

    #[test]
    fn sim_config_parses_with_defaults() {
        let config = parse(SIM_CONFIG).unwrap();
        assert_eq!(config.run.method, MethodChoice::Deliberation);
        assert_eq!(config.run.verifier_variant, VerifierVariant::Standard);
        assert_eq!(config.run.fatigue_limit, 12);
        assert_eq!(config.run.max_attempts, 1);
        assert_eq!(config.baseline.samples, 8);
        assert_eq!(config.baseline.debate_agents, 3);
        assert_eq!(config.baseline.debate_share, DebateShare::Rationales);
        let sim = config.agents.sim.unwrap();
        assert_eq!(sim.verifier.detect_wrong_prob, 0.8);
    }

    #[test]
    fn missing_backend_section_is_named() {
        let text = SIM_CONFIG.replace("[agents.sim.prover]", "[agents.simx.prover]");
        // The rename makes the whole [agents.sim] subtree unknown, which the
        // strict parser rejects before validation even runs.
        assert!(matches!(parse(&text), Err(ConfigError::Parse { .. })));

        let minimal = r#"
[run]
method = "sc"
seed = 1
dataset = "d.jsonl"
output = "o.jsonl"

[agents]
mode = "sim"
"#;
        match parse(minimal) {
            Err(ConfigError::MissingSection { mode }) => assert_eq!(mode, "sim"),
            other => panic!("expected missing section, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = SIM_CONFIG.replace("seed = 42", "seed = 42\nfatiguelimit = 9");
        assert!(matches!(parse(&text), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn out_of_range_sim_params_fail_validation() {
        let text = SIM_CONFIG.replace("challenge_prob = 0.3", "challenge_prob = 1.4");
        assert!(matches!(parse(&text), Err(ConfigError::Invalid(_))));
        let text = SIM_CONFIG.replace("detect_wrong_prob = 0.8", "detect_wrong_prob = -0.1");
        assert!(matches!(parse(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn zero_floors_fail_validation() {
        let text = SIM_CONFIG.replace("seed = 42", "seed = 42\nfatigue_limit = 0");
        assert!(matches!(parse(&text), Err(ConfigError::Invalid(_))));
        let text = SIM_CONFIG.replace("seed = 42", "seed = 42\nmax_attempts = 0");
        assert!(matches!(parse(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn remote_config_parses_without_resolving_credentials() {
        let text = r#"
[run]
method = "deliberation"
seed = 7
dataset = "d.jsonl"
output = "o.jsonl"

[agents]
mode = "remote"

[agents.remote.prover]
base_url = "https://model-host.invalid/v1"
model = "prover-large"
api_key_env = "PROVER_API_KEY"
temperature = 0.7

[agents.remote.verifier]
base_url = "https://model-host.invalid/v1"
model = "verifier-large"
api_key_env = "VERIFIER_API_KEY"
temperature = 0.2
"#;
        let config = parse(text).unwrap();
        let remote = config.agents.remote.as_ref().unwrap();
        assert_eq!(remote.prover.api_key_env, "PROVER_API_KEY");
        assert_eq!(remote.verifier.as_ref().unwrap().model, "verifier-large");
        // The snapshot must never contain a key value, only the variable name.
        let snapshot = serde_json::to_string(&config.agents).unwrap();
        assert!(snapshot.contains("PROVER_API_KEY"));
        assert!(!snapshot.to_lowercase().contains("secret"));
    }

    #[test]
    fn simulate_section_round_trips() {
        let text = format!(
            "{SIM_CONFIG}\n[simulate]\nfatigue_limit = 3\nn_questions = 100\nseed = 5\n\n\
             [simulate.prover]\ncorrect_prior = 0.0\nrevise_prob = 0.0\nrevise_toward_correct = 0.0\n\n\
             [simulate.verifier]\nchallenge_prob = 0.0\nslip_prob = 0.5\nfalse_reject_prob = 0.0\n"
        );
        let config = parse(&text).unwrap();
        let sim = config.simulate.unwrap();
        assert_eq!(sim.n_questions, 100);
        assert_eq!(sim.detect_wrong_prob, 1.0, "detection defaults to certain");
        assert_eq!(sim.max_attempts, 1);
    }
}
