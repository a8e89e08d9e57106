//! Benchmark I/O and orchestration: configuration, dataset ingest, transcript
//! persistence, run execution, reporting, and the command-line surface.
//!
//! Process exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 2    | configuration problem (bad TOML, invalid parameters, bad flags) |
//! | 3    | data problem (dataset/transcript ingest, filesystem, metrics input) |
//! | 4    | transport problem (remote agent or credential failure) |
//! | 5    | run finished but recorded per-question protocol failures |

pub mod cli;
pub mod config;
pub mod dataset;
pub mod report;
pub mod runner;
pub mod transcript;

use thiserror::Error;

use crate::agents::AgentError;
use crate::metrics::MetricsError;
use crate::protocol::RunError;
use crate::simlab::SimError;
use crate::stats::StatsError;

use config::ConfigError;
use dataset::IngestError;

/// Any failure the benchmark pipeline can surface to the process boundary.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error")]
    Config(#[from] ConfigError),
    #[error("data ingest error")]
    Ingest(#[from] IngestError),
    #[error("agent transport error")]
    Agent(#[from] AgentError),
    #[error("metrics error")]
    Metrics(#[from] MetricsError),
    #[error("statistics error")]
    Stats(#[from] StatsError),
    #[error("simulation error")]
    Sim(#[from] SimError),
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Maps the failure onto the process exit-code table above.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Stats(_) => 2,
            BenchError::Ingest(_) | BenchError::Metrics(_) | BenchError::Io(_) => 3,
            BenchError::Agent(_) => 4,
            // A simulated run only touches the network if an agent does;
            // every other simulation failure is a parameter problem.
            BenchError::Sim(SimError::Run(RunError::Agent(_))) => 4,
            BenchError::Sim(_) => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_cover_the_documented_table() {
        let config = BenchError::Config(ConfigError::Invalid("x".into()));
        assert_eq!(config.exit_code(), 2);
        let io = BenchError::Io(std::io::Error::other("x"));
        assert_eq!(io.exit_code(), 3);
        let metrics = BenchError::Metrics(MetricsError::Empty);
        assert_eq!(metrics.exit_code(), 3);
        let agent = BenchError::Agent(AgentError::MissingCredential { var: "X".into() });
        assert_eq!(agent.exit_code(), 4);
        let sim_param = BenchError::Sim(SimError::NoQuestions);
        assert_eq!(sim_param.exit_code(), 2);
        let sim_agent = BenchError::Sim(SimError::Run(RunError::Agent(
            AgentError::MissingCredential { var: "X".into() },
        )));
        assert_eq!(sim_agent.exit_code(), 4);
    }
}
