//! Dynamic edge-network simulator: mobile devices, a banded radio channel
//! and round-robin split-learning epochs.

pub mod channel;
pub mod mobility;
pub mod scenario;
pub mod sim;

pub use channel::{path_loss_db, shannon_rate_bps, LinkParams, RateTable};
pub use scenario::{parse_scenario, Band, ChannelCondition, DeviceSpec, Scenario, ScenarioConfig};
pub use sim::{simulate, simulate_all, summarize, write_csv, EpochLink, EpochReport, Simulation, Strategy, Summary};
