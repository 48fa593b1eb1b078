//! The learned value function and the actor–critic loops around it.

pub mod agent;
pub mod checkpoint;
pub mod features;
pub mod network;
pub mod replay;
pub mod train;

pub use agent::{run_drld, Agent, DecisionPolicy};
pub use checkpoint::Checkpoint;
pub use features::{reward, reward_threshold, target_value, FeatureEncoder, ThresholdRule};
pub use network::CriticNetwork;
pub use replay::{ReplayMemory, Transition};
pub use train::{train, TrainConfig, TrainingLog, TrainingSetup};
