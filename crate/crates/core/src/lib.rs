//! Laser-charged multi-UAV IoT data collection: a deterministic simulator,
//! a recurrent multi-agent PPO trainer with a dual-value centralized critic,
//! heuristic baselines and an exhaustive-search oracle for tiny instances.

pub mod harness;
pub mod nets;
pub mod oracle;
pub mod physics;
pub mod scalar;
pub mod tensor;
pub mod trainer;
pub mod world;

pub use scalar::Real;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Actor64 = nets::Actor<f64>;
pub type Critic64 = nets::Critic<f64>;
pub type PolicyBundle64 = nets::PolicyBundle<f64>;
pub type ChannelParams64 = physics::ChannelParams<f64>;
pub type LaserParams64 = physics::LaserParams<f64>;
pub type PropulsionParams64 = physics::PropulsionParams<f64>;
