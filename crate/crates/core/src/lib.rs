pub mod group;
pub mod nn;
pub mod par;
pub mod quad;
pub mod swarm;
pub mod policy;
pub mod audit;
pub mod config;
pub mod ppo;
