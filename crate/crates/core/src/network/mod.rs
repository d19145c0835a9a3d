//! Sensor-network topology, Metropolis consensus weights and the
//! centralized and distributed multi-sensor step orchestration.

mod graph;
mod step;

pub use graph::{metropolis_weights, SensorGraph};
pub use step::{
    align_labels, centralized_step, distributed_step, sensor_births, CentralizedState, ConsensusConfig,
    DistributedState, LocalMemory, NetworkModel, NodeState, Region, BIRTH_INDEX_STRIDE,
};
