//! Constrained reinforcement learning by reduction to a minimum-norm-point
//! problem over the measurement polytope of a vector-valued MDP.

pub mod geometry;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod solver;
