//! Operator tooling for the relay testbed: scenario runs, the attack suite,
//! benchmarks and audit lookups.

pub mod attacks;
pub mod audit;
pub mod benchmark;
pub mod report;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const WORKLOAD_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const ATTACK_SUITE: i32 = 3;
}
