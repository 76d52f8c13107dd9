//! Huge-page-aware allocation, a watched-literal CDCL solver whose clause
//! memory lives in that allocator, an LRU TLB model, and a paired
//! THP-on/THP-off benchmark harness.

pub mod alloc;
pub mod chase;
pub mod cnf;
pub mod harness;
pub mod metrics;
pub mod solver;
pub mod tlb;
