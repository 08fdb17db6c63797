// SPDX-License-Identifier: Apache-2.0

//! Deterministic simulation of a time-aware shaper realized in a switch
//! pipeline: gate control lists compiled to ternary match tables, gates
//! driven by generated control frames, per-stream ingress gating, DetNet to
//! TSN translation, and the measurement harness for its internal delays.

pub mod schedule;
pub mod tcam;
pub mod timing;
pub mod dataplane;
pub mod engine;
pub mod measure;
pub mod cli;
