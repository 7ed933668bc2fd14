//! Scenario-driven front end for `hjlab-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod expr;
pub mod report;
pub mod scenario;
