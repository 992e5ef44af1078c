//! Lineup-based discrimination benchmark for grammatical error feedback.
//!
//! The core idea: take a learner essay with annotated corrections, build a
//! *lineup* of partially corrected versions at graded correction rates, have a
//! model produce feedback for each version, then ask a judge model to match
//! each feedback against every member of the lineup. A good feedback response
//! should be matched to the version it was written for; the matching accuracy
//! is the benchmark score.
//!
//! Modules, bottom-up:
//!
//! * [`corpus`]: tokenization, the M² annotation format with its redaction
//!   variants, inline-markup corpora, and the essay manifest.
//! * [`lineup`]: deterministic selection and application of edit subsets.
//! * [`metrics`]: untyped edit extraction, edit-overlap P/R/F, and the
//!   source-aware n-gram fluency score.
//! * [`gateway`]: chat-completion client with prompt catalog, yes/no
//!   probability probing, response cache, and offline mock backends.
//! * [`pipeline`]: the three benchmark stages: correction, feedback
//!   generation, discrimination.
//! * [`report`]: CSV tables and SVG charts from evaluation reports.
//!
//! Each capability has a runnable program under `examples/`; start with
//! `cargo run -p gef-lineup --example offline_pipeline`.

pub mod corpus;
pub mod lineup;
pub mod metrics;
pub mod gateway;
pub mod pipeline;
pub mod report;
pub mod cli;
