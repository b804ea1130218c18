//! Core algorithms for mining regression triples from commit histories.
//!
//! A regression triple pairs a regression-fixing commit (`rfc`), a
//! regression-inducing commit (`ric`), and a test `t` such that `t` passes
//! `rfc` and `ric - 1` but fails `rfc - 1` and `ric`. This crate holds
//! everything needed to find such triples that does not touch the outside
//! world: code-element models and similarity, regression-potential scoring,
//! test-dependency migration planning and reconciliation, the feedback-aware
//! history searches, commit semantic labeling, and a deterministic synthetic
//! repository harness used as the test bed.
//!
//! The crate is `no_std`-compatible (with `alloc`); repository adapters,
//! build runners, caches, and file formats live in the companion
//! `regress-miner` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod diff;
pub mod dsl;
pub mod evaluator;
pub mod history;
pub mod manifest;
pub mod migrate;
pub mod model;
pub mod potential;
pub mod search;
pub mod semantics;
pub mod sim;
pub mod text;
pub mod tree;

pub use history::{CommitHistory, CommitId, Evaluate, Feedback, FailureSignature, TestId};
pub use model::{Alignment, CodeElement, ElementKind, SimilarityWeights};
pub use tree::SourceTree;
