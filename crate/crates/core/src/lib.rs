//! Orchestration and evaluation harness for heterogeneous multi-agent
//! vulnerability detection.
//!
//! Three role-specialized expert agents analyze a C/C++ function, an
//! independent verifier audits their reports, and the harness turns the
//! resulting predictions into detection metrics, cost ledgers and
//! cooperative/adversarial game analyses. Every agent call goes through a
//! [`provider::CompletionBackend`], so whole experiments can run offline
//! against scripted or replayed completions.

pub mod agents;
pub mod corpus;
pub mod cwe;
pub mod extraction;
pub mod gametheory;
pub mod metrics;
pub mod orchestrator;
pub mod provider;
pub mod report;

pub use cwe::Cwe;
