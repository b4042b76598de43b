//! Differentially private agnostic learning on finite domains.
//!
//! The crate converts private realizable learners into private agnostic
//! learners by privately relabeling a subsample, scoring candidate labelings
//! against the whole dataset. It also ships private prediction, exact
//! error calculators, a Monte Carlo privacy auditor and an experiment harness.

pub mod audit;
pub mod concepts;
pub mod data;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod metrics;
pub mod prediction;
pub mod rational;
pub mod transform;

pub use concepts::{Candidate, CandidateSet, ClassKind, Concept, ConceptClass, Hypothesis, WeightedInstance};
pub use data::{Dataset, DomainPoint, IndexSet, LabeledExample, RandomStream, UnlabeledDataset};
pub use error::{Error, Result};
pub use rational::Rational;
