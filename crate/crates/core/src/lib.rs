//! Knowledge integration for Power-to-X digital twins.
//!
//! The pipeline reads Asset Administration Shells describing behavior
//! models ([`aas`], [`ingest`]), builds a typed knowledge graph of the
//! production system ([`kgraph`]), links physically compatible model ports
//! ([`matcher`]) and uses the result to select and adapt model
//! configurations in a desk-scale control loop ([`adaption`]).

pub mod aas;
pub mod adaption;
pub mod cli;
pub mod demo;
pub mod ingest;
pub mod kgraph;
pub mod matcher;
