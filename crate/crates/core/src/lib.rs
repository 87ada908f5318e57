//! Neural-guided CDCL SAT solving built around UNSAT-core prediction.
//!
//! The pipeline: encode a CNF formula as a weighted literal-incidence graph,
//! run a weighted graph convolutional network to score each variable's
//! likelihood of belonging to the UNSAT-core, and seed a CDCL solver's
//! decision queue and decision scores with those probabilities. Everything
//! required to reproduce that loop at desk scale lives here: DIMACS I/O,
//! graph encoders, the network with hand-derived gradients, a complete CDCL
//! solver with assumption-based core extraction, synthetic instance
//! generators, corpus labeling, and a benchmark harness.

pub mod bench;
pub mod brute;
pub mod cnf;
pub mod datagen;
pub mod dimacs;
pub mod graph;
pub mod labeling;
pub mod model;
pub mod solver;
