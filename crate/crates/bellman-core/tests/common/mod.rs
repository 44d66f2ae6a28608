//! Shared helpers for the integration suites: loading the shipped example
//! configs and assembling candidates at example-specific radii.
//!
//! Not every test target uses every helper.
#![allow(dead_code)]

use bellman_core::boundary::{BoundaryConfig, BoundaryFunction};
use bellman_core::evolution::{evolve, EvolutionTrace};
use bellman_core::foliation::{solve, Solved};

/// Load a shipped config by file stem.
pub fn load(name: &str) -> BoundaryFunction {
    let path = format!("{}/../../configs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    BoundaryConfig::from_json(&text)
        .unwrap_or_else(|e| panic!("{path}: {e}"))
        .build()
        .unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Evolve to `eps` and assemble the candidate there.
pub fn candidate(bf: &BoundaryFunction, eps: f64) -> (EvolutionTrace, Solved) {
    let trace = evolve(bf, eps).unwrap_or_else(|e| panic!("evolve to {eps}: {e}"));
    let s = solve(bf, trace.final_picture(), eps)
        .unwrap_or_else(|e| panic!("solve at {eps}: {e}"));
    (trace, s)
}

/// The shipped examples exercised by the cross-example suites, with the
/// radius each one is assembled at.
pub const EXAMPLES: &[(&str, f64)] = &[
    ("exp", 0.5),
    ("quartic_plus", 0.5),
    ("quartic_minus", 0.8),
    ("quintic", 0.9),
    ("sextic_plus_c0", 0.69),
    ("sextic_plus_c05", 0.6),
    ("sextic_minus_c0", 2.0),
    ("sextic_minus_c05", 1.0),
    ("cubic_solid", 0.5),
    ("sine_monster", 0.5),
];
