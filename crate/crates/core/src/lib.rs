//! Analysis, composition, and numerical verification of mass-action
//! chemical reaction networks.
//!
//! The crate is organized around a pipeline:
//!
//! * [`network`] — species, complexes, reactions, rate laws, and the
//!   mass-action right-hand side;
//! * [`parse`] — the `.crn` text format and its canonical printer;
//! * [`structure`] — linkage classes, reversibility, exact rank,
//!   deficiency, and positive conservation vectors;
//! * [`reduce`] — projecting a computer onto its output species, input
//!   concentrations absorbed into monomial rates;
//! * [`compose`] — wiring two computers output-to-input;
//! * [`certify`] — the structural sufficient condition for composability;
//! * [`dynamics`] — an adaptive Runge–Kutta integrator with steady-state
//!   detection, persistence probes, and the free-energy evaluator;
//! * [`verify`] — numerical discharge of computation and composition
//!   claims.

pub mod certify;
pub mod compose;
pub mod dynamics;
pub mod network;
pub mod parse;
pub mod reduce;
pub mod structure;
pub mod verify;

pub use network::{Complex, Crn, ModelError, MonomialRate, MsCrc, RateLaw, Reaction, Species};
pub use parse::{format_network, parse_network, Network, ParseError, ParseOptions};
