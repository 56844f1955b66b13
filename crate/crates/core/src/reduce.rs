//! Reduction of a computer onto its output species.
//!
//! Each reaction is projected onto the outputs; the reactant coefficients of
//! the removed input species move into the rate as a monomial factor, so the
//! reduced network reproduces the output dynamics of the original exactly.

use std::collections::BTreeMap;

use crate::network::{Crn, ModelError, MonomialRate, MsCrc, RateLaw, Reaction};
use crate::parse::format_complex;

/// A reaction whose projection had zero net change and was therefore left
/// out of the reduced network.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedReaction {
    /// Index into the original reaction list.
    pub index: usize,
    /// The original reaction, rendered with the original species names.
    pub text: String,
}

/// The projection of a computer onto its output species.
///
/// `base` is a network over the outputs only (re-indexed in increasing
/// original id order). A reaction whose original reactant involved input
/// species carries a [`RateLaw::TimeVarying`] monomial whose slots address
/// [`ReducedSystem::external_names`]; reactions untouched by inputs keep
/// plain constants. Projected duplicates are kept distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    base: Crn,
    external_names: Vec<String>,
    dropped: Vec<DroppedReaction>,
}

impl ReducedSystem {
    pub fn base(&self) -> &Crn {
        &self.base
    }

    /// Names of the removed input species, in increasing original id order;
    /// monomial slots and [`ReducedSystem::freeze_inputs`] use this order.
    pub fn external_names(&self) -> &[String] {
        &self.external_names
    }

    pub fn dropped(&self) -> &[DroppedReaction] {
        &self.dropped
    }

    /// Per-reaction `(rate constant, input exponents)` pairs.
    pub fn rate_specs(&self) -> Vec<(f64, Vec<(usize, u32)>)> {
        self.base
            .reactions()
            .iter()
            .map(|r| match r.rate() {
                RateLaw::Constant(k) => (*k, Vec::new()),
                RateLaw::TimeVarying(m) => (m.rate_constant, m.exponents.clone()),
            })
            .collect()
    }

    /// Substitutes fixed input concentrations into every monomial rate,
    /// yielding a plain constant-rate mass-action system.
    pub fn freeze_inputs(&self, frozen: &[f64]) -> Result<Crn, ModelError> {
        if frozen.len() != self.external_names.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.external_names.len(),
                got: frozen.len(),
            });
        }
        if let Some(i) = frozen.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(ModelError::NonPositiveRate(frozen[i]));
        }
        let reactions = self
            .base
            .reactions()
            .iter()
            .map(|r| {
                let k = r.rate().value(frozen);
                Reaction::new(r.reactant().clone(), r.product().clone(), RateLaw::Constant(k))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Crn::new(self.base.species_names(), reactions)
    }
}

/// Builds the reduced system of a computer.
///
/// Reactions whose projected net change is zero contribute nothing to the
/// output dynamics and would be self-loops in the projected graph; they are
/// dropped and recorded.
pub fn reduce_mscrc(computer: &MsCrc) -> ReducedSystem {
    let crn = computer.crn();
    let relabel: BTreeMap<usize, usize> = computer
        .outputs()
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let slot_of: BTreeMap<usize, usize> = computer
        .inputs()
        .iter()
        .enumerate()
        .map(|(slot, &old)| (old, slot))
        .collect();

    let mut reactions = Vec::new();
    let mut dropped = Vec::new();
    for (index, reaction) in crn.reactions().iter().enumerate() {
        let reactant = reaction.reactant().project(&relabel);
        let product = reaction.product().project(&relabel);
        if reactant == product {
            dropped.push(DroppedReaction {
                index,
                text: format!(
                    "{} -> {}",
                    format_complex(crn, reaction.reactant()),
                    format_complex(crn, reaction.product())
                ),
            });
            continue;
        }
        let rate_constant = match reaction.rate() {
            RateLaw::Constant(k) => *k,
            RateLaw::TimeVarying(m) => m.rate_constant,
        };
        let exponents: Vec<(usize, u32)> = reaction
            .reactant()
            .iter()
            .filter_map(|(id, c)| slot_of.get(&id).map(|&slot| (slot, c)))
            .collect();
        let rate = if exponents.is_empty() {
            RateLaw::Constant(rate_constant)
        } else {
            RateLaw::TimeVarying(MonomialRate {
                rate_constant,
                exponents,
            })
        };
        reactions.push(
            Reaction::new(reactant, product, rate)
                .expect("projected reaction is nontrivial with a positive rate"),
        );
    }

    let base = Crn::new(computer.output_names(), reactions)
        .expect("projected complexes only reference output species");
    ReducedSystem {
        base,
        external_names: computer.input_names(),
        dropped,
    }
}
